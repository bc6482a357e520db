use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Manoeuvre, TestCase};
use crate::kinematics::WHEEL_COUNT;
use crate::sim::{Scenario, MAX_PAYLOAD_KG, MAX_TILT_DEG};

/// The campaign shipped with the crate.
pub const DEFAULT_CAMPAIGN: &str = include_str!("../../campaigns/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub seed: u64,
    #[serde(default)]
    pub description: String,
    pub scenarios: BTreeMap<String, Scenario>,
    #[serde(rename = "case")]
    pub cases: Vec<TestCase>,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("parse error at line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },
    #[error("schema violation{}: {message}", case.as_ref().map(|c| format!(" in case '{c}'")).unwrap_or_default())]
    SchemaViolation { case: Option<String>, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Campaign {
    pub fn scenario_for(&self, case: &TestCase) -> &Scenario {
        &self.scenarios[&case.scenario]
    }

    pub fn case(&self, id: &str) -> Option<&TestCase> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let global = |message: String| CampaignError::SchemaViolation { case: None, message };
        if self.cases.is_empty() {
            return Err(global("campaign has no cases".into()));
        }
        for (name, s) in &self.scenarios {
            s.validate().map_err(|e| global(format!("scenario '{name}': {e}")))?;
        }
        let mut ids = BTreeSet::new();
        for case in &self.cases {
            let fail = |message: String| CampaignError::SchemaViolation {
                case: Some(case.id.clone()),
                message,
            };
            if case.id.is_empty() || !case.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(fail("id must be non-empty ASCII letters, digits, '_' or '-'".into()));
            }
            if !ids.insert(case.id.as_str()) {
                return Err(fail("duplicate case id".into()));
            }
            if !self.scenarios.contains_key(&case.scenario) {
                return Err(fail(format!("unknown scenario '{}'", case.scenario)));
            }
            if let Some(w) = case.inject_steering_stall {
                if w >= WHEEL_COUNT {
                    return Err(fail(format!("inject_steering_stall must be below {WHEEL_COUNT}")));
                }
            }
            let th = &case.thresholds;
            let positive = [
                th.speed_tolerance,
                th.excavation_speed_tolerance,
                th.max_drift_fraction,
                th.max_mean_slip,
                th.significant_slip_yaw_efficiency,
                th.min_yaw_efficiency,
                th.completion_fraction,
                th.transition_timeout_s,
            ];
            if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(fail("thresholds must be positive".into()));
            }
            validate_manoeuvre(&case.manoeuvre).map_err(fail)?;
        }
        Ok(())
    }
}

fn validate_manoeuvre(m: &Manoeuvre) -> Result<(), String> {
    let pos = |v: f64, name: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(format!("{name} must be positive"))
        }
    };
    if let Some(a) = m.slope_deg() {
        if !(0.0..=MAX_TILT_DEG).contains(&a) {
            return Err(format!("slope {a} deg outside the bed range 0..={MAX_TILT_DEG} deg"));
        }
    }
    match m {
        Manoeuvre::ModeMatrix { drive_s } => pos(*drive_s, "drive_s"),
        Manoeuvre::FlatTraverse { speeds_mps, distance_m } => {
            if speeds_mps.is_empty() {
                return Err("speeds_mps must not be empty".into());
            }
            speeds_mps.iter().try_for_each(|v| pos(*v, "speeds_mps"))?;
            pos(*distance_m, "distance_m")
        }
        Manoeuvre::UpSlope { speed_mps, distance_m, .. } | Manoeuvre::CrossSlope { speed_mps, distance_m, .. } => {
            pos(*speed_mps, "speed_mps")?;
            pos(*distance_m, "distance_m")
        }
        Manoeuvre::PointTurnOnSlope { omega_radps, turn_deg, .. } => {
            pos(*omega_radps, "omega_radps")?;
            pos(*turn_deg, "turn_deg")?;
            if *turn_deg >= 180.0 {
                return Err("turn_deg must be below 180".into());
            }
            Ok(())
        }
        Manoeuvre::ObstacleRun { heights_m, speed_mps, distance_m } => {
            if heights_m.is_empty() || !heights_m.iter().all(|h| h.is_finite() && *h >= 0.0) {
                return Err("heights_m must be a non-empty list of non-negative heights".into());
            }
            pos(*speed_mps, "speed_mps")?;
            pos(*distance_m, "distance_m")
        }
        Manoeuvre::Excavation { payload_kg, drag_n, speed_mps, distance_m } => {
            if !(0.0..=MAX_PAYLOAD_KG).contains(payload_kg) {
                return Err(format!("payload_kg must be within 0..={MAX_PAYLOAD_KG}"));
            }
            if !(drag_n.is_finite() && *drag_n >= 0.0) {
                return Err("drag_n must be non-negative".into());
            }
            pos(*speed_mps, "speed_mps")?;
            pos(*distance_m, "distance_m")
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses and validates campaign text.
pub fn parse_campaign(text: &str) -> Result<Campaign, CampaignError> {
    if text.trim().is_empty() {
        return Err(CampaignError::Parse {
            line: 1,
            column: None,
            message: "empty campaign file".into(),
        });
    }
    let campaign: Campaign = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_col(text, span.start);
                (l, Some(c))
            }
            None => (1, None),
        };
        CampaignError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    campaign.validate()?;
    Ok(campaign)
}

pub fn load_campaign(path: impl AsRef<Path>) -> Result<Campaign, CampaignError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CampaignError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_campaign(&text)
}
