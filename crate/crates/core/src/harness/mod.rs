//! Declarative test campaigns: scripted teleoperation runs against the simulator,
//! with per-case metrics, verdicts and machine-readable reports.

mod campaign;
mod report;
mod run;

use serde::{Deserialize, Serialize};

use crate::sim::StartPose;

pub use campaign::{load_campaign, parse_campaign, Campaign, CampaignError, DEFAULT_CAMPAIGN};
pub use report::{
    emit_reports, summarize, CampaignSummary, CaseLine, ExcavationTotals, MetricRow, Totals, METRICS_HEADER,
};
pub use run::{mode_matrix_case, run_campaign, run_case, CaseRun};

/// Fixed requirement figures the campaign reports against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementConstants {
    pub min_traverse_speed_mm_s: u32,
    pub max_static_pitch_roll_deg: u32,
    pub isru_payload_kg: u32,
    pub isru_cycles: u32,
    pub isru_total_kg: u32,
}

pub const REQUIREMENTS: RequirementConstants = RequirementConstants {
    min_traverse_speed_mm_s: 25,
    max_static_pitch_roll_deg: 15,
    isru_payload_kg: 300,
    isru_cycles: 42,
    isru_total_kg: 300 * 42,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Manoeuvre {
    ModeMatrix {
        #[serde(default = "default_drive_s")]
        drive_s: f64,
    },
    FlatTraverse {
        speeds_mps: Vec<f64>,
        distance_m: f64,
    },
    UpSlope {
        angle_deg: f64,
        speed_mps: f64,
        distance_m: f64,
    },
    CrossSlope {
        angle_deg: f64,
        speed_mps: f64,
        distance_m: f64,
    },
    PointTurnOnSlope {
        angle_deg: f64,
        omega_radps: f64,
        turn_deg: f64,
    },
    ObstacleRun {
        heights_m: Vec<f64>,
        speed_mps: f64,
        distance_m: f64,
    },
    Excavation {
        payload_kg: f64,
        drag_n: f64,
        speed_mps: f64,
        distance_m: f64,
    },
}

fn default_drive_s() -> f64 {
    1.0
}

impl Manoeuvre {
    pub fn family(&self) -> Family {
        match self {
            Manoeuvre::ModeMatrix { .. } | Manoeuvre::PointTurnOnSlope { .. } => Family::LocomotionModes,
            Manoeuvre::FlatTraverse { .. } => Family::FlatSurface,
            Manoeuvre::UpSlope { .. } => Family::UpSlope,
            Manoeuvre::CrossSlope { .. } => Family::CrossSlope,
            Manoeuvre::ObstacleRun { .. } => Family::ObstacleClearing,
            Manoeuvre::Excavation { .. } => Family::Excavator,
        }
    }

    pub fn slope_deg(&self) -> Option<f64> {
        match self {
            Manoeuvre::UpSlope { angle_deg, .. }
            | Manoeuvre::CrossSlope { angle_deg, .. }
            | Manoeuvre::PointTurnOnSlope { angle_deg, .. } => Some(*angle_deg),
            _ => None,
        }
    }
}

/// The six manoeuvre classes of the field campaign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LocomotionModes,
    FlatSurface,
    UpSlope,
    CrossSlope,
    ObstacleClearing,
    Excavator,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::LocomotionModes,
        Family::FlatSurface,
        Family::UpSlope,
        Family::CrossSlope,
        Family::ObstacleClearing,
        Family::Excavator,
    ];
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    Pass,
    SignificantSlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Allowed relative error of mean speed on flat ground.
    pub speed_tolerance: f64,
    /// Allowed relative error of mean speed while excavating.
    pub excavation_speed_tolerance: f64,
    /// Cross-track drift as a fraction of distance travelled.
    pub max_drift_fraction: f64,
    pub max_mean_slip: f64,
    /// Yaw efficiency below this is significant slip.
    pub significant_slip_yaw_efficiency: f64,
    /// Yaw efficiency a point turn must reach to pass.
    pub min_yaw_efficiency: f64,
    /// Distance fraction that counts as having completed a run.
    pub completion_fraction: f64,
    pub transition_timeout_s: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            speed_tolerance: 0.05,
            excavation_speed_tolerance: 0.10,
            max_drift_fraction: 0.02,
            max_mean_slip: 0.2,
            significant_slip_yaw_efficiency: 0.8,
            min_yaw_efficiency: 0.9,
            completion_fraction: 0.95,
            transition_timeout_s: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    pub scenario: String,
    pub manoeuvre: Manoeuvre,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub start: Option<StartPose>,
    /// Jam one steering joint (wheel index) before the run.
    #[serde(default)]
    pub inject_steering_stall: Option<usize>,
}

/// One straight scripted run inside a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub commanded_mps: f64,
    pub duration_s: f64,
    pub distance_m: f64,
    pub mean_speed_mps: f64,
    pub cross_track_drift_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleOutcome {
    pub height_m: f64,
    pub height_over_radius: f64,
    pub traversed: bool,
    pub expected_traversable: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub completed: bool,
    /// Distance-weighted over all segments.
    pub mean_speed_mps: Option<f64>,
    /// Largest over all segments.
    pub cross_track_drift_m: Option<f64>,
    pub segments: Vec<Segment>,
    pub slip_ratio_mean: f64,
    pub slip_ratio_max: f64,
    pub yaw_efficiency: Option<f64>,
    pub max_current_a: f64,
    pub max_temp_c: f64,
    pub current_limit_a: f64,
    pub temp_limit_c: f64,
    pub transitions_completed: u32,
    pub transitions_total: u32,
    pub reconfiguration_speed_violations: u64,
    pub obstacles: Vec<ObstacleOutcome>,
    pub faults: Vec<String>,
    pub terminal: Option<String>,
    pub sim_time_s: f64,
}

impl Metrics {
    pub(crate) fn summarize_segments(&mut self) {
        let time: f64 = self.segments.iter().map(|s| s.duration_s).sum();
        if self.segments.is_empty() || time <= 0.0 {
            return;
        }
        let dist: f64 = self.segments.iter().map(|s| s.distance_m.abs()).sum();
        self.mean_speed_mps = Some(dist / time);
        self.cross_track_drift_m = Some(self.segments.iter().fold(0.0, |a, s| a.max(s.cross_track_drift_m)));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    ExpectedFlag { flag: String },
    Fail { reasons: Vec<String> },
}

impl Verdict {
    /// Pass or an anticipated flag.
    pub fn is_ok(&self) -> bool {
        !matches!(self, Verdict::Fail { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub id: String,
    pub family: Family,
    pub seed: u64,
    pub case: TestCase,
    pub metrics: Metrics,
    pub verdict: Verdict,
    /// Where the per-tick rows of this case live.
    pub trace_ref: String,
}

/// Verdict from stored metrics alone.
pub fn evaluate(case: &TestCase, m: &Metrics) -> Verdict {
    let th = &case.thresholds;
    let mut reasons = Vec::new();
    let mut flag = None;
    if let Some(t) = &m.terminal {
        reasons.push(format!("SimTerminal: {t}"));
    }
    for f in &m.faults {
        reasons.push(format!("Fault: {f}"));
    }
    if !m.completed {
        reasons.push("Incomplete".to_string());
    }
    match &case.manoeuvre {
        Manoeuvre::ModeMatrix { .. } => {
            if m.transitions_completed < m.transitions_total {
                reasons.push(format!(
                    "TransitionTimeout: {}/{} transitions",
                    m.transitions_completed, m.transitions_total
                ));
            }
            if m.reconfiguration_speed_violations > 0 {
                reasons.push(format!(
                    "InvariantViolation: {} wheel-speed setpoints during reconfiguration",
                    m.reconfiguration_speed_violations
                ));
            }
        }
        Manoeuvre::FlatTraverse { .. } => {
            for s in &m.segments {
                let err = (s.mean_speed_mps - s.commanded_mps).abs() / s.commanded_mps.abs();
                if err > th.speed_tolerance {
                    reasons.push(format!("SpeedError: {:.4} m/s vs {:.4} m/s", s.mean_speed_mps, s.commanded_mps));
                }
                if s.cross_track_drift_m > th.max_drift_fraction * s.distance_m.abs() {
                    reasons.push(format!("Drift: {:.4} m over {:.3} m", s.cross_track_drift_m, s.distance_m));
                }
            }
        }
        Manoeuvre::UpSlope { .. } | Manoeuvre::CrossSlope { .. } => {
            if m.slip_ratio_mean >= th.max_mean_slip {
                reasons.push(format!("Slip: mean {:.4}", m.slip_ratio_mean));
            }
        }
        Manoeuvre::PointTurnOnSlope { .. } => match m.yaw_efficiency {
            None => reasons.push("NoYawMeasurement".to_string()),
            Some(e) if e < th.significant_slip_yaw_efficiency => flag = Some(format!("SignificantSlip: yaw efficiency {e:.4}")),
            Some(e) if e < th.min_yaw_efficiency => reasons.push(format!("YawEfficiency: {e:.4}")),
            Some(_) => {}
        },
        Manoeuvre::ObstacleRun { .. } => {
            for o in &m.obstacles {
                if o.traversed != o.expected_traversable {
                    reasons.push(format!(
                        "ObstacleOutcome: h/r {:.3} traversed={} expected={}",
                        o.height_over_radius, o.traversed, o.expected_traversable
                    ));
                }
            }
        }
        Manoeuvre::Excavation { .. } => {
            for s in &m.segments {
                let err = (s.mean_speed_mps - s.commanded_mps).abs() / s.commanded_mps.abs();
                if err > th.excavation_speed_tolerance {
                    reasons.push(format!("SpeedError: {:.4} m/s vs {:.4} m/s", s.mean_speed_mps, s.commanded_mps));
                }
            }
            if m.max_current_a >= m.current_limit_a {
                reasons.push(format!("Current: {:.2} A", m.max_current_a));
            }
            if m.max_temp_c >= m.temp_limit_c {
                reasons.push(format!("Temperature: {:.2} C", m.max_temp_c));
            }
        }
    }
    match (case.expect, flag) {
        (_, _) if !reasons.is_empty() => Verdict::Fail { reasons },
        (Expectation::Pass, None) => Verdict::Pass,
        (Expectation::SignificantSlip, Some(flag)) => Verdict::ExpectedFlag { flag },
        (Expectation::Pass, Some(flag)) => Verdict::Fail { reasons: vec![flag] },
        (Expectation::SignificantSlip, None) => Verdict::Fail {
            reasons: vec!["ExpectedSignificantSlip".to_string()],
        },
    }
}
