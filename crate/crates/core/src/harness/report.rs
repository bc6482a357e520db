use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::CaseRun;
use super::{Family, RequirementConstants, TestReport, Verdict, REQUIREMENTS};
use crate::kinematics::WHEEL_COUNT;
use crate::sim::Simulator;

pub const METRICS_HEADER: &str = "case_id,t_s,state,mode,x_m,y_m,yaw_rad,pitch_rad,roll_rad,\
cmd_vx_mps,cmd_vy_mps,cmd_omega_radps,act_vx_mps,act_vy_mps,act_omega_radps,slip_mean,max_current_a,max_temp_c";

/// One telemetry tick of one case.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub case_id: String,
    pub t_s: f64,
    pub state: &'static str,
    pub mode: &'static str,
    pub pose: [f64; 5],
    pub commanded: [f64; 3],
    pub actual: [f64; 3],
    pub slip_mean: f64,
    pub max_current_a: f64,
    pub max_temp_c: f64,
}

impl MetricRow {
    pub fn sample(case_id: &str, sim: &Simulator) -> Self {
        let w = sim.world();
        let p = &w.true_pose;
        let (c, a) = (&w.commanded_twist, &w.actual_twist);
        let motors = w.wheel_motors.iter().chain(w.steering_motors.iter());
        let (cur, temp) = motors.fold((0.0f64, f64::NEG_INFINITY), |(c, t), m| (c.max(m.current_a.abs()), t.max(m.temp_c)));
        let state = sim.manager().state();
        Self {
            case_id: case_id.to_string(),
            t_s: w.time_s,
            state: state.name(),
            mode: state.mode().map_or("", |m| m.as_str()),
            pose: [p.x_m, p.y_m, p.yaw_rad, p.pitch_rad, p.roll_rad],
            commanded: [c.vx_mps, c.vy_mps, c.omega_radps],
            actual: [a.vx_mps, a.vy_mps, a.omega_radps],
            slip_mean: w.slip.iter().sum::<f64>() / WHEEL_COUNT as f64,
            max_current_a: cur,
            max_temp_c: temp,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{:.3},{},{}", self.case_id, self.t_s, self.state, self.mode);
        for v in self.pose.iter().chain(&self.commanded).chain(&self.actual) {
            let _ = write!(s, ",{v:.6}");
        }
        let _ = write!(s, ",{:.6},{:.4},{:.4}", self.slip_mean, self.max_current_a, self.max_temp_c);
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub cases: u32,
    pub passed: u32,
    pub expected_flags: u32,
    pub failed: u32,
}

impl Totals {
    fn add(&mut self, v: &Verdict) {
        self.cases += 1;
        match v {
            Verdict::Pass => self.passed += 1,
            Verdict::ExpectedFlag { .. } => self.expected_flags += 1,
            Verdict::Fail { .. } => self.failed += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseLine {
    pub id: String,
    pub family: Family,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcavationTotals {
    pub payload_per_cycle_kg: u32,
    pub cycles: u32,
    pub total_kg: u32,
    pub cases_within_limits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub seed: u64,
    pub all_ok: bool,
    pub totals: Totals,
    pub families: BTreeMap<Family, Totals>,
    pub requirements: RequirementConstants,
    pub excavation: ExcavationTotals,
    pub cases: Vec<CaseLine>,
}

pub fn summarize(seed: u64, reports: &[TestReport]) -> CampaignSummary {
    let mut totals = Totals::default();
    let mut families: BTreeMap<Family, Totals> = BTreeMap::new();
    for r in reports {
        totals.add(&r.verdict);
        families.entry(r.family).or_default().add(&r.verdict);
    }
    CampaignSummary {
        seed,
        all_ok: reports.iter().all(|r| r.verdict.is_ok()),
        totals,
        families,
        requirements: REQUIREMENTS,
        excavation: ExcavationTotals {
            payload_per_cycle_kg: REQUIREMENTS.isru_payload_kg,
            cycles: REQUIREMENTS.isru_cycles,
            total_kg: REQUIREMENTS.isru_total_kg,
            cases_within_limits: reports
                .iter()
                .filter(|r| r.family == Family::Excavator && r.verdict.is_ok())
                .count() as u32,
        },
        cases: reports
            .iter()
            .map(|r| CaseLine {
                id: r.id.clone(),
                family: r.family,
                verdict: r.verdict.clone(),
            })
            .collect(),
    }
}

fn json<T: Serialize>(v: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

/// Writes `cases/<id>.json`, `summary.json` and `metrics.csv` under `out_dir`,
/// replacing any previous report set there.
pub fn emit_reports(runs: &[CaseRun], seed: u64, out_dir: &Path) -> io::Result<CampaignSummary> {
    let cases_dir = out_dir.join("cases");
    if cases_dir.exists() {
        std::fs::remove_dir_all(&cases_dir)?;
    }
    std::fs::create_dir_all(&cases_dir)?;
    for run in runs {
        std::fs::write(cases_dir.join(format!("{}.json", run.report.id)), json(&run.report)?)?;
    }
    let reports: Vec<TestReport> = runs.iter().map(|r| r.report.clone()).collect();
    let summary = summarize(seed, &reports);
    std::fs::write(out_dir.join("summary.json"), json(&summary)?)?;
    let mut csv = String::from(METRICS_HEADER);
    csv.push('\n');
    for row in runs.iter().flat_map(|r| &r.rows) {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    std::fs::write(out_dir.join("metrics.csv"), csv)?;
    Ok(summary)
}
