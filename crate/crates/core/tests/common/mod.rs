//! Random command-sequence driver for the locomotion manager.

#![allow(dead_code)]

use emrs_core::kinematics::{BodyMotionCommand, LocomotionMode, WheelArray};
use emrs_core::manager::{LocomotionManager, ManagerCommand, ManagerConfig, ManagerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TICK_S: f64 = 0.01;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Audit {
    pub ticks: usize,
    pub reconfigurations: usize,
    /// Nonzero wheel speed while steering moves between home configurations.
    pub speed_during_reconfiguration: usize,
    /// Steering setpoint step larger than max_rate * dt.
    pub teleports: usize,
    /// Nonzero output between a fault and the next reset.
    pub fault_leaks: usize,
    pub trace: Vec<(&'static str, WheelArray<f64>)>,
}

fn random_command(rng: &mut ChaCha8Rng) -> ManagerCommand<f64> {
    let mode = LocomotionMode::ALL[rng.random_range(0..4)];
    match rng.random_range(0..100) {
        0..=59 => {
            // Occasionally out of limits or for the wrong mode.
            let v = rng.random_range(-0.25..0.25);
            let w = rng.random_range(-0.6..0.6);
            let command = match mode {
                LocomotionMode::Ackermann => BodyMotionCommand::Ackermann { v_mps: v, omega_radps: w },
                LocomotionMode::PointTurn => BodyMotionCommand::PointTurn { omega_radps: w },
                LocomotionMode::Crab => BodyMotionCommand::Crab {
                    v_mps: v,
                    heading_rad: rng.random_range(-1.5..1.5),
                },
                LocomotionMode::SkidSteer => BodyMotionCommand::Skid { v_mps: v, omega_radps: w },
            };
            ManagerCommand::Speed { command }
        }
        60..=89 => ManagerCommand::ChangeMode { mode },
        90..=94 => ManagerCommand::EStop,
        _ => ManagerCommand::Reset,
    }
}

/// Drives a fresh manager through `ticks` control periods of random commands and audits every output.
pub fn fuzz_sequence(seed: u64, ticks: usize) -> Audit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = LocomotionManager::<f64>::new(Default::default(), ManagerConfig::default());
    let max_step = m.config().steering_profile.max_rate_radps * TICK_S + 1e-12;
    let mut audit = Audit::default();
    let mut prev = m.tick(0.0).steering_rad;
    let mut faulted = false;

    for k in 1..=ticks {
        let now = k as f64 * TICK_S;
        if rng.random_bool(0.15) {
            let cmd = random_command(&mut rng);
            let out = m.handle_command(cmd, now);
            if matches!(cmd, ManagerCommand::ChangeMode { .. })
                && matches!(m.state(), ManagerState::Reconfiguring { .. })
            {
                audit.reconfigurations += 1;
            }
            match m.state() {
                ManagerState::Fault(_) => faulted = true,
                ManagerState::Idle => faulted = false,
                _ => {}
            }
            if faulted {
                if let Ok(sp) = out {
                    if !sp.is_stopped() {
                        audit.fault_leaks += 1;
                    }
                }
            }
        }
        let before = *m.state();
        let out = m.tick(now);
        let moving_between_homes = matches!(before, ManagerState::Reconfiguring { .. })
            && (matches!(m.state(), ManagerState::Reconfiguring { .. }) || out.steering_rad != prev);
        if moving_between_homes && !out.is_stopped() {
            audit.speed_during_reconfiguration += 1;
        }
        if out.steering_rad.iter().zip(prev).any(|(a, b)| (a - b).abs() > max_step) {
            audit.teleports += 1;
        }
        if faulted && (!out.is_stopped() || out.steering_rad != prev) {
            audit.fault_leaks += 1;
        }
        prev = out.steering_rad;
        audit.ticks += 1;
        audit.trace.push((m.state().name(), out));
    }
    audit
}
