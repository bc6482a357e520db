//! Locomotion software for a four-wheel independently steered rover, and the
//! deterministic analogue-test simulator it is exercised against.

pub mod control;
pub mod harness;
pub mod kinematics;
pub mod linalg;
pub mod manager;
pub mod scalar;
pub mod sim;
pub mod telemetry;

pub use scalar::Scalar;

pub type RoverGeometryF64 = kinematics::RoverGeometry<f64>;
pub type RoverGeometryF32 = kinematics::RoverGeometry<f32>;
pub type BodyMotionCommandF64 = kinematics::BodyMotionCommand<f64>;
pub type BodyMotionCommandF32 = kinematics::BodyMotionCommand<f32>;
pub type WheelArrayF64 = kinematics::WheelArray<f64>;
pub type WheelArrayF32 = kinematics::WheelArray<f32>;
pub type LocomotionManagerF64 = manager::LocomotionManager<f64>;
pub type LocomotionManagerF32 = manager::LocomotionManager<f32>;

#[cfg(test)]
mod tests {
    use super::*;
    use kinematics::{forward_odometry, inverse_kinematics, LocomotionMode};
    use manager::{ManagerCommand, ManagerConfig, ManagerState};

    #[test]
    fn single_precision_core_round_trips() {
        let g = RoverGeometryF32::default();
        let cmd = BodyMotionCommandF32::Ackermann { v_mps: 0.1, omega_radps: 0.2 };
        let sp: WheelArrayF32 = inverse_kinematics(LocomotionMode::Ackermann, &cmd, &g).unwrap();
        let t = forward_odometry(&sp, &g).unwrap().twist;
        assert!((t.vx_mps - 0.1).abs() < 1e-5 && (t.omega_radps - 0.2).abs() < 1e-5);

        let mut m = LocomotionManagerF32::new(g, ManagerConfig::default());
        m.handle_command(ManagerCommand::ChangeMode { mode: LocomotionMode::Crab }, 0.0).unwrap();
        let mut now = 0.0f32;
        while *m.state() != ManagerState::Driving(LocomotionMode::Crab) {
            now += 0.01;
            m.tick(now);
            assert!(now < 10.0);
        }
    }
}
