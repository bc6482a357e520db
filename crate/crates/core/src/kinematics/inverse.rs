use super::{
    BodyMotionCommand, BodyTwist, KinematicsError, LocomotionMode, Point2, RoverGeometry, WheelArray, WheelId,
    WHEEL_COUNT,
};
use crate::scalar::{fold_half_turn, Scalar};

/// Below this yaw rate an Ackermann command is a straight line.
pub const OMEGA_EPS_RADPS: f64 = 1e-6;
pub const ICR_TOLERANCE_RAD: f64 = 1e-9;
pub const ICR_MAX_ITERATIONS: usize = 50;
const GRID_STEP_RAD: f64 = 1e-5;

/// Steering angle whose axle line through `contact` passes through `icr`,
/// folded into `(-pi/2, pi/2]`. `None` when the two points coincide.
fn axle_angle_through<T: Scalar>(contact: Point2<T>, icr: Point2<T>) -> Option<T> {
    let w = icr.sub(contact);
    if w.norm() <= T::epsilon() {
        return None;
    }
    // Axle direction (-sin a, cos a) must be parallel to w.
    Some(fold_half_turn((-w.x).atan2(w.y)))
}

/// Distance from `icr` to the axle line of a wheel at `contact` steered to `angle`.
#[inline]
fn axle_line_distance<T: Scalar>(contact: Point2<T>, angle: T, icr: Point2<T>) -> T {
    icr.sub(contact).dot(Point2::from_angle(angle)).abs()
}

fn check_limit<T: Scalar>(wheel: WheelId, angle: T, geometry: &RoverGeometry<T>) -> Result<T, KinematicsError> {
    if angle.abs() > geometry.steering_limit_rad {
        Err(KinematicsError::SteeringLimitExceeded {
            wheel,
            angle_rad: angle.as_f64(),
            limit_rad: geometry.steering_limit_rad.as_f64(),
        })
    } else {
        Ok(angle)
    }
}

/// Solves the steering angle that puts `icr` on the wheel's axle line.
///
/// Fixed-point iteration on the steered contact point, seeded with the
/// zero-offset answer; a fine grid search backs it up.
fn solve_steering<T: Scalar>(wheel: WheelId, icr: Point2<T>, geometry: &RoverGeometry<T>) -> Result<T, KinematicsError> {
    let pivot = geometry.pivot(wheel);
    let offset = geometry.signed_offset(wheel);
    let tol = T::lit(ICR_TOLERANCE_RAD);

    let Some(mut angle) = axle_angle_through(pivot, icr) else {
        // ICR on the pivot: every steering angle is consistent, keep the wheel straight.
        return Ok(T::zero());
    };
    for _ in 0..ICR_MAX_ITERATIONS {
        let contact = super::contact_point(pivot, angle, offset);
        let Some(next) = axle_angle_through(contact, icr) else {
            return check_limit(wheel, angle, geometry);
        };
        let step = fold_half_turn(next - angle);
        angle = next;
        if step.abs() <= tol {
            return check_limit(wheel, angle, geometry);
        }
    }
    grid_solve(wheel, icr, geometry)
}

fn grid_solve<T: Scalar>(wheel: WheelId, icr: Point2<T>, geometry: &RoverGeometry<T>) -> Result<T, KinematicsError> {
    let limit = geometry.steering_limit_rad.as_f64();
    let steps = (2.0 * limit / GRID_STEP_RAD).ceil() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for k in 0..=steps {
        let a = (-limit + k as f64 * GRID_STEP_RAD).min(limit);
        let at = T::lit(a);
        let contact = geometry.contact(wheel, at);
        let d = axle_line_distance(contact, at, icr).as_f64();
        if d < best.0 {
            best = (d, a, icr.sub(contact).norm().as_f64());
        }
    }
    // A grid point is within half a step of the true angle, which moves the axle
    // line by at most step * |icr - contact| at the ICR.
    if best.0 <= GRID_STEP_RAD * best.2 + 1e-9 {
        Ok(T::lit(best.1))
    } else {
        Err(KinematicsError::NonConvergence(wheel))
    }
}

/// Wheel speed that makes each steered contact roll with `twist`.
fn rolling_speeds<T: Scalar>(
    steering: &[T; WHEEL_COUNT],
    twist: &BodyTwist<T>,
    geometry: &RoverGeometry<T>,
) -> [T; WHEEL_COUNT] {
    WheelId::ALL.map(|w| {
        let a = steering[w.index()];
        let v = twist.point_velocity(geometry.contact(w, a));
        v.dot(Point2::from_angle(a)) / geometry.wheel_radius_m
    })
}

fn icr_setpoints<T: Scalar>(
    icr: Point2<T>,
    twist: BodyTwist<T>,
    geometry: &RoverGeometry<T>,
) -> Result<WheelArray<T>, KinematicsError> {
    let mut steering = [T::zero(); WHEEL_COUNT];
    for w in WheelId::ALL {
        steering[w.index()] = solve_steering(w, icr, geometry)?;
    }
    let speeds = rolling_speeds(&steering, &twist, geometry);
    Ok(WheelArray::new(steering, speeds))
}

/// Converts a body command into wheel setpoints for `mode`.
pub fn inverse_kinematics<T: Scalar>(
    mode: LocomotionMode,
    cmd: &BodyMotionCommand<T>,
    geometry: &RoverGeometry<T>,
) -> Result<WheelArray<T>, KinematicsError> {
    if cmd.mode() != mode {
        return Err(KinematicsError::ModeMismatch {
            mode,
            command: cmd.mode(),
        });
    }
    let r = geometry.wheel_radius_m;
    match *cmd {
        BodyMotionCommand::Ackermann { v_mps, omega_radps } => {
            if omega_radps.abs() < T::lit(OMEGA_EPS_RADPS) {
                return Ok(WheelArray::new([T::zero(); WHEEL_COUNT], [v_mps / r; WHEEL_COUNT]));
            }
            let icr = Point2::new(T::zero(), v_mps / omega_radps);
            icr_setpoints(icr, BodyTwist::new(v_mps, T::zero(), omega_radps), geometry)
        }
        BodyMotionCommand::PointTurn { omega_radps } => icr_setpoints(
            Point2::new(T::zero(), T::zero()),
            BodyTwist::new(T::zero(), T::zero(), omega_radps),
            geometry,
        ),
        BodyMotionCommand::Crab { v_mps, heading_rad } => {
            for w in WheelId::ALL {
                check_limit(w, heading_rad, geometry)?;
            }
            Ok(WheelArray::new([heading_rad; WHEEL_COUNT], [v_mps / r; WHEEL_COUNT]))
        }
        BodyMotionCommand::Skid { v_mps, omega_radps } => {
            let half = omega_radps * geometry.skid_factor * geometry.track_m / T::lit(2.0);
            let left = (v_mps - half) / r;
            let right = (v_mps + half) / r;
            Ok(WheelArray::new([T::zero(); WHEEL_COUNT], [left, right, left, right]))
        }
    }
}

/// Steering configuration a mode rests in before motion starts.
pub fn home_steering<T: Scalar>(
    mode: LocomotionMode,
    crab_heading_rad: T,
    geometry: &RoverGeometry<T>,
) -> Result<[T; WHEEL_COUNT], KinematicsError> {
    inverse_kinematics(mode, &BodyMotionCommand::stop(mode, crab_heading_rad), geometry).map(|s| s.steering_rad)
}

/// RMS distance (m) from `icr` to each wheel's axle line. Zero iff all axles meet at `icr`.
pub fn icr_residual<T: Scalar>(setpoints: &WheelArray<T>, geometry: &RoverGeometry<T>, icr: Point2<T>) -> T {
    let sum = WheelId::ALL.iter().fold(T::zero(), |acc, &w| {
        let a = setpoints.steering_rad[w.index()];
        let d = axle_line_distance(geometry.contact(w, a), a, icr);
        acc + d * d
    });
    (sum / T::lit(WHEEL_COUNT as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn geom() -> RoverGeometry<f64> {
        RoverGeometry::default()
    }

    #[test]
    fn crab_straight() {
        let g = geom();
        let s = inverse_kinematics(
            LocomotionMode::Crab,
            &BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 0.0 },
            &g,
        )
        .unwrap();
        for i in 0..4 {
            assert_eq!(s.steering_rad[i], 0.0);
            assert!((s.speed_radps[i] - 0.666_666_666_7).abs() < 1e-9);
        }
    }

    #[test]
    fn point_turn_square_footprint() {
        let g = RoverGeometry::<f64>::with_footprint(1.0, 1.0, 0.15, 0.0);
        let s = inverse_kinematics(
            LocomotionMode::PointTurn,
            &BodyMotionCommand::PointTurn { omega_radps: 0.2 },
            &g,
        )
        .unwrap();
        for i in 0..4 {
            assert!((s.steering_rad[i].abs() - FRAC_PI_4).abs() < 1e-12);
            assert!((s.speed_radps[i].abs() - 0.942_809_041_6).abs() < 1e-9);
        }
        // Left and right sides spin in opposite directions.
        assert!(s.speed_radps[0] * s.speed_radps[1] < 0.0);
        assert!(s.speed_radps[2] * s.speed_radps[3] < 0.0);
        assert!(icr_residual(&s, &g, Point2::new(0.0, 0.0)) < 1e-9);
    }

    #[test]
    fn skid_differential() {
        let g = geom();
        let s = inverse_kinematics(
            LocomotionMode::SkidSteer,
            &BodyMotionCommand::Skid { v_mps: 0.1, omega_radps: 0.1 },
            &g,
        )
        .unwrap();
        assert_eq!(s.steering_rad, [0.0; 4]);
        assert!((s.speed_radps[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.speed_radps[2] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.speed_radps[1] - 1.0).abs() < 1e-12);
        assert!((s.speed_radps[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mode_mismatch_rejected() {
        let err = inverse_kinematics(
            LocomotionMode::Ackermann,
            &BodyMotionCommand::PointTurn { omega_radps: 0.1 },
            &geom(),
        )
        .unwrap_err();
        assert!(matches!(err, KinematicsError::ModeMismatch { .. }));
    }

    #[test]
    fn narrow_steering_limit_rejects_tight_turn() {
        let mut g = geom();
        g.steering_limit_rad = 0.3;
        let err = inverse_kinematics(
            LocomotionMode::Ackermann,
            &BodyMotionCommand::Ackermann { v_mps: 0.1, omega_radps: 0.2 },
            &g,
        )
        .unwrap_err();
        assert!(matches!(err, KinematicsError::SteeringLimitExceeded { .. }));
        // A gentle turn still fits.
        inverse_kinematics(
            LocomotionMode::Ackermann,
            &BodyMotionCommand::Ackermann { v_mps: 0.2, omega_radps: 0.05 },
            &g,
        )
        .unwrap();
    }

    #[test]
    fn crab_heading_beyond_limit() {
        let mut g = geom();
        g.steering_limit_rad = 1.0;
        let err = inverse_kinematics(
            LocomotionMode::Crab,
            &BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: 1.2 },
            &g,
        )
        .unwrap_err();
        assert!(matches!(err, KinematicsError::SteeringLimitExceeded { .. }));
    }

    #[test]
    fn crab_axles_never_meet() {
        let g = geom();
        for heading in [-1.5, -0.4, 0.0, 0.7, std::f64::consts::FRAC_PI_2] {
            let s = inverse_kinematics(
                LocomotionMode::Crab,
                &BodyMotionCommand::Crab { v_mps: 0.1, heading_rad: heading },
                &g,
            )
            .unwrap();
            for icr in [(0.0, 0.0), (0.0, 1.0), (3.0, -2.0), (-0.6, 0.55)] {
                assert!(icr_residual(&s, &g, Point2::new(icr.0, icr.1)) > 0.0);
            }
        }
    }

    #[test]
    fn grid_fallback_agrees_with_fixed_point() {
        let g = geom();
        let icr = Point2::new(0.0, 1.0);
        for w in WheelId::ALL {
            let fp = solve_steering(w, icr, &g).unwrap();
            let grid = grid_solve(w, icr, &g).unwrap();
            assert!((fp - grid).abs() <= GRID_STEP_RAD);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = RoverGeometry::<f32>::default();
        let s = inverse_kinematics(
            LocomotionMode::Ackermann,
            &BodyMotionCommand::Ackermann { v_mps: 0.1f32, omega_radps: 0.1 },
            &g,
        )
        .unwrap();
        assert!(icr_residual(&s, &g, Point2::new(0.0, 1.0)) < 1e-5);
    }

    #[test]
    fn home_configurations() {
        let g = geom();
        assert_eq!(home_steering(LocomotionMode::Ackermann, 0.0, &g).unwrap(), [0.0; 4]);
        assert_eq!(home_steering(LocomotionMode::SkidSteer, 0.0, &g).unwrap(), [0.0; 4]);
        assert_eq!(home_steering(LocomotionMode::Crab, 0.4, &g).unwrap(), [0.4; 4]);
        let pt = home_steering(LocomotionMode::PointTurn, 0.0, &g).unwrap();
        assert!(pt.iter().all(|a| a.abs() > 0.5 && a.abs() < 1.0));
    }
}
