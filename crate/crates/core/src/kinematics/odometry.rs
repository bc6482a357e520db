use super::{BodyTwist, KinematicsError, Point2, Pose2p5, RoverGeometry, WheelArray, WheelId, WHEEL_COUNT};
use crate::linalg::solve3;
use crate::scalar::{normalize_angle, Scalar};

/// Least-squares odometry result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Odometry<T> {
    pub twist: BodyTwist<T>,
    /// RMS of the 8 scalar rolling constraints, m/s.
    pub residual_mps: T,
}

/// Recovers the body twist from measured wheel states.
///
/// Each wheel contributes two equations: the velocity of its steered contact,
/// `(vx - w*y, vy + w*x)`, must equal its rolling vector `speed * r * (cos a, sin a)`.
pub fn forward_odometry<T: Scalar>(
    wheels: &WheelArray<T>,
    geometry: &RoverGeometry<T>,
) -> Result<Odometry<T>, KinematicsError> {
    let mut rows: [([T; 3], T); 2 * WHEEL_COUNT] = [([T::zero(); 3], T::zero()); 2 * WHEEL_COUNT];
    for w in WheelId::ALL {
        let a = wheels.steering_rad[w.index()];
        let c = geometry.contact(w, a);
        let roll = Point2::from_angle(a);
        let s = wheels.speed_radps[w.index()] * geometry.wheel_radius_m;
        rows[2 * w.index()] = ([T::one(), T::zero(), -c.y], s * roll.x);
        rows[2 * w.index() + 1] = ([T::zero(), T::one(), c.x], s * roll.y);
    }

    let mut normal = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for (a, b) in &rows {
        for i in 0..3 {
            for j in 0..3 {
                normal[i][j] += a[i] * a[j];
            }
            rhs[i] += a[i] * *b;
        }
    }
    let x = solve3(normal, rhs).ok_or(KinematicsError::DegenerateGeometry)?;

    let sq = rows.iter().fold(T::zero(), |acc, (a, b)| {
        let r = a[0] * x[0] + a[1] * x[1] + a[2] * x[2] - *b;
        acc + r * r
    });
    Ok(Odometry {
        twist: BodyTwist::new(x[0], x[1], x[2]),
        residual_mps: (sq / T::lit((2 * WHEEL_COUNT) as f64)).sqrt(),
    })
}

/// Dead-reckoning step with exact constant-twist (arc) integration.
pub fn integrate_pose<T: Scalar>(pose: &Pose2p5<T>, twist: &BodyTwist<T>, dt: T) -> Pose2p5<T> {
    let theta = twist.omega_radps * dt;
    let (dx, dy) = if theta.abs() < T::lit(1e-9) {
        (twist.vx_mps * dt, twist.vy_mps * dt)
    } else {
        let (s, c) = theta.sin_cos();
        let w = twist.omega_radps;
        (
            (twist.vx_mps * s - twist.vy_mps * (T::one() - c)) / w,
            (twist.vx_mps * (T::one() - c) + twist.vy_mps * s) / w,
        )
    };
    let (sy, cy) = pose.yaw_rad.sin_cos();
    Pose2p5 {
        x_m: pose.x_m + cy * dx - sy * dy,
        y_m: pose.y_m + sy * dx + cy * dy,
        yaw_rad: normalize_angle(pose.yaw_rad + theta),
        pitch_rad: pose.pitch_rad,
        roll_rad: pose.roll_rad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_rolling_forward() {
        let g = RoverGeometry::<f64>::default();
        let o = forward_odometry(&WheelArray::new([0.0; 4], [2.0; 4]), &g).unwrap();
        assert!((o.twist.vx_mps - 0.3).abs() < 1e-12);
        assert!(o.twist.vy_mps.abs() < 1e-12);
        assert!(o.twist.omega_radps.abs() < 1e-12);
        assert!(o.residual_mps < 1e-12);
    }

    #[test]
    fn crab_rolling() {
        let g = RoverGeometry::<f64>::default();
        let beta = 0.6f64;
        let o = forward_odometry(&WheelArray::new([beta; 4], [2.0; 4]), &g).unwrap();
        assert!((o.twist.vx_mps - 0.3 * beta.cos()).abs() < 1e-12);
        assert!((o.twist.vy_mps - 0.3 * beta.sin()).abs() < 1e-12);
        assert!(o.twist.omega_radps.abs() < 1e-12);
        assert!(o.residual_mps < 1e-12);
    }

    #[test]
    fn inconsistent_wheels_leave_residual() {
        let g = RoverGeometry::<f64>::default();
        let o = forward_odometry(&WheelArray::new([0.0, 0.5, -0.5, 0.0], [1.0, -1.0, 2.0, 0.0]), &g).unwrap();
        assert!(o.residual_mps > 1e-3);
    }

    #[test]
    fn straight_line_step() {
        let p = integrate_pose(&Pose2p5::<f64>::default(), &BodyTwist::new(0.1, 0.0, 0.0), 10.0);
        assert!((p.x_m - 1.0).abs() < 1e-12 && p.y_m.abs() < 1e-12 && p.yaw_rad == 0.0);
    }

    #[test]
    fn spin_in_place() {
        let p = integrate_pose(&Pose2p5::<f64>::default(), &BodyTwist::new(0.0, 0.0, 0.1), 10.0);
        assert!(p.x_m.abs() < 1e-12 && p.y_m.abs() < 1e-12);
        assert!((p.yaw_rad - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_arc_lands_on_circle() {
        // Closed form: circle of radius v/w = 1 about (0, 1); after w*t = pi/2 the pose is (1, 1).
        let p = integrate_pose(&Pose2p5::<f64>::default(), &BodyTwist::new(0.1, 0.0, 0.1), PI / 0.1 * 0.5);
        assert!((p.x_m - 1.0).abs() < 1e-9);
        assert!((p.y_m - 1.0).abs() < 1e-9);
        assert!((p.yaw_rad - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn arc_composition_matches_single_step() {
        let twist = BodyTwist::new(0.1, 0.03, 0.2);
        let start = Pose2p5::<f64>::planar(1.0, -2.0, 0.3);
        let once = integrate_pose(&start, &twist, 2.0);
        let mut many = start;
        for _ in 0..200 {
            many = integrate_pose(&many, &twist, 0.01);
        }
        assert!((once.x_m - many.x_m).abs() < 1e-9);
        assert!((once.y_m - many.y_m).abs() < 1e-9);
        assert!((once.yaw_rad - many.yaw_rad).abs() < 1e-9);
    }
}
