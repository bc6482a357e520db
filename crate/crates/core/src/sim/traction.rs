use super::terrain::SoilParams;
use crate::kinematics::{forward_odometry, BodyTwist, Point2, RoverGeometry, WheelArray, WheelId, WHEEL_COUNT};

/// Wheel states and forces seen by the traction model for one physics tick.
#[derive(Clone, Copy, Debug)]
pub struct TractionInput {
    /// True steering angles and wheel speeds.
    pub wheels: WheelArray<f64>,
    /// Sign of intended travel per wheel (+1, -1 or 0).
    pub travel_sign: [f64; WHEEL_COUNT],
    pub loads_n: [f64; WHEEL_COUNT],
    /// In-plane force on the body from gravity and tools, body frame.
    pub external_force_n: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TractionOutput {
    pub twist: BodyTwist<f64>,
    pub slip: [f64; WHEEL_COUNT],
    pub thrust_ratio: [f64; WHEEL_COUNT],
    /// Longitudinal force each wheel must develop, newtons.
    pub demand_n: [f64; WHEEL_COUNT],
    pub capacity_n: [f64; WHEEL_COUNT],
    /// Resisting torque at each drive motor, in the motor's sign convention.
    pub load_torque_nm: [f64; WHEEL_COUNT],
}

/// Piecewise-linear slip law: zero below the knee, full slip at thrust ratio 1.
pub fn slip_from_ratio(ratio: f64, knee: f64) -> f64 {
    ((ratio - knee) / (1.0 - knee)).clamp(0.0, 1.0)
}

/// 0 for pure translation, 1 for rotation in place.
pub fn turning_index(twist: &BodyTwist<f64>, footprint_radius_m: f64) -> f64 {
    let v = twist.vx_mps.hypot(twist.vy_mps);
    let w = twist.omega_radps.abs() * footprint_radius_m;
    if v + w <= 1e-12 {
        0.0
    } else {
        w / (v + w)
    }
}

/// Thrust-ratio traction model.
///
/// Each wheel carries a share of the external in-plane force proportional to its
/// load. The along-track part plus rolling resistance is the longitudinal demand;
/// the cross-track part is resisted by lateral shear, which weakens when the
/// rover turns in place. The combined ratio to the Mohr-Coulomb capacity sets the
/// wheel's slip, and the body twist is re-fitted from the slipped rolling speeds.
pub fn traction_step(input: &TractionInput, geometry: &RoverGeometry<f64>, soil: &SoilParams) -> TractionOutput {
    let r = geometry.wheel_radius_m;
    let steering = input.wheels.steering_rad;
    let contacts = geometry.contacts(&steering);
    let footprint = contacts.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let nominal = forward_odometry(&input.wheels, geometry).map(|o| o.twist).unwrap_or_default();
    let kappa = 1.0 - (1.0 - soil.turning_lateral_capacity) * turning_index(&nominal, footprint);

    let total: f64 = input.loads_n.iter().sum();
    let f = Point2::new(input.external_force_n[0], input.external_force_n[1]);
    let mut slip = [0.0; WHEEL_COUNT];
    let mut ratio = [0.0; WHEEL_COUNT];
    let mut torque = [0.0; WHEEL_COUNT];
    let mut demand = [0.0; WHEEL_COUNT];
    let mut capacities = [0.0; WHEEL_COUNT];
    let mut slipped = input.wheels;
    for w in WheelId::ALL {
        let i = w.index();
        let n = input.loads_n[i];
        let share = if total > 0.0 { n / total } else { 0.25 };
        let capacity = soil.thrust_capacity(n);
        let along = Point2::from_angle(steering[i]);
        let across = Point2::new(-along.y, along.x);
        let sigma = input.travel_sign[i];
        let rolling = if sigma != 0.0 { soil.rolling_resistance * n } else { 0.0 };
        let longitudinal = -share * f.dot(along) * sigma + rolling;
        let lateral = share * f.dot(across);
        let rho = ((longitudinal / capacity).powi(2) + (lateral / (kappa * capacity)).powi(2)).sqrt();
        ratio[i] = rho;
        demand[i] = longitudinal;
        capacities[i] = capacity;
        slip[i] = if sigma != 0.0 { slip_from_ratio(rho, soil.slip_knee) } else { 0.0 };
        slipped.speed_radps[i] *= 1.0 - slip[i];
        torque[i] = sigma * longitudinal.clamp(-capacity, capacity) * r;
    }
    let twist = forward_odometry(&slipped, geometry).map(|o| o.twist).unwrap_or_default();
    TractionOutput {
        twist,
        slip,
        thrust_ratio: ratio,
        demand_n: demand,
        capacity_n: capacities,
        load_torque_nm: torque,
    }
}
