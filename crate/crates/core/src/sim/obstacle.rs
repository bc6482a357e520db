use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleVerdict {
    Traversable,
    Blocked,
}

/// A step can be climbed if it is no taller than the wheel radius and the rover
/// can develop at least the thrust the climb needs.
pub fn obstacle_check(height_m: f64, wheel_radius_m: f64, thrust_margin: f64) -> ObstacleVerdict {
    if height_m <= wheel_radius_m && thrust_margin >= 1.0 {
        ObstacleVerdict::Traversable
    } else {
        ObstacleVerdict::Blocked
    }
}

/// Available over required thrust when one wheel meets a step.
///
/// The climbing wheel needs a push that grows linearly with step height, equal to
/// its own load at a step of one wheel radius, on top of what the rover already
/// demands from the ground.
pub fn climb_margin(
    total_capacity_n: f64,
    climbing_load_n: f64,
    height_m: f64,
    wheel_radius_m: f64,
    other_demand_n: f64,
) -> f64 {
    let required = climbing_load_n * height_m / wheel_radius_m + other_demand_n.max(0.0);
    if required <= 0.0 {
        f64::INFINITY
    } else {
        total_capacity_n / required
    }
}
