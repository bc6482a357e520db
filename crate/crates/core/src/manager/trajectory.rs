use serde::{Deserialize, Serialize};

use crate::kinematics::WHEEL_COUNT;
use crate::scalar::Scalar;

/// Trapezoidal rate/acceleration limits for steering moves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct TrajectoryProfile<T> {
    pub max_rate_radps: T,
    pub max_accel_radps2: T,
}

impl<T: Scalar> Default for TrajectoryProfile<T> {
    /// 30 deg/s and 60 deg/s^2.
    fn default() -> Self {
        Self {
            max_rate_radps: T::lit(30f64.to_radians()),
            max_accel_radps2: T::lit(60f64.to_radians()),
        }
    }
}

impl<T: Scalar> TrajectoryProfile<T> {
    /// Duration of a rest-to-rest move over `distance` (trapezoid, or triangle when short).
    pub fn duration(&self, distance: T) -> T {
        let d = distance.abs();
        let (v, a) = (self.max_rate_radps, self.max_accel_radps2);
        if d == T::zero() {
            T::zero()
        } else if d >= v * v / a {
            d / v + v / a
        } else {
            T::lit(2.0) * (d / a).sqrt()
        }
    }

    /// Distance covered after `t` seconds of a move of length `d` with the given duration.
    fn travelled(&self, d: T, duration: T, t: T) -> T {
        let (v, a) = (self.max_rate_radps, self.max_accel_radps2);
        if t <= T::zero() {
            return T::zero();
        }
        if t >= duration {
            return d;
        }
        let two = T::lit(2.0);
        if d >= v * v / a {
            let ta = v / a;
            if t < ta {
                a * t * t / two
            } else if t <= duration - ta {
                v * ta / two + v * (t - ta)
            } else {
                let r = duration - t;
                d - a * r * r / two
            }
        } else {
            let half = duration / two;
            if t <= half {
                a * t * t / two
            } else {
                let r = duration - t;
                d - a * r * r / two
            }
        }
    }
}

/// Time-synchronized steering move for all four wheels.
///
/// The slowest wheel follows the full trapezoid; the others follow the same
/// normalized shape scaled to their own distance, so they finish together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SteeringTrajectory<T> {
    pub start: [T; WHEEL_COUNT],
    pub end: [T; WHEEL_COUNT],
    pub profile: TrajectoryProfile<T>,
    pub duration_s: T,
    longest: T,
}

impl<T: Scalar> SteeringTrajectory<T> {
    /// Angle of every wheel `t` seconds into the move.
    pub fn sample(&self, t: T) -> [T; WHEEL_COUNT] {
        if t >= self.duration_s {
            return self.end;
        }
        if self.longest == T::zero() {
            return self.end;
        }
        let frac = self.profile.travelled(self.longest, self.duration_s, t) / self.longest;
        let mut out = [T::zero(); WHEEL_COUNT];
        for i in 0..WHEEL_COUNT {
            out[i] = self.start[i] + (self.end[i] - self.start[i]) * frac;
        }
        out
    }
}

pub fn plan_steering_transition<T: Scalar>(
    current: [T; WHEEL_COUNT],
    target: [T; WHEEL_COUNT],
    profile: TrajectoryProfile<T>,
) -> SteeringTrajectory<T> {
    let longest = (0..WHEEL_COUNT).fold(T::zero(), |m, i| m.max((target[i] - current[i]).abs()));
    SteeringTrajectory {
        start: current,
        end: target,
        profile,
        duration_s: profile.duration(longest),
        longest,
    }
}
