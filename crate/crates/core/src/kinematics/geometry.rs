use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::scalar::Scalar;

pub const WHEEL_COUNT: usize = 4;

/// Wheel index. The order is fixed: front-left, front-right, rear-left, rear-right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WheelId {
    FrontLeft = 0,
    FrontRight = 1,
    RearLeft = 2,
    RearRight = 3,
}

impl WheelId {
    pub const ALL: [WheelId; WHEEL_COUNT] = [
        WheelId::FrontLeft,
        WheelId::FrontRight,
        WheelId::RearLeft,
        WheelId::RearRight,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn is_left(self) -> bool {
        matches!(self, WheelId::FrontLeft | WheelId::RearLeft)
    }

    #[inline]
    pub fn is_front(self) -> bool {
        matches!(self, WheelId::FrontLeft | WheelId::FrontRight)
    }
}

/// A point or vector in the body (or world) plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn from_angle(a: T) -> Self {
        Self::new(a.cos(), a.sin())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

/// Chassis, wheel and mass layout of the rover.
///
/// Body frame: x forward, y left, z up, yaw positive counter-clockwise.
/// Steering pivots sit at `(+-wheelbase/2, +-track/2)`. With on-side steering the wheel
/// contact is displaced from its pivot along the wheel axle by `steering_offset_m`,
/// pointing outboard on both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct RoverGeometry<T> {
    pub wheelbase_m: T,
    pub track_m: T,
    pub wheel_radius_m: T,
    /// Magnitude of the outboard pivot-to-contact displacement along the axle.
    pub steering_offset_m: T,
    pub steering_limit_rad: T,
    /// Effective track multiplier used by skid steering.
    pub skid_factor: T,
    pub chassis_mass_kg: T,
    pub payload_mass_kg: T,
    /// Chassis centre of gravity; z is the height above the contact plane.
    pub cog_body: [T; 3],
    pub payload_cog_body: [T; 3],
}

impl<T: Scalar> Default for RoverGeometry<T> {
    fn default() -> Self {
        Self {
            wheelbase_m: T::lit(1.2),
            track_m: T::lit(1.0),
            wheel_radius_m: T::lit(0.15),
            steering_offset_m: T::lit(0.05),
            steering_limit_rad: T::FRAC_PI_2(),
            skid_factor: T::one(),
            chassis_mass_kg: T::lit(250.0),
            payload_mass_kg: T::zero(),
            cog_body: [T::zero(), T::zero(), T::lit(0.4)],
            payload_cog_body: [T::zero(), T::zero(), T::lit(0.5)],
        }
    }
}

impl<T: Scalar> RoverGeometry<T> {
    /// Square-footprint helper used in tests and examples.
    pub fn with_footprint(wheelbase_m: T, track_m: T, wheel_radius_m: T, offset_m: T) -> Self {
        Self {
            wheelbase_m,
            track_m,
            wheel_radius_m,
            steering_offset_m: offset_m,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |msg: &str| Err(KinematicsError::InvalidGeometry(msg.to_string()));
        let all = [
            self.wheelbase_m,
            self.track_m,
            self.wheel_radius_m,
            self.steering_offset_m,
            self.steering_limit_rad,
            self.skid_factor,
            self.chassis_mass_kg,
            self.payload_mass_kg,
        ];
        if all.iter().chain(&self.cog_body).chain(&self.payload_cog_body).any(|v| !v.is_finite()) {
            return bad("non-finite geometry value");
        }
        if self.wheelbase_m <= T::zero() || self.track_m <= T::zero() || self.wheel_radius_m <= T::zero() {
            return bad("wheelbase, track and wheel radius must be positive");
        }
        if self.steering_offset_m.abs() >= self.track_m / T::lit(2.0) {
            return bad("steering offset must be smaller than half the track");
        }
        if self.steering_limit_rad <= T::zero() || self.steering_limit_rad > T::PI() {
            return bad("steering limit must lie in (0, pi]");
        }
        if self.skid_factor <= T::zero() {
            return bad("skid factor must be positive");
        }
        if self.chassis_mass_kg <= T::zero() || self.payload_mass_kg < T::zero() {
            return bad("chassis mass must be positive and payload non-negative");
        }
        Ok(())
    }

    pub fn pivot(&self, wheel: WheelId) -> Point2<T> {
        let half_wb = self.wheelbase_m / T::lit(2.0);
        let half_tr = self.track_m / T::lit(2.0);
        Point2::new(
            if wheel.is_front() { half_wb } else { -half_wb },
            if wheel.is_left() { half_tr } else { -half_tr },
        )
    }

    /// Signed offset: positive on the left side, negative on the right, so that it points outboard.
    pub fn signed_offset(&self, wheel: WheelId) -> T {
        if wheel.is_left() {
            self.steering_offset_m
        } else {
            -self.steering_offset_m
        }
    }

    pub fn contact(&self, wheel: WheelId, steering_angle: T) -> Point2<T> {
        contact_point(self.pivot(wheel), steering_angle, self.signed_offset(wheel))
    }

    pub fn contacts(&self, steering: &[T; WHEEL_COUNT]) -> [Point2<T>; WHEEL_COUNT] {
        WheelId::ALL.map(|w| self.contact(w, steering[w.index()]))
    }

    pub fn total_mass_kg(&self) -> T {
        self.chassis_mass_kg + self.payload_mass_kg
    }

    /// Mass-weighted centre of gravity of chassis and payload.
    pub fn cog(&self) -> [T; 3] {
        let m = self.total_mass_kg();
        let mut out = [T::zero(); 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (self.cog_body[k] * self.chassis_mass_kg + self.payload_cog_body[k] * self.payload_mass_kg) / m;
        }
        out
    }

    /// Skid factor for which least-squares odometry over the unsteered contacts
    /// recovers the commanded yaw rate exactly.
    pub fn kinematic_skid_factor(&self) -> T {
        let two = T::lit(2.0);
        let y = self.track_m / two + self.steering_offset_m;
        let x = self.wheelbase_m / two;
        (y * y + x * x) / (y * self.track_m / two)
    }
}

/// Wheel ground-contact point for a steering pivot: `pivot + R(angle) * (0, offset)`.
#[inline]
pub fn contact_point<T: Scalar>(pivot: Point2<T>, steering_angle: T, offset: T) -> Point2<T> {
    let (s, c) = steering_angle.sin_cos();
    Point2::new(pivot.x - offset * s, pivot.y + offset * c)
}
