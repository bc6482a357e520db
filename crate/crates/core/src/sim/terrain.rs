use serde::{Deserialize, Serialize};

use super::SimError;

/// Steepest tilt the bed can be set to, degrees.
pub const MAX_TILT_DEG: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoilParams {
    pub cohesion_kpa: f64,
    pub friction_angle_deg: f64,
    pub density_kg_m3: f64,
    pub granulometry_mm: [f64; 2],
    /// Thrust ratio at which slip begins.
    pub slip_knee: f64,
    /// Shearing patch per wheel for the cohesive term.
    pub contact_area_m2: f64,
    pub rolling_resistance: f64,
    /// Fraction of lateral shear capacity a wheel keeps while the rover turns in place.
    pub turning_lateral_capacity: f64,
}

impl Default for SoilParams {
    fn default() -> Self {
        Self {
            cohesion_kpa: 10.0,
            friction_angle_deg: 28.0,
            density_kg_m3: 1300.0,
            granulometry_mm: [0.04, 0.8],
            slip_knee: 0.5,
            contact_area_m2: 0.02,
            rolling_resistance: 0.05,
            turning_lateral_capacity: 0.55,
        }
    }
}

impl SoilParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.cohesion_kpa >= 0.0 && self.cohesion_kpa.is_finite()) {
            return bad("cohesion_kpa must be non-negative");
        }
        if !(self.friction_angle_deg > 0.0 && self.friction_angle_deg <= 45.0) {
            return bad("friction_angle_deg must be in (0, 45]");
        }
        if !(self.slip_knee > 0.0 && self.slip_knee < 1.0) {
            return bad("slip_knee must be in (0, 1)");
        }
        if !(self.contact_area_m2 > 0.0) || !(self.rolling_resistance >= 0.0) {
            return bad("contact_area_m2 must be positive and rolling_resistance non-negative");
        }
        if !(self.turning_lateral_capacity > 0.0 && self.turning_lateral_capacity <= 1.0) {
            return bad("turning_lateral_capacity must be in (0, 1]");
        }
        Ok(())
    }

    /// Shear capacity of one wheel under normal load `n`, newtons.
    pub fn thrust_capacity(&self, normal_n: f64) -> f64 {
        self.cohesion_kpa * 1e3 * self.contact_area_m2 + normal_n.max(0.0) * self.friction_angle_deg.to_radians().tan()
    }
}

/// Bed section beyond `hinge_x_m` rises with x at `angle_deg`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltBed {
    pub hinge_x_m: f64,
    pub angle_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    /// Closed polygon, counter-clockwise or clockwise.
    pub footprint_m: Vec<[f64; 2]>,
    pub height_m: f64,
}

impl Obstacle {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, height_m: f64) -> Self {
        Self {
            footprint_m: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            height_m,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let p = &self.footprint_m;
        let mut inside = false;
        let mut j = p.len().wrapping_sub(1);
        for i in 0..p.len() {
            let (a, b) = (p[i], p[j]);
            if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainConfig {
    /// Extent along x and y; the origin is one corner.
    pub size_m: [f64; 2],
    pub cell_m: f64,
    /// Optional elevation grid, one row per y sample, x along each row.
    pub heights_m: Option<Vec<Vec<f64>>>,
    pub tilt_bed: Option<TiltBed>,
    pub obstacles: Vec<Obstacle>,
}

impl Default for TerrainConfig {
    /// Indoor soil box: 10 m by 5.5 m with its rear 3.5 m on a tilting section.
    fn default() -> Self {
        Self {
            size_m: [10.0, 5.5],
            cell_m: 0.5,
            heights_m: None,
            tilt_bed: Some(TiltBed { hinge_x_m: 6.5, angle_deg: 0.0 }),
            obstacles: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerrainSample {
    pub height_m: f64,
    pub normal: [f64; 3],
}

/// Bilinear heightfield, optionally composed with a tilt bed, plus step obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct TerrainModel {
    size: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    heights: Vec<f64>,
    tilt: Option<TiltBed>,
    pub obstacles: Vec<Obstacle>,
}

impl TerrainModel {
    pub fn new(config: &TerrainConfig) -> Result<Self, SimError> {
        let [lx, ly] = config.size_m;
        if !(lx > 0.0 && ly > 0.0 && config.cell_m > 0.0) {
            return Err(SimError::InvalidConfig("terrain size and cell must be positive".into()));
        }
        let nx = (lx / config.cell_m).ceil() as usize + 1;
        let ny = (ly / config.cell_m).ceil() as usize + 1;
        let heights = match &config.heights_m {
            None => vec![0.0; nx * ny],
            Some(rows) => {
                if rows.len() != ny || rows.iter().any(|r| r.len() != nx) {
                    return Err(SimError::InvalidConfig(format!("heights_m must be {ny} rows of {nx} values")));
                }
                rows.iter().flatten().copied().collect()
            }
        };
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(SimError::InvalidConfig("heights must be finite".into()));
        }
        for o in &config.obstacles {
            if o.footprint_m.len() < 3 || !(o.height_m >= 0.0) {
                return Err(SimError::InvalidConfig("obstacles need 3+ vertices and height >= 0".into()));
            }
        }
        let mut t = Self {
            size: config.size_m,
            cell: config.cell_m,
            nx,
            ny,
            heights,
            tilt: None,
            obstacles: config.obstacles.clone(),
        };
        if let Some(bed) = config.tilt_bed {
            t.set_tilt(bed)?;
        }
        Ok(t)
    }

    pub fn size_m(&self) -> [f64; 2] {
        self.size
    }

    pub fn tilt(&self) -> Option<TiltBed> {
        self.tilt
    }

    pub fn set_tilt(&mut self, bed: TiltBed) -> Result<(), SimError> {
        if !(0.0..=MAX_TILT_DEG).contains(&bed.angle_deg) {
            return Err(SimError::TiltOutOfRange(bed.angle_deg));
        }
        self.tilt = Some(bed);
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.size[0]).contains(&x) && (0.0..=self.size[1]).contains(&y)
    }

    /// Height and upward unit normal of the ground (obstacles excluded).
    pub fn query(&self, x: f64, y: f64) -> Result<TerrainSample, SimError> {
        if !self.contains(x, y) {
            return Err(SimError::OutOfBounds { x_m: x, y_m: y });
        }
        let fx = (x / self.cell).min((self.nx - 1) as f64 - 1e-12).max(0.0);
        let fy = (y / self.cell).min((self.ny - 1) as f64 - 1e-12).max(0.0);
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (u, v) = (fx - i as f64, fy - j as f64);
        let at = |i: usize, j: usize| self.heights[j * self.nx + i];
        let (h00, h10, h01, h11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
        let mut h = h00 * (1.0 - u) * (1.0 - v) + h10 * u * (1.0 - v) + h01 * (1.0 - u) * v + h11 * u * v;
        let mut dhdx = ((h10 - h00) * (1.0 - v) + (h11 - h01) * v) / self.cell;
        let dhdy = ((h01 - h00) * (1.0 - u) + (h11 - h10) * u) / self.cell;
        if let Some(bed) = self.tilt {
            if x >= bed.hinge_x_m {
                let slope = bed.angle_deg.to_radians().tan();
                h += (x - bed.hinge_x_m) * slope;
                dhdx += slope;
            }
        }
        let n = (dhdx * dhdx + dhdy * dhdy + 1.0).sqrt();
        Ok(TerrainSample {
            height_m: h,
            normal: [-dhdx / n, -dhdy / n, 1.0 / n],
        })
    }

    /// Tallest obstacle under a point.
    pub fn obstacle_height_at(&self, x: f64, y: f64) -> f64 {
        self.obstacles
            .iter()
            .filter(|o| o.contains(x, y))
            .fold(0.0, |acc, o| acc.max(o.height_m))
    }
}
