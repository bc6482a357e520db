use super::SimError;
use crate::kinematics::{Point2, WHEEL_COUNT};
use crate::linalg::solve3;

pub const GRAVITY_MPS2: f64 = 9.81;

/// Gravity expressed in the terrain-aligned body frame for a given attitude.
///
/// Positive pitch is nose down, positive roll is left side up.
pub fn gravity_body(pitch_rad: f64, roll_rad: f64) -> [f64; 3] {
    let (sp, cp) = pitch_rad.sin_cos();
    let (sr, cr) = roll_rad.sin_cos();
    [GRAVITY_MPS2 * sp, -GRAVITY_MPS2 * cp * sr, -GRAVITY_MPS2 * cp * cr]
}

/// Quasi-static normal loads on the four contacts.
///
/// Force balance normal to the contact plane and moment balance about the two
/// in-plane axes give three equations in four unknowns; the minimum-norm solution
/// `N = A^T (A A^T)^-1 b` closes the indeterminacy. Any negative load means the
/// rover would lift a wheel and tip.
pub fn wheel_loads(
    contacts: &[Point2<f64>; WHEEL_COUNT],
    cog_body: [f64; 3],
    mass_kg: f64,
    pitch_rad: f64,
    roll_rad: f64,
) -> Result<[f64; WHEEL_COUNT], SimError> {
    let g = gravity_body(pitch_rad, roll_rad);
    let [xc, yc, zc] = cog_body;
    let rows = [
        [1.0; WHEEL_COUNT],
        contacts.map(|c| c.x - xc),
        contacts.map(|c| c.y - yc),
    ];
    let b = [-mass_kg * g[2], zc * mass_kg * g[0], zc * mass_kg * g[1]];
    let mut aat = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            aat[i][j] = (0..WHEEL_COUNT).map(|k| rows[i][k] * rows[j][k]).sum();
        }
    }
    let y = solve3(aat, b).ok_or(SimError::DegenerateContacts)?;
    let loads: [f64; WHEEL_COUNT] = std::array::from_fn(|k| (0..3).map(|i| rows[i][k] * y[i]).sum());
    if loads.iter().any(|n| *n < 0.0) {
        return Err(SimError::TipOver { loads_n: loads });
    }
    Ok(loads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::RoverGeometry;

    fn contacts() -> [Point2<f64>; 4] {
        RoverGeometry::<f64>::default().contacts(&[0.0; 4])
    }

    #[test]
    fn flat_centered_loads_are_equal() {
        let n = wheel_loads(&contacts(), [0.0, 0.0, 0.4], 250.0, 0.0, 0.0).unwrap();
        for v in n {
            assert!((v - 250.0 * GRAVITY_MPS2 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn payload_scales_loads() {
        let a = wheel_loads(&contacts(), [0.0, 0.0, 0.4], 250.0, 0.0, 0.0).unwrap();
        let b = wheel_loads(&contacts(), [0.0, 0.0, 0.45], 550.0, 0.0, 0.0).unwrap();
        for k in 0..4 {
            assert!((b[k] / a[k] - 550.0 / 250.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nose_up_loads_rear() {
        let n = wheel_loads(&contacts(), [0.0, 0.0, 0.4], 250.0, -15f64.to_radians(), 0.0).unwrap();
        assert!(n[2] > n[0] && n[3] > n[1]);
        let total: f64 = n.iter().sum();
        assert!((total - 250.0 * GRAVITY_MPS2 * 15f64.to_radians().cos()).abs() < 1e-9);
    }

    #[test]
    fn high_cog_on_steep_roll_tips() {
        let r = wheel_loads(&contacts(), [0.0, 0.0, 2.0], 250.0, 0.0, 30f64.to_radians());
        assert!(matches!(r, Err(SimError::TipOver { .. })));
    }
}
