use crate::scalar::Scalar;

/// Gaussian elimination with partial pivoting.
pub fn solve3<T: Scalar>(mut m: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    let scale = m.iter().flatten().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(16.0);
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() <= tiny {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                let sub = f * m[col][k];
                m[row][k] -= sub;
            }
            let sub = f * b[col];
            b[row] -= sub;
        }
    }
    let mut x = [T::zero(); 3];
    for i in (0..3).rev() {
        let mut acc = b[i];
        for k in i + 1..3 {
            acc -= m[i][k] * x[k];
        }
        x[i] = acc / m[i][i];
    }
    Some(x)
}
