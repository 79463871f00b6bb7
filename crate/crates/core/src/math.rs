//! Small numeric helpers shared across modules.

pub type V2 = nalgebra::Vector2<f64>;
pub type M2 = nalgebra::Matrix2<f64>;

pub fn v2(x: f64, y: f64) -> V2 {
    V2::new(x, y)
}

/// Least-squares fit of a line log(y) = a + b log(x); returns the slope b.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    assert!(pairs.len() >= 2, "slope fit needs at least two samples");
    let n = pairs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let lx = x.ln();
        let ly = y.max(1e-300).ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Solves the 2x2 system `a x = b`; returns None when the determinant is
/// negligible relative to the matrix scale.
pub fn solve2(a: &M2, b: V2) -> Option<V2> {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let scale = a.norm();
    if det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some(V2::new(
        (b.x * a[(1, 1)] - b.y * a[(0, 1)]) / det,
        (a[(0, 0)] * b.y - a[(1, 0)] * b.x) / det,
    ))
}

pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pairs: Vec<(f64, f64)> = [0.1, 0.2, 0.4].iter().map(|&h| (h, 3.0 * h * h)).collect();
        assert!((loglog_slope(&pairs) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solve2_roundtrip() {
        let a = M2::new(2.0, 1.0, -1.0, 3.0);
        let x = V2::new(0.3, -1.2);
        let b = a * x;
        let got = solve2(&a, b).unwrap();
        assert!((got - x).norm() < 1e-12);
    }

    #[test]
    fn solve2_singular_returns_none() {
        let a = M2::new(1.0, 2.0, 2.0, 4.0);
        assert!(solve2(&a, V2::new(1.0, 1.0)).is_none());
    }
}
