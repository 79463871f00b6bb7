//! Analytic oracles and benchmark drivers: porous-pipe flow, consolidation
//! series, manufactured-solution fields and forcings, the exact Riemann
//! solver, and error-norm / convergence-slope helpers.

pub mod analytic;
pub mod bench;
pub mod mms;
pub mod riemann;

pub use analytic::{consolidation_coefficient, darcy_exact, terzaghi_exact};
pub use mms::MmsProblem;
pub use riemann::{sample_riemann, solve_riemann, RiemannState};

use crate::fluid::CellAverages;
use crate::math::{loglog_slope, V2};
use crate::mesh::Mesh;
use crate::solid::MaterialPoint;

/// L2 norm of the solid velocity error, integrated over point volumes.
pub fn l2_error_points(points: &[MaterialPoint], exact: impl Fn(V2) -> V2) -> f64 {
    points
        .iter()
        .map(|p| p.vol * (p.vel - exact(p.x)).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// L2 norm of the fluid velocity error over cell centroids weighted by cell
/// volumes.
pub fn l2_error_cells(mesh: &Mesh, avg: &CellAverages, exact: impl Fn(V2) -> V2) -> f64 {
    (0..mesh.n_cells())
        .map(|ci| {
            let v = avg.bar[ci].vel();
            mesh.volume[ci] * (v - exact(mesh.centroid[ci])).norm_squared()
        })
        .sum::<f64>()
        .sqrt()
}

/// Mesh-refinement study result: (h, error) samples and the fitted log-log
/// slope (least squares over at least three levels).
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub label: String,
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
}

impl ConvergenceReport {
    pub fn fit(label: impl Into<String>, samples: Vec<(f64, f64)>) -> ConvergenceReport {
        assert!(
            samples.len() >= 3,
            "slope fit requires at least three mesh levels"
        );
        let slope = loglog_slope(&samples);
        ConvergenceReport {
            label: label.into(),
            samples,
            slope,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::FluidState;
    use crate::math::v2;
    use crate::mesh::build_cartesian_mesh;

    #[test]
    fn l2_zero_for_exact_match() {
        let mesh = build_cartesian_mesh(4, 4, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let field = |x: V2| v2(x.x, -x.y);
        let avg = CellAverages {
            bar: mesh
                .centroid
                .iter()
                .map(|&c| FluidState::new(2.0, field(c) * 2.0, 1.0))
                .collect(),
        };
        assert_eq!(l2_error_cells(&mesh, &avg, field), 0.0);
    }

    #[test]
    fn l2_constant_error_is_norm_times_sqrt_measure() {
        // Constant error vector e over a domain of measure A: ||e|| sqrt(A).
        let mesh = build_cartesian_mesh(5, 3, v2(0.0, 0.0), v2(2.0, 1.5)).unwrap();
        let e = v2(0.3, -0.4);
        let avg = CellAverages {
            bar: mesh
                .centroid
                .iter()
                .map(|_| FluidState::new(1.0, e, 1.0))
                .collect(),
        };
        let got = l2_error_cells(&mesh, &avg, |_| V2::zeros());
        let expect = e.norm() * 3.0_f64.sqrt();
        assert!((got - expect).abs() < 1e-12 * expect);

        let points: Vec<MaterialPoint> = (0..60)
            .map(|i| {
                let mut p = MaterialPoint::new(v2(i as f64, 0.0), 0.05, 1.0, e);
                p.vel = e;
                p
            })
            .collect();
        let got = l2_error_points(&points, |_| V2::zeros());
        let expect = e.norm() * (60.0 * 0.05_f64).sqrt();
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn l2_cells_matches_refined_quadrature_for_smooth_fields() {
        // Centroid-rule L2 against a brute-force fine quadrature of the same
        // piecewise-constant numerical field: agreement within 1e-3 relative
        // on a reasonably fine mesh.
        let n = 80;
        let mesh = build_cartesian_mesh(n, n, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let smooth = |x: V2| v2((2.0 * x.x).sin(), (3.0 * x.y).cos());
        let numeric = |x: V2| smooth(x) * 1.5; // error dominates cell variation
        let avg = CellAverages {
            bar: mesh
                .centroid
                .iter()
                .map(|&c| FluidState::new(1.0, numeric(c), 1.0))
                .collect(),
        };
        let coarse = l2_error_cells(&mesh, &avg, smooth);
        // Fine quadrature: subdivide each cell 8x8, numerical field constant
        // per cell.
        let mut acc = 0.0;
        for ci in 0..mesh.n_cells() {
            let c = mesh.centroid[ci];
            let h = 1.0 / n as f64;
            let vnum = avg.bar[ci].vel();
            for jq in 0..8 {
                for iq in 0..8 {
                    let x = v2(
                        c.x - h / 2.0 + (iq as f64 + 0.5) * h / 8.0,
                        c.y - h / 2.0 + (jq as f64 + 0.5) * h / 8.0,
                    );
                    acc += (vnum - smooth(x)).norm_squared() * (h * h / 64.0);
                }
            }
        }
        let fine = acc.sqrt();
        assert!(
            (coarse - fine).abs() < 1e-3 * fine,
            "centroid {coarse} vs refined {fine}"
        );
    }

    #[test]
    fn slope_fit_requires_three_levels() {
        let r = ConvergenceReport::fit(
            "demo",
            vec![(0.1, 1e-2), (0.05, 5.2e-3), (0.025, 2.4e-3)],
        );
        assert!((r.slope - 1.0).abs() < 0.15);
    }
}
