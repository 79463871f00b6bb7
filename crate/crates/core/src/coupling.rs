//! Inter-phase coupling: drag and buoyancy force vectors for both grids.
//! Uses the lumped-stable approximations (nodal resistance field K* and
//! centroid-quadrature buoyancy) rather than the exact weak-form integrals,
//! plus the semi-implicit drag coefficient that keeps stiff drag stable at
//! any time increment.

use crate::fluid::{CellAverages, FluidState};
use crate::mapping::FeFvMaps;
use crate::math::V2;
use crate::mesh::Mesh;
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum DragModel {
    /// F(phi, Re) = 10 phi / (1 - phi)^2, Reynolds-independent.
    CarmanKozeny,
    /// User-supplied closure F(phi, Re).
    Pluggable(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for DragModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DragModel::CarmanKozeny => write!(f, "CarmanKozeny"),
            DragModel::Pluggable(_) => write!(f, "Pluggable(..)"),
        }
    }
}

impl DragModel {
    pub fn f_hat(&self, phi: f64, re: f64) -> f64 {
        match self {
            DragModel::CarmanKozeny => {
                let n = 1.0 - phi;
                10.0 * phi / (n * n)
            }
            DragModel::Pluggable(f) => f(phi, re),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DragParams {
    pub model: DragModel,
    /// Mean grain diameter.
    pub d: f64,
    /// Pure-fluid dynamic viscosity.
    pub eta0: f64,
}

/// Per-node fluid proxies averaged through the A matrix: effective density
/// and fluid velocity seen by each FE node, and the minimum neighboring cell
/// effective density (for the semi-implicit coefficient).
#[derive(Debug, Clone)]
pub struct NodalFluidProxies {
    pub rho_bar: Vec<f64>,
    pub vel: Vec<V2>,
    pub min_cell_rho_bar: Vec<f64>,
}

pub fn fluid_node_proxies(fefv: &FeFvMaps, mesh: &Mesh, avg: &CellAverages) -> NodalFluidProxies {
    let n = fefv.n_nodes;
    let mut rho_acc = vec![0.0; n];
    let mut vel_acc = vec![V2::zeros(); n];
    let mut min_rho = vec![f64::INFINITY; n];
    for (ci, col) in fefv.a_cols.iter().enumerate() {
        let s = &avg.bar[ci];
        let vol = mesh.volume[ci];
        let v_f = s.vel();
        for &(node, a) in col {
            let w = a * vol;
            rho_acc[node] += w * s.rho;
            vel_acc[node] += v_f * w;
            if s.rho < min_rho[node] {
                min_rho[node] = s.rho;
            }
        }
    }
    for i in 0..n {
        let vi = fefv.v_i[i];
        if vi > 0.0 {
            rho_acc[i] /= vi;
            vel_acc[i] /= vi;
        }
    }
    NodalFluidProxies {
        rho_bar: rho_acc,
        vel: vel_acc,
        min_cell_rho_bar: min_rho,
    }
}

/// Nodal resistance K*_i = 18 n (1-n) eta0 / d^2 * F(1-n, Re*_i).
pub fn nodal_resistance(
    n_i: &[f64],
    proxies: &NodalFluidProxies,
    v_si: &[V2],
    drag: &DragParams,
) -> Vec<f64> {
    n_i.iter()
        .enumerate()
        .map(|(i, &n)| {
            let phi = 1.0 - n;
            if phi <= 0.0 || !proxies.min_cell_rho_bar[i].is_finite() {
                return 0.0;
            }
            let slip = (v_si[i] - proxies.vel[i]).norm();
            let re = proxies.rho_bar[i] * drag.d * slip / drag.eta0;
            18.0 * n * phi * drag.eta0 / (drag.d * drag.d) * drag.model.f_hat(phi, re)
        })
        .collect()
}

/// Semi-implicit drag coefficient: K~ = K / (1 + dt K (min_rho_bar^-1 +
/// (phi rho_s)^-1)) with the minimum taken over the node's supported cells.
pub fn semi_implicit_resistance(
    k_star: &[f64],
    n_i: &[f64],
    proxies: &NodalFluidProxies,
    rho_s: f64,
    dt: f64,
) -> Vec<f64> {
    k_star
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let phi = 1.0 - n_i[i];
            if k == 0.0 || phi <= 0.0 {
                return 0.0;
            }
            let min_rho = proxies.min_cell_rho_bar[i];
            if !min_rho.is_finite() || min_rho <= 0.0 {
                return 0.0;
            }
            k / (1.0 + dt * k * (1.0 / min_rho + 1.0 / (phi * rho_s)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DragForces {
    /// Nodal force on the solid phase.
    pub nodal: Vec<V2>,
    /// Per-cell rate rows (0, drag, drag . v_s) added to the fluid update.
    pub cell: Vec<FluidState>,
}

/// Approximate drag pair: f*_i = -K*_i (V_i v_si - sum_a V_a A_ia v_f_a) on
/// nodes and the matching distribution on cells. Equal and opposite by
/// construction when V_i = sum_a V_a A_ia.
pub fn drag_forces(
    k_star: &[f64],
    v_si: &[V2],
    fefv: &FeFvMaps,
    mesh: &Mesh,
    avg: &CellAverages,
) -> DragForces {
    let n = fefv.n_nodes;
    let mut nodal = vec![V2::zeros(); n];
    let mut cell = vec![FluidState::default(); mesh.n_cells()];
    for (ci, col) in fefv.a_cols.iter().enumerate() {
        let v_f = avg.bar[ci].vel();
        let vol = mesh.volume[ci];
        let mut row_mom = V2::zeros();
        let mut row_en = 0.0;
        for &(node, a) in col {
            let k = k_star[node];
            if k == 0.0 {
                continue;
            }
            let slip = v_si[node] - v_f;
            let f = slip * (a * k);
            row_mom += f;
            row_en += f.dot(&v_si[node]);
            nodal[node] -= slip * (k * a * vol);
        }
        cell[ci] = FluidState::new(0.0, row_mom, row_en);
    }
    DragForces { nodal, cell }
}

#[derive(Debug, Clone)]
pub struct BuoyancyForces {
    pub nodal: Vec<V2>,
    pub cell: Vec<FluidState>,
}

/// Buoyancy pair by cell-centroid quadrature: nodal f*_i = (1 - n_i)
/// sum_a V_a grad(N_i)(X_a) p_a; cell rows (0, p grad(n~), p grad(n~).v~_s -
/// (1-n~) p div(v~_s)) evaluated at the centroid.
pub fn buoyancy_forces(
    n_i: &[f64],
    v_si: &[V2],
    p_cell: &[f64],
    fefv: &FeFvMaps,
    mesh: &Mesh,
) -> BuoyancyForces {
    let n = fefv.n_nodes;
    let mut nodal_acc = vec![V2::zeros(); n];
    let mut cell = vec![FluidState::default(); mesh.n_cells()];
    for ci in 0..mesh.n_cells() {
        let p = p_cell[ci];
        let vol = mesh.volume[ci];
        let mut grad_n = V2::zeros();
        let mut n_tilde = 0.0;
        let mut v_tilde = V2::zeros();
        let mut div_v = 0.0;
        for s in &fefv.at_centroid[ci] {
            nodal_acc[s.node] += s.grad * (vol * p);
            grad_n += s.grad * n_i[s.node];
            n_tilde += s.value * n_i[s.node];
            v_tilde += v_si[s.node] * s.value;
            div_v += s.grad.dot(&v_si[s.node]);
        }
        let mom = grad_n * p;
        let en = mom.dot(&v_tilde) - (1.0 - n_tilde) * p * div_v;
        cell[ci] = FluidState::new(0.0, mom, en);
    }
    let nodal = nodal_acc
        .into_iter()
        .enumerate()
        .map(|(i, t)| t * (1.0 - n_i[i]))
        .collect();
    BuoyancyForces { nodal, cell }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSet;
    use crate::mapping::FeFvMaps;
    use crate::math::v2;
    use crate::mesh::build_cartesian_mesh;
    use proptest::prelude::*;

    fn ck(d: f64, eta0: f64) -> DragParams {
        DragParams {
            model: DragModel::CarmanKozeny,
            d,
            eta0,
        }
    }

    fn grid(n: usize, w: f64) -> (BasisSet, Mesh, FeFvMaps) {
        let basis = BasisSet::tent(
            (0..=n).map(|i| i as f64 * w / n as f64).collect(),
            (0..=n).map(|i| i as f64 * w / n as f64).collect(),
        );
        let mesh = build_cartesian_mesh(n, n, v2(0.0, 0.0), v2(w, w)).unwrap();
        let fefv = FeFvMaps::build(&basis, &mesh);
        (basis, mesh, fefv)
    }

    fn uniform_proxies(n: usize, rho: f64, vel: V2) -> NodalFluidProxies {
        NodalFluidProxies {
            rho_bar: vec![rho; n],
            vel: vec![vel; n],
            min_cell_rho_bar: vec![rho; n],
        }
    }

    #[test]
    fn resistance_reference_values() {
        let drag = ck(1e-3, 1e-3);
        let proxies = uniform_proxies(3, 420.0, V2::zeros());
        let v_si = vec![V2::zeros(); 3];
        // No solid: zero resistance.
        let k = nodal_resistance(&[1.0, 0.4, 0.4], &proxies, &v_si, &drag);
        assert_eq!(k[0], 0.0);
        // n = 0.4, phi = 0.6, Carman-Kozeny: F = 37.5, K* = 1.62e5.
        assert!((k[1] - 1.62e5).abs() < 1e-9 * 1.62e5);
        // Doubling d quarters K*.
        let drag2 = ck(2e-3, 1e-3);
        let k2 = nodal_resistance(&[1.0, 0.4, 0.4], &proxies, &v_si, &drag2);
        assert!((k2[1] - k[1] / 4.0).abs() < 1e-9 * k[1]);
    }

    #[test]
    fn drag_pair_zero_cases_and_uniform_slip() {
        let (_, mesh, fefv) = grid(6, 1.2);
        let n_nodes = fefv.n_nodes;
        let rho_bar = 500.0;
        let v_f = v2(0.3, -0.1);
        let state = FluidState::new(rho_bar, v_f * rho_bar, rho_bar * 10.0);
        let avg = CellAverages::uniform(mesh.n_cells(), state);
        // Zero slip: both vanish.
        let k = vec![2.0e4; n_nodes];
        let v_si = vec![v_f; n_nodes];
        let f = drag_forces(&k, &v_si, &fefv, &mesh, &avg);
        assert!(f.nodal.iter().all(|v| v.norm() < 1e-12));
        assert!(f.cell.iter().all(|c| c.mom.norm() < 1e-12));
        // K = 0: zero.
        let f = drag_forces(&vec![0.0; n_nodes], &v_si, &fefv, &mesh, &avg);
        assert!(f.nodal.iter().all(|v| v.norm() == 0.0));
        // Uniform slip: f*_i = -K V_i dv.
        let dv = v2(0.05, 0.02);
        let v_si: Vec<V2> = vec![v_f + dv; n_nodes];
        let f = drag_forces(&k, &v_si, &fefv, &mesh, &avg);
        for i in 0..n_nodes {
            let expect = -dv * (k[i] * fefv.v_i[i]);
            assert!((f.nodal[i] - expect).norm() < 1e-10 * expect.norm().max(1e-12));
        }
        // Newton's third law: nodal sum plus volume-weighted cell rows = 0.
        let nodal_sum: V2 = f.nodal.iter().fold(V2::zeros(), |a, b| a + b);
        let cell_sum: V2 = f
            .cell
            .iter()
            .zip(mesh.volume.iter())
            .fold(V2::zeros(), |a, (c, &v)| a + c.mom * v);
        assert!(
            (nodal_sum + cell_sum).norm() < 1e-10 * cell_sum.norm().max(1e-12),
            "third law: {nodal_sum:?} vs {cell_sum:?}"
        );
        // Energy row consistency: each node's contribution is the momentum
        // term dotted with v_si, so with uniform v_si the row sums agree to
        // round-off.
        for c in &f.cell {
            let expect = c.mom.dot(&(v_f + dv));
            assert!((c.en - expect).abs() <= 1e-13 * expect.abs().max(1e-30));
        }
    }

    #[test]
    fn semi_implicit_limits() {
        let n_i = vec![0.4];
        let proxies = uniform_proxies(1, 420.0, V2::zeros());
        let k = vec![1.62e5];
        let rho_s = 2650.0;
        // dt = 0: unchanged.
        let kt = semi_implicit_resistance(&k, &n_i, &proxies, rho_s, 0.0);
        assert_eq!(kt[0], k[0]);
        // dt -> infinity: K~ -> [dt (rho^-1 + (phi rho_s)^-1)]^-1.
        let dt = 1e9;
        let kt = semi_implicit_resistance(&k, &n_i, &proxies, rho_s, dt);
        let denom = 1.0 / 420.0 + 1.0 / (0.6 * 2650.0);
        assert!((kt[0] - 1.0 / (dt * denom)).abs() < 1e-6 / (dt * denom));
        // phi = 0: zero.
        let kt = semi_implicit_resistance(&[5.0], &[1.0], &proxies, rho_s, 0.1);
        assert_eq!(kt[0], 0.0);
    }

    proptest! {
        /// The semi-implicit drag update never increases slip on a uniform
        /// patch: the one-step relaxation factor stays within [-1, 1] for
        /// any dt > 0 and any resistance.
        #[test]
        fn semi_implicit_slip_monotone(dt in 1e-8_f64..1e4, k in 1e-2_f64..1e8) {
            let rho_bar = 420.0;
            let rho_bar_s = 0.6 * 2650.0;
            let n_i = vec![0.4];
            let proxies = uniform_proxies(1, rho_bar, V2::zeros());
            let kt = semi_implicit_resistance(&[k], &n_i, &proxies, 2650.0, dt)[0];
            let rate = kt * (1.0 / rho_bar_s + 1.0 / rho_bar);
            let factor = 1.0 - dt * rate;
            prop_assert!(factor.abs() <= 1.0 + 1e-12, "slip grew: {factor}");
        }
    }

    #[test]
    fn buoyancy_zero_cases() {
        let (_, mesh, fefv) = grid(6, 1.2);
        let n_nodes = fefv.n_nodes;
        let v_si = vec![V2::zeros(); n_nodes];
        // n = 1: no solid, nodal buoyancy zero.
        let p_cell = vec![5e4; mesh.n_cells()];
        let f = buoyancy_forces(&vec![1.0; n_nodes], &v_si, &p_cell, &fefv, &mesh);
        assert!(f.nodal.iter().all(|v| v.norm() == 0.0));
        // Uniform p, interior nodes: gradient sums make f*_i = 0.
        let f = buoyancy_forces(&vec![0.4; n_nodes], &v_si, &p_cell, &fefv, &mesh);
        for j in 1..6 {
            for i in 1..6 {
                let node = j * 7 + i;
                assert!(f.nodal[node].norm() < 5e4 * 1e-12, "node {node}");
            }
        }
        // Uniform n: cell momentum rows vanish identically (grad n~ = 0).
        for c in &f.cell {
            assert!(c.mom.norm() < 5e4 * 1e-12);
        }
    }

    #[test]
    fn buoyancy_hydrostatic_patch() {
        // Hydrostatic p = rho_f g (H - y), uniform phi: nodal buoyancy per
        // unit node volume approximates phi rho_f g upward (1% tolerance on
        // an interior patch).
        let (_, mesh, fefv) = grid(8, 1.0);
        let n_nodes = fefv.n_nodes;
        let rho_f = 1000.0;
        let g = 9.81;
        let phi = 0.6;
        let p_cell: Vec<f64> = mesh
            .centroid
            .iter()
            .map(|c| rho_f * g * (1.0 - c.y))
            .collect();
        let v_si = vec![V2::zeros(); n_nodes];
        let f = buoyancy_forces(&vec![1.0 - phi; n_nodes], &v_si, &p_cell, &fefv, &mesh);
        for j in 2..7 {
            for i in 2..7 {
                let node = j * 9 + i;
                let per_vol = f.nodal[node] / fefv.v_i[node];
                let expect = v2(0.0, phi * rho_f * g);
                assert!(
                    (per_vol - expect).norm() < 0.01 * expect.norm(),
                    "node {node}: {per_vol:?}"
                );
            }
        }
    }

    #[test]
    fn buoyancy_pair_momentum_exchange_balances() {
        let (basis, mesh, fefv) = grid(10, 1.0);
        let n_nodes = fefv.n_nodes;
        let grad_p = v2(0.3e4, -0.2e4);
        let p_cell: Vec<f64> = mesh
            .centroid
            .iter()
            .map(|c| 1e4 + grad_p.dot(c))
            .collect();
        let v_si = vec![V2::zeros(); n_nodes];
        // Uniform n, linear p: cell rows vanish, interior nodes feel exactly
        // -(1-n) V_i grad(p), and the total over all nodes cancels by the
        // gradient partition of unity.
        let n_i: Vec<f64> = vec![0.4; n_nodes];
        let f = buoyancy_forces(&n_i, &v_si, &p_cell, &fefv, &mesh);
        for c in &f.cell {
            assert!(c.mom.norm() < 1e-9);
        }
        for j in 2..9 {
            for i in 2..9 {
                let node = j * 11 + i;
                let expect = -grad_p * (0.6 * fefv.v_i[node]);
                assert!(
                    (f.nodal[node] - expect).norm() < 1e-9 * expect.norm(),
                    "node {node}"
                );
            }
        }
        let total: V2 = f.nodal.iter().fold(V2::zeros(), |a, b| a + b);
        assert!(total.norm() < 1e-9 * grad_p.norm());
        // Smooth non-uniform n: Newton pairing between the nodal forces and
        // the volume-weighted cell rows (to 1e-10 relative).
        let n_i: Vec<f64> = (0..n_nodes)
            .map(|i| {
                let p = basis.node_pos(i);
                0.45 + 0.1 * (2.0 * p.x).sin() * (1.5 * p.y).cos()
            })
            .collect();
        let f = buoyancy_forces(&n_i, &v_si, &p_cell, &fefv, &mesh);
        let nodal_sum: V2 = f.nodal.iter().fold(V2::zeros(), |a, b| a + b);
        let cell_sum: V2 = f
            .cell
            .iter()
            .zip(mesh.volume.iter())
            .fold(V2::zeros(), |a, (c, &v)| a + c.mom * v);
        let scale = f.nodal.iter().map(|v| v.norm()).sum::<f64>();
        assert!(
            (nodal_sum + cell_sum).norm() < 1e-10 * scale,
            "{nodal_sum:?} vs {cell_sum:?}"
        );
    }

    #[test]
    fn buoyancy_approximation_error_shrinks_linearly() {
        // Compare the approximate nodal buoyancy against the exact weak-form
        // integral sum_j (1-n_j) integral(grad(N_i N_j) p) on refining grids
        // with smooth n(x) and p(x); the normalized error must drop at least
        // linearly in h (fit slope >= 0.9).
        let p_field = |x: V2| 1e4 * (1.0 + 0.4 * (2.0 * x.x).sin() + 0.3 * x.y);
        let n_field = |x: V2| 0.5 + 0.2 * (1.5 * x.x).cos() * (1.2 * x.y).sin();
        let mut samples = Vec::new();
        for &n in &[4usize, 8, 16] {
            let (basis, mesh, fefv) = grid(n, 1.0);
            let n_nodes = fefv.n_nodes;
            let n_i: Vec<f64> = (0..n_nodes).map(|i| n_field(basis.node_pos(i))).collect();
            let p_cell: Vec<f64> = mesh.centroid.iter().map(|&c| p_field(c)).collect();
            let v_si = vec![V2::zeros(); n_nodes];
            let approx = buoyancy_forces(&n_i, &v_si, &p_cell, &fefv, &mesh);
            // Exact integral by dense midpoint quadrature for the center node.
            let node = (n / 2) * (n + 1) + n / 2;
            let mq = 160;
            let hq = 1.0 / mq as f64;
            let mut exact = V2::zeros();
            for jq in 0..mq {
                for iq in 0..mq {
                    let x = v2((iq as f64 + 0.5) * hq, (jq as f64 + 0.5) * hq);
                    let sup = basis.supported(x);
                    let Some(si) = sup.iter().find(|s| s.node == node) else {
                        continue;
                    };
                    let p = p_field(x);
                    for sj in &sup {
                        let gij = sj.grad * si.value + si.grad * sj.value;
                        exact += gij * ((1.0 - n_i[sj.node]) * p * hq * hq);
                    }
                }
            }
            let err = (approx.nodal[node] - exact).norm() / fefv.v_i[node];
            samples.push((1.0 / n as f64, err));
        }
        let slope = crate::math::loglog_slope(&samples);
        assert!(
            slope >= 0.9,
            "buoyancy approximation error slope {slope}: {samples:?}"
        );
    }
}
