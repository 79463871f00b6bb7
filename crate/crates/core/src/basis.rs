//! Finite element basis sets on the background grid: bilinear "tent"
//! functions and clamped cubic B-splines on Cartesian grids, plus P1
//! functions on triangulated grids. All sets form a partition of unity over
//! the grid domain.
//!
//! Material point characteristic functions: Dirac (classic MPM) or uGIMP
//! axis-aligned boxes with fixed half-widths (Bardenhagen & Kober 2004).

use crate::error::{Error, Result};
use crate::math::{v2, V2};
use crate::mesh::Mesh;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CharacteristicKind {
    /// Dirac delta at the point centroid.
    Delta,
    /// Axis-aligned box of fixed half-widths; box measure equals the initial
    /// point volume.
    UGimp,
}

#[derive(Debug, Clone)]
pub enum BasisSet {
    TentCartesian { xs: Vec<f64>, ys: Vec<f64> },
    BSplineCartesian { xs: Vec<f64>, ys: Vec<f64> },
    TriLinear { mesh: Arc<Mesh> },
}

/// One nonzero basis function at a query position.
#[derive(Debug, Clone, Copy)]
pub struct BasisSample {
    pub node: usize,
    pub value: f64,
    pub grad: V2,
}

fn tent_axis(coords: &[f64], x: f64) -> Vec<(usize, f64, f64)> {
    let n = coords.len();
    if x < coords[0] - 1e-12 || x > coords[n - 1] + 1e-12 {
        return Vec::new();
    }
    let x = x.clamp(coords[0], coords[n - 1]);
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x >= coords[mid] {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = coords[lo + 1] - coords[lo];
    let t = (x - coords[lo]) / h;
    vec![(lo, 1.0 - t, -1.0 / h), (lo + 1, t, 1.0 / h)]
}

/// Clamped cubic B-spline knot vector over the breakpoints `coords`.
fn clamped_knots(coords: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(coords.len() + 6);
    for _ in 0..3 {
        t.push(coords[0]);
    }
    t.extend_from_slice(coords);
    for _ in 0..3 {
        t.push(*coords.last().unwrap());
    }
    t
}

/// Cubic B-spline basis values and first derivatives at `x` (The NURBS Book,
/// algorithms A2.1-A2.3 specialized to p = 3). Returns the four nonzero
/// functions starting at index `span - 3`.
fn bspline_axis(coords: &[f64], x: f64) -> Vec<(usize, f64, f64)> {
    const P: usize = 3;
    let last = *coords.last().unwrap();
    if x < coords[0] - 1e-12 || x > last + 1e-12 {
        return Vec::new();
    }
    let x = x.clamp(coords[0], last);
    let t = clamped_knots(coords);
    let m = coords.len() - 1; // intervals
    // span: index s with t[s] <= x < t[s+1], s in [P, P+m-1]
    let mut s = P + m - 1;
    for k in 0..m {
        if x < coords[k + 1] {
            s = P + k;
            break;
        }
    }
    let mut ndu = [[0.0_f64; P + 1]; P + 1];
    let mut left = [0.0_f64; P + 1];
    let mut right = [0.0_f64; P + 1];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = x - t[s + 1 - j];
        right[j] = t[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { ndu[r][j - 1] / denom } else { 0.0 };
            ndu[j][r] = denom;
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut out = Vec::with_capacity(P + 1);
    for r in 0..=P {
        // First derivative from the p-1 degree functions.
        let mut d = 0.0;
        if r >= 1 {
            let denom = t[s + r] - t[s + r - P];
            if denom != 0.0 {
                d += ndu[r - 1][P - 1] / denom;
            }
        }
        if r <= P - 1 {
            let denom = t[s + r + 1] - t[s + r + 1 - P];
            if denom != 0.0 {
                d -= ndu[r][P - 1] / denom;
            }
        }
        out.push((s - P + r, ndu[r][P], P as f64 * d));
    }
    out
}

fn greville(coords: &[f64]) -> Vec<f64> {
    let t = clamped_knots(coords);
    let n = coords.len() + 2;
    (0..n)
        .map(|i| (t[i + 1] + t[i + 2] + t[i + 3]) / 3.0)
        .collect()
}

impl BasisSet {
    pub fn tent(xs: Vec<f64>, ys: Vec<f64>) -> BasisSet {
        BasisSet::TentCartesian { xs, ys }
    }

    pub fn bspline(xs: Vec<f64>, ys: Vec<f64>) -> BasisSet {
        BasisSet::BSplineCartesian { xs, ys }
    }

    pub fn tri_linear(mesh: Arc<Mesh>) -> Result<BasisSet> {
        if mesh.is_quad() {
            return Err(Error::config("TriLinear basis requires a triangular mesh"));
        }
        Ok(BasisSet::TriLinear { mesh })
    }

    /// Polynomial order of the basis.
    pub fn order(&self) -> usize {
        match self {
            BasisSet::TentCartesian { .. } | BasisSet::TriLinear { .. } => 1,
            BasisSet::BSplineCartesian { .. } => 3,
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            BasisSet::TentCartesian { xs, ys } => xs.len() * ys.len(),
            BasisSet::BSplineCartesian { xs, ys } => (xs.len() + 2) * (ys.len() + 2),
            BasisSet::TriLinear { mesh } => mesh.nodes.len(),
        }
    }


    /// Representative position of a node (Greville abscissa for splines).
    pub fn node_pos(&self, i: usize) -> V2 {
        match self {
            BasisSet::TentCartesian { xs, ys } => {
                let nx = xs.len();
                v2(xs[i % nx], ys[i / nx])
            }
            BasisSet::BSplineCartesian { xs, ys } => {
                let gx = greville(xs);
                let gy = greville(ys);
                let nx = gx.len();
                v2(gx[i % nx], gy[i / nx])
            }
            BasisSet::TriLinear { mesh } => mesh.nodes[i],
        }
    }

    /// All basis functions with nonzero support at `x`, with gradients.
    pub fn supported(&self, x: V2) -> Vec<BasisSample> {
        match self {
            BasisSet::TentCartesian { xs, ys } => {
                let ax = tent_axis(xs, x.x);
                let ay = tent_axis(ys, x.y);
                let nx = xs.len();
                let mut out = Vec::with_capacity(ax.len() * ay.len());
                for &(j, wy, dy) in &ay {
                    for &(i, wx, dx) in &ax {
                        out.push(BasisSample {
                            node: j * nx + i,
                            value: wx * wy,
                            grad: v2(dx * wy, wx * dy),
                        });
                    }
                }
                out
            }
            BasisSet::BSplineCartesian { xs, ys } => {
                let ax = bspline_axis(xs, x.x);
                let ay = bspline_axis(ys, x.y);
                let nx = xs.len() + 2;
                let mut out = Vec::with_capacity(ax.len() * ay.len());
                for &(j, wy, dy) in &ay {
                    for &(i, wx, dx) in &ax {
                        out.push(BasisSample {
                            node: j * nx + i,
                            value: wx * wy,
                            grad: v2(dx * wy, wx * dy),
                        });
                    }
                }
                out
            }
            BasisSet::TriLinear { mesh } => {
                let Some(cell) = mesh.locate(x) else {
                    return Vec::new();
                };
                let ids = &mesh.cells[cell];
                let (a, b, c) = (mesh.nodes[ids[0]], mesh.nodes[ids[1]], mesh.nodes[ids[2]]);
                let det = (b - a).x * (c - a).y - (c - a).x * (b - a).y;
                let l1 = ((b.x - x.x) * (c.y - x.y) - (c.x - x.x) * (b.y - x.y)) / det;
                let l2 = ((c.x - x.x) * (a.y - x.y) - (a.x - x.x) * (c.y - x.y)) / det;
                let l3 = 1.0 - l1 - l2;
                let g1 = v2(b.y - c.y, c.x - b.x) / det;
                let g2 = v2(c.y - a.y, a.x - c.x) / det;
                let g3 = v2(a.y - b.y, b.x - a.x) / det;
                vec![
                    BasisSample { node: ids[0], value: l1, grad: g1 },
                    BasisSample { node: ids[1], value: l2, grad: g2 },
                    BasisSample { node: ids[2], value: l3, grad: g3 },
                ]
            }
        }
    }

    /// Evaluates a single basis function; exactly zero outside its support.
    pub fn eval(&self, i: usize, x: V2) -> (f64, V2) {
        self.supported(x)
            .iter()
            .find(|s| s.node == i)
            .map(|s| (s.value, s.grad))
            .unwrap_or((0.0, V2::zeros()))
    }

    /// Uniform grid spacing per axis; error when the grid is graded or
    /// unstructured (required by the analytic uGIMP transfer integrals).
    pub fn uniform_spacing(&self) -> Result<V2> {
        let check = |c: &[f64]| -> Result<f64> {
            let h = c[1] - c[0];
            for w in c.windows(2) {
                if ((w[1] - w[0]) - h).abs() > 1e-10 * h {
                    return Err(Error::config(
                        "uGIMP transfers require a uniform Cartesian FE grid",
                    ));
                }
            }
            Ok(h)
        };
        match self {
            BasisSet::TentCartesian { xs, ys } => Ok(v2(check(xs)?, check(ys)?)),
            _ => Err(Error::config(
                "uGIMP transfers are only supported with tent bases on Cartesian grids",
            )),
        }
    }

    pub fn domain(&self) -> Option<(V2, V2)> {
        match self {
            BasisSet::TentCartesian { xs, ys } | BasisSet::BSplineCartesian { xs, ys } => Some((
                v2(xs[0], ys[0]),
                v2(*xs.last().unwrap(), *ys.last().unwrap()),
            )),
            BasisSet::TriLinear { .. } => None,
        }
    }

    /// Nodes whose support touches the given domain side (for solid-phase
    /// boundary constraints). Sides use the mesh tag convention.
    pub fn side_nodes(&self, tag: usize) -> Vec<usize> {
        match self {
            BasisSet::TentCartesian { xs, ys } => {
                let nx = xs.len();
                let ny = ys.len();
                match tag {
                    crate::mesh::TAG_LEFT => (0..ny).map(|j| j * nx).collect(),
                    crate::mesh::TAG_RIGHT => (0..ny).map(|j| j * nx + nx - 1).collect(),
                    crate::mesh::TAG_BOTTOM => (0..nx).collect(),
                    crate::mesh::TAG_TOP => (0..nx).map(|i| (ny - 1) * nx + i).collect(),
                    _ => Vec::new(),
                }
            }
            BasisSet::BSplineCartesian { xs, ys } => {
                let nx = xs.len() + 2;
                let ny = ys.len() + 2;
                match tag {
                    crate::mesh::TAG_LEFT => (0..ny).map(|j| j * nx).collect(),
                    crate::mesh::TAG_RIGHT => (0..ny).map(|j| j * nx + nx - 1).collect(),
                    crate::mesh::TAG_BOTTOM => (0..nx).collect(),
                    crate::mesh::TAG_TOP => (0..nx).map(|i| (ny - 1) * nx + i).collect(),
                    _ => Vec::new(),
                }
            }
            BasisSet::TriLinear { mesh } => {
                let mut ids: Vec<usize> = mesh
                    .faces
                    .iter()
                    .filter(|f| f.right.is_none() && f.tag == tag)
                    .flat_map(|f| {
                        let c = &mesh.cells[f.left];
                        c.iter()
                            .copied()
                            .filter(|&n| {
                                let d = mesh.nodes[n] - f.midpoint;
                                (d.dot(&f.normal)).abs() < 1e-9 * (f.area + 1.0)
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            }
        }
    }
}

/// Standard uGIMP axis weight: the exact integral of a tent function of
/// spacing `h` against a top-hat of half-width `l` centered at offset `r`,
/// divided by the box measure. Requires l <= h/2.
pub fn ugimp_axis_weight(r: f64, h: f64, l: f64) -> (f64, f64) {
    let s = r.abs();
    let sign = if r >= 0.0 { 1.0 } else { -1.0 };
    if s < l {
        (1.0 - (r * r + l * l) / (2.0 * h * l), -r / (h * l))
    } else if s < h - l {
        (1.0 - s / h, -sign / h)
    } else if s < h + l {
        let t = h + l - s;
        (t * t / (4.0 * h * l), -sign * t / (2.0 * h * l))
    } else {
        (0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_mesh, triangulate};
    use rand::{Rng, SeedableRng};

    fn rngs() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(42)
    }

    fn check_pou(basis: &BasisSet, lo: V2, hi: V2) {
        let mut rng = rngs();
        for _ in 0..1000 {
            let x = v2(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
            );
            let s = basis.supported(x);
            let sum: f64 = s.iter().map(|b| b.value).sum();
            let gsum: V2 = s.iter().fold(V2::zeros(), |a, b| a + b.grad);
            assert!((sum - 1.0).abs() < 1e-12, "PoU violated: {sum} at {x:?}");
            assert!(gsum.norm() < 1e-10, "grad sum violated: {gsum:?} at {x:?}");
        }
    }

    #[test]
    fn tent_partition_of_unity() {
        let b = BasisSet::tent(
            (0..=7).map(|i| i as f64 * 0.25).collect(),
            (0..=5).map(|i| i as f64 * 0.5).collect(),
        );
        check_pou(&b, v2(0.0, 0.0), v2(1.75, 2.5));
    }

    #[test]
    fn bspline_partition_of_unity() {
        let b = BasisSet::bspline(
            (0..=6).map(|i| i as f64 * 0.3).collect(),
            (0..=4).map(|i| i as f64 * 0.2).collect(),
        );
        check_pou(&b, v2(0.0, 0.0), v2(1.8, 0.8));
    }

    #[test]
    fn trilinear_partition_of_unity() {
        let q = build_cartesian_mesh(5, 4, v2(0.0, 0.0), v2(1.0, 0.8)).unwrap();
        let t = std::sync::Arc::new(triangulate(&q).unwrap());
        let b = BasisSet::tri_linear(t).unwrap();
        check_pou(&b, v2(0.0, 0.0), v2(1.0, 0.8));
    }

    #[test]
    fn tent_nodal_interpolation() {
        let b = BasisSet::tent(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]);
        // At its own node: 1. At the adjacent node: 0 (compact support).
        let (v, _) = b.eval(4, v2(0.5, 0.5));
        assert!((v - 1.0).abs() < 1e-15);
        let (v, _) = b.eval(3, v2(0.5, 0.5));
        assert!(v.abs() < 1e-15);
        // 1D tent of spacing h at distance h/2: 0.5.
        let (v, _) = b.eval(4, v2(0.75, 0.5));
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn outside_support_is_exactly_zero() {
        let b = BasisSet::tent(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]);
        let (v, g) = b.eval(0, v2(1.5, 0.5));
        assert_eq!(v, 0.0);
        assert_eq!(g, V2::zeros());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let grids: Vec<BasisSet> = vec![
            BasisSet::tent(vec![0.0, 0.4, 0.8, 1.2], vec![0.0, 0.3, 0.6]),
            BasisSet::bspline(
                (0..=5).map(|i| i as f64 * 0.2).collect(),
                (0..=5).map(|i| i as f64 * 0.2).collect(),
            ),
        ];
        let mut rng = rngs();
        for b in &grids {
            for _ in 0..50 {
                let x = v2(rng.gen_range(0.05..0.55), rng.gen_range(0.05..0.55));
                let eps = 1e-6;
                for s in b.supported(x) {
                    let (vpx, _) = b.eval(s.node, x + v2(eps, 0.0));
                    let (vmx, _) = b.eval(s.node, x - v2(eps, 0.0));
                    let (vpy, _) = b.eval(s.node, x + v2(0.0, eps));
                    let (vmy, _) = b.eval(s.node, x - v2(0.0, eps));
                    let fd = v2((vpx - vmx) / (2.0 * eps), (vpy - vmy) / (2.0 * eps));
                    assert!((fd - s.grad).norm() < 2e-5, "grad mismatch for {b:?}");
                }
            }
        }
    }

    #[test]
    fn ugimp_weight_values() {
        // Box of width h/2 (l = h/4) centered on the node: 1 - l/(2h) = 0.875.
        let h = 0.3;
        let (w, _) = ugimp_axis_weight(0.0, h, h / 4.0);
        assert!((w - 0.875).abs() < 1e-15);
        // Far outside the support.
        let (w, dw) = ugimp_axis_weight(1.3 * h, h, h / 4.0);
        assert_eq!((w, dw), (0.0, 0.0));
    }

    #[test]
    fn ugimp_weights_sum_to_one_and_match_quadrature() {
        // Interior point against a lattice of nodes: partition of unity, and
        // each weight equals a brute-force quadrature of tent x box.
        let h = 0.25;
        let l = 0.0625;
        let xp: f64 = 0.37;
        let mut total = 0.0;
        for i in -2..8 {
            let xi = i as f64 * h;
            let (w, dw) = ugimp_axis_weight(xp - xi, h, l);
            total += w;
            // midpoint quadrature of (1/2l) ... tent(x - xi)
            let nq = 4000;
            let mut q = 0.0;
            let mut dq = 0.0;
            for k in 0..nq {
                let x = xp - l + (k as f64 + 0.5) / nq as f64 * 2.0 * l;
                let t = 1.0 - ((x - xi) / h).abs();
                if t > 0.0 {
                    q += t;
                    dq += -((x - xi).signum()) / h;
                }
            }
            q /= nq as f64;
            dq /= nq as f64;
            assert!((w - q).abs() < 1e-6, "weight vs quadrature at node {i}");
            assert!((dw - dq).abs() < 2e-3);
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn side_nodes_tent() {
        let b = BasisSet::tent(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]);
        assert_eq!(b.side_nodes(crate::mesh::TAG_LEFT), vec![0, 3]);
        assert_eq!(b.side_nodes(crate::mesh::TAG_TOP), vec![3, 4, 5]);
    }
}
