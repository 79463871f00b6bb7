//! Mapping matrices linking material points, FE nodes, and finite volumes:
//! point-to-node transfers S and G (recomputed every step as points move),
//! the static FE-to-FV integration matrix A, and the lumped diagonals B_D
//! (node volumes) and M_D (node masses).

use crate::basis::{ugimp_axis_weight, BasisSample, BasisSet, CharacteristicKind};
use crate::error::Result;
use crate::math::{v2, V2};
use crate::mesh::Mesh;
use crate::solid::MaterialPoint;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

/// Static coupling between the FE basis and the FV mesh: A entries, cell
/// averages of basis gradients, node volumes, and cached basis evaluations at
/// cell centroids and face midpoints.
#[derive(Debug)]
pub struct FeFvMaps {
    /// Per FV cell: (node, A_i_alpha) sorted by node; column sums to 1.
    pub a_cols: Vec<Vec<(usize, f64)>>,
    /// Per FV cell: (node, (1/V) integral of grad N_i over the cell).
    pub grad_a_cols: Vec<Vec<(usize, V2)>>,
    /// Node volumes V_i = integral of N_i over the grid domain (the lumped
    /// volume matrix B_D).
    pub v_i: Vec<f64>,
    /// Basis samples at each FV cell centroid.
    pub at_centroid: Vec<Vec<BasisSample>>,
    /// Basis samples at each FV face midpoint.
    pub at_face_mid: Vec<Vec<BasisSample>>,
    pub n_nodes: usize,
}

fn tri_leaf(verts: [V2; 3]) -> [(V2, f64); 3] {
    let area = 0.5
        * ((verts[1] - verts[0]).x * (verts[2] - verts[0]).y
            - (verts[2] - verts[0]).x * (verts[1] - verts[0]).y)
            .abs();
    let w = area / 3.0;
    [
        ((verts[0] + verts[1]) * 0.5, w),
        ((verts[1] + verts[2]) * 0.5, w),
        ((verts[2] + verts[0]) * 0.5, w),
    ]
}

fn quad_leaf(verts: [V2; 4]) -> Vec<(V2, f64)> {
    // 2x2 Gauss on the bilinear map.
    let g = 1.0 / 3.0_f64.sqrt();
    let mut out = Vec::with_capacity(4);
    for &(xi, eta) in &[(-g, -g), (g, -g), (g, g), (-g, g)] {
        let n = [
            0.25 * (1.0 - xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 + eta),
            0.25 * (1.0 - xi) * (1.0 + eta),
        ];
        let dxi = [
            -0.25 * (1.0 - eta),
            0.25 * (1.0 - eta),
            0.25 * (1.0 + eta),
            -0.25 * (1.0 + eta),
        ];
        let deta = [
            -0.25 * (1.0 - xi),
            -0.25 * (1.0 + xi),
            0.25 * (1.0 + xi),
            0.25 * (1.0 - xi),
        ];
        let mut x = V2::zeros();
        let mut jx = V2::zeros();
        let mut jy = V2::zeros();
        for k in 0..4 {
            x += verts[k] * n[k];
            jx += verts[k] * dxi[k];
            jy += verts[k] * deta[k];
        }
        let detj = jx.x * jy.y - jy.x * jx.y;
        out.push((x, detj.abs()));
    }
    out
}

fn diameter(verts: &[V2]) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            d = d.max((verts[i] - verts[j]).norm());
        }
    }
    d
}

fn subdivide_tri(verts: [V2; 3], target: f64, depth: u32, out: &mut Vec<(V2, f64)>) {
    if depth == 0 || diameter(&verts) <= target {
        out.extend_from_slice(&tri_leaf(verts));
        return;
    }
    let m01 = (verts[0] + verts[1]) * 0.5;
    let m12 = (verts[1] + verts[2]) * 0.5;
    let m20 = (verts[2] + verts[0]) * 0.5;
    subdivide_tri([verts[0], m01, m20], target, depth - 1, out);
    subdivide_tri([m01, verts[1], m12], target, depth - 1, out);
    subdivide_tri([m20, m12, verts[2]], target, depth - 1, out);
    subdivide_tri([m01, m12, m20], target, depth - 1, out);
}

fn subdivide_quad(verts: [V2; 4], target: f64, depth: u32, out: &mut Vec<(V2, f64)>) {
    if depth == 0 || diameter(&verts) <= target {
        out.extend(quad_leaf(verts));
        return;
    }
    let m01 = (verts[0] + verts[1]) * 0.5;
    let m12 = (verts[1] + verts[2]) * 0.5;
    let m23 = (verts[2] + verts[3]) * 0.5;
    let m30 = (verts[3] + verts[0]) * 0.5;
    let c = (verts[0] + verts[1] + verts[2] + verts[3]) * 0.25;
    subdivide_quad([verts[0], m01, c, m30], target, depth - 1, out);
    subdivide_quad([m01, verts[1], m12, c], target, depth - 1, out);
    subdivide_quad([c, m12, verts[2], m23], target, depth - 1, out);
    subdivide_quad([m30, c, m23, verts[3]], target, depth - 1, out);
}

impl FeFvMaps {
    /// Integrates the FE basis over every FV cell. Cells larger than the FE
    /// spacing are subdivided so that the 3-point (tri) / 2x2 Gauss (quad)
    /// leaf rules act within single elements.
    pub fn build(basis: &BasisSet, mesh: &Mesh) -> FeFvMaps {
        let n_nodes = basis.n_nodes();
        let fe_h = match basis {
            BasisSet::TentCartesian { xs, ys } | BasisSet::BSplineCartesian { xs, ys } => xs
                .windows(2)
                .map(|w| w[1] - w[0])
                .chain(ys.windows(2).map(|w| w[1] - w[0]))
                .fold(f64::MAX, f64::min),
            BasisSet::TriLinear { mesh } => (0..mesh.n_cells())
                .map(|c| mesh.cell_length(c))
                .fold(f64::MAX, f64::min),
        };
        let cols: Vec<(Vec<(usize, f64)>, Vec<(usize, V2)>)> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|ci| {
                let ids = &mesh.cells[ci];
                let mut pts = Vec::new();
                if ids.len() == 3 {
                    subdivide_tri(
                        [mesh.nodes[ids[0]], mesh.nodes[ids[1]], mesh.nodes[ids[2]]],
                        fe_h,
                        6,
                        &mut pts,
                    );
                } else {
                    subdivide_quad(
                        [
                            mesh.nodes[ids[0]],
                            mesh.nodes[ids[1]],
                            mesh.nodes[ids[2]],
                            mesh.nodes[ids[3]],
                        ],
                        fe_h,
                        6,
                        &mut pts,
                    );
                }
                let mut acc: HashMap<usize, (f64, V2)> = HashMap::new();
                for (xq, wq) in pts {
                    for s in basis.supported(xq) {
                        let e = acc.entry(s.node).or_insert((0.0, V2::zeros()));
                        e.0 += wq * s.value;
                        e.1 += s.grad * wq;
                    }
                }
                let inv_v = 1.0 / mesh.volume[ci];
                let mut a: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
                let mut g: Vec<(usize, V2)> = Vec::with_capacity(acc.len());
                let mut entries: Vec<(usize, (f64, V2))> = acc.into_iter().collect();
                entries.sort_unstable_by_key(|e| e.0);
                for (node, (av, gv)) in entries {
                    if av.abs() > 1e-14 || gv.norm() > 1e-12 {
                        a.push((node, av * inv_v));
                        g.push((node, gv * inv_v));
                    }
                }
                (a, g)
            })
            .collect();
        let mut a_cols = Vec::with_capacity(mesh.n_cells());
        let mut grad_a_cols = Vec::with_capacity(mesh.n_cells());
        let mut v_i = vec![0.0; n_nodes];
        for (ci, (a, g)) in cols.into_iter().enumerate() {
            for &(node, av) in &a {
                v_i[node] += av * mesh.volume[ci];
            }
            a_cols.push(a);
            grad_a_cols.push(g);
        }
        let at_centroid: Vec<Vec<BasisSample>> = mesh
            .centroid
            .iter()
            .map(|&c| {
                let mut s = basis.supported(c);
                s.sort_unstable_by_key(|b| b.node);
                s
            })
            .collect();
        let at_face_mid: Vec<Vec<BasisSample>> = mesh
            .faces
            .iter()
            .map(|f| {
                let mut s = basis.supported(f.midpoint);
                s.sort_unstable_by_key(|b| b.node);
                s
            })
            .collect();
        FeFvMaps {
            a_cols,
            grad_a_cols,
            v_i,
            at_centroid,
            at_face_mid,
            n_nodes,
        }
    }

    /// Interpolates a nodal scalar field at a cell centroid.
    pub fn nodal_at_centroid(&self, cell: usize, nodal: &[f64]) -> f64 {
        self.at_centroid[cell]
            .iter()
            .map(|s| s.value * nodal[s.node])
            .sum()
    }

    /// Cell average of a nodal scalar field via the A matrix.
    pub fn cell_average(&self, cell: usize, nodal: &[f64]) -> f64 {
        self.a_cols[cell]
            .iter()
            .map(|&(n, a)| a * nodal[n])
            .sum()
    }
}

#[derive(Debug)]
pub struct MappingMatrices {
    /// Per point: (node, S_ip), sorted by node. Column sums to 1 for points
    /// fully inside the grid.
    pub s: Vec<Vec<(usize, f64)>>,
    /// Per point: (node, G_ip).
    pub g: Vec<Vec<(usize, V2)>>,
    /// Lumped solid mass per node, M_D_ii = sum_p S_ip m_p.
    pub m_diag: Vec<f64>,
    /// Points whose transfer column is empty (outside the grid).
    pub outside: Vec<usize>,
    pub fefv: Arc<FeFvMaps>,
}

impl MappingMatrices {
    /// Lumped volume diagonal B_D (equals the node volumes V_i because the
    /// basis is a partition of unity).
    pub fn b_diag(&self) -> &[f64] {
        &self.fefv.v_i
    }

    pub fn n_nodes(&self) -> usize {
        self.fefv.n_nodes
    }
}

fn point_column(
    basis: &BasisSet,
    kind: CharacteristicKind,
    p: &MaterialPoint,
) -> (Vec<(usize, f64)>, Vec<(usize, V2)>) {
    match kind {
        CharacteristicKind::Delta => {
            let mut s = basis.supported(p.x);
            s.sort_unstable_by_key(|b| b.node);
            (
                s.iter().map(|b| (b.node, b.value)).collect(),
                s.iter().map(|b| (b.node, b.grad)).collect(),
            )
        }
        CharacteristicKind::UGimp => {
            let (xs, ys) = match basis {
                BasisSet::TentCartesian { xs, ys } => (xs, ys),
                _ => unreachable!("uGIMP validated against tent Cartesian grids at setup"),
            };
            let hx = xs[1] - xs[0];
            let hy = ys[1] - ys[0];
            let (lx, ly) = (p.ugimp_half.x, p.ugimp_half.y);
            let axis = |coords: &[f64], h: f64, l: f64, xp: f64| -> Vec<(usize, f64, f64)> {
                let x0 = coords[0];
                let lo = (((xp - x0 - h - l) / h).ceil() as i64).max(0);
                let hi = (((xp - x0 + h + l) / h).floor() as i64).min(coords.len() as i64 - 1);
                (lo..=hi)
                    .filter_map(|i| {
                        let (w, dw) = ugimp_axis_weight(xp - coords[i as usize], h, l);
                        (w != 0.0 || dw != 0.0).then_some((i as usize, w, dw))
                    })
                    .collect()
            };
            let ax = axis(xs, hx, lx, p.x.x);
            let ay = axis(ys, hy, ly, p.x.y);
            let nx = xs.len();
            let mut s = Vec::with_capacity(ax.len() * ay.len());
            let mut g = Vec::with_capacity(ax.len() * ay.len());
            for &(j, wy, dy) in &ay {
                for &(i, wx, dx) in &ax {
                    let w = wx * wy;
                    let grad = v2(dx * wy, wx * dy);
                    if w != 0.0 || grad.norm() != 0.0 {
                        s.push((j * nx + i, w));
                        g.push((j * nx + i, grad));
                    }
                }
            }
            (s, g)
        }
    }
}

/// Rebuilds the time-varying transfers S, G and the lumped mass diagonal M_D
/// for the current point positions. The static FE-FV part is shared.
pub fn compute_mappings(
    points: &[MaterialPoint],
    basis: &BasisSet,
    kind: CharacteristicKind,
    fefv: Arc<FeFvMaps>,
) -> Result<MappingMatrices> {
    if kind == CharacteristicKind::UGimp {
        basis.uniform_spacing()?;
    }
    let cols: Vec<_> = points
        .par_iter()
        .map(|p| point_column(basis, kind, p))
        .collect();
    let mut s = Vec::with_capacity(points.len());
    let mut g = Vec::with_capacity(points.len());
    let mut m_diag = vec![0.0; fefv.n_nodes];
    let mut outside = Vec::new();
    for (pi, (sc, gc)) in cols.into_iter().enumerate() {
        if sc.is_empty() {
            outside.push(pi);
        }
        for &(node, w) in &sc {
            m_diag[node] += w * points[pi].mass;
        }
        s.push(sc);
        g.push(gc);
    }
    Ok(MappingMatrices {
        s,
        g,
        m_diag,
        outside,
        fefv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_mesh, triangulate};
    use crate::solid::MaterialPoint;

    fn grid_basis(n: usize, w: f64) -> BasisSet {
        BasisSet::tent(
            (0..=n).map(|i| i as f64 * w / n as f64).collect(),
            (0..=n).map(|i| i as f64 * w / n as f64).collect(),
        )
    }

    fn point_at(x: V2, mass: f64, half: f64) -> MaterialPoint {
        let mut p = MaterialPoint::new(x, mass / 1000.0, mass, V2::zeros());
        p.ugimp_half = v2(half, half);
        p
    }

    #[test]
    fn delta_at_node_gives_unit_column() {
        let basis = grid_basis(4, 1.0);
        let mesh = build_cartesian_mesh(4, 4, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let fefv = Arc::new(FeFvMaps::build(&basis, &mesh));
        let pts = vec![point_at(v2(0.5, 0.5), 1.0, 0.0)];
        let m = compute_mappings(&pts, &basis, CharacteristicKind::Delta, fefv).unwrap();
        let nonzero: Vec<_> = m.s[0].iter().filter(|e| e.1.abs() > 1e-13).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0].1 - 1.0).abs() < 1e-14);
        assert_eq!(nonzero[0].0, 12); // node (2,2) on the 5x5 lattice
    }

    #[test]
    fn delta_matches_direct_basis_evaluation_bitwise() {
        let basis = grid_basis(5, 1.0);
        let mesh = build_cartesian_mesh(5, 5, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let fefv = Arc::new(FeFvMaps::build(&basis, &mesh));
        let pts = vec![point_at(v2(0.37, 0.81), 2.0, 0.0)];
        let m = compute_mappings(&pts, &basis, CharacteristicKind::Delta, fefv).unwrap();
        let mut direct = basis.supported(v2(0.37, 0.81));
        direct.sort_unstable_by_key(|b| b.node);
        assert_eq!(m.s[0].len(), direct.len());
        for (e, d) in m.s[0].iter().zip(direct.iter()) {
            assert_eq!(e.0, d.node);
            assert_eq!(e.1, d.value);
        }
    }

    #[test]
    fn ugimp_tensor_weight_at_node() {
        // 2D box of width h/2 centered on a node: tensor product 0.875^2.
        let basis = grid_basis(4, 1.0);
        let mesh = build_cartesian_mesh(4, 4, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let fefv = Arc::new(FeFvMaps::build(&basis, &mesh));
        let h = 0.25;
        let pts = vec![point_at(v2(0.5, 0.5), 1.0, h / 4.0)];
        let m = compute_mappings(&pts, &basis, CharacteristicKind::UGimp, fefv).unwrap();
        let w = m.s[0]
            .iter()
            .find(|e| e.0 == 12)
            .map(|e| e.1)
            .unwrap();
        assert!((w - 0.875 * 0.875).abs() < 1e-14);
    }

    #[test]
    fn column_sums_and_mass_lumping() {
        let basis = grid_basis(6, 1.2);
        let mesh = build_cartesian_mesh(6, 6, v2(0.0, 0.0), v2(1.2, 1.2)).unwrap();
        let fefv = Arc::new(FeFvMaps::build(&basis, &mesh));
        let h = 0.2;
        let mut pts = Vec::new();
        // Interior lattice, 2 points per cell per axis, well inside the grid.
        for j in 0..8 {
            for i in 0..8 {
                pts.push(point_at(
                    v2(0.25 + i as f64 * h / 2.0, 0.25 + j as f64 * h / 2.0),
                    1.5,
                    h / 4.0,
                ));
            }
        }
        let m = compute_mappings(&pts, &basis, CharacteristicKind::UGimp, fefv).unwrap();
        for col in &m.s {
            let sum: f64 = col.iter().map(|e| e.1).sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
        for col in &m.g {
            let sum: V2 = col.iter().fold(V2::zeros(), |a, e| a + e.1);
            assert!(sum.norm() < 1e-8);
        }
        let total_lumped: f64 = m.m_diag.iter().sum();
        let total_mass: f64 = pts.iter().map(|p| p.mass).sum();
        assert!((total_lumped - total_mass).abs() < 1e-12 * total_mass);
        assert!(m.outside.is_empty());
    }

    #[test]
    fn point_outside_grid_is_flagged() {
        let basis = grid_basis(4, 1.0);
        let mesh = build_cartesian_mesh(4, 4, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let fefv = Arc::new(FeFvMaps::build(&basis, &mesh));
        let pts = vec![point_at(v2(3.0, 3.0), 1.0, 0.0)];
        let m = compute_mappings(&pts, &basis, CharacteristicKind::Delta, fefv).unwrap();
        assert_eq!(m.outside, vec![0]);
        assert!(m.s[0].is_empty());
    }

    #[test]
    fn a_columns_sum_to_one() {
        // FV mesh aligned with the FE grid.
        let basis = grid_basis(4, 1.0);
        let quad = build_cartesian_mesh(4, 4, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let tri = triangulate(&quad).unwrap();
        for mesh in [&quad, &tri] {
            let fefv = FeFvMaps::build(&basis, mesh);
            for col in &fefv.a_cols {
                let s: f64 = col.iter().map(|e| e.1).sum();
                assert!((s - 1.0).abs() < 1e-10);
            }
        }
        // FV mesh much coarser than the FE grid (forces subdivision).
        let coarse = build_cartesian_mesh(2, 2, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let fefv = FeFvMaps::build(&basis, &coarse);
        for col in &fefv.a_cols {
            let s: f64 = col.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
        // Node volumes total the domain measure.
        let tot: f64 = fefv.v_i.iter().sum();
        assert!((tot - 1.0).abs() < 1e-10);
    }

    #[test]
    fn a_reproduces_linear_nodal_fields() {
        let basis = grid_basis(5, 1.0);
        let quad = build_cartesian_mesh(3, 3, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let tri = triangulate(&quad).unwrap();
        let nodal: Vec<f64> = (0..basis.n_nodes())
            .map(|i| {
                let p = basis.node_pos(i);
                2.0 * p.x - 0.7 * p.y + 0.3
            })
            .collect();
        for (mesh, _) in [(&tri, "tri")] {
            let fefv = FeFvMaps::build(&basis, mesh);
            for ci in 0..mesh.n_cells() {
                let c = mesh.centroid[ci];
                let exact = 2.0 * c.x - 0.7 * c.y + 0.3;
                let got = fefv.cell_average(ci, &nodal);
                assert!((got - exact).abs() < 1e-10, "cell {ci}");
                // Gradient average of the interpolant is the exact gradient.
                let g: V2 = fefv.grad_a_cols[ci]
                    .iter()
                    .fold(V2::zeros(), |a, &(n, gv)| a + gv * nodal[n]);
                assert!((g - v2(2.0, -0.7)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn grad_a_columns_sum_to_zero_interior() {
        let basis = grid_basis(6, 1.0);
        let mesh = build_cartesian_mesh(6, 6, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
        let fefv = FeFvMaps::build(&basis, &mesh);
        // Sum over nodes of the gradient integrals per interior cell is zero
        // (partition of unity differentiates to zero).
        for ci in 0..mesh.n_cells() {
            let g: V2 = fefv.grad_a_cols[ci]
                .iter()
                .fold(V2::zeros(), |a, e| a + e.1);
            assert!(g.norm() < 1e-10, "cell {ci}: {g:?}");
        }
    }
}
