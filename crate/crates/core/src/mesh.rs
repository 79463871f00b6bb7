//! 2D finite volume meshes: Cartesian quad grids (optionally graded in x/y)
//! and triangulations thereof. Cells are stored CCW; every interior face is
//! shared by exactly two cells with the unit normal oriented left -> right.

use crate::error::{Error, Result};
use crate::math::{v2, V2};
use std::collections::HashMap;

/// Boundary face group. Axis-aligned domain sides map onto the first four
/// tags; imported meshes may carry arbitrary tags.
pub const TAG_LEFT: usize = 0;
pub const TAG_RIGHT: usize = 1;
pub const TAG_BOTTOM: usize = 2;
pub const TAG_TOP: usize = 3;
pub const N_SIDE_TAGS: usize = 4;

#[derive(Debug, Clone)]
pub struct Face {
    pub left: usize,
    /// `None` marks a boundary face; `tag` then selects the boundary group.
    pub right: Option<usize>,
    pub tag: usize,
    /// Unit normal pointing out of `left` (into `right` when interior).
    pub normal: V2,
    /// Face measure (length in 2D).
    pub area: f64,
    pub midpoint: V2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Quad,
    Tri,
}

/// Tensor-product structure retained by grids built from coordinate vectors.
/// Used for O(log n) point location; triangulated grids keep it with
/// `pairs = true` (two triangles per structured cell).
#[derive(Debug, Clone)]
pub struct TensorStructure {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub pairs: bool,
}

impl TensorStructure {
    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }
    pub fn ny(&self) -> usize {
        self.ys.len() - 1
    }

    fn axis_index(coords: &[f64], v: f64) -> Option<usize> {
        let n = coords.len() - 1;
        if v < coords[0] - 1e-12 || v > coords[n] + 1e-12 {
            return None;
        }
        let mut lo = 0usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if v >= coords[mid] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<V2>,
    /// Node index lists, CCW. Quads have 4 entries, triangles 3.
    pub cells: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    pub volume: Vec<f64>,
    pub centroid: Vec<V2>,
    /// Face ids bounding each cell.
    pub cell_faces: Vec<Vec<usize>>,
    /// Face-adjacent neighbor cells of each cell.
    pub neighbors: Vec<Vec<usize>>,
    pub structure: Option<TensorStructure>,
}

fn polygon_area_centroid(nodes: &[V2], cell: &[usize]) -> (f64, V2) {
    let mut a2 = 0.0;
    let mut c = V2::zeros();
    for k in 0..cell.len() {
        let p = nodes[cell[k]];
        let q = nodes[cell[(k + 1) % cell.len()]];
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        c += (p + q) * cross;
    }
    let area = 0.5 * a2;
    (area, c / (6.0 * area))
}

impl Mesh {
    /// Assembles connectivity (faces, volumes, centroids, adjacency) from
    /// nodes+cells. `side_tag` assigns a boundary group to each boundary edge.
    pub fn from_cells(
        nodes: Vec<V2>,
        cells: Vec<Vec<usize>>,
        structure: Option<TensorStructure>,
        side_tag: impl Fn(V2, V2) -> usize,
    ) -> Result<Mesh> {
        let mut volume = Vec::with_capacity(cells.len());
        let mut centroid = Vec::with_capacity(cells.len());
        for (ci, cell) in cells.iter().enumerate() {
            let (a, c) = polygon_area_centroid(&nodes, cell);
            if a <= 0.0 {
                return Err(Error::Mesh(format!(
                    "cell {ci} is degenerate or not CCW (area {a:.3e})"
                )));
            }
            volume.push(a);
            centroid.push(c);
        }

        // Pair up edges. Each edge key is the sorted node pair; the first cell
        // to visit an edge becomes `left`, fixing the normal orientation.
        let mut edge_first: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
        for (ci, cell) in cells.iter().enumerate() {
            for k in 0..cell.len() {
                let (n0, n1) = (cell[k], cell[(k + 1) % cell.len()]);
                let key = (n0.min(n1), n0.max(n1));
                match edge_first.get(&key) {
                    None => {
                        let p = nodes[n0];
                        let q = nodes[n1];
                        let d = q - p;
                        let len = d.norm();
                        if len <= 0.0 {
                            return Err(Error::Mesh(format!("zero-length edge in cell {ci}")));
                        }
                        // CCW traversal: outward normal is the edge direction
                        // rotated by -90 degrees.
                        let normal = v2(d.y, -d.x) / len;
                        let fid = faces.len();
                        faces.push(Face {
                            left: ci,
                            right: None,
                            tag: 0,
                            normal,
                            area: len,
                            midpoint: (p + q) * 0.5,
                        });
                        edge_first.insert(key, fid);
                        cell_faces[ci].push(fid);
                    }
                    Some(&fid) => {
                        if faces[fid].right.is_some() {
                            return Err(Error::Mesh(format!(
                                "edge ({},{}) referenced by more than two cells",
                                key.0, key.1
                            )));
                        }
                        faces[fid].right = Some(ci);
                        cell_faces[ci].push(fid);
                    }
                }
            }
        }
        for f in faces.iter_mut() {
            if f.right.is_none() {
                f.tag = side_tag(f.midpoint, f.normal);
            }
        }
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
        for f in &faces {
            if let Some(r) = f.right {
                neighbors[f.left].push(r);
                neighbors[r].push(f.left);
            }
        }
        Ok(Mesh {
            nodes,
            cells,
            faces,
            volume,
            centroid,
            cell_faces,
            neighbors,
            structure,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.volume.iter().sum()
    }

    pub fn is_quad(&self) -> bool {
        self.cells.iter().all(|c| c.len() == 4)
    }

    /// Characteristic length of a cell for CFL purposes: the shortest
    /// altitude (volume over longest face).
    pub fn cell_length(&self, cell: usize) -> f64 {
        let longest = self.cell_faces[cell]
            .iter()
            .map(|&f| self.faces[f].area)
            .fold(0.0_f64, f64::max);
        match self.cells[cell].len() {
            3 => 2.0 * self.volume[cell] / longest,
            _ => self.volume[cell] / longest,
        }
    }

    /// Locates the cell containing `x` (tensor-structured meshes only).
    pub fn locate(&self, x: V2) -> Option<usize> {
        let s = self.structure.as_ref()?;
        let i = TensorStructure::axis_index(&s.xs, x.x)?;
        let j = TensorStructure::axis_index(&s.ys, x.y)?;
        let base = j * s.nx() + i;
        if !s.pairs {
            return Some(base);
        }
        // Quad split along the lower-left -> upper-right diagonal: the lower
        // triangle (index 2*base) lies below that diagonal.
        let (x0, x1) = (s.xs[i], s.xs[i + 1]);
        let (y0, y1) = (s.ys[j], s.ys[j + 1]);
        let below = (x.y - y0) * (x1 - x0) <= (y1 - y0) * (x.x - x0);
        Some(2 * base + usize::from(!below))
    }

    /// Residual of the closed-surface identity: sum of outward normal * area
    /// over each cell, normalized by the cell perimeter.
    pub fn max_closure_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for ci in 0..self.n_cells() {
            let mut s = V2::zeros();
            let mut perim = 0.0;
            for &fid in &self.cell_faces[ci] {
                let f = &self.faces[fid];
                let sign = if f.left == ci { 1.0 } else { -1.0 };
                s += f.normal * (sign * f.area);
                perim += f.area;
            }
            worst = worst.max(s.norm() / perim);
        }
        worst
    }
}

fn side_tag_for_bounds(lo: V2, hi: V2) -> impl Fn(V2, V2) -> usize {
    move |mid: V2, normal: V2| {
        if normal.x < -0.5 {
            TAG_LEFT
        } else if normal.x > 0.5 {
            TAG_RIGHT
        } else if normal.y < -0.5 {
            TAG_BOTTOM
        } else if normal.y > 0.5 {
            TAG_TOP
        } else if (mid.x - lo.x).abs() < (hi.x - mid.x).abs() {
            TAG_LEFT
        } else {
            TAG_RIGHT
        }
    }
}

/// Uniform coordinate vector with optional graded refinement strips: base
/// intervals intersecting a strip are split into `factor` equal parts.
pub fn graded_coords(lo: f64, hi: f64, n: usize, strips: &[RefineStrip]) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(lo);
    for k in 0..n {
        let a = lo + k as f64 * h;
        let b = lo + (k + 1) as f64 * h;
        let mid = 0.5 * (a + b);
        let factor = strips
            .iter()
            .filter(|s| (mid - s.center).abs() <= s.half_width)
            .map(|s| s.factor.max(1))
            .max()
            .unwrap_or(1);
        for j in 1..=factor {
            xs.push(a + (b - a) * j as f64 / factor as f64);
        }
    }
    let m = xs.len() - 1;
    xs[m] = hi;
    xs
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefineStrip {
    pub center: f64,
    pub half_width: f64,
    pub factor: usize,
}

/// Structured quad mesh over `bounds` with `nx` x `ny` cells, row-major
/// ordering (cell j*nx+i spans [xs[i],xs[i+1]] x [ys[j],ys[j+1]]).
pub fn build_cartesian_mesh(nx: usize, ny: usize, lo: V2, hi: V2) -> Result<Mesh> {
    build_tensor_mesh(
        graded_coords(lo.x, hi.x, nx.max(1), &[]),
        graded_coords(lo.y, hi.y, ny.max(1), &[]),
    )
    .and_then(|m| {
        if nx == 0 || ny == 0 {
            Err(Error::config("mesh resolution must be at least 1x1"))
        } else {
            Ok(m)
        }
    })
}

pub fn build_tensor_mesh(xs: Vec<f64>, ys: Vec<f64>) -> Result<Mesh> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::config("mesh needs at least one cell per axis"));
    }
    for w in xs.windows(2).chain(ys.windows(2)) {
        if w[1] <= w[0] {
            return Err(Error::config(
                "mesh coordinates must be strictly increasing (zero or negative extent)",
            ));
        }
    }
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in &ys {
        for &x in &xs {
            nodes.push(v2(x, y));
        }
    }
    let nid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)]);
        }
    }
    let lo = v2(xs[0], ys[0]);
    let hi = v2(xs[nx], ys[ny]);
    Mesh::from_cells(
        nodes,
        cells,
        Some(TensorStructure {
            xs,
            ys,
            pairs: false,
        }),
        side_tag_for_bounds(lo, hi),
    )
}

/// Splits every quad into two triangles along the lower-left -> upper-right
/// diagonal and rebuilds all face data.
pub fn triangulate(mesh: &Mesh) -> Result<Mesh> {
    if !mesh.is_quad() {
        return Err(Error::config("triangulate expects a quad mesh"));
    }
    let mut cells = Vec::with_capacity(2 * mesh.n_cells());
    for cell in &mesh.cells {
        cells.push(vec![cell[0], cell[1], cell[2]]);
        cells.push(vec![cell[0], cell[2], cell[3]]);
    }
    let structure = mesh.structure.clone().map(|s| TensorStructure {
        pairs: true,
        ..s
    });
    let lo = mesh.nodes.iter().fold(v2(f64::MAX, f64::MAX), |a, b| {
        v2(a.x.min(b.x), a.y.min(b.y))
    });
    let hi = mesh.nodes.iter().fold(v2(f64::MIN, f64::MIN), |a, b| {
        v2(a.x.max(b.x), a.y.max(b.y))
    });
    Mesh::from_cells(
        mesh.nodes.clone(),
        cells,
        structure,
        side_tag_for_bounds(lo, hi),
    )
}

/// Plain text mesh exchange format: node list and cell list, with boundary
/// faces and tags appended so imports round-trip.
pub fn export_text(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("# fvmpm mesh v1\n");
    s.push_str(&format!("nodes {}\n", mesh.nodes.len()));
    for n in &mesh.nodes {
        s.push_str(&format!("{} {}\n", n.x, n.y));
    }
    s.push_str(&format!("cells {}\n", mesh.cells.len()));
    for c in &mesh.cells {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        s.push_str(&format!("{} {}\n", c.len(), ids.join(" ")));
    }
    let bfaces: Vec<&Face> = mesh.faces.iter().filter(|f| f.right.is_none()).collect();
    s.push_str(&format!("bfaces {}\n", bfaces.len()));
    for f in bfaces {
        s.push_str(&format!(
            "{} {} {}\n",
            f.midpoint.x, f.midpoint.y, f.tag
        ));
    }
    s
}

pub fn import_text(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let bad = |what: &str| Error::Mesh(format!("mesh import: malformed {what}"));
    let header = |line: Option<&str>, key: &str| -> Result<usize> {
        let l = line.ok_or_else(|| bad(key))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(key));
        }
        it.next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(key))
    };
    let n_nodes = header(lines.next(), "nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let l = lines.next().ok_or_else(|| bad("node line"))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("node coordinate")))
            .collect::<Result<_>>()?;
        if vals.len() != 2 {
            return Err(bad("node line"));
        }
        nodes.push(v2(vals[0], vals[1]));
    }
    let n_cells = header(lines.next(), "cells")?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let l = lines.next().ok_or_else(|| bad("cell line"))?;
        let vals: Vec<usize> = l
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("cell index")))
            .collect::<Result<_>>()?;
        if vals.is_empty() || vals.len() != vals[0] + 1 {
            return Err(bad("cell line"));
        }
        cells.push(vals[1..].to_vec());
    }
    let mut tagged: Vec<(V2, usize)> = Vec::new();
    if let Ok(n_b) = header(lines.next(), "bfaces") {
        for _ in 0..n_b {
            let l = lines.next().ok_or_else(|| bad("bface line"))?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad("bface entry")))
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(bad("bface line"));
            }
            tagged.push((v2(vals[0], vals[1]), vals[2] as usize));
        }
    }
    Mesh::from_cells(nodes, cells, None, move |mid, _| {
        tagged
            .iter()
            .find(|(m, _)| (mid - m).norm() < 1e-9)
            .map(|&(_, t)| t)
            .unwrap_or(0)
    })
}
