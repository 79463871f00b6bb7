//! Solid (granular) phase: material point state, constitutive models,
//! porosity / velocity projections onto the FE grid, nodal force assembly,
//! and the FLIP point update.

use crate::error::{Error, Result};
use crate::mapping::MappingMatrices;
use crate::math::{v2, M2, V2};
use rayon::prelude::*;

/// Symmetric in-plane stress plus the out-of-plane normal component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stress {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
    pub zz: f64,
}

impl Stress {
    pub fn dot(&self, g: V2) -> V2 {
        v2(self.xx * g.x + self.xy * g.y, self.xy * g.x + self.yy * g.y)
    }

    pub fn add_scaled(&mut self, o: &Stress, s: f64) {
        self.xx += o.xx * s;
        self.yy += o.yy * s;
        self.xy += o.xy * s;
        self.zz += o.zz * s;
    }

    pub fn deviator_norm(&self) -> f64 {
        let tr3 = (self.xx + self.yy + self.zz) / 3.0;
        let (dxx, dyy, dzz) = (self.xx - tr3, self.yy - tr3, self.zz - tr3);
        (dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * self.xy * self.xy).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct MaterialPoint {
    /// Centroid position.
    pub x: V2,
    /// Current volume (area per unit depth).
    pub vol: f64,
    pub vol0: f64,
    /// Mass; constant for all time.
    pub mass: f64,
    /// FLIP velocity approximation v*_p.
    pub vel: V2,
    /// Effective granular stress.
    pub stress: Stress,
    /// Deformation gradient.
    pub def_grad: M2,
    /// uGIMP box half-widths, fixed at seeding; box measure = vol0.
    pub ugimp_half: V2,
    /// Applied surface traction force (zero for interior points).
    pub traction: V2,
    pub active: bool,
}

impl MaterialPoint {
    pub fn new(x: V2, vol: f64, mass: f64, vel: V2) -> MaterialPoint {
        MaterialPoint {
            x,
            vol,
            vol0: vol,
            mass,
            vel,
            stress: Stress::default(),
            def_grad: M2::identity(),
            ugimp_half: V2::zeros(),
            traction: V2::zeros(),
            active: true,
        }
    }

    pub fn density(&self) -> f64 {
        self.mass / self.vol
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SolidModel {
    /// Small-strain rate form without objective-rate correction; valid in the
    /// near-zero-rotation regime.
    LinearElastic { e: f64, nu: f64 },
    /// sigma = G dev(B) + K ln(J) I with B = F F^T (plane strain, F_zz = 1).
    PseudoNeoHookean { g: f64, k: f64 },
}

impl SolidModel {
    pub fn lame(&self) -> (f64, f64) {
        match *self {
            SolidModel::LinearElastic { e, nu } => {
                let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
                let g = e / (2.0 * (1.0 + nu));
                (lambda, g)
            }
            SolidModel::PseudoNeoHookean { g, k } => (k - 2.0 * g / 3.0, g),
        }
    }

    /// P-wave (constrained) modulus used for the solid CFL bound.
    pub fn constrained_modulus(&self) -> f64 {
        let (lambda, g) = self.lame();
        lambda + 2.0 * g
    }
}

/// Constitutive update: F <- (I + dt L) F, then stress per model.
pub fn update_stress(
    p: &mut MaterialPoint,
    index: usize,
    l: &M2,
    dt: f64,
    model: &SolidModel,
) -> Result<()> {
    let f_new = (M2::identity() + l * dt) * p.def_grad;
    let det = f_new.determinant();
    if det <= 0.0 {
        return Err(Error::InvertedElement { point: index, det });
    }
    p.def_grad = f_new;
    match *model {
        SolidModel::LinearElastic { e, nu } => {
            let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
            let g = e / (2.0 * (1.0 + nu));
            let dxx = l[(0, 0)];
            let dyy = l[(1, 1)];
            let dxy = 0.5 * (l[(0, 1)] + l[(1, 0)]);
            let tr = dxx + dyy;
            p.stress.add_scaled(
                &Stress {
                    xx: lambda * tr + 2.0 * g * dxx,
                    yy: lambda * tr + 2.0 * g * dyy,
                    xy: 2.0 * g * dxy,
                    zz: lambda * tr,
                },
                dt,
            );
        }
        SolidModel::PseudoNeoHookean { g, k } => {
            let b = p.def_grad * p.def_grad.transpose();
            let j = det;
            let tr3 = (b[(0, 0)] + b[(1, 1)] + 1.0) / 3.0;
            let pk = k * j.ln();
            p.stress = Stress {
                xx: g * (b[(0, 0)] - tr3) + pk,
                yy: g * (b[(1, 1)] - tr3) + pk,
                xy: g * b[(0, 1)],
                zz: g * (1.0 - tr3) + pk,
            };
        }
    }
    Ok(())
}

/// Porosity clamp bounds (keeps drag and EOS finite when points bunch).
pub const POROSITY_MIN: f64 = 1e-3;

/// Weak mass-conserving projection of point density onto the FE porosity
/// field: (1 - n_i) rho_s B_D_ii = sum_p S_ip m_p, clamped to [n_min, 1].
/// Nodes without support carry n_i = 1.
pub fn project_porosity(
    points: &[MaterialPoint],
    maps: &MappingMatrices,
    rho_s: f64,
) -> Vec<f64> {
    let b = maps.b_diag();
    let mut packed = vec![0.0; maps.n_nodes()];
    for (pi, col) in maps.s.iter().enumerate() {
        let m = points[pi].mass;
        for &(node, w) in col {
            packed[node] += w * m;
        }
    }
    packed
        .iter()
        .zip(b.iter())
        .map(|(&sm, &bi)| {
            if bi <= 0.0 || sm <= 0.0 {
                1.0
            } else {
                (1.0 - sm / (rho_s * bi)).clamp(POROSITY_MIN, 1.0)
            }
        })
        .collect()
}

/// Relative mass threshold below which nodes are treated as empty.
pub const EMPTY_NODE_REL_MASS: f64 = 1e-10;

/// Momentum-conserving velocity projection M_D_ii v_si = sum_p S_ip m_p v*_p.
pub fn project_velocity(points: &[MaterialPoint], maps: &MappingMatrices) -> Vec<V2> {
    let mut mom = vec![V2::zeros(); maps.n_nodes()];
    for (pi, col) in maps.s.iter().enumerate() {
        let mv = points[pi].vel * points[pi].mass;
        for &(node, w) in col {
            mom[node] += mv * w;
        }
    }
    let m_max = maps.m_diag.iter().cloned().fold(0.0_f64, f64::max);
    let tol = EMPTY_NODE_REL_MASS * m_max;
    mom.iter()
        .zip(maps.m_diag.iter())
        .map(|(&mv, &m)| if m > tol { mv / m } else { V2::zeros() })
        .collect()
}

/// MPM nodal forces: internal f_i = -sum_p G_ip^T v_p sigma_p, external
/// (body force b evaluated at each point) f_i = sum_p S_ip m_p b(x_p), and
/// the per-point applied traction mapped through S.
pub fn nodal_forces(
    points: &[MaterialPoint],
    maps: &MappingMatrices,
    body: impl Fn(&MaterialPoint) -> V2,
) -> (Vec<V2>, Vec<V2>, Vec<V2>) {
    let n = maps.n_nodes();
    let mut f_int = vec![V2::zeros(); n];
    let mut f_ext = vec![V2::zeros(); n];
    let mut f_trac = vec![V2::zeros(); n];
    for (pi, p) in points.iter().enumerate() {
        let b = body(p) * p.mass;
        for &(node, w) in &maps.s[pi] {
            f_ext[node] += b * w;
            f_trac[node] += p.traction * w;
        }
        for &(node, g) in &maps.g[pi] {
            f_int[node] -= p.stress.dot(g) * p.vol;
        }
    }
    (f_int, f_ext, f_trac)
}

/// FLIP update (grid accelerations to point velocities), point convection
/// with the updated nodal velocity, and volume evolution from the velocity
/// divergence. Aborts when a point volume becomes non-positive.
pub fn update_points(
    points: &mut [MaterialPoint],
    maps: &MappingMatrices,
    accel: &[V2],
    vel_new: &[V2],
    dt: f64,
) -> Result<()> {
    let results: Vec<Result<()>> = points
        .par_iter_mut()
        .enumerate()
        .map(|(pi, p)| {
            let mut dv = V2::zeros();
            let mut vx = V2::zeros();
            for &(node, w) in &maps.s[pi] {
                dv += accel[node] * w;
                vx += vel_new[node] * w;
            }
            let mut div = 0.0;
            for &(node, g) in &maps.g[pi] {
                div += g.dot(&vel_new[node]);
            }
            p.vel += dv * dt;
            p.x += vx * dt;
            p.vol *= 1.0 + dt * div;
            if p.vol <= 0.0 {
                return Err(Error::NegativePointVolume {
                    point: pi,
                    volume: p.vol,
                });
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok(())
}

/// Average velocity gradient at each point from the updated nodal field:
/// L_p = sum_i v_i (x) G_ip.
pub fn point_velocity_gradient(maps: &MappingMatrices, vel: &[V2], pi: usize) -> M2 {
    let mut l = M2::zeros();
    for &(node, g) in &maps.g[pi] {
        l += vel[node] * g.transpose();
    }
    l
}

#[derive(Debug, Clone, Copy)]
pub struct SeedSpec {
    pub lo: V2,
    pub hi: V2,
    /// Points per FE cell per axis (2 gives the common 4 points per cell).
    pub ppc_axis: usize,
    pub phi0: f64,
    pub rho_s: f64,
    /// FE grid spacing per axis.
    pub spacing: V2,
}

/// Structured lattice seeding: points tile the region so that uGIMP boxes
/// partition it exactly.
pub fn seed_lattice(spec: &SeedSpec) -> Vec<MaterialPoint> {
    let hp = v2(
        spec.spacing.x / spec.ppc_axis as f64,
        spec.spacing.y / spec.ppc_axis as f64,
    );
    let nx = ((spec.hi.x - spec.lo.x) / hp.x).round() as usize;
    let ny = ((spec.hi.y - spec.lo.y) / hp.y).round() as usize;
    let vol = hp.x * hp.y;
    let mass = spec.phi0 * spec.rho_s * vol;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = v2(
                spec.lo.x + (i as f64 + 0.5) * hp.x,
                spec.lo.y + (j as f64 + 0.5) * hp.y,
            );
            let mut p = MaterialPoint::new(x, vol, mass, V2::zeros());
            p.ugimp_half = hp * 0.5;
            out.push(p);
        }
    }
    out
}
