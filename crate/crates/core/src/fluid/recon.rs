//! Second-order reconstruction of the true fluid fields from cell averages:
//! compact least-squares gradients over face neighbors (boundary cells use
//! ghost data at face midpoints), Barth-Jespersen limiting, and an optional
//! porosity-gradient correction that restores sub-grid momentum fluctuations
//! in subsonic flow through unresolved porosity variation.

use crate::bcs::{ghost_state, BcTable};
use crate::error::Result;
use crate::fluid::eos::FluidEos;
use crate::fluid::{CellAverages, FluidState, PorosityCtx};
use crate::math::{solve2, M2, V2};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy)]
pub struct ReconOpts {
    /// Enables the porosity-gradient correction.
    pub porosity_correction: bool,
    /// Correction active only below this relative Mach number.
    pub m_cut: f64,
    /// Floor on (1 - M*^2) guarding the sonic singularity.
    pub denom_floor: f64,
}

impl Default for ReconOpts {
    fn default() -> Self {
        ReconOpts {
            porosity_correction: false,
            m_cut: 0.8,
            denom_floor: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// True-field cell averages (effective averages divided by cell porosity).
    pub true_avg: Vec<FluidState>,
    pub grad_rho: Vec<V2>,
    /// Momentum gradient: row a holds the spatial gradient of component a.
    pub grad_mom: Vec<M2>,
    pub grad_en: Vec<V2>,
    pub phi_rho: Vec<f64>,
    pub phi_mom: Vec<f64>,
    pub phi_en: Vec<f64>,
    /// Unlimited velocity / internal-energy gradients for viscous and heat
    /// fluxes.
    pub grad_vel: Vec<M2>,
    pub grad_eps: Vec<V2>,
    pub p_cell: Vec<f64>,
    pub a_cell: Vec<f64>,
    /// Cells whose least-squares system was singular (gradient zeroed).
    pub singular: usize,
}

impl Reconstruction {
    /// Reconstructed state within cell `cell` at position `x`.
    pub fn state_at(&self, cell: usize, x: V2, centroid: V2) -> FluidState {
        let d = x - centroid;
        let u = &self.true_avg[cell];
        FluidState::new(
            u.rho + self.grad_rho[cell].dot(&d),
            u.mom + self.grad_mom[cell] * d,
            u.en + self.grad_en[cell].dot(&d),
        )
    }
}

struct CellSamples {
    /// (offset from centroid, true state, eps, porosity at the sample).
    data: Vec<(V2, FluidState, f64, f64)>,
}

fn barth_jespersen(u0: f64, umin: f64, umax: f64, delta: f64) -> f64 {
    if delta.abs() < 1e-300 {
        return 1.0;
    }
    if delta > 0.0 {
        ((umax - u0) / delta).clamp(0.0, 1.0)
    } else {
        ((umin - u0) / delta).clamp(0.0, 1.0)
    }
}

pub fn reconstruct(
    mesh: &Mesh,
    avg: &CellAverages,
    por: &PorosityCtx,
    eos: &FluidEos,
    bcs: &BcTable,
    opts: &ReconOpts,
) -> Result<Reconstruction> {
    let nc = mesh.n_cells();
    let mut true_avg = Vec::with_capacity(nc);
    let mut p_cell = Vec::with_capacity(nc);
    let mut a_cell = Vec::with_capacity(nc);
    let mut eps_cell = Vec::with_capacity(nc);
    for ci in 0..nc {
        let n = por.n_cell[ci];
        let u = avg.bar[ci] * (1.0 / n);
        if u.rho <= 0.0 {
            return Err(crate::error::Error::NegativeDensity {
                cell: ci,
                value: u.rho,
            });
        }
        let out = eos.evaluate_cell(&u, ci)?;
        p_cell.push(out.p);
        a_cell.push(out.a);
        eps_cell.push(out.eps);
        true_avg.push(u);
    }

    // Gather stencil samples per cell (interior neighbors and boundary ghost
    // values at face midpoints).
    let mut samples: Vec<CellSamples> = Vec::with_capacity(nc);
    for ci in 0..nc {
        let mut data = Vec::with_capacity(4);
        for &fid in &mesh.cell_faces[ci] {
            let f = &mesh.faces[fid];
            match f.right {
                Some(r) => {
                    let nb = if f.left == ci { r } else { f.left };
                    let u = true_avg[nb];
                    let v = u.vel();
                    let eps = u.energy() - 0.5 * v.norm_squared();
                    data.push((
                        mesh.centroid[nb] - mesh.centroid[ci],
                        u,
                        eps,
                        por.n_cell[nb],
                    ));
                }
                None => {
                    let outward = f.normal; // boundary faces keep left = owner
                    let (g, _) = ghost_state(&true_avg[ci], outward, bcs.fluid_for(f.tag), eos)?;
                    let v = g.vel();
                    let eps = g.energy() - 0.5 * v.norm_squared();
                    data.push((f.midpoint - mesh.centroid[ci], g, eps, por.n_face[fid]));
                }
            }
        }
        samples.push(CellSamples { data });
    }

    let mut grad_rho = vec![V2::zeros(); nc];
    let mut grad_mom = vec![M2::zeros(); nc];
    let mut grad_en = vec![V2::zeros(); nc];
    let mut grad_vel = vec![M2::zeros(); nc];
    let mut grad_eps = vec![V2::zeros(); nc];
    let mut grad_n = vec![V2::zeros(); nc];
    let mut phi_rho = vec![1.0; nc];
    let mut phi_mom = vec![1.0; nc];
    let mut phi_en = vec![1.0; nc];
    let mut phi_n = vec![1.0; nc];
    let mut singular = 0usize;

    for ci in 0..nc {
        let s = &samples[ci];
        let mut gram = M2::zeros();
        for (dx, ..) in &s.data {
            gram += dx * dx.transpose();
        }
        let u0 = true_avg[ci];
        let v0 = u0.vel();
        let eps0 = eps_cell[ci];
        let mut rhs_rho = V2::zeros();
        let mut rhs_mx = V2::zeros();
        let mut rhs_my = V2::zeros();
        let mut rhs_en = V2::zeros();
        let mut rhs_vx = V2::zeros();
        let mut rhs_vy = V2::zeros();
        let mut rhs_eps = V2::zeros();
        let mut rhs_n = V2::zeros();
        for (dx, u, eps, n) in &s.data {
            rhs_rho += dx * (u.rho - u0.rho);
            rhs_mx += dx * (u.mom.x - u0.mom.x);
            rhs_my += dx * (u.mom.y - u0.mom.y);
            rhs_en += dx * (u.en - u0.en);
            let v = u.vel();
            rhs_vx += dx * (v.x - v0.x);
            rhs_vy += dx * (v.y - v0.y);
            rhs_eps += dx * (eps - eps0);
            rhs_n += dx * (n - por.n_cell[ci]);
        }
        let solve = |rhs: V2| solve2(&gram, rhs);
        match (
            solve(rhs_rho),
            solve(rhs_mx),
            solve(rhs_my),
            solve(rhs_en),
            solve(rhs_vx),
            solve(rhs_vy),
            solve(rhs_eps),
            solve(rhs_n),
        ) {
            (Some(gr), Some(gmx), Some(gmy), Some(ge), Some(gvx), Some(gvy), Some(geps), Some(gn)) => {
                grad_rho[ci] = gr;
                grad_mom[ci] = M2::from_rows(&[gmx.transpose(), gmy.transpose()]);
                grad_en[ci] = ge;
                grad_vel[ci] = M2::from_rows(&[gvx.transpose(), gvy.transpose()]);
                grad_eps[ci] = geps;
                grad_n[ci] = gn;
            }
            _ => {
                // Collinear stencil: keep the constant reconstruction.
                singular += 1;
            }
        }

        // Barth-Jespersen limiting against the stencil extrema, checked at
        // the face midpoints (the flux quadrature points).
        let bounds = |get: &dyn Fn(&(V2, FluidState, f64, f64)) -> f64, v0: f64| {
            let mut lo = v0;
            let mut hi = v0;
            for d in &s.data {
                let v = get(d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo, hi)
        };
        let limit = |grad_dot: &dyn Fn(V2) -> f64, v0: f64, lo: f64, hi: f64| {
            let mut phi = 1.0_f64;
            for &fid in &mesh.cell_faces[ci] {
                let d = mesh.faces[fid].midpoint - mesh.centroid[ci];
                phi = phi.min(barth_jespersen(v0, lo, hi, grad_dot(d)));
            }
            phi
        };
        {
            let (lo, hi) = bounds(&|d| d.1.rho, u0.rho);
            phi_rho[ci] = limit(&|d| grad_rho[ci].dot(&d), u0.rho, lo, hi);
        }
        {
            let (lox, hix) = bounds(&|d| d.1.mom.x, u0.mom.x);
            let (loy, hiy) = bounds(&|d| d.1.mom.y, u0.mom.y);
            let gm = grad_mom[ci];
            let px = limit(&|d| gm.row(0).transpose().dot(&d), u0.mom.x, lox, hix);
            let py = limit(&|d| gm.row(1).transpose().dot(&d), u0.mom.y, loy, hiy);
            phi_mom[ci] = px.min(py);
        }
        {
            let (lo, hi) = bounds(&|d| d.1.en, u0.en);
            phi_en[ci] = limit(&|d| grad_en[ci].dot(&d), u0.en, lo, hi);
        }
        {
            let (lo, hi) = bounds(&|d| d.3, por.n_cell[ci]);
            phi_n[ci] = limit(&|d| grad_n[ci].dot(&d), por.n_cell[ci], lo, hi);
        }
    }

    // Apply limiters.
    for ci in 0..nc {
        grad_rho[ci] *= phi_rho[ci];
        grad_mom[ci] *= phi_mom[ci];
        grad_en[ci] *= phi_en[ci];
    }

    // Porosity correction: reintroduce the analytic quasi-1D streamwise
    // fluctuation carried by the FE porosity field but invisible to the FV
    // stencil.
    if opts.porosity_correction {
        for ci in 0..nc {
            let delta_gn = por.grad_n_cell[ci] - grad_n[ci] * phi_n[ci];
            let v_rel = true_avg[ci].vel() - por.v_s_cell[ci];
            let speed2 = v_rel.norm_squared();
            let a = a_cell[ci];
            if speed2 <= (1e-10 * a) * (1e-10 * a) {
                continue;
            }
            let m_star = speed2.sqrt() / a;
            if m_star >= opts.m_cut {
                continue;
            }
            let denom = (1.0 - m_star * m_star).max(opts.denom_floor);
            let mfac = m_star * m_star / denom;
            let dir = v_rel * (v_rel.dot(&delta_gn) / speed2);
            let n = por.n_cell[ci];
            grad_rho[ci] += dir * (true_avg[ci].rho / n * mfac);
            grad_mom[ci] -= true_avg[ci].mom / n * dir.transpose();
            grad_en[ci] +=
                dir * ((true_avg[ci].en + p_cell[ci] - true_avg[ci].rho * a * a) / n * mfac);
        }
    }

    Ok(Reconstruction {
        true_avg,
        grad_rho,
        grad_mom,
        grad_en,
        phi_rho,
        phi_mom,
        phi_en,
        grad_vel,
        grad_eps,
        p_cell,
        a_cell,
        singular,
    })
}
