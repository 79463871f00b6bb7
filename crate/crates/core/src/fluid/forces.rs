//! Face-loop assembly of the finite volume internal forces (Roe + viscous +
//! heat + optional artificial viscosity) and the gravity source rows.

use crate::bcs::{ghost_state, BcTable};
use crate::error::{Error, Result};
use crate::fluid::eos::FluidEos;
use crate::fluid::flux::{artificial_viscosity_flux, roe_flux, viscous_heat_flux, FaceFlux};
use crate::fluid::{CellAverages, FluidState, PorosityCtx, Reconstruction};
use crate::math::{M2, V2};
use crate::mesh::Mesh;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct FluidParams {
    pub eos: FluidEos,
    /// Smagorinsky eddy-viscosity coefficient alpha_h (None disables).
    pub smagorinsky: Option<f64>,
    pub artificial_viscosity: bool,
    pub gravity: V2,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FluxDiag {
    pub llf_fallbacks: usize,
    pub outlet_wall_fallbacks: usize,
    pub clipped_face_states: usize,
}

/// Per-cell rates of change of the averaged state.
#[derive(Debug, Clone)]
pub struct CellForces {
    pub interior: Vec<FluidState>,
    pub external: Vec<FluidState>,
}

fn admissible_or_average(
    u_face: FluidState,
    u_avg: FluidState,
    eos: &FluidEos,
    diag_clip: &mut usize,
) -> FluidState {
    let ok = u_face.rho > 0.0
        && match eos {
            FluidEos::IdealGas { .. } => {
                u_face.energy() - 0.5 * u_face.vel().norm_squared() > 0.0
            }
            FluidEos::Barotropic { .. } => true,
        };
    if ok {
        u_face
    } else {
        *diag_clip += 1;
        u_avg
    }
}

/// Assembles F_int (face flux accumulation, with ghost states on boundary
/// faces) and F_ext (gravity rows) for every cell.
pub fn assemble_cell_forces(
    mesh: &Mesh,
    avg: &CellAverages,
    recon: &Reconstruction,
    por: &PorosityCtx,
    params: &FluidParams,
    bcs: &BcTable,
) -> Result<(CellForces, FluxDiag)> {
    let eos = &params.eos;
    let eta0 = eos.eta0();
    let cond_coeff = match eos.c_v() {
        Some(cv) if cv > 0.0 => eos.conductivity() / cv,
        _ => 0.0,
    };

    struct FaceResult {
        flux: FaceFlux,
        llf: bool,
        outlet_fb: bool,
        clipped: usize,
    }

    let face_results: Result<Vec<FaceResult>> = mesh
        .faces
        .par_iter()
        .enumerate()
        .map(|(fid, f)| -> Result<FaceResult> {
            let mut clipped = 0usize;
            let li = f.left;
            let n_face = por.n_face[fid];
            let u_l_raw = recon.state_at(li, f.midpoint, mesh.centroid[li]);
            let u_l = admissible_or_average(u_l_raw, recon.true_avg[li], eos, &mut clipped);
            let (u_r, grad_v_face, grad_eps_face, v_face, rho_bar_face, h_face, outlet_fb) =
                match f.right {
                    Some(ri) => {
                        let u_r_raw = recon.state_at(ri, f.midpoint, mesh.centroid[ri]);
                        let u_r =
                            admissible_or_average(u_r_raw, recon.true_avg[ri], eos, &mut clipped);
                        let gv = (recon.grad_vel[li] + recon.grad_vel[ri]) * 0.5;
                        let ge = (recon.grad_eps[li] + recon.grad_eps[ri]) * 0.5;
                        let vf = (recon.true_avg[li].vel() + recon.true_avg[ri].vel()) * 0.5;
                        let rb = 0.5 * (avg.bar[li].rho + avg.bar[ri].rho);
                        let h = 0.5 * (mesh.cell_length(li) + mesh.cell_length(ri));
                        (u_r, gv, ge, vf, rb, h, false)
                    }
                    None => {
                        let (g, fb) = ghost_state(&u_l, f.normal, bcs.fluid_for(f.tag), eos)?;
                        let vf = (u_l.vel() + g.vel()) * 0.5;
                        (
                            g,
                            recon.grad_vel[li],
                            recon.grad_eps[li],
                            vf,
                            avg.bar[li].rho,
                            mesh.cell_length(li),
                            fb,
                        )
                    }
                };

            let (mut flux, llf) = roe_flux(&u_l, &u_r, n_face, f.normal, eos).map_err(|e| {
                match e {
                    crate::fluid::eos::EosFailure::Density(v) => Error::NegativeDensity {
                        cell: li,
                        value: v,
                    },
                    crate::fluid::eos::EosFailure::InternalEnergy(v) => {
                        Error::NegativeInternalEnergy { cell: li, value: v }
                    }
                }
            })?;

            // Viscous + heat flux enters f with a minus sign.
            if eta0 > 0.0 || params.smagorinsky.is_some() || cond_coeff > 0.0 {
                let phi_face = 1.0 - n_face;
                let mut eta_r = eta0 * (1.0 + 2.5 * phi_face);
                if let Some(alpha) = params.smagorinsky {
                    let d: M2 = (grad_v_face + grad_v_face.transpose()) * 0.5;
                    let tr = (d[(0, 0)] + d[(1, 1)]) / 3.0;
                    let d0 = d - M2::identity() * tr;
                    let norm = (d0[(0, 0)].powi(2)
                        + d0[(1, 1)].powi(2)
                        + tr.powi(2)
                        + 2.0 * d0[(0, 1)].powi(2))
                    .sqrt();
                    eta_r += rho_bar_face * alpha * alpha * h_face * h_face * 2.0_f64.sqrt() * norm;
                }
                let visc = viscous_heat_flux(
                    &grad_v_face,
                    grad_eps_face,
                    v_face,
                    f.normal,
                    eta_r,
                    n_face * cond_coeff,
                );
                flux.add(&visc.scale(-1.0));
            }

            if params.artificial_viscosity {
                let a_l = recon.a_cell[li];
                let a_r = f.right.map(|r| recon.a_cell[r]).unwrap_or(a_l);
                let av =
                    artificial_viscosity_flux(&u_l, &u_r, a_l, a_r, f.normal, 0.3).scale(-1.0);
                flux.add(&av);
            }

            Ok(FaceResult {
                flux,
                llf,
                outlet_fb,
                clipped,
            })
        })
        .collect();
    let face_results = face_results?;

    let mut interior = vec![FluidState::default(); mesh.n_cells()];
    let mut diag = FluxDiag::default();
    for (fid, r) in face_results.iter().enumerate() {
        let f = &mesh.faces[fid];
        let da = f.area;
        let contrib = r.flux.as_state() * da;
        interior[f.left] = interior[f.left] - contrib * (1.0 / mesh.volume[f.left]);
        if let Some(ri) = f.right {
            interior[ri] = interior[ri] + contrib * (1.0 / mesh.volume[ri]);
        }
        diag.llf_fallbacks += usize::from(r.llf);
        diag.outlet_wall_fallbacks += usize::from(r.outlet_fb);
        diag.clipped_face_states += r.clipped;
    }

    let external: Vec<FluidState> = avg
        .bar
        .iter()
        .map(|s| FluidState::new(0.0, params.gravity * s.rho, s.mom.dot(&params.gravity)))
        .collect();

    Ok((CellForces { interior, external }, diag))
}
