//! Benchmark drivers shared by the CLI `verify` command and the acceptance
//! suite: porous-pipe steady flow, consolidation profiles, manufactured-
//! solution convergence studies, and the shock tube reduction.

use crate::error::{Error, Result};
use crate::fluid::{reconstruct, PorosityCtx};
use crate::math::{v2, V2};
use crate::scenario::{self, build, Built};
use crate::validation::analytic::{consolidation_coefficient, darcy_exact, terzaghi_series};
use crate::validation::mms::MmsProblem;
use crate::validation::riemann::{sample_riemann, RiemannState};
use crate::validation::{l2_error_cells, l2_error_points, ConvergenceReport};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct DarcyResult {
    pub phi: f64,
    pub dp: f64,
    pub v_sim: f64,
    pub v_exact: f64,
    pub rel_err: f64,
    pub steps: u64,
    pub t_final: f64,
}

/// Reconstructed x-velocity of the fluid at a probe position.
fn probe_vx(sim: &mut crate::integrator::Simulation, x: V2) -> Result<f64> {
    let state = &sim.state;
    let por = match (&sim.models.solid, &state.fefv) {
        (Some(_), Some(fefv)) => PorosityCtx::from_fe(fefv, &state.mesh, &state.n_i, &state.v_si),
        _ => PorosityCtx::uniform(&state.mesh),
    };
    let recon = reconstruct(
        &state.mesh,
        &state.avg,
        &por,
        &sim.models.fluid.eos,
        &sim.bcs,
        &sim.models.recon,
    )?;
    let cell = state
        .mesh
        .locate(x)
        .ok_or_else(|| Error::config("probe outside mesh"))?;
    Ok(recon.state_at(cell, x, state.mesh.centroid[cell]).vel().x)
}

/// Runs one porous-pipe case to steady state (relative probe change below
/// 1e-6 across 100-step windows) and compares against the closed form.
pub fn run_darcy_case(phi: f64, dp: f64) -> Result<DarcyResult> {
    let cfg = scenario::darcy_preset(phi, dp);
    let Built { mut sim, t_end, probe, .. } = build(&cfg)?;
    let probe = probe.unwrap_or(v2(0.2, 0.05));
    let mut last = f64::INFINITY;
    let check_every = 100;
    let min_time = 0.02; // let the pressure field relax across the pipe
    loop {
        for _ in 0..check_every {
            sim.step()?;
        }
        let v = probe_vx(&mut sim, probe)?;
        let settled = (v - last).abs() <= 1e-6 * v.abs().max(1e-12);
        last = v;
        if (settled && sim.state.time > min_time) || sim.state.time >= t_end {
            break;
        }
    }
    let v_sim = last;
    let v_exact = darcy_exact(phi, 1e-3, 1e-3, dp, 1.0, 1.0 - phi);
    Ok(DarcyResult {
        phi,
        dp,
        v_sim,
        v_exact,
        rel_err: (v_sim - v_exact).abs() / v_exact,
        steps: sim.state.step,
        t_final: sim.state.time,
    })
}

/// The full 21-case sweep (7 packings x 3 pressure drops), in parallel.
pub fn run_darcy_suite() -> Result<Vec<DarcyResult>> {
    let phis = [0.58, 0.59, 0.60, 0.61, 0.62, 0.63, 0.64];
    let dps = [25e3, 50e3, 100e3];
    let cases: Vec<(f64, f64)> = phis
        .iter()
        .flat_map(|&phi| dps.iter().map(move |&dp| (phi, dp)))
        .collect();
    cases
        .par_iter()
        .map(|&(phi, dp)| run_darcy_case(phi, dp))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TerzaghiStation {
    pub tv: f64,
    /// (height above base, simulated p, exact p).
    pub profile: Vec<(f64, f64, f64)>,
    /// Max |p_sim - p_exact| / sigma0 over heights in [0, 0.9 H].
    pub max_err_frac: f64,
}

pub const TERZAGHI_STATIONS: [f64; 6] = [0.1, 0.2, 0.4, 0.6, 1.0, 3.0];

/// Runs the consolidation column through the comparison stations.
pub fn run_terzaghi() -> Result<Vec<TerzaghiStation>> {
    let cfg = scenario::terzaghi_preset();
    let Built { mut sim, .. } = build(&cfg)?;
    let (e, nu, n, d, eta0) = (10e6, 0.3, 0.3, 0.58e-3, 1e-3);
    let sigma0 = 1e4;
    let h = 1.0;
    let cv = consolidation_coefficient(e, nu, n, d, eta0);
    let kappa = 2.2e8;
    let rho0 = 1000.0;
    let mut out = Vec::new();
    for &tv in TERZAGHI_STATIONS.iter() {
        let t_station = tv * h * h / cv;
        sim.run(t_station, &mut [])?;
        // Row-averaged pressure profile.
        let mesh = sim.state.mesh.clone();
        let fefv = sim.state.fefv.clone().unwrap();
        let n_i = sim.state.n_i.clone();
        let mut rows: std::collections::BTreeMap<i64, (f64, f64, usize)> =
            std::collections::BTreeMap::new();
        for ci in 0..mesh.n_cells() {
            let z = mesh.centroid[ci].y;
            let n_cell = fefv
                .cell_average(ci, &n_i)
                .clamp(crate::solid::POROSITY_MIN, 1.0);
            let rho_true = sim.state.avg.bar[ci].rho / n_cell;
            let p = kappa * (rho_true / rho0 - 1.0);
            let key = (z * 2000.0).round() as i64;
            let e = rows.entry(key).or_insert((0.0, 0.0, 0));
            e.0 += z;
            e.1 += p;
            e.2 += 1;
        }
        let mut profile = Vec::new();
        let mut max_err: f64 = 0.0;
        for (_, (zsum, psum, count)) in rows {
            let z = zsum / count as f64;
            let p_sim = psum / count as f64;
            // Series coordinate measures depth below the drained surface.
            let p_exact = sigma0 * terzaghi_series((h - z) / h, tv);
            if z <= 0.9 * h {
                max_err = max_err.max((p_sim - p_exact).abs() / sigma0);
            }
            profile.push((z, p_sim, p_exact));
        }
        out.push(TerzaghiStation {
            tv,
            profile,
            max_err_frac: max_err,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsStudy {
    /// Refine the FV grid; FE grid and points fixed (expect slope ~1 in the
    /// fluid velocity error).
    FluidGrid,
    /// Refine the FE grid; FV grid and points-per-cell fixed (expect slope
    /// ~2 in the solid velocity error on the regular Cartesian grid).
    FeGrid,
    /// Refine points per cell; both grids fixed (expect slope ~1 in h_p/h_i).
    PointRatio,
}

#[derive(Debug, Clone)]
pub struct MmsStudyResult {
    pub study: MmsStudy,
    /// (scale, e_vs, e_vf) per level.
    pub rows: Vec<(f64, f64, f64)>,
    pub controlling: ConvergenceReport,
}

fn run_mms_level(fe_n: usize, fv_n: usize, ppc: usize, t_end: f64) -> Result<(f64, f64)> {
    let cfg = scenario::mms_preset(fe_n, fv_n, ppc, t_end);
    let Built { mut sim, .. } = build(&cfg)?;
    sim.run(t_end, &mut [])?;
    let t = sim.state.time;
    let e_vs = l2_error_points(&sim.state.points, |x| MmsProblem::v_s(x, t));
    let e_vf = l2_error_cells(&sim.state.mesh, &sim.state.avg, |x| MmsProblem::v_f(x, t));
    Ok((e_vs, e_vf))
}

pub fn run_mms_study(study: MmsStudy, levels: usize) -> Result<MmsStudyResult> {
    let levels = levels.max(3);
    let mut rows = Vec::new();
    match study {
        MmsStudy::FluidGrid => {
            let fv_all = [5usize, 8, 12, 20, 30];
            for &fv_n in fv_all.iter().take(levels) {
                let (e_vs, e_vf) = run_mms_level(60, fv_n, 2, 0.3)?;
                rows.push((2.0 / fv_n as f64, e_vs, e_vf));
            }
        }
        MmsStudy::FeGrid => {
            let fe_all = [5usize, 8, 12, 20, 30];
            for &fe_n in fe_all.iter().take(levels) {
                let (e_vs, e_vf) = run_mms_level(fe_n, 60, 2, 0.3)?;
                rows.push((2.0 / fe_n as f64, e_vs, e_vf));
            }
        }
        MmsStudy::PointRatio => {
            let ppc_all = [1usize, 2, 4];
            for &ppc in ppc_all.iter().take(levels.min(3)) {
                let (e_vs, e_vf) = run_mms_level(60, 60, ppc, 1.28)?;
                rows.push((1.0 / ppc as f64, e_vs, e_vf));
            }
        }
    }
    let controlling = match study {
        MmsStudy::FluidGrid => ConvergenceReport::fit(
            "e_vf vs h_alpha",
            rows.iter().map(|r| (r.0, r.2)).collect(),
        ),
        MmsStudy::FeGrid => {
            ConvergenceReport::fit("e_vs vs h_i", rows.iter().map(|r| (r.0, r.1)).collect())
        }
        MmsStudy::PointRatio => ConvergenceReport::fit(
            "e_vs vs h_p/h_i",
            rows.iter().map(|r| (r.0, r.1)).collect(),
        ),
    };
    Ok(MmsStudyResult {
        study,
        rows,
        controlling,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SodResult {
    pub cells: usize,
    pub l1_density_error: f64,
}

/// Shock tube on the pure-fluid reduction; L1 density error against the
/// exact Riemann solution at t = 0.2.
pub fn run_sod(cells: usize) -> Result<SodResult> {
    let cfg = scenario::sod_preset(cells);
    let Built { mut sim, t_end, .. } = build(&cfg)?;
    sim.run(t_end, &mut [])?;
    let left = RiemannState {
        rho: 1.0,
        u: 0.0,
        p: 1.0,
    };
    let right = RiemannState {
        rho: 0.125,
        u: 0.0,
        p: 0.1,
    };
    let t = sim.state.time;
    let dx = 1.0 / cells as f64;
    let mut l1 = 0.0;
    for ci in 0..sim.state.mesh.n_cells() {
        let x = sim.state.mesh.centroid[ci].x;
        let exact = sample_riemann(&left, &right, 1.4, (x - 0.5) / t)?;
        l1 += (sim.state.avg.bar[ci].rho - exact.rho).abs() * dx;
    }
    Ok(SodResult {
        cells,
        l1_density_error: l1,
    })
}
