//! Time stepping: the explicit update-stress-last algorithm (porosity and
//! velocity projections, fluid flux update, solid acceleration solve, FLIP
//! point update, mapping refresh), an RK4 fluid integrator with semi-implicit
//! drag, and the per-mechanism stability bound calculator.

use crate::basis::{BasisSet, CharacteristicKind};
use crate::bcs::{BcTable, SolidConstraints};
use crate::coupling::{
    buoyancy_forces, drag_forces, fluid_node_proxies, nodal_resistance, semi_implicit_resistance,
    DragParams, NodalFluidProxies,
};
use crate::error::{Error, Result};
use crate::fluid::forces::{assemble_cell_forces, FluidParams, FluxDiag};
use crate::fluid::{CellAverages, FluidState, PorosityCtx, ReconOpts, Reconstruction};
use crate::mapping::{compute_mappings, FeFvMaps, MappingMatrices};
use crate::math::V2;
use crate::mesh::Mesh;
use crate::solid::{
    nodal_forces, point_velocity_gradient, project_porosity, project_velocity, update_points,
    update_stress, MaterialPoint, SolidModel, EMPTY_NODE_REL_MASS,
};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ForwardEuler,
    Rk4SemiImplicit,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtControl {
    Fixed { dt: f64 },
    Adaptive { safety: f64 },
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Damping {
    pub beta: f64,
    pub until: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepPlan {
    pub scheme: Scheme,
    pub dt: DtControl,
    pub c9: f64,
    pub c10: f64,
    pub c11: f64,
    pub damping: Option<Damping>,
}

impl Default for StepPlan {
    fn default() -> Self {
        StepPlan {
            scheme: Scheme::ForwardEuler,
            dt: DtControl::Adaptive { safety: 0.9 },
            c9: 0.2,
            c10: 0.2,
            c11: 1.0,
            damping: None,
        }
    }
}

/// External forcing fields (manufactured-solution sources).
#[derive(Clone)]
pub struct ExternalForcing {
    pub solid_accel: Arc<dyn Fn(V2, f64) -> V2 + Send + Sync>,
    pub fluid_accel: Arc<dyn Fn(V2, f64) -> V2 + Send + Sync>,
    pub fluid_heat: Arc<dyn Fn(V2, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ExternalForcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ExternalForcing(..)")
    }
}

#[derive(Debug, Clone)]
pub struct SolidPhase {
    pub basis: Arc<BasisSet>,
    pub characteristic: CharacteristicKind,
    pub model: SolidModel,
    pub rho_s: f64,
    /// Rigid porous skeleton: nodal solid velocity and acceleration held at
    /// zero (static-bed scenarios).
    pub pinned: bool,
}

#[derive(Debug, Clone)]
pub struct Models {
    pub solid: Option<SolidPhase>,
    pub fluid: FluidParams,
    pub drag: Option<DragParams>,
    pub recon: ReconOpts,
    pub forcing: Option<ExternalForcing>,
}

#[derive(Debug)]
pub struct SimulationState {
    pub mesh: Arc<Mesh>,
    pub fefv: Option<Arc<FeFvMaps>>,
    pub points: Vec<MaterialPoint>,
    pub maps: Option<MappingMatrices>,
    pub avg: CellAverages,
    /// Nodal fields from the latest step (diagnostics / snapshots).
    pub n_i: Vec<f64>,
    pub v_si: Vec<V2>,
    pub a_si: Vec<V2>,
    pub time: f64,
    pub step: u64,
    t_origin: f64,
    steps_taken: u64,
}

impl SimulationState {
    pub fn new(
        mesh: Arc<Mesh>,
        fefv: Option<Arc<FeFvMaps>>,
        points: Vec<MaterialPoint>,
        avg: CellAverages,
    ) -> SimulationState {
        let n = fefv.as_ref().map(|f| f.n_nodes).unwrap_or(0);
        SimulationState {
            mesh,
            fefv,
            points,
            maps: None,
            avg,
            n_i: vec![1.0; n],
            v_si: vec![V2::zeros(); n],
            a_si: vec![V2::zeros(); n],
            time: 0.0,
            step: 0,
            t_origin: 0.0,
            steps_taken: 0,
        }
    }

    pub fn total_solid_mass(&self) -> f64 {
        self.points.iter().map(|p| p.mass).sum()
    }

    pub fn total_fluid(&self) -> FluidState {
        self.avg.total(&self.mesh.volume)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DtLimits {
    pub cfl_fluid: f64,
    pub cfl_solid: f64,
    pub viscous: f64,
    pub heat: f64,
    /// Explicit drag bound as published (reported; not binding under the
    /// semi-implicit integrator).
    pub drag: f64,
}

impl DtLimits {
    pub fn binding(&self, semi_implicit: bool) -> (f64, &'static str) {
        let mut best = (self.cfl_fluid, "cfl_fluid");
        if self.cfl_solid < best.0 {
            best = (self.cfl_solid, "cfl_solid");
        }
        if self.viscous < best.0 {
            best = (self.viscous, "viscous");
        }
        if self.heat < best.0 {
            best = (self.heat, "heat");
        }
        if !semi_implicit && self.drag < best.0 {
            best = (self.drag, "drag");
        }
        best
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepDiag {
    pub dt: f64,
    pub binding: &'static str,
    pub fluid: FluxDiag,
    pub outside_points: usize,
}

pub struct Simulation {
    pub state: SimulationState,
    pub models: Models,
    pub bcs: BcTable,
    pub constraints: Option<SolidConstraints>,
    pub plan: StepPlan,
}

/// Read-only per-step callbacks (snapshots, probes, conservation tallies).
pub trait Observer {
    fn on_step(&mut self, state: &SimulationState, diag: &StepDiag) -> Result<()>;
}

impl Simulation {
    pub fn new(state: SimulationState, models: Models, bcs: BcTable, plan: StepPlan) -> Simulation {
        let constraints = models
            .solid
            .as_ref()
            .map(|s| SolidConstraints::build(&s.basis, &bcs));
        Simulation {
            state,
            models,
            bcs,
            constraints,
            plan,
        }
    }

    fn ensure_maps(&mut self) -> Result<()> {
        let Some(solid) = &self.models.solid else {
            return Ok(());
        };
        if self.state.maps.is_none() {
            let fefv = self
                .state
                .fefv
                .clone()
                .ok_or_else(|| Error::config("solid phase requires FE-FV maps"))?;
            self.state.maps = Some(compute_mappings(
                &self.state.points,
                &solid.basis,
                solid.characteristic,
                fefv,
            )?);
        }
        Ok(())
    }

    /// Projects porosity and velocity onto the grid and applies constraints.
    fn project_solid(&mut self) -> Result<()> {
        let Some(solid) = &self.models.solid else {
            return Ok(());
        };
        let maps = self.state.maps.as_ref().unwrap();
        self.state.n_i = project_porosity(&self.state.points, maps, solid.rho_s);
        if solid.pinned {
            self.state.v_si = vec![V2::zeros(); maps.n_nodes()];
        } else {
            let mut v = project_velocity(&self.state.points, maps);
            if let Some(c) = &self.constraints {
                c.apply(&mut v);
            }
            self.state.v_si = v;
        }
        Ok(())
    }

    fn porosity_ctx(&self) -> PorosityCtx {
        match (&self.models.solid, &self.state.fefv) {
            (Some(_), Some(fefv)) => {
                PorosityCtx::from_fe(fefv, &self.state.mesh, &self.state.n_i, &self.state.v_si)
            }
            _ => PorosityCtx::uniform(&self.state.mesh),
        }
    }

    /// Reconstruction plus all per-cell fluid force rows except drag:
    /// interior + gravity + buoyancy + manufactured forcing.
    fn fluid_forces(
        &self,
        avg: &CellAverages,
        por: &PorosityCtx,
        t: f64,
    ) -> Result<(Reconstruction, Vec<FluidState>, Vec<V2>, FluxDiag)> {
        let recon = crate::fluid::reconstruct(
            &self.state.mesh,
            avg,
            por,
            &self.models.fluid.eos,
            &self.bcs,
            &self.models.recon,
        )?;
        let (forces, diag) = assemble_cell_forces(
            &self.state.mesh,
            avg,
            &recon,
            por,
            &self.models.fluid,
            &self.bcs,
        )?;
        let mut total: Vec<FluidState> = forces
            .interior
            .iter()
            .zip(forces.external.iter())
            .map(|(a, b)| *a + *b)
            .collect();
        let mut f_buoy_nodal = Vec::new();
        if let (Some(_), Some(fefv)) = (&self.models.solid, &self.state.fefv) {
            let buoy = buoyancy_forces(
                &self.state.n_i,
                &self.state.v_si,
                &recon.p_cell,
                fefv,
                &self.state.mesh,
            );
            for (t_row, b_row) in total.iter_mut().zip(buoy.cell.iter()) {
                *t_row = *t_row + *b_row;
            }
            f_buoy_nodal = buoy.nodal;
        }
        if let Some(f) = &self.models.forcing {
            for (ci, row) in total.iter_mut().enumerate() {
                let x = self.state.mesh.centroid[ci];
                let b = (f.fluid_accel)(x, t);
                let q = (f.fluid_heat)(x, t);
                let s = &avg.bar[ci];
                *row = *row + FluidState::new(0.0, b * s.rho, s.mom.dot(&b) + q);
            }
        }
        Ok((recon, total, f_buoy_nodal, diag))
    }

    fn solid_body_force(&self, t: f64) -> impl Fn(&MaterialPoint) -> V2 + '_ {
        let g = self.models.fluid.gravity;
        let forcing = self.models.forcing.clone();
        move |p: &MaterialPoint| match &forcing {
            Some(f) => g + (f.solid_accel)(p.x, t),
            None => g,
        }
    }

    fn apply_fluid_update(&mut self, rows: &[FluidState], dt: f64) -> Result<()> {
        for (cell, (s, r)) in self
            .state
            .avg
            .bar
            .iter_mut()
            .zip(rows.iter())
            .enumerate()
        {
            *s = *s + *r * dt;
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("fluid cell {cell}")));
            }
        }
        self.state.avg.check_admissible()
    }

    /// Nodal acceleration solve with the lumped mass matrix plus the
    /// empty-node threshold, constraints applied.
    fn accel_from_forces(&self, forces: &[V2]) -> Vec<V2> {
        let maps = self.state.maps.as_ref().unwrap();
        let m_max = maps.m_diag.iter().cloned().fold(0.0_f64, f64::max);
        let tol = EMPTY_NODE_REL_MASS * m_max;
        let mut a: Vec<V2> = forces
            .iter()
            .zip(maps.m_diag.iter())
            .map(|(f, &m)| if m > tol { f / m } else { V2::zeros() })
            .collect();
        if let Some(c) = &self.constraints {
            c.apply(&mut a);
        }
        a
    }

    /// Finishes a step on the solid side: nodal velocity update (with the
    /// startup damping window), update-stress-last constitutive update,
    /// FLIP point update, and mapping refresh.
    fn advance_solid(&mut self, accel: Vec<V2>, dt: f64) -> Result<()> {
        let Some(solid) = self.models.solid.clone() else {
            return Ok(());
        };
        if solid.pinned {
            self.state.a_si = vec![V2::zeros(); accel.len()];
            return Ok(());
        }
        let mut accel = accel;
        let mut v_new: Vec<V2> = self
            .state
            .v_si
            .iter()
            .zip(accel.iter())
            .map(|(v, a)| v + a * dt)
            .collect();
        if let Some(d) = self.plan.damping {
            if self.state.time < d.until {
                let factor = (1.0 - d.beta * dt).max(0.0);
                for vn in v_new.iter_mut() {
                    *vn *= factor;
                }
                // Keep the FLIP transfer consistent with the damped field.
                for i in 0..accel.len() {
                    accel[i] = (v_new[i] - self.state.v_si[i]) / dt;
                }
            }
        }
        if let Some(c) = &self.constraints {
            c.apply(&mut v_new);
        }
        let maps = self.state.maps.as_ref().unwrap();
        // Update-stress-last: constitutive update with the new velocity field.
        for (pi, p) in self.state.points.iter_mut().enumerate() {
            if !p.active {
                continue;
            }
            let l = point_velocity_gradient(maps, &v_new, pi);
            update_stress(p, pi, &l, dt, &solid.model)?;
        }
        update_points(&mut self.state.points, maps, &accel, &v_new, dt)?;
        self.state.a_si = accel;
        // Refresh transfers at the new point positions.
        let fefv = self.state.fefv.clone().unwrap();
        let maps = compute_mappings(
            &self.state.points,
            &solid.basis,
            solid.characteristic,
            fefv,
        )?;
        let outside = maps.outside.len();
        if outside > 0 {
            log::warn!("{} material point(s) left the grid", outside);
            for &pi in &maps.outside {
                self.state.points[pi].active = false;
            }
        }
        self.state.maps = Some(maps);
        Ok(())
    }

    pub fn step_forward_euler(&mut self, dt: f64) -> Result<StepDiag> {
        self.ensure_maps()?;
        self.project_solid()?;
        let t = self.state.time;
        let por = self.porosity_ctx();
        let (_recon, fluid_rows, f_buoy, fdiag) =
            self.fluid_forces(&self.state.avg.clone(), &por, t)?;
        let mut diag = StepDiag {
            dt,
            binding: "",
            fluid: fdiag,
            outside_points: 0,
        };

        if let (Some(_solid), Some(fefv)) = (self.models.solid.clone(), self.state.fefv.clone()) {
            let (f_int, f_ext, f_trac, n_nodes) = {
                let maps = self.state.maps.as_ref().unwrap();
                diag.outside_points = maps.outside.len();
                let body = self.solid_body_force(t);
                let (a, b, c) = nodal_forces(&self.state.points, maps, body);
                (a, b, c, maps.n_nodes())
            };

            // Coupling forces (explicit drag).
            let (drag_nodal, drag_cell) = match &self.models.drag {
                Some(dp) => {
                    let proxies = fluid_node_proxies(&fefv, &self.state.mesh, &self.state.avg);
                    let k = nodal_resistance(&self.state.n_i, &proxies, &self.state.v_si, dp);
                    let d = drag_forces(&k, &self.state.v_si, &fefv, &self.state.mesh, &self.state.avg);
                    (d.nodal, d.cell)
                }
                None => (
                    vec![V2::zeros(); n_nodes],
                    vec![FluidState::default(); self.state.mesh.n_cells()],
                ),
            };

            // Fluid update with all rows.
            let rows: Vec<FluidState> = fluid_rows
                .iter()
                .zip(drag_cell.iter())
                .map(|(a, b)| *a + *b)
                .collect();
            self.apply_fluid_update(&rows, dt)?;

            // Solid acceleration solve and point updates.
            let mut forces = vec![V2::zeros(); n_nodes];
            for i in 0..n_nodes {
                forces[i] = f_int[i] + f_ext[i] + f_trac[i] + drag_nodal[i];
                if !f_buoy.is_empty() {
                    forces[i] += f_buoy[i];
                }
            }
            let accel = self.accel_from_forces(&forces);
            self.advance_solid(accel, dt)?;
        } else {
            self.apply_fluid_update(&fluid_rows, dt)?;
        }
        Ok(diag)
    }

    pub fn step_rk4_semi_implicit(&mut self, dt: f64) -> Result<StepDiag> {
        self.ensure_maps()?;
        self.project_solid()?;
        let t = self.state.time;
        let por = self.porosity_ctx();
        let avg0 = self.state.avg.clone();

        // Explicit drag at the step start (held fixed through the stages).
        let mut drag_nodal_k = Vec::new();
        let mut drag_cell_k = vec![FluidState::default(); self.state.mesh.n_cells()];
        let mut k_star = Vec::new();
        let mut proxies_opt: Option<NodalFluidProxies> = None;
        if let (Some(_), Some(fefv), Some(dp)) =
            (&self.models.solid, &self.state.fefv, &self.models.drag)
        {
            let proxies = fluid_node_proxies(fefv, &self.state.mesh, &avg0);
            k_star = nodal_resistance(&self.state.n_i, &proxies, &self.state.v_si, dp);
            let d = drag_forces(&k_star, &self.state.v_si, fefv, &self.state.mesh, &avg0);
            drag_nodal_k = d.nodal;
            drag_cell_k = d.cell;
            proxies_opt = Some(proxies);
        }
        let _ = drag_nodal_k;

        // Four fluid stages; drag added explicitly inside each stage state.
        let (_, rows1, buoy1, fdiag) = self.fluid_forces(&avg0, &por, t)?;
        let stage = |rows: &[FluidState], w: f64| -> CellAverages {
            CellAverages {
                bar: avg0
                    .bar
                    .iter()
                    .zip(rows.iter().zip(drag_cell_k.iter()))
                    .map(|(s, (r, d))| *s + (*r + *d) * (w * dt))
                    .collect(),
            }
        };
        let u1 = stage(&rows1, 0.5);
        u1.check_admissible()?;
        let (_, rows2, buoy2, _) = self.fluid_forces(&u1, &por, t + 0.5 * dt)?;
        let u2 = stage(&rows2, 0.5);
        u2.check_admissible()?;
        let (_, rows3, buoy3, _) = self.fluid_forces(&u2, &por, t + 0.5 * dt)?;
        let u3 = stage(&rows3, 1.0);
        u3.check_admissible()?;
        let (_, rows4, buoy4, _) = self.fluid_forces(&u3, &por, t + dt)?;

        let combo = |i: usize| -> FluidState {
            (rows1[i] + rows2[i] * 2.0 + rows3[i] * 2.0 + rows4[i]) * (1.0 / 6.0)
        };

        let mut diag = StepDiag {
            dt,
            binding: "",
            fluid: fdiag,
            outside_points: 0,
        };

        if let (Some(solid), Some(fefv)) = (self.models.solid.clone(), self.state.fefv.clone()) {
            let (f_int, f_ext, f_trac, n_nodes, m_diag) = {
                let maps = self.state.maps.as_ref().unwrap();
                diag.outside_points = maps.outside.len();
                let body = self.solid_body_force(t);
                let (a, b, c) = nodal_forces(&self.state.points, maps, body);
                (a, b, c, maps.n_nodes(), maps.m_diag.clone())
            };
            let buoy_combo: Vec<V2> = if buoy1.is_empty() {
                vec![V2::zeros(); n_nodes]
            } else {
                (0..n_nodes)
                    .map(|i| (buoy1[i] + buoy2[i] * 2.0 + buoy3[i] * 2.0 + buoy4[i]) / 6.0)
                    .collect()
            };

            // Semi-implicit drag from the drag-free intermediate state.
            let mut drag_nodal_new = vec![V2::zeros(); n_nodes];
            let mut drag_cell_new = vec![FluidState::default(); self.state.mesh.n_cells()];
            if let (Some(_dp), Some(proxies)) = (&self.models.drag, &proxies_opt) {
                let avg_star = CellAverages {
                    bar: avg0
                        .bar
                        .iter()
                        .enumerate()
                        .map(|(i, s)| *s + combo(i) * dt)
                        .collect(),
                };
                avg_star.check_admissible()?;
                let m_max = m_diag.iter().cloned().fold(0.0_f64, f64::max);
                let tol = EMPTY_NODE_REL_MASS * m_max;
                let v_star: Vec<V2> = (0..n_nodes)
                    .map(|i| {
                        if m_diag[i] > tol && !solid.pinned {
                            self.state.v_si[i]
                                + (f_int[i] + f_ext[i] + f_trac[i] + buoy_combo[i]) * dt
                                    / m_diag[i]
                        } else {
                            V2::zeros()
                        }
                    })
                    .collect();
                let k_tilde =
                    semi_implicit_resistance(&k_star, &self.state.n_i, proxies, solid.rho_s, dt);
                let d = drag_forces(&k_tilde, &v_star, &fefv, &self.state.mesh, &avg_star);
                drag_nodal_new = d.nodal;
                drag_cell_new = d.cell;
            }

            // Final fluid update: RK4 combination plus the semi-implicit drag.
            let rows: Vec<FluidState> = (0..self.state.mesh.n_cells())
                .map(|i| combo(i) + drag_cell_new[i])
                .collect();
            self.apply_fluid_update(&rows, dt)?;

            // Solid acceleration with stage-combined buoyancy and new drag.
            let forces: Vec<V2> = (0..n_nodes)
                .map(|i| f_int[i] + f_ext[i] + f_trac[i] + buoy_combo[i] + drag_nodal_new[i])
                .collect();
            let accel = self.accel_from_forces(&forces);
            self.advance_solid(accel, dt)?;
        } else {
            let rows: Vec<FluidState> = (0..self.state.mesh.n_cells()).map(combo).collect();
            self.apply_fluid_update(&rows, dt)?;
        }
        Ok(diag)
    }

    /// Per-mechanism stability limits for the current state.
    pub fn stability_dt(&mut self) -> Result<DtLimits> {
        self.ensure_maps()?;
        self.project_solid()?;
        let mesh = &self.state.mesh;
        let por = self.porosity_ctx();
        let eos = &self.models.fluid.eos;
        let mut lim = DtLimits {
            cfl_fluid: f64::INFINITY,
            cfl_solid: f64::INFINITY,
            viscous: f64::INFINITY,
            heat: f64::INFINITY,
            drag: f64::INFINITY,
        };
        // Fluid CFL per cell.
        for ci in 0..mesh.n_cells() {
            let u = self.state.avg.bar[ci] * (1.0 / por.n_cell[ci]);
            let out = eos.evaluate_cell(&u, ci)?;
            let speed = out.a + u.vel().norm();
            if speed > 0.0 {
                lim.cfl_fluid = lim.cfl_fluid.min(self.plan.c9 * mesh.cell_length(ci) / speed);
            }
        }
        // Viscous and heat bounds per face.
        let eta0 = eos.eta0();
        let cond = eos.conductivity();
        let cv = eos.c_v().unwrap_or(0.0);
        if eta0 > 0.0 || (cond > 0.0 && cv > 0.0) {
            for (fid, f) in mesh.faces.iter().enumerate() {
                let Some(ri) = f.right else { continue };
                let rl = self.state.avg.bar[f.left].rho;
                let rr = self.state.avg.bar[ri].rho;
                let h = mesh.cell_length(f.left).min(mesh.cell_length(ri));
                let inv_sum = 1.0 / rl + 1.0 / rr;
                let phi = 1.0 - por.n_face[fid];
                let eta_r = eta0 * (1.0 + 2.5 * phi);
                if eta_r > 0.0 {
                    lim.viscous = lim.viscous.min(self.plan.c11 * h * h / (eta_r * inv_sum));
                }
                if cond > 0.0 && cv > 0.0 {
                    let nk = por.n_face[fid] * cond;
                    lim.heat = lim.heat.min(self.plan.c11 * cv * h * h / (nk * inv_sum));
                }
            }
        }
        // Solid CFL and the published explicit-drag bound.
        if let (Some(solid), Some(fefv)) = (&self.models.solid, &self.state.fefv) {
            let m_c = solid.model.constrained_modulus();
            let h_i = match solid.basis.as_ref() {
                BasisSet::TentCartesian { xs, ys } | BasisSet::BSplineCartesian { xs, ys } => xs
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .chain(ys.windows(2).map(|w| w[1] - w[0]))
                    .fold(f64::MAX, f64::min),
                BasisSet::TriLinear { mesh } => (0..mesh.n_cells())
                    .map(|c| mesh.cell_length(c))
                    .fold(f64::MAX, f64::min),
            };
            for p in &self.state.points {
                if !p.active {
                    continue;
                }
                let a_s = (m_c / p.density()).sqrt();
                let speed = a_s + p.vel.norm();
                if speed > 0.0 {
                    lim.cfl_solid = lim.cfl_solid.min(self.plan.c10 * h_i / speed);
                }
            }
            if let Some(dp) = &self.models.drag {
                let proxies = fluid_node_proxies(fefv, mesh, &self.state.avg);
                let k = nodal_resistance(&self.state.n_i, &proxies, &self.state.v_si, dp);
                for (ci, col) in fefv.a_cols.iter().enumerate() {
                    let rho_cell = self.state.avg.bar[ci].rho;
                    for &(node, a) in col {
                        if a == 0.0 || k[node] == 0.0 {
                            continue;
                        }
                        let phi = 1.0 - self.state.n_i[node];
                        if phi <= 0.0 {
                            continue;
                        }
                        let denom = k[node] * (1.0 / (phi * solid.rho_s) - 1.0 / rho_cell);
                        if denom > 0.0 {
                            lim.drag = lim.drag.min(2.0 / denom);
                        }
                    }
                }
            }
        }
        Ok(lim)
    }

    /// One step with the planned scheme and dt control.
    pub fn step(&mut self) -> Result<StepDiag> {
        let semi = matches!(self.plan.scheme, Scheme::Rk4SemiImplicit);
        let (dt, binding) = match self.plan.dt {
            DtControl::Fixed { dt } => (dt, "fixed"),
            DtControl::Adaptive { safety } => {
                let lim = self.stability_dt()?;
                let (dt, name) = lim.binding(semi);
                if !dt.is_finite() || dt <= 0.0 {
                    return Err(Error::config(
                        "adaptive dt: no finite stability bound (static problem?)",
                    ));
                }
                (safety * dt, name)
            }
        };
        let result = match self.plan.scheme {
            Scheme::ForwardEuler => self.step_forward_euler(dt),
            Scheme::Rk4SemiImplicit => self.step_rk4_semi_implicit(dt),
        };
        let mut diag =
            result.map_err(|e| e.with_step(self.state.step, self.state.time))?;
        diag.binding = binding;
        self.state.step += 1;
        self.state.steps_taken += 1;
        self.state.time = match self.plan.dt {
            // Fused accumulation: after n fixed steps the time is exactly
            // t_origin + n*dt.
            DtControl::Fixed { dt } => self.state.t_origin + self.state.steps_taken as f64 * dt,
            DtControl::Adaptive { .. } => self.state.time + dt,
        };
        Ok(diag)
    }

    /// Advances to `t_end`, invoking observers after every step.
    pub fn run(&mut self, t_end: f64, observers: &mut [&mut dyn Observer]) -> Result<()> {
        self.state.t_origin = self.state.time;
        self.state.steps_taken = 0;
        if let DtControl::Fixed { dt } = self.plan.dt {
            let n = ((t_end - self.state.time) / dt).round().max(0.0) as u64;
            for _ in 0..n {
                let diag = self.step()?;
                for obs in observers.iter_mut() {
                    obs.on_step(&self.state, &diag)?;
                }
            }
        } else {
            while self.state.time < t_end - 1e-15 * t_end.abs().max(1.0) {
                let diag = self.step()?;
                for obs in observers.iter_mut() {
                    obs.on_step(&self.state, &diag)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSet;
    use crate::bcs::FluidBc;
    use crate::fluid::FluidEos;
    use crate::math::v2;
    use crate::mesh::build_cartesian_mesh;
    use crate::solid::{seed_lattice, SeedSpec};

    fn quiescent_mixture() -> Simulation {
        let n = 6;
        let w = 0.6;
        let mesh = Arc::new(build_cartesian_mesh(n, n, v2(0.0, 0.0), v2(w, w)).unwrap());
        let basis = Arc::new(BasisSet::tent(
            (0..=n).map(|i| i as f64 * w / n as f64).collect(),
            (0..=n).map(|i| i as f64 * w / n as f64).collect(),
        ));
        let fefv = Arc::new(FeFvMaps::build(&basis, &mesh));
        let points = seed_lattice(&SeedSpec {
            lo: v2(0.0, 0.0),
            hi: v2(w, w),
            ppc_axis: 2,
            phi0: 0.6,
            rho_s: 2650.0,
            spacing: v2(w / n as f64, w / n as f64),
        });
        let eos = FluidEos::Barotropic {
            kappa: 2.2e7,
            rho0: 1000.0,
            eta0: 1e-3,
        };
        // Effective density at uniform n = 0.4.
        let state = FluidState::new(400.0, v2(0.0, 0.0), 400.0 * 10.0);
        let avg = CellAverages::uniform(mesh.n_cells(), state);
        let sim_state = SimulationState::new(mesh, Some(fefv), points, avg);
        let models = Models {
            solid: Some(SolidPhase {
                basis,
                characteristic: CharacteristicKind::UGimp,
                model: SolidModel::LinearElastic { e: 1e7, nu: 0.3 },
                rho_s: 2650.0,
                pinned: false,
            }),
            fluid: FluidParams {
                eos,
                smagorinsky: None,
                artificial_viscosity: false,
                gravity: V2::zeros(),
            },
            drag: Some(DragParams {
                model: crate::coupling::DragModel::CarmanKozeny,
                d: 1e-3,
                eta0: 1e-3,
            }),
            recon: ReconOpts::default(),
            forcing: None,
        };
        let plan = StepPlan {
            scheme: Scheme::ForwardEuler,
            dt: DtControl::Fixed { dt: 2e-6 },
            ..StepPlan::default()
        };
        Simulation::new(sim_state, models, BcTable::all_slip(), plan)
    }

    #[test]
    fn quiescent_equilibrium_is_preserved() {
        let mut sim = quiescent_mixture();
        let mass0 = sim.state.total_solid_mass();
        let fluid0 = sim.state.total_fluid();
        for _ in 0..20 {
            sim.step().unwrap();
        }
        // State unchanged: velocities stay one round-off from zero.
        for p in &sim.state.points {
            assert!(p.vel.norm() < 1e-13, "point moved: {:?}", p.vel);
        }
        for s in &sim.state.avg.bar {
            assert!(s.mom.norm() < 1e-13 * s.rho, "fluid moved: {:?}", s.mom);
            assert!((s.rho - 400.0).abs() < 1e-13 * 400.0);
        }
        assert_eq!(sim.state.total_solid_mass(), mass0);
        let fluid1 = sim.state.total_fluid();
        assert!((fluid1.rho - fluid0.rho).abs() < 1e-13 * fluid0.rho);
    }

    #[test]
    fn quiescent_equilibrium_rk4() {
        let mut sim = quiescent_mixture();
        sim.plan.scheme = Scheme::Rk4SemiImplicit;
        for _ in 0..10 {
            sim.step().unwrap();
        }
        for s in &sim.state.avg.bar {
            assert!(s.mom.norm() < 1e-13 * s.rho);
        }
        for p in &sim.state.points {
            assert!(p.vel.norm() < 1e-13);
        }
    }

    #[test]
    fn gravity_single_step_momentum_increment() {
        // Fluid-only closed box: one step changes momentum by dt*rho_bar*g
        // per cell (before any pressure rebalancing develops).
        let mesh = Arc::new(build_cartesian_mesh(4, 4, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap());
        let eos = FluidEos::IdealGas {
            gamma: 1.4,
            r: 287.0,
            eta0: 0.0,
            k_f: 0.0,
        };
        let rho = 1.2;
        let avg = CellAverages::uniform(
            mesh.n_cells(),
            FluidState::new(rho, v2(0.0, 0.0), rho * 2.0e5),
        );
        let state = SimulationState::new(mesh, None, Vec::new(), avg);
        let g = v2(0.0, -9.81);
        let models = Models {
            solid: None,
            fluid: FluidParams {
                eos,
                smagorinsky: None,
                artificial_viscosity: false,
                gravity: g,
            },
            drag: None,
            recon: ReconOpts::default(),
            forcing: None,
        };
        let dt = 1e-6;
        let mut sim = Simulation::new(
            state,
            models,
            BcTable::all_slip(),
            StepPlan {
                dt: DtControl::Fixed { dt },
                ..StepPlan::default()
            },
        );
        sim.step().unwrap();
        for s in &sim.state.avg.bar {
            assert!((s.mom - g * (rho * dt)).norm() < 1e-18 + 1e-12 * rho * dt * 9.81);
        }
    }

    #[test]
    fn uniform_channel_flow_is_stationary() {
        // Matching stagnation inlet / static outlet around a uniform subsonic
        // stream: fluxes telescope and the state stays put.
        let mesh = Arc::new(build_cartesian_mesh(12, 3, v2(0.0, 0.0), v2(1.2, 0.3)).unwrap());
        let gamma = 1.4;
        let r_gas = 287.0;
        let eos = FluidEos::IdealGas {
            gamma,
            r: r_gas,
            eta0: 0.0,
            k_f: 0.0,
        };
        let rho = 1.0;
        let p = 1.0e5;
        let u = 60.0;
        let theta = p / (rho * r_gas);
        let a = (gamma * r_gas * theta).sqrt();
        let mach: f64 = u / a;
        let fac = 1.0 + 0.5 * (gamma - 1.0) * mach * mach;
        let p0 = p * fac.powf(gamma / (gamma - 1.0));
        let theta0 = theta * fac;
        let state = FluidState::new(
            rho,
            v2(u, 0.0) * rho,
            p / (gamma - 1.0) + 0.5 * rho * u * u,
        );
        let avg = CellAverages::uniform(mesh.n_cells(), state);
        let mut bcs = BcTable::all_slip();
        bcs.fluid[crate::mesh::TAG_LEFT] = FluidBc::StagnationInlet { p0, theta0 };
        bcs.fluid[crate::mesh::TAG_RIGHT] = FluidBc::PressureOutlet { p, theta };
        let models = Models {
            solid: None,
            fluid: FluidParams {
                eos,
                smagorinsky: None,
                artificial_viscosity: false,
                gravity: V2::zeros(),
            },
            drag: None,
            recon: ReconOpts::default(),
            forcing: None,
        };
        let sim_state = SimulationState::new(mesh, None, Vec::new(), avg);
        let mut sim = Simulation::new(
            sim_state,
            models,
            bcs,
            StepPlan {
                dt: DtControl::Adaptive { safety: 0.9 },
                ..StepPlan::default()
            },
        );
        for _ in 0..5 {
            sim.step().unwrap();
        }
        for s in &sim.state.avg.bar {
            assert!((s.rho - rho).abs() < 1e-10, "rho drifted: {}", s.rho);
            assert!((s.vel() - v2(u, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn stability_bounds_reference_values() {
        // dt_cfl = c9 h / (a + |v|) with a = 340, h = 0.01, c9 = 0.2.
        let mesh = Arc::new(build_cartesian_mesh(100, 1, v2(0.0, 0.0), v2(1.0, 0.01)).unwrap());
        let gamma = 1.4;
        let r_gas = 287.0;
        // a = sqrt(gamma p / rho): pick p for a = 340 exactly.
        let rho = 1.0;
        let p = 340.0_f64.powi(2) * rho / gamma;
        let eos = FluidEos::IdealGas {
            gamma,
            r: r_gas,
            eta0: 0.0,
            k_f: 0.0,
        };
        let avg = CellAverages::uniform(
            mesh.n_cells(),
            FluidState::new(rho, v2(0.0, 0.0), p / (gamma - 1.0)),
        );
        let state = SimulationState::new(mesh, None, Vec::new(), avg);
        let models = Models {
            solid: None,
            fluid: FluidParams {
                eos,
                smagorinsky: None,
                artificial_viscosity: false,
                gravity: V2::zeros(),
            },
            drag: None,
            recon: ReconOpts::default(),
            forcing: None,
        };
        let mut sim = Simulation::new(state, models, BcTable::all_slip(), StepPlan::default());
        let lim = sim.stability_dt().unwrap();
        assert!((lim.cfl_fluid - 0.2 * 0.01 / 340.0).abs() < 1e-12);
        assert!(lim.viscous.is_infinite());
        assert!(lim.heat.is_infinite());
        assert!(lim.cfl_solid.is_infinite());
        assert!(lim.drag.is_infinite());

        // Viscous bound: eta = 1e-3, rho_bar = 1000 both sides, h = 0.01,
        // c11 = 1 -> dt = 50 s.
        let mesh = Arc::new(build_cartesian_mesh(10, 1, v2(0.0, 0.0), v2(0.1, 0.01)).unwrap());
        let eos = FluidEos::Barotropic {
            kappa: 2.2e9,
            rho0: 1000.0,
            eta0: 1e-3,
        };
        let avg = CellAverages::uniform(
            mesh.n_cells(),
            FluidState::new(1000.0, v2(0.0, 0.0), 0.0),
        );
        let state = SimulationState::new(mesh, None, Vec::new(), avg);
        let models = Models {
            solid: None,
            fluid: FluidParams {
                eos,
                smagorinsky: None,
                artificial_viscosity: false,
                gravity: V2::zeros(),
            },
            drag: None,
            recon: ReconOpts::default(),
            forcing: None,
        };
        let mut sim = Simulation::new(state, models, BcTable::all_slip(), StepPlan::default());
        let lim = sim.stability_dt().unwrap();
        assert!((lim.viscous - 50.0).abs() < 1e-9 * 50.0);
    }

    #[test]
    fn fixed_dt_time_is_fused() {
        let mut sim = quiescent_mixture();
        sim.plan.dt = DtControl::Fixed { dt: 1e-6 };
        struct Nop;
        impl Observer for Nop {
            fn on_step(&mut self, _: &SimulationState, _: &StepDiag) -> Result<()> {
                Ok(())
            }
        }
        let mut nop = Nop;
        sim.run(1e-5, &mut [&mut nop]).unwrap();
        assert_eq!(sim.state.time, 10.0 * 1e-6);
        assert_eq!(sim.state.step, 10);
        // t_end equal to current time: zero further steps.
        let s0 = sim.state.step;
        sim.run(sim.state.time, &mut [&mut nop]).unwrap();
        assert_eq!(sim.state.step, s0);
    }
}
