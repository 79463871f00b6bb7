//! Fluid phase on the finite volume grid: conserved cell averages of the
//! effective fields, equations of state, limited reconstruction of the true
//! fields, and face flux assembly.

pub mod eos;
pub mod flux;
pub mod forces;
pub mod recon;

pub use eos::{EosOut, FluidEos};
pub use recon::{reconstruct, ReconOpts, Reconstruction};

use crate::error::{Error, Result};
use crate::mapping::FeFvMaps;
use crate::math::V2;
use crate::mesh::Mesh;
use std::ops::{Add, Mul, Sub};

/// Fluid state vector (density, momentum, total energy density). Holds true
/// fields in reconstruction contexts and effective (porosity-weighted)
/// fields in `CellAverages`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluidState {
    pub rho: f64,
    pub mom: V2,
    pub en: f64,
}

impl FluidState {
    pub fn new(rho: f64, mom: V2, en: f64) -> Self {
        FluidState { rho, mom, en }
    }

    pub fn vel(&self) -> V2 {
        self.mom / self.rho
    }

    /// Specific total energy E.
    pub fn energy(&self) -> f64 {
        self.en / self.rho
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.mom.x.is_finite() && self.mom.y.is_finite() && self.en.is_finite()
    }
}

impl Add for FluidState {
    type Output = FluidState;
    fn add(self, o: FluidState) -> FluidState {
        FluidState::new(self.rho + o.rho, self.mom + o.mom, self.en + o.en)
    }
}

impl Sub for FluidState {
    type Output = FluidState;
    fn sub(self, o: FluidState) -> FluidState {
        FluidState::new(self.rho - o.rho, self.mom - o.mom, self.en - o.en)
    }
}

impl Mul<f64> for FluidState {
    type Output = FluidState;
    fn mul(self, s: f64) -> FluidState {
        FluidState::new(self.rho * s, self.mom * s, self.en * s)
    }
}

/// Conserved effective cell averages.
#[derive(Debug, Clone)]
pub struct CellAverages {
    pub bar: Vec<FluidState>,
}

impl CellAverages {
    pub fn uniform(n_cells: usize, state: FluidState) -> CellAverages {
        CellAverages {
            bar: vec![state; n_cells],
        }
    }

    pub fn check_admissible(&self) -> Result<()> {
        for (cell, s) in self.bar.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("cell {cell} averages")));
            }
            if s.rho <= 0.0 {
                return Err(Error::NegativeDensity {
                    cell,
                    value: s.rho,
                });
            }
        }
        Ok(())
    }

    pub fn total(&self, volumes: &[f64]) -> FluidState {
        self.bar
            .iter()
            .zip(volumes.iter())
            .fold(FluidState::default(), |acc, (s, &v)| acc + *s * v)
    }
}

/// Porosity context for the fluid solver: cell averages, face midpoint
/// values, FE-averaged porosity gradients, and cell-averaged solid velocity.
/// `uniform` provides the pure-fluid reduction n = 1.
#[derive(Debug, Clone)]
pub struct PorosityCtx {
    pub n_cell: Vec<f64>,
    pub n_face: Vec<f64>,
    pub grad_n_cell: Vec<V2>,
    pub v_s_cell: Vec<V2>,
}

impl PorosityCtx {
    pub fn uniform(mesh: &Mesh) -> PorosityCtx {
        PorosityCtx {
            n_cell: vec![1.0; mesh.n_cells()],
            n_face: vec![1.0; mesh.faces.len()],
            grad_n_cell: vec![V2::zeros(); mesh.n_cells()],
            v_s_cell: vec![V2::zeros(); mesh.n_cells()],
        }
    }

    /// Builds the context from FE nodal porosity and solid velocity fields.
    pub fn from_fe(fefv: &FeFvMaps, mesh: &Mesh, n_i: &[f64], v_si: &[V2]) -> PorosityCtx {
        let n_cell: Vec<f64> = (0..mesh.n_cells())
            .map(|c| fefv.cell_average(c, n_i).clamp(crate::solid::POROSITY_MIN, 1.0))
            .collect();
        let n_face: Vec<f64> = fefv
            .at_face_mid
            .iter()
            .map(|samples| {
                samples
                    .iter()
                    .map(|s| s.value * n_i[s.node])
                    .sum::<f64>()
                    .clamp(crate::solid::POROSITY_MIN, 1.0)
            })
            .collect();
        let grad_n_cell: Vec<V2> = fefv
            .grad_a_cols
            .iter()
            .map(|col| col.iter().fold(V2::zeros(), |a, &(n, g)| a + g * n_i[n]))
            .collect();
        let v_s_cell: Vec<V2> = fefv
            .a_cols
            .iter()
            .map(|col| col.iter().fold(V2::zeros(), |a, &(n, w)| a + v_si[n] * w))
            .collect();
        PorosityCtx {
            n_cell,
            n_face,
            grad_n_cell,
            v_s_cell,
        }
    }
}
