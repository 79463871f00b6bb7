//! Equations of state for the pore fluid: calorically perfect ideal gas and
//! an isothermal weakly-compressible barotropic model. The barotropic model
//! carries the energy equation passively; its pressure ignores it.

use crate::error::{Error, Result};
use crate::fluid::FluidState;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FluidEos {
    IdealGas {
        gamma: f64,
        r: f64,
        eta0: f64,
        k_f: f64,
    },
    Barotropic {
        kappa: f64,
        rho0: f64,
        eta0: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct EosOut {
    pub p: f64,
    pub a: f64,
    pub theta: f64,
    pub eps: f64,
}

impl FluidEos {
    pub fn eta0(&self) -> f64 {
        match *self {
            FluidEos::IdealGas { eta0, .. } => eta0,
            FluidEos::Barotropic { eta0, .. } => eta0,
        }
    }

    pub fn conductivity(&self) -> f64 {
        match *self {
            FluidEos::IdealGas { k_f, .. } => k_f,
            FluidEos::Barotropic { .. } => 0.0,
        }
    }

    /// Specific heat at constant volume (ideal gas).
    pub fn c_v(&self) -> Option<f64> {
        match *self {
            FluidEos::IdealGas { gamma, r, .. } => Some(r / (gamma - 1.0)),
            FluidEos::Barotropic { .. } => None,
        }
    }

    pub fn is_barotropic(&self) -> bool {
        matches!(self, FluidEos::Barotropic { .. })
    }

    /// Density at a prescribed pressure (inverts p(rho) for the barotropic
    /// model).
    pub fn barotropic_density(&self, p: f64) -> Option<f64> {
        match *self {
            FluidEos::Barotropic { kappa, rho0, .. } => Some(rho0 * (1.0 + p / kappa)),
            _ => None,
        }
    }

    pub fn evaluate(&self, u: &FluidState) -> std::result::Result<EosOut, EosFailure> {
        if u.rho <= 0.0 {
            return Err(EosFailure::Density(u.rho));
        }
        let v = u.vel();
        let eps = u.energy() - 0.5 * v.norm_squared();
        match *self {
            FluidEos::IdealGas { gamma, r, .. } => {
                if eps <= 0.0 {
                    return Err(EosFailure::InternalEnergy(eps));
                }
                let p = (gamma - 1.0) * u.rho * eps;
                Ok(EosOut {
                    p,
                    a: (gamma * p / u.rho).sqrt(),
                    theta: p / (u.rho * r),
                    eps,
                })
            }
            FluidEos::Barotropic { kappa, rho0, .. } => Ok(EosOut {
                p: kappa * (u.rho / rho0 - 1.0),
                a: (kappa / rho0).sqrt(),
                theta: 0.0,
                eps,
            }),
        }
    }

    pub fn evaluate_cell(&self, u: &FluidState, cell: usize) -> Result<EosOut> {
        self.evaluate(u).map_err(|e| match e {
            EosFailure::Density(v) => Error::NegativeDensity { cell, value: v },
            EosFailure::InternalEnergy(v) => Error::NegativeInternalEnergy { cell, value: v },
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum EosFailure {
    Density(f64),
    InternalEnergy(f64),
}
