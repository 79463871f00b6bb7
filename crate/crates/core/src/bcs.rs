//! Boundary conditions for both phases. Fluid conditions are realized as
//! ghost states fed to the face flux; solid conditions constrain FE nodal
//! fields (and tagged surface points carry applied tractions).

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::fluid::{FluidEos, FluidState};
use crate::math::V2;
use crate::mesh::N_SIDE_TAGS;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluidBc {
    SlipWall,
    /// Full velocity reflection (viscous wall).
    NoSlipWall,
    /// Isentropic inflow from stagnation pressure and temperature (ideal gas).
    StagnationInlet { p0: f64, theta0: f64 },
    /// Static pressure at the face. Subsonic ideal-gas outflow replaces the
    /// interior pressure; supersonic outflow extrapolates; ideal-gas inflow
    /// falls back to a wall (flagged). The barotropic model imposes the
    /// pressure through the ghost density for either flow direction.
    PressureOutlet { p: f64, theta: f64 },
    /// Zero-pressure reference surface (barotropic ghost density rho0).
    ZeroPressure,
    SymmetryWall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolidBc {
    Free,
    SlipWall,
    NoSlipWall,
}

#[derive(Debug, Clone)]
pub struct BcTable {
    /// Indexed by boundary face tag.
    pub fluid: Vec<FluidBc>,
    pub solid: Vec<SolidBc>,
}

impl BcTable {
    pub fn all_slip() -> BcTable {
        BcTable {
            fluid: vec![FluidBc::SlipWall; N_SIDE_TAGS],
            solid: vec![SolidBc::SlipWall; N_SIDE_TAGS],
        }
    }

    pub fn fluid_for(&self, tag: usize) -> FluidBc {
        self.fluid.get(tag).copied().unwrap_or(FluidBc::SlipWall)
    }

    pub fn solid_for(&self, tag: usize) -> SolidBc {
        self.solid.get(tag).copied().unwrap_or(SolidBc::SlipWall)
    }
}

fn mirror(u: &FluidState, normal: V2) -> FluidState {
    let mn = u.mom.dot(&normal);
    FluidState::new(u.rho, u.mom - normal * (2.0 * mn), u.en)
}

fn reverse(u: &FluidState) -> FluidState {
    FluidState::new(u.rho, -u.mom, u.en)
}

/// Exterior (ghost) state for flux evaluation at a boundary face with
/// outward normal `normal`. The returned flag marks an inflow-at-outlet
/// wall fallback.
pub fn ghost_state(
    u: &FluidState,
    normal: V2,
    bc: FluidBc,
    eos: &FluidEos,
) -> Result<(FluidState, bool)> {
    match bc {
        FluidBc::SlipWall | FluidBc::SymmetryWall => Ok((mirror(u, normal), false)),
        FluidBc::NoSlipWall => Ok((reverse(u), false)),
        FluidBc::ZeroPressure => match eos {
            FluidEos::Barotropic { rho0, .. } => {
                let scale = rho0 / u.rho;
                Ok((
                    FluidState::new(*rho0, u.mom * scale, u.en * scale),
                    false,
                ))
            }
            _ => Err(Error::config(
                "ZeroPressure boundary requires the barotropic fluid model",
            )),
        },
        FluidBc::PressureOutlet { p, .. } => match *eos {
            FluidEos::Barotropic { .. } => {
                let rho = eos.barotropic_density(p).unwrap();
                let scale = rho / u.rho;
                Ok((FluidState::new(rho, u.mom * scale, u.en * scale), false))
            }
            FluidEos::IdealGas { gamma, .. } => {
                let out = eos
                    .evaluate(u)
                    .map_err(|_| Error::config("inadmissible interior state at pressure outlet"))?;
                let un = u.vel().dot(&normal);
                if un < 0.0 {
                    // Inflow at an outlet: wall fallback, flagged for the log.
                    return Ok((mirror(u, normal), true));
                }
                if un >= out.a {
                    return Ok((*u, false));
                }
                let v = u.vel();
                let en = p / (gamma - 1.0) + 0.5 * u.rho * v.norm_squared();
                Ok((FluidState::new(u.rho, u.mom, en), false))
            }
        },
        FluidBc::StagnationInlet { p0, theta0 } => match *eos {
            FluidEos::IdealGas { gamma, r, .. } => {
                let out = eos
                    .evaluate(u)
                    .map_err(|_| Error::config("inadmissible interior state at inlet"))?;
                let mach = (u.vel().norm() / out.a).min(0.99);
                let fac = 1.0 + 0.5 * (gamma - 1.0) * mach * mach;
                let p = p0 * fac.powf(-gamma / (gamma - 1.0));
                let theta = theta0 / fac;
                let rho = p / (r * theta);
                let speed = mach * (gamma * r * theta).sqrt();
                let vel = -normal * speed;
                let eps = r * theta / (gamma - 1.0);
                let en = rho * (eps + 0.5 * speed * speed);
                Ok((FluidState::new(rho, vel * rho, en), false))
            }
            _ => Err(Error::config(
                "StagnationInlet requires the ideal gas model",
            )),
        },
    }
}

/// Per-node solid constraint assembled from the FE grid sides.
#[derive(Debug, Clone)]
pub struct SolidConstraints {
    pub normals: Vec<Vec<V2>>,
    pub fixed: Vec<bool>,
}

impl SolidConstraints {
    pub fn build(basis: &BasisSet, table: &BcTable) -> SolidConstraints {
        let n = basis.n_nodes();
        let mut normals = vec![Vec::new(); n];
        let mut fixed = vec![false; n];
        let side_normal = [
            V2::new(-1.0, 0.0),
            V2::new(1.0, 0.0),
            V2::new(0.0, -1.0),
            V2::new(0.0, 1.0),
        ];
        for tag in 0..N_SIDE_TAGS {
            match table.solid_for(tag) {
                SolidBc::Free => {}
                SolidBc::SlipWall => {
                    for node in basis.side_nodes(tag) {
                        normals[node].push(side_normal[tag]);
                    }
                }
                SolidBc::NoSlipWall => {
                    for node in basis.side_nodes(tag) {
                        fixed[node] = true;
                    }
                }
            }
        }
        SolidConstraints { normals, fixed }
    }

    /// Zeroes wall-normal components (slip) and all components (no-slip).
    pub fn apply(&self, field: &mut [V2]) {
        for (i, v) in field.iter_mut().enumerate() {
            if self.fixed[i] {
                *v = V2::zeros();
            } else {
                for n in &self.normals[i] {
                    *v -= n * v.dot(n);
                }
            }
        }
    }
}
