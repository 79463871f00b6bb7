//! Two-phase fluid-sediment mixture solver coupling a material point method
//! (solid phase, background FE grid) with a finite volume method (compressible
//! fluid phase, overlapping FV grid). The phases interact through porosity,
//! buoyancy, and drag.

pub mod bcs;
pub mod basis;
pub mod coupling;
pub mod error;
pub mod fluid;
pub mod integrator;
pub mod mapping;
pub mod math;
pub mod mesh;
pub mod scenario;
pub mod snapshot;
pub mod solid;
pub mod validation;

pub use error::{Error, Result};
pub use math::{M2, V2};
