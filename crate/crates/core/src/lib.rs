//! Two-species cell invasion: PDE simulation, front-speed fitting,
//! travelling-wave shooting and large death-rate asymptotics.
//!
//! The model is
//!
//! ```text
//! u_t = ((1 - v) u_x)_x + u (1 - u - v)
//! v_t = -gamma u v
//! ```
//!
//! with `u` the invading and `v` the resident population.

pub mod asym;
pub mod error;
pub mod io;
pub mod model;
pub mod numerics;
pub mod pde;
pub mod speedfit;
pub mod tw;

pub use error::{Error, Result};
pub use model::ModelParams;
