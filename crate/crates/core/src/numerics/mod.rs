//! Numerical kernels shared by the PDE, shooting and asymptotics modules.

pub mod banded;
pub mod lstsq;
pub mod rk;
pub mod roots;
pub mod stiff;

pub use banded::{BandLu, BandMatrix};
pub use lstsq::{linear_least_squares, FitResult};
pub use rk::{integrate_adaptive, Direction, EventRecord, EventSpec, IvpProblem, Solution, Tolerances};
pub use roots::{bracket_root, Root};
pub use stiff::{integrate_stiff, BandedSystem, Control, StiffOptions, StiffSolution};
