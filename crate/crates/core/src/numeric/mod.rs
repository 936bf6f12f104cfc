//! Numerical building blocks: quadrature, convex Newton, simplex search.

pub mod newton;
pub mod quadrature;
pub mod simplex;

pub use newton::{minimize as newton_minimize, NewtonOptions, NewtonOutcome, SmoothObjective};
pub use quadrature::{integrate, Tolerance};
pub use simplex::{nelder_mead, SimplexOptions, SimplexOutcome};
