//! Numerical laboratory for non-commutative `L_p` spaces with `0 < p <= infinity`
//! on finite matrix models.

pub mod error;
pub mod extrapolation;
pub mod holder;
pub mod linalg;
pub mod lp;
pub mod maurey;
pub mod mazur;
pub mod optim;
pub mod random_systems;
pub mod report;
pub mod sampling;
pub mod triple_norm;

pub use error::{Error, Result};
pub use linalg::CMat;
pub use lp::{chi, polar, power, Density, TraceSpace};
