//! Dunkl processes: symbolic operator calculus, intertwining operator,
//! transition densities, path simulation and chaos expansions.

pub mod chaos;
pub mod density;
pub mod dunkl;
pub mod error;
pub mod field;
pub mod intertwine;
pub mod linalg;
pub mod pathsim;
pub mod poly;
pub mod rng;
pub mod rootsys;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use field::{Coeff, QSqrt2};
pub use poly::{Monomial, Polynomial};
pub use rootsys::{RootSystem, RootSystemKind};
