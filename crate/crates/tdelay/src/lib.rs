//! Monte Carlo sampling and exact oracles for time-delay statistics of chaotic
//! cavities coupled to `N` channels.

pub mod axis;
pub mod coupling;
pub mod charfunc;
pub mod ddouble;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod observables;
pub mod oracles;
pub mod parallel;
pub mod quad;
pub mod rng;
pub mod series;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
