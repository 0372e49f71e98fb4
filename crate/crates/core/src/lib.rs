//! Numerical laboratory for tied-down renewal theory.
//!
//! * [`stable`]: the one-sided stable law `Z_γ`, the Mittag-Leffler law `Y_γ`
//!   and the size-biased law `W_γ`.
//! * [`regvar`]: power-law return sequences, the rate `u(n) = γa(n)/n`, the
//!   grid `x_{k,n} = n/a⁻¹(k)` and the weighted-sum limit built on it.
//! * [`renewal`]: lattice and continuous heavy-tailed renewal processes, the
//!   exact convolution table and the renewal-theorem checks built on it.
//! * [`maps`]: the intermittent maps `T_γ` and `R_γ`, their first-return map
//!   on `[1/2, 1]`, Ulam discretizations and occupation-time statistics.
//! * [`walk`]: local time at zero of the lazy simple random walk and its bridge.

pub mod error;
pub mod maps;
pub mod observable;
pub mod quad;
pub mod regvar;
pub mod renewal;
pub mod rng;
pub mod special;
pub mod stable;
pub mod stats;
pub mod sum;
pub mod walk;

pub use error::{LabError, Result};
pub use observable::{Observable, TestFunction};
pub use regvar::RegVarying;
pub use stable::StableFamily;
