//! Robust aggregation bounds for averaged-quantile risk functionals under
//! dependence uncertainty, coupling oracles that certify them, and exact
//! risk sharing for averaged-quantile preferences.

pub mod bounds;
pub mod cli;
pub mod dist;
pub mod error;
pub mod oracle;
pub mod sharing;
mod quad;
pub mod simplex;

pub use dist::{
    avg_quantile, iqd, rvar, DensityDirection, Distribution, Family, IntervalSet, IqdVariant, TailDeclaration,
    TailMonotonicity,
};
pub use error::{Error, Result};
