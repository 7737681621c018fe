//! Physics-prior state estimation from noisy pose observations.

pub mod dynamics;
mod fusion;
mod metrics;
mod observe;
mod track;

pub use fusion::*;
pub use metrics::*;
pub use observe::*;
pub use track::*;
