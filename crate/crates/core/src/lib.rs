//! Mixing of the simple exclusion process on the complete graph.
//!
//! The crate is organised around the objects a mixing-time analysis needs:
//!
//! * [`exclusion`]: the full configuration chain, labeled and unlabeled, and
//!   an exhaustive small-`n` oracle;
//! * [`lumped`]: the exact birth-and-death chain followed by `W`;
//! * [`coupling`]: the monotone coupling of two `W` replicas and the random
//!   walk that dominates their merge time;
//! * [`bounds`]: coupon-collector lower bounds for both processes;
//! * [`walk`]: survival of a lazy symmetric walk, exact and simulated.

pub mod bounds;
pub mod coupling;
pub mod error;
pub mod exclusion;
pub mod lumped;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
pub use exclusion::{Configuration, Mode, ModelParams, PairSelection};
pub use lumped::{BirthDeathKernel, DistributionVector, MixTime, MixingProfile};
pub use rng::{StreamFactory, StreamRng};
