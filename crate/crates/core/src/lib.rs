//! Simulation and numerics for linear Hawkes processes with unbounded memory.
//!
//! Paths are built from the Poisson cluster decomposition: immigrants arrive
//! at rate `λ` and each one seeds a Galton–Watson cluster whose offspring
//! delays are drawn from the normalised transfer function. Because every
//! event carries its genealogy, the A-regeneration times of a path can be
//! read off exactly as the ends of busy periods of an M/G/∞ queue with
//! service `L + A`, where `L` is the cluster length.
//!
//! The crate is organised as
//!
//! * [`transfer`]: kernels `h`, their integrals, `θ*` and delay samplers;
//! * [`simulate`]: clusters and full paths with genealogy;
//! * [`regen`]: busy-period sweep, regeneration times and cycles;
//! * [`queue`]: Takács transforms and moments, Kummer series, domination bounds;
//! * [`estimators`]: sliding-window functionals and the pair statistic;
//! * [`concentration`]: the explicit deviation bound and its inverse;
//! * [`validate`]: the Monte Carlo harness that checks formulas against simulation.
//!
//! Replicated work (Monte Carlo batches, parameter sweeps) is spread over a
//! rayon pool when the `parallel` feature is on, and runs sequentially
//! otherwise. Results are bit-identical either way: every chunk owns the
//! random stream `seed ^ chunk_index`.

pub mod concentration;
pub mod estimators;
pub mod par;
pub mod queue;
pub mod regen;
pub mod simulate;
pub mod stats;
pub mod transfer;
pub mod validate;

pub use concentration::{ConcentrationInput, ConcentrationMode};
pub use estimators::{PairKernelW, WindowFunctional};
pub use queue::{LaplaceResult, ServiceCdf, ServiceKind};
pub use regen::{Cycle, RegenReport};
pub use simulate::{Cluster, Event, Origin, PathRecord};
pub use transfer::TransferFunction;

use rand::SeedableRng;

/// Random stream used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Stream `index` derived from a master seed (`seed ^ index`).
pub fn stream(seed: u64, index: u64) -> Rng {
    Rng::seed_from_u64(seed ^ index)
}
