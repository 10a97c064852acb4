//! Hidden Markov models with several observation processes.
//!
//! The general model ([`hmm`]) carries the information-state filter and a
//! simulator. The two-state, two-process case ([`special`]) has closed
//! forms, from which [`entropy`] computes the limiting expected entropy of
//! a policy with a certified error bound, and [`search`], [`local`] and
//! [`greedy`] look for good policies. [`sweep`] runs all of it over a
//! parameter grid.

pub mod entropy;
pub mod error;
pub mod greedy;
pub mod hmm;
pub mod local;
pub mod measure;
pub mod orbit;
pub mod policy;
pub mod search;
pub mod simulate;
pub mod special;
pub mod sweep;

pub use entropy::{
    bound_params, estimate_entropy, estimate_entropy_to_tolerance, threshold_uniform_n, BoundParams, EntropyEstimate,
    PeriodicMode,
};
pub use error::{Error, Result};
pub use greedy::greedy_policy;
pub use hmm::{AnchorPair, GeneralModel, InfoState};
pub use local::local_search;
pub use measure::{evolve_measure, invariant_measure, DiscreteMeasure};
pub use orbit::{combined_alpha, combined_r, orbit_table, OrbitTable};
pub use policy::{Cut, Orientation, Policy, PolicySpec, TabularPolicy, ThresholdPolicy, TruncatedPolicy};
pub use search::{classify_region, find_optimal_threshold, find_optimal_threshold_descent, RegionLabel, SearchResult};
pub use simulate::{filter, simulate, SimulationTrace};
pub use special::{entropy as binary_entropy, FixedPoints, SpecialModel};
pub use sweep::{run_sweep, summarize, SummaryStats, SweepConfig, SweepRow};
