//! Spectral estimation of Rasch item difficulties, with differentially
//! private variants.
//!
//! The estimator turns binary response data into pairwise differential
//! counts, builds a random walk over items from them, and reads the item
//! parameters off the walk's stationary distribution. Privacy is obtained
//! either by adding discrete Gaussian or discrete Laplace noise to the counts
//! (optionally on a sparse Erdős–Rényi subset of item pairs) or by randomized
//! response on the raw answers, optionally amplified by shuffling.
//!
//! See `examples/` for one runnable program per capability:
//!
//! ```bash
//! cargo run --release --example private_estimation
//! ```

#![warn(rust_2018_idioms)]

pub mod accounting;
pub mod error;
pub mod mechanisms;
pub mod metrics;
pub mod response;
pub mod rng;
pub mod samplers;
pub mod spectral;
pub mod sweep;

pub use accounting::{
    cdp_to_approx_dp, gaussian_plan, laplace_plan, rr_per_response_epsilon,
    shuffle_effective_epsilon, CdpBudget, MechanismKind, NoisePlan, P0Preset, PrivacyBudget,
};
pub use error::{Error, Result};
pub use mechanisms::{
    private_spectral_estimate, randomized_response, run_mechanism, sample_er_graph,
    shuffle_users, MechanismConfig, PrivateEstimate, SubsampleGraph,
};
pub use metrics::{delta_k, l2_error, linf_error, top_k_select};
pub use response::{
    generate_synthetic, load_responses, rasch_response_probability, save_responses,
    AbilityParams, ItemParams, Response, ResponseMatrix, SamplingSpec,
};
pub use rng::RngStream;
pub use samplers::{bernoulli_exp, sample_discrete_gaussian, sample_discrete_laplace, NoiseScale};
pub use spectral::{
    compute_differentials, construct_chain, idealized_chain, spectral_estimate, stationary,
    DifferentialMatrix, MarkovChain, StationaryDistribution, StationaryOptions,
};
pub use sweep::{run_sweep, write_results_csv, ResultRow, SweepConfig, SweepMechanism};
