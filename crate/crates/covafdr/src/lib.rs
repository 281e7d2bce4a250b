// Numerical code: constants are written at full precision, matrix kernels use
// indexed loops, and `!(x > 0.0)`-style comparisons deliberately catch NaN.
#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_is_multiple_of)]

//! Covariate-modulated empirical Bayes multiple testing.
//!
//! Given a p-value and an external covariate per hypothesis test, this crate
//! estimates the posterior probability that each null hypothesis is true,
//! conditionally on both. Tests are binned by the covariate; each bin gets a
//! uniform-beta mixture p-value density whose parameters are smoothed across
//! neighboring bins with first-difference Gaussian priors; the joint
//! posterior is maximized by Newton-Raphson on a banded Hessian and
//! approximated as Gaussian at the mode. Per-test posterior probabilities
//! π0ⱼ/fⱼ(p) come with delta-method credible intervals, and a one-bin
//! (no-covariate) baseline supports significance and rank comparisons.
//!
//! ## Modules
//!
//! - [`data`] — test records, z → p conversion, tabular ingestion
//! - [`binning`] — zero-sentinel plus equal-count covariate bins
//! - [`mixture`] — the per-bin uniform-beta density and its derivatives
//! - [`fit`] — two-stage Newton fit with smoothing priors and the Gaussian
//!   approximation
//! - [`report`] — posterior scores, intervals, baselines, rank and
//!   significance comparisons, threshold curves
//! - [`sim`] — the simulation protocol with an exact posterior oracle and
//!   replicate quantile summaries
//! - [`validate`] — finite-difference, quadrature, and MCMC cross-checks
//! - [`artifact`] — text file formats (fit artifact, scores, summaries,
//!   figure data)
//! - [`cli`] — the `covafdr` command-line pipeline
//!
//! ## Runnable examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example fit_simulated
//! cargo run --release --example one_bin_baseline
//! cargo run --release --example score_and_rank
//! cargo run --release --example threshold_curves
//! cargo run --release --example replicate_study
//! cargo run --release --example mcmc_crosscheck
//! cargo run --release --example derivative_audit
//! ```

pub mod artifact;
pub mod banded;
pub mod binning;
pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod mixture;
pub mod quad;
pub mod report;
pub mod rng;
pub mod sim;
pub mod special;
pub mod validate;

pub use binning::{assign_bin, quantile_bins, BinLayout};
pub use data::{parse_dataset, z_to_p, Dataset, NullDist, TestRecord};
pub use error::{Error, Result};
pub use fit::{estimate_lambdas, fit_joint, ModelFit, SmoothingParams};
pub use mixture::{mix_density, BinParams, TransformedParams};
pub use report::{
    call_significant, fit_one_bin, posterior_prob, rank_compare, score_all, storey_pi0,
    threshold_curve, PosteriorScore,
};
pub use sim::{pi0_curve, replicate_summary, simulate, solve_gamma, true_posterior, SimConfig};
