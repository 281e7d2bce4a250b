//! Simulation harness: a parametric covariate-modulation curve with
//! calibrated steepness, a seeded generator of null/alternative test
//! statistics, the exact posterior oracle for that generator, and replicate
//! quantile summaries of estimated posterior curves.
//!
//! The generator draws, per test, a covariate x ~ Unif[0,1], a null indicator
//! with P(null) = π0(x), and z ~ N(0,1) under the null or N(μ,1) otherwise;
//! the p-value is the upper tail 1 − Φ(z). The modulation curve is
//!
//! `π0(x) = exp(−α − (β − α) x^γ)`
//!
//! with α = −log π0(0) and β = −log π0(1), and γ calibrated so the curve's
//! mean over [0,1] hits a target π̄0.
//!
//! Under this generator the alternative p-value density is
//! φ(Φ⁻¹(1−p) − μ)/φ(Φ⁻¹(1−p)), so Bayes' rule gives the exact posterior
//! probability of the null in closed form; see [`Pi0Curve::true_posterior`].

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;

use crate::binning::{quantile_bins, DEFAULT_MIN_BIN_SIZE};
use crate::data::{clip_p, z_to_p, Dataset, NullDist, TestRecord};
use crate::error::{Error, Result};
use crate::fit::fit_joint;
use crate::mixture::PreparedBin;
use crate::quad::adaptive_simpson;
use crate::report::fit_one_bin;
use crate::rng::{standard_normal, stream_rng};
use crate::special::normal_quantile;

/// Simulation protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Tests per dataset.
    pub m: usize,
    /// Target mean of π0(x) over [0, 1].
    pub pibar0: f64,
    /// π0(0), the curve value at the low end of the covariate.
    pub pi0_at_0: f64,
    /// π0(1).
    pub pi0_at_1: f64,
    /// Mean of the alternative z distribution.
    pub mu: f64,
    /// Bins for the covariate-modulated analysis.
    pub bins: usize,
    /// Smoothing scale c.
    pub c: f64,
    /// Base seed; replicate r draws from stream r.
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("m must be positive"));
        }
        for (name, v) in [
            ("pibar0", self.pibar0),
            ("pi0_at_0", self.pi0_at_0),
            ("pi0_at_1", self.pi0_at_1),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} = {v} outside (0,1)")));
            }
        }
        if self.pi0_at_0 <= self.pi0_at_1 {
            return Err(Error::config(
                "the modulation curve must be decreasing: pi0_at_0 > pi0_at_1",
            ));
        }
        if self.pibar0 <= self.pi0_at_1 || self.pibar0 >= self.pi0_at_0 {
            return Err(Error::config(format!(
                "pibar0 = {} must lie strictly between pi0(1) = {} and pi0(0) = {}",
                self.pibar0, self.pi0_at_1, self.pi0_at_0
            )));
        }
        if self.bins == 0 {
            return Err(Error::config("bins must be positive"));
        }
        if !(self.c > 0.0) {
            return Err(Error::config("smoothing scale must be positive"));
        }
        Ok(())
    }

    /// Calibrated modulation curve for this configuration.
    pub fn curve(&self) -> Result<Pi0Curve> {
        self.validate()?;
        let alpha = -self.pi0_at_0.ln();
        let beta = -self.pi0_at_1.ln();
        let gamma = solve_gamma(self.pibar0, self.pi0_at_0, self.pi0_at_1)?;
        Ok(Pi0Curve { alpha, beta, gamma })
    }
}

/// The parametric covariate-modulation curve π0(x) = exp(−α − (β−α) x^γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi0Curve {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Pi0Curve {
    pub fn eval(&self, x: f64) -> f64 {
        pi0_curve(x, self.alpha, self.beta, self.gamma)
    }

    /// Exact posterior probability of the null for this generator:
    /// with z = Φ⁻¹(1−p),
    /// `P(H0 | p, x) = π0(x) φ(z) / (π0(x) φ(z) + (1 − π0(x)) φ(z − μ))`,
    /// computed through the likelihood ratio e^(μz − μ²/2).
    pub fn true_posterior(&self, p: f64, x: f64, mu: f64) -> f64 {
        let pi0 = self.eval(x);
        let z = -normal_quantile(p); // Φ⁻¹(1−p) without forming 1−p
        let log_ratio = mu * z - 0.5 * mu * mu;
        let ratio = ((1.0 - pi0) / pi0) * log_ratio.exp();
        1.0 / (1.0 + ratio)
    }
}

/// π0(x) = exp(−α − (β−α) x^γ); decreasing in x exactly when α > β.
pub fn pi0_curve(x: f64, alpha: f64, beta: f64, gamma: f64) -> f64 {
    (-alpha - (beta - alpha) * x.powf(gamma)).exp()
}

/// Mean of the curve over [0, 1] by adaptive quadrature.
pub fn curve_mean(alpha: f64, beta: f64, gamma: f64) -> f64 {
    adaptive_simpson(&|x: f64| pi0_curve(x, alpha, beta, gamma), 0.0, 1.0, 1e-10)
}

/// Solve for the γ making ∫₀¹ π0(x) dx equal `pibar0`, by bisection on
/// log γ over [log 1e−3, log 1e3].
///
/// The integral decreases from π0(0) (γ → ∞) to π0(1) (γ → 0) for a
/// decreasing curve, so a target strictly between the endpoints has a unique
/// solution; the residual is driven below 1e−8.
pub fn solve_gamma(pibar0: f64, pi0_at_0: f64, pi0_at_1: f64) -> Result<f64> {
    if pi0_at_0 == pi0_at_1 {
        return Err(Error::config(
            "equal curve endpoints leave gamma undetermined",
        ));
    }
    let (lo_end, hi_end) = if pi0_at_0 > pi0_at_1 {
        (pi0_at_1, pi0_at_0)
    } else {
        (pi0_at_0, pi0_at_1)
    };
    if pibar0 <= lo_end || pibar0 >= hi_end {
        return Err(Error::config(format!(
            "target mean {pibar0} is not strictly between the endpoints ({lo_end}, {hi_end})"
        )));
    }
    let alpha = -pi0_at_0.ln();
    let beta = -pi0_at_1.ln();
    let mean_at = |lg: f64| curve_mean(alpha, beta, lg.exp());
    let (mut lg_lo, mut lg_hi) = (1e-3f64.ln(), 1e3f64.ln());
    let (m_lo, m_hi) = (mean_at(lg_lo), mean_at(lg_hi));
    // Orient the bracket so the mean increases from lg_lo to lg_hi.
    let increasing = m_hi > m_lo;
    let (bot, top) = if increasing {
        (m_lo, m_hi)
    } else {
        (m_hi, m_lo)
    };
    if pibar0 <= bot || pibar0 >= top {
        return Err(Error::config(format!(
            "target mean {pibar0} unreachable within gamma in [1e-3, 1e3]: \
             attainable range ({bot:.9}, {top:.9})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lg_lo + lg_hi);
        let v = mean_at(mid);
        if (v > pibar0) == increasing {
            lg_hi = mid;
        } else {
            lg_lo = mid;
        }
        if lg_hi - lg_lo < 1e-14 {
            break;
        }
    }
    let gamma = (0.5 * (lg_lo + lg_hi)).exp();
    let residual = (curve_mean(alpha, beta, gamma) - pibar0).abs();
    if residual > 1e-8 {
        return Err(Error::numerical(format!(
            "gamma calibration residual {residual:.3e} above 1e-8"
        )));
    }
    Ok(gamma)
}

/// Ground truth retained alongside a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    /// Per-test null indicator.
    pub null: Vec<bool>,
    /// Per-test exact posterior probability of the null.
    pub true_posterior: Vec<f64>,
}

/// Simulate one dataset from RNG stream `stream` of the base seed.
pub fn simulate_stream(config: &SimConfig, stream: u64) -> Result<(Dataset, SimTruth)> {
    let curve = config.curve()?;
    let mut rng = stream_rng(config.seed, stream);
    let mut records = Vec::with_capacity(config.m);
    let mut null = Vec::with_capacity(config.m);
    let mut posterior = Vec::with_capacity(config.m);
    for i in 0..config.m {
        let x: f64 = rng.random();
        let is_null = rng.random::<f64>() < curve.eval(x);
        let z = standard_normal(&mut rng) + if is_null { 0.0 } else { config.mu };
        let p = clip_p(z_to_p(z, NullDist::StandardNormal)?);
        null.push(is_null);
        posterior.push(curve.true_posterior(p, x, config.mu));
        records.push(TestRecord {
            id: format!("t{:07}", i + 1),
            p,
            x,
            z: Some(z),
        });
    }
    Ok((
        Dataset::new(records)?,
        SimTruth {
            null,
            true_posterior: posterior,
        },
    ))
}

/// Simulate the dataset for stream 0 (the single-dataset entry point).
pub fn simulate(config: &SimConfig) -> Result<(Dataset, SimTruth)> {
    simulate_stream(config, 0)
}

/// Exact posterior probability of the null under the generator.
pub fn true_posterior(p: f64, x: f64, config: &SimConfig) -> Result<f64> {
    Ok(config.curve()?.true_posterior(p, x, config.mu))
}

/// Pointwise quantile curves across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurves {
    pub q05: Vec<f64>,
    pub median: Vec<f64>,
    pub q95: Vec<f64>,
}

/// Replicate summary for one bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    /// 1-based bin index.
    pub bin: usize,
    /// Covariate midpoint (j − ½)/B of the bin under the uniform covariate.
    pub x_mid: f64,
    /// Exact posterior curve at `x_mid` on the grid.
    pub truth: Vec<f64>,
    /// Covariate-modulated (B-bin) estimates.
    pub covariate: QuantileCurves,
    /// No-covariate (one-bin) estimates.
    pub onebin: QuantileCurves,
}

/// Output of [`replicate_summary`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub config: SimConfig,
    pub gamma: f64,
    pub replicates: usize,
    pub failures: usize,
    /// Evaluation grid: 101 p-values spanning [0.001, 0.1].
    pub grid: Vec<f64>,
    pub bins: Vec<BinSummary>,
}

/// The fixed evaluation grid.
pub fn posterior_grid() -> Vec<f64> {
    (0..101)
        .map(|i| 0.001 + (0.1 - 0.001) * i as f64 / 100.0)
        .collect()
}

struct ReplicateCurves {
    /// `[bin][grid]` estimates from the B-bin fit.
    covariate: Vec<Vec<f64>>,
    /// `[grid]` estimates from the one-bin fit (bin independent).
    onebin: Vec<f64>,
}

fn run_replicate(config: &SimConfig, stream: u64, grid: &[f64]) -> Result<ReplicateCurves> {
    let (dataset, _) = simulate_stream(config, stream)?;
    let min_bin = DEFAULT_MIN_BIN_SIZE
        .min(config.m / (2 * config.bins).max(1))
        .max(1);
    let layout = quantile_bins(&dataset, config.bins, None, min_bin)?;
    let fit = fit_joint(&dataset, &layout, config.c)?;
    let onebin_fit = fit_one_bin(&dataset)?;

    let mut covariate = Vec::with_capacity(config.bins);
    for j in 1..=config.bins {
        let prep = PreparedBin::new(&fit.bin_mode(j));
        covariate.push(
            grid.iter()
                .map(|&p| prep.posterior_point(p.ln(), (-p).ln_1p()).0)
                .collect(),
        );
    }
    let prep1 = PreparedBin::new(&onebin_fit.bin_mode(1));
    let onebin = grid
        .iter()
        .map(|&p| prep1.posterior_point(p.ln(), (-p).ln_1p()).0)
        .collect();
    Ok(ReplicateCurves { covariate, onebin })
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub(crate) fn pointwise_quantiles(values_per_replicate: &[Vec<f64>]) -> QuantileCurves {
    let g = values_per_replicate[0].len();
    let mut q05 = Vec::with_capacity(g);
    let mut median = Vec::with_capacity(g);
    let mut q95 = Vec::with_capacity(g);
    for k in 0..g {
        let mut vals: Vec<f64> = values_per_replicate.iter().map(|v| v[k]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        q05.push(quantile_sorted(&vals, 0.05));
        median.push(quantile_sorted(&vals, 0.5));
        q95.push(quantile_sorted(&vals, 0.95));
    }
    QuantileCurves { q05, median, q95 }
}

/// Run `replicates` simulated fits (streams 1..=R) and summarize the
/// estimated posterior curves pointwise across replicates.
///
/// Replicates whose fit fails are excluded and counted in `failures`.
/// Worker threads (up to `jobs`) pull replicate indices from a shared
/// counter; stream seeding keeps the output independent of scheduling.
pub fn replicate_summary(
    config: &SimConfig,
    replicates: usize,
    jobs: usize,
) -> Result<ReplicateSummary> {
    if replicates == 0 {
        return Err(Error::config("replicate count must be positive"));
    }
    let curve = config.curve()?;
    let grid = posterior_grid();

    let jobs = jobs.max(1).min(replicates);
    let slots: Mutex<Vec<Option<Result<ReplicateCurves>>>> =
        Mutex::new((0..replicates).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::Relaxed);
                if r >= replicates {
                    break;
                }
                let res = run_replicate(config, (r + 1) as u64, &grid);
                slots.lock().unwrap()[r] = Some(res);
            });
        }
    });

    let mut curves = Vec::with_capacity(replicates);
    let mut failures = 0usize;
    for slot in slots.into_inner().unwrap() {
        match slot.expect("replicate slot filled") {
            Ok(c) => curves.push(c),
            Err(_) => failures += 1,
        }
    }
    if curves.is_empty() {
        return Err(Error::numerical(format!(
            "all {replicates} replicate fits failed"
        )));
    }

    let mut bins = Vec::with_capacity(config.bins);
    for j in 1..=config.bins {
        let x_mid = (j as f64 - 0.5) / config.bins as f64;
        let truth = grid
            .iter()
            .map(|&p| curve.true_posterior(p, x_mid, config.mu))
            .collect();
        let cov_vals: Vec<Vec<f64>> = curves.iter().map(|c| c.covariate[j - 1].clone()).collect();
        let one_vals: Vec<Vec<f64>> = curves.iter().map(|c| c.onebin.clone()).collect();
        bins.push(BinSummary {
            bin: j,
            x_mid,
            truth,
            covariate: pointwise_quantiles(&cov_vals),
            onebin: pointwise_quantiles(&one_vals),
        });
    }

    Ok(ReplicateSummary {
        config: *config,
        gamma: curve.gamma,
        replicates,
        failures,
        grid,
        bins,
    })
}
