//! Independent numerical cross-checks: finite-difference verification of the
//! analytic derivatives, quadrature audits of the mixture density, and a
//! random-walk Metropolis sampler to validate the Gaussian approximation
//! against the exact posterior.

use rand::Rng;

use crate::binning::BinLayout;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{bin_data, fit_bin_initial, JointObjective, SmoothingParams, BASE_RIDGE};
use crate::mixture::{mixture_mass, BinParams};
use crate::rng::{standard_normal, stream_rng};

/// Maximum relative error between the analytic gradient of the joint log
/// posterior and central finite differences at `point`.
///
/// Relative errors use a 1e−8 guard in the denominator, so components whose
/// true derivative sits at stationarity report the guard regime rather than
/// noise blow-up.
pub fn grad_check(objective: &JointObjective, point: &[f64], step: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(Error::config(format!(
            "finite-difference step {step} outside [1e-7, 1e-3]"
        )));
    }
    if point.len() != objective.dim() {
        return Err(Error::input(format!(
            "point has length {}, objective dimension is {}",
            point.len(),
            objective.dim()
        )));
    }
    let analytic = objective.gradient(point);
    let mut worst = 0.0f64;
    let mut v = point.to_vec();
    for k in 0..point.len() {
        let orig = v[k];
        v[k] = orig + step;
        let up = objective.log_posterior(&v);
        v[k] = orig - step;
        let down = objective.log_posterior(&v);
        v[k] = orig;
        let fd = (up - down) / (2.0 * step);
        let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Posterior sample summary from the random-walk sampler.
#[derive(Debug, Clone)]
pub struct McmcSummary {
    pub mean: Vec<f64>,
    /// Batch-means Monte Carlo standard error per component.
    pub mcse: Vec<f64>,
    /// Post-burn-in acceptance rate.
    pub acceptance: f64,
    pub samples: usize,
}

const MCSE_BATCHES: usize = 50;

/// Random-walk Metropolis with componentwise Gaussian proposal scales and a
/// global factor adapted during burn-in toward an acceptance rate in
/// [0.2, 0.5]. Post-adaptation acceptance outside [0.05, 0.8] is a
/// diagnostic failure.
pub fn rw_metropolis<F: Fn(&[f64]) -> f64>(
    target: F,
    init: &[f64],
    scales: &[f64],
    iters: usize,
    burn_in: usize,
    seed: u64,
) -> Result<McmcSummary> {
    let d = init.len();
    assert_eq!(scales.len(), d);
    if iters <= burn_in {
        return Err(Error::config("iters must exceed burn_in"));
    }
    let n_keep = iters - burn_in;
    if n_keep < MCSE_BATCHES {
        return Err(Error::config(format!(
            "need at least {MCSE_BATCHES} post-burn-in samples"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut x = init.to_vec();
    let mut log_px = target(&x);
    if !log_px.is_finite() {
        return Err(Error::numerical("target is not finite at the start point"));
    }
    let mut global = 1.0f64;
    let mut proposal = vec![0.0; d];
    let mut accepted_window = 0usize;
    let mut accepted_post = 0usize;

    let mut sum = vec![0.0f64; d];
    let batch = n_keep / MCSE_BATCHES;
    let kept_for_batches = batch * MCSE_BATCHES;
    let mut batch_acc = vec![0.0f64; d];
    let mut batch_means: Vec<Vec<f64>> = Vec::with_capacity(MCSE_BATCHES);

    for it in 0..iters {
        for k in 0..d {
            proposal[k] = x[k] + global * scales[k] * standard_normal(&mut rng);
        }
        let log_pp = target(&proposal);
        let accept = log_pp.is_finite() && {
            let log_u = rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
            log_u < log_pp - log_px
        };
        if accept {
            x.copy_from_slice(&proposal);
            log_px = log_pp;
            if it >= burn_in {
                accepted_post += 1;
            } else {
                accepted_window += 1;
            }
        }
        // Burn-in adaptation: nudge the global factor toward the band.
        if it < burn_in && (it + 1) % 100 == 0 {
            let rate = accepted_window as f64 / 100.0;
            if rate > 0.5 {
                global *= 1.3;
            } else if rate < 0.2 {
                global /= 1.3;
            }
            accepted_window = 0;
        }
        if it >= burn_in {
            let j = it - burn_in;
            for k in 0..d {
                sum[k] += x[k];
            }
            if j < kept_for_batches {
                for k in 0..d {
                    batch_acc[k] += x[k];
                }
                if (j + 1) % batch == 0 {
                    batch_means.push(batch_acc.iter().map(|s| s / batch as f64).collect());
                    batch_acc.iter_mut().for_each(|s| *s = 0.0);
                }
            }
        }
    }

    let acceptance = accepted_post as f64 / n_keep as f64;
    if !(0.05..=0.8).contains(&acceptance) {
        return Err(Error::numerical(format!(
            "post-adaptation acceptance rate {acceptance:.3} outside [0.05, 0.8]"
        )));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n_keep as f64).collect();
    let mut mcse = vec![0.0f64; d];
    for k in 0..d {
        let bmean: f64 = batch_means.iter().map(|b| b[k]).sum::<f64>() / MCSE_BATCHES as f64;
        let var: f64 = batch_means
            .iter()
            .map(|b| (b[k] - bmean) * (b[k] - bmean))
            .sum::<f64>()
            / (MCSE_BATCHES - 1) as f64;
        mcse[k] = (var / MCSE_BATCHES as f64).sqrt();
    }
    Ok(McmcSummary {
        mean,
        mcse,
        acceptance,
        samples: n_keep,
    })
}

/// Sample the ridge-augmented joint posterior for a dataset and layout.
///
/// The chain starts at the stage-one initialization (also the ridge anchor,
/// matching the fitting objective) with proposal scales from the per-bin
/// likelihood curvature there.
pub fn mcmc_sample(
    dataset: &Dataset,
    layout: &BinLayout,
    lambdas: Option<SmoothingParams>,
    iters: usize,
    burn_in: usize,
    seed: u64,
) -> Result<McmcSummary> {
    let bins = bin_data(dataset, layout);
    let mut init = Vec::with_capacity(3 * bins.len());
    let mut scales = Vec::with_capacity(3 * bins.len());
    let mut warm = None;
    for data in &bins {
        let res = fit_bin_initial(data, warm);
        warm = Some(res.params);
        init.extend(res.params.as_array());
        let (_, _, h) = crate::mixture::bin_ll_grad_hess(data, &res.params);
        for k in 0..3 {
            scales.push(1.0 / (-h[k][k]).max(1.0).sqrt());
        }
    }
    let objective = JointObjective::new(&bins, lambdas, BASE_RIDGE, init.clone());
    rw_metropolis(
        |v| objective.log_posterior(v),
        &init,
        &scales,
        iters,
        burn_in,
        seed,
    )
}

/// Worst absolute deviation of ∫₀¹ f from 1 over random valid parameters.
#[derive(Debug, Clone, Copy)]
pub struct AuditResult {
    pub worst_deviation: f64,
    pub worst_params: BinParams,
}

/// Quadrature audit of the mixture density's unit mass.
pub fn normalization_audit(n_cases: usize, seed: u64) -> AuditResult {
    let mut rng = stream_rng(seed, 0);
    let mut worst = AuditResult {
        worst_deviation: 0.0,
        worst_params: BinParams {
            pi0: 0.5,
            xi: 0.5,
            theta: 3.0,
        },
    };
    for _ in 0..n_cases {
        let params = BinParams {
            pi0: 0.01 + 0.98 * rng.random::<f64>(),
            xi: 0.02 + 0.98 * rng.random::<f64>(),
            theta: 2.0 + 30.0 * rng.random::<f64>(),
        };
        let dev = (mixture_mass(&params) - 1.0).abs();
        if dev > worst.worst_deviation {
            worst = AuditResult {
                worst_deviation: dev,
                worst_params: params,
            };
        }
    }
    worst
}

/// Random point near `center` for derivative checks: a constant shift per
/// parameter chain plus small per-component jitter.
///
/// Estimated smoothing precisions can sit at their cap, where independent
/// per-component perturbations blow the penalty term (and with it the
/// cancellation noise floor of finite differences) up by orders of magnitude.
/// Chain-respecting shifts leave the penalty small while still exercising
/// every term of the gradient.
pub fn perturb_chainwise<R: Rng>(center: &[f64], rng: &mut R) -> Vec<f64> {
    let shifts: [f64; 3] = std::array::from_fn(|_| 0.4 * (rng.random::<f64>() - 0.5));
    center
        .iter()
        .enumerate()
        .map(|(i, c)| c + shifts[i % 3] + 0.04 * (rng.random::<f64>() - 0.5))
        .collect()
}

/// Random check point where every gradient component clears the
/// finite-difference noise floor (|gₖ| ≥ 1e−2).
///
/// Components at near-stationarity cannot be resolved to 1e−5 relative by
/// central differences in f64 no matter the step (the truncation/rounding
/// cross-over sits around 3e−8 absolute), so derivative verification uses
/// well-conditioned points; a genuinely wrong analytic term still surfaces
/// there as an O(1) discrepancy.
pub fn well_conditioned_point<R: Rng>(
    objective: &JointObjective,
    center: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    for _ in 0..200 {
        let point = perturb_chainwise(center, rng);
        let g = objective.gradient(&point);
        if g.iter().all(|v| v.abs() >= 1e-2) {
            return Ok(point);
        }
    }
    Err(Error::numerical(
        "could not find a well-conditioned derivative check point",
    ))
}

/// One named check in the validation report.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

/// Aggregate validation report (printed by the CLI).
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("validation report (seed {})\n", self.seed));
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {}: worst {:.3e} vs threshold {:.1e}; {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.worst,
                c.threshold,
                c.detail
            ));
        }
        out
    }
}

/// Run the full validation battery on synthetic data derived from `seed`.
pub fn run_validation(seed: u64) -> Result<ValidationReport> {
    use crate::sim::{simulate_stream, SimConfig};

    let mut checks = Vec::new();

    // Synthetic dataset shared by the derivative and MCMC checks.
    let config = SimConfig {
        m: 2000,
        pibar0: 0.5,
        pi0_at_0: 0.75,
        pi0_at_1: 0.25,
        mu: 2.0,
        bins: 5,
        c: 1.0,
        seed,
    };
    let (dataset, _) = simulate_stream(&config, 0)?;
    let layout = crate::binning::quantile_bins(&dataset, config.bins, None, 50)?;
    let bins = bin_data(&dataset, &layout);
    let mut warm = None;
    let mut init = Vec::new();
    let mut inits = Vec::new();
    for data in &bins {
        let res = fit_bin_initial(data, warm);
        warm = Some(res.params);
        init.extend(res.params.as_array());
        inits.push(res.params);
    }
    let lambdas = crate::fit::estimate_lambdas(&inits, config.c)?;
    let objective = JointObjective::new(&bins, Some(lambdas), BASE_RIDGE, init.clone());

    // Gradient vs central differences at 20 random points.
    let mut rng = stream_rng(seed, 101);
    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let point = well_conditioned_point(&objective, &init, &mut rng)?;
        worst_grad = worst_grad.max(grad_check(&objective, &point, 1e-5)?);
    }
    checks.push(CheckResult {
        name: "joint gradient vs finite differences".into(),
        passed: worst_grad <= 1e-5,
        worst: worst_grad,
        threshold: 1e-5,
        detail: "20 well-conditioned random points, step 1e-5".into(),
    });

    // Density normalization audit.
    let audit = normalization_audit(100, seed ^ 0x5eed);
    checks.push(CheckResult {
        name: "mixture density unit mass".into(),
        passed: audit.worst_deviation <= 1e-6,
        worst: audit.worst_deviation,
        threshold: 1e-6,
        detail: format!(
            "100 random parameter triples; worst at pi0={:.4}, xi={:.4}, theta={:.4}",
            audit.worst_params.pi0, audit.worst_params.xi, audit.worst_params.theta
        ),
    });

    // Gaussian approximation vs MCMC on the π̃0 components.
    let fit = crate::fit::fit_joint(&dataset, &layout, config.c)?;
    let mcmc = mcmc_sample(
        &dataset,
        &layout,
        fit.lambdas,
        50_000,
        10_000,
        seed ^ 0x6d63,
    )?;
    let mut worst_ratio = 0.0f64;
    let mut worst_abs = 0.0f64;
    for j in 0..config.bins {
        let k = 3 * j;
        let diff = (fit.mode[k] - mcmc.mean[k]).abs();
        let allowed = (3.0 * mcmc.mcse[k]).max(0.05);
        worst_ratio = worst_ratio.max(diff / allowed);
        worst_abs = worst_abs.max(diff);
    }
    checks.push(CheckResult {
        name: "Gaussian approximation vs MCMC".into(),
        passed: worst_ratio <= 1.0,
        worst: worst_abs,
        threshold: 0.05,
        detail: format!(
            "pi0-chain means, 50000 iterations, acceptance {:.2}; worst diff/allowance {:.3}",
            mcmc.acceptance, worst_ratio
        ),
    });

    Ok(ValidationReport { seed, checks })
}
