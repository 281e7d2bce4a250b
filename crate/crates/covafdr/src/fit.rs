//! Joint model fitting: per-bin warm-started initial fits, smoothing-parameter
//! estimation, Newton-Raphson maximization of the joint log posterior with a
//! banded Hessian, and the Gaussian approximation at the mode.
//!
//! The parameter vector is bin-major: `(π̃0₁, ξ̃₁, θ̃₁, π̃0₂, …)`, length 3B.
//! First-difference Gaussian priors with precisions (λ₁, λ₂, λ₃) couple each
//! parameter chain across neighboring bins, so the negative Hessian has
//! half-bandwidth 3. A small ridge anchored at the stage-one initialization
//! keeps the posterior proper (the difference priors are translation
//! invariant, and nearly-pure-null bins leave the beta shape weakly
//! identified); it escalates tenfold on factorization failure.

use crate::banded::SymBanded;
use crate::binning::BinLayout;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mixture::{
    bin_ll_grad_hess, bin_log_likelihood, to_natural, BinData, BinParams, TransformedParams,
};

/// Upper cap on estimated smoothing precisions.
pub const LAMBDA_CAP: f64 = 1e6;
/// Ridge applied to the joint objective, anchored at the initialization.
pub const BASE_RIDGE: f64 = 1e-6;
/// Largest ridge tried before giving up on factorization failures.
pub const MAX_RIDGE: f64 = 1e-2;

const GRAD_TOL: f64 = 1e-8;
const REL_CHANGE_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 30;

/// Default starting point for a cold per-bin fit: π0 ≈ 0.73, ξ = 0.5, θ = 3.
pub const DEFAULT_START: TransformedParams = TransformedParams {
    pi0_t: 1.0,
    xi_t: 0.0,
    theta_t: 0.0,
};

/// Smoothing precisions for the three parameter chains, scaled by c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c: f64,
}

impl SmoothingParams {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, c: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("lambda3", lambda3),
        ] {
            if !(v > 0.0 && v <= LAMBDA_CAP) {
                return Err(Error::config(format!(
                    "{name} = {v} outside (0, {LAMBDA_CAP}]"
                )));
            }
        }
        if !(c > 0.0) {
            return Err(Error::config(format!(
                "smoothing scale c = {c} must be positive"
            )));
        }
        Ok(SmoothingParams {
            lambda1,
            lambda2,
            lambda3,
            c,
        })
    }

    fn lambda(&self, chain: usize) -> f64 {
        match chain {
            0 => self.lambda1,
            1 => self.lambda2,
            2 => self.lambda3,
            _ => unreachable!(),
        }
    }
}

/// Inverse-variance smoothing estimates from the per-bin initial values:
/// λ̂ = B / Σⱼ (tⱼ − tⱼ₋₁)² for each chain, scaled by c and capped.
pub fn estimate_lambdas(initial: &[TransformedParams], c: f64) -> Result<SmoothingParams> {
    let b = initial.len();
    if b < 2 {
        return Err(Error::config(
            "smoothing requires at least 2 bins; a single bin has no neighbor differences",
        ));
    }
    if !(c > 0.0) {
        return Err(Error::config(format!(
            "smoothing scale c = {c} must be positive"
        )));
    }
    let mut lambdas = [0.0f64; 3];
    for chain in 0..3 {
        let mut ss = 0.0;
        for w in initial.windows(2) {
            let d = w[1].as_array()[chain] - w[0].as_array()[chain];
            ss += d * d;
        }
        let raw = b as f64 / ss; // +inf on a constant chain
        lambdas[chain] = (raw * c).min(LAMBDA_CAP);
    }
    SmoothingParams::new(lambdas[0], lambdas[1], lambdas[2], c)
}

/// Outcome of a per-bin maximum-likelihood fit.
#[derive(Debug, Clone, Copy)]
pub struct FitBinResult {
    pub params: TransformedParams,
    pub converged: bool,
    pub iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve the 3×3 system `a x = b` by Cholesky with escalating diagonal
/// damping when `a` is not positive definite. Damping only bends the step
/// direction toward the gradient; the objective is untouched.
fn damped_solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let max_diag = a[0][0].abs().max(a[1][1].abs()).max(a[2][2].abs()).max(1.0);
    let mut damping = 0.0;
    for _ in 0..20 {
        let mut m = a;
        for (k, row) in m.iter_mut().enumerate() {
            row[k] += damping;
        }
        if let Some(x) = cholesky_solve3(m, b) {
            return Some(x);
        }
        damping = if damping == 0.0 {
            1e-8 * max_diag
        } else {
            damping * 10.0
        };
    }
    None
}

fn cholesky_solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0f64; 3];
    for i in 0..3 {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = y[i];
        for k in (i + 1)..3 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Maximize one bin's log-likelihood by Newton-Raphson with step halving.
///
/// Non-convergence within the iteration budget returns the best iterate with
/// `converged = false`; it is never an error.
pub fn fit_bin_initial(data: &BinData, warm_start: Option<TransformedParams>) -> FitBinResult {
    let mut t = warm_start.unwrap_or(DEFAULT_START);
    let (mut ll, mut g, mut h) = bin_ll_grad_hess(data, &t);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..MAX_ITERATIONS {
        iterations = iter;
        if inf_norm(&g) <= GRAD_TOL {
            converged = true;
            break;
        }
        let neg_h = [
            [-h[0][0], -h[0][1], -h[0][2]],
            [-h[1][0], -h[1][1], -h[1][2]],
            [-h[2][0], -h[2][1], -h[2][2]],
        ];
        let Some(step) = damped_solve3(neg_h, g) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = TransformedParams {
                pi0_t: t.pi0_t + scale * step[0],
                xi_t: t.xi_t + scale * step[1],
                theta_t: t.theta_t + scale * step[2],
            };
            let ll_trial = bin_log_likelihood(data, &trial);
            if ll_trial.is_finite() && ll_trial >= ll {
                accepted = Some((trial, ll_trial));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, ll_trial)) = accepted else {
            break;
        };
        let improvement = ll_trial - ll;
        t = trial;
        (ll, g, h) = bin_ll_grad_hess(data, &t);
        if improvement <= REL_CHANGE_TOL * ll.abs().max(1.0) {
            converged = true;
            iterations = iter + 1;
            break;
        }
    }
    FitBinResult {
        params: t,
        converged,
        iterations,
    }
}

/// The joint objective: Σⱼ bin log-likelihoods, minus the first-difference
/// smoothing penalties, minus the anchored ridge.
pub struct JointObjective<'a> {
    bins: &'a [BinData],
    lambdas: Option<SmoothingParams>,
    ridge: f64,
    ridge_center: Vec<f64>,
}

impl<'a> JointObjective<'a> {
    pub fn new(
        bins: &'a [BinData],
        lambdas: Option<SmoothingParams>,
        ridge: f64,
        ridge_center: Vec<f64>,
    ) -> Self {
        assert_eq!(ridge_center.len(), 3 * bins.len());
        JointObjective {
            bins,
            lambdas,
            ridge,
            ridge_center,
        }
    }

    pub fn dim(&self) -> usize {
        3 * self.bins.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    fn bin_params(v: &[f64], j: usize) -> TransformedParams {
        TransformedParams {
            pi0_t: v[3 * j],
            xi_t: v[3 * j + 1],
            theta_t: v[3 * j + 2],
        }
    }

    fn lambda(&self, chain: usize) -> f64 {
        self.lambdas.map_or(0.0, |l| l.lambda(chain))
    }

    /// Smoothing penalty plus ridge at `v` (the non-likelihood part).
    pub fn penalty(&self, v: &[f64]) -> f64 {
        let b = self.bins.len();
        let mut total = 0.0;
        for chain in 0..3 {
            let lambda = self.lambda(chain);
            if lambda == 0.0 {
                continue;
            }
            let mut ss = 0.0;
            for j in 1..b {
                let d = v[3 * j + chain] - v[3 * (j - 1) + chain];
                ss += d * d;
            }
            total -= 0.5 * lambda * ss;
        }
        if self.ridge > 0.0 {
            let mut ss = 0.0;
            for (x, c) in v.iter().zip(&self.ridge_center) {
                let d = x - c;
                ss += d * d;
            }
            total -= 0.5 * self.ridge * ss;
        }
        total
    }

    /// Joint log posterior (up to a constant).
    pub fn log_posterior(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim());
        let mut total = self.penalty(v);
        for (j, data) in self.bins.iter().enumerate() {
            total += bin_log_likelihood(data, &Self::bin_params(v, j));
        }
        total
    }

    /// Analytic gradient of [`Self::log_posterior`].
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        self.value_grad_neg_hessian(v).1
    }

    /// Objective value, gradient, and banded negative Hessian in one pass.
    pub fn value_grad_neg_hessian(&self, v: &[f64]) -> (f64, Vec<f64>, SymBanded) {
        assert_eq!(v.len(), self.dim());
        let n = self.dim();
        let b = self.bins.len();
        let mut value = self.penalty(v);
        let mut grad = vec![0.0; n];
        let mut prec = SymBanded::zeros(n, 3);

        for (j, data) in self.bins.iter().enumerate() {
            let (ll, g, h) = bin_ll_grad_hess(data, &Self::bin_params(v, j));
            value += ll;
            for a in 0..3 {
                grad[3 * j + a] += g[a];
                for c in a..3 {
                    prec.add(3 * j + a, 3 * j + c, -h[a][c]);
                }
            }
        }

        for chain in 0..3 {
            let lambda = self.lambda(chain);
            if lambda == 0.0 {
                continue;
            }
            for j in 0..b {
                let i = 3 * j + chain;
                if j >= 1 {
                    grad[i] -= lambda * (v[i] - v[i - 3]);
                    prec.add(i, i, lambda);
                    prec.add(i, i - 3, -lambda);
                }
                if j + 1 < b {
                    grad[i] += lambda * (v[i + 3] - v[i]);
                    prec.add(i, i, lambda);
                }
            }
        }

        if self.ridge > 0.0 {
            for i in 0..n {
                grad[i] -= self.ridge * (v[i] - self.ridge_center[i]);
                prec.add(i, i, self.ridge);
            }
        }

        (value, grad, prec)
    }

    /// Negative Hessian assembled densely through independent indexing; used
    /// to cross-check the banded assembly.
    pub fn neg_hessian_dense(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let b = self.bins.len();
        let mut m = vec![vec![0.0; n]; n];
        for (j, data) in self.bins.iter().enumerate() {
            let (_, _, h) = bin_ll_grad_hess(data, &Self::bin_params(v, j));
            for a in 0..3 {
                for c in 0..3 {
                    m[3 * j + a][3 * j + c] -= h[a][c];
                }
            }
        }
        for chain in 0..3 {
            let lambda = self.lambda(chain);
            for j in 1..b {
                let i = 3 * j + chain;
                let k = 3 * (j - 1) + chain;
                m[i][i] += lambda;
                m[k][k] += lambda;
                m[i][k] -= lambda;
                m[k][i] -= lambda;
            }
        }
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += self.ridge;
        }
        m
    }
}

/// Which of the three per-bin parameters a marginal refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Pi0,
    Xi,
    Theta,
}

impl ParamKind {
    pub fn offset(self) -> usize {
        match self {
            ParamKind::Pi0 => 0,
            ParamKind::Xi => 1,
            ParamKind::Theta => 2,
        }
    }
}

/// Gaussian approximation of the joint posterior at its mode.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub layout: BinLayout,
    /// Posterior mode in transformed coordinates, bin-major, length 3B.
    pub mode: Vec<f64>,
    /// Negative Hessian of the (ridged) log posterior at the mode.
    pub precision: SymBanded,
    /// Per-bin 3×3 marginal covariance blocks of the Gaussian approximation.
    pub cov_blocks: Vec<[[f64; 3]; 3]>,
    /// Smoothing precisions; `None` for the one-bin model, where the prior
    /// has no difference terms.
    pub lambdas: Option<SmoothingParams>,
    /// Smoothing scale c the fit was run with.
    pub smoothing_scale: f64,
    /// Ridge in effect (base value unless escalated).
    pub ridge: f64,
    /// Anchor of the ridge: the stage-one initialization vector.
    pub ridge_center: Vec<f64>,
    pub log_post_at_mode: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stage1_converged: Vec<bool>,
}

impl ModelFit {
    pub fn bins(&self) -> usize {
        self.layout.bins
    }

    /// Transformed parameters of bin `j` (1-based).
    pub fn bin_mode(&self, j: usize) -> TransformedParams {
        assert!(j >= 1 && j <= self.bins(), "bin index {j} out of range");
        TransformedParams {
            pi0_t: self.mode[3 * (j - 1)],
            xi_t: self.mode[3 * (j - 1) + 1],
            theta_t: self.mode[3 * (j - 1) + 2],
        }
    }

    /// Natural parameters of bin `j` (1-based).
    pub fn bin_natural(&self, j: usize) -> BinParams {
        to_natural(&self.bin_mode(j))
    }

    /// Gaussian marginal (mean, sd) of one transformed parameter.
    pub fn marginal(&self, j: usize, which: ParamKind) -> Result<(f64, f64)> {
        if j < 1 || j > self.bins() {
            return Err(Error::input(format!(
                "bin index {j} out of 1..={}",
                self.bins()
            )));
        }
        let o = which.offset();
        let mean = self.mode[3 * (j - 1) + o];
        let var = self.cov_blocks[j - 1][o][o];
        Ok((mean, var.max(0.0).sqrt()))
    }
}

/// Split a dataset's p-values into per-bin cached-log form.
pub fn bin_data(dataset: &Dataset, layout: &BinLayout) -> Vec<BinData> {
    let ps = dataset.p_values();
    layout
        .split(&ps)
        .into_iter()
        .map(|bin_ps| BinData::from_p_values(&bin_ps))
        .collect()
}

struct NewtonOutcome {
    mode: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

enum NewtonFailure {
    /// Positive-definiteness lost; carries the iterate for ridge escalation.
    Factorization(Vec<f64>),
}

fn newton_maximize(
    obj: &JointObjective,
    start: Vec<f64>,
) -> std::result::Result<NewtonOutcome, NewtonFailure> {
    let mut v = start;
    let (mut value, mut grad, mut prec) = obj.value_grad_neg_hessian(&v);
    let mut iterations = 0;
    let mut converged = false;
    for iter in 0..MAX_ITERATIONS {
        iterations = iter;
        if inf_norm(&grad) <= GRAD_TOL {
            converged = true;
            break;
        }
        // Far from the mode the negative Hessian can go indefinite; damp the
        // step solve (never the objective) until it factors.
        let chol = match prec.cholesky() {
            Ok(c) => c,
            Err(_) => {
                let n = prec.n();
                let max_diag = (0..n).map(|i| prec.get(i, i).abs()).fold(1.0f64, f64::max);
                let mut damping = 1e-8 * max_diag;
                let mut found = None;
                while damping <= 1e9 * max_diag {
                    let mut damped = prec.clone();
                    for i in 0..n {
                        damped.add(i, i, damping);
                    }
                    if let Ok(c) = damped.cholesky() {
                        found = Some(c);
                        break;
                    }
                    damping *= 10.0;
                }
                match found {
                    Some(c) => c,
                    None => return Err(NewtonFailure::Factorization(v)),
                }
            }
        };
        let step = chol.solve(&grad);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(x, s)| x + scale * s).collect();
            let value_trial = obj.log_posterior(&trial);
            if value_trial.is_finite() && value_trial >= value {
                accepted = Some((trial, value_trial));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, value_trial)) = accepted else {
            break;
        };
        // Step-halving contract: accepted steps never decrease the objective.
        debug_assert!(value_trial >= value);
        let improvement = value_trial - value;
        v = trial;
        (value, grad, prec) = obj.value_grad_neg_hessian(&v);
        if improvement <= REL_CHANGE_TOL * value.abs().max(1.0) {
            converged = true;
            iterations = iter + 1;
            break;
        }
    }
    Ok(NewtonOutcome {
        mode: v,
        value,
        iterations,
        converged,
    })
}

/// Fit the joint model: sequential warm-started per-bin fits, smoothing
/// estimation, then full Newton-Raphson on the joint posterior.
pub fn fit_joint(dataset: &Dataset, layout: &BinLayout, c: f64) -> Result<ModelFit> {
    if layout.assignment.len() != dataset.len() {
        return Err(Error::config(
            "bin layout does not match the dataset (record count differs)",
        ));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::config(format!(
            "smoothing scale c = {c} must be positive"
        )));
    }
    let bins = bin_data(dataset, layout);
    let b = bins.len();

    // Stage 1: sequential per-bin fits, each warm-started from the previous.
    let mut inits = Vec::with_capacity(b);
    let mut stage1_converged = Vec::with_capacity(b);
    let mut warm = None;
    for data in &bins {
        let res = fit_bin_initial(data, warm);
        warm = Some(res.params);
        stage1_converged.push(res.converged);
        inits.push(res.params);
    }
    let center: Vec<f64> = inits.iter().flat_map(|t| t.as_array()).collect();

    let lambdas = if b >= 2 {
        Some(estimate_lambdas(&inits, c)?)
    } else {
        None
    };

    // Stage 2: joint Newton, escalating the ridge on factorization failure.
    let mut ridge = BASE_RIDGE;
    let mut start = center.clone();
    loop {
        let obj = JointObjective::new(&bins, lambdas, ridge, center.clone());
        match newton_maximize(&obj, start) {
            Ok(outcome) => {
                let (_, grad, prec) = obj.value_grad_neg_hessian(&outcome.mode);
                let chol = match prec.cholesky() {
                    Ok(c) => c,
                    Err(_) => {
                        if ridge * 10.0 > MAX_RIDGE * (1.0 + 1e-12) {
                            return Err(Error::numerical(format!(
                                "precision not positive definite at the mode with ridge {ridge}"
                            )));
                        }
                        ridge *= 10.0;
                        start = outcome.mode;
                        continue;
                    }
                };
                let mut cov_blocks = Vec::with_capacity(b);
                for j in 0..b {
                    let mut block = [[0.0f64; 3]; 3];
                    for a in 0..3 {
                        let col = chol.inverse_column(3 * j + a);
                        for r in 0..3 {
                            block[r][a] = col[3 * j + r];
                        }
                    }
                    // symmetrize solve round-off
                    for r in 0..3 {
                        for s in (r + 1)..3 {
                            let m = 0.5 * (block[r][s] + block[s][r]);
                            block[r][s] = m;
                            block[s][r] = m;
                        }
                    }
                    cov_blocks.push(block);
                }
                return Ok(ModelFit {
                    layout: layout.clone(),
                    mode: outcome.mode,
                    precision: prec,
                    cov_blocks,
                    lambdas,
                    smoothing_scale: c,
                    ridge,
                    ridge_center: center,
                    log_post_at_mode: outcome.value,
                    grad_inf_norm: inf_norm(&grad),
                    iterations: outcome.iterations,
                    converged: outcome.converged,
                    stage1_converged,
                });
            }
            Err(NewtonFailure::Factorization(iterate)) => {
                if ridge * 10.0 > MAX_RIDGE * (1.0 + 1e-12) {
                    return Err(Error::numerical(format!(
                        "Newton factorization failed at ridge {ridge}; iterate inf-norm {}",
                        inf_norm(&iterate)
                    )));
                }
                ridge *= 10.0;
                start = iterate;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, TestRecord};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    #[test]
    fn lambda_hat_hand_example() {
        // π̃ chain (0, 1, 3): λ̂₁ = 3 / (1 + 4) = 0.6
        let chain: Vec<TransformedParams> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&u| TransformedParams {
                pi0_t: u,
                xi_t: 0.3 * u,
                theta_t: -0.2 * u,
            })
            .collect();
        let l1 = estimate_lambdas(&chain, 1.0).unwrap();
        assert_eq!(l1.lambda1, 0.6);
        // c scales linearly below the cap
        let l5 = estimate_lambdas(&chain, 5.0).unwrap();
        assert_eq!(l5.lambda1, 5.0 * l1.lambda1);
        assert_eq!(l5.lambda2, 5.0 * l1.lambda2);
        assert_eq!(l5.lambda3, 5.0 * l1.lambda3);
    }

    #[test]
    fn lambda_hat_caps_constant_chain() {
        let chain = vec![DEFAULT_START; 4];
        let l = estimate_lambdas(&chain, 1.0).unwrap();
        assert_eq!(l.lambda1, LAMBDA_CAP);
        assert_eq!(l.lambda2, LAMBDA_CAP);
        assert_eq!(l.lambda3, LAMBDA_CAP);
    }

    #[test]
    fn lambda_hat_rejects_single_bin() {
        assert!(estimate_lambdas(&[DEFAULT_START], 1.0).is_err());
    }

    fn uniform_pvals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream_rng(seed, 0);
        (0..n)
            .map(|_| rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12))
            .collect()
    }

    /// Beta(ξ, θ) draws by rejection from the Beta(ξ, 1) envelope.
    fn beta_pvals(xi: f64, theta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream_rng(seed, 1);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p: f64 = rng.random::<f64>().powf(1.0 / xi);
            let accept: f64 = rng.random();
            if accept < (1.0 - p).powf(theta - 1.0) {
                out.push(p.clamp(1e-12, 1.0 - 1e-12));
            }
        }
        out
    }

    #[test]
    fn pure_null_fit_finds_high_pi0() {
        let data = BinData::from_p_values(&uniform_pvals(5000, 101));
        let res = fit_bin_initial(&data, None);
        let nat = to_natural(&res.params);
        assert!(nat.pi0 >= 0.9, "pi0 = {}", nat.pi0);
    }

    #[test]
    fn pure_alternative_fit_finds_low_pi0() {
        let data = BinData::from_p_values(&beta_pvals(0.2, 5.0, 5000, 102));
        let res = fit_bin_initial(&data, None);
        let nat = to_natural(&res.params);
        assert!(nat.pi0 <= 0.2, "pi0 = {}", nat.pi0);
        assert!(res.converged);
    }

    #[test]
    fn warm_start_at_stationary_point_is_fixed() {
        let mut ps = uniform_pvals(2000, 103);
        ps.extend(beta_pvals(0.3, 4.0, 1000, 104));
        let data = BinData::from_p_values(&ps);
        let first = fit_bin_initial(&data, None);
        assert!(first.converged);
        let again = fit_bin_initial(&data, Some(first.params));
        assert!(again.iterations <= 2);
        assert_abs_diff_eq!(again.params.pi0_t, first.params.pi0_t, epsilon = 1e-9);
        assert_abs_diff_eq!(again.params.xi_t, first.params.xi_t, epsilon = 1e-9);
        assert_abs_diff_eq!(again.params.theta_t, first.params.theta_t, epsilon = 1e-9);
    }

    /// Mixed null/alternative dataset with a covariate-driven null share.
    fn synthetic_dataset(m: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::stream_rng(seed, 2);
        let mut records = Vec::with_capacity(m);
        for i in 0..m {
            let x: f64 = rng.random();
            let pi0 = 0.85 - 0.5 * x;
            let p = if rng.random::<f64>() < pi0 {
                rng.random::<f64>()
            } else {
                // Beta(0.3, 4)-ish alternative via rejection
                loop {
                    let cand: f64 = rng.random::<f64>().powf(1.0 / 0.3);
                    if rng.random::<f64>() < (1.0 - cand).powi(3) {
                        break cand;
                    }
                }
            };
            records.push(TestRecord {
                id: format!("s{i}"),
                p: p.clamp(1e-12, 1.0 - 1e-12),
                x,
                z: None,
            });
        }
        Dataset::new(records).unwrap()
    }

    #[test]
    fn joint_fit_converges_and_is_deterministic() {
        let ds = synthetic_dataset(4000, 105);
        let layout = crate::binning::quantile_bins(&ds, 4, None, 50).unwrap();
        let fit = fit_joint(&ds, &layout, 1.0).unwrap();
        assert!(fit.converged);
        assert!(fit.grad_inf_norm <= 1e-8);
        assert_eq!(fit.ridge, BASE_RIDGE);
        // π0 should decrease along the covariate, roughly tracking the truth.
        let first = fit.bin_natural(1).pi0;
        let last = fit.bin_natural(4).pi0;
        assert!(first > last, "pi0 chain not decreasing: {first} vs {last}");

        let fit2 = fit_joint(&ds, &layout, 1.0).unwrap();
        assert_eq!(fit.mode, fit2.mode);
        assert_eq!(fit.log_post_at_mode, fit2.log_post_at_mode);
    }

    #[test]
    fn joint_gradient_matches_finite_differences() {
        let ds = synthetic_dataset(900, 106);
        let layout = crate::binning::quantile_bins(&ds, 3, None, 50).unwrap();
        let bins = bin_data(&ds, &layout);
        let inits: Vec<TransformedParams> = bins
            .iter()
            .map(|d| fit_bin_initial(d, None).params)
            .collect();
        let center: Vec<f64> = inits.iter().flat_map(|t| t.as_array()).collect();
        let lambdas = estimate_lambdas(&inits, 1.0).unwrap();
        let obj = JointObjective::new(&bins, Some(lambdas), BASE_RIDGE, center.clone());

        let mut rng = crate::rng::stream_rng(107, 0);
        for _ in 0..5 {
            let v: Vec<f64> = center
                .iter()
                .map(|c| c + 0.4 * (rng.random::<f64>() - 0.5))
                .collect();
            let g = obj.gradient(&v);
            let h = 1e-5;
            for k in 0..v.len() {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[k] += h;
                vm[k] -= h;
                let fd = (obj.log_posterior(&vp) - obj.log_posterior(&vm)) / (2.0 * h);
                let denom = fd.abs().max(g[k].abs()).max(1e-8);
                assert!(
                    (fd - g[k]).abs() / denom <= 1e-5,
                    "grad[{k}]: fd {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn banded_and_dense_assemblies_agree() {
        let ds = synthetic_dataset(1200, 108);
        let layout = crate::binning::quantile_bins(&ds, 4, None, 50).unwrap();
        let bins = bin_data(&ds, &layout);
        let inits: Vec<TransformedParams> = bins
            .iter()
            .map(|d| fit_bin_initial(d, None).params)
            .collect();
        let center: Vec<f64> = inits.iter().flat_map(|t| t.as_array()).collect();
        let lambdas = estimate_lambdas(&inits, 2.0).unwrap();
        let obj = JointObjective::new(&bins, Some(lambdas), BASE_RIDGE, center.clone());

        let (_, _, banded) = obj.value_grad_neg_hessian(&center);
        let dense = obj.neg_hessian_dense(&center);
        let n = obj.dim();
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > 3 {
                    assert_eq!(banded.get(i, j), 0.0);
                    assert_eq!(dense[i][j], 0.0);
                } else {
                    assert_abs_diff_eq!(banded.get(i, j), dense[i][j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn objective_reduces_to_likelihood_without_priors() {
        let ds = synthetic_dataset(500, 112);
        // Single bin: no difference terms; zero ridge leaves the bare
        // likelihood. With a ridge it adds exactly the anchored quadratic.
        let data = BinData::from_p_values(&ds.p_values());
        let bins = vec![data.clone()];
        let center = vec![0.3, -0.2, 0.5];
        let v = vec![0.8, 0.1, 0.4];
        let bare = JointObjective::new(&bins, None, 0.0, center.clone());
        let t = TransformedParams::from_array([v[0], v[1], v[2]]);
        assert_abs_diff_eq!(
            bare.log_posterior(&v),
            bin_log_likelihood(&data, &t),
            epsilon = 1e-12
        );
        let ridged = JointObjective::new(&bins, None, BASE_RIDGE, center.clone());
        let quad: f64 = v.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
        assert_abs_diff_eq!(
            ridged.log_posterior(&v),
            bin_log_likelihood(&data, &t) - 0.5 * BASE_RIDGE * quad,
            epsilon = 1e-12
        );
    }

    #[test]
    fn prior_term_is_shift_invariant() {
        let ds = synthetic_dataset(600, 109);
        let layout = crate::binning::quantile_bins(&ds, 3, None, 50).unwrap();
        let bins = bin_data(&ds, &layout);
        let lambdas = SmoothingParams::new(2.0, 3.0, 4.0, 1.0).unwrap();
        // No ridge: the penalty is pure smoothing, invariant to adding a
        // constant to any one chain.
        let obj = JointObjective::new(&bins, Some(lambdas), 0.0, vec![0.0; 9]);
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * 0.711).sin()).collect();
        let mut shifted = v.clone();
        for j in 0..3 {
            shifted[3 * j] += 17.25;
        }
        assert_abs_diff_eq!(obj.penalty(&v), obj.penalty(&shifted), epsilon = 1e-9);
    }

    #[test]
    fn one_bin_joint_fit_equals_bin_initial() {
        let ds = synthetic_dataset(1500, 110);
        let layout = BinLayout::single_bin(&ds);
        let fit = fit_joint(&ds, &layout, 1.0).unwrap();
        assert!(fit.lambdas.is_none());
        let data = BinData::from_p_values(&ds.p_values());
        let solo = fit_bin_initial(&data, None);
        for (a, b) in fit.mode.iter().zip(solo.params.as_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn marginals_expose_mode_and_covariance_diagonal() {
        let ds = synthetic_dataset(1500, 111);
        let layout = crate::binning::quantile_bins(&ds, 3, None, 50).unwrap();
        let fit = fit_joint(&ds, &layout, 1.0).unwrap();
        let (mean, sd) = fit.marginal(2, ParamKind::Pi0).unwrap();
        assert_eq!(mean, fit.mode[3]);
        assert_relative_eq!(sd * sd, fit.cov_blocks[1][0][0], max_relative = 1e-12);
        assert!(sd > 0.0);
        assert!(fit.marginal(4, ParamKind::Pi0).is_err());
        // covariance blocks are symmetric with positive diagonals
        for blk in &fit.cov_blocks {
            for r in 0..3 {
                assert!(blk[r][r] > 0.0);
                for s in 0..3 {
                    assert_abs_diff_eq!(blk[r][s], blk[s][r], epsilon = 1e-14);
                }
            }
        }
    }
}
