//! Per-bin uniform-beta mixture density, reparametrizations, and analytic
//! log-likelihood derivatives.
//!
//! Within a bin the p-value density is
//!
//! `f(p) = π0 + (1 − π0) · Γ(ξ+θ)/(Γ(ξ)Γ(θ)) · p^(ξ−1) (1 − p)^(θ−1)`
//!
//! with π0 ∈ (0,1), ξ ∈ (0,1], θ ∈ [2,∞), which makes f nonincreasing and
//! convex on [0,1]. Optimization runs in unconstrained coordinates
//!
//! `π̃0 = logit π0,  ξ̃ = logit ξ,  θ̃ = log(θ − 2)`
//!
//! and all derivatives here are with respect to those. Likelihood math works
//! in log space throughout; the only per-observation inputs are cached
//! `ln p` and `ln(1 − p)`.

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, dyadic_gauss_toward_zero};
use crate::special::{digamma, digamma_diff, ln_gamma, ln_gamma_diff, trigamma, trigamma_diff};

/// Natural mixture parameters for one bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinParams {
    pub pi0: f64,
    pub xi: f64,
    pub theta: f64,
}

impl BinParams {
    pub fn new(pi0: f64, xi: f64, theta: f64) -> Result<Self> {
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::config(format!("pi0 = {pi0} not in (0,1)")));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::config(format!("xi = {xi} not in (0,1]")));
        }
        if !(theta >= 2.0) {
            return Err(Error::config(format!("theta = {theta} below 2")));
        }
        Ok(BinParams { pi0, xi, theta })
    }
}

/// Unconstrained coordinates for one bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedParams {
    pub pi0_t: f64,
    pub xi_t: f64,
    pub theta_t: f64,
}

impl TransformedParams {
    pub fn as_array(&self) -> [f64; 3] {
        [self.pi0_t, self.xi_t, self.theta_t]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        TransformedParams {
            pi0_t: a[0],
            xi_t: a[1],
            theta_t: a[2],
        }
    }
}

/// Logistic function 1/(1 + e^(−t)), evaluated without overflow.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Map natural parameters onto the real line. Boundary values have no finite
/// image and are rejected.
pub fn to_transformed(p: &BinParams) -> Result<TransformedParams> {
    if p.pi0 <= 0.0 || p.pi0 >= 1.0 || p.xi <= 0.0 || p.xi >= 1.0 || p.theta <= 2.0 {
        return Err(Error::config(format!(
            "parameters on the constraint boundary have an infinite transform: \
             pi0 = {}, xi = {}, theta = {}",
            p.pi0, p.xi, p.theta
        )));
    }
    Ok(TransformedParams {
        pi0_t: (p.pi0 / (1.0 - p.pi0)).ln(),
        xi_t: (p.xi / (1.0 - p.xi)).ln(),
        theta_t: (p.theta - 2.0).ln(),
    })
}

/// Inverse map back to natural parameters. Extreme coordinates saturate at
/// the floating-point boundary.
pub fn to_natural(t: &TransformedParams) -> BinParams {
    BinParams {
        pi0: logistic(t.pi0_t),
        xi: logistic(t.xi_t),
        theta: 2.0 + t.theta_t.exp(),
    }
}

/// Mixture density at a clipped p-value.
pub fn mix_density(p: f64, params: &BinParams) -> f64 {
    let lc = ln_beta_norm(params.xi, params.theta);
    let log_b = lc + (params.xi - 1.0) * p.ln() + (params.theta - 1.0) * (-p).ln_1p();
    params.pi0 + (1.0 - params.pi0) * log_b.exp()
}

/// log of the beta normalizing constant Γ(ξ+θ)/(Γ(ξ)Γ(θ)).
fn ln_beta_norm(xi: f64, theta: f64) -> f64 {
    ln_gamma_diff(theta, xi) - ln_gamma(xi)
}

/// Cached per-observation logs for one bin's p-values.
#[derive(Debug, Clone)]
pub struct BinData {
    pub lp: Vec<f64>,
    pub l1p: Vec<f64>,
}

impl BinData {
    pub fn from_p_values(ps: &[f64]) -> Self {
        BinData {
            lp: ps.iter().map(|&p| p.ln()).collect(),
            l1p: ps.iter().map(|&p| (-p).ln_1p()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lp.is_empty()
    }
}

/// Per-parameter constants shared by every observation in a bin.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedBin {
    pub pi0: f64,
    om_pi0: f64,
    xi: f64,
    om_xi: f64,
    theta: f64,
    ln_pi0: f64,
    ln_om_pi0: f64,
    lc: f64,
    dxi: f64,
    dtheta: f64,
    /// ψ(ξ+θ) − ψ(ξ)
    dig_sx: f64,
    /// ψ(ξ+θ) − ψ(θ)
    dig_st: f64,
    /// ψ′(ξ+θ) − ψ′(ξ)
    tri_sx: f64,
    /// ψ′(ξ+θ) − ψ′(θ)
    tri_st: f64,
    /// ψ′(ξ+θ)
    tri_s: f64,
}

impl PreparedBin {
    pub(crate) fn new(t: &TransformedParams) -> Self {
        let pi0 = logistic(t.pi0_t);
        let om_pi0 = logistic(-t.pi0_t);
        let xi = logistic(t.xi_t).max(f64::MIN_POSITIVE);
        let om_xi = logistic(-t.xi_t);
        let theta = 2.0 + t.theta_t.exp();
        let lc = ln_beta_norm(xi, theta);
        PreparedBin {
            pi0,
            om_pi0,
            xi,
            om_xi,
            theta,
            ln_pi0: -softplus(-t.pi0_t),
            ln_om_pi0: -softplus(t.pi0_t),
            lc,
            dxi: xi * om_xi,
            dtheta: theta - 2.0,
            dig_sx: digamma(xi + theta) - digamma(xi),
            dig_st: digamma_diff(theta, xi),
            tri_sx: trigamma(xi + theta) - trigamma(xi),
            tri_st: trigamma_diff(theta, xi),
            tri_s: trigamma(xi + theta),
        }
    }

    /// log f, with the posterior null weight q0 = π0/f and its complement.
    #[inline]
    fn point_core(&self, lp: f64, l1p: f64) -> (f64, f64, f64, f64, f64) {
        let log_b = self.lc + (self.xi - 1.0) * lp + (self.theta - 1.0) * l1p;
        let a0 = self.ln_pi0;
        let a1 = self.ln_om_pi0 + log_b;
        let log_f = logaddexp(a0, a1);
        let q0 = (a0 - log_f).exp();
        let q1 = (a1 - log_f).exp();
        let d_xi = self.dig_sx + lp;
        let d_th = self.dig_st + l1p;
        (log_f, q0, q1, d_xi, d_th)
    }

    /// Posterior probability of the null at one observation together with its
    /// gradient with respect to (π̃0, ξ̃, θ̃): the delta-method pieces (a, b).
    pub(crate) fn posterior_point(&self, lp: f64, l1p: f64) -> (f64, [f64; 3]) {
        let (_, q0, q1, d_xi, d_th) = self.point_core(lp, l1p);
        let s = q0 * q1;
        (q0, [s, -s * d_xi * self.dxi, -s * d_th * self.dtheta])
    }
}

/// Log-likelihood of one bin's data at transformed parameters. Finite for
/// every unconstrained parameter vector.
pub fn bin_log_likelihood(data: &BinData, t: &TransformedParams) -> f64 {
    let prep = PreparedBin::new(t);
    let mut total = 0.0;
    for (&lp, &l1p) in data.lp.iter().zip(&data.l1p) {
        total += prep.point_core(lp, l1p).0;
    }
    total
}

/// Log-likelihood, gradient, and Hessian in one pass.
pub fn bin_ll_grad_hess(data: &BinData, t: &TransformedParams) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let prep = PreparedBin::new(t);
    let d2xi = prep.dxi * (prep.om_xi - prep.xi);
    let om2pi0 = prep.om_pi0 - prep.pi0;

    let mut ll = 0.0;
    let mut g = [0.0f64; 3];
    let mut h = [[0.0f64; 3]; 3];
    for (&lp, &l1p) in data.lp.iter().zip(&data.l1p) {
        let (log_f, q0, q1, d_xi, d_th) = prep.point_core(lp, l1p);
        ll += log_f;

        let gu = prep.om_pi0 * q0 - prep.pi0 * q1;
        let gv = q1 * d_xi * prep.dxi;
        let gw = q1 * d_th * prep.dtheta;
        g[0] += gu;
        g[1] += gv;
        g[2] += gw;

        h[0][0] += om2pi0 * gu - gu * gu;
        h[0][1] += -prep.pi0 * gv - gu * gv;
        h[0][2] += -prep.pi0 * gw - gu * gw;
        let t_vv = d_xi * prep.dxi;
        h[1][1] += q1 * (t_vv * t_vv + prep.dxi * prep.dxi * prep.tri_sx + d_xi * d2xi) - gv * gv;
        h[1][2] += q1 * prep.dxi * prep.dtheta * (d_xi * d_th + prep.tri_s) - gv * gw;
        let t_ww = d_th * prep.dtheta;
        h[2][2] += q1
            * (t_ww * t_ww + prep.dtheta * prep.dtheta * prep.tri_st + d_th * prep.dtheta)
            - gw * gw;
    }
    h[1][0] = h[0][1];
    h[2][0] = h[0][2];
    h[2][1] = h[1][2];
    (ll, g, h)
}

/// Gradient and Hessian of [`bin_log_likelihood`].
pub fn bin_grad_hess(data: &BinData, t: &TransformedParams) -> ([f64; 3], [[f64; 3]; 3]) {
    let (_, g, h) = bin_ll_grad_hess(data, t);
    (g, h)
}

/// ∫₀¹ f(p) dp by quadrature.
///
/// The p^(ξ−1) singularity is handled by splitting [ε, 1e−3] dyadically
/// toward zero with fixed Gauss panels and closing [0, ε] with the analytic
/// power-series integral, which keeps the result accurate for small ξ.
pub fn mixture_mass(params: &BinParams) -> f64 {
    let eps = 1e-3 * 2f64.powi(-57);
    let f = |p: f64| mix_density(p, params);
    let top = adaptive_simpson(&f, 1e-3, 1.0, 1e-10);
    let mid = dyadic_gauss_toward_zero(&f, eps, 1e-3);
    // ∫₀^ε p^(ξ−1)(1−p)^(θ−1) dp = ε^ξ/ξ − (θ−1) ε^(ξ+1)/(ξ+1) + O(ε^(ξ+2))
    let (xi, theta) = (params.xi, params.theta);
    let c = ln_beta_norm(xi, theta).exp();
    let beta_tail = c * (xi * eps.ln()).exp() * (1.0 / xi - (theta - 1.0) * eps / (xi + 1.0));
    top + mid + params.pi0 * eps + (1.0 - params.pi0) * beta_tail
}
