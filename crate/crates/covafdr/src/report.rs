//! Posterior scoring and reporting: per-test posterior probabilities of the
//! null with delta-method credible intervals, the one-bin baseline, the
//! tail-count π̂0 estimator, significance calls and comparisons, rank shifts,
//! and per-bin significance thresholds on the z scale.

use crate::binning::{assign_bin, BinLayout};
use crate::data::{clip_p, z_to_p, Dataset, NullDist};
use crate::error::{Error, Result};
use crate::fit::{fit_joint, ModelFit, ParamKind};
use crate::mixture::{logistic, PreparedBin};

/// 97.5% standard normal quantile used for the symmetric 95% intervals.
const Z_95: f64 = 1.96;

/// Scored hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorScore {
    pub id: String,
    pub p: f64,
    pub x: f64,
    /// 1-based bin index under the scoring fit's layout.
    pub bin: usize,
    /// Posterior probability of the null, in (0, 1].
    pub prob: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// 1-based rank by ascending prob (ties by ascending p, then id).
    pub rank: usize,
}

/// Rank of one test under the covariate-modulated and one-bin scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankPair {
    pub id: String,
    pub rank_cov: usize,
    pub rank_onebin: usize,
    /// rank_onebin − rank_cov: positive when the covariate promotes the test.
    pub displacement: i64,
}

/// Posterior probability of the null for a p-value in bin `j` (1-based),
/// with a symmetric 95% delta-method interval clipped to [0, 1].
///
/// The point value is π0ⱼ/fⱼ(p) at the posterior mode; the variance is
/// bᵀ Σⱼ b with b the gradient of that ratio in transformed coordinates.
pub fn posterior_prob(p: f64, j: usize, fit: &ModelFit) -> Result<(f64, f64, f64)> {
    if j < 1 || j > fit.bins() {
        return Err(Error::input(format!(
            "bin index {j} out of 1..={}",
            fit.bins()
        )));
    }
    let prep = PreparedBin::new(&fit.bin_mode(j));
    Ok(posterior_with_prep(p, &prep, &fit.cov_blocks[j - 1]))
}

/// Posterior probability of the null and its gradient with respect to the
/// bin's transformed parameters (the delta-method pieces a and b).
pub fn posterior_point_with_gradient(p: f64, j: usize, fit: &ModelFit) -> Result<(f64, [f64; 3])> {
    if j < 1 || j > fit.bins() {
        return Err(Error::input(format!(
            "bin index {j} out of 1..={}",
            fit.bins()
        )));
    }
    let prep = PreparedBin::new(&fit.bin_mode(j));
    Ok(prep.posterior_point(p.ln(), (-p).ln_1p()))
}

fn posterior_with_prep(p: f64, prep: &PreparedBin, cov: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let (a, b) = prep.posterior_point(p.ln(), (-p).ln_1p());
    let mut var = 0.0;
    for r in 0..3 {
        for s in 0..3 {
            var += b[r] * cov[r][s] * b[s];
        }
    }
    let half = Z_95 * var.max(0.0).sqrt();
    let lo = (a - half).clamp(0.0, a);
    let hi = (a + half).clamp(a, 1.0);
    (a, lo, hi)
}

/// Score every record of a dataset against a fit. Output rows stay in input
/// order; ranks are 1..m by ascending prob with ties broken by p then id.
pub fn score_all(dataset: &Dataset, fit: &ModelFit) -> Result<Vec<PosteriorScore>> {
    let preps: Vec<PreparedBin> = (1..=fit.bins())
        .map(|j| PreparedBin::new(&fit.bin_mode(j)))
        .collect();
    let mut scores = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        let bin = assign_bin(r.x, &fit.layout)?;
        let (prob, ci_lo, ci_hi) =
            posterior_with_prep(r.p, &preps[bin - 1], &fit.cov_blocks[bin - 1]);
        scores.push(PosteriorScore {
            id: r.id.clone(),
            p: r.p,
            x: r.x,
            bin,
            prob,
            ci_lo,
            ci_hi,
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let sa = &scores[a];
        let sb = &scores[b];
        sa.prob
            .partial_cmp(&sb.prob)
            .unwrap()
            .then(sa.p.partial_cmp(&sb.p).unwrap())
            .then(sa.id.cmp(&sb.id))
    });
    for (rank0, &i) in order.iter().enumerate() {
        scores[i].rank = rank0 + 1;
    }
    Ok(scores)
}

/// π̂0 with its 95% interval, mapped from the π̃0 Gaussian marginal through
/// the logistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi0Estimate {
    pub pi0: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Logistic-mapped marginal interval for π0 in bin `j` (1-based).
pub fn pi0_interval(fit: &ModelFit, j: usize) -> Result<Pi0Estimate> {
    let (mean, sd) = fit.marginal(j, ParamKind::Pi0)?;
    Ok(Pi0Estimate {
        pi0: logistic(mean),
        lo: logistic(mean - Z_95 * sd),
        hi: logistic(mean + Z_95 * sd),
    })
}

/// Fit the no-covariate baseline: the same mixture over a single bin.
pub fn fit_one_bin(dataset: &Dataset) -> Result<ModelFit> {
    let layout = BinLayout::single_bin(dataset);
    fit_joint(dataset, &layout, 1.0)
}

/// Tail-count estimator π̂0 = #{p > λ} / (m (1 − λ)), truncated at 1.
///
/// A return of exactly 0 means no p-value exceeded λ, a degenerate estimate
/// the caller should flag.
pub fn storey_pi0(p_values: &[f64], lambda: f64) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::input("storey_pi0 requires at least one p-value"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::config(format!(
            "storey lambda = {lambda} outside (0,1)"
        )));
    }
    let count = p_values.iter().filter(|&&p| p > lambda).count();
    let est = count as f64 / (p_values.len() as f64 * (1.0 - lambda));
    Ok(est.min(1.0))
}

/// Per-test significance flags: prob strictly below the threshold.
pub fn call_significant(scores: &[PosteriorScore], threshold: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::config(format!(
            "significance threshold {threshold} outside [0,1]"
        )));
    }
    Ok(scores.iter().map(|s| s.prob < threshold).collect())
}

/// Three-way significance comparison between two score sets over the same
/// tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignificanceCounts {
    pub both: usize,
    pub covariate_only: usize,
    pub baseline_only: usize,
    pub neither: usize,
}

/// Count tests called significant by both scoring rules, by the covariate
/// rule only, and by the baseline only. Score sets must cover identical ids
/// in the same order.
pub fn compare_significance(
    covariate: &[PosteriorScore],
    baseline: &[PosteriorScore],
    threshold: f64,
) -> Result<SignificanceCounts> {
    check_same_ids(covariate, baseline)?;
    let cov_flags = call_significant(covariate, threshold)?;
    let base_flags = call_significant(baseline, threshold)?;
    let mut counts = SignificanceCounts {
        both: 0,
        covariate_only: 0,
        baseline_only: 0,
        neither: 0,
    };
    for (c, b) in cov_flags.iter().zip(&base_flags) {
        match (c, b) {
            (true, true) => counts.both += 1,
            (true, false) => counts.covariate_only += 1,
            (false, true) => counts.baseline_only += 1,
            (false, false) => counts.neither += 1,
        }
    }
    Ok(counts)
}

fn check_same_ids(a: &[PosteriorScore], b: &[PosteriorScore]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.id != y.id) {
        return Err(Error::input(
            "score sets cover different tests; ids must match pairwise",
        ));
    }
    Ok(())
}

/// Join two score sets on id and report rank displacements, sorted by the
/// covariate-modulated rank.
pub fn rank_compare(
    scores_cov: &[PosteriorScore],
    scores_onebin: &[PosteriorScore],
) -> Result<Vec<RankPair>> {
    check_same_ids(scores_cov, scores_onebin)?;
    let mut pairs: Vec<RankPair> = scores_cov
        .iter()
        .zip(scores_onebin)
        .map(|(c, o)| RankPair {
            id: c.id.clone(),
            rank_cov: c.rank,
            rank_onebin: o.rank,
            displacement: o.rank as i64 - c.rank as i64,
        })
        .collect();
    pairs.sort_by_key(|p| p.rank_cov);
    Ok(pairs)
}

/// Per-bin z-score significance cutoffs: the z* where the posterior
/// probability of the null crosses the threshold.
///
/// Returns `+∞` for bins that never reach significance on z ∈ [0, 10], and
/// `−∞` for bins already significant at z = 0.
pub fn threshold_curve(fit: &ModelFit, threshold: f64, null_dist: NullDist) -> Result<Vec<f64>> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::config(format!(
            "threshold {threshold} outside (0,1)"
        )));
    }
    let mut cutoffs = Vec::with_capacity(fit.bins());
    for j in 1..=fit.bins() {
        let prep = PreparedBin::new(&fit.bin_mode(j));
        let prob_at = |z: f64| -> f64 {
            let p = clip_p(z_to_p(z, null_dist).expect("finite z"));
            prep.posterior_point(p.ln(), (-p).ln_1p()).0
        };
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        if prob_at(hi) > threshold {
            cutoffs.push(f64::INFINITY);
            continue;
        }
        if prob_at(lo) < threshold {
            cutoffs.push(f64::NEG_INFINITY);
            continue;
        }
        // prob is nonincreasing in z; bisect to the crossing.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if prob_at(mid) >= threshold {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        cutoffs.push(0.5 * (lo + hi));
    }
    Ok(cutoffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::quantile_bins;
    use crate::data::TestRecord;
    use crate::fit::fit_joint;
    use crate::mixture::{mix_density, to_natural, TransformedParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn synthetic_dataset(m: usize, seed: u64) -> Dataset {
        let mut rng = crate::rng::stream_rng(seed, 3);
        let mut records = Vec::with_capacity(m);
        for i in 0..m {
            let x: f64 = rng.random();
            let pi0 = 0.9 - 0.6 * x;
            let p = if rng.random::<f64>() < pi0 {
                rng.random::<f64>()
            } else {
                loop {
                    let cand: f64 = rng.random::<f64>().powf(1.0 / 0.3);
                    if rng.random::<f64>() < (1.0 - cand).powi(3) {
                        break cand;
                    }
                }
            };
            records.push(TestRecord {
                id: format!("r{i:05}"),
                p: p.clamp(1e-12, 1.0 - 1e-12),
                x,
                z: None,
            });
        }
        Dataset::new(records).unwrap()
    }

    fn fitted(m: usize, bins: usize, seed: u64) -> (Dataset, ModelFit) {
        let ds = synthetic_dataset(m, seed);
        let layout = quantile_bins(&ds, bins, None, 50).unwrap();
        let fit = fit_joint(&ds, &layout, 1.0).unwrap();
        (ds, fit)
    }

    #[test]
    fn prob_near_one_at_p_near_one() {
        let (_, fit) = fitted(3000, 3, 201);
        for j in 1..=3 {
            let (prob, lo, hi) = posterior_prob(1.0 - 1e-12, j, &fit).unwrap();
            assert_abs_diff_eq!(prob, 1.0, epsilon = 1e-9);
            assert!(lo <= prob && prob <= hi && hi <= 1.0);
        }
    }

    #[test]
    fn zero_covariance_collapses_interval() {
        let (_, mut fit) = fitted(2000, 2, 202);
        for blk in &mut fit.cov_blocks {
            *blk = [[0.0; 3]; 3];
        }
        let (prob, lo, hi) = posterior_prob(0.01, 1, &fit).unwrap();
        assert_eq!(lo, prob);
        assert_eq!(hi, prob);
    }

    #[test]
    fn delta_gradient_matches_finite_differences() {
        // FD route goes through natural parameters and the plain density, an
        // independent path from the packed posterior_point computation. Near
        // p = 1 the beta term underflows and differences stop resolving, so
        // points stay below 0.6.
        let mut rng = crate::rng::stream_rng(203, 0);
        let h = 1e-6;
        for _ in 0..100 {
            let t = TransformedParams {
                pi0_t: -1.5 + 3.0 * rng.random::<f64>(),
                xi_t: -1.5 + 3.0 * rng.random::<f64>(),
                theta_t: -1.0 + 2.5 * rng.random::<f64>(),
            };
            let p: f64 = (rng.random::<f64>() * 0.6).max(1e-6);
            let prep = PreparedBin::new(&t);
            let (a, b) = prep.posterior_point(p.ln(), (-p).ln_1p());
            let a_of = |t: &TransformedParams| {
                let nat = to_natural(t);
                nat.pi0 / mix_density(p, &nat)
            };
            assert_relative_eq!(a, a_of(&t), max_relative = 1e-10);
            for k in 0..3 {
                let mut tp = t.as_array();
                let mut tm = t.as_array();
                tp[k] += h;
                tm[k] -= h;
                let fd = (a_of(&TransformedParams::from_array(tp))
                    - a_of(&TransformedParams::from_array(tm)))
                    / (2.0 * h);
                let denom = fd.abs().max(b[k].abs()).max(1e-8);
                assert!(
                    (fd - b[k]).abs() / denom <= 1e-5,
                    "b[{k}] = {} vs fd {fd}",
                    b[k]
                );
            }
        }
    }

    #[test]
    fn scores_rank_is_permutation_with_deterministic_ties() {
        let (ds, fit) = fitted(2000, 4, 204);
        let scores = score_all(&ds, &fit).unwrap();
        assert_eq!(scores.len(), ds.len());
        let mut seen = vec![false; scores.len()];
        for s in &scores {
            assert!(s.prob > 0.0 && s.prob <= 1.0);
            assert!(s.ci_lo <= s.prob && s.prob <= s.ci_hi);
            assert!(!std::mem::replace(&mut seen[s.rank - 1], true));
        }
        // Input order preserved.
        for (s, r) in scores.iter().zip(ds.records()) {
            assert_eq!(s.id, r.id);
        }
        // Duplicated (p, x) rows get equal prob and id-ordered adjacent ranks.
        let mut records: Vec<TestRecord> = ds.records().to_vec();
        records[1] = TestRecord {
            id: "dup_b".into(),
            ..records[0].clone()
        };
        records[0].id = "dup_a".into();
        let ds2 = Dataset::new(records).unwrap();
        let scores2 = score_all(&ds2, &fit).unwrap();
        assert_eq!(scores2[0].prob, scores2[1].prob);
        assert_eq!(scores2[1].rank, scores2[0].rank + 1);
    }

    #[test]
    fn prob_nondecreasing_in_p_within_bins() {
        let (_, fit) = fitted(3000, 3, 205);
        for j in 1..=3 {
            let mut prev = -1.0;
            for i in 0..1001 {
                let p = 1e-12 + (1.0 - 2e-12) * i as f64 / 1000.0;
                let (prob, _, _) = posterior_prob(p, j, &fit).unwrap();
                assert!(prob - prev >= -1e-12, "bin {j} decreased at p = {p}");
                prev = prob;
            }
        }
    }

    #[test]
    fn one_bin_fit_on_pure_null_is_conservative() {
        let mut rng = crate::rng::stream_rng(206, 0);
        let records: Vec<TestRecord> = (0..5000)
            .map(|i| TestRecord {
                id: format!("n{i}"),
                p: rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12),
                x: rng.random(),
                z: None,
            })
            .collect();
        let ds = Dataset::new(records).unwrap();
        let fit = fit_one_bin(&ds).unwrap();
        let est = pi0_interval(&fit, 1).unwrap();
        assert!(est.pi0 >= 0.9, "pi0 = {}", est.pi0);
        assert!(est.lo <= est.pi0 && est.pi0 <= est.hi);
    }

    #[test]
    fn storey_hand_examples() {
        let ps: Vec<f64> = vec![0.01, 0.2, 0.3, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8, 0.9];
        // four values above 0.5 → 4 / (10 · 0.5) = 0.8
        assert_relative_eq!(storey_pi0(&ps, 0.5).unwrap(), 0.8, epsilon = 1e-15);
        let all_high = vec![0.9; 8];
        assert_eq!(storey_pi0(&all_high, 0.5).unwrap(), 1.0);
        let all_low = vec![0.01; 8];
        assert_eq!(storey_pi0(&all_low, 0.5).unwrap(), 0.0);
        assert!(storey_pi0(&ps, 0.0).is_err());
        assert!(storey_pi0(&ps, 1.0).is_err());
    }

    #[test]
    fn significance_boundaries_and_self_comparison() {
        let (ds, fit) = fitted(1000, 2, 207);
        let scores = score_all(&ds, &fit).unwrap();
        let none = call_significant(&scores, 0.0).unwrap();
        assert!(none.iter().all(|f| !f));
        let all = call_significant(&scores, 1.0).unwrap();
        for (flag, s) in all.iter().zip(&scores) {
            assert_eq!(*flag, s.prob < 1.0);
        }
        assert!(call_significant(&scores, 1.5).is_err());

        let counts = compare_significance(&scores, &scores, 0.05).unwrap();
        assert_eq!(counts.covariate_only, 0);
        assert_eq!(counts.baseline_only, 0);
        assert_eq!(
            counts.both + counts.covariate_only + counts.baseline_only + counts.neither,
            ds.len()
        );
    }

    #[test]
    fn rank_compare_identity_and_transposition() {
        let (ds, fit) = fitted(500, 2, 208);
        let scores = score_all(&ds, &fit).unwrap();
        let pairs = rank_compare(&scores, &scores).unwrap();
        assert!(pairs.iter().all(|p| p.displacement == 0));
        assert!(pairs.windows(2).all(|w| w[0].rank_cov < w[1].rank_cov));

        // Hand-built two-element swap.
        let mk = |id: &str, rank: usize| PosteriorScore {
            id: id.into(),
            p: 0.1,
            x: 0.0,
            bin: 1,
            prob: 0.1,
            ci_lo: 0.0,
            ci_hi: 1.0,
            rank,
        };
        let a = vec![mk("u", 1), mk("v", 2)];
        let b = vec![mk("u", 2), mk("v", 1)];
        let pairs = rank_compare(&a, &b).unwrap();
        assert_eq!(pairs[0].displacement, 1);
        assert_eq!(pairs[1].displacement, -1);

        let c = vec![mk("w", 1), mk("v", 2)];
        assert!(rank_compare(&a, &c).is_err());
    }

    #[test]
    fn threshold_curve_root_contract() {
        let (_, fit) = fitted(4000, 4, 209);
        let cutoffs = threshold_curve(&fit, 0.2, NullDist::StandardNormal).unwrap();
        assert_eq!(cutoffs.len(), 4);
        for (j0, z) in cutoffs.iter().enumerate() {
            if z.is_finite() {
                let p = clip_p(z_to_p(*z, NullDist::StandardNormal).unwrap());
                let (prob, _, _) = posterior_prob(p, j0 + 1, &fit).unwrap();
                assert_abs_diff_eq!(prob, 0.2, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn threshold_curve_never_significant_bin() {
        // Pure-null data: π0 ≈ 1 everywhere, posterior never drops to 0.05.
        let mut rng = crate::rng::stream_rng(210, 0);
        let records: Vec<TestRecord> = (0..2000)
            .map(|i| TestRecord {
                id: format!("n{i}"),
                p: rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12),
                x: rng.random(),
                z: None,
            })
            .collect();
        let ds = Dataset::new(records).unwrap();
        let fit = fit_one_bin(&ds).unwrap();
        let cutoffs = threshold_curve(&fit, 0.05, NullDist::StandardNormal).unwrap();
        assert_eq!(cutoffs, vec![f64::INFINITY]);
    }
}
