//! Integration tests of the CLI pipeline and cross-module model properties.

use std::fs;
use std::path::Path;

use covafdr::binning::quantile_bins;
use covafdr::fit::fit_joint;
use covafdr::report::{fit_one_bin, posterior_prob, rank_compare, score_all};
use covafdr::sim::{simulate, SimConfig};

fn run(args: &[&str]) -> i32 {
    covafdr::cli::run_from(args.iter().copied())
}

fn simulate_to(dir: &Path, pi0_at_0: f64, pi0_at_1: f64, m: usize, seed: u64) {
    let code = run(&[
        "covafdr",
        "simulate",
        "--pibar0",
        "0.5",
        "--pi0-at-0",
        &pi0_at_0.to_string(),
        "--pi0-at-1",
        &pi0_at_1.to_string(),
        "--m",
        &m.to_string(),
        "--bins",
        "4",
        "--seed",
        &seed.to_string(),
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn cli_full_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    simulate_to(dir.path(), 0.9, 0.1, 6000, 12);
    let dataset = dir.path().join("dataset.csv");

    // fit with an explicit bin count; artifact appears
    assert_eq!(
        run(&[
            "covafdr",
            "fit",
            "--input",
            dataset.to_str().unwrap(),
            "--bins",
            "4",
            "--output-dir",
            d
        ]),
        0
    );
    let fit_path = dir.path().join("fit.txt");
    assert!(fit_path.exists());

    // threshold 0 marks nothing significant
    assert_eq!(
        run(&[
            "covafdr",
            "score",
            "--input",
            dataset.to_str().unwrap(),
            "--fit",
            fit_path.to_str().unwrap(),
            "--threshold",
            "0",
            "--output-dir",
            d
        ]),
        0
    );
    let scores = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    for line in scores.lines().skip(1) {
        assert!(
            line.ends_with(",false"),
            "threshold 0 produced a significant row"
        );
    }

    // strong modulation: covariate-only strictly exceeds baseline-only
    assert_eq!(
        run(&[
            "covafdr",
            "score",
            "--input",
            dataset.to_str().unwrap(),
            "--fit",
            fit_path.to_str().unwrap(),
            "--output-dir",
            d
        ]),
        0
    );
    let rows = covafdr::artifact::parse_scores(
        &fs::read_to_string(dir.path().join("scores.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(rows.len(), 6000);
    let cov_only = rows
        .iter()
        .filter(|r| r.prob < 0.05 && r.rank_onebin > 0)
        .count();
    assert!(cov_only > 0);

    // mismatched input (different dataset) → exit 3
    let other = tempfile::tempdir().unwrap();
    simulate_to(other.path(), 0.9, 0.1, 6000, 999);
    assert_eq!(
        run(&[
            "covafdr",
            "score",
            "--input",
            other.path().join("dataset.csv").to_str().unwrap(),
            "--fit",
            fit_path.to_str().unwrap(),
            "--output-dir",
            d
        ]),
        3
    );

    // missing artifact → exit 3; malformed input → exit 2
    assert_eq!(
        run(&[
            "covafdr",
            "plot-data",
            "--fit",
            dir.path().join("no_such.txt").to_str().unwrap(),
            "--scores",
            dir.path().join("scores.csv").to_str().unwrap(),
            "--output-dir",
            d
        ]),
        3
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,x,p\nrow1,0.5,1.7\n").unwrap();
    assert_eq!(
        run(&[
            "covafdr",
            "fit",
            "--input",
            bad.to_str().unwrap(),
            "--bins",
            "1",
            "--min-bin-size",
            "1",
            "--output-dir",
            d
        ]),
        2
    );

    // infeasible simulation target → exit 3
    assert_eq!(
        run(&[
            "covafdr",
            "simulate",
            "--pibar0",
            "0.95",
            "--pi0-at-0",
            "0.9",
            "--pi0-at-1",
            "0.1",
            "--output-dir",
            d
        ]),
        3
    );
}

#[test]
fn cli_one_bin_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    simulate_to(dir.path(), 0.8, 0.2, 3000, 77);
    assert_eq!(
        run(&[
            "covafdr",
            "fit",
            "--input",
            dir.path().join("dataset.csv").to_str().unwrap(),
            "--bins",
            "1",
            "--output-dir",
            d
        ]),
        0
    );
    let artifact = covafdr::artifact::parse_fit_artifact(
        &fs::read_to_string(dir.path().join("fit.txt")).unwrap(),
    )
    .unwrap();
    assert_eq!(artifact.primary.bins(), 1);
    assert!(artifact.primary.lambdas.is_none());
}

fn strong_and_weak_scores(
    m: usize,
) -> (
    Vec<covafdr::report::PosteriorScore>,
    Vec<covafdr::report::PosteriorScore>,
    Vec<covafdr::report::PosteriorScore>,
    Vec<covafdr::report::PosteriorScore>,
) {
    let mut out = Vec::new();
    for (hi, lo) in [(0.55, 0.45), (0.9, 0.1)] {
        let config = SimConfig {
            m,
            pibar0: 0.5,
            pi0_at_0: hi,
            pi0_at_1: lo,
            mu: 2.0,
            bins: 8,
            c: 1.0,
            seed: 314,
        };
        let (dataset, _) = simulate(&config).unwrap();
        let layout = quantile_bins(&dataset, config.bins, None, 50).unwrap();
        let fit = fit_joint(&dataset, &layout, config.c).unwrap();
        let onebin = fit_one_bin(&dataset).unwrap();
        out.push(score_all(&dataset, &fit).unwrap());
        out.push(score_all(&dataset, &onebin).unwrap());
    }
    let strong_one = out.pop().unwrap();
    let strong_cov = out.pop().unwrap();
    let weak_one = out.pop().unwrap();
    let weak_cov = out.pop().unwrap();
    (weak_cov, weak_one, strong_cov, strong_one)
}

#[test]
fn rank_displacement_grows_with_modulation_strength() {
    let (weak_cov, weak_one, strong_cov, strong_one) = strong_and_weak_scores(12_000);
    let mean_abs = |pairs: &[covafdr::report::RankPair]| -> f64 {
        pairs
            .iter()
            .map(|p| p.displacement.abs() as f64)
            .sum::<f64>()
            / pairs.len() as f64
    };
    let weak = mean_abs(&rank_compare(&weak_cov, &weak_one).unwrap());
    let strong = mean_abs(&rank_compare(&strong_cov, &strong_one).unwrap());
    assert!(
        strong > weak,
        "strong-modulation displacement {strong:.1} not larger than weak {weak:.1}"
    );
}

#[test]
fn smoothing_scale_monotonically_flattens_the_pi0_chain() {
    let config = SimConfig {
        m: 8_000,
        pibar0: 0.5,
        pi0_at_0: 0.9,
        pi0_at_1: 0.1,
        mu: 2.0,
        bins: 8,
        c: 1.0,
        seed: 2718,
    };
    let (dataset, _) = simulate(&config).unwrap();
    let layout = quantile_bins(&dataset, config.bins, None, 50).unwrap();
    let mut previous = f64::INFINITY;
    for c in [1.0, 10.0, 100.0, 1000.0] {
        let fit = fit_joint(&dataset, &layout, c).unwrap();
        let ss: f64 = (1..config.bins)
            .map(|j| {
                let d = fit.mode[3 * j] - fit.mode[3 * (j - 1)];
                d * d
            })
            .sum();
        assert!(
            ss <= previous * (1.0 + 1e-9),
            "pi0-chain roughness increased at c = {c}: {ss} > {previous}"
        );
        previous = ss;
    }
}

#[test]
fn weak_protocol_recovers_pi0_per_bin() {
    let config = SimConfig {
        m: 30_000,
        pibar0: 0.5,
        pi0_at_0: 0.55,
        pi0_at_1: 0.45,
        mu: 2.0,
        bins: 10,
        c: 1.0,
        seed: 8128,
    };
    let curve = config.curve().unwrap();
    let (dataset, _) = simulate(&config).unwrap();
    let layout = quantile_bins(&dataset, config.bins, None, 50).unwrap();
    let fit = fit_joint(&dataset, &layout, config.c).unwrap();
    for j in 1..=config.bins {
        let x_mid = (j as f64 - 0.5) / config.bins as f64;
        let err = (fit.bin_natural(j).pi0 - curve.eval(x_mid)).abs();
        assert!(err <= 0.1, "bin {j}: pi0 error {err:.3}");
    }
}

#[test]
fn cli_fit_with_zero_sentinel_bin() {
    // Covariates with a mass at exactly zero, like a truncated-at-zero
    // estimate; the sentinel gets bin 1 and the rest split by quantile.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut rng = covafdr::rng::stream_rng(55, 0);
    use rand::Rng;
    let mut csv = String::from("id,x,p\n");
    for i in 0..900 {
        let x = if i % 3 == 0 {
            0.0
        } else {
            rng.random::<f64>()
        };
        let p: f64 = rng.random();
        csv.push_str(&format!("r{i},{x},{}\n", p.clamp(1e-12, 1.0 - 1e-12)));
    }
    let input = dir.path().join("zeros.csv");
    fs::write(&input, csv).unwrap();
    assert_eq!(
        run(&[
            "covafdr",
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--bins",
            "4",
            "--zero-bin",
            "0",
            "--min-bin-size",
            "50",
            "--output-dir",
            d,
        ]),
        0
    );
    let artifact = covafdr::artifact::parse_fit_artifact(
        &fs::read_to_string(dir.path().join("fit.txt")).unwrap(),
    )
    .unwrap();
    assert_eq!(artifact.primary.layout.zero_sentinel, Some(0.0));
    assert_eq!(artifact.primary.layout.counts[0], 300);
    assert_eq!(artifact.primary.layout.counts.iter().sum::<usize>(), 900);
}

#[test]
fn threshold_cutoffs_follow_the_pi0_chain() {
    let config = SimConfig {
        m: 10_000,
        pibar0: 0.5,
        pi0_at_0: 0.9,
        pi0_at_1: 0.1,
        mu: 2.0,
        bins: 5,
        c: 1.0,
        seed: 777,
    };
    let (dataset, _) = simulate(&config).unwrap();
    let layout = quantile_bins(&dataset, config.bins, None, 50).unwrap();
    let fit = fit_joint(&dataset, &layout, config.c).unwrap();
    // The fitted pi0 chain decreases here, so the z cutoffs must not rise.
    let pi0s: Vec<f64> = (1..=5).map(|j| fit.bin_natural(j).pi0).collect();
    assert!(pi0s.windows(2).all(|w| w[1] < w[0]), "pi0 chain {pi0s:?}");
    let cutoffs =
        covafdr::report::threshold_curve(&fit, 0.05, covafdr::data::NullDist::StandardNormal)
            .unwrap();
    for w in cutoffs.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "cutoffs increased: {cutoffs:?}");
    }
}

#[test]
fn cli_validate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&[
        "covafdr",
        "validate",
        "--seed",
        "1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report = fs::read_to_string(dir.path().join("validation.txt")).unwrap();
    assert_eq!(report.matches("[PASS]").count(), 3);
}

#[test]
fn interval_widths_shrink_with_sample_size() {
    let mut widths = Vec::new();
    for &m in &[500usize, 5_000, 50_000] {
        let config = SimConfig {
            m,
            pibar0: 0.5,
            pi0_at_0: 0.55,
            pi0_at_1: 0.45,
            mu: 2.0,
            bins: 1,
            c: 1.0,
            seed: 1618,
        };
        let (dataset, _) = simulate(&config).unwrap();
        let fit = fit_one_bin(&dataset).unwrap();
        let mean_width: f64 = [0.005, 0.02, 0.05, 0.1]
            .iter()
            .map(|&p| {
                let (_, lo, hi) = posterior_prob(p, 1, &fit).unwrap();
                hi - lo
            })
            .sum::<f64>()
            / 4.0;
        widths.push(mean_width);
    }
    assert!(
        widths[0] > widths[1] && widths[1] > widths[2],
        "interval widths did not shrink: {widths:?}"
    );
}
