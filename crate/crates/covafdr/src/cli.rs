//! Command-line front end: `fit`, `score`, `simulate`, `validate`, and
//! `plot-data` subcommands over the library pipeline.
//!
//! Every subcommand is a pure function of its flags, input files, and seed;
//! output files are written to a temporary sibling and renamed, so failures
//! leave no partial artifacts. Exit codes: 0 success, 2 parse/input error,
//! 3 configuration or missing-artifact error, 4 numerical failure.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::artifact::{
    layout_hash, parse_fit_artifact, parse_scores, render_counts, write_curves, write_fit_artifact,
    write_pi0_steps, write_posterior_curves, write_rank_pairs, write_scores, write_summary,
    write_threshold_steps, write_truth,
};
use crate::binning::quantile_bins;
use crate::data::{parse_dataset, write_dataset, Dataset, NullDist};
use crate::error::{Error, Result};
use crate::fit::{fit_joint, ModelFit, ParamKind};
use crate::mixture::logistic;
use crate::report::{compare_significance, fit_one_bin, pi0_interval, score_all, storey_pi0};
use crate::sim::{replicate_summary, simulate, SimConfig};
use crate::validate::run_validation;

#[derive(Debug, Parser)]
#[command(
    name = "covafdr",
    version,
    about = "Covariate-modulated empirical Bayes multiple testing"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the binned uniform-beta mixture with smoothing across bins
    Fit(FitArgs),
    /// Score a dataset against a fit artifact and compare with the one-bin baseline
    Score(ScoreArgs),
    /// Simulate datasets and summarize replicate fits
    Simulate(SimulateArgs),
    /// Run the numerical validation battery
    Validate(ValidateArgs),
    /// Emit figure-data files from a fit artifact and a scores file
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Input table with columns id, x, and p or z
    #[arg(long)]
    input: PathBuf,
    /// Number of covariate bins
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Smoothing scale c
    #[arg(long, default_value_t = 1.0)]
    smoothing_scale: f64,
    /// Covariate value whose records form bin 1
    #[arg(long)]
    zero_bin: Option<f64>,
    /// Minimum records per non-sentinel bin
    #[arg(long, default_value_t = 50)]
    min_bin_size: usize,
    /// Directory for the fit artifact
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// The dataset the fit artifact was produced from
    #[arg(long)]
    input: PathBuf,
    /// Fit artifact written by `covafdr fit`
    #[arg(long)]
    fit: PathBuf,
    /// Posterior-probability significance threshold
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Tail cutoff for the tail-count pi0 estimate
    #[arg(long, default_value_t = 0.5)]
    storey_lambda: f64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Tests per dataset
    #[arg(long, default_value_t = 30000)]
    m: usize,
    /// Target mean of pi0(x) over [0,1]
    #[arg(long)]
    pibar0: f64,
    /// pi0 at x = 0
    #[arg(long)]
    pi0_at_0: f64,
    /// pi0 at x = 1
    #[arg(long)]
    pi0_at_1: f64,
    /// Alternative mean of the test statistic
    #[arg(long, default_value_t = 2.0)]
    mu: f64,
    /// Bins for the covariate-modulated analysis
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Smoothing scale c
    #[arg(long, default_value_t = 1.0)]
    smoothing_scale: f64,
    /// Number of replicate fits to summarize
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for replicate fits
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PlotDataArgs {
    /// Fit artifact written by `covafdr fit`
    #[arg(long)]
    fit: PathBuf,
    /// Scores file written by `covafdr score`
    #[arg(long)]
    scores: PathBuf,
    /// Threshold for the significance step curve
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

/// Write a file atomically: temp sibling then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path)
        .map_err(|e| Error::config(format!("cannot open input {}: {e}", path.display())))?;
    parse_dataset(BufReader::new(file), None, NullDist::StandardNormal)
}

fn natural_interval(fit: &ModelFit, j: usize, which: ParamKind) -> Result<(f64, f64, f64)> {
    let (mean, sd) = fit.marginal(j, which)?;
    let map = |t: f64| match which {
        ParamKind::Pi0 | ParamKind::Xi => logistic(t),
        ParamKind::Theta => 2.0 + t.exp(),
    };
    Ok((map(mean), map(mean - 1.96 * sd), map(mean + 1.96 * sd)))
}

fn print_fit_table(fit: &ModelFit) -> Result<()> {
    println!("bin    count  pi0 [95% int]              xi [95% int]               theta [95% int]");
    for j in 1..=fit.bins() {
        let (pi0, pi0_lo, pi0_hi) = natural_interval(fit, j, ParamKind::Pi0)?;
        let (xi, xi_lo, xi_hi) = natural_interval(fit, j, ParamKind::Xi)?;
        let (th, th_lo, th_hi) = natural_interval(fit, j, ParamKind::Theta)?;
        println!(
            "{:<6} {:<6} {:.4} [{:.4}, {:.4}]    {:.4} [{:.4}, {:.4}]     {:.3} [{:.3}, {:.3}]",
            j,
            fit.layout.counts[j - 1],
            pi0,
            pi0_lo,
            pi0_hi,
            xi,
            xi_lo,
            xi_hi,
            th,
            th_lo,
            th_hi
        );
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let dataset = load_dataset(&args.input)?;
    let layout = quantile_bins(&dataset, args.bins, args.zero_bin, args.min_bin_size)?;
    let fit = fit_joint(&dataset, &layout, args.smoothing_scale)?;
    let onebin = fit_one_bin(&dataset)?;

    if !fit.converged {
        eprintln!(
            "warning: joint fit did not meet the convergence tolerance \
             (gradient inf-norm {:.3e} after {} iterations)",
            fit.grad_inf_norm, fit.iterations
        );
    }
    print_fit_table(&fit)?;
    let est = pi0_interval(&onebin, 1)?;
    println!(
        "one-bin model: pi0 = {:.4} [{:.4}, {:.4}]",
        est.pi0, est.lo, est.hi
    );

    let path = args.output_dir.join("fit.txt");
    write_atomic(&path, &write_fit_artifact(&fit, &onebin, dataset.len()))?;
    println!("fit artifact written to {}", path.display());
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let text = fs::read_to_string(&args.fit).map_err(|e| {
        Error::config(format!(
            "cannot read fit artifact {}: {e}",
            args.fit.display()
        ))
    })?;
    let artifact = parse_fit_artifact(&text)?;
    let dataset = load_dataset(&args.input)?;

    // The artifact is tied to the binning of its training input.
    let recomputed = quantile_bins(
        &dataset,
        artifact.primary.layout.bins,
        artifact.primary.layout.zero_sentinel,
        artifact.primary.layout.min_bin_size,
    )?;
    let expected = layout_hash(&artifact.primary.layout, artifact.m);
    let got = layout_hash(&recomputed, dataset.len());
    if expected != got {
        return Err(Error::config(format!(
            "layout hash mismatch: artifact {expected:#018x} vs input {got:#018x}; \
             the input is not the dataset this fit was trained on"
        )));
    }

    let cov_scores = score_all(&dataset, &artifact.primary)?;
    let one_scores = score_all(&dataset, &artifact.onebin)?;
    let counts = compare_significance(&cov_scores, &one_scores, args.threshold)?;
    print!("{}", render_counts(&counts, args.threshold));

    let storey = storey_pi0(&dataset.p_values(), args.storey_lambda)?;
    if storey == 0.0 {
        eprintln!("warning: tail-count pi0 estimate is 0 (no p-values above the cutoff)");
    }
    let onebin_est = pi0_interval(&artifact.onebin, 1)?;
    println!(
        "pi0 estimates: one-bin {:.4} [{:.4}, {:.4}], tail-count (lambda = {}) {:.4}",
        onebin_est.pi0, onebin_est.lo, onebin_est.hi, args.storey_lambda, storey
    );

    let path = args.output_dir.join("scores.csv");
    write_atomic(
        &path,
        &write_scores(&cov_scores, &one_scores, args.threshold)?,
    )?;
    println!("scores written to {}", path.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = SimConfig {
        m: args.m,
        pibar0: args.pibar0,
        pi0_at_0: args.pi0_at_0,
        pi0_at_1: args.pi0_at_1,
        mu: args.mu,
        bins: args.bins,
        c: args.smoothing_scale,
        seed: args.seed,
    };
    let (dataset, truth) = simulate(&config)?;

    let mut buf = Vec::new();
    write_dataset(&dataset, &mut buf)?;
    write_atomic(
        &args.output_dir.join("dataset.csv"),
        std::str::from_utf8(&buf).expect("dataset text is utf-8"),
    )?;
    let ids: Vec<String> = dataset.records().iter().map(|r| r.id.clone()).collect();
    write_atomic(
        &args.output_dir.join("truth.csv"),
        &write_truth(&ids, &truth),
    )?;

    let summary = replicate_summary(&config, args.replicates, args.jobs)?;
    if summary.failures > 0 {
        eprintln!(
            "warning: {} of {} replicate fits failed and were excluded",
            summary.failures, summary.replicates
        );
    }
    if args.replicates >= 2 {
        write_atomic(
            &args.output_dir.join("summary.csv"),
            &write_summary(&summary),
        )?;
        println!(
            "dataset, truth, and {}-replicate summary written to {}",
            args.replicates,
            args.output_dir.display()
        );
    } else {
        write_atomic(&args.output_dir.join("curves.csv"), &write_curves(&summary))?;
        println!(
            "dataset, truth, and raw curves written to {}",
            args.output_dir.display()
        );
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let report = run_validation(args.seed)?;
    let rendered = report.render();
    print!("{rendered}");
    write_atomic(&args.output_dir.join("validation.txt"), &rendered)?;
    if !report.all_passed() {
        return Err(Error::numerical("validation checks failed"));
    }
    Ok(())
}

fn cmd_plotdata(args: &PlotDataArgs) -> Result<()> {
    let text = fs::read_to_string(&args.fit).map_err(|e| {
        Error::config(format!(
            "cannot read fit artifact {}: {e}",
            args.fit.display()
        ))
    })?;
    let artifact = parse_fit_artifact(&text)?;
    let scores_text = fs::read_to_string(&args.scores)
        .map_err(|e| Error::config(format!("cannot read scores {}: {e}", args.scores.display())))?;
    let rows = parse_scores(&scores_text)?;

    write_atomic(
        &args.output_dir.join("fig1_posterior_curves.csv"),
        &write_posterior_curves(&artifact.primary)?,
    )?;
    write_atomic(
        &args.output_dir.join("fig2_threshold_steps.csv"),
        &write_threshold_steps(&artifact.primary, &artifact.onebin, args.threshold)?,
    )?;
    write_atomic(
        &args.output_dir.join("fig3_pi0_steps.csv"),
        &write_pi0_steps(&artifact.primary)?,
    )?;
    write_atomic(
        &args.output_dir.join("fig4_rank_pairs.csv"),
        &write_rank_pairs(&rows),
    )?;
    println!("figure data written to {}", args.output_dir.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Score(a) => cmd_score(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::PlotData(a) => cmd_plotdata(a),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
