//! Text artifacts: the fit file (layout, mode, covariance blocks, smoothing
//! parameters, diagnostics, plus the one-bin companion fit), the per-test
//! scores file, replicate summary files, and figure-data emission.
//!
//! All floats are written with 17 significant digits, which round-trips f64
//! exactly; files are UTF-8 with `.` decimals and deterministic row order.

use std::collections::BTreeMap;

use crate::banded::SymBanded;
use crate::binning::BinLayout;
use crate::error::{Error, Result};
use crate::fit::{ModelFit, SmoothingParams};
use crate::report::{PosteriorScore, SignificanceCounts};
use crate::sim::ReplicateSummary;

const ARTIFACT_HEADER: &str = "# covafdr fit artifact v1";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_list(vs: &[f64]) -> String {
    vs.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
}

/// FNV-1a 64-bit hash.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn layout_canonical(layout: &BinLayout, m: usize) -> String {
    let mut s = String::new();
    s.push_str(&format!("bins = {}\n", layout.bins));
    s.push_str(&format!("m = {m}\n"));
    s.push_str(&format!("min_bin_size = {}\n", layout.min_bin_size));
    s.push_str(&format!(
        "zero_sentinel = {}\n",
        layout.zero_sentinel.map_or("none".to_string(), fmt)
    ));
    s.push_str(&format!("edges = {}\n", fmt_list(&layout.edges)));
    s.push_str(&format!(
        "counts = {}\n",
        layout
            .counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    for (j, (lo, hi)) in layout.x_range.iter().enumerate() {
        s.push_str(&format!("x_range_{} = {},{}\n", j + 1, fmt(*lo), fmt(*hi)));
    }
    s
}

/// Hash tying a fit artifact to the binning of its training input.
pub fn layout_hash(layout: &BinLayout, m: usize) -> u64 {
    fnv1a(layout_canonical(layout, m).as_bytes())
}

fn write_fit_sections(out: &mut String, prefix: &str, fit: &ModelFit, m: usize) {
    out.push_str(&format!("[{prefix}.meta]\n"));
    out.push_str(&format!(
        "layout_hash = {:#018x}\n",
        layout_hash(&fit.layout, m)
    ));
    out.push_str(&format!("c = {}\n", fmt(fit.smoothing_scale)));
    out.push_str(&format!("ridge = {}\n", fmt(fit.ridge)));
    out.push_str(&format!("iterations = {}\n", fit.iterations));
    out.push_str(&format!("converged = {}\n", fit.converged));
    out.push_str(&format!("grad_inf_norm = {}\n", fmt(fit.grad_inf_norm)));
    out.push_str(&format!(
        "log_post_at_mode = {}\n",
        fmt(fit.log_post_at_mode)
    ));
    out.push_str(&format!(
        "stage1_converged = {}\n",
        fit.stage1_converged
            .iter()
            .map(|c| if *c { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(",")
    ));

    out.push_str(&format!("[{prefix}.layout]\n"));
    out.push_str(&layout_canonical(&fit.layout, m));

    out.push_str(&format!("[{prefix}.lambdas]\n"));
    match &fit.lambdas {
        Some(l) => {
            out.push_str(&format!(
                "smoothing = {},{},{},{}\n",
                fmt(l.lambda1),
                fmt(l.lambda2),
                fmt(l.lambda3),
                fmt(l.c)
            ));
        }
        None => out.push_str("smoothing = none\n"),
    }

    out.push_str(&format!("[{prefix}.mode]\n"));
    for j in 1..=fit.bins() {
        let t = fit.bin_mode(j);
        let n = fit.bin_natural(j);
        out.push_str(&format!(
            "bin_{j} = {},{},{},{},{},{}\n",
            fmt(t.pi0_t),
            fmt(t.xi_t),
            fmt(t.theta_t),
            fmt(n.pi0),
            fmt(n.xi),
            fmt(n.theta)
        ));
    }

    out.push_str(&format!("[{prefix}.covariance]\n"));
    for (j, blk) in fit.cov_blocks.iter().enumerate() {
        out.push_str(&format!(
            "bin_{} = {},{},{},{},{},{}\n",
            j + 1,
            fmt(blk[0][0]),
            fmt(blk[0][1]),
            fmt(blk[0][2]),
            fmt(blk[1][1]),
            fmt(blk[1][2]),
            fmt(blk[2][2])
        ));
    }

    out.push_str(&format!("[{prefix}.center]\n"));
    out.push_str(&format!("ridge_center = {}\n", fmt_list(&fit.ridge_center)));

    out.push_str(&format!("[{prefix}.precision]\n"));
    let n = fit.precision.n();
    for d in 0..=fit.precision.half_bandwidth() {
        let band: Vec<f64> = (d..n).map(|i| fit.precision.get(i, i - d)).collect();
        out.push_str(&format!("band_{d} = {}\n", fmt_list(&band)));
    }
}

/// Serialize the covariate-modulated fit together with its one-bin companion.
pub fn write_fit_artifact(fit: &ModelFit, onebin: &ModelFit, m: usize) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(ARTIFACT_HEADER);
    out.push('\n');
    write_fit_sections(&mut out, "primary", fit, m);
    write_fit_sections(&mut out, "onebin", onebin, m);
    out
}

struct Sections {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

impl Sections {
    fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                current = line[1..line.len() - 1].to_string();
                map.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("artifact line {} is not key = value", i + 1))
            })?;
            if current.is_empty() {
                return Err(Error::config("artifact data before any section header"));
            }
            map.get_mut(&current)
                .unwrap()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Sections { map })
    }

    fn section(&self, name: &str) -> Result<&BTreeMap<String, String>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::config(format!("artifact missing section [{name}]")))
    }

    fn get<'a>(&'a self, section: &str, key: &str) -> Result<&'a str> {
        self.section(section)?
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::config(format!("artifact missing `{key}` in [{section}]")))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::config(format!("bad float `{s}` in artifact")))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

fn parse_fit_sections(sections: &Sections, prefix: &str) -> Result<(ModelFit, usize)> {
    let meta = format!("{prefix}.meta");
    let layout_sec = format!("{prefix}.layout");

    let bins: usize = sections
        .get(&layout_sec, "bins")?
        .parse()
        .map_err(|_| Error::config("bad bins count"))?;
    let m: usize = sections
        .get(&layout_sec, "m")?
        .parse()
        .map_err(|_| Error::config("bad m"))?;
    let min_bin_size: usize = sections
        .get(&layout_sec, "min_bin_size")?
        .parse()
        .map_err(|_| Error::config("bad min_bin_size"))?;
    let zero_sentinel = match sections.get(&layout_sec, "zero_sentinel")? {
        "none" => None,
        other => Some(parse_f64(other)?),
    };
    let edges = parse_f64_list(sections.get(&layout_sec, "edges")?)?;
    let counts: Vec<usize> = {
        let raw = sections.get(&layout_sec, "counts")?;
        raw.split(',')
            .map(|c| c.trim().parse().map_err(|_| Error::config("bad count")))
            .collect::<Result<_>>()?
    };
    let mut x_range = Vec::with_capacity(bins);
    for j in 1..=bins {
        let raw = sections.get(&layout_sec, &format!("x_range_{j}"))?;
        let vals = parse_f64_list(raw)?;
        if vals.len() != 2 {
            return Err(Error::config(format!("x_range_{j} needs two values")));
        }
        x_range.push((vals[0], vals[1]));
    }
    let layout = BinLayout {
        bins,
        edges,
        zero_sentinel,
        // Per-record assignment is not serialized; scoring re-derives bins
        // from the edges.
        assignment: Vec::new(),
        counts,
        x_range,
        min_bin_size,
    };

    let lambdas = match sections.get(&format!("{prefix}.lambdas"), "smoothing")? {
        "none" => None,
        other => {
            let vals = parse_f64_list(other)?;
            if vals.len() != 4 {
                return Err(Error::config("smoothing needs four values"));
            }
            Some(SmoothingParams::new(vals[0], vals[1], vals[2], vals[3])?)
        }
    };

    let mode_sec = format!("{prefix}.mode");
    let mut mode = Vec::with_capacity(3 * bins);
    for j in 1..=bins {
        let vals = parse_f64_list(sections.get(&mode_sec, &format!("bin_{j}"))?)?;
        if vals.len() != 6 {
            return Err(Error::config(format!("mode bin_{j} needs six values")));
        }
        mode.extend_from_slice(&vals[..3]);
    }

    let cov_sec = format!("{prefix}.covariance");
    let mut cov_blocks = Vec::with_capacity(bins);
    for j in 1..=bins {
        let v = parse_f64_list(sections.get(&cov_sec, &format!("bin_{j}"))?)?;
        if v.len() != 6 {
            return Err(Error::config(format!(
                "covariance bin_{j} needs six values"
            )));
        }
        cov_blocks.push([[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]]);
    }

    let ridge_center = parse_f64_list(sections.get(&format!("{prefix}.center"), "ridge_center")?)?;

    let prec_sec = format!("{prefix}.precision");
    let n = 3 * bins;
    let mut precision = SymBanded::zeros(n, 3);
    for d in 0..=3usize {
        let band = parse_f64_list(sections.get(&prec_sec, &format!("band_{d}"))?)?;
        if band.len() != n - d.min(n) {
            return Err(Error::config(format!("band_{d} has wrong length")));
        }
        for (offset, v) in band.into_iter().enumerate() {
            let i = offset + d;
            precision.set(i, i - d, v);
        }
    }

    let stage1_converged = sections
        .get(&meta, "stage1_converged")?
        .split(',')
        .map(|s| s.trim() == "1")
        .collect();

    let fit = ModelFit {
        layout,
        mode,
        precision,
        cov_blocks,
        lambdas,
        smoothing_scale: parse_f64(sections.get(&meta, "c")?)?,
        ridge: parse_f64(sections.get(&meta, "ridge")?)?,
        ridge_center,
        log_post_at_mode: parse_f64(sections.get(&meta, "log_post_at_mode")?)?,
        grad_inf_norm: parse_f64(sections.get(&meta, "grad_inf_norm")?)?,
        iterations: sections
            .get(&meta, "iterations")?
            .parse()
            .map_err(|_| Error::config("bad iterations"))?,
        converged: sections.get(&meta, "converged")? == "true",
        stage1_converged,
    };
    Ok((fit, m))
}

/// Parsed fit artifact: the covariate-modulated fit, its one-bin companion,
/// and the training record count.
pub struct FitArtifact {
    pub primary: ModelFit,
    pub onebin: ModelFit,
    pub m: usize,
}

pub fn parse_fit_artifact(text: &str) -> Result<FitArtifact> {
    if !text.starts_with(ARTIFACT_HEADER) {
        return Err(Error::config(
            "not a covafdr fit artifact (missing header line)",
        ));
    }
    let sections = Sections::parse(text)?;
    let (primary, m) = parse_fit_sections(&sections, "primary")?;
    let (onebin, m2) = parse_fit_sections(&sections, "onebin")?;
    if m != m2 {
        return Err(Error::config("primary and one-bin sections disagree on m"));
    }
    Ok(FitArtifact { primary, onebin, m })
}

// ---------------------------------------------------------------------------
// Scores file
// ---------------------------------------------------------------------------

pub const SCORES_HEADER: &str = "id,p,x,bin,prob,ci_lo,ci_hi,rank_cov,rank_onebin,significant";

/// Render the scores file: covariate-modulated and one-bin scores joined row
/// by row (same input order), with the significance flag from the covariate
/// scores at `threshold`.
pub fn write_scores(
    covariate: &[PosteriorScore],
    onebin: &[PosteriorScore],
    threshold: f64,
) -> Result<String> {
    if covariate.len() != onebin.len() {
        return Err(Error::input("score sets differ in length"));
    }
    let mut out = String::with_capacity(64 * covariate.len());
    out.push_str(SCORES_HEADER);
    out.push('\n');
    for (c, o) in covariate.iter().zip(onebin) {
        if c.id != o.id {
            return Err(Error::input("score sets differ in id order"));
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.id,
            fmt(c.p),
            fmt(c.x),
            c.bin,
            fmt(c.prob),
            fmt(c.ci_lo),
            fmt(c.ci_hi),
            c.rank,
            o.rank,
            c.prob < threshold
        ));
    }
    Ok(out)
}

/// Minimal scores-file row used by downstream figure emission.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub p: f64,
    pub x: f64,
    pub bin: usize,
    pub prob: f64,
    pub rank_cov: usize,
    pub rank_onebin: usize,
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty scores file"))?;
    if header != SCORES_HEADER {
        return Err(Error::config("unrecognized scores file header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::config(format!("scores row {} malformed", i + 2)));
        }
        rows.push(ScoreRow {
            id: f[0].to_string(),
            p: parse_f64(f[1])?,
            x: parse_f64(f[2])?,
            bin: f[3].parse().map_err(|_| Error::config("bad bin"))?,
            prob: parse_f64(f[4])?,
            rank_cov: f[7].parse().map_err(|_| Error::config("bad rank"))?,
            rank_onebin: f[8].parse().map_err(|_| Error::config("bad rank"))?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Simulation outputs
// ---------------------------------------------------------------------------

/// Truth file for a simulated dataset: `id,null,true_posterior`.
pub fn write_truth(ids: &[String], truth: &crate::sim::SimTruth) -> String {
    let mut out = String::with_capacity(32 * ids.len());
    out.push_str("id,null,true_posterior\n");
    for (i, id) in ids.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            id,
            u8::from(truth.null[i]),
            fmt(truth.true_posterior[i])
        ));
    }
    out
}

fn summary_config_block(s: &ReplicateSummary) -> String {
    let c = &s.config;
    format!(
        "# m = {}\n# pibar0 = {}\n# pi0_at_0 = {}\n# pi0_at_1 = {}\n# mu = {}\n\
         # bins = {}\n# c = {}\n# seed = {}\n# gamma = {}\n# replicates = {}\n# failures = {}\n",
        c.m,
        fmt(c.pibar0),
        fmt(c.pi0_at_0),
        fmt(c.pi0_at_1),
        fmt(c.mu),
        c.bins,
        fmt(c.c),
        c.seed,
        fmt(s.gamma),
        s.replicates,
        s.failures
    )
}

/// Replicate quantile summary: one row per (method, bin, grid p-value).
pub fn write_summary(s: &ReplicateSummary) -> String {
    let mut out = summary_config_block(s);
    out.push_str("method,bin,p,truth,q05,median,q95\n");
    for b in &s.bins {
        for (k, &p) in s.grid.iter().enumerate() {
            out.push_str(&format!(
                "covariate,{},{},{},{},{},{}\n",
                b.bin,
                fmt(p),
                fmt(b.truth[k]),
                fmt(b.covariate.q05[k]),
                fmt(b.covariate.median[k]),
                fmt(b.covariate.q95[k])
            ));
        }
        for (k, &p) in s.grid.iter().enumerate() {
            out.push_str(&format!(
                "onebin,{},{},{},{},{},{}\n",
                b.bin,
                fmt(p),
                fmt(b.truth[k]),
                fmt(b.onebin.q05[k]),
                fmt(b.onebin.median[k]),
                fmt(b.onebin.q95[k])
            ));
        }
    }
    out
}

/// Raw single-replicate curves (no quantiles): `method,bin,p,truth,estimate`.
pub fn write_curves(s: &ReplicateSummary) -> String {
    let mut out = summary_config_block(s);
    out.push_str("method,bin,p,truth,estimate\n");
    for b in &s.bins {
        for (k, &p) in s.grid.iter().enumerate() {
            out.push_str(&format!(
                "covariate,{},{},{},{}\n",
                b.bin,
                fmt(p),
                fmt(b.truth[k]),
                fmt(b.covariate.median[k])
            ));
        }
        for (k, &p) in s.grid.iter().enumerate() {
            out.push_str(&format!(
                "onebin,{},{},{},{}\n",
                b.bin,
                fmt(p),
                fmt(b.truth[k]),
                fmt(b.onebin.median[k])
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Figure data
// ---------------------------------------------------------------------------

/// Posterior-probability curves per bin with pointwise intervals
/// (`bin,p,prob,ci_lo,ci_hi`), on a fixed grid ending at p = 1 − 1e−12.
pub fn write_posterior_curves(fit: &ModelFit) -> Result<String> {
    let mut grid: Vec<f64> = (0..101)
        .map(|i| 0.001 + (0.999 - 0.001) * i as f64 / 100.0)
        .collect();
    grid.push(1.0 - 1e-12);
    let mut out = String::new();
    out.push_str("bin,p,prob,ci_lo,ci_hi\n");
    for j in 1..=fit.bins() {
        for &p in &grid {
            let (prob, lo, hi) = crate::report::posterior_prob(p, j, fit)?;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                j,
                fmt(p),
                fmt(prob),
                fmt(lo),
                fmt(hi)
            ));
        }
    }
    Ok(out)
}

/// Per-bin z significance cutoffs for the covariate fit and its one-bin
/// companion (`bin,x_min,x_max,z_cutoff,z_cutoff_onebin`).
pub fn write_threshold_steps(fit: &ModelFit, onebin: &ModelFit, threshold: f64) -> Result<String> {
    let cov =
        crate::report::threshold_curve(fit, threshold, crate::data::NullDist::StandardNormal)?;
    let one =
        crate::report::threshold_curve(onebin, threshold, crate::data::NullDist::StandardNormal)?;
    let mut out = String::new();
    out.push_str("bin,x_min,x_max,z_cutoff,z_cutoff_onebin\n");
    for j in 1..=fit.bins() {
        let (lo, hi) = fit.layout.x_range[j - 1];
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            j,
            fmt(lo),
            fmt(hi),
            fmt(cov[j - 1]),
            fmt(one[0])
        ));
    }
    Ok(out)
}

/// Per-bin π0 step function with logistic-mapped intervals
/// (`bin,x_min,x_max,pi0,ci_lo,ci_hi`).
pub fn write_pi0_steps(fit: &ModelFit) -> Result<String> {
    let mut out = String::new();
    out.push_str("bin,x_min,x_max,pi0,ci_lo,ci_hi\n");
    for j in 1..=fit.bins() {
        let est = crate::report::pi0_interval(fit, j)?;
        let (lo, hi) = fit.layout.x_range[j - 1];
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            j,
            fmt(lo),
            fmt(hi),
            fmt(est.pi0),
            fmt(est.lo),
            fmt(est.hi)
        ));
    }
    Ok(out)
}

/// Rank-shift pairs from a parsed scores file (`id,rank_cov,rank_onebin,displacement`),
/// sorted by the covariate rank.
pub fn write_rank_pairs(rows: &[ScoreRow]) -> String {
    let mut sorted: Vec<&ScoreRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.rank_cov);
    let mut out = String::new();
    out.push_str("id,rank_cov,rank_onebin,displacement\n");
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.id,
            r.rank_cov,
            r.rank_onebin,
            r.rank_onebin as i64 - r.rank_cov as i64
        ));
    }
    out
}

/// Rendered significance-count comparison (printed by the score command).
pub fn render_counts(counts: &SignificanceCounts, threshold: f64) -> String {
    format!(
        "significance at threshold {threshold}: both = {}, covariate-only = {}, \
         baseline-only = {}, neither = {}\n",
        counts.both, counts.covariate_only, counts.baseline_only, counts.neither
    )
}
