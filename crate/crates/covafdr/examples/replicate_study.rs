//! Replicate study: simulate many datasets, fit the 10-bin and one-bin
//! models on each, and summarize the estimated posterior curves pointwise
//! across replicates against the exact truth.
//!
//! ```bash
//! cargo run --release --example replicate_study
//! ```

use covafdr::sim::{replicate_summary, SimConfig};

fn main() -> covafdr::Result<()> {
    let config = SimConfig {
        m: 30_000,
        pibar0: 0.5,
        pi0_at_0: 0.9,
        pi0_at_1: 0.1,
        mu: 2.0,
        bins: 10,
        c: 1.0,
        seed: 59,
    };
    let replicates = 20;
    let summary = replicate_summary(&config, replicates, 4)?;
    println!(
        "{} replicates of m = {} ({} failures), gamma = {:.4}\n",
        summary.replicates, config.m, summary.failures, summary.gamma
    );

    for &bin in &[1usize, 5, 9] {
        let b = &summary.bins[bin - 1];
        println!("bin {bin} (covariate midpoint {:.2}):", b.x_mid);
        println!("  p        truth    10-bin median [5%, 95%]      one-bin median");
        for &k in &[0usize, 25, 50, 75, 100] {
            println!(
                "  {:.4}   {:.4}   {:.4} [{:.4}, {:.4}]     {:.4}",
                summary.grid[k],
                b.truth[k],
                b.covariate.median[k],
                b.covariate.q05[k],
                b.covariate.q95[k],
                b.onebin.median[k]
            );
        }
        let mad = |est: &[f64]| -> f64 {
            est.iter()
                .zip(&b.truth)
                .map(|(e, t)| (e - t).abs())
                .sum::<f64>()
                / b.truth.len() as f64
        };
        println!(
            "  mean |median - truth| over the grid: 10-bin {:.4}, one-bin {:.4}\n",
            mad(&b.covariate.median),
            mad(&b.onebin.median)
        );
    }
    Ok(())
}
