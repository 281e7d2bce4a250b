//! Validate the Gaussian approximation against a long random-walk Metropolis
//! run on the same posterior: the approximation's means should sit within
//! Monte Carlo error of the sampled means.
//!
//! ```bash
//! cargo run --release --example mcmc_crosscheck
//! ```

use covafdr::binning::quantile_bins;
use covafdr::fit::fit_joint;
use covafdr::sim::{simulate, SimConfig};
use covafdr::validate::mcmc_sample;

fn main() -> covafdr::Result<()> {
    let config = SimConfig {
        m: 2_000,
        pibar0: 0.5,
        pi0_at_0: 0.75,
        pi0_at_1: 0.25,
        mu: 2.0,
        bins: 5,
        c: 1.0,
        seed: 61,
    };
    let (dataset, _) = simulate(&config)?;
    let layout = quantile_bins(&dataset, config.bins, None, 50)?;
    let fit = fit_joint(&dataset, &layout, config.c)?;

    let mcmc = mcmc_sample(&dataset, &layout, fit.lambdas, 50_000, 10_000, 424_242)?;
    println!(
        "{} post-burn-in samples, acceptance rate {:.3}\n",
        mcmc.samples, mcmc.acceptance
    );

    let names = ["pi0_t", "xi_t", "theta_t"];
    println!("component      Gaussian mean   MCMC mean   |diff|   3*MCSE");
    for j in 0..config.bins {
        for (o, name) in names.iter().enumerate() {
            let k = 3 * j + o;
            let diff = (fit.mode[k] - mcmc.mean[k]).abs();
            println!(
                "bin {} {:<8} {:+.4}        {:+.4}     {:.4}   {:.4}",
                j + 1,
                name,
                fit.mode[k],
                mcmc.mean[k],
                diff,
                3.0 * mcmc.mcse[k]
            );
        }
    }
    Ok(())
}
