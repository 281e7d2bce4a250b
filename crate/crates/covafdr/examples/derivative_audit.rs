//! Numerical audits: analytic joint gradient against central finite
//! differences, and quadrature of the mixture density against unit mass.
//!
//! ```bash
//! cargo run --release --example derivative_audit
//! ```

use covafdr::binning::quantile_bins;
use covafdr::fit::{bin_data, estimate_lambdas, fit_bin_initial, JointObjective, BASE_RIDGE};
use covafdr::rng::stream_rng;
use covafdr::sim::{simulate, SimConfig};
use covafdr::validate::{grad_check, normalization_audit, well_conditioned_point};

fn main() -> covafdr::Result<()> {
    let config = SimConfig {
        m: 3_000,
        pibar0: 0.5,
        pi0_at_0: 0.8,
        pi0_at_1: 0.2,
        mu: 2.0,
        bins: 4,
        c: 1.0,
        seed: 73,
    };
    let (dataset, _) = simulate(&config)?;
    let layout = quantile_bins(&dataset, config.bins, None, 50)?;
    let bins = bin_data(&dataset, &layout);

    let mut warm = None;
    let mut init = Vec::new();
    let mut inits = Vec::new();
    for data in &bins {
        let r = fit_bin_initial(data, warm);
        warm = Some(r.params);
        init.extend(r.params.as_array());
        inits.push(r.params);
    }
    let lambdas = estimate_lambdas(&inits, config.c)?;
    let objective = JointObjective::new(&bins, Some(lambdas), BASE_RIDGE, init.clone());

    let mut rng = stream_rng(73, 9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let point = well_conditioned_point(&objective, &init, &mut rng)?;
        worst = worst.max(grad_check(&objective, &point, 1e-5)?);
    }
    println!("gradient vs central differences over 20 points: worst relative error {worst:.3e}");

    let audit = normalization_audit(100, 73);
    println!(
        "density mass over 100 random parameter triples: worst |integral - 1| = {:.3e}",
        audit.worst_deviation
    );
    println!(
        "  attained at pi0 = {:.4}, xi = {:.4}, theta = {:.4}",
        audit.worst_params.pi0, audit.worst_params.xi, audit.worst_params.theta
    );
    Ok(())
}
