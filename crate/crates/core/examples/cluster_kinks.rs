//! Cluster-Ising chain: sweeping the starting coupling `λ0` at fixed quench
//! size `λ1 − λ0` puts a kink wherever either endpoint crosses `|λ| = 1`.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example cluster_kinks
//! ```

use quenchbat::models::{build_cluster_ising, ClusterIsingParams};
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let by = 0.3;
    let lambdas: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
    let cluster = |lambda| build_cluster_ising(ClusterIsingParams { lambda });

    for beta in [10.0, 0.1] {
        let sweep = sweep_plateau(
            &engine,
            "lambda0",
            &lambdas,
            |l| Ok(QuenchSpec::plateau(cluster(l), cluster(l + by))),
            &BzGrid::thermodynamic(),
            &ThermalSpec::at_beta(beta),
        )?;
        let report = detect_kinks(&sweep, analysis::DEFAULT_KINK_THRESHOLD)?;
        let at: Vec<String> = report.kinks.iter().map(|k| format!("{:.2}", k.parameter)).collect();
        println!("beta = {beta}: kinks at lambda0 = [{}]", at.join(", "));
    }
    Ok(())
}
