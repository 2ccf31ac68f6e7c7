//! Maximum charging power `max_τ ΔE(τ)/τ` grows linearly with the ring size.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example power_scaling
//! ```

use quenchbat::models::{build_cluster_ising, build_ssh_nn, ClusterIsingParams};
use quenchbat::quench::default_power_tau_grid;
use quenchbat::*;

fn report(name: &str, fit: &ScalingFit) {
    println!("{name}: P_max = {:.5} N + {:.2e}   (R^2 = {:.8})", fit.slope, fit.intercept, fit.r_squared);
    for (n, p) in &fit.points {
        println!("    N = {n:>3}  P_max = {p:.5}");
    }
}

fn main() -> Result<()> {
    let engine = Engine::new();
    let taus = default_power_tau_grid();
    let thermal = ThermalSpec::at_beta(10.0);
    let sizes = [50, 100, 200, 400];

    let cluster = |lambda| build_cluster_ising(ClusterIsingParams { lambda });
    let q = QuenchSpec::plateau(cluster(0.7), cluster(1.0));
    report("cluster-Ising 0.7 -> 1.0", &power_scaling(&engine, &q, &sizes, &taus, &thermal)?);

    let q = QuenchSpec::plateau(build_ssh_nn(-7.5), build_ssh_nn(-0.5));
    report("SSH -7.5 -> -0.5", &power_scaling(&engine, &q, &sizes, &taus, &thermal)?);
    Ok(())
}
