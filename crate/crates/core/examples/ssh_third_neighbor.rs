//! SSH chain with third-neighbor hopping, charged along the line
//! `δ3 = 3 δ1 − 0.5`. The plateau peaks where the line crosses the `k = π`
//! gap closing.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example ssh_third_neighbor
//! ```

use quenchbat::models::{ssh_constrained_protocol, SshLineProtocol};
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let line = |d0| SshLineProtocol { delta1_0: d0, delta1_1: 0.1, m: 3.0, q: -0.5, alpha: 1.0, beta_c: 1.0, r: 0.0 };
    let starts: Vec<f64> = (0..=390).map(|i| -0.12 + 0.001 * i as f64).collect();

    let sweep = sweep_plateau(
        &engine,
        "delta1_0",
        &starts,
        |d0| ssh_constrained_protocol(line(d0)),
        &BzGrid::thermodynamic(),
        &ThermalSpec::ground_state(),
    )?;
    let (i, e) = sweep.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    println!("largest plateau {e:.6} at delta1_0 = {:.3}", starts[i]);
    if let Some(c) = line(0.0).critical_delta1() {
        println!("gap closes at delta1 = {c:.3}, reached by phase B from delta1_0 = {:.3}", c - 0.1);
    }

    // Endpoints whose third-neighbor hoppings dominate are rejected.
    match ssh_constrained_protocol(line(0.5)) {
        Err(e) => println!("delta1_0 = 0.5 rejected: {e}"),
        Ok(_) => println!("delta1_0 = 0.5 accepted"),
    }
    Ok(())
}
