//! Finite SSH ring charged across its topological transition: the stored
//! energy settles on a plateau, then revives once the fastest modes wrap
//! around the ring.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example ssh_recurrence
//! ```

use quenchbat::models::build_ssh_nn;
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let thermal = ThermalSpec::at_beta(10.0);
    let q = QuenchSpec::plateau(build_ssh_nn(-7.5), build_ssh_nn(-0.5));

    for n in [50, 100, 200] {
        let r = recurrence_profile(&engine, &q, n, &thermal, &RecurrenceOptions::default())?;
        let capacity = engine.capacity_per_site(&q, &BzGrid::finite(n))?;
        let onset = r.onset.map_or("none".to_string(), |t| format!("{t:.2}"));
        println!(
            "N = {n:>3}: plateau from tau = {:.2} at {:.5}, recurrence at {onset}, E_max = {:.5} ({:.1}% of capacity)",
            r.plateau_start,
            r.plateau_mean,
            r.e_max,
            100.0 * r.e_max / capacity
        );
    }
    Ok(())
}
