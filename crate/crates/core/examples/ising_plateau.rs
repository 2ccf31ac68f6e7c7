//! Asymptotic stored energy of the transverse-field Ising chain quenched from
//! `h = 0`, at several temperatures.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example ising_plateau
//! ```

use quenchbat::models::{build_ising, ising_plateau_closed_form, IsingParams};
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let fields: Vec<f64> = (0..=600).map(|i| -3.0 + 0.01 * i as f64).collect();
    let family = |h: f64| Ok(QuenchSpec::plateau(build_ising(IsingParams { h: 0.0 }), build_ising(IsingParams { h })));

    let mut columns = Vec::new();
    for thermal in [ThermalSpec::at_beta(0.5), ThermalSpec::at_beta(2.0), ThermalSpec::ground_state()] {
        columns.push(sweep_plateau(&engine, "h_f", &fields, family, &BzGrid::thermodynamic(), &thermal)?);
    }

    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "h_f", "beta=0.5", "beta=2", "beta=inf", "exact");
    for (i, h) in fields.iter().enumerate().step_by(50) {
        println!(
            "{h:>6.2} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            columns[0].values[i],
            columns[1].values[i],
            columns[2].values[i],
            ising_plateau_closed_form(*h)
        );
    }

    let kinks = detect_kinks(&columns[2], analysis::DEFAULT_KINK_THRESHOLD)?;
    let at: Vec<f64> = kinks.kinks.iter().map(|k| k.parameter).collect();
    println!("ground-state kinks at h_f = {at:?}");
    Ok(())
}
