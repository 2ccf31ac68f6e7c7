//! Stored energy as a function of charging time for an SSH chain with
//! next-nearest-neighbor hopping, and the time of maximum power.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example charging_curve
//! ```

use quenchbat::models::{build_ssh, MaxNeighbor, SshHoppings};
use quenchbat::quench::default_power_tau_grid;
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let grid = BzGrid::thermodynamic();
    let thermal = ThermalSpec::at_beta(10.0);
    let chain = |j1, j1p, j2| build_ssh(SshHoppings { j1, j1p, j2, j3: 0.0, j3p: 0.0 }, MaxNeighbor::Second);

    for j2 in [0.1, 0.3] {
        let q = QuenchSpec::plateau(chain(1.0, 0.3, j2), chain(0.3, 1.0, j2));
        let taus: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64).collect();
        let curve = engine.energy_curve(&q, &taus, &grid, &thermal)?;
        println!("J2 = {j2}");
        for (t, e) in curve.tau.iter().zip(&curve.energy_per_site) {
            println!("    tau = {t:>4.1}  E = {e:.6}");
        }
        let p = engine.max_power(&q, &default_power_tau_grid(), &grid, &thermal)?;
        let e_inf = engine.stored_energy(&q, &grid, &thermal)?;
        println!("    tau -> inf  E = {e_inf:.6};  P_max = {:.6} at tau = {:.4}", p.power_per_site, p.tau);
    }
    Ok(())
}
