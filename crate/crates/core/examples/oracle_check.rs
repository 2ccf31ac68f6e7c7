//! Cross-checks the closed-form stored energy against brute-force evolution
//! of every momentum block on a small ring.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example oracle_check
//! ```

use quenchbat::models::{build_ssh, build_xy, MaxNeighbor, SshHoppings, XyParams};
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let grid = BzGrid::finite(12);

    let xy = |gamma, h| build_xy(XyParams { gamma, h });
    let q = QuenchSpec::new(xy(1.0, 0.3), xy(-0.4, 1.2), ChargingTime::Finite(2.5));
    let thermal = ThermalSpec::at_beta(1.5);
    let formula = engine.stored_energy(&q, &grid, &thermal)?;
    let oracle = engine.oracle_stored_energy(&q, q.tau(), &grid, &thermal, Default::default())?;
    println!("XY:  formula {formula:.15}  oracle {oracle:.15}  diff {:.1e}", (formula - oracle).abs());

    let a = SshHoppings { j1: 1.0, j1p: 0.4, j2: 0.2, j3: 0.1, j3p: -0.3 };
    let b = SshHoppings { j1: 0.3, j1p: 1.1, j2: -0.1, j3: 0.0, j3p: 0.2 };
    let q = QuenchSpec::new(build_ssh(a, MaxNeighbor::Third), build_ssh(b, MaxNeighbor::Third), ChargingTime::Finite(4.0));
    let thermal = ThermalSpec::new(Beta::Finite(3.0), 0.25)?;
    let formula = engine.stored_energy(&q, &grid, &thermal)?;
    let oracle = engine.oracle_stored_energy(&q, q.tau(), &grid, &thermal, Default::default())?;
    println!("SSH: formula {formula:.15}  oracle {oracle:.15}  diff {:.1e}", (formula - oracle).abs());
    Ok(())
}
