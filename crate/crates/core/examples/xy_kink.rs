//! XY chain quenched from `(γ, h) = (1, 0)` to `(γ1, 0)`: the plateau is flat
//! for `γ1 < 0` and bends at the anisotropy transition.
//!
//! Run with:
//!
//! ```
//! cargo run --release --example xy_kink
//! ```

use quenchbat::models::{build_xy, xy_plateau_closed_form, xy_plateau_from_antiderivative, XyParams};
use quenchbat::*;

fn main() -> Result<()> {
    let engine = Engine::new();
    let gammas: Vec<f64> = (0..=600).map(|i| -3.0 + 0.01 * i as f64).collect();
    let sweep = sweep_plateau(
        &engine,
        "gamma1",
        &gammas,
        |g| Ok(QuenchSpec::plateau(build_xy(XyParams { gamma: 1.0, h: 0.0 }), build_xy(XyParams { gamma: g, h: 0.0 }))),
        &BzGrid::thermodynamic(),
        &ThermalSpec::ground_state(),
    )?;

    for g in [-2.0, -0.5, 0.25, 0.5, 2.0] {
        let i = gammas.iter().position(|x| (x - g).abs() < 1e-9).unwrap();
        println!(
            "gamma1 = {g:>5.2}: engine {:.12}  closed form {:.12}  antiderivative {:.12}",
            sweep.values[i],
            xy_plateau_closed_form(g),
            xy_plateau_from_antiderivative(g)?
        );
    }

    for k in detect_kinks(&sweep, analysis::DEFAULT_KINK_THRESHOLD)?.kinks {
        println!("kink at gamma1 = {:.2} (second difference {:.3e})", k.parameter, k.second_difference);
    }
    for p in plateau_regions(&sweep, analysis::DEFAULT_FLATNESS_TOL)? {
        println!("flat on [{:.2}, {:.2}] at {:.6}", p.start, p.end, p.mean);
    }
    Ok(())
}
