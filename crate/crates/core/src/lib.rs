//! Stored energy and charging power of free-fermion quantum batteries charged
//! by a double sudden quench `H_A → H_B → H_A`.
//!
//! Models are momentum-space Bloch Hamiltonians, either number conserving
//! (`d0 I + d·σ`) or Nambu (`Z σz + X σx`). [`Engine`] evaluates the stored
//! energy per site on a finite ring or in the thermodynamic limit; the
//! [`oracle`] module recomputes the same quantity by brute force.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod models;
pub mod oracle;
pub mod quad;
pub mod quench;
pub mod spectral;
pub mod sum;

pub use analysis::{
    detect_kinks, plateau_regions, power_scaling, recurrence_profile, sweep_plateau, KinkReport, RecurrenceOptions,
    RecurrenceReport, ScalingFit, SweepResult,
};
pub use error::{Error, Result};
pub use quench::{
    energy_curve, max_power, oracle_stored_energy, stored_energy_nonsc, stored_energy_sc, AnyQuench, ChargingTime, EnergyCurve,
    Engine, MaxPower, QuenchSpec, SymmetryClass, TwoBandQuench,
};
pub use spectral::{Beta, BzGrid, DVector, DVectorModel, MomentumOffset, NambuModel, ThermalForm, ThermalSpec};
