//! Stored energy after a double sudden quench `A → B → A`.
//!
//! Every momentum sector evolves independently, so the stored energy per site
//! is a Brillouin-zone average of mode contributions
//! `amplitude(k) · (1 − cos 2ω(k)τ)/ω(k)²`. On a finite ring the average is an
//! order-fixed sum; in the thermodynamic limit it is an adaptive quadrature
//! with break points at gap minima of either Hamiltonian.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{self, OracleNormalization};
use crate::quad::{self, QuadOptions};
use crate::spectral::{
    f0_from_vectors, nambu_thermal_weight, thermal_weight_with, BzGrid, DVectorModel, NambuModel, ThermalForm,
    ThermalSpec,
};
use crate::sum::stable_mean;

/// Below this charging frequency a mode is treated as frozen in the τ → ∞ limit.
pub const FROZEN_MODE_OMEGA: f64 = 1e-9;

/// Duration of the charging window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChargingTime {
    Finite(f64),
    /// Long-time average (the plateau).
    Infinite,
}

impl ChargingTime {
    fn validate(self) -> Result<Self> {
        match self {
            ChargingTime::Finite(t) if !(t >= 0.0) || !t.is_finite() => {
                Err(Error::InvalidInput(format!("charging time must be finite and non-negative, got {t}")))
            }
            other => Ok(other),
        }
    }
}

/// Symmetry class of a quench.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryClass {
    NumberConserving,
    Nambu,
}

/// Pre-quench phase `A`, charging phase `B` and the charging time.
///
/// Both phases are the same model type, so the symmetry class and the
/// momentum dimension always match.
#[derive(Clone, Debug)]
pub struct QuenchSpec<M> {
    pub phase_a: M,
    pub phase_b: M,
    pub tau: ChargingTime,
}

impl<M> QuenchSpec<M> {
    pub fn new(phase_a: M, phase_b: M, tau: ChargingTime) -> Self {
        Self { phase_a, phase_b, tau }
    }

    /// Plateau (`τ → ∞`) quench.
    pub fn plateau(phase_a: M, phase_b: M) -> Self {
        Self::new(phase_a, phase_b, ChargingTime::Infinite)
    }

    pub fn with_tau(mut self, tau: ChargingTime) -> Self {
        self.tau = tau;
        self
    }
}

/// Contribution of one momentum: `amplitude · 2 sin²(ωτ)/ω²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeResponse {
    pub amplitude: f64,
    pub omega: f64,
}

impl ModeResponse {
    pub fn energy(&self, tau: ChargingTime) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * oscillation_over_omega_sq(self.omega, tau)
    }
}

/// `(1 − cos 2ωτ)/ω²`, written as `2τ² sinc²(ωτ)` so it stays accurate as
/// `ω → 0`. In the τ → ∞ limit the cosine averages out; a frozen mode
/// (`ω → 0`) has no dynamics and contributes nothing.
pub fn oscillation_over_omega_sq(omega: f64, tau: ChargingTime) -> f64 {
    match tau {
        ChargingTime::Infinite => {
            if omega < FROZEN_MODE_OMEGA {
                0.0
            } else {
                1.0 / (omega * omega)
            }
        }
        ChargingTime::Finite(t) => {
            let x = omega * t;
            let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
            2.0 * t * t * sinc * sinc
        }
    }
}

/// Per-momentum interface shared by both symmetry classes.
pub trait TwoBandQuench: Send + Sync {
    fn class(&self) -> SymmetryClass;

    fn tau(&self) -> ChargingTime;

    /// Closed-form mode response at momentum `k`.
    fn mode(&self, k: f64, thermal: &ThermalSpec, form: ThermalForm) -> Result<ModeResponse>;

    /// `(ε(k), ω(k))`: gaps controlling the pre-quench and charging dynamics.
    fn gaps(&self, k: f64) -> Result<(f64, f64)>;

    /// Largest energy the mode at `k` can absorb from the pre-quench ground state.
    fn mode_capacity(&self, k: f64) -> Result<f64>;

    /// Exact-evolution reference for the mode at `k`.
    fn oracle_mode(&self, k: f64, tau: ChargingTime, thermal: &ThermalSpec, norm: OracleNormalization) -> Result<f64>;
}

/// Summand of the number-conserving formula at one momentum, any dimension.
pub fn nonsc_mode<const D: usize>(
    a: &DVectorModel<D>,
    b: &DVectorModel<D>,
    k: &[f64; D],
    thermal: &ThermalSpec,
    form: ThermalForm,
) -> Result<ModeResponse> {
    let va = a.eval(k)?;
    let vb = b.eval(k)?;
    let eps = va.norm();
    let omega = vb.norm();
    if eps == 0.0 {
        return Ok(ModeResponse { amplitude: 0.0, omega });
    }
    let f0 = f0_from_vectors(&va, &vb);
    let ft = thermal_weight_with(form, eps, va.d0, thermal);
    Ok(ModeResponse { amplitude: f0 * ft / eps, omega })
}

/// Summand of the Nambu formula at one momentum, any dimension.
pub fn sc_mode<const D: usize>(
    a: &NambuModel<D>,
    b: &NambuModel<D>,
    k: &[f64; D],
    thermal: &ThermalSpec,
) -> Result<ModeResponse> {
    let (xa, za) = a.eval(k)?;
    let (xb, zb) = b.eval(k)?;
    let eps = xa.hypot(za);
    let omega = xb.hypot(zb);
    if eps == 0.0 {
        return Ok(ModeResponse { amplitude: 0.0, omega });
    }
    let cross = xa * zb - za * xb;
    let amplitude = cross * cross * nambu_thermal_weight(eps, thermal.beta()) / (2.0 * eps);
    Ok(ModeResponse { amplitude, omega })
}

impl TwoBandQuench for QuenchSpec<DVectorModel> {
    fn class(&self) -> SymmetryClass {
        SymmetryClass::NumberConserving
    }

    fn tau(&self) -> ChargingTime {
        self.tau
    }

    fn mode(&self, k: f64, thermal: &ThermalSpec, form: ThermalForm) -> Result<ModeResponse> {
        nonsc_mode(&self.phase_a, &self.phase_b, &[k], thermal, form)
    }

    fn gaps(&self, k: f64) -> Result<(f64, f64)> {
        Ok((self.phase_a.at(k)?.norm(), self.phase_b.at(k)?.norm()))
    }

    fn mode_capacity(&self, k: f64) -> Result<f64> {
        Ok(2.0 * self.phase_a.at(k)?.norm())
    }

    fn oracle_mode(&self, k: f64, tau: ChargingTime, thermal: &ThermalSpec, _: OracleNormalization) -> Result<f64> {
        Ok(oracle::nonsc_mode_energy(&self.phase_a.at(k)?, &self.phase_b.at(k)?, tau, thermal))
    }
}

impl TwoBandQuench for QuenchSpec<NambuModel> {
    fn class(&self) -> SymmetryClass {
        SymmetryClass::Nambu
    }

    fn tau(&self) -> ChargingTime {
        self.tau
    }

    fn mode(&self, k: f64, thermal: &ThermalSpec, _: ThermalForm) -> Result<ModeResponse> {
        sc_mode(&self.phase_a, &self.phase_b, &[k], thermal)
    }

    fn gaps(&self, k: f64) -> Result<(f64, f64)> {
        let (xa, za) = self.phase_a.at(k)?;
        let (xb, zb) = self.phase_b.at(k)?;
        Ok((xa.hypot(za), xb.hypot(zb)))
    }

    fn mode_capacity(&self, k: f64) -> Result<f64> {
        let (x, z) = self.phase_a.at(k)?;
        Ok(x.hypot(z))
    }

    fn oracle_mode(&self, k: f64, tau: ChargingTime, thermal: &ThermalSpec, norm: OracleNormalization) -> Result<f64> {
        let scale = match norm {
            OracleNormalization::Canonical => 1.0,
            OracleNormalization::ModelHamiltonian => {
                let pa = self.phase_a.hamiltonian_prefactor();
                if pa != self.phase_b.hamiltonian_prefactor() {
                    return Err(Error::InvalidInput("phases carry different Hamiltonian prefactors".into()));
                }
                pa / 0.5
            }
        };
        Ok(oracle::sc_mode_energy(self.phase_a.at(k)?, self.phase_b.at(k)?, scale, tau, thermal))
    }
}

/// A quench of either symmetry class, chosen at run time.
#[derive(Clone, Debug)]
pub enum AnyQuench {
    NumberConserving(QuenchSpec<DVectorModel>),
    Nambu(QuenchSpec<NambuModel>),
}

macro_rules! delegate {
    ($self:ident, $q:ident => $e:expr) => {
        match $self {
            AnyQuench::NumberConserving($q) => $e,
            AnyQuench::Nambu($q) => $e,
        }
    };
}

impl AnyQuench {
    pub fn with_tau(self, tau: ChargingTime) -> Self {
        match self {
            AnyQuench::NumberConserving(q) => AnyQuench::NumberConserving(q.with_tau(tau)),
            AnyQuench::Nambu(q) => AnyQuench::Nambu(q.with_tau(tau)),
        }
    }
}

impl TwoBandQuench for AnyQuench {
    fn class(&self) -> SymmetryClass {
        delegate!(self, q => q.class())
    }

    fn tau(&self) -> ChargingTime {
        delegate!(self, q => q.tau())
    }

    fn mode(&self, k: f64, thermal: &ThermalSpec, form: ThermalForm) -> Result<ModeResponse> {
        delegate!(self, q => q.mode(k, thermal, form))
    }

    fn gaps(&self, k: f64) -> Result<(f64, f64)> {
        delegate!(self, q => q.gaps(k))
    }

    fn mode_capacity(&self, k: f64) -> Result<f64> {
        delegate!(self, q => q.mode_capacity(k))
    }

    fn oracle_mode(&self, k: f64, tau: ChargingTime, thermal: &ThermalSpec, norm: OracleNormalization) -> Result<f64> {
        delegate!(self, q => q.oracle_mode(k, tau, thermal, norm))
    }
}

/// Stored energy sampled on a τ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCurve {
    pub tau: Vec<f64>,
    pub energy_per_site: Vec<f64>,
    pub grid: BzGrid,
    pub thermal: ThermalSpec,
}

/// Grid maximum of `ΔE(τ)/τ`, refined by a golden-section search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxPower {
    pub power_per_site: f64,
    pub tau: f64,
}

/// `count` log-spaced charging times in `[start, stop]`.
pub fn log_tau_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (l0, l1) = (start.ln(), stop.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        start
                    } else if i + 1 == count {
                        stop
                    } else {
                        (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// 400 log-spaced points in `[1e-3, 50]`.
pub fn default_power_tau_grid() -> Vec<f64> {
    log_tau_grid(1e-3, 50.0, 400)
}

/// Evaluation context: worker pool and thermal-weight form.
///
/// Finite-ring sums are reduced in momentum order with [`crate::sum::stable_sum`],
/// so results are bitwise identical for any worker count.
#[derive(Clone, Debug, Default)]
pub struct Engine {
    pool: Option<Arc<ThreadPool>>,
    thermal_form: ThermalForm,
    gap_scan_points: Option<usize>,
}

impl Engine {
    /// Uses rayon's global pool.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidInput("worker count must be positive".into()));
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
        Ok(Self { pool: Some(Arc::new(pool)), ..Self::default() })
    }

    pub fn with_thermal_form(mut self, form: ThermalForm) -> Self {
        self.thermal_form = form;
        self
    }

    pub fn thermal_form(&self) -> ThermalForm {
        self.thermal_form
    }

    pub fn workers(&self) -> usize {
        self.pool
            .as_ref()
            .map(|p| p.current_num_threads())
            .unwrap_or_else(rayon::current_num_threads)
    }

    pub(crate) fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(op),
            None => op(),
        }
    }

    /// Stored energy per site (per momentum) at the spec's charging time.
    pub fn stored_energy<Q: TwoBandQuench>(&self, q: &Q, grid: &BzGrid, thermal: &ThermalSpec) -> Result<f64> {
        self.stored_energy_at(q, q.tau(), grid, thermal)
    }

    pub fn stored_energy_at<Q: TwoBandQuench>(
        &self,
        q: &Q,
        tau: ChargingTime,
        grid: &BzGrid,
        thermal: &ThermalSpec,
    ) -> Result<f64> {
        let tau = tau.validate()?;
        grid.validate()?;
        match *grid {
            BzGrid::FiniteN { .. } => {
                let modes = self.modes(q, grid, thermal)?;
                let terms: Vec<f64> = modes.iter().map(|m| m.energy(tau)).collect();
                finite(stable_mean(&terms), "stored energy")
            }
            BzGrid::ThermodynamicLimit { panels, rel_tol } => {
                let breaks = self.gap_break_points(q)?;
                self.integrate_bz(q, tau, thermal, &breaks, panels, rel_tol)
            }
        }
    }

    fn modes<Q: TwoBandQuench>(&self, q: &Q, grid: &BzGrid, thermal: &ThermalSpec) -> Result<Vec<ModeResponse>> {
        let ks = grid.momenta();
        let form = self.thermal_form;
        self.install(|| ks.par_iter().map(|&k| q.mode(k, thermal, form)).collect())
    }

    fn integrate_bz<Q: TwoBandQuench>(
        &self,
        q: &Q,
        tau: ChargingTime,
        thermal: &ThermalSpec,
        breaks: &[f64],
        panels: usize,
        rel_tol: f64,
    ) -> Result<f64> {
        let opts = QuadOptions { rel_tol, initial_panels: panels, ..QuadOptions::default() };
        let form = self.thermal_form;
        let r = quad::integrate(|k| finite(q.mode(k, thermal, form)?.energy(tau), "stored energy"), -PI, PI, breaks, &opts)?;
        Ok(r.value / (2.0 * PI))
    }

    /// Momenta where either gap has a deep local minimum; the integrand can
    /// have a kink there.
    pub fn gap_break_points<Q: TwoBandQuench>(&self, q: &Q) -> Result<Vec<f64>> {
        let n = self.gap_scan_points.unwrap_or(2048);
        let ks: Vec<f64> = (0..=n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect();
        let gaps: Vec<(f64, f64)> = ks.iter().map(|&k| q.gaps(k)).collect::<Result<_>>()?;
        let mut breaks = Vec::new();
        for which in [0usize, 1] {
            let g = |i: usize| if which == 0 { gaps[i].0 } else { gaps[i].1 };
            let gmax = (0..=n).map(g).fold(0.0, f64::max);
            for i in 1..n {
                if g(i) <= g(i - 1) && g(i) < g(i + 1) && g(i) < 0.1 * gmax {
                    let gap_at = |k: f64| q.gaps(k).map(|(e, w)| if which == 0 { e } else { w });
                    breaks.push(golden_min(gap_at, ks[i - 1], ks[i + 1])?);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        Ok(breaks)
    }

    pub fn energy_curve<Q: TwoBandQuench>(
        &self,
        q: &Q,
        taus: &[f64],
        grid: &BzGrid,
        thermal: &ThermalSpec,
    ) -> Result<EnergyCurve> {
        grid.validate()?;
        if taus.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("tau grid must be sorted ascending".into()));
        }
        for &t in taus {
            ChargingTime::Finite(t).validate()?;
        }
        let energy_per_site = match *grid {
            BzGrid::FiniteN { .. } => {
                let modes = self.modes(q, grid, thermal)?;
                self.install(|| {
                    taus.par_iter()
                        .map(|&t| {
                            let terms: Vec<f64> = modes.iter().map(|m| m.energy(ChargingTime::Finite(t))).collect();
                            finite(stable_mean(&terms), "stored energy")
                        })
                        .collect::<Result<Vec<f64>>>()
                })?
            }
            BzGrid::ThermodynamicLimit { panels, rel_tol } => {
                let breaks = self.gap_break_points(q)?;
                self.install(|| {
                    taus.par_iter()
                        .map(|&t| self.integrate_bz(q, ChargingTime::Finite(t), thermal, &breaks, panels, rel_tol))
                        .collect::<Result<Vec<f64>>>()
                })?
            }
        };
        Ok(EnergyCurve { tau: taus.to_vec(), energy_per_site, grid: *grid, thermal: *thermal })
    }

    /// Maximum of `ΔE(τ)/τ` per site over `taus` (all strictly positive).
    /// Ties go to the smallest τ; the grid argmax is then refined by a
    /// golden-section search between its neighbors.
    pub fn max_power<Q: TwoBandQuench>(
        &self,
        q: &Q,
        taus: &[f64],
        grid: &BzGrid,
        thermal: &ThermalSpec,
    ) -> Result<MaxPower> {
        if taus.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if taus.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidInput("power grid must exclude tau <= 0 (the tau -> 0 limit is 0)".into()));
        }
        let curve = self.energy_curve(q, taus, grid, thermal)?;
        let mut best = 0usize;
        let mut best_p = f64::NEG_INFINITY;
        for (i, (&t, &e)) in curve.tau.iter().zip(&curve.energy_per_site).enumerate() {
            let p = e / t;
            if p > best_p {
                best_p = p;
                best = i;
            }
        }
        let lo = taus[best.saturating_sub(1)];
        let hi = taus[(best + 1).min(taus.len() - 1)];
        let mut result = MaxPower { power_per_site: best_p, tau: taus[best] };
        if hi > lo {
            let neg_power = |t: f64| -> Result<f64> {
                Ok(-self.stored_energy_at(q, ChargingTime::Finite(t), grid, thermal)? / t)
            };
            let t_star = golden_min(neg_power, lo, hi)?;
            let p_star = -neg_power(t_star)?;
            if p_star > best_p {
                result = MaxPower { power_per_site: p_star, tau: t_star };
            }
        }
        Ok(result)
    }

    /// Exact-evolution stored energy per site on a finite ring.
    pub fn oracle_stored_energy<Q: TwoBandQuench>(
        &self,
        q: &Q,
        tau: ChargingTime,
        grid: &BzGrid,
        thermal: &ThermalSpec,
        norm: OracleNormalization,
    ) -> Result<f64> {
        let tau = tau.validate()?;
        grid.validate()?;
        if grid.size().is_none() {
            return Err(Error::OracleNeedsFiniteGrid);
        }
        let ks = grid.momenta();
        let terms: Vec<f64> =
            self.install(|| ks.par_iter().map(|&k| q.oracle_mode(k, tau, thermal, norm)).collect::<Result<_>>())?;
        finite(stable_mean(&terms), "oracle stored energy")
    }

    /// Mean of `mode_capacity` over the grid: the most energy per site the
    /// battery could hold starting from the pre-quench ground state.
    pub fn capacity_per_site<Q: TwoBandQuench>(&self, q: &Q, grid: &BzGrid) -> Result<f64> {
        grid.validate()?;
        match *grid {
            BzGrid::FiniteN { .. } => {
                let terms: Vec<f64> = grid.momenta().iter().map(|&k| q.mode_capacity(k)).collect::<Result<_>>()?;
                finite(stable_mean(&terms), "capacity")
            }
            BzGrid::ThermodynamicLimit { panels, rel_tol } => {
                let breaks = self.gap_break_points(q)?;
                let opts = QuadOptions { rel_tol, initial_panels: panels, ..QuadOptions::default() };
                let cap = |k| finite(q.mode_capacity(k)?, "capacity");
                Ok(quad::integrate(cap, -PI, PI, &breaks, &opts)?.value / (2.0 * PI))
            }
        }
    }
}

fn finite(value: f64, quantity: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteResult { quantity })
    }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..80 {
        if (hi - lo).abs() <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { x1 } else { x2 })
}

/// Stored energy per momentum for a number-conserving quench.
pub fn stored_energy_nonsc(q: &QuenchSpec<DVectorModel>, grid: &BzGrid, thermal: &ThermalSpec) -> Result<f64> {
    Engine::new().stored_energy(q, grid, thermal)
}

/// Stored energy per site for a Nambu quench.
pub fn stored_energy_sc(q: &QuenchSpec<NambuModel>, grid: &BzGrid, thermal: &ThermalSpec) -> Result<f64> {
    Engine::new().stored_energy(q, grid, thermal)
}

pub fn energy_curve<Q: TwoBandQuench>(q: &Q, taus: &[f64], grid: &BzGrid, thermal: &ThermalSpec) -> Result<EnergyCurve> {
    Engine::new().energy_curve(q, taus, grid, thermal)
}

pub fn max_power<Q: TwoBandQuench>(q: &Q, taus: &[f64], grid: &BzGrid, thermal: &ThermalSpec) -> Result<MaxPower> {
    Engine::new().max_power(q, taus, grid, thermal)
}

/// Exact-evolution reference in the engine's own normalization.
pub fn oracle_stored_energy<Q: TwoBandQuench>(q: &Q, grid: &BzGrid, thermal: &ThermalSpec) -> Result<f64> {
    Engine::new().oracle_stored_energy(q, q.tau(), grid, thermal, OracleNormalization::Canonical)
}

/// Stored energy per momentum of a number-conserving quench on an arbitrary
/// finite set of momenta, in any dimension.
pub fn stored_energy_nonsc_on<const D: usize>(
    a: &DVectorModel<D>,
    b: &DVectorModel<D>,
    momenta: &[[f64; D]],
    tau: ChargingTime,
    thermal: &ThermalSpec,
) -> Result<f64> {
    let tau = tau.validate()?;
    if momenta.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let terms: Vec<f64> = momenta
        .iter()
        .map(|k| nonsc_mode(a, b, k, thermal, ThermalForm::Hyperbolic).map(|m| m.energy(tau)))
        .collect::<Result<_>>()?;
    Ok(stable_mean(&terms))
}

/// Nambu counterpart of [`stored_energy_nonsc_on`].
pub fn stored_energy_sc_on<const D: usize>(
    a: &NambuModel<D>,
    b: &NambuModel<D>,
    momenta: &[[f64; D]],
    tau: ChargingTime,
    thermal: &ThermalSpec,
) -> Result<f64> {
    let tau = tau.validate()?;
    if momenta.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let terms: Vec<f64> = momenta
        .iter()
        .map(|k| sc_mode(a, b, k, thermal).map(|m| m.energy(tau)))
        .collect::<Result<_>>()?;
    Ok(stable_mean(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Beta;

    fn ising(h: f64) -> NambuModel {
        NambuModel::from_fn(format!("ising h={h}"), move |k: f64| (-k.sin(), h - k.cos()))
    }

    fn ssh_nn(delta: f64) -> DVectorModel {
        DVectorModel::from_fn("ssh", move |k: f64| {
            [0.0, 1.0 + delta + (1.0 - delta) * k.cos(), (1.0 - delta) * k.sin(), 0.0]
        })
    }

    #[test]
    fn identical_phases_and_zero_tau_store_nothing() {
        let t = ThermalSpec::at_beta(2.0);
        let q = QuenchSpec::new(ising(0.3), ising(0.3), ChargingTime::Finite(3.0));
        assert_eq!(stored_energy_sc(&q, &BzGrid::finite(32), &t).unwrap(), 0.0);
        assert_eq!(stored_energy_sc(&q, &BzGrid::thermodynamic(), &t).unwrap(), 0.0);
        let q = QuenchSpec::new(ising(0.3), ising(1.7), ChargingTime::Finite(0.0));
        assert_eq!(stored_energy_sc(&q, &BzGrid::finite(32), &t).unwrap(), 0.0);
    }

    #[test]
    fn oscillation_factor_limits() {
        assert_eq!(oscillation_over_omega_sq(0.0, ChargingTime::Finite(2.0)), 8.0);
        let small = oscillation_over_omega_sq(1e-7, ChargingTime::Finite(2.0));
        assert!((small - 8.0).abs() < 1e-12);
        let direct = (1.0 - (2.0 * 0.8 * 1.5f64).cos()) / (0.8 * 0.8);
        assert!((oscillation_over_omega_sq(0.8, ChargingTime::Finite(1.5)) - direct).abs() < 1e-14);
        assert_eq!(oscillation_over_omega_sq(0.0, ChargingTime::Infinite), 0.0);
    }

    #[test]
    fn ssh_matches_oracle_small_ring() {
        let q = QuenchSpec::new(ssh_nn(0.2), ssh_nn(0.5), ChargingTime::Finite(1.7));
        let grid = BzGrid::finite(8);
        let t = ThermalSpec::at_beta(5.0);
        let f = stored_energy_nonsc(&q, &grid, &t).unwrap();
        let o = oracle_stored_energy(&q, &grid, &t).unwrap();
        assert!(f > 0.0);
        assert!((f - o).abs() <= 1e-10 * f, "formula {f} oracle {o}");
    }

    #[test]
    fn oracle_rejects_thermodynamic_grid() {
        let q = QuenchSpec::plateau(ising(0.0), ising(2.0));
        let err = oracle_stored_energy(&q, &BzGrid::thermodynamic(), &ThermalSpec::ground_state()).unwrap_err();
        assert_eq!(err, Error::OracleNeedsFiniteGrid);
    }

    #[test]
    fn ising_plateau_thermodynamic_limit() {
        let gs = ThermalSpec::ground_state();
        for (hf, expected) in [(2.0, 0.25), (0.5, 0.0625), (-0.5, 0.0625), (1.0, 0.25)] {
            let q = QuenchSpec::plateau(ising(0.0), ising(hf));
            let e = stored_energy_sc(&q, &BzGrid::thermodynamic(), &gs).unwrap();
            assert!((e - expected).abs() < 1e-9, "hf={hf}: {e}");
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let q = QuenchSpec::new(ising(0.4), ising(1.3), ChargingTime::Finite(7.1));
        let grid = BzGrid::finite(1000);
        let t = ThermalSpec::at_beta(3.0);
        let one = Engine::with_workers(1).unwrap().stored_energy(&q, &grid, &t).unwrap();
        let four = Engine::with_workers(4).unwrap().stored_energy(&q, &grid, &t).unwrap();
        assert_eq!(one.to_bits(), four.to_bits());
        let taus: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
        let c1 = Engine::with_workers(1).unwrap().energy_curve(&q, &taus, &grid, &t).unwrap();
        let c3 = Engine::with_workers(3).unwrap().energy_curve(&q, &taus, &grid, &t).unwrap();
        assert_eq!(c1, c3);
    }

    #[test]
    fn energy_curve_starts_at_zero_and_rejects_unsorted() {
        let q = QuenchSpec::plateau(ising(0.0), ising(2.0));
        let t = ThermalSpec::ground_state();
        let c = energy_curve(&q, &[0.0, 0.5, 1.0], &BzGrid::finite(20), &t).unwrap();
        assert_eq!(c.energy_per_site[0], 0.0);
        assert!(energy_curve(&q, &[1.0, 0.5], &BzGrid::finite(20), &t).is_err());
    }

    #[test]
    fn max_power_errors_and_ties() {
        let t = ThermalSpec::ground_state();
        let grid = BzGrid::finite(10);
        let same = QuenchSpec::plateau(ising(0.5), ising(0.5));
        assert_eq!(max_power(&same, &[], &grid, &t).unwrap_err(), Error::EmptyGrid);
        assert!(max_power(&same, &[0.0, 1.0], &grid, &t).is_err());
        let p = max_power(&same, &[0.1, 0.2, 0.3], &grid, &t).unwrap();
        assert_eq!(p.power_per_site, 0.0);
        assert_eq!(p.tau, 0.1);
    }

    #[test]
    fn max_power_refines_past_grid() {
        let q = QuenchSpec::plateau(ising(0.0), ising(2.0));
        let t = ThermalSpec::ground_state();
        let grid = BzGrid::finite(50);
        let coarse = log_tau_grid(0.01, 10.0, 12);
        let p = max_power(&q, &coarse, &grid, &t).unwrap();
        let fine = log_tau_grid(0.01, 10.0, 4000);
        let reference = fine
            .iter()
            .map(|&tau| Engine::new().stored_energy_at(&q, ChargingTime::Finite(tau), &grid, &t).unwrap() / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(p.power_per_site >= reference - 1e-6, "{} vs {}", p.power_per_site, reference);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_tau_grid(1e-3, 50.0, 400);
        assert_eq!(g.len(), 400);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[399], 50.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn negative_tau_rejected() {
        let q = QuenchSpec::new(ising(0.0), ising(2.0), ChargingTime::Finite(-1.0));
        assert!(stored_energy_sc(&q, &BzGrid::finite(4), &ThermalSpec::ground_state()).is_err());
    }

    #[test]
    fn two_dimensional_momenta_supported() {
        let a = DVectorModel::<2>::new("2d-a", |k: &[f64; 2]| [0.0, k[0].cos(), k[1].sin(), 1.0]);
        let b = DVectorModel::<2>::new("2d-b", |k: &[f64; 2]| [0.0, k[1].cos(), 0.0, 0.5]);
        let ks: Vec<[f64; 2]> = (0..4).flat_map(|i| (0..4).map(move |j| [i as f64 * 0.7 + 0.1, j as f64 * 0.9 - 1.0])).collect();
        let t = ThermalSpec::new(Beta::Finite(2.0), 0.0).unwrap();
        let e = stored_energy_nonsc_on(&a, &b, &ks, ChargingTime::Finite(1.1), &t).unwrap();
        let mut o = Vec::new();
        for k in &ks {
            o.push(oracle::nonsc_mode_energy(&a.eval(k).unwrap(), &b.eval(k).unwrap(), ChargingTime::Finite(1.1), &t));
        }
        let o = stable_mean(&o);
        assert!((e - o).abs() < 1e-12 * e.abs().max(1.0));
    }
}
