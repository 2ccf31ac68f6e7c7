//! Per-momentum spectral data of two-band free-fermion Hamiltonians.
//!
//! Two symmetry classes are supported:
//!
//! * number-conserving two-band models `H = Σ_k c_k† (d0 + d·σ) c_k`,
//!   described by a [`DVectorModel`];
//! * single-species models with pairing written in Nambu form
//!   `H = ½ Σ_k Ψ_k† (Z σz + X σx) Ψ_k`, described by a [`NambuModel`].
//!
//! Energies are in units of the global coupling scale, which is set to 1.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `ω² − (d3^B)²` the geometric numerator is evaluated
/// through its analytic limit.
pub const F0_DEGENERACY_TOL: f64 = 1e-12;

/// Coefficients `(d0, d1, d2, d3)` of `d0·I + d·σ` at one momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DVector {
    pub d0: f64,
    pub d: [f64; 3],
}

impl DVector {
    pub fn new(d0: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Self { d0, d: [d1, d2, d3] }
    }

    /// Half the splitting between the two bands, `|d|`.
    pub fn norm(&self) -> f64 {
        let [x, y, z] = self.d;
        x.hypot(y).hypot(z)
    }

    pub fn cross_norm_sq(&self, other: &DVector) -> f64 {
        let [a1, a2, a3] = self.d;
        let [b1, b2, b3] = other.d;
        let c1 = a2 * b3 - a3 * b2;
        let c2 = a3 * b1 - a1 * b3;
        let c3 = a1 * b2 - a2 * b1;
        c1 * c1 + c2 * c2 + c3 * c3
    }
}

type DVectorFn<const D: usize> = dyn Fn(&[f64; D]) -> [f64; 4] + Send + Sync;
type NambuFn<const D: usize> = dyn Fn(&[f64; D]) -> (f64, f64) + Send + Sync;

/// Bloch Hamiltonian `d0(k)·I + d(k)·σ` of a number-conserving two-band model.
///
/// `D` is the dimension of the Brillouin zone; every builder in this crate
/// produces one-dimensional models.
#[derive(Clone)]
pub struct DVectorModel<const D: usize = 1> {
    label: String,
    eval: Arc<DVectorFn<D>>,
}

impl<const D: usize> DVectorModel<D> {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64; D]) -> [f64; 4] + Send + Sync + 'static,
    {
        Self { label: label.into(), eval: Arc::new(f) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, k: &[f64; D]) -> Result<DVector> {
        let [d0, d1, d2, d3] = (self.eval)(k);
        for (value, component) in [(d0, "d0"), (d1, "d1"), (d2, "d2"), (d3, "d3")] {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    model: self.label.clone(),
                    component,
                    k: k.to_vec(),
                });
            }
        }
        Ok(DVector::new(d0, d1, d2, d3))
    }
}

impl DVectorModel<1> {
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> [f64; 4] + Send + Sync + 'static,
    {
        Self::new(label, move |k: &[f64; 1]| f(k[0]))
    }

    pub fn at(&self, k: f64) -> Result<DVector> {
        self.eval(&[k])
    }
}

impl<const D: usize> fmt::Debug for DVectorModel<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DVectorModel").field("label", &self.label).finish()
    }
}

/// Nambu Bloch Hamiltonian `Z(k) σz + X(k) σx`.
///
/// The engine always uses the `½ Σ_k` normalization. A model whose physical
/// Hamiltonian carries a different global prefactor records it in
/// [`NambuModel::hamiltonian_prefactor`]; only the exact-evolution oracle can
/// be asked to honor it.
#[derive(Clone)]
pub struct NambuModel<const D: usize = 1> {
    label: String,
    eval: Arc<NambuFn<D>>,
    prefactor: f64,
}

impl<const D: usize> NambuModel<D> {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64; D]) -> (f64, f64) + Send + Sync + 'static,
    {
        Self { label: label.into(), eval: Arc::new(f), prefactor: 0.5 }
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Self {
        self.prefactor = prefactor;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Global prefactor in front of `Σ_k Ψ_k† (Z σz + X σx) Ψ_k` in the model's
    /// own Hamiltonian (½ for the canonical form).
    pub fn hamiltonian_prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Returns `(X, Z)`.
    pub fn eval(&self, k: &[f64; D]) -> Result<(f64, f64)> {
        let (x, z) = (self.eval)(k);
        for (value, component) in [(x, "X"), (z, "Z")] {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    model: self.label.clone(),
                    component,
                    k: k.to_vec(),
                });
            }
        }
        Ok((x, z))
    }
}

impl NambuModel<1> {
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        Self::new(label, move |k: &[f64; 1]| f(k[0]))
    }

    pub fn at(&self, k: f64) -> Result<(f64, f64)> {
        self.eval(&[k])
    }
}

impl<const D: usize> fmt::Debug for NambuModel<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NambuModel")
            .field("label", &self.label)
            .field("prefactor", &self.prefactor)
            .finish()
    }
}

/// Inverse temperature, with the ground state as a first-class value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

/// Grand-canonical initial state: inverse temperature and chemical potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalSpec {
    beta: Beta,
    mu: f64,
}

impl ThermalSpec {
    pub fn new(beta: Beta, mu: f64) -> Result<Self> {
        if let Beta::Finite(b) = beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "inverse temperature must be positive and finite, got {b}"
                )));
            }
        }
        if !mu.is_finite() {
            return Err(Error::InvalidInput(format!("chemical potential must be finite, got {mu}")));
        }
        Ok(Self { beta, mu })
    }

    pub fn ground_state() -> Self {
        Self { beta: Beta::Infinite, mu: 0.0 }
    }

    /// Finite inverse temperature at half filling (`μ = 0`).
    ///
    /// Panics if `beta` is not positive and finite.
    pub fn at_beta(beta: f64) -> Self {
        Self::new(Beta::Finite(beta), 0.0).expect("beta must be positive and finite")
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        Self::new(self.beta, mu)
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// How the `N` momenta of a finite ring are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumOffset {
    /// `k_j = −π + 2π(j + ½)/N`; never lands on `k = 0` or `k = π` for even `N`.
    #[default]
    HalfInteger,
    /// `k_j = −π + 2πj/N`.
    Integer,
}

/// Discretization of the Brillouin zone `(−π, π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BzGrid {
    FiniteN { n: usize, offset: MomentumOffset },
    ThermodynamicLimit { panels: usize, rel_tol: f64 },
}

impl BzGrid {
    pub fn finite(n: usize) -> Self {
        BzGrid::FiniteN { n, offset: MomentumOffset::HalfInteger }
    }

    pub fn finite_with_offset(n: usize, offset: MomentumOffset) -> Self {
        BzGrid::FiniteN { n, offset }
    }

    /// Thermodynamic limit with 16 initial panels and relative tolerance 1e-9.
    pub fn thermodynamic() -> Self {
        BzGrid::ThermodynamicLimit { panels: 16, rel_tol: 1e-9 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BzGrid::FiniteN { n: 0, .. } => Err(Error::InvalidInput("grid needs at least one momentum".into())),
            BzGrid::ThermodynamicLimit { panels, rel_tol } if panels == 0 || !(rel_tol > 0.0) => {
                Err(Error::InvalidInput(format!(
                    "thermodynamic-limit grid needs panels > 0 and rel_tol > 0 (got {panels}, {rel_tol})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Momenta of a finite grid; empty in the thermodynamic limit.
    pub fn momenta(&self) -> Vec<f64> {
        match *self {
            BzGrid::FiniteN { n, offset } => {
                let shift = match offset {
                    MomentumOffset::HalfInteger => 0.5,
                    MomentumOffset::Integer => 0.0,
                };
                (0..n).map(|j| -PI + 2.0 * PI * (j as f64 + shift) / n as f64).collect()
            }
            BzGrid::ThermodynamicLimit { .. } => Vec::new(),
        }
    }

    pub fn size(&self) -> Option<usize> {
        match *self {
            BzGrid::FiniteN { n, .. } => Some(n),
            BzGrid::ThermodynamicLimit { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            BzGrid::FiniteN { n, offset: MomentumOffset::HalfInteger } => {
                format!("finite N={n}, k_j = -pi + 2pi(j+1/2)/N")
            }
            BzGrid::FiniteN { n, offset: MomentumOffset::Integer } => {
                format!("finite N={n}, k_j = -pi + 2pi j/N")
            }
            BzGrid::ThermodynamicLimit { panels, rel_tol } => {
                format!("thermodynamic limit, adaptive Gauss-Kronrod, {panels} initial panels, rel_tol={rel_tol:e}")
            }
        }
    }
}

/// Band data of a number-conserving model at one momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonScDispersion {
    /// Upper band energy `d0 + |d|`.
    pub epsilon: f64,
    pub d0: f64,
}

impl NonScDispersion {
    /// `|d|`, the quantity that sets both the level splitting and the
    /// precession frequency of the mode.
    pub fn half_splitting(&self) -> f64 {
        self.epsilon - self.d0
    }
}

pub fn dispersion_nonsc<const D: usize>(model: &DVectorModel<D>, k: &[f64; D]) -> Result<NonScDispersion> {
    let v = model.eval(k)?;
    Ok(NonScDispersion { epsilon: v.d0 + v.norm(), d0: v.d0 })
}

/// `sqrt(X² + Z²)`.
pub fn dispersion_sc<const D: usize>(model: &NambuModel<D>, k: &[f64; D]) -> Result<f64> {
    let (x, z) = model.eval(k)?;
    Ok(x.hypot(z))
}

/// Geometric numerator of the stored-energy summand for number-conserving
/// models, evaluated in its `d3`-resolved form.
///
/// When `d^B` is (numerically) parallel to the z axis the two quotients are
/// 0/0; the analytic limit `|d^A × d^B|²` is used instead.
pub fn f0_from_vectors(a: &DVector, b: &DVector) -> f64 {
    let [a1, a2, a3] = a.d;
    let [b1, b2, b3] = b.d;
    let omega_sq = b.norm().powi(2);
    let transverse_sq = b1 * b1 + b2 * b2;
    if transverse_sq < F0_DEGENERACY_TOL {
        return a.cross_norm_sq(b);
    }
    let transverse = transverse_sq.sqrt();
    let in_plane_cross = a1 * b2 - a2 * b1;
    let in_plane_dot = a1 * b1 + a2 * b2;
    let first = omega_sq / transverse_sq * in_plane_cross * in_plane_cross;
    let second = a3 * transverse - b3 / transverse * in_plane_dot;
    first + second * second
}

pub fn f0_numerator<const D: usize>(
    model_a: &DVectorModel<D>,
    model_b: &DVectorModel<D>,
    k: &[f64; D],
) -> Result<f64> {
    Ok(f0_from_vectors(&model_a.eval(k)?, &model_b.eval(k)?))
}

/// Which algebraic form of the thermal weight the engine evaluates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalForm {
    /// `sinh(βs) / (cosh(βs) + cosh(β(d0 − μ)))`.
    #[default]
    Hyperbolic,
    /// `n_F(d0 − s) − n_F(d0 + s)`.
    FermiDifference,
}

/// Fermi function `1/(1 + exp(β(x − μ)))`, written through `tanh` so that it
/// never overflows.
pub fn fermi(x: f64, thermal: &ThermalSpec) -> f64 {
    let arg = x - thermal.mu;
    match thermal.beta {
        Beta::Infinite => {
            if arg < 0.0 {
                1.0
            } else if arg > 0.0 {
                0.0
            } else {
                0.5
            }
        }
        Beta::Finite(b) => 0.5 * (1.0 - (0.5 * b * arg).tanh()),
    }
}

/// Occupation difference of the two levels `d0 ∓ s` at one momentum, as a
/// difference of Fermi functions.
pub fn thermal_weight_fermi(half_splitting: f64, d0: f64, thermal: &ThermalSpec) -> f64 {
    fermi(d0 - half_splitting, thermal) - fermi(d0 + half_splitting, thermal)
}

/// Same quantity as [`thermal_weight_fermi`] in the hyperbolic form, scaled by
/// the largest exponent so that `βs` and `β|d0 − μ|` can be arbitrarily large.
pub fn thermal_weight_hyperbolic(half_splitting: f64, d0: f64, thermal: &ThermalSpec) -> f64 {
    let s = half_splitting.abs();
    let detune = (d0 - thermal.mu).abs();
    match thermal.beta {
        Beta::Infinite => {
            if s > detune {
                1.0
            } else if s < detune || s == 0.0 {
                0.0
            } else {
                0.5
            }
        }
        Beta::Finite(b) => {
            let a = b * s;
            let c = b * detune;
            let m = a.max(c);
            let num = (a - m).exp() - (-a - m).exp();
            let den = (a - m).exp() + (-a - m).exp() + (c - m).exp() + (-c - m).exp();
            num / den
        }
    }
}

pub fn thermal_weight_with(form: ThermalForm, half_splitting: f64, d0: f64, thermal: &ThermalSpec) -> f64 {
    match form {
        ThermalForm::Hyperbolic => thermal_weight_hyperbolic(half_splitting, d0, thermal),
        ThermalForm::FermiDifference => thermal_weight_fermi(half_splitting, d0, thermal),
    }
}

/// Thermal and filling weight of the pre-quench model at `k`.
pub fn thermal_weight<const D: usize>(
    model_a: &DVectorModel<D>,
    k: &[f64; D],
    thermal: &ThermalSpec,
) -> Result<f64> {
    let v = model_a.eval(k)?;
    Ok(thermal_weight_hyperbolic(v.norm(), v.d0, thermal))
}

/// `tanh(βε/2)`, the Nambu-class thermal weight.
pub fn nambu_thermal_weight(epsilon: f64, beta: Beta) -> f64 {
    match beta {
        Beta::Infinite => {
            if epsilon > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Beta::Finite(b) => (0.5 * b * epsilon).tanh(),
    }
}
