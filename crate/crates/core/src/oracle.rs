//! Brute-force reference for the stored energy.
//!
//! Each momentum sector is treated as an explicit few-level quantum system:
//! the grand-canonical density matrix is built from the closed-form
//! exponential of the 2×2 pre-quench Bloch matrix, propagated with the exact
//! 2×2 unitary of the charging Hamiltonian, and measured with the pre-quench
//! Hamiltonian. Nothing here shares code with the closed-form summands in
//! [`crate::quench`].

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::quench::ChargingTime;
use crate::spectral::{Beta, DVector, ThermalSpec};

/// Which global prefactor the oracle puts in front of a Nambu Hamiltonian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OracleNormalization {
    /// The canonical `½ Σ_k Ψ† (Zσz + Xσx) Ψ` form used by the engine.
    #[default]
    Canonical,
    /// The prefactor recorded on the model (differs for the cluster Ising chain).
    ModelHamiltonian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Mat2([[C64; 2]; 2]);

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

impl Mat2 {
    fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    fn sigma_x() -> Self {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    fn sigma_y() -> Self {
        Mat2([[ZERO, -I], [I, ZERO]])
    }

    fn sigma_z() -> Self {
        Mat2([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `c0·I + c1·σx + c2·σy + c3·σz`.
    fn pauli(c0: f64, c: [f64; 3]) -> Self {
        Self::identity().scale(c0.into())
            + Self::sigma_x().scale(c[0].into())
            + Self::sigma_y().scale(c[1].into())
            + Self::sigma_z().scale(c[2].into())
    }

    fn scale(self, s: C64) -> Self {
        let m = self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    fn adjoint(self) -> Self {
        let m = self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    fn trace(self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-ONE)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// A 2×2 Hermitian matrix kept in Pauli components `c0·I + c·σ`.
#[derive(Clone, Copy, Debug)]
struct Hermitian2 {
    c0: f64,
    c: [f64; 3],
}

impl Hermitian2 {
    fn norm(&self) -> f64 {
        self.c[0].hypot(self.c[1]).hypot(self.c[2])
    }

    fn matrix(&self) -> Mat2 {
        Mat2::pauli(self.c0, self.c)
    }

    fn unit(&self) -> Option<[f64; 3]> {
        let n = self.norm();
        (n > 0.0).then(|| [self.c[0] / n, self.c[1] / n, self.c[2] / n])
    }

    /// `exp(−β(M − shift))` for `M = c0 + c·σ`, via
    /// `e^{−β(c0−shift)} (cosh(β|c|) − sinh(β|c|) ĉ·σ)`.
    ///
    /// `shift` must not be smaller than the lowest eigenvalue of `M`, otherwise
    /// the result can overflow; callers pass the lowest Fock-space energy.
    fn boltzmann(&self, beta: Beta, shift: f64) -> Mat2 {
        let n = self.norm();
        let lo = self.c0 - n - shift;
        let hi = self.c0 + n - shift;
        // lo is zero for the ground level up to rounding in how it was formed.
        let tol = 1e-12 * (1.0 + self.c0.abs() + n + shift.abs());
        let (w_lo, w_hi) = match beta {
            Beta::Infinite => (indicator(lo - tol), indicator(hi - tol)),
            Beta::Finite(b) => ((-b * lo).exp(), (-b * hi).exp()),
        };
        // w_lo = e^{−β(c0−shift)} e^{+β|c|}, w_hi = e^{−β(c0−shift)} e^{−β|c|}
        let cosh_part = 0.5 * (w_lo + w_hi);
        let sinh_part = 0.5 * (w_lo - w_hi);
        match self.unit() {
            Some(u) => Mat2::pauli(cosh_part, [-sinh_part * u[0], -sinh_part * u[1], -sinh_part * u[2]]),
            None => Mat2::identity().scale(w_lo.into()),
        }
    }

    /// `exp(−i M t)`.
    fn propagator(&self, t: f64) -> Mat2 {
        let n = self.norm();
        let phase = C64::from_polar(1.0, -self.c0 * t);
        let (s, c) = (n * t).sin_cos();
        let u = self.unit().unwrap_or([0.0; 3]);
        Mat2::pauli(c, [0.0; 3]).scale(phase)
            + Mat2::pauli(0.0, u).scale(-I * s * phase)
    }

    /// Long-time average of `U(t) ρ U(t)†`: the part of `ρ` diagonal in the
    /// eigenbasis of `M`.
    fn dephase(&self, rho: Mat2) -> Mat2 {
        match self.unit() {
            None => rho,
            Some(u) => {
                let nsig = Mat2::pauli(0.0, u);
                let p_plus = (Mat2::identity() + nsig).scale(0.5.into());
                let p_minus = (Mat2::identity() - nsig).scale(0.5.into());
                p_plus * rho * p_plus + p_minus * rho * p_minus
            }
        }
    }
}

fn indicator(relative_energy: f64) -> f64 {
    if relative_energy <= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn weight(beta: Beta, relative_energy: f64) -> f64 {
    match beta {
        Beta::Infinite => indicator(relative_energy),
        Beta::Finite(b) => (-b * relative_energy).exp(),
    }
}

/// Energy change `Tr[ρ(τ) h_A] − Tr[ρ h_A]` inside one invariant 2×2 sector.
fn sector_energy_change(rho: Mat2, h_a: &Hermitian2, h_b: &Hermitian2, tau: ChargingTime) -> f64 {
    let evolved = match tau {
        ChargingTime::Finite(t) => {
            let u = h_b.propagator(t);
            u * rho * u.adjoint()
        }
        ChargingTime::Infinite => h_b.dephase(rho),
    };
    let ha = h_a.matrix();
    ((evolved * ha).trace() - (rho * ha).trace()).re
}

/// Stored energy of one number-conserving momentum sector.
///
/// The sector's Fock space is {empty, one particle (2 states), doubly occupied};
/// only the one-particle block responds to the quench.
pub fn nonsc_mode_energy(a: &DVector, b: &DVector, tau: ChargingTime, thermal: &ThermalSpec) -> f64 {
    let mu = thermal.mu();
    let h_a = Hermitian2 { c0: a.d0, c: a.d };
    let h_b = Hermitian2 { c0: b.d0, c: b.d };
    let s = h_a.norm();
    // Grand-canonical energies E − μN of the four Fock states.
    let empty = 0.0f64;
    let single_lo = a.d0 - s - mu;
    let single_hi = a.d0 + s - mu;
    let double = 2.0 * (a.d0 - mu);
    let ground = empty.min(single_lo).min(double);
    let shifted = Hermitian2 { c0: a.d0 - mu, c: a.d };
    let single_block = shifted.boltzmann(thermal.beta(), ground);
    let z = weight(thermal.beta(), empty - ground)
        + weight(thermal.beta(), single_lo - ground)
        + weight(thermal.beta(), single_hi - ground)
        + weight(thermal.beta(), double - ground);
    let rho = single_block.scale((1.0 / z).into());
    sector_energy_change(rho, &h_a, &h_b, tau)
}

/// Stored energy attributed to momentum `k` of a Nambu model.
///
/// Momenta `k` and `−k` share one four-dimensional Fock space. Its odd-parity
/// states sit at zero energy and are inert; the even-parity pair
/// `{|0⟩, c_k† c_{−k}†|0⟩}` carries `scale·(−Z σz + X σx)`. The pair energy is
/// split equally between `k` and `−k`.
pub fn sc_mode_energy(
    (xa, za): (f64, f64),
    (xb, zb): (f64, f64),
    scale: f64,
    tau: ChargingTime,
    thermal: &ThermalSpec,
) -> f64 {
    let h_a = Hermitian2 { c0: 0.0, c: [scale * xa, 0.0, -scale * za] };
    let h_b = Hermitian2 { c0: 0.0, c: [scale * xb, 0.0, -scale * zb] };
    let e = h_a.norm();
    let ground = -e;
    let even_block = h_a.boltzmann(thermal.beta(), ground);
    let z = 2.0 * weight(thermal.beta(), 0.0 - ground)
        + weight(thermal.beta(), -e - ground)
        + weight(thermal.beta(), e - ground);
    let rho = even_block.scale((1.0 / z).into());
    0.5 * sector_energy_change(rho, &h_a, &h_b, tau)
}
