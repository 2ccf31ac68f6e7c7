//! Builders for the transverse-field Ising, XY, cluster Ising and extended
//! SSH chains, plus the closed-form plateau values known for them.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quench::QuenchSpec;
use crate::spectral::{DVectorModel, NambuModel};

/// Transverse-field Ising chain, `X = −sin k`, `Z = h − cos k`.
///
/// The spin Hamiltonian `−½ Σ (σˣσˣ + h σᶻ)` maps to `+½ Σ Ψ†(Zσz + Xσx)Ψ`;
/// the stored energy is invariant under a global sign flip of both phases, so
/// the builder uses the Nambu sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub h: f64,
}

/// XY chain, `X = −γ sin k`, `Z = h − cos k`. `γ = 1` is the Ising chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XyParams {
    pub gamma: f64,
    pub h: f64,
}

/// Cluster Ising chain, `X = sin 2k + λ sin k`, `Z = −cos 2k + λ cos k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterIsingParams {
    pub lambda: f64,
}

/// Global prefactor of the cluster Ising fermionic Hamiltonian,
/// `H = 2 Σ_k Ψ†(Zσz + Xσx)Ψ`.
pub const CLUSTER_ISING_PREFACTOR: f64 = 2.0;

fn check_finite(values: &[(f64, &str)]) -> Result<()> {
    for (v, name) in values {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

pub fn build_ising(p: IsingParams) -> NambuModel {
    let h = p.h;
    NambuModel::from_fn(format!("ising(h={h})"), move |k: f64| (-k.sin(), h - k.cos()))
}

pub fn build_xy(p: XyParams) -> NambuModel {
    let XyParams { gamma, h } = p;
    NambuModel::from_fn(format!("xy(gamma={gamma}, h={h})"), move |k: f64| (-gamma * k.sin(), h - k.cos()))
}

/// The formula path ignores [`CLUSTER_ISING_PREFACTOR`]; it is carried on the
/// model so the exact-evolution oracle can be run with it.
pub fn build_cluster_ising(p: ClusterIsingParams) -> NambuModel {
    let lambda = p.lambda;
    NambuModel::from_fn(format!("cluster-ising(lambda={lambda})"), move |k: f64| {
        ((2.0 * k).sin() + lambda * k.sin(), -(2.0 * k).cos() + lambda * k.cos())
    })
    .with_prefactor(CLUSTER_ISING_PREFACTOR)
}

impl IsingParams {
    pub fn validate(&self) -> Result<()> {
        check_finite(&[(self.h, "ising.h")])
    }
}

impl XyParams {
    pub fn validate(&self) -> Result<()> {
        check_finite(&[(self.gamma, "xy.gamma"), (self.h, "xy.h")])
    }
}

impl ClusterIsingParams {
    pub fn validate(&self) -> Result<()> {
        check_finite(&[(self.lambda, "cluster.lambda")])
    }
}

/// SSH hoppings up to third neighbors. Odd-range hoppings come in an
/// intra-cell/inter-cell pair (`J'_n`, `J_n`); even-range hoppings do not.
/// Sublattice A holds odd sites, B even sites.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SshHoppings {
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J1p")]
    pub j1p: f64,
    #[serde(rename = "J2", default)]
    pub j2: f64,
    #[serde(rename = "J3", default)]
    pub j3: f64,
    #[serde(rename = "J3p", default)]
    pub j3p: f64,
}

impl SshHoppings {
    /// Nearest-neighbor chain with `J'_1 = 1 + δ`, `J_1 = 1 − δ`.
    pub fn nearest_neighbor(delta: f64) -> Self {
        Self { j1: 1.0 - delta, j1p: 1.0 + delta, ..Self::default() }
    }

    pub fn with_j2(mut self, j2: f64) -> Self {
        self.j2 = j2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(&[
            (self.j1, "ssh.J1"),
            (self.j1p, "ssh.J1p"),
            (self.j2, "ssh.J2"),
            (self.j3, "ssh.J3"),
            (self.j3p, "ssh.J3p"),
        ])
    }

    /// `|J1|, |J1'| > |J3|, |J3'|`, or the first violated inequality.
    pub fn check_nearest_dominates(&self) -> std::result::Result<(), String> {
        for (near, near_name) in [(self.j1, "J1"), (self.j1p, "J1'")] {
            for (far, far_name) in [(self.j3, "J3"), (self.j3p, "J3'")] {
                if !(near.abs() > far.abs()) {
                    return Err(format!("needs |{near_name}| > |{far_name}|, got {} and {}", near.abs(), far.abs()));
                }
            }
        }
        Ok(())
    }
}

/// Dimerization parametrization of the first/third-neighbor chain:
/// `J1 = 1 − α δ1`, `J1' = 1 + α δ1`, `J3 = r − β_c δ3`, `J3' = r + β_c δ3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SshDimerization {
    pub delta1: f64,
    pub delta3: f64,
    pub alpha: f64,
    pub beta_c: f64,
    pub r: f64,
}

impl SshDimerization {
    pub fn hoppings(&self) -> SshHoppings {
        SshHoppings {
            j1: 1.0 - self.alpha * self.delta1,
            j1p: 1.0 + self.alpha * self.delta1,
            j2: 0.0,
            j3: self.r - self.beta_c * self.delta3,
            j3p: self.r + self.beta_c * self.delta3,
        }
    }
}

/// Range of SSH hoppings retained by [`build_ssh`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxNeighbor {
    First = 1,
    Second = 2,
    Third = 3,
}

impl TryFrom<u8> for MaxNeighbor {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(MaxNeighbor::First),
            2 => Ok(MaxNeighbor::Second),
            3 => Ok(MaxNeighbor::Third),
            _ => Err(Error::InvalidInput(format!("SSH max_neighbor must be 1, 2 or 3, got {n}"))),
        }
    }
}

/// d-vector of the extended SSH chain:
///
/// ```text
/// d0 = Σ_p 2 J_{2p} cos(pk)
/// d1 = Σ_p [J'_{2p−1} cos((p−1)k) + J_{2p−1} cos(pk)]
/// d2 = Σ_p [J_{2p−1} sin(pk) − J'_{2p−1} sin((p−1)k)]
/// d3 = 0
/// ```
pub fn build_ssh(h: SshHoppings, max_neighbor: MaxNeighbor) -> DVectorModel {
    let keep = max_neighbor as u8;
    let j2 = if keep >= 2 { h.j2 } else { 0.0 };
    let (j3, j3p) = if keep >= 3 { (h.j3, h.j3p) } else { (0.0, 0.0) };
    let (j1, j1p) = (h.j1, h.j1p);
    let label = format!("ssh(J1={j1}, J1'={j1p}, J2={j2}, J3={j3}, J3'={j3p})");
    DVectorModel::from_fn(label, move |k: f64| {
        let (s1, c1) = k.sin_cos();
        let (s2, c2) = (2.0 * k).sin_cos();
        let d0 = 2.0 * j2 * c1;
        let d1 = j1p + j1 * c1 + j3p * c1 + j3 * c2;
        let d2 = j1 * s1 + j3 * s2 - j3p * s1;
        [d0, d1, d2, 0.0]
    })
}

/// Nearest-neighbor SSH chain at dimerization `δ`.
pub fn build_ssh_nn(delta: f64) -> DVectorModel {
    build_ssh(SshHoppings::nearest_neighbor(delta), MaxNeighbor::First)
}

/// Plateau per site of the Ising chain quenched from `h = 0` to `h_f` in the
/// ground state: `h_f²/4` inside the ordered phase, `1/4` outside.
pub fn ising_plateau_closed_form(h_f: f64) -> f64 {
    if h_f.abs() >= 1.0 {
        0.25
    } else {
        0.25 * h_f * h_f
    }
}

/// Plateau per site of the XY chain quenched from `(γ, h) = (1, 0)` to
/// `(γ1, 0)` in the ground state.
pub fn xy_plateau_closed_form(gamma1: f64) -> f64 {
    if gamma1 <= 0.0 {
        0.25
    } else {
        let r = (gamma1 - 1.0) / (gamma1 + 1.0);
        0.25 * r * r
    }
}

/// `(sin⁴k − sin²k) / (1 + (γ1² − 1) sin²k)`, whose integral over `[0, π]`
/// times `−(1 − γ1)²/(2π)` is the XY plateau per site.
pub fn xy_plateau_integrand(k: f64, gamma1: f64) -> f64 {
    let s2 = k.sin().powi(2);
    (s2 * s2 - s2) / (1.0 + (gamma1 * gamma1 - 1.0) * s2)
}

/// Antiderivative of [`xy_plateau_integrand`] split into its two pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XyAntiderivative {
    /// `γ1 / (γ1² − 1)² · arctan(γ1 tan k)`.
    pub arctan_piece: f64,
    /// `−γ1²/(γ1² − 1)² · k + (k/2 − sin 2k/4)/(γ1² − 1)`.
    pub polynomial_piece: f64,
    pub total: f64,
}

fn check_xy_gamma(gamma1: f64) -> Result<f64> {
    if !gamma1.is_finite() || (gamma1.abs() - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidInput(format!(
            "antiderivative decomposition needs a finite gamma1 != +-1, got {gamma1}"
        )));
    }
    Ok(gamma1 * gamma1 - 1.0)
}

pub fn xy_integrand_decomposition(k: f64, gamma1: f64) -> Result<XyAntiderivative> {
    let g2m1 = check_xy_gamma(gamma1)?;
    if k.cos().abs() < 1e-12 {
        return Err(Error::InvalidInput(format!(
            "arctan piece is discontinuous at odd multiples of pi/2 (k = {k})"
        )));
    }
    let arctan_piece = gamma1 / (g2m1 * g2m1) * (gamma1 * k.tan()).atan();
    let polynomial_piece = -gamma1 * gamma1 / (g2m1 * g2m1) * k + (k / 2.0 - (2.0 * k).sin() / 4.0) / g2m1;
    Ok(XyAntiderivative { arctan_piece, polynomial_piece, total: arctan_piece + polynomial_piece })
}

/// `∫_0^π` of [`xy_plateau_integrand`] from the antiderivative, taking the
/// arctan branch jump at `π/2` into account (limits `±sign(γ1)π/2`).
pub fn xy_integral_from_antiderivative(gamma1: f64) -> Result<f64> {
    let g2m1 = check_xy_gamma(gamma1)?;
    let arctan_coeff = gamma1 / (g2m1 * g2m1);
    let half_jump = gamma1.signum() * FRAC_PI_2;
    // [0, π/2⁻] and [π/2⁺, π]; arctan(γ tan k) is 0 at both 0 and π.
    let arctan_part = arctan_coeff * ((half_jump - 0.0) + (0.0 - (-half_jump)));
    let poly = |k: f64| -gamma1 * gamma1 / (g2m1 * g2m1) * k + (k / 2.0 - (2.0 * k).sin() / 4.0) / g2m1;
    Ok(arctan_part + poly(PI) - poly(0.0))
}

/// XY plateau per site obtained from the antiderivative route.
pub fn xy_plateau_from_antiderivative(gamma1: f64) -> Result<f64> {
    Ok(-(1.0 - gamma1).powi(2) / (2.0 * PI) * xy_integral_from_antiderivative(gamma1)?)
}

/// Charging protocol on the line `δ3 = m δ1 + q`: phase A at `δ1_0`, phase B at
/// `δ1_0 + δ1_1`, both with first and third neighbors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SshLineProtocol {
    pub delta1_0: f64,
    pub delta1_1: f64,
    pub m: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta_c: f64,
    pub r: f64,
}

impl SshLineProtocol {
    pub fn endpoint(&self, delta1: f64) -> SshDimerization {
        SshDimerization {
            delta1,
            delta3: self.m * delta1 + self.q,
            alpha: self.alpha,
            beta_c: self.beta_c,
            r: self.r,
        }
    }

    /// Point where the protocol line crosses the `k = π` gap-closing line
    /// `δ3 = (α/β_c) δ1`, if the lines are not parallel.
    pub fn critical_delta1(&self) -> Option<f64> {
        let slope = self.alpha / self.beta_c;
        let denom = slope - self.m;
        (denom.abs() > 1e-15).then(|| self.q / denom)
    }
}

/// Builds the quench for [`SshLineProtocol`], rejecting endpoints where the
/// third-neighbor hoppings are not weaker than the nearest-neighbor ones and
/// the gapless `r = −1` chain.
pub fn ssh_constrained_protocol(p: SshLineProtocol) -> Result<QuenchSpec<DVectorModel>> {
    check_finite(&[
        (p.delta1_0, "delta1_0"),
        (p.delta1_1, "delta1_1"),
        (p.m, "ssh.m"),
        (p.q, "ssh.q"),
        (p.alpha, "ssh.alpha"),
        (p.beta_c, "ssh.beta_c"),
        (p.r, "ssh.r"),
    ])?;
    if p.r == -1.0 {
        return Err(Error::CouplingConstraint {
            delta1: p.delta1_0,
            inequality: "r = -1 closes the gap at k = 0 for every dimerization".into(),
        });
    }
    let mut phases = Vec::with_capacity(2);
    for delta1 in [p.delta1_0, p.delta1_0 + p.delta1_1] {
        let hop = p.endpoint(delta1).hoppings();
        hop.check_nearest_dominates()
            .map_err(|inequality| Error::CouplingConstraint { delta1, inequality })?;
        phases.push(build_ssh(hop, MaxNeighbor::Third));
    }
    let phase_b = phases.pop().expect("two phases");
    let phase_a = phases.pop().expect("two phases");
    Ok(QuenchSpec::plateau(phase_a, phase_b))
}
