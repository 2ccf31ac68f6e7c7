//! Parameter sweeps of the plateau energy and the diagnostics run on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quench::{ChargingTime, Engine, MaxPower, TwoBandQuench};
use crate::spectral::{BzGrid, ThermalSpec};

/// Default threshold of [`detect_kinks`], in units of the median second difference.
pub const DEFAULT_KINK_THRESHOLD: f64 = 10.0;
/// Default `|dE/dparam|` bound of [`plateau_regions`].
pub const DEFAULT_FLATNESS_TOL: f64 = 1e-3;
/// Minimum run length reported by [`plateau_regions`].
pub const MIN_PLATEAU_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMeta {
    pub model: String,
    pub thermal: String,
    pub grid: String,
    pub tau: String,
}

/// Energy per site on an ascending parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SweepMeta,
}

fn sorted_params(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sweep parameters must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Evaluates `eval` at every parameter (sorted ascending), in parallel.
pub fn sweep_with<F>(engine: &Engine, parameter: &str, values: &[f64], meta: SweepMeta, eval: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let grid = sorted_params(values)?;
    let values = engine.install(|| grid.par_iter().map(|&p| eval(p)).collect::<Result<Vec<f64>>>())?;
    Ok(SweepResult { parameter: parameter.to_string(), grid, values, meta })
}

/// Evaluates `f` at each point on the engine's pool, keeping input order.
pub fn map_points<P: Sync, T: Send>(engine: &Engine, points: &[P], f: impl Fn(&P) -> Result<T> + Sync) -> Result<Vec<T>> {
    engine.install(|| points.par_iter().map(&f).collect())
}

/// Plateau energy `E_∞` per site across a one-parameter family of quenches.
pub fn sweep_plateau<Q, F>(
    engine: &Engine,
    parameter: &str,
    values: &[f64],
    family: F,
    grid: &BzGrid,
    thermal: &ThermalSpec,
) -> Result<SweepResult>
where
    Q: TwoBandQuench,
    F: Fn(f64) -> Result<Q> + Sync,
{
    let model = match values.first() {
        Some(&p) => describe_family(&family(p)?),
        None => return Err(Error::EmptyGrid),
    };
    let meta = SweepMeta {
        model,
        thermal: format!("beta={}, mu={}", thermal.beta(), thermal.mu()),
        grid: grid.describe(),
        tau: "infinite".into(),
    };
    sweep_with(engine, parameter, values, meta, |p| {
        engine.stored_energy_at(&family(p)?, ChargingTime::Infinite, grid, thermal)
    })
}

fn describe_family<Q: TwoBandQuench>(q: &Q) -> String {
    format!("{:?}", q.class())
}

fn uniform_step(grid: &[f64]) -> Result<f64> {
    let step = grid[1] - grid[0];
    for (i, w) in grid.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - step).abs() > 1e-6 * step.abs() + 1e-12 {
            return Err(Error::NonUniformGrid { first: step, other: d, index: i });
        }
    }
    Ok(step)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kink {
    pub parameter: f64,
    pub second_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KinkReport {
    pub kinks: Vec<Kink>,
    pub threshold: f64,
    /// Median of the resolvable `|Δ²E|` values.
    pub median: f64,
}

/// Flags local maxima of `|Δ²E|` that exceed `threshold × median`.
///
/// The median is taken over second differences above a noise floor of
/// `1e-10 · max|E|`: on a sweep that is exactly flat over most of its range
/// the plain median is zero and every rounding wiggle would qualify.
pub fn detect_kinks(sweep: &SweepResult, threshold: f64) -> Result<KinkReport> {
    let n = sweep.grid.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("kink detection needs at least 5 points, got {n}")));
    }
    uniform_step(&sweep.grid)?;
    let e = &sweep.values;
    let d2: Vec<f64> = (1..n - 1).map(|i| (e[i + 1] - 2.0 * e[i] + e[i - 1]).abs()).collect();
    let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-10 * scale;
    let mut resolved: Vec<f64> = d2.iter().copied().filter(|&v| v > floor).collect();
    if resolved.is_empty() {
        return Ok(KinkReport { kinks: Vec::new(), threshold, median: 0.0 });
    }
    resolved.sort_by(f64::total_cmp);
    let m = resolved.len();
    let median = if m % 2 == 1 { resolved[m / 2] } else { 0.5 * (resolved[m / 2 - 1] + resolved[m / 2]) };
    let cut = (threshold * median).max(floor);
    let mut kinks = Vec::new();
    // d2[j] belongs to grid point j + 1; both neighbors must exist.
    for j in 1..d2.len() - 1 {
        if d2[j] > cut && d2[j] > d2[j - 1] && d2[j] >= d2[j + 1] {
            kinks.push(Kink { parameter: sweep.grid[j + 1], second_difference: d2[j] });
        }
    }
    Ok(KinkReport { kinks, threshold, median })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlateauInterval {
    pub start: f64,
    pub end: f64,
    pub mean: f64,
    pub points: usize,
}

/// Maximal runs of at least five consecutive points with `|dE/dparam| < flatness_tol`.
pub fn plateau_regions(sweep: &SweepResult, flatness_tol: f64) -> Result<Vec<PlateauInterval>> {
    let n = sweep.grid.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    uniform_step(&sweep.grid)?;
    let (x, e) = (&sweep.grid, &sweep.values);
    let slope = |i: usize| -> f64 {
        if i == 0 {
            (e[1] - e[0]) / (x[1] - x[0])
        } else if i == n - 1 {
            (e[n - 1] - e[n - 2]) / (x[n - 1] - x[n - 2])
        } else {
            (e[i + 1] - e[i - 1]) / (x[i + 1] - x[i - 1])
        }
    };
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=n {
        let flat = i < n && slope(i).abs() < flatness_tol;
        match (flat, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= MIN_PLATEAU_POINTS {
                    let mean = crate::sum::stable_mean(&e[s..i]);
                    out.push(PlateauInterval { start: x[s], end: x[i - 1], mean, points: i - s });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Sampling of the τ axis for [`recurrence_profile`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecurrenceOptions {
    /// Defaults to `2N`.
    pub tau_max: Option<f64>,
    /// Defaults to `min(π/(8 ω_max), tau_max/400)`.
    pub dtau: Option<f64>,
    /// Rolling-window length in τ samples.
    pub window: usize,
    /// Onset fires when the rolling variance exceeds this multiple of the plateau variance.
    pub onset_factor: f64,
}

impl Default for RecurrenceOptions {
    fn default() -> Self {
        Self { tau_max: None, dtau: None, window: 50, onset_factor: 5.0 }
    }
}

/// Oscillation → plateau → recurrence structure of `ΔE(τ)` on a finite ring.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub plateau_start: f64,
    pub plateau_end: f64,
    pub plateau_mean: f64,
    /// `None` when the curve never leaves its quietest window by the onset
    /// factor, e.g. a flat charging band that never dephases.
    pub onset: Option<f64>,
    pub amplitude_before: f64,
    pub amplitude_plateau: f64,
    pub amplitude_after: f64,
    /// Maximum of `ΔE` from the start of the plateau window to `tau_max`.
    pub e_max: f64,
    pub tau_at_e_max: f64,
    pub dtau: f64,
    pub samples: usize,
}

fn half_range(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    0.5 * (hi - lo)
}

fn variance(xs: &[f64]) -> f64 {
    let mean = crate::sum::stable_mean(xs);
    let sq: Vec<f64> = xs.iter().map(|v| (v - mean) * (v - mean)).collect();
    crate::sum::stable_mean(&sq)
}

pub fn recurrence_profile<Q: TwoBandQuench>(
    engine: &Engine,
    q: &Q,
    n: usize,
    thermal: &ThermalSpec,
    opts: &RecurrenceOptions,
) -> Result<RecurrenceReport> {
    let grid = BzGrid::finite(n);
    grid.validate()?;
    let tau_max = opts.tau_max.unwrap_or(2.0 * n as f64);
    if !(tau_max > 0.0) {
        return Err(Error::InvalidInput(format!("tau_max must be positive, got {tau_max}")));
    }
    let dtau = match opts.dtau {
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(Error::InvalidInput(format!("dtau must be positive, got {d}"))),
        None => {
            let omega_max = grid
                .momenta()
                .iter()
                .map(|&k| q.gaps(k).map(|g| g.1))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0f64, f64::max);
            let resolve = if omega_max > 0.0 { std::f64::consts::PI / (8.0 * omega_max) } else { f64::INFINITY };
            resolve.min(tau_max / 400.0)
        }
    };
    let samples = (tau_max / dtau).ceil() as usize + 1;
    let w = opts.window;
    if w < 2 || samples < 3 * w {
        return Err(Error::Unresolvable(format!(
            "{samples} samples cannot hold three windows of {w} samples"
        )));
    }
    let taus: Vec<f64> = (0..samples).map(|i| i as f64 * dtau).collect();
    let curve = engine.energy_curve(q, &taus, &grid, thermal)?;
    let e = &curve.energy_per_site;

    let windows = samples - w + 1;
    let var: Vec<f64> = engine.install(|| (0..windows).into_par_iter().map(|j| variance(&e[j..j + w])).collect());
    let v_min = var[w..].iter().copied().fold(f64::INFINITY, f64::min);
    let plateau = (w..windows).find(|&j| var[j] <= 2.0 * v_min).expect("minimum is attained");
    let v_plateau = var[plateau];
    let onset_idx = (plateau + w..windows).find(|&j| var[j] > opts.onset_factor * v_plateau);

    let plateau_slice = &e[plateau..plateau + w];
    let tail_from = plateau;
    let (max_i, e_max) = e[tail_from..]
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(RecurrenceReport {
        plateau_start: taus[plateau],
        plateau_end: taus[plateau + w - 1],
        plateau_mean: crate::sum::stable_mean(plateau_slice),
        onset: onset_idx.map(|j| taus[j]),
        amplitude_before: half_range(&e[..plateau]),
        amplitude_plateau: half_range(plateau_slice),
        amplitude_after: onset_idx.map(|j| half_range(&e[j..])).unwrap_or(0.0),
        e_max,
        tau_at_e_max: taus[tail_from + max_i],
        dtau,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(N, total P_max)` pairs.
    pub points: Vec<(usize, f64)>,
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two paired points".into()));
    }
    let xm = crate::sum::stable_mean(x);
    let ym = crate::sum::stable_mean(y);
    let sxx: Vec<f64> = x.iter().map(|v| (v - xm) * (v - xm)).collect();
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).collect();
    let syy: Vec<f64> = y.iter().map(|v| (v - ym) * (v - ym)).collect();
    let (sxx, sxy, syy) = (crate::sum::stable_sum(&sxx), crate::sum::stable_sum(&sxy), crate::sum::stable_sum(&syy));
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateFit("all ordinates coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).collect();
    let r2 = 1.0 - crate::sum::stable_sum(&resid) / syy;
    Ok((slope, intercept, r2))
}

/// Total maximum charging power `N · P_max/site` against `N`, with a linear fit.
pub fn power_scaling<Q: TwoBandQuench>(
    engine: &Engine,
    q: &Q,
    sizes: &[usize],
    taus: &[f64],
    thermal: &ThermalSpec,
) -> Result<ScalingFit> {
    if sizes.len() < 4 {
        return Err(Error::InvalidInput(format!("power scaling needs at least 4 sizes, got {}", sizes.len())));
    }
    let powers: Vec<MaxPower> = sizes
        .iter()
        .map(|&n| engine.max_power(q, taus, &BzGrid::finite(n), thermal))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = sizes.iter().zip(&powers).map(|(&n, p)| n as f64 * p.power_per_site).collect();
    let (slope, intercept, r_squared) = linear_fit(&x, &y)?;
    Ok(ScalingFit { slope, intercept, r_squared, points: sizes.iter().copied().zip(y).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep_of(f: impl Fn(f64) -> f64, start: f64, step: f64, n: usize) -> SweepResult {
        let grid: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
        let values = grid.iter().map(|&x| f(x)).collect();
        SweepResult {
            parameter: "p".into(),
            grid,
            values,
            meta: SweepMeta { model: "test".into(), thermal: String::new(), grid: String::new(), tau: String::new() },
        }
    }

    #[test]
    fn smooth_quadratic_has_no_kinks() {
        let s = sweep_of(|x| 0.3 * x * x - x + 2.0, -3.0, 0.01, 601);
        assert!(detect_kinks(&s, DEFAULT_KINK_THRESHOLD).unwrap().kinks.is_empty());
    }

    #[test]
    fn abs_kink_found() {
        let s = sweep_of(|x: f64| (x - 0.5).abs() + 0.1 * x.sin(), -2.0, 0.01, 401);
        let r = detect_kinks(&s, DEFAULT_KINK_THRESHOLD).unwrap();
        assert_eq!(r.kinks.len(), 1);
        assert!((r.kinks[0].parameter - 0.5).abs() < 1e-9);
    }

    #[test]
    fn kink_input_validation() {
        let s = sweep_of(|x| x, 0.0, 0.1, 4);
        assert!(detect_kinks(&s, 10.0).is_err());
        let mut s = sweep_of(|x| x, 0.0, 0.1, 10);
        s.grid[5] += 0.05;
        assert!(matches!(detect_kinks(&s, 10.0), Err(Error::NonUniformGrid { .. })));
    }

    #[test]
    fn plateau_regions_found() {
        let s = sweep_of(|x: f64| if x > 1.0 { 0.25 } else { 0.25 * x * x }, -0.5, 0.01, 251);
        let p = plateau_regions(&s, DEFAULT_FLATNESS_TOL).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p[0].start > 1.0 && p[0].start < 1.03);
        assert!((p[0].end - 2.0).abs() < 1e-9);
        assert!((p[0].mean - 0.25).abs() < 1e-15);
        // Short flat run (fewer than five points) is not reported.
        let s = sweep_of(|x: f64| x.powi(3), -1.0, 0.01, 201);
        assert!(plateau_regions(&s, 1e-3).unwrap().is_empty());
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [50.0, 100.0, 200.0, 400.0];
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + 1.0).collect();
        let (a, b, r2) = linear_fit(&x, &y).unwrap();
        assert!((a - 0.3).abs() < 1e-12 && (b - 1.0).abs() < 1e-9 && (r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[1.0, 1.0]).is_err());
    }
}
