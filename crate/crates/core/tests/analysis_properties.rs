use proptest::prelude::*;
use quenchbat::analysis::*;
use quenchbat::models::*;
use quenchbat::*;

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

fn ising(h0: f64, h1: f64) -> QuenchSpec<NambuModel> {
    QuenchSpec::plateau(build_ising(IsingParams { h: h0 }), build_ising(IsingParams { h: h1 }))
}

fn closed_form_sweep(f: impl Fn(f64) -> f64, values: Vec<f64>) -> SweepResult {
    let v = values.iter().map(|&x| f(x)).collect();
    SweepResult {
        parameter: "p".into(),
        grid: values,
        values: v,
        meta: SweepMeta { model: "closed form".into(), thermal: "beta=inf".into(), grid: "exact".into(), tau: "infinite".into() },
    }
}

#[test]
fn closed_form_kinks_are_exactly_the_branch_points() {
    let s = closed_form_sweep(ising_plateau_closed_form, grid(-3.0, 3.0, 0.01));
    let at: Vec<f64> = detect_kinks(&s, 10.0).unwrap().kinks.iter().map(|k| k.parameter).collect();
    assert_eq!(at.len(), 2, "{at:?}");
    assert!((at[0] + 1.0).abs() < 1e-9 && (at[1] - 1.0).abs() < 1e-9, "{at:?}");

    let s = closed_form_sweep(xy_plateau_closed_form, grid(-3.0, 3.0, 0.01));
    let at: Vec<f64> = detect_kinks(&s, 10.0).unwrap().kinks.iter().map(|k| k.parameter).collect();
    assert_eq!(at.len(), 1, "{at:?}");
    assert!(at[0].abs() < 1e-9);
}

#[test]
fn ising_h0_sweep_peaks_at_critical_sum() {
    let engine = Engine::new();
    let s = sweep_plateau(
        &engine,
        "h0",
        &grid(-2.0, 2.0, 0.01),
        |h0| Ok(ising(h0, h0 + 0.25)),
        &BzGrid::thermodynamic(),
        &ThermalSpec::at_beta(10.0),
    )
    .unwrap();
    let report = detect_kinks(&s, 10.0).unwrap();
    let top = report.kinks.iter().max_by(|a, b| a.second_difference.total_cmp(&b.second_difference)).unwrap();
    assert!((top.parameter - 0.75).abs() < 1e-9, "{report:?}");
}

#[test]
fn ssh_asymptotic_sweep_has_single_peak_at_qpt() {
    let engine = Engine::new();
    let s = sweep_plateau(
        &engine,
        "delta0",
        &grid(-9.0, -5.0, 0.01),
        |d0| Ok(QuenchSpec::plateau(build_ssh_nn(d0), build_ssh_nn(d0 + 7.0))),
        &BzGrid::thermodynamic(),
        &ThermalSpec::at_beta(10.0),
    )
    .unwrap();
    let peaks: Vec<f64> = (1..s.values.len() - 1)
        .filter(|&i| s.values[i] > s.values[i - 1] && s.values[i] >= s.values[i + 1])
        .map(|i| s.grid[i])
        .collect();
    assert_eq!(peaks.len(), 1, "{peaks:?}");
    assert!((peaks[0] + 7.0).abs() <= 0.01 + 1e-9);
}

#[test]
fn plateau_examples() {
    let engine = Engine::new();
    let tl = BzGrid::thermodynamic();
    let gs = ThermalSpec::ground_state();
    let s = sweep_plateau(&engine, "h_f", &grid(0.0, 3.0, 0.01), |h| Ok(ising(0.0, h)), &tl, &gs).unwrap();
    let p = plateau_regions(&s, DEFAULT_FLATNESS_TOL).unwrap();
    assert_eq!(p.len(), 1, "{p:?}");
    assert!(p[0].start > 1.0 && p[0].start <= 1.02 && p[0].end == 3.0, "{p:?}");
    assert!((p[0].mean - 0.25).abs() < 1e-9);

    let xy = |g: f64| {
        QuenchSpec::plateau(build_xy(XyParams { gamma: 1.0, h: 0.0 }), build_xy(XyParams { gamma: g, h: 0.0 }))
    };
    let s = sweep_plateau(&engine, "gamma1", &grid(-3.0, 3.0, 0.01), |g| Ok(xy(g)), &tl, &gs).unwrap();
    let p = plateau_regions(&s, DEFAULT_FLATNESS_TOL).unwrap();
    assert!(p[0].start == -3.0 && p[0].end < 0.0 && p[0].end >= -0.02, "{p:?}");
    assert!((p[0].mean - 0.25).abs() < 1e-9);

    let s = sweep_plateau(&engine, "h_f", &grid(-3.0, 3.0, 0.01), |h| Ok(ising(0.5, h)), &tl, &ThermalSpec::at_beta(10.0))
        .unwrap();
    assert!(plateau_regions(&s, DEFAULT_FLATNESS_TOL).unwrap().is_empty());
}

#[test]
fn temperature_only_lowers_the_ising_plateau() {
    let engine = Engine::new();
    let values = grid(-3.0, 3.0, 0.05);
    let n300 = BzGrid::finite(300);
    let betas = [0.5, 1.0, 2.0, 10.0];
    let sweeps: Vec<SweepResult> = betas
        .iter()
        .map(|&b| sweep_plateau(&engine, "h_f", &values, |h| Ok(ising(0.0, h)), &n300, &ThermalSpec::at_beta(b)).unwrap())
        .chain(std::iter::once(
            sweep_plateau(&engine, "h_f", &values, |h| Ok(ising(0.0, h)), &n300, &ThermalSpec::ground_state()).unwrap(),
        ))
        .collect();
    for pair in sweeps.windows(2) {
        for (lo, hi) in pair[0].values.iter().zip(&pair[1].values) {
            assert!(lo <= hi, "{lo} > {hi}");
        }
    }
}

#[test]
fn recurrence_properties() {
    let engine = Engine::new();
    let t = ThermalSpec::at_beta(10.0);
    let q = QuenchSpec::plateau(build_ssh_nn(-7.5), build_ssh_nn(-0.5));
    let mut onsets = Vec::new();
    for n in [50, 100, 200] {
        let r = recurrence_profile(&engine, &q, n, &t, &RecurrenceOptions::default()).unwrap();
        let e_inf = engine.stored_energy(&q, &BzGrid::finite(n), &t).unwrap();
        assert!(r.e_max >= e_inf, "N = {n}: {} < {e_inf}", r.e_max);
        let onset = r.onset.expect("recurrence within 2N");
        assert!(onset > r.plateau_start);
        assert!(r.amplitude_before >= 0.0 && r.amplitude_plateau >= 0.0 && r.amplitude_after >= 0.0);
        onsets.push(onset);
    }
    assert!(onsets[0] < onsets[1] && onsets[1] < onsets[2], "{onsets:?}");

    let short = RecurrenceOptions { tau_max: Some(1.0), dtau: Some(0.1), ..RecurrenceOptions::default() };
    assert!(matches!(recurrence_profile(&engine, &q, 50, &t, &short), Err(Error::Unresolvable(_))));
}

#[test]
fn power_scales_linearly() {
    let engine = Engine::new();
    let sizes = [50, 100, 200, 400];
    let taus = quenchbat::quench::default_power_tau_grid();
    let t = ThermalSpec::at_beta(10.0);
    let cluster = QuenchSpec::plateau(
        build_cluster_ising(ClusterIsingParams { lambda: 0.7 }),
        build_cluster_ising(ClusterIsingParams { lambda: 1.0 }),
    );
    let ssh = QuenchSpec::plateau(build_ssh_nn(-7.5), build_ssh_nn(-0.5));
    let fits = [
        power_scaling(&engine, &cluster, &sizes, &taus, &t).unwrap(),
        power_scaling(&engine, &ssh, &sizes, &taus, &t).unwrap(),
    ];
    for fit in &fits {
        assert!(fit.r_squared >= 0.999, "{fit:?}");
        assert!(fit.intercept.abs() <= 0.01 * fit.slope * 50.0, "{fit:?}");
    }

    // A k-independent summand is exactly extensive.
    let flat = QuenchSpec::plateau(
        NambuModel::from_fn("flat a", |_| (0.0, 1.0)),
        NambuModel::from_fn("flat b", |_| (1.0, 0.0)),
    );
    let fit = power_scaling(&engine, &flat, &sizes, &taus, &t).unwrap();
    assert!((fit.r_squared - 1.0).abs() < 1e-10 && fit.intercept.abs() < 1e-10 * fit.slope, "{fit:?}");
    assert!(power_scaling(&engine, &flat, &sizes[..3], &taus, &t).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sweep_ignores_input_order(h0 in -1.5f64..1.5, seed in any::<u64>()) {
        let engine = Engine::new();
        let values = grid(-2.0, 2.0, 0.1);
        let mut shuffled = values.clone();
        shuffled.reverse();
        shuffled.rotate_left((seed % values.len() as u64) as usize);
        let g = BzGrid::finite(64);
        let t = ThermalSpec::at_beta(3.0);
        let a = sweep_plateau(&engine, "h_f", &values, |h| Ok(ising(h0, h)), &g, &t).unwrap();
        let b = sweep_plateau(&engine, "h_f", &shuffled, |h| Ok(ising(h0, h)), &g, &t).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sweep_values_are_finite_and_non_negative(l0 in -2.0f64..2.0, l1 in -1.0f64..1.0, beta in 0.1f64..20.0) {
        let engine = Engine::new();
        let s = sweep_plateau(
            &engine,
            "lambda0",
            &grid(l0, l0 + 0.5, 0.05),
            |l| Ok(QuenchSpec::plateau(
                build_cluster_ising(ClusterIsingParams { lambda: l }),
                build_cluster_ising(ClusterIsingParams { lambda: l + l1 }),
            )),
            &BzGrid::finite(40),
            &ThermalSpec::at_beta(beta),
        ).unwrap();
        prop_assert!(s.grid.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
