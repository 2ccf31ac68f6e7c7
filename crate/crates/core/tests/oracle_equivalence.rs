use proptest::prelude::*;
use quenchbat::models::*;
use quenchbat::*;

fn beta_strategy() -> impl Strategy<Value = Beta> {
    prop_oneof![1 => Just(Beta::Infinite), 4 => (0.1f64..20.0).prop_map(Beta::Finite)]
}

fn tau_strategy() -> impl Strategy<Value = ChargingTime> {
    prop_oneof![1 => Just(ChargingTime::Infinite), 6 => (0.0f64..10.0).prop_map(ChargingTime::Finite)]
}

fn grid_strategy() -> impl Strategy<Value = BzGrid> {
    (1usize..=16, any::<bool>()).prop_map(|(n, half)| {
        BzGrid::finite_with_offset(n, if half { MomentumOffset::HalfInteger } else { MomentumOffset::Integer })
    })
}

fn hoppings() -> impl Strategy<Value = SshHoppings> {
    (-3.0f64..3.0, -3.0f64..3.0, -1.0f64..1.0, -1.5f64..1.5, -1.5f64..1.5)
        .prop_map(|(j1, j1p, j2, j3, j3p)| SshHoppings { j1, j1p, j2, j3, j3p })
}

fn agree<Q: TwoBandQuench + std::fmt::Debug>(q: &Q, grid: &BzGrid, thermal: &ThermalSpec) -> Result<(), TestCaseError> {
    let engine = Engine::new();
    let f = engine.stored_energy(q, grid, thermal).unwrap();
    let o = engine.oracle_stored_energy(q, q.tau(), grid, thermal, Default::default()).unwrap();
    prop_assert!((f - o).abs() <= 1e-9 * f.abs().max(1.0), "formula {} oracle {} for {:?}", f, o, q);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ising(h0 in -3.0f64..3.0, h1 in -3.0f64..3.0, beta in beta_strategy(), tau in tau_strategy(), grid in grid_strategy()) {
        let q = QuenchSpec::new(build_ising(IsingParams { h: h0 }), build_ising(IsingParams { h: h1 }), tau);
        agree(&q, &grid, &ThermalSpec::new(beta, 0.0).unwrap())?;
    }

    #[test]
    fn xy(g0 in -3.0f64..3.0, h0 in -2.0f64..2.0, g1 in -3.0f64..3.0, h1 in -2.0f64..2.0,
          beta in beta_strategy(), tau in tau_strategy(), grid in grid_strategy()) {
        let q = QuenchSpec::new(build_xy(XyParams { gamma: g0, h: h0 }), build_xy(XyParams { gamma: g1, h: h1 }), tau);
        agree(&q, &grid, &ThermalSpec::new(beta, 0.0).unwrap())?;
    }

    #[test]
    fn cluster(l0 in -3.0f64..3.0, l1 in -3.0f64..3.0, beta in beta_strategy(), tau in tau_strategy(), grid in grid_strategy()) {
        let q = QuenchSpec::new(
            build_cluster_ising(ClusterIsingParams { lambda: l0 }),
            build_cluster_ising(ClusterIsingParams { lambda: l1 }),
            tau,
        );
        agree(&q, &grid, &ThermalSpec::new(beta, 0.0).unwrap())?;
    }

    #[test]
    fn ssh(a in hoppings(), b in hoppings(), mu in -1.5f64..1.5,
           beta in beta_strategy(), tau in tau_strategy(), grid in grid_strategy()) {
        let q = QuenchSpec::new(build_ssh(a, MaxNeighbor::Third), build_ssh(b, MaxNeighbor::Third), tau);
        agree(&q, &grid, &ThermalSpec::new(beta, mu).unwrap())?;
    }

    #[test]
    fn cluster_model_hamiltonian_scales_energy(l0 in -3.0f64..3.0, l1 in -3.0f64..3.0, t in 0.0f64..10.0) {
        // With the recorded prefactor applied, the ground-state energy scales
        // with it and the time axis is compressed by the same factor.
        let engine = Engine::new();
        let grid = BzGrid::finite(9);
        let gs = ThermalSpec::ground_state();
        let a = build_cluster_ising(ClusterIsingParams { lambda: l0 });
        let b = build_cluster_ising(ClusterIsingParams { lambda: l1 });
        let s = CLUSTER_ISING_PREFACTOR / 0.5;
        let q = QuenchSpec::new(a, b, ChargingTime::Finite(t));
        let scaled = engine
            .oracle_stored_energy(&q, ChargingTime::Finite(t / s), &grid, &gs, quenchbat::oracle::OracleNormalization::ModelHamiltonian)
            .unwrap();
        let canonical = engine.stored_energy(&q, &grid, &gs).unwrap();
        prop_assert!((scaled - s * canonical).abs() <= 1e-9 * scaled.abs().max(1.0));
    }
}
