//! parse -> serialize -> parse is the identity on valid configurations.

use cohpath_cli::config::*;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    -10.0f64..10.0
}

fn positive() -> impl Strategy<Value = f64> {
    1e-3f64..50.0
}

fn bath(boson: bool, keldysh: bool) -> impl Strategy<Value = BathConfig> {
    let freq = if boson { (1e-2f64..5.0).boxed() } else { finite().boxed() };
    let modes = prop::collection::vec((freq, finite()).prop_map(|(freq, coupling)| ModeConfig { freq, coupling }), 1..4);
    let cont = (0usize..3, positive(), positive(), finite(), 0.0f64..2.0, 0.1f64..5.0, 1usize..20).prop_map(move |(s, strength, cutoff, center, lo, width, count)| {
        let shape = [Shape::Ohmic, Shape::Flat, Shape::Lorentzian][s];
        ContinuousConfig {
            shape,
            strength,
            cutoff: if shape == Shape::Flat { None } else { Some(cutoff) },
            center: if shape == Shape::Lorentzian { Some(center) } else { None },
            window: [lo, lo + width],
            count,
        }
    });
    (prop::option::of(modes), cont, positive()).prop_map(move |(modes, cont, beta)| BathConfig {
        beta: if keldysh { Some(beta) } else { None },
        continuous: if modes.is_none() { Some(cont) } else { None },
        modes,
    })
}

fn config() -> impl Strategy<Value = RunConfig> {
    (0usize..3, any::<bool>(), positive(), positive(), 1usize..40, 1usize..40, any::<bool>(), prop::collection::vec(1usize..30, 0..4))
        .prop_flat_map(|(f, boson, beta, t_f, m, n, lin, ladder)| {
            let formalism = [Formalism::Imaginary, Formalism::Keldysh, Formalism::Kadanoff][f];
            let keldysh = formalism == Formalism::Keldysh;
            let grid = GridConfig {
                beta,
                t_final: if formalism == Formalism::Imaginary { 0.0 } else { t_f },
                m,
                n,
                convention: if lin { ConventionName::Linearized } else { ConventionName::Exponential },
                ladder,
            };
            let system = if boson {
                (1usize..4, finite()).prop_map(move |(d, x)| SystemConfig {
                    hamiltonian: Some((0..d).map(|i| (0..d).map(|j| if i == j { x } else { 0.5 }).collect()).collect()),
                    coupling: Some((0..d).map(|i| i as f64 - 1.0).collect()),
                    density: if keldysh { Some((0..d).map(|i| (0..d).map(|j| if i == j && i == 0 { 1.0 } else { 0.0 }).collect()).collect()) } else { None },
                    ..Default::default()
                })
                .boxed()
            } else {
                (finite(), 0.0f64..0.99)
                    .prop_map(move |(level, p)| SystemConfig { level: Some(level), occupation: if keldysh { Some(p) } else { None }, ..Default::default() })
                    .boxed()
            };
            let observe = (prop::option::of(prop::collection::vec([0usize..10, 0usize..10], 0..4)), 0usize..2, 0usize..2, prop::option::of(prop::collection::vec(0usize..10, 0..3)))
                .prop_map(|(pairs, bath, mode, steps)| ObserveConfig { pairs, bath, mode, steps });
            let task = prop::option::of(0usize..5).prop_map(|t| t.map(|t| [Task::Verify, Task::Partition, Task::Correlator, Task::Current, Task::Green][t]));
            (Just(formalism), Just(boson), Just(grid), system, prop::collection::vec(bath(boson, keldysh), 1..3), observe, task, any::<u32>(), 1usize..60)
        })
        .prop_map(|(formalism, boson, grid, system, baths, observe, task, seed, n_max)| RunConfig {
            task,
            formalism,
            statistics: if boson { StatisticsName::Boson } else { StatisticsName::Fermion },
            output: None,
            grid,
            system,
            baths,
            pathsum: PathSumConfig::default(),
            reference: ReferenceConfig { oracle: seed % 2 == 0, exact: seed % 3 == 0, n_max },
            observe,
            verify: VerifyConfig { seed, samples: 5, sizes: vec![4] },
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip(cfg in config()) {
        cfg.validate().unwrap();
        let text = cfg.to_toml().map_err(|e| TestCaseError::fail(format!("{e}: {cfg:?}")))?;
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn shipped_configs_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().and_then(|x| x.to_str()) != Some("toml") {
            continue;
        }
        let cfg = RunConfig::parse(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml().unwrap()).unwrap(), cfg, "{}", p.display());
        n += 1;
    }
    assert!(n >= 5);
}
