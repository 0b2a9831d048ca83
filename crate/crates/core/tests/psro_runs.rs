mod common;

use std::fs;

use common::kuhn;
use psro_core::game::Player;
use psro_core::oracle::OracleMode;
use psro_core::policy::BehavioralPolicy;
use psro_core::psro::{
    evaluate_run, metrics_csv, run, run_domain, run_rectified, GameSpec, InitialPolicy, RunConfig, TreeDomain, Variant,
    EVAL_HEADER, METRICS_HEADER,
};

fn config(game: GameSpec, variant: Variant, iterations: usize) -> RunConfig {
    let mut cfg = RunConfig {
        game,
        variant,
        iterations,
        deterministic: true,
        ..RunConfig::default()
    };
    if variant == Variant::PsdPsro {
        cfg.oracle.lambda = cfg.game.default_lambda();
        cfg.oracle.mode = OracleMode::ExactGradient;
    }
    cfg
}

#[test]
fn kuhn_psro_reaches_low_exploitability() {
    let summary = run(&config(GameSpec::Kuhn, Variant::Psro, 20)).unwrap();
    assert_eq!(summary.logs.len(), 20);
    assert!(summary.final_exploitability.unwrap() <= 1e-3);
}

#[test]
fn populations_grow_by_one_per_iteration() {
    for variant in [Variant::Psro, Variant::PsdPsro] {
        let mut cfg = config(GameSpec::Kuhn, variant, 6);
        cfg.oracle.steps = 10;
        let summary = run(&cfg).unwrap();
        for (t, log) in summary.logs.iter().enumerate() {
            assert_eq!(log.population_sizes, [t + 1, t + 1], "{variant}");
        }
        assert_eq!(summary.population_sizes, [7, 7]);
    }
}

#[test]
fn rectified_populations_grow_by_support_size() {
    let mut cfg = config(GameSpec::Kuhn, Variant::PsroRn, 6);
    cfg.initial = InitialPolicy::Random;
    let domain = TreeDomain { game: kuhn() };
    let outcome = run_domain(&domain, &cfg).ok().unwrap();
    let mut meta = psro_core::meta::MetaGame::from_matrix(Vec::new());
    let mut sizes = [1usize, 1usize];
    for log in &outcome.logs {
        assert_eq!(log.population_sizes, sizes);
        let rows: Vec<Vec<f64>> = (0..sizes[0])
            .map(|j| {
                (0..sizes[1])
                    .map(|k| {
                        psro_core::game::expected_utility(&domain.game, &outcome.populations[0][j], &outcome.populations[1][k])
                            .unwrap()
                    })
                    .collect()
            })
            .collect();
        meta = psro_core::meta::MetaGame::from_matrix(rows);
        let ne = meta.solve().clone();
        sizes[0] += ne.row.iter().filter(|p| **p > 0.0).count();
        sizes[1] += ne.col.iter().filter(|p| **p > 0.0).count();
    }
    assert_eq!([outcome.populations[0].len(), outcome.populations[1].len()], sizes);
    assert!(meta.num_rows() > 0);
    assert!(run_rectified(&config(GameSpec::Kuhn, Variant::Psro, 1)).is_err());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let mut cfg = config(GameSpec::Kuhn, Variant::PsdPsro, 4);
    cfg.oracle.mode = OracleMode::Reinforce;
    cfg.oracle.steps = 5;
    cfg.oracle.episodes = 32;
    cfg.initial = InitialPolicy::Random;
    cfg.seed = 9;
    let a = metrics_csv(&run(&cfg).unwrap().logs);
    let b = metrics_csv(&run(&cfg).unwrap().logs);
    assert_eq!(a, b);
    assert!(a.starts_with(METRICS_HEADER));
    cfg.seed = 10;
    assert_ne!(a, metrics_csv(&run(&cfg).unwrap().logs));
}

#[test]
fn policy_hull_strictly_grows_on_rps() {
    let mut cfg = config(GameSpec::Rps, Variant::PsdPsro, 8);
    cfg.initial = InitialPolicy::Random;
    cfg.seed = 3;
    let summary = run(&cfg).unwrap();
    let mut checked = 0;
    for log in &summary.logs {
        if log.pe.unwrap() > 1e-3 {
            for d in log.hull_distance {
                assert!(d.unwrap() > 1e-6, "iteration {}: {:?}", log.iteration, log.hull_distance);
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn zero_step_oracle_adds_a_copy_of_the_start() {
    let mut cfg = config(GameSpec::Kuhn, Variant::PsdPsro, 1);
    cfg.oracle.mode = OracleMode::Reinforce;
    cfg.oracle.lambda = 0.0;
    cfg.allow_zero_lambda = true;
    cfg.oracle.learning_rate = 0.0;
    cfg.initial = InitialPolicy::Random;
    let domain = TreeDomain { game: kuhn() };
    let outcome = run_domain(&domain, &cfg).ok().unwrap();
    for pop in &outcome.populations {
        assert_eq!(pop.len(), 2);
        assert_eq!(pop[0], pop[1]);
    }
}

#[test]
fn evaluation_reproduces_logged_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(GameSpec::Kuhn, Variant::Psro, 5);
    cfg.initial = InitialPolicy::Random;
    cfg.out = Some(dir.path().to_path_buf());
    let summary = run(&cfg).unwrap();
    let rows = evaluate_run(dir.path(), cfg.pe_epsilon).unwrap();
    assert_eq!(rows.len(), 5);
    for (row, log) in rows.iter().zip(&summary.logs) {
        assert_eq!(row.population_sizes, log.population_sizes);
        assert!((row.exploitability - log.exploitability.unwrap()).abs() < 1e-9);
        assert!((row.pe - log.pe.unwrap()).abs() < 1e-9);
    }
    assert!(psro_core::psro::eval_csv(&rows).starts_with(EVAL_HEADER));

    let broken = dir.path().join("policies").join("p2_0003.txt");
    fs::write(&broken, "not a policy").unwrap();
    let err = evaluate_run(dir.path(), cfg.pe_epsilon).unwrap_err().to_string();
    assert!(err.contains("p2_0003.txt"), "{err}");
}

#[test]
fn written_policies_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(GameSpec::Kuhn, Variant::Psro, 2);
    cfg.out = Some(dir.path().to_path_buf());
    run(&cfg).unwrap();
    let game = kuhn();
    let text = fs::read_to_string(dir.path().join("policies/p1_0001.txt")).unwrap();
    let policy = BehavioralPolicy::parse(&game, &text).unwrap();
    assert_eq!(policy.owner(), Player::One);
    let config: RunConfig = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(config.iterations, 2);
}
