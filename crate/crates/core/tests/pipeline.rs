//! End-to-end checks across model, solver, game and references.

use dominative::dpp::{check_comparison, solve_dpp, value_at};
use dominative::game::{estimate_value, play, FixedDirection, Game, GreedyStrategy, RandomDirection};
use dominative::harness::{log_log_slope, run_convergence, Config};
use dominative::operators::Field;
use dominative::{DirectionMode, GameParams, GridConfig, PayoffField, ReferenceSolution, Shape, SpaceTimeDomain, TimeScaling};
use proptest::prelude::*;

fn square(horizon: f64) -> SpaceTimeDomain {
    SpaceTimeDomain::new(Shape::Box { lower: vec![-1.0, -1.0], upper: vec![1.0, 1.0] }, horizon).unwrap()
}

fn sup_error(grid: &dominative::ValueGrid, exact: &ReferenceSolution, probes: &[[f64; 3]]) -> f64 {
    probes
        .iter()
        .map(|p| (value_at(grid, &p[..2], p[2]).unwrap() - exact.value(&p[..2], p[2])).abs())
        .fold(0.0, f64::max)
}

#[test]
fn unit_time_coefficient_scaling_reproduces_its_references() {
    let probes = [[0.0, 0.0, 0.1], [0.3, -0.2, 0.08], [-0.2, 0.25, 0.1]];
    let mut errors = Vec::new();
    let epsilons = [0.4, 0.28, 0.2];
    for eps in epsilons {
        let params = GameParams::new(2, 3.0, eps, TimeScaling::UnitCoefficient).unwrap();
        let domain = square(0.1);
        let quad = ReferenceSolution::quadratic_time(vec![0.1, 0.0], &params);
        let grid = solve_dpp(&domain, &PayoffField::Reference(quad.clone()), &params, &GridConfig::with_ratio(&params, 8.0)).unwrap();
        let mut worst = 0.0f64;
        grid.for_each_value(|_, t, x, v| worst = worst.max((v - quad.value(x, t)).abs()));
        assert!(worst < 1e-12, "{worst}");

        let smooth = ReferenceSolution::cosh_exp(&params);
        let grid = solve_dpp(&domain, &PayoffField::Reference(smooth.clone()), &params, &GridConfig::with_ratio(&params, 8.0)).unwrap();
        errors.push(sup_error(&grid, &smooth, &probes));
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(log_log_slope(&epsilons, &errors).unwrap() > 0.5, "{errors:?}");
}

#[test]
fn three_dimensional_quadratic_is_reproduced() {
    let params = GameParams::new(3, 5.0, 0.3, TimeScaling::Standard).unwrap();
    let domain = SpaceTimeDomain::new(Shape::Ball { center: vec![0.0; 3], radius: 0.8 }, 0.2).unwrap();
    let exact = ReferenceSolution::quadratic_time(vec![0.0, 0.1, -0.1], &params);
    let grid = solve_dpp(&domain, &PayoffField::Reference(exact.clone()), &params, &GridConfig::with_ratio(&params, 4.0)).unwrap();
    assert!(grid.residual().max_abs_residual < 1e-10);
    // nodes sit at multiples of h = 0.075; 0.15 lies between two time levels
    for probe in [[0.0, 0.0, 0.0, 0.18], [0.15, -0.075, 0.075, 0.15]] {
        let got = value_at(&grid, &probe[..3], probe[3]).unwrap();
        assert!((got - exact.value(&probe[..3], probe[3])).abs() < 1e-12);
    }
}

#[test]
fn interpolated_directions_stay_close_to_lattice_directions() {
    let params = GameParams::new(2, 4.0, 0.2, TimeScaling::Standard).unwrap();
    let domain = square(0.3);
    let payoff = PayoffField::Reference(ReferenceSolution::cosh_exp(&params));
    let lattice = solve_dpp(&domain, &payoff, &params, &GridConfig::with_ratio(&params, 8.0)).unwrap();
    let angular = solve_dpp(
        &domain,
        &payoff,
        &params,
        &GridConfig::with_ratio(&params, 8.0).directions(DirectionMode::Angular { count: 64 }),
    )
    .unwrap();
    let h = lattice.spacing();
    for x in [[0.0, 0.0], [0.4, -0.3]] {
        let diff = value_at(&lattice, &x, 0.3).unwrap() - value_at(&angular, &x, 0.3).unwrap();
        assert!(diff.abs() < 10.0 * h * h, "diff {diff}");
    }
}

#[test]
fn greedy_beats_fixed_and_random_play() {
    let params = GameParams::new(2, 4.0, 0.2, TimeScaling::Standard).unwrap();
    let domain = square(0.4);
    let payoff = PayoffField::Reference(ReferenceSolution::cosh_exp(&params));
    let grid = solve_dpp(&domain, &payoff, &params, &GridConfig::with_ratio(&params, 8.0)).unwrap();
    let game = Game::new(params.clone(), domain).unwrap();
    let (x0, t0) = ([0.1, 0.2], 0.4);
    let greedy = GreedyStrategy::new(&grid);
    let run = |s: &dyn dominative::game::Strategy| {
        estimate_value(&game, &x0, t0, s, &payoff, 4000, 11, dominative::Execution::Parallel).unwrap().0
    };
    let best = run(&greedy);
    let target = value_at(&grid, &x0, t0).unwrap();
    assert!((best.mean - target).abs() < best.confidence_radius + 0.05 * target.abs());
    for other in [run(&FixedDirection::new(vec![0.0, 1.0]).unwrap()), run(&RandomDirection { dim: 2 })] {
        assert!(other.mean <= target + other.confidence_radius, "{} > {target}", other.mean);
    }
}

#[test]
fn every_game_ends_within_the_stopping_bound() {
    let params = GameParams::new(2, 6.0, 0.15, TimeScaling::Standard).unwrap();
    let domain = square(0.3);
    let game = Game::new(params, domain).unwrap();
    let payoff = PayoffField::Constant(1.0);
    let strategy = RandomDirection { dim: 2 };
    for trace in 0..300 {
        let tr = play(&game, &[0.0, 0.0], 0.3, &strategy, &payoff, 5, trace).unwrap();
        assert!(tr.tau as f64 <= game.stopping_bound());
        assert_eq!(tr.payoff, 1.0);
    }
}

#[test]
fn convergence_config_round_trip() {
    let cfg = Config::from_json(
        r#"{
            "n": 2, "p": 4.0, "epsilon": 0.3, "scaling": "remark24",
            "domain": { "shape": "ball", "center": [0.0, 0.0], "radius": 1.0 },
            "T": 0.45,
            "grid": { "ratio": 4.0 },
            "convergence": { "reference": "constant", "epsilons": [0.3, 0.2, 0.1], "probes": [[0.0, 0.0, 0.4]] }
        }"#,
    )
    .unwrap();
    let study = run_convergence(&cfg).unwrap();
    assert!(study.exact && study.passed());
    assert!(study.csv().starts_with("epsilon,h,sup_error,seconds\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn affine_data_is_reproduced(gx in -2.0..2.0f64, gy in -2.0..2.0f64, offset in -1.0..1.0f64) {
        let params = GameParams::new(2, 4.0, 0.25, TimeScaling::Standard).unwrap();
        let domain = square(0.2);
        let payoff = PayoffField::Linear { gradient: vec![gx, gy], offset };
        let grid = solve_dpp(&domain, &payoff, &params, &GridConfig::with_ratio(&params, 4.0)).unwrap();
        for x in [[0.0, 0.0], [0.3, -0.5], [-0.6, 0.2]] {
            let got = value_at(&grid, &x, 0.2).unwrap();
            prop_assert!((got - payoff.eval(&x, 0.2)).abs() < 1e-12);
        }
    }

    #[test]
    fn shifting_data_shifts_the_value(shift in -3.0..3.0f64) {
        let params = GameParams::new(2, 5.0, 0.25, TimeScaling::Standard).unwrap();
        let domain = square(0.15);
        let base = PayoffField::Reference(ReferenceSolution::cosh_exp(&params));
        let config = GridConfig::with_ratio(&params, 4.0);
        let grid = solve_dpp(&domain, &base, &params, &config).unwrap();
        let moved = solve_dpp(&domain, &base.clone().shifted(shift), &params, &config).unwrap();
        let x = [0.1, -0.2];
        let diff = value_at(&moved, &x, 0.15).unwrap() - value_at(&grid, &x, 0.15).unwrap();
        prop_assert!((diff - shift).abs() < 1e-12 * (1.0 + shift.abs()) * 10.0);
        let report = check_comparison(&domain, &base.clone().shifted(shift.abs()), &base, &params, &config).unwrap();
        prop_assert!(report.holds);
    }
}

#[test]
fn shipped_example_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = Config::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.game_params().unwrap();
        cfg.space_time().unwrap();
        count += 1;
    }
    assert!(count >= 6);
}
