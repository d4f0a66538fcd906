use super::*;
use crate::lp;
use crate::risk::psi;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (diff {})", (a - b).abs());
}

/// Two-asset market of the single-period example: cash plus a risky asset
/// paying +0.5% with probability 99.9% and -4% otherwise.
fn two_point_market(ell: f64) -> ScenarioSet {
    ScenarioSet::exact_two_point(0.005, 0.999, -0.04, ell).unwrap()
}

fn two_level_gamma(beta: f64, r: f64) -> LevelFunction {
    LevelFunction::from_pairs(&[(beta, r), (0.01, 1.0)]).unwrap()
}

/// Closed form for the optimal risky weight of the two-point market under
/// the two-level function: the spread of the tail risks against the
/// recovery-weighted liability, capped at full investment.
fn closed_form_risky_weight(beta: f64, r: f64, ell: f64) -> f64 {
    let spread = if beta <= 0.001 { 0.0405 } else { 0.000045 / beta - 0.0045 };
    if spread <= 0.0 {
        return 1.0;
    }
    ((1.0 - r) * ell / spread).min(1.0)
}

fn random_scenarios(rng: &mut ChaCha12Rng, m: usize, k: usize) -> ScenarioSet {
    let rows: Vec<Vec<f64>> =
        (0..m).map(|_| (0..k).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
    let liabilities: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.4)).collect();
    let probs = random_probs(rng, m);
    ScenarioSet::new(rows, liabilities, probs).unwrap()
}

fn random_probs(rng: &mut ChaCha12Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|p| p / total).collect()
}

fn random_gamma(rng: &mut ChaCha12Rng, levels: usize) -> LevelFunction {
    let mut alphas: Vec<f64> = (0..levels).map(|_| rng.random_range(0.02..0.9)).collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    alphas.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let n = alphas.len();
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, (i + 1) as f64 / n as f64))
        .collect();
    LevelFunction::from_pairs(&pairs).unwrap()
}

fn rows_of(scen: &ScenarioSet) -> Vec<Vec<f64>> {
    (0..scen.num_outcomes()).map(|j| scen.outcome_returns(j).to_vec()).collect()
}

#[test]
fn two_point_market_reproduces_closed_form() {
    for (beta, r, ell) in [
        (0.005, 0.99, 0.10),
        (0.005, 0.99, 0.20),
        (0.0095, 0.99, 0.10),
        (0.0005, 0.95, 0.10),
        (0.003, 0.975, 0.20),
    ] {
        let scen = two_point_market(ell);
        let gamma = two_level_gamma(beta, r);
        let opt = solve_mean_risk(&scen, &gamma, 0.0, &UncertaintyModel::Nominal).unwrap();
        assert_eq!(opt.status, SolveStatus::Optimal);
        let weights = opt.weights.as_ref().unwrap().weights();
        let expected = closed_form_risky_weight(beta, r, ell);
        assert_close(weights[1], expected, 1e-6);
        assert_eq!(opt.v_star.len(), 2);
        let direct = risk_at(&scen, &gamma, &UncertaintyModel::Nominal, weights).unwrap();
        assert_close(opt.risk, direct, 1e-9);
    }
    // The reference parameters land near the coarse values quoted for them.
    let w = closed_form_risky_weight(0.005, 0.99, 0.10);
    assert_close(w, 2.0 / 9.0, 1e-15);
    assert_close(w, 0.2, 0.03);
    assert_close(closed_form_risky_weight(0.005, 0.99, 0.20), 4.0 / 9.0, 1e-15);
}

#[test]
fn nominal_program_has_documented_shape() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let scen = random_scenarios(&mut rng, 7, 3);
    let gamma = random_gamma(&mut rng, 2);
    let levels = gamma.num_levels();
    let program = build_nominal_lp(&scen, &gamma, -0.1).unwrap();
    let layout = EpigraphLayout { levels, assets: 3, outcomes: 7 };
    assert_eq!(program.num_vars(), layout.num_cols());
    assert_eq!(program.constraints.len(), levels + levels * 7 + 2);
    let sol = lp::solve(&program).unwrap();
    assert_eq!(sol.status, lp::LpStatus::Optimal);
    let x = &sol.x[layout.x(0)..layout.x(0) + 3];
    let direct = risk_at(&scen, &gamma, &UncertaintyModel::Nominal, x).unwrap();
    assert_close(sol.x[layout.t()], direct, 1e-8);
}

#[test]
fn builders_reject_zero_tail_level() {
    let scen = two_point_market(0.1);
    let gamma = LevelFunction::from_pairs(&[(0.0, 0.5), (0.01, 1.0)]).unwrap();
    assert!(matches!(
        build_nominal_lp(&scen, &gamma, 0.0),
        Err(OptimizeError::Domain(_))
    ));
    let probs = vec![scen.probabilities().to_vec()];
    assert!(build_mixture_lp(&scen, &probs, &gamma, 0.0).is_err());
    assert!(build_box_lp(&scen, &[0.0, 0.0], &[0.0, 0.0], &gamma, 0.0).is_err());
    assert!(solve_mean_risk(&scen, &gamma, 0.0, &UncertaintyModel::Nominal).is_err());
}

#[test]
fn invalid_models_are_rejected() {
    let scen = two_point_market(0.1);
    let bad = [
        UncertaintyModel::Mixture(vec![]),
        UncertaintyModel::Mixture(vec![vec![0.5, 0.25, 0.25]]),
        UncertaintyModel::Mixture(vec![vec![0.7, 0.2]]),
        UncertaintyModel::Mixture(vec![vec![1.2, -0.2]]),
        UncertaintyModel::Box { lower: vec![0.0], upper: vec![0.0] },
        UncertaintyModel::Box { lower: vec![0.1, 0.0], upper: vec![0.2, 0.0] },
        UncertaintyModel::Box { lower: vec![0.0, -0.5], upper: vec![0.0, 0.5] },
    ];
    for model in &bad {
        assert!(model.validate(&scen).is_err(), "{model:?} should not validate");
    }
    assert!(UncertaintyModel::uniform_box(-0.1, 2).is_err());
    let ok = UncertaintyModel::uniform_box(0.0005, 2).unwrap();
    assert!(ok.validate(&scen).is_ok());
}

#[test]
fn trivial_models_collapse_to_nominal() {
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for trial in 0..6 {
        let m = 5 + (trial % 3) * 5;
        let scen = random_scenarios(&mut rng, m, 2 + trial % 2);
        let gamma = random_gamma(&mut rng, 1 + trial % 3);
        let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
        let mu = lo + 0.3 * (hi - lo);
        let nominal = solve_mean_risk(&scen, &gamma, mu, &UncertaintyModel::Nominal).unwrap();
        let singleton = UncertaintyModel::Mixture(vec![scen.probabilities().to_vec()]);
        let mixture = solve_mean_risk(&scen, &gamma, mu, &singleton).unwrap();
        let degenerate = UncertaintyModel::uniform_box(0.0, m).unwrap();
        let boxed = solve_mean_risk(&scen, &gamma, mu, &degenerate).unwrap();
        assert_close(mixture.risk, nominal.risk, 1e-9);
        assert_close(boxed.risk, nominal.risk, 1e-9);
    }
}

#[test]
fn mixture_dominates_components_and_nests() {
    let mut rng = ChaCha12Rng::seed_from_u64(37);
    let scen = random_scenarios(&mut rng, 20, 2);
    let gamma = random_gamma(&mut rng, 2);
    let vectors: Vec<Vec<f64>> = (0..3).map(|_| random_probs(&mut rng, 20)).collect();
    let mu = -0.05;
    let mut per_measure_worst = f64::NEG_INFINITY;
    for probs in &vectors {
        let reweighted =
            ScenarioSet::new(rows_of(&scen), scen.liabilities().to_vec(), probs.clone()).unwrap();
        let nominal =
            solve_mean_risk(&reweighted, &gamma, mu, &UncertaintyModel::Nominal).unwrap();
        per_measure_worst = per_measure_worst.max(nominal.risk);
    }
    let mut nested_previous = f64::NEG_INFINITY;
    for take in 1..=3 {
        let model = UncertaintyModel::Mixture(vectors[..take].to_vec());
        let opt = solve_mean_risk(&scen, &gamma, mu, &model).unwrap();
        assert_eq!(opt.status, SolveStatus::Optimal);
        // Adding measures can only push the worst case up.
        assert!(opt.risk >= nested_previous - 1e-9);
        nested_previous = opt.risk;
    }
    assert!(nested_previous >= per_measure_worst - 1e-9);
}

/// Brute-force oracle: scan the one-dimensional weight simplex and evaluate
/// the worst level risk with the closed-form tail evaluator.
fn grid_oracle(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
    model: &UncertaintyModel,
) -> f64 {
    let mut best = f64::INFINITY;
    for step in 0..=1000 {
        let t = step as f64 / 1000.0;
        let x = [1.0 - t, t];
        if worst_case_mean(scen, model, &x).unwrap() < mu {
            continue;
        }
        let risk = risk_at(scen, gamma, model, &x).unwrap();
        best = best.min(risk);
    }
    best
}

#[test]
fn mixture_program_matches_grid_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    let scen = random_scenarios(&mut rng, 10, 2);
    let gamma = random_gamma(&mut rng, 2);
    let vectors: Vec<Vec<f64>> = (0..3).map(|_| random_probs(&mut rng, 10)).collect();
    let model = UncertaintyModel::Mixture(vectors);
    let (lo, hi) = feasible_mu_range(&scen, &model).unwrap();
    let mu = lo + 0.4 * (hi - lo);
    let opt = solve_mean_risk(&scen, &gamma, mu, &model).unwrap();
    assert_eq!(opt.status, SolveStatus::Optimal);
    assert_close(opt.risk, grid_oracle(&scen, &gamma, mu, &model), 2e-3);
}

#[test]
fn box_program_matches_grid_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(43);
    let scen = random_scenarios(&mut rng, 12, 2);
    let gamma = random_gamma(&mut rng, 2);
    let model = UncertaintyModel::uniform_box(0.005, 12).unwrap();
    let (lo, hi) = feasible_mu_range(&scen, &model).unwrap();
    let mu = lo + 0.4 * (hi - lo);
    let opt = solve_mean_risk(&scen, &gamma, mu, &model).unwrap();
    assert_eq!(opt.status, SolveStatus::Optimal);
    assert_close(opt.risk, grid_oracle(&scen, &gamma, mu, &model), 2e-3);
}

#[test]
fn inner_maximum_examples() {
    assert_close(
        worst_case_inner_value(&[1.0, 0.0, -1.0], &[-0.1; 3], &[0.1; 3]).unwrap(),
        0.2,
        1e-15,
    );
    // A zero-sum perturbation cannot see a constant payoff.
    assert_close(worst_case_inner_value(&[0.7; 5], &[-0.2; 5], &[0.3; 5]).unwrap(), 0.0, 1e-15);
    assert!(matches!(
        worst_case_inner_value(&[1.0, 2.0], &[0.1, 0.1], &[0.2, 0.2]),
        Err(OptimizeError::Domain(_))
    ));
    assert!(matches!(
        worst_case_inner_value(&[1.0], &[-0.1, -0.1], &[0.1, 0.1]),
        Err(OptimizeError::Domain(_))
    ));
    assert!(worst_case_inner_value(&[1.0, f64::NAN], &[-0.1; 2], &[0.1; 2]).is_err());
}

#[test]
fn inner_maximum_matches_direct_program() {
    let mut rng = ChaCha12Rng::seed_from_u64(53);
    for _ in 0..30 {
        let m = rng.random_range(2..=8);
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lower: Vec<f64> = (0..m).map(|_| -rng.random_range(0.0..0.2)).collect();
        let upper: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.2)).collect();
        let fast = worst_case_inner_value(&u, &lower, &upper).unwrap();

        let bounds: Vec<Bounds> =
            (0..m).map(|j| Bounds::between(lower[j], upper[j])).collect();
        let objective: Vec<f64> = u.iter().map(|v| -v).collect();
        let mut program = LinearProgram::new(objective, bounds).unwrap();
        program.push_row((0..m).map(|j| (j, 1.0)).collect(), Relation::Eq, 0.0).unwrap();
        let sol = lp::solve(&program).unwrap();
        assert_eq!(sol.status, lp::LpStatus::Optimal);
        assert_close(fast, -sol.objective, 1e-10);

        let (value, eps) = worst_case_inner_argmax(&u, &lower, &upper).unwrap();
        assert_close(value, fast, 1e-12);
        let mut total = 0.0;
        let mut attained = 0.0;
        for j in 0..m {
            assert!(eps[j] >= lower[j] - 1e-12 && eps[j] <= upper[j] + 1e-12);
            total += eps[j];
            attained += eps[j] * u[j];
        }
        assert_close(total, 0.0, 1e-12);
        assert_close(attained, value, 1e-10);
    }
}

#[test]
fn feasible_range_shapes() {
    let scen = two_point_market(0.1);
    let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
    assert_close(lo, 0.0, 1e-15);
    assert_close(hi, 0.004955, 1e-15);

    let single = ScenarioSet::new(
        vec![vec![0.02], vec![-0.01]],
        vec![0.0, 0.0],
        vec![0.5, 0.5],
    )
    .unwrap();
    let (lo1, hi1) = feasible_mu_range(&single, &UncertaintyModel::Nominal).unwrap();
    assert_close(lo1, hi1, 1e-15);
    assert_close(hi1, 0.005, 1e-15);

    let mut rng = ChaCha12Rng::seed_from_u64(59);
    let scen = random_scenarios(&mut rng, 15, 3);
    let (_, nominal_hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
    let boxed = UncertaintyModel::uniform_box(0.01, 15).unwrap();
    let (box_lo, box_hi) = feasible_mu_range(&scen, &boxed).unwrap();
    // A larger ambiguity set can only shrink the achievable worst-case mean.
    assert!(box_hi <= nominal_hi + 1e-12);
    assert!(box_lo <= box_hi + 1e-15);

    let vectors = vec![scen.probabilities().to_vec(), random_probs(&mut rng, 15)];
    let mixture = UncertaintyModel::Mixture(vectors);
    let (_, mix_hi) = feasible_mu_range(&scen, &mixture).unwrap();
    assert!(mix_hi <= nominal_hi + 1e-12);

    let gamma = random_gamma(&mut rng, 2);
    for model in [UncertaintyModel::Nominal, boxed, mixture] {
        let (_, hi) = feasible_mu_range(&scen, &model).unwrap();
        let at_max = solve_mean_risk(&scen, &gamma, hi - 1e-8, &model).unwrap();
        assert_eq!(at_max.status, SolveStatus::Optimal, "{model:?} near the ceiling");
        let beyond = solve_mean_risk(&scen, &gamma, hi + 1e-6, &model).unwrap();
        assert_eq!(beyond.status, SolveStatus::Infeasible, "{model:?} beyond the ceiling");
    }
}

#[test]
fn frontier_is_monotone_and_ordered() {
    let mut rng = ChaCha12Rng::seed_from_u64(61);
    let scen = random_scenarios(&mut rng, 18, 3);
    let gamma = random_gamma(&mut rng, 2);
    let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
    let grid: Vec<f64> = (0..8)
        .map(|i| lo + (hi + 1e-3 - lo) * i as f64 / 7.0)
        .collect();
    let points = efficient_frontier(&scen, &gamma, &UncertaintyModel::Nominal, &grid).unwrap();
    assert_eq!(points.len(), grid.len());
    let mut previous = f64::NEG_INFINITY;
    for (point, mu) in points.iter().zip(&grid) {
        assert_close(point.mu, *mu, 0.0);
        match point.status {
            SolveStatus::Optimal => {
                assert!(point.risk >= previous - 1e-9, "risk fell along the sweep");
                previous = point.risk;
                assert!(point.weights.is_some());
            }
            SolveStatus::Infeasible => {
                assert!(point.weights.is_none());
                assert!(point.risk.is_nan());
            }
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(points.last().unwrap().status, SolveStatus::Infeasible);

    let all_high: Vec<f64> = (0..3).map(|i| hi + 0.01 + i as f64).collect();
    let unreachable =
        efficient_frontier(&scen, &gamma, &UncertaintyModel::Nominal, &all_high).unwrap();
    assert!(unreachable.iter().all(|p| p.status == SolveStatus::Infeasible));
}

#[test]
fn wider_boxes_dominate_pointwise() {
    let mut rng = ChaCha12Rng::seed_from_u64(67);
    let scen = random_scenarios(&mut rng, 16, 2);
    let gamma = random_gamma(&mut rng, 2);
    let narrow = UncertaintyModel::uniform_box(0.001, 16).unwrap();
    let wide = UncertaintyModel::uniform_box(0.003, 16).unwrap();
    let (lo, hi) = feasible_mu_range(&scen, &wide).unwrap();
    let grid: Vec<f64> = (0..6).map(|i| lo + (hi - lo) * i as f64 / 5.0).collect();
    let narrow_points = efficient_frontier(&scen, &gamma, &narrow, &grid).unwrap();
    let wide_points = efficient_frontier(&scen, &gamma, &wide, &grid).unwrap();
    for (a, b) in narrow_points.iter().zip(&wide_points) {
        if a.status == SolveStatus::Optimal && b.status == SolveStatus::Optimal {
            assert!(a.risk <= b.risk + 1e-7, "narrow {} vs wide {}", a.risk, b.risk);
        }
    }
}

#[test]
fn reduction_agrees_with_assembled_nominal_program() {
    let mut rng = ChaCha12Rng::seed_from_u64(71);
    let scen = random_scenarios(&mut rng, 300, 2);
    let gamma = LevelFunction::from_pairs(&[(0.02, 0.9), (0.05, 1.0)]).unwrap();
    assert!(gamma.num_levels() * scen.num_outcomes() > FULL_LP_LIMIT);
    let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
    let mu = lo + 0.5 * (hi - lo);
    let reduced = solve_mean_risk(&scen, &gamma, mu, &UncertaintyModel::Nominal).unwrap();
    assert_eq!(reduced.status, SolveStatus::Optimal);
    let full = lp::solve(&build_nominal_lp(&scen, &gamma, mu).unwrap()).unwrap();
    assert_eq!(full.status, lp::LpStatus::Optimal);
    assert_close(reduced.risk, full.x[0], 1e-8);
}

#[test]
fn reduction_agrees_with_assembled_mixture_program() {
    let mut rng = ChaCha12Rng::seed_from_u64(73);
    let scen = random_scenarios(&mut rng, 280, 2);
    let gamma = LevelFunction::from_pairs(&[(0.02, 0.9), (0.05, 1.0)]).unwrap();
    let vectors = vec![scen.probabilities().to_vec(), random_probs(&mut rng, 280)];
    let model = UncertaintyModel::Mixture(vectors.clone());
    let (lo, hi) = feasible_mu_range(&scen, &model).unwrap();
    let mu = lo + 0.5 * (hi - lo);
    let reduced = solve_mean_risk(&scen, &gamma, mu, &model).unwrap();
    assert_eq!(reduced.status, SolveStatus::Optimal);
    let full = lp::solve(&build_mixture_lp(&scen, &vectors, &gamma, mu).unwrap()).unwrap();
    assert_eq!(full.status, lp::LpStatus::Optimal);
    assert_close(reduced.risk, full.x[0], 1e-8);
}

/// Golden-section minimization of a convex scalar function.
fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    fa.min(fb)
}

#[test]
fn box_reduction_agrees_with_scalar_sweep() {
    let mut rng = ChaCha12Rng::seed_from_u64(79);
    let m = 700;
    let scen = random_scenarios(&mut rng, m, 2);
    let gamma = LevelFunction::from_pairs(&[(0.01, 0.9), (0.02, 1.0)]).unwrap();
    let smallest = scen.probabilities().iter().cloned().fold(f64::INFINITY, f64::min);
    let model = UncertaintyModel::uniform_box(0.9 * smallest, m).unwrap();
    let (lo, hi) = feasible_mu_range(&scen, &model).unwrap();
    let mu = lo + 0.75 * (hi - lo);
    let reduced = solve_mean_risk(&scen, &gamma, mu, &model).unwrap();
    assert_eq!(reduced.status, SolveStatus::Optimal);

    // Two assets reduce the simplex to a scalar: certify the working-set
    // optimum against a golden-section sweep of the exact evaluators.
    let ret_at = |t: f64| worst_case_mean(&scen, &model, &[1.0 - t, t]).unwrap();
    let mut feas: Vec<f64> = Vec::new();
    for step in 0..=400 {
        let t = step as f64 / 400.0;
        if ret_at(t) >= mu {
            feas.push(t);
        }
    }
    assert!(!feas.is_empty());
    let (mut t_lo, mut t_hi) = (feas[0], *feas.last().unwrap());
    // Tighten the endpoints: the worst-case mean is concave in t.
    for _ in 0..60 {
        let probe = t_lo - (t_lo - (t_lo - 1.0 / 400.0).max(0.0)) * 0.5;
        if ret_at(probe) >= mu {
            t_lo = probe;
        } else {
            break;
        }
    }
    for _ in 0..60 {
        let probe = t_hi + ((t_hi + 1.0 / 400.0).min(1.0) - t_hi) * 0.5;
        if ret_at(probe) >= mu {
            t_hi = probe;
        } else {
            break;
        }
    }
    let oracle = golden_min(t_lo, t_hi, 200, |t| {
        risk_at(&scen, &gamma, &model, &[1.0 - t, t]).unwrap()
    });
    assert_close(reduced.risk, oracle, 1e-6);
}

#[test]
fn reduction_handles_boundary_targets() {
    let mut rng = ChaCha12Rng::seed_from_u64(83);
    let scen = random_scenarios(&mut rng, 600, 2);
    let gamma = LevelFunction::flat(0.02).unwrap();
    let (_, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
    let at_max = solve_mean_risk(&scen, &gamma, hi, &UncertaintyModel::Nominal).unwrap();
    assert_eq!(at_max.status, SolveStatus::Optimal);
    let beyond = solve_mean_risk(&scen, &gamma, hi + 1e-6, &UncertaintyModel::Nominal).unwrap();
    assert_eq!(beyond.status, SolveStatus::Infeasible);
}

#[test]
fn program_optimum_equals_epigraph_minimax() {
    let mut rng = ChaCha12Rng::seed_from_u64(89);
    for _ in 0..10 {
        let m = rng.random_range(10..=50);
        let k = rng.random_range(1..=3);
        let levels = rng.random_range(1..=4);
        let scen = random_scenarios(&mut rng, m, k);
        let gamma = random_gamma(&mut rng, levels);
        let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
        let mu = lo + 0.25 * (hi - lo);
        let opt = solve_mean_risk(&scen, &gamma, mu, &UncertaintyModel::Nominal).unwrap();
        assert_eq!(opt.status, SolveStatus::Optimal);
        let weights = opt.weights.as_ref().unwrap();
        let spread = scen
            .portfolio_returns(weights.weights())
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
        let mut outer = f64::NEG_INFINITY;
        for entry in gamma.entries() {
            let bracket = (spread.0 - 1.0, spread.1 + 1.0);
            let inner = golden_min(bracket.0, bracket.1, 300, |v| {
                psi(weights, v, &scen, entry.alpha, entry.recovery).unwrap()
            });
            outer = outer.max(inner);
        }
        assert_close(opt.risk, outer, 1e-7);
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn instance() -> impl Strategy<Value = (ScenarioSet, LevelFunction)> {
        (2usize..10, 1usize..4, 1usize..3, any::<u64>()).prop_map(|(m, k, levels, seed)| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let scen = random_scenarios(&mut rng, m, k);
            let gamma = random_gamma(&mut rng, levels);
            (scen, gamma)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn optimum_is_certified_and_feasible((scen, gamma) in instance()) {
            let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
            let mu = lo + 0.5 * (hi - lo);
            let opt = solve_mean_risk(&scen, &gamma, mu, &UncertaintyModel::Nominal).unwrap();
            prop_assert_eq!(opt.status, SolveStatus::Optimal);
            let weights = opt.weights.as_ref().unwrap().weights();
            let total: f64 = weights.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-8);
            prop_assert!(weights.iter().all(|w| *w >= 0.0));
            let mean = worst_case_mean(&scen, &UncertaintyModel::Nominal, weights).unwrap();
            prop_assert!(mean >= mu - 1e-8);
            let direct = risk_at(&scen, &gamma, &UncertaintyModel::Nominal, weights).unwrap();
            prop_assert!((direct - opt.risk).abs() <= 1e-6);
        }

        #[test]
        fn singleton_mixture_is_nominal((scen, gamma) in instance()) {
            let (lo, hi) = feasible_mu_range(&scen, &UncertaintyModel::Nominal).unwrap();
            let mu = lo + 0.5 * (hi - lo);
            let nominal = solve_mean_risk(&scen, &gamma, mu, &UncertaintyModel::Nominal).unwrap();
            let model = UncertaintyModel::Mixture(vec![scen.probabilities().to_vec()]);
            let mixture = solve_mean_risk(&scen, &gamma, mu, &model).unwrap();
            prop_assert!((mixture.risk - nominal.risk).abs() <= 1e-9);
        }
    }
}
