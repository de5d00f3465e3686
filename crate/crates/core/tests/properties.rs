use moment_mrf::graph::{grid_graph, Graph};
use moment_mrf::model::{DualConfig, Metric, Problem};
use moment_mrf::oracle::{dp_chain, GridSpec};
use moment_mrf::poly::{uniform_knots, Interval, PiecewisePolynomial, Polynomial};
use moment_mrf::rounding::{dirac_moments, round_mean, round_mode_mean, MeanVariant};
use moment_mrf::solver::{dual_energy, make_dual_feasible, relaxed_objective, solve, SolverOptions};
use moment_mrf::synth::random_unaries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dual(problem: &Problem, rng: &mut ChaCha8Rng, amp: f64) -> moment_mrf::graph::DualCoefficients {
    let mut p = problem.zero_dual();
    p.data_mut().iter_mut().for_each(|c| *c = rng.gen_range(-amp..amp));
    p
}

fn grid_problem(metric: Metric, k: usize, deg: usize, seed: u64) -> Problem {
    let knots = uniform_knots(&Interval::new(-2.0, 1.0).unwrap(), k);
    let us = random_unaries(9, 4, &knots, seed).unwrap();
    let w = (0..12).map(|e| 0.5 + 0.1 * e as f64).collect();
    Problem::with_edge_weights(grid_graph(3, 3), us, metric, DualConfig::for_metric(metric, knots, deg).unwrap(), w).unwrap()
}

#[test]
fn constants_cancel_in_tv_dual_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..20 {
        let prob = grid_problem(Metric::Tv, 1 + seed as usize % 3, 1 + seed as usize % 4, seed);
        let p = make_dual_feasible(&random_dual(&prob, &mut rng, 2.0), &prob);
        let base = dual_energy(&p, &prob).unwrap();
        let mut shifted = p.clone();
        let k = prob.config().pieces();
        for e in 0..prob.graph().num_edges() {
            let c = rng.gen_range(-3.0..3.0);
            for piece in 0..k {
                shifted.piece_mut(e, piece)[0] += c;
            }
        }
        let moved = dual_energy(&shifted, &prob).unwrap();
        assert!((moved - base).abs() < 1e-10, "{moved} vs {base}");
    }
}

#[test]
fn feasible_tv_duals_are_lipschitz_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..10 {
        let prob = grid_problem(Metric::Tv, 1 + seed as usize % 4, 1 + seed as usize % 5, seed);
        let p = make_dual_feasible(&random_dual(&prob, &mut rng, 5.0), &prob);
        let dom = prob.config().domain();
        for e in 0..prob.graph().num_edges() {
            let lam: PiecewisePolynomial = prob.dual_function(&p, e);
            let w = prob.edge_weights()[e];
            for _ in 0..1000 {
                let (x, y) = (rng.gen_range(dom.a..=dom.b), rng.gen_range(dom.a..=dom.b));
                assert!((lam.eval(x) - lam.eval(y)).abs() <= w * (x - y).abs() + 1e-6);
            }
        }
    }
}

#[test]
fn edge_weights_scale_the_coupling() {
    let prob = grid_problem(Metric::Tv, 2, 2, 3);
    let opts = SolverOptions { max_iters: 3000, ..Default::default() };
    let sol = solve(&prob, &opts).unwrap();
    let unary_part = {
        let z = PiecewisePolynomial::zero(prob.config().knots().to_vec()).unwrap();
        let empty = Problem::with_edge_weights(prob.graph().clone(), vec![z; 9], Metric::Tv, prob.config().clone(), prob.edge_weights().to_vec()).unwrap();
        relaxed_objective(&sol.moments, &prob, &opts).unwrap() - relaxed_objective(&sol.moments, &empty, &opts).unwrap()
    };
    let base = relaxed_objective(&sol.moments, &prob, &opts).unwrap() - unary_part;
    for gamma in [0.5, 3.0] {
        let scaled = relaxed_objective(&sol.moments, &prob.scaled_weights(gamma).unwrap(), &opts).unwrap() - unary_part;
        assert!((scaled - gamma * base).abs() < 1e-3 * gamma.max(1.0), "gamma {gamma}: {scaled} vs {}", gamma * base);
    }
    // a feasible dual stays feasible when both it and the weights grow
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = PiecewisePolynomial::zero(prob.config().knots().to_vec()).unwrap();
    let zero_u = Problem::with_edge_weights(prob.graph().clone(), vec![z; 9], Metric::Tv, prob.config().clone(), prob.edge_weights().to_vec()).unwrap();
    let p = make_dual_feasible(&random_dual(&zero_u, &mut rng, 1.0), &zero_u);
    let mut p3 = p.clone();
    p3.scale(3.0);
    let e1 = dual_energy(&p, &zero_u).unwrap();
    let e3 = dual_energy(&p3, &zero_u.scaled_weights(3.0).unwrap()).unwrap();
    assert!((e3 - 3.0 * e1).abs() < 1e-9);
}

#[test]
fn identical_runs_have_identical_histories() {
    let prob = grid_problem(Metric::Potts, 2, 2, 5);
    let opts = SolverOptions { max_iters: 1000, ..Default::default() };
    let (a, b) = (solve(&prob, &opts).unwrap(), solve(&prob, &opts).unwrap());
    assert_eq!(a.history, b.history);
    assert_eq!(a.dual, b.dual);
}

#[test]
fn dp_values_at_g_and_2g_are_consistent() {
    for seed in 0..10 {
        let knots = vec![-1.0, 1.0];
        let us = random_unaries(7, 4, &knots, seed).unwrap();
        let prob = Problem::new(Graph::chain(7), us, Metric::Tv, DualConfig::new(knots, 1, true).unwrap()).unwrap();
        // Lipschitz constant of the energy in each coordinate, summed
        let lip: f64 = prob
            .unaries()
            .iter()
            .map(|f| f.pieces()[0].derivative().magnitude_bound(&Interval::unit()) + 2.0)
            .sum();
        for g in [51, 201] {
            let a = dp_chain(&prob, GridSpec::new(g).unwrap()).unwrap().1;
            let b = dp_chain(&prob, GridSpec::new(2 * g).unwrap()).unwrap().1;
            assert!((a - b).abs() <= lip * 2.0 / g as f64, "seed {seed} G {g}: {a} vs {b}");
        }
    }
}

#[test]
fn dirac_moments_round_to_their_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let k = rng.gen_range(1..6);
        let cfg = DualConfig::new(uniform_knots(&Interval::new(0.0, 5.0).unwrap(), k), 2, true).unwrap();
        let xs: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..=5.0)).collect();
        let y = dirac_moments(&xs, &cfg, rng.gen_range(1..6));
        for (got, want) in round_mode_mean(&y, &cfg).unwrap().iter().zip(&xs) {
            assert!((got - want).abs() < 1e-6);
        }
        for (got, want) in round_mean(&y, &cfg, MeanVariant::MomentMean).unwrap().iter().zip(&xs) {
            assert!((got - want).abs() < 1e-6);
        }
    }
}

#[test]
fn derivative_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let p = Polynomial::new((0..rng.gen_range(1..9)).map(|_| rng.gen_range(-4..5) as f64).collect());
        let q = Polynomial::new((0..rng.gen_range(1..9)).map(|_| rng.gen_range(-4..5) as f64).collect());
        let (a, b) = (rng.gen_range(-3..4) as f64, rng.gen_range(-3..4) as f64);
        let lhs = (&p.scale(a) + &q.scale(b)).derivative();
        let rhs = &p.derivative().scale(a) + &q.derivative().scale(b);
        assert_eq!(lhs.trimmed(), rhs.trimmed());
    }
}
