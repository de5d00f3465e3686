use moment_mrf::graph::Graph;
use moment_mrf::model::{DualConfig, Metric, Problem};
use moment_mrf::poly::{piecewise_min, uniform_knots, Interval, PiecewisePolynomial, ROOT_TOL};
use moment_mrf::rounding::{round_mean, rounded_energy, MeanVariant};
use moment_mrf::solver::{solve, SolverOptions};
use moment_mrf_cli::run::{csv, make_synth, oracle_compare, run_hierarchy, run_stereo, solve_entries, synth_plane, volume_problem, CSV_HEADER};
use moment_mrf_cli::volume::CostVolume;
use moment_mrf_cli::RunConfig;
use std::path::Path;

fn config(dir: &Path, body: &str) -> RunConfig {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    RunConfig::load(&path).unwrap()
}

#[test]
fn zero_unaries_give_zero_row() {
    let knots = uniform_knots(&Interval::unit(), 1);
    let z = PiecewisePolynomial::zero(knots.clone()).unwrap();
    let p = Problem::new(Graph::chain(3), vec![z; 3], Metric::Tv, DualConfig::new(knots, 1, true).unwrap()).unwrap();
    let rows = solve_entries(&RunConfig::default(), &[p]).unwrap();
    assert_eq!(rows[0].dual_energy, 0.0);
    assert_eq!(rows[0].rounded_energy, 0.0);
}

#[test]
fn table_shape_and_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let entries: Vec<String> = [1, 3, 5].iter().flat_map(|k| (1..=7).map(move |d| format!("{k}:{d}"))).collect();
    let cfg = config(dir.path(), &format!("grid = 2x2\nmax_iters = 300\nhierarchy = {}\n", entries.join(",")));
    let rows = run_hierarchy(&cfg).unwrap();
    assert_eq!(rows.len(), 21);
    let text = std::fs::read_to_string(dir.path().join("hierarchy.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 22);
    assert!(lines[1].starts_with("1,1,") && lines[21].starts_with("5,7,"));
    for r in &rows {
        assert!(r.rounded_energy >= r.dual_energy - 1e-6, "{r:?}");
    }
}

#[test]
fn dual_column_grows_with_degree() {
    let dir = tempfile::tempdir().unwrap();
    for k in [1, 3] {
        let h: Vec<String> = (1..=5).map(|d| format!("{k}:{d}")).collect();
        let cfg = config(dir.path(), &format!("grid = 4x4\nseed = 3\nmax_iters = 2000\nhierarchy = {}\n", h.join(",")));
        let rows = run_hierarchy(&cfg).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].dual_energy >= w[0].dual_energy - 1e-6, "K={k}: {} then {}", w[0].dual_energy, w[1].dual_energy);
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "grid = 3x3\nseed = 9\nmax_iters = 400\nhierarchy = 1:1,2:2\ndeterministic = true\n");
    let a = csv(&run_hierarchy(&cfg).unwrap(), true);
    let first = std::fs::read(dir.path().join("hierarchy.csv")).unwrap();
    let b = csv(&run_hierarchy(&cfg).unwrap(), true);
    assert_eq!(a, b);
    assert_eq!(first, std::fs::read(dir.path().join("hierarchy.csv")).unwrap());
    let other = config(dir.path(), "grid = 3x3\nseed = 10\nmax_iters = 400\nhierarchy = 1:1,2:2\ndeterministic = true\n");
    assert_ne!(a, csv(&run_hierarchy(&other).unwrap(), true));
}

#[test]
fn oracle_compare_gaps_are_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "grid = 6x1\nhierarchy = 1:1,2:1,4:1\ngrid_points = 801\n");
    let out = oracle_compare(&cfg).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "K,deg,dual_energy,dp_value,gap");
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        // the grid optimum bounds the relaxation from above
        assert!(f[3] >= f[2] - 1e-6, "{l}");
    }
}

#[test]
fn planar_volume_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    make_synth(&config(dir.path(), "grid = 32x32\nlabels = 32\ninterval = 0,31\nseed = 1\n")).unwrap();
    let cfg = config(dir.path(), "volume = synth.mcv\nhierarchy = 5:3\nweight = 0.05\nrounding = mean\nmax_iters = 2000\n");
    let rows = run_stereo(&cfg).unwrap();
    let truth = synth_plane(32, 32, &Interval::new(0.0, 31.0).unwrap());
    let rms = (rows[0].labels.iter().zip(&truth).map(|(x, t)| (x - t).powi(2)).sum::<f64>() / truth.len() as f64).sqrt();
    // one label unit is 1.0 on this range
    assert!(rms <= 1.0, "rms {rms}");
    let pgm = std::fs::read(dir.path().join("disparity.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 32\n65535\n"));
    assert_eq!(pgm.len(), 15 + 2 * 32 * 32);
}

#[test]
fn higher_degree_never_hurts_on_noisy_volumes() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..3 {
        make_synth(&config(dir.path(), &format!("grid = 6x6\nlabels = 24\nnoise = 0.5\nseed = {seed}\n"))).unwrap();
        let cfg = config(dir.path(), "volume = synth.mcv\nhierarchy = 5:1,5:7\nweight = 0.2\nmax_iters = 3000\n");
        let rows = run_stereo(&cfg).unwrap();
        assert!(rows[1].dual_energy >= rows[0].dual_energy - 1e-9, "seed {seed}");
        assert!(rows[1].rounded_energy <= rows[0].rounded_energy + 1e-6, "seed {seed}");
    }
}

#[test]
fn single_pixel_dual_is_fitted_minimum() {
    let dir = tempfile::tempdir().unwrap();
    make_synth(&config(dir.path(), "grid = 1x1\nlabels = 20\nnoise = 0.3\nseed = 4\n")).unwrap();
    let cfg = config(dir.path(), "volume = synth.mcv\nhierarchy = 3:3\n");
    let rows = run_stereo(&cfg).unwrap();
    let vol = CostVolume::read(&dir.path().join("synth.mcv")).unwrap();
    let p = volume_problem(&cfg, &vol, 3, 3).unwrap();
    let exact = piecewise_min(&p.unaries()[0], ROOT_TOL).1;
    assert!((rows[0].dual_energy - exact).abs() < 1e-4, "{} vs {exact}", rows[0].dual_energy);
}

#[test]
fn moment_mean_beats_left_knots() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        make_synth(&config(dir.path(), &format!("grid = 4x4\nlabels = 20\nnoise = 0.4\nseed = {seed}\n"))).unwrap();
        let cfg = config(dir.path(), "volume = synth.mcv\nweight = 0.2\n");
        let vol = CostVolume::read(&dir.path().join("synth.mcv")).unwrap();
        let p = volume_problem(&cfg, &vol, 5, 2).unwrap();
        let sol = solve(&p, &SolverOptions { max_iters: 2000, ..Default::default() }).unwrap();
        let e = |v| rounded_energy(&round_mean(&sol.moments, p.config(), v).unwrap(), &p);
        assert!(e(MeanVariant::MomentMean) <= e(MeanVariant::KnotWeighted) + 1e-9, "seed {seed}");
    }
}
