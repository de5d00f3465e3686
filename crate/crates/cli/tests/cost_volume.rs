use moment_mrf::oracle::{grid_min, GridSpec};
use moment_mrf::poly::Interval;
use moment_mrf_cli::run::volume_problem;
use moment_mrf_cli::volume::CostVolume;
use moment_mrf_cli::{CliError, RunConfig};

#[test]
fn zeros_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.mcv");
    let v = CostVolume::new(2, 2, 3, Interval::new(0.0, 2.0).unwrap(), vec![0.0; 12]).unwrap();
    v.write(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = CostVolume::read(&path).unwrap();
    assert_eq!(back, v);
    assert_eq!(back.to_bytes(), bytes);
}

#[test]
fn truncated_file_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.mcv");
    let v = CostVolume::new(2, 2, 3, Interval::unit(), (0..12).map(|i| i as f32).collect()).unwrap();
    let bytes = v.to_bytes();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(CostVolume::read(&path), Err(CliError::Malformed(_))));
}

#[test]
fn missing_file_is_io() {
    assert!(matches!(CostVolume::read(std::path::Path::new("/nonexistent/x.mcv")), Err(CliError::Io(_))));
}

#[test]
fn fitted_cubics_keep_grid_minima() {
    // quadratic cost per pixel, minimum placed off the label grid
    let (w, h, labels) = (3, 2, 41);
    let range = Interval::new(0.0, 8.0).unwrap();
    let centers: Vec<f64> = (0..w * h).map(|i| 0.7 + 1.13 * i as f64).collect();
    let xs: Vec<f64> = (0..labels).map(|l| 8.0 * l as f64 / 40.0).collect();
    let values = centers.iter().flat_map(|&c| xs.iter().map(move |&x| (0.3 * (x - c) * (x - c) + 0.1) as f32)).collect();
    let vol = CostVolume::new(w, h, labels, range, values).unwrap();
    let cfg = RunConfig::parse("unary_degree = 3").unwrap();
    let p = volume_problem(&cfg, &vol, 4, 1).unwrap();
    for (i, f) in p.unaries().iter().enumerate() {
        let sample_min = vol.samples(i / w, i % w).iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let (_, fitted) = grid_min(f, GridSpec::new(labels).unwrap());
        assert!((fitted - sample_min).abs() < 1e-3, "pixel {i}: {fitted} vs {sample_min}");
    }
}
