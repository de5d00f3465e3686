use std::process::Command;

fn run(sub: &str, body: &str) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, body).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_moment-mrf")).arg(sub).arg(&path).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn success_prints_csv() {
    let (code, out) = run("hierarchy", "grid = 2x1\nmax_iters = 200\n");
    assert_eq!(code, 0);
    assert!(out.starts_with("K,deg,dual_energy,rounded_energy,iters,seconds\n1,1,"));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(run("hierarchy", "metric = l1\n").0, 2);
    assert_eq!(run("stereo", "grid = 2x2\n").0, 2);
    assert_eq!(run("stereo", "volume = missing.mcv\n").0, 2);
    let missing = Command::new(env!("CARGO_BIN_EXE_moment-mrf")).args(["hierarchy", "/no/such.cfg"]).output().unwrap().status;
    assert_eq!(missing.code(), Some(2));
}

#[test]
fn solver_errors_exit_3() {
    assert_eq!(run("hierarchy", "grid = 2x1\ntau = 10\nsigma = 10\n").0, 3);
}
