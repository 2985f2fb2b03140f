use std::process::Command;

fn qbridge(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qbridge"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn default_sweep_trends() {
    let (code, out, _) = qbridge(&["sweep"]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r.len(), 121);
    assert_eq!(r[0][7], 0.0);
    for row in &r {
        assert!(row[4] < 1.0, "delta'/delta = {}", row[4]);
        assert!(row[8] < 1e-9);
    }
    // |J_2| grows along rows and columns.
    for i in 0..11 {
        for k in 1..11 {
            assert!(r[i * 11 + k][7].abs() >= r[i * 11 + k - 1][7].abs());
            assert!(r[k * 11 + i][7].abs() >= r[(k - 1) * 11 + i][7].abs());
        }
    }
}

#[test]
fn sweep_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let (code, _, _) = qbridge(&["sweep", "--n", "3", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn fidelity_grows_with_n() {
    let (code, out, _) = qbridge(&["fidelity", "--g-range", "0.05:0.4:8"]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r.len(), 24);
    for k in 0..8 {
        let (f3, f4, f5) = (r[k][2], r[8 + k][2], r[16 + k][2]);
        assert!(f5 >= f4 && f4 >= f3);
    }
}

#[test]
fn decay_starts_at_bare_rate() {
    let (code, out, _) = qbridge(&["decay", "--g-range", "0:0.4:5", "--kappa-ratio", "12"]);
    assert_eq!(code, 0);
    let r = rows(&out);
    assert_eq!(r[0][2], 1.0);
    assert!(r.windows(2).all(|w| w[1][1] > w[0][1] && w[1][2] > w[0][2]));
}

#[test]
fn config_file_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n=2\ng=0.2\nf=0.1\n").unwrap();
    let (code, out, _) = qbridge(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("J_n: "));
    assert_eq!(qbridge(&["solve", "--config", "/nonexistent/x.cfg"]).0, 2);
    assert_eq!(qbridge(&["sweep", "--n", "2,3"]).0, 2);
    let (code, out, err) = qbridge(&[
        "sweep",
        "--branch",
        "small",
        "--g-range",
        "0.1:0.1:2",
        "--f-range",
        "0.1:2:2",
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(out.lines().last().unwrap().contains("nan"));
}

#[test]
fn verify_full_suite_passes() {
    let (code, out, _) = qbridge(&["verify"]);
    assert_eq!(code, 0, "{out}");
}
