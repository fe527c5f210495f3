use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smoothtrim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 41\nreps = 30\nm_steps = 4\nt_count = 5\nseed = 3\n");
    let out = dir.path().join("r.csv");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algorithm,n,eps,m,t_best,s,shape,excess_var,stderr,reps,seed,trim_frac"
    );
    assert_eq!(lines.count(), 9 * 4);

    // --seed overrides the config and changes the numbers.
    let out2 = dir.path().join("r2.csv");
    let o = run(&["run", "--config", &cfg, "--out", out2.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success());
    assert_ne!(text, fs::read_to_string(&out2).unwrap());
    let out3 = dir.path().join("r3.csv");
    run(&["run", "--config", &cfg, "--out", out3.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(text, fs::read_to_string(&out3).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let out = out.to_str().unwrap();
    let bad = write(dir.path(), "bad.cfg", "n = 41\ncolour = blue\n");
    assert_eq!(run(&["run", "--config", &bad, "--out", out]).status.code(), Some(2));
    let trim = write(dir.path(), "trim.cfg", "n = 41\nm = 20, 21\n");
    assert_eq!(run(&["run", "--config", &trim, "--out", out]).status.code(), Some(2));
    let missing = dir.path().join("nope.cfg");
    assert_eq!(run(&["run", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(1));
    let ok = write(dir.path(), "ok.cfg", "n = 11\nreps = 2\nalgorithms = TrimNonPrivate\n");
    let unwritable = dir.path().join("no/such/dir.csv");
    assert_eq!(run(&["run", "--config", &ok, "--out", unwritable.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sens_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", "value\n0.1\n0.2\n0.3\n0.4\n5.0\n");
    let o = run(&["sens", "--data", &data, "--m", "1", "--t", "0.5", "--a", "-1", "--b", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // Clamped to [0.1, 0.2, 0.3, 0.4, 1.0]; LS^0 = max(0.4 - 0.1, 1.0 - 0.2) / 3.
    assert!((v["local"].as_f64().unwrap() - 0.8 / 3.0).abs() < 1e-12);
    assert!(v["smooth"].as_f64().unwrap() >= v["local"].as_f64().unwrap());
    assert_eq!(v["per_distance"].as_array().unwrap().len(), 6);
}

#[test]
fn release_is_reproducible_and_refuses_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "x.csv", &(0..101).map(|i| format!("{}", i as f64 / 100.0)).collect::<Vec<_>>().join("\n"));
    let cfg = write(dir.path(), "r.cfg", "family = LLN\neps = 1\nm = 20\nt = 0.2\nseed = 11\n");
    let a = run(&["release", "--config", &cfg, "--data", &data]);
    let b = run(&["release", "--config", &cfg, "--data", &data]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"].as_u64(), Some(11));
    assert!(v["estimate"].as_f64().unwrap().is_finite());

    // ULN needs sigma >= sqrt 2.
    let uln = write(dir.path(), "u.cfg", "family = ULN\nshape = 1\n");
    assert_eq!(run(&["release", "--config", &uln, "--data", &data]).status.code(), Some(2));
}
