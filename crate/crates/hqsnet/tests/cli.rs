use std::path::Path;

use hqsnet::cli::run;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["hqsnet".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = run(argv, &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

fn sets(dir: &Path) -> Vec<String> {
    vec![
        "--set".into(),
        format!("dataset={}", dir.join("data").display()),
        "--set".into(),
        format!("out={}", dir.join("out").display()),
    ]
}

fn call_in(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let extra = sets(dir);
    let mut all: Vec<&str> = args.to_vec();
    all.extend(extra.iter().map(String::as_str));
    call(&all)
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(call(&["frobnicate"]).0, 1);
    assert_eq!(call(&[]).0, 1);
    assert_eq!(call(&["genmask", "--set", "R=zero"]).0, 1);
    assert_eq!(call(&["genmask", "--set", "nosuchkey=1"]).0, 1);
    assert_eq!(call(&["genmask", "--set", "missing_equals"]).0, 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = call_in(dir.path(), &["compare"]);
    assert_eq!(code, 2, "{err}");
    assert!(!err.is_empty());
}

#[test]
fn genmask_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = call_in(dir.path(), &["genmask", "--seed", "3"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("fraction"));
    let mask = dir.path().join("data").join("mask.msk");
    let input = format!("input={}", mask.display());
    let (code, out, err) = call(&["evaluate", "--set", &input]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("reproducible: true"), "{out}");
}

#[test]
fn evaluate_flags_a_tampered_mask() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call_in(dir.path(), &["genmask"]).0, 0);
    let path = dir.path().join("data").join("mask.msk");
    let mut bytes = std::fs::read(&path).unwrap();
    // Clear every sampled bit after the header.
    bytes[25..].iter_mut().for_each(|b| *b = 0);
    std::fs::write(&path, bytes).unwrap();
    let input = format!("input={}", path.display());
    assert_eq!(call(&["evaluate", "--set", &input]).0, 2);
}

#[test]
fn smoke_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--seed", "5", "--set", "count=8", "--set", "epochs=1"];
    let step = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend(common);
        let (code, out, err) = call_in(d, &all);
        assert_eq!(code, 0, "{args:?}: {err}");
        out
    };
    step(&["gendata"]);
    step(&["genmask"]);
    step(&["train", "--set", "solver=hqsnet"]);
    step(&["train", "--set", "solver=cascade"]);
    assert!(d.join("out/hqsnet.hqn").exists() && d.join("out/cascade.hqn").exists());
    let hist = std::fs::read_to_string(d.join("out/train_hqsnet.csv")).unwrap();
    assert_eq!(hist.lines().count(), 2);

    let truth = d.join("data/gt_00007.grd");
    let y = d.join("y.grd");
    let x = d.join("x.grd");
    let set = |k: &str, p: &Path| format!("{k}={}", p.display());
    step(&["simulate", "--set", &set("input", &truth), "--set", &set("output", &y)]);
    let solved = step(&["solve-hqs", "--set", &set("input", &y), "--set", &set("output", &x), "--set", "outer_max=3"]);
    assert!(solved.contains("objective"));
    step(&["reconstruct", "--set", "solver=hqsnet", "--set", &set("input", &y), "--set", &set("output", &x)]);
    let metrics = step(&["evaluate", "--set", &set("input", &x), "--set", &set("reference", &truth)]);
    assert!(metrics.contains("psnr"));

    step(&["compare", "--set", "outer_max=3"]);
    let csv = std::fs::read_to_string(d.join("out/compare.csv")).unwrap();
    // 1 test instance, 4 methods, then mean and std per method.
    assert_eq!(csv.lines().count(), 1 + 4 + 8);
    step(&["noise-sweep", "--set", "sigmas=0.05"]);
    let sweep = std::fs::read_to_string(d.join("out/noise_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3 * 2);
}
