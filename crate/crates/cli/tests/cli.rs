use std::path::Path;

use bindcap::Trajectory;
use serde_json::Value;

const PAIR: [&str; 8] = ["--n", "2", "--alpha-l", "1", "--alpha-h", "10", "--beta", "20"];

fn run(args: &[&str]) -> (u8, String, String) {
    let argv: Vec<String> = std::iter::once("bindcap")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = bindcap_cli::run(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn with(head: &[&str], tail: &[&str]) -> Vec<String> {
    head.iter().chain(tail).map(|s| s.to_string()).collect()
}

fn run_owned(args: &[String]) -> (u8, String, String) {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

fn json(args: &[String]) -> Value {
    let mut args = args.to_vec();
    args.extend(["--format".into(), "json".into()]);
    let (code, out, err) = run_owned(&args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("capacity"));
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(run(&["capacity", "--bogus"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
}

#[test]
fn missing_parameters_are_usage_errors() {
    let (code, _, err) = run(&["capacity", "--beta", "2"]);
    assert_eq!(code, 1);
    assert!(err.contains("need n"), "{err}");
}

#[test]
fn invalid_kinetics_are_usage_errors() {
    let (code, _, _) = run(&[
        "capacity",
        "--n",
        "2",
        "--alpha-l",
        "10",
        "--alpha-h",
        "1",
        "--beta",
        "1",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn capacity_reports_optimum() {
    let v = json(&with(&["capacity"], &PAIR));
    let c = v["summary"]["capacity_nats_per_sec"].as_f64().unwrap();
    assert!((c - 3.57367).abs() < 1e-3);
    assert_eq!(v["summary"]["converged"], Value::Bool(true));
    assert_eq!(v["manifest"]["command"], "capacity");
    assert_eq!(v["manifest"]["mode"], "iid");
}

#[test]
fn bits_divides_by_ln2() {
    let nats = json(&with(&["capacity"], &PAIR))["summary"]["capacity_nats_per_sec"]
        .as_f64()
        .unwrap();
    let bits = json(&with(&["capacity", "--bits"], &PAIR))["summary"]["capacity_bits_per_sec"]
        .as_f64()
        .unwrap();
    assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-9);
}

#[test]
fn equal_rates_give_zero_capacity() {
    for mode in ["iid", "feedback"] {
        let (code, out, err) = run(&[
            "capacity",
            "--n",
            "2",
            "--alpha-l",
            "5",
            "--alpha-h",
            "5",
            "--beta",
            "3",
            "--mode",
            mode,
            "--format",
            "csv",
        ]);
        assert_eq!(code, 0, "{err}");
        let rows = body(&out);
        assert!(rows[1].split(',').nth(1).unwrap() == "0", "{out}");
    }
}

#[test]
fn spec_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("pair.toml");
    std::fs::write(
        &spec,
        "kind = \"independent\"\nn = 2\nalpha_l = 1\nalpha_h = 10\nbeta = 20\n",
    )
    .unwrap();
    let s = spec.to_str().unwrap();
    let v = json(&with(&["capacity", "--spec", s], &[]));
    assert!((v["summary"]["capacity_nats_per_sec"].as_f64().unwrap() - 3.57367).abs() < 1e-3);
    let v = json(&with(&["capacity", "--spec", s, "--n", "4"], &[]));
    assert_eq!(v["manifest"]["n"], "4");
    assert!((v["summary"]["capacity_nats_per_sec"].as_f64().unwrap() - 2.0 * 3.57367).abs() < 2e-3);
    let v = json(&with(
        &["capacity", "--spec", s, "--kind", "cooperative", "--mode", "feedback"],
        &[],
    ));
    assert!((v["summary"]["capacity_nats_per_sec"].as_f64().unwrap() - 2.1026).abs() < 1e-3);
}

#[test]
fn malformed_spec_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "n = 2\nalpha_l = 1\nalpha_h = \"ten\"\nbeta = 20\n").unwrap();
    let (code, _, err) = run(&["capacity", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");

    std::fs::write(&spec, "n = 2\nalpha_l = 1\nalpha_hi = 10\nbeta = 20\n").unwrap();
    let (code, _, err) = run(&["capacity", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("alpha_hi"), "{err}");
}

#[test]
fn missing_spec_file_is_usage_error() {
    assert_eq!(run(&["capacity", "--spec", "/nonexistent/spec.toml"]).0, 1);
}

#[test]
fn sweep_2d_layout() {
    let (code, out, err) = run(&with(&["sweep", "--grid", "3"], &PAIR)
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>());
    assert_eq!(code, 0, "{err}");
    let rows = body(&out);
    assert_eq!(rows[0], "p_0,p_1,mi_nats_per_sec");
    assert_eq!(rows.len(), 10);
    let coords: Vec<String> = rows[1..]
        .iter()
        .map(|r| r.rsplit_once(',').unwrap().0.to_string())
        .collect();
    assert_eq!(
        coords,
        ["0,0", "0,0.5", "0,1", "0.5,0", "0.5,0.5", "0.5,1", "1,0", "1,0.5", "1,1"]
    );
}

#[test]
fn sweep_1d_and_rectangular_grids() {
    let (code, out, _) = run_owned(&with(&["sweep", "--axes", "1", "--grid", "5", "--bits"], &PAIR));
    assert_eq!(code, 0);
    let rows = body(&out);
    assert_eq!(rows[0], "p,mi_bits_per_sec");
    assert_eq!(rows.len(), 6);

    let (code, out, _) = run_owned(&with(&["sweep", "--grid", "2,3"], &PAIR));
    assert_eq!(code, 0);
    assert_eq!(body(&out).len(), 7);
}

#[test]
fn single_point_grid_is_zero() {
    let (code, out, _) = run_owned(&with(&["sweep", "--axes", "1", "--grid", "1"], &PAIR));
    assert_eq!(code, 0);
    assert_eq!(body(&out), ["p,mi_nats_per_sec", "0,0"]);
}

#[test]
fn sweep_2d_needs_two_receptors() {
    let (code, _, err) = run(&[
        "sweep",
        "--n",
        "3",
        "--alpha-l",
        "1",
        "--alpha-h",
        "10",
        "--beta",
        "20",
        "--axes",
        "2",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("--axes 1"), "{err}");
}

#[test]
fn sweep_is_independent_of_job_count() {
    let one = run_owned(&with(&["sweep", "--grid", "21", "--jobs", "1"], &PAIR)).1;
    let four = run_owned(&with(&["sweep", "--grid", "21", "--jobs", "4"], &PAIR)).1;
    assert_eq!(body(&one), body(&four));
}

#[test]
fn sweep_maximum_sits_near_the_optimum() {
    let v = json(&with(&["sweep", "--grid", "201"], &PAIR));
    let max = v["summary"]["max_mi_nats_per_sec"].as_f64().unwrap();
    assert!((max - 3.57367).abs() < 1e-3);
    let arg: Vec<f64> = v["summary"]["argmax"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((arg[0] - arg[1]).abs() <= 0.005 + 1e-12);

    let coop = with(&["sweep", "--grid", "201", "--kind", "cooperative"], &PAIR);
    let v = json(&coop);
    let arg: Vec<f64> = v["summary"]["argmax"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(
        (arg[0] - 0.407).abs() <= 0.005 + 1e-12 && (arg[1] - 0.364).abs() <= 0.005 + 1e-12,
        "{arg:?}"
    );
}

#[test]
fn scaling_table() {
    let (code, out, err) = run(&[
        "scaling",
        "--alpha-l",
        "1",
        "--alpha-h",
        "10",
        "--beta",
        "20",
        "--n-max",
        "10",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = body(&out);
    assert_eq!(rows[0], "n,capacity,ratio_to_n_times_c1");
    assert_eq!(rows.len(), 11);
    for row in &rows[1..] {
        assert!(row.ends_with(",1"), "{row}");
    }
    let two: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((two - 3.57367).abs() < 1e-3);
}

#[test]
fn scaling_rejects_cooperative() {
    let (code, _, _) = run(&[
        "scaling",
        "--kind",
        "cooperative",
        "--alpha-l",
        "1",
        "--alpha-h",
        "10",
        "--beta",
        "20",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_agrees_with_exact_rate() {
    let v = json(&with(
        &["simulate", "--steps", "2000000", "--seed", "5", "--check"],
        &PAIR,
    ));
    let s = &v["summary"];
    let (est, se, exact) = (
        s["estimate"].as_f64().unwrap(),
        s["stderr"].as_f64().unwrap(),
        s["exact_discrete"].as_f64().unwrap(),
    );
    assert!((est - exact).abs() <= 3.0 * se, "{est} +- {se} vs {exact}");
    assert_eq!(s["within_3_stderr"], Value::Bool(true));
    assert!((s["continuous_limit"].as_f64().unwrap() - 3.57367).abs() < 1e-3);
}

#[test]
fn simulate_flat_channel_is_near_zero() {
    let v = json(&with(
        &["simulate", "--steps", "500000", "--policy", "0.5,0.5"],
        &["--n", "2", "--alpha-l", "5", "--alpha-h", "5", "--beta", "20"],
    ));
    let s = &v["summary"];
    assert_eq!(s["exact_discrete"].as_f64().unwrap(), 0.0);
    assert!(s["estimate"].as_f64().unwrap() <= 3.0 * s["stderr"].as_f64().unwrap());
}

#[test]
fn simulate_without_steps_after_burn_in_is_usage_error() {
    let (code, _, err) = run_owned(&with(&["simulate", "--steps", "1000", "--burn-in", "1000"], &PAIR));
    assert_eq!(code, 1);
    assert!(err.contains("burn-in"), "{err}");
}

#[test]
fn simulate_rejects_bad_inputs() {
    assert_eq!(run_owned(&with(&["simulate", "--policy", "0.5"], &PAIR)).0, 1);
    assert_eq!(run_owned(&with(&["simulate", "--policy", "0.5,1.5"], &PAIR)).0, 1);
    assert_eq!(
        run_owned(&with(&["simulate", "--tau", "0.5", "--steps", "20000"], &PAIR)).0,
        1
    );
}

#[test]
fn simulate_exports_trajectory_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("traj.bin");
    let csv = dir.path().join("traj.csv");
    let counts = dir.path().join("counts.csv");
    for (traj, with_counts) in [(&bin, true), (&csv, false)] {
        let mut args = with(
            &["simulate", "--steps", "20000", "--seed", "3", "--trajectory-out"],
            &[],
        );
        args.push(traj.display().to_string());
        if with_counts {
            args.extend(["--counts-out".into(), counts.display().to_string()]);
        }
        args.extend(PAIR.iter().map(|s| s.to_string()));
        assert_eq!(run_owned(&args).0, 0);
    }
    let t = Trajectory::read_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(t.len(), 20000);
    assert_eq!(t.seed(), 3);
    let lines = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(lines.lines().next(), Some("step,input,state"));
    assert_eq!(lines.lines().count(), 20002);
    let counts = std::fs::read_to_string(&counts).unwrap();
    assert_eq!(counts.lines().next(), Some("prev_state,input,next_state,count"));
    let total: u64 = counts
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 20000);
}

fn replay_matches(dir: &Path, args: Vec<String>) {
    let first = dir.join("first.out");
    let second = dir.join("second.out");
    let mut args = args;
    args.extend(["--output".into(), first.display().to_string()]);
    assert_eq!(run_owned(&args).0, 0);
    let (code, _, err) = run(&["replay", first.to_str().unwrap(), "-o", second.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn replay_reproduces_every_format() {
    let dir = tempfile::tempdir().unwrap();
    for fmt in ["text", "csv", "json"] {
        replay_matches(
            dir.path(),
            with(&["capacity", "--mode", "feedback", "--format", fmt], &PAIR),
        );
    }
    replay_matches(
        dir.path(),
        with(&["simulate", "--steps", "50000", "--seed", "11"], &PAIR),
    );
    replay_matches(dir.path(), with(&["sweep", "--grid", "11", "--jobs", "3"], &PAIR));
}

#[test]
fn replay_without_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("plain.csv");
    std::fs::write(&f, "p,mi\n0,0\n").unwrap();
    assert_eq!(run(&["replay", f.to_str().unwrap()]).0, 1);
}

#[test]
fn manifest_excludes_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let mut args = with(&["sweep", "--grid", "3"], &PAIR);
    args.extend(["-o".into(), out.display().to_string()]);
    assert_eq!(run_owned(&args).0, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let line = text.lines().find(|l| l.starts_with("# args=")).unwrap();
    assert!(!line.contains("r.csv"));
    assert!(line.contains("\"--grid\",\"3\""));
}

#[test]
fn duration_goes_to_stderr_only() {
    let (_, out, err) = run_owned(&with(&["capacity"], &PAIR));
    assert!(!out.contains("duration"));
    assert!(err.contains("# duration_ms="));
}

#[test]
fn non_convergence_exits_two_with_partial_result() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("tight.toml");
    std::fs::write(
        &spec,
        "kind = \"cooperative\"\nn = 3\nalpha_l = 1\nalpha_h = 10\nbeta = 20\n[optimizer]\nmax_sweeps = 1\n",
    )
    .unwrap();
    let (code, out, err) = run(&["capacity", "--spec", spec.to_str().unwrap(), "--mode", "feedback"]);
    assert_eq!(code, 2);
    assert!(err.contains("did not converge"));
    assert!(out.contains("converged              false"), "{out}");
}
