use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_apgcert"))
}

struct Run {
    code: i32,
    stderr: String,
    stdout: String,
}

fn exec(cmd: &mut Command) -> Run {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary runs");
    Run {
        code: status.code().expect("exit code"),
        stderr: String::from_utf8(stderr).unwrap(),
        stdout: String::from_utf8(stdout).unwrap(),
    }
}

fn write_spec(dir: &Path, name: &str, spec: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

struct Solved {
    run: Run,
    summary: Value,
    trace: Vec<Vec<String>>,
    header: Vec<String>,
}

fn solve(spec: &Value) -> Solved {
    let dir = TempDir::new().unwrap();
    let spec_path = write_spec(dir.path(), "spec.json", spec);
    let (trace, summary) = (dir.path().join("trace.csv"), dir.path().join("summary.json"));
    let run = exec(
        bin()
            .arg("solve")
            .arg("--spec")
            .arg(&spec_path)
            .arg("--trace")
            .arg(&trace)
            .arg("--summary")
            .arg(&summary),
    );
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_path(&trace).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let trace = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    Solved {
        run,
        summary,
        trace,
        header,
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn spec(problem: Value, solver: &str, epsilon: f64) -> Value {
    json!({"version": 1, "problem": problem, "solver": solver, "epsilon": epsilon})
}

fn quartic(n: usize, k_terms: usize, seed: u64, mu_add: f64) -> Value {
    json!({"quartic": {"n": n, "k_terms": k_terms, "seed": seed, "mu_add": mu_add}})
}

fn column(s: &Solved, name: &str) -> usize {
    s.header.iter().position(|h| h == name).unwrap()
}

/// Row count equals iterations and the last row's counters equal the totals.
fn assert_consistent(s: &Solved) {
    assert_eq!(s.trace.len() as u64, s.summary["iterations"].as_u64().unwrap());
    let last = s.trace.last().unwrap();
    let totals = &s.summary["totals"];
    assert_eq!(last[column(s, "grad_evals")], totals["grad_f_evals"].to_string());
    assert_eq!(last[column(s, "prox_evals")], totals["prox_evals"].to_string());
}

#[test]
fn ppa_quartic_1d() {
    let mut sp = spec(json!({"named": "quartic-1d"}), "ppa", 1e-4);
    sp["init"] = json!([1.0]);
    let s = solve(&sp);
    assert_eq!(s.run.code, 0, "{}", s.run.stderr);
    assert_eq!(s.summary["termination"], "certified");
    assert!(f(&s.summary["residual_bound"]) <= 1e-4);
    let x = f(&s.summary["x"][0]);
    assert!(x.powi(3).abs() <= 1e-4, "{x}");
    assert_eq!(
        s.header.join(","),
        "k,rho_k,eta_k,inner_iters,grad_evals,prox_evals,step_norm,stat_res,comp_res"
    );
    assert_consistent(&s);
}

#[test]
fn sigma_zeta_violation_is_rejected() {
    let dir = TempDir::new().unwrap();
    let mut sp = spec(json!({"named": "quartic-1d"}), "ppa", 1e-4);
    sp["params"] = json!({"sigma": 0.5, "zeta": 2.0});
    let path = write_spec(dir.path(), "s.json", &sp);
    let summary = dir.path().join("summary.json");
    let r = exec(
        bin()
            .arg("solve")
            .arg("--spec")
            .arg(&path)
            .arg("--summary")
            .arg(&summary),
    );
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("0<σ<1/ζ"), "{}", r.stderr);
    assert!(!summary.exists());
}

#[test]
fn prox_al_hand_instances() {
    for (name, x_star, l_star) in [
        ("kkt-1d", vec![1.0], vec![2.0]),
        ("kkt-eq2", vec![0.5, 0.5], vec![-0.5]),
    ] {
        let s = solve(&spec(json!({ "named": name }), "prox-al", 1e-4));
        assert_eq!(s.run.code, 0, "{name}: {}", s.run.stderr);
        let kkt = &s.summary["kkt"];
        assert!(f(&kkt["stationarity"]) <= 1e-4, "{name}: {kkt}");
        assert!(f(&kkt["complementarity"]) <= 1e-4, "{name}: {kkt}");
        for (i, v) in x_star.iter().enumerate() {
            assert!((f(&s.summary["x"][i]) - v).abs() <= 1e-3);
        }
        for (i, v) in l_star.iter().enumerate() {
            assert!((f(&s.summary["lambda"][i]) - v).abs() <= 1e-3);
        }
        assert_consistent(&s);
    }
}

#[test]
fn apg_cert_trace_columns_and_consistency() {
    let s = solve(&spec(quartic(8, 10, 5, 0.5), "apg-cert", 1e-8));
    assert_eq!(s.run.code, 0, "{}", s.run.stderr);
    assert_eq!(
        s.header.join(","),
        "t,n_t,gamma_t,alpha_t,beta_t,F,lambda_prod,grad_evals,prox_evals,cert_residual"
    );
    assert_consistent(&s);
    let res = column(&s, "cert_residual");
    // checked every M = 10 iterations starting at t = 10
    for row in &s.trace {
        let t: usize = row[0].parse().unwrap();
        assert_eq!(row[res].is_empty(), t % 10 != 0, "t = {t}");
    }
    let last: f64 = s.trace.last().unwrap()[res].parse().unwrap();
    assert_eq!(last, f(&s.summary["residual"]));
    assert!(last <= 1e-8);
    // 17 significant digits round-trip
    let gamma = &s.trace[0][column(&s, "gamma_t")];
    assert_eq!(
        gamma.split('e').next().unwrap().replace(['-', '.'], "").len(),
        17,
        "{gamma}"
    );
}

#[test]
fn plain_apg_reports_its_final_certificate() {
    let mut sp = spec(quartic(6, 8, 2, 0.0), "apg", 1e-12);
    sp["params"] = json!({"max_iters": 30});
    let s = solve(&sp);
    assert_eq!(s.run.code, 2);
    assert_eq!(s.summary["termination"], "not_certified");
    assert_eq!(s.trace.len(), 30);
    assert_consistent(&s);
    let last = &s.trace[29][column(&s, "cert_residual")];
    assert_eq!(last.parse::<f64>().unwrap(), f(&s.summary["residual"]));

    sp["epsilon"] = json!(1.0);
    assert_eq!(solve(&sp).run.code, 0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let sp = spec(quartic(12, 15, 77, 0.0), "ppa", 1e-5);
    let path = write_spec(dir.path(), "s.json", &sp);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let (t, s) = (
            dir.path().join(format!("t{i}.csv")),
            dir.path().join(format!("s{i}.json")),
        );
        let r = exec(
            bin()
                .arg("solve")
                .arg("--spec")
                .arg(&path)
                .arg("--trace")
                .arg(&t)
                .arg("--summary")
                .arg(&s),
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        outputs.push((std::fs::read(&t).unwrap(), std::fs::read(&s).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let summary: Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert!(summary.get("wall_time_s").is_none());
}

#[test]
fn timing_flag_adds_wall_time() {
    let dir = TempDir::new().unwrap();
    let path = write_spec(
        dir.path(),
        "s.json",
        &spec(json!({"named": "quadratic-1d"}), "apg-cert", 1e-6),
    );
    let r = exec(bin().arg("solve").arg("--spec").arg(&path).arg("--timing"));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let summary: Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(f(&summary["wall_time_s"]) >= 0.0);
}

#[test]
fn summary_records_effective_params() {
    let mut sp = spec(quartic(4, 4, 1, 2.0), "apg-cert", 1e-6);
    sp["params"] = json!({"gamma0": 10.0, "M": 3});
    let s = solve(&sp);
    assert_eq!(s.run.code, 0);
    let p = &s.summary["params"];
    // clamped below 1/mu
    assert!(f(&p["gamma0"]) < 0.5 && f(&p["gamma0"]) > 0.4999);
    assert_eq!(p["check_every"], 3);
    assert_eq!(s.summary["rng"], "chacha8");
    assert_eq!(s.summary["solver"], "apg-cert");
}

#[test]
fn timeouts_exit_2_with_partial_outputs() {
    let mut sp = spec(quartic(10, 12, 3, 0.1), "apg-cert", 1e-12);
    sp["params"] = json!({"max_iters": 15});
    let s = solve(&sp);
    assert_eq!(s.run.code, 2);
    assert_eq!(s.summary["termination"], "timeout");
    assert_eq!(s.trace.len(), 15);
    assert_consistent(&s);

    let mut sp = spec(quartic(10, 12, 3, 0.0), "ppa", 1e-10);
    sp["params"] = json!({"max_outer": 3});
    let s = solve(&sp);
    assert_eq!(s.run.code, 2);
    assert_eq!(s.summary["termination"], "timeout");
    assert_eq!(s.trace.len(), 3);
    assert_consistent(&s);
    assert!(f(&s.summary["residual_bound"]) > 1e-10);

    let mut sp = spec(json!({"named": "kkt-1d"}), "prox-al", 1e-10);
    sp["params"] = json!({"max_outer": 2});
    let s = solve(&sp);
    assert_eq!(s.run.code, 2);
    assert!(s.summary["kkt"].is_object());
    assert_eq!(s.trace.len(), 2);
}

#[test]
fn incompatible_specs_exit_1() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("mu0-cert", spec(quartic(3, 3, 1, 0.0), "apg-cert", 1e-4)),
        ("mu-ppa", spec(quartic(3, 3, 1, 1.0), "ppa", 1e-4)),
        ("al-unconstrained", spec(quartic(3, 3, 1, 0.0), "prox-al", 1e-4)),
        ("ppa-constrained", spec(json!({"named": "kkt-1d"}), "ppa", 1e-4)),
        ("al-gamma0", {
            let mut s = spec(json!({"named": "kkt-1d"}), "prox-al", 1e-4);
            s["params"] = json!({"gamma0": 0.01});
            s
        }),
        ("apg-rho0", {
            let mut s = spec(quartic(3, 3, 1, 1.0), "apg-cert", 1e-4);
            s["params"] = json!({"rho0": 20.0});
            s
        }),
        ("unknown-key", {
            let mut s = spec(quartic(3, 3, 1, 1.0), "apg-cert", 1e-4);
            s["extra"] = json!(true);
            s
        }),
        ("bad-version", {
            let mut s = spec(quartic(3, 3, 1, 1.0), "apg-cert", 1e-4);
            s["version"] = json!(7);
            s
        }),
        ("bad-init", {
            let mut s = spec(quartic(3, 3, 1, 1.0), "apg-cert", 1e-4);
            s["init"] = json!([0.0]);
            s
        }),
        ("small-rho0", {
            let mut s = spec(json!({"named": "kkt-1d"}), "prox-al", 1e-4);
            s["params"] = json!({"rho0": 1.0});
            s
        }),
    ];
    for (name, sp) in cases {
        let path = write_spec(dir.path(), &format!("{name}.json"), &sp);
        let r = exec(bin().arg("solve").arg("--spec").arg(&path));
        assert_eq!(r.code, 1, "{name}: {}", r.stderr);
        assert!(!r.stderr.is_empty(), "{name}");
    }
    let r = exec(
        bin()
            .arg("solve")
            .arg("--spec")
            .arg(dir.path().join("missing.json")),
    );
    assert_eq!(r.code, 1);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(exec(&mut bin()).code, 1);
    assert_eq!(exec(bin().arg("solve")).code, 1);
    assert_eq!(exec(bin().arg("--help")).code, 0);
}

#[test]
fn spec_output_paths_are_relative_to_the_spec() {
    let dir = TempDir::new().unwrap();
    let mut sp = spec(json!({"named": "quadratic-1d"}), "apg-cert", 1e-6);
    sp["output"] = json!({"trace": "out/t.csv", "summary": "out/s.json"});
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let path = write_spec(dir.path(), "s.json", &sp);
    let r = exec(
        bin()
            .current_dir(std::env::temp_dir())
            .arg("solve")
            .arg("--spec")
            .arg(&path),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    assert!(dir.path().join("out/t.csv").exists());
    assert!(dir.path().join("out/s.json").exists());
}

struct SweepRow {
    epsilon: f64,
    termination: String,
    grad_evals: u64,
    slope: String,
}

fn sweep(sp: &Value, eps: &str, threads: Option<&str>) -> (Run, Vec<SweepRow>, String) {
    let dir = TempDir::new().unwrap();
    let path = write_spec(dir.path(), "s.json", sp);
    let out = dir.path().join("table.csv");
    let mut cmd = bin();
    cmd.arg("sweep")
        .arg("--spec")
        .arg(&path)
        .arg("--eps")
        .arg(eps)
        .arg("--out")
        .arg(&out);
    if let Some(t) = threads {
        cmd.env("APGCERT_THREADS", t);
    }
    let r = exec(&mut cmd);
    if !out.exists() {
        return (r, Vec::new(), String::new());
    }
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        "epsilon,termination,iterations,grad_evals,prox_evals,evals,slope"
    );
    let rows = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            SweepRow {
                epsilon: r[0].parse().unwrap(),
                termination: r[1].to_string(),
                grad_evals: r[3].parse().unwrap(),
                slope: r[6].to_string(),
            }
        })
        .collect();
    (r, rows, text)
}

#[test]
fn sweep_strongly_convex_is_linear_in_log_eps() {
    let sp = spec(quartic(50, 60, 4242, 1.0), "apg-cert", 1e-6);
    let (r, rows, _) = sweep(&sp, "1e-2,1e-4,1e-6,1e-8", None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(rows.len(), 4);
    assert!(rows[0].slope.is_empty() && rows[1..].iter().all(|r| !r.slope.is_empty()));
    let ratio = rows[3].grad_evals as f64 / rows[1].grad_evals as f64;
    assert!(ratio <= 3.0, "ratio {ratio}");
}

#[test]
fn sweep_ppa_is_sublinear() {
    let sp = spec(quartic(50, 50, 4242, 0.0), "ppa", 1e-4);
    let (r, rows, _) = sweep(&sp, "1e-2,1e-4", None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!((rows[0].epsilon, rows[1].epsilon), (1e-2, 1e-4));
    let ratio = rows[1].grad_evals as f64 / rows[0].grad_evals as f64;
    assert!((2.5..=40.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn sweep_validates_eps_list() {
    let sp = spec(json!({"named": "quadratic-1d"}), "apg-cert", 1e-4);
    for eps in ["1e-2", "1e-4,1e-2", "1e-2,abc"] {
        let (r, rows, _) = sweep(&sp, eps, None);
        assert_eq!(r.code, 1, "{eps}");
        assert!(rows.is_empty());
    }
}

#[test]
fn sweep_failure_writes_partial_table() {
    let mut sp = spec(quartic(10, 12, 3, 0.1), "apg-cert", 1e-4);
    sp["params"] = json!({"max_iters": 40});
    let (r, rows, _) = sweep(&sp, "1e-1,1e-12", None);
    assert_eq!(r.code, 2);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].termination, "certified");
    assert_eq!(rows[1].termination, "timeout");
    assert!(rows[1].slope.is_empty());
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let sp = spec(quartic(10, 12, 8, 0.5), "apg-cert", 1e-4);
    let (_, _, one) = sweep(&sp, "1e-2,1e-4,1e-6", Some("1"));
    let (_, _, many) = sweep(&sp, "1e-2,1e-4,1e-6", Some("3"));
    assert!(!one.is_empty());
    assert_eq!(one, many);
}
