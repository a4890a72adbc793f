use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn amgforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amgforge"))
        .args(args)
        .env_remove("AMGFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// `key = value` summary lines, with or without the CSV comment prefix.
fn summary(out: &str, key: &str) -> Option<String> {
    out.lines()
        .map(|l| l.trim_start_matches("# "))
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

/// CSV table rows below the given header.
fn csv_rows(out: &str, header: &str) -> Vec<Vec<String>> {
    let mut lines = out.lines().skip_while(|l| *l != header);
    assert!(lines.next().is_some(), "missing header {header:?} in\n{out}");
    lines
        .take_while(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_small_poisson() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.mtx");
    let o = amgforge(&["generate", "--kind", "fd5", "--n", "2", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real symmetric"));
    assert_eq!(lines.next(), Some("4 4 8"));
    assert_eq!(lines.count(), 8);
    let meta = fs::read_to_string(dir.path().join("a.mtx.meta")).unwrap();
    assert!(meta.contains("nnz = 12\n"), "{meta}");
    assert!(meta.contains("stored = 8\n"), "{meta}");
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("x.mtx");
    let second = dir.path().join("y.mtx");
    for out in [&first, &second] {
        let o = amgforge(&["generate", "--kind", "jump", "--n", "6", "--eps", "1e-3", "--out", path_str(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn generate_rejects_empty_grid_and_bad_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.mtx");
    let o = amgforge(&["generate", "--kind", "fd5", "--n", "0", "--out", path_str(&out)]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
    let missing = dir.path().join("no/such/dir/a.mtx");
    let o = amgforge(&["generate", "--kind", "fd5", "--n", "3", "--out", path_str(&missing)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("error"));
}

#[test]
fn solve_poisson_converges_quickly() {
    let o = amgforge(&["solve", "--kind", "fd5", "--n", "31", "--manufactured"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(summary(&out, "converged").as_deref(), Some("true"));
    let its: usize = summary(&out, "iterations").unwrap().parse().unwrap();
    assert!(its <= 20, "{its} iterations");
    let err: f64 = summary(&out, "relative_energy_error").unwrap().parse().unwrap();
    assert!(err < 1e-6, "{err}");
    assert!(out.contains("# effective config"));
    assert!(summary(&out, "operator_complexity").is_some());
}

#[test]
fn solve_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("a.mtx");
    assert_eq!(code(&amgforge(&["generate", "--kind", "fd5", "--n", "12", "--out", path_str(&mtx)])), 0);
    let rhs = dir.path().join("b.mtx");
    let n = 144;
    let mut body = format!("%%MatrixMarket matrix array real general\n{n} 1\n");
    for i in 0..n {
        body.push_str(&format!("{}\n", (i % 7) as f64 - 3.0));
    }
    fs::write(&rhs, body).unwrap();
    let o = amgforge(&["--csv", "solve", "--matrix", path_str(&mtx), "--rhs", path_str(&rhs)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o), "iteration,residual,relative");
    let last: f64 = rows.last().unwrap()[2].parse().unwrap();
    assert!(last <= 1e-8);
    assert_eq!(rows[0][0], "0");
}

#[test]
fn solve_reports_nonconvergence() {
    let o = amgforge(&["solve", "--kind", "fd5", "--n", "31", "--set", "max_it=2"]);
    assert_eq!(code(&o), 2);
    assert_eq!(summary(&stdout(&o), "converged").as_deref(), Some("false"));
}

#[test]
fn neumann_without_kernel_warns_and_detects_constants() {
    let o = amgforge(&["solve", "--kind", "fd5", "--n", "10", "--bc", "neumann"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    let o = amgforge(&["solve", "--kind", "fd5", "--n", "10", "--bc", "neumann", "--kernel"]);
    assert_eq!(code(&o), 0);
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn bad_header_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("bad.mtx");
    fs::write(&mtx, "%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 1 1\n").unwrap();
    let o = amgforge(&["solve", "--matrix", path_str(&mtx)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# comment\ntheta = 0.25\nsmoothr = gs\n").unwrap();
    let o = amgforge(&["solve", "--config", path_str(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let o = amgforge(&["solve", "--set", "bogus=1"]);
    assert_eq!(code(&o), 1);
    let o = amgforge(&["frobnicate"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "n = 40\ntheta = 0.5\nkind = laplace1d\n").unwrap();
    let o = amgforge(&["solve", "--config", path_str(&cfg), "--n", "9", "--set", "theta=0.3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(summary(&out, "n").as_deref(), Some("9"));
    assert_eq!(summary(&out, "theta").as_deref(), Some("0.3"));
    assert_eq!(summary(&out, "kind").as_deref(), Some("laplace1d"));
}

#[test]
fn echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = amgforge(&[
        "--csv", "solve", "--kind", "aniso", "--n", "14", "--eps", "0.01", "--seed", "5", "--set", "smoother=sgs",
    ]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let first = stdout(&first);
    let echo: String = first
        .lines()
        .take(amgforge::config::KEYS.len())
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = dir.path().join("echo.cfg");
    fs::write(&cfg, &echo).unwrap();
    let second = amgforge(&["--csv", "solve", "--config", path_str(&cfg)]);
    assert_eq!(code(&second), 0);
    let strip = |s: &str| -> Vec<String> {
        s.lines().filter(|l| !l.contains("seconds")).map(str::to_string).collect()
    };
    assert_eq!(strip(&first), strip(&stdout(&second)));
}

#[test]
fn analyze_rate_identity_on_small_laplacian() {
    let o = amgforge(&[
        "--csv", "analyze", "--kind", "laplace1d", "--n", "15", "--set", "smoother=sgs", "--builders", "ideal,full",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(
        &stdout(&o),
        "builder,coarsening,n,n_c,error_norm_sq,rate_from_k,optimal_rate,identity_gap",
    );
    assert_eq!(rows.len(), 2);
    let ideal = &rows[0];
    assert_eq!(ideal[0], "ideal");
    let gap: f64 = ideal[7].parse().unwrap();
    assert!(gap <= 1e-7, "{gap}");
    let full = &rows[1];
    assert_eq!(full[2], full[3]);
    let rate: f64 = full[4].parse().unwrap();
    assert!(rate.abs() <= 1e-12, "{rate}");
}

#[test]
fn analyze_refuses_large_problems() {
    let o = amgforge(&["analyze", "--kind", "fd5", "--n", "50"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("2000"), "{}", stderr(&o));
}

#[test]
fn adapt_history_is_monotone() {
    let o = amgforge(&[
        "--csv", "adapt", "--kind", "rescaled", "--n", "15", "--eps", "1", "--set", "delta0=1e-4", "--set", "rounds=3",
    ]);
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o), "round,delta,adopted");
    assert_eq!(rows.len(), 3);
    let deltas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(deltas.windows(2).all(|w| w[1] <= w[0]), "{deltas:?}");
    let ok = amgforge(&["adapt", "--kind", "rescaled", "--n", "15", "--eps", "1"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
}

#[test]
fn thread_variable_is_validated() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_amgforge"))
            .args(["solve", "--kind", "fd5", "--n", "8"])
            .env("AMGFORGE_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("zero")), 1);
    assert_eq!(code(&run("0")), 1);
}
