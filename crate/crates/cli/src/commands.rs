use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use amgforge::adaptive::{bootstrap_setup, random_test_vectors};
use amgforge::analysis::{two_level_report, PowerOptions};
use amgforge::coarsening::CoarseningKind;
use amgforge::config::RunConfig;
use amgforge::dense::DENSE_CAP;
use amgforge::error::{AmgError, Result};
use amgforge::hierarchy::{pcg_solve, setup, Hierarchy};
use amgforge::interpolation::BuilderTag;
use amgforge::sparse::{energy, mmio, CsrMatrix};

use crate::table::Table;
use crate::Outcome;

fn load_matrix(cfg: &RunConfig) -> Result<CsrMatrix> {
    match &cfg.matrix {
        Some(path) => {
            let file = File::open(path)?;
            mmio::read_matrix(BufReader::new(file)).map_err(|e| match e {
                AmgError::Parse { line, msg } => AmgError::Parse {
                    line,
                    msg: format!("{}: {msg}", path.display()),
                },
                other => other,
            })
        }
        None => {
            if cfg.n == 0 {
                return Err(AmgError::Config("n must be positive".into()));
            }
            cfg.problem().build()
        }
    }
}

/// Config echo; comment-prefixed in CSV mode so the tables stay parseable.
fn print_echo(cfg: &RunConfig, csv: bool) {
    let echo = cfg.echo();
    if csv {
        echo.lines().for_each(|l| println!("# {l}"));
    } else {
        println!("# effective config");
        print!("{echo}");
        println!();
    }
}

fn summary_line(csv: bool, key: &str, value: impl std::fmt::Display) {
    if csv {
        println!("# {key} = {value}");
    } else {
        println!("{key} = {value}");
    }
}

fn join_sizes(h: &Hierarchy) -> String {
    h.sizes().iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn generate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    if cfg.n == 0 {
        return Err(AmgError::Config("n must be positive".into()));
    }
    let a = cfg.problem().build()?;
    let mut w = BufWriter::new(File::create(out)?);
    mmio::write_matrix(&mut w, &a)?;
    w.flush()?;
    let stored = if a.is_symmetric() {
        (0..a.n_rows()).map(|i| a.row_iter(i).filter(|&(j, _)| j <= i).count()).sum()
    } else {
        a.nnz()
    };
    let meta_path = format!("{}.meta", out.display());
    let mut meta = BufWriter::new(File::create(&meta_path)?);
    for key in ["kind", "n", "eps", "bc", "seed"] {
        writeln!(meta, "{key} = {}", cfg.get(key).expect("problem key"))?;
    }
    writeln!(meta, "rows = {}", a.n_rows())?;
    writeln!(meta, "cols = {}", a.n_cols())?;
    writeln!(meta, "nnz = {}", a.nnz())?;
    writeln!(meta, "stored = {stored}")?;
    writeln!(meta, "symmetric = {}", a.is_symmetric())?;
    meta.flush()?;
    println!("wrote {} ({}x{}, {} stored entries) and {meta_path}", out.display(), a.n_rows(), a.n_cols(), stored);
    Ok(Outcome::Done)
}

/// Constant vector if every row sums to zero relative to the diagonal.
fn row_sum_kernel(a: &CsrMatrix) -> Option<Vec<f64>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let flat = (0..a.n_rows()).all(|i| a.row_iter(i).map(|(_, v)| v).sum::<f64>().abs() <= 1e-12 * scale);
    flat.then(|| constant_unit(a.n_rows()))
}

fn constant_unit(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

pub fn solve(cfg: &RunConfig, kernel_flag: bool, csv: bool) -> Result<Outcome> {
    let a = load_matrix(cfg)?;
    let n = a.n_rows();
    let kernel = if kernel_flag {
        Some(vec![constant_unit(n)])
    } else {
        let found = row_sum_kernel(&a);
        if found.is_some() {
            eprintln!("warning: rows sum to zero; treating constants as the kernel (pass --kernel to state this explicitly)");
        }
        found.map(|k| vec![k])
    };
    let (b, exact) = match &cfg.rhs {
        Some(path) => (mmio::read_vector(BufReader::new(File::open(path)?))?, None),
        None => {
            let mut x = random_test_vectors(&a, 1, cfg.seed, &[]).remove(0);
            if let Some(k) = &kernel {
                amgforge::sparse::project_out(&mut x, k);
            }
            (a.spmv(&x)?, Some(x))
        }
    };
    print_echo(cfg, csv);

    let setup_start = Instant::now();
    let h = setup(&a, &cfg.setup_config()?)?;
    let setup_time = setup_start.elapsed();
    let (x, report) = pcg_solve(&a, &b, &h, cfg.tol, cfg.max_it, kernel.as_deref())?;

    summary_line(csv, "n", n);
    summary_line(csv, "nnz", a.nnz());
    summary_line(csv, "levels", h.n_levels());
    summary_line(csv, "level_sizes", join_sizes(&h));
    summary_line(csv, "operator_complexity", format!("{:e}", h.operator_complexity()));
    summary_line(csv, "grid_complexity", format!("{:e}", h.grid_complexity()));
    if !csv {
        println!();
    }
    let mut table = Table::new(&["iteration", "residual", "relative"]);
    let r0 = report.residuals[0];
    for (k, r) in report.residuals.iter().enumerate() {
        let rel = if r0 > 0.0 { r / r0 } else { 0.0 };
        table.push(vec![k.to_string(), format!("{r:e}"), format!("{rel:e}")]);
    }
    print!("{}", table.render(csv));
    if !csv {
        println!();
    }
    summary_line(csv, "converged", report.converged);
    summary_line(csv, "iterations", report.iterations);
    summary_line(csv, "factor", format!("{:e}", report.factor));
    if let Some(xs) = exact {
        let diff: Vec<f64> = x.iter().zip(&xs).map(|(p, q)| p - q).collect();
        let denom = energy(&a, &xs).sqrt();
        let err = energy(&a, &diff).sqrt();
        summary_line(csv, "relative_energy_error", format!("{:e}", if denom > 0.0 { err / denom } else { err }));
    }
    summary_line(csv, "setup_seconds", format!("{:e}", setup_time.as_secs_f64()));
    summary_line(csv, "solve_seconds", format!("{:e}", report.wall_time.as_secs_f64()));
    if report.converged {
        Ok(Outcome::Done)
    } else {
        eprintln!("not converged after {} iterations", report.iterations);
        Ok(Outcome::NotConverged)
    }
}

fn analysis_prolongation(a: &CsrMatrix, cfg: &RunConfig, builder: &str) -> Result<(CsrMatrix, String)> {
    if builder == "full" {
        return Ok((CsrMatrix::identity(a.n_rows()), "none".into()));
    }
    let tag: BuilderTag = builder.parse()?;
    let mut sc = cfg.setup_config()?.two_level();
    sc.interpolation = tag;
    // each builder gets the coarsening family it is defined for
    let wants_aggregates = matches!(tag, BuilderTag::Ua | BuilderTag::Sa);
    if wants_aggregates != sc.coarsening.is_aggregation() {
        sc.coarsening = if wants_aggregates {
            CoarseningKind::Aggregate
        } else {
            CoarseningKind::Mis
        };
    }
    let h = setup(a, &sc)?;
    let p = h.levels[0]
        .p
        .as_ref()
        .ok_or_else(|| AmgError::InvalidArgument("problem too small to coarsen".into()))?;
    Ok((p.p.clone(), sc.coarsening.name().to_string()))
}

pub fn analyze(cfg: &RunConfig, builders: &[String], csv: bool) -> Result<Outcome> {
    let a = load_matrix(cfg)?;
    if a.n_rows() > DENSE_CAP {
        return Err(AmgError::TooLarge {
            n: a.n_rows(),
            cap: DENSE_CAP,
        });
    }
    print_echo(cfg, csv);
    let smoother = cfg.smoother_spec().build(Arc::new(a.clone()))?;
    let opts = PowerOptions {
        seed: cfg.seed,
        ..PowerOptions::default()
    };
    let mut table = Table::new(&[
        "builder",
        "coarsening",
        "n",
        "n_c",
        "error_norm_sq",
        "rate_from_k",
        "optimal_rate",
        "identity_gap",
    ]);
    for builder in builders {
        let (p, coarsening) = analysis_prolongation(&a, cfg, builder.trim())?;
        let r = two_level_report(&a, &smoother, &p, &opts)?;
        table.push(vec![
            builder.trim().to_string(),
            coarsening,
            r.n.to_string(),
            r.n_c.to_string(),
            format!("{:e}", r.error_norm_sq),
            format!("{:e}", r.rate_from_k),
            format!("{:e}", r.optimal_rate),
            format!("{:e}", (r.error_norm_sq - r.rate_from_k).abs()),
        ]);
    }
    print!("{}", table.render(csv));
    Ok(Outcome::Done)
}

pub fn adapt(cfg: &RunConfig, csv: bool) -> Result<Outcome> {
    let a = load_matrix(cfg)?;
    let params = cfg.bootstrap_params()?;
    print_echo(cfg, csv);
    let start = Instant::now();
    let (h, state) = bootstrap_setup(&a, &cfg.smoother_spec(), &params)?;
    let elapsed = start.elapsed();
    let mut table = Table::new(&["round", "delta", "adopted"]);
    for (k, delta) in state.history.iter().enumerate() {
        let round = k + 1;
        table.push(vec![
            round.to_string(),
            format!("{delta:e}"),
            (!state.rejected_rounds.contains(&round)).to_string(),
        ]);
    }
    print!("{}", table.render(csv));
    if !csv {
        println!();
    }
    summary_line(csv, "converged", state.converged);
    summary_line(csv, "levels", h.n_levels());
    summary_line(csv, "level_sizes", join_sizes(&h));
    summary_line(csv, "operator_complexity", format!("{:e}", h.operator_complexity()));
    summary_line(csv, "setup_seconds", format!("{:e}", elapsed.as_secs_f64()));
    Ok(if state.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}
