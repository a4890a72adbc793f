//! Flat `key = value` run configuration shared by every front end.
//!
//! One key per line, `#` starts a comment. Unknown keys are errors. The echo
//! lists every key with its resolved value and parses back to the same
//! configuration.

use std::path::PathBuf;

use crate::adaptive::{BootstrapParams, LsFitOptions, RestrictMode};
use crate::coarsening::{CoarseningKind, CrParams};
use crate::error::{AmgError, Result};
use crate::hierarchy::SetupConfig;
use crate::interpolation::BuilderTag;
use crate::problems::{Boundary, ProblemKind, ProblemSpec};
use crate::smoothers::{LineDirection, SmootherSpec};
use crate::strength::{StrengthConfig, StrengthVariant};

/// Keys in echo order.
pub const KEYS: &[&str] = &[
    "kind",
    "n",
    "eps",
    "bc",
    "matrix",
    "rhs",
    "seed",
    "smoother",
    "omega",
    "direction",
    "strength",
    "theta",
    "affinity_k",
    "affinity_nu",
    "coarsening",
    "ml",
    "passes",
    "cr",
    "interpolation",
    "sa_nu",
    "sa_omega",
    "emin_tol",
    "presmooth",
    "postsmooth",
    "max_coarse",
    "max_levels",
    "block_size",
    "tol",
    "max_it",
    "m0",
    "q",
    "n0",
    "delta0",
    "rounds",
    "restrict",
    "l_e",
    "mge_sweeps",
    "block_rank",
    "s_max",
    "eps_fit",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub n: usize,
    pub eps: f64,
    pub bc: Boundary,
    pub matrix: Option<PathBuf>,
    pub rhs: Option<PathBuf>,
    pub seed: u64,
    /// jacobi, gs, sgs or line-gs.
    pub smoother: String,
    /// `None` means the smoother's own default damping.
    pub omega: Option<f64>,
    pub direction: LineDirection,
    pub strength: String,
    pub theta: f64,
    pub affinity_k: usize,
    pub affinity_nu: usize,
    pub coarsening: String,
    pub ml: (u64, usize),
    pub passes: usize,
    pub cr: bool,
    pub interpolation: BuilderTag,
    pub sa_nu: usize,
    pub sa_omega: Option<f64>,
    pub emin_tol: f64,
    pub presmooth: usize,
    pub postsmooth: usize,
    pub max_coarse: usize,
    pub max_levels: usize,
    pub block_size: usize,
    pub tol: f64,
    pub max_it: usize,
    pub m0: usize,
    pub q: usize,
    pub n0: usize,
    pub delta0: f64,
    pub rounds: usize,
    pub restrict: RestrictMode,
    pub l_e: usize,
    pub mge_sweeps: usize,
    pub block_rank: usize,
    pub s_max: usize,
    pub eps_fit: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let setup = SetupConfig::default();
        let boot = BootstrapParams::default();
        RunConfig {
            kind: ProblemKind::Fd5,
            n: 31,
            eps: 1.0,
            bc: Boundary::Dirichlet,
            matrix: None,
            rhs: None,
            seed: 0,
            smoother: setup.smoother.name().to_string(),
            omega: None,
            direction: LineDirection::X,
            strength: setup.strength.variant.name().to_string(),
            theta: setup.strength.theta,
            affinity_k: 8,
            affinity_nu: 4,
            coarsening: setup.coarsening.name().to_string(),
            ml: (1, 2),
            passes: 2,
            cr: false,
            interpolation: setup.interpolation,
            sa_nu: setup.sa_nu,
            sa_omega: setup.sa_omega,
            emin_tol: setup.emin_tol,
            presmooth: setup.presmooth,
            postsmooth: setup.postsmooth,
            max_coarse: setup.max_coarse,
            max_levels: setup.max_levels,
            block_size: setup.block_size,
            tol: 1e-8,
            max_it: 200,
            m0: boot.m0,
            q: boot.q,
            n0: boot.n0,
            delta0: boot.delta0,
            rounds: boot.max_rounds,
            restrict: boot.mode,
            l_e: boot.l_e,
            mge_sweeps: boot.mge_sweeps,
            block_rank: boot.block_rank,
            s_max: boot.fit.s_max,
            eps_fit: boot.fit.eps_fit,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> AmgError {
    AmgError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value, "a real number")?;
    if !v.is_finite() {
        return Err(bad(key, value, "a finite real number"));
    }
    Ok(v)
}

fn real_or_auto(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        real(key, value).map(Some)
    }
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (value != "none").then(|| PathBuf::from(value))
}

/// Shortest round-tripping form; scientific for tiny or huge magnitudes.
fn show_real(x: f64) -> String {
    if x != 0.0 && !(1e-3..1e6).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), show_real)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Defaults overlaid with the settings in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| AmgError::Parse {
                line: k + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| AmgError::Parse {
                line: k + 1,
                msg: match e {
                    AmgError::Config(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(())
    }

    /// Apply one `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| AmgError::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => self.kind = value.parse()?,
            "n" => self.n = num(key, value, "a nonnegative integer")?,
            "eps" => self.eps = real(key, value)?,
            "bc" => self.bc = value.parse()?,
            "matrix" => self.matrix = path_or_none(value),
            "rhs" => self.rhs = path_or_none(value),
            "seed" => self.seed = num(key, value, "a nonnegative integer")?,
            "smoother" => {
                if !matches!(value, "jacobi" | "gs" | "sgs" | "line-gs") {
                    return Err(bad(key, value, "jacobi, gs, sgs or line-gs"));
                }
                self.smoother = value.to_string();
            }
            "omega" => self.omega = real_or_auto(key, value)?,
            "direction" => self.direction = value.parse()?,
            "strength" => {
                let variant: StrengthVariant = value.parse()?;
                self.strength = variant.name().to_string();
            }
            "theta" => self.theta = real(key, value)?,
            "affinity_k" => self.affinity_k = num(key, value, "a positive integer")?,
            "affinity_nu" => self.affinity_nu = num(key, value, "a nonnegative integer")?,
            "coarsening" => {
                let kind: CoarseningKind = value.parse()?;
                self.coarsening = kind.name().to_string();
            }
            "ml" => {
                let (m, l) = value.split_once(',').ok_or_else(|| bad(key, value, "m,l"))?;
                self.ml = (num(key, m.trim(), "m,l")?, num(key, l.trim(), "m,l")?);
            }
            "passes" => self.passes = num(key, value, "a positive integer")?,
            "cr" => self.cr = num(key, value, "true or false")?,
            "interpolation" => self.interpolation = value.parse()?,
            "sa_nu" => self.sa_nu = num(key, value, "a nonnegative integer")?,
            "sa_omega" => self.sa_omega = real_or_auto(key, value)?,
            "emin_tol" => self.emin_tol = real(key, value)?,
            "presmooth" => self.presmooth = num(key, value, "a nonnegative integer")?,
            "postsmooth" => self.postsmooth = num(key, value, "a nonnegative integer")?,
            "max_coarse" => self.max_coarse = num(key, value, "a nonnegative integer")?,
            "max_levels" => self.max_levels = num(key, value, "a positive integer")?,
            "block_size" => self.block_size = num(key, value, "a positive integer")?,
            "tol" => self.tol = real(key, value)?,
            "max_it" => self.max_it = num(key, value, "a nonnegative integer")?,
            "m0" => self.m0 = num(key, value, "a positive integer")?,
            "q" => self.q = num(key, value, "a positive integer")?,
            "n0" => self.n0 = num(key, value, "a nonnegative integer")?,
            "delta0" => self.delta0 = real(key, value)?,
            "rounds" => self.rounds = num(key, value, "a nonnegative integer")?,
            "restrict" => self.restrict = value.parse()?,
            "l_e" => self.l_e = num(key, value, "a nonnegative integer")?,
            "mge_sweeps" => self.mge_sweeps = num(key, value, "a nonnegative integer")?,
            "block_rank" => self.block_rank = num(key, value, "a positive integer")?,
            "s_max" => self.s_max = num(key, value, "a nonnegative integer")?,
            "eps_fit" => self.eps_fit = real(key, value)?,
            _ => return Err(AmgError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "kind" => self.kind.name().to_string(),
            "n" => self.n.to_string(),
            "eps" => show_real(self.eps),
            "bc" => self.bc.name().to_string(),
            "matrix" => show_path(&self.matrix),
            "rhs" => show_path(&self.rhs),
            "seed" => self.seed.to_string(),
            "smoother" => self.smoother.clone(),
            "omega" => show_opt(self.omega),
            "direction" => match self.direction {
                LineDirection::X => "x".into(),
                LineDirection::Y => "y".into(),
            },
            "strength" => self.strength.clone(),
            "theta" => show_real(self.theta),
            "affinity_k" => self.affinity_k.to_string(),
            "affinity_nu" => self.affinity_nu.to_string(),
            "coarsening" => self.coarsening.clone(),
            "ml" => format!("{},{}", self.ml.0, self.ml.1),
            "passes" => self.passes.to_string(),
            "cr" => self.cr.to_string(),
            "interpolation" => self.interpolation.name().to_string(),
            "sa_nu" => self.sa_nu.to_string(),
            "sa_omega" => show_opt(self.sa_omega),
            "emin_tol" => show_real(self.emin_tol),
            "presmooth" => self.presmooth.to_string(),
            "postsmooth" => self.postsmooth.to_string(),
            "max_coarse" => self.max_coarse.to_string(),
            "max_levels" => self.max_levels.to_string(),
            "block_size" => self.block_size.to_string(),
            "tol" => show_real(self.tol),
            "max_it" => self.max_it.to_string(),
            "m0" => self.m0.to_string(),
            "q" => self.q.to_string(),
            "n0" => self.n0.to_string(),
            "delta0" => show_real(self.delta0),
            "rounds" => self.rounds.to_string(),
            "restrict" => self.restrict.name().to_string(),
            "l_e" => self.l_e.to_string(),
            "mge_sweeps" => self.mge_sweeps.to_string(),
            "block_rank" => self.block_rank.to_string(),
            "s_max" => self.s_max.to_string(),
            "eps_fit" => show_real(self.eps_fit),
            _ => return None,
        };
        Some(v)
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn echo(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("every listed key has a value")))
            .collect()
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            kind: self.kind,
            n: self.n,
            eps: self.eps,
            bc: self.bc,
        }
    }

    pub fn smoother_spec(&self) -> SmootherSpec {
        match self.smoother.as_str() {
            "jacobi" => SmootherSpec::Jacobi(self.omega),
            "sgs" => SmootherSpec::SymmetricGaussSeidel,
            "line-gs" => SmootherSpec::LineGaussSeidel(self.direction),
            _ => SmootherSpec::GaussSeidel(self.omega.unwrap_or(1.0)),
        }
    }

    pub fn strength_config(&self) -> Result<StrengthConfig> {
        let variant = match self.strength.parse()? {
            StrengthVariant::Affinity { .. } => StrengthVariant::Affinity {
                vectors: self.affinity_k,
                sweeps: self.affinity_nu,
            },
            v => v,
        };
        Ok(StrengthConfig {
            variant,
            theta: self.theta,
            seed: self.seed,
        })
    }

    pub fn setup_config(&self) -> Result<SetupConfig> {
        let coarsening = match self.coarsening.parse()? {
            CoarseningKind::Pairwise { .. } => CoarseningKind::Pairwise { passes: self.passes },
            CoarseningKind::Aggressive { .. } => CoarseningKind::Aggressive {
                m: self.ml.0,
                l: self.ml.1,
            },
            k => k,
        };
        let cfg = SetupConfig {
            strength: self.strength_config()?,
            coarsening,
            interpolation: self.interpolation,
            smoother: self.smoother_spec(),
            presmooth: self.presmooth,
            postsmooth: self.postsmooth,
            sa_nu: self.sa_nu,
            sa_omega: self.sa_omega,
            emin_tol: self.emin_tol,
            max_coarse: self.max_coarse,
            max_levels: self.max_levels,
            block_size: self.block_size,
            near_kernel: None,
            cr: self.cr.then(|| CrParams {
                seed: self.seed,
                ..CrParams::default()
            }),
        };
        Ok(cfg)
    }

    pub fn bootstrap_params(&self) -> Result<BootstrapParams> {
        Ok(BootstrapParams {
            m0: self.m0,
            q: self.q,
            n0: self.n0,
            delta0: self.delta0,
            max_rounds: self.rounds,
            max_levels: self.max_levels,
            l_e: self.l_e,
            mge_sweeps: self.mge_sweeps,
            mode: self.restrict,
            strength: self.strength_config()?,
            fit: LsFitOptions {
                s_max: self.s_max,
                eps_fit: self.eps_fit,
                ..LsFitOptions::default()
            },
            block_rank: self.block_rank,
            presmooth: self.presmooth,
            postsmooth: self.postsmooth,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("theta = 0.3\ntol = 1e-300\neps = 123456789.125\nomega=auto\nsa_omega = 0.61\nml = 2,3\nmatrix = a b.mtx\n")
            .unwrap();
        let back = RunConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.echo(), cfg.echo());
    }

    #[test]
    fn echo_lists_every_key_once() {
        let echo = RunConfig::default().echo();
        let keys: Vec<&str> = echo.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(keys, KEYS);
    }

    #[test]
    fn unknown_key_names_its_line() {
        let err = RunConfig::parse("theta = 0.5\n\n# note\nthetta = 0.5\n").unwrap_err();
        match err {
            AmgError::Parse { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("thetta"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = RunConfig::parse("# header\n\n  smoother = sgs   # trailing\n").unwrap();
        assert_eq!(cfg.smoother_spec(), SmootherSpec::SymmetricGaussSeidel);
    }

    #[test]
    fn bad_values_rejected() {
        for line in ["n = -3", "smoother = sor", "cr = yes", "ml = 2", "tol = nan", "nokey"] {
            assert!(RunConfig::parse(line).is_err(), "{line}");
        }
    }

    #[test]
    fn override_beats_file() {
        let mut cfg = RunConfig::parse("theta = 0.5").unwrap();
        cfg.apply_override("theta=0.1").unwrap();
        assert_eq!(cfg.theta, 0.1);
        assert!(cfg.apply_override("theta").is_err());
    }

    #[test]
    fn mapped_configs_carry_settings() {
        let cfg = RunConfig::parse(
            "coarsening = aggressive\nml = 2,3\nstrength = affinity\naffinity_k = 5\naffinity_nu = 2\ncr = true\nseed = 9\nrounds = 7\nrestrict = block",
        )
        .unwrap();
        let s = cfg.setup_config().unwrap();
        assert_eq!(s.coarsening, CoarseningKind::Aggressive { m: 2, l: 3 });
        assert_eq!(s.strength.variant, StrengthVariant::Affinity { vectors: 5, sweeps: 2 });
        assert_eq!(s.strength.seed, 9);
        assert_eq!(s.cr.unwrap().seed, 9);
        let b = cfg.bootstrap_params().unwrap();
        assert_eq!(b.max_rounds, 7);
        assert_eq!(b.mode, RestrictMode::Block);
        assert_eq!(b.seed, 9);
    }
}
