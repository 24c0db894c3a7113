//! Flat key-value experiment configs.
//!
//! A config is plain text: one `key = value` pair per line, `#` comments,
//! blank lines ignored. The `command` key selects what runs; every other key
//! belongs to that command (unknown keys are rejected so typos cannot
//! silently fall back to defaults). The `--out`, `--seed`, `--tol` and
//! `--max-iter` flags override their config counterparts.

use std::path::PathBuf;

use nondiv_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveLinear,
    SolveNonlinear,
    CheckCordes,
    CheckNearness,
    HeisenbergNorms,
    MtIdentity,
    FiberSolve,
}

impl Command {
    pub fn parse(name: &str) -> Result<Command> {
        match name {
            "solve-linear" => Ok(Command::SolveLinear),
            "solve-nonlinear" => Ok(Command::SolveNonlinear),
            "check-cordes" => Ok(Command::CheckCordes),
            "check-nearness" => Ok(Command::CheckNearness),
            "heisenberg-norms" => Ok(Command::HeisenbergNorms),
            "mt-identity" => Ok(Command::MtIdentity),
            "fiber-solve" => Ok(Command::FiberSolve),
            other => Err(Error::Config(format!(
                "unknown command '{}'; expected one of solve-linear, solve-nonlinear, \
                 check-cordes, check-nearness, heisenberg-norms, mt-identity, fiber-solve",
                other
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Command::SolveLinear => "solve-linear",
            Command::SolveNonlinear => "solve-nonlinear",
            Command::CheckCordes => "check-cordes",
            Command::CheckNearness => "check-nearness",
            Command::HeisenbergNorms => "heisenberg-norms",
            Command::MtIdentity => "mt-identity",
            Command::FiberSolve => "fiber-solve",
        }
    }
}

/// Parsed `key = value` pairs in file order.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_owned();
            let value = value.trim().to_owned();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{}'",
                    lineno + 1,
                    key
                )));
            }
            entries.push((key, value));
        }
        Ok(RawConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{}'", key)))
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("key '{}': bad number '{}': {}", key, v, e))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        let v = self.get_str(key)?;
        v.parse::<f64>()
            .map_err(|e| Error::Config(format!("key '{}': bad number '{}': {}", key, v, e)))
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("key '{}': bad integer '{}': {}", key, v, e))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "key '{}': expected true/false, got '{}'",
                key, v
            ))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Config(format!("key '{}': bad number '{}': {}", key, s, e))
                    })
                })
                .collect(),
        }
    }

    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|e| {
                        Error::Config(format!("key '{}': bad integer '{}': {}", key, s, e))
                    })
                })
                .collect(),
        }
    }

    /// Reject keys outside the allowed set (common keys are always allowed).
    pub fn ensure_known(&self, allowed: &[&str]) -> Result<()> {
        const COMMON: &[&str] = &["command", "out", "seed", "tol", "max_iter"];
        for (key, _) in &self.entries {
            if !COMMON.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown key '{}' for this command",
                    key
                )));
            }
        }
        Ok(())
    }
}

/// Flag-level overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// One experiment: command, its raw parameters, and the resolved common
/// settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub raw: RawConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl ExperimentConfig {
    pub fn from_text(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
        let raw = RawConfig::parse(text)?;
        let command = Command::parse(raw.get_str("command")?)?;
        let out = overrides
            .out
            .clone()
            .or_else(|| raw.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed = match overrides.seed {
            Some(s) => s,
            None => match raw.get("seed") {
                None => 0,
                Some(v) => v.parse::<u64>().map_err(|e| {
                    Error::Config(format!("key 'seed': bad integer '{}': {}", v, e))
                })?,
            },
        };
        let tol = match overrides.tol {
            Some(t) => t,
            None => raw.get_f64("tol", 1e-9)?,
        };
        let max_iter = match overrides.max_iter {
            Some(m) => m,
            None => raw.get_usize("max_iter", 10_000)?,
        };
        if !(tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", tol)));
        }
        if max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(ExperimentConfig {
            command,
            raw,
            out,
            seed,
            tol,
            max_iter,
        })
    }
}
