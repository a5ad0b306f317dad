use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::KrylovParams;
use crate::mpo::{self, XxzCouplings};
use crate::mps;

/// Which schemes an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Standard,
    Augmented,
    Both,
}

impl Mode {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            Mode::Standard => vec![Scheme::Standard],
            Mode::Augmented => vec![Scheme::Augmented],
            Mode::Both => vec![Scheme::Standard, Scheme::Augmented],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Augmented => "augmented",
            Mode::Both => "both",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" => Ok(Mode::Standard),
            "augmented" => Ok(Mode::Augmented),
            "both" => Ok(Mode::Both),
            other => Err(Error::Config(format!("unknown mode {other:?} (standard, augmented, both)"))),
        }
    }
}

/// A single evolution scheme, as recorded per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Standard,
    Augmented,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Standard => "standard",
            Scheme::Augmented => "augmented",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parses `0.125`, `1e-3` or `1/8`.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad_number(s))?;
            let q: f64 = q.trim().parse().map_err(|_| bad_number(s))?;
            p / q
        }
        None => s.parse().map_err(|_| bad_number(s))?,
    };
    if !value.is_finite() {
        return Err(bad_number(s));
    }
    Ok(value)
}

fn bad_number(s: &str) -> Error {
    Error::Config(format!("not a number: {s:?}"))
}

fn list_items(s: &str) -> impl Iterator<Item = &str> {
    s.trim()
        .trim_start_matches(['(', '['])
        .trim_end_matches([')', ']'])
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
}

pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    list_items(s).map(parse_real).collect()
}

pub fn parse_count_list(s: &str) -> Result<Vec<usize>> {
    list_items(s)
        .map(|x| x.parse().map_err(|_| Error::Config(format!("not a count: {x:?}"))))
        .collect()
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Config(format!("not a count: {s:?}")))
}

/// Round-trippable text for a real.
pub(crate) fn format_real(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Partial configuration from a key-value file or the command line. Later
/// layers override earlier ones via [`ConfigPatch::merge`].
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct ConfigPatch {
    /// Number of spin-1 sites.
    #[arg(long)]
    pub sites: Option<usize>,
    /// Exchange coupling J.
    #[arg(long, value_parser = parse_real_arg)]
    pub coupling: Option<f64>,
    /// Anisotropy Δ.
    #[arg(long, value_parser = parse_real_arg)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bond dimension of the random initial operator.
    #[arg(long)]
    pub init_bond_dim: Option<usize>,
    /// Padded bond dimensions, e.g. 1,9,81,81,81,9,1.
    #[arg(long, value_delimiter = ',')]
    pub max_bond_dims: Option<Vec<usize>>,
    /// Per-site scale of |H⟩ in the augmented scheme (γ = factor^N).
    #[arg(long, value_parser = parse_real_arg)]
    pub gamma_site_factor: Option<f64>,
    /// Final time; fractions such as 1/8 are accepted.
    #[arg(long, value_parser = parse_real_arg)]
    pub t_final: Option<f64>,
    /// Comma-separated time steps, e.g. 1/32,1/64.
    #[arg(long, value_delimiter = ',', value_parser = parse_real_arg)]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Concurrent (τ, scheme) runs.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_real_arg(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

impl ConfigPatch {
    /// Parses `key = value` lines; `#` starts a comment. Keys are the long
    /// flag names without dashes (`init-bond-dim` or `init_bond_dim`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut patch = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            patch
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(patch)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('_', "-").as_str() {
            "sites" => self.sites = Some(parse_count(value)?),
            "coupling" => self.coupling = Some(parse_real(value)?),
            "delta" => self.delta = Some(parse_real(value)?),
            "seed" => {
                self.seed = Some(value.parse().map_err(|_| Error::Config(format!("bad seed {value:?}")))?)
            }
            "init-bond-dim" => self.init_bond_dim = Some(parse_count(value)?),
            "max-bond-dims" => self.max_bond_dims = Some(parse_count_list(value)?),
            "gamma-site-factor" => self.gamma_site_factor = Some(parse_real(value)?),
            "t-final" => self.t_final = Some(parse_real(value)?),
            "tau-grid" => self.tau_grid = Some(parse_real_list(value)?),
            "mode" => self.mode = Some(value.parse()?),
            "output-dir" => self.output_dir = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(parse_count(value)?),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: Self) -> Self {
        Self {
            sites: over.sites.or(self.sites),
            coupling: over.coupling.or(self.coupling),
            delta: over.delta.or(self.delta),
            seed: over.seed.or(self.seed),
            init_bond_dim: over.init_bond_dim.or(self.init_bond_dim),
            max_bond_dims: over.max_bond_dims.or(self.max_bond_dims),
            gamma_site_factor: over.gamma_site_factor.or(self.gamma_site_factor),
            t_final: over.t_final.or(self.t_final),
            tau_grid: over.tau_grid.or(self.tau_grid),
            mode: over.mode.or(self.mode),
            output_dir: over.output_dir.or(self.output_dir),
            workers: over.workers.or(self.workers),
        }
    }

    /// Fills unset fields with defaults and validates.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let n_sites = self.sites.unwrap_or(d.n_sites);
        let t_final = self.t_final.unwrap_or(d.t_final);
        let max_bond_dims = match self.max_bond_dims {
            Some(m) => m,
            None if n_sites == d.n_sites => d.max_bond_dims,
            None => ExperimentConfig::default_max_bond_dims(n_sites),
        };
        let cfg = ExperimentConfig {
            n_sites,
            coupling: self.coupling.unwrap_or(d.coupling),
            delta: self.delta.unwrap_or(d.delta),
            seed: self.seed.unwrap_or(d.seed),
            init_bond_dim: self.init_bond_dim.unwrap_or(d.init_bond_dim),
            max_bond_dims,
            gamma_site_factor: self.gamma_site_factor.unwrap_or(d.gamma_site_factor),
            t_final,
            tau_grid: self.tau_grid.unwrap_or_else(|| ExperimentConfig::default_tau_grid(t_final)),
            mode: self.mode.unwrap_or(d.mode),
            output_dir: self.output_dir.unwrap_or(d.output_dir),
            workers: self.workers.unwrap_or(d.workers),
            krylov: d.krylov,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything that determines an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_sites: usize,
    pub coupling: f64,
    pub delta: f64,
    pub seed: u64,
    pub init_bond_dim: usize,
    pub max_bond_dims: Vec<usize>,
    pub gamma_site_factor: f64,
    pub t_final: f64,
    pub tau_grid: Vec<f64>,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub krylov: KrylovParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_sites: 6,
            coupling: 1.0,
            delta: 1.2,
            seed: 1,
            init_bond_dim: 2,
            max_bond_dims: vec![1, 9, 81, 81, 81, 9, 1],
            gamma_site_factor: 1e-3,
            t_final: 0.125,
            tau_grid: Self::default_tau_grid(0.125),
            mode: Mode::Both,
            output_dir: PathBuf::from("tdvp-results"),
            workers: 1,
            krylov: KrylovParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// `t_final · {1/4, 1/8, 1/16, 1/32, 1/64}`.
    pub fn default_tau_grid(t_final: f64) -> Vec<f64> {
        [4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|k| t_final / k).collect()
    }

    /// Full-rank dimensions of the purified operator capped at 81.
    pub fn default_max_bond_dims(n_sites: usize) -> Vec<usize> {
        (0..=n_sites)
            .map(|n| {
                let k = n.min(n_sites - n) as u32;
                9usize.saturating_pow(k).min(81)
            })
            .collect()
    }

    pub fn couplings(&self) -> XxzCouplings {
        XxzCouplings::new(self.coupling, self.delta)
    }

    /// Bond dimensions of the random initial operator before padding.
    pub fn initial_bond_dims(&self) -> Vec<usize> {
        let n = self.n_sites;
        (0..=n)
            .map(|k| {
                let full = 9usize.saturating_pow(k.min(n - k) as u32);
                self.init_bond_dim.min(full)
            })
            .collect()
    }

    /// `(τ, step count)` pairs.
    pub fn steps(&self) -> Vec<(f64, usize)> {
        self.tau_grid
            .iter()
            .map(|&tau| (tau, (self.t_final / tau).round() as usize))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let n = self.n_sites;
        if !(2..=6).contains(&n) {
            return fail(format!("sites = {n}: the dense reference supports 2..=6 sites"));
        }
        if !self.coupling.is_finite() || self.coupling == 0.0 || !self.delta.is_finite() {
            return fail(format!("couplings J = {}, Δ = {} must be finite with J ≠ 0", self.coupling, self.delta));
        }
        if self.init_bond_dim == 0 {
            return fail("init-bond-dim must be at least 1".into());
        }
        let m = &self.max_bond_dims;
        if m.len() != n + 1 || m[0] != 1 || m[n] != 1 {
            return fail(format!("max-bond-dims {m:?} must have {} entries with 1 at both ends", n + 1));
        }
        for k in 1..n {
            if m[k] == 0 || m[k] > 9 * m[k - 1] || m[k] > 9 * m[k + 1] {
                return fail(format!("max-bond-dims {m:?}: bond {k} exceeds 9× a neighbouring bond"));
            }
        }
        let init = self.initial_bond_dims();
        for k in 1..n {
            if init[k] > m[k] {
                return fail(format!("init-bond-dim {} exceeds max bond {} at bond {k}", self.init_bond_dim, m[k]));
            }
        }
        if self.mode != Mode::Standard {
            let h_dims = mpo::xxz_hamiltonian(n, self.couplings())?.bond_dims();
            for k in 1..n {
                if init[k] + h_dims[k] > m[k] {
                    return fail(format!(
                        "bond {k}: init-bond-dim {} plus {} for |H⟩ does not fit into max bond {}",
                        init[k], h_dims[k], m[k]
                    ));
                }
            }
        }
        if !(self.gamma_site_factor >= 0.0) || !self.gamma_site_factor.is_finite() {
            return fail(format!("gamma-site-factor {} must be finite and ≥ 0", self.gamma_site_factor));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return fail(format!("t-final {} must be positive", self.t_final));
        }
        if self.tau_grid.is_empty() {
            return fail("tau-grid is empty".into());
        }
        for &tau in &self.tau_grid {
            let k = (self.t_final / tau).round();
            if !(tau > 0.0) || k < 1.0 || (k * tau - self.t_final).abs() > 1e-12 {
                return fail(format!("tau {tau} does not divide t-final {}", self.t_final));
            }
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if 9usize.pow(n as u32) > mps::DENSE_VECTOR_CAP {
            return fail(format!("sites = {n} exceeds the dense cap"));
        }
        self.krylov.validate()
    }

    /// `key = value` text accepted by [`ConfigPatch::parse`].
    pub fn to_key_values(&self) -> String {
        let reals = |v: &[f64]| v.iter().map(|&x| format_real(x)).collect::<Vec<_>>().join(",");
        let counts = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!(
            "sites = {}\ncoupling = {}\ndelta = {}\nseed = {}\ninit-bond-dim = {}\nmax-bond-dims = {}\n\
             gamma-site-factor = {}\nt-final = {}\ntau-grid = {}\nmode = {}\noutput-dir = {}\nworkers = {}\n",
            self.n_sites,
            format_real(self.coupling),
            format_real(self.delta),
            self.seed,
            self.init_bond_dim,
            counts(&self.max_bond_dims),
            format_real(self.gamma_site_factor),
            format_real(self.t_final),
            reals(&self.tau_grid),
            self.mode,
            self.output_dir.display(),
            self.workers,
        )
    }

    /// File stem identifying the dense reference `O(t_final)`.
    pub fn reference_key(&self) -> String {
        format!(
            "reference-n{}-j{}-delta{}-seed{}-t{}-init{}",
            self.n_sites,
            format_real(self.coupling),
            format_real(self.delta),
            self.seed,
            format_real(self.t_final),
            self.init_bond_dim
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ConfigPatch::default().resolve().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.steps().iter().map(|s| s.1).collect::<Vec<_>>(), vec![4, 8, 16, 32, 64]);
        assert_eq!(cfg.initial_bond_dims(), vec![1, 2, 2, 2, 2, 2, 1]);
    }

    #[test]
    fn reals_and_fractions() {
        assert_eq!(parse_real("1/8").unwrap(), 0.125);
        assert_eq!(parse_real(" 1e-3 ").unwrap(), 1e-3);
        assert!(parse_real("one").is_err());
        assert!(parse_real("1/0").is_err());
        assert_eq!(parse_count_list("(1, 9, 81, 9, 1)").unwrap(), vec![1, 9, 81, 9, 1]);
    }

    #[test]
    fn key_values_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.gamma_site_factor = 10f64.powf(-2.5);
        cfg.seed = 17;
        cfg.mode = Mode::Augmented;
        let back = ConfigPatch::parse(&cfg.to_key_values()).unwrap().resolve().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn command_line_lists() {
        use clap::Parser;
        #[derive(Parser)]
        struct Cli {
            #[command(flatten)]
            patch: ConfigPatch,
        }
        let cli = Cli::try_parse_from(["x", "--max-bond-dims", "1,9,20,9,1", "--tau-grid", "1/32,1/64", "--mode", "standard"])
            .unwrap();
        assert_eq!(cli.patch.max_bond_dims, Some(vec![1, 9, 20, 9, 1]));
        assert_eq!(cli.patch.tau_grid, Some(vec![1.0 / 32.0, 1.0 / 64.0]));
        assert_eq!(cli.patch.mode, Some(Mode::Standard));
    }

    #[test]
    fn later_layer_wins() {
        let file = ConfigPatch::parse("sites = 4\nseed = 3 # comment\n").unwrap();
        let cli = ConfigPatch { seed: Some(9), ..Default::default() };
        let cfg = file.merge(cli).resolve().unwrap();
        assert_eq!(cfg.n_sites, 4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.max_bond_dims, vec![1, 9, 81, 9, 1]);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = |text: &str| ConfigPatch::parse(text).and_then(ConfigPatch::resolve).is_err();
        assert!(bad("colour = red"));
        assert!(bad("sites = 7"));
        assert!(bad("tau-grid = 0.05"));
        assert!(bad("max-bond-dims = 2,9,81,81,81,9,1"));
        assert!(bad("max-bond-dims = 1,9,81,81,81,81,1"));
        assert!(bad("init-bond-dim = 5"));
        assert!(bad("gamma-site-factor = -1"));
        assert!(bad("workers = 0"));
        assert!(bad("mode = sideways"));
        assert!(!bad("init-bond-dim = 5\nmode = standard"));
    }
}
