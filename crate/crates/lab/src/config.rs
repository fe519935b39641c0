//! Experiment configuration, read from TOML.
//!
//! Top-level keys: `command`, `seed`, `out`, `format`, `threads`,
//! `tolerance`. Each command reads its own table, named after the command
//! (`[khintchine-scan]`, `[holder-scan]`, ...). Every key has a default, so
//! an empty file is a valid configuration. Exponent grids accept `inf`.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nck_core::holder::{ExponentProfile, HolderExponent};
use nck_core::random_systems::SystemKind;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KhintchineScan,
    HolderScan,
    TripleNorm,
    ExtrapolationDiag,
    MaureyFit,
    MazurScan,
    KernelsSelftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KhintchineScan => "khintchine-scan",
            Command::HolderScan => "holder-scan",
            Command::TripleNorm => "triple-norm",
            Command::ExtrapolationDiag => "extrapolation-diag",
            Command::MaureyFit => "maurey-fit",
            Command::MazurScan => "mazur-scan",
            Command::KernelsSelftest => "kernels-selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    General,
    Commutative,
}

fn reals(values: &[f64]) -> Vec<Real> {
    values.iter().copied().map(Real).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct KhintchineScanConfig {
    pub q: Vec<Real>,
    pub dims: Vec<usize>,
    pub n_terms: Vec<usize>,
    pub instances: u64,
    pub restarts: usize,
}

impl Default for KhintchineScanConfig {
    fn default() -> Self {
        Self { q: reals(&[0.5, 1.0, 2.0]), dims: vec![2, 4], n_terms: vec![3], instances: 40, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct HolderScanConfig {
    pub p: Vec<Real>,
    pub s: Vec<Real>,
    pub theta: Vec<Real>,
    /// `R = r_factor * p`.
    pub r_factor: Real,
    pub gamma: Real,
    pub dims: Vec<usize>,
    pub instances: u64,
    pub exponent: HolderExponent,
    pub family: Family,
}

impl Default for HolderScanConfig {
    fn default() -> Self {
        Self {
            p: reals(&[0.5]),
            s: reals(&[2.0, f64::INFINITY]),
            theta: reals(&[0.25, 0.5, 0.75]),
            r_factor: Real(0.9),
            gamma: Real(2.0),
            dims: vec![2, 4],
            instances: 200,
            exponent: HolderExponent::Weak,
            family: Family::General,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TripleNormConfig {
    pub q: Vec<Real>,
    pub dims: Vec<usize>,
    pub n_terms: Vec<usize>,
    pub instances: u64,
    pub restarts: usize,
}

impl Default for TripleNormConfig {
    fn default() -> Self {
        Self { q: reals(&[0.5, 1.0, 2.0]), dims: vec![2, 3], n_terms: vec![2, 3], instances: 10, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExtrapolationDiagConfig {
    pub p: Vec<Real>,
    pub q: Vec<Real>,
    pub dims: Vec<usize>,
    pub n_terms: Vec<usize>,
    pub instances: u64,
    pub system: SystemKind,
    /// Matrix size of the Haar unitaries when `system = "haar_unitary"`; 1 for scalar systems.
    pub model_dim: usize,
    pub samples: u64,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for ExtrapolationDiagConfig {
    fn default() -> Self {
        Self {
            p: reals(&[0.5]),
            q: reals(&[1.0]),
            dims: vec![2],
            n_terms: vec![2],
            instances: 2,
            system: SystemKind::Rademacher,
            model_dim: 1,
            samples: 400,
            restarts: 2,
            max_iterations: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MaureyFitConfig {
    pub p: Vec<Real>,
    pub dims: Vec<usize>,
    /// Dimensions of the Hilbert space domain.
    pub m: Vec<usize>,
    pub instances: u64,
    pub pool_size: usize,
    pub iterations: usize,
    /// Random unit vectors used to audit each certificate.
    pub audit_samples: u64,
}

impl Default for MaureyFitConfig {
    fn default() -> Self {
        Self { p: reals(&[0.5, 0.75]), dims: vec![3], m: vec![2, 3], instances: 3, pool_size: 10, iterations: 30, audit_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MazurScanConfig {
    /// `(p, q)` pairs for the Hölder exponent regression.
    pub pairs: Vec<[Real; 2]>,
    pub dim: usize,
    pub pair_count: usize,
    pub closeness_scale: Real,
    /// Instances for the squares and Kosaki scans.
    pub instances: u64,
    pub squares_p: Vec<Real>,
    pub kosaki_p: Vec<Real>,
}

impl Default for MazurScanConfig {
    fn default() -> Self {
        let pair = |p: f64, q: f64| [Real(p), Real(q)];
        Self {
            pairs: vec![pair(1.0, 1.0), pair(1.0, 2.0), pair(2.0, 1.0), pair(2.0, 2.0), pair(0.5, 1.0)],
            dim: 4,
            pair_count: 32,
            closeness_scale: Real(1.0),
            instances: 500,
            squares_p: reals(&[0.5, 1.0]),
            kosaki_p: reals(&[0.25, 0.5, 0.75]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct KernelsSelftestConfig {
    pub omega: Vec<Real>,
    pub a: Vec<Real>,
    pub theta: Vec<Real>,
}

impl Default for KernelsSelftestConfig {
    fn default() -> Self {
        Self {
            omega: reals(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
            a: reals(&[0.1, 0.3, 1.0]),
            theta: reals(&[0.25, 0.5, 0.75]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    /// Absolute slack when flagging inequality violations.
    pub tolerance: Real,
    pub khintchine_scan: KhintchineScanConfig,
    pub holder_scan: HolderScanConfig,
    pub triple_norm: TripleNormConfig,
    pub extrapolation_diag: ExtrapolationDiagConfig,
    pub maurey_fit: MaureyFitConfig,
    pub mazur_scan: MazurScanConfig,
    pub kernels_selftest: KernelsSelftestConfig,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: DEFAULT_SEED,
            out: None,
            format: Format::Json,
            threads: None,
            tolerance: Real(DEFAULT_TOLERANCE),
            khintchine_scan: KhintchineScanConfig::default(),
            holder_scan: HolderScanConfig::default(),
            triple_norm: TripleNormConfig::default(),
            extrapolation_diag: ExtrapolationDiagConfig::default(),
            maurey_fit: MaureyFitConfig::default(),
            mazur_scan: MazurScanConfig::default(),
            kernels_selftest: KernelsSelftestConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::ConfigParse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    /// Checks the section of `command` and the shared keys.
    pub fn validate(&self, command: Command) -> Result<(), LabError> {
        let tol = self.tolerance.get();
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(LabError::config("tolerance", format!("must be finite and nonnegative, got {tol}")));
        }
        if self.threads == Some(0) {
            return Err(LabError::config("threads", "must be at least 1"));
        }
        match command {
            Command::KhintchineScan => {
                let c = &self.khintchine_scan;
                let f = "khintchine-scan";
                exponents(f, "q", &c.q, false)?;
                positive_list(f, "dims", &c.dims)?;
                positive_list(f, "n-terms", &c.n_terms)?;
                if let Some(&n) = c.n_terms.iter().find(|&&n| n > nck_core::random_systems::MAX_ENUMERATION_TERMS) {
                    return Err(LabError::config(format!("{f}.n-terms"), format!("{n} exceeds the exact enumeration budget")));
                }
                positive(f, "instances", c.instances)?;
                positive(f, "restarts", c.restarts as u64)?;
            }
            Command::HolderScan => {
                self.holder_profiles()?;
                let c = &self.holder_scan;
                positive_list("holder-scan", "dims", &c.dims)?;
                positive("holder-scan", "instances", c.instances)?;
            }
            Command::TripleNorm => {
                let c = &self.triple_norm;
                let f = "triple-norm";
                exponents(f, "q", &c.q, false)?;
                positive_list(f, "dims", &c.dims)?;
                positive_list(f, "n-terms", &c.n_terms)?;
                positive(f, "instances", c.instances)?;
                positive(f, "restarts", c.restarts as u64)?;
            }
            Command::ExtrapolationDiag => {
                let c = &self.extrapolation_diag;
                let f = "extrapolation-diag";
                exponents(f, "p", &c.p, false)?;
                exponents(f, "q", &c.q, false)?;
                for p in &c.p {
                    for q in &c.q {
                        if !(p.get() < q.get() && q.get() < 2.0) {
                            return Err(LabError::config(
                                format!("{f}.q"),
                                format!("every pair needs p < q < 2, got p = {}, q = {}", p.get(), q.get()),
                            ));
                        }
                    }
                }
                positive_list(f, "dims", &c.dims)?;
                positive_list(f, "n-terms", &c.n_terms)?;
                positive(f, "instances", c.instances)?;
                positive(f, "samples", c.samples)?;
                positive(f, "model-dim", c.model_dim as u64)?;
                positive(f, "restarts", c.restarts as u64)?;
            }
            Command::MaureyFit => {
                let c = &self.maurey_fit;
                let f = "maurey-fit";
                exponents(f, "p", &c.p, false)?;
                if let Some(p) = c.p.iter().find(|p| p.get() >= 2.0) {
                    return Err(LabError::config(format!("{f}.p"), format!("must be below 2, got {}", p.get())));
                }
                positive_list(f, "dims", &c.dims)?;
                positive_list(f, "m", &c.m)?;
                positive(f, "instances", c.instances)?;
                positive(f, "pool-size", c.pool_size as u64)?;
            }
            Command::MazurScan => {
                let c = &self.mazur_scan;
                let f = "mazur-scan";
                for pair in &c.pairs {
                    exponents(f, "pairs", pair, false)?;
                }
                positive(f, "dim", c.dim as u64)?;
                if c.pair_count < 16 {
                    return Err(LabError::config(format!("{f}.pair-count"), format!("must be at least 16, got {}", c.pair_count)));
                }
                if !(c.closeness_scale.get() > 0.0 && c.closeness_scale.get().is_finite()) {
                    return Err(LabError::config(format!("{f}.closeness-scale"), "must be positive and finite"));
                }
                exponents(f, "squares-p", &c.squares_p, false)?;
                exponents(f, "kosaki-p", &c.kosaki_p, false)?;
                if let Some(p) = c.kosaki_p.iter().find(|p| p.get() >= 1.0) {
                    return Err(LabError::config(format!("{f}.kosaki-p"), format!("must lie in (0, 1), got {}", p.get())));
                }
            }
            Command::KernelsSelftest => {
                let c = &self.kernels_selftest;
                let f = "kernels-selftest";
                open_unit(f, "omega", &c.omega)?;
                open_unit(f, "theta", &c.theta)?;
                if c.a.iter().any(|a| !a.get().is_finite()) {
                    return Err(LabError::config(format!("{f}.a"), "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Profiles of the holder-scan grid, in `(p, s, theta)` order.
    pub fn holder_profiles(&self) -> Result<Vec<ExponentProfile>, LabError> {
        let c = &self.holder_scan;
        let f = "holder-scan";
        exponents(f, "p", &c.p, false)?;
        exponents(f, "s", &c.s, true)?;
        open_unit(f, "theta", &c.theta)?;
        if !(c.r_factor.get() > 0.0 && c.r_factor.get() < 1.0) {
            return Err(LabError::config(format!("{f}.r-factor"), format!("must lie in (0, 1), got {}", c.r_factor.get())));
        }
        let mut grid = Vec::new();
        for p in &c.p {
            for s in &c.s {
                for theta in &c.theta {
                    let r = c.r_factor.get() * p.get();
                    let profile = ExponentProfile::new(p.get(), s.get(), theta.get(), r, c.gamma.get())
                        .map_err(|e| LabError::config(f, format!("p = {}, s = {}, theta = {}: {e}", p.get(), s.get(), theta.get())))?;
                    grid.push(profile);
                }
            }
        }
        Ok(grid)
    }
}

fn exponents(section: &str, key: &str, values: &[Real], allow_infinite: bool) -> Result<(), LabError> {
    if values.is_empty() {
        return Err(LabError::config(format!("{section}.{key}"), "must not be empty"));
    }
    for v in values {
        let v = v.get();
        if !(v > 0.0) || (v.is_infinite() && !allow_infinite) {
            return Err(LabError::config(format!("{section}.{key}"), format!("exponents must be positive{}, got {v}", if allow_infinite { "" } else { " and finite" })));
        }
    }
    Ok(())
}

fn open_unit(section: &str, key: &str, values: &[Real]) -> Result<(), LabError> {
    if values.is_empty() {
        return Err(LabError::config(format!("{section}.{key}"), "must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.get() > 0.0 && v.get() < 1.0)) {
        return Err(LabError::config(format!("{section}.{key}"), format!("values must lie in (0, 1), got {}", v.get())));
    }
    Ok(())
}

fn positive_list(section: &str, key: &str, values: &[usize]) -> Result<(), LabError> {
    if values.is_empty() || values.contains(&0) {
        return Err(LabError::config(format!("{section}.{key}"), "must be a nonempty list of positive integers"));
    }
    Ok(())
}

fn positive(section: &str, key: &str, value: u64) -> Result<(), LabError> {
    if value == 0 {
        return Err(LabError::config(format!("{section}.{key}"), "must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let config = ExperimentConfig::from_toml("", Path::new("x.toml")).unwrap();
        assert_eq!(config, ExperimentConfig::default());
    }

    #[test]
    fn sections_and_infinity_parse() {
        let text = "seed = 7\n[holder-scan]\ns = [inf]\ntheta = [0.5]\nexponent = \"classical\"\n";
        let config = ExperimentConfig::from_toml(text, Path::new("x.toml")).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.holder_scan.s, vec![Real(f64::INFINITY)]);
        assert_eq!(config.holder_scan.exponent, HolderExponent::Classical);
        config.validate(Command::HolderScan).unwrap();
    }

    #[test]
    fn theta_at_one_is_rejected_with_its_field() {
        let mut config = ExperimentConfig::default();
        config.holder_scan.theta = vec![Real(0.5), Real(1.0)];
        match config.validate(Command::HolderScan) {
            Err(LabError::ConfigInvalid { field, .. }) => assert_eq!(field, "holder-scan.theta"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[triple-norm]\nrestart = 3\n", Path::new("x.toml")).is_err());
    }
}
