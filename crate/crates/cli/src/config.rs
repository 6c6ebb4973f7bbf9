//! TOML run configuration. Energies in meV, times in ps, temperatures in K,
//! pulse areas in multiples of π.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use mwm_core::signals::TimeRule;
use mwm_core::{EnsembleSpec, Medium, QuadConfig, SpectralDensity, TimeIntegration};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every random draw (synthetic noise).
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` overrides it.
    pub out: Option<PathBuf>,
    pub reservoir: Option<ReservoirConfig>,
    pub medium: Option<MediumConfig>,
    #[serde(default)]
    pub quadrature: QuadSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    pub gamma: Option<GammaSection>,
    pub signal: Option<SignalSection>,
    pub sweep: Option<SweepSection>,
    pub oracle: Option<OracleSection>,
    pub fit: Option<FitSection>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReservoirConfig {
    Ohmic {
        alpha: f64,
        omega_c: f64,
    },
    GaussianOhmic {
        alpha: f64,
        omega_c: f64,
        alpha_p: f64,
        omega_p: f64,
        gamma_p: f64,
    },
    /// Coupling `g` in meV; the density weight is g².
    SingleMode {
        g: f64,
        omega_p: f64,
    },
    /// CSV with columns `omega_meV,I_meV`.
    Tabulated {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub temperature: f64,
    #[serde(default)]
    pub delta_b: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub omega_max: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_panels: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    Adaptive,
    Envelope,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub rule: Option<RuleName>,
    pub upper: Option<f64>,
    pub rel_tol: Option<f64>,
    pub panel: Option<f64>,
    pub horizon: Option<f64>,
}

/// A list of values, `{start, stop, count}` (inclusive linspace) or
/// `{start, stop, step}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Count { start: f64, stop: f64, count: usize },
    Step { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self, field: &str) -> CliResult<Vec<f64>> {
        let v = match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Count { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start],
                n => (0..n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
            Grid::Step { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(CliError::config(field, "need step > 0 and stop >= start"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|k| start + step * k as f64).collect()
            }
        };
        if v.is_empty() {
            return Err(CliError::config(field, "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config(field, "grid values must be finite"));
        }
        Ok(v)
    }
}

fn half_pi3() -> [f64; 3] {
    [0.5; 3]
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub t: Grid,
    /// Each entry lists the π-train pulse times t₀, t₁, …, t_M.
    #[serde(default)]
    pub pi_trains: Vec<Vec<f64>>,
    pub weak_times: Option<[f64; 3]>,
    /// Sign triples such as "-+-".
    #[serde(default)]
    pub weak_coeffs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    #[default]
    PiTrain,
    Weak,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default)]
    pub kind: SignalKind,
    /// Absolute observation times; points before the signal starts are dropped.
    pub t: Grid,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "half")]
    pub theta0: f64,
    /// π-pulse counts.
    #[serde(default)]
    pub m: Vec<usize>,
    /// Spacing Δ of the π train.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Optional last interval Δ_{M−1}; the others stay Δ.
    #[serde(default)]
    pub last_delta: Vec<f64>,
    pub times: Option<[f64; 3]>,
    /// Overrides t₁ of `times`, one curve set per value.
    #[serde(default)]
    pub t1: Vec<f64>,
    #[serde(default = "half_pi3")]
    pub thetas: [f64; 3],
    #[serde(default = "default_orders")]
    pub orders: Vec<String>,
}

fn default_orders() -> Vec<String> {
    vec!["4wm".into(), "6wm".into()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub t0: f64,
    pub t2: Vec<f64>,
    /// Defaults to the medium temperature.
    #[serde(default)]
    pub temperatures: Vec<f64>,
    /// Defaults to the medium δ_B.
    #[serde(default)]
    pub delta_b: Vec<f64>,
    #[serde(default = "half_pi3")]
    pub thetas: [f64; 3],
    /// Absolute t₁ values; each must lie in (t₀, t₂).
    pub t1: Option<Grid>,
    /// Alternatively, this many equally spaced interior points of (t₀, t₂).
    pub t1_count: Option<usize>,
}

fn oracle_omega_p() -> f64 {
    8.0
}
fn oracle_g() -> f64 {
    0.6
}
fn oracle_temps() -> Vec<f64> {
    vec![0.0, 10.0, 100.0]
}
fn oracle_times() -> [f64; 3] {
    [0.0, 0.13, 0.31]
}
fn oracle_t() -> f64 {
    0.52
}
fn oracle_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "oracle_omega_p")]
    pub omega_p: f64,
    #[serde(default = "oracle_g")]
    pub g: f64,
    #[serde(default = "oracle_temps")]
    pub temperatures: Vec<f64>,
    /// Fock cutoff; automatic when absent.
    pub n_cut: Option<usize>,
    #[serde(default = "oracle_times")]
    pub times: [f64; 3],
    #[serde(default = "half_pi3")]
    pub thetas: [f64; 3],
    #[serde(default = "oracle_t")]
    pub t: f64,
    #[serde(default = "oracle_tol")]
    pub tolerance: f64,
    /// Test hook: flips the sign of every γ phase in the analytic expansion.
    #[serde(default)]
    pub negate_gamma_phases: bool,
}

fn starts() -> usize {
    8
}
fn max_iterations() -> usize {
    100
}
fn fd_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub free: Vec<FreeParamConfig>,
    pub data: Vec<DataConfig>,
    #[serde(default = "starts")]
    pub starts: usize,
    #[serde(default = "max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "fd_step")]
    pub fd_step: f64,
    /// Relative Gaussian noise added to the loaded data, drawn from `seed`.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParamConfig {
    pub param: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Integrated,
    TimeResolved,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub file: PathBuf,
    pub kind: DataKind,
    /// "4wm", "6wm", "pi_train" or "free_induction".
    pub observable: String,
    /// Intensity column; the first column is the abscissa.
    #[serde(default = "intensity_column")]
    pub column: String,
    /// Pulse times; for integrated sweeps t₁ is ignored, so [t₀, t₂] also works.
    pub times: Vec<f64>,
    /// Pulse areas over π; defaults to ½ for every pulse (π for π-train controls).
    pub thetas: Option<Vec<f64>>,
    pub weight: Option<f64>,
}

fn intensity_column() -> String {
    "intensity".into()
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> CliResult<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks everything that can be checked without running a command.
    pub fn validate(&self) -> CliResult<()> {
        if let Some(r) = &self.reservoir {
            self.reservoir_density(r)?;
        }
        if let Some(m) = &self.medium {
            if !(m.temperature >= 0.0 && m.temperature.is_finite()) {
                return Err(CliError::config("medium.temperature", "must be finite and >= 0"));
            }
            EnsembleSpec::new(m.delta_b).map_err(|e| CliError::core_config("medium", e))?;
        }
        self.quad()?;
        self.time_integration(TimeRule::Adaptive)?;
        if let Some(g) = &self.gamma {
            g.t.values("gamma.t")?;
        }
        if let Some(s) = &self.signal {
            s.t.values("signal.t")?;
        }
        if let Some(s) = &self.sweep {
            if s.t2.is_empty() {
                return Err(CliError::config("sweep.t2", "grid is empty"));
            }
            match (&s.t1, s.t1_count) {
                (Some(g), None) => {
                    g.values("sweep.t1")?;
                }
                (None, Some(n)) if n > 0 => {}
                _ => return Err(CliError::config("sweep", "give exactly one of t1 or t1_count > 0")),
            }
        }
        if let Some(f) = &self.fit {
            for d in &f.data {
                let p = self.resolve(&d.file);
                if !p.exists() {
                    return Err(CliError::config("fit.data.file", format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    fn reservoir_density(&self, r: &ReservoirConfig) -> CliResult<SpectralDensity<f64>> {
        let sd = match *r {
            ReservoirConfig::Ohmic { alpha, omega_c } => SpectralDensity::ohmic(alpha, omega_c),
            ReservoirConfig::GaussianOhmic {
                alpha,
                omega_c,
                alpha_p,
                omega_p,
                gamma_p,
            } => SpectralDensity::gaussian_ohmic(alpha, omega_c, alpha_p, omega_p, gamma_p),
            ReservoirConfig::SingleMode { g, omega_p } => SpectralDensity::single_mode(g * g, omega_p),
            ReservoirConfig::Tabulated { ref file } => {
                let p = self.resolve(file);
                if !p.exists() {
                    return Err(CliError::config(
                        "reservoir.file",
                        format!("{} does not exist", p.display()),
                    ));
                }
                mwm_core::csvio::read_tabulated_spectrum(&p)
            }
        };
        sd.map_err(|e| CliError::core_config("reservoir", e))
    }

    pub fn reservoir(&self) -> CliResult<SpectralDensity<f64>> {
        let r = self
            .reservoir
            .as_ref()
            .ok_or_else(|| CliError::config("reservoir", "section required"))?;
        self.reservoir_density(r)
    }

    pub fn medium_section(&self) -> CliResult<MediumConfig> {
        self.medium.ok_or_else(|| CliError::config("medium", "section required"))
    }

    pub fn quad(&self) -> CliResult<QuadConfig<f64>> {
        let d = QuadConfig::default();
        let q = QuadConfig {
            omega_max: self.quadrature.omega_max.or(d.omega_max),
            rel_tol: self.quadrature.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.quadrature.abs_tol.unwrap_or(d.abs_tol),
            max_panels: self.quadrature.max_panels.unwrap_or(d.max_panels),
        };
        q.validate().map_err(|e| CliError::core_config("quadrature", e))?;
        Ok(q)
    }

    /// Time-integration settings; `default_rule` applies when the config names none.
    pub fn time_integration(&self, default_rule: TimeRule) -> CliResult<TimeIntegration<f64>> {
        let d = TimeIntegration::default();
        let s = &self.integration;
        let ti = TimeIntegration {
            upper: s.upper.or(d.upper),
            rel_tol: s.rel_tol.unwrap_or(d.rel_tol),
            panel: s.panel.unwrap_or(d.panel),
            horizon: s.horizon.unwrap_or(d.horizon),
            rule: match s.rule {
                Some(RuleName::Adaptive) => TimeRule::Adaptive,
                Some(RuleName::Envelope) => TimeRule::Envelope,
                None => default_rule,
            },
        };
        if !(ti.rel_tol > 0.0 && ti.panel > 0.0 && ti.horizon > 0.0) {
            return Err(CliError::config(
                "integration",
                "rel_tol, panel and horizon must be positive",
            ));
        }
        Ok(ti)
    }

    pub fn medium_with(&self, temperature: f64, delta_b: f64) -> CliResult<Medium<f64>> {
        let ensemble = EnsembleSpec::new(delta_b).map_err(|e| CliError::core_config("delta_b", e))?;
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(CliError::config("temperature", "must be finite and >= 0"));
        }
        Ok(Medium::new(self.reservoir()?, temperature, ensemble).with_quad(self.quad()?))
    }

    pub fn medium(&self) -> CliResult<Medium<f64>> {
        let m = self.medium_section()?;
        self.medium_with(m.temperature, m.delta_b)
    }
}
