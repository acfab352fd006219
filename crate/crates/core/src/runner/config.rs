use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inviscid::shock_time;
use crate::torus::{ScalarField, TorusGrid, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Estimators,
    BurgersDiffuse,
    ReynoldsEuler,
    MeanfieldNs,
    Invariants,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Estimators,
        Scenario::BurgersDiffuse,
        Scenario::ReynoldsEuler,
        Scenario::MeanfieldNs,
        Scenario::Invariants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Estimators => "estimators",
            Scenario::BurgersDiffuse => "burgers-diffuse",
            Scenario::ReynoldsEuler => "reynolds-euler",
            Scenario::MeanfieldNs => "meanfield-ns",
            Scenario::Invariants => "invariants",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Scenario::Estimators => "forward/backward mean-derivative estimators on constant-drift diffusions (1D)",
            Scenario::BurgersDiffuse => "Hopf flow, heat-kernel expectation, Burgers residual in both orientations, Cole–Hopf comparison (1D)",
            Scenario::ReynoldsEuler => "Euler flow, expectation field, raw and standard Reynolds residuals, stress decomposition (2D)",
            Scenario::MeanfieldNs => "coupled mean-field ensemble, Navier–Stokes residual, spectral oracle comparison (2D)",
            Scenario::Invariants => "structural invariants: projection, shifts, smoothing, degenerations, determinism",
        }
    }

    /// Spatial dimension the scenario runs in.
    pub fn dim(self) -> usize {
        match self {
            Scenario::Estimators | Scenario::BurgersDiffuse => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scenario `{s}`")))
    }
}

/// Named initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: Vec<f64>,
    },
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
    },
    TaylorGreen {
        #[serde(default = "one")]
        amplitude: f64,
    },
    RandomBand {
        kmax: usize,
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    /// Samples the preset. In 2D every preset is divergence-free; `sine`
    /// is the shear `(A sin 2πy, 0)`.
    pub fn build(&self, grid: TorusGrid) -> Result<VectorField> {
        let dim = grid.dim();
        let field = match self {
            InitialData::Constant { value } => {
                if value.len() != dim {
                    return Err(Error::config(format!(
                        "constant preset needs {dim} components, got {}",
                        value.len()
                    )));
                }
                VectorField::constant(grid, value)
            }
            InitialData::Sine { amplitude } => {
                let a = *amplitude;
                if dim == 1 {
                    VectorField::from_fn(grid, |p| [a * (2.0 * PI * p[0]).sin(), 0.0])
                } else {
                    VectorField::from_fn(grid, |p| [a * (2.0 * PI * p[1]).sin(), 0.0])
                }
            }
            InitialData::TaylorGreen { amplitude } => {
                if dim != 2 {
                    return Err(Error::config("taylor_green is a 2D preset"));
                }
                let a = *amplitude;
                VectorField::from_fn(grid, |p| {
                    let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
                    [a * x.sin() * y.cos(), -a * x.cos() * y.sin()]
                })
            }
            InitialData::RandomBand { kmax, seed, amplitude } => random_band(grid, *kmax, *seed, *amplitude)?,
        };
        if dim == 2 {
            field.assert_divfree()
        } else {
            Ok(field)
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialData::Constant { value } => format!("constant{value:?}"),
            InitialData::Sine { amplitude } => format!("sine(A={amplitude})"),
            InitialData::TaylorGreen { amplitude } => format!("taylor_green(A={amplitude})"),
            InitialData::RandomBand { kmax, seed, amplitude } => {
                format!("random_band(kmax={kmax}, seed={seed}, A={amplitude})")
            }
        }
    }
}

/// Random Fourier data with modes `0 < max_a |k_a| <= kmax` and `max |u| = amplitude`;
/// in 2D built from a stream function.
pub fn random_band(grid: TorusGrid, kmax: usize, seed: u64, amplitude: f64) -> Result<VectorField> {
    if kmax == 0 || kmax as i64 > grid.dealias_cutoff() {
        return Err(Error::config(format!(
            "random_band kmax = {kmax} must lie in 1..={}",
            grid.dealias_cutoff()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = kmax as i64;
    let mut modes = Vec::new();
    if grid.dim() == 1 {
        for a in 1..=k {
            modes.push((a, 0, rng.gen_range(-1.0..1.0) / a as f64, rng.gen_range(0.0..2.0 * PI)));
        }
        let raw = VectorField::from_fn(grid, |p| {
            let v = modes.iter().map(|(a, _, c, ph)| c * (2.0 * PI * *a as f64 * p[0] + ph).sin()).sum();
            [v, 0.0]
        });
        let s = amplitude / raw.max_abs().max(f64::MIN_POSITIVE);
        return Ok(raw.scale(s));
    }
    for a in -k..=k {
        for b in 0..=k {
            // one representative per ±k pair
            if b == 0 && a <= 0 {
                continue;
            }
            let norm = ((a * a + b * b) as f64).sqrt();
            modes.push((a, b, rng.gen_range(-1.0..1.0) / (norm * norm), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    let psi = ScalarField::from_fn(grid, |p| {
        modes
            .iter()
            .map(|(a, b, c, ph)| c * (2.0 * PI * (*a as f64 * p[0] + *b as f64 * p[1]) + ph).sin())
            .sum()
    });
    let raw = VectorField::from_stream_function(&psi)?;
    let s = amplitude / raw.max_abs().max(f64::MIN_POSITIVE);
    Ok(raw.scale(s).assert_divfree()?)
}

/// Scenario-specific knobs; all optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Times at which residuals are reported.
    pub report_times: Option<Vec<f64>>,
    /// Half-width, in steps, of the Navier–Stokes residual's time difference.
    pub residual_lag: Option<usize>,
    /// Ensemble sizes compared by `meanfield-ns`.
    pub path_sweep: Option<Vec<usize>>,
    /// Independent ensembles per sweep entry.
    pub replicates: Option<Vec<usize>>,
    /// Refinement levels (each halves `dt` and doubles the grid) for `burgers-diffuse`.
    pub refinements: Option<usize>,
    /// Constant drift for `estimators`.
    pub drift: Option<f64>,
    /// Regression bins for `estimators`.
    pub bins: Option<usize>,
    /// Difference lag, in steps, for `estimators`.
    pub lag: Option<usize>,
    /// Ensemble sizes for the smoothing rate check in `invariants`.
    pub smoothing_sweep: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: String,
    grid: usize,
    horizon: f64,
    dt: f64,
    sigma: Option<f64>,
    nu: Option<f64>,
    #[serde(default = "default_paths")]
    paths: usize,
    #[serde(default)]
    seed: u64,
    output: Option<PathBuf>,
    initial: InitialData,
    #[serde(default)]
    options: Options,
}

fn default_paths() -> usize {
    1
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Points per axis.
    pub grid: usize,
    pub horizon: f64,
    pub dt: f64,
    pub sigma: f64,
    /// Always `σ²/2`.
    pub nu: f64,
    pub paths: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub initial: InitialData,
    pub options: Options,
    /// Hex SHA-256 of the canonical config text (excluding `output`).
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let scenario: Scenario = raw.scenario.parse()?;
        let (sigma, nu) = match (raw.sigma, raw.nu) {
            (Some(s), None) if s >= 0.0 && s.is_finite() => (s, 0.5 * s * s),
            (None, Some(n)) if n >= 0.0 && n.is_finite() => ((2.0 * n).sqrt(), n),
            (Some(_), Some(_)) => return Err(Error::config("give exactly one of sigma and nu (nu = sigma^2/2)")),
            (None, None) => return Err(Error::config("one of sigma or nu is required")),
            _ => return Err(Error::config("sigma and nu must be finite and non-negative")),
        };
        let mut cfg = ExperimentConfig {
            scenario,
            grid: raw.grid,
            horizon: raw.horizon,
            dt: raw.dt,
            sigma,
            nu,
            paths: raw.paths,
            seed: raw.seed,
            output: raw.output,
            initial: raw.initial,
            options: raw.options,
            hash: String::new(),
        };
        cfg.hash = cfg.compute_hash();
        cfg.validate()?;
        Ok(cfg)
    }

    fn compute_hash(&self) -> String {
        let mut canon = self.clone();
        canon.output = None;
        canon.hash = String::new();
        let text = serde_json::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Replaces the seed (e.g. from the command line) and rehashes.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.hash = self.compute_hash();
        self
    }

    pub fn short_hash(&self) -> &str {
        &self.hash[..12]
    }

    pub fn torus(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.scenario.dim(), self.grid)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Checks every scenario precondition that does not need a solve.
    pub fn validate(&self) -> Result<()> {
        if self.grid < 4 || self.grid % 2 != 0 {
            return Err(Error::config(format!("grid must be an even size >= 4, got {}", self.grid)));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::config("dt and horizon must be positive"));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::config(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        if self.paths == 0 {
            return Err(Error::config("paths must be positive"));
        }
        let grid = self.torus()?;
        let u0 = self.initial.build(grid)?;
        let o = &self.options;
        match self.scenario {
            Scenario::Estimators => {
                if self.paths < 2 {
                    return Err(Error::config("estimators need at least 2 paths"));
                }
            }
            Scenario::BurgersDiffuse => {
                let shock = shock_time(&u0);
                if self.horizon >= shock {
                    return Err(Error::config(format!(
                        "horizon {} is not before the shock time {shock:.4}",
                        self.horizon
                    )));
                }
                let levels = o.refinements.unwrap_or(1);
                if levels == 0 {
                    return Err(Error::config("refinements must be >= 1"));
                }
                if self.steps() < 5 {
                    return Err(Error::config("burgers-diffuse needs at least 5 steps"));
                }
            }
            Scenario::ReynoldsEuler => {
                if self.paths < 2 {
                    return Err(Error::config("the Reynolds stress estimator needs at least 2 paths"));
                }
                self.check_report_times(2)?;
            }
            Scenario::MeanfieldNs => {
                let sweep = self.path_sweep();
                if sweep.iter().any(|&m| m < 2) {
                    return Err(Error::config(
                        "meanfield-ns needs M >= 2 in every ensemble: the stress estimator is undefined for M = 1",
                    ));
                }
                let reps = self.replicates();
                if reps.len() != sweep.len() || reps.contains(&0) {
                    return Err(Error::config("replicates must list a positive count per path_sweep entry"));
                }
                self.check_report_times(self.residual_lag())?;
                if !(self.sigma > 0.0) {
                    return Err(Error::config("meanfield-ns needs sigma > 0"));
                }
            }
            Scenario::Invariants => {
                if self.paths < 2 {
                    return Err(Error::config("invariants need at least 2 paths"));
                }
            }
        }
        Ok(())
    }

    fn check_report_times(&self, margin: usize) -> Result<()> {
        for t in self.report_times() {
            let j = (t / self.dt).round();
            if (j * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
                return Err(Error::config(format!("report time {t} is not a multiple of dt")));
            }
            let j = j as usize;
            if j < margin || j + margin > self.steps() {
                return Err(Error::config(format!(
                    "report time {t} needs {margin} steps on both sides inside [0, {}]",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    /// Requested report times, or the quarter points of the horizon snapped to the step grid.
    pub fn report_times(&self) -> Vec<f64> {
        self.options.report_times.clone().unwrap_or_else(|| {
            let n = self.steps();
            [n / 4, n / 2, 3 * n / 4].iter().map(|&j| j as f64 * self.dt).collect()
        })
    }

    pub fn residual_lag(&self) -> usize {
        self.options.residual_lag.unwrap_or_else(|| (self.steps() / 10).max(1))
    }

    pub fn path_sweep(&self) -> Vec<usize> {
        self.options.path_sweep.clone().unwrap_or_else(|| vec![self.paths])
    }

    pub fn replicates(&self) -> Vec<usize> {
        self.options
            .replicates
            .clone()
            .unwrap_or_else(|| vec![1; self.path_sweep().len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
scenario = "meanfield-ns"
grid = 16
horizon = 0.02
dt = 0.001
sigma = 0.1
paths = 4
seed = 3

[initial]
preset = "taylor_green"
"#;

    #[test]
    fn nu_follows_sigma() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert!((c.nu - 0.005).abs() < 1e-15);
        let c2 = ExperimentConfig::from_toml_str(&BASE.replace("sigma = 0.1", "nu = 0.005")).unwrap();
        assert!((c2.sigma - 0.1).abs() < 1e-12);
    }

    #[test]
    fn both_sigma_and_nu_rejected() {
        let text = BASE.replace("sigma = 0.1", "sigma = 0.1\nnu = 0.005");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn single_path_meanfield_rejected() {
        let text = BASE.replace("paths = 4", "paths = 1");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("M >= 2"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str(&format!("{BASE}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn hash_ignores_output_but_not_seed() {
        let a = ExperimentConfig::from_toml_str(BASE).unwrap();
        let b = ExperimentConfig::from_toml_str(&format!("output = \"x\"\n{BASE}")).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, a.clone().with_seed(4).hash);
    }

    #[test]
    fn post_shock_horizon_rejected() {
        let text = r#"
scenario = "burgers-diffuse"
grid = 64
horizon = 0.5
dt = 0.01
sigma = 0.1
[initial]
preset = "sine"
amplitude = 0.5
"#;
        let err = ExperimentConfig::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("shock"), "{err}");
    }

    #[test]
    fn random_band_is_solenoidal_and_normalized() {
        let g = TorusGrid::square(32).unwrap();
        let u = random_band(g, 4, 9, 0.7).unwrap();
        assert!(u.is_divfree());
        assert!((u.max_abs() - 0.7).abs() < 1e-12);
    }
}
