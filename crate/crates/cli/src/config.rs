//! Run configuration: JSON, unknown keys rejected, ranges checked with the
//! offending field named in the error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use wavechain_core::chain::{ForceMethod, PhaseLaw};
use wavechain_core::kinetic::{KineticScheme, Profile};
use wavechain_core::lattice::dispersion;
use wavechain_core::wave::Scheme;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    WtSim,
    WtKinetic,
    WtCompare,
    ChainSim,
    Vlasov,
    MfCompare,
    OracleSuite,
}

impl Pipeline {
    pub const ALL: [Pipeline; 7] = [
        Pipeline::WtSim,
        Pipeline::WtKinetic,
        Pipeline::WtCompare,
        Pipeline::ChainSim,
        Pipeline::Vlasov,
        Pipeline::MfCompare,
        Pipeline::OracleSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::WtSim => "wt-sim",
            Pipeline::WtKinetic => "wt-kinetic",
            Pipeline::WtCompare => "wt-compare",
            Pipeline::ChainSim => "chain-sim",
            Pipeline::Vlasov => "vlasov",
            Pipeline::MfCompare => "mf-compare",
            Pipeline::OracleSuite => "oracle-suite",
        }
    }
}

/// Initial wave or kinetic spectrum as a function of the torus wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumProfile {
    /// `amplitude · ω(κ)^exponent`.
    Power { amplitude: f64, exponent: f64 },
    /// `temperature / ω(κ)`; zero where `ω` is below the kinetic floor.
    RayleighJeans { temperature: f64 },
    /// `amplitude · exp(−(|κ| − center)² / (2 width²))`.
    Bump { amplitude: f64, center: f64, width: f64 },
}

impl SpectrumProfile {
    pub fn eval(&self, kappa: &[f64], omega_floor: f64) -> f64 {
        match *self {
            SpectrumProfile::Power { amplitude, exponent } => amplitude * dispersion(kappa).powf(exponent),
            SpectrumProfile::RayleighJeans { temperature } => {
                let w = dispersion(kappa);
                if w < omega_floor {
                    0.0
                } else {
                    temperature / w
                }
            }
            SpectrumProfile::Bump { amplitude, center, width } => {
                let r = kappa.iter().map(|k| k * k).sum::<f64>().sqrt();
                amplitude * (-(r - center).powi(2) / (2.0 * width * width)).exp()
            }
        }
    }

    fn validate(&self, field: &str) -> Result<(), HarnessError> {
        let ok = match *self {
            SpectrumProfile::Power { amplitude, exponent } => {
                amplitude >= 0.0 && amplitude.is_finite() && exponent.is_finite()
            }
            SpectrumProfile::RayleighJeans { temperature } => temperature >= 0.0 && temperature.is_finite(),
            SpectrumProfile::Bump { amplitude, center, width } => {
                amplitude >= 0.0 && amplitude.is_finite() && center.is_finite() && width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(field_error(field, "amplitude/temperature must be >= 0 and widths > 0"))
        }
    }
}

fn default_dim() -> usize {
    1
}

fn default_bound() -> f64 {
    1e6
}

fn default_force_method() -> ForceMethod {
    ForceMethod::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// `D`; the lattice has `2D+1` points per axis.
    pub half_width: usize,
    pub lambda: f64,
    pub dt: f64,
    /// Number of steps; wt-compare derives it from `kinetic.tau` instead.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    pub replicas: usize,
    pub initial: SpectrumProfile,
    /// Record the spectrum every this many steps (default: start and end only).
    #[serde(default)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Grid points per axis; wt-compare uses the wave lattice when absent.
    #[serde(default)]
    pub points: Option<usize>,
    pub epsilon: f64,
    #[serde(default)]
    pub profile: Option<Profile>,
    #[serde(default)]
    pub omega_floor: Option<f64>,
    #[serde(default)]
    pub scheme: Option<KineticScheme>,
    pub tau: f64,
    pub steps: usize,
    #[serde(default = "default_bound")]
    pub bound: f64,
    /// Initial spectrum for wt-kinetic; wt-compare uses the wave profile.
    #[serde(default)]
    pub initial: Option<SpectrumProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosBins {
    pub r_range: (f64, f64),
    pub r_bins: usize,
    pub v_range: (f64, f64),
    pub v_bins: usize,
    /// Site pair whose joint statistics are tested, as lattice indices.
    pub sites: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Sites per axis.
    pub points: usize,
    pub alpha: f64,
    pub dt: f64,
    pub steps: usize,
    pub replicas: usize,
    pub law: PhaseLaw,
    #[serde(default = "default_force_method")]
    pub method: ForceMethod,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub chaos: Option<ChaosBins>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlasovSection {
    pub x_points: usize,
    pub r_max: f64,
    pub r_points: usize,
    pub v_max: f64,
    pub v_points: usize,
    pub dt: f64,
    pub steps: usize,
    /// Fractional order; mf-compare takes it from the chain section.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Initial law; mf-compare takes it from the chain section.
    #[serde(default)]
    pub law: Option<PhaseLaw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    NonIncreasing,
    NonDecreasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted path of a numeric field, e.g. `wave.lambda` or `chain.points`.
    pub axis: String,
    pub values: Vec<Value>,
    /// One child per (value, seed); the verdict uses the median over seeds.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub expect: Option<Trend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub wave: Option<WaveSection>,
    #[serde(default)]
    pub kinetic: Option<KineticSection>,
    #[serde(default)]
    pub chain: Option<ChainSection>,
    #[serde(default)]
    pub vlasov: Option<VlasovSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

pub(crate) fn field_error(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, x: f64) -> Result<(), HarnessError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("must be finite and > 0, got {x}")))
    }
}

fn at_least(field: &str, x: usize, min: usize) -> Result<(), HarnessError> {
    if x >= min {
        Ok(())
    } else {
        Err(field_error(field, format!("must be >= {min}, got {x}")))
    }
}

fn required<'a, T>(section: &'a Option<T>, name: &str, pipeline: Pipeline) -> Result<&'a T, HarnessError> {
    section
        .as_ref()
        .ok_or_else(|| field_error(name, format!("section required by pipeline {}", pipeline.name())))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            field_error(
                "<document>",
                format!("line {} column {}: {e}", e.line(), e.column()),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field_error("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON encoding, with `out` removed so the
    /// destination does not change the identity of a run.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut value {
            map.remove("out");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn wave(&self) -> Result<&WaveSection, HarnessError> {
        required(&self.wave, "wave", self.pipeline)
    }

    pub fn kinetic(&self) -> Result<&KineticSection, HarnessError> {
        required(&self.kinetic, "kinetic", self.pipeline)
    }

    pub fn chain(&self) -> Result<&ChainSection, HarnessError> {
        required(&self.chain, "chain", self.pipeline)
    }

    pub fn vlasov(&self) -> Result<&VlasovSection, HarnessError> {
        required(&self.vlasov, "vlasov", self.pipeline)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(w) = &self.wave {
            at_least("wave.dim", w.dim, 1)?;
            at_least("wave.half_width", w.half_width, 1)?;
            if !(w.lambda.is_finite() && w.lambda >= 0.0) {
                return Err(field_error("wave.lambda", "must be finite and >= 0"));
            }
            positive("wave.dt", w.dt)?;
            at_least("wave.replicas", w.replicas, 1)?;
            if let Some(r) = w.record_every {
                at_least("wave.record_every", r, 1)?;
            }
            w.initial.validate("wave.initial")?;
        }
        if let Some(k) = &self.kinetic {
            at_least("kinetic.dim", k.dim, 1)?;
            if let Some(p) = k.points {
                at_least("kinetic.points", p, 4)?;
            }
            positive("kinetic.epsilon", k.epsilon)?;
            if !(k.tau.is_finite() && k.tau >= 0.0) {
                return Err(field_error("kinetic.tau", "must be finite and >= 0"));
            }
            at_least("kinetic.steps", k.steps, 1)?;
            positive("kinetic.bound", k.bound)?;
            if let Some(f) = k.omega_floor {
                positive("kinetic.omega_floor", f)?;
            }
            if let Some(init) = &k.initial {
                init.validate("kinetic.initial")?;
            }
        }
        if let Some(c) = &self.chain {
            at_least("chain.dim", c.dim, 1)?;
            at_least("chain.points", c.points, 2)?;
            if !(c.alpha > 0.0 && c.alpha < 1.0) {
                return Err(field_error("chain.alpha", "must lie in (0, 1)"));
            }
            positive("chain.dt", c.dt)?;
            at_least("chain.replicas", c.replicas, 1)?;
            c.law
                .validate()
                .map_err(|e| field_error("chain.law", e.to_string()))?;
            if let Some(ch) = &c.chaos {
                at_least("chain.chaos.r_bins", ch.r_bins, 1)?;
                at_least("chain.chaos.v_bins", ch.v_bins, 1)?;
                if ch.r_range.0 >= ch.r_range.1 || ch.v_range.0 >= ch.v_range.1 {
                    return Err(field_error("chain.chaos", "ranges must be increasing"));
                }
                let sites = c.points.pow(c.dim as u32);
                if ch.sites.0 >= sites || ch.sites.1 >= sites || ch.sites.0 == ch.sites.1 {
                    return Err(field_error("chain.chaos.sites", "two distinct in-range sites required"));
                }
            }
        }
        if let Some(v) = &self.vlasov {
            at_least("vlasov.x_points", v.x_points, 2)?;
            at_least("vlasov.r_points", v.r_points, 3)?;
            at_least("vlasov.v_points", v.v_points, 3)?;
            positive("vlasov.r_max", v.r_max)?;
            positive("vlasov.v_max", v.v_max)?;
            positive("vlasov.dt", v.dt)?;
            if let Some(a) = v.alpha {
                if !(a > 0.0 && a < 1.0) {
                    return Err(field_error("vlasov.alpha", "must lie in (0, 1)"));
                }
            }
            if let Some(law) = &v.law {
                law.validate().map_err(|e| field_error("vlasov.law", e.to_string()))?;
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(field_error("sweep.values", "must not be empty"));
            }
            if !s.values.iter().all(Value::is_number) {
                return Err(field_error("sweep.values", "must all be numbers"));
            }
            if matches!(&s.seeds, Some(v) if v.is_empty()) {
                return Err(field_error("sweep.seeds", "must not be empty when given"));
            }
            lookup(self, &s.axis)?;
        }
        match self.pipeline {
            Pipeline::WtSim => {
                let w = self.wave()?;
                if w.steps.is_none() {
                    return Err(field_error("wave.steps", "required by wt-sim"));
                }
            }
            Pipeline::WtKinetic => {
                let k = self.kinetic()?;
                if k.points.is_none() {
                    return Err(field_error("kinetic.points", "required by wt-kinetic"));
                }
                if k.initial.is_none() {
                    return Err(field_error("kinetic.initial", "required by wt-kinetic"));
                }
            }
            Pipeline::WtCompare => {
                let w = self.wave()?;
                self.kinetic()?;
                if w.lambda == 0.0 {
                    return Err(field_error("wave.lambda", "wt-compare needs lambda > 0 (t = tau/lambda^2)"));
                }
            }
            Pipeline::ChainSim => {
                self.chain()?;
            }
            Pipeline::Vlasov => {
                let v = self.vlasov()?;
                if v.alpha.is_none() {
                    return Err(field_error("vlasov.alpha", "required by vlasov"));
                }
                if v.law.is_none() {
                    return Err(field_error("vlasov.law", "required by vlasov"));
                }
            }
            Pipeline::MfCompare => {
                let c = self.chain()?;
                let v = self.vlasov()?;
                let (tc, tv) = (c.dt * c.steps as f64, v.dt * v.steps as f64);
                if (tc - tv).abs() > 1e-9 * tc.abs().max(1.0) {
                    return Err(field_error(
                        "vlasov.steps",
                        format!("final time {tv} differs from chain final time {tc}"),
                    ));
                }
            }
            Pipeline::OracleSuite => {}
        }
        Ok(())
    }

    /// Copy of the config with the numeric field at dotted `path` replaced.
    pub fn with_field(&self, path: &str, value: &Value) -> Result<RunConfig, HarnessError> {
        let mut root = serde_json::to_value(self).expect("config serializes");
        let slot = path
            .split('.')
            .try_fold(&mut root, |node, key| node.get_mut(key))
            .ok_or_else(|| field_error(path, "no such field"))?;
        *slot = value.clone();
        let cfg: RunConfig =
            serde_json::from_value(root).map_err(|e| field_error(path, format!("rejected value {value}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Value of the numeric field at dotted `path`.
pub fn lookup(cfg: &RunConfig, path: &str) -> Result<f64, HarnessError> {
    let root = serde_json::to_value(cfg).expect("config serializes");
    path.split('.')
        .try_fold(&root, |node, key| node.get(key))
        .and_then(Value::as_f64)
        .ok_or_else(|| field_error(path, "does not name a numeric field"))
}
