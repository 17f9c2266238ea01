//! Run configuration. Physical quantities carry their unit in the key name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::consts::TWO_PI;
use crate::error::{Error, Result};
use crate::inversion::SensitivityGrid;
use crate::ringdown::{AveragingMode, CouplingMethod, JitterSpectrum, SpectralLine};
use crate::separation::Propagation;
use crate::tls::{SweepPosition, DEFAULT_N_CUTOFF};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub fit_ringdown: Option<FitRingdownConfig>,
    #[serde(default)]
    pub fit_power: Option<FitPowerConfig>,
    #[serde(default)]
    pub invert: Option<InvertConfig>,
    #[serde(default)]
    pub sensitivity: Option<SensitivityConfig>,
    #[serde(default)]
    pub separate: Option<SeparateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JitterConfig {
    None,
    Lorentzian {
        rms_linewidths: f64,
        #[serde(rename = "corner_Hz")]
        corner_hz: f64,
        #[serde(rename = "f_max_Hz")]
        f_max_hz: f64,
    },
    OneOverF {
        #[serde(rename = "amplitude")]
        amplitude: f64,
        #[serde(rename = "f_low_Hz")]
        f_low_hz: f64,
        #[serde(rename = "f_high_Hz")]
        f_high_hz: f64,
    },
    DiscreteLines {
        lines: Vec<LineConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    #[serde(rename = "f_Hz")]
    pub f_hz: f64,
    pub weight: f64,
}

fn default_jitter() -> JitterConfig {
    JitterConfig::None
}

fn default_components() -> usize {
    256
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(rename = "f0_Hz")]
    pub f0_hz: f64,
    /// `κ_tot/2π`
    #[serde(rename = "kappa_tot_Hz")]
    pub kappa_tot_hz: f64,
    /// `κ_ext/2π`
    #[serde(rename = "kappa_ext_Hz")]
    pub kappa_ext_hz: f64,
    #[serde(default = "default_jitter")]
    pub jitter: JitterConfig,
    pub a0_sqrt_photons_per_s: f64,
    pub t_p_s: f64,
    #[serde(rename = "detuning_Hz", default)]
    pub detuning_hz: f64,
    pub dt_s: f64,
    pub duration_s: f64,
    pub t_m_s: f64,
    pub shots: usize,
    #[serde(default)]
    pub noise_power_photons_per_s: f64,
    #[serde(default = "default_components")]
    pub jitter_components: usize,
}

impl SimulateConfig {
    pub fn omega0(&self) -> f64 {
        TWO_PI * self.f0_hz
    }
    pub fn kappa_tot(&self) -> f64 {
        TWO_PI * self.kappa_tot_hz
    }
    pub fn kappa_ext(&self) -> f64 {
        TWO_PI * self.kappa_ext_hz
    }

    pub fn jitter_spectrum(&self) -> Result<JitterSpectrum> {
        Ok(match &self.jitter {
            JitterConfig::None => JitterSpectrum::None,
            JitterConfig::Lorentzian {
                rms_linewidths,
                corner_hz,
                f_max_hz,
            } => {
                if *rms_linewidths == 0.0 {
                    JitterSpectrum::None
                } else {
                    JitterSpectrum::lorentzian_with_rms(
                        *rms_linewidths,
                        *corner_hz,
                        *f_max_hz,
                        self.omega0(),
                        self.kappa_tot(),
                    )?
                }
            }
            JitterConfig::OneOverF {
                amplitude,
                f_low_hz,
                f_high_hz,
            } => JitterSpectrum::OneOverF {
                amplitude: *amplitude,
                f_low_hz: *f_low_hz,
                f_high_hz: *f_high_hz,
            },
            JitterConfig::DiscreteLines { lines } => JitterSpectrum::DiscreteLines {
                lines: lines
                    .iter()
                    .map(|l| SpectralLine {
                        f_hz: l.f_hz,
                        weight: l.weight,
                    })
                    .collect(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRingdownConfig {
    /// Ensemble sidecar JSON; defaults to the output of `simulate`.
    #[serde(default)]
    pub ensemble: Option<PathBuf>,
    /// Defaults to the end of the pulse plus half the detector window.
    #[serde(default)]
    pub window_start_s: Option<f64>,
    /// Defaults to the end of the record.
    #[serde(default)]
    pub window_end_s: Option<f64>,
    #[serde(default = "both_modes")]
    pub modes: Vec<AveragingMode>,
    #[serde(default)]
    pub coupling_method: CouplingMethod,
    #[serde(default = "one")]
    pub receiver_gain: f64,
    #[serde(default = "one")]
    pub compression: f64,
}

fn both_modes() -> Vec<AveragingMode> {
    vec![AveragingMode::PowerAverage, AveragingMode::FieldAverage]
}

impl Default for FitRingdownConfig {
    fn default() -> Self {
        FitRingdownConfig {
            ensemble: None,
            window_start_s: None,
            window_end_s: None,
            modes: both_modes(),
            coupling_method: CouplingMethod::Exact,
            receiver_gain: 1.0,
            compression: 1.0,
        }
    }
}

fn default_cutoff() -> Option<f64> {
    Some(DEFAULT_N_CUTOFF)
}

fn default_f_max() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSweepConfig {
    pub label: String,
    pub path: PathBuf,
    #[serde(default)]
    pub position: SweepPosition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitPowerConfig {
    pub sweeps: Vec<PowerSweepConfig>,
    /// `null` keeps every point.
    #[serde(default = "default_cutoff")]
    pub n_cutoff_photons: Option<f64>,
    /// Saturation fraction defining the low-power regime.
    #[serde(default = "default_f_max")]
    pub saturation_fraction_max: f64,
    /// Withdrawn participations used for the cavity loss bounds.
    #[serde(default)]
    pub p_cond: Option<f64>,
    #[serde(rename = "p_MA", default)]
    pub p_ma: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialConfig {
    #[serde(default = "two")]
    pub order: usize,
    /// Sample whose sweep is expanded.
    pub sample_id: String,
    #[serde(rename = "sigma_q_MA_inv")]
    pub sigma_q_ma_inv: f64,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertConfig {
    /// Position-sweep CSV.
    pub sweeps: PathBuf,
    /// Conductor reference frequency; defaults to the first sample's
    /// withdrawn frequency.
    #[serde(rename = "f_ref_Hz", default)]
    pub f_ref_hz: Option<f64>,
    #[serde(default = "yes")]
    pub shared_cond: bool,
    #[serde(rename = "shared_MA", default = "yes")]
    pub shared_ma: bool,
    /// Parameter name → `[lower, upper]`; `null` means unbounded above.
    #[serde(default)]
    pub bounds: BTreeMap<String, (f64, Option<f64>)>,
    #[serde(default)]
    pub polynomial: Option<PolynomialConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub sample_id: String,
    pub p_bulk_withdrawn: f64,
    pub p_bulk_inserted: f64,
    pub positions: usize,
    #[serde(rename = "p_SA_over_p_bulk")]
    pub sa_to_bulk_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    /// Participation CSV; if absent, `profile` generates one.
    #[serde(default)]
    pub participation: Option<PathBuf>,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub sample_id: Option<String>,
    pub q_cond_inv: f64,
    #[serde(rename = "q_MA_inv")]
    pub q_ma_inv: f64,
    pub fractional_error: f64,
    #[serde(rename = "f_ref_Hz", default)]
    pub f_ref_hz: Option<f64>,
    #[serde(default)]
    pub grid: Option<SensitivityGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineInput {
    pub label: String,
    pub q_sub_inv: f64,
    pub sigma: f64,
    #[serde(rename = "p_SA_over_p_bulk")]
    pub ratio: f64,
    #[serde(default)]
    pub ratio_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticInput {
    pub q_bulk_inv: f64,
    #[serde(rename = "dipper_p_E_over_p_H")]
    pub dipper_e_to_h: f64,
    pub stripline_q: f64,
    #[serde(rename = "stripline_p_E")]
    pub stripline_p_e: f64,
    #[serde(rename = "stripline_p_H")]
    pub stripline_p_h: f64,
    /// Magnetic bulk participation of the transmon projection.
    #[serde(rename = "transmon_p_bulk_H", default)]
    pub transmon_p_bulk_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceInput {
    pub label: String,
    pub p: f64,
    pub q_inv: f64,
    #[serde(rename = "f_Hz")]
    pub f_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    pub p_bulk: f64,
    #[serde(rename = "p_SA", default)]
    pub p_sa: f64,
    #[serde(rename = "f_Hz")]
    pub f_hz: f64,
}

impl Default for TransmonConfig {
    fn default() -> Self {
        TransmonConfig {
            p_bulk: 0.8,
            p_sa: 0.0,
            f_hz: 4e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcondInput {
    pub q_inserted_inv: f64,
    pub q_withdrawn_inv: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateConfig {
    /// Explicit constraint lines; the pipeline derives them from the inversion.
    #[serde(default)]
    pub lines: Vec<LineInput>,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default)]
    pub magnetic: Option<MagneticInput>,
    #[serde(default)]
    pub transmon: Option<TransmonConfig>,
    #[serde(default)]
    pub coherence: Vec<CoherenceInput>,
    #[serde(default)]
    pub pcond_check: Option<PcondInput>,
}

/// Parse a `key.path=value` override. Values that parse as JSON are used as
/// such, anything else becomes a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            } else {
                return Err(Error::Config(format!(
                    "override `{key}`: `{}` is not an object",
                    parts[..i].join(".")
                )));
            }
        }
        let map = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Load a config document, apply overrides and resolve relative paths
/// against the config file's directory.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let (mut doc, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?;
            (doc, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (Value::Object(Default::default()), PathBuf::new()),
    };
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("schema");
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
    cfg.resolve_paths(&base);
    Ok(cfg)
}

impl RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        if let Some(f) = self.fit_ringdown.as_mut() {
            if let Some(p) = f.ensemble.as_mut() {
                fix(p);
            }
        }
        if let Some(f) = self.fit_power.as_mut() {
            for s in f.sweeps.iter_mut() {
                fix(&mut s.path);
            }
        }
        if let Some(i) = self.invert.as_mut() {
            fix(&mut i.sweeps);
        }
        if let Some(s) = self.sensitivity.as_mut() {
            if let Some(p) = s.participation.as_mut() {
                fix(p);
            }
        }
    }

    /// The `seed` key, required by stochastic commands.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required for this command (`--seed` or `seed`)".into()))
    }
}
