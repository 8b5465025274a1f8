//! TOML run configuration. Frequencies are given in MHz and multiplied by
//! 2π on load; times carry their unit in the key name.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::clickstream::{Channel, CorrelationMode};
use crate::engine::{DetectedField, DetectionConfig, PulseProtocol};
use crate::error::{Error, Result};
use crate::model::{Branching, SystemParams};
use crate::units::{mhz_to_rad, ns, us};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Omitted keys take the values of [`SystemParams::experiment_defaults`].
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub g: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub delta_g: Option<f64>,
    pub delta_e: Option<f64>,
    pub delta_drive: Option<f64>,
    pub delta_eff: Option<f64>,
    /// Set `delta_eff` to the level detuning `delta_e − delta_g − delta_drive`.
    pub matched_detuning: Option<bool>,
    pub alpha: Option<f64>,
    /// Alternative to `alpha`: mean photon number in the driven mode.
    pub photon_number: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_max_v: Option<usize>,
    pub n_max_h: Option<usize>,
    pub branching_pi: Option<f64>,
    pub branching_sigma: Option<f64>,
    pub cavity_filtered_drive: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub trigger_delay_ns: Option<f64>,
    pub off_start_ns: Option<f64>,
    pub width_us: Option<f64>,
    pub attenuation: Option<f64>,
    pub rearm_deadtime_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    /// Phase of the local oscillator relative to the drive, rad.
    pub epsilon_phase: Option<f64>,
    /// `cavity_output` or `atomic_sigma_h`.
    pub field: Option<String>,
    pub split_a: Option<f64>,
    pub efficiency: Option<f64>,
    pub background_cps: Option<f64>,
    /// `apd_a` or `apd_b`.
    pub start_channel: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub n_traj: Option<usize>,
    /// Length of each trajectory.
    pub duration_us: Option<f64>,
    /// Extent of the deterministic g² curve and the correlation histogram.
    pub t_max_us: Option<f64>,
    /// Sample step of the deterministic g² curve.
    pub dt_ns: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub bin_ns: Option<f64>,
    /// Fit window `[start, end]`; the start defaults to the drive turn-on.
    pub window_us: Option<[f64; 2]>,
    pub filter: Option<bool>,
    pub filter_window_ns: Option<f64>,
    /// Dark-count level to subtract, counts per bin.
    pub dark_level: Option<f64>,
    /// `multi_stop` or `start_stop`.
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub widths_us: Option<Vec<f64>>,
    /// System key swept by `predict`.
    pub parameter: Option<String>,
    pub values: Option<Vec<f64>>,
}

/// Run settings after unit conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: Option<u64>,
    pub n_traj: usize,
    pub duration: f64,
    pub t_max: f64,
    pub dt: f64,
    pub out_dir: PathBuf,
}

/// Analysis settings after unit conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub bin_width_ps: u64,
    pub window: Option<(f64, f64)>,
    pub filter: bool,
    pub filter_window_ps: u64,
    pub dark_level: Option<f64>,
    pub mode: CorrelationMode,
}

/// System keys that `predict` can sweep.
pub const SWEEPABLE: [&str; 8] = ["g", "kappa", "gamma", "delta_g", "delta_e", "delta_eff", "alpha", "photon_number"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| key_at(text, s.start))
                .or_else(|| unknown_field(e.message()))
                .unwrap_or_else(|| "<root>".into());
            Error::Config { key, reason: e.message().trim().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { key: "--config".into(), reason: format!("{}: {e}", path.display()) })?;
        Self::from_toml(&text)
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let s = &self.system;
        let d = SystemParams::experiment_defaults();
        let f = |v: Option<f64>, default: f64| v.map_or(default, mhz_to_rad);
        let mut p = SystemParams {
            g: f(s.g, d.g),
            kappa: f(s.kappa, d.kappa),
            gamma: f(s.gamma, d.gamma),
            delta_g: f(s.delta_g, d.delta_g),
            delta_e: f(s.delta_e, d.delta_e),
            delta_drive: f(s.delta_drive, d.delta_drive),
            delta_eff: f(s.delta_eff, d.delta_eff),
            alpha: s.alpha.unwrap_or(d.alpha),
            epsilon: s.epsilon.unwrap_or(d.epsilon),
            n_max_v: s.n_max_v.unwrap_or(d.n_max_v),
            n_max_h: s.n_max_h.unwrap_or(d.n_max_h),
            branching: Branching {
                pi: s.branching_pi.unwrap_or(d.branching.pi),
                sigma: s.branching_sigma.unwrap_or(d.branching.sigma),
            },
            cavity_filtered_drive: s.cavity_filtered_drive.unwrap_or(d.cavity_filtered_drive),
        };
        match (s.alpha, s.photon_number) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    key: "system.photon_number".into(),
                    reason: "give either alpha or photon_number, not both".into(),
                })
            }
            (None, Some(n)) if !(n >= 0.0) => {
                return Err(Error::Config { key: "system.photon_number".into(), reason: "must be non-negative".into() })
            }
            (None, Some(n)) => p = p.with_photon_number(n),
            _ => {}
        }
        if s.matched_detuning.unwrap_or(false) {
            if s.delta_eff.is_some() {
                return Err(Error::Config {
                    key: "system.matched_detuning".into(),
                    reason: "conflicts with an explicit delta_eff".into(),
                });
            }
            p = p.with_matched_detuning();
        }
        p.validate().map_err(|e| in_section(e, "system", |k| k.to_string()))?;
        Ok(p)
    }

    pub fn protocol(&self) -> Result<PulseProtocol> {
        let s = &self.protocol;
        let d = PulseProtocol::default();
        let p = PulseProtocol {
            trigger_delay: s.trigger_delay_ns.map_or(d.trigger_delay, ns),
            off_start: s.off_start_ns.map_or(d.off_start, ns),
            width: s.width_us.map_or(d.width, us),
            attenuation: s.attenuation.unwrap_or(d.attenuation),
            rearm_deadtime: s.rearm_deadtime_us.map_or(d.rearm_deadtime, us),
        };
        p.validate().map_err(|e| {
            in_section(e, "protocol", |k| match k {
                "trigger_delay" | "off_start" => format!("{k}_ns"),
                "width" | "rearm_deadtime" => format!("{k}_us"),
                _ => k.to_string(),
            })
        })?;
        Ok(p)
    }

    pub fn detection(&self, params: &SystemParams) -> Result<DetectionConfig> {
        let s = &self.detection;
        let d = DetectionConfig::default();
        let field = match s.field.as_deref() {
            None | Some("cavity_output") => DetectedField::CavityOutput,
            Some("atomic_sigma_h") => DetectedField::AtomicSigmaH,
            Some(other) => {
                return Err(Error::Config {
                    key: "detection.field".into(),
                    reason: format!("unknown field {other:?} (expected cavity_output or atomic_sigma_h)"),
                })
            }
        };
        let start_channel = match s.start_channel.as_deref() {
            None => d.start_channel,
            Some(name) => match Channel::from_name(name) {
                Some(c @ (Channel::ApdA | Channel::ApdB)) => c,
                _ => {
                    return Err(Error::Config {
                        key: "detection.start_channel".into(),
                        reason: format!("{name:?} is not apd_a or apd_b"),
                    })
                }
            },
        };
        let det = DetectionConfig {
            epsilon: C64::from_polar(params.epsilon, s.epsilon_phase.unwrap_or(0.0)),
            field,
            split_a: s.split_a.unwrap_or(d.split_a),
            efficiency: s.efficiency.unwrap_or(d.efficiency),
            background_cps: s.background_cps.unwrap_or(d.background_cps),
            start_channel,
        };
        det.validate().map_err(|e| {
            in_section(e, "detection", |k| if k == "epsilon" { "epsilon_phase".into() } else { k.into() })
        })?;
        Ok(det)
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        let s = &self.run;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config { key: format!("run.{key}"), reason: format!("must be positive (got {v})") })
            }
        };
        Ok(RunSettings {
            seed: s.seed,
            n_traj: s.n_traj.unwrap_or(0),
            duration: us(positive("duration_us", s.duration_us.unwrap_or(1000.0))?),
            t_max: us(positive("t_max_us", s.t_max_us.unwrap_or(4.7))?),
            dt: ns(positive("dt_ns", s.dt_ns.unwrap_or(1.64))?),
            out_dir: s.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    pub fn analysis_settings(&self) -> Result<AnalysisSettings> {
        let s = &self.analysis;
        let bin_ns = s.bin_ns.unwrap_or(1.64);
        let bin_width_ps = (bin_ns * 1e3).round();
        if !(bin_width_ps >= 1.0) {
            return Err(Error::Config {
                key: "analysis.bin_ns".into(),
                reason: format!("must be at least 1 ps (got {bin_ns})"),
            });
        }
        let window = match s.window_us {
            None => None,
            Some([a, b]) if a >= 0.0 && b > a => Some((us(a), us(b))),
            Some([a, b]) => {
                return Err(Error::Config {
                    key: "analysis.window_us".into(),
                    reason: format!("need 0 ≤ start < end (got [{a}, {b}])"),
                })
            }
        };
        let filter_window_ns = s.filter_window_ns.unwrap_or(10.0);
        if !(filter_window_ns >= 0.0) {
            return Err(Error::Config {
                key: "analysis.filter_window_ns".into(),
                reason: "must be non-negative".into(),
            });
        }
        if let Some(level) = s.dark_level {
            if !(level >= 0.0) {
                return Err(Error::Config { key: "analysis.dark_level".into(), reason: "must be non-negative".into() });
            }
        }
        let mode = match s.mode.as_deref() {
            None | Some("multi_stop") => CorrelationMode::MultiStop,
            Some("start_stop") => CorrelationMode::StartStop,
            Some(other) => {
                return Err(Error::Config {
                    key: "analysis.mode".into(),
                    reason: format!("unknown mode {other:?} (expected multi_stop or start_stop)"),
                })
            }
        };
        Ok(AnalysisSettings {
            bin_width_ps: bin_width_ps as u64,
            window,
            filter: s.filter.unwrap_or(true),
            filter_window_ps: (filter_window_ns * 1e3).round() as u64,
            dark_level: s.dark_level,
            mode,
        })
    }

    /// Pulse widths of a sweep, seconds.
    pub fn sweep_widths(&self) -> Result<Vec<f64>> {
        let widths = self.sweep.widths_us.clone().unwrap_or_default();
        if let Some(w) = widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Config {
                key: "sweep.widths_us".into(),
                reason: format!("widths must be positive (got {w})"),
            });
        }
        Ok(widths.into_iter().map(us).collect())
    }

    /// Parameter name and values for `predict`; empty when no sweep is configured.
    pub fn predict_sweep(&self) -> Result<Option<(String, Vec<f64>)>> {
        match (&self.sweep.parameter, &self.sweep.values) {
            (None, None) => Ok(None),
            (Some(p), _) if !SWEEPABLE.contains(&p.as_str()) => Err(Error::Config {
                key: "sweep.parameter".into(),
                reason: format!("cannot sweep {p:?} (expected one of {})", SWEEPABLE.join(", ")),
            }),
            (Some(p), Some(v)) => Ok(Some((p.clone(), v.clone()))),
            (None, Some(_)) => {
                Err(Error::Config { key: "sweep.parameter".into(), reason: "required with sweep.values".into() })
            }
            (Some(_), None) => {
                Err(Error::Config { key: "sweep.values".into(), reason: "required with sweep.parameter".into() })
            }
        }
    }

    /// Copy with one system key replaced, as `predict` sweeps do.
    pub fn with_system_value(&self, key: &str, value: f64) -> Result<RunConfig> {
        let mut c = self.clone();
        let s = &mut c.system;
        match key {
            "g" => s.g = Some(value),
            "kappa" => s.kappa = Some(value),
            "gamma" => s.gamma = Some(value),
            "delta_g" => s.delta_g = Some(value),
            "delta_e" => s.delta_e = Some(value),
            "delta_eff" => {
                s.delta_eff = Some(value);
                s.matched_detuning = None;
            }
            "alpha" => {
                s.alpha = Some(value);
                s.photon_number = None;
            }
            "photon_number" => {
                s.photon_number = Some(value);
                s.alpha = None;
            }
            _ => return Err(Error::Config { key: "sweep.parameter".into(), reason: format!("cannot sweep {key:?}") }),
        }
        Ok(c)
    }
}

fn in_section(e: Error, section: &str, rename: impl Fn(&str) -> String) -> Error {
    match e {
        Error::InvalidParameter { key, reason } => Error::Config { key: format!("{section}.{}", rename(key)), reason },
        Error::TruncationTooSmall { mode, n_max } => Error::Config {
            key: format!("{section}.n_max_{mode}"),
            reason: format!("must be at least 2 (got {n_max})"),
        },
        other => other,
    }
}

/// Dotted key of the assignment on the line containing byte `pos`.
fn key_at(text: &str, pos: usize) -> String {
    let pos = pos.min(text.len());
    let line_start = text[..pos].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[pos..].find('\n').map_or(text.len(), |i| pos + i);
    let line = text[line_start..line_end].trim();
    let section = text[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    if line.starts_with('[') {
        return line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
    }
    let key = line.split('=').next().unwrap_or("").trim().to_string();
    match section {
        Some(s) if !key.is_empty() => format!("{s}.{key}"),
        Some(s) => s,
        None => key,
    }
}

fn unknown_field(message: &str) -> Option<String> {
    let start = message.find("unknown field `")? + "unknown field `".len();
    let end = message[start..].find('`')? + start;
    Some(message[start..end].to_string())
}
