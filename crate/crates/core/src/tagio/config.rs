//! Experiment configuration: TOML text flattened to dotted keys.
//!
//! Every key has a default, so an empty document describes the reference
//! operating point. Both `[stage2]\neta0 = 0.3` and `stage2.eta0 = 0.3` are
//! accepted.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::ConfigError;
use crate::analysis::WindowSpec;
use crate::model::{
    CascadeSpec, DetectorSpec, EfficiencyCurve, ModelError, NoiseLine, Polarization, SourceSpec, StageSpec,
};
use crate::sequencer::{NoiseRates, RunLength, RunPlan, SequenceSpec, SimError, SimulationSetup, DEFAULT_TICK_PS};

/// Every recognized key.
pub const CONFIG_KEYS: &[&str] = &[
    "source.tau_ns",
    "source.p_pmt_window",
    "source.p_snspd_window",
    "source.pol_split",
    "seq.cooling_us",
    "seq.attempts_per_cycle",
    "seq.attempt_us",
    "seq.pump_us",
    "seq.delay_ns",
    "seq.trigger_ns",
    "seq.excite_ns",
    "seq.intercycle_dead_us",
    "stage1.eta",
    "stage1.pm_mw",
    "stage1.pump_mw",
    "stage2.eta0",
    "stage2.pm_mw",
    "stage2.pump_mw",
    "stage2.noise_slope_hz_per_mw",
    "stage2.noise_intercept_hz",
    "stage2.filter_transmission",
    "coupling.interstage",
    "pmt.bg_hz",
    "pmt.jitter_ps",
    "snspd.eff",
    "snspd.dark_hz",
    "snspd.extra_noise_hz",
    "snspd.jitter_ps",
    "noise.gated",
    "window.signal_ns",
    "window.signal_start_ns",
    "window.noise_delay_ns",
    "analysis.bin_ns",
    "run.seed",
    "run.attempts",
    "run.duration_s",
    "run.tick_ps",
];

const DEFAULT_EXTRA_NOISE_HZ: f64 = 56.0 - 60.0 - 0.036 * 278.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDefaults {
    pub signal_width_ns: f64,
    /// Fixed signal window start; when absent the window is placed from the
    /// histogram peak.
    pub signal_start_ns: Option<f64>,
    pub noise_delay_ns: f64,
    pub bin_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    pub length: Option<RunLength>,
    pub tick_ps: u32,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: SourceSpec<f64>,
    pub sequence: SequenceSpec,
    pub cascade: CascadeSpec<f64>,
    pub pmt: DetectorSpec<f64>,
    pub snspd: DetectorSpec<f64>,
    /// Total background seen by the photomultiplier.
    pub pmt_background_hz: f64,
    /// Correction added to the nanowire dark and pump-induced rates.
    pub snspd_extra_noise_hz: f64,
    pub noise_gated: bool,
    pub windows: WindowDefaults,
    pub run: RunSettings,
    pub digest: [u8; 32],
}

impl ExperimentConfig {
    pub fn stage1(&self) -> &StageSpec<f64> {
        &self.cascade.stages()[0]
    }

    pub fn stage2(&self) -> &StageSpec<f64> {
        &self.cascade.stages()[1]
    }

    /// Nanowire background: dark counts plus pump-induced noise plus the
    /// configured correction.
    pub fn snspd_noise_hz(&self) -> f64 {
        self.snspd.dark_hz() + self.stage2().noise_hz() + self.snspd_extra_noise_hz
    }

    pub fn noise_rates(&self) -> NoiseRates {
        NoiseRates { pmt_hz: self.pmt_background_hz, snspd_hz: self.snspd_noise_hz(), gated: self.noise_gated }
    }

    /// The configured run plan, or `fallback` when the document sets no length.
    pub fn run_plan(&self, fallback: RunLength) -> RunPlan {
        RunPlan { length: self.run.length.unwrap_or(fallback), master_seed: self.run.seed, tick_ps: self.run.tick_ps }
    }

    pub fn simulation_setup(&self, plan: RunPlan) -> SimulationSetup {
        SimulationSetup {
            sequence: self.sequence,
            plan,
            source: self.source,
            pmt: self.pmt.clone(),
            snspd: self.snspd.clone(),
            noise: self.noise_rates(),
            signal_window_ns: self.windows.signal_width_ns,
            config_digest: self.digest,
        }
    }

    /// Windows used when the signal start is fixed in the document.
    pub fn fixed_windows(&self) -> Option<(WindowSpec, WindowSpec)> {
        let s = WindowSpec::new(self.windows.signal_start_ns?, self.windows.signal_width_ns).ok()?;
        Some((s, s.shifted(self.windows.noise_delay_ns)))
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        load_config("").expect("defaults are valid")
    }
}

/// SHA-256 of the exact configuration text.
pub fn config_digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    load_config(&std::fs::read_to_string(path)?)
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys(BTreeMap<String, toml::Value>);

impl Keys {
    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(ConfigError::Type { key: key.into(), expected: "a number" }),
        }
    }

    fn opt_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(toml::Value::Integer(v)) => Err(range(key, *v, "[0, 2^63)")),
            Some(_) => Err(ConfigError::Type { key: key.into(), expected: "a nonnegative integer" }),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(ConfigError::Type { key: key.into(), expected: "true or false" }),
        }
    }
}

fn range(key: &str, value: impl ToString, legal: &str) -> ConfigError {
    ConfigError::Range { key: key.into(), value: value.to_string(), legal: legal.into() }
}

/// Attach the config key to a model error. `fields` maps the model's field
/// names to keys; the first key is used when nothing matches.
fn model<T>(fields: &[(&str, &str)], r: Result<T, ModelError>) -> Result<T, ConfigError> {
    r.map_err(|e| match e {
        ModelError::Invariant { field, value, legal } => {
            let key = fields.iter().find(|(f, _)| *f == field).map_or(fields[0].1, |(_, k)| k);
            range(key, value, legal)
        }
        ModelError::Domain { value, .. } => range(fields[0].1, value, "[0, inf)"),
        ModelError::Fit(m) => range(fields[0].1, "?", &m),
    })
}

fn nonneg(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(range(key, v, "[0, inf)"))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(range(key, v, "(0, inf)"))
    }
}

/// Parse and validate a configuration document.
pub fn load_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    if let Some(k) = flat.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(k.clone()));
    }
    let k = Keys(flat);

    let source = model(
        &[
            ("tau_ns", "source.tau_ns"),
            ("p_pmt_window", "source.p_pmt_window"),
            ("p_snspd_window", "source.p_snspd_window"),
            ("p_pmt_window + p_snspd_window", "source.p_snspd_window"),
        ],
        SourceSpec::new(
            k.f64("source.tau_ns", 13.89)?,
            k.f64("source.p_pmt_window", 8.25e-4)?,
            k.f64("source.p_snspd_window", 2.545e-4)?,
        ),
    )?;

    let apc = k.opt_u64("seq.attempts_per_cycle")?.unwrap_or(500);
    let sequence = SequenceSpec {
        cooling_us: k.f64("seq.cooling_us", 100.0)?,
        attempts_per_cycle: u32::try_from(apc).map_err(|_| range("seq.attempts_per_cycle", apc, "[1, 2^32)"))?,
        attempt_us: k.f64("seq.attempt_us", 10.0)?,
        pump_us: k.f64("seq.pump_us", 8.0)?,
        delay_ns: k.f64("seq.delay_ns", 600.0)?,
        trigger_ns: k.f64("seq.trigger_ns", 200.0)?,
        excite_ns: k.f64("seq.excite_ns", 200.0)?,
        intercycle_dead_us: k.f64("seq.intercycle_dead_us", 0.0)?,
    };
    sequence.validate().map_err(|e| match e {
        SimError::Invalid { field, value, legal } => range(field, value, legal),
        other => range("seq", "?", &other.to_string()),
    })?;

    let stage1_pump = k.f64("stage1.pump_mw", 180.0)?;
    let stage1_curve = model(
        &[("eta0", "stage1.eta"), ("pm_mw", "stage1.pm_mw")],
        EfficiencyCurve::new(k.f64("stage1.eta", 0.35)?, k.f64("stage1.pm_mw", stage1_pump)?),
    )?;
    let stage1 = model(
        &[("pump_mw", "stage1.pump_mw")],
        StageSpec::new("stage1", stage1_curve, stage1_pump, NoiseLine::zero(), Polarization::Both),
    )?;

    let stage2_curve = model(
        &[("eta0", "stage2.eta0"), ("pm_mw", "stage2.pm_mw")],
        EfficiencyCurve::new(k.f64("stage2.eta0", 0.356)?, k.f64("stage2.pm_mw", 278.0)?),
    )?;
    let stage2_noise = model(
        &[
            ("noise slope_hz_per_mw", "stage2.noise_slope_hz_per_mw"),
            ("noise intercept_hz", "stage2.noise_intercept_hz"),
        ],
        NoiseLine::new(k.f64("stage2.noise_slope_hz_per_mw", 0.036)?, k.f64("stage2.noise_intercept_hz", 0.0)?),
    )?;
    let stage2 = model(
        &[("pump_mw", "stage2.pump_mw")],
        StageSpec::new("stage2", stage2_curve, k.f64("stage2.pump_mw", 278.0)?, stage2_noise, Polarization::Single),
    )?;
    let stage2 = model(
        &[
            ("filter transmission", "stage2.filter_transmission"),
            ("eta0 (must not exceed the transmission of the filter it includes)", "stage2.eta0"),
        ],
        stage2.with_reference_filter(k.f64("stage2.filter_transmission", 0.69)?),
    )?;

    let cascade = model(
        &[("interstage_coupling", "coupling.interstage"), ("source_polarization_split", "source.pol_split")],
        CascadeSpec::new(vec![stage1, stage2], k.f64("coupling.interstage", 0.883)?, k.f64("source.pol_split", 0.5)?),
    )?;

    // The window probabilities already include detection efficiency; the
    // efficiencies here are informational.
    let pmt = model(
        &[("jitter_sigma_ps", "pmt.jitter_ps")],
        DetectorSpec::new("pmt", 1.0, 0.0, k.f64("pmt.jitter_ps", 80.0)?),
    )?;
    let snspd = model(
        &[("detector efficiency", "snspd.eff"), ("dark_hz", "snspd.dark_hz"), ("jitter_sigma_ps", "snspd.jitter_ps")],
        DetectorSpec::new(
            "snspd",
            k.f64("snspd.eff", 0.87)?,
            k.f64("snspd.dark_hz", 60.0)?,
            k.f64("snspd.jitter_ps", 80.0)?,
        ),
    )?;
    let pmt_background_hz = nonneg("pmt.bg_hz", k.f64("pmt.bg_hz", 857.0)?)?;
    let snspd_extra_noise_hz = k.f64("snspd.extra_noise_hz", DEFAULT_EXTRA_NOISE_HZ)?;
    if !snspd_extra_noise_hz.is_finite() {
        return Err(range("snspd.extra_noise_hz", snspd_extra_noise_hz, "finite"));
    }

    let windows = WindowDefaults {
        signal_width_ns: positive("window.signal_ns", k.f64("window.signal_ns", 41.6)?)?,
        signal_start_ns: match k.opt_f64("window.signal_start_ns")? {
            Some(v) if !v.is_finite() => return Err(range("window.signal_start_ns", v, "finite")),
            other => other,
        },
        noise_delay_ns: positive("window.noise_delay_ns", k.f64("window.noise_delay_ns", 300.0)?)?,
        bin_ns: positive("analysis.bin_ns", k.f64("analysis.bin_ns", 0.8)?)?,
    };

    let length = match (k.opt_u64("run.attempts")?, k.opt_f64("run.duration_s")?) {
        (Some(_), Some(_)) => return Err(ConfigError::Conflict("run.attempts", "run.duration_s")),
        (Some(a), None) => Some(RunLength::Attempts(a)),
        (None, Some(d)) => Some(RunLength::Duration(nonneg("run.duration_s", d)?)),
        (None, None) => None,
    };
    let tick = k.opt_u64("run.tick_ps")?.unwrap_or(DEFAULT_TICK_PS as u64);
    if tick == 0 || tick > u32::MAX as u64 {
        return Err(range("run.tick_ps", tick, "[1, 2^32)"));
    }
    let run = RunSettings { seed: k.opt_u64("run.seed")?.unwrap_or(1), length, tick_ps: tick as u32 };

    let cfg = ExperimentConfig {
        source,
        sequence,
        cascade,
        pmt,
        snspd,
        pmt_background_hz,
        snspd_extra_noise_hz,
        noise_gated: k.bool("noise.gated", false)?,
        windows,
        run,
        digest: config_digest(text),
    };
    let total = cfg.snspd_noise_hz();
    if !(total >= 0.0) {
        return Err(range("snspd.extra_noise_hz", snspd_extra_noise_hz, "dark + pump noise + extra >= 0"));
    }
    Ok(cfg)
}
