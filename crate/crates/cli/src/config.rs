//! Flat-key experiment configuration.
//!
//! Values are layered: preset defaults, then the config file, then
//! command-line flags. Every key that ends up differing from the preset is
//! reported as an override in output headers.

use std::fmt::Display;
use std::path::Path;

use cogduty::optimizer::GridSpec;
use cogduty::presets::{self, ChannelPreset};
use cogduty::simulator::SimConfig;
use cogduty::{LinkBudget, Scenario, SoftMetricModel, TrafficModel};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const CUSTOM: &str = "custom";
pub const DEFAULT_PRESET: &str = "channel_b";
pub const DEFAULT_GAMMA0: f64 = 3.0;

macro_rules! config_keys {
    ($($key:ident: $ty:ty),* $(,)?) => {
        /// One layer of configuration; unset keys fall through to the layer below.
        #[derive(Debug, Clone, Default, PartialEq, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct RawConfig {
            pub preset: Option<String>,
            $(pub $key: Option<$ty>,)*
        }

        /// A complete, validated configuration.
        #[derive(Debug, Clone, PartialEq)]
        pub struct ExperimentConfig {
            pub preset: String,
            $(pub $key: $ty,)*
        }

        impl RawConfig {
            /// Copies every key set in `top` over this layer.
            pub fn overlay(&mut self, top: &RawConfig) {
                if top.preset.is_some() {
                    self.preset = top.preset.clone();
                }
                $(if top.$key.is_some() {
                    self.$key = top.$key;
                })*
            }

            fn entries(&self) -> Vec<(&'static str, Option<String>)> {
                vec![$((stringify!($key), self.$key.map(|v| v.to_string())),)*]
            }

            fn complete(&self, preset: String) -> Result<ExperimentConfig, Vec<&'static str>> {
                let mut missing = Vec::new();
                $(if self.$key.is_none() {
                    missing.push(stringify!($key));
                })*
                if !missing.is_empty() {
                    return Err(missing);
                }
                Ok(ExperimentConfig {
                    preset,
                    $($key: self.$key.expect("checked above"),)*
                })
            }
        }

        impl ExperimentConfig {
            /// `(key, value)` for every key, in declaration order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                let mut out = vec![("preset", self.preset.clone())];
                $(out.push((stringify!($key), self.$key.to_string()));)*
                out
            }
        }
    };
}

config_keys! {
    t_on: f64,
    t_off: f64,
    t_s: f64,
    r0: f64,
    p_primary: f64,
    noise_p: f64,
    noise_s: f64,
    g_pp: f64,
    g_ss: f64,
    g_ps: f64,
    g_sp: f64,
    p_max: f64,
    gamma0: f64,
    t_cap: f64,
    power_points: usize,
    time_points: usize,
    threshold_points: usize,
    refine_rounds: usize,
    cycles: u64,
    seed: u64,
    replicas: usize,
    warmup_cycles: u64,
    sensing_lag: f64,
    credit_sensing_primary: bool,
}

/// Defaults shared by every preset, including `custom`.
fn common_defaults() -> RawConfig {
    let grid = GridSpec::default();
    let sim = SimConfig::default();
    RawConfig {
        gamma0: Some(DEFAULT_GAMMA0),
        t_cap: Some(grid.t_cap),
        power_points: Some(grid.power_points),
        time_points: Some(grid.time_points),
        threshold_points: Some(grid.threshold_points),
        refine_rounds: Some(grid.refine_rounds),
        cycles: Some(sim.cycles),
        seed: Some(sim.seed),
        replicas: Some(sim.replicas),
        warmup_cycles: Some(sim.warmup_cycles),
        sensing_lag: Some(sim.sensing_lag),
        credit_sensing_primary: Some(sim.credit_sensing_primary),
        ..RawConfig::default()
    }
}

fn preset_defaults(name: &str) -> CliResult<RawConfig> {
    let mut raw = common_defaults();
    if name == CUSTOM {
        return Ok(raw);
    }
    let preset = ChannelPreset::from_name(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset `{name}` (expected channel_a, channel_b, tiny_gsp or custom)"
        ))
    })?;
    let link = preset.link();
    raw.overlay(&RawConfig {
        t_on: Some(presets::T_ON),
        t_off: Some(presets::T_OFF),
        t_s: Some(presets::SENSING_TIME),
        r0: Some(link.r_primary),
        p_primary: Some(link.p_primary),
        noise_p: Some(link.noise_p),
        noise_s: Some(link.noise_s),
        g_pp: Some(link.mean_gain_pp),
        g_ss: Some(link.mean_gain_ss),
        g_ps: Some(link.mean_gain_ps),
        g_sp: Some(link.mean_gain_sp),
        p_max: Some(link.p_max),
        ..RawConfig::default()
    });
    Ok(raw)
}

pub fn read_config_file(path: &Path) -> CliResult<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// A resolved configuration together with the keys that departed from
/// the preset.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub overrides: Vec<String>,
}

/// Layers preset, file and flags, then validates the result.
pub fn resolve(file: Option<&RawConfig>, flags: &RawConfig) -> CliResult<Resolved> {
    let mut user = RawConfig::default();
    if let Some(file) = file {
        user.overlay(file);
    }
    user.overlay(flags);

    let preset = user.preset.clone().unwrap_or_else(|| DEFAULT_PRESET.to_string());
    let base = preset_defaults(&preset)?;
    let mut merged = base.clone();
    merged.overlay(&user);

    let config = merged.complete(preset.clone()).map_err(|missing| {
        if preset == CUSTOM {
            CliError::Config(format!("preset custom requires every model key; missing {}", missing.join(", ")))
        } else {
            CliError::Config(format!("missing keys: {}", missing.join(", ")))
        }
    })?;

    let overrides = if preset == CUSTOM {
        Vec::new()
    } else {
        base.entries()
            .into_iter()
            .zip(merged.entries())
            .filter_map(|((key, preset_value), (_, value))| match (preset_value, value) {
                (Some(p), Some(v)) if p != v => Some(format!("{key} = {v} (preset {preset}: {p})")),
                _ => None,
            })
            .collect()
    };

    config.validate()?;
    Ok(Resolved { config, overrides })
}

fn invalid(e: cogduty::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        let scenario = self.scenario()?;
        self.metric()?;
        self.grid().validate().map_err(invalid)?;
        self.sim_config().validate(scenario.t_s).map_err(invalid)
    }

    pub fn traffic(&self) -> CliResult<TrafficModel> {
        TrafficModel::new(self.t_on, self.t_off).map_err(invalid)
    }

    pub fn link(&self) -> LinkBudget {
        LinkBudget {
            p_primary: self.p_primary,
            r_primary: self.r0,
            noise_p: self.noise_p,
            noise_s: self.noise_s,
            mean_gain_pp: self.g_pp,
            mean_gain_ss: self.g_ss,
            mean_gain_ps: self.g_ps,
            mean_gain_sp: self.g_sp,
            p_max: self.p_max,
        }
    }

    pub fn scenario(&self) -> CliResult<Scenario> {
        Scenario::new(self.traffic()?, self.link(), self.t_s).map_err(invalid)
    }

    pub fn metric(&self) -> CliResult<SoftMetricModel> {
        SoftMetricModel::new(self.gamma0).map_err(invalid)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            power_points: self.power_points,
            time_points: self.time_points,
            threshold_points: self.threshold_points,
            refine_rounds: self.refine_rounds,
            t_cap: self.t_cap,
            ..GridSpec::default()
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            cycles: self.cycles,
            seed: self.seed,
            sensing_lag: self.sensing_lag,
            credit_sensing_primary: self.credit_sensing_primary,
            replicas: self.replicas,
            warmup_cycles: self.warmup_cycles,
        }
    }
}

/// Parses `start:end:step` (both ends included) or a single value.
pub fn parse_alphas(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |why: &dyn Display| CliError::Config(format!("alphas `{spec}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(&e));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [single] => vec![num(single)?],
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if step.is_nan() || step <= 0.0 || end < start {
                return Err(bad(&"need end >= start and step > 0"));
            }
            let steps = (end - start) / step;
            let n = (steps + 1e-9).floor() as usize;
            let mut v: Vec<f64> = (0..=n).map(|i| round12(start + step * i as f64)).collect();
            if (steps - steps.round()).abs() <= 1e-9 {
                v[n] = end;
            }
            v
        }
        _ => return Err(bad(&"expected start:end:step or a single value")),
    };
    if let Some(a) = values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(bad(&format!("{a} is outside [0, 1]")));
    }
    Ok(values)
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
