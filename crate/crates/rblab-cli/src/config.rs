//! Flat key-value configuration for `simulate`, merged with flag overrides (flags win),
//! plus the comma-list parsers shared by the other commands.

use crate::{CliError, SimulateArgs};
use rblab_core::compile::ErrorModel;
use rblab_core::engine::{NoiseSpec, Protocol, RbConfig, Shots};
use rblab_core::ptm::Ptm;
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::Path;

pub const DEFAULT_SEED: u64 = 2024;

/// Every key the config file may carry; all optional so flags can fill the gaps.
/// Unknown keys are rejected by name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub protocol: Option<String>,
    pub lengths: Option<String>,
    pub sequences: Option<u32>,
    pub shots: Option<u64>,
    pub noise: Option<String>,
    pub noise_strength: Option<f64>,
    pub pulse_row: Option<u8>,
    pub randomized_recovery: Option<bool>,
    pub pi_sign_sampling: Option<bool>,
    pub fix_b: Option<f64>,
    pub free_b: Option<bool>,
    pub min_fit_length: Option<u32>,
    pub seed: Option<u64>,
}

pub fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
}

/// A fully merged experiment: everything the engine needs plus the labels the
/// artifacts carry.
pub struct ResolvedSim {
    pub rb: RbConfig,
    /// Human-readable noise description, e.g. `depolarizing(0.99)`.
    pub noise_name: String,
    /// Pulse row for pulse-level noise; `None` means abstract gate-level noise.
    pub pulse_row: Option<u8>,
    pub seed: u64,
}

impl ResolvedSim {
    pub fn manifest_config(&self) -> Value {
        json!({
            "protocol": self.rb.protocol.name(),
            "lengths": self.rb.lengths,
            "sequences": self.rb.sequences,
            "shots": shots_value(self.rb.shots),
            "noise": self.noise_name,
            "pulse_row": self.pulse_row,
            "randomized_recovery": self.rb.randomized_recovery,
            "pi_sign_sampling": self.rb.pi_sign_sampling,
            "fix_b": self.rb.fit_fix_b,
            "min_fit_length": self.rb.fit_min_length,
        })
    }
}

pub fn shots_value(shots: Shots) -> Value {
    match shots {
        Shots::Exact => json!("exact"),
        Shots::Finite(n) => json!(n),
    }
}

pub fn merge(
    args: &SimulateArgs,
    file: FileConfig,
    cli_seed: Option<u64>,
) -> Result<ResolvedSim, CliError> {
    let protocol_name = args.protocol.clone().or(file.protocol).ok_or_else(|| {
        CliError::Usage(
            "missing required config key `protocol` (\"srb\" or \"nist\"); set it in the \
             config file or pass --protocol"
                .to_string(),
        )
    })?;
    let protocol = parse_protocol(&protocol_name)?;

    let mut rb = RbConfig::new(protocol);
    if let Some(spec) = args.lengths.clone().or(file.lengths) {
        rb.lengths = parse_u32_list(&spec, "lengths")?;
    }
    if let Some(s) = args.sequences.or(file.sequences) {
        rb.sequences = s;
    }
    if let Some(n) = args.shots.or(file.shots) {
        rb.shots = if n == 0 { Shots::Exact } else { Shots::Finite(n) };
    }
    if let Some(r) = args.randomized_recovery.or(file.randomized_recovery) {
        rb.randomized_recovery = r;
    }
    if let Some(p) = args.pi_sign_sampling.or(file.pi_sign_sampling) {
        rb.pi_sign_sampling = p;
    }
    if let Some(m) = args.min_fit_length.or(file.min_fit_length) {
        rb.fit_min_length = m;
    }

    let free_b = args.free_b || file.free_b.unwrap_or(false);
    match (free_b, args.fix_b.or(file.fix_b)) {
        (true, Some(_)) => {
            return Err(CliError::Usage(
                "`fix_b` and `free_b` are mutually exclusive".to_string(),
            ))
        }
        (true, None) => rb.fit_fix_b = None,
        (false, Some(b)) => {
            if !(0.0..=1.0).contains(&b) {
                return Err(CliError::Usage(format!("fix_b {b} must lie in [0, 1]")));
            }
            rb.fit_fix_b = Some(b);
        }
        // The baseline is only pinned to 1/2 when the randomized recovery guarantees it.
        (false, None) => rb.fit_fix_b = rb.randomized_recovery.then_some(0.5),
    }

    let noise_name = args.noise.clone().or(file.noise).unwrap_or_else(|| "ideal".to_string());
    let strength = args.noise_strength.or(file.noise_strength);
    let pulse_row = args.pulse_row.or(file.pulse_row);
    let (noise, noise_label, used_row) = resolve_noise(&noise_name, strength, pulse_row)?;
    rb.noise = noise;

    let seed = cli_seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    Ok(ResolvedSim { rb, noise_name: noise_label, pulse_row: used_row, seed })
}

pub fn parse_protocol(name: &str) -> Result<Protocol, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "srb" => Ok(Protocol::Srb),
        "nist" => Ok(Protocol::Nist),
        other => Err(CliError::Usage(format!(
            "unknown protocol `{other}`; expected \"srb\" or \"nist\""
        ))),
    }
}

fn resolve_noise(
    name: &str,
    strength: Option<f64>,
    pulse_row: Option<u8>,
) -> Result<(NoiseSpec, String, Option<u8>), CliError> {
    let pulse_level = |model: ErrorModel, label: String| {
        let row = pulse_row.ok_or_else(|| {
            CliError::Usage(format!(
                "noise model `{name}` needs the config key `pulse_row` (1–9)"
            ))
        })?;
        if !(1..=9).contains(&row) {
            return Err(CliError::Usage(format!(
                "pulse_row {row} is out of range; rows are 1–9"
            )));
        }
        Ok((NoiseSpec::PulseLevel { row, model }, label, Some(row)))
    };

    match name {
        "ideal" => Ok((NoiseSpec::Ideal, "ideal".to_string(), None)),
        "depolarizing" => {
            let p = strength.ok_or_else(|| {
                CliError::Usage(
                    "noise model `depolarizing` needs the config key `noise_strength` \
                     (the per-gate decay parameter)"
                        .to_string(),
                )
            })?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(CliError::Usage(format!(
                    "depolarizing noise_strength {p} must lie in (0, 1]"
                )));
            }
            Ok((
                NoiseSpec::GateChannel(Ptm::depolarizing(p)),
                format!("depolarizing({p})"),
                None,
            ))
        }
        "over_rotation" => {
            let model = match strength {
                Some(offset) => ErrorModel::OverRotation { offset },
                None => ErrorModel::over_rotation(),
            };
            let label = match &model {
                ErrorModel::OverRotation { offset } => format!("over_rotation({offset})"),
                _ => unreachable!(),
            };
            pulse_level(model, label)
        }
        "z_rotation" => {
            let model = match strength {
                Some(angle) => ErrorModel::ZRotation { angle },
                None => ErrorModel::z_rotation(),
            };
            let label = match &model {
                ErrorModel::ZRotation { angle } => format!("z_rotation({angle})"),
                _ => unreachable!(),
            };
            pulse_level(model, label)
        }
        "dephasing" => {
            let model = match strength {
                Some(alpha) => ErrorModel::Dephasing { alpha },
                None => ErrorModel::dephasing(),
            };
            let label = match &model {
                ErrorModel::Dephasing { alpha } => format!("dephasing({alpha})"),
                _ => unreachable!(),
            };
            pulse_level(model, label)
        }
        other => Err(CliError::Usage(format!(
            "unknown noise model `{other}`; expected ideal, depolarizing, over_rotation, \
             z_rotation, or dephasing"
        ))),
    }
}

/// "1,2,4" → [1, 2, 4]. An empty or whitespace-only spec is an empty list; callers
/// decide whether that is allowed.
pub fn parse_u32_list(spec: &str, key: &str) -> Result<Vec<u32>, CliError> {
    if spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<u32>().map_err(|_| {
                CliError::Usage(format!("`{key}` entry `{t}` is not a non-negative integer"))
            })
        })
        .collect()
}

pub fn parse_u8_list(spec: &str, key: &str) -> Result<Vec<u8>, CliError> {
    parse_u32_list(spec, key)?
        .into_iter()
        .map(|v| {
            u8::try_from(v)
                .map_err(|_| CliError::Usage(format!("`{key}` entry `{v}` is too large")))
        })
        .collect()
}

pub fn parse_f64_triple(spec: &str, key: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{key}` entry `{t}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| {
        CliError::Usage(format!("`{key}` must be a comma triple, e.g. 0.98,0.99,0.97"))
    })
}
