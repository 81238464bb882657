//! Infidelity comparison sweep: error models × pulse rows × both protocols.
//!
//! Each cell simulates the same physical noise under both benchmarking protocols, fits
//! the two decays, and scales each fitted infidelity by the mean number of noisy pulses
//! per gate. Incoherent noise makes the scaled values agree; coherent noise does not.

use crate::compile::{
    calibrated_convention, decompose_gateset, pulse_set, CompileError, ErrorModel, GatesetKind,
};
use crate::engine::{
    derive_seed, fit_decay, run_experiment, EngineError, FitError, FitOptions, NoiseSpec,
    Protocol, RbConfig, Shots,
};
use crate::gateset::CliffordGroup;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("fit failed for {model} row {row} ({protocol}): {source}")]
    Fit {
        model: String,
        row: u8,
        protocol: &'static str,
        source: FitError,
    },
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub models: Vec<ErrorModel>,
    pub rows: Vec<u8>,
    pub lengths: Vec<u32>,
    pub sequences: u32,
    pub shots: Shots,
    pub pi_sign_sampling: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            models: vec![
                ErrorModel::over_rotation(),
                ErrorModel::z_rotation(),
                ErrorModel::dephasing(),
            ],
            rows: (1..=9).collect(),
            lengths: crate::engine::default_lengths(),
            sequences: 30,
            shots: Shots::Exact,
            pi_sign_sampling: false,
        }
    }
}

/// One (model, row) cell of the comparison.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub model: String,
    pub row: u8,
    /// Mean noisy pulses per gate under each protocol's calibrated compilation.
    pub n_clifford: f64,
    pub n_nist: f64,
    /// Fitted decay parameters.
    pub p_clifford: f64,
    pub p_nist: f64,
    /// Fitted infidelities (1 − p)/2.
    pub r_clifford: f64,
    pub r_nist: f64,
    /// Infidelity per noisy pulse: r divided by the mean pulse count.
    pub scaled_clifford: f64,
    pub scaled_nist: f64,
    /// Larger fitted infidelity over the smaller one. Incoherent noise keeps this near
    /// the pulse-count ratio; coherent noise can push it well past it.
    pub ratio: f64,
}

fn run_protocol(
    group: &CliffordGroup,
    sweep: &SweepConfig,
    protocol: Protocol,
    row: u8,
    model: &ErrorModel,
    seed: u64,
) -> Result<f64, SweepError> {
    let mut cfg = RbConfig::new(protocol);
    cfg.lengths = sweep.lengths.clone();
    cfg.sequences = sweep.sequences;
    cfg.shots = sweep.shots;
    cfg.pi_sign_sampling = sweep.pi_sign_sampling;
    cfg.noise = NoiseSpec::PulseLevel { row, model: model.clone() };
    let data = run_experiment(group, &cfg, seed)?;
    let fit = fit_decay(&data.points(), &FitOptions::from_config(&cfg)).map_err(|source| {
        SweepError::Fit { model: model.name().into(), row, protocol: protocol.name(), source }
    })?;
    Ok(fit.p)
}

pub fn run_sweep(
    group: &CliffordGroup,
    sweep: &SweepConfig,
    seed: u64,
) -> Result<Vec<SweepRecord>, SweepError> {
    let mut records = Vec::with_capacity(sweep.models.len() * sweep.rows.len());
    for (mi, model) in sweep.models.iter().enumerate() {
        for &row in &sweep.rows {
            let ps = pulse_set(row)?;
            let n_clifford = decompose_gateset(
                group,
                GatesetKind::Clifford,
                &ps,
                calibrated_convention(GatesetKind::Clifford),
            )?
            .mean_noisy_count();
            let n_nist = decompose_gateset(
                group,
                GatesetKind::Nist,
                &ps,
                calibrated_convention(GatesetKind::Nist),
            )?
            .mean_noisy_count();

            let p_clifford = run_protocol(
                group,
                sweep,
                Protocol::Srb,
                row,
                model,
                derive_seed(seed, &[mi as u64, row as u64, 0]),
            )?;
            let p_nist = run_protocol(
                group,
                sweep,
                Protocol::Nist,
                row,
                model,
                derive_seed(seed, &[mi as u64, row as u64, 1]),
            )?;

            let r_clifford = (1.0 - p_clifford) / 2.0;
            let r_nist = (1.0 - p_nist) / 2.0;
            let scaled_clifford = r_clifford / n_clifford;
            let scaled_nist = r_nist / n_nist;
            records.push(SweepRecord {
                model: model.name().into(),
                row,
                n_clifford,
                n_nist,
                p_clifford,
                p_nist,
                r_clifford,
                r_nist,
                scaled_clifford,
                scaled_nist,
                ratio: r_clifford.max(r_nist) / r_clifford.min(r_nist),
            });
        }
    }
    Ok(records)
}
