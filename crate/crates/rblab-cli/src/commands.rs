//! The five commands. Each builds its tables through `rblab_core`, writes them via
//! `OutputTarget`, and finishes with a one-line summary on stdout.

use crate::config::{self, DEFAULT_SEED};
use crate::output::{OutputTarget, RunManifest};
use crate::{Cli, CliError, Command, GatesetArg, SimulateArgs};
use rblab_core::compile::{
    calibrated_convention, decompose_gateset, gate_ptm_expected, pulse_set, Convention,
    ErrorModel, GatesetKind,
};
use rblab_core::engine::{fit_decay, run_experiment, FitOptions, Shots};
use rblab_core::gateset::{total_variation, uniform_on, CliffordGroup, GROUP_ORDER};
use rblab_core::ptm::Ptm;
use rblab_core::report::{Cell, Table};
use rblab_core::sweep::{run_sweep, SweepConfig, SweepError};
use rblab_core::theory::{
    averaged_superop, compute_l, eigenvalues_by_magnitude, RecursionMatrix,
};
use serde_json::json;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Markov { max_m } => cmd_markov(cli, *max_m),
        Command::Decompose { row, gateset, convention } => {
            cmd_decompose(cli, *row, *gateset, convention)
        }
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Sweep { models, rows, lengths, sequences, shots } => {
            cmd_sweep(cli, models.as_deref(), rows.as_deref(), lengths.as_deref(), *sequences, *shots)
        }
        Command::Spectral { gateset, noise, row, strength, xyz } => {
            cmd_spectral(cli, *gateset, noise, *row, *strength, xyz.as_deref())
        }
    }
}

fn group() -> &'static CliffordGroup {
    CliffordGroup::shared()
}

fn cmd_markov(cli: &Cli, max_m: u32) -> Result<(), CliError> {
    if max_m == 0 {
        return Err(CliError::Usage("--max-m must be at least 1".to_string()));
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let manifest = RunManifest::start(
        "markov",
        seed,
        json!({ "max_m": max_m, "format": cli.format.name() }),
    );

    let g = group();
    let (even, odd) = g.design_subsets();
    let even_uniform = uniform_on(even);
    let odd_uniform = uniform_on(odd);
    let mut table = Table::new(&["m", "label", "probability", "tv_to_even_uniform", "tv_to_odd_uniform"]);
    let mut final_tv = (0.0, 0.0);
    for m in 1..=max_m {
        let law = g.circuit_distribution(m).map_err(|e| CliError::Usage(e.to_string()))?;
        let tv_even = total_variation(&law, &even_uniform);
        let tv_odd = total_variation(&law, &odd_uniform);
        final_tv = (tv_even, tv_odd);
        for (label, &prob) in law.iter().enumerate() {
            table.push(vec![
                Cell::Int(m as i64),
                Cell::Int(label as i64),
                Cell::Float(prob),
                Cell::Float(tv_even),
                Cell::Float(tv_odd),
            ]);
        }
    }

    let target = OutputTarget::resolve(cli, "markov");
    let path = target.write_table(&table, None)?;
    target.write_manifest(&manifest.finish())?;
    println!(
        "wrote {} ({} rows); at m = {max_m}: TV {:.3e} to the even coset, {:.3e} to the odd",
        path.display(),
        table.rows.len(),
        final_tv.0,
        final_tv.1
    );
    Ok(())
}

fn parse_convention(name: &str, kind: GatesetKind) -> Result<Convention, CliError> {
    match name {
        "calibrated" => Ok(calibrated_convention(kind)),
        "global-min" => Ok(Convention::GlobalMin),
        "global-min-nonempty" => Ok(Convention::GlobalMinNonempty),
        "pauli-first" => Ok(Convention::PauliFirst),
        other => Err(CliError::Usage(format!(
            "unknown convention `{other}`; expected calibrated, global-min, \
             global-min-nonempty, or pauli-first"
        ))),
    }
}

fn cmd_decompose(cli: &Cli, row: u8, gateset: GatesetArg, convention: &str) -> Result<(), CliError> {
    let kind = gateset.kind();
    let conv = parse_convention(convention, kind)?;
    let ps = pulse_set(row).map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let manifest = RunManifest::start(
        "decompose",
        seed,
        json!({
            "row": row,
            "gateset": kind.name(),
            "convention": conv.name(),
            "format": cli.format.name(),
        }),
    );

    let decomposition = decompose_gateset(group(), kind, &ps, conv)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut table = Table::new(&["gate", "rep", "pulses", "noisy_pulses"]);
    for d in &decomposition.entries {
        let rep = d.rep.map(|(q, p)| format!("q{q}p{p}")).unwrap_or_default();
        table.push(vec![
            Cell::Int(d.gate as i64),
            Cell::Str(rep),
            Cell::Str(d.pulse_string()),
            Cell::Int(d.noisy_count as i64),
        ]);
    }

    let target = OutputTarget::resolve(cli, "decompose");
    let path = target.write_table(&table, None)?;
    target.write_manifest(&manifest.finish())?;

    let mean = decomposition.mean_noisy_count();
    let reference = decomposition.target_mean();
    let verdict = if decomposition.matches_target() { "PASS" } else { "FAIL" };
    println!(
        "wrote {} ({} gates); row {row} {} via {}: mean noisy pulses {mean:.5} vs reference {reference:.5} → {verdict}",
        path.display(),
        table.rows.len(),
        kind.name(),
        conv.name()
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => config::load_file(path)?,
        None => config::FileConfig::default(),
    };
    let resolved = config::merge(args, file, cli.seed)?;
    let manifest = RunManifest::start("simulate", resolved.seed, resolved.manifest_config());

    let data = run_experiment(group(), &resolved.rb, resolved.seed)
        .map_err(|e| CliError::Usage(format!("configuration rejected: {e}")))?;

    let protocol_cell = Cell::Str(resolved.rb.protocol.name().to_string());
    let row_cell = match resolved.pulse_row {
        Some(r) => Cell::Int(r as i64),
        None => Cell::Str("abstract".to_string()),
    };
    let model_cell = Cell::Str(resolved.noise_name.clone());
    let shots_cell = match resolved.rb.shots {
        Shots::Exact => Cell::Str("exact".to_string()),
        Shots::Finite(n) => Cell::Int(n as i64),
    };

    let mut dataset = Table::new(&[
        "protocol", "pulse_row", "error_model", "m", "mean_survival", "stderr",
        "n_sequences", "shots",
    ]);
    for ((&m, &mean), &stderr) in data.lengths.iter().zip(&data.means).zip(&data.stderrs) {
        dataset.push(vec![
            protocol_cell.clone(),
            row_cell.clone(),
            model_cell.clone(),
            Cell::Int(m as i64),
            Cell::Float(mean),
            Cell::Float(stderr),
            Cell::Int(resolved.rb.sequences as i64),
            shots_cell.clone(),
        ]);
    }
    let target = OutputTarget::resolve(cli, "simulate");
    let dataset_path = target.write_table(&dataset, Some("dataset"))?;

    let fit = match fit_decay(&data.points(), &FitOptions::from_config(&resolved.rb)) {
        Ok(fit) => fit,
        Err(e) => {
            // The dataset is already on disk; record the run before failing.
            target.write_manifest(&manifest.finish())?;
            return Err(CliError::Analysis(format!(
                "fit failed for {}: {e}",
                dataset_path.display()
            )));
        }
    };

    let mut fit_table = Table::new(&[
        "protocol", "pulse_row", "error_model", "A", "B", "p", "r", "residual",
        "ci_halfwidth",
    ]);
    fit_table.push(vec![
        protocol_cell,
        row_cell,
        model_cell,
        Cell::Float(fit.a),
        Cell::Float(fit.b),
        Cell::Float(fit.p),
        Cell::Float(fit.infidelity),
        Cell::Float(fit.rms_residual),
        Cell::Float(fit.ci_half_width),
    ]);
    let fit_path = target.write_table(&fit_table, Some("fit"))?;
    target.write_manifest(&manifest.finish())?;

    println!("wrote {} and {}", dataset_path.display(), fit_path.display());
    println!(
        "{} fit: p = {:.9}, r = {:.4e}, A = {:.6}, B = {:.6} ({} points)",
        resolved.rb.protocol.name(),
        fit.p,
        fit.infidelity,
        fit.a,
        fit.b,
        fit.points_used
    );
    Ok(())
}

fn parse_models(spec: &str) -> Result<Vec<ErrorModel>, CliError> {
    if spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|t| match t.trim() {
            "over_rotation" => Ok(ErrorModel::over_rotation()),
            "z_rotation" => Ok(ErrorModel::z_rotation()),
            "dephasing" => Ok(ErrorModel::dephasing()),
            other => Err(CliError::Usage(format!(
                "unknown error model `{other}`; expected over_rotation, z_rotation, or dephasing"
            ))),
        })
        .collect()
}

fn cmd_sweep(
    cli: &Cli,
    models: Option<&str>,
    rows: Option<&str>,
    lengths: Option<&str>,
    sequences: Option<u32>,
    shots: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg = SweepConfig::default();
    if let Some(spec) = models {
        cfg.models = parse_models(spec)?;
    }
    if let Some(spec) = rows {
        cfg.rows = config::parse_u8_list(spec, "rows")?;
        for &row in &cfg.rows {
            if !(1..=9).contains(&row) {
                return Err(CliError::Usage(format!(
                    "row {row} is out of range; rows are 1–9"
                )));
            }
        }
    }
    if let Some(spec) = lengths {
        cfg.lengths = config::parse_u32_list(spec, "lengths")?;
    }
    if let Some(s) = sequences {
        cfg.sequences = s;
    }
    if let Some(n) = shots {
        cfg.shots = if n == 0 { Shots::Exact } else { Shots::Finite(n) };
    }

    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let model_names: Vec<&str> = cfg.models.iter().map(|m| m.name()).collect();
    let manifest = RunManifest::start(
        "sweep",
        seed,
        json!({
            "models": model_names,
            "rows": cfg.rows,
            "lengths": cfg.lengths,
            "sequences": cfg.sequences,
            "shots": config::shots_value(cfg.shots),
            "format": cli.format.name(),
        }),
    );

    let records = run_sweep(group(), &cfg, seed).map_err(|e| match e {
        SweepError::Fit { .. } => CliError::Analysis(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;

    let mut table = Table::new(&[
        "model", "row", "r_clifford", "r_nist", "n_clifford", "n_nist",
        "scaled_clifford", "scaled_nist", "ratio",
    ]);
    for rec in &records {
        table.push(vec![
            Cell::Str(rec.model.clone()),
            Cell::Int(rec.row as i64),
            Cell::Float(rec.r_clifford),
            Cell::Float(rec.r_nist),
            Cell::Float(rec.n_clifford),
            Cell::Float(rec.n_nist),
            Cell::Float(rec.scaled_clifford),
            Cell::Float(rec.scaled_nist),
            Cell::Float(rec.ratio),
        ]);
    }
    let target = OutputTarget::resolve(cli, "sweep");
    let path = target.write_table(&table, None)?;
    target.write_manifest(&manifest.finish())?;

    match records.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)) {
        Some(top) => println!(
            "wrote {} ({} cells); largest infidelity ratio {:.2} at {} row {}",
            path.display(),
            records.len(),
            top.ratio,
            top.model,
            top.row
        ),
        None => println!("wrote {} (0 cells)", path.display()),
    }
    Ok(())
}

fn cmd_spectral(
    cli: &Cli,
    gateset: GatesetArg,
    noise: &str,
    row: u8,
    strength: Option<f64>,
    xyz: Option<&str>,
) -> Result<(), CliError> {
    let g = group();
    let kind = gateset.kind();
    let labels: Vec<u8> = match kind {
        GatesetKind::Clifford => (0..GROUP_ORDER as u8).collect(),
        GatesetKind::Nist => g.nist_labels().to_vec(),
    };
    let channel_pairs = |err: &Ptm| -> Vec<(Ptm, Ptm)> {
        labels.iter().map(|&l| (*g.ptm(l), Ptm::compose(err, g.ptm(l)))).collect()
    };

    // (ideal, noisy) pairs, plus the Bloch diagonal when the noise is gate-independent
    // (that is when the decay recursion applies).
    let (pairs, diagonal, noise_label): (Vec<(Ptm, Ptm)>, Option<[f64; 3]>, String) = match noise {
        "ideal" => (
            labels.iter().map(|&l| (*g.ptm(l), *g.ptm(l))).collect(),
            Some([1.0, 1.0, 1.0]),
            "ideal".to_string(),
        ),
        "depolarizing" => {
            let p = strength.ok_or_else(|| {
                CliError::Usage(
                    "--noise depolarizing needs --strength (the per-gate decay parameter)"
                        .to_string(),
                )
            })?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(CliError::Usage(format!("--strength {p} must lie in (0, 1]")));
            }
            (channel_pairs(&Ptm::depolarizing(p)), Some([p, p, p]), format!("depolarizing({p})"))
        }
        "diagonal" => {
            let spec = xyz.ok_or_else(|| {
                CliError::Usage("--noise diagonal needs --xyz x,y,z".to_string())
            })?;
            let [x, y, z] = config::parse_f64_triple(spec, "xyz")?;
            (
                channel_pairs(&Ptm::pauli_diagonal(x, y, z)),
                Some([x, y, z]),
                format!("diagonal({x},{y},{z})"),
            )
        }
        "over_rotation" | "z_rotation" | "dephasing" => {
            let model = match (noise, strength) {
                ("over_rotation", Some(offset)) => ErrorModel::OverRotation { offset },
                ("over_rotation", None) => ErrorModel::over_rotation(),
                ("z_rotation", Some(angle)) => ErrorModel::ZRotation { angle },
                ("z_rotation", None) => ErrorModel::z_rotation(),
                (_, Some(alpha)) => ErrorModel::Dephasing { alpha },
                (_, None) => ErrorModel::dephasing(),
            };
            let ps = pulse_set(row).map_err(|e| CliError::Usage(e.to_string()))?;
            let table = decompose_gateset(g, kind, &ps, calibrated_convention(kind))
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let pairs: Vec<(Ptm, Ptm)> = table
                .entries
                .iter()
                .map(|d| (*g.ptm(d.gate), gate_ptm_expected(&d.pulses, &model)))
                .collect();
            // Gate-dependent noise: no single channel diagonal drives the recursion.
            (pairs, None, format!("{noise} row {row}"))
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown noise `{other}`; expected ideal, depolarizing, diagonal, \
                 over_rotation, z_rotation, or dephasing"
            )))
        }
    };

    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let manifest = RunManifest::start(
        "spectral",
        seed,
        json!({
            "gateset": kind.name(),
            "noise": noise_label,
            "format": cli.format.name(),
        }),
    );

    let superop = averaged_superop(&pairs).map_err(|e| CliError::Usage(e.to_string()))?;
    let eigenvalues = eigenvalues_by_magnitude(&superop);
    let mut table = Table::new(&["context", "index", "real", "imag"]);
    for (i, e) in eigenvalues.iter().enumerate() {
        table.push(vec![
            Cell::Str("superop".to_string()),
            Cell::Int(i as i64),
            Cell::Float(e.re),
            Cell::Float(e.im),
        ]);
    }
    if kind == GatesetKind::Nist {
        if let Some([x, y, z]) = diagonal {
            for (i, lambda) in RecursionMatrix::new(x, y, z).spectrum().iter().enumerate() {
                table.push(vec![
                    Cell::Str("recursion".to_string()),
                    Cell::Int(i as i64),
                    Cell::Float(*lambda),
                    Cell::Float(0.0),
                ]);
            }
        }
    }

    let p = eigenvalues[1].re;
    if !(p > 0.0 && p <= 1.0 + 1e-9) {
        return Err(CliError::Analysis(format!(
            "decay eigenvalue {p} lies outside (0, 1]; no projector analysis is possible"
        )));
    }
    let analysis =
        compute_l(&pairs, p.min(1.0)).map_err(|e| CliError::Analysis(e.to_string()))?;
    table.push(vec![
        Cell::Str("l_spread".to_string()),
        Cell::Int(0),
        Cell::Float(analysis.singular_spread),
        Cell::Float(0.0),
    ]);
    table.push(vec![
        Cell::Str("l_iterations".to_string()),
        Cell::Int(0),
        Cell::Float(analysis.iterations as f64),
        Cell::Float(0.0),
    ]);

    let target = OutputTarget::resolve(cli, "spectral");
    let path = target.write_table(&table, None)?;
    target.write_manifest(&manifest.finish())?;

    let top: Vec<String> = eigenvalues[..4]
        .iter()
        .map(|e| {
            if e.im.abs() < 1e-12 {
                format!("{:.6}", e.re)
            } else {
                format!("{:.6}{:+.6}i", e.re, e.im)
            }
        })
        .collect();
    println!(
        "wrote {}; {} under {}: top eigenvalues [{}], projector spread {:.6} after {} iterations",
        path.display(),
        kind.name(),
        noise_label,
        top.join(", "),
        analysis.singular_spread,
        analysis.iterations
    );
    Ok(())
}
