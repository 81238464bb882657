//! Randomized-benchmarking sequence simulation and decay fitting.
//!
//! A run draws random gate sequences, appends the recovery gate that ideally returns the
//! qubit to |0⟩ (or to |1⟩ under a randomized recovery flip), pushes the Bloch vector
//! through the noisy channels, and records survival probabilities. Fitting the mean
//! survival against sequence length with A·pᵐ + B yields the decay parameter p.
//!
//! Determinism: every (length, replicate) task seeds its own generator from the root seed,
//! so results are bit-identical regardless of thread count or scheduling.

use crate::compile::{
    calibrated_convention, decompose_gateset, gate_ptm_expected, gate_ptm_sampled, pulse_set,
    CompileError, Convention, ErrorModel, GatesetKind, Pulse,
};
use crate::gateset::{CliffordGroup, GateLabel, GatesetError, GROUP_ORDER};
use crate::ptm::{Ptm, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use thiserror::Error;

/// Gate label of the π rotation about x, the recovery target when the flip coin lands tails.
const X_PI_LABEL: GateLabel = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Gateset(#[from] GatesetError),
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("survival means are constant to within 1e-9; the decay parameter is unidentifiable")]
    Unidentifiable,
    #[error("need at least {needed} distinct sequence lengths after filtering, got {got}")]
    InsufficientLengths { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Standard randomized benchmarking over the full 24-element group.
    Srb,
    /// Quarter-π benchmarking: gates drawn from the eight composite channels, sampled
    /// through their sixteen (quarter-π, Pauli) decompositions.
    Nist,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Srb => "srb",
            Protocol::Nist => "nist",
        }
    }

    pub fn gateset_kind(self) -> GatesetKind {
        match self {
            Protocol::Srb => GatesetKind::Clifford,
            Protocol::Nist => GatesetKind::Nist,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    /// Record exact survival probabilities.
    Exact,
    /// Draw a binomial count per sequence and record the empirical fraction.
    Finite(u64),
}

#[derive(Debug, Clone)]
pub enum NoiseSpec {
    Ideal,
    /// The same error channel follows every gate (and the recovery).
    GateChannel(Ptm),
    /// Gates compile to pulses from the given row; errors attach to each noisy pulse.
    PulseLevel { row: u8, model: ErrorModel },
}

/// State-preparation and measurement errors: `prep` acts after the ideal |0⟩
/// preparation, `meas` acts before the ideal z readout.
#[derive(Debug, Clone, Copy)]
pub struct SpamSpec {
    pub prep: Ptm,
    pub meas: Ptm,
}

impl SpamSpec {
    pub fn ideal() -> Self {
        SpamSpec { prep: Ptm::identity(), meas: Ptm::identity() }
    }
}

pub fn default_lengths() -> Vec<u32> {
    vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512]
}

#[derive(Debug, Clone)]
pub struct RbConfig {
    pub protocol: Protocol,
    pub lengths: Vec<u32>,
    pub sequences: u32,
    pub shots: Shots,
    pub noise: NoiseSpec,
    pub spam: SpamSpec,
    /// Randomize the recovery target between |0⟩ and |1⟩, pinning the fit offset at 1/2.
    pub randomized_recovery: bool,
    /// Draw a fresh rotation direction for every π pulse application instead of using
    /// the direction-averaged channel.
    pub pi_sign_sampling: bool,
    /// Fix the fit offset B instead of estimating it.
    pub fit_fix_b: Option<f64>,
    /// Drop lengths below this value before fitting.
    pub fit_min_length: u32,
}

impl RbConfig {
    /// Defaults: lengths 1..512 in octaves, 30 sequences per length, exact survival,
    /// randomized recovery with the offset pinned at 1/2, and (for the quarter-π
    /// protocol) fits that skip the short-length transient below length 8.
    pub fn new(protocol: Protocol) -> Self {
        RbConfig {
            protocol,
            lengths: default_lengths(),
            sequences: 30,
            shots: Shots::Exact,
            noise: NoiseSpec::Ideal,
            spam: SpamSpec::ideal(),
            randomized_recovery: true,
            pi_sign_sampling: false,
            fit_fix_b: Some(0.5),
            fit_min_length: match protocol {
                Protocol::Srb => 0,
                Protocol::Nist => 8,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceRecord {
    pub length: u32,
    pub replicate: u32,
    /// Channel labels in time order.
    pub gates: Vec<GateLabel>,
    pub recovery: GateLabel,
    /// Recovery targeted |1⟩ instead of |0⟩.
    pub flip: bool,
    pub survival: f64,
}

#[derive(Debug, Clone)]
pub struct DecayDataset {
    pub protocol: Protocol,
    pub lengths: Vec<u32>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub records: Vec<SequenceRecord>,
}

impl DecayDataset {
    pub fn points(&self) -> Vec<(u32, f64)> {
        self.lengths.iter().copied().zip(self.means.iter().copied()).collect()
    }
}

/// Stable per-task seed derivation (splitmix64 chain over the index path).
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(root ^ 0x9e37_79b9_7f4a_7c15);
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x7f4a_7c15)));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One sampleable gate entry: a channel label plus, for pulse-level noise, its pulses.
struct MenuEntry {
    label: GateLabel,
    pulses: Vec<Pulse>,
    expected: Ptm,
}

/// Precomputed sampling menu and recovery library for a run.
struct Context {
    menu: Vec<MenuEntry>,
    recovery: Vec<MenuEntry>,
    model: Option<ErrorModel>,
}

impl Context {
    fn build(group: &CliffordGroup, cfg: &RbConfig) -> Result<Self, EngineError> {
        let make = |label: GateLabel, pulses: Vec<Pulse>| -> MenuEntry {
            let ideal = *group.ptm(label);
            let expected = match &cfg.noise {
                NoiseSpec::Ideal => ideal,
                NoiseSpec::GateChannel(err) => Ptm::compose(err, &ideal),
                NoiseSpec::PulseLevel { model, .. } => gate_ptm_expected(&pulses, model),
            };
            MenuEntry { label, pulses, expected }
        };

        let (menu, recovery) = match &cfg.noise {
            NoiseSpec::Ideal | NoiseSpec::GateChannel(_) => {
                let menu = match cfg.protocol {
                    Protocol::Srb => {
                        (0..GROUP_ORDER as GateLabel).map(|g| make(g, vec![])).collect()
                    }
                    Protocol::Nist => {
                        let mut v = Vec::with_capacity(16);
                        for q in 0..4 {
                            for p in 0..4 {
                                v.push(make(group.nist_rep_label(q, p), vec![]));
                            }
                        }
                        v
                    }
                };
                let recovery =
                    (0..GROUP_ORDER as GateLabel).map(|g| make(g, vec![])).collect();
                (menu, recovery)
            }
            NoiseSpec::PulseLevel { row, .. } => {
                let ps = pulse_set(*row)?;
                let kind = cfg.protocol.gateset_kind();
                let table = decompose_gateset(group, kind, &ps, calibrated_convention(kind))?;
                let menu = table
                    .entries
                    .iter()
                    .map(|d| make(d.gate, d.pulses.clone()))
                    .collect();
                // Recovery gates always compile through the full-group table.
                let rec_table = decompose_gateset(
                    group,
                    GatesetKind::Clifford,
                    &ps,
                    Convention::GlobalMinNonempty,
                )?;
                let recovery = rec_table
                    .entries
                    .iter()
                    .map(|d| make(d.gate, d.pulses.clone()))
                    .collect();
                (menu, recovery)
            }
        };

        let model = match &cfg.noise {
            NoiseSpec::PulseLevel { model, .. } => Some(model.clone()),
            _ => None,
        };
        Ok(Context { menu, recovery, model })
    }

    fn channel(&self, entry: &MenuEntry, sample_signs: bool, rng: &mut ChaCha12Rng) -> Ptm {
        match (&self.model, sample_signs) {
            (Some(model), true) => gate_ptm_sampled(&entry.pulses, model, rng),
            _ => entry.expected,
        }
    }
}

fn validate(cfg: &RbConfig) -> Result<(), EngineError> {
    if cfg.lengths.is_empty() {
        return Err(EngineError::Config("lengths must not be empty".into()));
    }
    if cfg.lengths.contains(&0) {
        return Err(EngineError::Config("sequence lengths must be at least 1".into()));
    }
    if cfg.sequences == 0 {
        return Err(EngineError::Config("sequences must be at least 1".into()));
    }
    if let Shots::Finite(0) = cfg.shots {
        return Err(EngineError::Config("shot count must be at least 1".into()));
    }
    Ok(())
}

fn simulate_one(
    group: &CliffordGroup,
    cfg: &RbConfig,
    ctx: &Context,
    length: u32,
    replicate: u32,
    rng: &mut ChaCha12Rng,
) -> Result<SequenceRecord, EngineError> {
    // Draw order is fixed: gate indices, then the flip coin, then (in time order) any
    // π-pulse directions, then the shot count. Changing it would silently reseed results.
    let picks: Vec<usize> = (0..length).map(|_| rng.gen_range(0..ctx.menu.len())).collect();
    let flip = cfg.randomized_recovery && rng.gen::<bool>();

    let mut composed: GateLabel = 0;
    for &i in &picks {
        composed = group.mul(ctx.menu[i].label, composed);
    }
    let mut recovery = group.inv(composed);
    if flip {
        recovery = group.mul(X_PI_LABEL, recovery);
    }

    let mut state = State::ket0().apply(&cfg.spam.prep);
    for &i in &picks {
        let ch = ctx.channel(&ctx.menu[i], cfg.pi_sign_sampling, rng);
        state = state.apply(&ch);
    }
    let rec_channel = ctx.channel(&ctx.recovery[recovery as usize], cfg.pi_sign_sampling, rng);
    state = state.apply(&rec_channel);
    state = state.apply(&cfg.spam.meas);

    let s = state.measure_z(!flip);
    if !(-1e-9..=1.0 + 1e-9).contains(&s) {
        return Err(EngineError::Config(format!(
            "survival probability {s} outside [0, 1]; the noise model is non-physical"
        )));
    }
    let s = s.clamp(0.0, 1.0);
    let survival = match cfg.shots {
        Shots::Exact => s,
        Shots::Finite(n) => {
            let draw = Binomial::new(n, s).expect("clamped probability").sample(rng);
            draw as f64 / n as f64
        }
    };

    Ok(SequenceRecord {
        length,
        replicate,
        gates: picks.iter().map(|&i| ctx.menu[i].label).collect(),
        recovery,
        flip,
        survival,
    })
}

/// Run the full experiment. Tasks are independent and parallelized; per-task seeding
/// keeps the output identical for any thread count.
pub fn run_experiment(
    group: &CliffordGroup,
    cfg: &RbConfig,
    seed: u64,
) -> Result<DecayDataset, EngineError> {
    validate(cfg)?;
    let ctx = Context::build(group, cfg)?;
    let tasks: Vec<(usize, u32)> = cfg
        .lengths
        .iter()
        .enumerate()
        .flat_map(|(li, _)| (0..cfg.sequences).map(move |si| (li, si)))
        .collect();

    let records: Vec<SequenceRecord> = tasks
        .par_iter()
        .map(|&(li, si)| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(derive_seed(seed, &[li as u64, si as u64]));
            simulate_one(group, cfg, &ctx, cfg.lengths[li], si, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    let n = cfg.sequences as usize;
    let mut means = Vec::with_capacity(cfg.lengths.len());
    let mut stderrs = Vec::with_capacity(cfg.lengths.len());
    for li in 0..cfg.lengths.len() {
        let slice = &records[li * n..(li + 1) * n];
        let mean = slice.iter().map(|r| r.survival).sum::<f64>() / n as f64;
        let var = if n > 1 {
            slice.iter().map(|r| (r.survival - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        means.push(mean);
        stderrs.push((var / n as f64).sqrt());
    }

    Ok(DecayDataset {
        protocol: cfg.protocol,
        lengths: cfg.lengths.clone(),
        means,
        stderrs,
        records,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    pub fix_b: Option<f64>,
    pub min_length: u32,
}

impl FitOptions {
    pub fn from_config(cfg: &RbConfig) -> Self {
        FitOptions { fix_b: cfg.fit_fix_b, min_length: cfg.fit_min_length }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    /// Average gate infidelity implied by the decay: (1 − p)/2.
    pub infidelity: f64,
    /// 95% half-width on p from the linearized least-squares covariance.
    pub ci_half_width: f64,
    pub rms_residual: f64,
    pub points_used: usize,
}

/// Residual sum of squares at a candidate decay, with the amplitude (and offset, when
/// free) solved linearly.
fn sse_at(points: &[(u32, f64)], p: f64, fix_b: Option<f64>) -> (f64, f64, f64) {
    let powers: Vec<f64> = points.iter().map(|&(m, _)| p.powi(m as i32)).collect();
    let (a, b) = match fix_b {
        Some(b) => {
            let num: f64 =
                points.iter().zip(&powers).map(|(&(_, s), &w)| (s - b) * w).sum();
            let den: f64 = powers.iter().map(|w| w * w).sum();
            (if den > 0.0 { num / den } else { 0.0 }, b)
        }
        None => {
            // Normal equations for S ≈ a·w + b.
            let n = points.len() as f64;
            let sw: f64 = powers.iter().sum();
            let sww: f64 = powers.iter().map(|w| w * w).sum();
            let ss: f64 = points.iter().map(|&(_, s)| s).sum();
            let sws: f64 = points.iter().zip(&powers).map(|(&(_, s), &w)| s * w).sum();
            let det = n * sww - sw * sw;
            if det.abs() < 1e-300 {
                (0.0, ss / n)
            } else {
                let a = (n * sws - sw * ss) / det;
                let b = (ss - a * sw) / n;
                (a, b)
            }
        }
    };
    let sse: f64 = points
        .iter()
        .zip(&powers)
        .map(|(&(_, s), &w)| {
            let r = s - (a * w + b);
            r * r
        })
        .sum();
    (sse, a, b)
}

/// Fit S(m) = A·pᵐ + B by scanning 64 coarse decay candidates and refining the best
/// bracket with golden-section search down to 1e-12.
pub fn fit_decay(points: &[(u32, f64)], opts: &FitOptions) -> Result<DecayFit, FitError> {
    let pts: Vec<(u32, f64)> =
        points.iter().copied().filter(|&(m, _)| m >= opts.min_length).collect();
    let mut distinct: Vec<u32> = pts.iter().map(|&(m, _)| m).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let needed = if opts.fix_b.is_some() { 2 } else { 3 };
    if distinct.len() < needed {
        return Err(FitError::InsufficientLengths { needed, got: distinct.len() });
    }
    let lo = pts.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        return Err(FitError::Unidentifiable);
    }

    const SEEDS: usize = 64;
    let mut best_idx = 0;
    let mut best_sse = f64::INFINITY;
    for i in 0..SEEDS {
        let p = (i as f64 + 0.5) / SEEDS as f64;
        let (sse, _, _) = sse_at(&pts, p, opts.fix_b);
        if sse < best_sse {
            best_sse = sse;
            best_idx = i;
        }
    }
    let eps = 1e-9;
    let mut a = ((best_idx as f64 - 0.5) / SEEDS as f64).max(eps);
    let mut b = ((best_idx as f64 + 1.5) / SEEDS as f64).min(1.0 - eps);
    // Golden-section interior points.
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = sse_at(&pts, c, opts.fix_b).0;
    let mut fd = sse_at(&pts, d, opts.fix_b).0;
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse_at(&pts, c, opts.fix_b).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse_at(&pts, d, opts.fix_b).0;
        }
    }
    let p = 0.5 * (a + b);
    let (sse, amp, off) = sse_at(&pts, p, opts.fix_b);

    let k = if opts.fix_b.is_some() { 2 } else { 3 };
    let n = pts.len();
    let ci_half_width = confidence_half_width(&pts, p, amp, opts.fix_b, sse, n, k);
    Ok(DecayFit {
        p,
        a: amp,
        b: off,
        infidelity: estimate_infidelity(p),
        ci_half_width,
        rms_residual: (sse / n as f64).sqrt(),
        points_used: n,
    })
}

fn confidence_half_width(
    pts: &[(u32, f64)],
    p: f64,
    amp: f64,
    fix_b: Option<f64>,
    sse: f64,
    n: usize,
    k: usize,
) -> f64 {
    if n <= k {
        return 0.0;
    }
    let s2 = sse / (n - k) as f64;
    let cols = k;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, cols);
    for (row, &(m, _)) in pts.iter().enumerate() {
        let mf = m as f64;
        let w = p.powi(m as i32);
        jac[(row, 0)] = w; // ∂/∂A
        jac[(row, 1)] = if m == 0 { 0.0 } else { amp * mf * p.powi(m as i32 - 1) }; // ∂/∂p
        if fix_b.is_none() {
            jac[(row, 2)] = 1.0; // ∂/∂B
        }
    }
    let jtj = jac.transpose() * jac;
    match jtj.try_inverse() {
        Some(inv) => 1.96 * (s2 * inv[(1, 1)]).max(0.0).sqrt(),
        None => f64::INFINITY,
    }
}

pub fn estimate_infidelity(p: f64) -> f64 {
    (1.0 - p) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateset::CliffordGroup;
    use crate::ptm::Axis;

    fn group() -> &'static CliffordGroup {
        CliffordGroup::shared()
    }

    fn depolarizing_cfg(protocol: Protocol, p0: f64) -> RbConfig {
        let mut cfg = RbConfig::new(protocol);
        cfg.lengths = vec![1, 2, 4, 8, 16, 32];
        cfg.sequences = 10;
        cfg.noise = NoiseSpec::GateChannel(Ptm::depolarizing(p0));
        cfg
    }

    #[test]
    fn depolarizing_noise_gives_the_closed_form_survival_for_every_sequence() {
        let p0 = 0.98;
        for protocol in [Protocol::Srb, Protocol::Nist] {
            let cfg = depolarizing_cfg(protocol, p0);
            let data = run_experiment(group(), &cfg, 7).unwrap();
            for rec in &data.records {
                let want = 0.5 * (1.0 + p0.powi(rec.length as i32 + 1));
                assert!(
                    (rec.survival - want).abs() < 1e-12,
                    "{protocol:?} m={} got {} want {want}",
                    rec.length,
                    rec.survival
                );
            }
        }
    }

    #[test]
    fn recovery_composes_to_the_recorded_target() {
        let mut cfg = RbConfig::new(Protocol::Nist);
        cfg.lengths = vec![1, 3, 7, 12];
        cfg.sequences = 25;
        let data = run_experiment(group(), &cfg, 11).unwrap();
        let mut flips = 0;
        for rec in &data.records {
            let mut total: u8 = 0;
            for &g in &rec.gates {
                total = group().mul(g, total);
            }
            total = group().mul(rec.recovery, total);
            let want = if rec.flip { X_PI_LABEL } else { 0 };
            assert_eq!(total, want);
            flips += rec.flip as u32;
        }
        assert!(flips > 0, "randomized recovery never flipped");
    }

    #[test]
    fn results_are_bit_identical_across_thread_counts() {
        let mut cfg = RbConfig::new(Protocol::Srb);
        cfg.lengths = vec![1, 4, 16, 64];
        cfg.sequences = 8;
        cfg.noise = NoiseSpec::PulseLevel { row: 7, model: ErrorModel::over_rotation() };
        cfg.pi_sign_sampling = true;
        cfg.shots = Shots::Finite(200);

        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_experiment(group(), &cfg, 99).unwrap())
        };
        let one = run(1);
        let four = run(4);
        for (a, b) in one.records.iter().zip(&four.records) {
            assert_eq!(a.survival.to_bits(), b.survival.to_bits());
            assert_eq!(a.gates, b.gates);
            assert_eq!(a.flip, b.flip);
        }
        for (a, b) in one.means.iter().zip(&four.means) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn seed_derivation_separates_index_paths() {
        assert_eq!(derive_seed(5, &[1, 2]), derive_seed(5, &[1, 2]));
        assert_ne!(derive_seed(5, &[1, 2]), derive_seed(5, &[2, 1]));
        assert_ne!(derive_seed(5, &[1, 2]), derive_seed(6, &[1, 2]));
        assert_ne!(derive_seed(5, &[0]), derive_seed(5, &[0, 0]));
    }

    /// Length-3 composite labels live on the 12-element odd coset with the exact
    /// Markov-chain probabilities; a chi-square statistic over that support checks the
    /// sampler, with the 0.1% critical value for 11 degrees of freedom as the bar.
    #[test]
    fn length_three_composites_pass_a_chi_square_test_against_the_markov_law() {
        let mut cfg = RbConfig::new(Protocol::Nist);
        cfg.lengths = vec![3];
        cfg.sequences = 10_000;
        cfg.randomized_recovery = false;
        let data = run_experiment(group(), &cfg, 31).unwrap();
        let mut counts = [0u32; GROUP_ORDER];
        for rec in &data.records {
            let mut total: u8 = 0;
            for &g in &rec.gates {
                total = group().mul(g, total);
            }
            counts[total as usize] += 1;
        }
        let law = group().circuit_distribution(3).unwrap();
        let coset = group().design_subsets().1;
        let mut support = 0;
        let mut chi2 = 0.0;
        for g in 0..GROUP_ORDER {
            if law[g] > 0.0 {
                assert!(coset.contains(&(g as u8)), "support leaked outside the odd coset");
                support += 1;
                let expect = 10_000.0 * law[g];
                let d = counts[g] as f64 - expect;
                chi2 += d * d / expect;
            } else {
                assert_eq!(counts[g], 0, "label {g} outside the length-3 support");
            }
        }
        assert_eq!(support, 12, "length-3 law should cover the whole coset");
        assert!(chi2 < 31.264, "chi-square {chi2} exceeds the 0.1% critical value");
    }

    #[test]
    fn fit_recovers_an_exact_synthetic_decay() {
        let lengths = default_lengths();
        let (p0, a0, b0): (f64, f64, f64) = (0.973, 0.31, 0.5);
        let points: Vec<(u32, f64)> =
            lengths.iter().map(|&m| (m, a0 * p0.powi(m as i32) + b0)).collect();
        let fit = fit_decay(&points, &FitOptions::default()).unwrap();
        assert!((fit.p - p0).abs() < 1e-9, "p {} vs {p0}", fit.p);
        assert!((fit.a - a0).abs() < 1e-8);
        assert!((fit.b - b0).abs() < 1e-8);
        assert!((fit.infidelity - (1.0 - p0) / 2.0).abs() < 1e-9);
        assert!(fit.rms_residual < 1e-10);

        let fixed = fit_decay(&points, &FitOptions { fix_b: Some(0.5), min_length: 0 }).unwrap();
        assert!((fixed.p - p0).abs() < 1e-9);
    }

    #[test]
    fn fit_tolerates_small_perturbations() {
        let lengths = default_lengths();
        let (p0, a0, b0): (f64, f64, f64) = (0.96, 0.45, 0.5);
        let points: Vec<(u32, f64)> = lengths
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let wiggle = 1e-5 * if i % 2 == 0 { 1.0 } else { -1.0 };
                (m, a0 * p0.powi(m as i32) + b0 + wiggle)
            })
            .collect();
        let fit = fit_decay(&points, &FitOptions::default()).unwrap();
        assert!((fit.p - p0).abs() < 1e-3);
        assert!(fit.ci_half_width > 0.0);
        assert!(fit.ci_half_width < 0.05);
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        let flat: Vec<(u32, f64)> = vec![(1, 0.5), (2, 0.5), (4, 0.5), (8, 0.5)];
        assert_eq!(
            fit_decay(&flat, &FitOptions::default()).unwrap_err(),
            FitError::Unidentifiable
        );

        let two: Vec<(u32, f64)> = vec![(1, 0.9), (2, 0.8)];
        assert_eq!(
            fit_decay(&two, &FitOptions::default()).unwrap_err(),
            FitError::InsufficientLengths { needed: 3, got: 2 }
        );
        // Two distinct lengths do determine (A, p) once B is pinned.
        let ok = fit_decay(&two, &FitOptions { fix_b: Some(0.5), min_length: 0 }).unwrap();
        assert!(ok.p > 0.0 && ok.p < 1.0);

        let filtered: Vec<(u32, f64)> = vec![(1, 0.9), (2, 0.85), (4, 0.8), (8, 0.7)];
        assert_eq!(
            fit_decay(&filtered, &FitOptions { fix_b: None, min_length: 3 }).unwrap_err(),
            FitError::InsufficientLengths { needed: 3, got: 2 }
        );
    }

    #[test]
    fn spam_errors_do_not_move_the_fitted_decay() {
        use rand::Rng;
        let p0 = 0.97;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(55);
        for _ in 0..10 {
            let mut cfg = depolarizing_cfg(Protocol::Srb, p0);
            cfg.lengths = vec![1, 2, 4, 8, 16, 32, 64];
            cfg.sequences = 3;
            cfg.randomized_recovery = false;
            cfg.fit_fix_b = None;
            cfg.spam = SpamSpec {
                prep: Ptm::compose(
                    &Ptm::depolarizing(1.0 - rng.gen_range(0.0..0.05)),
                    &Ptm::pulse(Axis::X, rng.gen_range(-0.1..0.1)),
                ),
                meas: Ptm::compose(
                    &Ptm::pulse(Axis::Y, rng.gen_range(-0.1..0.1)),
                    &Ptm::depolarizing(1.0 - rng.gen_range(0.0..0.05)),
                ),
            };
            let data = run_experiment(group(), &cfg, relabel(&mut rng)).unwrap();
            let fit = fit_decay(&data.points(), &FitOptions::from_config(&cfg)).unwrap();
            assert!((fit.p - p0).abs() < 1e-9, "fit {} vs {p0}", fit.p);
        }
    }

    fn relabel(rng: &mut rand_chacha::ChaCha12Rng) -> u64 {
        rng.gen()
    }

    #[test]
    fn finite_shots_stay_near_the_exact_decay() {
        let p0 = 0.95;
        let mut cfg = depolarizing_cfg(Protocol::Srb, p0);
        cfg.lengths = vec![1, 2, 4, 8, 16, 32, 64];
        cfg.sequences = 60;
        cfg.shots = Shots::Finite(400);
        let data = run_experiment(group(), &cfg, 17).unwrap();
        let fit = fit_decay(&data.points(), &FitOptions::from_config(&cfg)).unwrap();
        assert!((fit.p - p0).abs() < 0.02, "fit {} vs {p0}", fit.p);
        for (mean, stderr) in data.means.iter().zip(&data.stderrs) {
            assert!(*mean >= 0.0 && *mean <= 1.0);
            assert!(*stderr >= 0.0);
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let mut cfg = RbConfig::new(Protocol::Srb);
        cfg.lengths.clear();
        assert!(matches!(run_experiment(group(), &cfg, 1), Err(EngineError::Config(_))));

        let mut cfg = RbConfig::new(Protocol::Srb);
        cfg.lengths = vec![0, 1];
        assert!(matches!(run_experiment(group(), &cfg, 1), Err(EngineError::Config(_))));

        let mut cfg = RbConfig::new(Protocol::Srb);
        cfg.sequences = 0;
        assert!(matches!(run_experiment(group(), &cfg, 1), Err(EngineError::Config(_))));

        let mut cfg = RbConfig::new(Protocol::Srb);
        cfg.shots = Shots::Finite(0);
        assert!(matches!(run_experiment(group(), &cfg, 1), Err(EngineError::Config(_))));
    }

    #[test]
    fn pulse_level_ideal_noise_reproduces_unit_survival() {
        for protocol in [Protocol::Srb, Protocol::Nist] {
            let mut cfg = RbConfig::new(protocol);
            cfg.lengths = vec![1, 5, 9];
            cfg.sequences = 6;
            cfg.noise = NoiseSpec::PulseLevel { row: 4, model: ErrorModel::Ideal };
            let data = run_experiment(group(), &cfg, 3).unwrap();
            for rec in &data.records {
                assert!((rec.survival - 1.0).abs() < 1e-12);
            }
        }
    }
}
