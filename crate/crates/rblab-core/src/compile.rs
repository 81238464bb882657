//! Pulse alphabets and gate decompositions.
//!
//! A pulse row is an alphabet of π/2 and π pulses, each either physically implemented
//! (noisy) or virtual (ideal). Gates are compiled into pulse strings under one of three
//! conventions:
//!
//! * `GlobalMin` — cheapest string overall; the identity gate may be the empty string.
//! * `GlobalMinNonempty` — as above, but the identity must be physically implemented.
//! * `PauliFirst` — the gate's (π/2-factor · Pauli-factor) form with each factor compiled
//!   separately; the NIST table then has 16 entries, one per factor pair, because both
//!   factor pairs of a channel can cost differently.
//!
//! Cost is the number of noisy pulses; ideal pulses are free. Ties break toward shorter
//! strings, then lexicographically in alphabet order. Search depth is capped at 6 pulses.

use crate::gateset::{CliffordGroup, GateLabel, GROUP_ORDER};
use crate::ptm::{Axis, Ptm};
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Maximum pulses per decomposition string.
pub const MAX_PULSES: usize = 6;
/// A computed mean matches a target average when within this slack (half a table digit).
pub const TABLE_MATCH_TOL: f64 = 1.0 / 240.0;

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("pulse row must be in 1..=9, got {0}")]
    UnknownRow(u8),
    #[error("gate {gate} of row {row} is unreachable within {MAX_PULSES} pulses")]
    Unreachable { row: u8, gate: GateLabel },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PulseAngle {
    Zero,
    PlusHalfPi,
    MinusHalfPi,
    PlusPi,
    MinusPi,
}

impl PulseAngle {
    pub fn radians(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            PulseAngle::Zero => 0.0,
            PulseAngle::PlusHalfPi => PI / 2.0,
            PulseAngle::MinusHalfPi => -PI / 2.0,
            PulseAngle::PlusPi => PI,
            PulseAngle::MinusPi => -PI,
        }
    }

    pub fn is_pi(self) -> bool {
        matches!(self, PulseAngle::PlusPi | PulseAngle::MinusPi)
    }

    fn token(self) -> &'static str {
        match self {
            PulseAngle::Zero => "",
            PulseAngle::PlusHalfPi => "90",
            PulseAngle::MinusHalfPi => "-90",
            PulseAngle::PlusPi => "180",
            PulseAngle::MinusPi => "-180",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pulse {
    pub axis: Axis,
    pub angle: PulseAngle,
    pub noisy: bool,
}

impl Pulse {
    pub const fn new(axis: Axis, angle: PulseAngle, noisy: bool) -> Self {
        Pulse { axis, angle, noisy }
    }

    /// Transfer matrix of the error-free pulse.
    pub fn ideal_ptm(&self) -> Ptm {
        Ptm::pulse(self.axis, self.angle.radians())
    }

    /// Same pulse with the rotation direction reversed. π/2 signs are fixed by the
    /// alphabet; only π pulses get their direction randomized.
    pub fn with_angle(&self, angle: PulseAngle) -> Pulse {
        Pulse { angle, ..*self }
    }
}

impl fmt::Display for Pulse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tilde = if self.noisy { "~" } else { "" };
        if self.axis == Axis::I {
            write!(f, "{tilde}I")
        } else {
            write!(f, "{tilde}{}{}", self.axis.name(), self.angle.token())
        }
    }
}

/// One row of the pulse-set table: an alphabet plus the two reference noisy-pulse averages.
#[derive(Debug, Clone)]
pub struct PulseSet {
    pub index: u8,
    pub alphabet: Vec<Pulse>,
    /// Reference mean noisy pulses per Clifford gate.
    pub n_clifford: f64,
    /// Reference mean noisy pulses per NIST gate.
    pub n_nist: f64,
}

const P90: PulseAngle = PulseAngle::PlusHalfPi;
const M90: PulseAngle = PulseAngle::MinusHalfPi;
const P180: PulseAngle = PulseAngle::PlusPi;
const REST: PulseAngle = PulseAngle::Zero;

fn p(axis: Axis, angle: PulseAngle, noisy: bool) -> Pulse {
    Pulse::new(axis, angle, noisy)
}

/// The nine pulse rows. Alphabet order follows the reference row layout with `+` before `−`;
/// that order is also the lexicographic tie-break order.
pub fn pulse_set(index: u8) -> Result<PulseSet, CompileError> {
    use Axis::{I, X, Y, Z};
    let alphabet = match index {
        1 => vec![p(I, REST, false), p(X, P90, true), p(Y, P90, true)],
        2 => vec![
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        3 => vec![
            p(I, REST, false),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        4 => vec![
            p(X, P180, true),
            p(Y, P180, true),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        5 => vec![
            p(I, REST, true),
            p(Z, P180, true),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        6 => vec![
            p(I, REST, true),
            p(X, P180, true),
            p(Y, P180, true),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        7 => vec![
            p(I, REST, true),
            p(X, P180, true),
            p(Y, P180, true),
            p(Z, P180, true),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        8 => vec![
            p(I, REST, false),
            p(Z, P180, false),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        9 => vec![
            p(I, REST, false),
            p(X, P180, true),
            p(Y, P180, true),
            p(Z, P180, false),
            p(X, P90, true),
            p(X, M90, true),
            p(Y, P90, true),
            p(Y, M90, true),
        ],
        _ => return Err(CompileError::UnknownRow(index)),
    };
    let (n_clifford, n_nist) = match index {
        1 => (3.08333, 4.0),
        2 => (2.25, 3.5),
        3 => (2.16667, 3.0),
        4 => (1.91667, 2.5),
        5 => (1.91667, 2.5),
        6 => (1.875, 2.25),
        7 => (1.8333, 2.0),
        8 => (1.66667, 2.0),
        9 => (1.58333, 1.5),
        _ => unreachable!(),
    };
    Ok(PulseSet { index, alphabet, n_clifford, n_nist })
}

pub fn all_rows() -> impl Iterator<Item = PulseSet> {
    (1..=9).map(|i| pulse_set(i).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatesetKind {
    Clifford,
    Nist,
}

impl GatesetKind {
    pub fn name(self) -> &'static str {
        match self {
            GatesetKind::Clifford => "clifford",
            GatesetKind::Nist => "nist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    GlobalMin,
    GlobalMinNonempty,
    PauliFirst,
}

impl Convention {
    pub fn name(self) -> &'static str {
        match self {
            Convention::GlobalMin => "global-min",
            Convention::GlobalMinNonempty => "global-min-nonempty",
            Convention::PauliFirst => "pauli-first",
        }
    }
}

/// Convention that reproduces the reference averages for the given gateset, as
/// established by the calibration tests.
pub fn calibrated_convention(kind: GatesetKind) -> Convention {
    match kind {
        GatesetKind::Clifford => Convention::GlobalMinNonempty,
        GatesetKind::Nist => Convention::PauliFirst,
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub gate: GateLabel,
    /// (q, p) factor indices for NIST `PauliFirst` entries; `None` elsewhere.
    pub rep: Option<(u8, u8)>,
    pub pulses: Vec<Pulse>,
    pub noisy_count: u32,
}

impl Decomposition {
    pub fn pulse_string(&self) -> String {
        if self.pulses.is_empty() {
            return "(empty)".into();
        }
        self.pulses.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionTable {
    pub row: u8,
    pub gateset: GatesetKind,
    pub convention: Convention,
    pub entries: Vec<Decomposition>,
}

impl DecompositionTable {
    pub fn mean_noisy_count(&self) -> f64 {
        self.entries.iter().map(|d| d.noisy_count as f64).sum::<f64>() / self.entries.len() as f64
    }

    /// Reference target for this (row, gateset).
    pub fn target_mean(&self) -> f64 {
        let ps = pulse_set(self.row).expect("row validated at construction");
        match self.gateset {
            GatesetKind::Clifford => ps.n_clifford,
            GatesetKind::Nist => ps.n_nist,
        }
    }

    pub fn matches_target(&self) -> bool {
        (self.mean_noisy_count() - self.target_mean()).abs() <= TABLE_MATCH_TOL
    }
}

#[derive(Clone)]
struct Best {
    cost: u32,
    indices: Vec<u8>,
}

fn better(candidate: (u32, &[u8]), incumbent: Option<&Best>) -> bool {
    match incumbent {
        None => true,
        Some(b) => {
            (candidate.0, candidate.1.len(), candidate.1)
                < (b.cost, b.indices.len(), b.indices.as_slice())
        }
    }
}

/// Cheapest nonempty pulse string for every reachable group element, by exhaustive
/// enumeration of all strings up to [`MAX_PULSES`]. The alphabet is small enough that
/// label-table composition makes this a few hundred thousand lookups.
fn best_nonempty_strings(group: &CliffordGroup, ps: &PulseSet) -> Vec<Option<Best>> {
    let labels: Vec<GateLabel> = ps
        .alphabet
        .iter()
        .map(|pl| group.identify(&pl.ideal_ptm()).expect("alphabet pulses are Cliffords"))
        .collect();
    let costs: Vec<u32> = ps.alphabet.iter().map(|pl| pl.noisy as u32).collect();

    let mut best: Vec<Option<Best>> = vec![None; GROUP_ORDER];
    let mut stack: Vec<u8> = Vec::with_capacity(MAX_PULSES);

    fn descend(
        group: &CliffordGroup,
        labels: &[GateLabel],
        costs: &[u32],
        stack: &mut Vec<u8>,
        at: GateLabel,
        cost: u32,
        best: &mut [Option<Best>],
    ) {
        for (i, (&l, &c)) in labels.iter().zip(costs).enumerate() {
            let next = group.mul(l, at);
            let next_cost = cost + c;
            stack.push(i as u8);
            let slot = &mut best[next as usize];
            if better((next_cost, stack), slot.as_ref()) {
                *slot = Some(Best { cost: next_cost, indices: stack.clone() });
            }
            if stack.len() < MAX_PULSES {
                descend(group, labels, costs, stack, next, next_cost, best);
            }
            stack.pop();
        }
    }

    descend(group, &labels, &costs, &mut stack, 0, 0, &mut best);
    best
}

fn to_decomposition(ps: &PulseSet, gate: GateLabel, rep: Option<(u8, u8)>, b: &Best) -> Decomposition {
    let pulses: Vec<Pulse> = b.indices.iter().map(|&i| ps.alphabet[i as usize]).collect();
    Decomposition { gate, rep, pulses, noisy_count: b.cost }
}

fn concat_factors(ps: &PulseSet, gate: GateLabel, rep: Option<(u8, u8)>, first: &Best, second: &Best) -> Decomposition {
    let mut indices = first.indices.clone();
    indices.extend_from_slice(&second.indices);
    let b = Best { cost: first.cost + second.cost, indices };
    to_decomposition(ps, gate, rep, &b)
}

/// Compile every gate of the gateset into a pulse string under the requested convention.
pub fn decompose_gateset(
    group: &CliffordGroup,
    gateset: GatesetKind,
    ps: &PulseSet,
    convention: Convention,
) -> Result<DecompositionTable, CompileError> {
    let best = best_nonempty_strings(group, ps);
    let lookup = |gate: GateLabel| -> Result<&Best, CompileError> {
        best[gate as usize]
            .as_ref()
            .ok_or(CompileError::Unreachable { row: ps.index, gate })
    };

    let entries = match (gateset, convention) {
        (GatesetKind::Clifford, Convention::GlobalMin) => {
            let mut out = Vec::with_capacity(GROUP_ORDER);
            for gate in 0..GROUP_ORDER as GateLabel {
                if gate == 0 {
                    out.push(Decomposition { gate, rep: None, pulses: vec![], noisy_count: 0 });
                } else {
                    out.push(to_decomposition(ps, gate, None, lookup(gate)?));
                }
            }
            out
        }
        (GatesetKind::Clifford, Convention::GlobalMinNonempty) => (0..GROUP_ORDER as GateLabel)
            .map(|gate| Ok(to_decomposition(ps, gate, None, lookup(gate)?)))
            .collect::<Result<_, CompileError>>()?,
        // The identity never occurs in the NIST set, so the two global conventions agree.
        (GatesetKind::Nist, Convention::GlobalMin | Convention::GlobalMinNonempty) => group
            .nist_labels()
            .iter()
            .map(|&gate| Ok(to_decomposition(ps, gate, None, lookup(gate)?)))
            .collect::<Result<_, CompileError>>()?,
        (GatesetKind::Clifford, Convention::PauliFirst) => {
            let mut out = Vec::with_capacity(GROUP_ORDER);
            for s in 0..6u8 {
                for pp in 0..4u8 {
                    let gate = 4 * s + pp;
                    let pauli = lookup(pp)?; // Pauli labels coincide with labels 0..3
                    let coset = lookup(4 * s)?;
                    out.push(concat_factors(ps, gate, None, pauli, coset));
                }
            }
            out
        }
        (GatesetKind::Nist, Convention::PauliFirst) => {
            let mut out = Vec::with_capacity(16);
            for q in 0..4u8 {
                for pp in 0..4u8 {
                    let gate = group.nist_rep_label(q as usize, pp as usize);
                    let pauli = lookup(pp)?;
                    let quarter = lookup(group.nist_rep_label(q as usize, 0))?;
                    out.push(concat_factors(ps, gate, Some((q, pp)), pauli, quarter));
                }
            }
            out
        }
    };

    Ok(DecompositionTable { row: ps.index, gateset, convention, entries })
}

/// Pulse-level error models. Ideal (virtual) pulses are exact in every model.
#[derive(Debug, Clone)]
pub enum ErrorModel {
    Ideal,
    /// Every physical rotation overshoots: `X̃_{±θ} = X_{±(θ+offset)}`; a physical
    /// identity pulse has nothing to over-rotate and stays exact.
    OverRotation { offset: f64 },
    /// A stray frame rotation follows every physical pulse: `X̃_θ = Z_angle · X_θ`.
    ZRotation { angle: f64 },
    /// Dephasing follows every physical pulse: `X̃_θ = diag(1,α,α,1) · X_θ`.
    Dephasing { alpha: f64 },
    /// Explicit noisy transfer matrix per pulse; unmapped pulses fall back to ideal.
    Custom(BTreeMap<Pulse, Ptm>),
}

impl ErrorModel {
    pub fn over_rotation() -> Self {
        ErrorModel::OverRotation { offset: 0.1 }
    }

    pub fn z_rotation() -> Self {
        ErrorModel::ZRotation { angle: 0.1 }
    }

    pub fn dephasing() -> Self {
        ErrorModel::Dephasing { alpha: 0.99 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::Ideal => "ideal",
            ErrorModel::OverRotation { .. } => "over_rotation",
            ErrorModel::ZRotation { .. } => "z_rotation",
            ErrorModel::Dephasing { .. } => "dephasing",
            ErrorModel::Custom(_) => "custom",
        }
    }

    /// Noisy transfer matrix of one pulse at its concrete signed angle.
    pub fn noisy_pulse_ptm(&self, pulse: &Pulse) -> Ptm {
        if !pulse.noisy {
            return pulse.ideal_ptm();
        }
        match self {
            ErrorModel::Ideal => pulse.ideal_ptm(),
            ErrorModel::OverRotation { offset } => {
                let theta = pulse.angle.radians();
                if pulse.axis == Axis::I || theta == 0.0 {
                    return pulse.ideal_ptm();
                }
                Ptm::pulse(pulse.axis, theta + offset.copysign(theta))
            }
            ErrorModel::ZRotation { angle } => {
                Ptm::compose(&Ptm::pulse(Axis::Z, *angle), &pulse.ideal_ptm())
            }
            ErrorModel::Dephasing { alpha } => {
                Ptm::compose(&Ptm::dephasing(*alpha), &pulse.ideal_ptm())
            }
            ErrorModel::Custom(map) => {
                map.get(pulse).copied().unwrap_or_else(|| pulse.ideal_ptm())
            }
        }
    }

    fn pulse_ptm_sign_averaged(&self, pulse: &Pulse) -> Ptm {
        if pulse.angle.is_pi() && pulse.noisy {
            let plus = self.noisy_pulse_ptm(&pulse.with_angle(PulseAngle::PlusPi));
            let minus = self.noisy_pulse_ptm(&pulse.with_angle(PulseAngle::MinusPi));
            Ptm((plus.0 + minus.0) * 0.5)
        } else {
            self.noisy_pulse_ptm(pulse)
        }
    }
}

/// Noisy transfer matrix of a whole pulse string, averaging each π pulse over its two
/// rotation directions. Exact for expected survival because each pulse enters a sequence
/// exactly once (expectations factor).
pub fn gate_ptm_expected(pulses: &[Pulse], em: &ErrorModel) -> Ptm {
    let mut acc = Ptm::identity();
    for pulse in pulses {
        acc = Ptm::compose(&em.pulse_ptm_sign_averaged(pulse), &acc);
    }
    acc
}

/// As [`gate_ptm_expected`], but every π pulse draws its rotation direction from `rng`.
pub fn gate_ptm_sampled<R: Rng>(pulses: &[Pulse], em: &ErrorModel, rng: &mut R) -> Ptm {
    let mut acc = Ptm::identity();
    for pulse in pulses {
        let concrete = if pulse.angle.is_pi() {
            let sign = if rng.gen::<bool>() { PulseAngle::PlusPi } else { PulseAngle::MinusPi };
            pulse.with_angle(sign)
        } else {
            *pulse
        };
        acc = Ptm::compose(&em.noisy_pulse_ptm(&concrete), &acc);
    }
    acc
}

/// Ideal composition of a pulse string.
pub fn gate_ptm_ideal(pulses: &[Pulse]) -> Ptm {
    let mut acc = Ptm::identity();
    for pulse in pulses {
        acc = Ptm::compose(&pulse.ideal_ptm(), &acc);
    }
    acc
}
