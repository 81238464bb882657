//! The single-qubit Clifford group and the gatesets built from it.
//!
//! Canonical labels: every Clifford is `S_s · P_p` with `P = (I, Xπ, Yπ, Zπ)` and
//! `S = (I, X_{π/2}, Y_{π/2}, Z_{π/2}, Z_{π/2}X_{π/2}, X_{-π/2}Z_{-π/2})`; the label is
//! `4·s + p`, so the identity is label 0. The NIST gateset is the 8 distinct channels of
//! `Q·P` with `Q = (X_{±π/2}, Y_{±π/2})`; it is inverse-closed but not closed under
//! multiplication.

use crate::ptm::{Axis, Ptm, Unitary2};
use std::f64::consts::PI;
use std::sync::LazyLock;
use thiserror::Error;

/// Index into the canonical 24-element table.
pub type GateLabel = u8;

/// Matching threshold for identifying a channel with a table element.
pub const IDENTIFY_TOL: f64 = 1e-6;

pub const GROUP_ORDER: usize = 24;
pub const NIST_ORDER: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum GatesetError {
    #[error("products of S and P yielded {found} distinct channels, expected 24")]
    DegenerateTable { found: usize },
    #[error("channel does not match any group element within {IDENTIFY_TOL:.0e}")]
    UnknownChannel,
    #[error("sequence length must be at least 1")]
    ZeroLength,
}

/// Composition and inverse tables over canonical labels.
#[derive(Debug, Clone)]
pub struct GroupTable {
    /// `mul[a][b]` is the label of `a ∘ b` (b applied first).
    pub mul: [[GateLabel; GROUP_ORDER]; GROUP_ORDER],
    pub inv: [GateLabel; GROUP_ORDER],
}

/// The group with its transfer matrices, unitary representatives, and derived subsets.
pub struct CliffordGroup {
    ptms: Vec<Ptm>,
    unitaries: Vec<Unitary2>,
    table: GroupTable,
    /// Labels of the 8 NIST channels, ascending.
    nist: [GateLabel; NIST_ORDER],
    /// `nist_rep[q][p]` = label of `Q_q · P_p`; every NIST channel appears exactly twice.
    nist_rep: [[GateLabel; 4]; 4],
    /// The 12-element 2-design `T·P` and its coset `Z_{π/2}·T·P`.
    c12: [GateLabel; 12],
    sqrt_z_c12: [GateLabel; 12],
}

fn pauli_unitaries() -> [Unitary2; 4] {
    [
        Unitary2::identity(),
        Unitary2::pulse(Axis::X, PI),
        Unitary2::pulse(Axis::Y, PI),
        Unitary2::pulse(Axis::Z, PI),
    ]
}

fn coset_unitaries() -> [Unitary2; 6] {
    let h = PI / 2.0;
    let xp = Unitary2::pulse(Axis::X, h);
    let yp = Unitary2::pulse(Axis::Y, h);
    let zp = Unitary2::pulse(Axis::Z, h);
    let xm = Unitary2::pulse(Axis::X, -h);
    let zm = Unitary2::pulse(Axis::Z, -h);
    [
        Unitary2::identity(),
        xp,
        yp,
        zp,
        zp.mul(&xp), // X_{π/2} first, then Z_{π/2}
        xm.mul(&zm), // Z_{-π/2} first, then X_{-π/2}
    ]
}

impl CliffordGroup {
    pub fn build() -> Result<Self, GatesetError> {
        let paulis = pauli_unitaries();
        let cosets = coset_unitaries();
        let mut unitaries = Vec::with_capacity(GROUP_ORDER);
        let mut ptms = Vec::with_capacity(GROUP_ORDER);
        for s in &cosets {
            for p in &paulis {
                let u = s.mul(p);
                unitaries.push(u);
                ptms.push(Ptm::from_unitary(&u).expect("exact pulses are unitary"));
            }
        }
        // The 24 products must be pairwise distinct as channels.
        for a in 0..GROUP_ORDER {
            for b in (a + 1)..GROUP_ORDER {
                if ptms[a].approx_eq(&ptms[b], IDENTIFY_TOL) {
                    let distinct = GROUP_ORDER - 1;
                    return Err(GatesetError::DegenerateTable { found: distinct });
                }
            }
        }

        let identify = |ptm: &Ptm| -> Result<GateLabel, GatesetError> {
            let mut best: Option<(f64, usize)> = None;
            for (i, cand) in ptms.iter().enumerate() {
                let d = ptm.max_abs_diff(cand);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
            match best {
                Some((d, i)) if d <= IDENTIFY_TOL => Ok(i as GateLabel),
                _ => Err(GatesetError::UnknownChannel),
            }
        };

        let mut mul = [[0u8; GROUP_ORDER]; GROUP_ORDER];
        let mut inv = [0u8; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            inv[a] = identify(&ptms[a].transpose())?;
            for b in 0..GROUP_ORDER {
                mul[a][b] = identify(&Ptm::compose(&ptms[a], &ptms[b]))?;
            }
        }

        let h = PI / 2.0;
        let q_unitaries = [
            Unitary2::pulse(Axis::X, h),
            Unitary2::pulse(Axis::X, -h),
            Unitary2::pulse(Axis::Y, h),
            Unitary2::pulse(Axis::Y, -h),
        ];
        let mut nist_rep = [[0u8; 4]; 4];
        let mut nist_set = Vec::new();
        for (qi, q) in q_unitaries.iter().enumerate() {
            for (pi, p) in pauli_unitaries().iter().enumerate() {
                let label = identify(&Ptm::from_unitary(&q.mul(p)).unwrap())?;
                nist_rep[qi][pi] = label;
                if !nist_set.contains(&label) {
                    nist_set.push(label);
                }
            }
        }
        nist_set.sort_unstable();
        if nist_set.len() != NIST_ORDER {
            return Err(GatesetError::DegenerateTable { found: nist_set.len() });
        }
        let mut nist = [0u8; NIST_ORDER];
        nist.copy_from_slice(&nist_set);

        // T = (I, Z_{π/2}X_{π/2}, X_{-π/2}Z_{-π/2}) are coset slots 0, 4, 5.
        let mut c12 = Vec::new();
        for s in [0usize, 4, 5] {
            for p in 0..4 {
                c12.push((4 * s + p) as GateLabel);
            }
        }
        let zp = identify(&Ptm::pulse(Axis::Z, h))?;
        let mut sqrt_z: Vec<GateLabel> = c12.iter().map(|&g| mul[zp as usize][g as usize]).collect();
        sqrt_z.sort_unstable();
        let mut c12_arr = [0u8; 12];
        c12_arr.copy_from_slice(&c12);
        let mut sqrt_z_arr = [0u8; 12];
        sqrt_z_arr.copy_from_slice(&sqrt_z);

        Ok(CliffordGroup {
            ptms,
            unitaries,
            table: GroupTable { mul, inv },
            nist,
            nist_rep,
            c12: c12_arr,
            sqrt_z_c12: sqrt_z_arr,
        })
    }

    /// Shared immutable instance; building it twice would only waste a few microseconds.
    pub fn shared() -> &'static CliffordGroup {
        static GROUP: LazyLock<CliffordGroup> =
            LazyLock::new(|| CliffordGroup::build().expect("canonical table is non-degenerate"));
        &GROUP
    }

    pub fn ptm(&self, g: GateLabel) -> &Ptm {
        &self.ptms[g as usize]
    }

    pub fn unitary(&self, g: GateLabel) -> &Unitary2 {
        &self.unitaries[g as usize]
    }

    pub fn elements(&self) -> impl Iterator<Item = (GateLabel, &Ptm)> {
        self.ptms.iter().enumerate().map(|(i, p)| (i as GateLabel, p))
    }

    pub fn table(&self) -> &GroupTable {
        &self.table
    }

    pub fn mul(&self, later: GateLabel, earlier: GateLabel) -> GateLabel {
        self.table.mul[later as usize][earlier as usize]
    }

    pub fn inv(&self, g: GateLabel) -> GateLabel {
        self.table.inv[g as usize]
    }

    /// Label of the channel, or an error when nothing matches within [`IDENTIFY_TOL`].
    pub fn identify(&self, ptm: &Ptm) -> Result<GateLabel, GatesetError> {
        let mut best = (f64::INFINITY, 0usize);
        for (i, cand) in self.ptms.iter().enumerate() {
            let d = ptm.max_abs_diff(cand);
            if d < best.0 {
                best = (d, i);
            }
        }
        if best.0 <= IDENTIFY_TOL {
            Ok(best.1 as GateLabel)
        } else {
            Err(GatesetError::UnknownChannel)
        }
    }

    pub fn nist_labels(&self) -> &[GateLabel; NIST_ORDER] {
        &self.nist
    }

    /// Label of `Q_q · P_p` for `q` in (X+, X−, Y+, Y−) and `p` in (I, Xπ, Yπ, Zπ).
    pub fn nist_rep_label(&self, q: usize, p: usize) -> GateLabel {
        self.nist_rep[q][p]
    }

    /// The two disjoint 12-element 2-designs whose union is the whole group.
    pub fn design_subsets(&self) -> (&[GateLabel; 12], &[GateLabel; 12]) {
        (&self.c12, &self.sqrt_z_c12)
    }

    /// Distribution over aggregate circuits `C_m = G_m ⋯ G_1` with `G_i` uniform NIST draws.
    pub fn circuit_distribution(&self, m: u32) -> Result<[f64; GROUP_ORDER], GatesetError> {
        if m == 0 {
            return Err(GatesetError::ZeroLength);
        }
        let mut dist = [0.0f64; GROUP_ORDER];
        for &g in &self.nist {
            dist[g as usize] += 1.0 / NIST_ORDER as f64;
        }
        for _ in 1..m {
            let mut next = [0.0f64; GROUP_ORDER];
            for c in 0..GROUP_ORDER {
                if dist[c] == 0.0 {
                    continue;
                }
                let w = dist[c] / NIST_ORDER as f64;
                for &g in &self.nist {
                    next[self.table.mul[g as usize][c] as usize] += w;
                }
            }
            dist = next;
        }
        Ok(dist)
    }
}

/// Total-variation distance between two distributions over labels.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Uniform distribution supported on `support`.
pub fn uniform_on(support: &[GateLabel]) -> [f64; GROUP_ORDER] {
    let mut dist = [0.0; GROUP_ORDER];
    for &g in support {
        dist[g as usize] = 1.0 / support.len() as f64;
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group() -> &'static CliffordGroup {
        CliffordGroup::shared()
    }

    #[test]
    fn table_has_24_distinct_elements_and_identity_at_zero() {
        let g = group();
        assert!(g.ptm(0).approx_eq(&Ptm::identity(), 1e-12));
        for a in 0..GROUP_ORDER as u8 {
            assert_eq!(g.mul(0, a), a);
            assert_eq!(g.mul(a, 0), a);
            assert_eq!(g.mul(g.inv(a), a), 0);
            assert_eq!(g.mul(a, g.inv(a)), 0);
        }
    }

    #[test]
    fn multiplication_table_is_a_latin_square() {
        let g = group();
        for a in 0..GROUP_ORDER {
            let mut row = [false; GROUP_ORDER];
            let mut col = [false; GROUP_ORDER];
            for b in 0..GROUP_ORDER {
                row[g.table().mul[a][b] as usize] = true;
                col[g.table().mul[b][a] as usize] = true;
            }
            assert!(row.iter().all(|&v| v), "row {a} misses an element");
            assert!(col.iter().all(|&v| v), "column {a} misses an element");
        }
    }

    #[test]
    fn group_is_closed_under_products_of_generators() {
        // Rebuild the closure from the transfer matrices alone and compare sizes.
        let g = group();
        let mut elems: Vec<Ptm> = vec![Ptm::identity()];
        let gens = [
            Ptm::pulse(Axis::X, PI / 2.0),
            Ptm::pulse(Axis::Y, PI / 2.0),
            Ptm::pulse(Axis::Z, PI / 2.0),
        ];
        loop {
            let mut added = false;
            let snapshot = elems.clone();
            for e in &snapshot {
                for gen in &gens {
                    let prod = Ptm::compose(gen, e);
                    if !elems.iter().any(|x| x.approx_eq(&prod, IDENTIFY_TOL)) {
                        elems.push(prod);
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        assert_eq!(elems.len(), GROUP_ORDER);
        for e in &elems {
            g.identify(e).expect("closure element is in the table");
        }
    }

    #[test]
    fn nist_set_is_inverse_closed_but_not_multiplication_closed() {
        let g = group();
        let nist = g.nist_labels();
        for &n in nist {
            assert!(nist.contains(&g.inv(n)), "inverse of {n} escapes the set");
        }
        let mut escapes = false;
        for &a in nist {
            for &b in nist {
                if !nist.contains(&g.mul(a, b)) {
                    escapes = true;
                }
            }
        }
        assert!(escapes, "products never left the NIST set");
    }

    #[test]
    fn nist_closure_is_the_full_group() {
        let g = group();
        let mut reach: Vec<GateLabel> = g.nist_labels().to_vec();
        loop {
            let mut added = false;
            let snapshot = reach.clone();
            for &a in &snapshot {
                for &b in g.nist_labels() {
                    let prod = g.mul(b, a);
                    if !reach.contains(&prod) {
                        reach.push(prod);
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        assert_eq!(reach.len(), GROUP_ORDER);
    }

    #[test]
    fn nist_reps_cover_each_channel_exactly_twice() {
        let g = group();
        let mut counts = [0u32; GROUP_ORDER];
        for q in 0..4 {
            for p in 0..4 {
                counts[g.nist_rep_label(q, p) as usize] += 1;
            }
        }
        for &n in g.nist_labels() {
            assert_eq!(counts[n as usize], 2);
        }
        assert_eq!(counts.iter().sum::<u32>(), 16);
    }

    #[test]
    fn design_subsets_partition_the_group() {
        let g = group();
        let (c12, sz) = g.design_subsets();
        assert!(c12.contains(&0));
        let mut all: Vec<GateLabel> = c12.iter().chain(sz.iter()).copied().collect();
        all.sort_unstable();
        let want: Vec<GateLabel> = (0..GROUP_ORDER as u8).collect();
        assert_eq!(all, want);
        // Every NIST element lies in the √Z coset.
        for &n in g.nist_labels() {
            assert!(sz.contains(&n));
        }
    }

    #[test]
    fn circuit_distribution_rejects_zero_length() {
        assert_eq!(group().circuit_distribution(0), Err(GatesetError::ZeroLength));
    }

    #[test]
    fn circuit_distribution_m1_is_uniform_on_nist() {
        let g = group();
        let d = g.circuit_distribution(1).unwrap();
        for label in 0..GROUP_ORDER as u8 {
            let want = if g.nist_labels().contains(&label) { 0.125 } else { 0.0 };
            assert!((d[label as usize] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn circuit_distribution_m2_matches_pair_enumeration() {
        let g = group();
        let d = g.circuit_distribution(2).unwrap();
        let mut brute = [0.0f64; GROUP_ORDER];
        for &a in g.nist_labels() {
            for &b in g.nist_labels() {
                brute[g.mul(b, a) as usize] += 1.0 / 64.0;
            }
        }
        for i in 0..GROUP_ORDER {
            assert!((d[i] - brute[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn circuit_distribution_alternates_and_converges() {
        let g = group();
        let (c12, sz) = g.design_subsets();
        let to_c12 = uniform_on(c12);
        let to_sz = uniform_on(sz);
        for m in (5..=31u32).step_by(2) {
            let tv = total_variation(&g.circuit_distribution(m).unwrap(), &to_sz);
            let rate = (2.0f64).powi(-(m as i32));
            assert!(tv < 10.0 * rate, "m={m}: tv={tv:e} vs rate {rate:e}");
            assert!(tv > rate / 10.0, "m={m}: tv={tv:e} collapsed below rate {rate:e}");
            let tv_next = total_variation(&g.circuit_distribution(m + 2).unwrap(), &to_sz);
            assert!(tv_next < tv);
        }
        let tv40 = total_variation(&g.circuit_distribution(40).unwrap(), &to_c12);
        assert!(tv40 < 1e-10, "tv at m=40 is {tv40:e}");
    }

    #[test]
    fn srb_aggregate_stays_uniform() {
        // Uniform draws over the full group leave the uniform distribution invariant,
        // which is immediate from the Latin-square property.
        let g = group();
        let uniform = [1.0 / GROUP_ORDER as f64; GROUP_ORDER];
        let mut next = [0.0f64; GROUP_ORDER];
        for c in 0..GROUP_ORDER {
            for gate in 0..GROUP_ORDER {
                next[g.table().mul[gate][c] as usize] += uniform[c] / GROUP_ORDER as f64;
            }
        }
        for v in next {
            assert!((v - 1.0 / GROUP_ORDER as f64).abs() < 1e-15);
        }
    }
}
