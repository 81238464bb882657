//! Twirling averages, the three-parameter decay recursion, and spectral analysis.
//!
//! The benchmarking average over gate sequences reduces, channel by channel, to group
//! averages of conjugated error maps (twirls) and to powers of a 3×3 recursion matrix
//! acting on the Bloch-diagonal of the accumulated error. This module provides those
//! objects plus two diagnostics: the spectrum of the sequence-averaged superoperator and
//! the perturbed projector that measures how far a gateset's noise is from depolarizing.

use crate::gateset::CliffordGroup;
use crate::ptm::Ptm;
use nalgebra::{Complex, DMatrix, Matrix3, Vector3};
use thiserror::Error;

/// Relative Frobenius change below which the projector iteration counts as converged.
pub const PROJECTOR_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("no channel pairs supplied")]
    EmptyInput,
    #[error("projector iteration failed to converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Which set of channels to average conjugations over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwirlSet {
    /// The four Pauli channels.
    Pauli,
    /// All 24 single-qubit Clifford channels.
    Clifford,
    /// The 12-element even subgroup (also a 2-design).
    C12,
    /// The eight quarter-π composite channels.
    Nist,
}

/// Average of `g · channel · g⁻¹` over the chosen set.
///
/// Over any 2-design this is the depolarizing channel with the Bloch-diagonal mean;
/// over the Paulis it keeps exactly the diagonal; over the quarter-π set with diagonal
/// input (x, y, z) it yields diag(1, (x+z)/2, (y+z)/2, (x+y)/2).
pub fn twirl(group: &CliffordGroup, channel: &Ptm, set: TwirlSet) -> Ptm {
    let labels: Vec<u8> = match set {
        TwirlSet::Pauli => (0..4).collect(),
        TwirlSet::Clifford => (0..crate::gateset::GROUP_ORDER as u8).collect(),
        TwirlSet::C12 => group.design_subsets().0.to_vec(),
        TwirlSet::Nist => group.nist_labels().to_vec(),
    };
    let mut acc = nalgebra::Matrix4::<f64>::zeros();
    for &g in &labels {
        let forward = group.ptm(g);
        let backward = group.ptm(group.inv(g));
        acc += (forward.0 * channel.0) * backward.0;
    }
    Ptm(acc / labels.len() as f64)
}

/// The 3×3 recursion that propagates the Bloch-diagonal (x_m, y_m, z_m) of the
/// sequence-averaged error by one appended gate.
#[derive(Debug, Clone, Copy)]
pub struct RecursionMatrix(pub Matrix3<f64>);

impl RecursionMatrix {
    /// Build from the Bloch-diagonal (x, y, z) of the per-gate twirled error.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RecursionMatrix(Matrix3::new(
            x / 2.0,
            0.0,
            z / 2.0,
            0.0,
            y / 2.0,
            z / 2.0,
            x / 2.0,
            y / 2.0,
            0.0,
        ))
    }

    pub fn from_channel_diagonal(channel: &Ptm) -> Self {
        let m = &channel.0;
        Self::new(m[(1, 1)], m[(2, 2)], m[(3, 3)])
    }

    /// (x_m, y_m, z_m) after m steps from the unit start vector.
    pub fn propagate(&self, m: u32) -> Vector3<f64> {
        let mut v = Vector3::new(1.0, 1.0, 1.0);
        for _ in 0..m {
            v = self.0 * v;
        }
        v
    }

    /// All three eigenvalues in closed form, sorted by descending value.
    ///
    /// The characteristic polynomial is λ³ − (a+b)λ² + (ab − ac − bc)λ + 2abc with
    /// a = x/2, b = y/2, c = z/2; its roots are real throughout the physical region,
    /// so the trigonometric cubic formula applies.
    pub fn spectrum(&self) -> [f64; 3] {
        let a = self.0[(0, 0)];
        let b = self.0[(1, 1)];
        let c = self.0[(0, 2)];
        let ca = -(a + b);
        let cb = a * b - a * c - b * c;
        let cc = 2.0 * a * b * c;
        let mut roots = solve_cubic(ca, cb, cc);
        roots.sort_by(|p, q| q.total_cmp(p));
        roots
    }
}

/// Real roots of λ³ + ca·λ² + cb·λ + cc = 0, assuming a non-negative discriminant
/// (three real roots, possibly repeated). Uses the trigonometric method on the
/// depressed cubic; the arccos argument is clamped so boundary repeats stay finite.
fn solve_cubic(ca: f64, cb: f64, cc: f64) -> [f64; 3] {
    let shift = ca / 3.0;
    let p = cb - ca * ca / 3.0;
    let q = 2.0 * ca.powi(3) / 27.0 - ca * cb / 3.0 + cc;
    if p >= -1e-300 {
        // Depressed cubic degenerates to t³ ≈ −q: (near-)triple root.
        let t = (-q).cbrt();
        return [t - shift; 3];
    }
    let scale = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt();
    let phi = arg.clamp(-1.0, 1.0).acos() / 3.0;
    let third = 2.0 * std::f64::consts::PI / 3.0;
    [
        scale * phi.cos() - shift,
        scale * (phi - third).cos() - shift,
        scale * (phi + third).cos() - shift,
    ]
}

/// Spectral summary of the recursion for a given per-gate diagonal (x, y, z).
#[derive(Debug, Clone, Copy)]
pub struct DecaySpectrum {
    /// Largest eigenvalue: the decay parameter the protocol estimates.
    pub dominant: f64,
    /// The two remaining eigenvalues, descending.
    pub subleading: [f64; 2],
    /// Set when the dominant eigenvalue sits far from 1, where a single-exponential
    /// read-out of the decay stops being meaningful.
    pub strong_noise: bool,
}

pub fn nist_decay_parameter(x: f64, y: f64, z: f64) -> DecaySpectrum {
    let s = RecursionMatrix::new(x, y, z).spectrum();
    DecaySpectrum {
        dominant: s[0],
        subleading: [s[1], s[2]],
        strong_noise: (1.0 - s[0]).abs() > 0.2,
    }
}

/// First-order approximations of the three eigenvalues around the noiseless point,
/// in the same descending order as [`RecursionMatrix::spectrum`] returns there.
pub fn perturbative_spectrum(x: f64, y: f64, z: f64) -> [f64; 3] {
    [
        (x + y + z) / 3.0,
        (x + y) / 4.0,
        -(x + y + 4.0 * z) / 12.0,
    ]
}

/// Sequence-averaged superoperator (1/n) Σ idealᵢ ⊗ noisyᵢ over (ideal, noisy) pairs.
///
/// With column-major vec, (B ⊗ A)·vec(X) = vec(A·X·Bᵀ), so powers of this matrix
/// propagate the sequence average of noisy products conjugated by ideal inverses.
pub fn averaged_superop(pairs: &[(Ptm, Ptm)]) -> Result<DMatrix<f64>, TheoryError> {
    if pairs.is_empty() {
        return Err(TheoryError::EmptyInput);
    }
    let mut acc = DMatrix::<f64>::zeros(16, 16);
    for (ideal, noisy) in pairs {
        let a = DMatrix::from_fn(4, 4, |i, j| ideal.0[(i, j)]);
        let b = DMatrix::from_fn(4, 4, |i, j| noisy.0[(i, j)]);
        acc += a.kronecker(&b);
    }
    Ok(acc / pairs.len() as f64)
}

/// Eigenvalues sorted by descending magnitude, ties broken by real then imaginary part.
pub fn eigenvalues_by_magnitude(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut eig: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|p, q| {
        q.norm()
            .total_cmp(&p.norm())
            .then(q.re.total_cmp(&p.re))
            .then(q.im.total_cmp(&p.im))
    });
    eig
}

/// Result of the perturbed-projector iteration.
#[derive(Debug, Clone)]
pub struct LAnalysis {
    /// Fixed point of A ↦ (1/p)·avgᵢ noisyᵢ·A·idealᵢᵀ from the traceless projector.
    pub l: Ptm,
    /// Ratio of largest to smallest nonzero singular value of the traceless 3×3 block;
    /// exactly 1 when the gateset noise is depolarizing.
    pub singular_spread: f64,
    pub iterations: usize,
}

/// Iterations guaranteed by the spectral-gap argument before the subleading
/// contamination drops below the fixed-point scale.
pub fn prescribed_iterations(p: f64) -> usize {
    let r = ((1.0 - p) / 2.0).max(1e-15);
    (-2.0 * r.ln() / std::f64::consts::LN_2).ceil() as usize
}

/// Power-iterate toward the dominant-eigenvalue projector of the averaged superoperator,
/// normalized by the decay parameter `p`. The start point diag(0, 1, 1, 1) has no overlap
/// with the stationary eigenvalue-1 direction, so the iteration isolates the decay mode.
pub fn compute_l(pairs: &[(Ptm, Ptm)], p: f64) -> Result<LAnalysis, TheoryError> {
    if pairs.is_empty() {
        return Err(TheoryError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let floor = prescribed_iterations(p);
    let cap = floor * 10;
    let mut a = nalgebra::Matrix4::<f64>::from_partial_diagonal(&[0.0, 1.0, 1.0, 1.0]);
    let mut residual = f64::INFINITY;
    for k in 1..=cap {
        let mut next = nalgebra::Matrix4::<f64>::zeros();
        for (ideal, noisy) in pairs {
            next += noisy.0 * a * ideal.0.transpose();
        }
        next /= p * n;
        residual = (next - a).norm() / next.norm().max(f64::MIN_POSITIVE);
        a = next;
        if residual < PROJECTOR_TOL && k >= floor {
            let sv = Ptm(a).unital_block().svd(false, false).singular_values;
            let max = sv.max();
            let cutoff = max * 1e-12;
            let min_nonzero = sv.iter().copied().filter(|&s| s > cutoff).fold(max, f64::min);
            let spread = if max == 0.0 { 1.0 } else { max / min_nonzero };
            return Ok(LAnalysis { l: Ptm(a), singular_spread: spread, iterations: k });
        }
    }
    Err(TheoryError::NoConvergence { iterations: cap, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateset::CliffordGroup;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn group() -> &'static CliffordGroup {
        CliffordGroup::shared()
    }

    /// Random trace-preserving (not necessarily positive) channel: first row pinned.
    fn random_tp(rng: &mut impl Rng) -> Ptm {
        let mut m = Matrix4::<f64>::zeros();
        m[(0, 0)] = 1.0;
        for i in 1..4 {
            for j in 0..4 {
                m[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        Ptm(m)
    }

    #[test]
    fn clifford_twirl_depolarizes_any_tp_channel() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        for _ in 0..100 {
            let l = random_tp(&mut rng);
            let t = twirl(group(), &l, TwirlSet::Clifford);
            let want = Ptm::depolarizing(l.bloch_diagonal_mean());
            assert!(t.approx_eq(&want, 1e-12), "max diff {}", t.max_abs_diff(&want));
        }
        let fixed = twirl(group(), &Ptm::pauli_diagonal(0.98, 0.97, 0.96), TwirlSet::Clifford);
        assert!(fixed.approx_eq(&Ptm::depolarizing(0.97), 1e-14));
    }

    #[test]
    fn the_even_subgroup_twirls_identically_to_the_full_group() {
        let mut rng = ChaCha12Rng::seed_from_u64(102);
        for _ in 0..100 {
            let l = random_tp(&mut rng);
            let a = twirl(group(), &l, TwirlSet::Clifford);
            let b = twirl(group(), &l, TwirlSet::C12);
            assert!(a.approx_eq(&b, 1e-12));
        }
    }

    #[test]
    fn pauli_twirl_keeps_exactly_the_diagonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(103);
        for _ in 0..100 {
            let l = random_tp(&mut rng);
            let t = twirl(group(), &l, TwirlSet::Pauli);
            let want = Ptm::pauli_diagonal(l.0[(1, 1)], l.0[(2, 2)], l.0[(3, 3)]);
            assert!(t.approx_eq(&want, 1e-12));
        }
    }

    #[test]
    fn quarter_pi_twirl_matches_the_pairwise_mean_formula() {
        let mut rng = ChaCha12Rng::seed_from_u64(104);
        for _ in 0..100 {
            let l = random_tp(&mut rng);
            let (x, y, z) = (l.0[(1, 1)], l.0[(2, 2)], l.0[(3, 3)]);
            let t = twirl(group(), &l, TwirlSet::Nist);
            let want = Ptm::pauli_diagonal((x + z) / 2.0, (y + z) / 2.0, (x + y) / 2.0);
            assert!(t.approx_eq(&want, 1e-12), "max diff {}", t.max_abs_diff(&want));
        }
        let fixed = twirl(group(), &Ptm::pauli_diagonal(0.98, 0.97, 0.96), TwirlSet::Nist);
        assert!(fixed.approx_eq(&Ptm::pauli_diagonal(0.97, 0.965, 0.975), 1e-14));
    }

    #[test]
    fn group_twirls_are_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(105);
        let l = random_tp(&mut rng);
        for set in [TwirlSet::Pauli, TwirlSet::Clifford, TwirlSet::C12] {
            let once = twirl(group(), &l, set);
            let twice = twirl(group(), &once, set);
            assert!(once.approx_eq(&twice, 1e-12));
        }
        // The quarter-π set is not a group, and its twirl is genuinely not a projector.
        let once = twirl(group(), &Ptm::pauli_diagonal(0.9, 0.5, 0.1), TwirlSet::Nist);
        let twice = twirl(group(), &once, TwirlSet::Nist);
        assert!(!once.approx_eq(&twice, 1e-3));
    }

    #[test]
    fn recursion_matrix_has_the_frozen_noiseless_spectrum() {
        let m = RecursionMatrix::new(1.0, 1.0, 1.0);
        let s = m.spectrum();
        assert!((s[0] - 1.0).abs() < 1e-14);
        assert!((s[1] - 0.5).abs() < 1e-14);
        assert!((s[2] + 0.5).abs() < 1e-14);
        let v = m.propagate(7);
        for c in v.iter() {
            assert!((c - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_spectrum_matches_numeric_eigenvalues() {
        let mut rng = ChaCha12Rng::seed_from_u64(106);
        for _ in 0..200 {
            let x = rng.gen_range(0.7..1.0);
            let y = rng.gen_range(0.7..1.0);
            let z = rng.gen_range(0.7..1.0);
            let m = RecursionMatrix::new(x, y, z);
            let closed = m.spectrum();
            let mut numeric: Vec<f64> = m
                .0
                .complex_eigenvalues()
                .iter()
                .map(|c| {
                    assert!(c.im.abs() < 1e-10, "unexpected complex root {c}");
                    c.re
                })
                .collect();
            numeric.sort_by(|p, q| q.total_cmp(p));
            for (a, b) in closed.iter().zip(&numeric) {
                assert!((a - b).abs() < 1e-10, "closed {a} vs numeric {b}");
            }
        }
    }

    #[test]
    fn cubic_solver_handles_repeated_roots() {
        // (λ−2)³ = λ³ − 6λ² + 12λ − 8
        let roots = solve_cubic(-6.0, 12.0, -8.0);
        for r in roots {
            assert!((r - 2.0).abs() < 1e-5);
        }
        // (λ−1)²(λ+2) = λ³ − 3λ + 2
        let mut roots = solve_cubic(0.0, -3.0, 2.0);
        roots.sort_by(|a, b| a.total_cmp(b));
        assert!((roots[0] + 2.0).abs() < 1e-7);
        assert!((roots[1] - 1.0).abs() < 1e-7);
        assert!((roots[2] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn propagation_agrees_with_matrix_powers() {
        let m = RecursionMatrix::new(0.95, 0.9, 0.85);
        let mut power = Matrix3::identity();
        for step in 0..=6 {
            let direct = m.propagate(step);
            let via_power = power * Vector3::new(1.0, 1.0, 1.0);
            assert!((direct - via_power).norm() < 1e-14);
            power = m.0 * power;
        }
    }

    /// The recursion assumes each uniform quarter-π draw can be relabeled through the
    /// accumulated frame; that is validated here, not assumed: the sequence-averaged
    /// composite over *all* 8^m sequences must equal the diagonal propagation.
    #[test]
    fn exhaustive_sequence_averages_match_the_recursion_to_depth_five() {
        let g = group();
        let err = Ptm::pauli_diagonal(0.98, 0.99, 0.97);
        let recursion = RecursionMatrix::from_channel_diagonal(&err);
        for m in 1..=5u32 {
            let v = recursion.propagate(m);
            let predicted = Matrix4::from_partial_diagonal(&[1.0, v[0], v[1], v[2]]);
            let total = 8u64.pow(m);
            let mut sum = Matrix4::<f64>::zeros();
            let mut seq = vec![0usize; m as usize];
            loop {
                let mut label = 0u8;
                let mut prod = Ptm::identity();
                for &i in &seq {
                    let gate = g.nist_labels()[i];
                    label = g.mul(gate, label);
                    prod = Ptm::compose(&Ptm::compose(&err, g.ptm(gate)), &prod);
                }
                sum += g.ptm(g.inv(label)).0 * prod.0;

                let mut k = 0;
                while k < seq.len() {
                    seq[k] += 1;
                    if seq[k] < 8 {
                        break;
                    }
                    seq[k] = 0;
                    k += 1;
                }
                if k == seq.len() {
                    break;
                }
            }
            let mean = sum / total as f64;
            assert!(
                (mean - predicted).abs().max() < 1e-12,
                "depth {m}: averaged composite deviates from the recursion"
            );
        }
    }

    #[test]
    fn perturbative_spectrum_is_exact_at_the_noiseless_point() {
        let p = perturbative_spectrum(1.0, 1.0, 1.0);
        assert_eq!(p, [1.0, 0.5, -0.5]);
        let s = nist_decay_parameter(1.0, 1.0, 1.0);
        assert!((s.dominant - 1.0).abs() < 1e-14);
        assert!(!s.strong_noise);
        assert!(nist_decay_parameter(0.2, 0.2, 0.2).strong_noise);
    }

    fn ideal_pairs(labels: impl IntoIterator<Item = u8>) -> Vec<(Ptm, Ptm)> {
        labels
            .into_iter()
            .map(|g| (*group().ptm(g), *group().ptm(g)))
            .collect()
    }

    #[test]
    fn ideal_quarter_pi_superop_has_the_frozen_spectrum() {
        let pairs = ideal_pairs(group().nist_labels().iter().copied());
        let sup = averaged_superop(&pairs).unwrap();
        let eig = eigenvalues_by_magnitude(&sup);
        // The two ±1/2 eigenvalues tie in magnitude up to rounding, so compare the top
        // four sorted by real part instead of by magnitude rank.
        let mut top: Vec<f64> = eig[..4]
            .iter()
            .map(|e| {
                assert!(e.im.abs() < 1e-10);
                e.re
            })
            .collect();
        top.sort_by(|a, b| b.total_cmp(a));
        let expected = [1.0, 1.0, 0.5, -0.5];
        for (got, want) in top.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "got {got} want {want}");
        }
        for e in &eig[4..] {
            assert!(e.norm() < 1e-10);
        }
    }

    #[test]
    fn ideal_clifford_superop_is_a_rank_two_projector() {
        let pairs = ideal_pairs(0..24);
        let sup = averaged_superop(&pairs).unwrap();
        let eig = eigenvalues_by_magnitude(&sup);
        assert!((eig[0].re - 1.0).abs() < 1e-10);
        assert!((eig[1].re - 1.0).abs() < 1e-10);
        for e in &eig[2..] {
            assert!(e.norm() < 1e-10);
        }
    }

    #[test]
    fn superop_second_eigenvalue_tracks_the_recursion_for_uniform_noise() {
        let mut rng = ChaCha12Rng::seed_from_u64(107);
        for _ in 0..50 {
            let x = rng.gen_range(0.9..1.0);
            let y = rng.gen_range(0.9..1.0);
            let z = rng.gen_range(0.9..1.0);
            let err = Ptm::pauli_diagonal(x, y, z);
            let pairs: Vec<(Ptm, Ptm)> = group()
                .nist_labels()
                .iter()
                .map(|&g| (*group().ptm(g), Ptm::compose(&err, group().ptm(g))))
                .collect();
            let sup = averaged_superop(&pairs).unwrap();
            let eig = eigenvalues_by_magnitude(&sup);
            let dominant = nist_decay_parameter(x, y, z).dominant;
            // Eigenvalue 1 survives (trace preservation); the next one is the decay.
            assert!((eig[0].re - 1.0).abs() < 1e-10);
            assert!(eig[1].im.abs() < 1e-10);
            assert!((eig[1].re - dominant).abs() < 1e-10);
        }
    }

    #[test]
    fn projector_iteration_fixes_the_traceless_projector_for_depolarizing_noise() {
        let p0 = 0.98;
        let err = Ptm::depolarizing(p0);
        let pairs: Vec<(Ptm, Ptm)> = group()
            .nist_labels()
            .iter()
            .map(|&g| (*group().ptm(g), Ptm::compose(&err, group().ptm(g))))
            .collect();
        let out = compute_l(&pairs, p0).unwrap();
        let want = Ptm(Matrix4::from_partial_diagonal(&[0.0, 1.0, 1.0, 1.0]));
        assert!(out.l.approx_eq(&want, 1e-12));
        assert!((out.singular_spread - 1.0).abs() < 1e-12);
        assert!(out.iterations >= prescribed_iterations(p0));
    }

    #[test]
    fn projector_iteration_reports_failure_for_a_wrong_decay_parameter() {
        let err = Ptm::depolarizing(0.95);
        let pairs: Vec<(Ptm, Ptm)> = group()
            .nist_labels()
            .iter()
            .map(|&g| (*group().ptm(g), Ptm::compose(&err, group().ptm(g))))
            .collect();
        // Normalizing by half the true decay drives the iterate to grow without settling.
        let out = compute_l(&pairs, 0.475);
        assert!(matches!(out, Err(TheoryError::NoConvergence { .. })));
        assert!(matches!(compute_l(&[], 0.9), Err(TheoryError::EmptyInput)));
    }

    #[test]
    fn prescribed_iteration_count_scales_with_the_gap() {
        assert_eq!(prescribed_iterations(1.0), 100); // r clamps at 1e-15
        let coarse = prescribed_iterations(0.98); // r = 0.01 → ~13.3
        assert_eq!(coarse, 14);
        assert!(prescribed_iterations(0.9999) > coarse);
    }
}
