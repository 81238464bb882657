//! Pulses and their Pauli-Liouville representation.
//!
//! A pulse is the SU(2) rotation `exp(-i θ/2 σ_a)` about axis `a`. A channel `Λ` is stored
//! as its 4×4 real transfer matrix over the basis (I, σx, σy, σz),
//! `Λ_ij = (1/2) tr[B_i Λ(B_j)]`, acting on column Bloch vectors `v_j = tr(B_j ρ)`.
//! With that convention the map `U ↦ ptm(U)` is a homomorphism: channels applied later
//! sit on the left of the matrix product.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector4};
use num_complex::Complex64;
use thiserror::Error;

/// Entrywise tolerance under which two channels are considered equal.
pub const CHANNEL_TOL: f64 = 1e-9;
/// Maximum deviation from unitarity accepted by [`Ptm::from_unitary`].
pub const UNITARY_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum PtmError {
    #[error("input is not unitary (deviation {deviation:.3e} exceeds {UNITARY_TOL:.0e})")]
    NotUnitary { deviation: f64 },
    #[error("state has Bloch norm {norm} outside the unit ball")]
    NonPhysicalState { norm: f64 },
}

/// Rotation generator of a pulse. `I` is the do-nothing pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    I,
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::I => "I",
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const IM: Complex64 = Complex64::new(0.0, 1.0);

/// The basis (I, σx, σy, σz) in the order used everywhere in this crate.
pub fn pauli_basis() -> [Matrix2<Complex64>; 4] {
    [
        Matrix2::new(ONE, ZERO, ZERO, ONE),
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -IM, IM, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

/// A 2×2 unitary, kept in complex matrix form so global phases are visible to tests
/// even though the transfer matrix forgets them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(pub Matrix2<Complex64>);

impl Unitary2 {
    pub fn identity() -> Self {
        Unitary2(Matrix2::identity())
    }

    /// Closed form of `exp(-i angle/2 σ_axis)`. The `I` axis ignores the angle.
    pub fn pulse(axis: Axis, angle: f64) -> Self {
        if axis == Axis::I {
            return Self::identity();
        }
        let c = Complex64::new((angle / 2.0).cos(), 0.0);
        let ms = Complex64::new(0.0, -(angle / 2.0).sin());
        let sigma = match axis {
            Axis::X => pauli_basis()[1],
            Axis::Y => pauli_basis()[2],
            Axis::Z => pauli_basis()[3],
            Axis::I => unreachable!(),
        };
        Unitary2(Matrix2::identity() * c + sigma * ms)
    }

    pub fn dagger(&self) -> Self {
        Unitary2(self.0.adjoint())
    }

    /// `later * earlier`: the right factor acts first.
    pub fn mul(&self, earlier: &Unitary2) -> Self {
        Unitary2(self.0 * earlier.0)
    }

    /// ‖U†U − 1‖_max.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.0.adjoint() * self.0 - Matrix2::identity();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Pauli transfer matrix of a single-qubit channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ptm(pub Matrix4<f64>);

impl Ptm {
    pub fn identity() -> Self {
        Ptm(Matrix4::identity())
    }

    /// diag(1, x, y, z) — a Pauli-diagonal channel.
    pub fn pauli_diagonal(x: f64, y: f64, z: f64) -> Self {
        Ptm(Matrix4::from_diagonal(&Vector4::new(1.0, x, y, z)))
    }

    /// Depolarizing channel with Bloch contraction `p`.
    pub fn depolarizing(p: f64) -> Self {
        Self::pauli_diagonal(p, p, p)
    }

    /// Dephasing factor diag(1, α, α, 1).
    pub fn dephasing(alpha: f64) -> Self {
        Self::pauli_diagonal(alpha, alpha, 1.0)
    }

    /// Transfer matrix of the conjugation `ρ ↦ U ρ U†`. Rejects non-unitary input.
    pub fn from_unitary(u: &Unitary2) -> Result<Self, PtmError> {
        let defect = u.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(PtmError::NotUnitary { deviation: defect });
        }
        let basis = pauli_basis();
        let udag = u.0.adjoint();
        let mut m = Matrix4::zeros();
        for j in 0..4 {
            let image = u.0 * basis[j] * udag;
            for i in 0..4 {
                m[(i, j)] = 0.5 * (basis[i] * image).trace().re;
            }
        }
        Ok(Ptm(m))
    }

    /// Transfer matrix of the pulse `exp(-i angle/2 σ_axis)`.
    pub fn pulse(axis: Axis, angle: f64) -> Self {
        Self::from_unitary(&Unitary2::pulse(axis, angle)).expect("closed-form pulse is unitary")
    }

    /// `later ∘ earlier` as matrices: `later.0 * earlier.0`.
    pub fn compose(later: &Ptm, earlier: &Ptm) -> Ptm {
        Ptm(later.0 * earlier.0)
    }

    /// Average gate infidelity `r = 1/2 − (Λ_xx + Λ_yy + Λ_zz)/6`.
    pub fn infidelity(&self) -> f64 {
        0.5 - (self.0[(1, 1)] + self.0[(2, 2)] + self.0[(3, 3)]) / 6.0
    }

    /// Mean of the three Bloch-diagonal entries; the depolarizing parameter after a
    /// Clifford twirl.
    pub fn bloch_diagonal_mean(&self) -> f64 {
        (self.0[(1, 1)] + self.0[(2, 2)] + self.0[(3, 3)]) / 3.0
    }

    pub fn max_abs_diff(&self, other: &Ptm) -> f64 {
        (self.0 - other.0).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Ptm, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// First row equals (1, 0, 0, 0) within `tol`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (self.0[(0, 0)] - 1.0).abs() <= tol
            && self.0[(0, 1)].abs() <= tol
            && self.0[(0, 2)].abs() <= tol
            && self.0[(0, 3)].abs() <= tol
    }

    /// First column equals (1, 0, 0, 0)ᵀ within `tol`.
    pub fn is_unital(&self, tol: f64) -> bool {
        (self.0[(0, 0)] - 1.0).abs() <= tol
            && self.0[(1, 0)].abs() <= tol
            && self.0[(2, 0)].abs() <= tol
            && self.0[(3, 0)].abs() <= tol
    }

    /// Lower-right 3×3 block acting on traceless operators.
    pub fn unital_block(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(1, 1).into_owned()
    }

    /// For unitary channels the transfer matrix is orthogonal, so the transpose inverts it.
    pub fn transpose(&self) -> Ptm {
        Ptm(self.0.transpose())
    }
}

impl std::ops::Mul for Ptm {
    type Output = Ptm;
    fn mul(self, rhs: Ptm) -> Ptm {
        Ptm::compose(&self, &rhs)
    }
}

/// A qubit state as the Bloch column vector (1, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State(pub Vector4<f64>);

impl State {
    /// |0⟩⟨0| = (I + σz)/2.
    pub fn ket0() -> Self {
        State(Vector4::new(1.0, 0.0, 0.0, 1.0))
    }

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, PtmError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if norm > 1.0 + 1e-12 {
            return Err(PtmError::NonPhysicalState { norm });
        }
        Ok(State(Vector4::new(1.0, x, y, z)))
    }

    pub fn apply(&self, ptm: &Ptm) -> State {
        State(ptm.0 * self.0)
    }

    /// Probability of the outcome with projector (I ± σz)/2; `plus` picks the sign.
    pub fn measure_z(&self, plus: bool) -> f64 {
        let sign = if plus { 1.0 } else { -1.0 };
        0.5 * (self.0[0] + sign * self.0[3])
    }
}
