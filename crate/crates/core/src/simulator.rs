//! Dense state-vector and density-matrix simulation for registers of up to
//! three qubits.
//!
//! Basis ordering is big-endian: qubit 0 is the most significant bit of the
//! basis index, so on three qubits `|q0 q1 q2>` has index `4*q0 + 2*q1 + q2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::noise::NoiseModel;
use crate::{Error, Result};

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 3;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// 2x2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "RY")]
    Ry,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "CRY")]
    Cry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    /// Rotation angle in radians; `R(θ) = exp(-iθσ/2)`.
    pub angle: f64,
}

impl GateOp {
    pub fn ry(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Ry,
            target,
            control: None,
            angle,
        }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Rz,
            target,
            control: None,
            angle,
        }
    }

    pub fn cry(control: usize, target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Cry,
            target,
            control: Some(control),
            angle,
        }
    }

    /// The same gate with the angle negated.
    pub fn inverse(&self) -> Self {
        Self {
            angle: -self.angle,
            ..*self
        }
    }

    /// Qubits the gate acts on, control first.
    pub fn qubits(&self) -> Vec<usize> {
        match self.control {
            Some(c) => vec![c, self.target],
            None => vec![self.target],
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::QubitOutOfRange {
                index: self.target,
                n_qubits,
            });
        }
        match (self.kind, self.control) {
            (GateKind::Cry, Some(c)) => {
                if c >= n_qubits {
                    return Err(Error::QubitOutOfRange { index: c, n_qubits });
                }
                if c == self.target {
                    return Err(Error::InvalidGate(format!(
                        "control and target are both qubit {c}"
                    )));
                }
            }
            (GateKind::Cry, None) => {
                return Err(Error::InvalidGate("CRY without a control qubit".into()))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidGate(format!(
                    "{:?} does not take a control qubit",
                    self.kind
                )))
            }
            (_, None) => {}
        }
        if !self.angle.is_finite() {
            return Err(Error::InvalidGate(format!("angle {}", self.angle)));
        }
        Ok(())
    }

    /// The 2x2 rotation applied to the target (for CRY, when the control is set).
    pub fn matrix(&self) -> Mat2 {
        let half = 0.5 * self.angle;
        match self.kind {
            GateKind::Ry | GateKind::Cry => {
                let (s, c) = half.sin_cos();
                [
                    [C64::new(c, 0.0), C64::new(-s, 0.0)],
                    [C64::new(s, 0.0), C64::new(c, 0.0)],
                ]
            }
            GateKind::Rz => [
                [C64::from_polar(1.0, -half), ZERO],
                [ZERO, C64::from_polar(1.0, half)],
            ],
        }
    }

    /// Derivative of [`GateOp::matrix`] with respect to the angle.
    pub fn matrix_derivative(&self) -> Mat2 {
        let half = 0.5 * self.angle;
        match self.kind {
            GateKind::Ry | GateKind::Cry => {
                let (s, c) = half.sin_cos();
                [
                    [C64::new(-0.5 * s, 0.0), C64::new(-0.5 * c, 0.0)],
                    [C64::new(0.5 * c, 0.0), C64::new(-0.5 * s, 0.0)],
                ]
            }
            GateKind::Rz => [
                [C64::from_polar(1.0, -half) * C64::new(0.0, -0.5), ZERO],
                [ZERO, C64::from_polar(1.0, half) * C64::new(0.0, 0.5)],
            ],
        }
    }
}

#[inline]
pub(crate) fn bit_mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::RegisterSize(n_qubits));
    }
    Ok(())
}

fn check_qubit(n_qubits: usize, qubit: usize) -> Result<()> {
    if qubit >= n_qubits {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            n_qubits,
        });
    }
    Ok(())
}

/// Applies `m` to the target qubit of `amps`, restricted to the control-set
/// subspace when `control` is given. With `zero_inactive`, amplitudes outside
/// that subspace are cleared (used for angle derivatives of controlled gates).
pub(crate) fn apply_mat2(
    amps: &mut [C64],
    n_qubits: usize,
    target: usize,
    control: Option<usize>,
    m: &Mat2,
    zero_inactive: bool,
) {
    let tmask = bit_mask(n_qubits, target);
    let cmask = control.map(|c| bit_mask(n_qubits, c));
    for i in 0..amps.len() {
        if i & tmask != 0 {
            continue;
        }
        let j = i | tmask;
        if let Some(cm) = cmask {
            if i & cm == 0 {
                if zero_inactive {
                    amps[i] = ZERO;
                    amps[j] = ZERO;
                }
                continue;
            }
        }
        let (a0, a1) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a0 + m[0][1] * a1;
        amps[j] = m[1][0] * a0 + m[1][1] * a1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_register(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::LengthMismatch {
                what: "amplitudes",
                expected: 1 << n_qubits,
                actual: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "state is not normalized (squared norm {norm})"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Returns the evolved state; `self` is left untouched.
    pub fn apply(&self, gate: &GateOp) -> Result<Self> {
        let mut out = self.clone();
        out.apply_in_place(gate)?;
        Ok(out)
    }

    pub(crate) fn apply_in_place(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        debug_assert!((self.norm_sqr() - 1.0).abs() < 1e-9, "non-normalized input");
        apply_mat2(
            &mut self.amplitudes,
            self.n_qubits,
            gate.target,
            gate.control,
            &gate.matrix(),
            false,
        );
        Ok(())
    }

    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        check_qubit(self.n_qubits, qubit)?;
        Ok(z_expectation_of(&self.amplitudes, self.n_qubits, qubit))
    }

    /// Born-rule outcome probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn z_expectation_of(amps: &[C64], n_qubits: usize, qubit: usize) -> f64 {
    let mask = bit_mask(n_qubits, qubit);
    amps.iter()
        .enumerate()
        .map(|(i, a)| {
            let p = a.norm_sqr();
            if i & mask == 0 {
                p
            } else {
                -p
            }
        })
        .sum()
}

/// Applies `gate` to `state` and returns the new state.
pub fn apply_gate(state: &StateVector, gate: &GateOp) -> Result<StateVector> {
    state.apply(gate)
}

/// `<ψ|σ_z^qubit|ψ>`
pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}

pub fn measure_distribution(state: &StateVector) -> Vec<f64> {
    state.probabilities()
}

fn register_size_of(distribution: &[f64]) -> Result<usize> {
    let len = distribution.len();
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::InvalidArgument(format!(
            "distribution length {len} is not 2^n"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_register(n)?;
    Ok(n)
}

/// Draws `n_shots` outcomes from `distribution` and returns the empirical
/// outcome counts. Sampling is multinomial via sequential binomials.
pub fn sample_counts<R: Rng + ?Sized>(
    distribution: &[f64],
    n_shots: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("n_shots must be at least 1".into()));
    }
    if distribution.iter().any(|p| !(p.is_finite() && *p >= -1e-12)) {
        return Err(Error::InvalidArgument(
            "distribution has negative or non-finite entries".into(),
        ));
    }
    let total: f64 = distribution.iter().map(|p| p.max(0.0)).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "distribution sums to {total}"
        )));
    }
    let mut counts = vec![0u64; distribution.len()];
    let mut remaining = n_shots;
    let mut mass_left = 1.0f64;
    for (k, &p) in distribution.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if k + 1 == distribution.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass_left > 0.0 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let drawn = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng)
        };
        counts[k] = drawn;
        remaining -= drawn;
        mass_left -= p;
    }
    Ok(counts)
}

/// Per-qubit `<σ_z>` estimated from `n_shots` projective measurements.
pub fn estimate_expectations_shots<R: Rng + ?Sized>(
    distribution: &[f64],
    n_shots: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n_qubits = register_size_of(distribution)?;
    let counts = sample_counts(distribution, n_shots, rng)?;
    let mut out = vec![0.0; n_qubits];
    for (q, slot) in out.iter_mut().enumerate() {
        let mask = bit_mask(n_qubits, q);
        let signed: i64 = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| if i & mask == 0 { c as i64 } else { -(c as i64) })
            .sum();
        *slot = signed as f64 / n_shots as f64;
    }
    Ok(out)
}

/// Mixed state of up to three qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        Ok(Self::from_pure(&StateVector::zero(n_qubits)?))
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            n_qubits: state.n_qubits(),
            entries: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(Self {
            n_qubits,
            entries: DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn from_matrix(n_qubits: usize, entries: DMatrix<C64>) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1 << n_qubits;
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::LengthMismatch {
                what: "density matrix dimension",
                expected: dim,
                actual: entries.nrows(),
            });
        }
        Ok(Self { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let diff = &self.entries - self.entries.adjoint();
        diff.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        check_qubit(self.n_qubits, qubit)?;
        let mask = bit_mask(self.n_qubits, qubit);
        Ok((0..self.dim())
            .map(|i| {
                let p = self.entries[(i, i)].re;
                if i & mask == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum())
    }

    /// Diagonal of the density matrix, clipped at zero.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.entries[(i, i)].re.max(0.0))
            .collect()
    }

    /// `U ρ U†` for the ideal gate.
    pub fn apply_unitary(&self, gate: &GateOp) -> Result<Self> {
        gate.validate(self.n_qubits)?;
        let u = embed_gate(self.n_qubits, gate);
        Ok(Self {
            n_qubits: self.n_qubits,
            entries: &u * &self.entries * u.adjoint(),
        })
    }

    /// `Σ_k K ρ K†`
    pub fn apply_kraus(&self, operators: &[DMatrix<C64>]) -> Self {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for k in operators {
            out += k * &self.entries * k.adjoint();
        }
        Self {
            n_qubits: self.n_qubits,
            entries: out,
        }
    }

    /// Convex combination `(1-w)·self + w·other`.
    pub(crate) fn mix(&self, other: &Self, w: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            entries: &self.entries * C64::new(1.0 - w, 0.0) + &other.entries * C64::new(w, 0.0),
        }
    }
}

/// Full `2^n x 2^n` unitary of one gate.
pub fn embed_gate(n_qubits: usize, gate: &GateOp) -> DMatrix<C64> {
    let dim = 1 << n_qubits;
    let m = gate.matrix();
    let mut u = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut basis = vec![ZERO; dim];
        basis[col] = ONE;
        apply_mat2(&mut basis, n_qubits, gate.target, gate.control, &m, false);
        for (row, a) in basis.into_iter().enumerate() {
            u[(row, col)] = a;
        }
    }
    u
}

/// Single-qubit operator `m` acting on `qubit`, identity elsewhere.
pub fn embed_single(n_qubits: usize, qubit: usize, m: &Mat2) -> DMatrix<C64> {
    let dim = 1 << n_qubits;
    let mask = bit_mask(n_qubits, qubit);
    DMatrix::from_fn(dim, dim, |r, c| {
        if (r & !mask) != (c & !mask) {
            return ZERO;
        }
        let rb = usize::from(r & mask != 0);
        let cb = usize::from(c & mask != 0);
        m[rb][cb]
    })
}

/// Evolves `dm` through the ideal gate, then through the gate's error channels
/// when a noise model is given.
pub fn evolve_density(
    dm: &DensityMatrix,
    gate: &GateOp,
    noise: Option<&NoiseModel>,
) -> Result<DensityMatrix> {
    let ideal = dm.apply_unitary(gate)?;
    match noise {
        None => Ok(ideal),
        Some(model) => crate::noise::apply_gate_errors(&ideal, gate, model),
    }
}
