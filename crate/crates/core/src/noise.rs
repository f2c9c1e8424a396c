//! Simplified device noise: per-qubit readout confusion and thermal
//! relaxation, per-gate depolarizing error and gate duration.
//!
//! After every ideal gate the evolution applies, in this order:
//! 1. depolarizing error on the gate's qubits,
//! 2. thermal relaxation over the gate duration on the gate's qubits and,
//!    when `idle_relaxation` is set, on every other qubit as well.
//!
//! Readout confusion acts on the final outcome distribution.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::generator::{Architecture, CircuitLayout};
use crate::simulator::{
    bit_mask, embed_single, estimate_expectations_shots, C64, DensityMatrix, GateKind, GateOp,
    Mat2,
};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// `null` stands for an infinite time constant.
fn null_as_infinity<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitCalibration {
    /// Probability of reading 1 when the qubit is in |0>.
    pub p10: f64,
    /// Probability of reading 0 when the qubit is in |1>.
    pub p01: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub t1_s: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub t2_s: f64,
}

impl QubitCalibration {
    pub fn ideal() -> Self {
        Self {
            p10: 0.0,
            p01: 0.0,
            t1_s: f64::INFINITY,
            t2_s: f64::INFINITY,
        }
    }
}

/// Error and duration of one gate kind. Entries with `qubits` set apply only
/// to that exact qubit tuple (control first for CRY) and take precedence over
/// a kind-wide entry without `qubits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCalibration {
    pub kind: GateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<Vec<usize>>,
    pub error_prob: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub qubits: Vec<QubitCalibration>,
    #[serde(default)]
    pub gates: Vec<GateCalibration>,
    #[serde(default = "default_idle_relaxation")]
    pub idle_relaxation: bool,
}

fn default_idle_relaxation() -> bool {
    true
}

impl NoiseModel {
    /// Model with no errors at all.
    pub fn ideal(n_qubits: usize) -> Self {
        Self {
            qubits: vec![QubitCalibration::ideal(); n_qubits],
            gates: Vec::new(),
            idle_relaxation: true,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64, what: &str| -> Result<()> {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidNoise(format!("{what} = {p} is not a probability")))
            }
        };
        for (i, q) in self.qubits.iter().enumerate() {
            prob(q.p10, &format!("qubits[{i}].p10"))?;
            prob(q.p01, &format!("qubits[{i}].p01"))?;
            check_times(q.t1_s, q.t2_s).map_err(|e| match e {
                Error::InvalidNoise(m) => Error::InvalidNoise(format!("qubits[{i}]: {m}")),
                other => other,
            })?;
        }
        for (i, g) in self.gates.iter().enumerate() {
            prob(g.error_prob, &format!("gates[{i}].error_prob"))?;
            if !(g.duration_s >= 0.0 && g.duration_s.is_finite()) {
                return Err(Error::InvalidNoise(format!(
                    "gates[{i}].duration_s = {} must be finite and nonnegative",
                    g.duration_s
                )));
            }
            if let Some(qs) = &g.qubits {
                let expected = if g.kind == GateKind::Cry { 2 } else { 1 };
                if qs.len() != expected {
                    return Err(Error::InvalidNoise(format!(
                        "gates[{i}] lists {} qubits for {:?}",
                        qs.len(),
                        g.kind
                    )));
                }
            }
        }
        Ok(())
    }

    /// Error probability and duration for a concrete gate.
    pub fn gate_calibration(&self, gate: &GateOp) -> (f64, f64) {
        let qubits = gate.qubits();
        let exact = self
            .gates
            .iter()
            .find(|g| g.kind == gate.kind && g.qubits.as_deref() == Some(qubits.as_slice()));
        let generic = || {
            self.gates
                .iter()
                .find(|g| g.kind == gate.kind && g.qubits.is_none())
        };
        exact
            .or_else(generic)
            .map(|g| (g.error_prob, g.duration_s))
            .unwrap_or((0.0, 0.0))
    }
}

fn check_times(t1: f64, t2: f64) -> Result<()> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(Error::InvalidNoise(format!(
            "relaxation times must be positive (t1 = {t1}, t2 = {t2})"
        )));
    }
    if t1.is_finite() && t2 > 2.0 * t1 {
        return Err(Error::InvalidNoise(format!(
            "t2 = {t2} exceeds 2*t1 = {}",
            2.0 * t1
        )));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidNoise(format!("probability {p} outside [0, 1]")))
    }
}

fn kraus_on(dm: &DensityMatrix, qubit: usize, ops: &[Mat2]) -> DensityMatrix {
    let n = dm.n_qubits();
    let full: Vec<DMatrix<C64>> = ops.iter().map(|m| embed_single(n, qubit, m)).collect();
    dm.apply_kraus(&full)
}

/// Thermal relaxation of one qubit toward |0> over `duration` seconds.
///
/// Amplitude damping with `γ = 1 - exp(-duration/t1)` followed by pure
/// dephasing chosen so that coherences decay by exactly `exp(-duration/t2)`.
pub fn relaxation_channel(
    dm: &DensityMatrix,
    qubit: usize,
    t1: f64,
    t2: f64,
    duration: f64,
) -> Result<DensityMatrix> {
    check_times(t1, t2)?;
    if qubit >= dm.n_qubits() {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            n_qubits: dm.n_qubits(),
        });
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidNoise(format!("duration {duration} is negative")));
    }
    if duration == 0.0 {
        return Ok(dm.clone());
    }
    let gamma = -(-duration / t1).exp_m1();
    // Coherence left after amplitude damping is sqrt(1-γ) = exp(-d/(2 t1)).
    let dephase_exponent = duration / t2 - duration / (2.0 * t1);
    let keep = (-dephase_exponent.max(0.0)).exp();
    let lambda = 1.0 - keep * keep;

    let mut out = dm.clone();
    if gamma > 0.0 {
        let k0 = [[ONE, ZERO], [ZERO, C64::new((1.0 - gamma).sqrt(), 0.0)]];
        let k1 = [[ZERO, C64::new(gamma.sqrt(), 0.0)], [ZERO, ZERO]];
        out = kraus_on(&out, qubit, &[k0, k1]);
    }
    if lambda > 0.0 {
        let k0 = [[ONE, ZERO], [ZERO, C64::new((1.0 - lambda).sqrt(), 0.0)]];
        let k1 = [[ZERO, ZERO], [ZERO, C64::new(lambda.sqrt(), 0.0)]];
        out = kraus_on(&out, qubit, &[k0, k1]);
    }
    Ok(out)
}

const PAULIS: [Mat2; 4] = [
    [[ONE, ZERO], [ZERO, ONE]],
    [[ZERO, ONE], [ONE, ZERO]],
    [[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]],
    [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]],
];

/// `ρ -> (1-p)ρ + p·(I/2^k ⊗ Tr_qubits ρ)` on the listed `k` qubits.
///
/// The depolarized part is the uniform Pauli twirl over the acted qubits.
pub fn depolarizing_channel(dm: &DensityMatrix, qubits: &[usize], p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let n = dm.n_qubits();
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: n,
            });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::InvalidNoise(format!("qubit {q} listed twice")));
        }
    }
    if p == 0.0 || qubits.is_empty() {
        return Ok(dm.clone());
    }
    let k = qubits.len() as u32;
    let n_strings = 4usize.pow(k);
    let weight = C64::new((1.0 / n_strings as f64).sqrt(), 0.0);
    let dim = dm.dim();
    let ops: Vec<DMatrix<C64>> = (0..n_strings)
        .map(|code| {
            let mut op = DMatrix::<C64>::identity(dim, dim);
            let mut rest = code;
            for &q in qubits {
                op = embed_single(n, q, &PAULIS[rest % 4]) * op;
                rest /= 4;
            }
            op * weight
        })
        .collect();
    let twirled = dm.apply_kraus(&ops);
    Ok(dm.mix(&twirled, p))
}

/// Applies per-qubit readout confusion to an outcome distribution.
pub fn apply_readout_error(distribution: &[f64], model: &NoiseModel) -> Result<Vec<f64>> {
    let n = model.n_qubits();
    if distribution.len() != 1 << n {
        return Err(Error::LengthMismatch {
            what: "distribution vs calibrated qubits",
            expected: 1 << n,
            actual: distribution.len(),
        });
    }
    let mut out = distribution.to_vec();
    for (q, cal) in model.qubits.iter().enumerate() {
        check_probability(cal.p10)?;
        check_probability(cal.p01)?;
        let mask = bit_mask(n, q);
        for i in 0..out.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (p0, p1) = (out[i], out[j]);
            out[i] = (1.0 - cal.p10) * p0 + cal.p01 * p1;
            out[j] = cal.p10 * p0 + (1.0 - cal.p01) * p1;
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        for p in &mut out {
            *p /= total;
        }
    }
    Ok(out)
}

/// Error channels that follow one ideal gate.
pub(crate) fn apply_gate_errors(
    dm: &DensityMatrix,
    gate: &GateOp,
    model: &NoiseModel,
) -> Result<DensityMatrix> {
    if model.n_qubits() != dm.n_qubits() {
        return Err(Error::LengthMismatch {
            what: "calibrated qubits",
            expected: dm.n_qubits(),
            actual: model.n_qubits(),
        });
    }
    let (p, duration) = model.gate_calibration(gate);
    if !(0.0..=1.0).contains(&p) || !(duration >= 0.0) {
        return Err(Error::InvalidNoise(format!(
            "gate {:?} has error_prob {p}, duration {duration}",
            gate.kind
        )));
    }
    let acted = gate.qubits();
    let mut out = depolarizing_channel(dm, &acted, p)?;
    if duration > 0.0 {
        for q in 0..dm.n_qubits() {
            if model.idle_relaxation || acted.contains(&q) {
                let cal = &model.qubits[q];
                out = relaxation_channel(&out, q, cal.t1_s, cal.t2_s, duration)?;
            }
        }
    }
    Ok(out)
}

/// Final density matrix of the generator circuit under `model`.
pub fn noisy_final_state(gates: &[GateOp], n_qubits: usize, model: &NoiseModel) -> Result<DensityMatrix> {
    model.validate()?;
    let mut dm = DensityMatrix::zero_state(n_qubits)?;
    for gate in gates {
        dm = crate::simulator::evolve_density(&dm, gate, Some(model))?;
    }
    Ok(dm)
}

/// One generated sample under device noise: noisy density-matrix evolution,
/// readout confusion, then `n_shots` measurements. Components are `-<σ_z>`.
pub fn noisy_generate_sample<R: Rng + ?Sized>(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
    model: &NoiseModel,
    n_shots: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if model.n_qubits() != layout.n_qubits {
        return Err(Error::LengthMismatch {
            what: "calibrated qubits",
            expected: layout.n_qubits,
            actual: model.n_qubits(),
        });
    }
    let gates: Vec<GateOp> = crate::generator::bound_circuit(layout, architecture, params, z)?
        .into_iter()
        .map(|b| b.gate)
        .collect();
    let dm = noisy_final_state(&gates, layout.n_qubits, model)?;
    let dist = apply_readout_error(&dm.probabilities(), model)?;
    let est = estimate_expectations_shots(&dist, n_shots, rng)?;
    Ok(est.into_iter().map(|e| -e).collect())
}
