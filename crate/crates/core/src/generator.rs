//! Quantum generator circuits.
//!
//! Both architectures share one gate skeleton. Each layer applies, qubit by
//! qubit, the rotations `RY, RZ, RY, RZ`, followed by the layer's controlled-RY
//! entanglers; after the last layer every qubit gets one more `RY`.
//!
//! * Style: every gate angle is `weight * z[m] + bias`, two trainable numbers
//!   per gate, with `m` given by the layout's [`LatentSchedule`].
//! * Standard: the latent vector enters once, through an encoder of `d_latent`
//!   `RY(scale_j * z[j])` gates on qubits `j mod n` in front of the skeleton;
//!   every skeleton gate then carries a single trainable angle.
//!
//! A sample is `x_i = -<σ_z^i>` over the qubits.

use arrayvec::ArrayVec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::noise::NoiseModel;
use crate::simulator::{apply_mat2, estimate_expectations_shots, GateKind, GateOp, StateVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    #[default]
    Style,
    Standard,
}

/// Which latent component feeds each gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatentSchedule {
    /// Gate `k` (in construction order) reads `z[k mod d_latent]`.
    #[default]
    RoundRobin,
    /// One latent index per gate, in construction order.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitLayout {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub d_latent: usize,
    /// `(control, target)` pairs applied in order in every layer.
    pub entangler: Vec<(usize, usize)>,
    #[serde(default)]
    pub latent_schedule: LatentSchedule,
    /// Prefix the style circuit with the standard architecture's encoder
    /// block (encoded with weight/bias pairs like every other gate).
    #[serde(default)]
    pub latent_encoder: bool,
}

/// A gate position in the skeleton, before angles are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateSlot {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub encoder: bool,
}

impl CircuitLayout {
    /// Layout with `n_qubits - 1` sequential entanglers `(0,1), (1,2), ...`.
    pub fn new(n_qubits: usize, n_layers: usize, d_latent: usize) -> Result<Self> {
        let layout = Self {
            n_qubits,
            n_layers,
            d_latent,
            entangler: sequential_entangler(n_qubits),
            latent_schedule: LatentSchedule::RoundRobin,
            latent_encoder: false,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn with_entangler(mut self, entangler: Vec<(usize, usize)>) -> Result<Self> {
        self.entangler = entangler;
        self.validate()?;
        Ok(self)
    }

    /// 1 qubit, 1 layer, 1 latent dimension, no entanglers (10 parameters).
    pub fn gamma_1d() -> Self {
        Self::new(1, 1, 1).expect("valid preset")
    }

    /// 3 qubits, 1 layer, 3 latent dimensions, 2 sequential CRY (34 parameters).
    pub fn gaussian_3d() -> Self {
        Self::new(3, 1, 3).expect("valid preset")
    }

    /// 3 qubits, 2 layers, 5 latent dimensions, 2 sequential CRY (62 parameters).
    pub fn lhc() -> Self {
        Self::new(3, 2, 5).expect("valid preset")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::simulator::MAX_QUBITS {
            return Err(Error::RegisterSize(self.n_qubits));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidArgument("n_layers must be at least 1".into()));
        }
        if self.d_latent == 0 {
            return Err(Error::InvalidArgument("d_latent must be at least 1".into()));
        }
        for &(c, t) in &self.entangler {
            GateOp::cry(c, t, 0.0).validate(self.n_qubits)?;
        }
        if let LatentSchedule::Explicit(indices) = &self.latent_schedule {
            let expected = self.skeleton(Architecture::Style).len();
            if indices.len() != expected {
                return Err(Error::LengthMismatch {
                    what: "explicit latent schedule",
                    expected,
                    actual: indices.len(),
                });
            }
            if let Some(bad) = indices.iter().find(|&&m| m >= self.d_latent) {
                return Err(Error::InvalidArgument(format!(
                    "latent index {bad} >= d_latent {}",
                    self.d_latent
                )));
            }
        }
        Ok(())
    }

    fn has_encoder(&self, architecture: Architecture) -> bool {
        architecture == Architecture::Standard || self.latent_encoder
    }

    /// Gate positions in construction order.
    pub fn skeleton(&self, architecture: Architecture) -> Vec<GateSlot> {
        let mut slots = Vec::new();
        let single = |kind, target| GateSlot {
            kind,
            target,
            control: None,
            encoder: false,
        };
        if self.has_encoder(architecture) {
            for j in 0..self.d_latent {
                slots.push(GateSlot {
                    encoder: true,
                    ..single(GateKind::Ry, j % self.n_qubits)
                });
            }
        }
        for _ in 0..self.n_layers {
            for q in 0..self.n_qubits {
                for kind in [GateKind::Ry, GateKind::Rz, GateKind::Ry, GateKind::Rz] {
                    slots.push(single(kind, q));
                }
            }
            for &(c, t) in &self.entangler {
                slots.push(GateSlot {
                    kind: GateKind::Cry,
                    target: t,
                    control: Some(c),
                    encoder: false,
                });
            }
        }
        for q in 0..self.n_qubits {
            slots.push(single(GateKind::Ry, q));
        }
        slots
    }

    pub fn n_gates(&self, architecture: Architecture) -> usize {
        let encoder = if self.has_encoder(architecture) {
            self.d_latent
        } else {
            0
        };
        encoder + (4 * self.n_qubits + self.entangler.len()) * self.n_layers + self.n_qubits
    }

    /// Trainable parameter count: two per gate for the style circuit, one per
    /// gate (encoder scales included) for the standard one.
    pub fn n_params(&self, architecture: Architecture) -> usize {
        match architecture {
            Architecture::Style => 2 * self.n_gates(architecture),
            Architecture::Standard => self.n_gates(architecture),
        }
    }

    /// Latent component read by gate `gate_index` (construction order).
    pub fn latent_index(&self, gate_index: usize) -> usize {
        match &self.latent_schedule {
            LatentSchedule::RoundRobin => gate_index % self.d_latent,
            LatentSchedule::Explicit(v) => v[gate_index],
        }
    }
}

/// `(0,1), (1,2), ..., (n-2, n-1)`
pub fn sequential_entangler(n_qubits: usize) -> Vec<(usize, usize)> {
    (1..n_qubits).map(|t| (t - 1, t)).collect()
}

/// Style generator parameters stored flat as `[w0, b0, w1, b1, ...]`, one
/// weight/bias pair per gate in construction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneratorParams(pub Vec<f64>);

impl GeneratorParams {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self(pairs.iter().flat_map(|&(w, b)| [w, b]).collect())
    }

    pub fn zeros(layout: &CircuitLayout) -> Self {
        Self(vec![0.0; layout.n_params(Architecture::Style)])
    }

    pub fn n_pairs(&self) -> usize {
        self.0.len() / 2
    }

    pub fn weight(&self, gate: usize) -> f64 {
        self.0[2 * gate]
    }

    pub fn bias(&self, gate: usize) -> f64 {
        self.0[2 * gate + 1]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.0.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A latent draw `z ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn sample<R: Rng + ?Sized>(d_latent: usize, rng: &mut R) -> Self {
        Self((0..d_latent).map(|_| StandardNormal.sample(rng)).collect())
    }

    pub fn zeros(d_latent: usize) -> Self {
        Self(vec![0.0; d_latent])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A concrete gate plus `d angle / d param` for the parameters it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundGate {
    pub gate: GateOp,
    pub terms: ArrayVec<(usize, f64), 2>,
}

fn check_inputs(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
) -> Result<()> {
    layout.validate()?;
    let expected = layout.n_params(architecture);
    if params.len() != expected {
        return Err(Error::LengthMismatch {
            what: "generator parameters",
            expected,
            actual: params.len(),
        });
    }
    if z.len() != layout.d_latent {
        return Err(Error::LengthMismatch {
            what: "latent vector",
            expected: layout.d_latent,
            actual: z.len(),
        });
    }
    Ok(())
}

/// Resolves every gate angle for one latent vector.
pub fn bound_circuit(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
) -> Result<Vec<BoundGate>> {
    check_inputs(layout, architecture, params, z)?;
    let slots = layout.skeleton(architecture);
    let mut out = Vec::with_capacity(slots.len());
    for (k, slot) in slots.iter().enumerate() {
        let mut terms = ArrayVec::new();
        let angle = match architecture {
            Architecture::Style => {
                let zm = z[layout.latent_index(k)];
                let (w, b) = (params[2 * k], params[2 * k + 1]);
                terms.push((2 * k, zm));
                terms.push((2 * k + 1, 1.0));
                w * zm + b
            }
            Architecture::Standard if slot.encoder => {
                let zm = z[layout.latent_index(k)];
                terms.push((k, zm));
                params[k] * zm
            }
            Architecture::Standard => {
                terms.push((k, 1.0));
                params[k]
            }
        };
        let gate = GateOp {
            kind: slot.kind,
            target: slot.target,
            control: slot.control,
            angle,
        };
        out.push(BoundGate { gate, terms });
    }
    Ok(out)
}

/// Style circuit for one latent vector.
pub fn build_style_circuit(
    layout: &CircuitLayout,
    params: &GeneratorParams,
    z: &LatentVector,
) -> Result<Vec<GateOp>> {
    Ok(bound_circuit(layout, Architecture::Style, params.as_slice(), z.as_slice())?
        .into_iter()
        .map(|b| b.gate)
        .collect())
}

/// Standard (encode-once) circuit for one latent vector.
pub fn build_standard_circuit(
    layout: &CircuitLayout,
    params: &[f64],
    z: &LatentVector,
) -> Result<Vec<GateOp>> {
    Ok(bound_circuit(layout, Architecture::Standard, params, z.as_slice())?
        .into_iter()
        .map(|b| b.gate)
        .collect())
}

/// Style parameters reproducing a standard generator exactly: encoder weights
/// take the standard encoder scales with zero bias, every other gate gets
/// weight 0 and bias equal to the standard angle.
pub fn embed_standard_in_style(
    layout: &CircuitLayout,
    standard_params: &[f64],
) -> Result<(CircuitLayout, GeneratorParams)> {
    let expected = layout.n_params(Architecture::Standard);
    if standard_params.len() != expected {
        return Err(Error::LengthMismatch {
            what: "standard parameters",
            expected,
            actual: standard_params.len(),
        });
    }
    if layout.latent_schedule != LatentSchedule::RoundRobin {
        return Err(Error::InvalidArgument(
            "embedding requires the round-robin latent schedule".into(),
        ));
    }
    let style_layout = CircuitLayout {
        latent_encoder: true,
        ..layout.clone()
    };
    let pairs: Vec<(f64, f64)> = style_layout
        .skeleton(Architecture::Style)
        .iter()
        .zip(standard_params)
        .map(|(slot, &p)| if slot.encoder { (p, 0.0) } else { (0.0, p) })
        .collect();
    Ok((style_layout, GeneratorParams::from_pairs(&pairs)))
}

/// Runs the gates on `|0...0>`.
pub fn run_circuit(gates: &[GateOp], n_qubits: usize) -> Result<StateVector> {
    let mut state = StateVector::zero(n_qubits)?;
    for g in gates {
        state.apply_in_place(g)?;
    }
    Ok(state)
}

pub fn output_state(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
) -> Result<StateVector> {
    let gates: Vec<GateOp> = bound_circuit(layout, architecture, params, z)?
        .into_iter()
        .map(|b| b.gate)
        .collect();
    run_circuit(&gates, layout.n_qubits)
}

/// `<σ_z^i>` for every qubit.
pub fn expectations(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    let state = output_state(layout, architecture, params, z)?;
    (0..layout.n_qubits).map(|q| state.expectation_z(q)).collect()
}

/// How expectations are turned into sample components.
#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    Exact,
    Shots(u64),
    Noisy { model: &'a NoiseModel, shots: u64 },
}

pub fn generate_sample<R: Rng + ?Sized>(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
    backend: Backend<'_>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let expect = match backend {
        Backend::Exact => expectations(layout, architecture, params, z)?,
        Backend::Shots(shots) => {
            let state = output_state(layout, architecture, params, z)?;
            estimate_expectations_shots(&state.probabilities(), shots, rng)?
        }
        Backend::Noisy { model, shots } => {
            return crate::noise::noisy_generate_sample(
                layout,
                architecture,
                params,
                z,
                model,
                shots,
                rng,
            )
        }
    };
    Ok(expect.into_iter().map(|e| -e).collect())
}

/// Exact expectations and their parameter derivatives for one latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    /// `<σ_z^i>` per qubit.
    pub expectations: Vec<f64>,
    /// `rows[i][p] = d<σ_z^i>/dφ_p`
    pub rows: Vec<Vec<f64>>,
}

/// Adjoint-mode differentiation through the state vector.
///
/// Walks the circuit backwards once, carrying the current state and one
/// co-state `U_{>k}† σ_z^i ψ` per observed qubit; each gate contributes
/// `2 Re <λ_i| dU_k |ψ_{k-1}>` to its angle derivative, which the chain rule
/// spreads onto the parameters listed in the gate's terms.
pub fn expectations_and_jacobian(
    layout: &CircuitLayout,
    architecture: Architecture,
    params: &[f64],
    z: &[f64],
) -> Result<Jacobian> {
    let bound = bound_circuit(layout, architecture, params, z)?;
    let n = layout.n_qubits;
    let mut psi = StateVector::zero(n)?;
    for b in &bound {
        psi.apply_in_place(&b.gate)?;
    }
    let expect: Vec<f64> = (0..n)
        .map(|q| crate::simulator::z_expectation_of(psi.amplitudes(), n, q))
        .collect();

    let mut lambdas: Vec<Vec<_>> = (0..n)
        .map(|q| {
            let mask = crate::simulator::bit_mask(n, q);
            psi.amplitudes()
                .iter()
                .enumerate()
                .map(|(i, &a)| if i & mask == 0 { a } else { -a })
                .collect()
        })
        .collect();
    let mut state = psi.amplitudes().to_vec();
    let mut rows = vec![vec![0.0; params.len()]; n];
    let mut scratch = vec![Default::default(); state.len()];

    for b in bound.iter().rev() {
        let g = &b.gate;
        let inv = g.inverse().matrix();
        apply_mat2(&mut state, n, g.target, g.control, &inv, false);
        scratch.copy_from_slice(&state);
        apply_mat2(&mut scratch, n, g.target, g.control, &g.matrix_derivative(), true);
        for (q, lambda) in lambdas.iter_mut().enumerate() {
            let overlap: f64 = lambda
                .iter()
                .zip(&scratch)
                .map(|(l, s)| (l.conj() * s).re)
                .sum();
            let d_angle = 2.0 * overlap;
            for &(p, coeff) in &b.terms {
                rows[q][p] += d_angle * coeff;
            }
            apply_mat2(lambda, n, g.target, g.control, &inv, false);
        }
    }
    Ok(Jacobian {
        expectations: expect,
        rows,
    })
}

/// `d<σ_z^i>/dφ` for the style circuit, shape `n_qubits x P`.
pub fn jacobian(
    layout: &CircuitLayout,
    params: &GeneratorParams,
    z: &LatentVector,
) -> Result<Vec<Vec<f64>>> {
    Ok(expectations_and_jacobian(layout, Architecture::Style, params.as_slice(), z.as_slice())?.rows)
}

/// A generator of either architecture with its current parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub architecture: Architecture,
    pub layout: CircuitLayout,
    pub params: Vec<f64>,
}

impl Generator {
    pub fn new(architecture: Architecture, layout: CircuitLayout, params: Vec<f64>) -> Result<Self> {
        layout.validate()?;
        let expected = layout.n_params(architecture);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                what: "generator parameters",
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            architecture,
            layout,
            params,
        })
    }

    /// Parameters uniform in `[-scale, scale]`. Standard encoder scales
    /// start at 1 so that the encoder initially rotates by exactly `z[j]`.
    pub fn initialize<R: Rng + ?Sized>(
        architecture: Architecture,
        layout: CircuitLayout,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        layout.validate()?;
        let dist = Uniform::new_inclusive(-scale, scale)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let params = match architecture {
            Architecture::Style => (0..layout.n_params(architecture))
                .map(|_| dist.sample(rng))
                .collect(),
            Architecture::Standard => layout
                .skeleton(architecture)
                .iter()
                .map(|slot| if slot.encoder { 1.0 } else { dist.sample(rng) })
                .collect(),
        };
        Self::new(architecture, layout, params)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, z: &[f64], backend: Backend<'_>, rng: &mut R) -> Result<Vec<f64>> {
        generate_sample(&self.layout, self.architecture, &self.params, z, backend, rng)
    }

    pub fn sample_exact(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(expectations(&self.layout, self.architecture, &self.params, z)?
            .into_iter()
            .map(|e| -e)
            .collect())
    }

    pub fn jacobian(&self, z: &[f64]) -> Result<Jacobian> {
        expectations_and_jacobian(&self.layout, self.architecture, &self.params, z)
    }
}
