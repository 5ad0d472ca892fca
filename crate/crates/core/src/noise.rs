//! Gate noise built from device calibration: thermal relaxation followed by
//! depolarizing error on every gate, plus per-qubit readout confusion.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::metrics;
use crate::pauli::Pauli;
use crate::scalar::{c, cr, Real};

/// Tolerance of the CPTP check on stored channels.
pub const CPTP_TOL: f64 = 1e-10;

const JAKARTA_AVG: &str = include_str!("../data/jakarta-avg.json");

/// A completely positive trace-preserving map on `n_qubits` qubits, kept
/// both as Kraus operators and as a column-stacking superoperator
/// `S = Σ_k conj(K_k) ⊗ K_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T: Real> {
    n_qubits: usize,
    kraus: Vec<CMatrix<T>>,
    superop: CMatrix<T>,
}

impl<T: Real> Channel<T> {
    pub fn from_kraus(kraus: Vec<CMatrix<T>>) -> Result<Self> {
        let ch = Self::from_kraus_unchecked(kraus)?;
        let err = ch.cptp_error();
        if err > T::tol(CPTP_TOL).as_f64() {
            return Err(Error::NotCptp(err));
        }
        Ok(ch)
    }

    fn from_kraus_unchecked(kraus: Vec<CMatrix<T>>) -> Result<Self> {
        let dim = kraus.first().map(|k| k.nrows()).ok_or(Error::NotCptp(f64::INFINITY))?;
        let n_qubits = linalg::qubits_of(dim).ok_or(Error::DimensionMismatch(dim, dim.next_power_of_two()))?;
        if let Some(k) = kraus.iter().find(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::DimensionMismatch(k.nrows(), dim));
        }
        let mut superop = CMatrix::zeros(dim * dim, dim * dim);
        for k in &kraus {
            superop += linalg::kron(&k.map(|z| z.conj()), k);
        }
        Ok(Self { n_qubits, kraus, superop })
    }

    /// Builds a channel from its Choi matrix `J = Σ_ij |i><j| ⊗ E(|i><j|)`
    /// (input factor first). Eigenvalues above `-1e-10` are floored at zero.
    pub fn from_choi(choi: &CMatrix<T>) -> Result<Self> {
        let dim2 = choi.nrows();
        let dim = (dim2 as f64).sqrt().round() as usize;
        if dim * dim != dim2 {
            return Err(Error::DimensionMismatch(dim2, dim * dim));
        }
        let (vals, vecs) = linalg::eigh(choi);
        let floor = T::of(-1e-10);
        let mut kraus = Vec::new();
        for (i, &v) in vals.iter().enumerate() {
            if v < floor {
                return Err(Error::NotCptp(v.as_f64()));
            }
            if v <= T::zero() {
                continue;
            }
            let s = v.sqrt();
            // Column-stacked vec(K): entry (i, a) of the Choi index is K[a, i].
            let k = CMatrix::from_fn(dim, dim, |a, j| vecs[(j * dim + a, i)] * cr(s));
            kraus.push(k);
        }
        if kraus.is_empty() {
            return Err(Error::NotCptp(f64::INFINITY));
        }
        Self::from_kraus(kraus)
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::unitary(&linalg::identity(1 << n_qubits))
    }

    pub fn unitary(u: &CMatrix<T>) -> Self {
        Self::from_kraus_unchecked(vec![u.clone()]).expect("square power-of-two unitary")
    }

    /// Reset to `|0>`: Kraus `{|0><0|, |0><1|}`.
    pub fn reset() -> Self {
        let mut k0 = linalg::zeros::<T>(2);
        k0[(0, 0)] = c(1., 0.);
        let mut k1 = linalg::zeros::<T>(2);
        k1[(0, 1)] = c(1., 0.);
        Self::from_kraus_unchecked(vec![k0, k1]).expect("valid Kraus set")
    }

    /// Amplitude damping with decay probability `p`.
    pub fn amplitude_damping(p: T) -> Result<Self> {
        let mut k0 = linalg::identity::<T>(2);
        k0[(1, 1)] = cr((T::one() - p).sqrt());
        let mut k1 = linalg::zeros::<T>(2);
        k1[(0, 1)] = cr(p.sqrt());
        Self::from_kraus(vec![k0, k1])
    }

    /// `ρ -> (1-p)ρ + p·Tr(ρ)·I/d` on `n_qubits` qubits, as a Pauli-Kraus set.
    pub fn depolarizing(p: T, n_qubits: usize) -> Result<Self> {
        let d2 = T::of((1usize << (2 * n_qubits)) as f64);
        let mut kraus = Vec::with_capacity(1 << (2 * n_qubits));
        for idx in 0..1usize << (2 * n_qubits) {
            let mut m = CMatrix::from_element(1, 1, cr(T::one()));
            for q in 0..n_qubits {
                let letter = match (idx >> (2 * (n_qubits - 1 - q))) & 3 {
                    0 => Pauli::I,
                    1 => Pauli::X,
                    2 => Pauli::Y,
                    _ => Pauli::Z,
                };
                m = linalg::kron(&m, &letter.matrix());
            }
            let w = if idx == 0 { T::one() - p + p / d2 } else { p / d2 };
            if w < T::zero() {
                return Err(Error::InvalidParameter(format!("depolarizing probability {p} out of range")));
            }
            kraus.push(m.map(|z| z * cr(w.sqrt())));
        }
        Self::from_kraus(kraus)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn kraus(&self) -> &[CMatrix<T>] {
        &self.kraus
    }

    pub fn superop(&self) -> &CMatrix<T> {
        &self.superop
    }

    /// `‖Σ K†K - I‖_max`.
    pub fn cptp_error(&self) -> f64 {
        let mut acc = linalg::zeros::<T>(self.dim());
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        linalg::max_abs_diff(&acc, &linalg::identity(self.dim())).as_f64()
    }

    pub fn choi(&self) -> CMatrix<T> {
        let d = self.dim();
        let mut j = linalg::zeros::<T>(d * d);
        for k in &self.kraus {
            let v = CMatrix::from_fn(d * d, 1, |r, _| k[(r % d, r / d)]);
            j += &v * v.adjoint();
        }
        j
    }

    pub fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let mut out = linalg::zeros::<T>(rho.nrows());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// `after ∘ self`.
    pub fn then(&self, after: &Self) -> Result<Self> {
        if self.n_qubits != after.n_qubits {
            return Err(Error::WidthMismatch(self.n_qubits, after.n_qubits));
        }
        let kraus = after
            .kraus
            .iter()
            .flat_map(|b| self.kraus.iter().map(move |a| b * a))
            .collect();
        Self::from_kraus(kraus)
    }

    /// `self ⊗ other`, `self` on the leading qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| other.kraus.iter().map(move |b| linalg::kron(a, b)))
            .collect();
        Self::from_kraus(kraus)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        linalg::max_abs_diff(&self.superop, &linalg::identity(self.dim() * self.dim())).as_f64() < tol
    }
}

/// Thermal relaxation over `t` (same time unit as `t1`, `t2`).
///
/// For `T2 ≤ T1` the Kraus set `{√p_I I, √p_Z Z, √p_reset |0><0|,
/// √p_reset |0><1|}`; for `T1 < T2 ≤ 2T1` the channel of the Choi matrix
/// with `p_T2 = e^{-t/T2}`.
pub fn thermal_relaxation<T: Real>(t1: f64, t2: f64, t: f64, excited_population: f64) -> Result<Channel<T>> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::Calibration(format!("T1, T2 must be positive (T1={t1}, T2={t2})")));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::Calibration(format!("T2={t2} exceeds 2·T1={}", 2.0 * t1)));
    }
    if !(t >= 0.0) {
        return Err(Error::Calibration(format!("gate time must be >= 0, got {t}")));
    }
    if !(0.0..=1.0).contains(&excited_population) {
        return Err(Error::Calibration(format!("excited population {excited_population} outside [0, 1]")));
    }
    let (p_reset, p_z) = thermal_probabilities(t1, t2, t);
    let pe = excited_population;
    if t2 <= t1 {
        let p_id = 1.0 - p_z - p_reset;
        let s = |p: f64| cr(T::of(p.max(0.0).sqrt()));
        let mut kraus = vec![
            linalg::identity::<T>(2).map(|z| z * s(p_id)),
            Pauli::Z.matrix::<T>().map(|z| z * s(p_z)),
        ];
        // Reset to |0> with weight 1 - pe, to |1> with weight pe.
        for (target, source, w) in [(0, 0, 1.0 - pe), (0, 1, 1.0 - pe), (1, 0, pe), (1, 1, pe)] {
            if w > 0.0 {
                let mut k = linalg::zeros::<T>(2);
                k[(target, source)] = s(p_reset * w);
                kraus.push(k);
            }
        }
        Channel::from_kraus(kraus)
    } else {
        let p_t2 = (-t / t2).exp();
        let mut j = linalg::zeros::<T>(4);
        j[(0, 0)] = c(1.0 - pe * p_reset, 0.);
        j[(1, 1)] = c(pe * p_reset, 0.);
        j[(2, 2)] = c((1.0 - pe) * p_reset, 0.);
        j[(3, 3)] = c(1.0 - (1.0 - pe) * p_reset, 0.);
        j[(0, 3)] = c(p_t2, 0.);
        j[(3, 0)] = c(p_t2, 0.);
        Channel::from_choi(&j)
    }
}

/// `(p_reset, p_Z)` of the Kraus branch.
pub fn thermal_probabilities(t1: f64, t2: f64, t: f64) -> (f64, f64) {
    let p_reset = 1.0 - (-t / t1).exp();
    let p_z = (1.0 - p_reset) * (1.0 - (-t * (1.0 / t2 - 1.0 / t1)).exp()) / 2.0;
    (p_reset, p_z)
}

/// Process fidelity between `channel` and the unitary `target`, from the
/// normalized Choi matrices.
pub fn process_fidelity<T: Real>(channel: &Channel<T>, target: &CMatrix<T>) -> Result<T> {
    if target.nrows() != channel.dim() {
        return Err(Error::DimensionMismatch(target.nrows(), channel.dim()));
    }
    let err = channel.cptp_error();
    if err > T::tol(1e-8).as_f64() {
        return Err(Error::NotCptp(err));
    }
    let d = cr(T::of(channel.dim() as f64));
    let a = channel.choi().map(|z| z / d);
    let b = Channel::unitary(target).choi().map(|z| z / d);
    metrics::matrix_fidelity(&a, &b)
}

/// Average gate fidelity `(d·F_pro + 1)/(d + 1)`.
pub fn average_gate_fidelity<T: Real>(channel: &Channel<T>, target: &CMatrix<T>) -> Result<T> {
    let d = T::of(channel.dim() as f64);
    let f_pro = process_fidelity(channel, target)?;
    Ok((d * f_pro + T::one()) / (d + T::one()))
}

/// Depolarizing probability `p_D = d(F_T - F_gate)/(d·F_T - 1)` that brings
/// a thermal channel of average fidelity `f_thermal` to a total average
/// infidelity of `gate_infidelity`. Negative solutions are clamped to 0.
pub fn depolarizing_probability(gate_infidelity: f64, f_thermal: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let f_gate = 1.0 - gate_infidelity;
    let p = d * (f_thermal - f_gate) / (d * f_thermal - 1.0);
    if p < 0.0 {
        log::warn!(
            "thermal infidelity {:.3e} exceeds gate infidelity {gate_infidelity:.3e}; depolarizing error set to 0",
            1.0 - f_thermal
        );
        0.0
    } else if p > 1.0 {
        log::warn!("depolarizing probability {p:.3e} above 1; clamped");
        1.0
    } else {
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub t1_us: f64,
    pub t2_us: f64,
    pub freq_ghz: f64,
    /// `P(1|0)`: record 1 having prepared 0.
    pub p10: f64,
    /// `P(0|1)`.
    pub p01: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCalibration {
    pub kind: String,
    pub qubits: Vec<usize>,
    /// Average gate infidelity.
    pub error: f64,
    pub time_ns: f64,
}

/// Device calibration snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationData {
    pub qubits: Vec<QubitCalibration>,
    pub gates: Vec<GateCalibration>,
}

impl CalibrationData {
    /// The bundled 7-qubit average calibration.
    pub fn jakarta_average() -> Self {
        serde_json::from_str(JAKARTA_AVG).expect("bundled calibration parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: Self = serde_json::from_str(text)?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (q, c) in self.qubits.iter().enumerate() {
            if !(c.t1_us > 0.0) {
                bad.push(format!("qubit {q}: T1 must be positive"));
            }
            if !(c.t2_us > 0.0 && c.t2_us <= 2.0 * c.t1_us) {
                bad.push(format!("qubit {q}: T2 must lie in (0, 2·T1]"));
            }
            for (name, p) in [("p10", c.p10), ("p01", c.p01)] {
                if !(0.0..=1.0).contains(&p) {
                    bad.push(format!("qubit {q}: {name} outside [0, 1]"));
                }
            }
        }
        for g in &self.gates {
            match g.kind.parse::<GateKind>() {
                Ok(k) if k.is_native() => {
                    let arity = if k == GateKind::Cx { 2 } else { 1 };
                    if g.qubits.len() != arity {
                        bad.push(format!("{} on {:?}: expected {arity} qubits", g.kind, g.qubits));
                    }
                }
                _ => bad.push(format!("`{}` is not a native gate", g.kind)),
            }
            if let Some(q) = g.qubits.iter().find(|&&q| q >= self.qubits.len()) {
                bad.push(format!("{} refers to unknown qubit {q}", g.kind));
            }
            if !(0.0..=1.0).contains(&g.error) {
                bad.push(format!("{} on {:?}: error outside [0, 1]", g.kind, g.qubits));
            }
            if !(g.time_ns >= 0.0) {
                bad.push(format!("{} on {:?}: negative gate time", g.kind, g.qubits));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Calibration(bad.join("; ")))
        }
    }

    /// Scales gate errors, gate times and readout errors by `xi ∈ [0, 1]`.
    pub fn scale(&self, xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::InvalidParameter(format!("noise factor must lie in [0, 1], got {xi}")));
        }
        Ok(Self {
            qubits: self
                .qubits
                .iter()
                .map(|q| QubitCalibration { p10: q.p10 * xi, p01: q.p01 * xi, ..q.clone() })
                .collect(),
            gates: self
                .gates
                .iter()
                .map(|g| GateCalibration { error: g.error * xi, time_ns: g.time_ns * xi, ..g.clone() })
                .collect(),
        })
    }

    pub fn gate(&self, kind: GateKind, qubits: &[usize]) -> Option<&GateCalibration> {
        self.gates.iter().find(|g| {
            g.kind == kind.name()
                && (g.qubits == qubits || (kind == GateKind::Cx && g.qubits.iter().rev().eq(qubits.iter())))
        })
    }
}

/// Row-stochastic readout confusion matrix `R[true][recorded]`.
pub type Confusion = [[f64; 2]; 2];

pub fn confusion(p10: f64, p01: f64) -> Confusion {
    [[1.0 - p10, p10], [p01, 1.0 - p01]]
}

/// Per-gate error channels and readout confusion for a device.
#[derive(Debug, Clone)]
pub struct NoiseModel<T: Real> {
    xi: f64,
    channels: HashMap<(GateKind, Vec<usize>), Option<Arc<Channel<T>>>>,
    readout: Vec<Confusion>,
}

/// Error channel of one calibrated gate and the thermal/depolarizing split
/// of its infidelity.
#[derive(Debug, Clone)]
pub struct GateNoise<T: Real> {
    pub channel: Channel<T>,
    pub thermal_infidelity: f64,
    pub depolarizing_probability: f64,
}

impl<T: Real> GateNoise<T> {
    /// Infidelity attributed to the depolarizing part, `I_gate - I_T`.
    pub fn depolarizing_infidelity(&self, gate_infidelity: f64) -> f64 {
        gate_infidelity - self.thermal_infidelity
    }
}

/// Thermal relaxation on each operand followed by the depolarizing error
/// matching the calibrated gate infidelity.
pub fn gate_noise<T: Real>(cal: &CalibrationData, entry: &GateCalibration, operands: &[usize]) -> Result<GateNoise<T>> {
    let t_us = entry.time_ns * 1e-3;
    let mut thermal: Option<Channel<T>> = None;
    for &q in operands {
        let qc = cal
            .qubits
            .get(q)
            .ok_or_else(|| Error::MissingCalibration(format!("qubit {q}")))?;
        let ch = thermal_relaxation::<T>(qc.t1_us, qc.t2_us, t_us, 0.0)?;
        thermal = Some(match thermal {
            None => ch,
            Some(prev) => prev.tensor(&ch)?,
        });
    }
    let thermal = thermal.ok_or_else(|| Error::InvalidGate("gate without operands".into()))?;
    let dim = thermal.dim();
    let f_t = average_gate_fidelity(&thermal, &linalg::identity(dim))?.as_f64();
    let p = depolarizing_probability(entry.error, f_t, dim);
    let channel = thermal.then(&Channel::depolarizing(T::of(p), operands.len())?)?;
    Ok(GateNoise { channel, thermal_infidelity: 1.0 - f_t, depolarizing_probability: p })
}

/// Device-level ratio of thermal to depolarizing infidelity: for every
/// qubit, the mean of `I_T/I_D` over the gate kinds `cx, rz, sx, x` acting on
/// it, then the mean over qubits. Entries with `I_D = 0` (virtual gates) have
/// no defined ratio and are left out.
pub fn thermal_to_depolarizing_ratio(cal: &CalibrationData) -> Result<f64> {
    let mut per_qubit = Vec::new();
    for q in 0..cal.qubits.len() {
        let mut per_gate = Vec::new();
        for kind in ["cx", "rz", "sx", "x"] {
            let mut ratios = Vec::new();
            for g in cal.gates.iter().filter(|g| g.kind == kind && g.qubits.contains(&q)) {
                let n = gate_noise::<f64>(cal, g, &g.qubits)?;
                let i_d = n.depolarizing_infidelity(g.error);
                if i_d > 0.0 {
                    ratios.push(n.thermal_infidelity / i_d);
                }
            }
            if !ratios.is_empty() {
                per_gate.push(ratios.iter().sum::<f64>() / ratios.len() as f64);
            }
        }
        if !per_gate.is_empty() {
            per_qubit.push(per_gate.iter().sum::<f64>() / per_gate.len() as f64);
        }
    }
    if per_qubit.is_empty() {
        return Err(Error::Calibration("no gate with a depolarizing contribution".into()));
    }
    Ok(per_qubit.iter().sum::<f64>() / per_qubit.len() as f64)
}

impl<T: Real> NoiseModel<T> {
    /// Builds every gate channel from `cal` scaled by `xi`.
    pub fn build(cal: &CalibrationData, xi: f64) -> Result<Self> {
        cal.validate()?;
        let scaled = cal.scale(xi)?;
        let mut channels = HashMap::new();
        for entry in &scaled.gates {
            let kind: GateKind = entry.kind.parse()?;
            let mut orientations = vec![entry.qubits.clone()];
            if kind == GateKind::Cx {
                orientations.push(entry.qubits.iter().rev().copied().collect());
            }
            for operands in orientations {
                let noise = gate_noise::<T>(&scaled, entry, &operands)?;
                let ch = if noise.channel.is_identity(1e-14) { None } else { Some(Arc::new(noise.channel)) };
                channels.insert((kind, operands), ch);
            }
        }
        let readout = scaled.qubits.iter().map(|q| confusion(q.p10, q.p01)).collect();
        Ok(Self { xi, channels, readout })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn n_qubits(&self) -> usize {
        self.readout.len()
    }

    /// Error channel following `gate` on the device qubits `device[w]` of its
    /// operand wires; `None` when the gate is noiseless.
    pub fn channel_for(&self, gate: &Gate, device: &[usize]) -> Result<Option<&Channel<T>>> {
        let kind = gate.kind();
        if kind.is_directive() {
            return Ok(None);
        }
        let operands: Vec<usize> = gate.qubits().iter().map(|&w| device[w]).collect();
        match self.channels.get(&(kind, operands.clone())) {
            Some(ch) => Ok(ch.as_deref()),
            None => Err(Error::MissingCalibration(format!("{} on device qubits {operands:?}", kind.name()))),
        }
    }

    pub fn channels(&self) -> impl Iterator<Item = (&(GateKind, Vec<usize>), Option<&Channel<T>>)> {
        self.channels.iter().map(|(k, v)| (k, v.as_deref()))
    }

    pub fn readout(&self, device_qubit: usize) -> Confusion {
        self.readout[device_qubit]
    }

    pub fn readout_all(&self) -> &[Confusion] {
        &self.readout
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_calibration_is_valid() {
        let cal = CalibrationData::jakarta_average();
        cal.validate().unwrap();
        assert_eq!(cal.qubits.len(), 7);
        assert!(cal.gate(GateKind::Cx, &[3, 1]).is_some());
        assert!(cal.gate(GateKind::Cx, &[0, 2]).is_none());
    }

    #[test]
    fn invalid_calibration_lists_every_problem() {
        let mut cal = CalibrationData::jakarta_average();
        cal.qubits[0].t2_us = 1000.0;
        cal.gates[0].error = 2.0;
        let Err(Error::Calibration(msg)) = cal.validate() else { panic!("expected failure") };
        assert!(msg.contains("qubit 0") && msg.contains("error outside"));
    }

    #[test]
    fn thermal_probabilities_at_device_average() {
        let (pr, pz) = thermal_probabilities(139.01, 44.82, 0.454095);
        assert!((pr - 0.003261305845043916).abs() < 1e-15);
        assert!((pz - 0.0034095346202411476).abs() < 1e-15);
    }

    #[test]
    fn kraus_and_choi_branches_agree_where_both_apply() {
        // T2 = T1 is covered by both descriptions.
        let a = thermal_relaxation::<f64>(50.0, 50.0, 1.0, 0.0).unwrap();
        let (_, pz) = thermal_probabilities(50.0, 50.0, 1.0);
        assert_eq!(pz, 0.0);
        let j = {
            let pr = 1.0 - (-1.0f64 / 50.0).exp();
            let pt2 = (-1.0f64 / 50.0).exp();
            let mut j = linalg::zeros::<f64>(4);
            j[(0, 0)] = c(1., 0.);
            j[(2, 2)] = c(pr, 0.);
            j[(3, 3)] = c(1. - pr, 0.);
            j[(0, 3)] = c(pt2, 0.);
            j[(3, 0)] = c(pt2, 0.);
            j
        };
        assert!(linalg::max_abs_diff(&a.choi(), &j) < 1e-14);
        let b = Channel::<f64>::from_choi(&j).unwrap();
        assert!(linalg::max_abs_diff(a.superop(), b.superop()) < 1e-12);
    }

    #[test]
    fn choi_branch_is_cptp() {
        let ch = thermal_relaxation::<f64>(40.0, 70.0, 2.0, 0.0).unwrap();
        assert!(ch.cptp_error() < 1e-12);
        // Coherence decays as e^{-t/T2}.
        let mut plus = linalg::zeros::<f64>(2);
        plus.fill(c(0.5, 0.));
        let out = ch.apply(&plus);
        assert!((out[(0, 1)].re - 0.5 * (-2.0f64 / 70.0).exp()).abs() < 1e-12);
        assert!(thermal_relaxation::<f64>(40.0, 90.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let ch = thermal_relaxation::<f64>(139.01, 44.82, 0.0, 0.0).unwrap();
        assert!(ch.is_identity(1e-15));
    }

    #[test]
    fn depolarizing_fidelity_and_probability() {
        let full = Channel::<f64>::depolarizing(1.0, 1).unwrap();
        let f = average_gate_fidelity(&full, &linalg::identity(2)).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
        assert_eq!(depolarizing_probability(0.01, 0.99, 2), 0.0);
        let p = depolarizing_probability(0.01, 1.0, 2);
        assert!((p - 0.02).abs() < 1e-15);
        assert_eq!(depolarizing_probability(0.001, 0.99, 2), 0.0);
    }

    #[test]
    fn thermal_infidelity_is_linear_in_time() {
        let inf = |t| 1.0 - average_gate_fidelity(&thermal_relaxation::<f64>(139.01, 44.82, t, 0.0).unwrap(), &linalg::identity(2)).unwrap();
        let (a, b) = (inf(0.01), inf(0.02));
        assert!((b / a - 2.0).abs() < 1e-3);
    }

    #[test]
    fn composed_channels_hit_calibrated_fidelity() {
        let cal = CalibrationData::jakarta_average();
        for xi in [0.01, 0.1, 1.0] {
            let model = NoiseModel::<f64>::build(&cal, xi).unwrap();
            for ((kind, qs), ch) in model.channels() {
                let target = cal.gate(*kind, qs).unwrap().error * xi;
                let Some(ch) = ch else {
                    assert_eq!(target, 0.0);
                    continue;
                };
                assert!(ch.cptp_error() < 1e-10);
                let f = average_gate_fidelity(ch, &linalg::identity(ch.dim())).unwrap();
                assert!((f - (1.0 - target)).abs() < 1e-6, "{kind:?} {qs:?} {xi}");
            }
        }
    }

    #[test]
    fn zero_xi_is_noiseless() {
        let model = NoiseModel::<f64>::build(&CalibrationData::jakarta_average(), 0.0).unwrap();
        assert!(model.channels().all(|(_, ch)| ch.is_none()));
        assert_eq!(model.readout(0), [[1.0, 0.0], [0.0, 1.0]]);
        assert!(CalibrationData::jakarta_average().scale(1.5).is_err());
    }

    #[test]
    fn scaling() {
        let cal = CalibrationData::jakarta_average();
        assert_eq!(cal.scale(1.0).unwrap(), cal);
        let s = cal.scale(0.1).unwrap();
        let cx = s.gate(GateKind::Cx, &[0, 1]).unwrap();
        assert!((cx.error - 1.109e-3).abs() < 1e-15);
        assert!((s.qubits[0].p10 - 3.349e-3).abs() < 1e-15);
        assert_eq!(s.qubits[0].t1_us, 139.01);
    }

    #[test]
    fn missing_gate_is_reported() {
        let model = NoiseModel::<f64>::build(&CalibrationData::jakarta_average(), 1.0).unwrap();
        let err = model.channel_for(&Gate::Cx(0, 1), &[0, 2]).unwrap_err();
        assert!(matches!(err, Error::MissingCalibration(_)));
        assert!(model.channel_for(&Gate::Cx(0, 1), &[3, 1]).unwrap().is_some());
        assert!(model.channel_for(&Gate::Rz(0, 0.3), &[4]).unwrap().is_none());
    }
}
