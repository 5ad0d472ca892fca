//! Density-matrix execution of circuits with optional gate noise, shot
//! sampling and readout mitigation.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, Gate, MAX_CIRCUIT_WIDTH};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, LocalIndex};
use crate::noise::{Channel, Confusion, NoiseModel};
use crate::scalar::{c, cr, Real, C};

/// Trace tolerance of a valid state.
pub const TRACE_TOL: f64 = 1e-9;
/// Hermiticity tolerance of a valid state.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated in a valid state.
pub const EIGEN_TOL: f64 = 1e-9;

/// Density matrix of a `width`-qubit register, qubit 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    width: usize,
    data: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Wraps a square `2^w × 2^w` matrix without checking positivity.
    pub fn from_matrix(data: CMatrix<T>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch(data.nrows(), data.ncols()));
        }
        let width = linalg::qubits_of(data.nrows())
            .ok_or_else(|| Error::InvalidState(format!("dimension {} is not a power of two", data.nrows())))?;
        Ok(Self { width, data })
    }

    pub fn from_state(psi: &DVector<C<T>>) -> Result<Self> {
        let norm = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if norm <= T::zero() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let m = psi * psi.adjoint();
        Self::from_matrix(m.map(|z| z / cr(norm)))
    }

    /// `|index><index|`.
    pub fn basis(width: usize, index: usize) -> Self {
        let mut data = linalg::zeros(1 << width);
        data[(index, index)] = c(1., 0.);
        Self { width, data }
    }

    pub fn maximally_mixed(width: usize) -> Self {
        let d = 1usize << width;
        let data = linalg::identity::<T>(d).map(|z| z / cr(T::of(d as f64)));
        Self { width, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.data
    }

    pub fn trace(&self) -> T {
        linalg::trace(&self.data).re
    }

    pub fn purity(&self) -> T {
        (&self.data * &self.data).trace().re
    }

    /// Diagonal in the computational basis.
    pub fn probabilities(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { width: self.width + other.width, data: linalg::kron(&self.data, &other.data) }
    }

    /// Reduced state on `keep`, in the listed order.
    pub fn reduce(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&q) = keep.iter().find(|&&q| q >= self.width) {
            return Err(Error::OutOfRange { index: q, limit: self.width });
        }
        Ok(Self { width: keep.len(), data: linalg::partial_trace(&self.data, self.width, keep) })
    }

    /// Replaces the matrix by its Hermitian part; returns the size of the
    /// correction.
    pub fn hermitize(&mut self) -> T {
        let err = linalg::hermiticity_error(&self.data);
        self.data = linalg::hermitize(&self.data);
        err
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = linalg::hermiticity_error(&self.data);
        if herm > T::tol(HERMITICITY_TOL) {
            return Err(Error::InvalidState(format!("hermiticity error {herm}")));
        }
        let tr = self.trace();
        if (tr - T::one()).abs() > T::tol(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let (vals, _) = linalg::eigh(&linalg::hermitize(&self.data));
        if let Some(&v) = vals.first() {
            if v < -T::tol(EIGEN_TOL) {
                return Err(Error::InvalidState(format!("negative eigenvalue {v}")));
            }
        }
        Ok(())
    }

    fn check_operands(&self, qubits: &[usize], dim: usize) -> Result<()> {
        if dim != 1 << qubits.len() {
            return Err(Error::DimensionMismatch(dim, 1 << qubits.len()));
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.width {
                return Err(Error::OutOfRange { index: q, limit: self.width });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::InvalidGate(format!("repeated operand {q}")));
            }
        }
        Ok(())
    }

    /// `ρ -> U ρ U†` with `U` acting on `qubits`.
    pub fn apply_unitary(&mut self, u: &CMatrix<T>, qubits: &[usize]) -> Result<()> {
        self.check_operands(qubits, u.nrows())?;
        let idx = LocalIndex::new(self.width, qubits);
        let d = self.dim();
        let k = idx.offsets.len();
        let data = self.data.as_mut_slice();
        let mut v = vec![C::new(T::zero(), T::zero()); k];
        // Left multiplication, column by column.
        for col in 0..d {
            let colbase = col * d;
            for &base in &idx.bases {
                for (l, &o) in idx.offsets.iter().enumerate() {
                    v[l] = data[colbase + base + o];
                }
                for (a, &o) in idx.offsets.iter().enumerate() {
                    let mut acc = C::new(T::zero(), T::zero());
                    for (b, vb) in v.iter().enumerate() {
                        acc += u[(a, b)] * vb;
                    }
                    data[colbase + base + o] = acc;
                }
            }
        }
        // Right multiplication by U†, row by row.
        for row in 0..d {
            for &base in &idx.bases {
                for (l, &o) in idx.offsets.iter().enumerate() {
                    v[l] = data[row + (base + o) * d];
                }
                for (a, &o) in idx.offsets.iter().enumerate() {
                    let mut acc = C::new(T::zero(), T::zero());
                    for (b, vb) in v.iter().enumerate() {
                        acc += vb * u[(a, b)].conj();
                    }
                    data[row + (base + o) * d] = acc;
                }
            }
        }
        Ok(())
    }

    /// Applies a channel on `qubits` through its superoperator.
    pub fn apply_channel(&mut self, ch: &Channel<T>, qubits: &[usize]) -> Result<()> {
        self.check_operands(qubits, ch.dim())?;
        let s = ch.superop();
        let idx = LocalIndex::new(self.width, qubits);
        let d = self.dim();
        let k = idx.offsets.len();
        let data = self.data.as_mut_slice();
        let mut v = vec![C::new(T::zero(), T::zero()); k * k];
        let mut w = vec![C::new(T::zero(), T::zero()); k * k];
        for &rb in &idx.bases {
            for &cb in &idx.bases {
                for (ci, &co) in idx.offsets.iter().enumerate() {
                    for (ri, &ro) in idx.offsets.iter().enumerate() {
                        v[ri + ci * k] = data[(rb + ro) + (cb + co) * d];
                    }
                }
                for (a, wa) in w.iter_mut().enumerate() {
                    let mut acc = C::new(T::zero(), T::zero());
                    for (b, vb) in v.iter().enumerate() {
                        acc += s[(a, b)] * vb;
                    }
                    *wa = acc;
                }
                for (ci, &co) in idx.offsets.iter().enumerate() {
                    for (ri, &ro) in idx.offsets.iter().enumerate() {
                        data[(rb + ro) + (cb + co) * d] = w[ri + ci * k];
                    }
                }
            }
        }
        Ok(())
    }

    /// Traces out `qubit` and replaces it with `|0>`.
    pub fn reset(&mut self, qubit: usize) -> Result<()> {
        self.apply_channel(&Channel::reset(), &[qubit])
    }
}

/// States of a circuit run: the system register at every barrier and the
/// full register at the end.
#[derive(Debug, Clone)]
pub struct SimResult<T: Real> {
    pub snapshots: Vec<DensityMatrix<T>>,
    pub final_state: DensityMatrix<T>,
}

/// Runs `circuit` on `rho0` (a state of all `circuit.width()` wires).
///
/// Every unitary gate is applied exactly and, with a noise model, followed by
/// the error channel of its device operands. Measurements leave the state
/// untouched; readout error enters through [`sample_counts`].
pub fn simulate<T: Real>(circuit: &Circuit, noise: Option<&NoiseModel<T>>, rho0: &DensityMatrix<T>) -> Result<SimResult<T>> {
    if circuit.width() > MAX_CIRCUIT_WIDTH {
        return Err(Error::TooWide { width: circuit.width(), limit: MAX_CIRCUIT_WIDTH });
    }
    if rho0.width() != circuit.width() {
        return Err(Error::WidthMismatch(rho0.width(), circuit.width()));
    }
    if noise.is_some() {
        if let Some(g) = circuit.gates().iter().find(|g| !g.kind().is_native() && !g.kind().is_directive()) {
            return Err(Error::NonNative(g.kind().name().into()));
        }
    }
    let mut rho = rho0.clone();
    let mut snapshots = Vec::new();
    let reset = Channel::reset();
    for gate in circuit.gates() {
        match gate {
            Gate::Barrier => {
                let k = snapshots.len();
                let keep = circuit.system_wires_at(k);
                let mut snap = rho.reduce(&keep)?;
                let herm = snap.hermitize();
                if herm > T::tol(1e-8) {
                    log::debug!("snapshot {k}: hermiticity correction {herm}");
                }
                let tr = snap.trace();
                if (tr - T::one()).abs() > T::tol(TRACE_TOL) {
                    return Err(Error::InvalidState(format!("trace {tr} at barrier {k}")));
                }
                snapshots.push(snap);
            }
            Gate::Measure(_) => {}
            Gate::Reset(q) => rho.apply_channel(&reset, &[*q])?,
            g => {
                let qubits = g.qubits();
                let u = g.unitary::<T>().expect("unitary gate");
                rho.apply_unitary(&u, &qubits)?;
                if let Some(model) = noise {
                    if let Some(ch) = model.channel_for(g, circuit.device())? {
                        rho.apply_channel(ch, &qubits)?;
                    }
                }
            }
        }
    }
    rho.hermitize();
    Ok(SimResult { snapshots, final_state: rho })
}

/// Runs `circuit` from the all-zero state.
pub fn simulate_from_zero<T: Real>(circuit: &Circuit, noise: Option<&NoiseModel<T>>) -> Result<SimResult<T>> {
    simulate(circuit, noise, &DensityMatrix::basis(circuit.width(), 0))
}

/// Sampled measurement outcomes keyed by bit string (first qubit leftmost).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    pub width: usize,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

impl CountsTable {
    /// Empirical distribution indexed by basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.width];
        for (bits, &n) in &self.counts {
            let idx = usize::from_str_radix(bits, 2).expect("binary key");
            p[idx] = n as f64 / self.shots as f64;
        }
        p
    }
}

fn bit_string(idx: usize, width: usize) -> String {
    (0..width).map(|q| if (idx >> (width - 1 - q)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Applies per-qubit confusion matrices to a distribution over `width`
/// qubits: `p'(recorded) = Σ_true Π_q R_q[true_q][recorded_q] p(true)`.
pub fn apply_confusion(probs: &[f64], confusion: &[Confusion]) -> Result<Vec<f64>> {
    let width = confusion.len();
    if probs.len() != 1 << width {
        return Err(Error::DimensionMismatch(probs.len(), 1 << width));
    }
    let mut p = probs.to_vec();
    for (q, r) in confusion.iter().enumerate() {
        let m = [[r[0][0], r[1][0]], [r[0][1], r[1][1]]];
        apply_single(&mut p, width, q, m);
    }
    Ok(p)
}

/// `p <- (I ⊗ .. ⊗ m ⊗ .. ⊗ I) p` with `m[out][in]` on qubit `q`.
fn apply_single(p: &mut [f64], width: usize, q: usize, m: [[f64; 2]; 2]) {
    let bit = 1usize << (width - 1 - q);
    for i in 0..p.len() {
        if i & bit == 0 {
            let (a, b) = (p[i], p[i | bit]);
            p[i] = m[0][0] * a + m[0][1] * b;
            p[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// Draws `shots` outcomes from the diagonal of `rho`, recorded through the
/// optional per-qubit confusion matrices.
pub fn sample_counts<T: Real>(rho: &DensityMatrix<T>, shots: u64, readout: Option<&[Confusion]>, seed: u64) -> Result<CountsTable> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be >= 1".into()));
    }
    let width = rho.width();
    let mut probs: Vec<f64> = rho.probabilities().into_iter().map(|p| p.as_f64().max(0.0)).collect();
    if let Some(r) = readout {
        if r.len() != width {
            return Err(Error::WidthMismatch(r.len(), width));
        }
        probs = apply_confusion(&probs, r)?;
    }
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidState(format!("sampling weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = vec![0u64; probs.len()];
    for _ in 0..shots {
        tally[dist.sample(&mut rng)] += 1;
    }
    let counts = tally
        .into_iter()
        .enumerate()
        .filter(|(_, n)| *n > 0)
        .map(|(i, n)| (bit_string(i, width), n))
        .collect();
    Ok(CountsTable { width, shots, counts })
}

/// Inverts per-qubit confusion on a distribution. The result is a
/// quasi-probability vector and may hold small negative entries.
pub fn unfold_distribution(probs: &[f64], confusion: &[Confusion]) -> Result<Vec<f64>> {
    let width = confusion.len();
    if probs.len() != 1 << width {
        return Err(Error::DimensionMismatch(probs.len(), 1 << width));
    }
    let mut p = probs.to_vec();
    for (q, r) in confusion.iter().enumerate() {
        // Forward map m[recorded][true] = r[true][recorded].
        let (a, b, cc, d) = (r[0][0], r[1][0], r[0][1], r[1][1]);
        let det = a * d - b * cc;
        if det.abs() < 1e-12 {
            return Err(Error::SingularConfusion(q));
        }
        let inv = [[d / det, -b / det], [-cc / det, a / det]];
        apply_single(&mut p, width, q, inv);
    }
    Ok(p)
}

/// Readout-mitigated quasi-probabilities of `counts`.
pub fn mitigate_readout(counts: &CountsTable, confusion: &[Confusion]) -> Result<Vec<f64>> {
    unfold_distribution(&counts.probabilities(), confusion)
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Total-variation distance `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;

    fn random_state(width: usize, seed: u64) -> DensityMatrix<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << width;
        let a = CMatrix::<f64>::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let tr = linalg::trace(&m);
        DensityMatrix::from_matrix(m.map(|z| z / tr)).unwrap()
    }

    #[test]
    fn local_unitary_matches_embedding() {
        let rho = random_state(3, 1);
        let u = Gate::Cry(2, 0, 0.7).unitary::<f64>().unwrap();
        let mut local = rho.clone();
        local.apply_unitary(&u, &[2, 0]).unwrap();
        let full = linalg::embed(&u, &[2, 0], 3);
        let expected = &full * rho.matrix() * full.adjoint();
        assert!(linalg::max_abs_diff(local.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn local_channel_matches_embedding() {
        let rho = random_state(3, 2);
        let ch = Channel::<f64>::amplitude_damping(0.3).unwrap().tensor(&Channel::depolarizing(0.2, 1).unwrap()).unwrap();
        let mut local = rho.clone();
        local.apply_channel(&ch, &[1, 2]).unwrap();
        let mut expected = linalg::zeros::<f64>(8);
        for k in ch.kraus() {
            let kf = linalg::embed(k, &[1, 2], 3);
            expected += &kf * rho.matrix() * kf.adjoint();
        }
        assert!(linalg::max_abs_diff(local.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn reset_replaces_qubit() {
        let mut rho = DensityMatrix::<f64>::basis(2, 0b11);
        rho.reset(1).unwrap();
        assert_eq!(rho.matrix()[(0b10, 0b10)], c(1., 0.));
        assert!((rho.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(vec![Role::Idle; 2]);
        let rho = random_state(2, 3);
        let out = simulate(&c, None, &rho).unwrap();
        assert_eq!(out.final_state.matrix(), rho.matrix());
        assert!(out.snapshots.is_empty());
    }

    #[test]
    fn validation_flags_bad_states() {
        assert!(random_state(2, 4).validate().is_ok());
        let mut m = linalg::zeros::<f64>(2);
        m[(0, 0)] = c(1.5, 0.);
        m[(1, 1)] = c(-0.5, 0.);
        assert!(DensityMatrix::from_matrix(m).unwrap().validate().is_err());
        assert!(DensityMatrix::<f64>::from_matrix(linalg::zeros(3)).is_err());
    }

    #[test]
    fn sampling_pure_and_mixed() {
        let counts = sample_counts(&DensityMatrix::<f64>::basis(2, 0), 1000, None, 7).unwrap();
        assert_eq!(counts.counts.get("00"), Some(&1000));
        let counts = sample_counts(&DensityMatrix::<f64>::maximally_mixed(1), 100_000, None, 7).unwrap();
        let ones = *counts.counts.get("1").unwrap() as f64;
        assert!((ones / 1e5 - 0.5).abs() < 3.0 * (0.25f64 / 1e5).sqrt());
        let flipped = sample_counts(&DensityMatrix::<f64>::basis(1, 0), 100_000, Some(&[[[0.9, 0.1], [0.0, 1.0]]]), 9).unwrap();
        let ones = *flipped.counts.get("1").unwrap() as f64;
        assert!((ones / 1e5 - 0.1).abs() < 3.0 * (0.09f64 / 1e5).sqrt());
    }

    #[test]
    fn sampling_is_reproducible() {
        let rho = random_state(2, 5);
        let a = sample_counts(&rho, 500, None, 11).unwrap();
        let b = sample_counts(&rho, 500, None, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 500);
    }

    #[test]
    fn unfolding_inverts_confusion() {
        let truth = [0.1, 0.2, 0.3, 0.4];
        let conf = [[[0.95, 0.05], [0.08, 0.92]], [[0.9, 0.1], [0.02, 0.98]]];
        let noisy = apply_confusion(&truth, &conf).unwrap();
        let back = unfold_distribution(&noisy, &conf).unwrap();
        assert!(truth.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
        let id = [[[1.0, 0.0], [0.0, 1.0]]; 2];
        assert_eq!(unfold_distribution(&truth, &id).unwrap(), truth.to_vec());
        assert!(matches!(unfold_distribution(&truth, &[[[0.5, 0.5], [0.5, 0.5]], id[0]]), Err(Error::SingularConfusion(0))));
    }

    #[test]
    fn simplex_projection() {
        let p = project_to_simplex(&[0.6, 0.5, -0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p[0] - 0.55).abs() < 1e-12 && (p[1] - 0.45).abs() < 1e-12);
        let q = [0.2, 0.3, 0.5];
        assert_eq!(project_to_simplex(&q), q.to_vec());
    }
}
