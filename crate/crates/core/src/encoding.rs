//! Compact encodings of a truncated harmonic oscillator onto qubits.
//!
//! Each retained level `l` is assigned an integer, the integer is written
//! as a bit string (standard binary or reflected Gray code) and every level
//! transition `|l><l'|` becomes a product of single-qubit operators
//!
//! ```text
//! |0><0| = (I + Z)/2    |0><1| = (X + iY)/2
//! |1><1| = (I - Z)/2    |1><0| = (X - iY)/2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Layout, ModelParams};
use crate::pauli::{Pauli, PauliString, PauliSum, MAX_DENSE_QUBITS};
use crate::scalar::{c, cr, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Gray,
    #[serde(alias = "binary")]
    StandardBinary,
}

impl CodeKind {
    pub fn name(self) -> &'static str {
        match self {
            CodeKind::Gray => "gray",
            CodeKind::StandardBinary => "standard_binary",
        }
    }
}

/// Integer-to-bit map over a fixed number of qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitCode {
    pub kind: CodeKind,
    pub width: usize,
}

/// Number of qubits holding `levels` oscillator levels: ⌈log₂ levels⌉.
pub fn qubits_for(levels: usize) -> usize {
    levels.next_power_of_two().trailing_zeros().max(1) as usize
}

impl BitCode {
    pub fn new(kind: CodeKind, width: usize) -> Self {
        Self { kind, width }
    }

    pub fn for_levels(kind: CodeKind, levels: usize) -> Self {
        Self::new(kind, qubits_for(levels))
    }

    /// Code word of `i` as an integer whose most significant bit belongs to
    /// the first qubit of the block.
    pub fn word(&self, i: usize) -> Result<usize> {
        let limit = 1usize << self.width;
        if i >= limit {
            return Err(Error::OutOfRange { index: i, limit });
        }
        Ok(match self.kind {
            CodeKind::StandardBinary => i,
            CodeKind::Gray => i ^ (i >> 1),
        })
    }

    pub fn bits(&self, i: usize) -> Result<Vec<bool>> {
        let w = self.word(i)?;
        Ok((0..self.width).map(|m| (w >> (self.width - 1 - m)) & 1 == 1).collect())
    }
}

pub fn code_bits(i: usize, code: &BitCode) -> Result<Vec<bool>> {
    code.bits(i)
}

/// Oscillator truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    levels: usize,
}

impl Truncation {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParameter(format!("truncation needs at least 2 levels, got {levels}")));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn qubits(&self) -> usize {
        qubits_for(self.levels)
    }
}

/// `|b><b'|` on one qubit as a Pauli sum.
fn bit_transition<T: Real>(b: bool, bp: bool) -> PauliSum<T> {
    let half = |re: f64, im: f64| -> C<T> { c(0.5 * re, 0.5 * im) };
    let terms: [(Pauli, C<T>); 2] = match (b, bp) {
        (false, false) => [(Pauli::I, half(1., 0.)), (Pauli::Z, half(1., 0.))],
        (true, true) => [(Pauli::I, half(1., 0.)), (Pauli::Z, half(-1., 0.))],
        (false, true) => [(Pauli::X, half(1., 0.)), (Pauli::Y, half(0., 1.))],
        (true, false) => [(Pauli::X, half(1., 0.)), (Pauli::Y, half(0., -1.))],
    };
    PauliSum::from_terms(1, terms.into_iter().map(|(p, co)| PauliString::new(vec![p], co)))
        .expect("single-qubit terms")
}

/// `|code(l)><code(l')|` as a canonical Pauli sum over the code's qubits.
pub fn encode_transition<T: Real>(l: usize, lp: usize, code: &BitCode) -> Result<PauliSum<T>> {
    let (bits, bits_p) = (code.bits(l)?, code.bits(lp)?);
    let mut out = PauliSum::from_terms(0, [PauliString::new(Vec::new(), cr(T::one()))])?;
    for (&b, &bp) in bits.iter().zip(&bits_p) {
        out = out.tensor(&bit_transition(b, bp));
    }
    Ok(out.canonicalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BosonOperator {
    /// Annihilation operator `a`.
    Lower,
    /// Creation operator `a†`.
    Raise,
    /// Number operator `a†a`.
    Number,
}

/// Nonzero matrix elements `(l, l', value)` of the truncated operator.
pub fn truncated_elements(op: BosonOperator, levels: usize) -> Vec<(usize, usize, f64)> {
    match op {
        BosonOperator::Lower => (0..levels - 1).map(|l| (l, l + 1, ((l + 1) as f64).sqrt())).collect(),
        BosonOperator::Raise => (0..levels - 1).map(|l| (l + 1, l, ((l + 1) as f64).sqrt())).collect(),
        BosonOperator::Number => (1..levels).map(|l| (l, l, l as f64)).collect(),
    }
}

pub fn encode_boson_operator<T: Real>(
    op: BosonOperator,
    trunc: Truncation,
    kind: CodeKind,
) -> Result<PauliSum<T>> {
    let code = BitCode::for_levels(kind, trunc.levels());
    let mut sum = PauliSum::zero(code.width);
    for (l, lp, v) in truncated_elements(op, trunc.levels()) {
        sum = sum.add(&encode_transition(l, lp, &code)?.scale(c(v, 0.)))?;
    }
    Ok(sum.canonicalize())
}

/// Encoded spin-boson Hamiltonian on the system register of [`Layout`]:
///
/// ```text
/// H = ω a†a + Σ_k [ -h/2 Z_k + ε/2 X_k + λ X_k (a + a†) ]
/// ```
///
/// Spin basis: |↓> = |0>, |↑> = |1>, so the physical σᶻ of a spin is `-Z`.
/// The identity component (a global phase) is dropped.
pub fn encode_hamiltonian<T: Real>(params: &ModelParams<T>, kind: CodeKind) -> Result<PauliSum<T>> {
    params.validate()?;
    let trunc = Truncation::new(params.levels)?;
    let layout = Layout::new(params.n_spins, trunc.qubits());
    let width = layout.system_width();
    if width > MAX_DENSE_QUBITS {
        return Err(Error::TooWide { width, limit: MAX_DENSE_QUBITS });
    }
    let boson = layout.system_boson_qubits();
    let number = encode_boson_operator::<T>(BosonOperator::Number, trunc, kind)?.embed(width, &boson)?;
    let lower = encode_boson_operator::<T>(BosonOperator::Lower, trunc, kind)?;
    let position = lower.add(&lower.adjoint())?.canonicalize().embed(width, &boson)?;

    let mut h = number.scale(cr(params.omega));
    let half = T::of(0.5);
    for &s in &layout.system_spin_qubits() {
        let z = PauliString::single(width, s, Pauli::Z, cr(-(params.h * half)));
        let x = PauliString::single(width, s, Pauli::X, cr(params.epsilon * half));
        h.push(z)?;
        h.push(x)?;
        let xs = PauliSum::from_terms(width, [PauliString::single(width, s, Pauli::X, cr(params.lambda))])?;
        h = h.add(&xs.multiply(&position)?)?;
    }
    Ok(h.split_identity().1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, CMatrix};
    use crate::scalar::c;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn coeff_of(s: &PauliSum<f64>, label: &str) -> Option<C<f64>> {
        s.terms().iter().find(|t| t.label() == label).map(|t| t.coeff())
    }

    /// Dense truncated operator in the code-permuted basis, built directly
    /// from code words.
    fn permuted_dense(op: BosonOperator, levels: usize, kind: CodeKind) -> CMatrix<f64> {
        let code = BitCode::for_levels(kind, levels);
        let dim = 1 << code.width;
        let mut m = linalg::zeros(dim);
        for (l, lp, v) in truncated_elements(op, levels) {
            m[(code.word(l).unwrap(), code.word(lp).unwrap())] += c(v, 0.);
        }
        m
    }

    #[test]
    fn gray_words() {
        let code = BitCode::new(CodeKind::Gray, 2);
        let words: Vec<_> = (0..4).map(|i| code.bits(i).unwrap()).collect();
        assert_eq!(words, vec![vec![false, false], vec![false, true], vec![true, true], vec![true, false]]);
        assert_eq!(BitCode::new(CodeKind::StandardBinary, 2).bits(2).unwrap(), vec![true, false]);
        assert_eq!(BitCode::new(CodeKind::Gray, 3).bits(5).unwrap(), vec![true, true, true]);
        assert!(BitCode::new(CodeKind::Gray, 2).bits(4).is_err());
    }

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        for width in 1..=4 {
            let code = BitCode::new(CodeKind::Gray, width);
            for i in 0..(1 << width) - 1 {
                let d = (code.word(i).unwrap() ^ code.word(i + 1).unwrap()).count_ones();
                assert_eq!(d, 1);
            }
        }
    }

    #[test]
    fn qubit_counts() {
        assert_eq!(qubits_for(2), 1);
        assert_eq!(qubits_for(3), 2);
        assert_eq!(qubits_for(4), 2);
        assert_eq!(qubits_for(5), 3);
        assert_eq!(qubits_for(8), 3);
        assert!(Truncation::new(1).is_err());
    }

    #[test]
    fn single_qubit_transitions() {
        let code = BitCode::new(CodeKind::StandardBinary, 1);
        let p00 = encode_transition::<f64>(0, 0, &code).unwrap();
        assert_eq!(coeff_of(&p00, "I"), Some(c(0.5, 0.)));
        assert_eq!(coeff_of(&p00, "Z"), Some(c(0.5, 0.)));
        let p01 = encode_transition::<f64>(0, 1, &code).unwrap();
        assert_eq!(coeff_of(&p01, "X"), Some(c(0.5, 0.)));
        assert_eq!(coeff_of(&p01, "Y"), Some(c(0., 0.5)));
    }

    #[test]
    fn transition_is_matrix_unit_in_gray_basis() {
        let code = BitCode::new(CodeKind::Gray, 2);
        let dense = encode_transition::<f64>(2, 3, &code).unwrap().to_dense().unwrap();
        let mut unit = linalg::zeros::<f64>(4);
        // Gray(2) = 11 = 3, Gray(3) = 10 = 2
        unit[(3, 2)] = c(1., 0.);
        assert!(linalg::max_abs_diff(&dense, &unit) < 1e-15);
    }

    #[test]
    fn gray_number_operator() {
        let n = encode_boson_operator::<f64>(BosonOperator::Number, Truncation::new(4).unwrap(), CodeKind::Gray).unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!(coeff_of(&n, "II"), Some(c(1.5, 0.)));
        assert_eq!(coeff_of(&n, "ZI"), Some(c(-1.0, 0.)));
        assert_eq!(coeff_of(&n, "ZZ"), Some(c(-0.5, 0.)));
    }

    #[test]
    fn gray_position_operator() {
        let trunc = Truncation::new(4).unwrap();
        let a = encode_boson_operator::<f64>(BosonOperator::Lower, trunc, CodeKind::Gray).unwrap();
        let x = a.add(&a.adjoint()).unwrap().canonicalize();
        let s3 = 3f64.sqrt();
        let expect = [("IX", (1. + s3) / 2.), ("XI", SQRT2 / 2.), ("XZ", -SQRT2 / 2.), ("ZX", (1. - s3) / 2.)];
        assert_eq!(x.len(), 4);
        for (label, v) in expect {
            let got = coeff_of(&x, label).unwrap();
            assert!((got - c(v, 0.)).norm() < 1e-12, "{label}: {got}");
        }
        assert!(x.terms().iter().all(|t| !t.letters().contains(&Pauli::Y)));
    }

    #[test]
    fn two_level_lowering() {
        let a = encode_boson_operator::<f64>(BosonOperator::Lower, Truncation::new(2).unwrap(), CodeKind::Gray).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(coeff_of(&a, "X"), Some(c(0.5, 0.)));
        assert_eq!(coeff_of(&a, "Y"), Some(c(0., 0.5)));
    }

    #[test]
    fn operators_match_permuted_truncation() {
        use BosonOperator::*;
        for levels in [2, 3, 4, 5, 8] {
            for kind in [CodeKind::Gray, CodeKind::StandardBinary] {
                for op in [Lower, Raise, Number] {
                    let enc = encode_boson_operator::<f64>(op, Truncation::new(levels).unwrap(), kind).unwrap();
                    let diff = linalg::max_abs_diff(&enc.to_dense().unwrap(), &permuted_dense(op, levels, kind));
                    assert!(diff < 1e-12, "{op:?} d={levels} {kind:?}: {diff}");
                }
            }
        }
    }

    #[test]
    fn raise_is_adjoint_of_lower() {
        for kind in [CodeKind::Gray, CodeKind::StandardBinary] {
            let t = Truncation::new(8).unwrap();
            let a = encode_boson_operator::<f64>(BosonOperator::Lower, t, kind).unwrap();
            let ad = encode_boson_operator::<f64>(BosonOperator::Raise, t, kind).unwrap();
            assert_eq!(a.adjoint().canonicalize(), ad);
        }
    }

    #[test]
    fn decoupled_limit_is_pure_z() {
        let p = ModelParams { h: 1.0, epsilon: 0.0, omega: 0.0, lambda: 0.0, gamma: 0.0, n_spins: 1, levels: 4 };
        let h = encode_hamiltonian(&p, CodeKind::Gray).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.terms()[0].label(), "IIZ");
        assert_eq!(h.terms()[0].coeff(), c(-0.5, 0.));
    }
}
