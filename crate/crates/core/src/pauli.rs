//! Pauli strings and weighted Pauli sums.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{c, cr, modulus, Real, C};

/// Coefficients below this modulus are dropped by [`PauliSum::canonicalize`].
pub const DROP_TOL: f64 = 1e-12;

/// Largest register realized as a dense matrix.
pub const MAX_DENSE_QUBITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// `self · other = phase · result`.
    pub fn mul(self, other: Pauli) -> (Complex<i8>, Pauli) {
        use Pauli::*;
        let one = Complex::new(1, 0);
        let i = Complex::new(0, 1);
        let mi = Complex::new(0, -1);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (a, b) if a == b => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (mi, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (mi, X),
            (Z, X) => (i, Y),
            (X, Z) => (mi, Y),
            _ => unreachable!(),
        }
    }

    pub fn matrix<T: Real>(self) -> CMatrix<T> {
        let z = c(0., 0.);
        let o = c(1., 0.);
        let entries = match self {
            Pauli::I => [o, z, z, o],
            Pauli::X => [z, o, o, z],
            Pauli::Y => [z, c(0., -1.), c(0., 1.), z],
            Pauli::Z => [o, z, z, c(-1., 0.)],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(ch: char) -> Result<Self> {
        match ch {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// Tensor product of single-qubit Paulis with a complex weight.
/// Letter `j` acts on qubit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString<T: Real> {
    letters: Vec<Pauli>,
    coeff: C<T>,
}

impl<T: Real> PauliString<T> {
    pub fn new(letters: Vec<Pauli>, coeff: C<T>) -> Self {
        Self { letters, coeff }
    }

    /// Parses a label such as `"XIZ"`.
    pub fn from_label(label: &str, coeff: C<T>) -> Result<Self> {
        let letters = label.chars().map(Pauli::try_from).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(letters, coeff))
    }

    pub fn identity(width: usize) -> Self {
        Self::new(vec![Pauli::I; width], cr(T::one()))
    }

    /// A single letter on `qubit`, identity elsewhere.
    pub fn single(width: usize, qubit: usize, p: Pauli, coeff: C<T>) -> Self {
        let mut letters = vec![Pauli::I; width];
        letters[qubit] = p;
        Self::new(letters, coeff)
    }

    pub fn width(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn coeff(&self) -> C<T> {
        self.coeff
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.symbol()).collect()
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.support().len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|p| *p == Pauli::I)
    }

    pub fn scaled(&self, factor: C<T>) -> Self {
        Self::new(self.letters.clone(), self.coeff * factor)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.width() != other.width() {
            return Err(Error::WidthMismatch(self.width(), other.width()));
        }
        let mut phase = Complex::new(1i8, 0i8);
        let letters = self
            .letters
            .iter()
            .zip(&other.letters)
            .map(|(&a, &b)| {
                let (ph, p) = a.mul(b);
                phase *= ph;
                p
            })
            .collect();
        let phase = c::<T>(f64::from(phase.re), f64::from(phase.im));
        Ok(Self::new(letters, self.coeff * other.coeff * phase))
    }

    /// Places this string on `positions` of a `width`-qubit register.
    pub fn embed(&self, width: usize, positions: &[usize]) -> Result<Self> {
        if positions.len() != self.width() {
            return Err(Error::WidthMismatch(positions.len(), self.width()));
        }
        let mut letters = vec![Pauli::I; width];
        for (&p, &q) in self.letters.iter().zip(positions) {
            if q >= width {
                return Err(Error::OutOfRange { index: q, limit: width });
            }
            if positions.iter().filter(|&&r| r == q).count() > 1 {
                return Err(Error::InvalidParameter(format!("position {q} repeated")));
            }
            letters[q] = p;
        }
        Ok(Self::new(letters, self.coeff))
    }

    pub fn to_dense(&self) -> Result<CMatrix<T>> {
        check_dense_width(self.width())?;
        let mut m = CMatrix::from_element(1, 1, self.coeff);
        for p in &self.letters {
            m = linalg::kron(&m, &p.matrix());
        }
        Ok(m)
    }
}

fn check_dense_width(width: usize) -> Result<()> {
    if width > MAX_DENSE_QUBITS {
        Err(Error::TooWide { width, limit: MAX_DENSE_QUBITS })
    } else {
        Ok(())
    }
}

/// Weighted sum of Pauli strings on a fixed register width.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum<T: Real> {
    width: usize,
    terms: Vec<PauliString<T>>,
}

impl<T: Real> PauliSum<T> {
    pub fn zero(width: usize) -> Self {
        Self { width, terms: Vec::new() }
    }

    pub fn from_terms<I>(width: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = PauliString<T>>,
    {
        let mut sum = Self::zero(width);
        for t in terms {
            sum.push(t)?;
        }
        Ok(sum)
    }

    /// Builds a sum from `(label, coefficient)` pairs.
    pub fn from_labels(width: usize, terms: &[(&str, C<T>)]) -> Result<Self> {
        Self::from_terms(
            width,
            terms
                .iter()
                .map(|(l, co)| PauliString::from_label(l, *co))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn push(&mut self, term: PauliString<T>) -> Result<()> {
        if term.width() != self.width {
            return Err(Error::WidthMismatch(self.width, term.width()));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[PauliString<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.width != other.width {
            return Err(Error::WidthMismatch(self.width, other.width));
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn scale(&self, factor: C<T>) -> Self {
        Self {
            width: self.width,
            terms: self.terms.iter().map(|t| t.scaled(factor)).collect(),
        }
    }

    /// Operator product, expanded term by term (not canonicalized).
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.width != other.width {
            return Err(Error::WidthMismatch(self.width, other.width));
        }
        let mut out = Self::zero(self.width);
        for a in &self.terms {
            for b in &other.terms {
                out.terms.push(a.multiply(b)?);
            }
        }
        Ok(out)
    }

    /// Tensor product `self ⊗ other` (self on the leading qubits).
    pub fn tensor(&self, other: &Self) -> Self {
        let width = self.width + other.width;
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut letters = a.letters.clone();
                letters.extend_from_slice(&b.letters);
                terms.push(PauliString::new(letters, a.coeff * b.coeff));
            }
        }
        Self { width, terms }
    }

    /// Places every term on `positions` of a wider register.
    pub fn embed(&self, width: usize, positions: &[usize]) -> Result<Self> {
        Ok(Self {
            width,
            terms: self
                .terms
                .iter()
                .map(|t| t.embed(width, positions))
                .collect::<Result<_>>()?,
        })
    }

    /// Merges duplicate letter patterns, drops negligible coefficients and
    /// sorts terms lexicographically on their letters (I < X < Y < Z).
    pub fn canonicalize(&self) -> Self {
        let mut merged: BTreeMap<Vec<Pauli>, C<T>> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry(t.letters.clone()).or_insert_with(|| cr(T::zero())) += t.coeff;
        }
        let tol = T::of(DROP_TOL);
        let terms = merged
            .into_iter()
            .filter(|(_, co)| modulus(*co) >= tol)
            .map(|(letters, coeff)| PauliString::new(letters, coeff))
            .collect();
        Self { width: self.width, terms }
    }

    /// Conjugate transpose: every Pauli string is Hermitian, so only the
    /// coefficients are conjugated.
    pub fn adjoint(&self) -> Self {
        Self {
            width: self.width,
            terms: self
                .terms
                .iter()
                .map(|t| PauliString::new(t.letters.clone(), t.coeff.conj()))
                .collect(),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        let tol = T::of(DROP_TOL);
        self.canonicalize().terms.iter().all(|t| t.coeff.im.abs() < tol)
    }

    /// Splits off the identity component: `(c, rest)` with `self = c·I + rest`.
    pub fn split_identity(&self) -> (C<T>, Self) {
        let canon = self.canonicalize();
        let mut offset = cr(T::zero());
        let mut rest = Self::zero(self.width);
        for t in canon.terms {
            if t.is_identity() {
                offset += t.coeff;
            } else {
                rest.terms.push(t);
            }
        }
        (offset, rest)
    }

    pub fn to_dense(&self) -> Result<CMatrix<T>> {
        check_dense_width(self.width)?;
        let dim = 1usize << self.width;
        let mut m = linalg::zeros(dim);
        for t in &self.terms {
            m += t.to_dense()?;
        }
        Ok(m)
    }
}

fn fmt_real(x: f64) -> String {
    let s = format!("{:.10}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

impl<T: Real> fmt::Display for PauliSum<T> {
    /// Renders e.g. `-1.4142135624 XXZ + 0.5 IIZ`; complex coefficients
    /// appear as `(re+imi)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let (re, im) = (t.coeff.re.as_f64(), t.coeff.im.as_f64());
            let body = if im.abs() < DROP_TOL {
                let mag = fmt_real(re.abs());
                match (k, re < 0.0) {
                    (0, true) => format!("-{mag}"),
                    (0, false) => mag,
                    (_, true) => format!(" - {mag}"),
                    (_, false) => format!(" + {mag}"),
                }
            } else {
                let sign = if im < 0.0 { '-' } else { '+' };
                let lead = if k == 0 { "" } else { " + " };
                format!("{lead}({}{sign}{}i)", fmt_real(re), fmt_real(im.abs()))
            };
            write!(f, "{body} {}", t.label())?;
        }
        Ok(())
    }
}

impl<T: Real> FromStr for PauliString<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_label(s.trim(), cr(T::one()))
    }
}
