//! Dense complex linear algebra helpers.
//!
//! Qubit ordering: qubit 0 is the leftmost tensor factor, so in a basis
//! index over `w` qubits, qubit `q` occupies bit `w - 1 - q`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::scalar::{cexp, cr, modulus, Real, C};

pub type CMatrix<T> = DMatrix<C<T>>;

pub fn identity<T: Real>(dim: usize) -> CMatrix<T> {
    CMatrix::identity(dim, dim)
}

pub fn zeros<T: Real>(dim: usize) -> CMatrix<T> {
    CMatrix::zeros(dim, dim)
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> C<T> {
    m.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |acc, &z| acc + z)
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| modulus(*x - *y))
        .fold(T::zero(), |m, v| if v > m { v } else { m })
}

/// Largest entry-wise modulus of `m - m†`.
pub fn hermiticity_error<T: Real>(m: &CMatrix<T>) -> T {
    max_abs_diff(m, &m.adjoint())
}

/// `(m + m†) / 2`.
pub fn hermitize<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).map(|z| z * T::of(0.5))
}

/// Eigen-decomposition of a Hermitian matrix (the anti-Hermitian part is
/// discarded). Eigenvalues are returned in ascending order together with
/// the matching eigenvector columns.
pub fn eigh<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let eig = hermitize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V f(Λ) V†` for Hermitian `m = V Λ V†`.
pub fn hermitian_map<T: Real, F>(m: &CMatrix<T>, f: F) -> CMatrix<T>
where
    F: Fn(T) -> C<T>,
{
    let (values, vectors) = eigh(m);
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= fv);
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a positive semidefinite matrix; negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    hermitian_map(m, |v| cr(if v > T::zero() { v.sqrt() } else { T::zero() }))
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn unitary_evolution<T: Real>(h: &CMatrix<T>, t: T) -> CMatrix<T> {
    hermitian_map(h, |v| cexp(Complex::new(T::zero(), -(v * t))))
}

/// True when `a = e^{iφ} b` for some global phase φ, entry-wise within `tol`.
pub fn equal_up_to_phase<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, tol: T) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    // Align on the largest entry of b.
    let (idx, _) = b
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bm), (i, z)| if modulus(*z) > bm { (i, modulus(*z)) } else { (bi, bm) });
    let (bz, az) = (b.as_slice()[idx], a.as_slice()[idx]);
    if modulus(az) < tol {
        return max_abs_diff(a, b) < tol;
    }
    let phase = az / bz;
    let phase = phase / cr(modulus(phase));
    max_abs_diff(a, &b.map(|z| z * phase)) < tol
}

/// Bit layout of a subset of qubits inside a wider register.
///
/// `offsets[l]` is the contribution of local index `l` (over `qubits`, the
/// first listed qubit most significant) to a full basis index, and `bases`
/// enumerates every assignment of the remaining qubits.
#[derive(Debug, Clone)]
pub struct LocalIndex {
    pub offsets: Vec<usize>,
    pub bases: Vec<usize>,
}

impl LocalIndex {
    pub fn new(width: usize, qubits: &[usize]) -> Self {
        let k = qubits.len();
        let bit = |q: usize| 1usize << (width - 1 - q);
        let offsets = (0..1usize << k)
            .map(|l| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (l >> (k - 1 - i)) & 1 == 1)
                    .map(|(_, &q)| bit(q))
                    .sum()
            })
            .collect();
        let mask: usize = qubits.iter().map(|&q| bit(q)).sum();
        let bases = (0..1usize << width).filter(|i| i & mask == 0).collect();
        Self { offsets, bases }
    }
}

/// Embeds an operator on `qubits` into a `width`-qubit register.
pub fn embed<T: Real>(op: &CMatrix<T>, qubits: &[usize], width: usize) -> CMatrix<T> {
    let idx = LocalIndex::new(width, qubits);
    let dim = 1usize << width;
    let mut full = CMatrix::zeros(dim, dim);
    for &base in &idx.bases {
        for (a, &oa) in idx.offsets.iter().enumerate() {
            for (b, &ob) in idx.offsets.iter().enumerate() {
                full[(base + oa, base + ob)] = op[(a, b)];
            }
        }
    }
    full
}

/// Reduces `m` to the qubits in `keep`, ordered as listed.
pub fn partial_trace<T: Real>(m: &CMatrix<T>, width: usize, keep: &[usize]) -> CMatrix<T> {
    let idx = LocalIndex::new(width, keep);
    let dim = idx.offsets.len();
    let mut out = CMatrix::zeros(dim, dim);
    for (a, &oa) in idx.offsets.iter().enumerate() {
        for (b, &ob) in idx.offsets.iter().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for &base in &idx.bases {
                acc += m[(base + oa, base + ob)];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Number of qubits of a `2^w`-dimensional operator.
pub fn qubits_of(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}
