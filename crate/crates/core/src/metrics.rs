//! State fidelity, time-averaged infidelity, observables and connected
//! spin-spin correlations.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::encoding::{self, BosonOperator};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::EncodedModel;
use crate::oracle::TrajectorySnapshot;
use crate::pauli::Pauli;
use crate::scalar::Real;

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` of two positive matrices, clamped to
/// `[0, 1]`.
pub fn matrix_fidelity<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>) -> Result<T> {
    if rho.nrows() != sigma.nrows() {
        return Err(Error::DimensionMismatch(rho.nrows(), sigma.nrows()));
    }
    let s = linalg::psd_sqrt(rho);
    let inner = linalg::hermitize(&(&s * sigma * &s));
    let (vals, _) = linalg::eigh(&inner);
    let top = vals.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let floor = top * T::of(64.0 * rho.nrows() as f64 * T::MACHINE_EPS);
    let tr = vals.iter().filter(|&&v| v > floor).fold(T::zero(), |acc, &v| acc + v.sqrt());
    Ok((tr * tr).min(T::one()).max(T::zero()))
}

pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    matrix_fidelity(rho.matrix(), sigma.matrix())
}

pub fn infidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    Ok(T::one() - fidelity(rho, sigma)?)
}

/// Infidelity at every snapshot of two aligned trajectories.
pub fn infidelity_series<T: Real>(sim: &[TrajectorySnapshot<T>], exact: &[TrajectorySnapshot<T>]) -> Result<Vec<T>> {
    if sim.len() != exact.len() {
        return Err(Error::GridMismatch(format!("{} vs {} snapshots", sim.len(), exact.len())));
    }
    sim.iter()
        .zip(exact)
        .map(|(a, b)| {
            if (a.t - b.t).abs() > 1e-9 {
                return Err(Error::GridMismatch(format!("t = {} vs {}", a.t, b.t)));
            }
            infidelity(&a.rho, &b.rho)
        })
        .collect()
}

/// Mean infidelity over the snapshots with `t > 0`.
pub fn time_averaged_infidelity<T: Real>(sim: &[TrajectorySnapshot<T>], exact: &[TrajectorySnapshot<T>]) -> Result<T> {
    let series = infidelity_series(sim, exact)?;
    let values: Vec<T> = series
        .into_iter()
        .zip(sim)
        .filter(|(_, s)| s.t > 0.0)
        .map(|(v, _)| v)
        .collect();
    if values.is_empty() {
        return Err(Error::GridMismatch("no snapshot with t > 0".into()));
    }
    let n = T::of(values.len() as f64);
    Ok(values.into_iter().fold(T::zero(), |a, v| a + v) / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    BosonNumber,
    SigmaZ(usize),
    SigmaX(usize),
    /// Connected `σᶻσᶻ` correlation of a two-spin model.
    Czz,
    /// Connected `σˣσˣ` correlation of a two-spin model.
    Cxx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationPair {
    ZZ,
    XX,
}

/// Dense operator of `obs` on the system register of `model`. Spin
/// observables are physical: `σᶻ = -Z` with `|↑> = |1>`.
pub fn observable_matrix<T: Real>(obs: ObservableSpec, model: &EncodedModel<T>) -> Result<CMatrix<T>> {
    let width = model.system_width();
    let spin = |k: usize, p: Pauli| -> Result<CMatrix<T>> {
        let spins = model.layout.system_spin_qubits();
        let &q = spins.get(k).ok_or(Error::OutOfRange { index: k, limit: spins.len() })?;
        let m = p.matrix::<T>();
        let m = if p == Pauli::Z { m.map(|z| -z) } else { m };
        Ok(linalg::embed(&m, &[q], width))
    };
    match obs {
        ObservableSpec::BosonNumber => {
            let n = encoding::encode_boson_operator::<T>(BosonOperator::Number, model.truncation(), model.code)?;
            n.embed(width, &model.layout.system_boson_qubits())?.to_dense()
        }
        ObservableSpec::SigmaZ(k) => spin(k, Pauli::Z),
        ObservableSpec::SigmaX(k) => spin(k, Pauli::X),
        ObservableSpec::Czz | ObservableSpec::Cxx => Err(Error::InvalidParameter(
            "correlations are not linear observables; use connected_correlation".into(),
        )),
    }
}

/// `Tr(ρ O)` for a Hermitian `O`.
pub fn expectation_of<T: Real>(rho: &DensityMatrix<T>, op: &CMatrix<T>) -> Result<T> {
    if op.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch(op.nrows(), rho.dim()));
    }
    let v = (rho.matrix() * op).trace();
    let scale = T::one().max(op.iter().fold(T::zero(), |m, z| m.max(crate::scalar::modulus(*z))));
    if v.im.abs() > T::tol(1e-9) * scale {
        return Err(Error::NonHermitian(format!("expectation has imaginary part {}", v.im)));
    }
    Ok(v.re)
}

pub fn expectation<T: Real>(rho: &DensityMatrix<T>, obs: ObservableSpec, model: &EncodedModel<T>) -> Result<T> {
    match obs {
        ObservableSpec::Czz => connected_correlation(rho, CorrelationPair::ZZ, model),
        ObservableSpec::Cxx => connected_correlation(rho, CorrelationPair::XX, model),
        _ => expectation_of(rho, &observable_matrix(obs, model)?),
    }
}

/// `⟨A₁A₂⟩ - ⟨A₁⟩⟨A₂⟩` for the two spins of a two-spin model.
pub fn connected_correlation<T: Real>(rho: &DensityMatrix<T>, pair: CorrelationPair, model: &EncodedModel<T>) -> Result<T> {
    if model.params.n_spins != 2 {
        return Err(Error::InvalidParameter(format!(
            "connected correlations need exactly 2 spins, model has {}",
            model.params.n_spins
        )));
    }
    let (a, b) = match pair {
        CorrelationPair::ZZ => (ObservableSpec::SigmaZ(0), ObservableSpec::SigmaZ(1)),
        CorrelationPair::XX => (ObservableSpec::SigmaX(0), ObservableSpec::SigmaX(1)),
    };
    let (ma, mb) = (observable_matrix(a, model)?, observable_matrix(b, model)?);
    let joint = expectation_of(rho, &(&ma * &mb))?;
    Ok(joint - expectation_of(rho, &ma)? * expectation_of(rho, &mb)?)
}

/// Connected correlation of two single-qubit observables on an arbitrary
/// register.
pub fn connected_correlation_on<T: Real>(
    rho: &DensityMatrix<T>,
    a: (&CMatrix<T>, usize),
    b: (&CMatrix<T>, usize),
) -> Result<T> {
    let w = rho.width();
    let ma = linalg::embed(a.0, &[a.1], w);
    let mb = linalg::embed(b.0, &[b.1], w);
    let joint = expectation_of(rho, &(&ma * &mb))?;
    Ok(joint - expectation_of(rho, &ma)? * expectation_of(rho, &mb)?)
}

/// Trace distance `½‖ρ - σ‖₁`.
pub fn trace_distance<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let diff = linalg::hermitize(&(rho.matrix() - sigma.matrix()));
    let (vals, _) = linalg::eigh(&diff);
    Ok(vals.iter().fold(T::zero(), |a, v| a + v.abs()) * T::of(0.5))
}

/// `Tr(ρσ)`, the fidelity when either state is pure.
pub fn overlap<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> T {
    (rho.matrix() * sigma.matrix()).trace().re
}
