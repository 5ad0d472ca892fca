//! Reference dynamics: the Lindblad master equation integrated with
//! fixed-step RK4 on the column-stacked Liouvillian.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::metrics;
use crate::model::EncodedModel;
use crate::scalar::{c, cr, Real, C};

/// Largest internal step, in units of `1/h`.
pub const MAX_STEP: f64 = 1e-3;
/// Refinement stops once halving the step changes the final-state fidelity
/// by less than this.
pub const REFINE_TOL: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySnapshot<T: Real> {
    pub t: f64,
    pub rho: DensityMatrix<T>,
}

/// Generator `L` with `d vec(ρ)/dt = L vec(ρ)` for
/// `dρ/dt = -i[H,ρ] + Σ_k r_k (L_k ρ L_k† - ½{L_k†L_k, ρ})`.
pub fn liouvillian<T: Real>(h: &CMatrix<T>, ops: &[(CMatrix<T>, T)]) -> CMatrix<T> {
    let d = h.nrows();
    let id = linalg::identity::<T>(d);
    let mi = c::<T>(0., -1.);
    let mut l = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)).map(|z| z * mi);
    let half = cr(T::of(0.5));
    for (op, rate) in ops {
        let r = cr(*rate);
        let ldl = op.adjoint() * op;
        l += linalg::kron(&op.map(|z| z.conj()), op).map(|z| z * r);
        l -= linalg::kron(&id, &ldl).map(|z| z * r * half);
        l -= linalg::kron(&ldl.transpose(), &id).map(|z| z * r * half);
    }
    l
}

/// One classical RK4 step of a linear autonomous system, as a matrix:
/// `Σ_{k≤4} (hL)^k / k!`.
pub fn rk4_propagator<T: Real>(l: &CMatrix<T>, step: f64) -> CMatrix<T> {
    let n = l.nrows();
    let hl = l.map(|z| z * cr(T::of(step)));
    let mut term = linalg::identity::<T>(n);
    let mut p = term.clone();
    for k in 1..=4 {
        term = &term * &hl / cr(T::of(k as f64));
        p += &term;
    }
    p
}

/// One RK4 step with explicit stages.
pub fn rk4_step<T: Real>(l: &CMatrix<T>, v: &DVector<C<T>>, step: f64) -> DVector<C<T>> {
    let h = cr(T::of(step));
    let two = cr(T::of(2.0));
    let k1 = l * v;
    let k2 = l * (v + &k1 * (h / two));
    let k3 = l * (v + &k2 * (h / two));
    let k4 = l * (v + &k3 * h);
    v + (k1 + k2 * two + k3 * two + k4) * (h / cr(T::of(6.0)))
}

fn vec_of<T: Real>(rho: &CMatrix<T>) -> DVector<C<T>> {
    DVector::from_column_slice(rho.as_slice())
}

fn unvec<T: Real>(v: &DVector<C<T>>, d: usize) -> CMatrix<T> {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Master-equation integrator for one model.
#[derive(Debug, Clone)]
pub struct Oracle<T: Real> {
    dim: usize,
    generator: CMatrix<T>,
}

impl<T: Real> Oracle<T> {
    pub fn new(model: &EncodedModel<T>) -> Result<Self> {
        let h = model.dense_hamiltonian()?;
        Ok(Self::from_parts(&h, &model.lindblad_operators()))
    }

    pub fn from_parts(h: &CMatrix<T>, ops: &[(CMatrix<T>, T)]) -> Self {
        Self { dim: h.nrows(), generator: liouvillian(h, ops) }
    }

    pub fn generator(&self) -> &CMatrix<T> {
        &self.generator
    }

    /// Snapshots at every `t_grid` point with `substeps_per_unit` fixed by
    /// `max_step`.
    fn integrate(&self, rho0: &DensityMatrix<T>, t_grid: &[f64], max_step: f64) -> Result<Vec<TrajectorySnapshot<T>>> {
        let d = self.dim;
        let mut cache: HashMap<u64, CMatrix<T>> = HashMap::new();
        let mut v = vec_of(rho0.matrix());
        let mut out = vec![TrajectorySnapshot { t: t_grid[0], rho: rho0.clone() }];
        for w in t_grid.windows(2) {
            let span = w[1] - w[0];
            if span == 0.0 {
                out.push(TrajectorySnapshot { t: w[1], rho: out.last().expect("nonempty").rho.clone() });
                continue;
            }
            let n = (span / max_step).ceil().max(1.0) as usize;
            let step = span / n as f64;
            let p = cache.entry(step.to_bits()).or_insert_with(|| rk4_propagator(&self.generator, step));
            for _ in 0..n {
                v = &*p * &v;
                let mut m = unvec(&v, d);
                let herm = linalg::hermiticity_error(&m);
                if herm > T::tol(1e-8) {
                    return Err(Error::Drift(format!("hermiticity error {herm} at t = {}", w[0])));
                }
                m = linalg::hermitize(&m);
                let tr = linalg::trace(&m).re;
                if (tr - T::one()).abs() > T::tol(1e-6) {
                    return Err(Error::Drift(format!("trace {tr} at t = {}", w[0])));
                }
                v = vec_of(&m);
            }
            out.push(TrajectorySnapshot { t: w[1], rho: DensityMatrix::from_matrix(unvec(&v, d))? });
        }
        Ok(out)
    }

    /// Evolves `rho0` over `t_grid` (ascending, starting at 0), halving the
    /// internal step until the final state is converged.
    pub fn evolve(&self, rho0: &DensityMatrix<T>, t_grid: &[f64]) -> Result<Vec<TrajectorySnapshot<T>>> {
        if rho0.dim() != self.dim {
            return Err(Error::DimensionMismatch(rho0.dim(), self.dim));
        }
        match t_grid.first() {
            None => return Err(Error::GridMismatch("empty time grid".into())),
            Some(&t0) if t0 != 0.0 => return Err(Error::GridMismatch(format!("grid starts at {t0}, not 0"))),
            _ => {}
        }
        if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::GridMismatch("grid is not ascending".into()));
        }
        let mut step = MAX_STEP;
        let mut coarse = self.integrate(rho0, t_grid, step)?;
        for _ in 0..MAX_REFINEMENTS {
            step /= 2.0;
            let fine = self.integrate(rho0, t_grid, step)?;
            let (a, b) = (&coarse.last().expect("nonempty").rho, &fine.last().expect("nonempty").rho);
            let change = (T::one() - metrics::fidelity(a, b)?).abs();
            let diff = linalg::max_abs_diff(a.matrix(), b.matrix());
            coarse = fine;
            if change < T::tol(REFINE_TOL) || diff < T::tol(1e-10) {
                return Ok(coarse);
            }
            log::debug!("oracle refinement: step {step}, fidelity change {change}");
        }
        log::warn!("oracle step refinement did not converge below {REFINE_TOL}");
        Ok(coarse)
    }
}

/// Exact evolution of `rho0` under `model` at each time of `t_grid`.
pub fn evolve_exact<T: Real>(rho0: &DensityMatrix<T>, model: &EncodedModel<T>, t_grid: &[f64]) -> Result<Vec<TrajectorySnapshot<T>>> {
    Oracle::new(model)?.evolve(rho0, t_grid)
}

/// `[0, dt, 2dt, ..., n·dt]`.
pub fn uniform_grid(dt: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|k| k as f64 * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::CodeKind;
    use crate::model::{InitialState, ModelParams, RateConvention};
    use crate::pauli::Pauli;

    #[test]
    fn propagator_equals_explicit_stages() {
        let h = Pauli::X.matrix::<f64>();
        let mut low = linalg::zeros::<f64>(2);
        low[(0, 1)] = c(1., 0.);
        let l = liouvillian(&h, &[(low, 0.7)]);
        let v = DVector::from_column_slice(&[c(0.3, 0.), c(0.1, 0.2), c(0.1, -0.2), c(0.7, 0.)]);
        let a = rk4_propagator(&l, 0.01) * &v;
        let b = rk4_step(&l, &v, 0.01);
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn liouvillian_matches_direct_form() {
        let h = Pauli::Y.matrix::<f64>().map(|z| z * 0.4) + Pauli::Z.matrix::<f64>();
        let mut low = linalg::zeros::<f64>(2);
        low[(0, 1)] = c(1., 0.);
        let rho = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.), c(0.1, 0.3), c(0.1, -0.3), c(0.4, 0.)]);
        let l = liouvillian(&h, &[(low.clone(), 1.3)]);
        let got = unvec(&(l * vec_of(&rho)), 2);
        let i = c::<f64>(0., 1.);
        let ldl = low.adjoint() * &low;
        let want = (&h * &rho - &rho * &h).map(|z| -i * z)
            + (&low * &rho * low.adjoint() - (&ldl * &rho + &rho * &ldl).map(|z| z * 0.5)).map(|z| z * 1.3);
        assert!(linalg::max_abs_diff(&got, &want) < 1e-15);
    }

    fn decoupled(convention: RateConvention) -> EncodedModel<f64> {
        let p = ModelParams { epsilon: 0.0, lambda: 0.0, ..ModelParams::single_spin() };
        EncodedModel::new(p, CodeKind::Gray, convention).unwrap()
    }

    #[test]
    fn decoupled_decay_is_exponential() {
        for conv in [RateConvention::PaperCollision, RateConvention::Eq2Literal] {
            let m = decoupled(conv);
            let rho0 = m.initial_density_matrix(&InitialState::first_excited(1)).unwrap();
            let grid = uniform_grid(0.25, 8);
            let traj = evolve_exact(&rho0, &m, &grid).unwrap();
            let sz = crate::metrics::observable_matrix(crate::metrics::ObservableSpec::SigmaZ(0), &m).unwrap();
            for s in &traj {
                let up = (1.0 + crate::metrics::expectation_of(&s.rho, &sz).unwrap()) / 2.0;
                let want = (-m.effective_gamma() * s.t).exp();
                assert!((up - want).abs() < 1e-9, "{conv:?} t={} {up} vs {want}", s.t);
            }
        }
    }

    #[test]
    fn coherence_decays_at_half_rate() {
        let mut low = linalg::zeros::<f64>(2);
        low[(0, 1)] = c(1., 0.);
        let oracle = Oracle::from_parts(&linalg::zeros(2), &[(low, 1.0)]);
        let plus = DensityMatrix::from_matrix(CMatrix::from_element(2, 2, c(0.5, 0.))).unwrap();
        let traj = oracle.evolve(&plus, &[0.0, 0.5, 1.0]).unwrap();
        for s in &traj {
            assert!((s.rho.matrix()[(0, 1)].re - 0.5 * (-s.t / 2.0).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_system_keeps_purity() {
        let m = EncodedModel::<f64>::new(ModelParams::single_spin().with_gamma(0.0), CodeKind::Gray, RateConvention::PaperCollision).unwrap();
        let rho0 = m.initial_density_matrix(&InitialState::first_excited(1)).unwrap();
        let traj = evolve_exact(&rho0, &m, &uniform_grid(0.5, 4)).unwrap();
        for s in &traj {
            assert!((s.rho.purity() - 1.0).abs() < 1e-8);
        }
        // Agrees with the dense propagator.
        let u = linalg::unitary_evolution(&m.dense_hamiltonian().unwrap(), 2.0);
        let want = &u * rho0.matrix() * u.adjoint();
        assert!(linalg::max_abs_diff(traj[4].rho.matrix(), &want) < 1e-9);
    }

    #[test]
    fn grid_validation() {
        let m = decoupled(RateConvention::PaperCollision);
        let rho0 = m.initial_density_matrix(&InitialState::first_excited(1)).unwrap();
        assert!(evolve_exact(&rho0, &m, &[]).is_err());
        assert!(evolve_exact(&rho0, &m, &[0.1, 0.2]).is_err());
        assert!(evolve_exact(&rho0, &m, &[0.0, 0.2, 0.1]).is_err());
    }
}
