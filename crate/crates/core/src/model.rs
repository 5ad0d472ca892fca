//! Model parameters, register layout and the oracle-side operators.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::encoding::{self, BitCode, CodeKind, Truncation};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::pauli::PauliSum;
use crate::scalar::{c, Real};

/// Spin-boson model parameters in units ħ = h = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Field along z.
    pub h: T,
    /// Field along x.
    pub epsilon: T,
    /// Oscillator frequency.
    pub omega: T,
    /// Spin-oscillator coupling.
    pub lambda: T,
    /// Bare spin decay rate.
    pub gamma: T,
    pub n_spins: usize,
    /// Retained oscillator levels.
    pub levels: usize,
}

impl<T: Real> ModelParams<T> {
    /// One spin: ε = 0.5, ω = 4, λ = 2, γ = 1 on four oscillator levels.
    pub fn single_spin() -> Self {
        Self {
            h: T::one(),
            epsilon: T::of(0.5),
            omega: T::of(4.0),
            lambda: T::of(2.0),
            gamma: T::one(),
            n_spins: 1,
            levels: 4,
        }
    }

    /// Two spins: ε = 0.5, ω = 6, λ = 2, γ = 1 on four oscillator levels.
    pub fn two_spins() -> Self {
        Self { omega: T::of(6.0), n_spins: 2, ..Self::single_spin() }
    }

    pub fn with_gamma(self, gamma: T) -> Self {
        Self { gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [("h", self.h), ("epsilon", self.epsilon), ("omega", self.omega), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !v.as_f64().is_finite() {
                bad.push(format!("{name} is not finite"));
            }
        }
        if self.gamma < T::zero() {
            bad.push(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.n_spins == 0 {
            bad.push("n_spins must be >= 1".into());
        }
        if self.levels < 2 {
            bad.push(format!("levels must be >= 2, got {}", self.levels));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(bad.join("; ")))
        }
    }
}

/// How the bare rate `gamma` maps onto the decay the circuit and the
/// reference master equation implement.
///
/// Both conventions evolve `dρ/dt = -i[H,ρ] + γ_eff Σ_k (L ρ L† - ½{L†L, ρ})`
/// and collide with `θ = arcsin √(1 - e^{-γ_eff Δt})`; they differ only in
/// `γ_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    /// `γ_eff = γ`: excited population decays as `e^{-γt}`.
    #[default]
    PaperCollision,
    /// `γ_eff = 2γ`: the dissipator `γ Σ (2LρL† - {L†L, ρ})` taken literally.
    Eq2Literal,
}

impl RateConvention {
    pub fn effective_rate<T: Real>(self, gamma: T) -> T {
        match self {
            RateConvention::PaperCollision => gamma,
            RateConvention::Eq2Literal => gamma + gamma,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateConvention::PaperCollision => "paper-collision",
            RateConvention::Eq2Literal => "eq2-literal",
        }
    }
}

impl std::str::FromStr for RateConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-collision" => Ok(Self::PaperCollision),
            "eq2-literal" => Ok(Self::Eq2Literal),
            other => Err(Error::InvalidParameter(format!("unknown rate convention `{other}`"))),
        }
    }
}

/// Role of a circuit wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Spin(usize),
    /// Oscillator bit, 0 = most significant.
    Boson(usize),
    Aux(usize),
    /// Device qubit not carrying any model degree of freedom.
    Idle,
}

impl Role {
    pub fn tag(self) -> String {
        match self {
            Role::Spin(k) => format!("s{k}"),
            Role::Boson(j) => format!("b{j}"),
            Role::Aux(k) => format!("a{k}"),
            Role::Idle => "-".into(),
        }
    }

    pub fn parse(tag: &str) -> Option<Role> {
        if tag == "-" {
            return Some(Role::Idle);
        }
        let (head, tail) = tag.split_at(1);
        let k = tail.parse().ok()?;
        match head {
            "s" => Some(Role::Spin(k)),
            "b" => Some(Role::Boson(k)),
            "a" => Some(Role::Aux(k)),
            _ => None,
        }
    }
}

/// Wire arrangement of spins, oscillator bits and auxiliary qubits.
///
/// * one spin: `[b0 .. bQ, s0, a0]`
/// * two or more spins: `[a0, s0, b0 .. bQ, s1, a1, s2, a2, ...]`
///
/// The system register is the same sequence with the auxiliary wires
/// removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_spins: usize,
    pub boson_qubits: usize,
}

impl Layout {
    pub fn new(n_spins: usize, boson_qubits: usize) -> Self {
        Self { n_spins, boson_qubits }
    }

    pub fn wires(&self) -> Vec<Role> {
        let bosons = (0..self.boson_qubits).map(Role::Boson);
        if self.n_spins == 1 {
            bosons.chain([Role::Spin(0), Role::Aux(0)]).collect()
        } else {
            let mut w = vec![Role::Aux(0), Role::Spin(0)];
            w.extend(bosons);
            for k in 1..self.n_spins {
                w.push(Role::Spin(k));
                w.push(Role::Aux(k));
            }
            w
        }
    }

    pub fn system_roles(&self) -> Vec<Role> {
        self.wires().into_iter().filter(|r| !matches!(r, Role::Aux(_))).collect()
    }

    pub fn width(&self) -> usize {
        self.boson_qubits + 2 * self.n_spins
    }

    pub fn system_width(&self) -> usize {
        self.boson_qubits + self.n_spins
    }

    fn position(roles: &[Role], role: Role) -> usize {
        roles.iter().position(|r| *r == role).expect("role present in layout")
    }

    /// System-register index of each spin.
    pub fn system_spin_qubits(&self) -> Vec<usize> {
        let roles = self.system_roles();
        (0..self.n_spins).map(|k| Self::position(&roles, Role::Spin(k))).collect()
    }

    /// System-register indices of the oscillator bits, most significant first.
    pub fn system_boson_qubits(&self) -> Vec<usize> {
        let roles = self.system_roles();
        (0..self.boson_qubits).map(|j| Self::position(&roles, Role::Boson(j))).collect()
    }

    /// Wire index of each spin.
    pub fn spin_wires(&self) -> Vec<usize> {
        let roles = self.wires();
        (0..self.n_spins).map(|k| Self::position(&roles, Role::Spin(k))).collect()
    }

    pub fn aux_wires(&self) -> Vec<usize> {
        let roles = self.wires();
        (0..self.n_spins).map(|k| Self::position(&roles, Role::Aux(k))).collect()
    }

    pub fn boson_wires(&self) -> Vec<usize> {
        let roles = self.wires();
        (0..self.boson_qubits).map(|j| Self::position(&roles, Role::Boson(j))).collect()
    }

    /// Wires of the system register, in system order.
    pub fn system_wires(&self) -> Vec<usize> {
        self.wires()
            .iter()
            .enumerate()
            .filter(|(_, r)| !matches!(r, Role::Aux(_)))
            .map(|(w, _)| w)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinState {
    Up,
    Down,
}

/// Product initial state: one entry per spin plus an oscillator level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialState {
    pub spins: Vec<SpinState>,
    pub boson_level: usize,
}

impl InitialState {
    /// First spin excited, the rest in the ground state, oscillator empty.
    pub fn first_excited(n_spins: usize) -> Self {
        let mut spins = vec![SpinState::Down; n_spins];
        spins[0] = SpinState::Up;
        Self { spins, boson_level: 0 }
    }
}

/// A model bound to an encoding. The Pauli-sum Hamiltonian is built once and
/// shared by the circuit builders and the reference dynamics.
#[derive(Debug, Clone)]
pub struct EncodedModel<T: Real> {
    pub params: ModelParams<T>,
    pub code: CodeKind,
    pub convention: RateConvention,
    pub layout: Layout,
    hamiltonian: Arc<PauliSum<T>>,
}

impl<T: Real> EncodedModel<T> {
    pub fn new(params: ModelParams<T>, code: CodeKind, convention: RateConvention) -> Result<Self> {
        let hamiltonian = Arc::new(encoding::encode_hamiltonian(&params, code)?);
        let layout = Layout::new(params.n_spins, encoding::qubits_for(params.levels));
        Ok(Self { params, code, convention, layout, hamiltonian })
    }

    pub fn hamiltonian(&self) -> &Arc<PauliSum<T>> {
        &self.hamiltonian
    }

    pub fn bit_code(&self) -> BitCode {
        BitCode::for_levels(self.code, self.params.levels)
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.params.levels).expect("validated at construction")
    }

    pub fn effective_gamma(&self) -> T {
        self.convention.effective_rate(self.params.gamma)
    }

    pub fn system_width(&self) -> usize {
        self.layout.system_width()
    }

    pub fn dense_hamiltonian(&self) -> Result<CMatrix<T>> {
        self.hamiltonian.to_dense()
    }

    /// Spin lowering operators `|↓><↑| = |0><1|` on the system register, each
    /// with the effective rate.
    pub fn lindblad_operators(&self) -> Vec<(CMatrix<T>, T)> {
        let mut lower = linalg::zeros::<T>(2);
        lower[(0, 1)] = c(1., 0.);
        let rate = self.effective_gamma();
        self.layout
            .system_spin_qubits()
            .into_iter()
            .map(|q| (linalg::embed(&lower, &[q], self.system_width()), rate))
            .collect()
    }

    /// Computational-basis index of a product state on the system register.
    pub fn initial_index(&self, spec: &InitialState) -> Result<usize> {
        if spec.spins.len() != self.params.n_spins {
            return Err(Error::InvalidParameter(format!(
                "initial state lists {} spins, model has {}",
                spec.spins.len(),
                self.params.n_spins
            )));
        }
        if spec.boson_level >= self.params.levels {
            return Err(Error::OutOfRange { index: spec.boson_level, limit: self.params.levels });
        }
        let width = self.system_width();
        let mut bits = vec![false; width];
        for (&q, s) in self.layout.system_spin_qubits().iter().zip(&spec.spins) {
            bits[q] = *s == SpinState::Up;
        }
        let word = self.bit_code().bits(spec.boson_level)?;
        for (&q, b) in self.layout.system_boson_qubits().iter().zip(word) {
            bits[q] = b;
        }
        Ok(bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b)))
    }

    pub fn initial_density_matrix(&self, spec: &InitialState) -> Result<DensityMatrix<T>> {
        let idx = self.initial_index(spec)?;
        Ok(DensityMatrix::basis(self.system_width(), idx))
    }
}

/// Dense Hamiltonian of `params` under `code`.
pub fn dense_hamiltonian<T: Real>(params: &ModelParams<T>, code: CodeKind) -> Result<CMatrix<T>> {
    encoding::encode_hamiltonian(params, code)?.to_dense()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> EncodedModel<f64> {
        EncodedModel::new(ModelParams::single_spin(), CodeKind::Gray, RateConvention::PaperCollision).unwrap()
    }

    #[test]
    fn layouts() {
        let one = Layout::new(1, 2);
        assert_eq!(one.wires(), vec![Role::Boson(0), Role::Boson(1), Role::Spin(0), Role::Aux(0)]);
        assert_eq!(one.system_spin_qubits(), vec![2]);
        assert_eq!(one.system_boson_qubits(), vec![0, 1]);
        let two = Layout::new(2, 2);
        assert_eq!(
            two.wires(),
            vec![Role::Aux(0), Role::Spin(0), Role::Boson(0), Role::Boson(1), Role::Spin(1), Role::Aux(1)]
        );
        assert_eq!(two.system_wires(), vec![1, 2, 3, 4]);
        assert_eq!(two.system_spin_qubits(), vec![0, 3]);
        assert_eq!(two.aux_wires(), vec![0, 5]);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let h = single().dense_hamiltonian().unwrap();
        assert!(linalg::hermiticity_error(&h) < 1e-14);
    }

    #[test]
    fn decoupled_hamiltonian_commutes_with_boson_number() {
        let p = ModelParams { lambda: 0.0, ..ModelParams::single_spin() };
        let m = EncodedModel::new(p, CodeKind::Gray, RateConvention::PaperCollision).unwrap();
        let h = m.dense_hamiltonian().unwrap();
        let n = encoding::encode_boson_operator::<f64>(encoding::BosonOperator::Number, m.truncation(), CodeKind::Gray)
            .unwrap()
            .embed(3, &m.layout.system_boson_qubits())
            .unwrap()
            .to_dense()
            .unwrap();
        let comm = &h * &n - &n * &h;
        assert!(comm.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn ground_energy_matches_dense_diagonalization() {
        // Independent path: assemble H from Kronecker products of the
        // truncated oscillator and spin matrices, then compare spectra.
        let m = single();
        let (ours, _) = linalg::eigh(&m.dense_hamiltonian().unwrap());
        let d = 4;
        let mut a = linalg::zeros::<f64>(d);
        for l in 0..d - 1 {
            a[(l, l + 1)] = c(((l + 1) as f64).sqrt(), 0.);
        }
        let n = a.adjoint() * &a;
        let x = crate::pauli::Pauli::X.matrix::<f64>();
        let z = crate::pauli::Pauli::Z.matrix::<f64>();
        let i2 = linalg::identity::<f64>(2);
        let id = linalg::identity::<f64>(d);
        let pos = &a + a.adjoint();
        // σᶻ_phys = -Z under |↑> = |1>
        let h = linalg::kron(&n.map(|v| v * 4.0), &i2) + linalg::kron(&id, &z.map(|v| v * -0.5))
            + linalg::kron(&id, &x.map(|v| v * 0.25))
            + linalg::kron(&pos, &x).map(|v| v * 2.0);
        let (reference, _) = linalg::eigh(&h);
        // Our H drops the 1.5ω identity offset of the Gray number operator.
        for (e, r) in ours.iter().zip(&reference) {
            assert!((e + 6.0 - r).abs() < 1e-10, "{e} vs {r}");
        }
    }

    #[test]
    fn lindblad_operator_structure() {
        let ops = single().lindblad_operators();
        assert_eq!(ops.len(), 1);
        let (l, rate) = &ops[0];
        assert_eq!(*rate, 1.0);
        // Embedded on a 3-qubit register the identity factors replicate the
        // single matrix unit once per boson configuration.
        let nonzero: Vec<_> = l.iter().filter(|z| z.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 4);
        assert!(nonzero.iter().all(|z| **z == c(1., 0.)));
        let projector = l.adjoint() * l;
        assert!((0..8).all(|i| (0..8).all(|j| i == j || projector[(i, j)].norm() == 0.0)));
        for i in 0..8 {
            let expect = if i & 1 == 1 { 1.0 } else { 0.0 };
            assert_eq!(projector[(i, i)].re, expect);
        }
        let two = EncodedModel::<f64>::new(ModelParams::two_spins(), CodeKind::Gray, RateConvention::Eq2Literal).unwrap();
        let ops = two.lindblad_operators();
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].1, 2.0);
        let product = &ops[0].0 * &ops[1].0 - &ops[1].0 * &ops[0].0;
        assert!(product.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn initial_states() {
        let m = single();
        let rho = m.initial_density_matrix(&InitialState::first_excited(1)).unwrap();
        // [b0, b1, s] = [0, 0, 1]
        assert_eq!(rho.matrix()[(1, 1)], c(1., 0.));
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!(linalg::max_abs_diff(&(rho.matrix() * rho.matrix()), rho.matrix()) < 1e-15);

        let two = EncodedModel::<f64>::new(ModelParams::two_spins(), CodeKind::Gray, RateConvention::PaperCollision).unwrap();
        let rho = two.initial_density_matrix(&InitialState::first_excited(2)).unwrap();
        // [s0, b0, b1, s1] = [1, 0, 0, 0]
        assert_eq!(rho.matrix()[(8, 8)], c(1., 0.));

        let bad = InitialState { spins: vec![SpinState::Up], boson_level: 4 };
        assert!(m.initial_density_matrix(&bad).is_err());
    }

    #[test]
    fn initial_boson_level_uses_code_word() {
        let m = single();
        let spec = InitialState { spins: vec![SpinState::Down], boson_level: 2 };
        // Gray(2) = 11 -> [1, 1, 0]
        assert_eq!(m.initial_index(&spec).unwrap(), 0b110);
    }
}
