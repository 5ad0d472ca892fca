use osbsim::encoding::{self, BosonOperator, CodeKind, Truncation};
use osbsim::linalg;
use osbsim::model::{EncodedModel, InitialState, Layout, ModelParams, RateConvention, Role, SpinState};

fn spectrum(params: &ModelParams<f64>, kind: CodeKind) -> Vec<f64> {
    let h = osbsim::model::dense_hamiltonian(params, kind).unwrap();
    linalg::eigh(&h).0
}

#[test]
fn gray_and_binary_share_a_spectrum() {
    for params in [ModelParams::<f64>::single_spin(), ModelParams::two_spins(), ModelParams { levels: 8, ..ModelParams::single_spin() }] {
        let a = spectrum(&params, CodeKind::Gray);
        let b = spectrum(&params, CodeKind::StandardBinary);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }
}

#[test]
fn non_power_of_two_levels_leave_unused_words_idle() {
    let params = ModelParams { levels: 3, ..ModelParams::<f64>::single_spin() };
    let h = osbsim::model::dense_hamiltonian(&params, CodeKind::Gray).unwrap();
    assert_eq!(h.nrows(), 8);
    assert!(linalg::hermiticity_error(&h) < 1e-14);
    let n = encoding::encode_boson_operator::<f64>(BosonOperator::Number, Truncation::new(3).unwrap(), CodeKind::Gray).unwrap();
    let dense = n.to_dense().unwrap();
    // Gray word 10 is the unused fourth level.
    assert!(dense[(2, 2)].norm() < 1e-14);
}

#[test]
fn register_layouts() {
    let one = Layout::new(1, 2);
    assert_eq!(one.wires(), vec![Role::Boson(0), Role::Boson(1), Role::Spin(0), Role::Aux(0)]);
    assert_eq!(one.system_width(), 3);
    let two = Layout::new(2, 2);
    assert_eq!(two.wires(), vec![Role::Aux(0), Role::Spin(0), Role::Boson(0), Role::Boson(1), Role::Spin(1), Role::Aux(1)]);
    assert_eq!(two.system_spin_qubits(), vec![0, 3]);
    assert_eq!(two.system_boson_qubits(), vec![1, 2]);
}

#[test]
fn initial_states_are_pure_basis_states() {
    let model = EncodedModel::new(ModelParams::<f64>::two_spins(), CodeKind::Gray, RateConvention::PaperCollision).unwrap();
    let state = InitialState { spins: vec![SpinState::Down, SpinState::Up], boson_level: 2 };
    let rho = model.initial_density_matrix(&state).unwrap();
    assert!((rho.purity() - 1.0).abs() < 1e-14);
    // s0 = 0, oscillator word 11, s1 = 1.
    assert_eq!(model.initial_index(&state).unwrap(), 0b0111);
    assert!(model.initial_index(&InitialState { spins: vec![SpinState::Up], boson_level: 0 }).is_err());
}

#[test]
fn parameter_validation_reports_problems() {
    let bad = ModelParams { levels: 1, omega: f64::NAN, ..ModelParams::<f64>::single_spin() };
    assert!(bad.validate().is_err());
    assert!(EncodedModel::new(bad, CodeKind::Gray, RateConvention::PaperCollision).is_err());
}

#[test]
fn lindblad_rates_follow_convention() {
    let p = ModelParams::<f64>::single_spin().with_gamma(0.8);
    for (conv, rate) in [(RateConvention::PaperCollision, 0.8), (RateConvention::Eq2Literal, 1.6)] {
        let model = EncodedModel::new(p, CodeKind::Gray, conv).unwrap();
        let ops = model.lindblad_operators();
        assert_eq!(ops.len(), 1);
        assert!((ops[0].1 - rate).abs() < 1e-15);
    }
}

#[test]
fn single_precision_model_agrees() {
    let h64 = osbsim::model::dense_hamiltonian(&ModelParams::<f64>::single_spin(), CodeKind::Gray).unwrap();
    let h32 = osbsim::model::dense_hamiltonian(&ModelParams::<f32>::single_spin(), CodeKind::Gray).unwrap();
    for (a, b) in h64.iter().zip(h32.iter()) {
        assert!((a.re - b.re as f64).abs() < 1e-5 && (a.im - b.im as f64).abs() < 1e-5);
    }
}
