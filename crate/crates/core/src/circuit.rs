//! Gate-level circuits: Pauli exponentials, Trotter steps, collisions and
//! full evolution assembly.

use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{EncodedModel, InitialState, RateConvention, Role};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::scalar::{c, phase, Real};

/// Widest circuit accepted by the dense simulator.
pub const MAX_CIRCUIT_WIDTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    X,
    SX,
    Rz,
    Ry,
    Cx,
    Cry,
    Id,
    Reset,
    Measure,
    Barrier,
}

impl GateKind {
    pub const ALL: [GateKind; 10] = [
        GateKind::X,
        GateKind::SX,
        GateKind::Rz,
        GateKind::Ry,
        GateKind::Cx,
        GateKind::Cry,
        GateKind::Id,
        GateKind::Reset,
        GateKind::Measure,
        GateKind::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "x",
            GateKind::SX => "sx",
            GateKind::Rz => "rz",
            GateKind::Ry => "ry",
            GateKind::Cx => "cx",
            GateKind::Cry => "cry",
            GateKind::Id => "id",
            GateKind::Reset => "reset",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
        }
    }

    /// Native to the target device: `{CX, ID, RZ, SX, X}`.
    pub fn is_native(self) -> bool {
        matches!(self, GateKind::X | GateKind::SX | GateKind::Rz | GateKind::Cx | GateKind::Id)
    }

    /// Not a unitary operation.
    pub fn is_directive(self) -> bool {
        matches!(self, GateKind::Reset | GateKind::Measure | GateKind::Barrier)
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidGate(format!("unknown gate kind `{s}`")))
    }
}

/// A single operation. Two-qubit gates list the control first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X(usize),
    SX(usize),
    Rz(usize, f64),
    Ry(usize, f64),
    Cx(usize, usize),
    Cry(usize, usize, f64),
    Id(usize),
    Reset(usize),
    Measure(usize),
    Barrier,
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::X(_) => GateKind::X,
            Gate::SX(_) => GateKind::SX,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Cx(..) => GateKind::Cx,
            Gate::Cry(..) => GateKind::Cry,
            Gate::Id(_) => GateKind::Id,
            Gate::Reset(_) => GateKind::Reset,
            Gate::Measure(_) => GateKind::Measure,
            Gate::Barrier => GateKind::Barrier,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X(q) | Gate::SX(q) | Gate::Rz(q, _) | Gate::Ry(q, _) | Gate::Id(q) | Gate::Reset(q) | Gate::Measure(q) => {
                vec![q]
            }
            Gate::Cx(a, b) | Gate::Cry(a, b, _) => vec![a, b],
            Gate::Barrier => Vec::new(),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rz(_, a) | Gate::Ry(_, a) | Gate::Cry(_, _, a) => Some(a),
            _ => None,
        }
    }

    /// The same gate on relabelled qubits.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::X(q) => Gate::X(f(q)),
            Gate::SX(q) => Gate::SX(f(q)),
            Gate::Rz(q, a) => Gate::Rz(f(q), a),
            Gate::Ry(q, a) => Gate::Ry(f(q), a),
            Gate::Cx(p, q) => Gate::Cx(f(p), f(q)),
            Gate::Cry(p, q, a) => Gate::Cry(f(p), f(q), a),
            Gate::Id(q) => Gate::Id(f(q)),
            Gate::Reset(q) => Gate::Reset(f(q)),
            Gate::Measure(q) => Gate::Measure(f(q)),
            Gate::Barrier => Gate::Barrier,
        }
    }

    /// Unitary on the operand qubits (first operand most significant), or
    /// `None` for directives.
    pub fn unitary<T: Real>(&self) -> Option<CMatrix<T>> {
        let z = c(0., 0.);
        let o = c(1., 0.);
        let m = match *self {
            Gate::X(_) => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Gate::SX(_) => {
                let (p, m) = (c(0.5, 0.5), c(0.5, -0.5));
                CMatrix::from_row_slice(2, 2, &[p, m, m, p])
            }
            Gate::Rz(_, a) => rz(a),
            Gate::Ry(_, a) => ry(a),
            Gate::Id(_) => linalg::identity(2),
            Gate::Cx(..) => {
                let mut m = linalg::identity::<T>(4);
                m[(2, 2)] = z;
                m[(3, 3)] = z;
                m[(2, 3)] = o;
                m[(3, 2)] = o;
                m
            }
            Gate::Cry(_, _, a) => {
                let mut m = linalg::identity::<T>(4);
                let r = ry::<T>(a);
                for i in 0..2 {
                    for j in 0..2 {
                        m[(2 + i, 2 + j)] = r[(i, j)];
                    }
                }
                m
            }
            Gate::Reset(_) | Gate::Measure(_) | Gate::Barrier => return None,
        };
        Some(m)
    }

    fn check(&self, width: usize) -> Result<()> {
        let qs = self.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= width) {
            return Err(Error::OutOfRange { index: q, limit: width });
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidGate(format!("{} with repeated operand {}", self.kind().name(), qs[0])));
        }
        if self.angle().is_some_and(|a| !a.is_finite()) {
            return Err(Error::InvalidGate(format!("{} with non-finite angle", self.kind().name())));
        }
        Ok(())
    }
}

/// `RZ(θ) = exp(-iθZ/2)`.
pub fn rz<T: Real>(theta: f64) -> CMatrix<T> {
    let mut m = linalg::zeros::<T>(2);
    m[(0, 0)] = phase(T::of(-theta / 2.0));
    m[(1, 1)] = phase(T::of(theta / 2.0));
    m
}

/// `RY(θ) = exp(-iθY/2)`.
pub fn ry<T: Real>(theta: f64) -> CMatrix<T> {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)])
}

/// Logical-to-wire assignment recorded by routing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    /// One entry per barrier: wire holding each logical qubit.
    pub at_barriers: Vec<Vec<usize>>,
    /// Wire holding each logical qubit after the last gate.
    pub final_layout: Vec<usize>,
}

/// An ordered gate list on `width` wires.
///
/// `roles` describes the logical qubits. Before routing there is one wire
/// per logical qubit; a routed circuit carries a [`Placement`] mapping
/// logical qubits onto wires and `device` names the hardware qubit behind
/// each wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    width: usize,
    roles: Vec<Role>,
    device: Vec<usize>,
    gates: Vec<Gate>,
    placement: Option<Placement>,
}

impl Circuit {
    pub fn new(roles: Vec<Role>) -> Self {
        let width = roles.len();
        Self { width, roles, device: (0..width).collect(), gates: Vec::new(), placement: None }
    }

    /// A routed circuit: `width` wires carrying the logical qubits of `roles`.
    pub fn routed(width: usize, roles: Vec<Role>, device: Vec<usize>, gates: Vec<Gate>, placement: Placement) -> Result<Self> {
        if device.len() != width {
            return Err(Error::WidthMismatch(device.len(), width));
        }
        let c = Self { width, roles, device, gates: Vec::new(), placement: Some(placement) };
        let mut c = c;
        c.extend(gates)?;
        Ok(c)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn device(&self) -> &[usize] {
        &self.device
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn placement(&self) -> Option<&Placement> {
        self.placement.as_ref()
    }

    /// Same register description, no gates.
    pub fn clone_empty(&self) -> Circuit {
        Circuit { gates: Vec::new(), ..self.clone() }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn n_barriers(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Barrier)).count()
    }

    /// Wire of every logical qubit at barrier `k`.
    pub fn layout_at(&self, k: usize) -> Vec<usize> {
        match &self.placement {
            Some(p) => p.at_barriers[k].clone(),
            None => (0..self.roles.len()).collect(),
        }
    }

    pub fn final_layout(&self) -> Vec<usize> {
        match &self.placement {
            Some(p) => p.final_layout.clone(),
            None => (0..self.roles.len()).collect(),
        }
    }

    /// Logical qubits of the system register (every non-auxiliary role),
    /// in logical order.
    pub fn system_qubits(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, Role::Spin(_) | Role::Boson(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Wires of the system register at barrier `k`.
    pub fn system_wires_at(&self, k: usize) -> Vec<usize> {
        let layout = self.layout_at(k);
        self.system_qubits().into_iter().map(|q| layout[q]).collect()
    }

    /// Logical qubits measured by the circuit, with the wire they are read from.
    pub fn measured(&self) -> Vec<(usize, usize)> {
        let layout = self.final_layout();
        let mut out = Vec::new();
        for g in &self.gates {
            if let Gate::Measure(w) = g {
                if let Some(l) = layout.iter().position(|x| x == w) {
                    out.push((l, *w));
                }
            }
        }
        out
    }

    /// Dense unitary of a directive-free circuit (barriers ignored).
    pub fn unitary<T: Real>(&self) -> Result<CMatrix<T>> {
        if self.width > crate::pauli::MAX_DENSE_QUBITS {
            return Err(Error::TooWide { width: self.width, limit: crate::pauli::MAX_DENSE_QUBITS });
        }
        let mut u = linalg::identity::<T>(1 << self.width);
        for g in &self.gates {
            match g.unitary::<T>() {
                Some(m) => u = linalg::embed(&m, &g.qubits(), self.width) * u,
                None if matches!(g, Gate::Barrier) => {}
                None => return Err(Error::InvalidGate(format!("{} has no unitary", g.kind().name()))),
            }
        }
        Ok(u)
    }

    /// Checks the structural rules of assembled evolution circuits: no gate
    /// after a measurement other than measurements, and resets only on
    /// auxiliary qubits.
    pub fn validate_evolution(&self) -> Result<()> {
        let layout = self.final_layout();
        let mut measuring = false;
        for g in &self.gates {
            match g {
                Gate::Measure(_) => measuring = true,
                _ if measuring => {
                    return Err(Error::InvalidGate(format!("{} after measurement", g.kind().name())));
                }
                Gate::Reset(w) => {
                    // Routing moves qubits; the reset wire must hold an aux at the end.
                    let role = layout.iter().position(|x| x == w).map(|l| self.roles[l]);
                    if self.placement.is_none() && !matches!(role, Some(Role::Aux(_))) {
                        return Err(Error::InvalidGate(format!("reset on non-auxiliary wire {w}")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Serializes to the line format read by [`Circuit::from_str`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "width {}", self.width)?;
        let roles: Vec<_> = self.roles.iter().map(|r| r.tag()).collect();
        writeln!(f, "roles {}", roles.join(" "))?;
        writeln!(f, "device {}", join(&self.device))?;
        if let Some(p) = &self.placement {
            for l in &p.at_barriers {
                writeln!(f, "layout {}", join(l))?;
            }
            writeln!(f, "final {}", join(&p.final_layout))?;
        }
        for g in &self.gates {
            let mut line = g.kind().name().to_string();
            for q in g.qubits() {
                let _ = write!(line, " {q}");
            }
            if let Some(a) = g.angle() {
                let _ = write!(line, " {a:?}");
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut width = None;
        let mut roles = None;
        let mut device = None;
        let mut layouts = Vec::new();
        let mut final_layout = None;
        let mut gates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| Error::Parse { line, msg };
            let mut parts = raw.split_whitespace();
            let Some(head) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            let nums = |rest: &[&str]| -> Result<Vec<usize>> {
                rest.iter()
                    .map(|s| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}"))))
                    .collect()
            };
            match head {
                "width" => width = Some(nums(&rest)?.first().copied().ok_or_else(|| err("missing width".into()))?),
                "roles" => {
                    roles = Some(
                        rest.iter()
                            .map(|t| Role::parse(t).ok_or_else(|| err(format!("bad role `{t}`"))))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "device" => device = Some(nums(&rest)?),
                "layout" => layouts.push(nums(&rest)?),
                "final" => final_layout = Some(nums(&rest)?),
                name => {
                    let kind: GateKind = name.parse().map_err(|_| err(format!("unknown gate `{name}`")))?;
                    let n_q = match kind {
                        GateKind::Barrier => 0,
                        GateKind::Cx | GateKind::Cry => 2,
                        _ => 1,
                    };
                    let has_angle = matches!(kind, GateKind::Rz | GateKind::Ry | GateKind::Cry);
                    if rest.len() != n_q + usize::from(has_angle) {
                        return Err(err(format!("`{name}` expects {n_q} qubits{}", if has_angle { " and an angle" } else { "" })));
                    }
                    let q = nums(&rest[..n_q])?;
                    let a = if has_angle {
                        rest[n_q].parse::<f64>().map_err(|e| err(format!("angle: {e}")))?
                    } else {
                        0.0
                    };
                    gates.push(match kind {
                        GateKind::X => Gate::X(q[0]),
                        GateKind::SX => Gate::SX(q[0]),
                        GateKind::Rz => Gate::Rz(q[0], a),
                        GateKind::Ry => Gate::Ry(q[0], a),
                        GateKind::Cx => Gate::Cx(q[0], q[1]),
                        GateKind::Cry => Gate::Cry(q[0], q[1], a),
                        GateKind::Id => Gate::Id(q[0]),
                        GateKind::Reset => Gate::Reset(q[0]),
                        GateKind::Measure => Gate::Measure(q[0]),
                        GateKind::Barrier => Gate::Barrier,
                    });
                }
            }
        }
        let roles = roles.ok_or(Error::Parse { line: 0, msg: "missing roles".into() })?;
        let width = width.unwrap_or(roles.len());
        let device = device.unwrap_or_else(|| (0..width).collect());
        match final_layout {
            Some(final_layout) => Circuit::routed(width, roles, device, gates, Placement { at_barriers: layouts, final_layout }),
            None => {
                if width != roles.len() {
                    return Err(Error::Parse { line: 0, msg: "unrouted circuit needs one role per wire".into() });
                }
                let mut c = Circuit::new(roles);
                c.device = device;
                c.extend(gates)?;
                Ok(c)
            }
        }
    }
}

/// Gates implementing `exp(-i·angle·coeff·P)` for a real-coefficient Pauli
/// string. Letter `j` of `term` acts on `wires[j]`.
pub fn pauli_exponential<T: Real>(term: &PauliString<T>, angle: f64, wires: &[usize]) -> Result<Vec<Gate>> {
    if term.width() != wires.len() {
        return Err(Error::WidthMismatch(term.width(), wires.len()));
    }
    if term.is_identity() {
        return Err(Error::IdentityExponential);
    }
    let coeff = term.coeff();
    if coeff.im.as_f64().abs() > crate::pauli::DROP_TOL {
        return Err(Error::NonHermitian(term.label()));
    }
    let support = term.support();
    let mut before = Vec::new();
    let mut after = Vec::new();
    for &j in &support {
        let w = wires[j];
        match term.letters()[j] {
            Pauli::X => {
                before.push(Gate::Ry(w, -FRAC_PI_2));
                after.push(Gate::Ry(w, FRAC_PI_2));
            }
            Pauli::Y => {
                before.extend([Gate::Rz(w, -FRAC_PI_2), Gate::Ry(w, -FRAC_PI_2)]);
                after.extend([Gate::Ry(w, FRAC_PI_2), Gate::Rz(w, FRAC_PI_2)]);
            }
            Pauli::Z | Pauli::I => {}
        }
    }
    let ladder: Vec<Gate> = support.windows(2).map(|p| Gate::Cx(wires[p[0]], wires[p[1]])).collect();
    let last = wires[*support.last().expect("non-identity string")];
    let mut gates = before;
    gates.extend(ladder.iter().copied());
    gates.push(Gate::Rz(last, 2.0 * angle * coeff.re.as_f64()));
    gates.extend(ladder.iter().rev().copied());
    gates.extend(after);
    Ok(gates)
}

/// One Trotter step of `h` over time `dt` (order 1 or 2), in the term order
/// of `h`. Identity terms are skipped.
pub fn trotter_step<T: Real>(h: &PauliSum<T>, dt: f64, order: u8, wires: &[usize]) -> Result<Vec<Gate>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let terms: Vec<&PauliString<T>> = h.terms().iter().filter(|t| !t.is_identity()).collect();
    let mut gates = Vec::new();
    match order {
        1 => {
            for t in &terms {
                gates.extend(pauli_exponential(t, dt, wires)?);
            }
        }
        2 => {
            let Some((last, head)) = terms.split_last() else { return Ok(gates) };
            for t in head {
                gates.extend(pauli_exponential(t, dt / 2.0, wires)?);
            }
            gates.extend(pauli_exponential(last, dt, wires)?);
            for t in head.iter().rev() {
                gates.extend(pauli_exponential(t, dt / 2.0, wires)?);
            }
        }
        other => return Err(Error::InvalidParameter(format!("Trotter order must be 1 or 2, got {other}"))),
    }
    Ok(gates)
}

/// Collision angle `θ = arcsin √(1 - e^{-γ_eff Δt})`.
pub fn collision_angle(gamma: f64, dt: f64, convention: RateConvention) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let g = convention.effective_rate(gamma);
    Ok((1.0 - (-g * dt).exp()).sqrt().asin())
}

/// Spin-aux collision: `CRY(2θ)` controlled by the spin, `CX` controlled by
/// the aux, then a reset of the aux.
pub fn collision_block(gamma: f64, dt: f64, spin: usize, aux: usize, convention: RateConvention) -> Result<Vec<Gate>> {
    let theta = collision_angle(gamma, dt, convention)?;
    Ok(vec![Gate::Cry(spin, aux, 2.0 * theta), Gate::Cx(aux, spin), Gate::Reset(aux)])
}

/// Wires flipped to prepare `state` from all-zero.
pub fn preparation<T: Real>(model: &EncodedModel<T>, state: &InitialState) -> Result<Vec<Gate>> {
    let idx = model.initial_index(state)?;
    let wires = model.layout.system_wires();
    let width = wires.len();
    Ok(wires
        .iter()
        .enumerate()
        .filter(|(q, _)| (idx >> (width - 1 - q)) & 1 == 1)
        .map(|(_, &w)| Gate::X(w))
        .collect())
}

/// One time step: Trotterized Hamiltonian followed by a collision per spin.
pub fn evolution_step<T: Real>(model: &EncodedModel<T>, dt: f64, order: u8) -> Result<Vec<Gate>> {
    let layout = &model.layout;
    let mut gates = trotter_step(model.hamiltonian(), dt, order, &layout.system_wires())?;
    let gamma = model.params.gamma.as_f64();
    for (s, a) in layout.spin_wires().into_iter().zip(layout.aux_wires()) {
        gates.extend(collision_block(gamma, dt, s, a, model.convention)?);
    }
    Ok(gates)
}

/// State preparation, a barrier, then `n_steps` of [Trotter step,
/// collisions, barrier], then measurement of every spin and oscillator wire.
pub fn assemble_evolution<T: Real>(
    model: &EncodedModel<T>,
    state: &InitialState,
    n_steps: usize,
    dt: f64,
    order: u8,
) -> Result<Circuit> {
    let layout = &model.layout;
    if layout.width() > MAX_CIRCUIT_WIDTH {
        return Err(Error::TooWide { width: layout.width(), limit: MAX_CIRCUIT_WIDTH });
    }
    let mut circuit = Circuit::new(layout.wires());
    circuit.extend(preparation(model, state)?)?;
    circuit.push(Gate::Barrier)?;
    if n_steps > 0 {
        let step = evolution_step(model, dt, order)?;
        for _ in 0..n_steps {
            circuit.extend(step.iter().copied())?;
            circuit.push(Gate::Barrier)?;
        }
    }
    for w in layout.system_wires() {
        circuit.push(Gate::Measure(w))?;
    }
    Ok(circuit)
}
