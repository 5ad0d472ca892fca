//! Lowering to the native gate set `{CX, ID, RZ, SX, X}`, single-qubit
//! fusion, greedy SWAP routing onto a coupling map and gate counting.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind, Placement};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::Layout;

const ANGLE_TOL: f64 = 1e-10;

/// Undirected device connectivity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingMap {
    pub n_qubits: usize,
    pub edges: Vec<(usize, usize)>,
}

impl CouplingMap {
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= n_qubits || *b >= n_qubits || a == b) {
            return Err(Error::InvalidParameter(format!("bad coupling edge ({a}, {b})")));
        }
        Ok(Self { n_qubits, edges })
    }

    /// The 7-qubit heavy-hex fragment `0-1, 1-2, 1-3, 3-5, 4-5, 5-6`.
    pub fn jakarta() -> Self {
        Self { n_qubits: 7, edges: vec![(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)] }
    }

    /// Fully connected map.
    pub fn all_to_all(n_qubits: usize) -> Self {
        let edges = (0..n_qubits).flat_map(|a| (a + 1..n_qubits).map(move |b| (a, b))).collect();
        Self { n_qubits, edges }
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b))
    }

    /// Neighbours of `q`, ascending.
    pub fn neighbours(&self, q: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges
            .iter()
            .filter_map(|&(x, y)| if x == q { Some(y) } else if y == q { Some(x) } else { None })
            .collect();
        set.into_iter().collect()
    }

    /// Breadth-first shortest path from `a` to `b` (inclusive), exploring
    /// lower-indexed neighbours first.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.n_qubits];
        let mut seen = vec![false; self.n_qubits];
        let mut queue = VecDeque::from([a]);
        seen[a] = true;
        while let Some(q) = queue.pop_front() {
            if q == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbours(q) {
                if !seen[n] {
                    seen[n] = true;
                    prev[n] = q;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    pub fn distance(&self, a: usize, b: usize) -> Option<usize> {
        self.shortest_path(a, b).map(|p| p.len() - 1)
    }
}

/// Native gate tally; directives are not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCount {
    pub single_qubit: usize,
    pub cx: usize,
}

pub fn count_gates(c: &Circuit) -> Result<GateCount> {
    let mut n = GateCount::default();
    for g in c.gates() {
        match g.kind() {
            k if k.is_directive() => {}
            GateKind::Cx => n.cx += 1,
            k if k.is_native() => n.single_qubit += 1,
            k => return Err(Error::NonNative(k.name().into())),
        }
    }
    Ok(n)
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI { r - 2.0 * PI } else { r }
}

fn push_rz(out: &mut Vec<Gate>, q: usize, a: f64) {
    let a = wrap_angle(a);
    if a.abs() > ANGLE_TOL {
        out.push(Gate::Rz(q, a));
    }
}

/// Native gates equal to the 2×2 unitary `u` up to global phase, via the
/// Z-Y-Z Euler angles `u ∝ RZ(φ)·RY(θ)·RZ(λ)`.
pub fn synthesize_single(u: &CMatrix<f64>, q: usize) -> Vec<Gate> {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let v = u.map(|z| z / det.sqrt());
    let theta = 2.0 * v[(1, 0)].norm().atan2(v[(0, 0)].norm());
    let sum = if v[(1, 1)].norm() > ANGLE_TOL { 2.0 * v[(1, 1)].arg() } else { 0.0 };
    let diff = if v[(1, 0)].norm() > ANGLE_TOL { 2.0 * v[(1, 0)].arg() } else { 0.0 };
    let (phi, lambda) = ((sum + diff) / 2.0, (sum - diff) / 2.0);
    let mut out = Vec::new();
    if theta.abs() < ANGLE_TOL {
        push_rz(&mut out, q, phi + lambda);
    } else if (theta - FRAC_PI_2).abs() < ANGLE_TOL {
        push_rz(&mut out, q, lambda - FRAC_PI_2);
        out.push(Gate::SX(q));
        push_rz(&mut out, q, phi + FRAC_PI_2);
    } else if (theta - PI).abs() < ANGLE_TOL {
        out.push(Gate::X(q));
        push_rz(&mut out, q, phi - lambda - PI);
    } else {
        push_rz(&mut out, q, lambda - PI);
        out.push(Gate::SX(q));
        push_rz(&mut out, q, PI - theta);
        out.push(Gate::SX(q));
        push_rz(&mut out, q, phi);
    }
    out
}

/// Rewrites `RY` through Euler synthesis and `CRY(θ)` as
/// `RY(θ/2)_t · CX · RY(-θ/2)_t · CX`, leaving other gates untouched.
pub fn decompose_native(c: &Circuit) -> Result<Circuit> {
    let mut out = c.clone_empty();
    for g in c.gates() {
        match *g {
            Gate::Ry(q, _) => out.extend(synthesize_single(&g.unitary().expect("unitary"), q))?,
            Gate::Cry(ctl, tgt, a) => {
                out.extend(synthesize_single(&Gate::Ry(tgt, a / 2.0).unitary().expect("unitary"), tgt))?;
                out.push(Gate::Cx(ctl, tgt))?;
                out.extend(synthesize_single(&Gate::Ry(tgt, -a / 2.0).unitary().expect("unitary"), tgt))?;
                out.push(Gate::Cx(ctl, tgt))?;
            }
            _ => out.push(*g)?,
        }
    }
    Ok(out)
}

/// Merges every maximal run of single-qubit gates on a wire into at most
/// five natives.
pub fn fuse_single_qubit(c: &Circuit) -> Result<Circuit> {
    let mut out = c.clone_empty();
    let mut pending: Vec<Option<CMatrix<f64>>> = vec![None; c.width()];
    let flush = |out: &mut Circuit, pending: &mut Vec<Option<CMatrix<f64>>>, q: usize| -> Result<()> {
        if let Some(u) = pending[q].take() {
            if !linalg::equal_up_to_phase(&u, &linalg::identity(2), 1e-12) {
                out.extend(synthesize_single(&u, q))?;
            }
        }
        Ok(())
    };
    for g in c.gates() {
        let qs = g.qubits();
        match g {
            Gate::X(q) | Gate::SX(q) | Gate::Rz(q, _) | Gate::Ry(q, _) | Gate::Id(q) => {
                let u = g.unitary::<f64>().expect("unitary");
                pending[*q] = Some(match pending[*q].take() {
                    Some(prev) => u * prev,
                    None => u,
                });
            }
            Gate::Barrier => {
                for q in 0..c.width() {
                    flush(&mut out, &mut pending, q)?;
                }
                out.push(*g)?;
            }
            _ => {
                for &q in &qs {
                    flush(&mut out, &mut pending, q)?;
                }
                out.push(*g)?;
            }
        }
    }
    for q in 0..c.width() {
        flush(&mut out, &mut pending, q)?;
    }
    Ok(out)
}

/// Removes pairs of identical adjacent CX gates (nothing in between on
/// either wire), repeatedly.
pub fn cancel_cx(c: &Circuit) -> Result<Circuit> {
    let mut kept: Vec<Option<Gate>> = Vec::new();
    let mut last: Vec<Vec<usize>> = vec![Vec::new(); c.width()];
    for g in c.gates() {
        if let Gate::Cx(a, b) = *g {
            if let (Some(&i), Some(&j)) = (last[a].last(), last[b].last()) {
                if i == j && kept[i] == Some(*g) {
                    kept[i] = None;
                    last[a].pop();
                    last[b].pop();
                    continue;
                }
            }
        }
        let wires = if matches!(g, Gate::Barrier) { (0..c.width()).collect() } else { g.qubits() };
        for w in wires {
            last[w].push(kept.len());
        }
        kept.push(Some(*g));
    }
    let mut out = c.clone_empty();
    out.extend(kept.into_iter().flatten())?;
    Ok(out)
}

/// Alternates single-qubit fusion and CX cancellation until the gate count
/// stops shrinking.
pub fn optimize(c: &Circuit) -> Result<Circuit> {
    let mut cur = fuse_single_qubit(c)?;
    loop {
        let next = fuse_single_qubit(&cancel_cx(&cur)?)?;
        if next.gates().len() >= cur.gates().len() {
            return Ok(cur);
        }
        cur = next;
    }
}

/// Places logical qubits on the device per `layout` (logical → physical) and
/// inserts SWAPs (3 CX each) so that every CX acts on a coupled pair. The
/// first operand walks along the shortest path toward the second.
pub fn route(c: &Circuit, map: &CouplingMap, layout: &[usize]) -> Result<Circuit> {
    if c.placement().is_some() {
        return Err(Error::InvalidGate("circuit is already routed".into()));
    }
    if c.width() > map.n_qubits {
        return Err(Error::TooWide { width: c.width(), limit: map.n_qubits });
    }
    if layout.len() != c.width() {
        return Err(Error::WidthMismatch(layout.len(), c.width()));
    }
    let mut seen = BTreeSet::new();
    if let Some(&p) = layout.iter().find(|&&p| p >= map.n_qubits || !seen.insert(p)) {
        return Err(Error::InvalidParameter(format!("invalid initial layout entry {p}")));
    }
    let mut l2p = layout.to_vec();
    let mut p2l: Vec<Option<usize>> = vec![None; map.n_qubits];
    for (l, &p) in l2p.iter().enumerate() {
        p2l[p] = Some(l);
    }
    let mut gates = Vec::new();
    let mut at_barriers = Vec::new();
    for g in c.gates() {
        match *g {
            Gate::Barrier => {
                at_barriers.push(l2p.clone());
                gates.push(Gate::Barrier);
            }
            Gate::Cx(a, b) => {
                let (pa, pb) = (l2p[a], l2p[b]);
                if !map.adjacent(pa, pb) {
                    let path = map
                        .shortest_path(pa, pb)
                        .ok_or_else(|| Error::InvalidParameter(format!("device qubits {pa} and {pb} are disconnected")))?;
                    for w in path[..path.len() - 1].windows(2) {
                        let (x, y) = (w[0], w[1]);
                        gates.extend([Gate::Cx(x, y), Gate::Cx(y, x), Gate::Cx(x, y)]);
                        let (lx, ly) = (p2l[x], p2l[y]);
                        p2l[x] = ly;
                        p2l[y] = lx;
                        if let Some(l) = lx {
                            l2p[l] = y;
                        }
                        if let Some(l) = ly {
                            l2p[l] = x;
                        }
                    }
                }
                gates.push(Gate::Cx(l2p[a], l2p[b]));
            }
            _ => gates.push(g.remap(|q| l2p[q])),
        }
    }
    let placement = Placement { at_barriers, final_layout: l2p };
    Circuit::routed(map.n_qubits, c.roles().to_vec(), (0..map.n_qubits).collect(), gates, placement)
}

/// Drops device wires that carry no logical qubit and no gate, renumbering
/// the rest in ascending device order.
pub fn compact(c: &Circuit) -> Result<Circuit> {
    let Some(p) = c.placement() else { return Ok(c.clone()) };
    let mut used = BTreeSet::new();
    for g in c.gates() {
        used.extend(g.qubits());
    }
    for l in p.at_barriers.iter().chain([&p.final_layout]) {
        used.extend(l.iter().copied());
    }
    let kept: Vec<usize> = used.into_iter().collect();
    let mut index = vec![usize::MAX; c.width()];
    for (new, &old) in kept.iter().enumerate() {
        index[old] = new;
    }
    let remap = |v: &Vec<usize>| v.iter().map(|&q| index[q]).collect::<Vec<_>>();
    let placement = Placement {
        at_barriers: p.at_barriers.iter().map(remap).collect(),
        final_layout: remap(&p.final_layout),
    };
    let device = kept.iter().map(|&w| c.device()[w]).collect();
    let gates = c.gates().iter().map(|g| g.remap(|q| index[q])).collect::<Vec<_>>();
    Circuit::routed(kept.len(), c.roles().to_vec(), device, gates, placement)
}

/// Initial placement on `map`: hand-picked positions on the 7-qubit
/// heavy-hex map keeping every spin next to its aux and the oscillator,
/// otherwise breadth-first order from the highest-degree qubit.
pub fn default_layout(layout: &Layout, map: &CouplingMap) -> Result<Vec<usize>> {
    let width = layout.width();
    if width > map.n_qubits {
        return Err(Error::TooWide { width, limit: map.n_qubits });
    }
    if *map == CouplingMap::jakarta() {
        let fixed: Option<&[usize]> = match (layout.n_spins, layout.boson_qubits) {
            (1, 1) => Some(&[3, 1, 0]),
            (1, 2) => Some(&[3, 2, 1, 0]),
            (1, 3) => Some(&[3, 2, 5, 1, 0]),
            (2, 1) => Some(&[0, 1, 3, 5, 6]),
            (2, 2) => Some(&[0, 1, 3, 2, 5, 6]),
            (2, 3) => Some(&[0, 1, 3, 2, 4, 5, 6]),
            _ => None,
        };
        if let Some(f) = fixed {
            return Ok(f.to_vec());
        }
    }
    let start = (0..map.n_qubits).max_by_key(|&q| (map.neighbours(q).len(), std::cmp::Reverse(q))).unwrap_or(0);
    let mut order = Vec::new();
    let mut seen = vec![false; map.n_qubits];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(q) = queue.pop_front() {
        order.push(q);
        for n in map.neighbours(q) {
            if !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    if order.len() < width {
        return Err(Error::InvalidParameter("coupling map is disconnected".into()));
    }
    order.truncate(width);
    Ok(order)
}

/// Decomposition, optimization, routing, a second optimization pass over
/// the inserted SWAPs, and compaction.
pub fn transpile(c: &Circuit, map: &CouplingMap, layout: &[usize]) -> Result<Circuit> {
    let native = optimize(&decompose_native(c)?)?;
    compact(&optimize(&route(&native, map, layout)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use proptest::prelude::*;

    fn one_qubit(gates: &[Gate]) -> CMatrix<f64> {
        let mut c = Circuit::new(vec![Role::Idle]);
        c.extend(gates.iter().copied()).unwrap();
        c.unitary().unwrap()
    }

    #[test]
    fn ry_quarter_turn() {
        let u = Gate::Ry(0, FRAC_PI_2).unitary::<f64>().unwrap();
        let g = synthesize_single(&u, 0);
        assert!(g.iter().all(|g| g.kind().is_native()));
        assert!(linalg::equal_up_to_phase(&one_qubit(&g), &u, 1e-12));
    }

    #[test]
    fn natives_stay_compact() {
        assert_eq!(synthesize_single(&Gate::X(0).unitary().unwrap(), 0), vec![Gate::X(0)]);
        assert_eq!(synthesize_single(&Gate::SX(0).unitary().unwrap(), 0), vec![Gate::SX(0)]);
        assert_eq!(synthesize_single(&Gate::Rz(0, 0.3).unitary().unwrap(), 0), vec![Gate::Rz(0, 0.3)]);
        assert!(synthesize_single(&linalg::identity(2), 0).is_empty());
    }

    proptest! {
        #[test]
        fn euler_synthesis_is_exact(a in -4.0..4.0f64, b in -4.0..4.0f64, t in 0.0..PI) {
            let u = Gate::Rz(0, a).unitary::<f64>().unwrap() * Gate::Ry(0, t).unitary::<f64>().unwrap() * Gate::Rz(0, b).unitary::<f64>().unwrap();
            let g = synthesize_single(&u, 0);
            prop_assert!(g.len() <= 5);
            prop_assert!(linalg::equal_up_to_phase(&one_qubit(&g), &u, 1e-10));
        }
    }

    #[test]
    fn special_euler_branches() {
        for t in [0.0, FRAC_PI_2, PI] {
            for (a, b) in [(0.4, -1.1), (2.0, 0.3)] {
                let u = Gate::Rz(0, a).unitary::<f64>().unwrap() * Gate::Ry(0, t).unitary::<f64>().unwrap() * Gate::Rz(0, b).unitary::<f64>().unwrap();
                assert!(linalg::equal_up_to_phase(&one_qubit(&synthesize_single(&u, 0)), &u, 1e-10));
            }
        }
    }

    fn two_qubit(c: &Circuit) -> CMatrix<f64> {
        c.unitary().unwrap()
    }

    #[test]
    fn cry_decomposition() {
        let mut c = Circuit::new(vec![Role::Spin(0), Role::Aux(0)]);
        c.push(Gate::Cry(0, 1, 0.87)).unwrap();
        let d = decompose_native(&c).unwrap();
        assert_eq!(count_gates(&d).unwrap().cx, 2);
        assert!(d.gates().iter().all(|g| g.kind().is_native()));
        assert!(linalg::equal_up_to_phase(&two_qubit(&d), &two_qubit(&c), 1e-12));
    }

    #[test]
    fn fusion_preserves_unitary() {
        let mut c = Circuit::new(vec![Role::Idle; 2]);
        c.extend([Gate::Ry(0, 0.3), Gate::Rz(0, 1.1), Gate::X(1), Gate::Cx(0, 1), Gate::SX(1), Gate::Ry(1, -0.4), Gate::Rz(0, 0.2)]).unwrap();
        let f = fuse_single_qubit(&decompose_native(&c).unwrap()).unwrap();
        assert!(f.gates().iter().all(|g| g.kind().is_native()));
        assert!(linalg::equal_up_to_phase(&two_qubit(&f), &two_qubit(&c), 1e-12));
    }

    #[test]
    fn counting() {
        let c = Circuit::new(vec![Role::Idle; 2]);
        assert_eq!(count_gates(&c).unwrap(), GateCount::default());
        let mut c = Circuit::new(vec![Role::Idle; 2]);
        c.extend([Gate::X(0), Gate::Cx(0, 1), Gate::Barrier, Gate::Measure(0)]).unwrap();
        assert_eq!(count_gates(&c).unwrap(), GateCount { single_qubit: 1, cx: 1 });
        c.push(Gate::Ry(0, 0.1)).unwrap();
        assert!(matches!(count_gates(&c), Err(Error::NonNative(_))));
    }

    #[test]
    fn paths_on_device() {
        let m = CouplingMap::jakarta();
        assert_eq!(m.shortest_path(0, 6).unwrap(), vec![0, 1, 3, 5, 6]);
        assert_eq!(m.distance(2, 3), Some(2));
        assert_eq!(m.neighbours(1), vec![0, 2, 3]);
    }

    #[test]
    fn distance_two_cx_costs_one_swap() {
        let mut c = Circuit::new(vec![Role::Idle; 7]);
        c.push(Gate::Cx(0, 2)).unwrap();
        let r = route(&c, &CouplingMap::jakarta(), &(0..7).collect::<Vec<_>>()).unwrap();
        assert_eq!(count_gates(&r).unwrap().cx, 4);
        assert!(r.gates().iter().all(|g| match g {
            Gate::Cx(a, b) => CouplingMap::jakarta().adjacent(*a, *b),
            _ => true,
        }));
        assert_eq!(r.final_layout(), vec![1, 0, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn conforming_circuit_unchanged() {
        let mut c = Circuit::new(vec![Role::Idle; 3]);
        c.extend([Gate::X(0), Gate::Cx(0, 1), Gate::Cx(1, 2), Gate::Barrier, Gate::Measure(2)]).unwrap();
        let r = route(&c, &CouplingMap::jakarta(), &[0, 1, 2]).unwrap();
        assert_eq!(r.gates(), c.gates());
        assert!(route(&Circuit::new(vec![Role::Idle; 8]), &CouplingMap::jakarta(), &[0; 8]).is_err());
    }

    #[test]
    fn compaction_drops_idle_wires() {
        let mut c = Circuit::new(vec![Role::Idle; 2]);
        c.push(Gate::Cx(0, 1)).unwrap();
        let r = compact(&route(&c, &CouplingMap::jakarta(), &[3, 5]).unwrap()).unwrap();
        assert_eq!(r.width(), 2);
        assert_eq!(r.device(), &[3, 5]);
        assert_eq!(r.gates(), &[Gate::Cx(0, 1)]);
    }

    #[test]
    fn default_layouts_fit_device() {
        let m = CouplingMap::jakarta();
        for (s, b) in [(1, 2), (1, 3), (2, 2), (2, 3), (3, 1)] {
            let l = Layout::new(s, b);
            let p = default_layout(&l, &m).unwrap();
            assert_eq!(p.len(), l.width());
            let set: BTreeSet<_> = p.iter().collect();
            assert_eq!(set.len(), p.len());
        }
    }
}
