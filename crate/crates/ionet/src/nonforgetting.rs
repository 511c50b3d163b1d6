//! Certificate verification and bounded search for reachability in
//! non-forgetting IO nets, where token moves stay enabled once enabled.
//!
//! A run decomposes into at most |P|^2 phases with a fixed enabled-move
//! set; within a phase, reachability is a max-flow question on a small
//! graph, and a full-value flow converts back into a firing sequence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::history::AcceleratedSequence;
use crate::maxflow::{Capacity, Flow, FlowError, FlowGraph};
use crate::net::{IONet, Marking, PlaceId, TokenMove, TransitionId};

/// The markings of a run at which new token moves become enabled, endpoints
/// included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseCertificate {
    pub markings: Vec<Marking>,
}

/// A SAT instance as a circuit of binary NAND gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatCircuit {
    pub inputs: usize,
    /// Gate operands refer to inputs or strictly earlier gates.
    pub gates: Vec<(Operand, Operand)>,
    pub output: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Input(usize),
    Gate(usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("gate {0} refers to operand {1:?} that is not an input or earlier gate")]
    BadOperand(usize, Operand),
    #[error("output gate {0} does not exist")]
    BadOutput(usize),
    #[error("circuit has no gates")]
    NoGates,
}

impl SatCircuit {
    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.gates.is_empty() {
            return Err(CircuitError::NoGates);
        }
        for (j, &(a, b)) in self.gates.iter().enumerate() {
            for op in [a, b] {
                let ok = match op {
                    Operand::Input(i) => i < self.inputs,
                    Operand::Gate(g) => g < j,
                };
                if !ok {
                    return Err(CircuitError::BadOperand(j, op));
                }
            }
        }
        if self.output >= self.gates.len() {
            return Err(CircuitError::BadOutput(self.output));
        }
        Ok(())
    }

    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        let mut values = Vec::with_capacity(self.gates.len());
        for &(a, b) in &self.gates {
            let fetch = |op: Operand| match op {
                Operand::Input(i) => assignment[i],
                Operand::Gate(g) => values[g],
            };
            values.push(!(fetch(a) && fetch(b)));
        }
        values[self.output]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhaseError {
    #[error("marking sizes differ: {0} vs {1}")]
    SizeMismatch(u64, u64),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Flow graph of a single phase: one vertex per place between inlet and
/// outlet, an infinite arc per enabled token move. Tokens staying put flow
/// straight from the inlet arc to the outlet arc, so identity moves need no
/// arc.
pub fn phase_flow_graph(
    net: &IONet,
    moves: &BTreeSet<TokenMove>,
    from: &Marking,
    to: &Marking,
) -> Result<FlowGraph, PhaseError> {
    if from.size() != to.size() {
        return Err(PhaseError::SizeMismatch(from.size(), to.size()));
    }
    let n = net.place_count();
    let mut g = FlowGraph::new(n + 2, 0, n + 1);
    g.set_label(0, "i");
    g.set_label(n + 1, "o");
    for p in net.places() {
        g.set_label(1 + p.0, net.place_name(p));
        g.add_arc(0, 1 + p.0, Capacity::Finite(from.get(p)))?;
        g.add_arc(1 + p.0, n + 1, Capacity::Finite(to.get(p)))?;
    }
    for mv in moves {
        if mv.from != mv.to {
            g.add_arc(1 + mv.from.0, 1 + mv.to.0, Capacity::Infinite)?;
        }
    }
    Ok(g)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("reconstruction stuck at marking {0:?} with moves remaining")]
    Stuck(Vec<u64>),
}

/// Converts a full-value phase flow into a firing sequence: repeatedly fire
/// a transition for a pending token move whose source still has surplus
/// tokens. Preference goes to the largest surplus, ties to the lowest place
/// index; a move whose transitions are all disabled at the current marking
/// is skipped in favor of the next admissible one.
pub fn flow_to_firing_sequence(
    net: &IONet,
    moves: &BTreeSet<TokenMove>,
    from: &Marking,
    to: &Marking,
    flow: &Flow,
) -> Result<AcceleratedSequence, ReconstructError> {
    let g = phase_flow_graph(net, moves, from, to).expect("flow was computed on this graph");
    let mut pending: BTreeMap<TokenMove, u64> = BTreeMap::new();
    for mv in moves {
        if mv.from == mv.to {
            continue;
        }
        let f = flow.on(&g, 1 + mv.from.0, 1 + mv.to.0);
        if f > 0 {
            pending.insert(*mv, f);
        }
    }
    let mut m = from.clone();
    let mut seq = AcceleratedSequence::empty();
    while !pending.is_empty() {
        let mut candidates: Vec<TokenMove> = pending
            .keys()
            .filter(|mv| m.get(mv.from) > to.get(mv.from))
            .copied()
            .collect();
        candidates.sort_by_key(|mv| {
            (
                std::cmp::Reverse(m.get(mv.from) - to.get(mv.from)),
                mv.from,
                mv.to,
            )
        });
        let mut fired = false;
        for mv in candidates {
            let enabled = net
                .transitions()
                .iter()
                .enumerate()
                .find(|(i, tr)| {
                    tr.source == mv.from
                        && tr.destination == mv.to
                        && net.is_enabled(&m, TransitionId(*i))
                })
                .map(|(i, _)| TransitionId(i));
            if let Some(t) = enabled {
                m = net.fire(&m, t).expect("transition checked enabled");
                seq.push(t, 1);
                match pending.get_mut(&mv) {
                    Some(count) if *count > 1 => *count -= 1,
                    _ => {
                        pending.remove(&mv);
                    }
                }
                fired = true;
                break;
            }
        }
        if !fired {
            return Err(ReconstructError::Stuck(m.counts().to_vec()));
        }
    }
    Ok(seq)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertError {
    #[error("the net is not non-forgetting")]
    NotNonForgetting,
    #[error("certificate is empty")]
    EmptyCertificate,
    #[error("certificate marking {0} has a different size or place count")]
    SizeMismatch(usize),
    #[error("phase {phase} flow value {value} is below the token count {expected}")]
    PhaseFlowDeficit {
        phase: usize,
        value: u64,
        expected: u64,
    },
    #[error("certificate marking {0} enables no new token move")]
    NoNewMove(usize),
    #[error("phase {phase}: {source}")]
    Reconstruction {
        phase: usize,
        source: ReconstructError,
    },
}

/// Verifies a phase certificate and returns the reconstructed accelerated
/// firing sequence from the first to the last marking.
pub fn verify_certificate(
    net: &IONet,
    cert: &PhaseCertificate,
) -> Result<AcceleratedSequence, CertError> {
    if net.is_non_forgetting().is_err() {
        return Err(CertError::NotNonForgetting);
    }
    let first = cert.markings.first().ok_or(CertError::EmptyCertificate)?;
    let size = first.size();
    for (i, m) in cert.markings.iter().enumerate() {
        if m.len() != net.place_count() || m.size() != size {
            return Err(CertError::SizeMismatch(i));
        }
    }
    let mut moves: BTreeSet<TokenMove> = BTreeSet::new();
    let mut seq = AcceleratedSequence::empty();
    for i in 0..cert.markings.len() - 1 {
        let newly = net.enabled_token_moves(&cert.markings[i]);
        let before = moves.len();
        moves.extend(newly);
        if i >= 1 && moves.len() == before {
            return Err(CertError::NoNewMove(i));
        }
        let from = &cert.markings[i];
        let to = &cert.markings[i + 1];
        let g = phase_flow_graph(net, &moves, from, to).map_err(|_| CertError::SizeMismatch(i))?;
        let flow = g.max_flow().expect("phase graphs have finite inlet arcs");
        if flow.value < size {
            return Err(CertError::PhaseFlowDeficit {
                phase: i,
                value: flow.value,
                expected: size,
            });
        }
        let phase_seq = flow_to_firing_sequence(net, &moves, from, to, &flow)
            .map_err(|source| CertError::Reconstruction { phase: i, source })?;
        seq.extend(&phase_seq);
    }
    Ok(seq)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("the net is not non-forgetting")]
    NotNonForgetting,
    #[error("marking sizes differ")]
    SizeMismatch,
    #[error("search budget exhausted after exploring {explored} markings")]
    BudgetExceeded { explored: usize },
}

/// Bounded depth-first search for an acceptable phase certificate.
///
/// Sound and complete while the per-phase frontier fits the budget: phases
/// explore single token moves breadth-first, and markings that enable new
/// moves open new phases. `Ok(None)` means the query is genuinely
/// unreachable; budget exhaustion is a distinct, inconclusive outcome.
pub fn find_certificate(
    net: &IONet,
    from: &Marking,
    to: &Marking,
    budget: usize,
) -> Result<Option<PhaseCertificate>, SearchError> {
    if net.is_non_forgetting().is_err() {
        return Err(SearchError::NotNonForgetting);
    }
    if from.size() != to.size() {
        return Err(SearchError::SizeMismatch);
    }
    if from == to {
        return Ok(Some(PhaseCertificate {
            markings: vec![from.clone()],
        }));
    }
    let mut search = Search {
        net,
        to: to.clone(),
        budget,
        explored: 0,
        memo: BTreeSet::new(),
    };
    let moves = net.enabled_token_moves(from);
    match search.phase(&moves, from, &mut vec![from.clone()]) {
        Ok(Some(markings)) => Ok(Some(PhaseCertificate { markings })),
        Ok(None) => Ok(None),
        Err(()) => Err(SearchError::BudgetExceeded {
            explored: search.explored,
        }),
    }
}

struct Search<'n> {
    net: &'n IONet,
    to: Marking,
    budget: usize,
    explored: usize,
    memo: BTreeSet<(Vec<TokenMove>, Marking)>,
}

impl Search<'_> {
    /// Explores one phase; Err(()) signals budget exhaustion.
    fn phase(
        &mut self,
        moves: &BTreeSet<TokenMove>,
        start: &Marking,
        path: &mut Vec<Marking>,
    ) -> Result<Option<Vec<Marking>>, ()> {
        let key = (moves.iter().copied().collect::<Vec<_>>(), start.clone());
        if !self.memo.insert(key) {
            return Ok(None);
        }
        let mut visited: BTreeSet<Marking> = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start.clone()]);
        let mut boundaries: BTreeSet<Marking> = BTreeSet::new();
        while let Some(m) = queue.pop_front() {
            // Successors come from real firings, not abstract token moves: a
            // move can be enabled while its only observer is the would-be
            // mover itself (a self-observing transition and one token), and
            // abstract moves would walk through such markings. Every
            // fireable transition's move is in the phase set already.
            for t in 0..self.net.transitions().len() {
                let t = TransitionId(t);
                let tr = self.net.transition(t);
                if tr.source == tr.destination {
                    continue;
                }
                let next = match self.net.fire(&m, t) {
                    Ok(next) => next,
                    Err(_) => continue,
                };
                if !visited.insert(next.clone()) {
                    continue;
                }
                self.explored += 1;
                if self.explored > self.budget {
                    return Err(());
                }
                if next == self.to {
                    let mut markings = path.clone();
                    markings.push(next);
                    return Ok(Some(markings));
                }
                let enabled = self.net.enabled_token_moves(&next);
                if enabled.iter().any(|e| !moves.contains(e)) {
                    // New moves open a later phase; within this phase the
                    // marking is still a dead end for expansion.
                    boundaries.insert(next);
                } else {
                    queue.push_back(next);
                }
            }
        }
        for boundary in boundaries {
            let mut wider = moves.clone();
            wider.extend(self.net.enabled_token_moves(&boundary));
            path.push(boundary.clone());
            let found = self.phase(&wider, &boundary, path)?;
            if found.is_some() {
                return Ok(found);
            }
            path.pop();
        }
        Ok(None)
    }
}

/// Encodes a NAND-circuit SAT instance as reachability in a non-forgetting
/// IO net: tokens pick input values and propagate partial knowledge through
/// the gates; once the output gate's place for value 1 is marked, every
/// token may move there.
pub fn sat_to_net(c: &SatCircuit) -> Result<(IONet, Marking, Marking), CircuitError> {
    c.validate()?;
    let mut names = Vec::new();
    let input_base = |i: usize| 3 * i;
    for i in 0..c.inputs {
        names.push(format!("x{i}_b"));
        names.push(format!("x{i}_0"));
        names.push(format!("x{i}_1"));
    }
    let gate_base = |j: usize| 3 * c.inputs + 5 * j;
    for j in 0..c.gates.len() {
        names.push(format!("n{j}_bb"));
        names.push(format!("n{j}_b1"));
        names.push(format!("n{j}_1b"));
        names.push(format!("n{j}_0"));
        names.push(format!("n{j}_1"));
    }
    let place_count = names.len();
    let mut net = IONet::new(names).expect("generated names are unique");
    let val = |op: Operand, v: bool| -> PlaceId {
        let bit = v as usize;
        match op {
            Operand::Input(i) => PlaceId(input_base(i) + 1 + bit),
            Operand::Gate(g) => PlaceId(gate_base(g) + 3 + bit),
        }
    };
    for i in 0..c.inputs {
        let b = PlaceId(input_base(i));
        net.add_transition(format!("x{i}_pick0"), b, PlaceId(b.0 + 1), None)
            .unwrap();
        net.add_transition(format!("x{i}_pick1"), b, PlaceId(b.0 + 2), None)
            .unwrap();
    }
    for (j, &(a, b)) in c.gates.iter().enumerate() {
        let bb = PlaceId(gate_base(j));
        let b1 = PlaceId(gate_base(j) + 1);
        let one_b = PlaceId(gate_base(j) + 2);
        let zero = PlaceId(gate_base(j) + 3);
        let one = PlaceId(gate_base(j) + 4);
        let mut k = 0usize;
        let mut add = |net: &mut IONet, src: PlaceId, dst: PlaceId, obs: PlaceId| {
            // Equal operands can propose the same transition twice.
            let exists = net.transitions().iter().any(|t| {
                t.source == src && t.destination == dst && t.observed == Some(obs)
            });
            if !exists {
                net.add_transition(format!("n{j}_eval{k}"), src, dst, Some(obs))
                    .unwrap();
            }
            k += 1;
        };
        add(&mut net, bb, one_b, val(a, true));
        add(&mut net, bb, b1, val(b, true));
        add(&mut net, bb, one, val(a, false));
        add(&mut net, bb, one, val(b, false));
        add(&mut net, one_b, zero, val(b, true));
        add(&mut net, one_b, one, val(b, false));
        add(&mut net, b1, zero, val(a, true));
        add(&mut net, b1, one, val(a, false));
    }
    // Collapse rules: once the output's 1-place is marked, any existing move
    // may fire observing it, and every token may come home.
    let out = PlaceId(gate_base(c.output) + 4);
    let pairs: BTreeSet<(PlaceId, PlaceId)> = net
        .transitions()
        .iter()
        .map(|t| (t.source, t.destination))
        .collect();
    let mut k = 0usize;
    for (src, dst) in pairs {
        let exists = net
            .transitions()
            .iter()
            .any(|t| t.source == src && t.destination == dst && t.observed == Some(out));
        if !exists {
            net.add_transition(format!("final{k}"), src, dst, Some(out))
                .unwrap();
            k += 1;
        }
    }
    for p in 0..place_count {
        let p = PlaceId(p);
        if p == out {
            continue;
        }
        let exists = net
            .transitions()
            .iter()
            .any(|t| t.source == p && t.destination == out && t.observed == Some(out));
        if !exists {
            net.add_transition(format!("final{k}"), p, out, Some(out))
                .unwrap();
            k += 1;
        }
    }
    let mut initial = Marking::zero(place_count);
    for i in 0..c.inputs {
        initial.set(PlaceId(input_base(i)), 1);
    }
    for j in 0..c.gates.len() {
        initial.set(PlaceId(gate_base(j)), 1);
    }
    let mut target = Marking::zero(place_count);
    target.set(out, (c.inputs + c.gates.len()) as u64);
    Ok((net, initial, target))
}
