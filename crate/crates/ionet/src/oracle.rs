//! Brute-force reference checkers: explicit-state BFS reachability, naive
//! augmenting-path max flow, exhaustive min cut and near-miss enumeration,
//! and truth-table SAT. Deliberately simple; every answer here is ground
//! truth for the differential tests of the cleverer modules.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::history::AcceleratedSequence;
use crate::maxflow::{Capacity, FlowGraph};
use crate::nearmiss::NearMissWitness;
use crate::net::{IONet, Marking, PlaceId, TransitionId};
use crate::nonforgetting::SatCircuit;

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReachOutcome {
    Reachable(AcceleratedSequence),
    Unreachable,
    BudgetExceeded,
}

/// Exhaustive breadth-first search over single firings. `Unreachable` is
/// only reported when the full reachable set fits the budget; returned
/// sequences have a minimal number of firings.
pub fn bfs_reach(net: &IONet, from: &Marking, to: &Marking, budget: usize) -> ReachOutcome {
    if from == to {
        return ReachOutcome::Reachable(AcceleratedSequence::empty());
    }
    if from.size() != to.size() {
        return ReachOutcome::Unreachable;
    }
    let mut parents: HashMap<Marking, (Marking, TransitionId)> = HashMap::new();
    let mut queue = VecDeque::from([from.clone()]);
    let mut explored = 1usize;
    let mut seen: HashMap<Marking, ()> = HashMap::new();
    seen.insert(from.clone(), ());
    while let Some(m) = queue.pop_front() {
        for t in 0..net.transitions().len() {
            let t = TransitionId(t);
            let next = match net.fire(&m, t) {
                Ok(next) => next,
                Err(_) => continue,
            };
            if seen.contains_key(&next) {
                continue;
            }
            seen.insert(next.clone(), ());
            parents.insert(next.clone(), (m.clone(), t));
            if &next == to {
                return ReachOutcome::Reachable(extract_sequence(&parents, from, to));
            }
            explored += 1;
            if explored > budget {
                return ReachOutcome::BudgetExceeded;
            }
            queue.push_back(next);
        }
    }
    ReachOutcome::Unreachable
}

fn extract_sequence(
    parents: &HashMap<Marking, (Marking, TransitionId)>,
    from: &Marking,
    to: &Marking,
) -> AcceleratedSequence {
    let mut firings = Vec::new();
    let mut cur = to.clone();
    while &cur != from {
        let (prev, t) = parents[&cur].clone();
        firings.push(t);
        cur = prev;
    }
    firings.reverse();
    let mut seq = AcceleratedSequence::empty();
    for t in firings {
        seq.push(t, 1);
    }
    seq
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for the brute-force oracle")]
    TooLarge,
}

/// Max-flow value by repeated BFS augmenting paths on a dense residual
/// matrix; independent of the Dinitz implementation.
pub fn naive_max_flow(g: &FlowGraph) -> Result<u64, OracleError> {
    let n = g.vertex_count();
    let mut residual: Vec<Vec<Option<u64>>> = vec![vec![Some(0); n]; n];
    for arc in g.arcs() {
        residual[arc.from][arc.to] = match arc.capacity {
            Capacity::Finite(c) => Some(c),
            Capacity::Infinite => None,
        };
    }
    let mut value = 0u64;
    loop {
        // BFS for any path with positive residual.
        let mut prev: Vec<Option<usize>> = vec![None; n];
        prev[g.inlet()] = Some(g.inlet());
        let mut queue = VecDeque::from([g.inlet()]);
        while let Some(v) = queue.pop_front() {
            for w in 0..n {
                if prev[w].is_none() && residual[v][w] != Some(0) {
                    prev[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        if prev[g.outlet()].is_none() {
            return Ok(value);
        }
        let mut bottleneck: Option<u64> = None;
        let mut v = g.outlet();
        while v != g.inlet() {
            let u = prev[v].unwrap();
            bottleneck = match (bottleneck, residual[u][v]) {
                (b, None) => b,
                (None, Some(r)) => Some(r),
                (Some(b), Some(r)) => Some(b.min(r)),
            };
            v = u;
        }
        let push = match bottleneck {
            // An all-infinite path would make the flow unbounded; the graphs
            // this artifact constructs always have finite inlet arcs.
            None => return Err(OracleError::TooLarge),
            Some(p) => p,
        };
        let mut v = g.outlet();
        while v != g.inlet() {
            let u = prev[v].unwrap();
            if let Some(r) = residual[u][v].as_mut() {
                *r -= push;
            }
            if let Some(r) = residual[v][u].as_mut() {
                *r += push;
            }
            v = u;
        }
        value += push;
    }
}

/// Minimum cut capacity by enumerating every split of the middle vertices.
pub fn naive_min_cut(g: &FlowGraph) -> Result<Capacity, OracleError> {
    let n = g.vertex_count();
    let middles: Vec<usize> = (0..n)
        .filter(|&v| v != g.inlet() && v != g.outlet())
        .collect();
    if middles.len() > 24 {
        return Err(OracleError::TooLarge);
    }
    let mut best = Capacity::Infinite;
    for mask in 0u64..(1 << middles.len()) {
        let mut in_side = vec![false; n];
        in_side[g.inlet()] = true;
        for (bit, &v) in middles.iter().enumerate() {
            in_side[v] = mask >> bit & 1 == 1;
        }
        let mut cap = Capacity::Finite(0);
        for arc in g.arcs() {
            if in_side[arc.from] && !in_side[arc.to] {
                cap = cap
                    .checked_add(arc.capacity)
                    .map_err(|_| OracleError::TooLarge)?;
            }
        }
        best = best.min(cap);
    }
    Ok(best)
}

/// Near-miss search by enumerating every pair of place subsets.
pub fn exhaustive_near_miss(
    m: &Marking,
    m2: &Marking,
) -> Result<Option<NearMissWitness>, OracleError> {
    let n = m.len();
    if n != m2.len() || n > 16 {
        return Err(OracleError::TooLarge);
    }
    let bound = (n as u64).pow(3);
    let subset = |marking: &Marking, mask: u64| -> u64 {
        (0..n)
            .filter(|&p| mask >> p & 1 == 1)
            .map(|p| marking.get(PlaceId(p)))
            .sum()
    };
    for x_mask in 0u64..(1 << n) {
        let mx = subset(m, x_mask);
        for y_mask in 0u64..(1 << n) {
            let my = subset(m2, y_mask);
            let gap = mx.abs_diff(my);
            if gap > 0 && gap <= bound {
                let x = (0..n).filter(|&p| x_mask >> p & 1 == 1).map(PlaceId).collect();
                let y = (0..n).filter(|&p| y_mask >> p & 1 == 1).map(PlaceId).collect();
                return Ok(Some(NearMissWitness {
                    x,
                    y,
                    delta: mx as i128 - my as i128,
                }));
            }
        }
    }
    Ok(None)
}

/// Exhaustive evaluation of a NAND circuit; returns a satisfying assignment
/// when one exists.
pub fn truth_table_sat(c: &SatCircuit) -> Result<Option<Vec<bool>>, OracleError> {
    if c.inputs > 20 {
        return Err(OracleError::TooLarge);
    }
    for mask in 0u64..(1 << c.inputs) {
        let assignment: Vec<bool> = (0..c.inputs).map(|i| mask >> i & 1 == 1).collect();
        if c.evaluate(&assignment) {
            return Ok(Some(assignment));
        }
    }
    Ok(None)
}
