//! Capacitated flow graphs with a distinguished inlet and outlet, Dinitz
//! max-flow, min-cut extraction, and the capacity shift operation used by
//! both reachability algorithms.
//!
//! Capacities are checked 64-bit integers or the symbolic value Infinite;
//! iteration order is fixed (ascending vertex and insertion order) so equal
//! inputs always produce equal flows and cuts.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// A nonnegative arc capacity, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(u64),
    Infinite,
}

impl Capacity {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Capacity::Infinite)
    }

    pub fn checked_add(self, other: Capacity) -> Result<Capacity, FlowError> {
        match (self, other) {
            (Capacity::Infinite, _) | (_, Capacity::Infinite) => Ok(Capacity::Infinite),
            (Capacity::Finite(a), Capacity::Finite(b)) => a
                .checked_add(b)
                .map(Capacity::Finite)
                .ok_or(FlowError::Overflow),
        }
    }
}

impl PartialOrd for Capacity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Capacity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Capacity::Infinite, Capacity::Infinite) => std::cmp::Ordering::Equal,
            (Capacity::Infinite, _) => std::cmp::Ordering::Greater,
            (_, Capacity::Infinite) => std::cmp::Ordering::Less,
            (Capacity::Finite(a), Capacity::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(v) => write!(f, "{v}"),
            Capacity::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: Capacity,
}

/// A flow graph: vertices 0..n with a distinguished inlet and outlet, at most
/// one arc per ordered vertex pair, no self-loops, no arcs into the inlet or
/// out of the outlet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowGraph {
    vertex_count: usize,
    inlet: usize,
    outlet: usize,
    arcs: Vec<Arc>,
    index: HashMap<(usize, usize), usize>,
    labels: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("vertex {0} out of range")]
    BadVertex(usize),
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate arc ({0}, {1})")]
    DuplicateArc(usize, usize),
    #[error("arc into the inlet or out of the outlet: ({0}, {1})")]
    BadEndpoint(usize, usize),
    #[error("flow value is unbounded: an inlet-outlet path has no finite arc")]
    UnboundedFlow,
    #[error("capacity arithmetic overflowed 64 bits")]
    Overflow,
    #[error("no arc ({0}, {1}) in the graph")]
    NoSuchArc(usize, usize),
    #[error("cannot shift an infinite capacity on arc ({0}, {1})")]
    InfiniteAdjust(usize, usize),
    #[error("insufficient capacity on arc ({from}, {to}): have {have}, need {need}")]
    InsufficientCapacity {
        from: usize,
        to: usize,
        have: u64,
        need: u64,
    },
}

impl FlowGraph {
    pub fn new(vertex_count: usize, inlet: usize, outlet: usize) -> Self {
        assert!(inlet < vertex_count && outlet < vertex_count && inlet != outlet);
        FlowGraph {
            vertex_count,
            inlet,
            outlet,
            arcs: Vec::new(),
            index: HashMap::new(),
            labels: (0..vertex_count).map(|v| format!("v{v}")).collect(),
        }
    }

    pub fn set_label(&mut self, v: usize, label: impl Into<String>) {
        self.labels[v] = label.into();
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: Capacity) -> Result<(), FlowError> {
        if from >= self.vertex_count {
            return Err(FlowError::BadVertex(from));
        }
        if to >= self.vertex_count {
            return Err(FlowError::BadVertex(to));
        }
        if from == to {
            return Err(FlowError::SelfLoop(from));
        }
        if to == self.inlet || from == self.outlet {
            return Err(FlowError::BadEndpoint(from, to));
        }
        if self.index.contains_key(&(from, to)) {
            return Err(FlowError::DuplicateArc(from, to));
        }
        self.index.insert((from, to), self.arcs.len());
        self.arcs.push(Arc {
            from,
            to,
            capacity,
        });
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn inlet(&self) -> usize {
        self.inlet
    }

    pub fn outlet(&self) -> usize {
        self.outlet
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn capacity(&self, from: usize, to: usize) -> Option<Capacity> {
        self.index.get(&(from, to)).map(|&i| self.arcs[i].capacity)
    }

    /// Shifts the capacities of one inlet-side arc and one outlet-side arc by
    /// `delta`. Decreases fail when either capacity is too small; infinite
    /// capacities are never shifted.
    pub fn adjust_along(
        &self,
        inlet_arc: (usize, usize),
        outlet_arc: (usize, usize),
        delta: i64,
    ) -> Result<FlowGraph, FlowError> {
        let mut g = self.clone();
        for (from, to) in [inlet_arc, outlet_arc] {
            let i = *g
                .index
                .get(&(from, to))
                .ok_or(FlowError::NoSuchArc(from, to))?;
            let have = match g.arcs[i].capacity {
                Capacity::Infinite => return Err(FlowError::InfiniteAdjust(from, to)),
                Capacity::Finite(v) => v,
            };
            let next = if delta >= 0 {
                have.checked_add(delta as u64).ok_or(FlowError::Overflow)?
            } else {
                let need = delta.unsigned_abs();
                have.checked_sub(need)
                    .ok_or(FlowError::InsufficientCapacity {
                        from,
                        to,
                        have,
                        need,
                    })?
            };
            g.arcs[i].capacity = Capacity::Finite(next);
        }
        Ok(g)
    }

    /// Maximum integer flow by Dinitz's algorithm. Fails with UnboundedFlow
    /// when an augmenting path consists of infinite arcs only.
    pub fn max_flow(&self) -> Result<Flow, FlowError> {
        Residual::new(self).run()
    }

    /// Minimum cut: the inlet side is the set of vertices reachable from the
    /// inlet in the residual graph of a maximum flow.
    pub fn min_cut(&self) -> Result<Cut, FlowError> {
        let flow = self.max_flow()?;
        let mut residual = Residual::new(self);
        residual.apply(&flow);
        let reach = residual.reachable_from_inlet();
        let v_in: BTreeSet<usize> = (0..self.vertex_count).filter(|&v| reach[v]).collect();
        let v_out: BTreeSet<usize> = (0..self.vertex_count).filter(|&v| !reach[v]).collect();
        let mut capacity = Capacity::Finite(0);
        for arc in &self.arcs {
            if reach[arc.from] && !reach[arc.to] {
                capacity = capacity.checked_add(arc.capacity)?;
            }
        }
        Ok(Cut {
            v_in,
            v_out,
            capacity,
        })
    }
}

/// An integer flow on a specific graph; `values` is indexed like the graph's
/// arc list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub values: Vec<u64>,
    pub value: u64,
}

impl Flow {
    pub fn on(&self, g: &FlowGraph, from: usize, to: usize) -> u64 {
        g.index
            .get(&(from, to))
            .map(|&i| self.values[i])
            .unwrap_or(0)
    }

    /// Checks capacity and conservation constraints arc-by-arc and
    /// vertex-by-vertex; used by tests and by callers that audit witnesses.
    pub fn is_feasible(&self, g: &FlowGraph) -> bool {
        if self.values.len() != g.arcs.len() {
            return false;
        }
        for (arc, &f) in g.arcs.iter().zip(&self.values) {
            if let Capacity::Finite(c) = arc.capacity {
                if f > c {
                    return false;
                }
            }
        }
        let mut balance = vec![0i128; g.vertex_count];
        for (arc, &f) in g.arcs.iter().zip(&self.values) {
            balance[arc.from] -= f as i128;
            balance[arc.to] += f as i128;
        }
        for (v, &b) in balance.iter().enumerate() {
            if v != g.inlet && v != g.outlet && b != 0 {
                return false;
            }
        }
        balance[g.inlet] == -(self.value as i128) && balance[g.outlet] == self.value as i128
    }
}

/// A partition of the vertices with the inlet in `v_in` and the outlet in
/// `v_out`; `capacity` sums the arcs crossing from `v_in` to `v_out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub v_in: BTreeSet<usize>,
    pub v_out: BTreeSet<usize>,
    pub capacity: Capacity,
}

/// Residual network over directed arc pairs. Forward residual None means
/// infinite.
struct Residual<'g> {
    g: &'g FlowGraph,
    forward: Vec<Option<u64>>,
    backward: Vec<u64>,
    // adjacency: (neighbor, arc index, is_forward), sorted by neighbor then
    // insertion order for deterministic traversal
    adj: Vec<Vec<(usize, usize, bool)>>,
}

impl<'g> Residual<'g> {
    fn new(g: &'g FlowGraph) -> Self {
        let forward = g
            .arcs
            .iter()
            .map(|a| match a.capacity {
                Capacity::Finite(c) => Some(c),
                Capacity::Infinite => None,
            })
            .collect();
        let backward = vec![0; g.arcs.len()];
        let mut adj = vec![Vec::new(); g.vertex_count];
        for (i, a) in g.arcs.iter().enumerate() {
            adj[a.from].push((a.to, i, true));
            adj[a.to].push((a.from, i, false));
        }
        for list in &mut adj {
            list.sort();
        }
        Residual {
            g,
            forward,
            backward,
            adj,
        }
    }

    fn apply(&mut self, flow: &Flow) {
        for (i, &f) in flow.values.iter().enumerate() {
            if let Some(cap) = self.forward[i].as_mut() {
                *cap -= f;
            }
            self.backward[i] += f;
        }
    }

    fn residual(&self, arc: usize, is_forward: bool) -> Option<u64> {
        if is_forward {
            self.forward[arc]
        } else {
            Some(self.backward[arc])
        }
    }

    fn has_residual(&self, arc: usize, is_forward: bool) -> bool {
        self.residual(arc, is_forward) != Some(0)
    }

    fn reachable_from_inlet(&self) -> Vec<bool> {
        let mut seen = vec![false; self.g.vertex_count];
        let mut queue = VecDeque::from([self.g.inlet]);
        seen[self.g.inlet] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, arc, fwd) in &self.adj[v] {
                if !seen[w] && self.has_residual(arc, fwd) {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    fn run(mut self) -> Result<Flow, FlowError> {
        let mut value: u64 = 0;
        loop {
            let levels = self.bfs_levels();
            if levels[self.g.outlet].is_none() {
                break;
            }
            let mut iter = vec![0usize; self.g.vertex_count];
            while let Some(pushed) = self.blocking_path(&levels, &mut iter)? {
                value = value.checked_add(pushed).ok_or(FlowError::Overflow)?;
            }
        }
        let flow_values = self
            .g
            .arcs
            .iter()
            .enumerate()
            .map(|(i, _)| self.backward[i])
            .collect();
        Ok(Flow {
            values: flow_values,
            value,
        })
    }

    fn bfs_levels(&self) -> Vec<Option<usize>> {
        let mut levels = vec![None; self.g.vertex_count];
        levels[self.g.inlet] = Some(0);
        let mut queue = VecDeque::from([self.g.inlet]);
        while let Some(v) = queue.pop_front() {
            let next = levels[v].unwrap() + 1;
            for &(w, arc, fwd) in &self.adj[v] {
                if levels[w].is_none() && self.has_residual(arc, fwd) {
                    levels[w] = Some(next);
                    queue.push_back(w);
                }
            }
        }
        levels
    }

    /// One augmenting path in the level graph, or None when the level graph
    /// is exhausted.
    fn blocking_path(
        &mut self,
        levels: &[Option<usize>],
        iter: &mut [usize],
    ) -> Result<Option<u64>, FlowError> {
        // path entries: (vertex, chosen adjacency slot)
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut v = self.g.inlet;
        loop {
            if v == self.g.outlet {
                let mut bottleneck: Option<u64> = None;
                for &(u, slot) in &path {
                    let (_, arc, fwd) = self.adj[u][slot];
                    let r = self.residual(arc, fwd);
                    bottleneck = match (bottleneck, r) {
                        (b, None) => b,
                        (None, Some(r)) => Some(r),
                        (Some(b), Some(r)) => Some(b.min(r)),
                    };
                }
                let push = bottleneck.ok_or(FlowError::UnboundedFlow)?;
                for &(u, slot) in &path {
                    let (_, arc, fwd) = self.adj[u][slot];
                    if fwd {
                        if let Some(cap) = self.forward[arc].as_mut() {
                            *cap -= push;
                        }
                        self.backward[arc] += push;
                    } else {
                        self.backward[arc] -= push;
                        if let Some(cap) = self.forward[arc].as_mut() {
                            *cap += push;
                        }
                    }
                }
                return Ok(Some(push));
            }
            let mut advanced = false;
            while iter[v] < self.adj[v].len() {
                let (w, arc, fwd) = self.adj[v][iter[v]];
                if levels[w] == levels[v].map(|l| l + 1) && self.has_residual(arc, fwd) {
                    path.push((v, iter[v]));
                    v = w;
                    advanced = true;
                    break;
                }
                iter[v] += 1;
            }
            if !advanced {
                match path.pop() {
                    Some((u, _)) => {
                        iter[u] += 1;
                        v = u;
                    }
                    None => return Ok(None),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inf() -> Capacity {
        Capacity::Infinite
    }

    fn fin(v: u64) -> Capacity {
        Capacity::Finite(v)
    }

    /// Restriction flow graph of the enzyme running example: initial copies
    /// 1..=5, final copies 6..=10, inlet 0, outlet 11, identity pairs plus
    /// (PE,E), (R,P1), (R,P2).
    fn enzyme_flow_graph() -> FlowGraph {
        let m = [200u64, 0, 400, 0, 0];
        let m2 = [0u64, 200, 0, 400, 0];
        let mut g = FlowGraph::new(12, 0, 11);
        for p in 0..5 {
            g.add_arc(0, 1 + p, fin(m[p])).unwrap();
            g.add_arc(6 + p, 11, fin(m2[p])).unwrap();
            g.add_arc(1 + p, 6 + p, inf()).unwrap();
        }
        g.add_arc(1, 7, inf()).unwrap(); // PE -> E
        g.add_arc(3, 9, inf()).unwrap(); // R -> P1
        g.add_arc(3, 10, inf()).unwrap(); // R -> P2
        g
    }

    #[test]
    fn single_arc_graph() {
        let mut g = FlowGraph::new(2, 0, 1);
        g.add_arc(0, 1, fin(7)).unwrap();
        let f = g.max_flow().unwrap();
        assert_eq!(f.value, 7);
        assert!(f.is_feasible(&g));
        let cut = g.min_cut().unwrap();
        assert_eq!(cut.v_in, BTreeSet::from([0]));
        assert_eq!(cut.v_out, BTreeSet::from([1]));
        assert_eq!(cut.capacity, fin(7));
    }

    #[test]
    fn enzyme_graph_flow_and_cut() {
        let g = enzyme_flow_graph();
        let f = g.max_flow().unwrap();
        assert_eq!(f.value, 600);
        assert!(f.is_feasible(&g));
        assert_eq!(g.min_cut().unwrap().capacity, fin(600));
        // The minimum cut with inlet side {i, P2_f} has capacity 600 and the
        // path i -> R_i -> P2_f -> o crosses it twice, so (R, P2) cannot
        // carry flow in any maximum flow.
        let v_in = BTreeSet::from([0usize, 10]);
        let crossing: Vec<(usize, usize)> = g
            .arcs()
            .iter()
            .filter(|a| v_in.contains(&a.from) && !v_in.contains(&a.to))
            .map(|a| (a.from, a.to))
            .collect();
        let capacity: u64 = g
            .arcs()
            .iter()
            .filter(|a| v_in.contains(&a.from) && !v_in.contains(&a.to))
            .map(|a| match a.capacity {
                Capacity::Finite(c) => c,
                Capacity::Infinite => panic!("infinite arc crosses the cut"),
            })
            .sum();
        assert_eq!(capacity, 600);
        assert!(crossing.contains(&(0, 3)));
        assert!(crossing.contains(&(10, 11)));
    }

    #[test]
    fn unbounded_flow_is_detected() {
        let mut g = FlowGraph::new(3, 0, 2);
        g.add_arc(0, 1, inf()).unwrap();
        g.add_arc(1, 2, inf()).unwrap();
        assert_eq!(g.max_flow(), Err(FlowError::UnboundedFlow));
    }

    #[test]
    fn adjust_along_shifts_both_arcs() {
        let g = enzyme_flow_graph();
        let g2 = g.adjust_along((0, 1), (7, 11), -5).unwrap();
        assert_eq!(g2.capacity(0, 1), Some(fin(195)));
        assert_eq!(g2.capacity(7, 11), Some(fin(195)));
        assert_eq!(g2.capacity(0, 3), Some(fin(400)));
    }

    #[test]
    fn adjust_along_insufficient_capacity() {
        let mut g = FlowGraph::new(4, 0, 3);
        g.add_arc(0, 1, fin(3)).unwrap();
        g.add_arc(1, 2, inf()).unwrap();
        g.add_arc(2, 3, fin(400)).unwrap();
        let err = g.adjust_along((0, 1), (2, 3), -5).unwrap_err();
        assert_eq!(
            err,
            FlowError::InsufficientCapacity {
                from: 0,
                to: 1,
                have: 3,
                need: 5
            }
        );
    }

    #[test]
    fn graph_invariants_are_enforced() {
        let mut g = FlowGraph::new(3, 0, 2);
        assert_eq!(g.add_arc(1, 1, fin(1)), Err(FlowError::SelfLoop(1)));
        assert_eq!(g.add_arc(1, 0, fin(1)), Err(FlowError::BadEndpoint(1, 0)));
        assert_eq!(g.add_arc(2, 1, fin(1)), Err(FlowError::BadEndpoint(2, 1)));
        g.add_arc(0, 1, fin(1)).unwrap();
        assert_eq!(g.add_arc(0, 1, fin(2)), Err(FlowError::DuplicateArc(0, 1)));
    }

    #[test]
    fn determinism() {
        let g = enzyme_flow_graph();
        let f1 = g.max_flow().unwrap();
        let f2 = g.max_flow().unwrap();
        assert_eq!(f1, f2);
        assert_eq!(g.min_cut().unwrap(), g.min_cut().unwrap());
    }
}
