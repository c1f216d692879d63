//! Tree decompositions and the circuit-emitting dynamic program for
//! length-restricted permanents.
//!
//! The DP walks a nice decomposition bottom-up over abstract states:
//! directed path fragments with both endpoints in the current bag plus a
//! done-set of bag vertices already at full degree. Each graph edge is
//! handled at exactly one tree node (the forget node of its earlier
//! forgotten endpoint), which keeps join combination free of double
//! counting even on multigraphs.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;

use crate::algebra::{SparsePolynomial, VarId};
use crate::circuit::{arithmetize, BoolCircuitBuilder, Circuit, CircuitBuilder, Formula, Gate, GateId};
use crate::error::{Error, Result};
use crate::graph::{restricted_permanent, NicePartition, NodeId, WeightedDigraph};

/// Plain tree decomposition: bags of graph nodes plus tree edges between
/// bag indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<Vec<NodeId>>,
    pub tree_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct DecompositionReport {
    pub covers_vertices: bool,
    pub covers_edges: bool,
    pub connected: bool,
    pub tree_shaped: bool,
    pub width: usize,
}

impl DecompositionReport {
    pub fn is_ok(&self) -> bool {
        self.covers_vertices && self.covers_edges && self.connected && self.tree_shaped
    }
}

impl TreeDecomposition {
    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(0).saturating_sub(1)
    }

    /// Validate against an explicit vertex set and undirected edge set.
    pub fn validate_for(
        &self,
        vertices: &BTreeSet<NodeId>,
        edges: &BTreeSet<(NodeId, NodeId)>,
    ) -> DecompositionReport {
        let mut report = DecompositionReport { width: self.width(), ..Default::default() };

        let in_bags: BTreeSet<NodeId> = self.bags.iter().flatten().copied().collect();
        report.covers_vertices =
            vertices.is_subset(&in_bags) && in_bags.is_subset(vertices);

        report.covers_edges = edges.iter().all(|&(u, v)| {
            self.bags.iter().any(|b| b.contains(&u) && b.contains(&v))
        });

        // Tree shape: |E| = |V| - 1 and connected (when nonempty).
        let nb = self.bags.len();
        report.tree_shaped = nb > 0 && self.tree_edges.len() == nb - 1 && {
            let mut adj = vec![Vec::new(); nb];
            let mut ok = true;
            for &(a, b) in &self.tree_edges {
                if a >= nb || b >= nb {
                    ok = false;
                    break;
                }
                adj[a].push(b);
                adj[b].push(a);
            }
            ok && {
                let mut seen = vec![false; nb];
                let mut stack = vec![0usize];
                seen[0] = true;
                while let Some(u) = stack.pop() {
                    for &v in &adj[u] {
                        if !seen[v] {
                            seen[v] = true;
                            stack.push(v);
                        }
                    }
                }
                seen.iter().all(|&s| s)
            }
        };

        // Connectivity of each vertex's bag set within the tree.
        report.connected = report.tree_shaped
            && vertices.iter().all(|&v| {
                let holders: Vec<usize> = (0..nb)
                    .filter(|&i| self.bags[i].contains(&v))
                    .collect();
                if holders.is_empty() {
                    return false;
                }
                let holder_set: BTreeSet<usize> = holders.iter().copied().collect();
                let mut adj = vec![Vec::new(); nb];
                for &(a, b) in &self.tree_edges {
                    if holder_set.contains(&a) && holder_set.contains(&b) {
                        adj[a].push(b);
                        adj[b].push(a);
                    }
                }
                let mut seen: BTreeSet<usize> = BTreeSet::new();
                let mut stack = vec![holders[0]];
                seen.insert(holders[0]);
                while let Some(u) = stack.pop() {
                    for &v in &adj[u] {
                        if seen.insert(v) {
                            stack.push(v);
                        }
                    }
                }
                seen.len() == holders.len()
            });

        report
    }

    /// Validate against the underlying undirected simple graph of `g`.
    pub fn validate(&self, g: &WeightedDigraph) -> DecompositionReport {
        let vertices: BTreeSet<NodeId> = (0..g.n).collect();
        let mut edges = BTreeSet::new();
        for e in &g.edges {
            if e.src != e.dst {
                edges.insert((e.src.min(e.dst), e.src.max(e.dst)));
            }
        }
        self.validate_for(&vertices, &edges)
    }
}

/// Node kinds of a nice decomposition. Children point downward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NiceNode {
    Leaf,
    Introduce { vertex: NodeId, child: usize },
    Forget { vertex: NodeId, child: usize },
    Join { left: usize, right: usize },
}

/// Rooted binary nice tree decomposition. Node 0..len are stored in a
/// vec; `root` has an empty bag, leaves have empty bags, introduce adds
/// one vertex, forget removes one, join children share the node's bag.
#[derive(Debug, Clone)]
pub struct NiceTreeDecomposition {
    pub nodes: Vec<NiceNode>,
    pub bags: Vec<Vec<NodeId>>,
    pub root: usize,
    pub height: usize,
}

impl NiceTreeDecomposition {
    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(0).saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.root >= self.nodes.len() {
            return Err(Error::InvalidDecomposition("root out of range".into()));
        }
        if !self.bags[self.root].is_empty() {
            return Err(Error::InvalidDecomposition("root bag must be empty".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let bag: BTreeSet<NodeId> = self.bags[i].iter().copied().collect();
            match node {
                NiceNode::Leaf => {
                    if !bag.is_empty() {
                        return Err(Error::InvalidDecomposition(format!(
                            "leaf {i} has nonempty bag"
                        )));
                    }
                }
                NiceNode::Introduce { vertex, child } => {
                    let child_bag: BTreeSet<NodeId> =
                        self.bags[*child].iter().copied().collect();
                    if child_bag.contains(vertex) || !bag.contains(vertex) {
                        return Err(Error::InvalidDecomposition(format!(
                            "introduce {i} does not add vertex {vertex}"
                        )));
                    }
                    let mut expect = child_bag.clone();
                    expect.insert(*vertex);
                    if expect != bag {
                        return Err(Error::InvalidDecomposition(format!(
                            "introduce {i} changes more than one vertex"
                        )));
                    }
                }
                NiceNode::Forget { vertex, child } => {
                    let child_bag: BTreeSet<NodeId> =
                        self.bags[*child].iter().copied().collect();
                    if !child_bag.contains(vertex) || bag.contains(vertex) {
                        return Err(Error::InvalidDecomposition(format!(
                            "forget {i} does not remove vertex {vertex}"
                        )));
                    }
                    let mut expect = child_bag.clone();
                    expect.remove(vertex);
                    if expect != bag {
                        return Err(Error::InvalidDecomposition(format!(
                            "forget {i} changes more than one vertex"
                        )));
                    }
                }
                NiceNode::Join { left, right } => {
                    let lb: BTreeSet<NodeId> = self.bags[*left].iter().copied().collect();
                    let rb: BTreeSet<NodeId> = self.bags[*right].iter().copied().collect();
                    if lb != bag || rb != bag {
                        return Err(Error::InvalidDecomposition(format!(
                            "join {i} children bags differ from its bag"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Flatten back to a plain decomposition for validity checks.
    pub fn to_plain(&self) -> TreeDecomposition {
        let mut tree_edges = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                NiceNode::Leaf => {}
                NiceNode::Introduce { child, .. } | NiceNode::Forget { child, .. } => {
                    tree_edges.push((i, *child));
                }
                NiceNode::Join { left, right } => {
                    tree_edges.push((i, *left));
                    tree_edges.push((i, *right));
                }
            }
        }
        TreeDecomposition { bags: self.bags.clone(), tree_edges }
    }

    /// The unique forget node of each vertex (root bag is empty, so every
    /// vertex is forgotten exactly once in a valid nice decomposition).
    fn forget_node_of(&self) -> BTreeMap<NodeId, usize> {
        let mut map = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let NiceNode::Forget { vertex, .. } = node {
                map.insert(*vertex, i);
            }
        }
        map
    }
}

struct NiceBuilder {
    nodes: Vec<NiceNode>,
    bags: Vec<Vec<NodeId>>,
}

impl NiceBuilder {
    fn push(&mut self, node: NiceNode, bag: Vec<NodeId>) -> usize {
        self.nodes.push(node);
        self.bags.push(bag);
        self.nodes.len() - 1
    }
}

/// Convert a valid tree decomposition into a nice one of the same width.
/// Input topology is preserved; no height balancing is attempted.
pub fn make_nice(dec: &TreeDecomposition, g: &WeightedDigraph) -> Result<NiceTreeDecomposition> {
    let report = dec.validate(g);
    if !report.is_ok() {
        return Err(Error::InvalidDecomposition(format!("{report:?}")));
    }
    let nb = dec.bags.len();
    let mut adj = vec![Vec::new(); nb];
    for &(a, b) in &dec.tree_edges {
        adj[a].push(b);
        adj[b].push(a);
    }

    let mut b = NiceBuilder { nodes: Vec::new(), bags: Vec::new() };

    // Build the subtree rooted at `bag`, excluding `parent`; returns the
    // nice node whose bag equals dec.bags[bag].
    fn build(
        dec: &TreeDecomposition,
        adj: &[Vec<usize>],
        bag: usize,
        parent: Option<usize>,
        b: &mut NiceBuilder,
    ) -> usize {
        let here: Vec<NodeId> = {
            let mut s = dec.bags[bag].clone();
            s.sort_unstable();
            s.dedup();
            s
        };
        let children: Vec<usize> =
            adj[bag].iter().copied().filter(|&c| Some(c) != parent).collect();
        let mut tops: Vec<usize> = Vec::new();
        for &c in &children {
            let child_top = build(dec, adj, c, Some(bag), b);
            // Morph the child's bag into this bag: forget then introduce.
            let child_bag: Vec<NodeId> = b.bags[child_top].clone();
            let mut cur = child_top;
            let mut cur_bag: Vec<NodeId> = child_bag.clone();
            for &v in child_bag.iter().filter(|v| !here.contains(v)) {
                cur_bag.retain(|&u| u != v);
                cur = b.push(NiceNode::Forget { vertex: v, child: cur }, cur_bag.clone());
            }
            for &v in here.iter().filter(|v| !child_bag.contains(v)) {
                cur_bag.push(v);
                cur_bag.sort_unstable();
                cur = b.push(NiceNode::Introduce { vertex: v, child: cur }, cur_bag.clone());
            }
            tops.push(cur);
        }
        if tops.is_empty() {
            // Leaf bag: introduce everything over an empty leaf.
            let mut cur = b.push(NiceNode::Leaf, vec![]);
            let mut cur_bag: Vec<NodeId> = Vec::new();
            for &v in &here {
                cur_bag.push(v);
                cur_bag.sort_unstable();
                cur = b.push(NiceNode::Introduce { vertex: v, child: cur }, cur_bag.clone());
            }
            cur
        } else {
            let mut cur = tops[0];
            for &t in &tops[1..] {
                cur = b.push(NiceNode::Join { left: cur, right: t }, here.clone());
            }
            cur
        }
    }

    let mut top = build(dec, &adj, 0, None, &mut b);
    // Forget the remaining bag down to the empty root.
    let mut bag = b.bags[top].clone();
    while let Some(&v) = bag.first() {
        bag.retain(|&u| u != v);
        top = b.push(NiceNode::Forget { vertex: v, child: top }, bag.clone());
    }
    let root = top;

    let mut heights = vec![0usize; b.nodes.len()];
    for (i, node) in b.nodes.iter().enumerate() {
        heights[i] = match node {
            NiceNode::Leaf => 0,
            NiceNode::Introduce { child, .. } | NiceNode::Forget { child, .. } => {
                heights[*child] + 1
            }
            NiceNode::Join { left, right } => heights[*left].max(heights[*right]) + 1,
        };
    }
    let nice = NiceTreeDecomposition {
        height: heights[root],
        nodes: b.nodes,
        bags: b.bags,
        root,
    };
    nice.validate()?;
    Ok(nice)
}

/// Exact treewidth by dynamic programming over elimination prefixes.
/// Returns the width and a matching tree decomposition.
pub fn naive_treewidth(g: &WeightedDigraph) -> Result<(usize, TreeDecomposition)> {
    let n = g.n;
    if n > 10 {
        return Err(Error::BudgetExceeded { visited: 1 << n, budget: 1 << 10 });
    }
    if n == 0 {
        return Ok((0, TreeDecomposition { bags: vec![vec![]], tree_edges: vec![] }));
    }
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &g.edges {
        if e.src != e.dst {
            neighbors[e.src].insert(e.dst);
            neighbors[e.dst].insert(e.src);
        }
    }
    // q(v, s) = vertices outside s reachable from v through s only.
    let q = |v: usize, s: u32| -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut out: BTreeSet<usize> = BTreeSet::new();
        let mut stack = vec![v];
        seen.insert(v);
        while let Some(u) = stack.pop() {
            for &w in &neighbors[u] {
                if seen.contains(&w) {
                    continue;
                }
                seen.insert(w);
                if s & (1 << w) != 0 {
                    stack.push(w);
                } else {
                    out.insert(w);
                }
            }
        }
        out
    };
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let mut opt: Vec<u8> = vec![u8::MAX; (full as usize) + 1];
    let mut choice: Vec<u8> = vec![u8::MAX; (full as usize) + 1];
    opt[0] = 0;
    for s in 1..=full {
        let mut best = u8::MAX;
        let mut best_v = u8::MAX;
        for v in 0..n {
            if s & (1 << v) == 0 {
                continue;
            }
            let rest = s & !(1 << v);
            let sub = opt[rest as usize];
            if sub == u8::MAX {
                continue;
            }
            let qv = q(v, rest).len() as u8;
            let cost = sub.max(qv);
            if cost < best {
                best = cost;
                best_v = v as u8;
            }
        }
        opt[s as usize] = best;
        choice[s as usize] = best_v;
    }
    let width = opt[full as usize] as usize;

    // Reconstruct an elimination order (last removed first in the scan).
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        let v = choice[s as usize] as usize;
        order.push(v);
        s &= !(1 << v);
    }
    order.reverse(); // order[i] eliminated i-th

    // Standard bag construction from the elimination order.
    let mut pos = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut bags: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut qsets: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
    for (i, &v) in order.iter().enumerate() {
        let prior: u32 = order[..i].iter().fold(0u32, |acc, &u| acc | (1 << u));
        let qv = q(v, prior);
        let mut bag: Vec<usize> = qv.iter().copied().collect();
        bag.push(v);
        bag.sort_unstable();
        bags.push(bag);
        qsets.push(qv);
    }
    let mut tree_edges = Vec::new();
    for i in 0..n {
        // Attach to the bag of the earliest-eliminated vertex in q(v).
        if let Some(&u) = qsets[i].iter().min_by_key(|&&u| pos[u]) {
            tree_edges.push((i, pos[u]));
        } else if i + 1 < n {
            tree_edges.push((i, i + 1));
        }
    }
    let dec = TreeDecomposition { bags, tree_edges };
    let report = dec.validate(g);
    debug_assert!(report.is_ok(), "constructed decomposition invalid: {report:?}");
    Ok((width, dec))
}

/// Heuristic tree decomposition by min-fill elimination. Always valid;
/// the width is whatever greedy achieves. Useful beyond the exact
/// solver's size limit.
pub fn greedy_decomposition(g: &WeightedDigraph) -> TreeDecomposition {
    let n = g.n;
    if n == 0 {
        return TreeDecomposition { bags: vec![vec![]], tree_edges: vec![] };
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &g.edges {
        if e.src != e.dst {
            adj[e.src].insert(e.dst);
            adj[e.dst].insert(e.src);
        }
    }
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut bags: Vec<Vec<usize>> = Vec::with_capacity(n);
    while let Some(&v) = alive
        .iter()
        .min_by_key(|&&v| {
            let nbrs: Vec<usize> =
                adj[v].iter().copied().filter(|u| alive.contains(u)).collect();
            let mut fill = 0usize;
            for i in 0..nbrs.len() {
                for j in (i + 1)..nbrs.len() {
                    if !adj[nbrs[i]].contains(&nbrs[j]) {
                        fill += 1;
                    }
                }
            }
            (fill, nbrs.len(), v)
        })
    {
        let nbrs: Vec<usize> = adj[v].iter().copied().filter(|u| alive.contains(u)).collect();
        let mut bag = nbrs.clone();
        bag.push(v);
        bag.sort_unstable();
        bags.push(bag);
        for i in 0..nbrs.len() {
            for j in (i + 1)..nbrs.len() {
                adj[nbrs[i]].insert(nbrs[j]);
                adj[nbrs[j]].insert(nbrs[i]);
            }
        }
        alive.remove(&v);
        order.push(v);
    }
    let mut pos = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut tree_edges = Vec::new();
    for (i, &v) in order.iter().enumerate() {
        // Attach to the bag of the first-later-eliminated bag member.
        let next = bags[i]
            .iter()
            .copied()
            .filter(|&u| u != v && pos[u] > i)
            .min_by_key(|&u| pos[u]);
        if let Some(u) = next {
            tree_edges.push((i, pos[u]));
        } else if i + 1 < n {
            tree_edges.push((i, i + 1));
        }
    }
    let dec = TreeDecomposition { bags, tree_edges };
    debug_assert!(dec.validate(g).is_ok());
    dec
}

// ---------------------------------------------------------------------------
// The path-cycle-cover dynamic program.

/// One directed path fragment: both endpoints lie in the current bag,
/// `len` counts its edges. `start == end` with `len == 0` is an untouched
/// vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Fragment {
    start: NodeId,
    end: NodeId,
    len: usize,
}

/// Abstract cover state at a decomposition node: fragments plus the bag
/// vertices that already have full degree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
struct DpState {
    fragments: Vec<Fragment>,
    done: Vec<NodeId>,
}

impl DpState {
    fn normalized(mut self) -> DpState {
        self.fragments.sort_unstable();
        self.done.sort_unstable();
        self
    }

    fn degree(&self, v: NodeId) -> (bool, bool) {
        // (in used, out used)
        if self.done.contains(&v) {
            return (true, true);
        }
        let mut din = false;
        let mut dout = false;
        for f in &self.fragments {
            if f.len > 0 {
                if f.end == v {
                    din = true;
                }
                if f.start == v {
                    dout = true;
                }
            }
        }
        (din, dout)
    }

    fn fragment_index_with_end(&self, v: NodeId) -> Option<usize> {
        self.fragments.iter().position(|f| f.end == v && (f.len > 0 || f.start == v))
    }

    fn fragment_index_with_start(&self, v: NodeId) -> Option<usize> {
        self.fragments.iter().position(|f| f.start == v && (f.len > 0 || f.end == v))
    }
}

type StateMap = BTreeMap<DpState, GateId>;

/// Options for the DP.
#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    pub state_budget: usize,
}

impl Default for DpOptions {
    fn default() -> DpOptions {
        DpOptions { state_budget: 2_000_000 }
    }
}

/// Emit a circuit computing the weighted sum over cycle covers of `g`
/// whose cycles all have length at most `c`, following the given nice
/// decomposition.
pub fn dp_per_le_c(
    g: &WeightedDigraph,
    nice: &NiceTreeDecomposition,
    c: usize,
    opts: DpOptions,
) -> Result<Circuit> {
    nice.validate()?;
    assert!(c >= 1);
    let forget_of = nice.forget_node_of();
    for v in 0..g.n {
        if !forget_of.contains_key(&v) {
            return Err(Error::InvalidDecomposition(format!(
                "vertex {v} never appears in the decomposition"
            )));
        }
    }
    // Each edge is handled at the forget node of whichever endpoint is
    // forgotten first; ties for self-loops are trivial.
    let mut edges_at: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let depth = node_depths(nice);
    for e in &g.edges {
        let fu = forget_of[&e.src];
        let fv = forget_of[&e.dst];
        // The deeper forget node comes first on the leaf-to-root walk.
        let node = if depth[fu] >= depth[fv] { fu } else { fv };
        edges_at.entry(node).or_default().push(e.id);
    }

    let mut builder = CircuitBuilder::new();
    // Weight subcircuits are built lazily per edge.
    let mut weight_gate: BTreeMap<usize, GateId> = BTreeMap::new();
    let mut states_total = 0usize;

    // Bottom-up evaluation over the nice tree.
    let order = topo_order(nice);
    let mut tables: Vec<Option<StateMap>> = vec![None; nice.nodes.len()];
    for &i in &order {
        let table = match &nice.nodes[i] {
            NiceNode::Leaf => {
                let mut t = StateMap::new();
                let one = builder.constant(1);
                t.insert(DpState::default(), one);
                t
            }
            NiceNode::Introduce { vertex, child } => {
                let child_table = tables[*child].take().expect("child evaluated");
                let mut t = StateMap::new();
                for (state, gate) in child_table {
                    let mut s = state.clone();
                    s.fragments.push(Fragment { start: *vertex, end: *vertex, len: 0 });
                    merge_state(&mut builder, &mut t, s.normalized(), gate);
                }
                t
            }
            NiceNode::Forget { vertex, child } => {
                let child_table = tables[*child].take().expect("child evaluated");
                let edge_ids = edges_at.get(&i).cloned().unwrap_or_default();
                let mut t = StateMap::new();
                for (state, gate) in child_table {
                    forget_step(
                        g,
                        &mut builder,
                        &mut weight_gate,
                        &mut t,
                        &state,
                        gate,
                        *vertex,
                        &edge_ids,
                        c,
                    );
                }
                t
            }
            NiceNode::Join { left, right } => {
                let lt = tables[*left].take().expect("left evaluated");
                let rt = tables[*right].take().expect("right evaluated");
                let mut t = StateMap::new();
                for (ls, lg) in &lt {
                    for (rs, rg) in &rt {
                        if let Some(joined) = join_states(ls, rs, c) {
                            let prod = builder.mul(vec![*lg, *rg]);
                            merge_state(&mut builder, &mut t, joined, prod);
                        }
                    }
                }
                t
            }
        };
        states_total += table.len();
        if states_total > opts.state_budget {
            return Err(Error::StateBudgetExceeded {
                states: states_total,
                budget: opts.state_budget,
            });
        }
        tables[i] = Some(table);
    }

    let root_table = tables[nice.root].take().expect("root evaluated");
    let zero = builder.constant(0);
    let out = root_table.get(&DpState::default()).copied().unwrap_or(zero);
    let circuit = builder.finish(out, false);
    circuit.validate()?;
    Ok(circuit)
}

fn node_depths(nice: &NiceTreeDecomposition) -> Vec<usize> {
    // depth = distance from the root, derived by inverting child links.
    let mut depth = vec![0usize; nice.nodes.len()];
    let mut parent = vec![usize::MAX; nice.nodes.len()];
    for (i, node) in nice.nodes.iter().enumerate() {
        match node {
            NiceNode::Leaf => {}
            NiceNode::Introduce { child, .. } | NiceNode::Forget { child, .. } => {
                parent[*child] = i;
            }
            NiceNode::Join { left, right } => {
                parent[*left] = i;
                parent[*right] = i;
            }
        }
    }
    let order = topo_order(nice);
    for &i in order.iter().rev() {
        if parent[i] != usize::MAX {
            depth[i] = depth[parent[i]] + 1;
        }
    }
    depth
}

fn topo_order(nice: &NiceTreeDecomposition) -> Vec<usize> {
    // Children are constructed before parents by the builders here, but a
    // general postorder keeps this robust for hand-built decompositions.
    let mut order = Vec::with_capacity(nice.nodes.len());
    let mut seen = vec![false; nice.nodes.len()];
    let mut stack = vec![(nice.root, false)];
    while let Some((i, expanded)) = stack.pop() {
        if expanded {
            order.push(i);
            continue;
        }
        if seen[i] {
            continue;
        }
        seen[i] = true;
        stack.push((i, true));
        match &nice.nodes[i] {
            NiceNode::Leaf => {}
            NiceNode::Introduce { child, .. } | NiceNode::Forget { child, .. } => {
                stack.push((*child, false));
            }
            NiceNode::Join { left, right } => {
                stack.push((*left, false));
                stack.push((*right, false));
            }
        }
    }
    order
}

fn merge_state(builder: &mut CircuitBuilder, table: &mut StateMap, state: DpState, gate: GateId) {
    use std::collections::btree_map::Entry;
    match table.entry(state) {
        Entry::Vacant(e) => {
            e.insert(gate);
        }
        Entry::Occupied(mut e) => {
            let sum = builder.add(vec![*e.get(), gate]);
            *e.get_mut() = sum;
        }
    }
}

fn poly_gate(builder: &mut CircuitBuilder, p: &SparsePolynomial) -> GateId {
    // Sum of monomial products; fine for the small weights used here.
    if p.is_zero() {
        return builder.constant(0);
    }
    let mut terms = Vec::new();
    for (m, coeff) in p.terms() {
        let mut factors = vec![builder.constant(coeff.clone())];
        for (v, e) in m.iter() {
            let vg = builder.var(v);
            for _ in 0..e {
                factors.push(vg);
            }
        }
        terms.push(if factors.len() == 1 { factors[0] } else { builder.mul(factors) });
    }
    if terms.len() == 1 {
        terms[0]
    } else {
        builder.add(terms)
    }
}

/// All ways to finish vertex `v` using a subset of the edges assigned to
/// this forget node, then remove `v` from the state.
#[allow(clippy::too_many_arguments)]
fn forget_step(
    g: &WeightedDigraph,
    builder: &mut CircuitBuilder,
    weight_gate: &mut BTreeMap<usize, GateId>,
    out: &mut StateMap,
    state: &DpState,
    gate: GateId,
    v: NodeId,
    edge_ids: &[usize],
    c: usize,
) {
    // v's current degree.
    let (v_in, v_out) = state.degree(v);

    let mut wg = |builder: &mut CircuitBuilder, eid: usize| -> GateId {
        *weight_gate
            .entry(eid)
            .or_insert_with(|| poly_gate(builder, &g.edge(eid).weight))
    };

    // Candidate in-edges (u -> v) and out-edges (v -> u) at this node.
    let ins: Vec<usize> = edge_ids
        .iter()
        .copied()
        .filter(|&e| g.edge(e).dst == v && g.edge(e).src != v)
        .collect();
    let outs: Vec<usize> = edge_ids
        .iter()
        .copied()
        .filter(|&e| g.edge(e).src == v && g.edge(e).dst != v)
        .collect();
    let loops: Vec<usize> = edge_ids
        .iter()
        .copied()
        .filter(|&e| g.edge(e).src == v && g.edge(e).dst == v)
        .collect();

    let emit = |builder: &mut CircuitBuilder,
                    out: &mut StateMap,
                    state: DpState,
                    extra: Vec<GateId>| {
        let mut s = state;
        // Drop v from done or fragments; it must be complete by now.
        s.done.retain(|&u| u != v);
        s.fragments.retain(|f| !(f.start == v && f.end == v && f.len == 0));
        if s.fragments.iter().any(|f| f.start == v || f.end == v) {
            return; // v still an endpoint: not coverable later, drop.
        }
        let g = if extra.is_empty() {
            gate
        } else {
            let mut children = vec![gate];
            children.extend(extra);
            builder.mul(children)
        };
        merge_state(builder, out, s.normalized(), g);
    };

    match (v_in, v_out) {
        (true, true) => {
            // Already complete; no new edges at v are usable.
            emit(builder, out, state.clone(), vec![]);
        }
        (false, false) => {
            // Untouched: close via a self-loop, or take one in and one
            // out edge here, merging or closing fragments.
            if c >= 1 {
                for &l in &loops {
                    let w = wg(builder, l);
                    emit(builder, out, state.clone(), vec![w]);
                }
            }
            for &ein in &ins {
                for &eout in &outs {
                    let u_in = g.edge(ein).src; // u_in -> v
                    let u_out = g.edge(eout).dst; // v -> u_out
                    let w1 = wg(builder, ein);
                    let w2 = wg(builder, eout);
                    apply_through(state, v, u_in, u_out, c, |s| {
                        emit(builder, out, s, vec![w1, w2]);
                    });
                }
            }
        }
        (true, false) => {
            // v ends a fragment; take one out-edge.
            for &eout in &outs {
                let u_out = g.edge(eout).dst;
                let w = wg(builder, eout);
                apply_extend_out(state, v, u_out, c, |s| {
                    emit(builder, out, s, vec![w]);
                });
            }
        }
        (false, true) => {
            for &ein in &ins {
                let u_in = g.edge(ein).src;
                let w = wg(builder, ein);
                apply_extend_in(state, v, u_in, c, |s| {
                    emit(builder, out, s, vec![w]);
                });
            }
        }
    }
}

/// Route a previously untouched `v` through edges `u_in -> v -> u_out`,
/// joining (or closing) the incident fragments.
fn apply_through<F: FnMut(DpState)>(
    state: &DpState,
    _v: NodeId,
    u_in: NodeId,
    u_out: NodeId,
    c: usize,
    mut f: F,
) {
    let mut s = state.clone();
    // u_in's out-degree and u_out's in-degree must be free.
    let Some(ai) = s.fragment_index_with_end(u_in) else { return };
    if u_in == u_out {
        // 2-cycle through v: fragment must be a single vertex.
        let frag = s.fragments[ai].clone();
        if frag.start != frag.end || frag.len != 0 {
            return;
        }
        if frag.len + 2 > c {
            return;
        }
        s.fragments.remove(ai);
        s.done.push(u_in);
        f(s);
        return;
    }
    let Some(bi) = s.fragment_index_with_start(u_out) else { return };
    if ai == bi {
        // Closing the fragment into a cycle through v.
        let frag = s.fragments[ai].clone();
        if frag.len + 2 > c {
            return;
        }
        s.fragments.remove(ai);
        if frag.start != frag.end {
            s.done.push(frag.start);
            s.done.push(frag.end);
        } else {
            s.done.push(frag.start);
        }
        f(s);
        return;
    }
    // Concatenate: a.start -> ... -> u_in -> v -> u_out -> ... -> b.end.
    let a = s.fragments[ai].clone();
    let b = s.fragments[bi].clone();
    let new_len = a.len + b.len + 2;
    if new_len > c.saturating_sub(1) && !(a.start == b.end) {
        // A path fragment needs at least one more edge to close, so
        // anything longer than c-1 is dead.
        return;
    }
    if a.start == b.end {
        // This would close a cycle through existing endpoints; only legal
        // when the two fragments are genuinely distinct paths meeting at
        // both ends. The result is a closed cycle.
        if new_len > c {
            return;
        }
        let keep: Vec<Fragment> = s
            .fragments
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != ai && i != bi)
            .map(|(_, f)| f.clone())
            .collect();
        s.fragments = keep;
        s.done.push(a.start);
        if u_in != a.start {
            s.done.push(u_in);
        }
        if u_out != a.start {
            s.done.push(u_out);
        }
        s.done.sort_unstable();
        s.done.dedup();
        f(s);
        return;
    }
    let merged = Fragment { start: a.start, end: b.end, len: new_len };
    let mut keep: Vec<Fragment> = s
        .fragments
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ai && i != bi)
        .map(|(_, f)| f.clone())
        .collect();
    keep.push(merged.clone());
    s.fragments = keep;
    // An endpoint becomes interior unless it survives as an endpoint of
    // the merged fragment (which happens exactly for len-0 fragments).
    if a.len > 0 {
        s.done.push(u_in);
    }
    if b.len > 0 {
        s.done.push(u_out);
    }
    s.done.retain(|&u| u != merged.start && u != merged.end);
    s.done.sort_unstable();
    s.done.dedup();
    f(s);
}

/// v ends a fragment (in used, out free): extend with edge v -> u_out.
fn apply_extend_out<F: FnMut(DpState)>(
    state: &DpState,
    v: NodeId,
    u_out: NodeId,
    c: usize,
    mut f: F,
) {
    let mut s = state.clone();
    let Some(vi) = s.fragment_index_with_end(v) else { return };
    let a = s.fragments[vi].clone();
    if u_out == a.start {
        // Close the cycle directly.
        let cyc_len = a.len + 1;
        if cyc_len > c {
            return;
        }
        s.fragments.remove(vi);
        s.done.push(a.start);
        f(s);
        return;
    }
    let Some(bi) = s.fragment_index_with_start(u_out) else { return };
    if bi == vi {
        return;
    }
    let b = s.fragments[bi].clone();
    let new_len = a.len + b.len + 1;
    if a.start == b.end {
        // The edge closes the two fragments into one cycle.
        if new_len > c {
            return;
        }
        let keep: Vec<Fragment> = s
            .fragments
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != vi && i != bi)
            .map(|(_, fr)| fr.clone())
            .collect();
        s.fragments = keep;
        s.done.push(a.start);
        if u_out != a.start {
            s.done.push(u_out);
        }
        s.done.sort_unstable();
        s.done.dedup();
        f(s);
        return;
    }
    if new_len > c.saturating_sub(1) {
        return;
    }
    let merged = Fragment { start: a.start, end: b.end, len: new_len };
    let mut keep: Vec<Fragment> = s
        .fragments
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != vi && i != bi)
        .map(|(_, fr)| fr.clone())
        .collect();
    keep.push(merged.clone());
    s.fragments = keep;
    if u_out != merged.end {
        s.done.push(u_out);
    }
    s.done.sort_unstable();
    s.done.dedup();
    f(s);
}

/// v starts a fragment (out used, in free): extend with edge u_in -> v.
fn apply_extend_in<F: FnMut(DpState)>(
    state: &DpState,
    v: NodeId,
    u_in: NodeId,
    c: usize,
    mut f: F,
) {
    let mut s = state.clone();
    let Some(vi) = s.fragment_index_with_start(v) else { return };
    let a = s.fragments[vi].clone();
    if u_in == a.end {
        let cyc_len = a.len + 1;
        if cyc_len > c {
            return;
        }
        s.fragments.remove(vi);
        s.done.push(a.end);
        f(s);
        return;
    }
    let Some(bi) = s.fragment_index_with_end(u_in) else { return };
    if bi == vi {
        return;
    }
    let b = s.fragments[bi].clone();
    let new_len = a.len + b.len + 1;
    if b.start == a.end {
        // The edge closes the two fragments into one cycle.
        if new_len > c {
            return;
        }
        let keep: Vec<Fragment> = s
            .fragments
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != vi && i != bi)
            .map(|(_, fr)| fr.clone())
            .collect();
        s.fragments = keep;
        s.done.push(a.end);
        if u_in != a.end {
            s.done.push(u_in);
        }
        s.done.sort_unstable();
        s.done.dedup();
        f(s);
        return;
    }
    if new_len > c.saturating_sub(1) {
        return;
    }
    let merged = Fragment { start: b.start, end: a.end, len: new_len };
    let mut keep: Vec<Fragment> = s
        .fragments
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != vi && i != bi)
        .map(|(_, fr)| fr.clone())
        .collect();
    keep.push(merged.clone());
    s.fragments = keep;
    if u_in != merged.start {
        s.done.push(u_in);
    }
    s.done.sort_unstable();
    s.done.dedup();
    f(s);
}

/// Combine two child states at a join: per-vertex degrees add, fragments
/// stitch through shared endpoints, cycles may close. Returns None when
/// incompatible (degree clash, overlong fragment or cycle).
fn join_states(left: &DpState, right: &DpState, c: usize) -> Option<DpState> {
    // Vertex universes agree (same bag), as len-0 fragments or better.
    let mut verts: BTreeSet<NodeId> = BTreeSet::new();
    for f in left.fragments.iter().chain(right.fragments.iter()) {
        verts.insert(f.start);
        verts.insert(f.end);
    }
    for &v in left.done.iter().chain(right.done.iter()) {
        verts.insert(v);
    }
    for &v in &verts {
        let (li, lo) = left.degree(v);
        let (ri, ro) = right.degree(v);
        if (li && ri) || (lo && ro) {
            return None;
        }
    }
    // Collect real fragments from both sides; len-0 fragments are
    // implicit placeholders.
    let mut frags: Vec<Fragment> = Vec::new();
    for f in left.fragments.iter().chain(right.fragments.iter()) {
        if f.len > 0 {
            frags.push(f.clone());
        }
    }
    let mut done: BTreeSet<NodeId> =
        left.done.iter().chain(right.done.iter()).copied().collect();

    // Stitch fragments: repeatedly merge x->v with v->y.
    let mut closed_ok = true;
    loop {
        let mut merged_any = false;
        'outer: for i in 0..frags.len() {
            for j in 0..frags.len() {
                if i == j {
                    continue;
                }
                if frags[i].end == frags[j].start {
                    let a = frags[i].clone();
                    let b = frags[j].clone();
                    let shared = a.end;
                    if a.start == b.end && a.start == shared {
                        continue; // degenerate, handled as cycle below
                    }
                    if a.start == b.end {
                        // Cycle closes: a.start .. shared .. back.
                        let cyc_len = a.len + b.len;
                        if cyc_len > c {
                            closed_ok = false;
                        }
                        done.insert(a.start);
                        done.insert(shared);
                        let (hi, lo) = (i.max(j), i.min(j));
                        frags.remove(hi);
                        frags.remove(lo);
                    } else {
                        let merged = Fragment {
                            start: a.start,
                            end: b.end,
                            len: a.len + b.len,
                        };
                        done.insert(shared);
                        let (hi, lo) = (i.max(j), i.min(j));
                        frags.remove(hi);
                        frags.remove(lo);
                        frags.push(merged);
                    }
                    merged_any = true;
                    break 'outer;
                }
            }
        }
        if !merged_any {
            break;
        }
    }
    if !closed_ok {
        return None;
    }
    for f in &frags {
        if f.len > c.saturating_sub(1) {
            return None;
        }
        done.remove(&f.start);
        done.remove(&f.end);
    }
    // Remaining untouched vertices become len-0 fragments.
    let mut state = DpState::default();
    state.fragments = frags;
    for &v in &verts {
        if done.contains(&v) {
            continue;
        }
        let engaged = state
            .fragments
            .iter()
            .any(|f| f.start == v || f.end == v);
        if !engaged {
            state.fragments.push(Fragment { start: v, end: v, len: 0 });
        }
    }
    state.done = done.into_iter().collect();
    Some(state.normalized())
}

// ---------------------------------------------------------------------------
// Formula expansion.

#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub circuit_size: usize,
    pub formula_size: usize,
    pub circuit_depth: usize,
    pub max_fanin: usize,
    /// (max_fanin + 1) ^ depth, the coarse expansion envelope.
    pub envelope: BigInt,
}

/// Expand a circuit DAG into a tree-shaped formula, duplicating shared
/// subterms. Fails when the result would exceed `size_budget` gates.
pub fn expand_to_formula(c: &Circuit, size_budget: usize) -> Result<(Formula, ExpansionReport)> {
    c.validate()?;
    let mut b = CircuitBuilder::new();
    let mut size_so_far = 0usize;

    fn rec(
        c: &Circuit,
        id: GateId,
        b: &mut CircuitBuilder,
        size: &mut usize,
        budget: usize,
    ) -> Result<GateId> {
        *size += 1;
        if *size > budget {
            return Err(Error::SizeBudgetExceeded { size: *size, budget });
        }
        let gate = match &c.gates[id] {
            Gate::InputVar(v) => b.var(*v),
            Gate::Const(k) => b.constant(k.clone()),
            Gate::Add(cs) => {
                let children = cs
                    .iter()
                    .map(|&ch| rec(c, ch, b, size, budget))
                    .collect::<Result<Vec<_>>>()?;
                b.add(children)
            }
            Gate::Mul(cs) => {
                let children = cs
                    .iter()
                    .map(|&ch| rec(c, ch, b, size, budget))
                    .collect::<Result<Vec<_>>>()?;
                b.mul(children)
            }
        };
        Ok(gate)
    }

    let out = rec(c, c.output, &mut b, &mut size_so_far, size_budget)?;
    let formula = Formula::new(b.finish(out, c.constant_free))?;

    let mut depth = vec![0usize; c.gates.len()];
    let mut max_fanin = 0usize;
    for (i, g) in c.gates.iter().enumerate() {
        max_fanin = max_fanin.max(g.children().len());
        depth[i] = g.children().iter().map(|&ch| depth[ch] + 1).max().unwrap_or(0);
    }
    let circuit_depth = depth[c.output];
    let envelope = BigInt::from(max_fanin + 1).pow(circuit_depth as u32);
    let report = ExpansionReport {
        circuit_size: c.size(),
        formula_size: formula.size(),
        circuit_depth,
        max_fanin,
        envelope,
    };
    Ok((formula, report))
}

// ---------------------------------------------------------------------------
// Membership polynomial: the k-cycle selection composed with the DP.

/// The arithmetized predicate for "these n*n edge variables form the
/// adjacency matrix of a single directed cycle of length exactly k".
/// Variables are E.(i*n+j).
pub fn cyc_predicate_circuit(n: usize, k: usize) -> Circuit {
    let mut b = BoolCircuitBuilder::new();
    let evar = |i: usize, j: usize| VarId::e((i * n + j) as u32);
    let e: Vec<Vec<GateId>> = (0..n)
        .map(|i| (0..n).map(|j| b.var(evar(i, j))).collect())
        .collect();

    // Degree consistency: out_i = in_i = y_i as exact 0/1 sums.
    // exactly_zero / exactly_one over a row via DP-free small circuits:
    // at_most_one(xs) and or(xs).
    let mut touched: Vec<GateId> = Vec::new();
    let mut degree_ok: Vec<GateId> = Vec::new();
    for i in 0..n {
        let row: Vec<GateId> = (0..n).map(|j| e[i][j]).collect();
        let col: Vec<GateId> = (0..n).map(|j| e[j][i]).collect();
        let out_any = b.or(row.clone());
        let in_any = b.or(col.clone());
        let out_le1 = at_most_one(&mut b, &row);
        let in_le1 = at_most_one(&mut b, &col);
        // out_any == in_any: both or neither.
        let both = b.and(vec![out_any, in_any]);
        let n_out = b.not(out_any);
        let n_in = b.not(in_any);
        let neither = b.and(vec![n_out, n_in]);
        let same = b.or(vec![both, neither]);
        degree_ok.push(b.and(vec![out_le1, in_le1, same]));
        touched.push(out_any);
    }

    // Exactly k edges: thermometer DP over all n^2 variables.
    let all_edges: Vec<GateId> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| e[i][j])
        .collect();
    let exactly_k = exactly_count(&mut b, &all_edges, k);

    // Single cycle: every pair of touched vertices connected via selected
    // edges. Transitive closure by repeated squaring.
    let mut reach: Vec<Vec<GateId>> = e.clone();
    let rounds = (usize::BITS - n.leading_zeros()) as usize + 1;
    for _ in 0..rounds {
        let mut next = vec![vec![0usize; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut terms = vec![reach[i][j]];
                for m in 0..n {
                    terms.push(b.and(vec![reach[i][m], reach[m][j]]));
                }
                next[i][j] = b.or(terms);
            }
        }
        reach = next;
    }
    let mut connected_terms: Vec<GateId> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            // touched_i and touched_j implies reach[i][j].
            let tij = b.and(vec![touched[i], touched[j]]);
            let nt = b.not(tij);
            connected_terms.push(b.or(vec![nt, reach[i][j]]));
        }
    }

    let mut clauses = degree_ok;
    clauses.push(exactly_k);
    clauses.extend(connected_terms);
    let out = b.and(clauses);
    let bc = b.finish(out);
    arithmetize(&bc)
}

fn at_most_one(b: &mut BoolCircuitBuilder, xs: &[GateId]) -> GateId {
    let mut viol: Vec<GateId> = Vec::new();
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            viol.push(b.and(vec![xs[i], xs[j]]));
        }
    }
    if viol.is_empty() {
        b.constant(true)
    } else {
        let any = b.or(viol);
        b.not(any)
    }
}

/// Boolean circuit gate: exactly `k` of `xs` are true.
fn exactly_count(b: &mut BoolCircuitBuilder, xs: &[GateId], k: usize) -> GateId {
    // t[j] = exactly j of the inputs seen so far.
    let mut t: Vec<GateId> = Vec::with_capacity(k + 1);
    t.push(b.constant(true));
    for _ in 1..=k {
        t.push(b.constant(false));
    }
    for &x in xs {
        let nx = b.not(x);
        let mut next = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let stay = b.and(vec![nx, t[j]]);
            let step = if j > 0 {
                let s = b.and(vec![x, t[j - 1]]);
                b.or(vec![stay, s])
            } else {
                stay
            };
            next.push(step);
        }
        t = next;
    }
    t[k]
}

/// Report from the membership composition.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub value: SparsePolynomial,
    pub oracle: SparsePolynomial,
    pub matches: bool,
    pub k_cycles_considered: usize,
}

/// The upper-bound composition for a validated nice graph: enumerate the
/// weight-k edge selections, gate them through the arithmetized cycle
/// predicate, weigh the selected cycle, force untouched V1 nodes onto
/// their self-loops, and finish V2 with the DP for the length-capped
/// permanent under the touched-vertex weight surgery. The result is
/// checked against the brute-force restricted permanent.
pub fn membership_polynomial(
    g: &WeightedDigraph,
    part: &NicePartition,
    k: usize,
    c: usize,
    dec2: &TreeDecomposition,
    budget: u64,
) -> Result<MembershipReport> {
    use itertools::Itertools;

    let n = g.n;
    assert!(k >= 1);
    let cyc = cyc_predicate_circuit(n, k);
    let evar = |i: usize, j: usize| VarId::e((i * n + j) as u32);

    // Pair weights; slots with zero total weight can never contribute.
    let mut pair_w: BTreeMap<(usize, usize), SparsePolynomial> = BTreeMap::new();
    for e in &g.edges {
        pair_w
            .entry((e.src, e.dst))
            .or_insert_with(SparsePolynomial::zero)
            .add_assign(&e.weight);
    }
    let present: Vec<(usize, usize)> = pair_w.keys().copied().collect();

    // The V2 decomposition, renumbered to the induced subgraph's ids.
    let (g2, map2) = g.induced(&part.v2);
    let dec2_local = TreeDecomposition {
        bags: dec2
            .bags
            .iter()
            .map(|bag| bag.iter().map(|v| map2[v]).collect())
            .collect(),
        tree_edges: dec2.tree_edges.clone(),
    };
    let nice2 = if part.v2.is_empty() { None } else { Some(make_nice(&dec2_local, &g2)?) };

    let mut total = SparsePolynomial::zero();
    let mut considered = 0usize;

    for combo in present.iter().combinations(k) {
        let slots: Vec<(usize, usize)> = combo.iter().map(|&&s| s).collect();
        let mut asg: BTreeMap<VarId, BigInt> = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                asg.insert(evar(i, j), BigInt::from(0));
            }
        }
        for &(i, j) in &slots {
            asg.insert(evar(i, j), BigInt::from(1));
        }
        let is_cycle = cyc.eval_point(&asg)?;
        if is_cycle == BigInt::from(0) {
            continue;
        }
        if is_cycle != BigInt::from(1) {
            return Err(Error::Parse(format!(
                "cycle predicate returned non-boolean value {is_cycle}"
            )));
        }
        considered += 1;
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        for &(i, j) in &slots {
            touched.insert(i);
            touched.insert(j);
        }
        let mut term = SparsePolynomial::one();
        for &(i, j) in &slots {
            term = &term * &pair_w[&(i, j)];
        }
        // Untouched V1 vertices ride their self-loops.
        let mut dead = false;
        for &v in &part.v1 {
            if !touched.contains(&v) {
                let w = g.pair_weight(v, v);
                if w.is_zero() {
                    dead = true;
                    break;
                }
                term = &term * &w;
            }
        }
        if dead {
            continue;
        }
        // V2 under surgery: touched vertices lose their out-edges and
        // get a weight-1 self-loop instead.
        if let Some(nice2) = &nice2 {
            let mut gs = WeightedDigraph::new(g2.n);
            for e in &g2.edges {
                let orig_src = part.v2.iter().nth(e.src).copied().unwrap();
                if touched.contains(&orig_src) {
                    continue;
                }
                gs.add_edge(e.src, e.dst, e.weight.clone());
            }
            for (&orig, &new) in &map2 {
                if touched.contains(&orig) {
                    gs.add_edge(new, new, SparsePolynomial::one());
                }
            }
            let circuit = dp_per_le_c(&gs, nice2, c, DpOptions::default())?;
            let v2_part = circuit.eval_poly(1_000_000)?;
            term = &term * &v2_part;
        }
        total.add_assign(&term);
    }

    let oracle = restricted_permanent(g, k, c, budget)?;
    let matches = total == oracle;
    Ok(MembershipReport { value: total, oracle, matches, k_cycles_considered: considered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::per_le_c;

    fn unit() -> SparsePolynomial {
        SparsePolynomial::one()
    }

    #[test]
    fn validate_single_bag() {
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 1, unit());
        g.add_edge(1, 2, unit());
        let dec = TreeDecomposition { bags: vec![vec![0, 1, 2]], tree_edges: vec![] };
        let rep = dec.validate(&g);
        assert!(rep.is_ok());
        assert_eq!(rep.width, 2);
    }

    #[test]
    fn validate_path_bags() {
        let n = 5;
        let mut g = WeightedDigraph::new(n);
        for i in 0..n - 1 {
            g.add_edge(i, i + 1, unit());
        }
        let bags: Vec<Vec<usize>> = (0..n - 1).map(|i| vec![i, i + 1]).collect();
        let tree_edges: Vec<(usize, usize)> = (0..n - 2).map(|i| (i, i + 1)).collect();
        let dec = TreeDecomposition { bags, tree_edges };
        let rep = dec.validate(&g);
        assert!(rep.is_ok());
        assert_eq!(rep.width, 1);
    }

    #[test]
    fn validate_missing_edge_bag() {
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 2, unit());
        let dec = TreeDecomposition { bags: vec![vec![0, 1], vec![1, 2]], tree_edges: vec![(0, 1)] };
        let rep = dec.validate(&g);
        assert!(!rep.covers_edges);
        assert!(!rep.is_ok());
    }

    #[test]
    fn make_nice_roundtrip() {
        let mut g = WeightedDigraph::new(4);
        g.add_edge(0, 1, unit());
        g.add_edge(1, 2, unit());
        g.add_edge(2, 3, unit());
        g.add_edge(3, 0, unit());
        let dec = TreeDecomposition {
            bags: vec![vec![0, 1, 2], vec![0, 2, 3]],
            tree_edges: vec![(0, 1)],
        };
        assert!(dec.validate(&g).is_ok());
        let nice = make_nice(&dec, &g).unwrap();
        nice.validate().unwrap();
        assert_eq!(nice.width(), dec.width());
        assert!(nice.to_plain().validate(&g).is_ok());
    }

    #[test]
    fn naive_treewidth_known_values() {
        // A tree has width 1.
        let mut g = WeightedDigraph::new(5);
        g.add_edge(0, 1, unit());
        g.add_edge(0, 2, unit());
        g.add_edge(2, 3, unit());
        g.add_edge(2, 4, unit());
        let (w, dec) = naive_treewidth(&g).unwrap();
        assert_eq!(w, 1);
        assert!(dec.validate(&g).is_ok());
        assert_eq!(dec.width(), 1);

        // K4 has width 3.
        let mut g = WeightedDigraph::new(4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    g.add_edge(i, j, unit());
                }
            }
        }
        let (w, dec) = naive_treewidth(&g).unwrap();
        assert_eq!(w, 3);
        assert!(dec.validate(&g).is_ok());

        // A cycle has width 2.
        let mut g = WeightedDigraph::new(6);
        for i in 0..6 {
            g.add_edge(i, (i + 1) % 6, unit());
        }
        let (w, _) = naive_treewidth(&g).unwrap();
        assert_eq!(w, 2);
    }

    #[test]
    fn dp_single_loop() {
        let mut g = WeightedDigraph::new(1);
        g.add_edge(0, 0, SparsePolynomial::var(VarId::x(0)));
        let dec = TreeDecomposition { bags: vec![vec![0]], tree_edges: vec![] };
        let nice = make_nice(&dec, &g).unwrap();
        let circ = dp_per_le_c(&g, &nice, 1, DpOptions::default()).unwrap();
        assert_eq!(circ.eval_poly(1000).unwrap(), SparsePolynomial::var(VarId::x(0)));
    }

    #[test]
    fn dp_two_node_cycle_and_loops() {
        let mut g = WeightedDigraph::new(2);
        let a = SparsePolynomial::var(VarId::x(0));
        let bb = SparsePolynomial::var(VarId::x(1));
        let s1 = SparsePolynomial::var(VarId::x(2));
        let s2 = SparsePolynomial::var(VarId::x(3));
        g.add_edge(0, 1, a.clone());
        g.add_edge(1, 0, bb.clone());
        g.add_edge(0, 0, s1.clone());
        g.add_edge(1, 1, s2.clone());
        let dec = TreeDecomposition { bags: vec![vec![0, 1]], tree_edges: vec![] };
        let nice = make_nice(&dec, &g).unwrap();
        let circ = dp_per_le_c(&g, &nice, 2, DpOptions::default()).unwrap();
        let expect = &(&s1 * &s2) + &(&a * &bb);
        assert_eq!(circ.eval_poly(1000).unwrap(), expect);

        let circ1 = dp_per_le_c(&g, &nice, 1, DpOptions::default()).unwrap();
        assert_eq!(circ1.eval_poly(1000).unwrap(), &s1 * &s2);
    }

    #[test]
    fn dp_matches_bruteforce_random() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for trial in 0..30 {
            let n = 3 + (trial % 6);
            let width = 1 + (trial % 3);
            let (g, dec) =
                crate::generators::random_bounded_tw_digraph(&mut rng, n, width, 0.5, 0.7);
            let nice = make_nice(&dec, &g).unwrap();
            for c in 1..=4 {
                let circ = dp_per_le_c(&g, &nice, c, DpOptions::default()).unwrap();
                let got = circ.eval_poly(1_000_000).unwrap();
                let want = per_le_c(&g, c, 10_000_000).unwrap();
                assert_eq!(got, want, "trial {trial} n {n} c {c}");
            }
        }
    }

    #[test]
    fn dp_join_multiplicity_crossing_cycle() {
        // 4-cycle u -> p -> v -> q -> u with p and q in different
        // join branches; the cover using the full cycle must be counted
        // exactly once.
        let mut g = WeightedDigraph::new(4);
        let w = |i: u32| SparsePolynomial::var(VarId::x(i));
        g.add_edge(0, 2, w(0)); // u -> p
        g.add_edge(2, 1, w(1)); // p -> v
        g.add_edge(1, 3, w(2)); // v -> q
        g.add_edge(3, 0, w(3)); // q -> u
        let dec = TreeDecomposition {
            bags: vec![vec![0, 1, 2], vec![0, 1, 3]],
            tree_edges: vec![(0, 1)],
        };
        assert!(dec.validate(&g).is_ok());
        let nice = make_nice(&dec, &g).unwrap();
        let circ = dp_per_le_c(&g, &nice, 4, DpOptions::default()).unwrap();
        let got = circ.eval_poly(1000).unwrap();
        let want = per_le_c(&g, 4, 100_000).unwrap();
        assert_eq!(got, want);
        let prod = &(&w(0) * &w(1)) * &(&w(2) * &w(3));
        assert_eq!(got, prod);
    }

    #[test]
    fn expansion_identity_on_tree() {
        let mut b = CircuitBuilder::new();
        let x0 = b.var(VarId::x(0));
        let x1 = b.var(VarId::x(1));
        let s = b.add(vec![x0, x1]);
        let c = b.finish(s, true);
        let (f, rep) = expand_to_formula(&c, 1000).unwrap();
        assert_eq!(f.size(), c.size());
        assert_eq!(rep.formula_size, rep.circuit_size);
    }

    #[test]
    fn expansion_duplicates_shared_terms() {
        let mut b = CircuitBuilder::new();
        let x0 = b.var(VarId::x(0));
        let shared = b.mul(vec![x0, x0]);
        let top = b.add(vec![shared, shared]);
        let c = b.finish(top, true);
        let (f, rep) = expand_to_formula(&c, 1000).unwrap();
        assert!(f.size() > c.size());
        assert_eq!(
            f.circuit().eval_poly(100).unwrap(),
            c.eval_poly(100).unwrap()
        );
        assert!(BigInt::from(rep.formula_size) <= rep.envelope);
    }

    #[test]
    fn expansion_point_agreement_on_dp_circuit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (g, dec) = crate::generators::random_bounded_tw_digraph(&mut rng, 8, 3, 0.45, 0.8);
        let nice = make_nice(&dec, &g).unwrap();
        let circ = dp_per_le_c(&g, &nice, 3, DpOptions::default()).unwrap();
        let (formula, _) = expand_to_formula(&circ, 5_000_000).unwrap();
        let vars = circ.input_vars();
        for _ in 0..5 {
            let mut asg = BTreeMap::new();
            for &v in &vars {
                asg.insert(v, BigInt::from(rng.gen_range(-3i64..4)));
            }
            assert_eq!(
                circ.eval_point(&asg).unwrap(),
                formula.circuit().eval_point(&asg).unwrap()
            );
        }
    }
}
