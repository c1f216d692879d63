//! Weighted directed multigraphs and exhaustive cycle-cover machinery.
//!
//! The enumerator here is the ground-truth oracle for every permanent
//! variant: it backtracks over covers directly, with the least-index
//! uncovered node always extended next so each cover appears exactly once.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;

use crate::algebra::{SparsePolynomial, VarId};
use crate::error::{Error, Result};
use crate::twdp::TreeDecomposition;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: SparsePolynomial,
}

/// Directed multigraph with polynomial edge weights. Parallel edges and
/// self-loops are allowed; covers are sets of edge ids, not node pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightedDigraph {
    pub n: usize,
    pub edges: Vec<Edge>,
}

impl WeightedDigraph {
    pub fn new(n: usize) -> WeightedDigraph {
        WeightedDigraph { n, edges: Vec::new() }
    }

    pub fn add_node(&mut self) -> NodeId {
        self.n += 1;
        self.n - 1
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, weight: SparsePolynomial) -> EdgeId {
        assert!(src < self.n && dst < self.n, "edge endpoints out of range");
        let id = self.edges.len();
        self.edges.push(Edge { id, src, dst, weight });
        id
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn out_adjacency(&self) -> Vec<Vec<EdgeId>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.src].push(e.id);
        }
        adj
    }

    /// Sum of the weights of all edges from `src` to `dst`.
    pub fn pair_weight(&self, src: NodeId, dst: NodeId) -> SparsePolynomial {
        let mut w = SparsePolynomial::zero();
        for e in &self.edges {
            if e.src == src && e.dst == dst {
                w.add_assign(&e.weight);
            }
        }
        w
    }

    /// Subgraph induced by `keep`, with nodes renumbered densely in
    /// ascending order of the original ids. Returns the old-to-new map.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> (WeightedDigraph, BTreeMap<NodeId, NodeId>) {
        let map: BTreeMap<NodeId, NodeId> =
            keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let mut g = WeightedDigraph::new(keep.len());
        for e in &self.edges {
            if let (Some(&s), Some(&d)) = (map.get(&e.src), map.get(&e.dst)) {
                g.add_edge(s, d, e.weight.clone());
            }
        }
        (g, map)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("DIGRAPH {} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            out.push_str(&format!("{} {} {} {}\n", e.id, e.src, e.dst, e.weight.to_inline()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<WeightedDigraph> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty graph text".into()))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some("DIGRAPH") {
            return Err(Error::Parse("expected DIGRAPH header".into()));
        }
        let n: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad node count".into()))?;
        let m: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad edge count".into()))?;
        let mut g = WeightedDigraph::new(n);
        for _ in 0..m {
            let line = lines.next().ok_or_else(|| Error::Parse("missing edge line".into()))?;
            let mut it = line.splitn(4, ' ');
            let id: EdgeId = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("bad edge id".into()))?;
            if id != g.edges.len() {
                return Err(Error::Parse("edge ids must be dense".into()));
            }
            let src: NodeId = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("bad edge source".into()))?;
            let dst: NodeId = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("bad edge target".into()))?;
            let w = SparsePolynomial::from_inline(
                it.next().ok_or_else(|| Error::Parse("missing edge weight".into()))?,
            )?;
            if src >= n || dst >= n {
                return Err(Error::Parse("edge endpoint out of range".into()));
            }
            g.add_edge(src, dst, w);
        }
        Ok(g)
    }
}

/// A cycle cover: node-disjoint directed cycles covering every node.
/// Each cycle is a list of edge ids in traversal order starting at the
/// cycle's minimal node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleCover {
    pub cycles: Vec<Vec<EdgeId>>,
}

impl CycleCover {
    pub fn edge_ids(&self) -> Vec<EdgeId> {
        let mut ids: Vec<EdgeId> = self.cycles.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn cycle_lengths(&self) -> Vec<usize> {
        self.cycles.iter().map(|c| c.len()).collect()
    }

    pub fn weight(&self, g: &WeightedDigraph) -> SparsePolynomial {
        let mut w = SparsePolynomial::one();
        for &e in self.cycles.iter().flatten() {
            w = &w * &g.edge(e).weight;
        }
        w
    }

    /// Structural check: in-degree and out-degree exactly one at every
    /// node of the graph.
    pub fn check_degrees(&self, g: &WeightedDigraph) -> bool {
        let mut indeg = vec![0usize; g.n];
        let mut outdeg = vec![0usize; g.n];
        for &e in self.cycles.iter().flatten() {
            outdeg[g.edge(e).src] += 1;
            indeg[g.edge(e).dst] += 1;
        }
        indeg.iter().all(|&d| d == 1) && outdeg.iter().all(|&d| d == 1)
    }
}

/// Pair of iff-coupled edges: both in a cover or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IffCoupling(pub EdgeId, pub EdgeId);

/// Cycle-length policy for the enumerator. `Restricted` follows the
/// convention that a cover qualifies when it has at least one cycle of
/// length exactly `k` and every other cycle has length at most `c`
/// (for `k > c` this forces exactly one `k`-cycle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverKind {
    All,
    MaxLen { c: usize },
    Restricted { k: usize, c: usize },
}

impl CoverKind {
    fn max_cycle_len(&self, n: usize) -> usize {
        match *self {
            CoverKind::All => n,
            CoverKind::MaxLen { c } => c,
            CoverKind::Restricted { k, c } => k.max(c),
        }
    }

    /// Is a single closed cycle of this length ever admissible?
    fn cycle_ok(&self, len: usize) -> bool {
        match *self {
            CoverKind::All => true,
            CoverKind::MaxLen { c } => len <= c,
            CoverKind::Restricted { k, c } => len == k || len <= c,
        }
    }

    fn cover_ok(&self, lengths: &[usize]) -> bool {
        match *self {
            CoverKind::All | CoverKind::MaxLen { .. } => true,
            CoverKind::Restricted { k, c } => {
                let exact = lengths.iter().filter(|&&l| l == k).count();
                exact >= 1 && (k <= c || exact == 1)
            }
        }
    }
}

pub const DEFAULT_BUDGET: u64 = 10_000_000;

struct Enumerator<'a, F: FnMut(&CycleCover)> {
    g: &'a WeightedDigraph,
    adj: Vec<Vec<EdgeId>>,
    radj: Vec<Vec<NodeId>>,
    kind: CoverKind,
    couplings: &'a [IffCoupling],
    budget: u64,
    visited: u64,
    covered: Vec<bool>,
    used_edges: Vec<bool>,
    n_covered: usize,
    cycles: Vec<Vec<EdgeId>>,
    exact_long: usize,
    visit: F,
}

impl<'a, F: FnMut(&CycleCover)> Enumerator<'a, F> {
    fn run(&mut self) -> Result<()> {
        self.descend()
    }

    fn charge(&mut self) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::BudgetExceeded { visited: self.visited, budget: self.budget });
        }
        Ok(())
    }

    /// Cap on the next cycle's length: once the single permitted long
    /// cycle is placed, everything else obeys the short cap.
    fn current_max_len(&self) -> usize {
        match self.kind {
            CoverKind::All => self.g.n,
            CoverKind::MaxLen { c } => c,
            CoverKind::Restricted { k, c } => {
                if k > c && self.exact_long >= 1 {
                    c
                } else {
                    k.max(c)
                }
            }
        }
    }

    fn descend(&mut self) -> Result<()> {
        self.charge()?;
        if self.n_covered == self.g.n {
            let lengths: Vec<usize> = self.cycles.iter().map(|c| c.len()).collect();
            if self.kind.cover_ok(&lengths) && self.couplings_ok() {
                let cover = CycleCover { cycles: self.cycles.clone() };
                (self.visit)(&cover);
            }
            return Ok(());
        }
        // A missing mandatory long cycle can only still appear if enough
        // nodes remain uncovered.
        if let CoverKind::Restricted { k, c } = self.kind {
            if k > c && self.exact_long == 0 && self.g.n - self.n_covered < k {
                return Ok(());
            }
        }
        let anchor = (0..self.g.n).find(|&v| !self.covered[v]).unwrap();
        // Distance back to the anchor through uncovered nodes; paths that
        // cannot return in the remaining length die immediately. Distances
        // only shrink as more nodes are covered, so this stays a sound
        // lower bound along the whole cycle construction.
        let max_len = self.current_max_len();
        let dist_back = self.reverse_distances(anchor, max_len);
        self.covered[anchor] = true;
        self.n_covered += 1;
        let mut path: Vec<EdgeId> = Vec::new();
        self.extend_cycle(anchor, anchor, &mut path, &dist_back)?;
        self.covered[anchor] = false;
        self.n_covered -= 1;
        Ok(())
    }

    fn reverse_distances(&self, anchor: NodeId, max_len: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.g.n];
        dist[anchor] = 0;
        let mut frontier = vec![anchor];
        let mut d = 0u32;
        while !frontier.is_empty() && (d as usize) < max_len {
            d += 1;
            let mut next = Vec::new();
            for &v in &frontier {
                for &u in &self.radj[v] {
                    if dist[u] == u32::MAX && (!self.covered[u] || u == anchor) && u >= anchor {
                        dist[u] = d;
                        next.push(u);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    fn extend_cycle(
        &mut self,
        anchor: NodeId,
        at: NodeId,
        path: &mut Vec<EdgeId>,
        dist_back: &[u32],
    ) -> Result<()> {
        self.charge()?;
        let max_len = self.current_max_len();
        for i in 0..self.adj[at].len() {
            let eid = self.adj[at][i];
            let dst = self.g.edge(eid).dst;
            if dst == anchor {
                let len = path.len() + 1;
                if !self.kind.cycle_ok(len) {
                    continue;
                }
                let is_long = matches!(self.kind, CoverKind::Restricted { k, c } if len == k && k > c);
                if is_long && self.exact_long >= 1 {
                    continue;
                }
                path.push(eid);
                self.used_edges[eid] = true;
                self.cycles.push(path.clone());
                if is_long {
                    self.exact_long += 1;
                }
                self.descend()?;
                if is_long {
                    self.exact_long -= 1;
                }
                self.cycles.pop();
                self.used_edges[eid] = false;
                path.pop();
            } else if !self.covered[dst]
                && dst > anchor
                && path.len() + 1 < max_len
                && dist_back[dst] != u32::MAX
                && path.len() + 1 + dist_back[dst] as usize <= max_len
            {
                path.push(eid);
                self.used_edges[eid] = true;
                self.covered[dst] = true;
                self.n_covered += 1;
                self.extend_cycle(anchor, dst, path, dist_back)?;
                self.covered[dst] = false;
                self.n_covered -= 1;
                self.used_edges[eid] = false;
                path.pop();
            }
        }
        Ok(())
    }

    fn couplings_ok(&self) -> bool {
        self.couplings
            .iter()
            .all(|&IffCoupling(a, b)| self.used_edges[a] == self.used_edges[b])
    }
}

/// Visit every admissible cycle cover exactly once.
pub fn for_each_cover<F: FnMut(&CycleCover)>(
    g: &WeightedDigraph,
    kind: CoverKind,
    couplings: &[IffCoupling],
    budget: u64,
    visit: F,
) -> Result<()> {
    let mut radj = vec![Vec::new(); g.n];
    for e in &g.edges {
        if e.src != e.dst {
            radj[e.dst].push(e.src);
        }
    }
    for r in &mut radj {
        r.sort_unstable();
        r.dedup();
    }
    let mut e = Enumerator {
        g,
        adj: g.out_adjacency(),
        radj,
        kind,
        couplings,
        budget,
        visited: 0,
        covered: vec![false; g.n],
        used_edges: vec![false; g.edges.len()],
        n_covered: 0,
        cycles: Vec::new(),
        exact_long: 0,
        visit,
    };
    e.run()
}

/// All admissible covers, materialized.
pub fn enumerate_covers(
    g: &WeightedDigraph,
    kind: CoverKind,
    couplings: &[IffCoupling],
    budget: u64,
) -> Result<Vec<CycleCover>> {
    let mut out = Vec::new();
    for_each_cover(g, kind, couplings, budget, |c| out.push(c.clone()))?;
    Ok(out)
}

fn cover_sum(
    g: &WeightedDigraph,
    kind: CoverKind,
    couplings: &[IffCoupling],
    budget: u64,
) -> Result<SparsePolynomial> {
    let mut total = SparsePolynomial::zero();
    for_each_cover(g, kind, couplings, budget, |c| total.add_assign(&c.weight(g)))?;
    Ok(total)
}

/// Brute-force permanent of a square matrix of polynomials.
pub fn permanent_bruteforce(m: &[Vec<SparsePolynomial>], budget: u64) -> Result<SparsePolynomial> {
    let n = m.len();
    for row in m {
        assert_eq!(row.len(), n, "matrix must be square");
    }
    let mut visited: u64 = 0;
    let mut total = SparsePolynomial::zero();
    let mut perm: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(
        m: &[Vec<SparsePolynomial>],
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        total: &mut SparsePolynomial,
        visited: &mut u64,
        budget: u64,
    ) -> Result<()> {
        *visited += 1;
        if *visited > budget {
            return Err(Error::BudgetExceeded { visited: *visited, budget });
        }
        let i = perm.len();
        if i == m.len() {
            let mut prod = SparsePolynomial::one();
            for (row, &col) in perm.iter().enumerate() {
                prod = &prod * &m[row][col];
            }
            total.add_assign(&prod);
            return Ok(());
        }
        for j in 0..m.len() {
            if !used[j] && !m[i][j].is_zero() {
                used[j] = true;
                perm.push(j);
                rec(m, perm, used, total, visited, budget)?;
                perm.pop();
                used[j] = false;
            }
        }
        Ok(())
    }
    rec(m, &mut perm, &mut used, &mut total, &mut visited, budget)?;
    Ok(total)
}

/// Weighted sum over covers with at least one cycle of length exactly `k`
/// and all other cycles of length at most `c`.
pub fn restricted_permanent(
    g: &WeightedDigraph,
    k: usize,
    c: usize,
    budget: u64,
) -> Result<SparsePolynomial> {
    cover_sum(g, CoverKind::Restricted { k, c }, &[], budget)
}

/// Weighted sum over covers whose cycles all have length at most `c`.
pub fn per_le_c(g: &WeightedDigraph, c: usize, budget: u64) -> Result<SparsePolynomial> {
    cover_sum(g, CoverKind::MaxLen { c }, &[], budget)
}

/// Weighted sum over covers satisfying every iff-coupling and the given
/// length policy.
pub fn consistent_cover_sum(
    g: &WeightedDigraph,
    couplings: &[IffCoupling],
    kind: CoverKind,
    budget: u64,
) -> Result<SparsePolynomial> {
    cover_sum(g, kind, couplings, budget)
}

/// The enumeration gadget: `2n` nodes `s_i, t_i`, a y-edge `s_i -> t_i`
/// per index, connecting edges `t_j -> s_l` for `j != l`, and self-loops
/// everywhere. All weights are 1.
#[derive(Debug, Clone)]
pub struct RnGraph {
    pub graph: WeightedDigraph,
    /// y_edges[i] is the edge id of the y-edge for index i.
    pub y_edges: Vec<EdgeId>,
}

pub fn build_rn(n: usize) -> RnGraph {
    assert!(n >= 1);
    let mut g = WeightedDigraph::new(2 * n);
    let s = |i: usize| 2 * i;
    let t = |i: usize| 2 * i + 1;
    let mut y_edges = Vec::with_capacity(n);
    for i in 0..n {
        y_edges.push(g.add_edge(s(i), t(i), SparsePolynomial::one()));
    }
    for j in 0..n {
        for l in 0..n {
            if j != l {
                g.add_edge(t(j), s(l), SparsePolynomial::one());
            }
        }
    }
    for v in 0..2 * n {
        g.add_edge(v, v, SparsePolynomial::one());
    }
    RnGraph { graph: g, y_edges }
}

/// Matching generating polynomial of K_n obtained from the length-two
/// restricted permanent of the complete digraph: build symbolic weights
/// X_{ij}, sum covers with all cycles of length at most 2, then
/// substitute 1 for the diagonal and the lower triangle.
pub fn matchings_via_22perm(n: usize, budget: u64) -> Result<SparsePolynomial> {
    let mut g = WeightedDigraph::new(n);
    let xvar = |i: usize, j: usize| VarId::x((i * n + j) as u32);
    for i in 0..n {
        for j in 0..n {
            g.add_edge(i, j, SparsePolynomial::var(xvar(i, j)));
        }
    }
    let symbolic = per_le_c(&g, 2, budget)?;
    let mut subst: BTreeMap<VarId, SparsePolynomial> = BTreeMap::new();
    for i in 0..n {
        subst.insert(xvar(i, i), SparsePolynomial::one());
        for j in 0..i {
            subst.insert(xvar(i, j), SparsePolynomial::one());
        }
    }
    Ok(symbolic.substitute(&subst))
}

/// Independent oracle for `matchings_via_22perm`: enumerate matchings of
/// K_n directly.
pub fn matching_polynomial_oracle(n: usize) -> SparsePolynomial {
    let xvar = |i: usize, j: usize| VarId::x((i * n + j) as u32);
    let mut total = SparsePolynomial::zero();
    fn rec(
        n: usize,
        first_free: usize,
        used: &mut Vec<bool>,
        acc: SparsePolynomial,
        total: &mut SparsePolynomial,
        xvar: &dyn Fn(usize, usize) -> VarId,
    ) {
        let mut i = first_free;
        while i < n && used[i] {
            i += 1;
        }
        if i >= n {
            total.add_assign(&acc);
            return;
        }
        used[i] = true;
        // i stays unmatched.
        rec(n, i + 1, used, acc.clone(), total, xvar);
        // i matched to some j > i.
        for j in (i + 1)..n {
            if !used[j] {
                used[j] = true;
                let w = &acc * &SparsePolynomial::var(xvar(i, j));
                rec(n, i + 1, used, w, total, xvar);
                used[j] = false;
            }
        }
        used[i] = false;
    }
    let mut used = vec![false; n];
    rec(n, 0, &mut used, SparsePolynomial::one(), &mut total, &xvar);
    total
}

/// Partition of the node set with the niceness parameters.
#[derive(Debug, Clone)]
pub struct NicePartition {
    pub v1: BTreeSet<NodeId>,
    pub v2: BTreeSet<NodeId>,
    pub c: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
pub struct NiceReport {
    /// Undirected girth of G[V1] ignoring self-loops, if any cycle exists.
    pub v1_girth: Option<usize>,
    pub girth_ok: bool,
    pub self_loops_ok: bool,
    pub decomposition_ok: bool,
    pub decomposition_width: Option<usize>,
    /// Shortest directed mixed cycle of length <= c, if one exists.
    pub short_mixed_cycle: Option<Vec<NodeId>>,
    pub mixed_ok: bool,
}

impl NiceReport {
    pub fn all_ok(&self) -> bool {
        self.girth_ok && self.self_loops_ok && self.decomposition_ok && self.mixed_ok
    }
}

/// Check the four niceness conditions. The tree decomposition of G[V2]
/// is supplied by the caller; only its validity and width are checked.
pub fn validate_nice(
    g: &WeightedDigraph,
    part: &NicePartition,
    dec2: &TreeDecomposition,
) -> NiceReport {
    assert!(part.v1.is_disjoint(&part.v2));
    assert!(part.v1.len() + part.v2.len() == g.n);

    let (g1, _) = g.induced(&part.v1);
    let v1_girth = undirected_girth_ignoring_loops(&g1);
    let girth_ok = v1_girth.map_or(true, |girth| girth > part.c);

    let self_loops_ok = part
        .v1
        .iter()
        .all(|&v| g.edges.iter().any(|e| e.src == v && e.dst == v));

    let (dec_ok, width) = check_decomposition_of_subset(g, &part.v2, dec2);
    let decomposition_ok = dec_ok && width.map_or(part.v2.is_empty(), |w| w <= part.b);

    let short_mixed_cycle = shortest_mixed_directed_cycle(g, &part.v1, part.c);
    let mixed_ok = short_mixed_cycle.is_none();

    NiceReport {
        v1_girth,
        girth_ok,
        self_loops_ok,
        decomposition_ok,
        decomposition_width: width,
        short_mixed_cycle,
        mixed_ok,
    }
}

/// Girth of the underlying undirected multigraph, ignoring self-loops.
/// Antiparallel directed pairs and parallel edges count as 2-cycles.
pub fn undirected_girth_ignoring_loops(g: &WeightedDigraph) -> Option<usize> {
    let mut pair_count: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    for e in &g.edges {
        if e.src != e.dst {
            let key = (e.src.min(e.dst), e.src.max(e.dst));
            *pair_count.entry(key).or_insert(0) += 1;
        }
    }
    if pair_count.values().any(|&c| c >= 2) {
        return Some(2);
    }
    // Simple undirected graph now; BFS from every vertex.
    let mut adj = vec![Vec::new(); g.n];
    for (&(u, v), _) in &pair_count {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut best: Option<usize> = None;
    for start in 0..g.n {
        let mut dist = vec![usize::MAX; g.n];
        let mut parent = vec![usize::MAX; g.n];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = dist[u] + dist[v] + 1;
                    if best.map_or(true, |b| len < b) {
                        best = Some(len);
                    }
                }
            }
        }
    }
    best
}

/// Shortest directed simple cycle of length at most `max_len` touching
/// both V1 and its complement, as a node list, if one exists.
fn shortest_mixed_directed_cycle(
    g: &WeightedDigraph,
    v1: &BTreeSet<NodeId>,
    max_len: usize,
) -> Option<Vec<NodeId>> {
    let adj = g.out_adjacency();
    let mut best: Option<Vec<NodeId>> = None;
    fn dfs(
        g: &WeightedDigraph,
        adj: &[Vec<EdgeId>],
        v1: &BTreeSet<NodeId>,
        start: NodeId,
        at: NodeId,
        path: &mut Vec<NodeId>,
        on_path: &mut Vec<bool>,
        max_len: usize,
        best: &mut Option<Vec<NodeId>>,
    ) {
        for &eid in &adj[at] {
            let dst = g.edge(eid).dst;
            if dst == start && path.len() >= 2 {
                let has_v1 = path.iter().any(|v| v1.contains(v));
                let has_v2 = path.iter().any(|v| !v1.contains(v));
                if has_v1 && has_v2 && best.as_ref().map_or(true, |b| path.len() < b.len()) {
                    *best = Some(path.clone());
                }
            } else if dst > start && !on_path[dst] && path.len() < max_len {
                path.push(dst);
                on_path[dst] = true;
                dfs(g, adj, v1, start, dst, path, on_path, max_len, best);
                on_path[dst] = false;
                path.pop();
            }
        }
    }
    for start in 0..g.n {
        let mut path = vec![start];
        let mut on_path = vec![false; g.n];
        on_path[start] = true;
        dfs(g, &adj, v1, start, start, &mut path, &mut on_path, max_len, &mut best);
    }
    best
}

/// Validity check for a tree decomposition whose vertex universe is the
/// given subset of g's nodes (bags hold original node ids).
fn check_decomposition_of_subset(
    g: &WeightedDigraph,
    subset: &BTreeSet<NodeId>,
    dec: &TreeDecomposition,
) -> (bool, Option<usize>) {
    if subset.is_empty() {
        return (true, None);
    }
    let mut undirected_edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for e in &g.edges {
        if e.src != e.dst && subset.contains(&e.src) && subset.contains(&e.dst) {
            undirected_edges.insert((e.src.min(e.dst), e.src.max(e.dst)));
        }
    }
    let report = dec.validate_for(subset, &undirected_edges);
    (report.is_ok(), Some(dec.width()))
}

/// Count assignments by coefficient: handy check that a polynomial is a
/// plain integer.
pub fn as_integer(p: &SparsePolynomial) -> Option<BigInt> {
    p.as_constant()
}
