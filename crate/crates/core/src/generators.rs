//! Seeded random instance generators used by tests and the batch suite.
//!
//! Everything here is deterministic given the RNG, so suite runs replay
//! byte-for-byte.

use rand::Rng;

use crate::algebra::{SparsePolynomial, VarId};
use crate::circuit::{layer_formula, Circuit, CircuitBuilder, Formula, GateId};
use crate::graph::WeightedDigraph;
use crate::twdp::TreeDecomposition;

/// Random formula over `n_x` X-variables and `n_y` Y-variables, layered,
/// with at most `max_gates` gates after layering.
pub fn random_layered_formula<R: Rng>(
    rng: &mut R,
    max_gates: usize,
    n_x: u32,
    n_y: u32,
) -> Formula {
    loop {
        let mut b = CircuitBuilder::new();
        let depth = rng.gen_range(1..=3);
        let out = random_formula_gate(rng, &mut b, depth, n_x, n_y);
        let f = Formula::new(b.finish(out, true)).expect("builder produces trees");
        let layered = layer_formula(&f);
        if layered.size() <= max_gates {
            return layered;
        }
    }
}

fn random_formula_gate<R: Rng>(
    rng: &mut R,
    b: &mut CircuitBuilder,
    depth: usize,
    n_x: u32,
    n_y: u32,
) -> GateId {
    if depth == 0 || rng.gen_bool(0.3) {
        return random_leaf(rng, b, n_x, n_y);
    }
    let fanin = rng.gen_range(1..=3);
    let children: Vec<GateId> = (0..fanin)
        .map(|_| random_formula_gate(rng, b, depth - 1, n_x, n_y))
        .collect();
    if rng.gen_bool(0.5) {
        b.add(children)
    } else {
        b.mul(children)
    }
}

fn random_leaf<R: Rng>(rng: &mut R, b: &mut CircuitBuilder, n_x: u32, n_y: u32) -> GateId {
    let total = n_x + n_y;
    let pick = rng.gen_range(0..total + 1);
    if pick < n_x {
        b.var(VarId::x(pick))
    } else if pick < total {
        b.var(VarId::y(pick - n_x))
    } else if n_x > 0 {
        // Constants stay rare and only appear when X-leaves exist too.
        b.constant(if rng.gen_bool(0.5) { 1 } else { -1 })
    } else {
        b.var(VarId::y(rng.gen_range(0..n_y)))
    }
}

/// Random small circuit (a DAG, possibly with sharing) over X and Y
/// variables, for the exponential-sum tests.
pub fn random_circuit<R: Rng>(rng: &mut R, max_gates: usize, n_x: u32, n_y: u32) -> Circuit {
    let mut b = CircuitBuilder::new();
    let mut pool: Vec<GateId> = Vec::new();
    for i in 0..n_x {
        pool.push(b.var(VarId::x(i)));
    }
    for i in 0..n_y {
        pool.push(b.var(VarId::y(i)));
    }
    if pool.is_empty() || rng.gen_bool(0.3) {
        pool.push(b.constant(if rng.gen_bool(0.5) { 1 } else { -1 }));
    }
    let extra = rng.gen_range(1..=max_gates.saturating_sub(pool.len()).max(1));
    for _ in 0..extra {
        let fanin = rng.gen_range(2..=3.min(pool.len()));
        let children: Vec<GateId> = (0..fanin)
            .map(|_| pool[rng.gen_range(0..pool.len())])
            .collect();
        let g = if rng.gen_bool(0.5) { b.add(children) } else { b.mul(children) };
        pool.push(g);
    }
    let out = *pool.last().unwrap();
    b.finish(out, true)
}

/// Random weighted digraph of treewidth at most `width`, together with a
/// valid tree decomposition of that width. The underlying undirected
/// graph is a random partial k-tree; each undirected slot may carry the
/// two directions independently, and self-loops appear per vertex.
///
/// Edge weights are fresh X-variables, one per edge, so polynomial
/// comparisons distinguish covers exactly.
pub fn random_bounded_tw_digraph<R: Rng>(
    rng: &mut R,
    n: usize,
    width: usize,
    edge_prob: f64,
    loop_prob: f64,
) -> (WeightedDigraph, TreeDecomposition) {
    assert!(n >= 1);
    let w = width.min(n - 1);
    let mut bags: Vec<Vec<usize>> = Vec::new();
    let mut tree_edges: Vec<(usize, usize)> = Vec::new();
    let first_bag: Vec<usize> = (0..=w).collect();
    bags.push(first_bag.clone());
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for i in 0..=w {
        for j in (i + 1)..=w {
            slots.push((i, j));
        }
    }
    for v in (w + 1)..n {
        let parent = rng.gen_range(0..bags.len());
        let mut base = bags[parent].clone();
        if base.len() > w {
            let drop = rng.gen_range(0..base.len());
            base.remove(drop);
        }
        while base.len() > w {
            base.remove(rng.gen_range(0..base.len()));
        }
        for &u in &base {
            slots.push((u.min(v), u.max(v)));
        }
        base.push(v);
        base.sort_unstable();
        bags.push(base);
        tree_edges.push((parent, bags.len() - 1));
    }
    slots.sort_unstable();
    slots.dedup();

    let mut g = WeightedDigraph::new(n);
    let mut next_var = 0u32;
    let fresh = |g: &mut WeightedDigraph, s: usize, t: usize, v: &mut u32| {
        g.add_edge(s, t, SparsePolynomial::var(VarId::x(*v)));
        *v += 1;
    };
    for &(u, v) in &slots {
        if rng.gen_bool(edge_prob) {
            fresh(&mut g, u, v, &mut next_var);
        }
        if rng.gen_bool(edge_prob) {
            fresh(&mut g, v, u, &mut next_var);
        }
    }
    for v in 0..n {
        if rng.gen_bool(loop_prob) {
            fresh(&mut g, v, v, &mut next_var);
        }
    }
    let dec = TreeDecomposition { bags, tree_edges };
    (g, dec)
}
