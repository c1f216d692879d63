//! Algebraic circuit and formula IR.
//!
//! Circuits are DAGs of addition and multiplication gates over variables
//! and integer constants, in topological order with a single output gate.
//! Formulas are tree-shaped circuits. Boolean circuits exist only as the
//! source of the arithmetization map.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::algebra::{SparsePolynomial, VarId};
use crate::error::{Error, Result};

pub type GateId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    InputVar(VarId),
    Const(BigInt),
    Add(Vec<GateId>),
    Mul(Vec<GateId>),
}

impl Gate {
    pub fn children(&self) -> &[GateId] {
        match self {
            Gate::InputVar(_) | Gate::Const(_) => &[],
            Gate::Add(cs) | Gate::Mul(cs) => cs,
        }
    }

    fn kind_str(&self) -> &'static str {
        match self {
            Gate::InputVar(_) => "var",
            Gate::Const(_) => "const",
            Gate::Add(_) => "add",
            Gate::Mul(_) => "mul",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub gates: Vec<Gate>,
    pub output: GateId,
    pub constant_free: bool,
    pub bounded_fanin: bool,
}

impl Circuit {
    /// Checks topological order, child bounds, the output gate, and the
    /// declared flags.
    pub fn validate(&self) -> Result<()> {
        if self.gates.is_empty() {
            return Err(Error::Parse("circuit has no gates".into()));
        }
        if self.output >= self.gates.len() {
            return Err(Error::Parse("output gate out of range".into()));
        }
        for (id, g) in self.gates.iter().enumerate() {
            for &c in g.children() {
                if c >= id {
                    return Err(Error::Parse(format!("gate {id} references later gate {c}")));
                }
            }
            match g {
                Gate::Add(cs) | Gate::Mul(cs) => {
                    if cs.is_empty() {
                        return Err(Error::Parse(format!("gate {id} has fan-in 0")));
                    }
                    if self.bounded_fanin && cs.len() > 2 {
                        return Err(Error::Parse(format!(
                            "gate {id} has fan-in {} in a bounded-fan-in circuit",
                            cs.len()
                        )));
                    }
                }
                Gate::Const(c) => {
                    if self.constant_free {
                        let ok = c.is_zero() || c.is_one() || (-c).is_one();
                        if !ok {
                            return Err(Error::Parse(format!(
                                "constant {c} in a constant-free circuit"
                            )));
                        }
                    }
                }
                Gate::InputVar(_) => {}
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    pub fn input_vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self
            .gates
            .iter()
            .filter_map(|g| match g {
                Gate::InputVar(v) => Some(*v),
                _ => None,
            })
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// Expand the circuit into the polynomial it computes. `term_budget`
    /// caps the number of terms of any intermediate polynomial.
    pub fn eval_poly(&self, term_budget: usize) -> Result<SparsePolynomial> {
        let mut values: Vec<SparsePolynomial> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let p = match g {
                Gate::InputVar(v) => SparsePolynomial::var(*v),
                Gate::Const(c) => SparsePolynomial::constant(c.clone()),
                Gate::Add(cs) => {
                    let mut acc = SparsePolynomial::zero();
                    for &c in cs {
                        acc.add_assign(&values[c]);
                    }
                    acc
                }
                Gate::Mul(cs) => {
                    let mut acc = SparsePolynomial::one();
                    for &c in cs {
                        acc = &acc * &values[c];
                    }
                    acc
                }
            };
            if p.num_terms() > term_budget {
                return Err(Error::TermBudgetExceeded {
                    terms: p.num_terms(),
                    budget: term_budget,
                });
            }
            values.push(p);
        }
        Ok(values[self.output].clone())
    }

    /// Evaluate at an integer point without expanding.
    pub fn eval_point(&self, assignment: &BTreeMap<VarId, BigInt>) -> Result<BigInt> {
        let mut values: Vec<BigInt> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let v = match g {
                Gate::InputVar(v) => assignment
                    .get(v)
                    .cloned()
                    .ok_or(Error::MissingVariable(*v))?,
                Gate::Const(c) => c.clone(),
                Gate::Add(cs) => cs.iter().map(|&c| values[c].clone()).sum(),
                Gate::Mul(cs) => cs.iter().fold(BigInt::one(), |acc, &c| acc * &values[c]),
            };
            values.push(v);
        }
        Ok(values[self.output].clone())
    }

    /// Syntactic degree: 1 at leaves, max at additions, sum at
    /// multiplications.
    pub fn formal_degree(&self) -> u64 {
        let mut deg: Vec<u64> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let d = match g {
                Gate::InputVar(_) | Gate::Const(_) => 1,
                Gate::Add(cs) => cs.iter().map(|&c| deg[c]).max().unwrap_or(1),
                Gate::Mul(cs) => cs.iter().map(|&c| deg[c]).sum(),
            };
            deg.push(d);
        }
        deg[self.output]
    }

    /// Maximum number of gates with fan-in above the threshold on any
    /// leaf-to-output path.
    pub fn weft(&self, fanin_threshold: usize) -> usize {
        // weft[g] = max over paths below g, including g itself.
        let mut w: Vec<usize> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let own = usize::from(g.children().len() > fanin_threshold);
            let below = g.children().iter().map(|&c| w[c]).max().unwrap_or(0);
            w.push(own + below);
        }
        w[self.output]
    }

    pub fn to_text(&self) -> String {
        let mut flags = Vec::new();
        if self.constant_free {
            flags.push("constant_free");
        }
        if self.bounded_fanin {
            flags.push("bounded_fanin");
        }
        let flag_str = if flags.is_empty() { "-".to_string() } else { flags.join(",") };
        let mut out = format!("CIRCUIT {} {} {}\n", self.gates.len(), self.output, flag_str);
        for (id, g) in self.gates.iter().enumerate() {
            match g {
                Gate::InputVar(v) => out.push_str(&format!("{id} var {v}\n")),
                Gate::Const(c) => out.push_str(&format!("{id} const {c}\n")),
                Gate::Add(cs) | Gate::Mul(cs) => {
                    let args: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                    out.push_str(&format!("{id} {} {}\n", g.kind_str(), args.join(" ")));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty circuit text".into()))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some("CIRCUIT") {
            return Err(Error::Parse("expected CIRCUIT header".into()));
        }
        let n: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad gate count".into()))?;
        let output: GateId = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad output id".into()))?;
        let flags = hp.next().unwrap_or("-");
        let constant_free = flags.contains("constant_free");
        let bounded_fanin = flags.contains("bounded_fanin");
        let mut gates = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse("missing gate line".into()))?;
            let mut it = line.split_whitespace();
            let id: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("bad gate id".into()))?;
            if id != gates.len() {
                return Err(Error::Parse(format!("gate ids must be dense, got {id}")));
            }
            let kind = it.next().ok_or_else(|| Error::Parse("missing gate kind".into()))?;
            let gate = match kind {
                "var" => {
                    let v = it.next().ok_or_else(|| Error::Parse("missing variable".into()))?;
                    let (ns, idx) = v
                        .split_once('.')
                        .ok_or_else(|| Error::Parse(format!("bad variable {v:?}")))?;
                    let ns = ns
                        .chars()
                        .next()
                        .and_then(crate::algebra::Namespace::from_letter)
                        .ok_or_else(|| Error::Parse(format!("bad namespace {ns:?}")))?;
                    let idx: u32 = idx
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad index in {v:?}")))?;
                    Gate::InputVar(VarId::new(ns, idx))
                }
                "const" => {
                    let c = it.next().ok_or_else(|| Error::Parse("missing constant".into()))?;
                    Gate::Const(
                        c.parse()
                            .map_err(|_| Error::Parse(format!("bad constant {c:?}")))?,
                    )
                }
                "add" | "mul" => {
                    let cs: Vec<GateId> = it
                        .map(|s| {
                            s.parse()
                                .map_err(|_| Error::Parse(format!("bad child id {s:?}")))
                        })
                        .collect::<Result<_>>()?;
                    if kind == "add" {
                        Gate::Add(cs)
                    } else {
                        Gate::Mul(cs)
                    }
                }
                other => return Err(Error::Parse(format!("unknown gate kind {other:?}"))),
            };
            gates.push(gate);
        }
        let c = Circuit { gates, output, constant_free, bounded_fanin };
        c.validate()?;
        Ok(c)
    }
}

/// Convenience builder for circuits and formulas.
#[derive(Debug, Default)]
pub struct CircuitBuilder {
    gates: Vec<Gate>,
}

impl CircuitBuilder {
    pub fn new() -> CircuitBuilder {
        CircuitBuilder::default()
    }

    pub fn var(&mut self, v: VarId) -> GateId {
        self.push(Gate::InputVar(v))
    }

    pub fn constant<T: Into<BigInt>>(&mut self, c: T) -> GateId {
        self.push(Gate::Const(c.into()))
    }

    pub fn add(&mut self, children: Vec<GateId>) -> GateId {
        self.push(Gate::Add(children))
    }

    pub fn mul(&mut self, children: Vec<GateId>) -> GateId {
        self.push(Gate::Mul(children))
    }

    pub fn push(&mut self, g: Gate) -> GateId {
        self.gates.push(g);
        self.gates.len() - 1
    }

    pub fn finish(self, output: GateId, constant_free: bool) -> Circuit {
        Circuit { gates: self.gates, output, constant_free, bounded_fanin: false }
    }
}

/// A formula: a circuit in which every non-output gate has out-degree 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    circuit: Circuit,
}

impl Formula {
    pub fn new(circuit: Circuit) -> Result<Formula> {
        circuit.validate()?;
        let mut outdeg = vec![0usize; circuit.gates.len()];
        for g in &circuit.gates {
            for &c in g.children() {
                outdeg[c] += 1;
            }
        }
        for (id, &d) in outdeg.iter().enumerate() {
            let expected = usize::from(id != circuit.output);
            if d != expected {
                return Err(Error::Parse(format!(
                    "gate {id} has out-degree {d}, formula requires {expected}"
                )));
            }
        }
        Ok(Formula { circuit })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn size(&self) -> usize {
        self.circuit.size()
    }

    pub fn output(&self) -> GateId {
        self.circuit.output
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.circuit.gates[id]
    }

    /// True if addition and multiplication strictly alternate, the top
    /// gate is an addition gate, and every leaf feeds a multiplication.
    pub fn is_layered(&self) -> bool {
        self.check_layered().is_ok()
    }

    pub fn check_layered(&self) -> Result<()> {
        let c = &self.circuit;
        if !matches!(c.gates[c.output], Gate::Add(_)) {
            return Err(Error::NotLayered("top gate is not an addition gate".into()));
        }
        for (id, g) in c.gates.iter().enumerate() {
            match g {
                Gate::Add(cs) => {
                    for &ch in cs {
                        if matches!(c.gates[ch], Gate::Add(_)) {
                            return Err(Error::NotLayered(format!(
                                "addition gate {id} feeds from addition gate {ch}"
                            )));
                        }
                        if matches!(c.gates[ch], Gate::InputVar(_) | Gate::Const(_)) {
                            return Err(Error::NotLayered(format!(
                                "input gate {ch} feeds addition gate {id}"
                            )));
                        }
                    }
                }
                Gate::Mul(cs) => {
                    for &ch in cs {
                        if matches!(c.gates[ch], Gate::Mul(_)) {
                            return Err(Error::NotLayered(format!(
                                "multiplication gate {id} feeds from multiplication gate {ch}"
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Rewrite a formula into layered form: alternating gate kinds, addition
/// at the top, every input feeding a multiplication. Unary gates are
/// inserted as padding where the alternation would otherwise break.
pub fn layer_formula(f: &Formula) -> Formula {
    #[derive(Clone, Copy, PartialEq)]
    enum Want {
        Add,
        Mul,
    }

    fn go(f: &Formula, id: GateId, want: Want, out: &mut CircuitBuilder) -> GateId {
        match (f.gate(id), want) {
            (Gate::Add(cs), Want::Add) => {
                let children = cs.iter().map(|&c| go(f, c, Want::Mul, out)).collect();
                out.add(children)
            }
            (Gate::Add(_), Want::Mul) => {
                let inner = go(f, id, Want::Add, out);
                out.mul(vec![inner])
            }
            (Gate::Mul(cs), Want::Mul) => {
                let children = cs.iter().map(|&c| go(f, c, Want::Add, out)).collect();
                out.mul(children)
            }
            (Gate::Mul(_), Want::Add) => {
                let inner = go(f, id, Want::Mul, out);
                out.add(vec![inner])
            }
            (Gate::InputVar(v), Want::Mul) => {
                let leaf = out.var(*v);
                out.mul(vec![leaf])
            }
            (Gate::Const(c), Want::Mul) => {
                let leaf = out.constant(c.clone());
                out.mul(vec![leaf])
            }
            (Gate::InputVar(_) | Gate::Const(_), Want::Add) => {
                let inner = go(f, id, Want::Mul, out);
                out.add(vec![inner])
            }
        }
    }

    let mut b = CircuitBuilder::new();
    let output = go(f, f.output(), Want::Add, &mut b);
    let circuit = b.finish(output, f.circuit().constant_free);
    let layered = Formula::new(circuit).expect("layering preserves tree shape");
    debug_assert!(layered.is_layered());
    layered
}

/// One parse tree of a layered formula: the participating gates plus the
/// monomial it contributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    pub gates: Vec<GateId>,
    pub monomial: SparsePolynomial,
}

/// Enumerate all parse trees: a parse tree contains the root, all children
/// of every multiplication gate in it, and exactly one child of every
/// addition gate in it.
pub fn parse_trees(f: &Formula, budget: usize) -> Result<Vec<ParseTree>> {
    fn go(f: &Formula, id: GateId, budget: usize, count: &mut usize) -> Result<Vec<ParseTree>> {
        *count += 1;
        if *count > budget {
            return Err(Error::BudgetExceeded { visited: *count as u64, budget: budget as u64 });
        }
        match f.gate(id) {
            Gate::InputVar(v) => Ok(vec![ParseTree {
                gates: vec![id],
                monomial: SparsePolynomial::var(*v),
            }]),
            Gate::Const(c) => Ok(vec![ParseTree {
                gates: vec![id],
                monomial: SparsePolynomial::constant(c.clone()),
            }]),
            Gate::Add(cs) => {
                let mut out = Vec::new();
                for &ch in cs {
                    for mut t in go(f, ch, budget, count)? {
                        t.gates.push(id);
                        out.push(t);
                    }
                }
                Ok(out)
            }
            Gate::Mul(cs) => {
                let mut partial: Vec<ParseTree> = vec![ParseTree {
                    gates: vec![id],
                    monomial: SparsePolynomial::one(),
                }];
                for &ch in cs {
                    let subtrees = go(f, ch, budget, count)?;
                    let mut next = Vec::with_capacity(partial.len() * subtrees.len());
                    for p in &partial {
                        for s in &subtrees {
                            if partial.len() * subtrees.len() > budget {
                                return Err(Error::BudgetExceeded {
                                    visited: (partial.len() * subtrees.len()) as u64,
                                    budget: budget as u64,
                                });
                            }
                            let mut gates = p.gates.clone();
                            gates.extend_from_slice(&s.gates);
                            next.push(ParseTree {
                                gates,
                                monomial: &p.monomial * &s.monomial,
                            });
                        }
                    }
                    partial = next;
                }
                Ok(partial)
            }
        }
    }

    let mut count = 0;
    let mut trees = go(f, f.output(), budget, &mut count)?;
    for t in &mut trees {
        t.gates.sort_unstable();
    }
    Ok(trees)
}

/// Boolean circuit gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolGate {
    InputVar(VarId),
    Not(GateId),
    And(Vec<GateId>),
    Or(Vec<GateId>),
    Const0,
    Const1,
}

impl BoolGate {
    pub fn children(&self) -> Vec<GateId> {
        match self {
            BoolGate::InputVar(_) | BoolGate::Const0 | BoolGate::Const1 => vec![],
            BoolGate::Not(c) => vec![*c],
            BoolGate::And(cs) | BoolGate::Or(cs) => cs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolCircuit {
    pub gates: Vec<BoolGate>,
    pub output: GateId,
}

impl BoolCircuit {
    pub fn validate(&self) -> Result<()> {
        if self.output >= self.gates.len() {
            return Err(Error::Parse("output gate out of range".into()));
        }
        for (id, g) in self.gates.iter().enumerate() {
            for c in g.children() {
                if c >= id {
                    return Err(Error::Parse(format!("gate {id} references later gate {c}")));
                }
            }
        }
        Ok(())
    }

    pub fn input_vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self
            .gates
            .iter()
            .filter_map(|g| match g {
                BoolGate::InputVar(v) => Some(*v),
                _ => None,
            })
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn eval(&self, assignment: &BTreeMap<VarId, bool>) -> Result<bool> {
        let mut values: Vec<bool> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let v = match g {
                BoolGate::InputVar(v) => *assignment
                    .get(v)
                    .ok_or(Error::MissingVariable(*v))?,
                BoolGate::Not(c) => !values[*c],
                BoolGate::And(cs) => cs.iter().all(|&c| values[c]),
                BoolGate::Or(cs) => cs.iter().any(|&c| values[c]),
                BoolGate::Const0 => false,
                BoolGate::Const1 => true,
            };
            values.push(v);
        }
        Ok(values[self.output])
    }
}

/// Builder for Boolean circuits.
#[derive(Debug, Default)]
pub struct BoolCircuitBuilder {
    gates: Vec<BoolGate>,
}

impl BoolCircuitBuilder {
    pub fn new() -> BoolCircuitBuilder {
        BoolCircuitBuilder::default()
    }

    pub fn var(&mut self, v: VarId) -> GateId {
        self.push(BoolGate::InputVar(v))
    }

    pub fn not(&mut self, c: GateId) -> GateId {
        self.push(BoolGate::Not(c))
    }

    pub fn and(&mut self, cs: Vec<GateId>) -> GateId {
        self.push(BoolGate::And(cs))
    }

    pub fn or(&mut self, cs: Vec<GateId>) -> GateId {
        self.push(BoolGate::Or(cs))
    }

    pub fn constant(&mut self, b: bool) -> GateId {
        self.push(if b { BoolGate::Const1 } else { BoolGate::Const0 })
    }

    pub fn push(&mut self, g: BoolGate) -> GateId {
        self.gates.push(g);
        self.gates.len() - 1
    }

    pub fn finish(self, output: GateId) -> BoolCircuit {
        BoolCircuit { gates: self.gates, output }
    }
}

/// Arithmetize a Boolean circuit: variables map to themselves,
/// negation to `1 - x`, conjunction to the product, and disjunction to
/// `1 - prod(1 - arg)`. On 0/1 inputs the arithmetized circuit computes
/// the same value as the Boolean circuit.
pub fn arithmetize(b: &BoolCircuit) -> Circuit {
    let mut out = CircuitBuilder::new();
    let one = out.constant(1);
    let neg_one = out.constant(-1);
    // 1 - g, shared helper.
    let one_minus = |out: &mut CircuitBuilder, g: GateId| -> GateId {
        let neg = out.mul(vec![neg_one, g]);
        out.add(vec![one, neg])
    };
    let mut mapped: Vec<GateId> = Vec::with_capacity(b.gates.len());
    for g in &b.gates {
        let id = match g {
            BoolGate::InputVar(v) => out.var(*v),
            BoolGate::Const0 => out.constant(0),
            BoolGate::Const1 => out.constant(1),
            BoolGate::Not(c) => one_minus(&mut out, mapped[*c]),
            BoolGate::And(cs) => {
                let children = cs.iter().map(|&c| mapped[c]).collect();
                out.mul(children)
            }
            BoolGate::Or(cs) => {
                let complemented: Vec<GateId> =
                    cs.iter().map(|&c| one_minus(&mut out, mapped[c])).collect();
                let prod = out.mul(complemented);
                one_minus(&mut out, prod)
            }
        };
        mapped.push(id);
    }
    out.finish(mapped[b.output], true)
}
