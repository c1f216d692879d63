//! Exact sparse multivariate polynomials over arbitrary-precision integers.
//!
//! This is the ground-truth value domain: every identity elsewhere in the
//! crate bottoms out in structural equality of `SparsePolynomial`s.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Variable namespaces. Declared in lexicographic order so the derived
/// `Ord` matches the serialized ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Namespace {
    E,
    J,
    K,
    N,
    X,
    Y,
    Z,
}

impl Namespace {
    pub fn letter(self) -> char {
        match self {
            Namespace::E => 'E',
            Namespace::J => 'J',
            Namespace::K => 'K',
            Namespace::N => 'N',
            Namespace::X => 'X',
            Namespace::Y => 'Y',
            Namespace::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Namespace> {
        match c {
            'E' => Some(Namespace::E),
            'J' => Some(Namespace::J),
            'K' => Some(Namespace::K),
            'N' => Some(Namespace::N),
            'X' => Some(Namespace::X),
            'Y' => Some(Namespace::Y),
            'Z' => Some(Namespace::Z),
            _ => None,
        }
    }
}

/// A variable, identified by namespace and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    pub ns: Namespace,
    pub index: u32,
}

impl VarId {
    pub fn new(ns: Namespace, index: u32) -> VarId {
        VarId { ns, index }
    }

    pub fn x(index: u32) -> VarId {
        VarId::new(Namespace::X, index)
    }

    pub fn y(index: u32) -> VarId {
        VarId::new(Namespace::Y, index)
    }

    pub fn z(index: u32) -> VarId {
        VarId::new(Namespace::Z, index)
    }

    pub fn e(index: u32) -> VarId {
        VarId::new(Namespace::E, index)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.ns.letter(), self.index)
    }
}

/// A monomial: a map from variables to positive exponents. The empty
/// monomial is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    exponents: BTreeMap<VarId, u32>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn var(v: VarId) -> Monomial {
        let mut exponents = BTreeMap::new();
        exponents.insert(v, 1);
        Monomial { exponents }
    }

    pub fn from_pairs(pairs: &[(VarId, u32)]) -> Monomial {
        let mut exponents = BTreeMap::new();
        for &(v, e) in pairs {
            if e > 0 {
                *exponents.entry(v).or_insert(0) += e;
            }
        }
        Monomial { exponents }
    }

    pub fn is_one(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn total_degree(&self) -> u64 {
        self.exponents.values().map(|&e| e as u64).sum()
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.exponents.get(&v).copied().unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.exponents.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, u32)> + '_ {
        self.exponents.iter().map(|(&v, &e)| (v, e))
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exponents = self.exponents.clone();
        for (&v, &e) in &other.exponents {
            *exponents.entry(v).or_insert(0) += e;
        }
        Monomial { exponents }
    }
}

/// Graded order: total degree first, then the variable/exponent sequence.
impl Ord for Monomial {
    fn cmp(&self, other: &Monomial) -> std::cmp::Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.exponents.cmp(&other.exponents))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Monomial) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, e) in self.iter() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{v}^{e}")?;
        }
        Ok(())
    }
}

/// Degree of a polynomial. The zero polynomial gets a distinguished
/// sentinel rather than an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Degree {
    NegInfinity,
    Finite(u64),
}

/// Sparse polynomial with `BigInt` coefficients. Zero coefficients are
/// never stored, so structural equality is semantic equality.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct SparsePolynomial {
    terms: BTreeMap<Monomial, BigInt>,
}

impl SparsePolynomial {
    pub fn zero() -> SparsePolynomial {
        SparsePolynomial::default()
    }

    pub fn one() -> SparsePolynomial {
        SparsePolynomial::constant(BigInt::one())
    }

    pub fn constant<T: Into<BigInt>>(c: T) -> SparsePolynomial {
        let c = c.into();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        SparsePolynomial { terms }
    }

    pub fn var(v: VarId) -> SparsePolynomial {
        SparsePolynomial::monomial(Monomial::var(v), BigInt::one())
    }

    pub fn monomial(m: Monomial, c: BigInt) -> SparsePolynomial {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        SparsePolynomial { terms }
    }

    pub fn from_terms(terms: Vec<(Monomial, BigInt)>) -> SparsePolynomial {
        let mut p = SparsePolynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> Degree {
        self.terms
            .keys()
            .map(|m| m.total_degree())
            .max()
            .map_or(Degree::NegInfinity, Degree::Finite)
    }

    /// Constant term, if the polynomial is a constant (possibly zero).
    pub fn as_constant(&self) -> Option<BigInt> {
        if self.terms.is_empty() {
            return Some(BigInt::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = Vec::new();
        for m in self.terms.keys() {
            for v in m.vars() {
                vs.push(v);
            }
        }
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn coefficient(&self, m: &Monomial) -> BigInt {
        self.terms.get(m).cloned().unwrap_or_else(BigInt::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &SparsePolynomial) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn scale(&self, c: &BigInt) -> SparsePolynomial {
        if c.is_zero() {
            return SparsePolynomial::zero();
        }
        SparsePolynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    /// Exact evaluation. Every variable occurring in the polynomial must
    /// be assigned.
    pub fn eval(&self, assignment: &BTreeMap<VarId, BigInt>) -> Result<BigInt> {
        let mut total = BigInt::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (v, e) in m.iter() {
                let val = assignment.get(&v).ok_or(Error::MissingVariable(v))?;
                term *= val.pow(e);
            }
            total += term;
        }
        Ok(total)
    }

    /// Simultaneous substitution. Variables not in the map are unchanged.
    pub fn substitute(&self, subst: &BTreeMap<VarId, SparsePolynomial>) -> SparsePolynomial {
        let mut result = SparsePolynomial::zero();
        for (m, c) in &self.terms {
            let mut term = SparsePolynomial::constant(c.clone());
            for (v, e) in m.iter() {
                match subst.get(&v) {
                    Some(p) => {
                        for _ in 0..e {
                            term = &term * p;
                        }
                    }
                    None => {
                        term = &term * &SparsePolynomial::monomial(
                            Monomial::from_pairs(&[(v, e)]),
                            BigInt::one(),
                        );
                    }
                }
            }
            result.add_assign(&term);
        }
        result
    }

    /// Substitute integer values for a subset of the variables.
    pub fn substitute_ints(&self, values: &BTreeMap<VarId, BigInt>) -> SparsePolynomial {
        let subst: BTreeMap<VarId, SparsePolynomial> = values
            .iter()
            .map(|(&v, c)| (v, SparsePolynomial::constant(c.clone())))
            .collect();
        self.substitute(&subst)
    }

    /// Serialize in the line-oriented text format: a `POLY n` header, then
    /// one term per line as `coeff var^exp ...` in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = format!("POLY {}\n", self.terms.len());
        for (m, c) in &self.terms {
            if m.is_one() {
                out.push_str(&format!("{c}\n"));
            } else {
                out.push_str(&format!("{c} {m}\n"));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SparsePolynomial> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty polynomial text".into()))?;
        let mut hp = header.split_whitespace();
        match hp.next() {
            Some("POLY") => {}
            other => return Err(Error::Parse(format!("expected POLY header, got {other:?}"))),
        }
        let n: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad POLY term count".into()))?;
        let mut p = SparsePolynomial::zero();
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse("missing term line".into()))?;
            let (m, c) = parse_term(line)?;
            p.add_term(m, c);
        }
        Ok(p)
    }

    /// Single-line form used inside graph edge lines: terms joined by ` + `.
    pub fn to_inline(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (m, c) in &self.terms {
            if m.is_one() {
                parts.push(format!("{c}"));
            } else {
                parts.push(format!("{c} {m}"));
            }
        }
        parts.join(" + ")
    }

    pub fn from_inline(text: &str) -> Result<SparsePolynomial> {
        let text = text.trim();
        if text == "0" {
            return Ok(SparsePolynomial::zero());
        }
        let mut p = SparsePolynomial::zero();
        for part in text.split(" + ") {
            let (m, c) = parse_term(part)?;
            p.add_term(m, c);
        }
        Ok(p)
    }
}

fn parse_term(line: &str) -> Result<(Monomial, BigInt)> {
    let mut it = line.split_whitespace();
    let coeff_str = it.next().ok_or_else(|| Error::Parse("empty term".into()))?;
    let c: BigInt = coeff_str
        .parse()
        .map_err(|_| Error::Parse(format!("bad coefficient {coeff_str:?}")))?;
    let mut pairs = Vec::new();
    for tok in it {
        if tok == "1" && pairs.is_empty() {
            continue;
        }
        let (var_str, exp_str) = tok
            .split_once('^')
            .ok_or_else(|| Error::Parse(format!("bad factor {tok:?}")))?;
        let (ns_str, idx_str) = var_str
            .split_once('.')
            .ok_or_else(|| Error::Parse(format!("bad variable {var_str:?}")))?;
        let ns = ns_str
            .chars()
            .next()
            .and_then(Namespace::from_letter)
            .filter(|_| ns_str.len() == 1)
            .ok_or_else(|| Error::Parse(format!("bad namespace {ns_str:?}")))?;
        let index: u32 = idx_str
            .parse()
            .map_err(|_| Error::Parse(format!("bad variable index {idx_str:?}")))?;
        let exp: u32 = exp_str
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent {exp_str:?}")))?;
        pairs.push((VarId::new(ns, index), exp));
    }
    Ok((Monomial::from_pairs(&pairs), c))
}

impl fmt::Display for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_inline())
    }
}

impl Add for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn add(self, rhs: &SparsePolynomial) -> SparsePolynomial {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}

impl Sub for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn sub(self, rhs: &SparsePolynomial) -> SparsePolynomial {
        self + &(-rhs)
    }
}

impl Neg for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn neg(self) -> SparsePolynomial {
        SparsePolynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn mul(self, rhs: &SparsePolynomial) -> SparsePolynomial {
        let mut out = SparsePolynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}
