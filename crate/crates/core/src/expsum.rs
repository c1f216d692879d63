//! Exponential and weighted Boolean sums of circuits, and the
//! variable-splitting reduction that rewrites a full Boolean sum as a
//! weight-k sum over block-subset selector variables.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::algebra::{Namespace, SparsePolynomial, VarId};
use crate::circuit::{Circuit, CircuitBuilder, Gate, GateId};
use crate::error::{Error, Result};

/// A sum specification: a base circuit over X-variables plus `ell`
/// summation variables in `sum_ns`, optionally restricted to assignments
/// of Hamming weight `weight`.
#[derive(Debug, Clone)]
pub struct SumSpec {
    pub base: Circuit,
    pub sum_ns: Namespace,
    pub ell: u32,
    pub weight: Option<usize>,
}

impl SumSpec {
    pub fn full(base: Circuit, sum_ns: Namespace, ell: u32) -> SumSpec {
        SumSpec { base, sum_ns, ell, weight: None }
    }

    pub fn weighted(base: Circuit, sum_ns: Namespace, ell: u32, k: usize) -> SumSpec {
        SumSpec { base, sum_ns, ell, weight: Some(k) }
    }

    fn sum_var(&self, i: u32) -> VarId {
        VarId::new(self.sum_ns, i)
    }
}

/// Evaluate a circuit to a polynomial with some variables fixed to
/// integers.
pub fn eval_poly_partial(
    c: &Circuit,
    fixed: &BTreeMap<VarId, BigInt>,
    term_budget: usize,
) -> Result<SparsePolynomial> {
    let mut values: Vec<SparsePolynomial> = Vec::with_capacity(c.gates.len());
    for g in &c.gates {
        let p = match g {
            Gate::InputVar(v) => match fixed.get(v) {
                Some(k) => SparsePolynomial::constant(k.clone()),
                None => SparsePolynomial::var(*v),
            },
            Gate::Const(k) => SparsePolynomial::constant(k.clone()),
            Gate::Add(cs) => {
                let mut acc = SparsePolynomial::zero();
                for &ch in cs {
                    acc.add_assign(&values[ch]);
                }
                acc
            }
            Gate::Mul(cs) => {
                let mut acc = SparsePolynomial::one();
                for &ch in cs {
                    acc = &acc * &values[ch];
                }
                acc
            }
        };
        if p.num_terms() > term_budget {
            return Err(Error::TermBudgetExceeded { terms: p.num_terms(), budget: term_budget });
        }
        values.push(p);
    }
    Ok(values[c.output].clone())
}

/// Sum of the base circuit over every 0/1 assignment to the summation
/// variables.
pub fn exp_sum_bruteforce(s: &SumSpec) -> Result<SparsePolynomial> {
    if s.ell > 22 {
        return Err(Error::BudgetExceeded { visited: 1 << s.ell, budget: 1 << 22 });
    }
    let mut total = SparsePolynomial::zero();
    for mask in 0u64..(1 << s.ell) {
        let mut fixed = BTreeMap::new();
        for i in 0..s.ell {
            fixed.insert(s.sum_var(i), BigInt::from((mask >> i) & 1));
        }
        total.add_assign(&eval_poly_partial(&s.base, &fixed, 1_000_000)?);
    }
    Ok(total)
}

/// Sum of the base circuit over the weight-k 0/1 assignments only.
pub fn weighted_sum_bruteforce(s: &SumSpec) -> Result<SparsePolynomial> {
    let k = s.weight.expect("weighted sum needs a weight");
    let ell = s.ell as usize;
    if k > ell {
        return Ok(SparsePolynomial::zero());
    }
    use itertools::Itertools;
    let mut total = SparsePolynomial::zero();
    for ones in (0..ell).combinations(k) {
        let mut fixed = BTreeMap::new();
        for i in 0..s.ell {
            fixed.insert(s.sum_var(i), BigInt::zero());
        }
        for &i in &ones {
            fixed.insert(s.sum_var(i as u32), BigInt::one());
        }
        total.add_assign(&eval_poly_partial(&s.base, &fixed, 1_000_000)?);
    }
    Ok(total)
}

/// The split reduction: partition the summation variables into blocks,
/// introduce one Z-variable per (block, subset) pair, map each summation
/// variable through the product of (1 - Z) over the subsets avoiding it,
/// and gate everything by the selector that each block contributes
/// exactly one chosen subset.
#[derive(Debug, Clone)]
pub struct SplitReduction {
    /// Summation-variable indices per block.
    pub blocks: Vec<Vec<u32>>,
    /// First Z-index of each block; block i owns indices
    /// z_base[i] .. z_base[i] + 2^{|block i|}.
    pub z_base: Vec<u32>,
    pub num_z: u32,
    /// Number of blocks; the weight of good assignments.
    pub k: usize,
    /// Homomorphic image of the base circuit.
    pub g_tilde: Circuit,
    /// Selector polynomial p(Z), weft at most 2.
    pub selector: Circuit,
    /// The combined circuit p(Z) * g_tilde(X, Z).
    pub output: Circuit,
}

impl SplitReduction {
    pub fn z_var(&self, block: usize, subset_mask: u32) -> VarId {
        VarId::z(self.z_base[block] + subset_mask)
    }

    /// The good assignment corresponding to a 0/1 assignment of the
    /// original summation variables: in each block, select exactly the
    /// subset of variables assigned 1.
    pub fn good_assignment(&self, y_mask: u64) -> Vec<bool> {
        let mut z = vec![false; self.num_z as usize];
        for (bi, block) in self.blocks.iter().enumerate() {
            let mut subset = 0u32;
            for (pos, &yi) in block.iter().enumerate() {
                if (y_mask >> yi) & 1 == 1 {
                    subset |= 1 << pos;
                }
            }
            z[(self.z_base[bi] + subset) as usize] = true;
        }
        z
    }
}

pub fn split_reduction(s: &SumSpec, block_size: usize) -> SplitReduction {
    assert!(block_size >= 1);
    assert!(s.weight.is_none(), "split applies to full sums");
    let ell = s.ell;
    let mut blocks: Vec<Vec<u32>> = Vec::new();
    let mut i = 0;
    while i < ell {
        let hi = (i + block_size as u32).min(ell);
        blocks.push((i..hi).collect());
        i = hi;
    }
    if blocks.is_empty() {
        blocks.push(Vec::new());
    }
    let mut z_base = Vec::with_capacity(blocks.len());
    let mut acc = 0u32;
    for b in &blocks {
        z_base.push(acc);
        acc += 1 << b.len();
    }
    let num_z = acc;
    let k = blocks.len();

    let block_of: BTreeMap<u32, usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| b.iter().map(move |&y| (y, bi)))
        .collect();

    // phi(Y_j): product over subsets of the block avoiding j of (1 - Z).
    let phi = |b: &mut CircuitBuilder, y_index: u32| -> GateId {
        let bi = block_of[&y_index];
        let pos = blocks[bi].iter().position(|&y| y == y_index).unwrap();
        let one = b.constant(1);
        let neg = b.constant(-1);
        let mut factors = Vec::new();
        for subset in 0u32..(1 << blocks[bi].len()) {
            if subset & (1 << pos) == 0 {
                let z = b.var(VarId::z(z_base[bi] + subset));
                let nz = b.mul(vec![neg, z]);
                factors.push(b.add(vec![one, nz]));
            }
        }
        if factors.len() == 1 { factors[0] } else { b.mul(factors) }
    };

    // g_tilde: copy the base circuit, mapping summation leaves through phi.
    let build_g_tilde = |b: &mut CircuitBuilder| -> GateId {
        let mut mapped: Vec<GateId> = Vec::with_capacity(s.base.gates.len());
        for g in &s.base.gates {
            let id = match g {
                Gate::InputVar(v) if v.ns == s.sum_ns && v.index < ell => phi(b, v.index),
                Gate::InputVar(v) => b.var(*v),
                Gate::Const(c) => b.constant(c.clone()),
                Gate::Add(cs) => {
                    let children = cs.iter().map(|&c| mapped[c]).collect();
                    b.add(children)
                }
                Gate::Mul(cs) => {
                    let children = cs.iter().map(|&c| mapped[c]).collect();
                    b.mul(children)
                }
            };
            mapped.push(id);
        }
        mapped[s.base.output]
    };

    let build_selector = |b: &mut CircuitBuilder| -> GateId {
        let mut per_block = Vec::with_capacity(blocks.len());
        for (bi, block) in blocks.iter().enumerate() {
            let zs: Vec<GateId> = (0u32..(1 << block.len()))
                .map(|subset| b.var(VarId::z(z_base[bi] + subset)))
                .collect();
            per_block.push(if zs.len() == 1 { zs[0] } else { b.add(zs) });
        }
        if per_block.len() == 1 { per_block[0] } else { b.mul(per_block) }
    };

    let mut b = CircuitBuilder::new();
    let gt = build_g_tilde(&mut b);
    let g_tilde = b.finish(gt, s.base.constant_free);

    let mut b = CircuitBuilder::new();
    let sel = build_selector(&mut b);
    let selector = b.finish(sel, true);

    let mut b = CircuitBuilder::new();
    let gt = build_g_tilde(&mut b);
    let sel = build_selector(&mut b);
    let out = b.mul(vec![sel, gt]);
    let output = b.finish(out, s.base.constant_free);

    SplitReduction { blocks, z_base, num_z, k, g_tilde, selector, output }
}

#[derive(Debug, Clone)]
pub struct SplitReport {
    pub lhs: SparsePolynomial,
    pub rhs: SparsePolynomial,
    pub equal: bool,
    pub num_z: u32,
    pub k: usize,
    pub weight_k_assignments: u64,
}

/// Check that the full sum of the base equals the weight-k sum of the
/// reduction output over the Z-variables.
pub fn verify_split_identity(s: &SumSpec, r: &SplitReduction) -> Result<SplitReport> {
    let lhs = exp_sum_bruteforce(s)?;
    let spec_rhs = SumSpec::weighted(r.output.clone(), Namespace::Z, r.num_z, r.k);
    let rhs = weighted_sum_bruteforce(&spec_rhs)?;
    let mut count: u64 = 1;
    for i in 0..r.k as u64 {
        count = count * (r.num_z as u64 - i) / (i + 1);
    }
    Ok(SplitReport {
        equal: lhs == rhs,
        lhs,
        rhs,
        num_z: r.num_z,
        k: r.k,
        weight_k_assignments: count,
    })
}

/// Compute the weighted sum through the indicator polynomial: sum the
/// base against B_{ell,k} over all 0/1 assignments and check agreement
/// with the direct weight-k sum. Returns the common value.
pub fn indicator_weighted_to_full(s: &SumSpec) -> Result<SparsePolynomial> {
    let k = s.weight.expect("needs a weight");
    let ell = s.ell as usize;
    let bnk = crate::classics::indicator_bnk(ell.max(1), k.min(ell.max(1)));
    let mut total = SparsePolynomial::zero();
    for mask in 0u64..(1 << s.ell) {
        let mut fixed = BTreeMap::new();
        let mut basg = BTreeMap::new();
        for i in 0..s.ell {
            let bit = (mask >> i) & 1;
            fixed.insert(s.sum_var(i), BigInt::from(bit));
            basg.insert(VarId::x(i), BigInt::from(bit));
        }
        let indicator = if ell == 0 {
            BigInt::from(u32::from(k == 0))
        } else {
            bnk.eval_point(&basg)?
        };
        if indicator.is_zero() {
            continue;
        }
        let val = eval_poly_partial(&s.base, &fixed, 1_000_000)?;
        total.add_assign(&val.scale(&indicator));
    }
    let direct = weighted_sum_bruteforce(s)?;
    if total != direct {
        return Err(Error::Parse(format!(
            "indicator-weighted sum mismatch: {} vs {}",
            total.to_inline(),
            direct.to_inline()
        )));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    fn xvar(i: u32) -> VarId {
        VarId::x(i)
    }

    fn yvar(i: u32) -> VarId {
        VarId::y(i)
    }

    fn circuit_x1_times_y1_plus_y2() -> Circuit {
        let mut b = CircuitBuilder::new();
        let x1 = b.var(xvar(1));
        let y0 = b.var(yvar(0));
        let y1 = b.var(yvar(1));
        let s = b.add(vec![y0, y1]);
        let m = b.mul(vec![x1, s]);
        b.finish(m, true)
    }

    #[test]
    fn exp_sum_examples() {
        let spec = SumSpec::full(circuit_x1_times_y1_plus_y2(), Namespace::Y, 2);
        let got = exp_sum_bruteforce(&spec).unwrap();
        assert_eq!(got, SparsePolynomial::var(xvar(1)).scale(&4.into()));

        // Independent of Y: multiplies by 2^ell.
        let mut b = CircuitBuilder::new();
        let x1 = b.var(xvar(1));
        let spec = SumSpec::full(b.finish(x1, true), Namespace::Y, 2);
        assert_eq!(
            exp_sum_bruteforce(&spec).unwrap(),
            SparsePolynomial::var(xvar(1)).scale(&4.into())
        );

        // prod (1 - Y_i): only the all-zero assignment survives.
        let mut b = CircuitBuilder::new();
        let one = b.constant(1);
        let neg = b.constant(-1);
        let mut factors = Vec::new();
        for i in 0..3 {
            let y = b.var(yvar(i));
            let ny = b.mul(vec![neg, y]);
            factors.push(b.add(vec![one, ny]));
        }
        let m = b.mul(factors);
        let spec = SumSpec::full(b.finish(m, true), Namespace::Y, 3);
        assert_eq!(exp_sum_bruteforce(&spec).unwrap(), SparsePolynomial::one());
    }

    #[test]
    fn weighted_sum_examples() {
        // Y0 + 2 Y1 + 3 Y2 at weight 1 sums to 6.
        let mut b = CircuitBuilder::new();
        let y0 = b.var(yvar(0));
        let y1 = b.var(yvar(1));
        let y2 = b.var(yvar(2));
        let two = b.constant(2);
        let three = b.constant(3);
        let t1 = b.mul(vec![two, y1]);
        let t2 = b.mul(vec![three, y2]);
        let s = b.add(vec![y0, t1, t2]);
        let base = b.finish(s, false);
        let spec = SumSpec::weighted(base.clone(), Namespace::Y, 3, 1);
        assert_eq!(
            weighted_sum_bruteforce(&spec).unwrap(),
            SparsePolynomial::constant(6)
        );

        // k = 0 is evaluation at zero; k = ell at all ones.
        let spec = SumSpec::weighted(base.clone(), Namespace::Y, 3, 0);
        assert_eq!(
            weighted_sum_bruteforce(&spec).unwrap(),
            SparsePolynomial::zero()
        );
        let spec = SumSpec::weighted(base, Namespace::Y, 3, 3);
        assert_eq!(
            weighted_sum_bruteforce(&spec).unwrap(),
            SparsePolynomial::constant(6)
        );
    }

    #[test]
    fn partition_of_sums() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let base = crate::generators::random_circuit(&mut rng, 8, 2, 3);
            let full = exp_sum_bruteforce(&SumSpec::full(base.clone(), Namespace::Y, 3)).unwrap();
            let mut by_weight = SparsePolynomial::zero();
            for k in 0..=3 {
                by_weight.add_assign(
                    &weighted_sum_bruteforce(&SumSpec::weighted(
                        base.clone(),
                        Namespace::Y,
                        3,
                        k,
                    ))
                    .unwrap(),
                );
            }
            assert_eq!(full, by_weight);
        }
    }

    #[test]
    fn split_shapes() {
        let spec = SumSpec::full(circuit_x1_times_y1_plus_y2(), Namespace::Y, 2);
        let r = split_reduction(&spec, 2);
        assert_eq!(r.num_z, 4);
        assert_eq!(r.k, 1);

        let mut b = CircuitBuilder::new();
        let leaves: Vec<GateId> = (0..4).map(|i| b.var(yvar(i))).collect();
        let s = b.add(leaves);
        let spec = SumSpec::full(b.finish(s, true), Namespace::Y, 4);
        let r = split_reduction(&spec, 2);
        assert_eq!(r.num_z, 8);
        assert_eq!(r.k, 2);
    }

    #[test]
    fn good_assignment_bijection() {
        for ell in 1..=6u32 {
            for block_size in 1..=3usize {
                let mut b = CircuitBuilder::new();
                let leaves: Vec<GateId> = (0..ell).map(|i| b.var(yvar(i))).collect();
                let s = b.add(leaves);
                let spec = SumSpec::full(b.finish(s, true), Namespace::Y, ell);
                let r = split_reduction(&spec, block_size);
                let mut seen = std::collections::BTreeSet::new();
                for mask in 0u64..(1 << ell) {
                    let z = r.good_assignment(mask);
                    // Weight k, one per block.
                    assert_eq!(z.iter().filter(|&&b| b).count(), r.k);
                    for (bi, block) in r.blocks.iter().enumerate() {
                        let lo = r.z_base[bi] as usize;
                        let hi = lo + (1usize << block.len());
                        assert_eq!(z[lo..hi].iter().filter(|&&b| b).count(), 1);
                    }
                    assert!(seen.insert(z), "not injective at mask {mask}");
                }
                // Surjective onto per-block-weight-1 assignments: counts agree.
                let total: u64 = r.blocks.iter().map(|b| 1u64 << b.len()).product();
                assert_eq!(seen.len() as u64, total);
            }
        }
    }

    #[test]
    fn selector_vanishes_off_good_assignments() {
        let mut b = CircuitBuilder::new();
        let leaves: Vec<GateId> = (0..4).map(|i| b.var(yvar(i))).collect();
        let s = b.add(leaves);
        let spec = SumSpec::full(b.finish(s, true), Namespace::Y, 4);
        let r = split_reduction(&spec, 2);
        assert!(r.num_z <= 16);
        let goods: std::collections::BTreeSet<Vec<bool>> =
            (0u64..(1 << 4)).map(|m| r.good_assignment(m)).collect();
        use itertools::Itertools;
        for ones in (0..r.num_z as usize).combinations(r.k) {
            let mut z = vec![false; r.num_z as usize];
            for &i in &ones {
                z[i] = true;
            }
            let mut asg = BTreeMap::new();
            for (i, &bit) in z.iter().enumerate() {
                asg.insert(VarId::z(i as u32), BigInt::from(u32::from(bit)));
            }
            let sel = r.selector.eval_point(&asg).unwrap();
            if goods.contains(&z) {
                assert_eq!(sel, BigInt::one());
            } else {
                assert_eq!(sel, BigInt::zero(), "bad assignment {z:?} selected");
            }
        }
    }

    #[test]
    fn split_identity_fixed_cases() {
        // g = 1, ell = 2, one block: both sides are 4.
        let mut b = CircuitBuilder::new();
        let one = b.constant(1);
        let spec = SumSpec::full(b.finish(one, true), Namespace::Y, 2);
        let r = split_reduction(&spec, 2);
        let report = verify_split_identity(&spec, &r).unwrap();
        assert!(report.equal);
        assert_eq!(report.lhs, SparsePolynomial::constant(4));

        // g = Y0: both sides 2.
        let mut b = CircuitBuilder::new();
        let y = b.var(yvar(0));
        let spec = SumSpec::full(b.finish(y, true), Namespace::Y, 2);
        let r = split_reduction(&spec, 2);
        let report = verify_split_identity(&spec, &r).unwrap();
        assert!(report.equal);
        assert_eq!(report.lhs, SparsePolynomial::constant(2));

        // g = X1 Y0 Y1 + X2: both sides X1 + 4 X2.
        let mut b = CircuitBuilder::new();
        let x1 = b.var(xvar(1));
        let x2 = b.var(xvar(2));
        let y0 = b.var(yvar(0));
        let y1 = b.var(yvar(1));
        let m = b.mul(vec![x1, y0, y1]);
        let s = b.add(vec![m, x2]);
        let spec = SumSpec::full(b.finish(s, true), Namespace::Y, 2);
        let r = split_reduction(&spec, 1);
        let report = verify_split_identity(&spec, &r).unwrap();
        assert!(report.equal);
        let expect = &SparsePolynomial::var(xvar(1))
            + &SparsePolynomial::var(xvar(2)).scale(&4.into());
        assert_eq!(report.lhs, expect);
    }

    #[test]
    fn split_identity_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for trial in 0..20 {
            let ell = rng.gen_range(1..=6);
            let base = crate::generators::random_circuit(&mut rng, 7, 2, ell);
            let spec = SumSpec::full(base, Namespace::Y, ell);
            let block_size = rng.gen_range(1..=3);
            let r = split_reduction(&spec, block_size);
            let report = verify_split_identity(&spec, &r).unwrap();
            assert!(report.equal, "trial {trial} ell {ell} block {block_size}");
        }
    }

    #[test]
    fn split_weft_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let ell = rng.gen_range(2..=6);
            let base = crate::generators::random_circuit(&mut rng, 7, 2, ell);
            let spec = SumSpec::full(base.clone(), Namespace::Y, ell);
            let r = split_reduction(&spec, 2);
            for threshold in [2usize, 3] {
                assert!(
                    r.output.weft(threshold) <= base.weft(threshold) + 2,
                    "weft grew too much"
                );
            }
        }
    }

    #[test]
    fn indicator_weighted_examples() {
        // g = Y0 + Y1, k = 1: sum is 2.
        let mut b = CircuitBuilder::new();
        let y0 = b.var(yvar(0));
        let y1 = b.var(yvar(1));
        let s = b.add(vec![y0, y1]);
        let spec = SumSpec::weighted(b.finish(s, true), Namespace::Y, 2, 1);
        assert_eq!(
            indicator_weighted_to_full(&spec).unwrap(),
            SparsePolynomial::constant(2)
        );

        // k = 0 reduces to evaluation at zero.
        let mut b = CircuitBuilder::new();
        let y0 = b.var(yvar(0));
        let one = b.constant(1);
        let s = b.add(vec![y0, one]);
        let spec = SumSpec::weighted(b.finish(s, true), Namespace::Y, 1, 0);
        assert_eq!(
            indicator_weighted_to_full(&spec).unwrap(),
            SparsePolynomial::one()
        );
    }

    #[test]
    fn indicator_weighted_random() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let base = crate::generators::random_circuit(&mut rng, 8, 2, 3);
            for k in 0..=3 {
                let spec = SumSpec::weighted(base.clone(), Namespace::Y, 3, k);
                indicator_weighted_to_full(&spec).unwrap();
            }
        }
    }
}
