//! Classical constructions: the inclusion-exclusion permanent formula,
//! elementary symmetric polynomial circuits, the weight-k indicator
//! polynomial, the Pochhammer polynomial, repeated-squaring towers, and
//! the big-integer bit-packing identity.

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Signed, Zero};

use crate::algebra::{SparsePolynomial, VarId};
use crate::circuit::{Circuit, CircuitBuilder, Formula, GateId};

/// Matrix entry variable X_{ij} for an n by n symbolic matrix.
pub fn matrix_var(n: usize, i: usize, j: usize) -> VarId {
    VarId::x((i * n + j) as u32)
}

/// Inclusion-exclusion formula for the n by n permanent:
/// sum over nonempty column sets S of (-1)^(n-|S|) prod_i sum_{j in S} X_ij.
/// Size O(2^n n^2); the empty set contributes nothing and is skipped.
pub fn ryser_formula(n: usize) -> Formula {
    assert!(n >= 1 && n <= 10);
    let mut b = CircuitBuilder::new();
    let mut top_terms: Vec<GateId> = Vec::new();
    for mask in 1u32..(1 << n) {
        let sign_negative = (n - (mask.count_ones() as usize)) % 2 == 1;
        let mut factors: Vec<GateId> = Vec::new();
        if sign_negative {
            factors.push(b.constant(-1));
        }
        for i in 0..n {
            let leaves: Vec<GateId> = (0..n)
                .filter(|&j| mask & (1 << j) != 0)
                .map(|j| b.var(matrix_var(n, i, j)))
                .collect();
            factors.push(if leaves.len() == 1 { leaves[0] } else { b.add(leaves) });
        }
        top_terms.push(if factors.len() == 1 { factors[0] } else { b.mul(factors) });
    }
    let out = b.add(top_terms);
    Formula::new(b.finish(out, true)).expect("construction is a tree")
}

/// Circuit for the elementary symmetric polynomial sigma_{n,k} in
/// variables X_0..X_{n-1}, via the standard prefix recurrence
/// sigma_{m,j} = sigma_{m-1,j} + X_m sigma_{m-1,j-1}. Size O(nk).
pub fn esp_circuit(n: usize, k: usize) -> Circuit {
    assert!(k <= n);
    let mut b = CircuitBuilder::new();
    let one = b.constant(1);
    let zero = b.constant(0);
    let xs: Vec<GateId> = (0..n).map(|i| b.var(VarId::x(i as u32))).collect();
    // row[j] = sigma_{m,j} after m variables.
    let mut row: Vec<GateId> = vec![one];
    row.extend(std::iter::repeat(zero).take(k));
    for &x in &xs {
        let mut next = vec![row[0]];
        for j in 1..=k {
            let take = b.mul(vec![x, row[j - 1]]);
            next.push(b.add(vec![row[j], take]));
        }
        row = next;
    }
    b.finish(row[k], true)
}

/// Constant-free subcircuit computing an arbitrary integer from 1 and -1:
/// Horner over the binary digits, with 2 built as 1+1.
pub fn constant_gate(b: &mut CircuitBuilder, value: &BigInt) -> GateId {
    if value.is_zero() {
        return b.constant(0);
    }
    let negative = value.is_negative();
    let mag = value.abs();
    let one = b.constant(1);
    let two = b.add(vec![one, one]);
    let mut acc = b.constant(0);
    for pos in (0..mag.bits()).rev() {
        acc = b.mul(vec![two, acc]);
        if mag.bit(pos) {
            acc = b.add(vec![acc, one]);
        }
    }
    if negative {
        let neg = b.constant(-1);
        acc = b.mul(vec![neg, acc]);
    }
    acc
}

/// Constant-free circuit for the weight-k indicator
/// B_{n,k} = sum_t (-1)^t C(k+t, k) sigma_{n,k+t}: it evaluates to 1 on
/// 0/1 inputs of weight exactly k and to 0 on all other 0/1 inputs.
pub fn indicator_bnk(n: usize, k: usize) -> Circuit {
    assert!(k <= n && n <= 16);
    let mut b = CircuitBuilder::new();
    let one = b.constant(1);
    let zero = b.constant(0);
    let xs: Vec<GateId> = (0..n).map(|i| b.var(VarId::x(i as u32))).collect();
    // All prefix sigma rows up to degree n at once.
    let mut row: Vec<GateId> = vec![one];
    row.extend(std::iter::repeat(zero).take(n));
    for &x in &xs {
        let mut next = vec![row[0]];
        for j in 1..=n {
            let take = b.mul(vec![x, row[j - 1]]);
            next.push(b.add(vec![row[j], take]));
        }
        row = next;
    }
    let mut terms: Vec<GateId> = Vec::new();
    for t in 0..=(n - k) {
        let coeff = binomial(BigInt::from(k + t), BigInt::from(k));
        let signed = if t % 2 == 1 { -coeff } else { coeff };
        let cg = constant_gate(&mut b, &signed);
        terms.push(b.mul(vec![cg, row[k + t]]));
    }
    let out = if terms.len() == 1 { terms[0] } else { b.add(terms) };
    b.finish(out, true)
}

/// The rising-factorial polynomial prod_{i=1..n} (X + i), both expanded
/// and as a product-form constant-free circuit.
pub fn pochhammer(n: usize) -> (SparsePolynomial, Circuit) {
    assert!(n >= 1 && n <= 60);
    let x = SparsePolynomial::var(VarId::x(0));
    let mut poly = SparsePolynomial::one();
    for i in 1..=n {
        poly = &poly * &(&x + &SparsePolynomial::constant(i as i64));
    }
    let mut b = CircuitBuilder::new();
    let xg = b.var(VarId::x(0));
    let mut factors = Vec::with_capacity(n);
    for i in 1..=n {
        let c = constant_gate(&mut b, &BigInt::from(i));
        factors.push(b.add(vec![xg, c]));
    }
    let out = if factors.len() == 1 { factors[0] } else { b.mul(factors) };
    (poly, b.finish(out, true))
}

/// Report for the bit-packing identity
/// d(n) = prod_{j=1..n} (2^(n^2) + j) = sum_k sigma_{n,k}(1..n) 2^(n^2 (n-k)).
#[derive(Debug, Clone)]
pub struct BitpackReport {
    pub n: usize,
    pub product_value: BigInt,
    pub packed_value: BigInt,
    pub sigma_values: Vec<BigInt>,
    pub no_overlap: bool,
    pub equal: bool,
}

pub fn bitpack_identity(n: usize) -> BitpackReport {
    assert!(n >= 1 && n <= 16);
    let base = BigInt::from(2).pow((n * n) as u32);
    let mut product_value = BigInt::one();
    for j in 1..=n {
        product_value *= &base + BigInt::from(j);
    }
    // sigma_{n,k}(1..n) by the prefix recurrence on integers.
    let mut sigma: Vec<BigInt> = vec![BigInt::one()];
    sigma.extend(std::iter::repeat(BigInt::zero()).take(n));
    for i in 1..=n {
        for k in (1..=n).rev() {
            let add = &sigma[k - 1] * BigInt::from(i);
            sigma[k] += add;
        }
    }
    let no_overlap = sigma.iter().all(|s| s < &base);
    let mut packed_value = BigInt::zero();
    for (k, s) in sigma.iter().enumerate() {
        packed_value += s * base.pow((n - k) as u32);
    }
    let equal = product_value == packed_value;
    BitpackReport {
        n,
        product_value,
        packed_value,
        sigma_values: sigma,
        no_overlap,
        equal,
    }
}

/// Constant-free repeated-squaring circuits: X^(2^t) and the constant
/// 2^(2^t), both of size O(t).
pub fn power_tower_circuits(t: usize) -> (Circuit, Circuit) {
    assert!(t <= 40);
    let mut b = CircuitBuilder::new();
    let mut g = b.var(VarId::x(0));
    for _ in 0..t {
        g = b.mul(vec![g, g]);
    }
    let xpow = b.finish(g, true);

    let mut b = CircuitBuilder::new();
    let one = b.constant(1);
    let mut g = b.add(vec![one, one]);
    for _ in 0..t {
        g = b.mul(vec![g, g]);
    }
    let cpow = b.finish(g, true);
    (xpow, cpow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::permanent_bruteforce;
    use std::collections::BTreeMap;

    fn sym_matrix(n: usize) -> Vec<Vec<SparsePolynomial>> {
        (0..n)
            .map(|i| (0..n).map(|j| SparsePolynomial::var(matrix_var(n, i, j))).collect())
            .collect()
    }

    #[test]
    fn ryser_2x2_integer() {
        let f = ryser_formula(2);
        let mut asg = BTreeMap::new();
        asg.insert(matrix_var(2, 0, 0), BigInt::from(1));
        asg.insert(matrix_var(2, 0, 1), BigInt::from(2));
        asg.insert(matrix_var(2, 1, 0), BigInt::from(3));
        asg.insert(matrix_var(2, 1, 1), BigInt::from(4));
        assert_eq!(f.circuit().eval_point(&asg).unwrap(), BigInt::from(10));
    }

    #[test]
    fn ryser_identity_and_all_ones() {
        let f3 = ryser_formula(3);
        let mut asg = BTreeMap::new();
        for i in 0..3 {
            for j in 0..3 {
                asg.insert(matrix_var(3, i, j), BigInt::from(u32::from(i == j)));
            }
        }
        assert_eq!(f3.circuit().eval_point(&asg).unwrap(), BigInt::one());

        let f4 = ryser_formula(4);
        let mut asg = BTreeMap::new();
        for i in 0..4 {
            for j in 0..4 {
                asg.insert(matrix_var(4, i, j), BigInt::one());
            }
        }
        assert_eq!(f4.circuit().eval_point(&asg).unwrap(), BigInt::from(24));
    }

    #[test]
    fn ryser_symbolic_matches_bruteforce() {
        for n in 1..=5 {
            let f = ryser_formula(n);
            let expanded = f.circuit().eval_poly(10_000_000).unwrap();
            let brute = permanent_bruteforce(&sym_matrix(n), 10_000_000).unwrap();
            assert_eq!(expanded, brute, "n={n}");
        }
    }

    #[test]
    fn ryser_integer_matches_bruteforce_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for n in 6..=8 {
            let f = ryser_formula(n);
            let mut asg = BTreeMap::new();
            let mut m: Vec<Vec<SparsePolynomial>> = vec![vec![]; n];
            for i in 0..n {
                for j in 0..n {
                    let v: i64 = rng.gen_range(-3..4);
                    asg.insert(matrix_var(n, i, j), BigInt::from(v));
                    m[i].push(SparsePolynomial::constant(v));
                }
            }
            let brute = permanent_bruteforce(&m, 10_000_000)
                .unwrap()
                .as_constant()
                .unwrap();
            assert_eq!(f.circuit().eval_point(&asg).unwrap(), brute, "n={n}");
        }
    }

    #[test]
    fn ryser_size_bound() {
        for n in 1..=8 {
            let f = ryser_formula(n);
            let bound = 8usize * (1 << n) * n * n;
            assert!(f.size() <= bound, "n={n} size={} bound={bound}", f.size());
        }
    }

    #[test]
    fn esp_values() {
        let c = esp_circuit(3, 0);
        assert_eq!(c.eval_poly(100).unwrap(), SparsePolynomial::one());

        let c = esp_circuit(3, 2);
        let mut asg = BTreeMap::new();
        asg.insert(VarId::x(0), BigInt::from(1));
        asg.insert(VarId::x(1), BigInt::from(2));
        asg.insert(VarId::x(2), BigInt::from(3));
        assert_eq!(c.eval_point(&asg).unwrap(), BigInt::from(11));
    }

    #[test]
    fn esp_expansion_is_subset_sum() {
        let c = esp_circuit(5, 3);
        let p = c.eval_poly(10_000).unwrap();
        assert_eq!(p.num_terms(), 10);
        for (_, coeff) in p.terms() {
            assert_eq!(coeff, &BigInt::one());
        }
        for (m, _) in p.terms() {
            assert_eq!(m.total_degree(), 3);
            assert!(m.iter().all(|(_, e)| e == 1));
        }
    }

    #[test]
    fn esp_recurrence_structural() {
        // sigma_{n,k} = sigma_{n-1,k} + X_{n-1} * sigma_{n-1,k-1} by expansion.
        for n in 2..=8usize {
            for k in 1..=n.min(4) {
                let lhs = esp_circuit(n, k).eval_poly(100_000).unwrap();
                let a = esp_circuit(n - 1, k.min(n - 1)).eval_poly(100_000).unwrap();
                let a = if k <= n - 1 { a } else { SparsePolynomial::zero() };
                let b = if k >= 1 && k - 1 <= n - 1 {
                    esp_circuit(n - 1, k - 1).eval_poly(100_000).unwrap()
                } else {
                    SparsePolynomial::zero()
                };
                let xn = SparsePolynomial::var(VarId::x((n - 1) as u32));
                let rhs = &a + &(&xn * &b);
                assert_eq!(lhs, rhs, "n={n} k={k}");
            }
        }
    }

    fn eval_bnk_at(c: &Circuit, n: usize, mask: u32) -> BigInt {
        let mut asg = BTreeMap::new();
        for i in 0..n {
            asg.insert(VarId::x(i as u32), BigInt::from((mask >> i) & 1));
        }
        c.eval_point(&asg).unwrap()
    }

    #[test]
    fn bnk_examples() {
        let c = indicator_bnk(3, 1);
        assert_eq!(eval_bnk_at(&c, 3, 0b010), BigInt::one());
        assert_eq!(eval_bnk_at(&c, 3, 0b011), BigInt::zero());
    }

    #[test]
    fn bnk_exhaustive_small() {
        for n in 1..=8usize {
            for k in 0..=n {
                let c = indicator_bnk(n, k);
                c.validate().unwrap();
                for mask in 0u32..(1 << n) {
                    let expect = u32::from(mask.count_ones() as usize == k);
                    assert_eq!(
                        eval_bnk_at(&c, n, mask),
                        BigInt::from(expect),
                        "n={n} k={k} mask={mask:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn constant_gates_are_constant_free() {
        for v in [-3432i64, -2, -1, 0, 1, 2, 7, 100, 3432] {
            let mut b = CircuitBuilder::new();
            let g = constant_gate(&mut b, &BigInt::from(v));
            let c = b.finish(g, true);
            c.validate().unwrap();
            assert_eq!(c.eval_point(&BTreeMap::new()).unwrap(), BigInt::from(v));
        }
    }

    #[test]
    fn pochhammer_small() {
        let (p1, c1) = pochhammer(1);
        c1.validate().unwrap();
        let x = SparsePolynomial::var(VarId::x(0));
        assert_eq!(p1, &x + &SparsePolynomial::one());

        let (p3, c3) = pochhammer(3);
        assert_eq!(p3, c3.eval_poly(1000).unwrap());
        let coeff = |p: &SparsePolynomial, d: u32| {
            p.coefficient(&crate::algebra::Monomial::from_pairs(&[(VarId::x(0), d)]))
        };
        assert_eq!(coeff(&p3, 3), BigInt::from(1));
        assert_eq!(coeff(&p3, 2), BigInt::from(6));
        assert_eq!(coeff(&p3, 1), BigInt::from(11));
        assert_eq!(coeff(&p3, 0), BigInt::from(6));
    }

    #[test]
    fn pochhammer_coefficients_are_esp_values() {
        // Coefficient of X^(n-k) equals sigma_k(1..n).
        for n in [5usize, 12, 30] {
            let (p, _) = pochhammer(n);
            for k in 0..=n.min(6) {
                let mut asg = BTreeMap::new();
                for i in 0..n {
                    asg.insert(VarId::x(i as u32), BigInt::from(i as i64 + 1));
                }
                let sigma = esp_circuit(n, k).eval_point(&asg).unwrap();
                let coeff = p.coefficient(&crate::algebra::Monomial::from_pairs(&[(
                    VarId::x(0),
                    (n - k) as u32,
                )]));
                assert_eq!(coeff, sigma, "n={n} k={k}");
            }
        }
        let (p5, _) = pochhammer(5);
        let c4 = p5.coefficient(&crate::algebra::Monomial::from_pairs(&[(VarId::x(0), 4)]));
        assert_eq!(c4, BigInt::from(15));
    }

    #[test]
    fn bitpack_small_and_large() {
        let r1 = bitpack_identity(1);
        assert_eq!(r1.product_value, BigInt::from(3));
        assert!(r1.equal && r1.no_overlap);

        let r2 = bitpack_identity(2);
        assert_eq!(r2.product_value, BigInt::from(306));
        assert!(r2.equal && r2.no_overlap);

        for n in [4usize, 9, 16] {
            let r = bitpack_identity(n);
            assert!(r.equal, "n={n}");
            assert!(r.no_overlap, "n={n}");
        }
    }

    #[test]
    fn towers() {
        let (x0, c0) = power_tower_circuits(0);
        let mut asg = BTreeMap::new();
        asg.insert(VarId::x(0), BigInt::from(7));
        assert_eq!(x0.eval_point(&asg).unwrap(), BigInt::from(7));
        assert_eq!(c0.eval_point(&BTreeMap::new()).unwrap(), BigInt::from(2));

        let (x3, _) = power_tower_circuits(3);
        let mut asg = BTreeMap::new();
        asg.insert(VarId::x(0), BigInt::from(3));
        assert_eq!(x3.eval_point(&asg).unwrap(), BigInt::from(6561));

        let (_, c4) = power_tower_circuits(4);
        c4.validate().unwrap();
        assert_eq!(c4.eval_point(&BTreeMap::new()).unwrap(), BigInt::from(65536));

        let (x5, c5) = power_tower_circuits(5);
        assert!(x5.size() <= 16 && c5.size() <= 16);
    }
}
