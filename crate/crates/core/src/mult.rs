//! The coefficient group: nonzero rationals, written multiplicatively, and
//! exact solving of multiplicative linear systems over it.
//!
//! A nonzero rational is a sign bit times a product of powers of pairwise
//! coprime integers. The coprime base is discovered lazily from the values at
//! hand by gcd refinement, so no integer factorisation is ever needed: the
//! exponent lattice has one coordinate per base element plus the sign.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::lattice::{smith_decompose_dims, IMat, IVec};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qpow(x: &Q, e: i64) -> Q {
    assert!(!x.is_zero() || e >= 0, "zero to a negative power");
    let p = num_traits::pow(x.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        p.recip()
    } else {
        p
    }
}

/// Evaluate a group morphism stored on a basis (`values[i]` on the i-th basis
/// functional) at the functional `m`: `prod values[i]^m[i]`.
pub fn eval_character(values: &[Q], m: &[i64]) -> Q {
    assert_eq!(values.len(), m.len(), "character rank mismatch");
    values.iter().zip(m).fold(Q::one(), |acc, (v, e)| acc * qpow(v, *e))
}

/// Canonical text form, e.g. `-3/4`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => Some(Q::from_integer(s.parse().ok()?)),
    }
}

/// A pairwise coprime set of integers > 1 such that every registered value
/// is, up to sign, a product of their powers.
#[derive(Clone, Debug, Default)]
pub struct CoprimeBase {
    pub atoms: Vec<BigUint>,
}

impl CoprimeBase {
    pub fn add_rational(&mut self, x: &Q) {
        self.add(x.numer().magnitude().clone());
        self.add(x.denom().magnitude().clone());
    }

    pub fn add(&mut self, n: BigUint) {
        let mut pending = vec![n];
        while let Some(n) = pending.pop() {
            if n <= BigUint::one() {
                continue;
            }
            let mut split = None;
            for (i, a) in self.atoms.iter().enumerate() {
                let g = a.gcd(&n);
                if !g.is_one() {
                    split = Some((i, g));
                    break;
                }
            }
            match split {
                None => self.atoms.push(n),
                Some((i, g)) => {
                    let a = self.atoms.swap_remove(i);
                    if a == n {
                        self.atoms.push(a);
                        continue;
                    }
                    pending.push(g.clone());
                    pending.push(&a / &g);
                    pending.push(&n / &g);
                }
            }
        }
        self.atoms.sort();
        self.atoms.dedup();
    }

    /// Exponent vector of `x` on the atoms, plus the sign bit.
    pub fn exponents(&self, x: &Q) -> (bool, IVec) {
        let mut num = x.numer().magnitude().clone();
        let mut den = x.denom().magnitude().clone();
        let mut e = vec![0i64; self.atoms.len()];
        for (i, a) in self.atoms.iter().enumerate() {
            while (&num % a).is_zero() {
                num /= a;
                e[i] += 1;
            }
            while (&den % a).is_zero() {
                den /= a;
                e[i] -= 1;
            }
        }
        assert!(num.is_one() && den.is_one(), "value not covered by the coprime base");
        (x.is_negative(), e)
    }

    pub fn compose(&self, negative: bool, e: &[i64]) -> Q {
        let mut x = Q::one();
        for (a, k) in self.atoms.iter().zip(e) {
            x *= qpow(&Q::from_integer(BigInt::from_biguint(Sign::Plus, a.clone())), *k);
        }
        if negative {
            -x
        } else {
            x
        }
    }
}

/// Integer solution of `a y = e` (`a` is `rows x cols`), if one exists.
pub fn solve_integer(a: &IMat, rows: usize, cols: usize, e: &[i64]) -> Option<IVec> {
    let (u, d, v) = smith_decompose_dims(a, rows, cols);
    let ue: Vec<i128> = (0..rows).map(|i| (0..rows).map(|k| u[i][k] as i128 * e[k] as i128).sum()).collect();
    let mut z = vec![0i128; cols];
    for i in 0..rows {
        let di = if i < cols { d[i][i] as i128 } else { 0 };
        if di == 0 {
            if ue[i] != 0 {
                return None;
            }
        } else {
            if ue[i] % di != 0 {
                return None;
            }
            z[i] = ue[i] / di;
        }
    }
    Some((0..cols).map(|i| i64::try_from((0..cols).map(|k| v[i][k] as i128 * z[k]).sum::<i128>()).expect("overflow")).collect())
}

/// Solution of `a s = b` over GF(2).
pub fn solve_gf2(a: &IMat, rows: usize, cols: usize, b: &[bool]) -> Option<Vec<bool>> {
    let mut m: Vec<Vec<bool>> = (0..rows)
        .map(|i| {
            let mut r: Vec<bool> = (0..cols).map(|j| a[i][j].rem_euclid(2) == 1).collect();
            r.push(b[i]);
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| m[i][c]) else { continue };
        m.swap(r, p);
        for i in 0..rows {
            if i != r && m[i][c] {
                let row = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(row) {
                    *x ^= y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if m[r..].iter().any(|row| row[cols]) {
        return None;
    }
    let mut s = vec![false; cols];
    for (i, c) in pivots.iter().enumerate() {
        s[*c] = m[i][cols];
    }
    Some(s)
}

/// Solve `prod_j x_j^{a[i][j]} = b[i]` for nonzero rationals `x`.
pub fn solve_multiplicative(a: &IMat, rows: usize, cols: usize, b: &[Q]) -> Option<Vec<Q>> {
    assert_eq!(b.len(), rows);
    let mut base = CoprimeBase::default();
    for x in b {
        base.add_rational(x);
    }
    let exps: Vec<(bool, IVec)> = b.iter().map(|x| base.exponents(x)).collect();
    let signs: Vec<bool> = exps.iter().map(|(s, _)| *s).collect();
    let sol_sign = solve_gf2(a, rows, cols, &signs)?;
    let mut sol = vec![vec![0i64; base.atoms.len()]; cols];
    for k in 0..base.atoms.len() {
        let e: IVec = exps.iter().map(|(_, v)| v[k]).collect();
        let y = solve_integer(a, rows, cols, &e)?;
        for j in 0..cols {
            sol[j][k] = y[j];
        }
    }
    Some((0..cols).map(|j| base.compose(sol_sign[j], &sol[j])).collect())
}

/// Small integer for reporting exponents.
pub fn to_i64(x: &BigInt) -> Option<i64> {
    x.to_i64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coprime_base_refines() {
        let mut b = CoprimeBase::default();
        b.add_rational(&qf(12, 35));
        b.add_rational(&q(10));
        for x in [qf(12, 35), q(10), qf(-5, 18)] {
            let (s, e) = b.exponents(&x);
            assert_eq!(b.compose(s, &e), x);
        }
        for i in 0..b.atoms.len() {
            for j in i + 1..b.atoms.len() {
                assert!(b.atoms[i].gcd(&b.atoms[j]).is_one());
            }
        }
    }

    #[test]
    fn coprime_base_keeps_repeated_factors() {
        let mut b = CoprimeBase::default();
        b.add_rational(&q(12));
        b.add_rational(&q(6));
        for x in [q(12), q(6), qf(1, 72)] {
            let (s, e) = b.exponents(&x);
            assert_eq!(b.compose(s, &e), x);
        }
    }

    proptest::proptest! {
        #[test]
        fn coprime_base_covers_every_input(xs in proptest::collection::vec((1i64..2000, 1i64..2000, proptest::bool::ANY), 1..8)) {
            let vals: Vec<Q> = xs.iter().map(|&(n, d, neg)| if neg { -qf(n, d) } else { qf(n, d) }).collect();
            let mut b = CoprimeBase::default();
            for x in &vals {
                b.add_rational(x);
            }
            for x in &vals {
                let (s, e) = b.exponents(x);
                proptest::prop_assert_eq!(&b.compose(s, &e), x);
            }
            for i in 0..b.atoms.len() {
                for j in i + 1..b.atoms.len() {
                    proptest::prop_assert!(b.atoms[i].gcd(&b.atoms[j]).is_one());
                }
            }
        }
    }

    #[test]
    fn multiplicative_solve_roundtrip() {
        // x0 * x1 = 6, x1^2 = 4, x0 / x1 = -3/2 ... with a sign twist.
        let a = vec![vec![1, 1], vec![0, 2]];
        let b = vec![q(-6), q(4)];
        let x = solve_multiplicative(&a, 2, 2, &b).unwrap();
        assert_eq!(&x[0] * &x[1], q(-6));
        assert_eq!(&x[1] * &x[1], q(4));
        // x^2 = 2 has no rational solution.
        assert!(solve_multiplicative(&vec![vec![2]], 1, 1, &[q(2)]).is_none());
        // x^2 = -1 has none either.
        assert!(solve_multiplicative(&vec![vec![2]], 1, 1, &[q(-1)]).is_none());
    }

    #[test]
    fn character_eval() {
        assert_eq!(eval_character(&[q(2), qf(1, 3)], &[3, -2]), q(72));
        assert_eq!(eval_character(&[], &[]), q(1));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("-3/4").unwrap(), qf(-3, 4));
        assert_eq!(fmt_q(&qf(6, 3)), "2");
        assert!(parse_q("1/0").is_none());
    }
}
