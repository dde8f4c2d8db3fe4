//! Sparse matrices of Laurent monomials `c z^e` with rational coefficients.
//!
//! Products group the middle sum by total exponent. Every entry of a
//! well-formed product has at most one surviving exponent; anything else is
//! an [`Error::ExponentClash`], never a silent merge.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{dot, vadd, vsub, IVec};
use crate::mult::{fmt_q, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub coef: Q,
    pub exp: IVec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// Rank of the exponent lattice.
    pub rank: usize,
    /// Rays of the chart cone; nonzero entries have exponents in its dual.
    pub chart: Vec<IVec>,
    /// Nonzero entries only.
    pub entries: BTreeMap<(usize, usize), Entry>,
}

impl MonomialMatrix {
    pub fn zero(rows: Vec<String>, cols: Vec<String>, rank: usize) -> Self {
        MonomialMatrix { rows, cols, rank, chart: Vec::new(), entries: BTreeMap::new() }
    }

    pub fn identity(names: Vec<String>, rank: usize) -> Self {
        let mut m = Self::zero(names.clone(), names, rank);
        for i in 0..m.rows.len() {
            m.entries.insert((i, i), Entry { coef: Q::one(), exp: vec![0; rank] });
        }
        m
    }

    /// Diagonal matrix `diag(c_i z^{e_i})`.
    pub fn diagonal(names: Vec<String>, rank: usize, diag: Vec<(Q, IVec)>) -> Self {
        let mut m = Self::zero(names.clone(), names, rank);
        for (i, (c, e)) in diag.into_iter().enumerate() {
            m.set(i, i, c, e);
        }
        m
    }

    pub fn with_chart(mut self, chart: Vec<IVec>) -> Self {
        self.chart = chart;
        self
    }

    pub fn set(&mut self, i: usize, j: usize, coef: Q, exp: IVec) {
        debug_assert_eq!(exp.len(), self.rank);
        if coef.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), Entry { coef, exp });
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Entry> {
        self.entries.get(&(i, j))
    }

    pub fn coef(&self, i: usize, j: usize) -> Q {
        self.get(i, j).map_or_else(Q::zero, |e| e.coef.clone())
    }

    pub fn is_square(&self) -> bool {
        self.rows.len() == self.cols.len()
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && self.entries.len() == self.rows.len()
            && self.entries.iter().all(|(&(i, j), e)| i == j && e.coef.is_one() && e.exp.iter().all(|x| *x == 0))
    }

    /// Every nonzero exponent lies in the dual of the chart cone.
    pub fn is_regular(&self) -> bool {
        self.entries.values().all(|e| self.chart.iter().all(|r| dot(&e.exp, r) >= 0))
    }

    pub fn mul(&self, other: &MonomialMatrix) -> Result<MonomialMatrix> {
        if self.cols.len() != other.rows.len() || self.rank != other.rank {
            return Err(Error::IndexMismatch(format!(
                "product of {}x{} (rank {}) and {}x{} (rank {})",
                self.rows.len(),
                self.cols.len(),
                self.rank,
                other.rows.len(),
                other.cols.len(),
                other.rank
            )));
        }
        let mut by_row: BTreeMap<usize, Vec<(usize, &Entry)>> = BTreeMap::new();
        for (&(k, j), e) in &other.entries {
            by_row.entry(k).or_default().push((j, e));
        }
        let mut acc: BTreeMap<(usize, usize), BTreeMap<IVec, Q>> = BTreeMap::new();
        for (&(i, k), a) in &self.entries {
            for &(j, b) in by_row.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
                *acc.entry((i, j)).or_default().entry(vadd(&a.exp, &b.exp)).or_insert_with(Q::zero) += &a.coef * &b.coef;
            }
        }
        let mut out = MonomialMatrix::zero(self.rows.clone(), other.cols.clone(), self.rank).with_chart(self.chart.clone());
        for ((i, j), groups) in acc {
            let live: Vec<(IVec, Q)> = groups.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            match live.len() {
                0 => {}
                1 => {
                    let (e, c) = live.into_iter().next().unwrap();
                    out.set(i, j, c, e);
                }
                _ => {
                    let terms: Vec<String> = live.iter().map(|(e, c)| format!("{}*z^{:?}", fmt_q(c), e)).collect();
                    return Err(Error::ExponentClash(format!("entry ({}, {}): {}", self.rows[i], other.cols[j], terms.join(" + "))));
                }
            }
        }
        Ok(out)
    }

    /// Applies `f` to every entry: `None` drops it, `Some((c, e))`
    /// multiplies the coefficient by `c` and replaces the exponent by `e`.
    pub fn map_entries(&self, rank: usize, mut f: impl FnMut(usize, usize, &Entry) -> Option<(Q, IVec)>) -> MonomialMatrix {
        let mut out = MonomialMatrix::zero(self.rows.clone(), self.cols.clone(), rank);
        for (&(i, j), e) in &self.entries {
            if let Some((c, x)) = f(i, j, e) {
                out.set(i, j, &e.coef * c, x);
            }
        }
        out
    }

    /// Vanishing rule on a chart: monomials whose exponent leaves the dual
    /// of the cone are set to zero.
    pub fn vanishing(&self, rays: &[IVec]) -> MonomialMatrix {
        let mut out = self.map_entries(self.rank, |_, _, e| rays.iter().all(|r| dot(&e.exp, r) >= 0).then(|| (Q::one(), e.exp.clone())));
        out.chart = rays.to_vec();
        out
    }

    /// Exponent weights with `e_ij = w_i - u_j` on every nonzero entry, if
    /// they exist. One representative per connected component.
    pub fn weights(&self) -> Option<(Vec<IVec>, Vec<IVec>, Vec<usize>, Vec<usize>)> {
        let (n, m) = (self.rows.len(), self.cols.len());
        let mut w: Vec<Option<IVec>> = vec![None; n];
        let mut u: Vec<Option<IVec>> = vec![None; m];
        let mut rc = vec![usize::MAX; n];
        let mut cc = vec![usize::MAX; m];
        let mut adj_r: Vec<Vec<(usize, &IVec)>> = vec![Vec::new(); n];
        let mut adj_c: Vec<Vec<(usize, &IVec)>> = vec![Vec::new(); m];
        for (&(i, j), e) in &self.entries {
            adj_r[i].push((j, &e.exp));
            adj_c[j].push((i, &e.exp));
        }
        let mut comp = 0;
        let zero = vec![0; self.rank];
        for start in 0..n + m {
            let seen = if start < n { w[start].is_some() } else { u[start - n].is_some() };
            if seen {
                continue;
            }
            if start < n {
                w[start] = Some(zero.clone());
                rc[start] = comp;
            } else {
                u[start - n] = Some(zero.clone());
                cc[start - n] = comp;
            }
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                if x < n {
                    let wi = w[x].clone().unwrap();
                    for &(j, e) in &adj_r[x] {
                        let uj = vsub(&wi, e);
                        match &u[j] {
                            Some(v) if *v != uj => return None,
                            Some(_) => {}
                            None => {
                                u[j] = Some(uj);
                                cc[j] = comp;
                                queue.push_back(n + j);
                            }
                        }
                    }
                } else {
                    let uj = u[x - n].clone().unwrap();
                    for &(i, e) in &adj_c[x - n] {
                        let wi = vadd(&uj, e);
                        match &w[i] {
                            Some(v) if *v != wi => return None,
                            Some(_) => {}
                            None => {
                                w[i] = Some(wi);
                                rc[i] = comp;
                                queue.push_back(i);
                            }
                        }
                    }
                }
            }
            comp += 1;
        }
        Some((w.into_iter().map(Option::unwrap).collect(), u.into_iter().map(Option::unwrap).collect(), rc, cc))
    }

    pub fn coefficients(&self) -> Vec<Vec<Q>> {
        let mut c = vec![vec![Q::zero(); self.cols.len()]; self.rows.len()];
        for (&(i, j), e) in &self.entries {
            c[i][j] = e.coef.clone();
        }
        c
    }

    /// Determinant as `c z^e`. A matrix that is not monomially balanced
    /// has no monomial determinant.
    pub fn det(&self) -> Result<(Q, IVec)> {
        if !self.is_square() {
            return Err(Error::IndexMismatch("determinant of a non-square matrix".into()));
        }
        let (w, u, _, _) = self.weights().ok_or_else(|| Error::ExponentClash("exponents are not of the form w_i - u_j".into()))?;
        let d = det_q(self.coefficients());
        if d.is_zero() {
            return Ok((d, vec![0; self.rank]));
        }
        let e = w.iter().fold(vec![0; self.rank], |a, x| vadd(&a, x));
        Ok((d, u.iter().fold(e, |a, x| vsub(&a, x))))
    }

    pub fn inverse(&self) -> Result<MonomialMatrix> {
        if !self.is_square() {
            return Err(Error::IndexMismatch("inverse of a non-square matrix".into()));
        }
        let (w, u, rc, cc) = self.weights().ok_or_else(|| Error::ExponentClash("exponents are not of the form w_i - u_j".into()))?;
        let inv = inverse_q(self.coefficients()).ok_or_else(|| Error::SingularFrame(format!("rows {:?}", self.rows)))?;
        let mut out = MonomialMatrix::zero(self.cols.clone(), self.rows.clone(), self.rank).with_chart(self.chart.clone());
        for (j, row) in inv.into_iter().enumerate() {
            for (i, c) in row.into_iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if cc[j] != rc[i] {
                    return Err(Error::ExponentClash(format!("inverse couples {} and {} across exponent components", self.cols[j], self.rows[i])));
                }
                out.set(j, i, c, vsub(&u[j], &w[i]));
            }
        }
        Ok(out)
    }

    /// Rows and columns permuted to the given name orders.
    pub fn reindexed(&self, rows: &[String], cols: &[String]) -> Result<MonomialMatrix> {
        let pos = |names: &[String], n: &String| names.iter().position(|x| x == n).ok_or_else(|| Error::IndexMismatch(format!("unknown index {n}")));
        let rp: Vec<usize> = self.rows.iter().map(|n| pos(rows, n)).collect::<Result<_>>()?;
        let cp: Vec<usize> = self.cols.iter().map(|n| pos(cols, n)).collect::<Result<_>>()?;
        let mut out = MonomialMatrix::zero(rows.to_vec(), cols.to_vec(), self.rank).with_chart(self.chart.clone());
        for (&(i, j), e) in &self.entries {
            out.entries.insert((rp[i], cp[j]), e.clone());
        }
        Ok(out)
    }

    /// Equality of entries, ignoring the recorded chart.
    pub fn same_entries(&self, other: &MonomialMatrix) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.entries == other.entries
    }

    pub fn view(&self) -> MatrixView {
        MatrixView {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            entries: self
                .entries
                .iter()
                .map(|(&(i, j), e)| EntryView { row: self.rows[i].clone(), col: self.cols[j].clone(), coef: fmt_q(&e.coef), exp: e.exp.clone() })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EntryView {
    pub row: String,
    pub col: String,
    pub coef: String,
    pub exp: IVec,
}

/// Serializable form for reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixView {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub entries: Vec<EntryView>,
}

pub fn det_q(mut m: Vec<Vec<Q>>) -> Q {
    let n = m.len();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else { return Q::zero() };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= &m[c][c];
        for i in c + 1..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &m[c][c];
            for k in c..n {
                let t = &f * &m[c][k];
                m[i][k] -= t;
            }
        }
    }
    d
}

pub fn inverse_q(m: Vec<Vec<Q>>) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(p, c);
        let piv = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x /= &piv;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let row = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(row) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mult::{q, qf};
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn product_groups_by_exponent() {
        let mut a = MonomialMatrix::zero(names(&["a", "b"]), names(&["x", "y"]), 1);
        a.set(0, 0, q(1), vec![1]);
        a.set(0, 1, q(1), vec![0]);
        let mut b = MonomialMatrix::zero(names(&["x", "y"]), names(&["p"]), 1);
        b.set(0, 0, q(2), vec![-1]);
        b.set(1, 0, q(-2), vec![0]);
        // 2 z^0 - 2 z^0 cancels.
        assert!(a.mul(&b).unwrap().entries.is_empty());
        b.set(1, 0, q(3), vec![0]);
        assert_eq!(a.mul(&b).unwrap().get(0, 0).unwrap(), &Entry { coef: q(5), exp: vec![0] });
        b.set(1, 0, q(3), vec![1]);
        assert!(matches!(a.mul(&b), Err(Error::ExponentClash(_))));
    }

    #[test]
    fn vanishing_drops_irregular_monomials() {
        let mut a = MonomialMatrix::identity(names(&["a", "b"]), 2);
        a.set(0, 1, q(4), vec![1, -1]);
        let r = a.vanishing(&[vec![1, 0], vec![0, 1]]);
        assert_eq!(r.entries.len(), 2);
        assert!(r.is_regular());
        assert_eq!(a.vanishing(&[vec![1, 0]]).entries.len(), 3);
    }

    #[test]
    fn determinant_of_monomial_matrix() {
        // [[2z, z^2], [0, 3z]] has row weights (2, 1) and column weights (1, 0).
        let mut b = MonomialMatrix::zero(names(&["a", "b"]), names(&["a", "b"]), 1);
        b.set(0, 0, q(2), vec![1]);
        b.set(0, 1, q(1), vec![2]);
        b.set(1, 1, q(3), vec![1]);
        assert_eq!(b.det().unwrap(), (q(6), vec![2]));
        let inv = b.inverse().unwrap();
        assert!(b.mul(&inv).unwrap().is_identity());
        assert!(inv.mul(&b).unwrap().is_identity());
    }

    #[test]
    fn singular_and_unbalanced() {
        let mut a = MonomialMatrix::zero(names(&["a", "b"]), names(&["a", "b"]), 1);
        a.set(0, 0, q(1), vec![0]);
        a.set(0, 1, q(1), vec![0]);
        a.set(1, 0, q(1), vec![0]);
        a.set(1, 1, q(1), vec![0]);
        assert!(matches!(a.inverse(), Err(Error::SingularFrame(_))));
        a.set(1, 1, q(1), vec![1]);
        assert!(a.weights().is_none());
        assert!(matches!(a.det(), Err(Error::ExponentClash(_))));
    }

    fn arb_balanced(n: usize) -> impl Strategy<Value = MonomialMatrix> {
        (
            proptest::collection::vec(-3i64..4, n * n),
            proptest::collection::vec(-2i64..3, n),
            proptest::collection::vec(-2i64..3, n),
        )
            .prop_map(move |(c, w, u)| {
                let nm: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
                let mut m = MonomialMatrix::zero(nm.clone(), nm, 1);
                for i in 0..n {
                    for j in 0..n {
                        m.set(i, j, q(c[i * n + j]), vec![w[i] - u[j]]);
                    }
                }
                m
            })
    }

    proptest! {
        #[test]
        fn inverse_is_two_sided(m in arb_balanced(3)) {
            match m.inverse() {
                Ok(inv) => {
                    prop_assert!(m.mul(&inv).unwrap().is_identity());
                    prop_assert!(inv.mul(&m).unwrap().is_identity());
                    let (d, _) = m.det().unwrap();
                    let (di, _) = inv.det().unwrap();
                    prop_assert_eq!(d * di, q(1));
                }
                Err(Error::SingularFrame(_)) => prop_assert_eq!(det_q(m.coefficients()), q(0)),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn product_is_associative(a in arb_balanced(3), b in arb_balanced(3), c in arb_balanced(3)) {
            // Balanced matrices with disjoint weights may clash; only compare when defined.
            if let (Ok(ab), Ok(bc)) = (a.mul(&b), b.mul(&c)) {
                if let (Ok(l), Ok(r)) = (ab.mul(&c), a.mul(&bc)) {
                    prop_assert!(l.same_entries(&r));
                }
            }
        }

        #[test]
        fn det_is_multiplicative_on_diagonals(x in proptest::collection::vec((1i64..5, -3i64..4), 3), y in proptest::collection::vec((1i64..5, -3i64..4), 3)) {
            let nm = names(&["a", "b", "c"]);
            let dx = MonomialMatrix::diagonal(nm.clone(), 1, x.iter().map(|(c, e)| (q(*c), vec![*e])).collect());
            let dy = MonomialMatrix::diagonal(nm.clone(), 1, y.iter().map(|(c, e)| (qf(*c, 1), vec![*e])).collect());
            let (a, ea) = dx.det().unwrap();
            let (b, eb) = dy.det().unwrap();
            let (c, ec) = dx.mul(&dy).unwrap().det().unwrap();
            prop_assert_eq!(c, a * b);
            prop_assert_eq!(ec, vadd(&ea, &eb));
        }
    }
}
