//! Builders for multi-sections given by piecewise-linear functions on the
//! face fan of a lattice polytope, one function per sheet.

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};

use crate::base::{ambient_maps, build_base_from_polytope, build_fan_base, ClosedGluing};
use crate::glue::BraneData;
use crate::kaneyama::{KaneyamaG, KaneyamaH};
use crate::obstruction::{obstruction_cochain, solve_coboundary, CechCochain};
use crate::cover::{ConeComplexSection, CoveringData, MultiSection};
use crate::error::{Error, Result};
use crate::lattice::{IVec, PolytopeFaceLattice};
use crate::monomial::inverse_q;
use crate::mult::{q, Q};

/// The linear functional taking the given values on the vertices of a
/// facet, if it exists and is integral.
pub fn facet_slope(fl: &PolytopeFaceLattice, verts: &[usize], values: &[i64]) -> Option<IVec> {
    let n = fl.dim;
    // Greedily pick n independent vertices.
    let mut chosen: Vec<usize> = Vec::new();
    for &v in verts {
        let mut trial: Vec<Vec<Q>> = chosen.iter().chain([&v]).map(|&w| fl.vertices[w].iter().map(|&x| q(x)).collect()).collect();
        if rank_q(&mut trial) == chosen.len() + 1 {
            chosen.push(v);
        }
        if chosen.len() == n {
            break;
        }
    }
    if chosen.len() != n {
        return None;
    }
    let a: Vec<Vec<Q>> = chosen.iter().map(|&v| fl.vertices[v].iter().map(|&x| q(x)).collect()).collect();
    let inv = inverse_q(a)?;
    let m: Vec<Q> = (0..n).map(|j| (0..n).map(|i| &inv[j][i] * q(values[chosen[i]])).sum()).collect();
    if m.iter().any(|x| !x.is_integer()) {
        return None;
    }
    let m: IVec = m.iter().map(|x| x.to_integer().to_i64().unwrap()).collect();
    verts.iter().all(|&v| crate::lattice::dot(&m, &fl.vertices[v]) == values[v]).then_some(m)
}

fn rank_q(m: &mut [Vec<Q>]) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        for i in r + 1..rows {
            let f = &m[i][c] / &m[r][c];
            for k in c..cols {
                let t = &f * &m[r][k];
                m[i][k] -= t;
            }
        }
        r += 1;
    }
    r
}

/// Global slopes of the sheets: `values[k][v]` is the value of the k-th
/// sheet's function at vertex `v`.
pub fn sheet_globals(fl: &PolytopeFaceLattice, base: &crate::base::BaseComplex, cover: &CoveringData, sheets: &[&str], values: &[Vec<i64>]) -> Result<BTreeMap<usize, IVec>> {
    let sets = base.vertex_sets.as_ref().ok_or_else(|| Error::Invalid("base has no ambient polytope".into()))?;
    let mut out = BTreeMap::new();
    for (k, s) in sheets.iter().enumerate() {
        for &sig in &base.max_cells {
            let name = if s.is_empty() { base.name(sig).to_string() } else { format!("{}.{s}", base.name(sig)) };
            let x = cover.index(&name).ok_or_else(|| Error::Invalid(format!("no lift {name}")))?;
            let m = facet_slope(fl, &sets[sig], &values[k]).ok_or_else(|| Error::Invalid(format!("values of sheet {k} are not integral-linear on {}", base.name(sig))))?;
            out.insert(x, m);
        }
    }
    Ok(out)
}

/// Multi-section over the polytope boundary, one sheet per value table.
pub fn boundary_section(fl: &PolytopeFaceLattice, sheets: &[&str], values: &[Vec<i64>]) -> Result<MultiSection> {
    let base = build_base_from_polytope(fl)?;
    let cover = CoveringData::sheets(&base, sheets);
    let global = sheet_globals(fl, &base, &cover, sheets, values)?;
    let sections: Vec<_> = ambient_maps(fl, &base)?.into_iter().map(|(_, s)| s).collect();
    MultiSection::from_global(base, cover, &sections, &global)
}

/// Cone-complex section over the face fan, one sheet per value table.
pub fn fan_section(fl: &PolytopeFaceLattice, sheets: &[&str], values: &[Vec<i64>]) -> Result<ConeComplexSection> {
    let base = build_fan_base(fl)?;
    let cover = CoveringData::sheets(&base, sheets);
    let global = sheet_globals(fl, &base, &cover, sheets, values)?;
    ConeComplexSection::new(base, 0, cover, global)
}

/// Vertex values of the line bundle `O(a, b)` on the square face fan:
/// `a` on the diagonal `(1,1), (-1,-1)`, `b` on the antidiagonal.
pub fn square_line_bundle(a: i64, b: i64) -> Vec<i64> {
    // Vertices of the square fixture: (-1,-1), (1,-1), (1,1), (-1,1).
    vec![a, b, a, b]
}

/// Two sheets over the polytope boundary joined at the vertex with the
/// least index: the joined lift has multiplicity two.
pub fn ramified_boundary(fl: &PolytopeFaceLattice, values: &[Vec<i64>]) -> Result<MultiSection> {
    let base = build_base_from_polytope(fl)?;
    let sheets = CoveringData::sheets(&base, &["a", "b"]);
    let v = (0..base.cells.len()).find(|&c| base.cells[c].dim == 0).unwrap();
    let join = |n: &str| -> String {
        match n.rsplit_once('.') {
            Some((cell, _)) if cell == base.name(v) => format!("{cell}.r"),
            _ => n.to_string(),
        }
    };
    let mut lifts: Vec<_> = sheets.lifts.iter().filter(|l| l.cell != v).cloned().collect();
    lifts.push(crate::cover::Lift { name: format!("{}.r", base.name(v)), cell: v, mult: 2 });
    let mut maps: Vec<(String, String)> = sheets
        .down
        .iter()
        .filter(|((x, c), _)| sheets.cell(*x) != *c)
        .map(|((x, _), y)| (join(sheets.name(*x)), join(sheets.name(*y))))
        .collect();
    maps.sort();
    maps.dedup();
    let cover = CoveringData::new(&base, lifts, &maps)?;
    let global = sheet_globals(fl, &base, &cover, &["a", "b"], values)?;
    let sections: Vec<_> = ambient_maps(fl, &base)?.into_iter().map(|(_, s)| s).collect();
    MultiSection::from_global(base, cover, &sections, &global)
}

/// Brane data with empty `G` and `H` blocks (so identity defaults) and `k`
/// solved from the gluing, or `k = 1` when the gluing is obstructed.
pub fn plain_brane(ms: &MultiSection, sbar: ClosedGluing) -> Result<BraneData> {
    let c = obstruction_cochain(ms, &sbar)?;
    let k = solve_coboundary(ms, &c)?.unwrap_or_else(|| CechCochain::one(1));
    Ok(BraneData { g: KaneyamaG::default(), h: KaneyamaH::default(), k, sbar })
}

fn mul_q(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| &a[i][k] * &b[k][j]).sum()).collect()).collect()
}

/// Two equal sheets over the polytope boundary joined at the first vertex,
/// with vertex data `G_{ij} = A_i^{-1} A_j` and `h(v -> t) = A_s` in the
/// sheet basis of each facet `s` around the vertex. The `A_i` cycle through
/// `mats`; a single identity gives a decomposable block.
pub fn ramified_brane(fl: &PolytopeFaceLattice, values: &[Vec<i64>], mats: &[Vec<Vec<Q>>]) -> Result<(MultiSection, BraneData)> {
    let ms = ramified_boundary(fl, values)?;
    let (b, c) = (&ms.base, &ms.cover);
    let x = c.index(&format!("{}.r", b.name((0..b.cells.len()).find(|&t| b.cells[t].dim == 0).unwrap()))).unwrap();
    let v = c.cell(x);
    let facets = b.max_over(v);
    let a = |i: usize| mats[i % mats.len()].clone();
    let mut d = plain_brane(&ms, ClosedGluing::default())?;
    for (i, &s1) in facets.iter().enumerate() {
        for (j, &s2) in facets.iter().enumerate() {
            let inv = inverse_q(a(i)).ok_or_else(|| Error::Invalid("singular vertex matrix".into()))?;
            let m = mul_q(&inv, &a(j));
            d.g.blocks.entry((x, s1, s2)).or_default();
            for (p, &ra) in c.frame(s1).iter().enumerate() {
                for (r, &cb) in c.frame(s2).iter().enumerate() {
                    d.g.set(&ms, x, ra, cb, m[p][r].clone());
                }
            }
        }
    }
    for t in 0..b.cells.len() {
        if !b.lt(v, t) {
            continue;
        }
        for s in b.max_over(t) {
            let i = facets.iter().position(|&f| f == s).unwrap();
            d.h.touch(v, t, s);
            for (p, &ra) in c.frame(s).iter().enumerate() {
                for (r, &cb) in c.frame(s).iter().enumerate() {
                    d.h.set(&ms, v, t, ra, cb, a(i)[p][r].clone());
                }
            }
        }
    }
    Ok((ms, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{cube, square};
    use crate::cover::{validate_covering, validate_slopes};

    #[test]
    fn line_bundle_slopes() {
        let fl = square();
        // Right cone over (1,-1), (1,1).
        assert_eq!(facet_slope(&fl, &[1, 2], &square_line_bundle(3, 1)), Some(vec![2, 1]));
        assert_eq!(facet_slope(&fl, &[1, 2], &square_line_bundle(2, 1)), None);
        let cs = fan_section(&fl, &[""], &[square_line_bundle(1, 1)]).unwrap();
        assert!(validate_slopes(&cs.ms).unwrap().findings.is_empty());
    }

    #[test]
    fn cube_support_function() {
        let fl = cube();
        let ms = boundary_section(&fl, &[""], &[vec![1; 8]]).unwrap();
        assert!(validate_covering(&ms.base, &ms.cover).is_empty());
        assert!(validate_slopes(&ms).unwrap().findings.is_empty());
        let r = ramified_boundary(&fl, &[vec![1; 8], vec![-1; 8]]).unwrap();
        assert!(validate_covering(&r.base, &r.cover).is_empty());
        assert_eq!(r.degree(), 2);
    }
}
