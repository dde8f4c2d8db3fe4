//! The scenario file: a versioned JSON document naming a base, a branched
//! cover, slopes, Kaneyama data, gluing data and optional overrides. Every
//! cross-reference is by name; iteration order is lexicographic on names.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tropsheaf::base::{build_base_abstract, build_base_from_polytope, build_fan_base, open_to_closed, AbstractInput, BaseComplex, Cell, ClosedGluing, OpenGluing};
use tropsheaf::cover::{ConeComplexSection, CoveringData, Lift, MultiSection};
use tropsheaf::equiv::{solve_k, Brane};
use tropsheaf::glue::BraneData;
use tropsheaf::kaneyama::{twist_by_local_system, KaneyamaG, KaneyamaH};
use tropsheaf::lattice::{face_lattice, IMat, IVec, PolytopeFaceLattice};
use tropsheaf::mult::{fmt_q, parse_q, Q};
use tropsheaf::obstruction::CechCochain;
use tropsheaf::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub base: BaseSection,
    pub cover: CoverSection,
    pub slopes: Vec<SlopeEntry>,
    #[serde(default)]
    pub kaneyama: KaneyamaSection,
    #[serde(default)]
    pub gluing: GluingSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub local_system: Vec<LocalEntry>,
    /// Explicit `k` values; when absent `k` is solved from the gluing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<KEntry>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSection {
    Polytope(PolytopeBase),
    Abstract(AbstractBase),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolytopeMode {
    /// Proper faces of the polytope.
    #[default]
    Boundary,
    /// Cones of the face fan, with an apex below everything.
    Fan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeBase {
    pub vertices: Vec<IVec>,
    #[serde(default)]
    pub mode: PolytopeMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractBase {
    pub cells: Vec<AbstractCell>,
    /// `(face, cell)` name pairs.
    pub containments: Vec<(String, String)>,
    pub maps: Vec<MapEntry>,
    pub fan: Vec<FanEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractCell {
    pub name: String,
    pub dim: usize,
    pub qrank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub from: String,
    pub to: String,
    pub matrix: IMat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanEntry {
    pub from: String,
    pub to: String,
    pub rays: Vec<IVec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSection {
    pub lifts: Vec<LiftEntry>,
    /// `(upper, lower)` lift name pairs; unlisted maps are composed.
    pub maps: Vec<(String, String)>,
}

fn one() -> u32 {
    1
}

fn is_one(m: &u32) -> bool {
    *m == 1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftEntry {
    pub name: String,
    pub cell: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub mult: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeEntry {
    pub lift: String,
    pub max_lift: String,
    pub m: IVec,
}

/// `(row lift, column lift, rational)`.
pub type Triple = (String, String, String);

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KaneyamaSection {
    #[serde(default)]
    pub g: Vec<GBlock>,
    #[serde(default)]
    pub h: Vec<HBlock>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GBlock {
    pub lift: String,
    pub charts: (String, String),
    pub entries: Vec<Triple>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HBlock {
    pub from: String,
    pub to: String,
    pub chart: String,
    pub entries: Vec<Triple>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GluingKind {
    #[default]
    Closed,
    Open,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingSection {
    #[serde(default)]
    pub kind: GluingKind,
    #[serde(default)]
    pub values: Vec<GluingEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingEntry {
    pub from: String,
    pub to: String,
    pub value: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalEntry {
    pub lower: String,
    pub upper: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KEntry {
    pub flag: Vec<String>,
    pub value: String,
}

/// A scenario resolved to indices.
#[derive(Clone, Debug)]
pub struct Built {
    pub name: String,
    pub fl: Option<PolytopeFaceLattice>,
    pub brane: Brane,
    /// `h` before the local-system twist.
    pub raw_h: KaneyamaH,
    pub local_system: BTreeMap<(usize, usize), Q>,
    pub explicit_k: bool,
    pub open: Option<OpenGluing>,
}

impl Built {
    pub fn ms(&self) -> &MultiSection {
        &self.brane.ms
    }

    /// The apex cell, for fan-mode bases.
    pub fn apex(&self) -> Option<usize> {
        let b = &self.brane.ms.base;
        (0..b.cells.len()).find(|&a| b.cells.len() > 1 && (0..b.cells.len()).all(|c| b.le(a, c)))
    }

    /// The cone-complex section over a fan-mode base: global slopes are the
    /// slopes at the apex lift.
    pub fn cone_section(&self) -> Result<ConeComplexSection> {
        let ms = self.ms();
        let apex = self.apex().ok_or_else(|| Error::Invalid("base has no apex".into()))?;
        let c = &ms.cover;
        let global = ms.base.max_cells.iter().flat_map(|&s| c.frame(s).iter().copied()).map(|a| (a, ms.m(c.lift_of(a, apex), a).clone())).collect();
        ConeComplexSection::new(ms.base.clone(), apex, c.clone(), global)
    }
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { field: field.into(), message: message.into() }
}

fn dangling(field: impl Into<String>, name: &str) -> Error {
    Error::DanglingReference { field: field.into(), name: name.to_string() }
}

fn rational(field: impl Into<String>, s: &str) -> Result<Q> {
    parse_q(s).ok_or_else(|| schema(field, format!("not a rational: {s:?}")))
}

/// Deserializes JSON, reporting the failing field path with line and column.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let path = if path == "." || path == "?" { "(root)".to_string() } else { path };
        schema(path, inner.to_string())
    })
}

/// Parses and resolves a scenario; resolution errors name the field.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sc: Scenario = from_json(text)?;
    sc.build()?;
    Ok(sc)
}

pub fn read_scenario(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| schema("(file)", format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

impl BaseSection {
    pub fn build(&self) -> Result<(BaseComplex, Option<PolytopeFaceLattice>)> {
        match self {
            BaseSection::Polytope(p) => {
                let fl = face_lattice(&p.vertices)?;
                let base = match p.mode {
                    PolytopeMode::Boundary => build_base_from_polytope(&fl)?,
                    PolytopeMode::Fan => build_fan_base(&fl)?,
                };
                Ok((base, Some(fl)))
            }
            BaseSection::Abstract(a) => {
                let idx = |field: String, n: &str| a.cells.iter().position(|c| c.name == n).ok_or_else(|| dangling(field, n));
                let mut containments = Vec::new();
                for (i, (lo, hi)) in a.containments.iter().enumerate() {
                    containments.push((idx(format!("base.abstract.containments[{i}][0]"), lo)?, idx(format!("base.abstract.containments[{i}][1]"), hi)?));
                }
                let mut proj = BTreeMap::new();
                for (i, m) in a.maps.iter().enumerate() {
                    proj.insert((idx(format!("base.abstract.maps[{i}].from"), &m.from)?, idx(format!("base.abstract.maps[{i}].to"), &m.to)?), m.matrix.clone());
                }
                let mut fan = BTreeMap::new();
                for (i, f) in a.fan.iter().enumerate() {
                    fan.insert((idx(format!("base.abstract.fan[{i}].from"), &f.from)?, idx(format!("base.abstract.fan[{i}].to"), &f.to)?), f.rays.clone());
                }
                let inp = AbstractInput {
                    cells: a.cells.iter().map(|c| Cell { name: c.name.clone(), dim: c.dim }).collect(),
                    containments,
                    qrank: a.cells.iter().map(|c| c.qrank).collect(),
                    proj,
                    fan,
                };
                Ok((build_base_abstract(inp)?, None))
            }
        }
    }
}

impl Scenario {
    pub fn build(&self) -> Result<Built> {
        if self.format_version != FORMAT_VERSION {
            return Err(schema("format_version", format!("unsupported version {}, expected {FORMAT_VERSION}", self.format_version)));
        }
        let (base, fl) = self.base.build()?;
        let cell = |field: String, n: &str| base.cell_index(n).ok_or_else(|| dangling(field, n));

        let mut lifts = Vec::new();
        for (i, l) in self.cover.lifts.iter().enumerate() {
            lifts.push(Lift { name: l.name.clone(), cell: cell(format!("cover.lifts[{i}].cell"), &l.cell)?, mult: l.mult });
        }
        for (i, (hi, lo)) in self.cover.maps.iter().enumerate() {
            for (j, n) in [hi, lo].into_iter().enumerate() {
                if !lifts.iter().any(|l| &l.name == n) {
                    return Err(dangling(format!("cover.maps[{i}][{j}]"), n));
                }
            }
        }
        let cover = CoveringData::new(&base, lifts, &self.cover.maps)?;
        let lift = |field: String, n: &str| cover.index(n).ok_or_else(|| dangling(field, n));

        let mut slopes = BTreeMap::new();
        for (i, s) in self.slopes.iter().enumerate() {
            let x = lift(format!("slopes[{i}].lift"), &s.lift)?;
            let a = lift(format!("slopes[{i}].max_lift"), &s.max_lift)?;
            if s.m.len() != base.qrank[cover.cell(x)] {
                return Err(schema(format!("slopes[{i}].m"), format!("length {}, expected {}", s.m.len(), base.qrank[cover.cell(x)])));
            }
            slopes.insert((x, a), s.m.clone());
        }
        let ms = MultiSection { base: base.clone(), cover: cover.clone(), slopes };
        ms.check_complete()?;

        let mut g = KaneyamaG::default();
        for (i, b) in self.kaneyama.g.iter().enumerate() {
            let x = lift(format!("kaneyama.g[{i}].lift"), &b.lift)?;
            let s1 = cell(format!("kaneyama.g[{i}].charts[0]"), &b.charts.0)?;
            let s2 = cell(format!("kaneyama.g[{i}].charts[1]"), &b.charts.1)?;
            g.blocks.entry((x, s1, s2)).or_default();
            for (j, (r, c, v)) in b.entries.iter().enumerate() {
                let f = format!("kaneyama.g[{i}].entries[{j}]");
                let (a, bb) = (lift(format!("{f}[0]"), r)?, lift(format!("{f}[1]"), c)?);
                if cover.cell(a) != s1 || cover.cell(bb) != s2 {
                    return Err(schema(f, "entry lifts do not lie over the block's charts"));
                }
                g.set(&ms, x, a, bb, rational(format!("{f}[2]"), v)?);
            }
        }
        g.check_index(&ms)?;

        let mut h = KaneyamaH::default();
        for (i, b) in self.kaneyama.h.iter().enumerate() {
            let t1 = cell(format!("kaneyama.h[{i}].from"), &b.from)?;
            let t2 = cell(format!("kaneyama.h[{i}].to"), &b.to)?;
            let s = cell(format!("kaneyama.h[{i}].chart"), &b.chart)?;
            h.touch(t1, t2, s);
            for (j, (r, c, v)) in b.entries.iter().enumerate() {
                let f = format!("kaneyama.h[{i}].entries[{j}]");
                let (a, bb) = (lift(format!("{f}[0]"), r)?, lift(format!("{f}[1]"), c)?);
                if cover.cell(a) != s || cover.cell(bb) != s {
                    return Err(schema(f, "entry lifts do not lie over the block's chart"));
                }
                h.set(&ms, t1, t2, a, bb, rational(format!("{f}[2]"), v)?);
            }
        }
        h.check_index(&ms)?;

        let mut values = BTreeMap::new();
        for (i, e) in self.gluing.values.iter().enumerate() {
            let a = cell(format!("gluing.values[{i}].from"), &e.from)?;
            let b = cell(format!("gluing.values[{i}].to"), &e.to)?;
            if !base.lt(a, b) {
                return Err(schema(format!("gluing.values[{i}]"), format!("{} -> {} is not a morphism", e.from, e.to)));
            }
            if e.value.len() != base.qrank[b] {
                return Err(schema(format!("gluing.values[{i}].value"), format!("length {}, expected {}", e.value.len(), base.qrank[b])));
            }
            let v: Vec<Q> = e.value.iter().enumerate().map(|(j, s)| rational(format!("gluing.values[{i}].value[{j}]"), s)).collect::<Result<_>>()?;
            if v.iter().any(|x| *x == Q::from_integer(0.into())) {
                return Err(schema(format!("gluing.values[{i}].value"), "gluing values must be nonzero"));
            }
            values.insert((a, b), v);
        }
        let (sbar, open) = match self.gluing.kind {
            GluingKind::Closed => (ClosedGluing { values }.normalized(), None),
            GluingKind::Open => {
                let o = OpenGluing { values };
                (open_to_closed(&base, &o), Some(o))
            }
        };

        let mut local_system = BTreeMap::new();
        for (i, e) in self.local_system.iter().enumerate() {
            let x = lift(format!("local_system[{i}].lower"), &e.lower)?;
            let y = lift(format!("local_system[{i}].upper"), &e.upper)?;
            if !cover.lt(&base, x, y) {
                return Err(schema(format!("local_system[{i}]"), format!("{} is not below {}", e.lower, e.upper)));
            }
            local_system.insert((x, y), rational(format!("local_system[{i}].value"), &e.value)?);
        }
        let twisted = if local_system.is_empty() { h.clone() } else { twist_by_local_system(&ms, &h, &local_system).unwrap_or_else(|_| h.clone()) };

        let k = match &self.k {
            Some(entries) => {
                let mut k = CechCochain::one(1);
                for (i, e) in entries.iter().enumerate() {
                    if e.flag.len() != 2 {
                        return Err(schema(format!("k[{i}].flag"), "k lives on pairs of lifts"));
                    }
                    let x = lift(format!("k[{i}].flag[0]"), &e.flag[0])?;
                    let y = lift(format!("k[{i}].flag[1]"), &e.flag[1])?;
                    if !cover.lt(&base, x, y) {
                        return Err(schema(format!("k[{i}].flag"), format!("{} is not below {}", e.flag[0], e.flag[1])));
                    }
                    k.set(vec![x, y], rational(format!("k[{i}].value"), &e.value)?);
                }
                k
            }
            None => solve_k(&ms, &sbar).unwrap_or_else(|_| CechCochain::one(1)),
        };
        Ok(Built {
            name: self.name.clone(),
            fl,
            raw_h: h,
            local_system,
            explicit_k: self.k.is_some(),
            open,
            brane: Brane { ms, d: BraneData { g, h: twisted, k, sbar } },
        })
    }

    /// Sorted keys, lexicographic lifts and canonical rationals.
    pub fn normalized(&self) -> Scenario {
        let canon = |s: &String| parse_q(s).map(|x| fmt_q(&x)).unwrap_or_else(|| s.clone());
        let triples = |v: &[Triple]| -> Vec<Triple> {
            let mut v: Vec<Triple> = v.iter().map(|(a, b, c)| (a.clone(), b.clone(), canon(c))).collect();
            v.sort();
            v
        };
        let mut out = self.clone();
        out.cover.lifts.sort_by(|a, b| a.name.cmp(&b.name));
        out.cover.maps.sort();
        out.cover.maps.dedup();
        out.slopes.sort_by(|a, b| (&a.lift, &a.max_lift).cmp(&(&b.lift, &b.max_lift)));
        for b in &mut out.kaneyama.g {
            b.entries = triples(&b.entries);
        }
        out.kaneyama.g.sort_by(|a, b| (&a.lift, &a.charts).cmp(&(&b.lift, &b.charts)));
        for b in &mut out.kaneyama.h {
            b.entries = triples(&b.entries);
        }
        out.kaneyama.h.sort_by(|a, b| (&a.from, &a.to, &a.chart).cmp(&(&b.from, &b.to, &b.chart)));
        for e in &mut out.gluing.values {
            e.value = e.value.iter().map(canon).collect();
        }
        out.gluing.values.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        for e in &mut out.local_system {
            e.value = canon(&e.value);
        }
        out.local_system.sort_by(|a, b| (&a.lower, &a.upper).cmp(&(&b.lower, &b.upper)));
        if let Some(k) = &mut out.k {
            for e in k.iter_mut() {
                e.value = canon(&e.value);
            }
            k.sort_by(|a, b| a.flag.cmp(&b.flag));
        }
        out
    }

    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.normalized()).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Encodes a brane over the base described by `base`. `k` is written
    /// only when `explicit_k` is set.
    pub fn from_brane(name: &str, notes: &str, base: &BaseSection, b: &Brane, explicit_k: bool) -> Scenario {
        let (ms, d) = (&b.ms, &b.d);
        let (bc, c) = (&ms.base, &ms.cover);
        let lifts = c.lifts.iter().map(|l| LiftEntry { name: l.name.clone(), cell: bc.name(l.cell).to_string(), mult: l.mult }).collect();
        let maps = c
            .pairs(bc)
            .into_iter()
            .filter(|&(x, y)| bc.cells[c.cell(y)].dim == bc.cells[c.cell(x)].dim + 1)
            .map(|(x, y)| (c.name(y).to_string(), c.name(x).to_string()))
            .collect();
        let slopes = ms.slopes.iter().map(|(&(x, a), m)| SlopeEntry { lift: c.name(x).to_string(), max_lift: c.name(a).to_string(), m: m.clone() }).collect();
        let trip = |block: &BTreeMap<(usize, usize), Q>| -> Vec<Triple> { block.iter().map(|(&(a, b), v)| (c.name(a).to_string(), c.name(b).to_string(), fmt_q(v))).collect() };
        let g = d.g.blocks.iter().map(|(&(x, s1, s2), blk)| GBlock { lift: c.name(x).to_string(), charts: (bc.name(s1).to_string(), bc.name(s2).to_string()), entries: trip(blk) }).collect();
        let h = d.h.blocks.iter().map(|(&(t1, t2, s), blk)| HBlock { from: bc.name(t1).to_string(), to: bc.name(t2).to_string(), chart: bc.name(s).to_string(), entries: trip(blk) }).collect();
        let values = d.sbar.values.iter().map(|(&(a, b), v)| GluingEntry { from: bc.name(a).to_string(), to: bc.name(b).to_string(), value: v.iter().map(fmt_q).collect() }).collect();
        let k = explicit_k.then(|| d.k.values.iter().map(|(f, v)| KEntry { flag: f.iter().map(|&x| c.name(x).to_string()).collect(), value: fmt_q(v) }).collect());
        Scenario {
            format_version: FORMAT_VERSION,
            name: name.to_string(),
            notes: notes.to_string(),
            base: base.clone(),
            cover: CoverSection { lifts, maps },
            slopes,
            kaneyama: KaneyamaSection { g, h },
            gluing: GluingSection { kind: GluingKind::Closed, values },
            local_system: Vec::new(),
            k,
        }
        .normalized()
    }
}
