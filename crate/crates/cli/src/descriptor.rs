//! The descriptor file written by `glue` and `restrict` and read by
//! `extract`: frames, weights and every monomial matrix, with sparse entries
//! `(row, col, rational, exponent)` and all cells and lifts named.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tropsheaf::base::ClosedGluing;
use tropsheaf::glue::SheafDescriptor;
use tropsheaf::lattice::IVec;
use tropsheaf::monomial::{Entry, MonomialMatrix};
use tropsheaf::mult::{fmt_q, parse_q};
use tropsheaf::{Error, Result};

use crate::scenario::{BaseSection, GluingEntry};

pub const DESCRIPTOR_FORMAT: &str = "tropsheaf-descriptor";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorFile {
    pub format: String,
    pub format_version: u32,
    pub name: String,
    pub base: BaseSection,
    pub rank: usize,
    pub frames: BTreeMap<String, Vec<String>>,
    pub weights: Vec<WeightEntry>,
    pub g: Vec<CellMatrix>,
    pub h: Vec<MorphismMatrix>,
    pub frame_changes: Vec<CellMatrix>,
    pub transitions: Vec<TransitionMatrix>,
    pub gluing: Vec<GluingEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub cell: String,
    pub lift: String,
    pub m: IVec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub rank: usize,
    pub chart: Vec<IVec>,
    pub entries: Vec<(String, String, String, IVec)>,
}

/// `G` keyed by `(cell, charts)`, or a frame change keyed by `(cell, chart)`
/// with both charts equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellMatrix {
    pub cell: String,
    pub charts: (String, String),
    pub matrix: MatrixFile,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismMatrix {
    pub from: String,
    pub to: String,
    pub chart: String,
    pub matrix: MatrixFile,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionMatrix {
    pub charts: (String, String),
    pub vertex: String,
    pub matrix: MatrixFile,
}

fn encode_matrix(m: &MonomialMatrix) -> MatrixFile {
    MatrixFile {
        rows: m.rows.clone(),
        cols: m.cols.clone(),
        rank: m.rank,
        chart: m.chart.clone(),
        entries: m.entries.iter().map(|(&(i, j), e)| (m.rows[i].clone(), m.cols[j].clone(), fmt_q(&e.coef), e.exp.clone())).collect(),
    }
}

fn decode_matrix(field: &str, f: &MatrixFile) -> Result<MonomialMatrix> {
    let schema = |message: String| Error::Schema { field: field.to_string(), message };
    let mut m = MonomialMatrix::zero(f.rows.clone(), f.cols.clone(), f.rank).with_chart(f.chart.clone());
    for (r, c, v, e) in &f.entries {
        let i = f.rows.iter().position(|x| x == r).ok_or_else(|| Error::DanglingReference { field: format!("{field}.entries"), name: r.clone() })?;
        let j = f.cols.iter().position(|x| x == c).ok_or_else(|| Error::DanglingReference { field: format!("{field}.entries"), name: c.clone() })?;
        let coef = parse_q(v).ok_or_else(|| schema(format!("not a rational: {v:?}")))?;
        if e.len() != f.rank {
            return Err(schema(format!("exponent of length {}, expected {}", e.len(), f.rank)));
        }
        m.entries.insert((i, j), Entry { coef, exp: e.clone() });
    }
    Ok(m)
}

pub fn encode_descriptor(name: &str, base: &BaseSection, sd: &SheafDescriptor) -> DescriptorFile {
    let b = &sd.base;
    let n = |t: usize| b.name(t).to_string();
    DescriptorFile {
        format: DESCRIPTOR_FORMAT.into(),
        format_version: crate::scenario::FORMAT_VERSION,
        name: name.into(),
        base: base.clone(),
        rank: sd.rank,
        frames: sd.frames.iter().map(|(&s, f)| (n(s), f.clone())).collect(),
        weights: sd.weights.iter().map(|((t, a), m)| WeightEntry { cell: n(*t), lift: a.clone(), m: m.clone() }).collect(),
        g: sd.g.iter().map(|(&(t, s1, s2), m)| CellMatrix { cell: n(t), charts: (n(s1), n(s2)), matrix: encode_matrix(m) }).collect(),
        h: sd.h.iter().map(|(&(t1, t2, s), m)| MorphismMatrix { from: n(t1), to: n(t2), chart: n(s), matrix: encode_matrix(m) }).collect(),
        frame_changes: sd.tilde.iter().map(|(&(t, s), m)| CellMatrix { cell: n(t), charts: (n(s), n(s)), matrix: encode_matrix(m) }).collect(),
        transitions: sd.transitions.iter().map(|(&(s1, s2, v), m)| TransitionMatrix { charts: (n(s1), n(s2)), vertex: n(v), matrix: encode_matrix(m) }).collect(),
        gluing: sd.sbar.values.iter().map(|(&(a, c), v)| GluingEntry { from: n(a), to: n(c), value: v.iter().map(fmt_q).collect() }).collect(),
    }
}

pub fn decode_descriptor(f: &DescriptorFile) -> Result<SheafDescriptor> {
    if f.format != DESCRIPTOR_FORMAT {
        return Err(Error::Schema { field: "format".into(), message: format!("expected {DESCRIPTOR_FORMAT:?}") });
    }
    if f.format_version != crate::scenario::FORMAT_VERSION {
        return Err(Error::Schema { field: "format_version".into(), message: format!("unsupported version {}", f.format_version) });
    }
    let (base, _) = f.base.build()?;
    let cell = |field: String, n: &str| base.cell_index(n).ok_or(Error::DanglingReference { field, name: n.to_string() });
    let mut frames = BTreeMap::new();
    for (s, names) in &f.frames {
        frames.insert(cell("frames".into(), s)?, names.clone());
    }
    let mut weights = BTreeMap::new();
    for (i, w) in f.weights.iter().enumerate() {
        weights.insert((cell(format!("weights[{i}].cell"), &w.cell)?, w.lift.clone()), w.m.clone());
    }
    let mut g = BTreeMap::new();
    for (i, e) in f.g.iter().enumerate() {
        let key = (cell(format!("g[{i}].cell"), &e.cell)?, cell(format!("g[{i}].charts[0]"), &e.charts.0)?, cell(format!("g[{i}].charts[1]"), &e.charts.1)?);
        g.insert(key, decode_matrix(&format!("g[{i}].matrix"), &e.matrix)?);
    }
    let mut h = BTreeMap::new();
    for (i, e) in f.h.iter().enumerate() {
        let key = (cell(format!("h[{i}].from"), &e.from)?, cell(format!("h[{i}].to"), &e.to)?, cell(format!("h[{i}].chart"), &e.chart)?);
        h.insert(key, decode_matrix(&format!("h[{i}].matrix"), &e.matrix)?);
    }
    let mut tilde = BTreeMap::new();
    for (i, e) in f.frame_changes.iter().enumerate() {
        let key = (cell(format!("frame_changes[{i}].cell"), &e.cell)?, cell(format!("frame_changes[{i}].charts[0]"), &e.charts.0)?);
        tilde.insert(key, decode_matrix(&format!("frame_changes[{i}].matrix"), &e.matrix)?);
    }
    let mut transitions = BTreeMap::new();
    for (i, e) in f.transitions.iter().enumerate() {
        let key = (cell(format!("transitions[{i}].charts[0]"), &e.charts.0)?, cell(format!("transitions[{i}].charts[1]"), &e.charts.1)?, cell(format!("transitions[{i}].vertex"), &e.vertex)?);
        transitions.insert(key, decode_matrix(&format!("transitions[{i}].matrix"), &e.matrix)?);
    }
    let mut values = BTreeMap::new();
    for (i, e) in f.gluing.iter().enumerate() {
        let key = (cell(format!("gluing[{i}].from"), &e.from)?, cell(format!("gluing[{i}].to"), &e.to)?);
        let v = e.value.iter().map(|s| parse_q(s).ok_or_else(|| Error::Schema { field: format!("gluing[{i}].value"), message: format!("not a rational: {s:?}") })).collect::<Result<Vec<_>>>()?;
        values.insert(key, v);
    }
    Ok(SheafDescriptor { base, rank: f.rank, frames, weights, g, h, tilde, transitions, sbar: ClosedGluing { values } })
}

pub fn descriptor_to_string(f: &DescriptorFile) -> String {
    let mut s = serde_json::to_string_pretty(f).expect("descriptor serializes");
    s.push('\n');
    s
}
