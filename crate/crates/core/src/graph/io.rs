//! Line-oriented text format.
//!
//! ```text
//! vtypes
//! author 2 3
//! paper 1 0
//! relations
//! AP author paper
//! PA paper author
//! edges AP
//! 0 0
//! 1 0
//! edges PA
//! 0 0
//! 0 1
//! features author
//! 0.1 0.2 0.3
//! 0.4 0.5 0.6
//! metapaths
//! APA AP PA
//! ```
//!
//! Blank lines and `#` comments are ignored. All indices are 0-based.
//! [`write_hetgraph`] is canonical: blocks in declaration order, edges in
//! column order, floats in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Csc, HetGraph, MetapathSpec, RelationType, VertexType};
use crate::error::{Error, Result};
use crate::tensor::FeatureMatrix;

pub fn load_hetgraph(path: impl AsRef<Path>) -> Result<HetGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_hetgraph(&text)
}

enum Block {
    None,
    VTypes,
    Relations,
    Edges(usize),
    Features(usize),
    Metapaths,
}

fn parse_usize(tok: &str, line: usize, field: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("{field}: expected integer, got `{tok}`")))
}

pub fn parse_hetgraph(text: &str) -> Result<HetGraph> {
    let mut vtypes: Vec<VertexType> = Vec::new();
    let mut relations: Vec<RelationType> = Vec::new();
    let mut edges: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut features: Vec<Option<Vec<f64>>> = Vec::new();
    let mut feature_rows: Vec<usize> = Vec::new();
    let mut metapaths: Vec<(String, Vec<String>, usize)> = Vec::new();
    let mut block = Block::None;

    let type_of = |vtypes: &[VertexType], name: &str| {
        vtypes
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "vtypes" => {
                if !relations.is_empty() || !vtypes.is_empty() {
                    return Err(Error::parse(line, "vtypes block must come first and once"));
                }
                block = Block::VTypes;
                continue;
            }
            "relations" => {
                block = Block::Relations;
                continue;
            }
            "metapaths" => {
                block = Block::Metapaths;
                continue;
            }
            "edges" => {
                let name = toks
                    .get(1)
                    .ok_or_else(|| Error::parse(line, "edges: missing relation name"))?;
                let r = relations
                    .iter()
                    .position(|r| r.name == *name)
                    .ok_or_else(|| Error::UnknownRelation(name.to_string()))?;
                block = Block::Edges(r);
                continue;
            }
            "features" => {
                let name = toks
                    .get(1)
                    .ok_or_else(|| Error::parse(line, "features: missing type name"))?;
                let t = type_of(&vtypes, name)?;
                if vtypes[t].feature_dim == 0 {
                    return Err(Error::parse(
                        line,
                        format!("features given for `{name}` whose feature_dim is 0"),
                    ));
                }
                if features[t].is_some() {
                    return Err(Error::parse(line, format!("duplicate features for `{name}`")));
                }
                features[t] = Some(Vec::with_capacity(vtypes[t].count * vtypes[t].feature_dim));
                block = Block::Features(t);
                continue;
            }
            _ => {}
        }
        match block {
            Block::None => {
                return Err(Error::parse(line, format!("data outside a block: `{content}`")))
            }
            Block::VTypes => {
                if toks.len() != 3 {
                    return Err(Error::parse(line, "vtypes: expected `name count feature_dim`"));
                }
                vtypes.push(VertexType {
                    name: toks[0].to_string(),
                    count: parse_usize(toks[1], line, "count")?,
                    feature_dim: parse_usize(toks[2], line, "feature_dim")?,
                });
                features.push(None);
                feature_rows.push(0);
            }
            Block::Relations => {
                if toks.len() != 3 {
                    return Err(Error::parse(line, "relations: expected `name src dst`"));
                }
                let src = type_of(&vtypes, toks[1])?;
                let dst = type_of(&vtypes, toks[2])?;
                relations.push(RelationType {
                    name: toks[0].to_string(),
                    src,
                    dst,
                });
                edges.push(Vec::new());
            }
            Block::Edges(r) => {
                if toks.len() != 2 {
                    return Err(Error::parse(line, "edges: expected `src_idx dst_idx`"));
                }
                let u = parse_usize(toks[0], line, "src_idx")?;
                let v = parse_usize(toks[1], line, "dst_idx")?;
                let rel = &relations[r];
                for (idx, t, role) in [(u, rel.src, "source"), (v, rel.dst, "target")] {
                    if idx >= vtypes[t].count {
                        return Err(Error::IndexOutOfRange {
                            what: format!("line {line}: {role} of {}", rel.name),
                            index: idx,
                            bound: vtypes[t].count,
                        });
                    }
                }
                edges[r].push((u as u32, v as u32));
            }
            Block::Features(t) => {
                if toks.len() != vtypes[t].feature_dim {
                    return Err(Error::parse(
                        line,
                        format!(
                            "features {}: expected {} values, got {}",
                            vtypes[t].name,
                            vtypes[t].feature_dim,
                            toks.len()
                        ),
                    ));
                }
                if feature_rows[t] == vtypes[t].count {
                    return Err(Error::parse(
                        line,
                        format!("features {}: more rows than vertices", vtypes[t].name),
                    ));
                }
                let buf = features[t].as_mut().expect("block opened");
                for tok in toks {
                    let v: f64 = tok.parse().map_err(|_| {
                        Error::parse(line, format!("feature value: expected number, got `{tok}`"))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::parse(line, "feature value must be finite"));
                    }
                    buf.push(v);
                }
                feature_rows[t] += 1;
            }
            Block::Metapaths => {
                if toks.len() < 2 {
                    return Err(Error::parse(line, "metapaths: expected `name rel1 rel2 ...`"));
                }
                metapaths.push((
                    toks[0].to_string(),
                    toks[1..].iter().map(|s| s.to_string()).collect(),
                    line,
                ));
            }
        }
    }

    let adjacency = relations
        .iter()
        .zip(&edges)
        .map(|(r, e)| Csc::from_edges(vtypes[r.src].count, vtypes[r.dst].count, e))
        .collect::<Result<Vec<_>>>()?;
    let mut feats = Vec::with_capacity(vtypes.len());
    for (t, f) in features.into_iter().enumerate() {
        feats.push(match f {
            None => None,
            Some(data) => {
                if feature_rows[t] != vtypes[t].count {
                    return Err(Error::parse(
                        0,
                        format!(
                            "features {}: {} rows for {} vertices",
                            vtypes[t].name, feature_rows[t], vtypes[t].count
                        ),
                    ));
                }
                Some(FeatureMatrix::from_vec(vtypes[t].count, vtypes[t].feature_dim, data)?)
            }
        });
    }
    let mut specs = Vec::with_capacity(metapaths.len());
    for (name, rels, _line) in metapaths {
        let relations = rels
            .iter()
            .map(|r| {
                relations
                    .iter()
                    .position(|x| &x.name == r)
                    .ok_or_else(|| Error::UnknownRelation(r.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        specs.push(MetapathSpec { name, relations });
    }
    HetGraph::new(vtypes, relations, adjacency, feats, specs)
}

/// Canonical serialization.
pub fn write_hetgraph<W: Write>(g: &HetGraph, mut out: W) -> Result<()> {
    let mut buf = String::new();
    buf.push_str("vtypes\n");
    for t in g.vertex_types() {
        writeln!(buf, "{} {} {}", t.name, t.count, t.feature_dim).unwrap();
    }
    buf.push_str("relations\n");
    for r in g.relations() {
        writeln!(
            buf,
            "{} {} {}",
            r.name,
            g.vertex_type(r.src).name,
            g.vertex_type(r.dst).name
        )
        .unwrap();
    }
    out.write_all(buf.as_bytes())?;
    for (ri, r) in g.relations().iter().enumerate() {
        buf.clear();
        writeln!(buf, "edges {}", r.name).unwrap();
        for (u, v) in g.adjacency(ri).edges() {
            writeln!(buf, "{u} {v}").unwrap();
        }
        out.write_all(buf.as_bytes())?;
    }
    for (ti, t) in g.vertex_types().iter().enumerate() {
        if let Some(f) = g.features(ti) {
            buf.clear();
            writeln!(buf, "features {}", t.name).unwrap();
            for row in 0..f.rows() {
                write_row(&mut buf, f.row(row));
            }
            out.write_all(buf.as_bytes())?;
        }
    }
    if !g.metapaths().is_empty() {
        buf.clear();
        buf.push_str("metapaths\n");
        for m in g.metapaths() {
            buf.push_str(&m.name);
            for &r in &m.relations {
                buf.push(' ');
                buf.push_str(&g.relation(r).name);
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn write_row(buf: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            buf.push(' ');
        }
        write!(buf, "{v}").unwrap();
    }
    buf.push('\n');
}
