//! Seeded synthetic heterogeneous graphs, including presets shaped like the
//! common HGNN benchmark datasets (DBLP, IMDB, ACM).

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Csc, HetGraph, MetapathSpec, RelationType, VertexType};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSpec {
    /// Independent inclusion probability for every (src, dst) pair.
    Density(f64),
    /// Exactly this many distinct edges, drawn uniformly.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRelation {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub edges: EdgeSpec,
    /// Also emit the transposed relation under this name.
    #[serde(default)]
    pub reverse: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub vertex_types: Vec<VertexType>,
    pub relations: Vec<SyntheticRelation>,
    /// `(name, relation names)`
    #[serde(default)]
    pub metapaths: Vec<(String, Vec<String>)>,
    /// Generate uniform `[-1, 1]` raw features for every featured type.
    #[serde(default = "default_true")]
    pub features: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetShape {
    Dblp,
    Imdb,
    Acm,
}

impl std::str::FromStr for DatasetShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dblp" => Ok(Self::Dblp),
            "imdb" => Ok(Self::Imdb),
            "acm" => Ok(Self::Acm),
            _ => Err(Error::Config(format!("unknown dataset shape `{s}`"))),
        }
    }
}

type TypeRow = (&'static str, usize, usize);
type RelRow = (&'static str, &'static str, &'static str, usize, &'static str);
type PathRow = (&'static str, &'static [&'static str]);

const DBLP_TYPES: &[TypeRow] = &[("A", 4057, 334), ("P", 14328, 4231), ("T", 7723, 50), ("V", 20, 0)];
const DBLP_RELS: &[RelRow] = &[
    ("AP", "A", "P", 19645, "PA"),
    ("VP", "V", "P", 14328, "PV"),
    ("TP", "T", "P", 85810, "PT"),
];
const DBLP_PATHS: &[PathRow] = &[
    ("APA", &["AP", "PA"]),
    ("APTPA", &["AP", "PT", "TP", "PA"]),
    ("APVPA", &["AP", "PV", "VP", "PA"]),
];

const IMDB_TYPES: &[TypeRow] = &[("M", 4932, 3489), ("D", 2393, 3341), ("A", 6124, 3341), ("K", 7971, 0)];
const IMDB_RELS: &[RelRow] = &[
    ("AM", "A", "M", 14779, "MA"),
    ("KM", "K", "M", 23610, "MK"),
    ("DM", "D", "M", 4932, "MD"),
];
const IMDB_PATHS: &[PathRow] = &[
    ("MDM", &["MD", "DM"]),
    ("MAM", &["MA", "AM"]),
    ("MKM", &["MK", "KM"]),
];

const ACM_TYPES: &[TypeRow] = &[("P", 3025, 1902), ("A", 5959, 1902), ("S", 56, 1902), ("T", 1902, 0)];
const ACM_RELS: &[RelRow] = &[
    ("TP", "T", "P", 255619, "PT"),
    ("SP", "S", "P", 3025, "PS"),
    ("PP", "P", "P", 5343, "rPP"),
    ("AP", "A", "P", 9949, "PA"),
];
const ACM_PATHS: &[PathRow] = &[
    ("PPSP", &["PP", "PS", "SP"]),
    ("PSP", &["PS", "SP"]),
    ("PPAP", &["PP", "PA", "AP"]),
    ("PAP", &["PA", "AP"]),
];

fn scaled(x: usize, scale: f64) -> usize {
    ((x as f64 * scale).round() as usize).max(1)
}

impl DatasetShape {
    fn tables(self) -> (&'static [TypeRow], &'static [RelRow], &'static [PathRow]) {
        match self {
            Self::Dblp => (DBLP_TYPES, DBLP_RELS, DBLP_PATHS),
            Self::Imdb => (IMDB_TYPES, IMDB_RELS, IMDB_PATHS),
            Self::Acm => (ACM_TYPES, ACM_RELS, ACM_PATHS),
        }
    }

    /// Vertex and edge counts multiplied by `scale`; feature widths by
    /// `feature_scale`. `(1.0, 1.0)` reproduces the dataset's published shape.
    pub fn spec(self, scale: f64, feature_scale: f64, seed: u64) -> SyntheticSpec {
        let (types, rels, paths) = self.tables();
        let vertex_types: Vec<VertexType> = types
            .iter()
            .map(|&(name, count, dim)| VertexType {
                name: name.into(),
                count: scaled(count, scale),
                feature_dim: if dim == 0 { 0 } else { scaled(dim, feature_scale) },
            })
            .collect();
        let count = |n: &str| vertex_types.iter().find(|t| t.name == n).map_or(0, |t| t.count);
        // Edges shrink linearly but pairs quadratically; small scales saturate.
        let relations = rels
            .iter()
            .map(|&(name, src, dst, edges, rev)| SyntheticRelation {
                name: name.into(),
                src: src.into(),
                dst: dst.into(),
                edges: EdgeSpec::Count(scaled(edges, scale).min(count(src) * count(dst))),
                reverse: Some(rev.into()),
            })
            .collect();
        let metapaths = paths
            .iter()
            .map(|&(n, chain)| (n.to_string(), chain.iter().map(|s| s.to_string()).collect()))
            .collect();
        SyntheticSpec {
            seed,
            vertex_types,
            relations,
            metapaths,
            features: true,
        }
    }
}

impl SyntheticSpec {
    /// A small random heterogeneous graph: 3-4 types, a few relations with
    /// reverses, and 2-3 metapaths. Edge counts stay below `max_edges` per
    /// relation.
    pub fn random_small(seed: u64, max_edges: usize) -> Self {
        let mut r = rng::stream(seed, "random_small");
        let n_types = r.random_range(3..=4usize);
        let names = ["A", "B", "C", "D"];
        let vertex_types: Vec<VertexType> = (0..n_types)
            .map(|i| VertexType {
                name: names[i].into(),
                count: r.random_range(8..=60),
                feature_dim: r.random_range(3..=12),
            })
            .collect();
        // A spanning chain A-B, B-C, (C-D) plus one extra relation.
        let mut pairs: Vec<(usize, usize)> = (1..n_types).map(|i| (i - 1, i)).collect();
        pairs.push((0, n_types - 1));
        let relations = pairs
            .iter()
            .map(|&(s, d)| {
                let cap = (vertex_types[s].count * vertex_types[d].count).min(max_edges);
                let lo = vertex_types[s].count.max(vertex_types[d].count).min(cap);
                SyntheticRelation {
                    name: format!("{}{}", names[s], names[d]),
                    src: names[s].into(),
                    dst: names[d].into(),
                    edges: EdgeSpec::Count(r.random_range(lo..=cap)),
                    reverse: Some(format!("{}{}", names[d], names[s])),
                }
            })
            .collect();
        let mut metapaths = vec![
            ("ABA".to_string(), vec!["AB".to_string(), "BA".to_string()]),
            (
                "ABCBA".to_string(),
                vec!["AB".into(), "BC".into(), "CB".into(), "BA".into()],
            ),
        ];
        let last = names[n_types - 1];
        metapaths.push((
            format!("A{last}A"),
            vec![format!("A{last}"), format!("{last}A")],
        ));
        SyntheticSpec {
            seed,
            vertex_types,
            relations,
            metapaths,
            features: true,
        }
    }
}

impl SyntheticSpec {
    /// `graphs` relations over `types` equally sized featured types, each
    /// joining a distinct random ordered pair with `edges` edges. Useful for
    /// sweeping the number of semantic graphs at fixed graph size.
    pub fn relation_family(
        seed: u64,
        types: usize,
        graphs: usize,
        vertices: usize,
        edges: usize,
        feature_dim: usize,
    ) -> Result<Self> {
        if types < 2 || graphs > types * (types - 1) {
            return Err(Error::InvalidSynthetic(format!(
                "{graphs} relations need distinct ordered pairs of {types} types"
            )));
        }
        let mut r = rng::stream(seed, "relation_family");
        let name = |i: usize| format!("T{i}");
        let vertex_types = (0..types)
            .map(|i| VertexType { name: name(i), count: vertices, feature_dim })
            .collect();
        let mut pairs: Vec<(usize, usize)> = (0..types)
            .flat_map(|s| (0..types).filter(move |&d| d != s).map(move |d| (s, d)))
            .collect();
        rand::seq::SliceRandom::shuffle(pairs.as_mut_slice(), &mut r);
        let relations = pairs[..graphs]
            .iter()
            .map(|&(s, d)| SyntheticRelation {
                name: format!("{}-{}", name(s), name(d)),
                src: name(s),
                dst: name(d),
                edges: EdgeSpec::Count(edges.min(vertices * vertices)),
                reverse: None,
            })
            .collect();
        Ok(SyntheticSpec { seed, vertex_types, relations, metapaths: Vec::new(), features: true })
    }
}

fn sample_edges(n_src: usize, n_dst: usize, spec: EdgeSpec, r: &mut impl Rng) -> Result<Vec<(u32, u32)>> {
    let total = n_src * n_dst;
    match spec {
        EdgeSpec::Density(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidSynthetic(format!("density {p} outside (0, 1]")));
            }
            let mut out = Vec::new();
            for v in 0..n_dst {
                for u in 0..n_src {
                    if p >= 1.0 || r.random::<f64>() < p {
                        out.push((u as u32, v as u32));
                    }
                }
            }
            Ok(out)
        }
        EdgeSpec::Count(k) => {
            if k > total {
                return Err(Error::InvalidSynthetic(format!(
                    "{k} edges requested but only {total} pairs exist"
                )));
            }
            // Sample whichever side of the complement is smaller.
            let pick = k.min(total - k);
            let mut chosen: HashSet<u64> = HashSet::with_capacity(pick);
            let mut order = Vec::with_capacity(pick);
            while chosen.len() < pick {
                let id = r.random_range(0..total as u64);
                if chosen.insert(id) {
                    order.push(id);
                }
            }
            let ids: Vec<u64> = if pick == k {
                order
            } else {
                (0..total as u64).filter(|id| !chosen.contains(id)).collect()
            };
            Ok(ids
                .into_iter()
                .map(|id| ((id % n_src as u64) as u32, (id / n_src as u64) as u32))
                .collect())
        }
    }
}

/// Deterministic for a given spec (including its seed).
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<HetGraph> {
    let types = spec.vertex_types.clone();
    let type_of = |name: &str| {
        types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    };
    let mut relations = Vec::new();
    let mut adjacency = Vec::new();
    for rel in &spec.relations {
        let (s, d) = (type_of(&rel.src)?, type_of(&rel.dst)?);
        let mut r = rng::stream(spec.seed, &format!("edges/{}", rel.name));
        let edges = sample_edges(types[s].count, types[d].count, rel.edges, &mut r)?;
        let csc = Csc::from_edges(types[s].count, types[d].count, &edges)?;
        relations.push(RelationType {
            name: rel.name.clone(),
            src: s,
            dst: d,
        });
        if let Some(rev) = &rel.reverse {
            let t = csc.transpose();
            adjacency.push(csc);
            relations.push(RelationType {
                name: rev.clone(),
                src: d,
                dst: s,
            });
            adjacency.push(t);
        } else {
            adjacency.push(csc);
        }
    }
    let features = types
        .iter()
        .map(|t| {
            if !spec.features || t.feature_dim == 0 {
                return Ok(None);
            }
            let mut r = rng::stream(spec.seed, &format!("features/{}", t.name));
            let data = (0..t.count * t.feature_dim)
                .map(|_| r.random_range(-1.0..=1.0))
                .collect();
            FeatureMatrix::from_vec(t.count, t.feature_dim, data).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let metapaths = spec
        .metapaths
        .iter()
        .map(|(name, chain)| {
            let relations = chain
                .iter()
                .map(|r| {
                    relations
                        .iter()
                        .position(|x: &RelationType| &x.name == r)
                        .ok_or_else(|| Error::UnknownRelation(r.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MetapathSpec {
                name: name.clone(),
                relations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HetGraph::new(types, relations, adjacency, features, metapaths)
}
