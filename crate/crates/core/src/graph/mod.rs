//! Heterogeneous graph model, text ingestion, synthetic generation and the
//! semantic-graph build (relations and metapaths).

mod csc;
pub(crate) mod io;
mod semantic;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use csc::Csc;
pub use io::{load_hetgraph, parse_hetgraph, write_hetgraph};
pub use semantic::{build_metapath_graph, build_relation_graph, SemanticGraph, SemanticSource};
pub use synth::{gen_synthetic, DatasetShape, EdgeSpec, SyntheticRelation, SyntheticSpec};

use crate::error::{Error, Result};
use crate::tensor::FeatureMatrix;

/// Index of a vertex type inside its [`HetGraph`].
pub type TypeId = usize;
/// Index of a relation inside its [`HetGraph`].
pub type RelationId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexType {
    pub name: String,
    pub count: usize,
    /// Raw feature width; 0 when the dataset provides none.
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationType {
    pub name: String,
    pub src: TypeId,
    pub dst: TypeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetapathSpec {
    pub name: String,
    pub relations: Vec<RelationId>,
}

/// Typed vertices, per-relation CSC adjacency and per-type raw features.
///
/// Vertices are indexed per type, 0-based, in file order. Immutable once
/// built.
#[derive(Debug, Clone, PartialEq)]
pub struct HetGraph {
    vertex_types: Vec<VertexType>,
    relations: Vec<RelationType>,
    adjacency: Vec<Csc>,
    features: Vec<Option<FeatureMatrix>>,
    metapaths: Vec<MetapathSpec>,
}

fn is_reserved(name: &str) -> bool {
    matches!(
        name,
        "vtypes" | "relations" | "edges" | "features" | "metapaths"
    )
}

impl HetGraph {
    pub fn new(
        vertex_types: Vec<VertexType>,
        relations: Vec<RelationType>,
        adjacency: Vec<Csc>,
        features: Vec<Option<FeatureMatrix>>,
        metapaths: Vec<MetapathSpec>,
    ) -> Result<Self> {
        if vertex_types.len() + relations.len() <= 2 {
            return Err(Error::NotHeterogeneous {
                types: vertex_types.len(),
                relations: relations.len(),
            });
        }
        let mut seen = HashSet::new();
        for t in &vertex_types {
            if t.name.is_empty() || is_reserved(&t.name) || !seen.insert(t.name.as_str()) {
                return Err(Error::DuplicateName(t.name.clone()));
            }
            if t.count == 0 {
                return Err(Error::Empty("vertex type with zero vertices"));
            }
        }
        let mut seen = HashSet::new();
        for r in &relations {
            if r.name.is_empty() || is_reserved(&r.name) || !seen.insert(r.name.as_str()) {
                return Err(Error::DuplicateName(r.name.clone()));
            }
            for t in [r.src, r.dst] {
                if t >= vertex_types.len() {
                    return Err(Error::IndexOutOfRange {
                        what: format!("type of relation {}", r.name),
                        index: t,
                        bound: vertex_types.len(),
                    });
                }
            }
        }
        if adjacency.len() != relations.len() {
            return Err(Error::shape("HetGraph::new", "one adjacency per relation"));
        }
        for (r, a) in relations.iter().zip(&adjacency) {
            let (ns, nd) = (vertex_types[r.src].count, vertex_types[r.dst].count);
            if a.n_src() != ns || a.n_dst() != nd {
                return Err(Error::shape(
                    "HetGraph::new",
                    format!(
                        "relation {} is {}x{}, types are {ns}x{nd}",
                        r.name,
                        a.n_src(),
                        a.n_dst()
                    ),
                ));
            }
        }
        if features.len() != vertex_types.len() {
            return Err(Error::shape("HetGraph::new", "one feature slot per type"));
        }
        for (t, f) in vertex_types.iter().zip(&features) {
            if let Some(f) = f {
                if t.feature_dim == 0 || f.rows() != t.count || f.cols() != t.feature_dim {
                    return Err(Error::shape(
                        "HetGraph::new",
                        format!("features of {} are {}x{}", t.name, f.rows(), f.cols()),
                    ));
                }
            }
        }
        let mut seen = HashSet::new();
        for m in &metapaths {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::DuplicateName(m.name.clone()));
            }
            check_chain(&relations, m)?;
        }
        Ok(Self {
            vertex_types,
            relations,
            adjacency,
            features,
            metapaths,
        })
    }

    pub fn vertex_types(&self) -> &[VertexType] {
        &self.vertex_types
    }

    pub fn relations(&self) -> &[RelationType] {
        &self.relations
    }

    pub fn metapaths(&self) -> &[MetapathSpec] {
        &self.metapaths
    }

    pub fn adjacency(&self, r: RelationId) -> &Csc {
        &self.adjacency[r]
    }

    pub fn vertex_type(&self, t: TypeId) -> &VertexType {
        &self.vertex_types[t]
    }

    pub fn relation(&self, r: RelationId) -> &RelationType {
        &self.relations[r]
    }

    pub fn features(&self, t: TypeId) -> Option<&FeatureMatrix> {
        self.features[t].as_ref()
    }

    pub fn type_id(&self, name: &str) -> Result<TypeId> {
        self.vertex_types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId> {
        self.relations
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn metapath(&self, name: &str) -> Option<&MetapathSpec> {
        self.metapaths.iter().find(|m| m.name == name)
    }

    /// Realized edge count per relation, in declaration order.
    pub fn edge_counts(&self) -> Vec<(String, usize)> {
        self.relations
            .iter()
            .zip(&self.adjacency)
            .map(|(r, a)| (r.name.clone(), a.nnz()))
            .collect()
    }

    pub fn total_vertices(&self) -> usize {
        self.vertex_types.iter().map(|t| t.count).sum()
    }

    /// Semantic graph for the named relation or metapath (relations first).
    pub fn semantic_graph(&self, name: &str) -> Result<SemanticGraph> {
        if let Ok(r) = self.relation_id(name) {
            return build_relation_graph(self, r);
        }
        match self.metapath(name) {
            Some(m) => build_metapath_graph(self, m),
            None => Err(Error::UnknownRelation(name.to_string())),
        }
    }

    /// Relations whose endpoint types both carry raw features. These are the
    /// semantic graphs that relation-based models can run on.
    pub fn featured_relations(&self) -> Vec<RelationId> {
        (0..self.relations.len())
            .filter(|&r| {
                let rel = &self.relations[r];
                self.vertex_types[rel.src].feature_dim > 0
                    && self.vertex_types[rel.dst].feature_dim > 0
            })
            .collect()
    }
}

pub(crate) fn check_chain(relations: &[RelationType], m: &MetapathSpec) -> Result<()> {
    if m.relations.is_empty() {
        return Err(Error::IncompatibleChain {
            name: m.name.clone(),
            step: 0,
        });
    }
    for (step, &r) in m.relations.iter().enumerate() {
        if r >= relations.len() {
            return Err(Error::IndexOutOfRange {
                what: format!("relation in metapath {}", m.name),
                index: r,
                bound: relations.len(),
            });
        }
        if step > 0 && relations[m.relations[step - 1]].dst != relations[r].src {
            return Err(Error::IncompatibleChain {
                name: m.name.clone(),
                step,
            });
        }
    }
    Ok(())
}
