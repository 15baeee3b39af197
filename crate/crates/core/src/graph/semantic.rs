use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{check_chain, Csc, HetGraph, MetapathSpec, RelationId, TypeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SemanticSource {
    Relation(RelationId),
    Metapath(Vec<RelationId>),
}

/// The graph induced by one relation or metapath.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    pub id: String,
    pub source: SemanticSource,
    pub src_type: TypeId,
    pub dst_type: TypeId,
    pub edges: Csc,
    /// Targets with in-degree >= 1, ascending.
    pub targets: Vec<u32>,
    /// Endpoint types whose projected features this graph consumes.
    pub types_touched: BTreeSet<TypeId>,
}

impl SemanticGraph {
    fn new(id: String, source: SemanticSource, src_type: TypeId, dst_type: TypeId, edges: Csc) -> Self {
        let targets = edges.targets();
        let types_touched = [src_type, dst_type].into_iter().collect();
        Self {
            id,
            source,
            src_type,
            dst_type,
            edges,
            targets,
            types_touched,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.nnz()
    }

    /// Relation whose per-relation parameters apply, for relation graphs.
    pub fn relation(&self) -> Option<RelationId> {
        match self.source {
            SemanticSource::Relation(r) => Some(r),
            SemanticSource::Metapath(_) => None,
        }
    }
}

pub fn build_relation_graph(g: &HetGraph, r: RelationId) -> Result<SemanticGraph> {
    if r >= g.relations().len() {
        return Err(Error::UnknownRelation(format!("#{r}")));
    }
    let rel = g.relation(r);
    Ok(SemanticGraph::new(
        rel.name.clone(),
        SemanticSource::Relation(r),
        rel.src,
        rel.dst,
        g.adjacency(r).clone(),
    ))
}

/// Boolean composition of the chain's adjacency matrices. Parallel path
/// instances collapse to one edge; self-edges from composition are kept.
pub fn build_metapath_graph(g: &HetGraph, m: &MetapathSpec) -> Result<SemanticGraph> {
    check_chain(g.relations(), m)?;
    let mut acc = g.adjacency(m.relations[0]).clone();
    for &r in &m.relations[1..] {
        acc = acc.compose(g.adjacency(r))?;
    }
    let src = g.relation(m.relations[0]).src;
    let dst = g.relation(*m.relations.last().expect("non-empty chain")).dst;
    Ok(SemanticGraph::new(
        m.name.clone(),
        SemanticSource::Metapath(m.relations.clone()),
        src,
        dst,
        acc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_hetgraph, MetapathSpec};

    const TOY: &str = "vtypes\nA 2 2\nP 1 2\nrelations\nAP A P\nPA P A\nedges AP\n0 0\n1 0\nedges PA\n0 0\n0 1\n";

    #[test]
    fn relation_graph_copies_adjacency() {
        let g = parse_hetgraph(TOY).unwrap();
        let sg = build_relation_graph(&g, 0).unwrap();
        assert_eq!(sg.num_edges(), 2);
        assert_eq!(sg.targets, vec![0]);
        assert_eq!(&sg.edges, g.adjacency(0));
    }

    #[test]
    fn unknown_relation_rejected() {
        let g = parse_hetgraph(TOY).unwrap();
        assert!(matches!(
            build_relation_graph(&g, 9),
            Err(Error::UnknownRelation(_))
        ));
    }

    #[test]
    fn apa_is_complete_with_self_edges() {
        let g = parse_hetgraph(TOY).unwrap();
        let m = MetapathSpec {
            name: "APA".into(),
            relations: vec![0, 1],
        };
        let sg = build_metapath_graph(&g, &m).unwrap();
        let mut e: Vec<_> = sg.edges.edges().collect();
        e.sort();
        assert_eq!(e, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(sg.types_touched.len(), 1);
    }

    #[test]
    fn length_one_chain_matches_relation() {
        let g = parse_hetgraph(TOY).unwrap();
        let m = MetapathSpec {
            name: "AP1".into(),
            relations: vec![0],
        };
        let a = build_metapath_graph(&g, &m).unwrap();
        let b = build_relation_graph(&g, 0).unwrap();
        assert_eq!(a.edges, b.edges);
        assert_eq!((a.src_type, a.dst_type), (b.src_type, b.dst_type));
    }

    #[test]
    fn incompatible_chain_rejected() {
        let g = parse_hetgraph(TOY).unwrap();
        let m = MetapathSpec {
            name: "APAP_bad".into(),
            relations: vec![0, 0],
        };
        assert!(matches!(
            build_metapath_graph(&g, &m),
            Err(Error::IncompatibleChain { step: 1, .. })
        ));
    }
}
