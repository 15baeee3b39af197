//! Functional definitions of HAN, R-GAT, R-GCN and Simple-HGN, their
//! parameters, and the sequential reference executor.

mod ops;
mod oracle;
mod params;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ops::{
    attention_theta, edge_logit, elu, feature_projection, leaky_relu, neighbor_aggregation_attn,
    neighbor_aggregation_mean, neighbor_aggregation_shgn, semantic_fusion_han,
    semantic_fusion_mean, semantic_fusion_rgcn, HanFusion,
};
pub(crate) use ops::semantic_score as semantic_score_of;
pub use oracle::{default_semantic_graphs, run_oracle, EmbeddingResult, TypeEmbedding};
pub use params::{layer_input_dims, ModelParams};

use crate::error::{Error, Result};
use crate::graph::{HetGraph, RelationId, SemanticGraph, TypeId};

/// Logits are clamped to this magnitude before exponentiation.
pub const LOGIT_CLAMP: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "HAN", alias = "han")]
    Han,
    #[serde(rename = "R-GAT", alias = "rgat", alias = "r-gat")]
    Rgat,
    #[serde(rename = "R-GCN", alias = "rgcn", alias = "r-gcn")]
    Rgcn,
    #[serde(rename = "S-HGN", alias = "shgn", alias = "s-hgn")]
    Shgn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [Self::Han, Self::Rgat, Self::Rgcn, Self::Shgn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Han => "HAN",
            Self::Rgat => "R-GAT",
            Self::Rgcn => "R-GCN",
            Self::Shgn => "S-HGN",
        }
    }

    pub fn default_layers(self) -> usize {
        match self {
            Self::Han => 1,
            Self::Rgat | Self::Rgcn => 3,
            Self::Shgn => 2,
        }
    }

    /// Stage behavior of this model.
    pub fn dispatch(self) -> StageTable {
        match self {
            Self::Han => StageTable {
                aggregation: Aggregation::Attention,
                fusion: Fusion::Han,
                activation: Activation::Elu,
                projection_scope: ProjectionScope::VertexType,
            },
            Self::Rgat => StageTable {
                aggregation: Aggregation::Attention,
                fusion: Fusion::Mean,
                activation: Activation::Elu,
                projection_scope: ProjectionScope::Relation,
            },
            Self::Rgcn => StageTable {
                aggregation: Aggregation::Mean,
                fusion: Fusion::SumWithSelf,
                activation: Activation::Identity,
                projection_scope: ProjectionScope::Relation,
            },
            Self::Shgn => StageTable {
                aggregation: Aggregation::EdgeTypeAttention,
                fusion: Fusion::None,
                activation: Activation::Identity,
                projection_scope: ProjectionScope::VertexType,
            },
        }
    }

    /// Whether semantic graphs are built from relations rather than metapaths.
    pub fn uses_relations(self) -> bool {
        !matches!(self, Self::Han)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "han" => Ok(Self::Han),
            "rgat" => Ok(Self::Rgat),
            "rgcn" => Ok(Self::Rgcn),
            "shgn" | "simplehgn" => Ok(Self::Shgn),
            _ => Err(Error::Config(format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    Attention,
    Mean,
    /// Attention with an extra per-relation edge-embedding term.
    EdgeTypeAttention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fusion {
    /// Semantic attention: softmax over per-graph importance.
    Han,
    Mean,
    /// Sum over relations plus a self-loop projection.
    SumWithSelf,
    /// No fusion stage; per-relation outputs are summed.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Elu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionScope {
    VertexType,
    Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTable {
    pub aggregation: Aggregation,
    pub fusion: Fusion,
    pub activation: Activation,
    pub projection_scope: ProjectionScope,
}

impl StageTable {
    pub fn attention(&self) -> bool {
        !matches!(self.aggregation, Aggregation::Mean)
    }
}

/// Endpoint of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Src,
    Dst,
}

/// Which weight matrix produced a projected feature. Projection reuse is
/// tracked per key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProjectionKey {
    Type(TypeId),
    Relation(RelationId, TypeId),
    SelfLoop(TypeId),
}

impl ProjectionKey {
    pub fn vertex_type(self) -> TypeId {
        match self {
            Self::Type(t) | Self::Relation(_, t) | Self::SelfLoop(t) => t,
        }
    }

    /// Stable label used in parameter names and traces.
    pub fn label(self, g: &HetGraph) -> String {
        match self {
            Self::Type(t) => format!("T:{}", g.vertex_type(t).name),
            Self::Relation(r, t) => {
                format!("R:{}:{}", g.relation(r).name, g.vertex_type(t).name)
            }
            Self::SelfLoop(t) => format!("S:{}", g.vertex_type(t).name),
        }
    }
}

/// Projection key used for one endpoint of `sg`, or `None` when the model
/// never reads that endpoint's projection during aggregation.
pub fn projection_key(kind: ModelKind, sg: &SemanticGraph, role: Role) -> Result<Option<ProjectionKey>> {
    let t = match role {
        Role::Src => sg.src_type,
        Role::Dst => sg.dst_type,
    };
    let relation = || {
        sg.relation().ok_or_else(|| {
            Error::Config(format!("{kind} needs relation graphs, got metapath `{}`", sg.id))
        })
    };
    Ok(match kind.dispatch().projection_scope {
        ProjectionScope::VertexType => Some(ProjectionKey::Type(t)),
        ProjectionScope::Relation => match (kind, role) {
            (ModelKind::Rgcn, Role::Dst) => None,
            _ => Some(ProjectionKey::Relation(relation()?, t)),
        },
    })
}
