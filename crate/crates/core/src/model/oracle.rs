use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ops::{
    attention_theta, feature_projection, neighbor_aggregation_attn, neighbor_aggregation_mean,
    neighbor_aggregation_shgn, semantic_fusion_han, semantic_fusion_mean, semantic_fusion_rgcn,
};
use super::params::{sem_name, sg_name};
use super::{projection_key, Aggregation, Fusion, ModelKind, ModelParams, ProjectionKey, Role};
use crate::error::{Error, Result};
use crate::graph::{HetGraph, SemanticGraph, TypeId};
use crate::tensor::{axpy, max_relative_error, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEmbedding {
    pub type_id: TypeId,
    pub name: String,
    pub h: FeatureMatrix,
}

/// Final-layer outputs of one inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// One entry per target type, ascending type id.
    pub embeddings: Vec<TypeEmbedding>,
    /// Per semantic graph aggregation output (`n_dst` rows, zero rows for
    /// targets without in-edges).
    pub z: BTreeMap<String, FeatureMatrix>,
    /// Semantic importance per graph (HAN only).
    pub importance: BTreeMap<String, f64>,
    /// Fusion weights per graph (HAN only).
    pub beta: BTreeMap<String, f64>,
}

impl EmbeddingResult {
    pub fn embedding(&self, type_name: &str) -> Option<&FeatureMatrix> {
        self.embeddings
            .iter()
            .find(|e| e.name == type_name)
            .map(|e| &e.h)
    }

    /// Largest elementwise relative error over every embedding and every
    /// per-graph output, against `reference`.
    pub fn max_relative_error(&self, reference: &EmbeddingResult) -> Result<f64> {
        if self.embeddings.len() != reference.embeddings.len()
            || self.z.keys().ne(reference.z.keys())
        {
            return Err(Error::shape("EmbeddingResult", "results cover different outputs"));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.embeddings.iter().zip(&reference.embeddings) {
            worst = worst.max(max_relative_error(&a.h, &b.h)?);
        }
        for (a, b) in self.z.values().zip(reference.z.values()) {
            worst = worst.max(max_relative_error(a, b)?);
        }
        Ok(worst)
    }

    /// `type,vertex,h0,...` with one row per target vertex.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.embeddings.first().map_or(0, |e| e.h.cols());
        let mut buf = String::from("type,vertex");
        for k in 0..dim {
            buf.push_str(&format!(",h{k}"));
        }
        buf.push('\n');
        for e in &self.embeddings {
            for v in 0..e.h.rows() {
                buf.push_str(&format!("{},{v}", e.name));
                for x in e.h.row(v) {
                    buf.push_str(&format!(",{x}"));
                }
                buf.push('\n');
            }
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// Metapath graphs for HAN (relations when the graph declares none);
/// relations between featured types for the relation-based models.
pub fn default_semantic_graphs(g: &HetGraph, kind: ModelKind) -> Result<Vec<SemanticGraph>> {
    let sgs: Vec<SemanticGraph> = if kind.uses_relations() || g.metapaths().is_empty() {
        g.featured_relations()
            .into_iter()
            .map(|r| crate::graph::build_relation_graph(g, r))
            .collect::<Result<_>>()?
    } else {
        g.metapaths()
            .iter()
            .map(|m| crate::graph::build_metapath_graph(g, m))
            .collect::<Result<_>>()?
    };
    if sgs.is_empty() {
        return Err(Error::Empty("no semantic graphs for this model"));
    }
    Ok(sgs)
}

/// Sequential reference: per layer, project every needed feature, aggregate
/// every semantic graph, then fuse per target type.
pub fn run_oracle(g: &HetGraph, sgs: &[SemanticGraph], params: &ModelParams) -> Result<EmbeddingResult> {
    params.validate(g, sgs)?;
    let table = params.kind.dispatch();
    let slope = params.leaky_slope;
    let mut x: Vec<Option<FeatureMatrix>> = (0..g.vertex_types().len())
        .map(|t| g.features(t).cloned())
        .collect();
    let target_types: BTreeSet<TypeId> = sgs.iter().map(|sg| sg.dst_type).collect();
    let mut result = EmbeddingResult {
        embeddings: Vec::new(),
        z: BTreeMap::new(),
        importance: BTreeMap::new(),
        beta: BTreeMap::new(),
    };

    for l in 0..params.num_layers {
        let mut proj: BTreeMap<ProjectionKey, FeatureMatrix> = BTreeMap::new();
        let project = |key: ProjectionKey, proj: &mut BTreeMap<ProjectionKey, FeatureMatrix>| -> Result<()> {
            if let Entry::Vacant(slot) = proj.entry(key) {
                let t = key.vertex_type();
                let xt = x[t]
                    .as_ref()
                    .ok_or_else(|| Error::FeaturelessProjection(g.vertex_type(t).name.clone()))?;
                slot.insert(feature_projection(xt, params.projection(l, key, g)?)?);
            }
            Ok(())
        };

        let mut zs = Vec::with_capacity(sgs.len());
        for sg in sgs {
            let sk = projection_key(params.kind, sg, Role::Src)?.expect("source always projected");
            project(sk, &mut proj)?;
            let dk = projection_key(params.kind, sg, Role::Dst)?;
            if let Some(dk) = dk {
                project(dk, &mut proj)?;
            }
            let hs = &proj[&sk];
            let z = match table.aggregation {
                Aggregation::Mean => neighbor_aggregation_mean(sg, hs)?,
                Aggregation::Attention => {
                    let hd = &proj[&dk.expect("attention projects targets")];
                    let (ts, td) = attention_theta(
                        hs,
                        hd,
                        params.graph_vector(l, "a_src", sg)?,
                        params.graph_vector(l, "a_dst", sg)?,
                    )?;
                    neighbor_aggregation_attn(sg, hs, &ts, &td, slope, table.activation, params.elu_alpha)?
                }
                Aggregation::EdgeTypeAttention => {
                    let hd = &proj[&dk.expect("attention projects targets")];
                    neighbor_aggregation_shgn(
                        sg,
                        hs,
                        hd,
                        params.graph_vector(l, "a_src", sg)?,
                        params.graph_vector(l, "a_dst", sg)?,
                        params.graph_vector(l, "a_rel", sg)?,
                        params.graph_vector(l, "h_r", sg)?,
                        params.get(&sg_name(l, "W_r", &sg.id))?,
                        slope,
                    )?
                }
            };
            zs.push(z);
        }

        let last = l + 1 == params.num_layers;
        let mut next = x.clone();
        for &t in &target_types {
            let group: Vec<usize> = (0..sgs.len()).filter(|&i| sgs[i].dst_type == t).collect();
            let refs: Vec<&FeatureMatrix> = group.iter().map(|&i| &zs[i]).collect();
            let h = match table.fusion {
                Fusion::Han => {
                    let input: Vec<(&FeatureMatrix, &[u32])> = group
                        .iter()
                        .map(|&i| (&zs[i], sgs[i].targets.as_slice()))
                        .collect();
                    let f = semantic_fusion_han(
                        &input,
                        params.get(&sem_name(l, "sem_W"))?,
                        params.vector(&sem_name(l, "sem_b"))?,
                        params.vector(&sem_name(l, "sem_q"))?,
                    )?;
                    if last {
                        for (k, &i) in group.iter().enumerate() {
                            result.importance.insert(sgs[i].id.clone(), f.w[k]);
                            result.beta.insert(sgs[i].id.clone(), f.beta[k]);
                        }
                    }
                    f.h
                }
                Fusion::Mean => semantic_fusion_mean(&refs)?,
                Fusion::SumWithSelf => {
                    let xt = x[t]
                        .as_ref()
                        .ok_or_else(|| Error::FeaturelessProjection(g.vertex_type(t).name.clone()))?;
                    semantic_fusion_rgcn(&refs, xt, params.projection(l, ProjectionKey::SelfLoop(t), g)?)?
                }
                Fusion::None => {
                    let mut h = FeatureMatrix::zeros(g.vertex_type(t).count, params.hidden_dim);
                    for z in &refs {
                        for v in 0..h.rows() {
                            axpy(h.row_mut(v), 1.0, z.row(v));
                        }
                    }
                    h
                }
            };
            next[t] = Some(h);
        }
        if last {
            for (sg, z) in sgs.iter().zip(zs) {
                result.z.insert(sg.id.clone(), z);
            }
            for &t in &target_types {
                result.embeddings.push(TypeEmbedding {
                    type_id: t,
                    name: g.vertex_type(t).name.clone(),
                    h: next[t].take().expect("target fused"),
                });
            }
        }
        x = next;
    }
    Ok(result)
}
