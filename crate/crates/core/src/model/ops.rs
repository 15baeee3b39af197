use super::{Activation, LOGIT_CLAMP};
use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::tensor::{axpy, dot, FeatureMatrix};

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn elu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

impl Activation {
    pub fn apply(self, row: &mut [f64], elu_alpha: f64) {
        if let Activation::Elu = self {
            for v in row {
                *v = elu(*v, elu_alpha);
            }
        }
    }
}

/// `LeakyReLU(theta_src + theta_dst + extra)`, clamped for a safe `exp`.
#[inline]
pub fn edge_logit(theta_src: f64, theta_dst: f64, extra: f64, slope: f64) -> f64 {
    leaky_relu(theta_src + theta_dst + extra, slope).clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

/// `h' = x W^T` with `W` stored `out x in`.
pub fn feature_projection(x: &FeatureMatrix, w: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.cols() != w.cols() {
        return Err(Error::shape(
            "feature_projection",
            format!("x has {} columns, W expects {}", x.cols(), w.cols()),
        ));
    }
    let mut out = FeatureMatrix::zeros(x.rows(), w.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let o = out.row_mut(i);
        for (j, oj) in o.iter_mut().enumerate() {
            *oj = dot(w.row(j), xi);
        }
    }
    out.check_finite("feature_projection")
}

/// Per-vertex halves of the split attention coefficient: `a_src . h'_u` for
/// every source row and `a_dst . h'_v` for every target row.
pub fn attention_theta(
    hp_src: &FeatureMatrix,
    hp_dst: &FeatureMatrix,
    a_src: &[f64],
    a_dst: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if a_src.len() != hp_src.cols() || a_dst.len() != hp_dst.cols() {
        return Err(Error::shape(
            "attention_theta",
            format!(
                "attention widths {}/{} vs features {}/{}",
                a_src.len(),
                a_dst.len(),
                hp_src.cols(),
                hp_dst.cols()
            ),
        ));
    }
    let ts = (0..hp_src.rows()).map(|u| dot(a_src, hp_src.row(u))).collect();
    let td = (0..hp_dst.rows()).map(|v| dot(a_dst, hp_dst.row(v))).collect();
    Ok((ts, td))
}

fn check_rows(op: &'static str, sg: &SemanticGraph, hp_src: &FeatureMatrix) -> Result<()> {
    if hp_src.rows() != sg.edges.n_src() {
        return Err(Error::shape(
            op,
            format!("{} source rows for {} sources", hp_src.rows(), sg.edges.n_src()),
        ));
    }
    Ok(())
}

/// Softmax-weighted sum over each target's in-neighbors, max-shifted for
/// stability. `extra` is added to every logit.
fn softmax_aggregate(
    sg: &SemanticGraph,
    hp_src: &FeatureMatrix,
    theta_src: &[f64],
    theta_dst: &[f64],
    extra: f64,
    slope: f64,
) -> FeatureMatrix {
    let mut out = FeatureMatrix::zeros(sg.edges.n_dst(), hp_src.cols());
    let mut logits = Vec::new();
    for &v in &sg.targets {
        let v = v as usize;
        let nbrs = sg.edges.in_neighbors(v);
        logits.clear();
        logits.extend(
            nbrs.iter()
                .map(|&u| edge_logit(theta_src[u as usize], theta_dst[v], extra, slope)),
        );
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        let row = out.row_mut(v);
        for (&u, l) in nbrs.iter().zip(&logits) {
            axpy(row, (l - m).exp() / denom, hp_src.row(u as usize));
        }
    }
    out
}

/// `z_v = act(sum_u alpha_uv h'_u)`; rows of targets without in-edges are 0.
pub fn neighbor_aggregation_attn(
    sg: &SemanticGraph,
    hp_src: &FeatureMatrix,
    theta_src: &[f64],
    theta_dst: &[f64],
    slope: f64,
    act: Activation,
    elu_alpha: f64,
) -> Result<FeatureMatrix> {
    check_rows("neighbor_aggregation_attn", sg, hp_src)?;
    if theta_src.len() != sg.edges.n_src() || theta_dst.len() != sg.edges.n_dst() {
        return Err(Error::shape("neighbor_aggregation_attn", "theta lengths"));
    }
    let mut out = softmax_aggregate(sg, hp_src, theta_src, theta_dst, 0.0, slope);
    for &v in &sg.targets {
        act.apply(out.row_mut(v as usize), elu_alpha);
    }
    out.check_finite("neighbor_aggregation_attn")
}

/// Degree-normalized sum of source rows.
pub fn neighbor_aggregation_mean(sg: &SemanticGraph, hp_src: &FeatureMatrix) -> Result<FeatureMatrix> {
    check_rows("neighbor_aggregation_mean", sg, hp_src)?;
    let mut out = FeatureMatrix::zeros(sg.edges.n_dst(), hp_src.cols());
    for &v in &sg.targets {
        let nbrs = sg.edges.in_neighbors(v as usize);
        let row = out.row_mut(v as usize);
        for &u in nbrs {
            axpy(row, 1.0, hp_src.row(u as usize));
        }
        let k = nbrs.len() as f64;
        row.iter_mut().for_each(|x| *x /= k);
    }
    out.check_finite("neighbor_aggregation_mean")
}

/// Simple-HGN aggregation: logits carry the relation term
/// `a_rel . (W_r h_r)`; softmax runs over the relation's own neighbor set and
/// no activation is applied.
#[allow(clippy::too_many_arguments)]
pub fn neighbor_aggregation_shgn(
    sg: &SemanticGraph,
    hp_src: &FeatureMatrix,
    hp_dst: &FeatureMatrix,
    a_src: &[f64],
    a_dst: &[f64],
    a_rel: &[f64],
    h_r: &[f64],
    w_r: &FeatureMatrix,
    slope: f64,
) -> Result<FeatureMatrix> {
    check_rows("neighbor_aggregation_shgn", sg, hp_src)?;
    if h_r.len() != w_r.cols() || a_rel.len() != w_r.rows() {
        return Err(Error::shape("neighbor_aggregation_shgn", "edge embedding widths"));
    }
    let (ts, td) = attention_theta(hp_src, hp_dst, a_src, a_dst)?;
    let extra = dot(a_rel, &w_r.mul_vec(h_r));
    softmax_aggregate(sg, hp_src, &ts, &td, extra, slope).check_finite("neighbor_aggregation_shgn")
}

/// Output of semantic attention fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct HanFusion {
    pub h: FeatureMatrix,
    /// Per-graph importance, averaged over that graph's targets.
    pub w: Vec<f64>,
    /// `softmax(w)`
    pub beta: Vec<f64>,
}

/// `w_P = mean_{v in V^P} q . tanh(W z_v + b)`, `beta = softmax(w)`,
/// `h = sum_P beta_P z^P`. Each entry of `zs` is a per-graph output with the
/// targets that define its `V^P`.
pub fn semantic_fusion_han(
    zs: &[(&FeatureMatrix, &[u32])],
    w_sem: &FeatureMatrix,
    b: &[f64],
    q: &[f64],
) -> Result<HanFusion> {
    let (first, _) = zs.first().ok_or(Error::Empty("semantic_fusion_han input"))?;
    let (rows, cols) = (first.rows(), first.cols());
    if zs.iter().any(|(z, _)| z.rows() != rows || z.cols() != cols) {
        return Err(Error::shape("semantic_fusion_han", "outputs differ in shape"));
    }
    if w_sem.cols() != cols || b.len() != w_sem.rows() || q.len() != w_sem.rows() {
        return Err(Error::shape("semantic_fusion_han", "semantic attention widths"));
    }
    let w: Vec<f64> = zs
        .iter()
        .map(|(z, targets)| {
            if targets.is_empty() {
                return 0.0;
            }
            let s: f64 = targets
                .iter()
                .map(|&v| semantic_score(w_sem, b, q, z.row(v as usize)))
                .sum();
            s / targets.len() as f64
        })
        .collect();
    let beta = softmax(&w);
    let mut h = FeatureMatrix::zeros(rows, cols);
    for ((z, _), &bp) in zs.iter().zip(&beta) {
        for v in 0..rows {
            axpy(h.row_mut(v), bp, z.row(v));
        }
    }
    Ok(HanFusion {
        h: h.check_finite("semantic_fusion_han")?,
        w,
        beta,
    })
}

/// `q . tanh(W z + b)` for one vertex.
pub(crate) fn semantic_score(w_sem: &FeatureMatrix, b: &[f64], q: &[f64], z: &[f64]) -> f64 {
    (0..w_sem.rows())
        .map(|k| q[k] * (dot(w_sem.row(k), z) + b[k]).tanh())
        .sum()
}

pub(crate) fn softmax(w: &[f64]) -> Vec<f64> {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Elementwise arithmetic mean.
pub fn semantic_fusion_mean(zs: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = zs.first().ok_or(Error::Empty("semantic_fusion_mean input"))?;
    let mut h = FeatureMatrix::zeros(first.rows(), first.cols());
    for z in zs {
        if z.rows() != h.rows() || z.cols() != h.cols() {
            return Err(Error::shape("semantic_fusion_mean", "outputs differ in shape"));
        }
        for v in 0..h.rows() {
            axpy(h.row_mut(v), 1.0, z.row(v));
        }
    }
    let k = zs.len() as f64;
    for v in 0..h.rows() {
        h.row_mut(v).iter_mut().for_each(|x| *x /= k);
    }
    Ok(h)
}

/// `h = sum_r z^r + x W_self^T`.
pub fn semantic_fusion_rgcn(zs: &[&FeatureMatrix], x: &FeatureMatrix, w_self: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut h = feature_projection(x, w_self)?;
    for z in zs {
        if z.rows() != h.rows() || z.cols() != h.cols() {
            return Err(Error::shape("semantic_fusion_rgcn", "outputs differ in shape"));
        }
        for v in 0..h.rows() {
            axpy(h.row_mut(v), 1.0, z.row(v));
        }
    }
    h.check_finite("semantic_fusion_rgcn")
}
