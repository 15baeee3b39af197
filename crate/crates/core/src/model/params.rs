use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use super::{projection_key, Fusion, ModelKind, ProjectionKey, Role};
use crate::error::{Error, Result};
use crate::graph::io::write_row;
use crate::graph::{HetGraph, SemanticGraph, TypeId};
use crate::rng;
use crate::tensor::FeatureMatrix;

const INIT_RANGE: f64 = 0.1;

/// Every learned tensor of one model, keyed by name, plus its scalar
/// hyperparameters.
///
/// Names follow `l{layer}/{kind}/{key}`: `W/T:A` (type-keyed projection),
/// `W/R:AP:A` (relation-keyed), `W/S:A` (self loop), `a_src/APA`,
/// `a_dst/APA`, `a_rel/AP`, `h_r/AP`, `W_r/AP`, and the shared HAN semantic
/// attention `sem_W`, `sem_b`, `sem_q`. Vectors are stored as `1 x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub leaky_slope: f64,
    pub elu_alpha: f64,
    pub semantic_dim: usize,
    pub edge_dim: usize,
    pub seed: u64,
    tensors: BTreeMap<String, FeatureMatrix>,
}

/// Input width of every vertex type at every layer (`[layer][type]`, 0 when
/// the type has no features at that point).
///
/// Targets of any semantic graph become `hidden` wide after a layer; other
/// types carry their previous input forward.
pub fn layer_input_dims(g: &HetGraph, sgs: &[SemanticGraph], hidden: usize, layers: usize) -> Vec<Vec<usize>> {
    let targets: BTreeSet<TypeId> = sgs.iter().map(|sg| sg.dst_type).collect();
    let mut dims: Vec<usize> = g
        .vertex_types()
        .iter()
        .enumerate()
        .map(|(t, vt)| if g.features(t).is_some() { vt.feature_dim } else { 0 })
        .collect();
    let mut out = Vec::with_capacity(layers);
    for _ in 0..layers {
        out.push(dims.clone());
        for &t in &targets {
            dims[t] = hidden;
        }
    }
    out
}

pub(crate) fn w_name(layer: usize, key: ProjectionKey, g: &HetGraph) -> String {
    format!("l{layer}/W/{}", key.label(g))
}

pub(crate) fn sg_name(layer: usize, what: &str, sg: &str) -> String {
    format!("l{layer}/{what}/{sg}")
}

pub(crate) fn sem_name(layer: usize, what: &str) -> String {
    format!("l{layer}/{what}")
}

impl ModelParams {
    /// Parameters with no tensors; fill them with [`ModelParams::insert`].
    pub fn empty(kind: ModelKind, hidden_dim: usize, num_layers: usize, seed: u64) -> Self {
        Self {
            kind,
            hidden_dim,
            num_layers,
            leaky_slope: 0.01,
            elu_alpha: 1.0,
            semantic_dim: 128,
            edge_dim: 64,
            seed,
            tensors: BTreeMap::new(),
        }
    }

    /// Default widths and layer count for `kind`.
    pub fn generate(kind: ModelKind, g: &HetGraph, sgs: &[SemanticGraph], seed: u64) -> Result<Self> {
        Self::generate_with(kind, g, sgs, seed, 64, kind.default_layers())
    }

    /// Every tensor the model reads, uniform in `[-0.1, 0.1]`, each drawn
    /// from its own stream keyed by its name.
    pub fn generate_with(
        kind: ModelKind,
        g: &HetGraph,
        sgs: &[SemanticGraph],
        seed: u64,
        hidden_dim: usize,
        num_layers: usize,
    ) -> Result<Self> {
        let mut p = Self::empty(kind, hidden_dim, num_layers, seed);
        for (name, rows, cols) in p.required_shapes(g, sgs)? {
            let mut r = rng::stream(seed, &name);
            let data = (0..rows * cols)
                .map(|_| r.random_range(-INIT_RANGE..=INIT_RANGE))
                .collect();
            p.tensors.insert(name, FeatureMatrix::from_vec(rows, cols, data)?);
        }
        Ok(p)
    }

    /// `(name, rows, cols)` of every tensor needed to run `sgs` on `g`.
    pub fn required_shapes(&self, g: &HetGraph, sgs: &[SemanticGraph]) -> Result<Vec<(String, usize, usize)>> {
        if sgs.is_empty() {
            return Err(Error::Empty("semantic graph list"));
        }
        let hd = self.hidden_dim;
        let table = self.kind.dispatch();
        let dims = layer_input_dims(g, sgs, hd, self.num_layers);
        let mut shapes = BTreeMap::new();
        for (l, dims) in dims.iter().enumerate() {
            let project = |key: ProjectionKey, shapes: &mut BTreeMap<String, (usize, usize)>| {
                let t = key.vertex_type();
                if dims[t] == 0 {
                    return Err(Error::FeaturelessProjection(g.vertex_type(t).name.clone()));
                }
                shapes.insert(w_name(l, key, g), (hd, dims[t]));
                Ok(())
            };
            for sg in sgs {
                for role in [Role::Src, Role::Dst] {
                    if let Some(key) = projection_key(self.kind, sg, role)? {
                        project(key, &mut shapes)?;
                    }
                }
                if table.fusion == Fusion::SumWithSelf {
                    project(ProjectionKey::SelfLoop(sg.dst_type), &mut shapes)?;
                }
                if table.attention() {
                    shapes.insert(sg_name(l, "a_src", &sg.id), (1, hd));
                    shapes.insert(sg_name(l, "a_dst", &sg.id), (1, hd));
                }
                if self.kind == ModelKind::Shgn {
                    let e = self.edge_dim;
                    shapes.insert(sg_name(l, "a_rel", &sg.id), (1, e));
                    shapes.insert(sg_name(l, "h_r", &sg.id), (1, e));
                    shapes.insert(sg_name(l, "W_r", &sg.id), (e, e));
                }
            }
            if table.fusion == Fusion::Han {
                let s = self.semantic_dim;
                shapes.insert(sem_name(l, "sem_W"), (s, hd));
                shapes.insert(sem_name(l, "sem_b"), (1, s));
                shapes.insert(sem_name(l, "sem_q"), (1, s));
            }
        }
        Ok(shapes.into_iter().map(|(n, (r, c))| (n, r, c)).collect())
    }

    /// Fails with the first missing or mis-shaped tensor.
    pub fn validate(&self, g: &HetGraph, sgs: &[SemanticGraph]) -> Result<()> {
        for (name, rows, cols) in self.required_shapes(g, sgs)? {
            let m = self.get(&name)?;
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::shape(
                    "ModelParams::validate",
                    format!("{name} is {}x{}, expected {rows}x{cols}", m.rows(), m.cols()),
                ));
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, name: impl Into<String>, m: FeatureMatrix) {
        self.tensors.insert(name.into(), m);
    }

    pub fn get(&self, name: &str) -> Result<&FeatureMatrix> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    /// First row of a `1 x n` tensor.
    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        Ok(self.get(name)?.row(0))
    }

    pub fn projection(&self, layer: usize, key: ProjectionKey, g: &HetGraph) -> Result<&FeatureMatrix> {
        self.get(&w_name(layer, key, g))
    }

    pub fn graph_vector(&self, layer: usize, what: &str, sg: &SemanticGraph) -> Result<&[f64]> {
        self.vector(&sg_name(layer, what, &sg.id))
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &FeatureMatrix)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Constant edge term `a_rel . (W_r h_r)` of Simple-HGN for one graph.
    pub fn edge_term(&self, layer: usize, sg: &SemanticGraph) -> Result<f64> {
        let a = self.graph_vector(layer, "a_rel", sg)?;
        let h = self.graph_vector(layer, "h_r", sg)?;
        let w = self.get(&sg_name(layer, "W_r", &sg.id))?;
        Ok(crate::tensor::dot(a, &w.mul_vec(h)))
    }

    /// Text form: a header of `key value` lines, then one
    /// `matrix <name> <rows> <cols>` block per tensor in name order.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "model {}", self.kind.name()).unwrap();
        writeln!(buf, "hidden_dim {}", self.hidden_dim).unwrap();
        writeln!(buf, "num_layers {}", self.num_layers).unwrap();
        writeln!(buf, "leaky_slope {}", self.leaky_slope).unwrap();
        writeln!(buf, "elu_alpha {}", self.elu_alpha).unwrap();
        writeln!(buf, "semantic_dim {}", self.semantic_dim).unwrap();
        writeln!(buf, "edge_dim {}", self.edge_dim).unwrap();
        writeln!(buf, "seed {}", self.seed).unwrap();
        for (name, m) in &self.tensors {
            writeln!(buf, "matrix {name} {} {}", m.rows(), m.cols()).unwrap();
            for r in 0..m.rows() {
                write_row(&mut buf, m.row(r));
            }
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.dump(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self::empty(ModelKind::Han, 0, 0, 0);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let num = |line: usize, v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::parse(line, format!("bad number `{v}`")))
        };
        let int = |line: usize, v: &str| -> Result<usize> {
            v.parse().map_err(|_| Error::parse(line, format!("bad integer `{v}`")))
        };
        while let Some((line, content)) = lines.next() {
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let arg = |i: usize| {
                toks.get(i)
                    .copied()
                    .ok_or_else(|| Error::parse(line, "missing value"))
            };
            match toks[0] {
                "model" => p.kind = arg(1)?.parse()?,
                "hidden_dim" => p.hidden_dim = int(line, arg(1)?)?,
                "num_layers" => p.num_layers = int(line, arg(1)?)?,
                "leaky_slope" => p.leaky_slope = num(line, arg(1)?)?,
                "elu_alpha" => p.elu_alpha = num(line, arg(1)?)?,
                "semantic_dim" => p.semantic_dim = int(line, arg(1)?)?,
                "edge_dim" => p.edge_dim = int(line, arg(1)?)?,
                "seed" => {
                    p.seed = arg(1)?
                        .parse()
                        .map_err(|_| Error::parse(line, "bad seed"))?
                }
                "matrix" => {
                    let name = arg(1)?.to_string();
                    let rows = int(line, arg(2)?)?;
                    let cols = int(line, arg(3)?)?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (l, row) = lines
                            .next()
                            .ok_or_else(|| Error::parse(line, format!("matrix {name} is short")))?;
                        let before = data.len();
                        for v in row.split_whitespace() {
                            data.push(num(l, v)?);
                        }
                        if data.len() - before != cols {
                            return Err(Error::parse(l, format!("expected {cols} values")));
                        }
                    }
                    p.tensors
                        .insert(name, FeatureMatrix::from_vec(rows, cols, data)?);
                }
                other => return Err(Error::parse(line, format!("unknown key `{other}`"))),
            }
        }
        Ok(p)
    }
}
