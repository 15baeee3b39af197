use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::rab::Rab;
use super::trace::{Event, EventTrace, Reuse, Stage, TraceHeader};
use crate::error::{Error, Result};
use crate::graph::{HetGraph, SemanticGraph, TypeId};
use crate::model::{
    edge_logit, projection_key, EmbeddingResult, Fusion, ModelParams, ProjectionKey, Role, StageTable,
    TypeEmbedding,
};
use crate::schedule::{balance_workloads, sync_partials, ExecutionOrder, LanePlan, Partial};
use crate::tensor::{axpy, dot, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    /// Stored intermediates are rounded to single precision.
    F32,
}

impl std::str::FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            _ => Err(Error::Config(format!("unknown precision `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub num_lanes: usize,
    /// Most edge tasks a lane takes per round.
    pub threshold: usize,
    /// Let under-filled lanes take other lists' excess.
    pub balance: bool,
    /// Reuse projections and attention halves across edges.
    pub rab: bool,
    pub precision: Precision,
    /// Bytes per stored element, for traffic accounting.
    pub element_bytes: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            num_lanes: 4,
            threshold: 256,
            balance: true,
            rab: true,
            precision: Precision::F64,
            element_bytes: 4,
        }
    }
}

/// Pending projection of one vertex, with the attention halves to compute
/// once it lands.
#[derive(Debug, Clone, PartialEq)]
pub struct FpTask {
    pub key: ProjectionKey,
    pub vertex: u32,
    pub theta: Vec<(usize, Role)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeTask {
    pub sg: usize,
    pub src: u32,
    pub dst: u32,
}

/// Queues and accumulators of one layer.
#[derive(Debug, Default)]
pub struct TaskState {
    pub fp_task_list: Vec<FpTask>,
    pub na_task_list: VecDeque<EdgeTask>,
    /// `(graph, target)` pairs whose neighbors are all aggregated.
    pub lsf_task_list: Vec<(usize, u32)>,
    /// Graphs whose edges are all aggregated.
    pub gsf_task_list: Vec<usize>,
    /// Per lane, partial aggregates keyed by `(graph, target)`.
    pub partials: Vec<HashMap<(usize, u32), Partial>>,
    /// Per graph, the running sum of target importance scores.
    pub w_partial: Vec<f64>,
    /// Per type, the semantic softmax denominator.
    pub beta_global: Vec<f64>,
    /// Per type, the running fused output (numerator).
    pub z_global: Vec<Option<FeatureMatrix>>,
    /// Per graph and target, neighbors still to aggregate.
    pub remaining_neighbors: Vec<Vec<u32>>,
}

/// Output of [`run_fused`].
#[derive(Debug, Clone)]
pub struct FusedRun {
    pub result: EmbeddingResult,
    pub trace: EventTrace,
    pub plan: LanePlan,
    /// Graph indices in execution order.
    pub order: Vec<usize>,
}

/// Runs every layer of `params` over `sgs` in `order`, lane by lane and
/// round by round per the plan derived from `cfg`.
pub fn run_fused(
    g: &HetGraph,
    sgs: &[SemanticGraph],
    order: &ExecutionOrder,
    params: &ModelParams,
    cfg: &EngineConfig,
) -> Result<FusedRun> {
    if cfg.num_lanes == 0 || cfg.threshold == 0 {
        return Err(Error::Config("lanes and threshold must be positive".into()));
    }
    params.validate(g, sgs)?;
    let ids: Vec<String> = sgs.iter().map(|s| s.id.clone()).collect();
    let order = order.positions(&ids)?;
    let sizes: Vec<usize> = order.iter().map(|&i| sgs[i].num_edges()).collect();
    let plan = balance_workloads(&sizes, cfg.num_lanes, cfg.threshold, cfg.balance);

    let mut x: Vec<Option<FeatureMatrix>> = (0..g.vertex_types().len())
        .map(|t| g.features(t).cloned())
        .collect();
    let mut events = Vec::new();
    let mut result = EmbeddingResult {
        embeddings: Vec::new(),
        z: BTreeMap::new(),
        importance: BTreeMap::new(),
        beta: BTreeMap::new(),
    };
    for l in 0..params.num_layers {
        let mut layer = Layer::new(g, sgs, params, cfg, l, &x, &order, &plan, &mut events)?;
        layer.run()?;
        let last = l + 1 == params.num_layers;
        let out = layer.finish(last, &mut result)?;
        for (t, h) in out {
            x[t] = Some(h);
        }
    }
    let trace = EventTrace {
        header: TraceHeader {
            model: params.kind,
            hidden_dim: params.hidden_dim as u32,
            num_layers: params.num_layers as u32,
            num_lanes: cfg.num_lanes as u32,
            element_bytes: cfg.element_bytes as u32,
            rounds: plan.rounds.len() as u32,
            graphs: TraceHeader::graph_info(sgs),
            type_counts: g.vertex_types().iter().map(|t| t.count as u32).collect(),
        },
        events,
    };
    trace.check_closure()?;
    Ok(FusedRun {
        result,
        trace,
        plan,
        order,
    })
}

struct Layer<'a> {
    g: &'a HetGraph,
    sgs: &'a [SemanticGraph],
    params: &'a ModelParams,
    cfg: &'a EngineConfig,
    table: StageTable,
    l: usize,
    x: &'a [Option<FeatureMatrix>],
    order: &'a [usize],
    plan: &'a LanePlan,
    events: &'a mut Vec<Event>,
    edges: Vec<Vec<(u32, u32)>>,
    keys: Vec<(ProjectionKey, Option<ProjectionKey>)>,
    /// Per graph: list position, native lane.
    native: Vec<usize>,
    processed: Vec<usize>,
    retired: Vec<bool>,
    extra: Vec<f64>,
    proj: HashMap<ProjectionKey, (FeatureMatrix, Vec<bool>)>,
    theta: HashMap<usize, (Vec<f64>, Vec<f64>)>,
    rab: Rab,
    z_sem: Vec<FeatureMatrix>,
    state: TaskState,
    fp_pending: HashMap<(ProjectionKey, u32), usize>,
    round: usize,
    lane: usize,
}

impl<'a> Layer<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        g: &'a HetGraph,
        sgs: &'a [SemanticGraph],
        params: &'a ModelParams,
        cfg: &'a EngineConfig,
        l: usize,
        x: &'a [Option<FeatureMatrix>],
        order: &'a [usize],
        plan: &'a LanePlan,
        events: &'a mut Vec<Event>,
    ) -> Result<Self> {
        let table = params.kind.dispatch();
        let mut keys = Vec::with_capacity(sgs.len());
        let mut extra = Vec::with_capacity(sgs.len());
        for sg in sgs {
            let sk = projection_key(params.kind, sg, Role::Src)?.expect("sources are projected");
            let dk = projection_key(params.kind, sg, Role::Dst)?;
            keys.push((sk, if table.attention() { dk } else { None }));
            extra.push(if table.aggregation == crate::model::Aggregation::EdgeTypeAttention {
                params.edge_term(l, sg)?
            } else {
                0.0
            });
        }
        let mut native = vec![0; sgs.len()];
        for (pos, &i) in order.iter().enumerate() {
            native[i] = plan.native_lane[pos];
        }
        let n_types = g.vertex_types().len();
        let hd = params.hidden_dim;
        let mut state = TaskState {
            partials: vec![HashMap::new(); cfg.num_lanes],
            w_partial: vec![0.0; sgs.len()],
            beta_global: vec![0.0; n_types],
            z_global: vec![None; n_types],
            remaining_neighbors: sgs
                .iter()
                .map(|sg| (0..sg.edges.n_dst()).map(|v| sg.edges.in_degree(v) as u32).collect())
                .collect(),
            ..Default::default()
        };
        for sg in sgs {
            state.z_global[sg.dst_type].get_or_insert_with(|| FeatureMatrix::zeros(g.vertex_type(sg.dst_type).count, hd));
        }
        Ok(Self {
            g,
            sgs,
            params,
            cfg,
            table,
            l,
            x,
            order,
            plan,
            events,
            edges: sgs.iter().map(|sg| sg.edges.edges().collect()).collect(),
            keys,
            native,
            processed: vec![0; sgs.len()],
            retired: vec![false; sgs.len()],
            extra,
            proj: HashMap::new(),
            theta: HashMap::new(),
            rab: Rab::new(),
            z_sem: sgs
                .iter()
                .map(|sg| FeatureMatrix::zeros(sg.edges.n_dst(), hd))
                .collect(),
            state,
            fp_pending: HashMap::new(),
            round: 0,
            lane: 0,
        })
    }

    #[inline]
    fn q(&self, v: f64) -> f64 {
        match self.cfg.precision {
            super::Precision::F64 => v,
            super::Precision::F32 => v as f32 as f64,
        }
    }

    fn event(&self, stage: Stage) -> Event {
        Event::new(stage, self.l, self.round, self.lane)
    }

    fn bytes(&self, elements: usize) -> u64 {
        (elements * self.cfg.element_bytes) as u64
    }

    fn run(&mut self) -> Result<()> {
        let plan = self.plan;
        for (ri, round) in plan.rounds.iter().enumerate() {
            self.round = ri;
            for (lane, ranges) in round.lanes.iter().enumerate() {
                if ranges.is_empty() {
                    continue;
                }
                self.lane = lane;
                for r in ranges {
                    let sg = self.order[r.list];
                    if !self.theta.contains_key(&sg) && self.table.attention() {
                        let s = &self.sgs[sg];
                        self.rab.activate(sg, s.edges.n_src(), s.edges.n_dst());
                        self.theta.insert(sg, (vec![0.0; s.edges.n_src()], vec![0.0; s.edges.n_dst()]));
                    }
                    for k in r.start..r.start + r.len {
                        let (src, dst) = self.edges[sg][k];
                        self.state.na_task_list.push_back(EdgeTask { sg, src, dst });
                    }
                    self.processed[sg] += r.len;
                }
                let batch = self.state.na_task_list.len();
                for _ in 0..batch {
                    let e = self.state.na_task_list.pop_front().unwrap();
                    if !self.process_edge(e, true)? {
                        self.state.na_task_list.push_back(e);
                    }
                }
                self.drain_fp()?;
                while let Some(e) = self.state.na_task_list.pop_front() {
                    if !self.process_edge(e, false)? {
                        return Err(Error::TraceMismatch("edge still not ready after projection".into()));
                    }
                }
                self.drain_lsf()?;
            }
            for pos in 0..self.order.len() {
                let sg = self.order[pos];
                if !self.retired[sg] && self.processed[sg] == self.sgs[sg].num_edges() && self.sgs[sg].num_edges() > 0 {
                    self.state.gsf_task_list.push(sg);
                }
            }
            self.drain_gsf()?;
        }
        self.round = plan.rounds.len();
        for pos in 0..self.order.len() {
            let sg = self.order[pos];
            if !self.retired[sg] {
                self.state.gsf_task_list.push(sg);
            }
        }
        self.drain_gsf()
    }

    /// Value store of `key`, created on first use.
    fn projected_row(&mut self, key: ProjectionKey) -> Result<&mut (FeatureMatrix, Vec<bool>)> {
        if !self.proj.contains_key(&key) {
            let n = self.g.vertex_type(key.vertex_type()).count;
            self.proj
                .insert(key, (FeatureMatrix::zeros(n, self.params.hidden_dim), vec![false; n]));
        }
        Ok(self.proj.get_mut(&key).unwrap())
    }

    fn project(&mut self, key: ProjectionKey, v: u32) -> Result<()> {
        let t = key.vertex_type();
        let x = self.x[t]
            .as_ref()
            .ok_or_else(|| Error::FeaturelessProjection(self.g.vertex_type(t).name.clone()))?;
        let w = self.params.projection(self.l, key, self.g)?;
        let mut e = self.event(Stage::FP);
        e.vertex = Some(v);
        e.vtype = Some(t as u32);
        e.key = Some(key);
        e.rows = w.rows() as u32;
        e.cols = w.cols() as u32;
        e.bytes = self.bytes(w.cols());
        e.reuse = Some(Reuse::Miss);
        self.events.push(e);
        let f32_mode = self.cfg.precision == super::Precision::F32;
        let entry = self.projected_row(key)?;
        if !entry.1[v as usize] {
            let row = entry.0.row_mut(v as usize);
            let xv = x.row(v as usize);
            for (j, o) in row.iter_mut().enumerate() {
                let s = dot(w.row(j), xv);
                *o = if f32_mode { s as f32 as f64 } else { s };
            }
            entry.1[v as usize] = true;
        }
        let count = self.g.vertex_type(t).count;
        self.rab.set_projected(key, v, count);
        Ok(())
    }

    fn role_key(&self, sg: usize, role: Role) -> ProjectionKey {
        match role {
            Role::Src => self.keys[sg].0,
            Role::Dst => self.keys[sg].1.expect("attention target key"),
        }
    }

    fn compute_theta(&mut self, sg: usize, role: Role, v: u32) -> Result<()> {
        let key = self.role_key(sg, role);
        let name = match role {
            Role::Src => "a_src",
            Role::Dst => "a_dst",
        };
        let a = self.params.graph_vector(self.l, name, &self.sgs[sg])?;
        let h = self.proj[&key].0.row(v as usize);
        let th = self.q(dot(a, h));
        let slot = self.theta.get_mut(&sg).expect("active graph");
        match role {
            Role::Src => slot.0[v as usize] = th,
            Role::Dst => slot.1[v as usize] = th,
        }
        if self.cfg.rab {
            self.rab.set_theta(sg, role, key, v);
        }
        let mut e = self.event(Stage::Theta);
        e.sg = Some(sg as u32);
        e.vertex = Some(v);
        e.vtype = Some(key.vertex_type() as u32);
        e.key = Some(key);
        e.role = Some(role);
        e.rows = 1;
        e.cols = self.params.hidden_dim as u32;
        e.bytes = self.bytes(self.params.hidden_dim);
        self.events.push(e);
        Ok(())
    }

    fn ensure_theta(&mut self, sg: usize, role: Role, v: u32) -> Result<()> {
        if !self.rab.has_theta(sg, role, v) {
            self.compute_theta(sg, role, v)?;
        }
        Ok(())
    }

    fn request_fp(&mut self, key: ProjectionKey, v: u32, theta: Option<(usize, Role)>) {
        let idx = *self.fp_pending.entry((key, v)).or_insert_with(|| {
            self.state.fp_task_list.push(FpTask {
                key,
                vertex: v,
                theta: Vec::new(),
            });
            self.state.fp_task_list.len() - 1
        });
        if let Some(t) = theta {
            let list = &mut self.state.fp_task_list[idx].theta;
            if !list.contains(&t) {
                list.push(t);
            }
        }
    }

    fn drain_fp(&mut self) -> Result<()> {
        let tasks = std::mem::take(&mut self.state.fp_task_list);
        self.fp_pending.clear();
        for t in tasks {
            self.project(t.key, t.vertex)?;
            for (sg, role) in t.theta {
                self.ensure_theta(sg, role, t.vertex)?;
            }
        }
        Ok(())
    }

    /// Folds one edge into its target's partial aggregate, or defers it when
    /// an endpoint still lacks its projection. Returns whether it was
    /// aggregated.
    fn process_edge(&mut self, e: EdgeTask, first_pass: bool) -> Result<bool> {
        let EdgeTask { sg, src: u, dst: v } = e;
        let (sk, dk) = self.keys[sg];
        let attn = self.table.attention();
        let reuse = if self.cfg.rab {
            let need_src = !self.rab.is_projected(sk, u);
            let need_dst = dk.is_some_and(|dk| !self.rab.is_projected(dk, v));
            if need_src || need_dst {
                if !first_pass {
                    return Ok(false);
                }
                let mut ev = self.event(Stage::Defer);
                ev.sg = Some(sg as u32);
                ev.vertex = Some(v);
                ev.src = Some(u);
                self.events.push(ev);
                if need_src {
                    self.request_fp(sk, u, attn.then_some((sg, Role::Src)));
                }
                if need_dst {
                    self.request_fp(dk.unwrap(), v, Some((sg, Role::Dst)));
                }
                return Ok(false);
            }
            let have_theta =
                !attn || (self.rab.has_theta(sg, Role::Src, u) && self.rab.has_theta(sg, Role::Dst, v));
            let reuse = if !first_pass {
                Reuse::Miss
            } else if have_theta {
                Reuse::FullHit
            } else {
                Reuse::FpHit
            };
            if attn {
                self.ensure_theta(sg, Role::Src, u)?;
                self.ensure_theta(sg, Role::Dst, v)?;
            }
            reuse
        } else {
            self.project(sk, u)?;
            if let Some(dk) = dk {
                self.project(dk, v)?;
            }
            if attn {
                self.compute_theta(sg, Role::Src, u)?;
                self.compute_theta(sg, Role::Dst, v)?;
            }
            Reuse::Miss
        };

        let weight = if attn {
            let (ts, td) = &self.theta[&sg];
            let logit = edge_logit(ts[u as usize], td[v as usize], self.extra[sg], self.params.leaky_slope);
            self.q(logit.exp())
        } else {
            1.0
        };
        let f32_mode = self.cfg.precision == super::Precision::F32;
        let hd = self.params.hidden_dim;
        let h = self.proj[&sk].0.row(u as usize);
        let p = self.state.partials[self.lane]
            .entry((sg, v))
            .or_insert_with(|| Partial::zeros(hd));
        axpy(&mut p.num, weight, h);
        p.den += weight;
        if f32_mode {
            p.num.iter_mut().for_each(|x| *x = *x as f32 as f64);
            p.den = p.den as f32 as f64;
        }
        let mut ev = self.event(Stage::NA);
        ev.sg = Some(sg as u32);
        ev.vertex = Some(v);
        ev.src = Some(u);
        ev.key = Some(sk);
        ev.rows = 1;
        ev.cols = hd as u32;
        ev.reuse = Some(reuse);
        ev.bytes = self.bytes(hd);
        self.events.push(ev);

        let rem = &mut self.state.remaining_neighbors[sg][v as usize];
        *rem -= 1;
        if *rem == 0 {
            self.state.lsf_task_list.push((sg, v));
        }
        Ok(true)
    }

    /// Merges a finished target's partials on its native lane and finalizes
    /// it.
    fn drain_lsf(&mut self) -> Result<()> {
        let tasks = std::mem::take(&mut self.state.lsf_task_list);
        let hd = self.params.hidden_dim;
        for (sg, v) in tasks {
            let native = self.native[sg];
            let (p, senders) = sync_partials(native, &mut self.state.partials, &(sg, v))?;
            for s in senders {
                let mut e = Event::new(Stage::Sync, self.l, self.round, s);
                e.sg = Some(sg as u32);
                e.vertex = Some(v);
                e.rows = 1;
                e.cols = hd as u32 + 1;
                e.bytes = self.bytes(hd + 1);
                self.events.push(e);
            }
            assert!(p.den > 0.0, "finalized target without neighbors");
            let mut z: Vec<f64> = p.num.iter().map(|x| self.q(x / p.den)).collect();
            self.table.activation.apply(&mut z, self.params.elu_alpha);
            let mut rows = 1;
            if self.table.fusion == Fusion::Han {
                let w_sem = self.params.get(&format!("l{}/sem_W", self.l))?;
                let b = self.params.vector(&format!("l{}/sem_b", self.l))?;
                let qv = self.params.vector(&format!("l{}/sem_q", self.l))?;
                let s = crate::model::semantic_score_of(w_sem, b, qv, &z);
                self.state.w_partial[sg] = self.q(self.state.w_partial[sg] + s);
                rows = w_sem.rows() as u32;
            }
            self.z_sem[sg].row_mut(v as usize).copy_from_slice(&z);
            let mut e = Event::new(Stage::LSF, self.l, self.round, native);
            e.sg = Some(sg as u32);
            e.vertex = Some(v);
            e.vtype = Some(self.sgs[sg].dst_type as u32);
            e.rows = rows;
            e.cols = hd as u32;
            e.bytes = self.bytes(hd);
            self.events.push(e);
        }
        Ok(())
    }

    /// Folds finished graphs into the per-type accumulators.
    fn drain_gsf(&mut self) -> Result<()> {
        let tasks = std::mem::take(&mut self.state.gsf_task_list);
        let hd = self.params.hidden_dim;
        for sg in tasks {
            let s = &self.sgs[sg];
            let t = s.dst_type;
            let scale = match self.table.fusion {
                Fusion::Han => {
                    let w = if s.targets.is_empty() {
                        0.0
                    } else {
                        self.state.w_partial[sg] / s.targets.len() as f64
                    };
                    self.state.w_partial[sg] = w;
                    let e = self.q(w.exp());
                    self.state.beta_global[t] += e;
                    e
                }
                Fusion::Mean => {
                    self.state.beta_global[t] += 1.0;
                    1.0
                }
                Fusion::SumWithSelf | Fusion::None => 1.0,
            };
            let z = self.state.z_global[t].as_mut().expect("target accumulator");
            for &v in &s.targets {
                axpy(z.row_mut(v as usize), scale, self.z_sem[sg].row(v as usize));
            }
            if self.cfg.precision == super::Precision::F32 {
                for &v in &s.targets {
                    z.row_mut(v as usize).iter_mut().for_each(|x| *x = *x as f32 as f64);
                }
            }
            if self.table.fusion != Fusion::None {
                let mut e = Event::new(Stage::GSF, self.l, self.round, self.native[sg]);
                e.sg = Some(sg as u32);
                e.vtype = Some(t as u32);
                e.rows = s.targets.len() as u32;
                e.cols = hd as u32;
                e.bytes = self.bytes(s.targets.len() * hd);
                self.events.push(e);
            }
            self.retired[sg] = true;
            self.rab.retire(sg);
            self.theta.remove(&sg);
        }
        Ok(())
    }

    /// Final per-type normalization; returns the layer outputs.
    fn finish(mut self, last: bool, result: &mut EmbeddingResult) -> Result<Vec<(TypeId, FeatureMatrix)>> {
        self.round = self.plan.rounds.len();
        let targets: BTreeSet<TypeId> = self.sgs.iter().map(|s| s.dst_type).collect();
        let hd = self.params.hidden_dim;
        let mut out = Vec::new();
        for t in targets {
            let mut h = self.state.z_global[t].take().expect("target accumulator");
            let count = h.rows();
            match self.table.fusion {
                Fusion::Han | Fusion::Mean => {
                    let b = self.state.beta_global[t];
                    for v in 0..count {
                        h.row_mut(v).iter_mut().for_each(|x| *x /= b);
                    }
                }
                Fusion::SumWithSelf => {
                    let key = ProjectionKey::SelfLoop(t);
                    for v in 0..count {
                        self.lane = v % self.cfg.num_lanes;
                        self.project(key, v as u32)?;
                        let p = self.proj[&key].0.row(v);
                        axpy(h.row_mut(v), 1.0, p);
                    }
                    self.lane = 0;
                }
                Fusion::None => {}
            }
            let mut e = self.event(Stage::Final);
            e.vtype = Some(t as u32);
            e.rows = count as u32;
            e.cols = hd as u32;
            e.bytes = self.bytes(count * hd);
            self.events.push(e);
            out.push((t, h.check_finite("fused final")?));
        }
        if last {
            for (i, s) in self.sgs.iter().enumerate() {
                if self.table.fusion == Fusion::Han {
                    let w = self.state.w_partial[i];
                    result.importance.insert(s.id.clone(), w);
                    result
                        .beta
                        .insert(s.id.clone(), w.exp() / self.state.beta_global[s.dst_type]);
                }
            }
            for (s, z) in self.sgs.iter().zip(self.z_sem) {
                result.z.insert(s.id.clone(), z);
            }
            for (t, h) in &out {
                result.embeddings.push(TypeEmbedding {
                    type_id: *t,
                    name: self.g.vertex_type(*t).name.clone(),
                    h: h.clone(),
                });
            }
        }
        Ok(out)
    }
}
