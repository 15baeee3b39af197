use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::model::{ModelKind, ProjectionKey, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    /// Projection of one vertex under one key.
    FP,
    /// One attention half of one vertex.
    Theta,
    /// One edge folded into its target's partial aggregate.
    NA,
    /// An edge postponed until its endpoints are projected.
    Defer,
    /// A partial aggregate sent back to its native lane.
    Sync,
    /// A target's aggregate finalized (and scored, for HAN).
    LSF,
    /// A semantic graph folded into the per-type accumulators.
    GSF,
    /// Per-type normalization at the end of a layer.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reuse {
    Miss,
    FpHit,
    FullHit,
}

/// One engine action. `rows x cols` is the operand shape: weight shape for
/// projections, vector width elsewhere, rows counting vertices for
/// graph- and type-level stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub stage: Stage,
    pub layer: u32,
    pub round: u32,
    pub lane: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sg: Option<u32>,
    /// Subject vertex; the target for edge events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<u32>,
    /// Source vertex of edge events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vtype: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<ProjectionKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub rows: u32,
    pub cols: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reuse: Option<Reuse>,
    pub bytes: u64,
}

impl Event {
    pub(crate) fn new(stage: Stage, layer: usize, round: usize, lane: usize) -> Self {
        Self {
            stage,
            layer: layer as u32,
            round: round as u32,
            lane: lane as u32,
            sg: None,
            vertex: None,
            src: None,
            vtype: None,
            key: None,
            role: None,
            rows: 0,
            cols: 0,
            reuse: None,
            bytes: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub id: String,
    pub src_type: u32,
    pub dst_type: u32,
    pub edges: u64,
    pub targets: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub model: ModelKind,
    pub hidden_dim: u32,
    pub num_layers: u32,
    pub num_lanes: u32,
    pub element_bytes: u32,
    /// Rounds per layer.
    pub rounds: u32,
    /// Semantic graphs, indexed by `Event::sg`.
    pub graphs: Vec<GraphInfo>,
    /// Vertex count per type.
    pub type_counts: Vec<u32>,
}

impl TraceHeader {
    pub(crate) fn graph_info(sgs: &[SemanticGraph]) -> Vec<GraphInfo> {
        sgs.iter()
            .map(|sg| GraphInfo {
                id: sg.id.clone(),
                src_type: sg.src_type as u32,
                dst_type: sg.dst_type as u32,
                edges: sg.num_edges() as u64,
                targets: sg.targets.len() as u64,
            })
            .collect()
    }
}

/// Engine events in issue order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTrace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

impl EventTrace {
    pub fn count(&self, stage: Stage) -> usize {
        self.events.iter().filter(|e| e.stage == stage).count()
    }

    /// Every edge of every graph yields exactly one aggregation event per
    /// layer, and every target exactly one finalization.
    pub fn check_closure(&self) -> Result<()> {
        let g = &self.header.graphs;
        let layers = self.header.num_layers as usize;
        let mut na = vec![vec![0u64; g.len()]; layers];
        let mut lsf = vec![vec![0u64; g.len()]; layers];
        for e in &self.events {
            let (Some(sg), l) = (e.sg, e.layer as usize) else { continue };
            if l >= layers || sg as usize >= g.len() {
                return Err(Error::TraceMismatch(format!("event outside header: {e:?}")));
            }
            match e.stage {
                Stage::NA => na[l][sg as usize] += 1,
                Stage::LSF => lsf[l][sg as usize] += 1,
                _ => {}
            }
        }
        for l in 0..layers {
            for (i, info) in g.iter().enumerate() {
                if na[l][i] != info.edges || lsf[l][i] != info.targets {
                    return Err(Error::TraceMismatch(format!(
                        "layer {l} graph {}: {} aggregations for {} edges, {} finalizations for {} targets",
                        info.id, na[l][i], info.edges, lsf[l][i], info.targets
                    )));
                }
            }
        }
        Ok(())
    }

    /// Header line, then one event per line.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or(Error::Empty("trace has no header"))??;
        let header: TraceHeader = serde_json::from_str(&first)?;
        let mut events = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                events.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { header, events })
    }
}
