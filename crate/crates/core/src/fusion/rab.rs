use std::collections::HashMap;
use std::fmt;

use crate::model::{ProjectionKey, Role};

/// Status bits of one vertex: projected, source-half attention computed,
/// target-half attention computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RabCode(pub u8);

impl RabCode {
    pub const PROJECTED: u8 = 0b100;
    pub const THETA_SRC: u8 = 0b010;
    pub const THETA_DST: u8 = 0b001;

    /// `000`, `100`, `110`, `101` and `111`: attention bits never precede
    /// projection.
    pub fn is_reachable(self) -> bool {
        self.0 & Self::PROJECTED != 0 || self.0 == 0
    }
}

impl fmt::Display for RabCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03b}", self.0)
    }
}

#[derive(Debug, Default)]
struct ThetaBits {
    src: Vec<bool>,
    dst: Vec<bool>,
}

/// Redundancy-aware bitmap.
///
/// Projection bits live per [`ProjectionKey`], so their reuse scope follows
/// the key (a vertex type, or a relation and type). Attention bits live per
/// active semantic graph and vanish when it retires.
#[derive(Debug, Default)]
pub struct Rab {
    projected: HashMap<ProjectionKey, Vec<bool>>,
    theta: HashMap<usize, ThetaBits>,
}

impl Rab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_projected(&self, key: ProjectionKey, v: u32) -> bool {
        self.projected
            .get(&key)
            .is_some_and(|b| b[v as usize])
    }

    pub fn set_projected(&mut self, key: ProjectionKey, v: u32, count: usize) {
        self.projected.entry(key).or_insert_with(|| vec![false; count])[v as usize] = true;
    }

    pub fn activate(&mut self, sg: usize, n_src: usize, n_dst: usize) {
        self.theta.insert(
            sg,
            ThetaBits {
                src: vec![false; n_src],
                dst: vec![false; n_dst],
            },
        );
    }

    pub fn retire(&mut self, sg: usize) {
        self.theta.remove(&sg);
    }

    pub fn has_theta(&self, sg: usize, role: Role, v: u32) -> bool {
        self.theta.get(&sg).is_some_and(|b| match role {
            Role::Src => b.src[v as usize],
            Role::Dst => b.dst[v as usize],
        })
    }

    /// Panics if the vertex is not projected under `key` or `sg` is not
    /// active; both indicate an engine bug.
    pub fn set_theta(&mut self, sg: usize, role: Role, key: ProjectionKey, v: u32) {
        assert!(self.is_projected(key, v), "attention before projection");
        let b = self.theta.get_mut(&sg).expect("semantic graph not active");
        match role {
            Role::Src => b.src[v as usize] = true,
            Role::Dst => b.dst[v as usize] = true,
        }
    }

    /// Code of a vertex inside `sg`, whose source and target keys are given
    /// when the vertex can take that role.
    pub fn code(&self, sg: usize, v: u32, src: Option<ProjectionKey>, dst: Option<ProjectionKey>) -> RabCode {
        let mut c = 0;
        if src.or(dst).is_some_and(|k| self.is_projected(k, v)) {
            c |= RabCode::PROJECTED;
        }
        if src.is_some() && self.has_theta(sg, Role::Src, v) {
            c |= RabCode::THETA_SRC;
        }
        if dst.is_some() && self.has_theta(sg, Role::Dst, v) {
            c |= RabCode::THETA_DST;
        }
        RabCode(c)
    }
}
