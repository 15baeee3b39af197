use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tasks `start..start + len` of one input list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRange {
    pub list: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanRound {
    /// Per lane: the native chunk first (if any), then ranges drawn from the
    /// overflow list.
    pub lanes: Vec<Vec<TaskRange>>,
    /// Excess pushed to the overflow list this round.
    pub spilled: usize,
    /// Overflow tasks placed on under-filled lanes. What is not placed goes
    /// back to its native list, so the overflow list ends every round empty.
    pub drawn: usize,
}

/// Round-by-round assignment of task lists to lanes.
///
/// Lists occupy lanes in input order; when a list is exhausted its lane takes
/// the next waiting list at the following round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanePlan {
    pub num_lanes: usize,
    pub threshold: usize,
    pub balance: bool,
    pub list_sizes: Vec<usize>,
    /// Lane each list was assigned to.
    pub native_lane: Vec<usize>,
    pub rounds: Vec<PlanRound>,
}

impl LanePlan {
    pub fn lane_totals(&self) -> Vec<usize> {
        let mut t = vec![0; self.num_lanes];
        for r in &self.rounds {
            for (l, ranges) in r.lanes.iter().enumerate() {
                t[l] += ranges.iter().map(|x| x.len).sum::<usize>();
            }
        }
        t
    }

    pub fn max_lane_total(&self) -> usize {
        self.lane_totals().into_iter().max().unwrap_or(0)
    }

    /// Checks the threshold and exact-cover invariants.
    pub fn check(&self) -> Result<()> {
        let mut next = vec![Vec::new(); self.list_sizes.len()];
        for (i, r) in self.rounds.iter().enumerate() {
            if r.lanes.len() != self.num_lanes {
                return Err(Error::InvalidOrder(format!("round {i} has {} lanes", r.lanes.len())));
            }
            for (l, ranges) in r.lanes.iter().enumerate() {
                let n: usize = ranges.iter().map(|x| x.len).sum();
                if n > self.threshold {
                    return Err(Error::InvalidOrder(format!(
                        "round {i} lane {l} holds {n} > {} tasks",
                        self.threshold
                    )));
                }
                for x in ranges {
                    if x.list >= next.len() || x.len == 0 {
                        return Err(Error::InvalidOrder(format!("bad range {x:?}")));
                    }
                    next[x.list].push((x.start, x.len));
                }
            }
        }
        for (list, mut ranges) in next.into_iter().enumerate() {
            ranges.sort_unstable();
            let mut at = 0;
            for (s, n) in ranges {
                if s != at {
                    return Err(Error::InvalidOrder(format!("list {list} gap or overlap at {at}")));
                }
                at += n;
            }
            if at != self.list_sizes[list] {
                return Err(Error::InvalidOrder(format!(
                    "list {list} covers {at} of {} tasks",
                    self.list_sizes[list]
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.check()?;
        Ok(p)
    }
}

/// Plans `list_sizes` over `num_lanes` lanes taking at most `threshold`
/// tasks per lane per round.
///
/// Each round every active list offers up to `threshold` tasks to its own
/// lane; the rest is excess. With `balance`, lanes below the threshold then
/// take excess from the other active lists, the emptiest lane first (ties
/// by lane index), drawing lists in lane order.
pub fn balance_workloads(list_sizes: &[usize], num_lanes: usize, threshold: usize, balance: bool) -> LanePlan {
    assert!(num_lanes >= 1 && threshold >= 1, "need at least one lane and a positive threshold");
    let mut plan = LanePlan {
        num_lanes,
        threshold,
        balance,
        list_sizes: list_sizes.to_vec(),
        native_lane: vec![0; list_sizes.len()],
        rounds: Vec::new(),
    };
    let mut next = vec![0usize; list_sizes.len()];
    let mut slot: Vec<Option<usize>> = vec![None; num_lanes];
    let mut waiting = (0..list_sizes.len()).filter(|&i| list_sizes[i] > 0);
    for (i, &n) in list_sizes.iter().enumerate() {
        if n == 0 {
            plan.native_lane[i] = i % num_lanes;
        }
    }
    loop {
        for (lane, s) in slot.iter_mut().enumerate() {
            if s.is_none() {
                if let Some(i) = waiting.next() {
                    *s = Some(i);
                    plan.native_lane[i] = lane;
                }
            }
        }
        if slot.iter().all(Option::is_none) {
            break;
        }
        let mut round = PlanRound {
            lanes: vec![Vec::new(); num_lanes],
            ..Default::default()
        };
        let mut used = vec![0usize; num_lanes];
        for (lane, s) in slot.iter().enumerate() {
            if let Some(i) = *s {
                let left = list_sizes[i] - next[i];
                let n = left.min(threshold);
                round.lanes[lane].push(TaskRange { list: i, start: next[i], len: n });
                next[i] += n;
                used[lane] = n;
                round.spilled += left - n;
            }
        }
        if balance && round.spilled > 0 {
            let mut order: Vec<usize> = (0..num_lanes).filter(|&l| used[l] < threshold).collect();
            order.sort_by_key(|&l| (std::cmp::Reverse(threshold - used[l]), l));
            let donors: Vec<usize> = slot.iter().flatten().copied().collect();
            for lane in order {
                for &i in &donors {
                    let free = threshold - used[lane];
                    let n = free.min(list_sizes[i] - next[i]);
                    if n == 0 {
                        continue;
                    }
                    round.lanes[lane].push(TaskRange { list: i, start: next[i], len: n });
                    next[i] += n;
                    used[lane] += n;
                    round.drawn += n;
                }
            }
        }
        for s in slot.iter_mut() {
            if let Some(i) = *s {
                if next[i] == list_sizes[i] {
                    *s = None;
                }
            }
        }
        plan.rounds.push(round);
    }
    plan
}

/// Numerator and denominator of one target's decomposed softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partial {
    pub num: Vec<f64>,
    pub den: f64,
}

impl Partial {
    pub fn zeros(dim: usize) -> Self {
        Self { num: vec![0.0; dim], den: 0.0 }
    }

    pub fn merge(&mut self, other: &Partial) {
        for (a, b) in self.num.iter_mut().zip(&other.num) {
            *a += b;
        }
        self.den += other.den;
    }
}

/// Removes `key`'s partials from every lane and sums them on `native`
/// (native lane first, then ascending lane index). Returns the merged
/// partial and the foreign lanes that had to send theirs.
///
/// Fails if no lane holds `key`, which is what a second merge of the same
/// vertex looks like.
pub fn sync_partials<K: Hash + Eq>(
    native: usize,
    lanes: &mut [HashMap<K, Partial>],
    key: &K,
) -> Result<(Partial, Vec<usize>)> {
    let mut merged = lanes[native].remove(key);
    let mut senders = Vec::new();
    for (l, lane) in lanes.iter_mut().enumerate() {
        if l == native {
            continue;
        }
        if let Some(p) = lane.remove(key) {
            match merged.as_mut() {
                Some(m) => m.merge(&p),
                None => merged = Some(p),
            }
            senders.push(l);
        }
    }
    merged
        .map(|m| (m, senders))
        .ok_or_else(|| Error::InvalidOrder("partial merged twice or never accumulated".into()))
}
