//! Resource-constrained list scheduling.
//!
//! The scheduler steps cycle by cycle. At cycle `c` the ready set holds
//! every unscheduled node whose predecessors have all finished by `c`;
//! ready nodes are ranked by descending priority, then ascending id, and
//! admitted while their type still has a free unit. An admitted node
//! occupies one unit of its type for cycles `[s, s + d)`.

use std::time::Instant;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::analysis::GraphStats;
use crate::dsl::PriorityExpr;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::{desc_nan_last, Real};

/// How scheduling time is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeMode {
    #[default]
    Wallclock,
    /// Always report 0 ms so that outputs are bit-reproducible.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Start cycle per node id.
    pub starts: Vec<u64>,
    pub makespan: u64,
    /// False when the priority produced a non-finite value on some node.
    pub feasible: bool,
    pub runtime_ms: f64,
}

impl Serialize for Schedule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Starts<'a>(&'a [u64]);
        impl Serialize for Starts<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.len()))?;
                for (id, start) in self.0.iter().enumerate() {
                    map.serialize_entry(&id.to_string(), start)?;
                }
                map.end()
            }
        }
        let mut map = s.serialize_map(Some(4))?;
        map.serialize_entry("starts", &Starts(&self.starts))?;
        map.serialize_entry("makespan", &self.makespan)?;
        map.serialize_entry("feasible", &self.feasible)?;
        map.serialize_entry("runtime_ms", &self.runtime_ms)?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Doc {
            starts: std::collections::BTreeMap<String, u64>,
            makespan: u64,
            feasible: bool,
            runtime_ms: f64,
        }
        let doc = Doc::deserialize(d)?;
        let mut starts = vec![None; doc.starts.len()];
        for (key, s) in doc.starts {
            let id: usize = key.parse().map_err(serde::de::Error::custom)?;
            let slot = starts
                .get_mut(id)
                .ok_or_else(|| serde::de::Error::custom(format!("start id {id} out of range")))?;
            *slot = Some(s);
        }
        let starts = starts
            .into_iter()
            .enumerate()
            .map(|(id, s)| s.ok_or_else(|| serde::de::Error::custom(format!("missing start for id {id}"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Schedule {
            starts,
            makespan: doc.makespan,
            feasible: doc.feasible,
            runtime_ms: doc.runtime_ms,
        })
    }
}

/// Mutable state of one list-scheduling run.
#[derive(Debug)]
pub struct SchedulerState {
    pub current_cycle: u64,
    pub scheduled: Vec<bool>,
    pub ready: Vec<usize>,
    /// In-flight count per type index at `current_cycle`.
    pub busy: Vec<u32>,
}

/// List-schedules `dag` with the given priority.
pub fn list_schedule<T: Real>(
    dag: &Dag,
    stats: &GraphStats,
    priority: &PriorityExpr<T>,
    mode: RuntimeMode,
) -> Schedule {
    let clock = Instant::now();
    let scores: Vec<T> = (0..dag.len()).map(|v| priority.eval(stats, v)).collect();
    let feasible = scores.iter().all(|s| s.is_finite());
    let starts = run(dag, &scores);
    let runtime_ms = match mode {
        RuntimeMode::Wallclock => clock.elapsed().as_secs_f64() * 1e3,
        RuntimeMode::Zero => 0.0,
    };
    let makespan = makespan(dag, &starts);
    Schedule {
        starts,
        makespan,
        feasible,
        runtime_ms,
    }
}

/// `max_v s(v) + d(v)`, zero for the empty graph.
pub fn makespan(dag: &Dag, starts: &[u64]) -> u64 {
    starts
        .iter()
        .enumerate()
        .map(|(v, s)| s + dag.duration(v))
        .max()
        .unwrap_or(0)
}

fn type_indices(dag: &Dag) -> (Vec<usize>, Vec<u32>) {
    let types: Vec<&String> = dag.capacities().keys().collect();
    let caps = dag.capacities().values().copied().collect();
    let of_node = (0..dag.len())
        .map(|v| {
            types
                .binary_search_by(|t| t.as_str().cmp(dag.op_type(v)))
                .expect("validated dag has capacity for every type")
        })
        .collect();
    (of_node, caps)
}

fn run<T: Real>(dag: &Dag, scores: &[T]) -> Vec<u64> {
    let n = dag.len();
    let (type_of, caps) = type_indices(dag);
    let mut state = SchedulerState {
        current_cycle: 0,
        scheduled: vec![false; n],
        ready: Vec::new(),
        busy: vec![0; caps.len()],
    };
    let mut starts = vec![0u64; n];
    // predecessors still unscheduled, and earliest start from scheduled preds
    let mut waiting: Vec<usize> = (0..n).map(|v| dag.preds(v).len()).collect();
    let mut earliest = vec![0u64; n];
    // nodes whose preds are all scheduled but may still be running
    let mut released: Vec<usize> = (0..n).filter(|&v| waiting[v] == 0).collect();
    // (finish cycle, type) of in-flight ops
    let mut in_flight: Vec<(u64, usize)> = Vec::new();
    let mut done = 0;

    while done < n {
        let c = state.current_cycle;
        in_flight.retain(|&(finish, t)| {
            if finish <= c {
                state.busy[t] -= 1;
                false
            } else {
                true
            }
        });
        state.ready.clear();
        state
            .ready
            .extend(released.iter().copied().filter(|&v| earliest[v] <= c));
        state
            .ready
            .sort_by(|&a, &b| desc_nan_last(scores[a], scores[b]).then(a.cmp(&b)));

        for i in 0..state.ready.len() {
            let v = state.ready[i];
            let t = type_of[v];
            if state.busy[t] >= caps[t] {
                continue;
            }
            state.busy[t] += 1;
            state.scheduled[v] = true;
            starts[v] = c;
            let finish = c + dag.duration(v);
            in_flight.push((finish, t));
            done += 1;
            for &w in dag.succs(v) {
                earliest[w] = earliest[w].max(finish);
                waiting[w] -= 1;
                if waiting[w] == 0 {
                    released.push(w);
                }
            }
        }
        released.retain(|&v| !state.scheduled[v]);

        // Jump over cycles where nothing can change.
        let next_finish = in_flight.iter().map(|&(f, _)| f).min();
        let next_release = released.iter().map(|&v| earliest[v]).filter(|&e| e > c).min();
        state.current_cycle = match (next_finish, next_release) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => c + 1,
        };
    }
    starts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `s(succ) < s(pred) + d(pred)`.
    Precedence { pred: usize, succ: usize },
    /// More than `R_t` ops of `op_type` in flight at `cycle`.
    Resource {
        op_type: String,
        cycle: u64,
        used: u32,
        capacity: u32,
    },
    StartCount { expected: usize, found: usize },
    Makespan { reported: u64, actual: u64 },
}

/// Re-checks precedence and per-cycle capacity from scratch. An empty
/// result means the start times are feasible.
pub fn verify_schedule(dag: &Dag, schedule: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    if schedule.starts.len() != dag.len() {
        out.push(Violation::StartCount {
            expected: dag.len(),
            found: schedule.starts.len(),
        });
        return out;
    }
    let s = &schedule.starts;
    for &(u, v) in dag.edges() {
        if s[v] < s[u] + dag.duration(u) {
            out.push(Violation::Precedence { pred: u, succ: v });
        }
    }
    for (t, &cap) in dag.capacities() {
        // +1 at start, -1 at finish; sweep in cycle order
        let mut events: Vec<(u64, i64)> = Vec::new();
        for v in (0..dag.len()).filter(|&v| dag.op_type(v) == t) {
            events.push((s[v], 1));
            events.push((s[v] + dag.duration(v), -1));
        }
        events.sort_unstable();
        let mut used: i64 = 0;
        let mut i = 0;
        while i < events.len() {
            let cycle = events[i].0;
            while i < events.len() && events[i].0 == cycle {
                used += events[i].1;
                i += 1;
            }
            if used > i64::from(cap) {
                out.push(Violation::Resource {
                    op_type: t.clone(),
                    cycle,
                    used: used as u32,
                    capacity: cap,
                });
            }
        }
    }
    let actual = makespan(dag, s);
    if actual != schedule.makespan {
        out.push(Violation::Makespan {
            reported: schedule.makespan,
            actual,
        });
    }
    out
}

pub const ORACLE_MAX_NODES: usize = 12;

/// Exact minimum makespan by branch and bound.
///
/// Enumerates serial schedule-generation lists in which start times are
/// non-decreasing (ties by ascending id). Every active schedule, and so at
/// least one optimal schedule, is produced by exactly one such list. Nodes
/// are placed at their earliest precedence- and capacity-feasible cycle;
/// branches are cut by critical-path and remaining-work bounds.
pub fn optimal_makespan(dag: &Dag) -> Result<u64> {
    let n = dag.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::OracleTooLarge(n, ORACLE_MAX_NODES));
    }
    if n == 0 {
        return Ok(0);
    }
    let stats = GraphStats::compute(dag);
    let (type_of, caps) = type_indices(dag);
    let upper: u64 = (0..n).map(|v| dag.duration(v)).sum();
    let mut search = Search {
        dag,
        crit: stats.nodes.iter().map(|s| s.crit).collect(),
        type_of,
        caps,
        usage: vec![vec![0; upper as usize + 1]; dag.capacities().len()],
        starts: vec![None; n],
        best: upper,
    };
    let baseline = list_schedule(dag, &stats, &crate::dsl::baseline_priority::<f64>(), RuntimeMode::Zero);
    search.best = search.best.min(baseline.makespan);
    let lower = stats.makespan_lower_bound(dag);
    if search.best > lower {
        let remaining_work = work_per_type(dag, &search.type_of, search.caps.len());
        search.dfs(0, 0, None, remaining_work, lower);
    }
    Ok(search.best)
}

fn work_per_type(dag: &Dag, type_of: &[usize], types: usize) -> Vec<u64> {
    let mut work = vec![0; types];
    for v in 0..dag.len() {
        work[type_of[v]] += dag.duration(v);
    }
    work
}

struct Search<'a> {
    dag: &'a Dag,
    crit: Vec<u64>,
    type_of: Vec<usize>,
    caps: Vec<u32>,
    usage: Vec<Vec<u32>>,
    starts: Vec<Option<u64>>,
    best: u64,
}

impl Search<'_> {
    fn fits(&self, v: usize, at: u64) -> bool {
        let row = &self.usage[self.type_of[v]];
        let cap = self.caps[self.type_of[v]];
        (at..at + self.dag.duration(v)).all(|c| row.get(c as usize).is_none_or(|&u| u < cap))
    }

    fn dfs(&mut self, placed: usize, span: u64, last: Option<(u64, usize)>, work: Vec<u64>, lower: u64) {
        let n = self.dag.len();
        if placed == n {
            self.best = self.best.min(span);
            return;
        }
        // earliest precedence start of every unplaced node, propagated in topo order
        let mut est = vec![0u64; n];
        for &v in self.dag.topo_order() {
            if let Some(s) = self.starts[v] {
                est[v] = s;
                continue;
            }
            let floor = last.map_or(0, |(s, _)| s);
            est[v] = self
                .dag
                .preds(v)
                .iter()
                .map(|&u| est[u] + self.dag.duration(u))
                .max()
                .unwrap_or(0)
                .max(floor);
        }
        let path_bound = (0..n)
            .filter(|&v| self.starts[v].is_none())
            .map(|v| est[v] + self.crit[v])
            .max()
            .unwrap_or(0);
        let floor = last.map_or(0, |(s, _)| s);
        let work_bound = work
            .iter()
            .zip(&self.caps)
            .map(|(&w, &r)| floor + w.div_ceil(u64::from(r)))
            .max()
            .unwrap_or(0);
        if span.max(path_bound).max(work_bound).max(lower) >= self.best {
            return;
        }

        for v in 0..n {
            if self.starts[v].is_some()
                || self.dag.preds(v).iter().any(|&u| self.starts[u].is_none())
            {
                continue;
            }
            // earliest fit from the precedence bound alone; a fit before the
            // previous start means this list is not in canonical order
            let mut at = self
                .dag
                .preds(v)
                .iter()
                .map(|&u| self.starts[u].unwrap_or(0) + self.dag.duration(u))
                .max()
                .unwrap_or(0);
            while !self.fits(v, at) {
                at += 1;
            }
            if let Some((s, id)) = last {
                if at < s || (at == s && v < id) {
                    continue;
                }
            }
            let finish = at + self.dag.duration(v);
            if finish.max(at + self.crit[v]) >= self.best {
                continue;
            }
            let t = self.type_of[v];
            for c in at..finish {
                self.usage[t][c as usize] += 1;
            }
            self.starts[v] = Some(at);
            let mut rest = work.clone();
            rest[t] -= self.dag.duration(v);
            self.dfs(placed + 1, span.max(finish), Some((at, v)), rest, lower);
            self.starts[v] = None;
            for c in at..finish {
                self.usage[t][c as usize] -= 1;
            }
            if self.best <= lower {
                return;
            }
        }
    }
}
