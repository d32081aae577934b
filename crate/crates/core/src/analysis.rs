//! Deterministic structural analyses over a [`Dag`].
//!
//! All quantities are in cycles and assume unlimited resources:
//!
//! * `level(v)`: ASAP start, the longest duration-weighted chain of
//!   predecessors.
//! * `crit(v)`: longest duration-weighted path from `v` to any sink,
//!   counting `v` itself.
//! * `slack(v) = L_cp - level(v) - crit(v)` where `L_cp` is the length of
//!   the critical path.
//! * `reconv(v)`: number of unordered child pairs that share a descendant
//!   (reachability is reflexive).
//! * `pressure(t) = work(t) / (R_t * L_cp)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::Dag;
use crate::scalar::Real;

pub fn compute_levels(dag: &Dag) -> Vec<u64> {
    let mut level = vec![0u64; dag.len()];
    for &v in dag.topo_order() {
        level[v] = dag
            .preds(v)
            .iter()
            .map(|&u| level[u] + dag.duration(u))
            .max()
            .unwrap_or(0);
    }
    level
}

pub fn compute_crit(dag: &Dag) -> Vec<u64> {
    let mut crit = vec![0u64; dag.len()];
    for &v in dag.topo_order().iter().rev() {
        let tail = dag.succs(v).iter().map(|&w| crit[w]).max().unwrap_or(0);
        crit[v] = dag.duration(v) + tail;
    }
    crit
}

/// Critical path length: `max_v level(v) + crit(v)`, zero for the empty graph.
pub fn critical_path_length(levels: &[u64], crit: &[u64]) -> u64 {
    levels
        .iter()
        .zip(crit)
        .map(|(l, c)| l + c)
        .max()
        .unwrap_or(0)
}

pub fn compute_slack(levels: &[u64], crit: &[u64]) -> Vec<u64> {
    let l_cp = critical_path_length(levels, crit);
    levels.iter().zip(crit).map(|(l, c)| l_cp - l - c).collect()
}

/// Reflexive-transitive reachability as one bitset row per node.
#[derive(Debug, Clone)]
pub struct Reachability {
    words: usize,
    bits: Vec<u64>,
}

impl Reachability {
    pub fn new(dag: &Dag) -> Self {
        let n = dag.len();
        let words = n.div_ceil(64).max(1);
        let mut bits = vec![0u64; n * words];
        for &v in dag.topo_order().iter().rev() {
            bits[v * words + v / 64] |= 1 << (v % 64);
            for &w in dag.succs(v) {
                for k in 0..words {
                    let x = bits[w * words + k];
                    bits[v * words + k] |= x;
                }
            }
        }
        Reachability { words, bits }
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.bits[v * self.words..(v + 1) * self.words]
    }

    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.row(from)[to / 64] >> (to % 64) & 1 == 1
    }

    /// Whether some node is reachable from both `a` and `b`.
    pub fn share_descendant(&self, a: usize, b: usize) -> bool {
        self.row(a).iter().zip(self.row(b)).any(|(x, y)| x & y != 0)
    }
}

pub fn compute_reconv(dag: &Dag) -> Vec<u64> {
    let reach = Reachability::new(dag);
    compute_reconv_with(dag, &reach)
}

pub fn compute_reconv_with(dag: &Dag, reach: &Reachability) -> Vec<u64> {
    (0..dag.len())
        .map(|v| {
            let kids = dag.succs(v);
            let mut count = 0;
            for (i, &u) in kids.iter().enumerate() {
                for &w in &kids[i + 1..] {
                    if reach.share_descendant(u, w) {
                        count += 1;
                    }
                }
            }
            count
        })
        .collect()
}

/// Work-over-capacity ratio for one op type, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Pressure {
    /// Total cycles of work of this type.
    pub work: u64,
    /// `R_t * L_cp`.
    pub span: u64,
}

impl Pressure {
    pub fn value<T: Real>(&self) -> T {
        if self.span == 0 {
            T::zero()
        } else {
            T::of_u64(self.work) / T::of_u64(self.span)
        }
    }
}

/// Pressure for every type with a capacity entry.
pub fn compute_pressure(dag: &Dag, l_cp: u64) -> BTreeMap<String, Pressure> {
    let mut work: BTreeMap<&str, u64> = BTreeMap::new();
    for v in 0..dag.len() {
        *work.entry(dag.op_type(v)).or_default() += dag.duration(v);
    }
    dag.capacities()
        .iter()
        .map(|(t, &r)| {
            let w = work.get(t.as_str()).copied().unwrap_or(0);
            let span = if w == 0 { 0 } else { u64::from(r) * l_cp };
            (t.clone(), Pressure { work: w, span })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeStats {
    pub level: u64,
    pub crit: u64,
    pub slack: u64,
    pub fanout: u64,
    pub fanin: u64,
    pub reconv: u64,
    pub duration: u64,
}

/// Every per-node and per-type statistic of a graph, computed once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: Vec<NodeStats>,
    pub critical_path: u64,
    pub pressure: BTreeMap<String, Pressure>,
    #[serde(skip)]
    node_pressure: Vec<Pressure>,
}

impl GraphStats {
    pub fn compute(dag: &Dag) -> Self {
        let levels = compute_levels(dag);
        let crit = compute_crit(dag);
        let l_cp = critical_path_length(&levels, &crit);
        let slack = compute_slack(&levels, &crit);
        let reconv = compute_reconv(dag);
        let pressure = compute_pressure(dag, l_cp);
        let nodes = (0..dag.len())
            .map(|v| NodeStats {
                level: levels[v],
                crit: crit[v],
                slack: slack[v],
                fanout: dag.succs(v).len() as u64,
                fanin: dag.preds(v).len() as u64,
                reconv: reconv[v],
                duration: dag.duration(v),
            })
            .collect();
        let node_pressure = (0..dag.len()).map(|v| pressure[dag.op_type(v)]).collect();
        GraphStats {
            nodes,
            critical_path: l_cp,
            pressure,
            node_pressure,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Pressure of the node's own op type.
    pub fn node_pressure(&self, v: usize) -> Pressure {
        self.node_pressure[v]
    }

    /// `max(L_cp, max_t ceil(work_t / R_t))`, a lower bound on any
    /// feasible makespan.
    pub fn makespan_lower_bound(&self, dag: &Dag) -> u64 {
        let work_bound = self
            .pressure
            .iter()
            .map(|(t, p)| p.work.div_ceil(u64::from(dag.capacity(t))))
            .max()
            .unwrap_or(0);
        self.critical_path.max(work_bound)
    }
}
