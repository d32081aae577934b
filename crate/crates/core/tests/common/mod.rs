//! Brute-force reference implementations shared by the integration tests.
//! Deliberately naive: explicit path enumeration, full sorts, per-cycle
//! occupancy tables.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kernsched::dsl::{Feature, PriorityExpr};
use kernsched::features::cosine_sim;
use kernsched::kernels::{Kernel, TemplateFamily, TemplateSpec};
use kernsched::scheduler::Schedule;
use kernsched::{Dag, NodeRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Longest duration-weighted path from `v` to any sink, by enumerating
/// every path.
pub fn crit(dag: &Dag, v: usize) -> u64 {
    fn walk(dag: &Dag, v: usize, acc: u64, best: &mut u64) {
        let acc = acc + dag.duration(v);
        if dag.succs(v).is_empty() {
            *best = (*best).max(acc);
        }
        for &w in dag.succs(v) {
            walk(dag, w, acc, best);
        }
    }
    let mut best = 0;
    walk(dag, v, 0, &mut best);
    best
}

/// Nodes reachable from `v`, including `v`.
pub fn descendants(dag: &Dag, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        if seen.insert(x) {
            stack.extend(dag.succs(x).iter().copied());
        }
    }
    seen
}

/// Child pairs `{u, w}` of `v` for which some node `x` is reachable from
/// both, checked over every candidate `x`.
pub fn reconv(dag: &Dag, v: usize) -> u64 {
    let kids = dag.succs(v);
    let mut count = 0;
    for i in 0..kids.len() {
        for j in i + 1..kids.len() {
            let (a, b) = (descendants(dag, kids[i]), descendants(dag, kids[j]));
            if (0..dag.len()).any(|x| a.contains(&x) && b.contains(&x)) {
                count += 1;
            }
        }
    }
    count
}

/// Independent feasibility check over an explicit cycle-by-type table.
pub fn check_schedule(dag: &Dag, s: &Schedule) -> Result<(), String> {
    if s.starts.len() != dag.len() {
        return Err("wrong number of starts".into());
    }
    for &(u, v) in dag.edges() {
        if s.starts[v] < s.starts[u] + dag.duration(u) {
            return Err(format!("edge {u}->{v} violated"));
        }
    }
    let mut used: BTreeMap<(&str, u64), u32> = BTreeMap::new();
    for v in 0..dag.len() {
        for c in s.starts[v]..s.starts[v] + dag.duration(v) {
            *used.entry((dag.op_type(v), c)).or_default() += 1;
        }
    }
    for ((t, c), n) in used {
        if n > dag.capacity(t) {
            return Err(format!("type {t} over capacity at cycle {c}"));
        }
    }
    let end = (0..dag.len()).map(|v| s.starts[v] + dag.duration(v)).max().unwrap_or(0);
    if end != s.makespan {
        return Err(format!("makespan {} but last finish {end}", s.makespan));
    }
    Ok(())
}

/// Lower bound from the critical path and per-type work over capacity,
/// recomputed from scratch.
pub fn lower_bound(dag: &Dag) -> u64 {
    let cp = (0..dag.len())
        .filter(|&v| dag.preds(v).is_empty())
        .map(|v| crit(dag, v))
        .max()
        .unwrap_or(0);
    let mut work: BTreeMap<&str, u64> = BTreeMap::new();
    for v in 0..dag.len() {
        *work.entry(dag.op_type(v)).or_default() += dag.duration(v);
    }
    let wb = work
        .iter()
        .map(|(t, w)| w.div_ceil(u64::from(dag.capacity(t))))
        .max()
        .unwrap_or(0);
    cp.max(wb)
}

/// Top-m kernel ids by full sort on (similarity desc, id asc).
pub fn topm_by_sort(query: &[f64], kernels: &[Kernel<f64>], m: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = kernels
        .iter()
        .map(|k| (cosine_sim(query, &k.signature.values).unwrap(), k.id))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    all.into_iter().take(m).map(|x| x.1).collect()
}

/// The six heuristics every feasibility check runs: level baseline,
/// `crit + fanout - level`, both chain and reconvergence templates at
/// defaults, fanout only, and one seeded random-coefficient expression.
pub fn battery(seed: u64) -> Vec<(&'static str, PriorityExpr<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = PriorityExpr::from_terms(Feature::ALL.iter().map(|&f| (rng.gen_range(-3.0..3.0), f))).unwrap();
    vec![
        ("baseline", PriorityExpr::parse("1*level").unwrap()),
        ("crit+fanout-level", PriorityExpr::parse("1*crit + 1*fanout - 1*level").unwrap()),
        ("reconvergent_A", TemplateSpec::new(TemplateFamily::ReconvergentA).instantiate_defaults().unwrap()),
        ("deep_chain_B", TemplateSpec::new(TemplateFamily::DeepChainB).instantiate_defaults().unwrap()),
        ("fanout", PriorityExpr::parse("1*fanout").unwrap()),
        ("random", random),
    ]
}

/// Same graph with every capacity raised to the node count.
pub fn ample(dag: &Dag) -> Dag {
    let n = dag.len().max(1) as u32;
    let caps = dag.capacities().keys().map(|t| (t.clone(), n)).collect();
    Dag::new(dag.nodes().to_vec(), dag.edges().iter().copied(), caps).unwrap()
}

/// Random DAG over `n` nodes with forward edges only.
pub fn random_dag(rng: &mut impl Rng, n: usize, p: f64) -> Dag {
    let types = ["alu", "mul"];
    let nodes = (0..n)
        .map(|id| NodeRecord {
            id,
            op_type: types[rng.gen_range(0..2)].to_string(),
            duration: rng.gen_range(1..=3),
        })
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let caps = types.iter().map(|t| (t.to_string(), rng.gen_range(1..=2))).collect();
    Dag::new(nodes, edges, caps).unwrap()
}
