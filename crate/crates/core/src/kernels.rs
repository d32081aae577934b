//! Motif mining, signature clustering and the kernel library.
//!
//! Motifs are small regions of training graphs: k-hop neighborhoods,
//! neighborhoods of high-degree nodes, reconvergent fanout regions and deep
//! linear chains. Each motif is embedded with the whole-graph layout on its
//! induced subgraph, z-scored with the training normalizer, and clustered
//! per category. A cluster centroid together with a heuristic template is a
//! kernel.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::GraphStats;
use crate::dsl::{Feature, PriorityExpr};
use crate::error::{Error, Result};
use crate::features::{cosine_sim, Embedding, Normalizer, TypeVocabulary, LAYOUT_VERSION};
use crate::graph::Dag;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifCategory {
    Khop,
    HighCentrality,
    Reconvergent,
    Chain,
    /// Whole training graph; only used by the no-motif ablation.
    WholeGraph,
}

impl MotifCategory {
    pub fn name(self) -> &'static str {
        match self {
            MotifCategory::Khop => "khop",
            MotifCategory::HighCentrality => "high_centrality",
            MotifCategory::Reconvergent => "reconvergent",
            MotifCategory::Chain => "chain",
            MotifCategory::WholeGraph => "whole_graph",
        }
    }

    pub fn family(self) -> TemplateFamily {
        match self {
            MotifCategory::Reconvergent => TemplateFamily::ReconvergentA,
            MotifCategory::Chain => TemplateFamily::DeepChainB,
            MotifCategory::HighCentrality | MotifCategory::WholeGraph => TemplateFamily::FanoutAware,
            MotifCategory::Khop => TemplateFamily::ResourceAware,
        }
    }
}

impl fmt::Display for MotifCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateFamily {
    #[serde(rename = "reconvergent_A")]
    ReconvergentA,
    #[serde(rename = "deep_chain_B")]
    DeepChainB,
    #[serde(rename = "fanout_aware")]
    FanoutAware,
    #[serde(rename = "resource_aware")]
    ResourceAware,
}

/// One tunable weight of a template: `sign * weight * feature`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSlot {
    pub name: &'static str,
    pub feature: Feature,
    pub sign: f64,
}

const fn slot(name: &'static str, feature: Feature, sign: f64) -> WeightSlot {
    WeightSlot { name, feature, sign }
}

pub const DEFAULT_WEIGHT: f64 = 1.0;
pub const DEFAULT_RANGE: (f64, f64) = (0.0, 4.0);

impl TemplateFamily {
    pub const ALL: [TemplateFamily; 4] = [
        TemplateFamily::ReconvergentA,
        TemplateFamily::DeepChainB,
        TemplateFamily::FanoutAware,
        TemplateFamily::ResourceAware,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateFamily::ReconvergentA => "reconvergent_A",
            TemplateFamily::DeepChainB => "deep_chain_B",
            TemplateFamily::FanoutAware => "fanout_aware",
            TemplateFamily::ResourceAware => "resource_aware",
        }
    }

    pub fn slots(self) -> &'static [WeightSlot] {
        const A: [WeightSlot; 3] = [
            slot("alpha1", Feature::Crit, 1.0),
            slot("alpha2", Feature::Reconv, 1.0),
            slot("alpha3", Feature::Fanout, 1.0),
        ];
        const B: [WeightSlot; 2] = [slot("beta1", Feature::Crit, 1.0), slot("beta2", Feature::Slack, -1.0)];
        const FANOUT: [WeightSlot; 2] = [slot("w1", Feature::Fanout, 1.0), slot("w2", Feature::Crit, 1.0)];
        const RESOURCE: [WeightSlot; 2] = [slot("w1", Feature::Crit, 1.0), slot("w2", Feature::Pressure, 1.0)];
        match self {
            TemplateFamily::ReconvergentA => &A,
            TemplateFamily::DeepChainB => &B,
            TemplateFamily::FanoutAware => &FANOUT,
            TemplateFamily::ResourceAware => &RESOURCE,
        }
    }

    /// Human-readable form, e.g. `alpha1*crit + alpha2*reconv + alpha3*fanout`.
    pub fn formula(self) -> String {
        let mut out = String::new();
        for (i, s) in self.slots().iter().enumerate() {
            match (i, s.sign < 0.0) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&format!("{}*{}", s.name, s.feature));
        }
        out
    }
}

impl FromStr for TemplateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

impl fmt::Display for TemplateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A template family with default weights and allowed weight ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub family: TemplateFamily,
    pub defaults: BTreeMap<String, f64>,
    pub ranges: BTreeMap<String, (f64, f64)>,
}

impl TemplateSpec {
    pub fn new(family: TemplateFamily) -> Self {
        TemplateSpec {
            family,
            defaults: family
                .slots()
                .iter()
                .map(|s| (s.name.to_string(), DEFAULT_WEIGHT))
                .collect(),
            ranges: family
                .slots()
                .iter()
                .map(|s| (s.name.to_string(), DEFAULT_RANGE))
                .collect(),
        }
    }

    pub fn range(&self, name: &str) -> (f64, f64) {
        self.ranges.get(name).copied().unwrap_or(DEFAULT_RANGE)
    }

    pub fn default_weights(&self) -> Vec<f64> {
        self.family
            .slots()
            .iter()
            .map(|s| self.defaults.get(s.name).copied().unwrap_or(DEFAULT_WEIGHT))
            .collect()
    }

    /// Checks that every declared weight belongs to the family and that
    /// defaults lie within their ranges.
    pub fn validate(&self) -> Result<()> {
        let known = |name: &str| self.family.slots().iter().any(|s| s.name == name);
        for name in self.defaults.keys().chain(self.ranges.keys()) {
            if !known(name) {
                return Err(Error::UnknownWeight {
                    family: self.family.name().into(),
                    name: name.clone(),
                });
            }
        }
        self.check_weights(&self.default_weights())
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        let slots = self.family.slots();
        if weights.len() != slots.len() {
            return Err(Error::LengthMismatch(slots.len(), weights.len()));
        }
        for (s, &w) in slots.iter().zip(weights) {
            let (lo, hi) = self.range(s.name);
            if !(lo..=hi).contains(&w) {
                return Err(Error::WeightRange {
                    name: s.name.into(),
                    value: w,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Instantiates the template with weights given in slot order.
    pub fn instantiate<T: Real>(&self, weights: &[f64]) -> Result<PriorityExpr<T>> {
        self.check_weights(weights)?;
        PriorityExpr::from_terms(
            self.family
                .slots()
                .iter()
                .zip(weights)
                .map(|(s, &w)| (T::of(s.sign * w), s.feature)),
        )
    }

    pub fn instantiate_defaults<T: Real>(&self) -> Result<PriorityExpr<T>> {
        self.instantiate(&self.default_weights())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Motif<T: Real = f64> {
    pub category: MotifCategory,
    /// Node ids in the source graph, ascending.
    pub nodes: Vec<usize>,
    pub anchor: usize,
    pub embedding: Embedding<T>,
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Kernel<T: Real = f64> {
    pub id: usize,
    pub category: MotifCategory,
    pub signature: Embedding<T>,
    pub template: TemplateSpec,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub hops: usize,
    pub chain_min_len: usize,
    /// Fraction of nodes (rounded up) treated as high-centrality.
    pub centrality_fraction: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            hops: 2,
            chain_min_len: 4,
            centrality_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub threshold: f64,
    pub budget: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            threshold: 0.95,
            budget: 50,
        }
    }
}

fn bfs(dag: &Dag, start: usize, hops: usize, forward: bool) -> Vec<(usize, usize)> {
    let mut dist = BTreeMap::new();
    dist.insert(start, 0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == hops {
            continue;
        }
        let next = if forward { dag.succs(v) } else { dag.preds(v) };
        for &w in next {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist.into_iter().collect()
}

/// Region selections of every motif category, before embedding.
pub fn motif_regions(dag: &Dag, stats: &GraphStats, config: &MiningConfig) -> Vec<(MotifCategory, usize, Vec<usize>)> {
    let n = dag.len();
    let k = config.hops.max(1);
    let mut out = Vec::new();

    for v in 0..n {
        let mut nodes: Vec<usize> = bfs(dag, v, k, true)
            .into_iter()
            .chain(bfs(dag, v, k, false))
            .map(|(w, _)| w)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        out.push((MotifCategory::Khop, v, nodes));
    }

    let top = ((n as f64) * config.centrality_fraction).ceil() as usize;
    let mut by_degree: Vec<usize> = (0..n).filter(|&v| stats.nodes[v].fanin + stats.nodes[v].fanout > 0).collect();
    by_degree.sort_by_key(|&v| (std::cmp::Reverse(stats.nodes[v].fanin + stats.nodes[v].fanout), v));
    by_degree.truncate(top);
    by_degree.sort_unstable();
    for v in by_degree {
        let mut nodes: Vec<usize> = std::iter::once(v)
            .chain(dag.preds(v).iter().copied())
            .chain(dag.succs(v).iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        out.push((MotifCategory::HighCentrality, v, nodes));
    }

    let reach = crate::analysis::Reachability::new(dag);
    for v in (0..n).filter(|&v| stats.nodes[v].reconv > 0) {
        let near = bfs(dag, v, k, true);
        let kids = dag.succs(v);
        let shared: Vec<usize> = near
            .iter()
            .map(|&(x, _)| x)
            .filter(|&x| kids.iter().filter(|&&u| reach.reaches(u, x)).count() >= 2)
            .collect();
        // keep shortest-path intermediates so the region stays connected
        let nodes: Vec<usize> = near
            .iter()
            .map(|&(x, _)| x)
            .filter(|&x| x == v || kids.contains(&x) || shared.iter().any(|&s| reach.reaches(x, s)))
            .collect();
        out.push((MotifCategory::Reconvergent, v, nodes));
    }

    let linear = |v: usize| dag.preds(v).len() <= 1 && dag.succs(v).len() <= 1;
    for v in (0..n).filter(|&v| linear(v)) {
        if dag.preds(v).first().is_some_and(|&u| linear(u)) {
            continue;
        }
        let mut nodes = vec![v];
        let mut cur = v;
        while let Some(&w) = dag.succs(cur).first() {
            if !linear(w) {
                break;
            }
            nodes.push(w);
            cur = w;
        }
        if nodes.len() >= config.chain_min_len {
            nodes.sort_unstable();
            out.push((MotifCategory::Chain, v, nodes));
        }
    }

    out.sort_by_key(|(cat, anchor, _)| (*cat, *anchor));
    out
}

/// Mines motifs of `dag` and embeds each on its induced subgraph (raw,
/// not normalized). Order: category, then anchor id.
pub fn mine_motifs<T: Real>(
    dag: &Dag,
    stats: &GraphStats,
    source: usize,
    vocab: &TypeVocabulary,
    config: &MiningConfig,
) -> Result<Vec<Motif<T>>> {
    motif_regions(dag, stats, config)
        .into_iter()
        .map(|(category, anchor, nodes)| {
            let sub = dag.induced(&nodes);
            let embedding = vocab.embed(&sub, &GraphStats::compute(&sub))?;
            Ok(Motif {
                category,
                nodes,
                anchor,
                embedding,
                source,
            })
        })
        .collect()
}

struct Cluster<T: Real> {
    category: MotifCategory,
    sum: Vec<T>,
    centroid: Vec<T>,
    count: usize,
    order: usize,
}

/// Greedy leader clustering within each category, then budget enforcement.
///
/// Motifs are visited in the given order; each joins the first cluster of
/// its category whose centroid has similarity >= `threshold`, else opens a
/// new one. When more than `budget` clusters exist, the best-supported
/// cluster of every category is kept first and the rest of the budget goes
/// to the highest support overall (earlier clusters win ties). Kernel ids
/// follow (category, creation order).
pub fn cluster_motifs<T: Real>(motifs: &[Motif<T>], config: &ClusterConfig) -> Result<Vec<Kernel<T>>> {
    if motifs.is_empty() {
        return Err(Error::NoMotifs);
    }
    if !(config.threshold > 0.0 && config.threshold <= 1.0) {
        return Err(Error::Threshold(config.threshold));
    }
    let theta = T::of(config.threshold);
    let mut clusters: Vec<Cluster<T>> = Vec::new();
    let mut by_cat: BTreeMap<MotifCategory, Vec<usize>> = BTreeMap::new();
    for m in motifs {
        let members = by_cat.entry(m.category).or_default();
        let mut joined = false;
        for &c in members.iter() {
            if cosine_sim(&clusters[c].centroid, &m.embedding.values)? >= theta {
                let cl = &mut clusters[c];
                cl.count += 1;
                for (s, &x) in cl.sum.iter_mut().zip(&m.embedding.values) {
                    *s = *s + x;
                }
                let cnt = T::of_usize(cl.count);
                cl.centroid = cl.sum.iter().map(|&s| s / cnt).collect();
                joined = true;
                break;
            }
        }
        if !joined {
            members.push(clusters.len());
            clusters.push(Cluster {
                category: m.category,
                sum: m.embedding.values.clone(),
                centroid: m.embedding.values.clone(),
                count: 1,
                order: clusters.len(),
            });
        }
    }

    let mut keep: Vec<usize> = if clusters.len() <= config.budget {
        (0..clusters.len()).collect()
    } else {
        let mut ranked: Vec<usize> = (0..clusters.len()).collect();
        ranked.sort_by_key(|&c| (std::cmp::Reverse(clusters[c].count), c));
        let mut chosen: Vec<usize> = Vec::new();
        for members in by_cat.values() {
            if let Some(&best) = members.iter().min_by_key(|&&c| (std::cmp::Reverse(clusters[c].count), c)) {
                chosen.push(best);
            }
        }
        chosen.truncate(config.budget);
        for c in ranked {
            if chosen.len() >= config.budget {
                break;
            }
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        chosen
    };
    keep.sort_by_key(|&c| (clusters[c].category, clusters[c].order));

    Ok(keep
        .into_iter()
        .enumerate()
        .map(|(id, c)| {
            let cl = &clusters[c];
            Kernel {
                id,
                category: cl.category,
                signature: Embedding::new(cl.centroid.clone()),
                template: TemplateSpec::new(cl.category.family()),
                support: cl.count,
            }
        })
        .collect())
}

/// Kernels plus everything needed to embed and normalize a query graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct KernelLibrary<T: Real = f64> {
    pub layout: String,
    pub vocabulary: TypeVocabulary,
    pub normalizer: Normalizer<T>,
    pub kernels: Vec<Kernel<T>>,
}

impl<T: Real> KernelLibrary<T> {
    /// Mines every training graph, fits the normalizer on whole-graph
    /// embeddings, normalizes motif embeddings and clusters them.
    pub fn build(
        train: &[Dag],
        vocab: TypeVocabulary,
        mining: &MiningConfig,
        clustering: &ClusterConfig,
    ) -> Result<Self> {
        let per_graph: Vec<(Embedding<T>, Vec<Motif<T>>)> = train
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let stats = GraphStats::compute(g);
                let whole = vocab.embed(g, &stats)?;
                let motifs = mine_motifs(g, &stats, i, &vocab, mining)?;
                Ok((whole, motifs))
            })
            .collect::<Result<_>>()?;
        let wholes: Vec<Embedding<T>> = per_graph.iter().map(|(e, _)| e.clone()).collect();
        let normalizer = Normalizer::fit(&wholes)?;
        let mut motifs: Vec<Motif<T>> = Vec::new();
        for (_, ms) in per_graph {
            for mut m in ms {
                m.embedding = normalizer.apply(&m.embedding)?;
                motifs.push(m);
            }
        }
        // category-major, then source graph, then anchor
        motifs.sort_by_key(|m| (m.category, m.source, m.anchor));
        let kernels = cluster_motifs(&motifs, clustering)?;
        Ok(KernelLibrary {
            layout: LAYOUT_VERSION.to_string(),
            vocabulary: vocab,
            normalizer,
            kernels,
        })
    }

    /// Normalized embedding of a query graph, comparable with signatures.
    pub fn embed_query(&self, dag: &Dag, stats: &GraphStats) -> Result<Embedding<T>> {
        self.normalizer.apply(&self.vocabulary.embed(dag, stats)?)
    }

    pub fn kernel(&self, id: usize) -> Option<&Kernel<T>> {
        self.kernels.get(id).filter(|k| k.id == id).or_else(|| self.kernels.iter().find(|k| k.id == id))
    }

    pub fn validate(&self) -> Result<()> {
        if self.layout != LAYOUT_VERSION {
            return Err(Error::Layout {
                expected: LAYOUT_VERSION.into(),
                found: self.layout.clone(),
            });
        }
        let dim = self.vocabulary.dim();
        if self.normalizer.dim() != dim {
            return Err(Error::LengthMismatch(dim, self.normalizer.dim()));
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if k.signature.len() != dim {
                return Err(Error::LengthMismatch(dim, k.signature.len()));
            }
            if k.id != i {
                return Err(Error::Invariant(format!("kernel ids must be 0..n in order, found {} at {i}", k.id)));
            }
            if k.support == 0 {
                return Err(Error::Invariant(format!("kernel {} has zero support", k.id)));
            }
            k.template.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lib: Self = serde_json::from_str(text)?;
        lib.validate()?;
        Ok(lib)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("library serializes");
        s.push('\n');
        s
    }
}
