//! Seeded synthetic DAG families.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `layers` layers of `width` nodes; edges only between consecutive
    /// layers, plus occasional edges skipping one layer.
    Layered,
    /// A single chain of `layers` nodes.
    Chain,
    /// `layers` fork/join stages of `width` parallel nodes each.
    ForkJoin,
    /// `layers x width` grid, node (l, i) feeding (l+1, i) and (l+1, i+1 mod width).
    DiamondMesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub family: Family,
    pub layers: usize,
    pub width: usize,
    pub edge_prob: f64,
    /// Op types with relative weights.
    pub types: Vec<(String, f64)>,
    /// Durations with relative weights.
    pub durations: Vec<(u32, f64)>,
    pub capacities: BTreeMap<String, u32>,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    /// A contention-heavy layered suite: layers much wider than the units
    /// available per type.
    fn default() -> Self {
        GeneratorSpec {
            family: Family::Layered,
            layers: 8,
            width: 10,
            edge_prob: 0.2,
            types: vec![("alu".into(), 0.5), ("mul".into(), 0.3), ("mem".into(), 0.2)],
            durations: vec![(1, 0.5), (2, 0.3), (3, 0.2)],
            capacities: [("alu", 2), ("mem", 1), ("mul", 1)]
                .into_iter()
                .map(|(t, r)| (t.to_string(), r))
                .collect(),
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::DegenerateSpec("zero layers".into()));
        }
        if self.width == 0 && self.family != Family::Chain {
            return Err(Error::DegenerateSpec("zero width".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::DegenerateSpec(format!("edge probability {} outside [0, 1]", self.edge_prob)));
        }
        if self.types.is_empty() || self.durations.is_empty() {
            return Err(Error::DegenerateSpec("empty type or duration distribution".into()));
        }
        if self.types.iter().map(|t| t.1).chain(self.durations.iter().map(|d| d.1)).any(|w| !(w >= 0.0 && w.is_finite()))
            || self.types.iter().all(|t| t.1 == 0.0)
            || self.durations.iter().all(|d| d.1 == 0.0)
        {
            return Err(Error::DegenerateSpec("distribution weights must be finite, non-negative, not all zero".into()));
        }
        if self.durations.iter().any(|d| d.0 == 0) {
            return Err(Error::DegenerateSpec("zero duration".into()));
        }
        for (t, _) in &self.types {
            match self.capacities.get(t) {
                None => return Err(Error::MissingCapacity(t.clone())),
                Some(0) => return Err(Error::ZeroCapacity(t.clone())),
                Some(_) => {}
            }
        }
        Ok(())
    }
}

struct Draw {
    types: WeightedIndex<f64>,
    durations: WeightedIndex<f64>,
}

impl Draw {
    fn node(&self, spec: &GeneratorSpec, rng: &mut ChaCha8Rng, id: usize) -> NodeRecord {
        NodeRecord {
            id,
            op_type: spec.types[self.types.sample(rng)].0.clone(),
            duration: spec.durations[self.durations.sample(rng)].0,
        }
    }
}

fn generate_one(spec: &GeneratorSpec, draw: &Draw, rng: &mut ChaCha8Rng) -> Result<Dag> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let (layers, width) = (spec.layers, spec.width);
    match spec.family {
        Family::Chain => {
            for i in 0..layers {
                nodes.push(draw.node(spec, rng, i));
                if i > 0 {
                    edges.push((i - 1, i));
                }
            }
        }
        Family::Layered => {
            let id = |l: usize, i: usize| l * width + i;
            for l in 0..layers {
                for i in 0..width {
                    nodes.push(draw.node(spec, rng, id(l, i)));
                    if l == 0 {
                        continue;
                    }
                    let mut any = false;
                    for j in 0..width {
                        if rng.gen_bool(spec.edge_prob) {
                            edges.push((id(l - 1, j), id(l, i)));
                            any = true;
                        }
                    }
                    if !any {
                        edges.push((id(l - 1, rng.gen_range(0..width)), id(l, i)));
                    }
                    if l >= 2 {
                        for j in 0..width {
                            if rng.gen_bool(spec.edge_prob / 4.0) {
                                edges.push((id(l - 2, j), id(l, i)));
                            }
                        }
                    }
                }
            }
        }
        Family::ForkJoin => {
            nodes.push(draw.node(spec, rng, 0));
            let mut fork = 0;
            for _ in 0..layers {
                let first = nodes.len();
                for i in 0..width {
                    nodes.push(draw.node(spec, rng, first + i));
                    edges.push((fork, first + i));
                }
                let join = nodes.len();
                nodes.push(draw.node(spec, rng, join));
                for i in 0..width {
                    edges.push((first + i, join));
                }
                fork = join;
            }
        }
        Family::DiamondMesh => {
            let id = |l: usize, i: usize| l * width + i;
            for l in 0..layers {
                for i in 0..width {
                    nodes.push(draw.node(spec, rng, id(l, i)));
                    if l > 0 {
                        edges.push((id(l - 1, i), id(l, i)));
                        if width > 1 {
                            edges.push((id(l - 1, (i + width - 1) % width), id(l, i)));
                        }
                    }
                }
            }
        }
    }
    let used: std::collections::BTreeSet<&str> = nodes.iter().map(|n| n.op_type.as_str()).collect();
    let capacities = spec
        .capacities
        .iter()
        .filter(|(t, _)| used.contains(t.as_str()))
        .map(|(t, &r)| (t.clone(), r))
        .collect();
    Dag::new(nodes, edges, capacities)
}

/// `count` graphs drawn from one seeded stream.
pub fn generate_suite(spec: &GeneratorSpec, count: usize) -> Result<Vec<Dag>> {
    spec.validate()?;
    let draw = Draw {
        types: WeightedIndex::new(spec.types.iter().map(|t| t.1))
            .map_err(|e| Error::DegenerateSpec(e.to_string()))?,
        durations: WeightedIndex::new(spec.durations.iter().map(|d| d.1))
            .map_err(|e| Error::DegenerateSpec(e.to_string()))?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..count).map(|_| generate_one(spec, &draw, &mut rng)).collect()
}

/// A seeded mix of every family with randomized shape parameters and
/// between 1 and 3 op types.
pub fn generate_mixed(seed: u64, count: usize, max_nodes: usize) -> Result<Vec<Dag>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families = [Family::Layered, Family::Chain, Family::ForkJoin, Family::DiamondMesh];
    let type_names = ["alu", "mul", "mem"];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let family = families[rng.gen_range(0..families.len())];
        let ntypes = rng.gen_range(1..=type_names.len());
        let spec = GeneratorSpec {
            family,
            layers: rng.gen_range(1..=8),
            width: rng.gen_range(1..=8),
            edge_prob: rng.gen_range(0.1..0.6),
            types: type_names[..ntypes].iter().map(|t| (t.to_string(), rng.gen_range(0.2..1.0))).collect(),
            durations: vec![(1, 0.6), (2, 0.25), (3, 0.1), (5, 0.05)],
            capacities: type_names[..ntypes]
                .iter()
                .map(|t| (t.to_string(), rng.gen_range(1..=3)))
                .collect(),
            seed: rng.gen(),
        };
        let g = generate_suite(&spec, 1)?.remove(0);
        if g.len() <= max_nodes {
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_layer_is_independent() {
        let spec = GeneratorSpec { layers: 1, width: 4, ..Default::default() };
        let g = &generate_suite(&spec, 1).unwrap()[0];
        assert_eq!(g.len(), 4);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn deterministic() {
        let spec = GeneratorSpec { seed: 11, ..Default::default() };
        let a: Vec<String> = generate_suite(&spec, 5).unwrap().iter().map(Dag::to_json).collect();
        let b: Vec<String> = generate_suite(&spec, 5).unwrap().iter().map(Dag::to_json).collect();
        assert_eq!(a, b);
        let other = GeneratorSpec { seed: 12, ..Default::default() };
        let c: Vec<String> = generate_suite(&other, 5).unwrap().iter().map(Dag::to_json).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn chain_family() {
        let spec = GeneratorSpec { family: Family::Chain, layers: 5, ..Default::default() };
        let g = &generate_suite(&spec, 1).unwrap()[0];
        assert_eq!(g.len(), 5);
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn fork_join_and_mesh_shapes() {
        let spec = GeneratorSpec { family: Family::ForkJoin, layers: 2, width: 3, ..Default::default() };
        let g = &generate_suite(&spec, 1).unwrap()[0];
        assert_eq!(g.len(), 9);
        assert_eq!(g.succs(0).len(), 3);
        let spec = GeneratorSpec { family: Family::DiamondMesh, layers: 3, width: 4, ..Default::default() };
        let g = &generate_suite(&spec, 1).unwrap()[0];
        assert_eq!(g.len(), 12);
        assert_eq!(g.edges().len(), 16);
    }

    #[test]
    fn degenerate_specs() {
        let zero = GeneratorSpec { layers: 0, ..Default::default() };
        assert!(matches!(generate_suite(&zero, 1), Err(Error::DegenerateSpec(_))));
        let zero = GeneratorSpec { width: 0, ..Default::default() };
        assert!(matches!(generate_suite(&zero, 1), Err(Error::DegenerateSpec(_))));
        let mut missing = GeneratorSpec::default();
        missing.capacities.remove("mul");
        assert!(matches!(generate_suite(&missing, 1), Err(Error::MissingCapacity(_))));
    }

    #[test]
    fn mixed_respects_size_cap() {
        let gs = generate_mixed(3, 40, 9).unwrap();
        assert_eq!(gs.len(), 40);
        assert!(gs.iter().all(|g| g.len() <= 9));
    }
}
