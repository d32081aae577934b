//! Operation DAG: nodes with op types and durations, precedence edges and
//! per-type resource capacities.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: usize,
    pub op_type: String,
    /// Cycles the operation occupies its functional unit; always >= 1.
    pub duration: u32,
}

/// A validated, immutable operation graph.
///
/// Node ids are dense `0..len`, edges are deduplicated and sorted, and a
/// topological order (smallest ready id first) is cached at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<NodeRecord>,
    edges: Vec<(usize, usize)>,
    capacities: BTreeMap<String, u32>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

/// Wire form of a graph document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<[usize; 2]>,
    pub capacities: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: usize,
    #[serde(rename = "type")]
    pub op_type: String,
    pub duration: u32,
}

impl Dag {
    pub fn new(
        mut nodes: Vec<NodeRecord>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        capacities: BTreeMap<String, u32>,
    ) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateId(pair[0].id));
            }
        }
        let n = nodes.len();
        if let Some(last) = nodes.last() {
            if last.id != n - 1 {
                return Err(Error::NonDenseIds {
                    expected: n,
                    found: last.id,
                });
            }
        }
        for node in &nodes {
            if node.duration == 0 {
                return Err(Error::ZeroDuration(node.id));
            }
            match capacities.get(&node.op_type) {
                None => return Err(Error::MissingCapacity(node.op_type.clone())),
                Some(0) => return Err(Error::ZeroCapacity(node.op_type.clone())),
                Some(_) => {}
            }
        }
        if let Some((t, _)) = capacities.iter().find(|(_, &r)| r == 0) {
            return Err(Error::ZeroCapacity(t.clone()));
        }

        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::DanglingEdge(u, v));
            }
            if u == v {
                return Err(Error::Cycle(vec![u]));
            }
            preds[v].push(u);
            succs[u].push(v);
        }

        let topo = topological_order(&preds, &succs)?;
        Ok(Dag {
            nodes,
            edges: edges.into_iter().collect(),
            capacities,
            preds,
            succs,
            topo,
        })
    }

    pub fn from_doc(doc: GraphDoc) -> Result<Self> {
        let nodes = doc
            .nodes
            .into_iter()
            .map(|n| NodeRecord {
                id: n.id,
                op_type: n.op_type,
                duration: n.duration,
            })
            .collect();
        Dag::new(nodes, doc.edges.into_iter().map(|[u, v]| (u, v)), doc.capacities)
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    op_type: n.op_type.clone(),
                    duration: n.duration,
                })
                .collect(),
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
            capacities: self.capacities.clone(),
        }
    }

    /// Parses and validates a graph JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        Dag::from_doc(serde_json::from_str(text)?)
    }

    /// Canonical single-line JSON followed by a newline. Two equal graphs
    /// always serialize to the same bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.to_doc()).expect("graph doc serializes");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> &NodeRecord {
        &self.nodes[v]
    }

    pub fn duration(&self, v: usize) -> u64 {
        u64::from(self.nodes[v].duration)
    }

    pub fn op_type(&self, v: usize) -> &str {
        &self.nodes[v].op_type
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn capacities(&self) -> &BTreeMap<String, u32> {
        &self.capacities
    }

    pub fn capacity(&self, op_type: &str) -> u32 {
        self.capacities.get(op_type).copied().unwrap_or(0)
    }

    pub fn preds(&self, v: usize) -> &[usize] {
        &self.preds[v]
    }

    pub fn succs(&self, v: usize) -> &[usize] {
        &self.succs[v]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Op types that actually occur on nodes, sorted.
    pub fn used_types(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.op_type.as_str()).collect()
    }

    /// The subgraph induced by `keep`, relabelled densely in ascending
    /// original-id order. Capacities are carried over for the types that
    /// remain.
    pub fn induced(&self, keep: &[usize]) -> Dag {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut index = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let nodes: Vec<NodeRecord> = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| NodeRecord {
                id: new,
                ..self.nodes[old].clone()
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| index[u] != usize::MAX && index[v] != usize::MAX)
            .map(|&(u, v)| (index[u], index[v]));
        let used: BTreeSet<&str> = nodes.iter().map(|n| n.op_type.as_str()).collect();
        let capacities = self
            .capacities
            .iter()
            .filter(|(t, _)| used.contains(t.as_str()))
            .map(|(t, &r)| (t.clone(), r))
            .collect();
        Dag::new(nodes, edges, capacities).expect("induced subgraph of a valid DAG is valid")
    }

    /// Renames node `v` to `perm[v]`. `perm` must be a permutation of
    /// `0..len`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Dag> {
        if perm.len() != self.len() {
            return Err(Error::LengthMismatch(perm.len(), self.len()));
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: perm[n.id],
                ..n.clone()
            })
            .collect();
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        Dag::new(nodes, edges, self.capacities.clone())
    }
}

fn topological_order(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = preds.len();
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(v);
        for &w in &succs[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                heap.push(Reverse(w));
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).filter(|&v| indeg[v] > 0).collect();
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    const CHAIN3: &str = r#"{"nodes":[{"id":0,"type":"alu","duration":1},{"id":1,"type":"alu","duration":1},{"id":2,"type":"alu","duration":1}],"edges":[[0,1],[1,2]],"capacities":{"alu":1}}"#;

    #[test]
    fn loads_chain() {
        let g = Dag::from_json(CHAIN3).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.topo_order(), &[0, 1, 2]);
        assert_eq!(g.to_json().trim_end(), CHAIN3);
    }

    #[test]
    fn rejects_cycle() {
        let text = CHAIN3.replace("[[0,1],[1,2]]", "[[0,1],[1,0],[1,2]]");
        assert!(matches!(Dag::from_json(&text), Err(Error::Cycle(_))));
    }

    #[test]
    fn rejects_dangling_edge() {
        let text = CHAIN3.replace("[[0,1],[1,2]]", "[[0,1],[1,99]]");
        assert!(matches!(Dag::from_json(&text), Err(Error::DanglingEdge(1, 99))));
    }

    #[test]
    fn rejects_missing_capacity_and_duplicates() {
        let text = CHAIN3.replace(r#"{"alu":1}"#, r#"{"mul":1}"#);
        assert!(matches!(Dag::from_json(&text), Err(Error::MissingCapacity(t)) if t == "alu"));
        let text = CHAIN3.replace(r#""id":2"#, r#""id":1"#);
        assert!(matches!(Dag::from_json(&text), Err(Error::DuplicateId(1))));
        let text = CHAIN3.replace(r#""id":2"#, r#""id":5"#);
        assert!(matches!(Dag::from_json(&text), Err(Error::NonDenseIds { .. })));
    }

    #[test]
    fn writer_is_canonical() {
        let nodes = vec![
            NodeRecord { id: 1, op_type: "mul".into(), duration: 2 },
            NodeRecord { id: 0, op_type: "alu".into(), duration: 1 },
        ];
        let g = Dag::new(nodes, [(0, 1), (0, 1)], caps(&[("mul", 1), ("alu", 2)])).unwrap();
        assert_eq!(
            g.to_json(),
            "{\"nodes\":[{\"id\":0,\"type\":\"alu\",\"duration\":1},{\"id\":1,\"type\":\"mul\",\"duration\":2}],\"edges\":[[0,1]],\"capacities\":{\"alu\":2,\"mul\":1}}\n"
        );
    }

    #[test]
    fn induced_subgraph_relabels() {
        let g = diamond(1);
        let sub = g.induced(&[3, 1, 0]);
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn relabel_preserves_shape() {
        let g = diamond(1);
        let h = g.relabel(&[3, 2, 1, 0]).unwrap();
        assert_eq!(h.succs(3), &[1, 2]);
        assert_eq!(h.preds(0), &[1, 2]);
    }
}
