//! Whole-graph structural embeddings, z-score normalization, cosine
//! similarity and top-m kernel retrieval.
//!
//! Embedding layout `v1`, for a type vocabulary of size `k`:
//!
//! | offset      | width | content                                             |
//! |-------------|-------|-----------------------------------------------------|
//! | 0           | 3     | `L_cp / |V|`, mean and std of `crit / L_cp`         |
//! | 3           | 8     | fanout histogram, bins 0,1,2,3,4-5,6-8,9-16,17+     |
//! | 11          | 8     | histogram of `level / L_cp` in 8 equal bins         |
//! | 19          | k     | op-type histogram, vocabulary order                 |
//! | 19 + k      | k     | resource pressure per type, vocabulary order        |
//!
//! Histograms hold node fractions and sum to one (all zero for the empty
//! graph). The std in the crit summary is the population std over nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::analysis::GraphStats;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::kernels::Kernel;
use crate::scalar::Real;

pub const LAYOUT_VERSION: &str = "v1";

const CRIT_DIMS: usize = 3;
const FANOUT_BINS: usize = 8;
const LEVEL_BINS: usize = 8;

fn fanout_bin(fanout: u64) -> usize {
    match fanout {
        0..=3 => fanout as usize,
        4..=5 => 4,
        6..=8 => 5,
        9..=16 => 6,
        _ => 7,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
#[serde(transparent)]
pub struct Embedding<T: Real = f64> {
    pub values: Vec<T>,
}

impl<T: Real> Embedding<T> {
    pub fn new(values: Vec<T>) -> Self {
        Embedding { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `[L_cp / |V|, mean(crit / L_cp), std(crit / L_cp)]`.
    pub fn crit_summary(&self) -> &[T] {
        &self.values[..CRIT_DIMS.min(self.values.len())]
    }
}

/// Fixed op-type vocabulary that pins the embedding dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeVocabulary(Vec<String>);

impl TypeVocabulary {
    /// Sorted, deduplicated vocabulary.
    pub fn new<S: Into<String>>(types: impl IntoIterator<Item = S>) -> Self {
        let mut v: Vec<String> = types.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        TypeVocabulary(v)
    }

    /// Union of the op types used by `graphs`.
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a Dag>) -> Self {
        TypeVocabulary::new(
            graphs
                .into_iter()
                .flat_map(|g| g.used_types().into_iter().map(str::to_string).collect::<Vec<_>>()),
        )
    }

    pub fn types(&self) -> &[String] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        CRIT_DIMS + FANOUT_BINS + LEVEL_BINS + 2 * self.0.len()
    }

    fn index(&self, t: &str) -> Result<usize> {
        self.0
            .binary_search_by(|x| x.as_str().cmp(t))
            .map_err(|_| Error::UnknownType(t.to_string()))
    }

    /// Structural embedding of a graph. Fails on op types outside the
    /// vocabulary.
    pub fn embed<T: Real>(&self, dag: &Dag, stats: &GraphStats) -> Result<Embedding<T>> {
        let k = self.0.len();
        let mut out = vec![T::zero(); self.dim()];
        let n = dag.len();
        let mut type_idx = Vec::with_capacity(n);
        for v in 0..n {
            type_idx.push(self.index(dag.op_type(v))?);
        }
        if n == 0 {
            return Ok(Embedding::new(out));
        }
        let inv_n = T::one() / T::of_usize(n);
        let l_cp = stats.critical_path;
        let l_cp_t = T::of_u64(l_cp);

        // Sums run over sorted values so the result does not depend on
        // node numbering.
        let mut crits: Vec<u64> = stats.nodes.iter().map(|s| s.crit).collect();
        crits.sort_unstable();
        let ratios: Vec<T> = crits.iter().map(|&c| T::of_u64(c) / l_cp_t).collect();
        let mean = ratios.iter().fold(T::zero(), |a, &r| a + r) * inv_n;
        let var = ratios
            .iter()
            .fold(T::zero(), |a, &r| a + (r - mean) * (r - mean))
            * inv_n;
        out[0] = l_cp_t * inv_n;
        out[1] = mean;
        out[2] = var.sqrt();

        let fan_off = CRIT_DIMS;
        let lvl_off = fan_off + FANOUT_BINS;
        let type_off = lvl_off + LEVEL_BINS;
        let press_off = type_off + k;
        let mut counts = vec![0usize; press_off];
        for (v, s) in stats.nodes.iter().enumerate() {
            counts[fan_off + fanout_bin(s.fanout)] += 1;
            // level < L_cp because crit >= 1
            let bin = ((LEVEL_BINS as u64 * s.level) / l_cp).min(LEVEL_BINS as u64 - 1) as usize;
            counts[lvl_off + bin] += 1;
            counts[type_off + type_idx[v]] += 1;
        }
        let n_t = T::of_usize(n);
        for (slot, &c) in out.iter_mut().zip(&counts).skip(fan_off) {
            *slot = T::of_usize(c) / n_t;
        }
        for (t, p) in &stats.pressure {
            if let Ok(i) = self.index(t) {
                out[press_off + i] = p.value();
            }
        }
        Ok(Embedding::new(out))
    }
}

/// Per-dimension z-score normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Normalizer<T: Real = f64> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub layout: String,
}

impl<T: Real> Normalizer<T> {
    /// Fits mean and sample (n - 1) std per dimension.
    pub fn fit(samples: &[Embedding<T>]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples(samples.len()));
        }
        let dim = samples[0].len();
        if let Some(bad) = samples.iter().find(|e| e.len() != dim) {
            return Err(Error::LengthMismatch(dim, bad.len()));
        }
        let n = T::of_usize(samples.len());
        let mut mean = vec![T::zero(); dim];
        for e in samples {
            for (m, &x) in mean.iter_mut().zip(&e.values) {
                *m = *m + x;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut std = vec![T::zero(); dim];
        for e in samples {
            for ((s, &x), &m) in std.iter_mut().zip(&e.values).zip(&mean) {
                *s = *s + (x - m) * (x - m);
            }
        }
        std.iter_mut()
            .for_each(|s| *s = (*s / (n - T::one())).sqrt());
        Ok(Normalizer {
            mean,
            std,
            layout: LAYOUT_VERSION.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / std`; zero-std dimensions map to 0.
    pub fn apply(&self, e: &Embedding<T>) -> Result<Embedding<T>> {
        if self.layout != LAYOUT_VERSION {
            return Err(Error::Layout {
                expected: LAYOUT_VERSION.into(),
                found: self.layout.clone(),
            });
        }
        if e.len() != self.dim() {
            return Err(Error::LengthMismatch(self.dim(), e.len()));
        }
        let values = e
            .values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&x, &m), &s)| if s > T::zero() { (x - m) / s } else { T::zero() })
            .collect();
        Ok(Embedding::new(values))
    }
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine_sim<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na.is_zero() || nb.is_zero() {
        return Ok(T::zero());
    }
    let sim = dot / (na.sqrt() * nb.sqrt());
    Ok(sim.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Retrieved<T: Real = f64> {
    pub kernel_id: usize,
    pub similarity: T,
}

/// Retrieval rank: higher similarity first, then lower kernel id.
fn rank<T: Real>(a: &Retrieved<T>, b: &Retrieved<T>) -> Ordering {
    crate::scalar::desc_nan_last(a.similarity, b.similarity).then(a.kernel_id.cmp(&b.kernel_id))
}

struct HeapEntry<T: Real>(Retrieved<T>);

impl<T: Real> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        rank(&self.0, &other.0) == Ordering::Equal
    }
}
impl<T: Real> Eq for HeapEntry<T> {}
impl<T: Real> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for HeapEntry<T> {
    // max-heap on rank: the top is the worst of the kept entries
    fn cmp(&self, other: &Self) -> Ordering {
        rank(&self.0, &other.0)
    }
}

/// The `m` kernels most similar to `query`, best first. Returns the whole
/// library, ranked, when it has fewer than `m` kernels.
pub fn retrieve_topm<T: Real>(
    query: &Embedding<T>,
    library: &[Kernel<T>],
    m: usize,
) -> Result<Vec<Retrieved<T>>> {
    if m == 0 {
        return Err(Error::ZeroM);
    }
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let mut heap: BinaryHeap<HeapEntry<T>> = BinaryHeap::with_capacity(m + 1);
    for k in library {
        let entry = HeapEntry(Retrieved {
            kernel_id: k.id,
            similarity: cosine_sim(&query.values, &k.signature.values)?,
        });
        if heap.len() < m {
            heap.push(entry);
        } else if let Some(worst) = heap.peek() {
            if entry < *worst {
                heap.pop();
                heap.push(entry);
            }
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|e| e.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    fn emb(g: &Dag) -> Embedding<f64> {
        let vocab = TypeVocabulary::from_graphs([g]);
        vocab.embed(g, &GraphStats::compute(g)).unwrap()
    }

    #[test]
    fn single_node() {
        let e = emb(&build(&[1], &[], 1));
        assert_eq!(e.len(), 21);
        assert_eq!(e.crit_summary(), &[1.0, 1.0, 0.0]);
        assert_eq!(e.values[3], 1.0);
        assert_eq!(e.values[11], 1.0);
        assert_eq!(e.values[19], 1.0);
        assert_eq!(e.values[20], 1.0);
    }

    #[test]
    fn diamond_fanout_histogram() {
        let e = emb(&diamond(1));
        assert_eq!(&e.values[3..11], &[0.25, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // levels 0,1,1,2 over L_cp = 3
        assert_eq!(&e.values[11..19], &[0.25, 0.0, 0.5, 0.0, 0.0, 0.25, 0.0, 0.0]);
        let hist: f64 = e.values[3..11].iter().sum();
        assert!((hist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fanout_bins() {
        let bins: Vec<usize> = [0, 1, 2, 3, 4, 5, 6, 8, 9, 16, 17, 100].map(fanout_bin).into();
        assert_eq!(bins, vec![0, 1, 2, 3, 4, 4, 5, 5, 6, 6, 7, 7]);
    }

    #[test]
    fn relabelled_graph_embeds_identically() {
        let g = build(&[1, 2, 1, 3, 1], &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)], 2);
        let h = g.relabel(&[4, 2, 0, 1, 3]).unwrap();
        assert_eq!(emb(&g), emb(&h));
    }

    #[test]
    fn unknown_type_is_an_error() {
        let g = diamond(1);
        let vocab = TypeVocabulary::new(["mul"]);
        assert!(matches!(
            vocab.embed::<f64>(&g, &GraphStats::compute(&g)),
            Err(Error::UnknownType(t)) if t == "alu"
        ));
    }

    #[test]
    fn normalizer() {
        let samples: Vec<Embedding> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&x| Embedding::new(vec![x, 5.0]))
            .collect();
        let norm = Normalizer::fit(&samples).unwrap();
        let out: Vec<f64> = samples.iter().map(|e| norm.apply(e).unwrap().values[0]).collect();
        assert_eq!(out, vec![-1.0, 0.0, 1.0]);
        for e in &samples {
            assert_eq!(norm.apply(e).unwrap().values[1], 0.0);
        }
        assert!(matches!(Normalizer::fit(&samples[..1]), Err(Error::TooFewSamples(1))));
        let json = serde_json::to_string(&norm).unwrap();
        assert_eq!(json, r#"{"mean":[2.0,5.0],"std":[1.0,0.0],"layout":"v1"}"#);
    }

    #[test]
    fn normalizer_rejects_foreign_layout() {
        let mut norm = Normalizer::<f64>::fit(&[Embedding::new(vec![0.0]), Embedding::new(vec![1.0])]).unwrap();
        norm.layout = "v0".into();
        assert!(matches!(norm.apply(&Embedding::new(vec![0.0])), Err(Error::Layout { .. })));
    }

    #[test]
    fn cosine() {
        let a = [1.0, 2.0, 2.0];
        assert!((cosine_sim::<f64>(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim::<f64>(&a, &[2.0, 1.0, 2.0]).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine_sim(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        let f: f32 = cosine_sim(&[1.0f32, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap();
        assert!((f - 8.0 / 9.0).abs() < 1e-6);
    }
}
