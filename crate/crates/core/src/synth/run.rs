use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::{baseline_priority, PriorityExpr};
use crate::error::{Error, Result};
use crate::features::{retrieve_topm, Normalizer, TypeVocabulary, LAYOUT_VERSION};
use crate::kernels::{Kernel, KernelLibrary, MotifCategory, TemplateSpec};
use crate::scalar::Real;
use crate::synth::config::{LoopConfig, RetrievalBehavior};
use crate::synth::evaluate::{evaluate, Evaluation, GraphCase, GraphResult};
use crate::synth::fallback::fallback_synthesize;
use crate::synth::feedback::{failure_cases, make_feedback, FailureCase};
use crate::synth::prompt::build_prompt;
use crate::synth::provider::{extract_expression, Provider, SynthesisRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Provider,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RunRecord<T: Real = f64> {
    /// 1-based.
    pub iteration: usize,
    pub heuristic: PriorityExpr<T>,
    pub source: CandidateSource,
    /// Provider calls made this iteration.
    pub attempts: usize,
    pub batch: Vec<String>,
    pub kernels: Vec<usize>,
    pub results: Vec<GraphResult<T>>,
    pub mean_score: T,
    pub failures: Vec<FailureCase>,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BestHeuristic<T: Real = f64> {
    pub iteration: usize,
    pub heuristic: PriorityExpr<T>,
    pub mean_score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct History<T: Real = f64> {
    pub config: LoopConfig,
    pub provider: String,
    pub baseline: Evaluation<T>,
    pub records: Vec<RunRecord<T>>,
    pub best: BestHeuristic<T>,
}

impl<T: Real> History<T> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("history serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One whole-graph signature per training graph, each with the generic
/// `fanout_aware` template, truncated to `budget`.
pub fn whole_graph_kernels<T: Real>(
    train: &[GraphCase],
    vocab: &TypeVocabulary,
    normalizer: &Normalizer<T>,
    budget: usize,
) -> Result<Vec<Kernel<T>>> {
    train
        .iter()
        .take(budget)
        .enumerate()
        .map(|(id, case)| {
            let raw = vocab.embed(&case.dag, &case.stats)?;
            Ok(Kernel {
                id,
                category: MotifCategory::WholeGraph,
                signature: normalizer.apply(&raw)?,
                template: TemplateSpec::new(MotifCategory::WholeGraph.family()),
                support: 1,
            })
        })
        .collect()
}

/// The retrieval context a mode searches: kernels plus the embedding space
/// they live in.
enum Retrieval<'a, T: Real> {
    None,
    Library(&'a KernelLibrary<T>, RetrievalBehavior),
    WholeGraph(KernelLibrary<T>),
}

fn prepare<'a, T: Real>(
    train: &[GraphCase],
    library: Option<&'a KernelLibrary<T>>,
    config: &LoopConfig,
) -> Result<Retrieval<'a, T>> {
    let behavior = config.ablation.behavior();
    match behavior {
        RetrievalBehavior::Disabled => Ok(Retrieval::None),
        RetrievalBehavior::BySimilarity | RetrievalBehavior::Random => {
            let lib = library.ok_or_else(|| {
                Error::Config(format!("ablation {} needs a kernel library", config.ablation))
            })?;
            if lib.kernels.is_empty() {
                return Err(Error::EmptyLibrary);
            }
            Ok(Retrieval::Library(lib, behavior))
        }
        RetrievalBehavior::WholeGraphSignatures => {
            let (vocab, normalizer) = match library {
                Some(lib) => (lib.vocabulary.clone(), lib.normalizer.clone()),
                None => {
                    let vocab = TypeVocabulary::from_graphs(train.iter().map(|c| &c.dag));
                    let raws = train
                        .iter()
                        .map(|c| vocab.embed(&c.dag, &c.stats))
                        .collect::<Result<Vec<_>>>()?;
                    let normalizer = Normalizer::fit(&raws)?;
                    (vocab, normalizer)
                }
            };
            let kernels = whole_graph_kernels(train, &vocab, &normalizer, config.kernel_budget)?;
            Ok(Retrieval::WholeGraph(KernelLibrary {
                layout: LAYOUT_VERSION.to_string(),
                vocabulary: vocab,
                normalizer,
                kernels,
            }))
        }
    }
}

/// Union of per-graph retrievals for a batch, sorted by kernel id.
fn aggregate<T: Real>(
    retrieval: &Retrieval<'_, T>,
    batch: &[GraphCase],
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Kernel<T>>> {
    let (lib, random) = match retrieval {
        Retrieval::None => return Ok(Vec::new()),
        Retrieval::Library(lib, b) => (*lib, *b == RetrievalBehavior::Random),
        Retrieval::WholeGraph(lib) => (lib, false),
    };
    let mut picked: BTreeMap<usize, &Kernel<T>> = BTreeMap::new();
    for case in batch {
        if random {
            for i in sample(rng, lib.kernels.len(), m.min(lib.kernels.len())) {
                let k = &lib.kernels[i];
                picked.insert(k.id, k);
            }
        } else {
            let query = lib.embed_query(&case.dag, &case.stats)?;
            for r in retrieve_topm(&query, &lib.kernels, m)? {
                let k = lib
                    .kernel(r.kernel_id)
                    .ok_or_else(|| Error::Invariant(format!("retrieved unknown kernel {}", r.kernel_id)))?;
                picked.insert(k.id, k);
            }
        }
    }
    Ok(picked.into_values().cloned().collect())
}

/// Runs the synthesis loop and returns the full history; the best
/// heuristic is `history.best`.
pub fn run_loop<T: Real>(
    train: &[GraphCase],
    val: &[GraphCase],
    library: Option<&KernelLibrary<T>>,
    config: &LoopConfig,
    provider: &mut dyn Provider<T>,
) -> Result<History<T>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptySample);
    }
    if val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let retrieval = prepare(train, library, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let baseline = evaluate(&baseline_priority::<T>(), val, config.lambda, config.mu, config.runtime_mode)?;
    let mut feedback: Vec<String> = Vec::new();
    let mut records: Vec<RunRecord<T>> = Vec::with_capacity(config.iterations);

    for iteration in 1..=config.iterations {
        let mut idx = sample(&mut rng, train.len(), config.batch_size.min(train.len())).into_vec();
        idx.sort_unstable();
        let batch: Vec<GraphCase> = idx.iter().map(|&i| train[i].clone()).collect();
        let kernels = aggregate(&retrieval, &batch, config.top_m, &mut rng)?;
        let prompt = build_prompt(&batch, &kernels, &feedback, config.lambda, config.mu);
        let rendered = prompt.render();
        let request = SynthesisRequest {
            iteration,
            prompt: &prompt,
            rendered: &rendered,
            kernels: &kernels,
            batch: &batch,
            config,
        };

        let mut attempts = 0;
        let mut candidate = None;
        let mut failure = None;
        while attempts <= config.max_retries {
            attempts += 1;
            match provider.propose(&request) {
                Ok(reply) => {
                    if let Some(expr) = extract_expression::<T>(&reply) {
                        candidate = Some(expr);
                        break;
                    }
                    failure = Some(format!("unparseable reply: {:?}", reply.lines().next().unwrap_or("")));
                }
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        let (heuristic, source) = match candidate {
            Some(expr) => (expr, CandidateSource::Provider),
            None if config.fallback_on_failure => {
                (fallback_synthesize(&kernels, &batch, config), CandidateSource::Fallback)
            }
            None => {
                return Err(Error::Provider(format!(
                    "iteration {iteration}: {}",
                    failure.unwrap_or_else(|| "no reply".into())
                )))
            }
        };

        let eval = evaluate(&heuristic, val, config.lambda, config.mu, config.runtime_mode)?;
        let text = make_feedback(iteration, &heuristic.to_string(), &eval.per_graph, &baseline.per_graph, val);
        feedback.push(text.clone());
        records.push(RunRecord {
            iteration,
            failures: failure_cases(&eval.per_graph, &baseline.per_graph),
            heuristic,
            source,
            attempts,
            batch: batch.iter().map(|c| c.name.clone()).collect(),
            kernels: kernels.iter().map(|k| k.id).collect(),
            results: eval.per_graph,
            mean_score: eval.mean_score,
            feedback: text,
        });
    }

    let best = best_of(&records).ok_or_else(|| Error::Invariant("empty history".into()))?;
    Ok(History {
        config: config.clone(),
        provider: provider.name().to_string(),
        baseline,
        records,
        best,
    })
}

/// Highest mean score; the earliest iteration wins ties.
pub fn best_of<T: Real>(records: &[RunRecord<T>]) -> Option<BestHeuristic<T>> {
    let mut best: Option<&RunRecord<T>> = None;
    for r in records {
        if best.is_none_or(|b| r.mean_score > b.mean_score) {
            best = Some(r);
        }
    }
    best.map(|r| BestHeuristic {
        iteration: r.iteration,
        heuristic: r.heuristic.clone(),
        mean_score: r.mean_score,
    })
}
