//! The synthesis loop: sample a training batch, retrieve kernels, prompt a
//! provider for a priority expression, score it on validation graphs and
//! feed failures back into the next prompt.

pub mod config;
pub mod evaluate;
pub mod fallback;
pub mod feedback;
pub mod prompt;
pub mod provider;
mod run;

pub use config::{Ablation, FallbackConfig, LoopConfig, ProviderDescriptor, ProviderKind, RetrievalBehavior};
pub use evaluate::{evaluate, mean_score, score, Evaluation, GraphCase, GraphResult};
pub use fallback::fallback_synthesize;
pub use feedback::{make_feedback, FailureCase};
pub use prompt::{build_prompt, Prompt};
pub use provider::{provider_from_descriptor, FallbackProvider, Provider, ScriptedProvider, SynthesisRequest};
pub use run::{best_of, run_loop, whole_graph_kernels, BestHeuristic, CandidateSource, History, RunRecord};
