//! Priority-function synthesis for resource-constrained list scheduling.

pub mod analysis;
pub mod bench;
pub mod dsl;
pub mod error;
pub mod features;
pub mod graph;
pub mod kernels;
pub mod scalar;
pub mod scheduler;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use graph::{Dag, NodeRecord};
pub use scalar::Real;

pub type PriorityExpr = dsl::PriorityExpr<f64>;
pub type PriorityExprF32 = dsl::PriorityExpr<f32>;
pub type Embedding = features::Embedding<f64>;
pub type EmbeddingF32 = features::Embedding<f32>;
pub type Normalizer = features::Normalizer<f64>;
pub type NormalizerF32 = features::Normalizer<f32>;
pub type Kernel = kernels::Kernel<f64>;
pub type KernelF32 = kernels::Kernel<f32>;
pub type KernelLibrary = kernels::KernelLibrary<f64>;
pub type KernelLibraryF32 = kernels::KernelLibrary<f32>;
pub type History = synth::History<f64>;
pub type HistoryF32 = synth::History<f32>;
pub type StatsSummary = bench::StatsSummary<f64>;
pub type StatsSummaryF32 = bench::StatsSummary<f32>;
