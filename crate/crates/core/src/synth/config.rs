use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::RuntimeMode;

/// Which retrieval path feeds the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Top-m kernels by cosine similarity.
    #[default]
    Full,
    /// No kernels at all.
    NoRetrieval,
    /// Whole-graph signatures of training graphs instead of motif kernels.
    NoMotif,
    /// m kernels drawn uniformly at random.
    RandomKernel,
}

/// How an ablation mode chooses the kernels shown to the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalBehavior {
    BySimilarity,
    Disabled,
    WholeGraphSignatures,
    Random,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoRetrieval,
        Ablation::NoMotif,
        Ablation::RandomKernel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoRetrieval => "no_retrieval",
            Ablation::NoMotif => "no_motif",
            Ablation::RandomKernel => "random_kernel",
        }
    }

    pub fn behavior(self) -> RetrievalBehavior {
        match self {
            Ablation::Full => RetrievalBehavior::BySimilarity,
            Ablation::NoRetrieval => RetrievalBehavior::Disabled,
            Ablation::NoMotif => RetrievalBehavior::WholeGraphSignatures,
            Ablation::RandomKernel => RetrievalBehavior::Random,
        }
    }

    /// Whether the mode needs a mined kernel library.
    pub fn needs_library(self) -> bool {
        matches!(self, Ablation::Full | Ablation::RandomKernel)
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAblation(s.to_string()))
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Http,
    #[default]
    Fallback,
    Scripted,
}

/// Where candidate heuristics come from. Credentials are never stored
/// here; `auth_env` names the environment variable holding the token.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderDescriptor {
    pub kind: ProviderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    /// Canned replies for the scripted provider, consumed in order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FallbackConfig {
    /// Grid points per weight are `grid_steps + 1`, evenly spaced over the
    /// weight's range.
    pub grid_steps: usize,
    pub sweeps: usize,
}

impl Default for FallbackConfig {
    fn default() -> Self {
        FallbackConfig {
            grid_steps: 8,
            sweeps: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub iterations: usize,
    pub top_m: usize,
    pub batch_size: usize,
    /// Runtime weight, per millisecond.
    pub lambda: f64,
    /// Infeasibility penalty.
    pub mu: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub provider: ProviderDescriptor,
    pub runtime_mode: RuntimeMode,
    /// Extra provider attempts after an unparseable reply.
    pub max_retries: usize,
    /// Substitute the deterministic synthesizer when the provider fails.
    pub fallback_on_failure: bool,
    /// Kernel budget for the whole-graph signature library.
    pub kernel_budget: usize,
    pub fallback: FallbackConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            iterations: 3,
            top_m: 5,
            batch_size: 8,
            lambda: 0.01,
            mu: 5000.0,
            seed: 0,
            ablation: Ablation::Full,
            provider: ProviderDescriptor::default(),
            runtime_mode: RuntimeMode::Wallclock,
            max_retries: 2,
            fallback_on_failure: true,
            kernel_budget: 50,
            fallback: FallbackConfig::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if self.top_m == 0 {
            return bad("top_m must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return bad("mu must be finite and non-negative");
        }
        if self.fallback.grid_steps == 0 {
            return bad("fallback.grid_steps must be >= 1");
        }
        if self.kernel_budget == 0 {
            return bad("kernel_budget must be >= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = LoopConfig::default();
        assert_eq!((c.iterations, c.top_m, c.lambda, c.mu), (3, 5, 0.01, 5000.0));
        c.validate().unwrap();
        let parsed: LoopConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn ablation_names() {
        for a in Ablation::ALL {
            assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
        }
        assert!(matches!("no_kernels".parse::<Ablation>(), Err(Error::UnknownAblation(_))));
        assert_eq!(Ablation::NoRetrieval.behavior(), RetrievalBehavior::Disabled);
        assert_eq!(Ablation::RandomKernel.behavior(), RetrievalBehavior::Random);
    }

    #[test]
    fn rejects_bad_values() {
        let c = LoopConfig { top_m: 0, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = LoopConfig { mu: f64::NAN, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn descriptor_json() {
        let d: ProviderDescriptor =
            serde_json::from_str(r#"{"kind":"http","endpoint":"http://localhost:8000/v1/chat/completions","model":"m"}"#).unwrap();
        assert_eq!(d.kind, ProviderKind::Http);
        assert_eq!(d.model.as_deref(), Some("m"));
    }
}
