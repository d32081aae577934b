//! Sources of candidate heuristics.

use crate::dsl::PriorityExpr;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::scalar::Real;
use crate::synth::config::{LoopConfig, ProviderDescriptor, ProviderKind};
use crate::synth::evaluate::GraphCase;
use crate::synth::fallback::fallback_synthesize;
use crate::synth::prompt::Prompt;

/// Everything a provider may look at when proposing a heuristic.
pub struct SynthesisRequest<'a, T: Real> {
    pub iteration: usize,
    pub prompt: &'a Prompt,
    pub rendered: &'a str,
    pub kernels: &'a [Kernel<T>],
    pub batch: &'a [GraphCase],
    pub config: &'a LoopConfig,
}

pub trait Provider<T: Real> {
    fn name(&self) -> &str;

    /// Raw reply text. `Err` means the provider could not be reached;
    /// unparseable text is returned as `Ok` and retried by the loop.
    fn propose(&mut self, request: &SynthesisRequest<'_, T>) -> Result<String>;
}

/// Extracts the expression line from a reply: the first non-empty line
/// outside code fences, with surrounding backticks removed.
pub fn extract_expression<T: Real>(reply: &str) -> Option<PriorityExpr<T>> {
    let line = reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("```"))?;
    PriorityExpr::parse(line.trim_matches('`').trim()).ok()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FallbackProvider;

impl<T: Real> Provider<T> for FallbackProvider {
    fn name(&self) -> &str {
        "fallback"
    }

    fn propose(&mut self, request: &SynthesisRequest<'_, T>) -> Result<String> {
        Ok(fallback_synthesize(request.kernels, request.batch, request.config).to_string())
    }
}

/// Replays canned replies in order; running out is a provider failure.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    replies: Vec<String>,
    next: usize,
}

impl ScriptedProvider {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        ScriptedProvider {
            replies: replies.into_iter().map(Into::into).collect(),
            next: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl<T: Real> Provider<T> for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn propose(&mut self, _request: &SynthesisRequest<'_, T>) -> Result<String> {
        let reply = self
            .replies
            .get(self.next)
            .cloned()
            .ok_or_else(|| Error::Provider(format!("script exhausted after {} replies", self.next)))?;
        self.next += 1;
        Ok(reply)
    }
}

#[cfg(feature = "http")]
pub use http::HttpProvider;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use serde_json::{json, Value};

    use super::*;

    /// OpenAI-style chat-completion client. The bearer token is read from
    /// the environment variable named by the descriptor, if any.
    #[derive(Debug, Clone)]
    pub struct HttpProvider {
        endpoint: String,
        model: String,
        token: Option<String>,
        agent: ureq::Agent,
    }

    impl HttpProvider {
        pub fn from_descriptor(desc: &ProviderDescriptor) -> Result<Self> {
            let endpoint = desc
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("http provider needs an endpoint".into()))?;
            let model = desc
                .model
                .clone()
                .ok_or_else(|| Error::Config("http provider needs a model".into()))?;
            let token = match &desc.auth_env {
                Some(var) => Some(
                    std::env::var(var).map_err(|_| Error::Provider(format!("environment variable {var} is not set")))?,
                ),
                None => None,
            };
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(120)))
                .build()
                .into();
            Ok(HttpProvider {
                endpoint,
                model,
                token,
                agent,
            })
        }
    }

    impl<T: Real> Provider<T> for HttpProvider {
        fn name(&self) -> &str {
            "http"
        }

        fn propose(&mut self, request: &SynthesisRequest<'_, T>) -> Result<String> {
            let body = json!({
                "model": self.model,
                "temperature": 0,
                "messages": [{"role": "user", "content": request.rendered}],
            });
            let mut req = self.agent.post(&self.endpoint);
            if let Some(t) = &self.token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            let mut resp = req
                .send_json(&body)
                .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?;
            let value: Value = resp
                .body_mut()
                .read_json()
                .map_err(|e| Error::Provider(format!("bad response body: {e}")))?;
            value["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Provider("response has no message content".into()))
        }
    }
}

/// Instantiates the provider a descriptor names.
pub fn provider_from_descriptor<T: Real>(desc: &ProviderDescriptor) -> Result<Box<dyn Provider<T>>> {
    match desc.kind {
        ProviderKind::Fallback => Ok(Box::new(FallbackProvider)),
        ProviderKind::Scripted => Ok(Box::new(ScriptedProvider::new(desc.script.clone()))),
        #[cfg(feature = "http")]
        ProviderKind::Http => Ok(Box::new(HttpProvider::from_descriptor(desc)?)),
        #[cfg(not(feature = "http"))]
        ProviderKind::Http => Err(Error::Provider("built without http support".into())),
    }
}
