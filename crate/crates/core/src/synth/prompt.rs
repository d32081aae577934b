//! Structured prompt assembly. Rendering is a pure function of the inputs.

use std::fmt::Write;

use serde::Serialize;

use crate::dsl::Feature;
use crate::kernels::{Kernel, TemplateSpec};
use crate::scalar::Real;
use crate::synth::evaluate::GraphCase;

pub const OUTPUT_CONTRACT: &str = "Reply with exactly one expression line.";

pub const GRAMMAR: &str = "expr   := sign? term (('+' | '-') term)*
term   := number '*' ident | ident | number
number := digits ('.' digits)? ([eE] [+-]? digits)?";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStat {
    pub graph: String,
    pub nodes: usize,
    pub edges: usize,
    pub critical_path: u64,
    pub max_fanout: u64,
    pub max_reconv: u64,
    /// `(type, work / (capacity * critical path))`.
    pub pressure: Vec<(String, f64)>,
}

impl BatchStat {
    pub fn of(case: &GraphCase) -> Self {
        let s = &case.stats;
        BatchStat {
            graph: case.name.clone(),
            nodes: case.dag.len(),
            edges: case.dag.edges().len(),
            critical_path: s.critical_path,
            max_fanout: s.nodes.iter().map(|n| n.fanout).max().unwrap_or(0),
            max_reconv: s.nodes.iter().map(|n| n.reconv).max().unwrap_or(0),
            pressure: s.pressure.iter().map(|(t, p)| (t.clone(), p.value())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelContext {
    pub id: usize,
    pub category: String,
    pub support: usize,
    pub signature: Vec<f64>,
    pub template: TemplateSpec,
    pub formula: String,
}

impl KernelContext {
    pub fn of<T: Real>(k: &Kernel<T>) -> Self {
        KernelContext {
            id: k.id,
            category: k.category.name().to_string(),
            support: k.support,
            signature: k.signature.values.iter().map(|v| v.as_f64()).collect(),
            template: k.template.clone(),
            formula: k.template.family.formula(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prompt {
    pub problem: String,
    pub batch: Vec<BatchStat>,
    pub kernels: Vec<KernelContext>,
    pub feedback: Vec<String>,
}

fn problem_text(lambda: f64, mu: f64) -> String {
    format!(
        "Resource-constrained list scheduling of operation DAGs. Each cycle, ready operations are \
         admitted in descending priority (ties by ascending id) while their type has free capacity; \
         an operation of duration d holds one unit for d cycles. Write a static priority function \
         over node features that maximizes J = -latency - {lambda}*runtime_ms - {mu}*[infeasible]."
    )
}

pub fn build_prompt<T: Real>(
    batch: &[GraphCase],
    kernels: &[Kernel<T>],
    feedback: &[String],
    lambda: f64,
    mu: f64,
) -> Prompt {
    Prompt {
        problem: problem_text(lambda, mu),
        batch: batch.iter().map(BatchStat::of).collect(),
        kernels: kernels.iter().map(KernelContext::of).collect(),
        feedback: feedback.to_vec(),
    }
}

impl Prompt {
    /// Sections in fixed order: problem, target batch, retrieved kernels,
    /// expression language, feedback, output contract. Empty kernel and
    /// feedback sections are omitted.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "## Problem\n{}\n", self.problem);

        let _ = writeln!(out, "## Target batch");
        for b in &self.batch {
            let pressure: Vec<String> = b.pressure.iter().map(|(t, p)| format!("{t}={p:.4}")).collect();
            let _ = writeln!(
                out,
                "- {}: nodes={} edges={} critical_path={} max_fanout={} max_reconv={} pressure[{}]",
                b.graph,
                b.nodes,
                b.edges,
                b.critical_path,
                b.max_fanout,
                b.max_reconv,
                pressure.join(" ")
            );
        }
        out.push('\n');

        if !self.kernels.is_empty() {
            let _ = writeln!(out, "## Retrieved kernels");
            for k in &self.kernels {
                let _ = writeln!(
                    out,
                    "- kernel {} ({}, support {}): {} := {}",
                    k.id, k.category, k.support, k.template.family, k.formula
                );
                let weights: Vec<String> = k
                    .template
                    .family
                    .slots()
                    .iter()
                    .map(|s| {
                        let (lo, hi) = k.template.range(s.name);
                        let d = k.template.defaults.get(s.name).copied().unwrap_or(crate::kernels::DEFAULT_WEIGHT);
                        format!("{}={} in [{}, {}]", s.name, d, lo, hi)
                    })
                    .collect();
                let _ = writeln!(out, "  weights: {}", weights.join(", "));
                let sig: Vec<String> = k.signature.iter().map(|v| format!("{v:.4}")).collect();
                let _ = writeln!(out, "  signature: [{}]", sig.join(", "));
            }
            out.push('\n');
        }

        let _ = writeln!(out, "## Expression language\n{GRAMMAR}");
        let names: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
        let _ = writeln!(out, "features: {}\n", names.join(", "));

        if !self.feedback.is_empty() {
            let _ = writeln!(out, "## Feedback");
            for f in &self.feedback {
                let _ = writeln!(out, "{}", f.trim_end());
            }
            out.push('\n');
        }

        let _ = writeln!(out, "## Output\n{OUTPUT_CONTRACT}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Embedding;
    use crate::graph::fixtures::*;
    use crate::kernels::{MotifCategory, TemplateFamily};

    fn kernel(id: usize, family: TemplateFamily, sig: f64) -> Kernel<f64> {
        Kernel {
            id,
            category: MotifCategory::Chain,
            signature: Embedding::new(vec![sig, -sig]),
            template: TemplateSpec::new(family),
            support: 3,
        }
    }

    fn batch() -> Vec<GraphCase> {
        vec![GraphCase::new("g0", diamond(1)), GraphCase::new("g1", chain(4, 2))]
    }

    #[test]
    fn first_iteration_has_no_feedback() {
        let text = build_prompt::<f64>(&batch(), &[], &[], 0.01, 5000.0).render();
        assert!(!text.contains("## Feedback"));
        assert!(!text.contains("## Retrieved kernels"));
        assert!(text.contains(OUTPUT_CONTRACT));
        assert!(text.contains("term   := number '*' ident"));
    }

    #[test]
    fn deterministic() {
        let ks = [kernel(0, TemplateFamily::DeepChainB, 0.5)];
        let fb = vec!["iteration 1: 0 regressions".to_string()];
        let a = build_prompt(&batch(), &ks, &fb, 0.01, 5000.0).render();
        let b = build_prompt(&batch(), &ks, &fb, 0.01, 5000.0).render();
        assert_eq!(a, b);
        let order: Vec<usize> = ["## Problem", "## Target batch", "## Retrieved kernels", "## Expression language", "## Feedback", "## Output"]
            .iter()
            .map(|h| a.find(h).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn includes_every_kernel() {
        let ks = [kernel(3, TemplateFamily::ReconvergentA, 0.25), kernel(7, TemplateFamily::DeepChainB, 1.5)];
        let text = build_prompt(&batch(), &ks, &[], 0.01, 5000.0).render();
        assert!(text.contains("kernel 3") && text.contains("kernel 7"));
        assert!(text.contains("[0.2500, -0.2500]") && text.contains("[1.5000, -1.5000]"));
        assert!(text.contains("alpha1*crit + alpha2*reconv + alpha3*fanout"));
        assert!(text.contains("beta1*crit - beta2*slack"));
    }
}
