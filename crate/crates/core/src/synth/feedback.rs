//! Failure cases and feedback text relative to the level baseline.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::features::TypeVocabulary;
use crate::scalar::Real;
use crate::synth::evaluate::{GraphCase, GraphResult};

/// Most regressions listed in one feedback section.
pub const MAX_REPORTED: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCase {
    pub graph: String,
    pub infeasible: bool,
    /// Heuristic latency minus baseline latency.
    pub delta: i64,
}

/// Graphs that are infeasible or slower than the baseline, in
/// validation order.
pub fn failure_cases<T: Real>(results: &[GraphResult<T>], baseline: &[GraphResult<T>]) -> Vec<FailureCase> {
    results
        .iter()
        .zip(baseline)
        .filter_map(|(r, b)| {
            let delta = r.latency as i64 - b.latency as i64;
            (!r.feasible || delta > 0).then(|| FailureCase {
                graph: r.graph.clone(),
                infeasible: !r.feasible,
                delta,
            })
        })
        .collect()
}

fn crit_profile(case: &GraphCase) -> String {
    let vocab = TypeVocabulary::from_graphs([&case.dag]);
    match vocab.embed::<f64>(&case.dag, &case.stats) {
        Ok(e) => {
            let s = e.crit_summary();
            format!("cp/n={:.4} crit_mean={:.4} crit_std={:.4}", s[0], s[1], s[2])
        }
        Err(_) => "unavailable".to_string(),
    }
}

/// Feedback for one iteration: the up-to-five worst regressions by latency
/// delta (descending, ties by validation order) and every infeasible run.
pub fn make_feedback<T: Real>(
    iteration: usize,
    heuristic: &str,
    results: &[GraphResult<T>],
    baseline: &[GraphResult<T>],
    cases: &[GraphCase],
) -> String {
    let failures = failure_cases(results, baseline);
    let mut regressions: Vec<(usize, &FailureCase)> = failures
        .iter()
        .enumerate()
        .filter(|(_, f)| f.delta > 0)
        .collect();
    regressions.sort_by(|a, b| b.1.delta.cmp(&a.1.delta).then(a.0.cmp(&b.0)));
    let find = |name: &str| cases.iter().find(|c| c.name == name);

    let mut out = String::new();
    let _ = writeln!(out, "iteration {iteration}: {heuristic}");
    let shown = regressions.len().min(MAX_REPORTED);
    let _ = writeln!(
        out,
        "{} regressions vs 1*level baseline (showing {shown})",
        regressions.len()
    );
    for (_, f) in regressions.iter().take(MAX_REPORTED) {
        let profile = find(&f.graph).map(crit_profile).unwrap_or_else(|| "unavailable".into());
        let _ = writeln!(out, "- {} latency +{} ({profile})", f.graph, f.delta);
    }
    let infeasible: Vec<&str> = failures.iter().filter(|f| f.infeasible).map(|f| f.graph.as_str()).collect();
    if !infeasible.is_empty() {
        let _ = writeln!(out, "infeasible: {}", infeasible.join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    fn row(graph: &str, latency: u64, feasible: bool) -> GraphResult<f64> {
        GraphResult {
            graph: graph.into(),
            latency,
            runtime_ms: 0.0,
            feasible,
            score: -(latency as f64),
        }
    }

    #[test]
    fn zero_regressions() {
        let h = [row("a", 3, true), row("b", 4, true)];
        let b = [row("a", 5, true), row("b", 4, true)];
        let text = make_feedback(1, "1*crit", &h, &b, &[]);
        assert!(text.contains("0 regressions"));
        assert!(!text.contains("infeasible"));
        assert!(failure_cases(&h, &b).is_empty());
    }

    #[test]
    fn names_infeasible_graph() {
        let h = [row("a", 3, true), row("bad", 4, false)];
        let b = [row("a", 3, true), row("bad", 4, true)];
        let text = make_feedback(2, "1*crit", &h, &b, &[]);
        assert!(text.contains("infeasible: bad"));
        assert_eq!(failure_cases(&h, &b), vec![FailureCase { graph: "bad".into(), infeasible: true, delta: 0 }]);
    }

    #[test]
    fn reports_five_worst() {
        let h: Vec<_> = (0..10).map(|i| row(&format!("g{i}"), 10 + i, true)).collect();
        let b: Vec<_> = (0..10).map(|i| row(&format!("g{i}"), 9, true)).collect();
        let cases: Vec<_> = (0..10).map(|i| GraphCase::new(format!("g{i}"), chain(3, 1))).collect();
        let text = make_feedback(1, "1*fanin", &h, &b, &cases);
        assert!(text.contains("10 regressions"));
        let listed: Vec<&str> = text.lines().filter(|l| l.starts_with("- ")).collect();
        assert_eq!(listed.len(), 5);
        for (line, g) in listed.iter().zip(["g9", "g8", "g7", "g6", "g5"]) {
            assert!(line.starts_with(&format!("- {g} ")), "{line}");
        }
        assert!(listed[0].contains("+10") && listed[0].contains("cp/n=1.0000"));
    }
}
