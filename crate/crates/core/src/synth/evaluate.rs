//! Per-graph scoring and validation-set means.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::GraphStats;
use crate::dsl::PriorityExpr;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::Real;
use crate::scheduler::{list_schedule, verify_schedule, RuntimeMode, Schedule};

/// A named graph with its structural statistics precomputed.
#[derive(Debug, Clone)]
pub struct GraphCase {
    pub name: String,
    pub dag: Dag,
    pub stats: GraphStats,
}

impl GraphCase {
    pub fn new(name: impl Into<String>, dag: Dag) -> Self {
        let stats = GraphStats::compute(&dag);
        GraphCase {
            name: name.into(),
            dag,
            stats,
        }
    }

    /// Cases named `{prefix}{index:03}`.
    pub fn numbered(prefix: &str, dags: Vec<Dag>) -> Vec<GraphCase> {
        dags.into_iter()
            .enumerate()
            .map(|(i, d)| GraphCase::new(format!("{prefix}{i:03}"), d))
            .collect()
    }
}

/// `J = -L - lambda * T_run - mu * [infeasible]`.
pub fn score<T: Real>(schedule: &Schedule, lambda: T, mu: T) -> T {
    let penalty = if schedule.feasible { T::zero() } else { mu };
    -T::of_u64(schedule.makespan) - lambda * T::of(schedule.runtime_ms) - penalty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GraphResult<T: Real = f64> {
    pub graph: String,
    pub latency: u64,
    pub runtime_ms: f64,
    pub feasible: bool,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Evaluation<T: Real = f64> {
    pub per_graph: Vec<GraphResult<T>>,
    pub mean_score: T,
}

impl<T: Real> Evaluation<T> {
    pub fn mean_latency(&self) -> f64 {
        let n = self.per_graph.len().max(1) as f64;
        self.per_graph.iter().map(|r| r.latency as f64).sum::<f64>() / n
    }

    pub fn mean_runtime_ms(&self) -> f64 {
        let n = self.per_graph.len().max(1) as f64;
        self.per_graph.iter().map(|r| r.runtime_ms).sum::<f64>() / n
    }
}

/// Schedules every case with `expr` and scores it. Each schedule is
/// re-verified; a violation is an internal invariant failure.
pub fn evaluate<T: Real>(
    expr: &PriorityExpr<T>,
    cases: &[GraphCase],
    lambda: f64,
    mu: f64,
    mode: RuntimeMode,
) -> Result<Evaluation<T>> {
    if cases.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let (lambda, mu) = (T::of(lambda), T::of(mu));
    let per_graph = cases
        .par_iter()
        .map(|case| {
            let s = list_schedule(&case.dag, &case.stats, expr, mode);
            let violations = verify_schedule(&case.dag, &s);
            if !violations.is_empty() {
                return Err(Error::Invariant(format!(
                    "schedule for {} violates constraints: {violations:?}",
                    case.name
                )));
            }
            Ok(GraphResult {
                graph: case.name.clone(),
                latency: s.makespan,
                runtime_ms: s.runtime_ms,
                feasible: s.feasible,
                score: score(&s, lambda, mu),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_score = mean(per_graph.iter().map(|r| r.score))?;
    Ok(Evaluation {
        per_graph,
        mean_score,
    })
}

/// Arithmetic mean of per-graph scores.
pub fn mean<T: Real>(values: impl IntoIterator<Item = T>) -> Result<T> {
    let (sum, n) = values
        .into_iter()
        .fold((T::zero(), 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        return Err(Error::EmptyValidation);
    }
    Ok(sum / T::of_usize(n))
}

pub fn mean_score<T: Real>(
    expr: &PriorityExpr<T>,
    cases: &[GraphCase],
    lambda: f64,
    mu: f64,
    mode: RuntimeMode,
) -> Result<T> {
    Ok(evaluate(expr, cases, lambda, mu, mode)?.mean_score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    fn sched(makespan: u64, runtime_ms: f64, feasible: bool) -> Schedule {
        Schedule {
            starts: vec![],
            makespan,
            feasible,
            runtime_ms,
        }
    }

    #[test]
    fn scores() {
        let j: f64 = score(&sched(50, 80.0, true), 0.01, 5000.0);
        assert!((j - -50.8).abs() < 1e-12);
        assert_eq!(score(&sched(50, 0.0, false), 0.01, 5000.0), -5050.0);
        assert_eq!(score::<f64>(&sched(0, 0.0, true), 0.01, 5000.0), 0.0);
    }

    #[test]
    fn feasibility_flip_costs_mu() {
        let a: f64 = score(&sched(17, 3.5, true), 0.01, 5000.0);
        let b: f64 = score(&sched(17, 3.5, false), 0.01, 5000.0);
        assert_eq!(a - b, 5000.0);
    }

    #[test]
    fn means() {
        assert_eq!(mean([-10.0, -20.0]).unwrap(), -15.0);
        assert_eq!(mean([-3.0]).unwrap(), -3.0);
        assert!(matches!(mean::<f64>([]), Err(Error::EmptyValidation)));
    }

    #[test]
    fn evaluates_cases() {
        let cases = vec![GraphCase::new("d1", diamond(1)), GraphCase::new("d2", diamond(2))];
        let e = evaluate(&PriorityExpr::<f64>::parse("level").unwrap(), &cases, 0.01, 5000.0, RuntimeMode::Zero).unwrap();
        assert_eq!(e.per_graph[0].latency, 4);
        assert_eq!(e.per_graph[1].latency, 3);
        assert_eq!(e.mean_score, -3.5);
        assert!(matches!(
            evaluate(&PriorityExpr::<f64>::parse("level").unwrap(), &[], 0.01, 5000.0, RuntimeMode::Zero),
            Err(Error::EmptyValidation)
        ));
    }

    #[test]
    fn all_infeasible_mean_is_minus_mu() {
        let j: f64 = score(&sched(0, 0.0, false), 0.01, 5000.0);
        assert_eq!(mean([j, j, j]).unwrap(), -5000.0);
    }

    #[test]
    fn empty_graph_scores_zero() {
        let cases = vec![GraphCase::new("e", Dag::new(vec![], [], caps(&[("alu", 1)])).unwrap())];
        let e = evaluate(&PriorityExpr::<f64>::parse("crit").unwrap(), &cases, 0.01, 5000.0, RuntimeMode::Zero).unwrap();
        assert_eq!(e.mean_score, 0.0);
    }
}
