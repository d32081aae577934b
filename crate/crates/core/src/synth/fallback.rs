//! Deterministic heuristic synthesis used when no external provider is
//! available or the provider fails.

use std::collections::BTreeMap;

use crate::dsl::{Feature, PriorityExpr};
use crate::kernels::Kernel;
use crate::scalar::Real;
use crate::scheduler::RuntimeMode;
use crate::synth::config::LoopConfig;
use crate::synth::evaluate::{evaluate, GraphCase};

/// One searchable coefficient: the grid spans `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchAxis {
    pub feature: Feature,
    pub lo: f64,
    pub hi: f64,
    pub start: f64,
}

impl SearchAxis {
    pub fn grid(&self, steps: usize) -> Vec<f64> {
        (0..=steps)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / steps as f64)
            .collect()
    }
}

/// Search basis when no kernel is retrieved: `crit`, `fanout` in `[0, 4]`
/// and `level` in `[-4, 4]`, all starting at weight 1.
pub fn default_basis() -> Vec<SearchAxis> {
    vec![
        SearchAxis { feature: Feature::Crit, lo: 0.0, hi: 4.0, start: 1.0 },
        SearchAxis { feature: Feature::Fanout, lo: 0.0, hi: 4.0, start: 1.0 },
        SearchAxis { feature: Feature::Level, lo: -4.0, hi: 4.0, start: 1.0 },
    ]
}

/// Merges kernel templates term-wise. A feature's range is the hull of the
/// signed slot ranges that mention it; its start is the mean signed default.
pub fn search_space<T: Real>(kernels: &[Kernel<T>]) -> Vec<SearchAxis> {
    if kernels.is_empty() {
        return default_basis();
    }
    let mut acc: BTreeMap<Feature, (f64, f64, f64, usize)> = BTreeMap::new();
    for k in kernels {
        let defaults = k.template.default_weights();
        for (slot, w) in k.template.family.slots().iter().zip(defaults) {
            let (lo, hi) = k.template.range(slot.name);
            let (a, b) = (slot.sign * lo, slot.sign * hi);
            let e = acc.entry(slot.feature).or_insert((f64::INFINITY, f64::NEG_INFINITY, 0.0, 0));
            e.0 = e.0.min(a.min(b));
            e.1 = e.1.max(a.max(b));
            e.2 += slot.sign * w;
            e.3 += 1;
        }
    }
    acc.into_iter()
        .map(|(feature, (lo, hi, sum, n))| SearchAxis {
            feature,
            lo,
            hi,
            start: sum / n as f64,
        })
        .collect()
}

fn objective<T: Real>(coefs: &[f64], axes: &[SearchAxis], batch: &[GraphCase], config: &LoopConfig) -> Option<T> {
    let expr = PriorityExpr::from_terms(axes.iter().zip(coefs).map(|(a, &c)| (T::of(c), a.feature))).ok()?;
    evaluate(&expr, batch, config.lambda, config.mu, RuntimeMode::Zero)
        .ok()
        .map(|e| e.mean_score)
}

/// Coordinate descent over each weight on a fixed grid, maximizing the
/// mean batch score with runtime excluded. Each axis moves to its best
/// grid point; ties keep the current value, then the lowest grid point.
pub fn fallback_synthesize<T: Real>(
    kernels: &[Kernel<T>],
    batch: &[GraphCase],
    config: &LoopConfig,
) -> PriorityExpr<T> {
    let axes = search_space(kernels);
    let mut coefs: Vec<f64> = axes.iter().map(|a| a.start).collect();
    let mut best = objective::<T>(&coefs, &axes, batch, config);
    for _ in 0..config.fallback.sweeps {
        let mut moved = false;
        for i in 0..axes.len() {
            for v in axes[i].grid(config.fallback.grid_steps) {
                if v == coefs[i] {
                    continue;
                }
                let mut trial = coefs.clone();
                trial[i] = v;
                let Some(score) = objective::<T>(&trial, &axes, batch, config) else {
                    continue;
                };
                if best.is_none_or(|b| score > b) {
                    best = Some(score);
                    coefs = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    PriorityExpr::from_terms(axes.iter().zip(&coefs).map(|(a, &c)| (T::of(c), a.feature)))
        .unwrap_or_else(|_| crate::dsl::baseline_priority())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::kernels::{MotifCategory, TemplateFamily, TemplateSpec};
    use crate::features::Embedding;

    fn kernel(id: usize, family: TemplateFamily) -> Kernel<f64> {
        Kernel {
            id,
            category: MotifCategory::Khop,
            signature: Embedding::new(vec![0.0; 3]),
            template: TemplateSpec::new(family),
            support: 1,
        }
    }

    fn zero_cfg() -> LoopConfig {
        LoopConfig { runtime_mode: RuntimeMode::Zero, ..Default::default() }
    }

    #[test]
    fn merged_space() {
        let axes = search_space(&[kernel(0, TemplateFamily::ReconvergentA), kernel(1, TemplateFamily::DeepChainB)]);
        let feats: Vec<_> = axes.iter().map(|a| a.feature).collect();
        assert_eq!(feats, vec![Feature::Crit, Feature::Fanout, Feature::Reconv, Feature::Slack]);
        let slack = axes.iter().find(|a| a.feature == Feature::Slack).unwrap();
        assert_eq!((slack.lo, slack.hi, slack.start), (-4.0, 0.0, -1.0));
        assert_eq!(search_space::<f64>(&[]), default_basis());
    }

    #[test]
    fn kernel_a_on_diamonds_matches_exhaustive_grid() {
        let batch = vec![GraphCase::new("d1", diamond(1)), GraphCase::new("d2", diamond(2))];
        let cfg = zero_cfg();
        let got = fallback_synthesize(&[kernel(0, TemplateFamily::ReconvergentA)], &batch, &cfg);
        assert!(got.features().all(|f| [Feature::Crit, Feature::Reconv, Feature::Fanout].contains(&f)));
        // exhaustive over the same 9^3 grid: nothing beats the descent result
        let score = |e: &PriorityExpr<f64>| evaluate(e, &batch, 0.01, 5000.0, RuntimeMode::Zero).unwrap().mean_score;
        let found = score(&got);
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        let mut best = f64::NEG_INFINITY;
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    if let Ok(e) = PriorityExpr::from_terms([(a, Feature::Crit), (b, Feature::Reconv), (c, Feature::Fanout)]) {
                        best = best.max(score(&e));
                    }
                }
            }
        }
        assert_eq!(found, best);
    }

    #[test]
    fn chains_with_kernel_b_keep_crit() {
        let batch = vec![GraphCase::new("c5", chain(5, 1)), GraphCase::new("c7", chain(7, 2))];
        let got = fallback_synthesize(&[kernel(0, TemplateFamily::DeepChainB)], &batch, &zero_cfg());
        assert_ne!(got.coefficient(Feature::Crit), 0.0);
    }

    #[test]
    fn deterministic() {
        let batch = vec![GraphCase::new("d", diamond(1)), GraphCase::new("f", build(&[1, 2, 3, 1, 1], &[(0, 1), (0, 2), (0, 3), (1, 4), (2, 4)], 1))];
        let a = fallback_synthesize::<f64>(&[], &batch, &zero_cfg());
        let b = fallback_synthesize::<f64>(&[], &batch, &zero_cfg());
        assert_eq!(a, b);
        assert!(a.features().all(|f| [Feature::Crit, Feature::Level, Feature::Fanout].contains(&f)));
    }
}
