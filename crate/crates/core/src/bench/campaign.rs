//! Ablation campaigns: run the loop once per mode and compare the best
//! heuristic of each against the level baseline on the validation suite.

use std::fmt::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bench::summary::{summarize, StatsSummary, Z95};
use crate::dsl::{baseline_priority, PriorityExpr};
use crate::error::{Error, Result};
use crate::kernels::KernelLibrary;
use crate::scalar::Real;
use crate::scheduler::{list_schedule, verify_schedule, RuntimeMode};
use crate::synth::{run_loop, Ablation, GraphCase, LoopConfig, Provider};

/// Latencies and scheduling runtimes of one heuristic over the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRow {
    pub label: String,
    pub heuristic: String,
    pub latencies: Vec<u64>,
    pub runtime_ms: Vec<f64>,
    pub latency: StatsSummary<f64>,
    pub mean_runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: Ablation,
    pub best_iteration: usize,
    pub mean_score: f64,
    pub row: HeuristicRow,
    /// Mean runtime over the baseline's; absent when the baseline mean is 0.
    pub runtime_ratio: Option<f64>,
    /// Relative mean-latency reduction against the baseline.
    pub latency_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub interval: String,
    pub seed: u64,
    pub runtime_mode: RuntimeMode,
    pub timing_repeats: usize,
    pub config: LoopConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub graphs: Vec<String>,
    pub baseline: HeuristicRow,
    pub modes: Vec<ModeResult>,
    pub metadata: ReportMetadata,
}

/// Schedules every case with each heuristic, interleaving heuristics per
/// graph so clock drift hits all of them alike. Runtime is the minimum over
/// `repeats` runs.
pub fn measure<T: Real>(
    exprs: &[(&str, &PriorityExpr<T>)],
    cases: &[GraphCase],
    mode: RuntimeMode,
    repeats: usize,
) -> Result<Vec<HeuristicRow>> {
    if cases.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let mut latencies = vec![Vec::with_capacity(cases.len()); exprs.len()];
    let mut runtimes = vec![Vec::with_capacity(cases.len()); exprs.len()];
    for case in cases {
        let mut best = vec![f64::INFINITY; exprs.len()];
        for rep in 0..repeats.max(1) {
            for (i, (_, e)) in exprs.iter().enumerate() {
                let t0 = Instant::now();
                let s = list_schedule(&case.dag, &case.stats, *e, RuntimeMode::Zero);
                let ms = match mode {
                    RuntimeMode::Wallclock => t0.elapsed().as_secs_f64() * 1e3,
                    RuntimeMode::Zero => 0.0,
                };
                let v = verify_schedule(&case.dag, &s);
                if !v.is_empty() {
                    return Err(Error::Invariant(format!("{}: {v:?}", case.name)));
                }
                if rep == 0 {
                    latencies[i].push(s.makespan);
                }
                best[i] = best[i].min(ms);
            }
        }
        for (i, b) in best.into_iter().enumerate() {
            runtimes[i].push(b);
        }
    }
    exprs
        .iter()
        .zip(latencies.into_iter().zip(runtimes))
        .map(|((label, e), (lat, rt))| {
            let as_f: Vec<f64> = lat.iter().map(|&l| l as f64).collect();
            Ok(HeuristicRow {
                label: label.to_string(),
                heuristic: e.to_string(),
                latency: summarize(&as_f)?,
                mean_runtime_ms: rt.iter().sum::<f64>() / rt.len() as f64,
                latencies: lat,
                runtime_ms: rt,
            })
        })
        .collect()
}

/// Runs the loop for each mode in order. `make_provider` builds a fresh
/// provider per mode.
pub fn run_campaign<T: Real>(
    train: &[GraphCase],
    val: &[GraphCase],
    library: Option<&KernelLibrary<T>>,
    modes: &[Ablation],
    config: &LoopConfig,
    timing_repeats: usize,
    make_provider: &mut dyn FnMut(Ablation) -> Result<Box<dyn Provider<T>>>,
) -> Result<CampaignReport> {
    config.validate()?;
    if let Some(m) = modes.iter().find(|m| m.needs_library() && library.is_none()) {
        return Err(Error::Config(format!("ablation {m} needs a kernel library")));
    }
    let mut bests = Vec::with_capacity(modes.len());
    for &mode in modes {
        let cfg = LoopConfig { ablation: mode, ..config.clone() };
        let mut provider = make_provider(mode)?;
        let history = run_loop(train, val, library, &cfg, provider.as_mut())?;
        bests.push((mode, history.best));
    }
    let base = baseline_priority::<T>();
    let mut exprs: Vec<(&str, &PriorityExpr<T>)> = vec![("baseline", &base)];
    for (mode, b) in &bests {
        exprs.push((mode.name(), &b.heuristic));
    }
    let mut rows = measure(&exprs, val, config.runtime_mode, timing_repeats)?.into_iter();
    let baseline = rows.next().expect("baseline row");
    let modes = bests
        .iter()
        .zip(rows)
        .map(|((mode, best), row)| ModeResult {
            mode: *mode,
            best_iteration: best.iteration,
            mean_score: best.mean_score.as_f64(),
            runtime_ratio: (baseline.mean_runtime_ms > 0.0).then(|| row.mean_runtime_ms / baseline.mean_runtime_ms),
            latency_gain: 1.0 - row.latency.mean / baseline.latency.mean,
            row,
        })
        .collect();
    Ok(CampaignReport {
        graphs: val.iter().map(|c| c.name.clone()).collect(),
        baseline,
        modes,
        metadata: ReportMetadata {
            interval: format!("normal approximation, z = {Z95}, n = number of validation graphs"),
            seed: config.seed,
            runtime_mode: config.runtime_mode,
            timing_repeats: timing_repeats.max(1),
            config: config.clone(),
        },
    })
}

impl CampaignReport {
    pub fn rows(&self) -> impl Iterator<Item = &HeuristicRow> {
        std::iter::once(&self.baseline).chain(self.modes.iter().map(|m| &m.row))
    }

    pub fn mode(&self, mode: Ablation) -> Option<&ModeResult> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-graph latency rows: `graph,baseline,<mode>...`.
    pub fn to_csv(&self) -> String {
        let labels: Vec<&str> = self.rows().map(|r| r.label.as_str()).collect();
        let mut out = format!("graph,{}\n", labels.join(","));
        for (i, g) in self.graphs.iter().enumerate() {
            let cells: Vec<String> = self.rows().map(|r| r.latencies[i].to_string()).collect();
            let _ = writeln!(out, "{g},{}", cells.join(","));
        }
        out
    }

    /// Aligned table: per-graph latencies, then summary rows.
    pub fn to_text(&self) -> String {
        let labels: Vec<&str> = self.rows().map(|r| r.label.as_str()).collect();
        let mut table: Vec<Vec<String>> = vec![std::iter::once("graph".to_string())
            .chain(labels.iter().map(|s| s.to_string()))
            .collect()];
        for (i, g) in self.graphs.iter().enumerate() {
            table.push(
                std::iter::once(g.clone())
                    .chain(self.rows().map(|r| r.latencies[i].to_string()))
                    .collect(),
            );
        }
        let stat = |name: &str, f: &dyn Fn(&HeuristicRow) -> String| -> Vec<String> {
            std::iter::once(name.to_string()).chain(self.rows().map(f)).collect()
        };
        table.push(stat("mean", &|r| format!("{:.2}", r.latency.mean)));
        table.push(stat("std", &|r| format!("{:.2}", r.latency.std)));
        table.push(stat("ci95", &|r| format!("{:.2}", r.latency.ci95)));
        table.push(stat("runtime_ms", &|r| format!("{:.4}", r.mean_runtime_ms)));
        let mut ratio = vec!["runtime_ratio".to_string(), "1.00".to_string()];
        let mut gain = vec!["latency_gain".to_string(), "0.00%".to_string()];
        for m in &self.modes {
            ratio.push(m.runtime_ratio.map_or("n/a".into(), |r| format!("{r:.2}")));
            gain.push(format!("{:.2}%", 100.0 * m.latency_gain));
        }
        table.push(ratio);
        table.push(gain);

        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (ri, row) in table.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if ri == 0 || ri == self.graphs.len() {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        for r in self.rows() {
            let _ = writeln!(out, "{}: {}", r.label, r.heuristic);
        }
        let _ = writeln!(out, "interval: {}", self.metadata.interval);
        out
    }
}
