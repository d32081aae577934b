use kernsched::analysis::GraphStats;
use kernsched::bench::{generate_suite, GeneratorSpec};
use kernsched::dsl::PriorityExpr;
use kernsched::features::TypeVocabulary;
use kernsched::kernels::{ClusterConfig, KernelLibrary, MiningConfig};
use kernsched::scheduler::{list_schedule, RuntimeMode};
use kernsched::synth::{run_loop, Ablation, FallbackProvider, GraphCase, LoopConfig, ScriptedProvider};

fn suites() -> (Vec<GraphCase>, Vec<GraphCase>) {
    let train = generate_suite(&GeneratorSpec { seed: 101, ..Default::default() }, 24).unwrap();
    let val = generate_suite(&GeneratorSpec { seed: 102, ..Default::default() }, 20).unwrap();
    (GraphCase::numbered("t", train), GraphCase::numbered("v", val))
}

/// Mean latency by scheduling directly, without the loop's scoring path.
fn mean_latency(expr: &str, cases: &[GraphCase]) -> f64 {
    let e = PriorityExpr::<f64>::parse(expr).unwrap();
    let total: u64 = cases
        .iter()
        .map(|c| list_schedule(&c.dag, &GraphStats::compute(&c.dag), &e, RuntimeMode::Zero).makespan)
        .sum();
    total as f64 / cases.len() as f64
}

#[test]
fn crit_fanout_minus_level_wins_on_contention() {
    let (train, val) = suites();
    let script = ["1*level", "1*crit + 1*fanout - 1*level", "1*fanin"];
    let lat: Vec<f64> = script.iter().map(|s| mean_latency(s, &val)).collect();
    assert!(lat[1] < lat[0] && lat[1] < lat[2], "{lat:?}");

    let config = LoopConfig { ablation: Ablation::NoRetrieval, runtime_mode: RuntimeMode::Zero, ..Default::default() };
    let h = run_loop::<f64>(&train, &val, None, &config, &mut ScriptedProvider::new(script)).unwrap();
    assert_eq!(h.best.iteration, 2);
    assert_eq!(h.best.heuristic.to_string(), script[1]);
    assert_eq!(-h.best.mean_score, lat[1]);
    for r in &h.records {
        assert!(PriorityExpr::<f64>::parse(&r.heuristic.to_string()).is_ok());
        assert!(r.mean_score <= h.best.mean_score);
    }
}

#[test]
fn single_precision_loop() {
    let (train, val) = suites();
    let dags: Vec<_> = train.iter().map(|c| c.dag.clone()).collect();
    let lib = KernelLibrary::<f32>::build(&dags, TypeVocabulary::from_graphs(&dags), &MiningConfig::default(), &ClusterConfig::default()).unwrap();
    let config = LoopConfig { iterations: 2, runtime_mode: RuntimeMode::Zero, ..Default::default() };
    let h = run_loop::<f32>(&train, &val, Some(&lib), &config, &mut FallbackProvider).unwrap();
    assert_eq!(h.records.len(), 2);
    assert!(h.best.mean_score.is_finite());
    let base = mean_latency("1*level", &val);
    assert!(-h.best.mean_score <= base as f32);
}
