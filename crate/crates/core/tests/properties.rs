mod common;

use kernsched::analysis::{compute_crit, compute_levels, compute_reconv, critical_path_length, GraphStats};
use kernsched::bench::summarize;
use kernsched::dsl::{Feature, PriorityExpr};
use kernsched::features::{cosine_sim, Embedding, Normalizer, TypeVocabulary};
use kernsched::kernels::{ClusterConfig, KernelLibrary, MiningConfig};
use kernsched::scheduler::{list_schedule, optimal_makespan, verify_schedule, RuntimeMode, Schedule};
use kernsched::synth::score;
use kernsched::{Dag, NodeRecord};
use proptest::prelude::*;

fn arb_dag(max_n: usize) -> impl Strategy<Value = Dag> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(1u32..=3, n),
            prop::collection::vec(0usize..2, n),
            prop::collection::vec(prop::bool::weighted(0.3), n * (n - 1) / 2),
            1u32..=3,
            1u32..=2,
        )
            .prop_map(move |(durs, types, bits, ra, rb)| {
                let names = ["alu", "mul"];
                let nodes = (0..n)
                    .map(|id| NodeRecord { id, op_type: names[types[id]].into(), duration: durs[id] })
                    .collect();
                let mut edges = Vec::new();
                let mut k = 0;
                for u in 0..n {
                    for v in u + 1..n {
                        if bits[k] {
                            edges.push((u, v));
                        }
                        k += 1;
                    }
                }
                let caps = [("alu".to_string(), ra), ("mul".to_string(), rb)].into_iter().collect();
                Dag::new(nodes, edges, caps).unwrap()
            })
    })
}

fn arb_expr() -> impl Strategy<Value = PriorityExpr<f64>> {
    prop::collection::vec((-8i32..=8, 0usize..Feature::ALL.len()), 1..5).prop_filter_map("all zero", |terms| {
        PriorityExpr::from_terms(terms.into_iter().map(|(c, f)| (c as f64 / 2.0, Feature::ALL[f]))).ok()
    })
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn strict(expr: &PriorityExpr<f64>, stats: &GraphStats) -> bool {
    let mut v: Vec<f64> = (0..stats.len()).map(|i| expr.eval(stats, i)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.windows(2).all(|w| w[0] != w[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schedules_are_feasible_and_bounded(g in arb_dag(14), e in arb_expr()) {
        let stats = GraphStats::compute(&g);
        let s = list_schedule(&g, &stats, &e, RuntimeMode::Zero);
        prop_assert!(verify_schedule(&g, &s).is_empty());
        prop_assert!(common::check_schedule(&g, &s).is_ok());
        prop_assert!(s.makespan >= stats.makespan_lower_bound(&g));
    }

    #[test]
    fn greedy_never_beats_optimum(g in arb_dag(8), e in arb_expr()) {
        let stats = GraphStats::compute(&g);
        let s = list_schedule(&g, &stats, &e, RuntimeMode::Zero);
        prop_assert!(s.makespan >= optimal_makespan(&g).unwrap());
    }

    #[test]
    fn relabeling_keeps_makespan((g, perm) in arb_dag(12).prop_flat_map(|g| { let n = g.len(); (Just(g), arb_perm(n)) }), e in arb_expr()) {
        let stats = GraphStats::compute(&g);
        prop_assume!(strict(&e, &stats));
        let h = g.relabel(&perm).unwrap();
        let a = list_schedule(&g, &stats, &e, RuntimeMode::Zero);
        let b = list_schedule(&h, &GraphStats::compute(&h), &e, RuntimeMode::Zero);
        prop_assert_eq!(a.makespan, b.makespan);
    }

    #[test]
    fn level_plus_crit_bounded_by_critical_path(g in arb_dag(14)) {
        let (l, c) = (compute_levels(&g), compute_crit(&g));
        let cp = critical_path_length(&l, &c);
        prop_assert!((0..g.len()).all(|v| l[v] + c[v] <= cp));
        prop_assert!((0..g.len()).any(|v| l[v] + c[v] == cp));
    }

    #[test]
    fn analyses_match_enumeration(g in arb_dag(10)) {
        let (c, r) = (compute_crit(&g), compute_reconv(&g));
        for v in 0..g.len() {
            prop_assert_eq!(c[v], common::crit(&g, v));
            prop_assert_eq!(r[v], common::reconv(&g, v));
        }
        prop_assert_eq!(GraphStats::compute(&g), GraphStats::compute(&g));
    }

    #[test]
    fn round_trip(e in arb_expr()) {
        prop_assert_eq!(PriorityExpr::<f64>::parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn positive_scaling_keeps_schedule(g in arb_dag(12), e in arb_expr(), k in 0.01f64..100.0) {
        let stats = GraphStats::compute(&g);
        prop_assume!(strict(&e, &stats));
        let a = list_schedule(&g, &stats, &e, RuntimeMode::Zero);
        let b = list_schedule(&g, &stats, &e.scale(k).unwrap(), RuntimeMode::Zero);
        prop_assert_eq!(a.starts, b.starts);
    }

    #[test]
    fn eval_is_linear(g in arb_dag(10), a in arb_expr(), b in arb_expr()) {
        let stats = GraphStats::compute(&g);
        if let Ok(m) = a.merge(&b) {
            for v in 0..g.len() {
                let lhs = m.eval(&stats, v);
                let rhs = a.eval(&stats, v) + b.eval(&stats, v);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn embedding_ignores_ids((g, perm) in arb_dag(12).prop_flat_map(|g| { let n = g.len(); (Just(g), arb_perm(n)) })) {
        let vocab = TypeVocabulary::new(["alu", "mul"]);
        let h = g.relabel(&perm).unwrap();
        let a: Embedding<f64> = vocab.embed(&g, &GraphStats::compute(&g)).unwrap();
        let b: Embedding<f64> = vocab.embed(&h, &GraphStats::compute(&h)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cosine_scale_invariant(
        (a, b) in (1usize..20).prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n))),
        beta in 0.001f64..1000.0,
    ) {
        let scaled: Vec<f64> = a.iter().map(|x| x * beta).collect();
        let (s1, s2) = (cosine_sim(&a, &b).unwrap(), cosine_sim(&scaled, &b).unwrap());
        prop_assert!((s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0));
    }

    #[test]
    fn normalizer_standardizes(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 2..30)) {
        let samples: Vec<Embedding<f64>> = rows.iter().cloned().map(Embedding::new).collect();
        let norm = Normalizer::fit(&samples).unwrap();
        let out: Vec<Vec<f64>> = samples.iter().map(|s| norm.apply(s).unwrap().values).collect();
        let n = out.len() as f64;
        for d in 0..4 {
            let mean = out.iter().map(|r| r[d]).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if norm.std[d] > 0.0 {
                let var = out.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn score_is_monotone(l in 0u64..10_000, dl in 1u64..100, t in 0.0f64..1000.0) {
        let s = |makespan, feasible| Schedule { starts: vec![], makespan, feasible, runtime_ms: t };
        let (a, b): (f64, f64) = (score(&s(l, true), 0.01, 5000.0), score(&s(l + dl, true), 0.01, 5000.0));
        prop_assert!(a > b);
        let c: f64 = score(&s(l, false), 0.01, 5000.0);
        prop_assert!((a - c - 5000.0).abs() < 1e-9);
    }

    #[test]
    fn summary_interval_nonnegative(xs in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let s = summarize(&xs).unwrap();
        prop_assert!(s.ci95 >= 0.0);
        prop_assert_eq!(s.std_defined, xs.len() > 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn library_build_is_deterministic(graphs in prop::collection::vec(arb_dag(12), 2..6)) {
        let vocab = TypeVocabulary::from_graphs(&graphs);
        let build = || KernelLibrary::<f64>::build(&graphs, vocab.clone(), &MiningConfig::default(), &ClusterConfig::default()).unwrap().to_json();
        let a = build();
        prop_assert_eq!(&a, &build());
        let back = KernelLibrary::<f64>::from_json(&a).unwrap();
        prop_assert_eq!(back.to_json(), a);
    }
}
