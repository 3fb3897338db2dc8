mod common;

use common::*;
use multitensor::multieval::{self, eval_all, eval_naive, eval_sliced, EvalOptions};
use multitensor::network::{build_assignments, to_diagram};
use multitensor::optimizer::{anneal_from, SearchConfig};
use multitensor::plan::{AnnotatedPlan, CostConfig, Multiplicity, Plan, Rule, Tree, Workload};
use multitensor::{NetworkDiagram, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn bits(t: &Tensor) -> Vec<(u64, u64)> {
    t.data()
        .iter()
        .map(|c| (c.re.to_bits(), c.im.to_bits()))
        .collect()
}

fn circuit_instance(
    rng: &mut ChaCha8Rng,
    max_n: usize,
) -> (NetworkDiagram, Vec<String>, Plan, usize) {
    let n = rng.random_range(1..=max_n);
    let g = rng.random_range(0..=24);
    let c = random_circuit(rng, n, g);
    let d = to_diagram(&c, rng.random_bool(0.3)).unwrap();
    let k = rng.random_range(1..=10);
    let reqs = random_bitstrings(rng, n, k);
    let plan = Plan::new(random_connected_tree(rng, &d));
    (d, reqs, plan, n)
}

fn network_plan(
    rng: &mut ChaCha8Rng,
    m: usize,
    mode: Multiplicity,
) -> (RandomNetwork, AnnotatedPlan) {
    let k = rng.random_range(1..=6);
    let net = random_network(rng, m, 3, k);
    let a = &net.assignments;
    let w = Workload::new(
        net.slot_legs.clone(),
        &net.open_legs,
        a.value_counts().iter().map(|&c| c as u64).collect(),
        Some(a.tuples.clone()),
    )
    .unwrap();
    let cfg = CostConfig::default().with_k(a.tuples.len() as u64);
    let ap = AnnotatedPlan::new(Arc::new(w), Plan::new(random_tree(rng, m)), cfg, mode).unwrap();
    (net, ap)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn plan_text_round_trips(seed in any::<u64>(), m in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plan = Plan::new(random_tree(&mut rng, m));
        if m > 1 {
            plan.sliced = (0..rng.random_range(0..4)).map(|i| i * 3 + 1).collect();
        }
        let text = plan.to_text();
        let back = Plan::parse(&text).unwrap();
        prop_assert_eq!(&back, &plan);
        prop_assert_eq!(back.to_text(), text);
        prop_assert_eq!(Tree::parse_expr(&plan.tree.to_expr()).unwrap().leaf_order(), plan.tree.leaf_order());
    }

    #[test]
    fn rewrite_then_inverse_restores(seed in any::<u64>(), m in 3usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, m);
        for n in tree.internal_nodes() {
            for rule in Rule::ALL {
                if tree.applicable(n, rule) {
                    let mut t = tree.clone();
                    t.apply(n, rule).unwrap();
                    t.validate().unwrap();
                    t.apply(n, rule).unwrap();
                    prop_assert_eq!(&t, &tree);
                }
            }
        }
    }

    #[test]
    fn delta_cost_matches_recomputation(seed in any::<u64>(), m in 3usize..=8, exact in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = if exact { Multiplicity::Exact } else { Multiplicity::Bound };
        let (_, mut ap) = network_plan(&mut rng, m, mode);
        for _ in 0..20 {
            let n = rng.random_range(m..2 * m - 1);
            for rule in Rule::ALL {
                if !ap.tree().applicable(n, rule) {
                    continue;
                }
                let delta = ap.delta_cost(n, rule).unwrap();
                let before = ap.total_cost().unwrap() as i128;
                let mut fresh = ap.clone();
                fresh.rewrite(n, rule).unwrap();
                let full = AnnotatedPlan::new(ap.workload().clone(), fresh.plan().clone(), *ap.config(), mode).unwrap();
                prop_assert_eq!(delta, before - full.total_cost().unwrap() as i128);
                prop_assert_eq!(fresh.total_rw().unwrap(), full.total_rw().unwrap());
                let (x, y) = (fresh.memory_estimate(), full.memory_estimate());
                prop_assert_eq!(x.to_bits(), y.to_bits(), "memory {} vs {}", x, y);
            }
            let applicable: Vec<Rule> = Rule::ALL.into_iter().filter(|&r| ap.tree().applicable(n, r)).collect();
            if let Some(&r) = applicable.first() {
                ap.rewrite(n, r).unwrap();
            }
        }
    }

    #[test]
    fn rewrites_preserve_value(seed in any::<u64>(), m in 3usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, mut ap) = network_plan(&mut rng, m, Multiplicity::Bound);
        let a = &net.assignments;
        let want = eval_independent(ap.plan(), a);
        for _ in 0..10 {
            let n = rng.random_range(m..2 * m - 1);
            let r = Rule::ALL[rng.random_range(0..4)];
            if ap.tree().applicable(n, r) {
                ap.rewrite(n, r).unwrap();
            }
        }
        let got = eval_all(ap.plan(), a, &EvalOptions::default()).unwrap();
        for (x, y) in got.values.iter().zip(&want) {
            prop_assert!(x.max_abs_diff(y).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn memory_monotone_in_k(seed in any::<u64>(), m in 2usize..=8, k1 in 1u64..50, k2 in 1u64..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, m, 4, 1);
        let vc = net.assignments.value_counts().iter().map(|&c| c as u64).collect();
        let w = Arc::new(Workload::new(net.slot_legs.clone(), &net.open_legs, vc, None).unwrap());
        let plan = Plan::new(random_tree(&mut rng, m));
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        let at = |k| AnnotatedPlan::new(w.clone(), plan.clone(), CostConfig::default().with_k(k), Multiplicity::Bound).unwrap();
        let (a, b) = (at(lo), at(hi));
        prop_assert!(a.memory_estimate() <= b.memory_estimate());
        prop_assert!(a.total_cost().unwrap() <= b.total_cost().unwrap());
    }

    #[test]
    fn slicing_trades_memory_for_cost(seed in any::<u64>(), m in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, mut ap) = network_plan(&mut rng, m, Multiplicity::Bound);
        let closed = ap.workload().closed_legs();
        for leg in closed.into_iter().take(3) {
            let (mem, cost) = (ap.memory_estimate(), ap.total_cost().unwrap());
            ap.slice(leg).unwrap();
            prop_assert!(ap.memory_estimate() <= mem);
            prop_assert!(ap.total_cost().unwrap() >= cost);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn naive_and_split_caches_agree_bitwise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, reqs, plan, _) = circuit_instance(&mut rng, 8);
        let a = build_assignments(&d, &reqs, &[]).unwrap();
        let split = eval_all(&plan, &a, &EvalOptions::default()).unwrap();
        let naive = eval_naive(&plan, &a, &EvalOptions::default()).unwrap();
        prop_assert_eq!(split.values.len(), naive.values.len());
        for (x, y) in split.values.iter().zip(&naive.values) {
            prop_assert_eq!(bits(x), bits(y));
        }
        prop_assert_eq!(split.node_contractions, naive.node_contractions);
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, reqs, mut plan, _) = circuit_instance(&mut rng, 6);
        let closed: Vec<_> = d.closed_legs().collect();
        if closed.is_empty() {
            return Ok(());
        }
        for _ in 0..rng.random_range(1..=3) {
            let leg = closed[rng.random_range(0..closed.len())];
            if !plan.sliced.contains(&leg) {
                plan.sliced.push(leg);
            }
        }
        let a = build_assignments(&d, &reqs, &[]).unwrap();
        let one = eval_sliced(&plan, &a, 1, &EvalOptions::default()).unwrap();
        let four = eval_sliced(&plan, &a, 4, &EvalOptions::default()).unwrap();
        for (x, y) in one.values.iter().zip(&four.values) {
            prop_assert_eq!(bits(x), bits(y));
        }
        prop_assert_eq!(one.counters, four.counters);
    }

    #[test]
    fn amplitudes_are_normalized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=8);
        let g = rng.random_range(0..=30);
        let c = random_circuit(&mut rng, n, g);
        let d = to_diagram(&c, false).unwrap();
        let all: Vec<String> = (0..1usize << n).map(|i| bits_of(i, n)).collect();
        let a = build_assignments(&d, &all, &[]).unwrap();
        let plan = Plan::new(random_connected_tree(&mut rng, &d));
        let r = eval_all(&plan, &a, &EvalOptions::default()).unwrap();
        let norm: f64 = r.amplitudes().iter().map(|x| x.unwrap().norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-10, "norm {}", norm);
    }
}

#[test]
fn hill_climbing_only_improves() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = grid_circuit(&mut rng, 2, 3, 4);
    let d = to_diagram(&c, false).unwrap();
    let w = Arc::new(Workload::single(&d).unwrap());
    let initial = AnnotatedPlan::new(
        w,
        Plan::left_deep(d.num_slots()).unwrap(),
        CostConfig::default(),
        Multiplicity::Bound,
    )
    .unwrap();
    let sc = SearchConfig {
        steps: 20_000,
        temp_init: 0.0,
        temp_final: 0.0,
        slice_interval: u64::MAX,
        ..SearchConfig::default()
    };
    let out = anneal_from(&initial, &sc).unwrap();
    assert!(out.objective <= initial.objective().unwrap());
    assert!(out.best_history.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn annealed_plan_gives_same_amplitudes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let c = grid_circuit(&mut rng, 2, 3, 6);
    let d = to_diagram(&c, true).unwrap();
    let reqs = random_bitstrings(&mut rng, 6, 20);
    let a = build_assignments(&d, &reqs, &[]).unwrap();
    let w = Arc::new(Workload::from_assignments(&d, &a).unwrap());
    let cfg = CostConfig::default().with_k(20);
    let initial = AnnotatedPlan::new(
        w,
        Plan::left_deep(d.num_slots()).unwrap(),
        cfg,
        Multiplicity::Exact,
    )
    .unwrap();
    let sc = SearchConfig {
        steps: 30_000,
        slice_interval: 5_000,
        ..SearchConfig::default()
    };
    let out = anneal_from(&initial, &sc).unwrap();
    let psi = state_vector(&c);
    let got = eval_sliced(&out.plan, &a, 2, &EvalOptions::default()).unwrap();
    for (b, amp) in reqs.iter().zip(got.amplitudes()) {
        assert!((amp.unwrap() - psi[index_of(b)]).norm() < 1e-12);
    }
}

#[test]
fn memory_heuristic_tracks_emulated_peak() {
    let c = multitensor::parse_circuit(FIG_CIRCUIT).unwrap();
    let d = to_diagram(&c, false).unwrap();
    let a = build_assignments(&d, &["000", "100", "111"], &[]).unwrap();
    let plan = Plan::parse(FIG_PLAN).unwrap();
    let w = Arc::new(Workload::from_assignments(&d, &a).unwrap());
    for mode in [Multiplicity::Bound, Multiplicity::Exact] {
        let ap = AnnotatedPlan::new(
            w.clone(),
            plan.clone(),
            CostConfig::default().with_k(3),
            mode,
        )
        .unwrap();
        let est = ap.memory_estimate();
        let peak = multieval::emulate(&plan, &a, &EvalOptions::default())
            .unwrap()
            .peak_bytes as f64;
        assert!(
            peak / 4.0 <= est && est <= 4.0 * peak,
            "{mode:?}: estimate {est} vs peak {peak}"
        );
    }
}
