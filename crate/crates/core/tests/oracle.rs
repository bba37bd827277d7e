use iov_offload::domain::{Assignment, Gene, Scenario};
use iov_offload::oracle::solve_exhaustive;
use iov_offload::workload::{generate_scenario, WorkloadSpec};
use iov_offload::{Evaluator, OffloadError};

fn spec(requests: usize, clouds: usize) -> WorkloadSpec {
    WorkloadSpec {
        requests,
        edges: 1,
        clouds,
        edge_types: vec![1],
        max_latency_s: 1.1,
        max_proc_s: 1.9,
        max_deadline_s: 2.0,
        ..WorkloadSpec::default()
    }
}

/// Every assignment, generated by nested counting from the last value down.
fn all_reversed(requests: usize, alphabet: usize) -> Vec<Assignment> {
    let mut out = vec![Vec::new()];
    for _ in 0..requests {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Gene>| {
                (0..alphabet).rev().map(move |g| {
                    let mut p = prefix.clone();
                    p.push(Gene::from_index(g));
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Assignment::new).collect()
}

#[test]
fn two_choices_for_one_request() {
    let s = generate_scenario(&spec(1, 1), 3).unwrap();
    let r = solve_exhaustive(&s, 10).unwrap();
    assert_eq!(r.enumeration_count, 2);
    let ev = Evaluator::new(&s).unwrap();
    let edge = ev.score(&Assignment::all_home_edge(1)).unwrap().total_time_s;
    let cloud = ev.score(&Assignment::new(vec![Gene::cloud(0)])).unwrap().total_time_s;
    assert_eq!(r.best_unconstrained.score.total_time_s, edge.min(cloud));
}

#[test]
fn matches_independent_reverse_enumeration() {
    for seed in 0..5 {
        let s: Scenario = generate_scenario(&spec(4, 2), seed).unwrap();
        let r = solve_exhaustive(&s, 1_000).unwrap();
        assert_eq!(r.enumeration_count, 81);

        let ev = Evaluator::new(&s).unwrap();
        let mut best: Option<(f64, Assignment)> = None;
        let mut fastest: Option<(f64, Assignment)> = None;
        for a in all_reversed(4, 3) {
            let sc = ev.score(&a).unwrap();
            let t = sc.total_time_s;
            let better = |b: &Option<(f64, Assignment)>| {
                b.as_ref().is_none_or(|(bt, ba)| t < *bt || (t == *bt && a < *ba))
            };
            if better(&fastest) {
                fastest = Some((t, a.clone()));
            }
            if sc.feasible() && better(&best) {
                best = Some((t, a.clone()));
            }
        }
        assert_eq!(r.best_unconstrained.assignment, fastest.unwrap().1);
        match (&r.best_feasible, best) {
            (Some(f), Some((t, a))) => {
                assert_eq!(f.assignment, a);
                assert_eq!(f.score.total_time_s, t);
                assert!(f.score.feasible());
            }
            (None, None) => {}
            (got, want) => panic!("feasible optimum mismatch: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn best_feasible_dominates_every_feasible_assignment() {
    let s = generate_scenario(&spec(5, 2), 12).unwrap();
    let r = solve_exhaustive(&s, 1_000).unwrap();
    let ev = Evaluator::new(&s).unwrap();
    let all = all_reversed(5, 3);
    let feasible: Vec<f64> = all
        .iter()
        .map(|a| ev.score(a).unwrap())
        .filter(|s| s.feasible())
        .map(|s| s.total_time_s)
        .collect();
    if let Some(f) = &r.best_feasible {
        assert!(feasible.iter().all(|&t| f.score.total_time_s <= t));
    } else {
        assert!(feasible.is_empty());
    }
    assert_eq!(r.frame.population_size, all.len());
    assert_eq!(r.frame.feasible_count, feasible.len());
}

#[test]
fn impossible_latency_has_no_feasible_optimum() {
    let s = generate_scenario(
        &WorkloadSpec {
            max_latency_s: 1e-6,
            ..spec(3, 2)
        },
        4,
    )
    .unwrap();
    let r = solve_exhaustive(&s, 1_000).unwrap();
    assert!(r.best_feasible.is_none());
    assert_eq!(r.optimum(), &r.best_overall_penalized);
    assert!(r.best_overall_penalized.score.violations.counts.lat > 0);
}

#[test]
fn too_large_instance_is_refused() {
    let s = generate_scenario(&WorkloadSpec::default(), 0).unwrap();
    match solve_exhaustive(&s, 1_000_000) {
        Err(OffloadError::InstanceTooLarge { required, limit }) => {
            assert_eq!(required, 21u128.pow(20));
            assert_eq!(limit, 1_000_000);
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}
