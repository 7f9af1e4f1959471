mod common;

use std::collections::BTreeMap;

use hydrosoc_core::engine::{Tables, Trial};
use hydrosoc_core::{run_experiment, run_trial, ModelLevel, SimulationResults};

fn level(n: u8) -> ModelLevel {
    ModelLevel::new(n).unwrap()
}

fn by_key(r: &SimulationResults) -> BTreeMap<u64, (Option<f64>, Option<f64>, u64)> {
    r.agents
        .iter()
        .map(|a| {
            (
                a.stream_key,
                (a.exposure_time, a.warning_time, a.dose.to_bits()),
            )
        })
        .collect()
}

#[test]
fn same_seed_same_results() {
    let net = common::grid();
    for m in 1..=5 {
        let s = common::scenario(m);
        let a = run_trial(&net, &s, level(m), 17).unwrap();
        let b = run_trial(&net, &s, level(m), 17).unwrap();
        assert_eq!(a, b, "model {m}");
    }
}

#[test]
fn model_one_does_not_depend_on_the_seed() {
    let net = common::grid();
    let s = common::scenario(1);
    let a = run_trial(&net, &s, level(1), 1).unwrap();
    let b = run_trial(&net, &s, level(1), 2).unwrap();
    assert_eq!(a.steps, b.steps);
    assert_eq!(by_key(&a), by_key(&b));
    assert!(a.total_exposed() > 0);
}

#[test]
fn relabeling_agents_changes_nothing() {
    let net = common::grid();
    let tables = Tables::default();
    for m in [2, 3, 5] {
        let s = common::scenario(m);
        let plain = Trial::new(&net, &s, &tables, level(m), 4).unwrap();
        let mut shuffled = Trial::new(&net, &s, &tables, level(m), 4).unwrap();
        let mut agents = shuffled.agents().to_vec();
        agents.reverse();
        for (i, a) in agents.iter_mut().enumerate() {
            a.id = i as u32;
        }
        shuffled.set_agents(agents);
        let a = plain.run(&mut ()).unwrap();
        let b = shuffled.run(&mut ()).unwrap();
        assert_eq!(a.steps, b.steps, "model {m}");
        assert_eq!(by_key(&a), by_key(&b), "model {m}");
    }
}

#[test]
fn per_step_records_are_consistent() {
    let net = common::grid();
    let s = common::scenario(5);
    let r = run_trial(&net, &s, level(5), 3).unwrap();
    assert_eq!(r.steps.len(), 48);
    for w in r.steps.windows(2) {
        assert!(w[1].exposed >= w[0].exposed && w[1].warned >= w[0].warned);
    }
    let last = r.steps.last().unwrap();
    assert_eq!(last.exposed, r.total_exposed());
    assert!(r.total_informed() <= r.informable_ceiling.unwrap());
    assert!(r.max_mass_balance_error <= 5e-3);
    assert!((last.injected - 5.0e6).abs() < 1e-6);
    for a in &r.agents {
        if a.exposure_time.is_some() {
            assert!(a.dose >= 3.5 - 1e-12);
        }
    }
}

#[test]
fn experiment_summaries_use_matched_seeds() {
    let net = common::grid();
    let s = common::scenario(3);
    let out = run_experiment(&net, &s, &[level(2), level(3)], 3, 40).unwrap();
    assert_eq!(out.len(), 2);
    for summary in &out {
        let seeds: Vec<u64> = summary.trials.iter().map(|t| t.0).collect();
        assert_eq!(seeds, vec![40, 41, 42]);
        assert!(summary.min as f64 <= summary.mean && summary.mean <= summary.max as f64);
    }
    let direct = run_trial(&net, &s, level(3), 41).unwrap().total_exposed();
    assert_eq!(out[1].trials[1].1, direct);
}
