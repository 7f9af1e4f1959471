use std::path::Path;

use hydrosoc::{parse_scenario, serialize_scenario};
use hydrosoc_core::behavior::DoseModel;
use hydrosoc_core::scenario::{ContaminantKind, LoadUnit, WeightModel};
use hydrosoc_core::{ModelLevel, ScenarioConfig};
use proptest::prelude::*;

fn bench(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("bench")
            .join(name),
    )
    .unwrap()
}

#[test]
fn west_plant_event() {
    let s = parse_scenario(&bench("arsenic_west.scn")).unwrap();
    assert_eq!(s.contaminant, ContaminantKind::Chemical);
    assert_eq!(s.injection_node, "WEST");
    // Day 1 18:00 to day 2 00:00.
    assert_eq!((s.injection_start, s.injection_end), (64_800.0, 86_400.0));
    assert_eq!((s.load, s.load_unit), (300.0, LoadUnit::Kilograms));
    assert_eq!(s.load_in_mass_units(), 300.0 * 1e6);
    assert_eq!(s.demand_multiplier, 0.60);
    assert_eq!(s.critical_dose, DoseModel::PerBodyWeight(5.0e-8));
    assert_eq!(s.model_level, ModelLevel::new(3).unwrap());
    assert_eq!(
        s.nonresidential_patterns,
        vec!["COM".to_string(), "IND".to_string()]
    );
}

#[test]
fn bench_scenarios_round_trip() {
    for name in ["arsenic_west.scn", "morning.scn", "slow_leak.scn"] {
        let s = parse_scenario(&bench(name)).unwrap();
        let text = serialize_scenario(&s);
        assert_eq!(parse_scenario(&text).unwrap(), s, "{name}");
        assert_eq!(
            serialize_scenario(&parse_scenario(&text).unwrap()),
            text,
            "{name}"
        );
    }
}

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    let chemical = (1e-9..1e-6f64).prop_map(DoseModel::PerBodyWeight);
    let pathogen = (1.0..1e4f64).prop_map(DoseModel::FixedCount);
    (
        prop_oneof![
            chemical.prop_map(|d| (ContaminantKind::Chemical, LoadUnit::Kilograms, d)),
            pathogen.prop_map(|d| (ContaminantKind::Pathogen, LoadUnit::Organisms, d)),
        ],
        // Start times on the minute print as clock times, the rest as seconds.
        prop_oneof![
            (0u64..2880).prop_map(|m| m as f64 * 60.0),
            0.0..172_800.0f64
        ],
        1.0..86_400.0f64,
        0.001..1e4f64,
        0.1..2.0f64,
        1u8..=5,
        (1u32..10, 1u32..20, 0u64..1000, 1u32..5000),
        prop_oneof![
            Just(WeightModel::Sampled),
            (20.0..120.0f64).prop_map(WeightModel::Fixed)
        ],
        (
            0u32..4,
            any::<bool>(),
            prop::collection::vec("[A-Z]{1,4}", 0..3),
        ),
    )
        .prop_map(
            |((kind, unit, dose), start, span, load, mult, level, counts, weight, extra)| {
                let mut s = ScenarioConfig::new(
                    kind,
                    "N1",
                    start,
                    start + span,
                    load,
                    unit,
                    mult,
                    dose,
                    ModelLevel::new(level).unwrap(),
                );
                s.duration_days = counts.0 as f64;
                s.trials = counts.1;
                s.seed = counts.2;
                s.total_population = counts.3;
                s.weight_model = weight;
                s.reaction_latency = extra.0;
                s.informed_stop_drinking = extra.1;
                s.nonresidential_patterns = extra.2;
                s
            },
        )
        .prop_filter("valid", |s| s.validate().is_ok())
}

proptest! {
    #[test]
    fn serialized_scenarios_parse_back(s in scenario()) {
        let text = serialize_scenario(&s);
        prop_assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}
