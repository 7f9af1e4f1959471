mod common;

use hydrosoc_core::behavior::DoseModel;
use hydrosoc_core::population::{
    init_population, occupancy, schedule_ingestions, DemographicTable, Itinerary, MealTables,
    NodePopulationProfile, PopulationOptions,
};
use hydrosoc_core::rng::{agent_day_stream, Concern};
use hydrosoc_core::scenario::WeightModel;
use hydrosoc_core::NetworkBuilder;

fn options(mobility: bool) -> PopulationOptions {
    PopulationOptions {
        probabilistic_ingestion: true,
        mobility,
        weight_model: WeightModel::Sampled,
        dose_model: DoseModel::PerBodyWeight(5e-8),
        walking_speed: 1.4,
        work_hours: 8.0,
    }
}

#[test]
fn employment_matches_table() {
    let mut b = NetworkBuilder::new();
    b.reservoir("R", 30.0)
        .junction("J", 0.0, 1.0, None)
        .pipe("P", "R", "J", 10.0, 100.0, 120.0);
    let net = b.build().unwrap();
    let table = DemographicTable::default();
    let profile = NodePopulationProfile::from_network(&net, 10_000, &[]).unwrap();
    let agents = init_population(&net, &table, &profile, &options(false), 99).unwrap();
    let employed = agents.iter().filter(|a| a.employed).count() as f64 / agents.len() as f64;
    assert!(
        (employed - table.employment_rate()).abs() <= 0.02,
        "{employed} vs {}",
        table.employment_rate()
    );

    // Group shares follow the table as well.
    for (g, row) in table.rows().iter().enumerate() {
        let share = agents.iter().filter(|a| a.group == g).count() as f64 / agents.len() as f64;
        assert!(
            (share - row.share).abs() <= 0.02,
            "group {g}: {share} vs {}",
            row.share
        );
    }
}

#[test]
fn breakfast_times_follow_their_cdf() {
    let meals = MealTables::default();
    let n = 100_000u64;
    let mut times: Vec<f64> = (0..n)
        .map(|k| {
            let mut r = agent_day_stream(5, k, Concern::Meals, 0);
            schedule_ingestions(0.93, 0, true, &meals, &mut r)[0].time
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let d = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = meals.breakfast.cdf(t);
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d <= 0.01, "Kolmogorov distance {d}");
}

#[test]
fn commuters_reproduce_complementary_profiles() {
    let mut b = NetworkBuilder::new();
    b.reservoir("R", 30.0)
        .junction("H", 0.0, 1.0, None)
        .junction("W", 0.0, 1.0, None)
        .pipe("P1", "R", "H", 10.0, 100.0, 120.0)
        .pipe("P2", "H", "W", 10.0, 100.0, 120.0)
        .coordinates("H", 0.0, 0.0)
        .coordinates("W", 1260.0, 0.0);
    let net = b.build().unwrap();
    let (h, w) = (net.node_by_id("H").unwrap(), net.node_by_id("W").unwrap());
    // 40 people live at H; W holds 30 from 08:00 to 16:00 and 10 from 16:00
    // to 20:00.
    let day: Vec<u32> = (0..24)
        .map(|k| match k {
            8..=15 => 30,
            16..=19 => 10,
            _ => 0,
        })
        .collect();
    let mut homes = vec![0; net.nodes().len()];
    homes[h] = 40;
    let mut visitors = vec![Vec::new(); net.nodes().len()];
    visitors[w] = day.clone();
    let profile = NodePopulationProfile::new(3600.0, homes, visitors).unwrap();
    let agents = init_population(
        &net,
        &DemographicTable::default(),
        &profile,
        &options(true),
        3,
    )
    .unwrap();
    assert_eq!(agents.len(), 40);
    let commuters = agents
        .iter()
        .filter(|a| a.itinerary != Itinerary::StayHome)
        .count();
    assert!(commuters >= 30);
    for k in 0..48 {
        let t = k as f64 * 3600.0;
        let (occ, walking) = occupancy(&agents, net.nodes().len(), t);
        assert_eq!(occ[w], day[k % 24], "step {k}");
        assert_eq!(occ[h] + occ[w] + walking, 40);
    }
    // 1260 m at 1.4 m/s is 15 minutes each way.
    for a in &agents {
        if let Itinerary::Visit { travel, .. } = a.itinerary {
            assert!((travel - 900.0).abs() < 1e-9);
        }
    }
}

#[test]
fn grid_occupancy_follows_demand_profile() {
    let net = common::grid();
    let s = common::scenario(3);
    let profile =
        NodePopulationProfile::from_network(&net, s.total_population, &s.nonresidential_patterns)
            .unwrap();
    let agents = init_population(
        &net,
        &DemographicTable::default(),
        &profile,
        &options(true),
        8,
    )
    .unwrap();
    let com = net.node_by_id("J11").unwrap();
    for k in 0..24 {
        let (occ, _) = occupancy(&agents, net.nodes().len(), k as f64 * 3600.0);
        assert_eq!(occ[com], profile.visitors(com)[k], "step {k}");
    }
    let peak = *profile.visitors(com).iter().max().unwrap();
    assert!(peak > 0);
}

#[test]
fn fixed_mode_ignores_the_seed() {
    let net = common::grid();
    let s = common::scenario(1);
    let profile = NodePopulationProfile::from_network(&net, s.total_population, &[]).unwrap();
    let mut opts = PopulationOptions::from_scenario(&s);
    opts.probabilistic_ingestion = false;
    opts.mobility = false;
    let a = init_population(&net, &DemographicTable::default(), &profile, &opts, 1).unwrap();
    let b = init_population(&net, &DemographicTable::default(), &profile, &opts, 2).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(
            (x.home, x.itinerary, x.daily_volume, x.weight),
            (y.home, y.itinerary, y.daily_volume, y.weight)
        );
    }
}
