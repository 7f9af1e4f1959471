#![allow(dead_code)]

use hydrosoc_core::behavior::DoseModel;
use hydrosoc_core::network::{Tank, Times};
use hydrosoc_core::scenario::{ContaminantKind, LoadUnit};
use hydrosoc_core::{ModelLevel, Network, NetworkBuilder, ScenarioConfig};

pub const RES: [f64; 24] = [
    0.35, 0.30, 0.30, 0.30, 0.40, 0.70, 1.40, 1.60, 1.30, 1.00, 0.90, 0.90, 1.00, 0.90, 0.80, 0.80,
    0.90, 1.20, 1.50, 1.50, 1.30, 1.00, 0.70, 0.45,
];
pub const COM: [f64; 24] = [
    0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.20, 0.80, 1.40, 1.60, 1.60, 1.60, 1.60, 1.60, 1.60, 1.50,
    1.20, 0.80, 0.40, 0.20, 0.10, 0.05, 0.05, 0.05,
];

/// A 3×3 grid fed from a reservoir through `SRC`, with an elevated tank on
/// the far corner and a commercial block in the middle.
pub fn grid() -> Network {
    let mut b = NetworkBuilder::new();
    b.pattern("RES", &RES).pattern("COM", &COM);
    b.reservoir("R", 60.0).coordinates("R", -200.0, 0.0);
    b.junction("SRC", 2.0, 0.0, None)
        .coordinates("SRC", -100.0, 0.0);
    for r in 0..3 {
        for c in 0..3 {
            let id = format!("J{r}{c}");
            let pattern = if r == 1 && c == 1 { "COM" } else { "RES" };
            let demand = if r == 1 && c == 1 { 2.0 } else { 0.8 };
            b.junction(&id, 3.0 + r as f64, demand, Some(pattern))
                .coordinates(&id, c as f64 * 120.0, r as f64 * 120.0);
        }
    }
    b.tank(
        "T",
        40.0,
        Tank {
            initial_level: 4.0,
            min_level: 0.5,
            max_level: 9.0,
            diameter: 8.0,
        },
    )
    .coordinates("T", 360.0, 240.0);
    b.pipe("P0", "R", "SRC", 50.0, 250.0, 130.0);
    b.pipe("PS", "SRC", "J00", 100.0, 200.0, 130.0);
    for r in 0..3 {
        for c in 0..3 {
            if c < 2 {
                b.pipe(
                    &format!("H{r}{c}"),
                    &format!("J{r}{c}"),
                    &format!("J{r}{}", c + 1),
                    120.0,
                    100.0,
                    110.0,
                );
            }
            if r < 2 {
                b.pipe(
                    &format!("V{r}{c}"),
                    &format!("J{r}{c}"),
                    &format!("J{}{c}", r + 1),
                    120.0,
                    100.0,
                    110.0,
                );
            }
        }
    }
    b.pipe("PT", "J22", "T", 80.0, 150.0, 120.0);
    b.times(Times {
        hydraulic_step: 3600,
        quality_step: 300,
        pattern_step: 3600,
        duration: 86_400,
    });
    b.build().unwrap()
}

pub fn scenario(level: u8) -> ScenarioConfig {
    let mut s = ScenarioConfig::new(
        ContaminantKind::Chemical,
        "SRC",
        6.0 * 3600.0,
        12.0 * 3600.0,
        5.0,
        LoadUnit::Kilograms,
        1.0,
        DoseModel::PerBodyWeight(5.0e-8),
        ModelLevel::new(level).unwrap(),
    );
    s.duration_days = 2.0;
    s.total_population = 300;
    s.nonresidential_patterns = vec!["COM".into()];
    s.informed_stop_drinking = true;
    s
}
