//! The coupled time-stepped loop and the model levels that gate it.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::behavior::{self, build_clusters, ClusterGraph, ReductionTally, SuspensionTable};
use crate::hydraulics::{DemandVector, HydraulicError, HydraulicSnapshot, Solver, TankLimitEvent};
use crate::math;
use crate::metrics::{self, ModelSummary};
use crate::network::{Network, NodeIndex, NodeKind};
use crate::population::{
    init_population, occupancy, schedule_ingestions, Agent, DemographicTable, MealTables,
    NodePopulationProfile, PopulationError, PopulationOptions,
};
use crate::quality::{QualityState, QualityWarning, SourceInjection};
use crate::rng::{self, Concern};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::SECONDS_PER_DAY;

/// Fidelity level 1 to 5; each level adds one mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelLevel(u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelFlags {
    pub probabilistic_ingestion: bool,
    pub mobility: bool,
    pub adaptation: bool,
    pub word_of_mouth: bool,
}

impl ModelLevel {
    pub const ALL: [ModelLevel; 5] = [
        ModelLevel(1),
        ModelLevel(2),
        ModelLevel(3),
        ModelLevel(4),
        ModelLevel(5),
    ];

    pub fn new(level: u8) -> Result<Self, ScenarioError> {
        if (1..=5).contains(&level) {
            Ok(ModelLevel(level))
        } else {
            Err(ScenarioError::out_of_range("model_level", "must be 1 to 5"))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn flags(self) -> ModelFlags {
        ModelFlags {
            probabilistic_ingestion: self.0 >= 2,
            mobility: self.0 >= 3,
            adaptation: self.0 >= 4,
            word_of_mouth: self.0 >= 5,
        }
    }
}

impl fmt::Display for ModelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("injection node `{0}` is not in the network")]
    UnknownInjectionNode(String),
    #[error("hydraulic step of {0} s does not divide one day")]
    StepDoesNotDivideDay(u64),
    #[error("hydraulics failed at t = {time} s: {source}")]
    Hydraulics { time: f64, source: HydraulicError },
}

/// Demographic and meal-time tables used to build populations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tables {
    pub demographics: DemographicTable,
    pub meals: MealTables,
}

/// State at the end of one hydraulic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// End of the step, s.
    pub time: f64,
    pub exposed: u32,
    pub warned: u32,
    /// Agents whose demand cut is in effect.
    pub demand_changed: u32,
    pub cpp: f64,
    pub mass_in_network: f64,
    pub withdrawn: f64,
    pub injected: f64,
    /// Total junction demand used for this step, L/s.
    pub total_demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub id: u32,
    pub stream_key: u64,
    pub home: NodeIndex,
    pub dose: f64,
    pub exposure_time: Option<f64>,
    pub exposure_node: Option<NodeIndex>,
    pub warning_time: Option<f64>,
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResults {
    pub model: ModelLevel,
    pub seed: u64,
    pub population: u32,
    pub steps: Vec<StepRecord>,
    pub agents: Vec<AgentRecord>,
    /// Number of clusters and their combined informable membership (word of
    /// mouth only).
    pub informable_ceiling: Option<u32>,
    pub max_mass_balance_error: f64,
    pub max_continuity_ratio: f64,
    pub tank_events: Vec<TankLimitEvent>,
    pub quality_warnings: Vec<QualityWarning>,
}

impl SimulationResults {
    pub fn total_exposed(&self) -> u32 {
        self.steps.last().map_or(0, |s| s.exposed)
    }

    pub fn total_warned(&self) -> u32 {
        self.steps.last().map_or(0, |s| s.warned)
    }

    /// Agents exposed or warned by the end of the run.
    pub fn total_informed(&self) -> u32 {
        self.agents
            .iter()
            .filter(|a| a.exposure_time.is_some() || a.warning_time.is_some())
            .count() as u32
    }

    /// Record for the step ending at or after `t`.
    pub fn step_at(&self, t: f64) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.time >= t)
    }
}

/// Per-step hook for dumps.
pub trait StepObserver {
    fn observe(&mut self, step: usize, hydraulics: &HydraulicSnapshot, quality: &QualityState);
}

impl StepObserver for () {
    fn observe(&mut self, _: usize, _: &HydraulicSnapshot, _: &QualityState) {}
}

#[derive(Debug, Clone, Copy)]
struct Drink {
    time: f64,
    key: u64,
    agent: u32,
    node: NodeIndex,
    volume: f64,
}

/// One seeded trial, ready to run.
pub struct Trial<'a> {
    network: &'a Network,
    scenario: &'a ScenarioConfig,
    tables: &'a Tables,
    level: ModelLevel,
    seed: u64,
    agents: Vec<Agent>,
    solver: Solver,
}

impl<'a> Trial<'a> {
    pub fn new(
        network: &'a Network,
        scenario: &'a ScenarioConfig,
        tables: &'a Tables,
        level: ModelLevel,
        seed: u64,
    ) -> Result<Self, EngineError> {
        scenario.validate_allowing_zero_load()?;
        if network.node_by_id(&scenario.injection_node).is_none() {
            return Err(EngineError::UnknownInjectionNode(
                scenario.injection_node.clone(),
            ));
        }
        let h = network.times().hydraulic_step;
        if h == 0 || 86_400 % h != 0 {
            return Err(EngineError::StepDoesNotDivideDay(h));
        }
        let profile = NodePopulationProfile::from_network(
            network,
            scenario.total_population,
            &scenario.nonresidential_patterns,
        )?;
        let mut opts = PopulationOptions::from_scenario(scenario);
        let flags = level.flags();
        opts.probabilistic_ingestion = flags.probabilistic_ingestion;
        opts.mobility = flags.mobility;
        let agents = init_population(network, &tables.demographics, &profile, &opts, seed)?;
        Ok(Trial {
            network,
            scenario,
            tables,
            level,
            seed,
            agents,
            solver: Solver::default(),
        })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    /// Replaces the population, e.g. with a relabeled copy. Ids must equal
    /// positions.
    pub fn set_agents(&mut self, agents: Vec<Agent>) {
        assert!(agents.iter().enumerate().all(|(i, a)| a.id as usize == i));
        self.agents = agents;
    }

    pub fn run(self, observer: &mut dyn StepObserver) -> Result<SimulationResults, EngineError> {
        let Trial {
            network,
            scenario,
            tables,
            level,
            seed,
            mut agents,
            solver,
        } = self;
        let flags = level.flags();
        let n = network.nodes().len();
        let h = network.times().hydraulic_step as f64;
        let substeps = network.quality_substeps();
        let dq = h / substeps as f64;
        let steps = math::ceil(scenario.duration_seconds() / h) as usize;
        let latency = scenario.reaction_latency as usize;
        let population = agents.len() as u32;

        let source = SourceInjection::new(
            network
                .node_by_id(&scenario.injection_node)
                .expect("checked in Trial::new"),
            scenario.load_in_mass_units(),
            scenario.injection_start,
            scenario.injection_end,
        );
        let graph: Option<ClusterGraph> = flags
            .word_of_mouth
            .then(|| build_clusters(&agents, &scenario.cluster, seed));
        let suspension: SuspensionTable = scenario.suspension;

        let mut quality = QualityState::new(network, &network.initial_tank_levels());
        let mut prev: Option<HydraulicSnapshot> = None;
        let mut drinks: Vec<Drink> = Vec::new();
        let mut next_day = 0u64;
        let mut records = Vec::with_capacity(steps);
        let mut tank_events = Vec::new();
        let mut max_balance = 0.0f64;
        let mut max_continuity = 0.0f64;
        let (mut exposed, mut warned, mut changed) = (0u32, 0u32, 0u32);

        for k in 0..steps {
            let t0 = k as f64 * h;
            let t1 = t0 + h;

            // Demands, with cuts of the agents present at t0.
            let mut values = vec![0.0; n];
            let mut tallies = vec![ReductionTally::default(); if flags.adaptation { n } else { 0 }];
            if flags.adaptation {
                for a in &agents {
                    if let Some(node) = a.locate(t0) {
                        tallies[node].add(a.reduction_at(k));
                    }
                }
            }
            for (i, v) in values.iter_mut().enumerate() {
                if let NodeKind::Junction { .. } = network.node(i).kind {
                    let base = network.pattern_demand(i, t0) * scenario.demand_multiplier;
                    *v = if flags.adaptation {
                        tallies[i].demand(base)
                    } else {
                        base
                    };
                    debug_assert!(
                        *v >= base * (1.0 - behavior::MAX_REDUCTION) - 1e-12 && *v <= base
                    );
                }
            }
            let demands = DemandVector::new(network, values)
                .map_err(|source| EngineError::Hydraulics { time: t0, source })?;

            let hyd = match &prev {
                None => {
                    solver.solve_steady(network, t0, &demands, &network.initial_tank_levels(), None)
                }
                Some(p) => solver.step_extended_period(p, network, &demands, h),
            }
            .map_err(|source| EngineError::Hydraulics { time: t0, source })?;
            tank_events.extend_from_slice(&hyd.tank_events);
            max_continuity = max_continuity.max(solver.continuity_ratio(network, &hyd));

            for _ in 0..substeps {
                quality.step(network, &hyd, dq, core::slice::from_ref(&source));
            }
            quality.set_time(t1);
            max_balance = max_balance.max(quality.mass_balance_error());
            observer.observe(k, &hyd, &quality);

            // Drinking schedules for every day that has started by t1.
            while (next_day as f64) * SECONDS_PER_DAY < t1 {
                for a in &agents {
                    let mut r = rng::agent_day_stream(seed, a.stream_key, Concern::Meals, next_day);
                    let plan = schedule_ingestions(
                        a.daily_volume,
                        next_day,
                        flags.probabilistic_ingestion,
                        &tables.meals,
                        &mut r,
                    );
                    for e in plan {
                        let (time, node) = a.ingestion_site(e.time);
                        drinks.push(Drink {
                            time,
                            key: a.stream_key,
                            agent: a.id,
                            node,
                            volume: e.volume,
                        });
                    }
                }
                drinks.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.key.cmp(&b.key)));
                next_day += 1;
            }

            let due = drinks.partition_point(|d| d.time <= t1);
            let mut newly_informed: BTreeSet<u32> = BTreeSet::new();
            for d in drinks.drain(..due) {
                let a = &mut agents[d.agent as usize];
                if scenario.informed_stop_drinking
                    && a.informed_step().is_some_and(|s| s + latency <= k)
                {
                    continue;
                }
                let c = quality.concentration(d.node);
                if behavior::accumulate_dose(a, c, d.volume, d.time, k, d.node) {
                    exposed += 1;
                    newly_informed.insert(a.id);
                }
            }

            if let Some(g) = &graph {
                for id in behavior::propagate_warnings(g, &mut agents, k, t1, latency) {
                    warned += 1;
                    newly_informed.insert(id);
                }
            }

            if flags.adaptation {
                for id in newly_informed {
                    let a = &mut agents[id as usize];
                    if a.reduction_from.is_none() {
                        let mut r = rng::agent_stream(seed, a.stream_key, Concern::Reduction);
                        a.reduction = behavior::decide_reduction(&suspension, &mut r);
                        a.reduction_from = Some(k + latency);
                    }
                }
                changed = agents
                    .iter()
                    .filter(|a| a.reduction_at(k + 1).factor() > 0.0)
                    .count() as u32;
            }

            let (occ, _) = occupancy(&agents, n, t1);
            let cpp = metrics::cpp(&occ, quality.concentrations(), population);
            records.push(StepRecord {
                step: k,
                time: t1,
                exposed,
                warned,
                demand_changed: changed,
                cpp,
                mass_in_network: quality.mass_in_network(),
                withdrawn: quality.withdrawn_mass(),
                injected: quality.injected_mass(),
                total_demand: demands.total(),
            });
            prev = Some(hyd);
        }

        let mut agent_records: Vec<AgentRecord> = agents
            .iter()
            .map(|a| AgentRecord {
                id: a.id,
                stream_key: a.stream_key,
                home: a.home,
                dose: a.dose,
                exposure_time: a.exposure.map(|e| e.time),
                exposure_node: a.exposure.map(|e| e.node),
                warning_time: a.warning.map(|w| w.time),
                reduction: a.reduction.factor(),
            })
            .collect();
        agent_records.sort_by_key(|a| a.id);

        Ok(SimulationResults {
            model: level,
            seed,
            population,
            steps: records,
            agents: agent_records,
            informable_ceiling: graph.as_ref().map(|g| g.informable_ceiling() as u32),
            max_mass_balance_error: max_balance,
            max_continuity_ratio: max_continuity,
            tank_events,
            quality_warnings: quality.warnings,
        })
    }
}

/// Runs one trial with the default tables.
pub fn run_trial(
    network: &Network,
    scenario: &ScenarioConfig,
    level: ModelLevel,
    seed: u64,
) -> Result<SimulationResults, EngineError> {
    let tables = Tables::default();
    Trial::new(network, scenario, &tables, level, seed)?.run(&mut ())
}

/// Runs `trials` trials per level; trial `i` uses seed `base_seed + i` for
/// every level.
pub fn run_experiment(
    network: &Network,
    scenario: &ScenarioConfig,
    levels: &[ModelLevel],
    trials: u32,
    base_seed: u64,
) -> Result<Vec<ModelSummary>, EngineError> {
    let tables = Tables::default();
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut results = Vec::with_capacity(trials as usize);
        for i in 0..trials {
            let seed = base_seed.wrapping_add(i as u64);
            results.push(Trial::new(network, scenario, &tables, level, seed)?.run(&mut ())?);
        }
        out.push(ModelSummary::from_results(level, &results));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_flags() {
        let f: Vec<[bool; 4]> = ModelLevel::ALL
            .iter()
            .map(|l| {
                let f = l.flags();
                [
                    f.probabilistic_ingestion,
                    f.mobility,
                    f.adaptation,
                    f.word_of_mouth,
                ]
            })
            .collect();
        assert_eq!(
            f,
            vec![
                [false, false, false, false],
                [true, false, false, false],
                [true, true, false, false],
                [true, true, true, false],
                [true, true, true, true],
            ]
        );
        assert_eq!(ModelLevel::new(6).unwrap_err().key(), "model_level");
        assert!(ModelLevel::new(0).is_err());
    }
}
