//! Agents: demographics, body weight, drinking schedule and daily itinerary.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::behavior::{apportion, DoseModel, ReductionChoice};
use crate::math;
use crate::network::{Network, NodeIndex, NodeKind};
use crate::rng::{self, Concern, SimRng};
use crate::scenario::{ScenarioConfig, WeightModel};
use crate::SECONDS_PER_DAY;

pub mod meals;

pub use meals::{MealTables, PiecewiseCdf};

/// Daily tap-water volume when ingestion is not sampled, L.
pub const FIXED_DAILY_VOLUME: f64 = 0.93;

/// Clock times of the five fixed ingestion events, h.
pub const FIXED_INGESTION_HOURS: [f64; 5] = [7.0, 9.5, 12.0, 15.0, 18.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PopulationError {
    #[error("infeasible occupancy profile: {0}")]
    InfeasibleProfile(String),
    #[error("invalid demographic table: {0}")]
    InvalidTable(String),
    #[error("invalid meal-time table: {0}")]
    InvalidCdf(String),
    #[error("probability draw of 1 has no finite exponential quantile")]
    ProbabilityOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemographicRow {
    pub age_group: String,
    pub gender: Gender,
    /// Share of the whole population in this row.
    pub share: f64,
    pub mean_age: f64,
    pub mean_weight: f64,
    /// Mean daily tap-water ingestion, L.
    pub mean_volume: f64,
    pub employment: f64,
}

/// Age group by gender breakdown of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicTable {
    rows: Vec<DemographicRow>,
}

// (group, mean age, share of total, [male, female] weight kg, volume L, employment)
type DefaultRow = (&'static str, f64, f64, [f64; 2], [f64; 2], [f64; 2]);

// Approximate U.S. figures (census age structure, NHANES body weights, EPA
// direct tap-water ingestion, BLS participation rates), rounded.
const DEFAULT_ROWS: [DefaultRow; 11] = [
    ("<1", 0.5, 0.013, [8.0, 7.5], [0.20, 0.19], [0.0, 0.0]),
    ("1-2", 1.5, 0.026, [12.5, 12.0], [0.28, 0.26], [0.0, 0.0]),
    ("3-5", 4.0, 0.039, [18.0, 17.5], [0.33, 0.31], [0.0, 0.0]),
    ("6-10", 8.0, 0.066, [29.0, 29.0], [0.40, 0.37], [0.0, 0.0]),
    ("11-15", 13.0, 0.066, [52.0, 50.0], [0.50, 0.45], [0.0, 0.0]),
    (
        "16-17",
        16.5,
        0.027,
        [68.0, 59.0],
        [0.60, 0.52],
        [0.25, 0.27],
    ),
    (
        "18-20",
        19.0,
        0.042,
        [75.0, 63.0],
        [0.78, 0.66],
        [0.55, 0.55],
    ),
    (
        "21-24",
        22.5,
        0.055,
        [79.0, 66.0],
        [0.95, 0.80],
        [0.72, 0.67],
    ),
    (
        "25-54",
        39.5,
        0.406,
        [87.0, 73.0],
        [1.16, 1.02],
        [0.84, 0.71],
    ),
    (
        "55-64",
        59.5,
        0.126,
        [89.0, 76.0],
        [1.30, 1.16],
        [0.68, 0.56],
    ),
    ("65+", 74.0, 0.134, [82.0, 70.0], [1.20, 1.10], [0.20, 0.13]),
];

impl Default for DemographicTable {
    fn default() -> Self {
        let mut rows = Vec::with_capacity(22);
        for (group, age, share, weight, volume, employment) in DEFAULT_ROWS {
            for (g, gender) in [Gender::Male, Gender::Female].into_iter().enumerate() {
                rows.push(DemographicRow {
                    age_group: group.to_string(),
                    gender,
                    share: share / 2.0,
                    mean_age: age,
                    mean_weight: weight[g],
                    mean_volume: volume[g],
                    employment: employment[g],
                });
            }
        }
        DemographicTable { rows }
    }
}

impl DemographicTable {
    pub fn new(rows: Vec<DemographicRow>) -> Result<Self, PopulationError> {
        let bad = |m: String| Err(PopulationError::InvalidTable(m));
        let mut groups: Vec<&str> = rows.iter().map(|r| r.age_group.as_str()).collect();
        groups.sort_unstable();
        groups.dedup();
        if groups.len() != 11 {
            return bad(format!("expected 11 age groups, found {}", groups.len()));
        }
        for r in &rows {
            if !(0.0..=1.0).contains(&r.share) || !(0.0..=1.0).contains(&r.employment) {
                return bad(format!(
                    "{} {}: fractions must lie in [0, 1]",
                    r.age_group,
                    r.gender.as_str()
                ));
            }
            if !(r.mean_age > 0.0 && r.mean_weight > 0.0 && r.mean_volume > 0.0) {
                return bad(format!(
                    "{} {}: means must be positive",
                    r.age_group,
                    r.gender.as_str()
                ));
            }
        }
        let total: f64 = rows.iter().map(|r| r.share).sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("shares sum to {total}, expected 1"));
        }
        let table = DemographicTable { rows };
        let v = table.mean_volume();
        if (v / FIXED_DAILY_VOLUME - 1.0).abs() > 0.05 {
            return bad(format!(
                "population mean volume {v:.4} L is more than 5% from 0.93 L"
            ));
        }
        Ok(table)
    }

    pub fn rows(&self) -> &[DemographicRow] {
        &self.rows
    }

    pub fn mean_volume(&self) -> f64 {
        self.rows.iter().map(|r| r.share * r.mean_volume).sum()
    }

    pub fn employment_rate(&self) -> f64 {
        self.rows.iter().map(|r| r.share * r.employment).sum()
    }

    /// Row whose cumulative share first exceeds `u`.
    pub fn row_for(&self, u: f64) -> usize {
        let total: f64 = self.rows.iter().map(|r| r.share).sum();
        let mut acc = 0.0;
        for (i, r) in self.rows.iter().enumerate() {
            acc += r.share / total;
            if u < acc {
                return i;
            }
        }
        self.rows.len() - 1
    }
}

/// `-mean · ln(1 - p)`.
pub fn sample_exponential(mean: f64, p: f64) -> Result<f64, PopulationError> {
    debug_assert!(mean > 0.0 && p >= 0.0);
    if p >= 1.0 {
        return Err(PopulationError::ProbabilityOne);
    }
    Ok(-mean * math::ln(1.0 - p))
}

fn draw_exponential(mean: f64, rng: &mut SimRng) -> f64 {
    loop {
        if let Ok(v) = sample_exponential(mean, rng.random::<f64>()) {
            return v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ingestion {
    /// Absolute time, s.
    pub time: f64,
    pub volume: f64,
}

/// Five drinking events for `day`: three major meals and two minor ones at
/// their midpoints, each a fifth of the daily volume.
pub fn schedule_ingestions(
    daily_volume: f64,
    day: u64,
    probabilistic: bool,
    meals: &MealTables,
    rng: &mut SimRng,
) -> [Ingestion; 5] {
    let clock: [f64; 5] = if probabilistic {
        let m1 = meals.breakfast.sample(rng.random());
        let m2 = meals.lunch.sample_after(m1 + meals.min_gap, rng.random());
        let m3 = meals.dinner.sample_after(m2 + meals.min_gap, rng.random());
        [m1, (m1 + m2) / 2.0, m2, (m2 + m3) / 2.0, m3]
    } else {
        FIXED_INGESTION_HOURS.map(|h| h * 3600.0)
    };
    let share = daily_volume / 5.0;
    let last = daily_volume - (((share + share) + share) + share);
    let day_start = day as f64 * SECONDS_PER_DAY;
    let mut out = [Ingestion {
        time: 0.0,
        volume: share,
    }; 5];
    for (i, c) in clock.iter().enumerate() {
        out[i].time = day_start + c;
    }
    out[4].volume = last;
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    pub time: f64,
    pub step: usize,
    pub node: NodeIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warning {
    pub time: f64,
    pub step: usize,
}

/// Daily movement, repeated every day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Itinerary {
    StayHome,
    Visit {
        destination: NodeIndex,
        /// Arrival at the destination, seconds after midnight.
        arrive: f64,
        stay: f64,
        /// One-way walking time, s.
        travel: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: u32,
    /// Key of this agent's random substreams; survives relabeling.
    pub stream_key: u64,
    /// Row of the demographic table.
    pub group: usize,
    pub weight: f64,
    pub employed: bool,
    pub daily_volume: f64,
    pub home: NodeIndex,
    pub itinerary: Itinerary,
    pub dose: f64,
    pub critical_dose: f64,
    pub exposure: Option<Exposure>,
    pub warning: Option<Warning>,
    pub reduction: ReductionChoice,
    /// Step from which `reduction` applies to nodal demand.
    pub reduction_from: Option<usize>,
}

impl Agent {
    /// A stay-at-home agent with neutral attributes.
    pub fn at_home(id: u32, home: NodeIndex) -> Self {
        Agent {
            id,
            stream_key: id as u64,
            group: 0,
            weight: 70.0,
            employed: false,
            daily_volume: FIXED_DAILY_VOLUME,
            home,
            itinerary: Itinerary::StayHome,
            dose: 0.0,
            critical_dose: f64::INFINITY,
            exposure: None,
            warning: None,
            reduction: ReductionChoice::default(),
            reduction_from: None,
        }
    }

    pub fn is_exposed(&self) -> bool {
        self.exposure.is_some()
    }

    pub fn is_warned(&self) -> bool {
        self.warning.is_some()
    }

    /// Step at which the agent first learned of the event.
    pub fn informed_step(&self) -> Option<usize> {
        match (self.exposure, self.warning) {
            (Some(e), Some(w)) => Some(e.step.min(w.step)),
            (Some(e), None) => Some(e.step),
            (None, Some(w)) => Some(w.step),
            (None, None) => None,
        }
    }

    pub fn reduction_at(&self, step: usize) -> ReductionChoice {
        match self.reduction_from {
            Some(s) if step >= s => self.reduction,
            _ => ReductionChoice::default(),
        }
    }

    /// Node the agent is at, or `None` while walking.
    pub fn locate(&self, t: f64) -> Option<NodeIndex> {
        match self.itinerary {
            Itinerary::StayHome => Some(self.home),
            Itinerary::Visit {
                destination,
                arrive,
                stay,
                travel,
            } => {
                // Measured from arrival so that stays, which start and end on
                // step boundaries, compare exactly at step times.
                let since = cycle_offset(t, arrive);
                if since < stay {
                    Some(destination)
                } else if since < stay + travel || since >= SECONDS_PER_DAY - travel {
                    None
                } else {
                    Some(self.home)
                }
            }
        }
    }

    /// Where and when a drink scheduled at `t` is taken: on the spot, or on
    /// arrival if the agent is walking.
    pub fn ingestion_site(&self, t: f64) -> (f64, NodeIndex) {
        if let Some(n) = self.locate(t) {
            return (t, n);
        }
        let Itinerary::Visit {
            destination,
            arrive,
            stay,
            travel,
        } = self.itinerary
        else {
            unreachable!("stay-home agents are always located");
        };
        let cycles = (t - arrive) / SECONDS_PER_DAY;
        if cycle_offset(t, arrive) >= SECONDS_PER_DAY - travel {
            (arrive + math::ceil(cycles) * SECONDS_PER_DAY, destination)
        } else {
            (
                arrive + math::floor(cycles) * SECONDS_PER_DAY + stay + travel,
                self.home,
            )
        }
    }
}

fn cycle_offset(t: f64, origin: f64) -> f64 {
    math::rem_euclid(t - origin, SECONDS_PER_DAY)
}

/// Head count per node at time `t`, plus agents in transit.
pub fn occupancy(agents: &[Agent], node_count: usize, t: f64) -> (Vec<u32>, u32) {
    let mut counts = vec![0u32; node_count];
    let mut walking = 0;
    for a in agents {
        match a.locate(t) {
            Some(n) => counts[n] += 1,
            None => walking += 1,
        }
    }
    (counts, walking)
}

/// Where people live and how many visit each non-residential node at each
/// step of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePopulationProfile {
    step: f64,
    homes: Vec<u32>,
    visitors: Vec<Vec<u32>>,
}

impl NodePopulationProfile {
    /// `visitors[n]` is empty or holds one count per step of the day.
    pub fn new(
        step: f64,
        homes: Vec<u32>,
        visitors: Vec<Vec<u32>>,
    ) -> Result<Self, PopulationError> {
        let bad = |m: &str| Err(PopulationError::InfeasibleProfile(m.into()));
        if !(step > 0.0) || math::rem_euclid(SECONDS_PER_DAY, step) != 0.0 {
            return bad("the step must divide one day");
        }
        if homes.len() != visitors.len() {
            return bad("homes and visitors cover different node counts");
        }
        let steps = (SECONDS_PER_DAY / step) as usize;
        if visitors.iter().any(|v| !v.is_empty() && v.len() != steps) {
            return bad("visitor series must have one entry per step of the day");
        }
        let p = NodePopulationProfile {
            step,
            homes,
            visitors,
        };
        if p.total_population() == 0 {
            return bad("nobody lives in the network");
        }
        Ok(p)
    }

    /// Derives homes and visitor series from the demand patterns. Junctions
    /// whose pattern is listed in `nonresidential` receive visitors; all
    /// other demand junctions receive residents. Each node's maximum
    /// population is its share of total peak demand times `total`.
    pub fn from_network(
        network: &Network,
        total: u32,
        nonresidential: &[String],
    ) -> Result<Self, PopulationError> {
        let step = network.times().hydraulic_step as f64;
        let steps = (SECONDS_PER_DAY / step) as usize;
        let n = network.nodes().len();
        let is_nonres = |pattern: Option<usize>| {
            pattern.is_some_and(|p| {
                nonresidential
                    .iter()
                    .any(|id| *id == network.patterns()[p].id)
            })
        };
        let mut peak = vec![0.0; n];
        let mut residential = vec![0.0; n];
        for &i in &network.terminal_nodes() {
            if let NodeKind::Junction {
                base_demand,
                pattern,
            } = network.node(i).kind
            {
                peak[i] = base_demand * network.pattern_peak(pattern);
                if !is_nonres(pattern) {
                    residential[i] = peak[i];
                }
            }
        }
        if residential.iter().all(|&w| w == 0.0) {
            return Err(PopulationError::InfeasibleProfile(
                "no residential demand junction to house the population".into(),
            ));
        }
        let homes = apportion(total, &residential);
        let max_pop = apportion(total, &peak);
        let mut visitors = vec![Vec::new(); n];
        for i in 0..n {
            if let NodeKind::Junction {
                pattern: Some(p), ..
            } = network.node(i).kind
            {
                if !is_nonres(Some(p)) || max_pop[i] == 0 {
                    continue;
                }
                let top = network.pattern_peak(Some(p));
                visitors[i] = (0..steps)
                    .map(|k| {
                        let m = network.pattern_multiplier(Some(p), k as f64 * step);
                        math::round(max_pop[i] as f64 * m / top) as u32
                    })
                    .collect();
            }
        }
        NodePopulationProfile::new(step, homes, visitors)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps_per_day(&self) -> usize {
        (SECONDS_PER_DAY / self.step) as usize
    }

    pub fn homes(&self) -> &[u32] {
        &self.homes
    }

    pub fn visitors(&self, node: NodeIndex) -> &[u32] {
        &self.visitors[node]
    }

    pub fn total_population(&self) -> u32 {
        self.homes.iter().sum()
    }

    /// Splits every visitor series into stays: each occupancy layer is a set
    /// of cyclic intervals, and each interval is cut into shifts of
    /// `shift_steps` plus a shorter remainder visit.
    fn stays(&self, shift_steps: usize) -> Vec<Stay> {
        let steps = self.steps_per_day();
        let mut out = Vec::new();
        for (node, series) in self.visitors.iter().enumerate() {
            let top = series.iter().copied().max().unwrap_or(0);
            for layer in 1..=top {
                let on = |k: usize| series[k % steps] >= layer;
                let mut runs = Vec::new();
                if (0..steps).all(on) {
                    runs.push((0, steps));
                } else {
                    for k in 0..steps {
                        if on(k) && !on(k + steps - 1) {
                            let len = (k..k + steps).take_while(|&j| on(j)).count();
                            runs.push((k, len));
                        }
                    }
                }
                for (start, len) in runs {
                    let full = len / shift_steps;
                    for s in 0..full {
                        out.push(Stay {
                            node,
                            start: start + s * shift_steps,
                            len: shift_steps,
                            shift: true,
                        });
                    }
                    if len % shift_steps > 0 {
                        out.push(Stay {
                            node,
                            start: start + full * shift_steps,
                            len: len % shift_steps,
                            shift: false,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Stay {
    node: NodeIndex,
    start: usize,
    len: usize,
    shift: bool,
}

/// Which optional mechanisms shape the population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationOptions {
    pub probabilistic_ingestion: bool,
    pub mobility: bool,
    pub weight_model: WeightModel,
    pub dose_model: DoseModel,
    pub walking_speed: f64,
    pub work_hours: f64,
}

impl PopulationOptions {
    pub fn from_scenario(s: &ScenarioConfig) -> Self {
        let flags = s.model_level.flags();
        PopulationOptions {
            probabilistic_ingestion: flags.probabilistic_ingestion,
            mobility: flags.mobility,
            weight_model: s.weight_model,
            dose_model: s.critical_dose,
            walking_speed: s.walking_speed,
            work_hours: s.work_hours,
        }
    }
}

/// Builds the population described by `profile`. Homes are filled in id
/// order; attributes come from each agent's own substreams; stays are dealt
/// to a shuffled list of employed (shifts) and unemployed (other visits)
/// agents.
pub fn init_population(
    network: &Network,
    table: &DemographicTable,
    profile: &NodePopulationProfile,
    opts: &PopulationOptions,
    seed: u64,
) -> Result<Vec<Agent>, PopulationError> {
    if profile.homes().len() != network.nodes().len() {
        return Err(PopulationError::InfeasibleProfile(
            "profile does not match the network".into(),
        ));
    }
    let mut agents = Vec::with_capacity(profile.total_population() as usize);
    for (home, &count) in profile.homes().iter().enumerate() {
        for _ in 0..count {
            let id = agents.len() as u32;
            let key = id as u64;
            let mut demo = rng::agent_stream(seed, key, Concern::Demographics);
            let group = table.row_for(demo.random());
            let row = &table.rows()[group];
            let employed = demo.random::<f64>() < row.employment;
            let weight = match opts.weight_model {
                WeightModel::Fixed(w) => w,
                WeightModel::Sampled => draw_exponential(
                    row.mean_weight,
                    &mut rng::agent_stream(seed, key, Concern::Weight),
                ),
            };
            let daily_volume = if opts.probabilistic_ingestion {
                draw_exponential(
                    row.mean_volume,
                    &mut rng::agent_stream(seed, key, Concern::Volume),
                )
            } else {
                FIXED_DAILY_VOLUME
            };
            agents.push(Agent {
                id,
                stream_key: key,
                group,
                weight,
                employed,
                daily_volume,
                home,
                itinerary: Itinerary::StayHome,
                dose: 0.0,
                critical_dose: opts.dose_model.critical_dose(weight),
                exposure: None,
                warning: None,
                reduction: ReductionChoice::default(),
                reduction_from: None,
            });
        }
    }
    if opts.mobility {
        assign_itineraries(network, profile, opts, seed, &mut agents)?;
    }
    Ok(agents)
}

fn assign_itineraries(
    network: &Network,
    profile: &NodePopulationProfile,
    opts: &PopulationOptions,
    seed: u64,
    agents: &mut [Agent],
) -> Result<(), PopulationError> {
    let step = profile.step();
    let shift_steps = (math::round(opts.work_hours * 3600.0 / step) as usize).max(1);
    let stays = profile.stays(shift_steps);
    let mut rng = rng::trial_stream(seed, Concern::Itinerary);
    let mut workers: Vec<u32> = agents.iter().filter(|a| a.employed).map(|a| a.id).collect();
    let mut others: Vec<u32> = agents
        .iter()
        .filter(|a| !a.employed)
        .map(|a| a.id)
        .collect();
    workers.shuffle(&mut rng);
    others.shuffle(&mut rng);
    for stay in stays {
        let (first, second) = if stay.shift {
            (&mut workers, &mut others)
        } else {
            (&mut others, &mut workers)
        };
        let id = first.pop().or_else(|| second.pop()).ok_or_else(|| {
            PopulationError::InfeasibleProfile(format!(
                "visitor targets exceed the population ({} agents)",
                agents.len()
            ))
        })?;
        let agent = &mut agents[id as usize];
        let travel = network
            .distance(agent.home, stay.node)
            .map_or(0.0, |d| d / opts.walking_speed);
        let duration = stay.len as f64 * step;
        if 2.0 * travel + duration >= SECONDS_PER_DAY {
            return Err(PopulationError::InfeasibleProfile(format!(
                "agent {id} cannot walk to {} and back within a day",
                network.node(stay.node).id
            )));
        }
        agent.itinerary = Itinerary::Visit {
            destination: stay.node,
            arrive: stay.start as f64 * step,
            stay: duration,
            travel,
        };
    }
    Ok(())
}
