//! Consumer reactions: dose accumulation, protective demand cuts, the nodal
//! demand update, and word-of-mouth warnings within clusters.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::network::NodeIndex;
use crate::population::Agent;
use crate::rng::{self, Concern, SimRng};
use crate::scenario::{ClusterParams, ScenarioError};

/// Largest possible reduction factor: the four suspendable end uses together.
pub const MAX_REDUCTION: f64 = 0.417;

/// Critical dose rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DoseModel {
    /// Same threshold for everyone (infectious dose, organisms).
    FixedCount(f64),
    /// kg of contaminant per kg of body weight.
    PerBodyWeight(f64),
}

impl DoseModel {
    /// Critical dose in internal mass units: organisms for a fixed count, mg
    /// for a body-weight coefficient.
    pub fn critical_dose(&self, weight_kg: f64) -> f64 {
        match *self {
            DoseModel::FixedCount(n) => n,
            DoseModel::PerBodyWeight(c) => c * weight_kg * 1e6,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let v = match *self {
            DoseModel::FixedCount(n) => n,
            DoseModel::PerBodyWeight(c) => c,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(ScenarioError::out_of_range(
                "critical_dose",
                "must be positive",
            ))
        }
    }
}

/// Indoor end uses a consumer can suspend when alerted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    WashingClothes = 0,
    Shower = 1,
    Faucet = 2,
    MiscIndoor = 3,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::WashingClothes,
        Activity::Shower,
        Activity::Faucet,
        Activity::MiscIndoor,
    ];

    /// Share of total household water use.
    pub fn demand_fraction(self) -> f64 {
        match self {
            Activity::WashingClothes => 0.154,
            Activity::Shower => 0.116,
            Activity::Faucet => 0.112,
            Activity::MiscIndoor => 0.035,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Activity::WashingClothes => "washing_clothes",
            Activity::Shower => "shower",
            Activity::Faucet => "faucet",
            Activity::MiscIndoor => "misc_indoor",
        }
    }
}

/// Probability of suspending each activity once alerted. The defaults are
/// placeholders; supply survey-derived values through the scenario file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionTable {
    pub probabilities: [f64; 4],
}

impl Default for SuspensionTable {
    fn default() -> Self {
        SuspensionTable {
            probabilities: [0.8, 0.7, 0.9, 0.8],
        }
    }
}

impl SuspensionTable {
    pub fn probability(&self, a: Activity) -> f64 {
        self.probabilities[a as usize]
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for a in Activity::ALL {
            let p = self.probability(a);
            if !(0.0..=1.0).contains(&p) {
                return Err(ScenarioError::OutOfRange {
                    key: alloc::format!("suspension.{}", a.key()),
                    reason: "probability must lie in [0, 1]".into(),
                });
            }
        }
        Ok(())
    }
}

/// Set of suspended activities, one bit per [`Activity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReductionChoice(pub u8);

impl ReductionChoice {
    pub fn suspends(self, a: Activity) -> bool {
        self.0 & (1 << a as u8) != 0
    }

    /// Reduction factor: summed demand fractions of suspended activities.
    pub fn factor(self) -> f64 {
        let rf: f64 = Activity::ALL
            .iter()
            .filter(|a| self.suspends(**a))
            .map(|a| a.demand_fraction())
            .sum();
        rf.min(MAX_REDUCTION)
    }
}

/// Adds `concentration · volume` to the agent's dose and flags exposure the
/// first time the dose reaches its critical value. Returns `true` on that
/// first crossing.
pub fn accumulate_dose(
    agent: &mut Agent,
    concentration: f64,
    volume: f64,
    time: f64,
    step: usize,
    node: NodeIndex,
) -> bool {
    debug_assert!(concentration >= 0.0 && volume >= 0.0);
    agent.dose += concentration * volume;
    if agent.exposure.is_none() && agent.dose >= agent.critical_dose {
        agent.exposure = Some(crate::population::Exposure { time, step, node });
        true
    } else {
        false
    }
}

/// Evaluates each activity independently against its suspension probability.
pub fn decide_reduction(table: &SuspensionTable, rng: &mut SimRng) -> ReductionChoice {
    let mut mask = 0u8;
    for a in Activity::ALL {
        let u: f64 = rng.random();
        if u < table.probability(a) {
            mask |= 1 << a as u8;
        }
    }
    ReductionChoice(mask)
}

/// Nodal demand after the occupants' reductions:
/// `base · (Σ(1 − RF_i) / K)`. With nobody present the base is kept.
pub fn update_node_demand<I: IntoIterator<Item = f64>>(base: f64, reductions: I) -> f64 {
    let mut k = 0usize;
    let mut kept = 0.0;
    for rf in reductions {
        k += 1;
        kept += 1.0 - rf;
    }
    if k == 0 {
        base
    } else {
        base * (kept / k as f64)
    }
}

/// Occupant tally for one node, keyed by reduction choice, so the demand
/// update does not depend on the order agents are visited in.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReductionTally {
    counts: [u32; 16],
}

impl ReductionTally {
    pub fn add(&mut self, choice: ReductionChoice) {
        self.counts[choice.0 as usize & 0xF] += 1;
    }

    pub fn occupants(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn demand(&self, base: f64) -> f64 {
        let k = self.occupants();
        if k == 0 {
            return base;
        }
        let kept: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(m, &c)| c as f64 * (1.0 - ReductionChoice(m as u8).factor()))
            .sum();
        base * (kept / k as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Isolate,
    Source,
    Intermediate,
    Ultimate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cluster {
    pub isolates: Vec<u32>,
    pub source: Option<u32>,
    pub intermediates: Vec<u32>,
    pub ultimates: Vec<u32>,
}

impl Cluster {
    pub fn members(&self) -> impl Iterator<Item = u32> + '_ {
        self.isolates
            .iter()
            .chain(self.source.iter())
            .chain(&self.intermediates)
            .chain(&self.ultimates)
            .copied()
    }

    pub fn size(&self) -> usize {
        self.members().count()
    }
}

/// Directed message graph over the population, partitioned into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    pub clusters: Vec<Cluster>,
    out_edges: Vec<Vec<u32>>,
    membership: Vec<(u32, Role)>,
}

impl ClusterGraph {
    pub fn out_edges(&self, agent: u32) -> &[u32] {
        &self.out_edges[agent as usize]
    }

    pub fn role(&self, agent: u32) -> Role {
        self.membership[agent as usize].1
    }

    pub fn cluster_of(&self, agent: u32) -> u32 {
        self.membership[agent as usize].0
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(a, outs)| outs.iter().map(move |&b| (a as u32, b)))
    }

    /// Members a message from the cluster's source reaches, source included.
    pub fn reachable_from_source(&self, cluster: usize) -> usize {
        let Some(src) = self.clusters[cluster].source else {
            return 0;
        };
        let mut seen = alloc::collections::BTreeSet::new();
        let mut stack = vec![src];
        seen.insert(src);
        while let Some(a) = stack.pop() {
            for &b in self.out_edges(a) {
                if seen.insert(b) {
                    stack.push(b);
                }
            }
        }
        seen.len()
    }

    /// Upper bound on agents that can ever be informed: cluster sizes minus
    /// their isolates.
    pub fn informable_ceiling(&self) -> usize {
        self.clusters
            .iter()
            .map(|c| c.size() - c.isolates.len())
            .sum()
    }
}

/// Splits `total` into parts proportional to `weights` (largest remainder,
/// ties to the lower index).
pub(crate) fn apportion(total: u32, weights: &[f64]) -> Vec<u32> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<u32> = exact
        .iter()
        .map(|e| crate::math::floor(*e) as u32)
        .collect();
    let assigned: u32 = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - parts[a] as f64;
        let rb = exact[b] - parts[b] as f64;
        rb.partial_cmp(&ra)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        parts[i] += 1;
    }
    parts
}

/// Shuffles the population into clusters of `params.size` (plus one smaller
/// remainder cluster with proportional roles) and wires each cluster: the
/// source messages every intermediate and the first `direct_share` of the
/// ultimate receivers; the other ultimates are dealt round-robin to the
/// intermediates.
pub fn build_clusters(agents: &[Agent], params: &ClusterParams, seed: u64) -> ClusterGraph {
    let n = agents.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by_key(|&a| agents[a as usize].stream_key);
    let mut rng = rng::trial_stream(seed, Concern::Clusters);
    order.shuffle(&mut rng);

    let size = params.size as usize;
    let mut clusters = Vec::new();
    let mut out_edges = vec![Vec::new(); n];
    let mut membership = vec![(0u32, Role::Isolate); n];

    for chunk in order.chunks(size) {
        let (iso, src, int, ult) = if chunk.len() == size {
            (
                params.isolates,
                params.sources,
                params.intermediates,
                params.ultimates,
            )
        } else {
            let p = apportion(
                chunk.len() as u32,
                &[
                    params.isolates as f64,
                    params.sources as f64,
                    params.intermediates as f64,
                    params.ultimates as f64,
                ],
            );
            (p[0], p[1], p[2], p[3])
        };
        let mut it = chunk.iter().copied();
        let mut take = |k: u32| it.by_ref().take(k as usize).collect::<Vec<u32>>();
        let cluster = Cluster {
            isolates: take(iso),
            source: take(src).first().copied(),
            intermediates: take(int),
            ultimates: take(ult),
        };
        let id = clusters.len() as u32;
        for a in &cluster.isolates {
            membership[*a as usize] = (id, Role::Isolate);
        }
        for a in &cluster.intermediates {
            membership[*a as usize] = (id, Role::Intermediate);
        }
        for a in &cluster.ultimates {
            membership[*a as usize] = (id, Role::Ultimate);
        }
        if let Some(s) = cluster.source {
            membership[s as usize] = (id, Role::Source);
            out_edges[s as usize].extend_from_slice(&cluster.intermediates);
        }
        let direct = if cluster.intermediates.is_empty() {
            cluster.ultimates.len()
        } else {
            crate::math::ceil(cluster.ultimates.len() as f64 * params.direct_share) as usize
        };
        for (i, &u) in cluster.ultimates.iter().enumerate() {
            if i < direct {
                if let Some(s) = cluster.source {
                    out_edges[s as usize].push(u);
                }
            } else {
                let via = cluster.intermediates[(i - direct) % cluster.intermediates.len()];
                out_edges[via as usize].push(u);
            }
        }
        clusters.push(cluster);
    }

    ClusterGraph {
        clusters,
        out_edges,
        membership,
    }
}

/// Delivers the messages due at `step`: every non-isolate that became
/// informed (exposed or warned) `latency` steps earlier messages its
/// out-neighbours. Emissions are collected before any delivery, so the
/// outcome does not depend on agent order. Returns newly warned ids, sorted.
pub fn propagate_warnings(
    graph: &ClusterGraph,
    agents: &mut [Agent],
    step: usize,
    time: f64,
    latency: usize,
) -> Vec<u32> {
    let mut targets: Vec<u32> = Vec::new();
    for a in agents.iter() {
        if graph.role(a.id) == Role::Isolate {
            continue;
        }
        if a.informed_step().map(|s| s + latency) == Some(step) {
            targets.extend_from_slice(graph.out_edges(a.id));
        }
    }
    targets.sort_unstable();
    targets.dedup();
    let mut warned = Vec::new();
    for t in targets {
        let agent = &mut agents[t as usize];
        if agent.warning.is_none() && graph.role(t) != Role::Isolate {
            agent.warning = Some(crate::population::Warning { time, step });
            warned.push(t);
        }
    }
    warned
}
