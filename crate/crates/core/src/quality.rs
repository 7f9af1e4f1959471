//! Lagrangian transport of a conservative contaminant.
//!
//! Each link holds an ordered list of water parcels (segments). Over a
//! quality step, every link releases `|q|·dt` litres at its downstream end
//! and receives the same volume at its upstream end. Nodes are visited in
//! flow order, so water can cross several short links within one step.
//! Nodes and tanks mix completely; reservoirs supply clean water.
//!
//! Mass is held in internal units (mg or organisms), volumes in litres.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::hydraulics::HydraulicSnapshot;
use crate::network::{LinkIndex, Network, NodeIndex, NodeKind};

/// Adjacent segments closer than this in concentration are merged.
pub const MERGE_TOLERANCE: f64 = 1e-6;
/// Concentrations at or below this count as clean.
pub const CLEAN_THRESHOLD: f64 = 1e-9;
/// Flows smaller than this (L/s) do not move water.
const STAGNANT_FLOW: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualityError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Litres.
    pub volume: f64,
    pub concentration: f64,
}

/// A mass-rate source active on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceInjection {
    pub node: NodeIndex,
    /// Mass units per second.
    pub rate: f64,
    pub start: f64,
    pub end: f64,
}

impl SourceInjection {
    /// Spreads `total_mass` evenly over `[start, end)`.
    pub fn new(node: NodeIndex, total_mass: f64, start: f64, end: f64) -> Self {
        SourceInjection {
            node,
            rate: total_mass / (end - start),
            start,
            end,
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if t >= self.start && t < self.end {
            self.rate
        } else {
            0.0
        }
    }

    /// Mass released over `[t0, t1)`.
    pub fn mass_between(&self, t0: f64, t1: f64) -> f64 {
        let lo = t0.max(self.start);
        let hi = t1.min(self.end);
        if hi > lo {
            self.rate * (hi - lo)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QualityWarning {
    /// Source mass is waiting at a node with no outflow.
    ZeroOutflowAtSource { node: NodeIndex, time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityState {
    time: f64,
    /// Per link, front = the link's `from` end.
    segments: Vec<VecDeque<Segment>>,
    tank_volume: Vec<f64>,
    tank_concentration: Vec<f64>,
    node_concentration: Vec<f64>,
    /// Mass waiting at a node until water leaves it.
    held: Vec<f64>,
    held_warned: Vec<bool>,
    injected: f64,
    withdrawn: f64,
    /// Mass carried into reservoirs.
    exited: f64,
    pub warnings: Vec<QualityWarning>,
}

impl QualityState {
    /// Clean network; tanks start at the given levels (m).
    pub fn new(network: &Network, tank_levels: &[f64]) -> Self {
        let segments = network
            .links()
            .iter()
            .map(|l| {
                let v = l.volume_litres();
                let mut d = VecDeque::new();
                if v > 0.0 {
                    d.push_back(Segment {
                        volume: v,
                        concentration: 0.0,
                    });
                }
                d
            })
            .collect();
        let n = network.nodes().len();
        let mut tank_volume = vec![0.0; n];
        for (ord, node) in network.tank_nodes().into_iter().enumerate() {
            if let NodeKind::Tank(t) = &network.node(node).kind {
                tank_volume[node] = t.area() * tank_levels[ord] * 1000.0;
            }
        }
        QualityState {
            time: 0.0,
            segments,
            tank_volume,
            tank_concentration: vec![0.0; n],
            node_concentration: vec![0.0; n],
            held: vec![0.0; n],
            held_warned: vec![false; n],
            injected: 0.0,
            withdrawn: 0.0,
            exited: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn segments(&self, link: LinkIndex) -> &VecDeque<Segment> {
        &self.segments[link]
    }

    /// Replaces a link's parcels (front = `from` end). Intended for setting
    /// up initial conditions.
    pub fn set_segments(&mut self, link: LinkIndex, segments: Vec<Segment>) {
        self.segments[link] = segments.into();
    }

    pub fn tank_volume(&self, node: NodeIndex) -> f64 {
        self.tank_volume[node]
    }

    pub fn tank_concentration(&self, node: NodeIndex) -> f64 {
        self.tank_concentration[node]
    }

    pub fn set_tank_concentration(&mut self, node: NodeIndex, c: f64) {
        self.tank_concentration[node] = c;
    }

    /// Most recent mixed concentration at a node (0 before the first step).
    pub fn concentration(&self, node: NodeIndex) -> f64 {
        self.node_concentration[node]
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.node_concentration
    }

    pub fn node_concentration(&self, network: &Network, id: &str) -> Result<f64, QualityError> {
        network
            .node_by_id(id)
            .map(|i| self.node_concentration[i])
            .ok_or_else(|| QualityError::UnknownNode(id.into()))
    }

    pub fn is_contaminated(&self, node: NodeIndex) -> bool {
        self.node_concentration[node] > CLEAN_THRESHOLD
    }

    pub fn injected_mass(&self) -> f64 {
        self.injected
    }

    pub fn withdrawn_mass(&self) -> f64 {
        self.withdrawn
    }

    pub fn exited_mass(&self) -> f64 {
        self.exited
    }

    pub fn held_mass(&self) -> f64 {
        self.held.iter().sum()
    }

    pub fn mass_in_pipes(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|d| d.iter())
            .map(|s| s.volume * s.concentration)
            .sum()
    }

    pub fn mass_in_tanks(&self) -> f64 {
        self.tank_volume
            .iter()
            .zip(&self.tank_concentration)
            .map(|(v, c)| v * c)
            .sum()
    }

    /// Contaminant still inside the network (pipes, tanks, and mass waiting
    /// at a source).
    pub fn mass_in_network(&self) -> f64 {
        self.mass_in_pipes() + self.mass_in_tanks() + self.held_mass()
    }

    /// `|injected − (in network + withdrawn + exited)| / injected`, or 0 when
    /// nothing was injected.
    pub fn mass_balance_error(&self) -> f64 {
        if self.injected <= 0.0 {
            return 0.0;
        }
        let accounted = self.mass_in_network() + self.withdrawn + self.exited;
        (self.injected - accounted).abs() / self.injected
    }

    /// Largest concentration anywhere in pipes, tanks or at nodes.
    pub fn max_concentration(&self) -> f64 {
        let pipes = self
            .segments
            .iter()
            .flat_map(|d| d.iter())
            .map(|s| s.concentration)
            .fold(0.0, f64::max);
        let tanks = self.tank_concentration.iter().copied().fold(0.0, f64::max);
        let nodes = self.node_concentration.iter().copied().fold(0.0, f64::max);
        pipes.max(tanks).max(nodes)
    }

    /// Difference between stored parcel volume and physical volume for a link.
    pub fn link_volume_error(&self, network: &Network, link: LinkIndex) -> f64 {
        let stored: f64 = self.segments[link].iter().map(|s| s.volume).sum();
        (stored - network.link(link).volume_litres()).abs()
    }

    /// Queues the source's mass for `[time, time + dt)` at its node. The
    /// mass enters the water leaving that node during the next
    /// [`advect`](Self::advect).
    pub fn inject(&mut self, source: &SourceInjection, dt: f64) {
        let m = source.mass_between(self.time, self.time + dt);
        if m > 0.0 {
            self.held[source.node] += m;
            self.injected += m;
        }
    }

    /// Moves water for `dt` seconds with the flows of `hyd`.
    pub fn advect(&mut self, network: &Network, hyd: &HydraulicSnapshot, dt: f64) {
        let links = network.links();
        let n = network.nodes().len();

        let mut moved = vec![0.0; links.len()];
        let mut upstream = vec![usize::MAX; links.len()];
        let mut downstream = vec![usize::MAX; links.len()];
        let mut inflows: Vec<Vec<LinkIndex>> = vec![Vec::new(); n];
        let mut outflows: Vec<Vec<LinkIndex>> = vec![Vec::new(); n];
        for (k, l) in links.iter().enumerate() {
            let q = hyd.flows[k];
            if q.abs() <= STAGNANT_FLOW {
                continue;
            }
            moved[k] = q.abs() * dt;
            let (u, d) = if q > 0.0 {
                (l.from, l.to)
            } else {
                (l.to, l.from)
            };
            upstream[k] = u;
            downstream[k] = d;
            outflows[u].push(k);
            inflows[d].push(k);
        }

        let order = flow_order(n, &inflows, &outflows, &downstream);
        for node in order {
            let mut vin = 0.0;
            let mut min = 0.0;
            for &k in &inflows[node] {
                let (v, m) = self.pop_downstream(k, hyd.flows[k] > 0.0, moved[k]);
                vin += v;
                min += m;
            }
            let vout_links: f64 = outflows[node].iter().map(|&k| moved[k]).sum();
            let vdemand = hyd.demands[node].max(0.0) * dt;
            let total_out = vout_links + vdemand;

            let c_out = match &network.node(node).kind {
                NodeKind::Junction { .. } => {
                    if total_out > 0.0 {
                        let m = min + self.release_held(node);
                        Some(m / total_out)
                    } else {
                        self.hold(node, min);
                        None
                    }
                }
                NodeKind::Reservoir { .. } => {
                    self.exited += min;
                    if vout_links > 0.0 {
                        Some(self.release_held(node) / vout_links)
                    } else {
                        self.hold(node, 0.0);
                        if vin > 0.0 {
                            self.node_concentration[node] = 0.0;
                        }
                        None
                    }
                }
                NodeKind::Tank(_) => {
                    let released = self.release_held(node);
                    let v0 = self.tank_volume[node];
                    let mass = v0 * self.tank_concentration[node] + min + released;
                    let v1 = v0 + vin;
                    if v1 > 0.0 {
                        self.tank_concentration[node] = mass / v1;
                    }
                    let c = self.tank_concentration[node];
                    self.tank_volume[node] = (v1 - vout_links).max(0.0);
                    self.node_concentration[node] = c;
                    Some(c)
                }
            };

            if let Some(c) = c_out {
                for &k in &outflows[node] {
                    self.push_upstream(k, hyd.flows[k] > 0.0, moved[k], c);
                }
                self.withdrawn += c * vdemand;
                self.node_concentration[node] = c;
            }
        }

        // Links whose upstream end was visited after their downstream end
        // (circulating flow) may now hold extra water; hand it on.
        for (k, l) in links.iter().enumerate() {
            if moved[k] == 0.0 {
                continue;
            }
            let stored: f64 = self.segments[k].iter().map(|s| s.volume).sum();
            let excess = stored - l.volume_litres();
            if excess > 1e-9 * l.volume_litres().max(1.0) {
                let (_, m) = self.pop_downstream(k, hyd.flows[k] > 0.0, excess);
                self.held[downstream[k]] += m;
            }
        }

        self.time += dt;
    }

    /// [`inject`](Self::inject) for every source, then
    /// [`advect`](Self::advect).
    pub fn step(
        &mut self,
        network: &Network,
        hyd: &HydraulicSnapshot,
        dt: f64,
        sources: &[SourceInjection],
    ) {
        for s in sources {
            self.inject(s, dt);
        }
        self.advect(network, hyd, dt);
    }

    fn release_held(&mut self, node: NodeIndex) -> f64 {
        self.held_warned[node] = false;
        core::mem::take(&mut self.held[node])
    }

    fn hold(&mut self, node: NodeIndex, extra: f64) {
        self.held[node] += extra;
        if self.held[node] > 0.0 && !self.held_warned[node] {
            self.held_warned[node] = true;
            self.warnings.push(QualityWarning::ZeroOutflowAtSource {
                node,
                time: self.time,
            });
        }
    }

    /// Removes up to `volume` litres from the downstream end of a link.
    fn pop_downstream(&mut self, link: LinkIndex, forward: bool, volume: f64) -> (f64, f64) {
        let segs = &mut self.segments[link];
        let mut remaining = volume;
        let mut mass = 0.0;
        while remaining > 0.0 {
            let seg = if forward {
                segs.back_mut()
            } else {
                segs.front_mut()
            };
            let Some(seg) = seg else { break };
            if seg.volume <= remaining {
                remaining -= seg.volume;
                mass += seg.volume * seg.concentration;
                if forward {
                    segs.pop_back();
                } else {
                    segs.pop_front();
                }
            } else {
                seg.volume -= remaining;
                mass += remaining * seg.concentration;
                remaining = 0.0;
            }
        }
        (volume - remaining, mass)
    }

    fn push_upstream(&mut self, link: LinkIndex, forward: bool, volume: f64, concentration: f64) {
        if volume <= 0.0 {
            return;
        }
        let segs = &mut self.segments[link];
        let end = if forward {
            segs.front_mut()
        } else {
            segs.back_mut()
        };
        if let Some(seg) = end {
            if (seg.concentration - concentration).abs() < MERGE_TOLERANCE {
                let v = seg.volume + volume;
                seg.concentration = (seg.concentration * seg.volume + concentration * volume) / v;
                seg.volume = v;
                return;
            }
        }
        let seg = Segment {
            volume,
            concentration,
        };
        if forward {
            segs.push_front(seg);
        } else {
            segs.push_back(seg);
        }
    }
}

/// Nodes ordered so every node comes after the upstream ends of its
/// inflowing links, when the flow graph allows it. Nodes on a flow cycle
/// are taken in index order.
fn flow_order(
    n: usize,
    inflows: &[Vec<LinkIndex>],
    outflows: &[Vec<LinkIndex>],
    downstream: &[NodeIndex],
) -> Vec<NodeIndex> {
    let mut indegree: Vec<usize> = inflows.iter().map(|v| v.len()).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut ready: VecDeque<NodeIndex> = (0..n).filter(|&i| indegree[i] == 0).collect();
    loop {
        while let Some(i) = ready.pop_front() {
            if done[i] {
                continue;
            }
            done[i] = true;
            order.push(i);
            for &k in &outflows[i] {
                let d = downstream[k];
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.push_back(d);
                }
            }
        }
        match (0..n).find(|&i| !done[i]) {
            Some(i) => {
                indegree[i] = 0;
                ready.push_back(i);
            }
            None => break,
        }
    }
    order
}
