//! Demand-driven hydraulic solver.
//!
//! Steady states are found with the global gradient method: Newton iteration
//! on junction heads with link flows updated from the head solution, so nodal
//! continuity holds after every iteration and the energy residual on each
//! link is driven to tolerance. Extended-period runs chain steady solves,
//! integrating tank levels with forward Euler between them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::network::{LinkKind, LinkStatus, Network, NodeIndex, NodeKind, Pipe, Pump};

/// Hazen-Williams SI coefficient.
pub const HW_COEFFICIENT: f64 = 10.667;
/// Hazen-Williams flow exponent.
pub const HW_EXPONENT: f64 = 1.852;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydraulicError {
    #[error("no convergence after {iterations} iterations (energy residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("junction `{0}` has demand but no path to a fixed-head node")]
    DisconnectedDemand(String),
    #[error("demand at `{0}` is negative or not finite")]
    InvalidDemand(String),
    #[error("tank level vector has {got} entries, network has {expected} tanks")]
    TankCount { expected: usize, got: usize },
}

/// Pipe resistance `r` such that headloss = r·|q|^1.852 with q in m³/s.
pub fn resistance(pipe: &Pipe) -> f64 {
    HW_COEFFICIENT
        * math::powf(pipe.roughness, -HW_EXPONENT)
        * math::powf(pipe.diameter_m(), -4.871)
        * pipe.length
}

/// Hazen-Williams headloss in m for a flow in L/s, signed like the flow.
pub fn headloss(pipe: &Pipe, flow_lps: f64) -> f64 {
    let q = flow_lps / 1000.0;
    resistance(pipe) * math::powf(q.abs(), HW_EXPONENT) * q.signum()
}

/// Shutoff head and maximum flow (L/s) of the curve through a pump's design
/// point: `h = h0·(1 − (q/q_max)²)` with `h0 = 4/3·h_design`,
/// `q_max = 2·q_design`.
pub fn pump_curve(pump: &Pump) -> (f64, f64) {
    (pump.design_head * 4.0 / 3.0, pump.design_flow * 2.0)
}

/// Head added by a pump at a flow in L/s.
pub fn pump_gain(pump: &Pump, flow_lps: f64) -> f64 {
    let (h0, qmax) = pump_curve(pump);
    let r = flow_lps / qmax;
    h0 * (1.0 - r * r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Energy residual tolerance per link: `|ΔH − h(q)| ≤ tol·max(1, |h(q)|)`, m.
    pub head_tolerance: f64,
    /// Continuity tolerance factor: `ε = factor·max(1 L/s, demand)`.
    pub mass_tolerance: f64,
    pub max_iterations: usize,
    /// Below this |q| (L/s) pipe headloss is linearized.
    pub flow_regularization: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            head_tolerance: 1e-4,
            mass_tolerance: 1e-6,
            max_iterations: 200,
            flow_regularization: 1e-4,
        }
    }
}

/// Junction demands in L/s, indexed by node (zero for reservoirs and tanks).
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector(Vec<f64>);

impl DemandVector {
    pub fn new(network: &Network, values: Vec<f64>) -> Result<Self, HydraulicError> {
        assert_eq!(values.len(), network.nodes().len(), "one demand per node");
        for (i, v) in values.iter().enumerate() {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(HydraulicError::InvalidDemand(network.node(i).id.clone()));
            }
            if *v > 0.0 && !matches!(network.node(i).kind, NodeKind::Junction { .. }) {
                return Err(HydraulicError::InvalidDemand(network.node(i).id.clone()));
            }
        }
        Ok(DemandVector(values))
    }

    /// Pattern-driven demands at time `t` scaled by `multiplier`.
    pub fn from_patterns(network: &Network, t: f64, multiplier: f64) -> Self {
        DemandVector(
            (0..network.nodes().len())
                .map(|i| network.pattern_demand(i, t) * multiplier)
                .collect(),
        )
    }

    pub fn zeros(network: &Network) -> Self {
        DemandVector(vec![0.0; network.nodes().len()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DemandVector(self.0.iter().map(|d| d * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TankLimit {
    Empty,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TankLimitEvent {
    pub node: NodeIndex,
    pub time: f64,
    pub limit: TankLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicSnapshot {
    pub time: f64,
    /// Head per node, m.
    pub heads: Vec<f64>,
    /// Flow per link in L/s, positive from `from` to `to`.
    pub flows: Vec<f64>,
    /// Level per tank (in [`Network::tank_nodes`] order), m.
    pub tank_levels: Vec<f64>,
    /// Demand per node, L/s.
    pub demands: Vec<f64>,
    /// Open/closed state per link after the solve.
    pub link_open: Vec<bool>,
    pub iterations: usize,
    pub tank_events: Vec<TankLimitEvent>,
}

impl HydraulicSnapshot {
    /// Net flow into a node from its links, L/s.
    pub fn net_inflow(&self, network: &Network, node: NodeIndex) -> f64 {
        let mut net = 0.0;
        for (k, l) in network.links().iter().enumerate() {
            if l.to == node {
                net += self.flows[k];
            }
            if l.from == node {
                net -= self.flows[k];
            }
        }
        net
    }

    /// Continuity residual `inflow − outflow − demand` per junction, L/s
    /// (zero entries for fixed-head nodes).
    pub fn continuity_residuals(&self, network: &Network) -> Vec<f64> {
        let mut r = vec![0.0; network.nodes().len()];
        for (k, l) in network.links().iter().enumerate() {
            r[l.to] += self.flows[k];
            r[l.from] -= self.flows[k];
        }
        for (i, n) in network.nodes().iter().enumerate() {
            if matches!(n.kind, NodeKind::Junction { .. }) {
                r[i] -= self.demands[i];
            } else {
                r[i] = 0.0;
            }
        }
        r
    }
}

/// Global-gradient solver with configurable tolerances.
#[derive(Debug, Clone, Copy, Default)]
pub struct Solver {
    pub settings: SolverSettings,
}

/// Solves one steady state with default settings; see [`Solver::solve_steady`].
pub fn solve_steady(
    network: &Network,
    time: f64,
    demands: &DemandVector,
    tank_levels: &[f64],
    initial: Option<&HydraulicSnapshot>,
) -> Result<HydraulicSnapshot, HydraulicError> {
    Solver::default().solve_steady(network, time, demands, tank_levels, initial)
}

/// Advances tank levels over `dt` with the flows of `prev`, then re-solves
/// at `prev.time + dt` for the given demands.
pub fn step_extended_period(
    prev: &HydraulicSnapshot,
    network: &Network,
    demands: &DemandVector,
    dt: f64,
) -> Result<HydraulicSnapshot, HydraulicError> {
    Solver::default().step_extended_period(prev, network, demands, dt)
}

// Flow per link in m³/s during iteration.
struct LinkTerm {
    loss: f64,
    gradient: f64,
}

impl Solver {
    pub fn new(settings: SolverSettings) -> Self {
        Solver { settings }
    }

    fn link_term(&self, kind: &LinkKind, q: f64) -> LinkTerm {
        match kind {
            LinkKind::Pipe(p) => {
                let r = resistance(p);
                let qreg = self.settings.flow_regularization / 1000.0;
                let aq = q.abs();
                if aq < qreg {
                    let g = r * math::powf(qreg, HW_EXPONENT - 1.0);
                    LinkTerm {
                        loss: g * q,
                        gradient: g,
                    }
                } else {
                    let g = r * math::powf(aq, HW_EXPONENT - 1.0);
                    LinkTerm {
                        loss: g * q,
                        gradient: HW_EXPONENT * g,
                    }
                }
            }
            LinkKind::Pump(p) => {
                let (h0, qmax_lps) = pump_curve(p);
                let qmax = qmax_lps / 1000.0;
                let loss = -h0 + h0 * (q / qmax) * (q / qmax);
                let gradient = (2.0 * h0 * q.abs() / (qmax * qmax)).max(0.02 * h0 / qmax);
                LinkTerm { loss, gradient }
            }
        }
    }

    fn fixed_heads(&self, network: &Network, tank_levels: &[f64]) -> Vec<Option<f64>> {
        let mut tank = 0;
        network
            .nodes()
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Junction { .. } => None,
                NodeKind::Reservoir { head } => Some(*head),
                NodeKind::Tank(_) => {
                    let h = n.elevation + tank_levels[tank];
                    tank += 1;
                    Some(h)
                }
            })
            .collect()
    }

    pub fn solve_steady(
        &self,
        network: &Network,
        time: f64,
        demands: &DemandVector,
        tank_levels: &[f64],
        initial: Option<&HydraulicSnapshot>,
    ) -> Result<HydraulicSnapshot, HydraulicError> {
        let n_tanks = network.tank_nodes().len();
        if tank_levels.len() != n_tanks {
            return Err(HydraulicError::TankCount {
                expected: n_tanks,
                got: tank_levels.len(),
            });
        }
        let nodes = network.nodes();
        let links = network.links();
        let demand_m3 = demands
            .as_slice()
            .iter()
            .map(|d| d / 1000.0)
            .collect::<Vec<_>>();
        let fixed = self.fixed_heads(network, tank_levels);

        let mut open: Vec<bool> = links
            .iter()
            .enumerate()
            .map(|(k, l)| match &l.kind {
                LinkKind::Pipe(p) => p.status == LinkStatus::Open,
                LinkKind::Pump(_) => initial.is_none_or(|s| s.link_open[k]),
            })
            .collect();
        let mut q: Vec<f64> = links
            .iter()
            .enumerate()
            .map(|(k, l)| {
                if !open[k] {
                    return 0.0;
                }
                if let Some(s) = initial {
                    if s.link_open[k] {
                        return s.flows[k] / 1000.0;
                    }
                }
                match &l.kind {
                    LinkKind::Pipe(p) => {
                        let d = p.diameter_m();
                        0.3 * math::PI * d * d / 4.0
                    }
                    LinkKind::Pump(p) => p.design_flow / 1000.0,
                }
            })
            .collect();
        let mut pump_switches = vec![0u32; links.len()];

        let mut heads = vec![0.0; nodes.len()];
        let mut layout = Layout::build(network, &open, &fixed, &demand_m3)?;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.settings.max_iterations {
            iterations += 1;
            let n = layout.unknowns.len();
            let mut a = vec![0.0; n * n];
            let mut f = vec![0.0; n];
            let mut terms = Vec::with_capacity(links.len());
            for (k, l) in links.iter().enumerate() {
                if !open[k] || !(layout.active_node(l.from) || layout.active_node(l.to)) {
                    terms.push(None);
                    continue;
                }
                let t = self.link_term(&l.kind, q[k]);
                let p = 1.0 / t.gradient;
                let y = p * t.loss;
                match (layout.slot[l.from], layout.slot[l.to]) {
                    (Some(i), Some(j)) => {
                        a[i * n + i] += p;
                        a[j * n + j] += p;
                        a[i * n + j] -= p;
                        a[j * n + i] -= p;
                        f[i] -= q[k] - y;
                        f[j] += q[k] - y;
                    }
                    (Some(i), None) => {
                        a[i * n + i] += p;
                        f[i] -= q[k] - y;
                        f[i] += p * layout.head_of(l.to, &fixed);
                    }
                    (None, Some(j)) => {
                        a[j * n + j] += p;
                        f[j] += q[k] - y;
                        f[j] += p * layout.head_of(l.from, &fixed);
                    }
                    (None, None) => {}
                }
                terms.push(Some((p, y)));
            }
            for (slot, &node) in layout.unknowns.iter().enumerate() {
                f[slot] -= demand_m3[node];
            }
            linalg::cholesky_solve(&mut a, &mut f, n);

            for (i, h) in heads.iter_mut().enumerate() {
                *h = match layout.slot[i] {
                    Some(s) => f[s],
                    None => layout.head_of(i, &fixed),
                };
            }
            for (k, l) in links.iter().enumerate() {
                match terms[k] {
                    Some((p, y)) => q[k] = q[k] - y + p * (heads[l.from] - heads[l.to]),
                    None => q[k] = 0.0,
                }
            }

            let mut status_changed = false;
            for (k, l) in links.iter().enumerate() {
                if let LinkKind::Pump(p) = &l.kind {
                    if pump_switches[k] >= 8 {
                        continue;
                    }
                    let (h0, _) = pump_curve(p);
                    if open[k] && q[k] < 0.0 {
                        open[k] = false;
                        q[k] = 0.0;
                        status_changed = true;
                        pump_switches[k] += 1;
                    } else if !open[k] && heads[l.to] - heads[l.from] < h0 {
                        open[k] = true;
                        q[k] = p.design_flow / 1000.0;
                        status_changed = true;
                        pump_switches[k] += 1;
                    }
                }
            }
            if status_changed {
                layout = Layout::build(network, &open, &fixed, &demand_m3)?;
                continue;
            }

            residual = 0.0;
            for (k, l) in links.iter().enumerate() {
                if terms[k].is_none() || !open[k] {
                    continue;
                }
                let t = self.link_term(&l.kind, q[k]);
                let r = (heads[l.from] - heads[l.to] - t.loss).abs() / t.loss.abs().max(1.0);
                residual = residual.max(r);
            }
            if residual <= self.settings.head_tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(HydraulicError::NonConvergence {
                iterations,
                residual,
            });
        }

        // Junctions cut off from every source with no demand: one common head
        // per isolated group so their (zero) flows are energy-consistent.
        for group in &layout.isolated_groups {
            let h = group
                .iter()
                .map(|&i| nodes[i].elevation)
                .fold(f64::MIN, f64::max);
            for &i in group {
                heads[i] = h;
            }
        }

        Ok(HydraulicSnapshot {
            time,
            heads,
            flows: q.iter().map(|x| x * 1000.0).collect(),
            tank_levels: tank_levels.to_vec(),
            demands: demands.as_slice().to_vec(),
            link_open: open,
            iterations,
            tank_events: Vec::new(),
        })
    }

    pub fn step_extended_period(
        &self,
        prev: &HydraulicSnapshot,
        network: &Network,
        demands: &DemandVector,
        dt: f64,
    ) -> Result<HydraulicSnapshot, HydraulicError> {
        let time = prev.time + dt;
        let mut levels = prev.tank_levels.clone();
        let mut events = Vec::new();
        for (ord, node) in network.tank_nodes().into_iter().enumerate() {
            let NodeKind::Tank(tank) = &network.node(node).kind else {
                unreachable!()
            };
            let inflow_m3 = prev.net_inflow(network, node) / 1000.0;
            let mut level = levels[ord] + inflow_m3 * dt / tank.area();
            if level > tank.max_level {
                level = tank.max_level;
                events.push(TankLimitEvent {
                    node,
                    time,
                    limit: TankLimit::Full,
                });
            } else if level < tank.min_level {
                level = tank.min_level;
                events.push(TankLimitEvent {
                    node,
                    time,
                    limit: TankLimit::Empty,
                });
            }
            levels[ord] = level;
        }
        let mut snap = self.solve_steady(network, time, demands, &levels, Some(prev))?;
        snap.tank_events = events;
        Ok(snap)
    }

    /// Largest continuity violation relative to the allowed bound
    /// `mass_tolerance·max(1, demand)`; ≤ 1 means the invariant holds.
    pub fn continuity_ratio(&self, network: &Network, snap: &HydraulicSnapshot) -> f64 {
        snap.continuity_residuals(network)
            .iter()
            .zip(&snap.demands)
            .map(|(r, d)| r.abs() / (self.settings.mass_tolerance * d.max(1.0)))
            .fold(0.0, f64::max)
    }
}

/// Which junctions are unknowns in the head solve.
struct Layout {
    slot: Vec<Option<usize>>,
    unknowns: Vec<NodeIndex>,
    isolated_groups: Vec<Vec<NodeIndex>>,
    isolated: Vec<bool>,
}

impl Layout {
    fn build(
        network: &Network,
        open: &[bool],
        fixed: &[Option<f64>],
        demand: &[f64],
    ) -> Result<Layout, HydraulicError> {
        let n = network.nodes().len();
        let mut adj: Vec<Vec<NodeIndex>> = vec![Vec::new(); n];
        for (k, l) in network.links().iter().enumerate() {
            if open[k] {
                adj[l.from].push(l.to);
                adj[l.to].push(l.from);
            }
        }
        let mut reached = vec![false; n];
        let mut stack: Vec<NodeIndex> = (0..n).filter(|&i| fixed[i].is_some()).collect();
        for &i in &stack {
            reached[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !reached[j] {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        let mut slot = vec![None; n];
        let mut unknowns = Vec::new();
        let mut isolated = vec![false; n];
        for i in 0..n {
            if fixed[i].is_some() {
                continue;
            }
            if reached[i] {
                slot[i] = Some(unknowns.len());
                unknowns.push(i);
            } else if demand[i] > 0.0 {
                return Err(HydraulicError::DisconnectedDemand(
                    network.node(i).id.clone(),
                ));
            } else {
                isolated[i] = true;
            }
        }
        let mut isolated_groups = Vec::new();
        let mut seen = vec![false; n];
        for start in 0..n {
            if !isolated[start] || seen[start] {
                continue;
            }
            let mut group = vec![start];
            seen[start] = true;
            let mut cursor = 0;
            while cursor < group.len() {
                let i = group[cursor];
                cursor += 1;
                for &j in &adj[i] {
                    if isolated[j] && !seen[j] {
                        seen[j] = true;
                        group.push(j);
                    }
                }
            }
            isolated_groups.push(group);
        }
        Ok(Layout {
            slot,
            unknowns,
            isolated_groups,
            isolated,
        })
    }

    fn active_node(&self, i: NodeIndex) -> bool {
        !self.isolated[i]
    }

    fn head_of(&self, i: NodeIndex, fixed: &[Option<f64>]) -> f64 {
        fixed[i].unwrap_or(0.0)
    }
}

mod linalg {
    /// Solves `A x = b` in place for symmetric positive-definite `A`
    /// (row-major, n×n). On return `b` holds `x`; `A` is overwritten with its
    /// Cholesky factor.
    pub fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            let d = crate::math::sqrt(d.max(f64::MIN_POSITIVE));
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= a[i * n + k] * b[k];
            }
            b[i] = s / a[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= a[k * n + i] * b[k];
            }
            b[i] = s / a[i * n + i];
        }
    }

    #[cfg(test)]
    mod tests {
        #[test]
        fn solves_small_spd_system() {
            let mut a = [4.0, 1.0, 1.0, 3.0];
            let mut b = [1.0, 2.0];
            super::cholesky_solve(&mut a, &mut b, 2);
            assert!((b[0] - 1.0 / 11.0).abs() < 1e-14);
            assert!((b[1] - 7.0 / 11.0).abs() < 1e-14);
        }
    }
}

/// Human-readable note for a tank hitting a limit.
pub fn describe_tank_event(network: &Network, e: &TankLimitEvent) -> String {
    let what = match e.limit {
        TankLimit::Empty => "empty",
        TankLimit::Full => "full",
    };
    format!("tank {} {} at t={}s", network.node(e.node).id, what, e.time)
}
