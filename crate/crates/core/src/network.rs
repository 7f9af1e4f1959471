//! Pipe-network model: nodes, links, demand patterns and simulation times.
//!
//! Units are fixed: lengths and heads in m, pipe diameters in mm, flows in
//! L/s, times in s. A [`Network`] can only be obtained through
//! [`NetworkBuilder::build`], which resolves id references and checks every
//! structural invariant, so downstream code never sees a partial network.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;

pub type NodeIndex = usize;
pub type LinkIndex = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("reference to undeclared id `{0}`")]
    DanglingReference(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub elevation: f64,
    pub coordinates: Option<(f64, f64)>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Junction {
        base_demand: f64,
        pattern: Option<usize>,
    },
    Reservoir {
        head: f64,
    },
    Tank(Tank),
}

/// Cylindrical storage tank. Levels are measured above the tank elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tank {
    pub initial_level: f64,
    pub min_level: f64,
    pub max_level: f64,
    pub diameter: f64,
}

impl Tank {
    /// Plan area in m².
    pub fn area(&self) -> f64 {
        math::PI * self.diameter * self.diameter / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub length: f64,
    /// Internal diameter in mm.
    pub diameter: f64,
    /// Hazen-Williams C factor.
    pub roughness: f64,
    pub status: LinkStatus,
}

impl Pipe {
    pub fn diameter_m(&self) -> f64 {
        self.diameter / 1000.0
    }

    /// Water volume held by the pipe, in litres.
    pub fn volume_litres(&self) -> f64 {
        let d = self.diameter_m();
        math::PI * d * d / 4.0 * self.length * 1000.0
    }
}

/// Pump described by a single design point; see
/// [`crate::hydraulics::pump_gain`] for the curve it expands to.
#[derive(Debug, Clone, PartialEq)]
pub struct Pump {
    pub design_head: f64,
    /// Design flow in L/s.
    pub design_flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkKind {
    Pipe(Pipe),
    Pump(Pump),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub from: NodeIndex,
    pub to: NodeIndex,
    pub kind: LinkKind,
}

impl Link {
    pub fn volume_litres(&self) -> f64 {
        match &self.kind {
            LinkKind::Pipe(p) => p.volume_litres(),
            LinkKind::Pump(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub id: String,
    pub multipliers: Vec<f64>,
}

/// Simulation clock settings, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Times {
    pub hydraulic_step: u64,
    pub quality_step: u64,
    pub pattern_step: u64,
    pub duration: u64,
}

impl Default for Times {
    fn default() -> Self {
        Times {
            hydraulic_step: 3600,
            quality_step: 300,
            pattern_step: 3600,
            duration: 86_400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    patterns: Vec<Pattern>,
    times: Times,
    node_index: BTreeMap<String, NodeIndex>,
    link_index: BTreeMap<String, LinkIndex>,
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn times(&self) -> Times {
        self.times
    }

    pub fn node(&self, index: NodeIndex) -> &Node {
        &self.nodes[index]
    }

    pub fn link(&self, index: LinkIndex) -> &Link {
        &self.links[index]
    }

    pub fn node_by_id(&self, id: &str) -> Option<NodeIndex> {
        self.node_index.get(id).copied()
    }

    pub fn link_by_id(&self, id: &str) -> Option<LinkIndex> {
        self.link_index.get(id).copied()
    }

    pub fn pattern_by_id(&self, id: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.id == id)
    }

    /// Node indices of tanks, in declaration order. Tank levels in a
    /// hydraulic snapshot are stored in this order.
    pub fn tank_nodes(&self) -> Vec<NodeIndex> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.kind, NodeKind::Tank(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn initial_tank_levels(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.kind {
                NodeKind::Tank(t) => Some(t.initial_level),
                _ => None,
            })
            .collect()
    }

    /// Junctions with a nonzero base demand. These are the nodes where
    /// consumers live, work and drink.
    pub fn terminal_nodes(&self) -> Vec<NodeIndex> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.kind, NodeKind::Junction { base_demand, .. } if base_demand > 0.0))
            .map(|(i, _)| i)
            .collect()
    }

    /// Pattern multiplier in effect at absolute time `t` for `pattern`
    /// (a missing pattern means a constant multiplier of 1).
    pub fn pattern_multiplier(&self, pattern: Option<usize>, t: f64) -> f64 {
        match pattern {
            None => 1.0,
            Some(p) => {
                let mults = &self.patterns[p].multipliers;
                let period = self.times.pattern_step as f64;
                let slot = math::floor(t / period) as u64;
                mults[(slot % mults.len() as u64) as usize]
            }
        }
    }

    /// Largest multiplier of a pattern (1 for the implicit constant pattern).
    pub fn pattern_peak(&self, pattern: Option<usize>) -> f64 {
        match pattern {
            None => 1.0,
            Some(p) => self.patterns[p]
                .multipliers
                .iter()
                .copied()
                .fold(0.0, f64::max),
        }
    }

    /// Demand at a junction at time `t` before any scenario or behavioral
    /// scaling, in L/s. Zero for reservoirs and tanks.
    pub fn pattern_demand(&self, node: NodeIndex, t: f64) -> f64 {
        match self.nodes[node].kind {
            NodeKind::Junction {
                base_demand,
                pattern,
            } => base_demand * self.pattern_multiplier(pattern, t),
            _ => 0.0,
        }
    }

    /// Straight-line distance between two nodes, or `None` when either node
    /// lacks coordinates.
    pub fn distance(&self, a: NodeIndex, b: NodeIndex) -> Option<f64> {
        let (ax, ay) = self.nodes[a].coordinates?;
        let (bx, by) = self.nodes[b].coordinates?;
        Some(math::sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by)))
    }

    /// Total quality sub-steps per hydraulic step.
    pub fn quality_substeps(&self) -> u64 {
        self.times.hydraulic_step / self.times.quality_step
    }

    /// Copy of this network with different clock settings, revalidated.
    pub fn with_times(&self, times: Times) -> Result<Network, NetworkError> {
        validate_times(&times)?;
        let mut net = self.clone();
        net.times = times;
        Ok(net)
    }
}

enum PendingNode {
    Junction {
        base_demand: f64,
        pattern: Option<String>,
    },
    Reservoir {
        head: f64,
    },
    Tank(Tank),
}

struct PendingLink {
    id: String,
    from: String,
    to: String,
    kind: LinkKind,
}

/// Collects declarations by id and resolves them into a validated
/// [`Network`].
#[derive(Default)]
pub struct NetworkBuilder {
    nodes: Vec<(String, f64, PendingNode)>,
    coordinates: Vec<(String, f64, f64)>,
    links: Vec<PendingLink>,
    patterns: Vec<Pattern>,
    times: Times,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn junction(
        &mut self,
        id: &str,
        elevation: f64,
        base_demand: f64,
        pattern: Option<&str>,
    ) -> &mut Self {
        self.nodes.push((
            id.to_string(),
            elevation,
            PendingNode::Junction {
                base_demand,
                pattern: pattern.map(|p| p.to_string()),
            },
        ));
        self
    }

    pub fn reservoir(&mut self, id: &str, head: f64) -> &mut Self {
        self.nodes
            .push((id.to_string(), head, PendingNode::Reservoir { head }));
        self
    }

    pub fn tank(&mut self, id: &str, elevation: f64, tank: Tank) -> &mut Self {
        self.nodes
            .push((id.to_string(), elevation, PendingNode::Tank(tank)));
        self
    }

    pub fn pipe(
        &mut self,
        id: &str,
        from: &str,
        to: &str,
        length: f64,
        diameter_mm: f64,
        roughness: f64,
    ) -> &mut Self {
        self.pipe_with_status(
            id,
            from,
            to,
            length,
            diameter_mm,
            roughness,
            LinkStatus::Open,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn pipe_with_status(
        &mut self,
        id: &str,
        from: &str,
        to: &str,
        length: f64,
        diameter_mm: f64,
        roughness: f64,
        status: LinkStatus,
    ) -> &mut Self {
        self.links.push(PendingLink {
            id: id.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            kind: LinkKind::Pipe(Pipe {
                length,
                diameter: diameter_mm,
                roughness,
                status,
            }),
        });
        self
    }

    pub fn pump(
        &mut self,
        id: &str,
        from: &str,
        to: &str,
        design_head: f64,
        design_flow: f64,
    ) -> &mut Self {
        self.links.push(PendingLink {
            id: id.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            kind: LinkKind::Pump(Pump {
                design_head,
                design_flow,
            }),
        });
        self
    }

    /// Declares a pattern, or appends multipliers if the id already exists.
    pub fn pattern(&mut self, id: &str, multipliers: &[f64]) -> &mut Self {
        match self.patterns.iter_mut().find(|p| p.id == id) {
            Some(p) => p.multipliers.extend_from_slice(multipliers),
            None => self.patterns.push(Pattern {
                id: id.to_string(),
                multipliers: multipliers.to_vec(),
            }),
        }
        self
    }

    pub fn coordinates(&mut self, id: &str, x: f64, y: f64) -> &mut Self {
        self.coordinates.push((id.to_string(), x, y));
        self
    }

    pub fn times(&mut self, times: Times) -> &mut Self {
        self.times = times;
        self
    }

    pub fn build(&self) -> Result<Network, NetworkError> {
        let mut node_index = BTreeMap::new();
        for (i, (id, _, _)) in self.nodes.iter().enumerate() {
            if node_index.insert(id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId(id.clone()));
            }
        }
        let mut pattern_ids = BTreeMap::new();
        for (i, p) in self.patterns.iter().enumerate() {
            if pattern_ids.insert(p.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId(p.id.clone()));
            }
        }

        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (id, elevation, pending) in &self.nodes {
            let kind = match pending {
                PendingNode::Junction {
                    base_demand,
                    pattern,
                } => {
                    let pattern = match pattern {
                        None => None,
                        Some(pid) => Some(
                            *pattern_ids
                                .get(pid)
                                .ok_or_else(|| NetworkError::DanglingReference(pid.clone()))?,
                        ),
                    };
                    NodeKind::Junction {
                        base_demand: *base_demand,
                        pattern,
                    }
                }
                PendingNode::Reservoir { head } => NodeKind::Reservoir { head: *head },
                PendingNode::Tank(t) => NodeKind::Tank(*t),
            };
            nodes.push(Node {
                id: id.clone(),
                elevation: *elevation,
                coordinates: None,
                kind,
            });
        }
        for (id, x, y) in &self.coordinates {
            let i = *node_index
                .get(id)
                .ok_or_else(|| NetworkError::DanglingReference(id.clone()))?;
            nodes[i].coordinates = Some((*x, *y));
        }

        let mut link_index = BTreeMap::new();
        let mut links = Vec::with_capacity(self.links.len());
        for (i, l) in self.links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateId(l.id.clone()));
            }
            let resolve = |id: &String| {
                node_index
                    .get(id)
                    .copied()
                    .ok_or_else(|| NetworkError::DanglingReference(id.clone()))
            };
            links.push(Link {
                id: l.id.clone(),
                from: resolve(&l.from)?,
                to: resolve(&l.to)?,
                kind: l.kind.clone(),
            });
        }

        let net = Network {
            nodes,
            links,
            patterns: self.patterns.clone(),
            times: self.times,
            node_index,
            link_index,
        };
        validate(&net)?;
        Ok(net)
    }
}

fn violation(msg: impl Into<String>) -> NetworkError {
    NetworkError::InvariantViolation(msg.into())
}

fn validate_times(t: &Times) -> Result<(), NetworkError> {
    if t.hydraulic_step == 0 || t.quality_step == 0 || t.pattern_step == 0 {
        return Err(violation("time steps must be positive"));
    }
    if t.quality_step > t.hydraulic_step || !t.hydraulic_step.is_multiple_of(t.quality_step) {
        return Err(violation(
            "quality step must evenly divide the hydraulic step",
        ));
    }
    Ok(())
}

fn validate(net: &Network) -> Result<(), NetworkError> {
    use alloc::format;

    validate_times(&net.times)?;
    let mut has_source = false;
    for n in &net.nodes {
        if !n.elevation.is_finite() {
            return Err(violation(format!(
                "node {} has a non-finite elevation",
                n.id
            )));
        }
        match &n.kind {
            NodeKind::Junction { base_demand, .. } => {
                if !(*base_demand >= 0.0) {
                    return Err(violation(format!(
                        "junction {} has negative base demand",
                        n.id
                    )));
                }
            }
            NodeKind::Reservoir { head } => {
                if !head.is_finite() {
                    return Err(violation(format!(
                        "reservoir {} has a non-finite head",
                        n.id
                    )));
                }
                has_source = true;
            }
            NodeKind::Tank(t) => {
                if !(t.diameter > 0.0) {
                    return Err(violation(format!(
                        "tank {} diameter must be positive",
                        n.id
                    )));
                }
                if !(t.min_level >= 0.0
                    && t.min_level <= t.initial_level
                    && t.initial_level <= t.max_level)
                {
                    return Err(violation(format!(
                        "tank {} levels must satisfy 0 <= min <= initial <= max",
                        n.id
                    )));
                }
                has_source = true;
            }
        }
    }
    if !has_source {
        return Err(violation("network has no reservoir or tank"));
    }
    for l in &net.links {
        if l.from == l.to {
            return Err(violation(format!(
                "link {} connects a node to itself",
                l.id
            )));
        }
        match &l.kind {
            LinkKind::Pipe(p) => {
                if !(p.length > 0.0 && p.diameter > 0.0 && p.roughness > 0.0) {
                    return Err(violation(format!(
                        "pipe {} length, diameter and roughness must be positive",
                        l.id
                    )));
                }
            }
            LinkKind::Pump(p) => {
                if !(p.design_head > 0.0 && p.design_flow > 0.0) {
                    return Err(violation(format!(
                        "pump {} design point must be positive",
                        l.id
                    )));
                }
            }
        }
    }
    for p in &net.patterns {
        if p.multipliers.is_empty() {
            return Err(violation(format!("pattern {} has no multipliers", p.id)));
        }
        if p.multipliers.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(violation(format!(
                "pattern {} has a negative multiplier",
                p.id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> NetworkBuilder {
        let mut b = NetworkBuilder::new();
        b.reservoir("R1", 50.0)
            .junction("J1", 10.0, 1.0, None)
            .pipe("P1", "R1", "J1", 100.0, 200.0, 120.0);
        b
    }

    #[test]
    fn minimal_network_builds() {
        let net = minimal().build().unwrap();
        assert_eq!(net.nodes().len(), 2);
        assert_eq!(net.links().len(), 1);
        assert_eq!(net.link(0).from, net.node_by_id("R1").unwrap());
    }

    #[test]
    fn dangling_link_endpoint() {
        let mut b = minimal();
        b.pipe("P2", "J1", "J9", 10.0, 100.0, 100.0);
        assert_eq!(b.build(), Err(NetworkError::DanglingReference("J9".into())));
    }

    #[test]
    fn duplicate_node_id() {
        let mut b = minimal();
        b.junction("J1", 0.0, 0.0, None);
        assert_eq!(b.build(), Err(NetworkError::DuplicateId("J1".into())));
    }

    #[test]
    fn missing_pattern_is_dangling() {
        let mut b = minimal();
        b.junction("J2", 0.0, 1.0, Some("RES"));
        assert_eq!(
            b.build(),
            Err(NetworkError::DanglingReference("RES".into()))
        );
    }

    #[test]
    fn needs_a_fixed_head_source() {
        let mut b = NetworkBuilder::new();
        b.junction("J1", 0.0, 1.0, None)
            .junction("J2", 0.0, 1.0, None)
            .pipe("P1", "J1", "J2", 10.0, 100.0, 100.0);
        assert!(matches!(
            b.build(),
            Err(NetworkError::InvariantViolation(_))
        ));
    }

    #[test]
    fn tank_levels_ordered() {
        let mut b = minimal();
        b.tank(
            "T1",
            20.0,
            Tank {
                initial_level: 1.0,
                min_level: 2.0,
                max_level: 5.0,
                diameter: 10.0,
            },
        );
        assert!(matches!(
            b.build(),
            Err(NetworkError::InvariantViolation(_))
        ));
    }

    #[test]
    fn non_positive_pipe_properties_rejected() {
        let mut b = minimal();
        b.pipe("P2", "R1", "J1", 0.0, 100.0, 100.0);
        assert!(matches!(
            b.build(),
            Err(NetworkError::InvariantViolation(_))
        ));
    }

    #[test]
    fn negative_multiplier_rejected() {
        let mut b = minimal();
        b.pattern("P", &[1.0, -0.1]);
        assert!(matches!(
            b.build(),
            Err(NetworkError::InvariantViolation(_))
        ));
    }

    #[test]
    fn pattern_lookup_wraps_around() {
        let mut b = minimal();
        b.pattern("D", &[0.5, 1.5])
            .junction("J2", 0.0, 2.0, Some("D"));
        b.pipe("P2", "J1", "J2", 10.0, 100.0, 100.0);
        let net = b.build().unwrap();
        let j2 = net.node_by_id("J2").unwrap();
        assert_eq!(net.pattern_demand(j2, 0.0), 1.0);
        assert_eq!(net.pattern_demand(j2, 3600.0), 3.0);
        assert_eq!(net.pattern_demand(j2, 7200.0), 1.0);
        assert_eq!(net.pattern_peak(net.pattern_by_id("D")), 1.5);
    }

    #[test]
    fn quality_step_must_divide_hydraulic_step() {
        let mut b = minimal();
        b.times(Times {
            hydraulic_step: 3600,
            quality_step: 700,
            pattern_step: 3600,
            duration: 86_400,
        });
        assert!(matches!(
            b.build(),
            Err(NetworkError::InvariantViolation(_))
        ));
    }

    #[test]
    fn pipe_volume() {
        let p = Pipe {
            length: 100.0,
            diameter: 1000.0,
            roughness: 100.0,
            status: LinkStatus::Open,
        };
        assert!((p.volume_litres() - core::f64::consts::PI / 4.0 * 100.0 * 1000.0).abs() < 1e-6);
    }
}
