//! The bench network's plume compared against a plain parcel tracker that
//! runs ten times finer in time.

use std::collections::VecDeque;
use std::path::Path;

use hydrosoc::parse_network;
use hydrosoc_core::hydraulics::{
    solve_steady, step_extended_period, DemandVector, HydraulicSnapshot,
};
use hydrosoc_core::network::NodeKind;
use hydrosoc_core::quality::{QualityState, SourceInjection};
use hydrosoc_core::Network;

const REFINE: usize = 10;

struct Tracker {
    parcels: Vec<VecDeque<(f64, f64)>>,
    tank_volume: Vec<f64>,
    tank_conc: Vec<f64>,
    node_conc: Vec<f64>,
}

impl Tracker {
    fn new(net: &Network) -> Self {
        let n = net.nodes().len();
        let mut tank_volume = vec![0.0; n];
        for (ord, node) in net.tank_nodes().into_iter().enumerate() {
            if let NodeKind::Tank(t) = &net.node(node).kind {
                tank_volume[node] = t.area() * net.initial_tank_levels()[ord] * 1000.0;
            }
        }
        Tracker {
            parcels: net
                .links()
                .iter()
                .map(|l| VecDeque::from([(l.volume_litres(), 0.0)]))
                .collect(),
            tank_volume,
            tank_conc: vec![0.0; n],
            node_conc: vec![0.0; n],
        }
    }

    /// Takes `v` litres off the far end of a link; returns the mass.
    fn take(q: &mut VecDeque<(f64, f64)>, forward: bool, mut v: f64) -> f64 {
        let mut m = 0.0;
        while v > 0.0 {
            let Some(p) = (if forward { q.back_mut() } else { q.front_mut() }) else {
                break;
            };
            let dv = p.0.min(v);
            p.0 -= dv;
            v -= dv;
            m += dv * p.1;
            if p.0 <= 0.0 {
                if forward {
                    q.pop_back();
                } else {
                    q.pop_front();
                }
            }
        }
        m
    }

    fn put(q: &mut VecDeque<(f64, f64)>, forward: bool, v: f64, c: f64) {
        if v > 0.0 {
            if forward {
                q.push_front((v, c));
            } else {
                q.push_back((v, c));
            }
        }
    }

    fn step(&mut self, net: &Network, hyd: &HydraulicSnapshot, dt: f64, source: (usize, f64)) {
        let n = net.nodes().len();
        let mut ins: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut outs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, l) in net.links().iter().enumerate() {
            let q = hyd.flows[k];
            if q > 0.0 {
                outs[l.from].push(k);
                ins[l.to].push(k);
            } else if q < 0.0 {
                outs[l.to].push(k);
                ins[l.from].push(k);
            }
        }
        // Kahn's algorithm on flow direction; tanks and reservoirs release
        // water without waiting for what flows into them.
        let fixed = |i: usize| !matches!(net.node(i).kind, NodeKind::Junction { .. });
        let mut pending: Vec<usize> = (0..n)
            .map(|i| if fixed(i) { 0 } else { ins[i].len() })
            .collect();
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &k in &outs[i] {
                let l = net.link(k);
                let d = if hyd.flows[k] > 0.0 { l.to } else { l.from };
                if !fixed(d) {
                    pending[d] -= 1;
                    if pending[d] == 0 {
                        ready.push_back(d);
                    }
                }
            }
        }
        assert_eq!(order.len(), n, "flow directions form a cycle");

        let mut tank_in = vec![(0.0, 0.0); n];
        for i in order {
            let mut min = 0.0;
            if !fixed(i) {
                for &k in &ins[i] {
                    min += Self::take(
                        &mut self.parcels[k],
                        hyd.flows[k] > 0.0,
                        hyd.flows[k].abs() * dt,
                    );
                }
            }
            let vout: f64 = outs[i]
                .iter()
                .map(|&k| hyd.flows[k].abs() * dt)
                .sum::<f64>()
                + hyd.demands[i].max(0.0) * dt;
            let c = match net.node(i).kind {
                NodeKind::Junction { .. } => {
                    let m = min + if i == source.0 { source.1 } else { 0.0 };
                    if vout > 0.0 {
                        m / vout
                    } else {
                        self.node_conc[i]
                    }
                }
                NodeKind::Reservoir { .. } => 0.0,
                NodeKind::Tank(_) => self.tank_conc[i],
            };
            self.node_conc[i] = c;
            for &k in &outs[i] {
                Self::put(
                    &mut self.parcels[k],
                    hyd.flows[k] > 0.0,
                    hyd.flows[k].abs() * dt,
                    c,
                );
            }
        }
        // Inflow to tanks mixes once the substep is over.
        for (k, l) in net.links().iter().enumerate() {
            let q = hyd.flows[k];
            let d = if q > 0.0 { l.to } else { l.from };
            if q != 0.0 && matches!(net.node(d).kind, NodeKind::Tank(_)) {
                let v = q.abs() * dt;
                let m = Self::take(&mut self.parcels[k], q > 0.0, v);
                tank_in[d].0 += v;
                tank_in[d].1 += m;
            }
        }
        for i in net.tank_nodes() {
            let out: f64 = outs[i].iter().map(|&k| hyd.flows[k].abs() * dt).sum();
            let (v_in, m_in) = tank_in[i];
            let v0 = self.tank_volume[i];
            let mass = v0 * self.tank_conc[i] - out * self.tank_conc[i] + m_in;
            let v1 = v0 - out + v_in;
            self.tank_volume[i] = v1.max(0.0);
            if v1 > 0.0 {
                self.tank_conc[i] = mass.max(0.0) / v1;
            }
        }
    }
}

#[test]
fn plume_matches_a_fine_parcel_tracker() {
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("bench/bench50.inp"))
            .unwrap();
    let net = parse_network(&text).unwrap();
    let west = net.node_by_id("WEST").unwrap();
    // 300 kg from 06:00 to 12:00, in mg.
    let source = SourceInjection::new(west, 300.0 * 1e6, 6.0 * 3600.0, 12.0 * 3600.0);
    let multiplier = 0.6;
    let h = net.times().hydraulic_step as f64;
    let sub = net.quality_substeps() as usize;
    let dq = h / sub as f64;
    let fine = dq / REFINE as f64;
    let hours = 24usize;

    let demands = |t: f64| DemandVector::from_patterns(&net, t, multiplier);
    let mut hyd = solve_steady(&net, 0.0, &demands(0.0), &net.initial_tank_levels(), None).unwrap();
    let mut engine = QualityState::new(&net, &net.initial_tank_levels());
    let mut oracle = Tracker::new(&net);
    let n = net.nodes().len();
    let mut a = vec![vec![0.0; n]; hours];
    let mut b = vec![vec![0.0; n]; hours];
    let steps_per_hour = (3600.0 / h) as usize;
    let mut t = 0.0;
    for k in 0..hours * steps_per_hour {
        if k > 0 {
            hyd = step_extended_period(&hyd, &net, &demands(k as f64 * h), h).unwrap();
        }
        let hour = k / steps_per_hour;
        for _ in 0..sub {
            engine.step(&net, &hyd, dq, std::slice::from_ref(&source));
            for (acc, c) in a[hour].iter_mut().zip(engine.concentrations()) {
                *acc += c * dq;
            }
            for _ in 0..REFINE {
                oracle.step(&net, &hyd, fine, (west, source.mass_between(t, t + fine)));
                t += fine;
                for (acc, c) in b[hour].iter_mut().zip(&oracle.node_conc) {
                    *acc += c * fine;
                }
            }
        }
    }

    let consumers: Vec<usize> = (0..n)
        .filter(|&i| matches!(net.node(i).kind, NodeKind::Junction { base_demand, .. } if base_demand > 0.0))
        .collect();
    let (mut diff, mut total) = (0.0, 0.0);
    for hour in 0..hours {
        for &i in &consumers {
            diff += (a[hour][i] - b[hour][i]).abs();
            total += b[hour][i].abs();
        }
    }
    assert!(total > 0.0, "the plume never reached a consumer");
    let rel = diff / total;
    assert!(rel <= 0.03, "relative L1 distance {rel}");
}
