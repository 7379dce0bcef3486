//! TTI-stepped downlink environment and the interface steering policies use
//! to drive it.
//!
//! Each UE's flow is admitted to exactly one RAT at a time. Packets generated
//! in a TTI go to the queue of the UE's current RAT (its LTE macro or its
//! serving NR small cell), and every base station then spends one TTI of
//! airtime on its FIFO, transmitting each packet at its UE's link rate.

use crate::error::{Result, SteeringError};
use crate::queue::{MetricsAccumulator, MetricsWindow, RatQueue, TtiReport};
use crate::radio::{LinkQuality, Rat, Topology};
use crate::traffic::{qos_spec, FlowGenerator, QoSSpec, TrafficType};

pub const DEFAULT_DECISION_INTERVAL_TTIS: u64 = 50;

/// Everything a policy may look at when deciding for one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub tti: u64,
    pub ue_id: usize,
    pub traffic_type: TrafficType,
    pub qos: QoSSpec,
    /// Indexed by [`Rat::index`].
    pub sinr_db: [f64; 2],
    pub rate_bps: [f64; 2],
    /// Occupancy of the UE's serving LTE and NR queues.
    pub occupancy: [f64; 2],
    /// RAT the flow is currently admitted to; `None` on arrival.
    pub current: Option<Rat>,
    /// This flow's service since its previous decision.
    pub window: MetricsWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub rat: Rat,
    /// Queue threshold in force, for hierarchical agents.
    pub goal: Option<f64>,
    /// Reward credited to the step that just completed, if any.
    pub reward: Option<f64>,
}

pub trait SteeringPolicy {
    fn name(&self) -> &'static str;

    /// Resets per-episode state. `n_ues` counts every UE that may appear.
    fn begin_episode(&mut self, n_ues: usize, training: bool);

    fn decide(&mut self, obs: &Observation) -> Result<Decision, SteeringError>;

    /// Called once with the final observation of every active UE.
    fn end_episode(&mut self, final_obs: &[Observation]) -> Result<(), SteeringError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSnapshot {
    pub bs_id: usize,
    pub occupancy: f64,
    pub served_bits: u64,
    pub dropped_bytes: u64,
    pub cum_enqueued: u64,
    pub cum_served: u64,
    pub cum_dropped: u64,
    pub queued_bytes: u64,
}

impl QueueSnapshot {
    pub fn is_conserved(&self) -> bool {
        self.cum_enqueued == self.cum_served + self.cum_dropped + self.queued_bytes
    }
}

pub struct Network {
    topology: Topology,
    links: Vec<[LinkQuality; 2]>,
    generators: Vec<FlowGenerator>,
    queues: Vec<RatQueue>,
    assignment: Vec<Option<Rat>>,
    ue_windows: Vec<MetricsAccumulator>,
    last_decision: Vec<u64>,
    decision_interval: u64,
    total: MetricsAccumulator,
    per_type: [MetricsAccumulator; 3],
    trace_hash: u64,
    ttis_run: u64,
}

impl Network {
    /// `generator_seed(ue_id)` yields each flow's private PRNG seed.
    pub fn new(
        topology: Topology,
        queue_capacity_bytes: u64,
        decision_interval: u64,
        mut generator_seed: impl FnMut(usize) -> u64,
    ) -> Self {
        assert!(decision_interval >= 1);
        let links = topology.link_table();
        let generators = topology
            .ues
            .iter()
            .map(|ue| {
                FlowGenerator::new(
                    ue.id,
                    ue.traffic_type,
                    generator_seed(ue.id),
                    ue.arrival_tti,
                )
            })
            .collect();
        let queues = topology
            .base_stations
            .iter()
            .map(|bs| RatQueue::new(bs.id, queue_capacity_bytes))
            .collect();
        let n = topology.ues.len();
        Self {
            topology,
            links,
            generators,
            queues,
            assignment: vec![None; n],
            ue_windows: vec![MetricsAccumulator::default(); n],
            last_decision: vec![0; n],
            decision_interval,
            total: MetricsAccumulator::default(),
            per_type: [MetricsAccumulator::default(); 3],
            trace_hash: FNV_OFFSET,
            ttis_run: 0,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn links(&self) -> &[[LinkQuality; 2]] {
        &self.links
    }

    pub fn queues(&self) -> &[RatQueue] {
        &self.queues
    }

    pub fn assignment(&self, ue_id: usize) -> Option<Rat> {
        self.assignment[ue_id]
    }

    pub fn is_active(&self, ue_id: usize, tti: u64) -> bool {
        self.topology.ues[ue_id].arrival_tti <= tti
    }

    /// FNV-1a over every generated (tti, flow, size) triple so far.
    pub fn trace_hash(&self) -> u64 {
        self.trace_hash
    }

    /// UEs that must be (re)decided at the start of `tti`: newly arrived flows,
    /// plus a staggered re-evaluation of every active flow once per interval.
    pub fn due_decisions(&self, tti: u64) -> Vec<usize> {
        self.topology
            .ues
            .iter()
            .filter(|ue| {
                let arrived = ue.arrival_tti == tti;
                let periodic = ue.arrival_tti < tti
                    && tti % self.decision_interval == ue.id as u64 % self.decision_interval;
                arrived || periodic
            })
            .map(|ue| ue.id)
            .collect()
    }

    pub fn observe(&self, ue_id: usize, tti: u64) -> Observation {
        let ue = &self.topology.ues[ue_id];
        let link = &self.links[ue_id];
        let mut window = self.ue_windows[ue_id];
        window.ttis = tti.saturating_sub(self.last_decision[ue_id]);
        Observation {
            tti,
            ue_id,
            traffic_type: ue.traffic_type,
            qos: qos_spec(ue.traffic_type),
            sinr_db: [link[0].sinr_db, link[1].sinr_db],
            rate_bps: [link[0].rate_bps, link[1].rate_bps],
            occupancy: [
                self.queues[ue.serving.lte].occupancy(),
                self.queues[ue.serving.nr].occupancy(),
            ],
            current: self.assignment[ue_id],
            window: window.finish(),
        }
    }

    /// Admits `ue_id`'s flow to `rat` and restarts its metrics window.
    pub fn assign(&mut self, ue_id: usize, rat: Rat, tti: u64) {
        self.assignment[ue_id] = Some(rat);
        self.ue_windows[ue_id] = MetricsAccumulator::default();
        self.last_decision[ue_id] = tti;
    }

    /// Generates, enqueues and serves one TTI. Returns one report per base
    /// station, in id order.
    pub fn step(&mut self, tti: u64) -> Result<Vec<TtiReport>> {
        for ue_id in 0..self.generators.len() {
            let Some(rat) = self.assignment[ue_id] else {
                continue;
            };
            let packets = self.generators[ue_id].generate_tti(tti)?;
            if packets.is_empty() {
                continue;
            }
            for p in &packets {
                self.trace_hash = fnv1a(self.trace_hash, &p.arrival_tti.to_le_bytes());
                self.trace_hash = fnv1a(self.trace_hash, &(p.flow_id as u64).to_le_bytes());
                self.trace_hash = fnv1a(self.trace_hash, &p.size_bytes.to_le_bytes());
            }
            let bs = self.topology.ues[ue_id].serving.bs_for(rat);
            self.queues[bs].enqueue(packets);
        }

        let links = &self.links;
        let mut reports = Vec::with_capacity(self.queues.len());
        for q in &mut self.queues {
            let rat = self.topology.base_stations[q.bs_id()].rat;
            let report = q.serve_tti_with(tti, |flow| links[flow][rat.index()].rate_bps);
            for e in &report.events {
                self.ue_windows[e.flow_id].add_event(e);
                let t = self.topology.ues[e.flow_id].traffic_type.index();
                self.per_type[t].add_event(e);
            }
            self.total.add_report(&report);
            reports.push(report);
        }
        self.ttis_run += 1;
        Ok(reports)
    }

    pub fn snapshots(&self, reports: &[TtiReport]) -> Vec<QueueSnapshot> {
        self.queues
            .iter()
            .zip(reports)
            .map(|(q, r)| QueueSnapshot {
                bs_id: q.bs_id(),
                occupancy: q.occupancy(),
                served_bits: r.served_bits(),
                dropped_bytes: r.dropped_bytes,
                cum_enqueued: q.cum_enqueued(),
                cum_served: q.cum_served(),
                cum_dropped: q.cum_dropped(),
                queued_bytes: q.queued_bytes(),
            })
            .collect()
    }

    /// System-wide metrics over every TTI stepped so far.
    pub fn totals(&self) -> MetricsWindow {
        let mut acc = self.total;
        acc.ttis = self.ttis_run;
        acc.finish()
    }

    pub fn totals_by_type(&self) -> [MetricsWindow; 3] {
        self.per_type.map(|mut acc| {
            acc.ttis = self.ttis_run;
            acc.finish()
        })
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub(crate) fn fnv1a_new(bytes: &[u8]) -> u64 {
    fnv1a(FNV_OFFSET, bytes)
}
