//! Per-base-station downlink FIFO with tail drop, deadline expiry and
//! airtime-limited service each TTI.

use std::collections::VecDeque;

use crate::traffic::{Packet, TTI_MS};

pub const DEFAULT_QUEUE_CAPACITY_BYTES: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueuedPacket {
    packet: Packet,
    remaining_bytes: u32,
}

/// What happened to one flow's bytes inside a single TTI report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEvent {
    pub flow_id: usize,
    pub served_bytes: u64,
    pub dropped_bytes: u64,
    /// Set when this event completed a packet.
    pub completed_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TtiReport {
    pub tti: u64,
    pub bs_id: usize,
    pub served_bytes: u64,
    /// Expired plus tail-dropped bytes since the previous report.
    pub dropped_bytes: u64,
    pub events: Vec<FlowEvent>,
}

impl TtiReport {
    pub fn served_bits(&self) -> u64 {
        self.served_bytes * 8
    }

    pub fn completed_delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter_map(|e| e.completed_delay_ms)
    }
}

#[derive(Debug, Clone)]
pub struct RatQueue {
    bs_id: usize,
    fifo: VecDeque<QueuedPacket>,
    capacity_bytes: u64,
    queued_bytes: u64,
    /// Every byte ever offered to `enqueue`, accepted or not.
    cum_enqueued: u64,
    cum_served: u64,
    cum_dropped: u64,
    pending_drops: Vec<FlowEvent>,
}

impl RatQueue {
    pub fn new(bs_id: usize, capacity_bytes: u64) -> Self {
        assert!(capacity_bytes > 0, "queue capacity must be positive");
        Self {
            bs_id,
            fifo: VecDeque::new(),
            capacity_bytes,
            queued_bytes: 0,
            cum_enqueued: 0,
            cum_served: 0,
            cum_dropped: 0,
            pending_drops: Vec::new(),
        }
    }

    pub fn bs_id(&self) -> usize {
        self.bs_id
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn cum_enqueued(&self) -> u64 {
        self.cum_enqueued
    }

    pub fn cum_served(&self) -> u64 {
        self.cum_served
    }

    pub fn cum_dropped(&self) -> u64 {
        self.cum_dropped
    }

    pub fn occupancy(&self) -> f64 {
        self.queued_bytes as f64 / self.capacity_bytes as f64
    }

    /// `enqueued == served + dropped + queued`, in bytes.
    pub fn is_conserved(&self) -> bool {
        self.cum_enqueued == self.cum_served + self.cum_dropped + self.queued_bytes
    }

    /// Appends packets in order; a packet that does not fit in the remaining
    /// capacity is tail-dropped. Returns the number accepted.
    pub fn enqueue(&mut self, packets: impl IntoIterator<Item = Packet>) -> usize {
        let mut accepted = 0;
        for packet in packets {
            let size = u64::from(packet.size_bytes);
            self.cum_enqueued += size;
            if self.queued_bytes + size <= self.capacity_bytes {
                self.queued_bytes += size;
                self.fifo.push_back(QueuedPacket {
                    packet,
                    remaining_bytes: packet.size_bytes,
                });
                accepted += 1;
            } else {
                self.cum_dropped += size;
                self.pending_drops.push(FlowEvent {
                    flow_id: packet.flow_id,
                    served_bytes: 0,
                    dropped_bytes: size,
                    completed_delay_ms: None,
                });
            }
        }
        accepted
    }

    /// Serves the queue at a single link rate for all flows.
    pub fn serve_tti(&mut self, rate_bps: f64, tti: u64) -> TtiReport {
        self.serve_tti_with(tti, |_| rate_bps)
    }

    /// Expires overdue packets, then spends one TTI of airtime on the FIFO,
    /// transmitting each head packet at `rate_of(flow_id)`. A head packet that
    /// does not fit keeps its residual bytes for the next TTI.
    pub fn serve_tti_with(&mut self, tti: u64, mut rate_of: impl FnMut(usize) -> f64) -> TtiReport {
        let mut report = TtiReport {
            tti,
            bs_id: self.bs_id,
            ..Default::default()
        };
        report.events.append(&mut self.pending_drops);

        let mut expired = 0u64;
        self.fifo.retain(|q| {
            if q.packet.deadline_tti < tti {
                expired += u64::from(q.remaining_bytes);
                report.events.push(FlowEvent {
                    flow_id: q.packet.flow_id,
                    served_bytes: 0,
                    dropped_bytes: u64::from(q.remaining_bytes),
                    completed_delay_ms: None,
                });
                false
            } else {
                true
            }
        });
        self.queued_bytes -= expired;
        self.cum_dropped += expired;

        let tti_s = TTI_MS / 1000.0;
        let mut airtime = 1.0f64;
        while let Some(head) = self.fifo.front_mut() {
            let rate = rate_of(head.packet.flow_id);
            if !(rate > 0.0) || airtime <= 0.0 {
                break;
            }
            // Tolerance absorbs rounding in the airtime bookkeeping.
            let capacity = airtime * rate * tti_s / 8.0 + 1e-9;
            let remaining = f64::from(head.remaining_bytes);
            if remaining <= capacity {
                airtime -= remaining * 8.0 / (rate * tti_s);
                let bytes = u64::from(head.remaining_bytes);
                let delay = (tti - head.packet.arrival_tti) as f64 * TTI_MS;
                report.events.push(FlowEvent {
                    flow_id: head.packet.flow_id,
                    served_bytes: bytes,
                    dropped_bytes: 0,
                    completed_delay_ms: Some(delay),
                });
                report.served_bytes += bytes;
                self.queued_bytes -= bytes;
                self.fifo.pop_front();
            } else {
                let bytes = capacity.floor() as u32;
                if bytes > 0 {
                    head.remaining_bytes -= bytes;
                    report.events.push(FlowEvent {
                        flow_id: head.packet.flow_id,
                        served_bytes: u64::from(bytes),
                        dropped_bytes: 0,
                        completed_delay_ms: None,
                    });
                    report.served_bytes += u64::from(bytes);
                    self.queued_bytes -= u64::from(bytes);
                }
                break;
            }
        }
        self.cum_served += report.served_bytes;
        report.dropped_bytes = report.events.iter().map(|e| e.dropped_bytes).sum();
        report
    }

    /// Arrival TTIs of queued packets, head first.
    pub fn arrival_order(&self) -> impl Iterator<Item = u64> + '_ {
        self.fifo.iter().map(|q| q.packet.arrival_tti)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsWindow {
    pub window_ttis: u64,
    pub avg_throughput_bps: f64,
    pub avg_delay_ms: f64,
    pub drop_ratio: f64,
}

/// Mergeable sums behind a [`MetricsWindow`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsAccumulator {
    pub ttis: u64,
    pub served_bytes: u64,
    pub dropped_bytes: u64,
    pub delay_sum_ms: f64,
    pub completed_packets: u64,
}

impl MetricsAccumulator {
    pub fn add_event(&mut self, event: &FlowEvent) {
        self.served_bytes += event.served_bytes;
        self.dropped_bytes += event.dropped_bytes;
        if let Some(d) = event.completed_delay_ms {
            self.delay_sum_ms += d;
            self.completed_packets += 1;
        }
    }

    pub fn add_report(&mut self, report: &TtiReport) {
        for e in &report.events {
            self.add_event(e);
        }
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.ttis += other.ttis;
        self.served_bytes += other.served_bytes;
        self.dropped_bytes += other.dropped_bytes;
        self.delay_sum_ms += other.delay_sum_ms;
        self.completed_packets += other.completed_packets;
    }

    pub fn finish(&self) -> MetricsWindow {
        let window_s = self.ttis as f64 * TTI_MS / 1000.0;
        let total = self.served_bytes + self.dropped_bytes;
        MetricsWindow {
            window_ttis: self.ttis,
            avg_throughput_bps: if self.ttis == 0 {
                0.0
            } else {
                (self.served_bytes * 8) as f64 / window_s
            },
            avg_delay_ms: if self.completed_packets == 0 {
                0.0
            } else {
                self.delay_sum_ms / self.completed_packets as f64
            },
            drop_ratio: if total == 0 {
                0.0
            } else {
                self.dropped_bytes as f64 / total as f64
            },
        }
    }
}

/// Aggregates reports (from any number of queues) over a window of
/// `window_ttis` TTIs.
pub fn window_metrics<'a>(
    reports: impl IntoIterator<Item = &'a TtiReport>,
    window_ttis: u64,
) -> MetricsWindow {
    assert!(window_ttis >= 1, "window must span at least one TTI");
    let mut acc = MetricsAccumulator {
        ttis: window_ttis,
        ..Default::default()
    };
    for r in reports {
        acc.add_report(r);
    }
    acc.finish()
}
