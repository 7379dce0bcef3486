//! Per-UE downlink traffic sources.
//!
//! * Voice: two-state ON/OFF source with geometric (memoryless) phase lengths
//!   of mean 3 s; while ON, a 40-byte frame every 20 ms.
//! * Video: one frame every 33 ms, frame size drawn from a Pareto law
//!   (shape 1.2) clipped at 60 kB, scaled so the clipped mean is 8250 bytes.
//! * Gaming: a 60-byte packet every 40 ms with uniform ±10 ms jitter.
//!
//! Each generator owns its PRNG, so a flow's packet sequence depends only on
//! its type, its seed and the TTIs at which it is polled.

use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, TrafficError};

/// Duration of one transmission time interval.
pub const TTI_MS: f64 = 1.0;

pub const VOICE_PACKET_BYTES: u32 = 40;
pub const VOICE_PERIOD_TTIS: u64 = 20;
pub const VOICE_MEAN_PHASE_TTIS: f64 = 3000.0;

pub const VIDEO_PERIOD_TTIS: u64 = 33;
pub const VIDEO_MEAN_FRAME_BYTES: f64 = 8250.0;
pub const VIDEO_PARETO_SHAPE: f64 = 1.2;
pub const VIDEO_MAX_FRAME_BYTES: f64 = 60_000.0;

pub const GAMING_PACKET_BYTES: u32 = 60;
pub const GAMING_PERIOD_TTIS: u64 = 40;
pub const GAMING_JITTER_TTIS: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficType {
    Voice,
    Video,
    Gaming,
}

impl TrafficType {
    pub const ALL: [TrafficType; 3] = [TrafficType::Voice, TrafficType::Video, TrafficType::Gaming];

    pub fn index(self) -> usize {
        match self {
            TrafficType::Voice => 0,
            TrafficType::Video => 1,
            TrafficType::Gaming => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficType::Voice => "voice",
            TrafficType::Video => "video",
            TrafficType::Gaming => "gaming",
        }
    }
}

impl fmt::Display for TrafficType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TrafficType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "voice" => Ok(TrafficType::Voice),
            "video" => Ok(TrafficType::Video),
            "gaming" => Ok(TrafficType::Gaming),
            other => Err(format!("unknown traffic type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoSSpec {
    pub traffic_type: TrafficType,
    pub delay_budget_ms: f64,
    pub nominal_rate_bps: f64,
}

impl QoSSpec {
    /// Number of TTIs a packet may wait before it expires.
    pub fn budget_ttis(&self) -> u64 {
        (self.delay_budget_ms / TTI_MS).ceil() as u64
    }
}

pub fn qos_spec(traffic_type: TrafficType) -> QoSSpec {
    let (delay_budget_ms, nominal_rate_bps) = match traffic_type {
        TrafficType::Voice => (100.0, 64e3),
        TrafficType::Video => (150.0, 2e6),
        TrafficType::Gaming => (50.0, 500e3),
    };
    QoSSpec {
        traffic_type,
        delay_budget_ms,
        nominal_rate_bps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub flow_id: usize,
    pub size_bytes: u32,
    pub arrival_tti: u64,
    pub deadline_tti: u64,
}

/// Fractions of the UE population carrying each traffic type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficMix {
    pub voice: f64,
    pub video: f64,
    pub gaming: f64,
}

impl Default for TrafficMix {
    fn default() -> Self {
        Self {
            voice: 0.3,
            video: 0.4,
            gaming: 0.3,
        }
    }
}

impl TrafficMix {
    pub fn fraction(&self, t: TrafficType) -> f64 {
        match t {
            TrafficType::Voice => self.voice,
            TrafficType::Video => self.video,
            TrafficType::Gaming => self.gaming,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for t in TrafficType::ALL {
            let f = self.fraction(t);
            if !(0.0..=1.0).contains(&f) {
                return Err(ConfigError::invalid(
                    format!("traffic.{t}"),
                    "fraction must lie in [0, 1]",
                ));
            }
        }
        let sum = self.voice + self.video + self.gaming;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::invalid(
                "traffic",
                format!("fractions sum to {sum}, expected 1"),
            ));
        }
        Ok(())
    }

    /// Splits `n` UEs into per-type counts by largest remainder, returned as a
    /// type list in voice/video/gaming order. Zero-fraction types get no UEs.
    pub fn assign(&self, n: usize) -> Vec<TrafficType> {
        let quotas: Vec<f64> = TrafficType::ALL
            .iter()
            .map(|&t| self.fraction(t) * n as f64)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..3).filter(|&i| quotas[i] > 0.0).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut remaining = n.saturating_sub(counts.iter().sum());
        for &i in order.iter().cycle().take(3 * n.max(1)) {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        TrafficType::ALL
            .iter()
            .zip(counts)
            .flat_map(|(&t, c)| std::iter::repeat_n(t, c))
            .collect()
    }
}

/// Pareto scale such that `E[min(X, cap)] = VIDEO_MEAN_FRAME_BYTES`.
pub fn video_pareto_scale() -> f64 {
    static SCALE: OnceLock<f64> = OnceLock::new();
    *SCALE.get_or_init(|| {
        let (mut lo, mut hi) = (1.0, VIDEO_MEAN_FRAME_BYTES);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if clipped_pareto_mean(mid, VIDEO_PARETO_SHAPE, VIDEO_MAX_FRAME_BYTES)
                < VIDEO_MEAN_FRAME_BYTES
            {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Mean of `min(X, cap)` for `X ~ Pareto(scale, shape)`, `shape != 1`.
pub fn clipped_pareto_mean(scale: f64, shape: f64, cap: f64) -> f64 {
    scale + scale.powf(shape) * (cap.powf(1.0 - shape) - scale.powf(1.0 - shape)) / (1.0 - shape)
}

/// Closed-form long-run mean bit rate of the generator model.
pub fn expected_rate_bps(traffic_type: TrafficType) -> f64 {
    let tti_s = TTI_MS / 1000.0;
    match traffic_type {
        // Stationary ON probability is one half.
        TrafficType::Voice => {
            0.5 * f64::from(VOICE_PACKET_BYTES) * 8.0 / (VOICE_PERIOD_TTIS as f64 * tti_s)
        }
        TrafficType::Video => VIDEO_MEAN_FRAME_BYTES * 8.0 / (VIDEO_PERIOD_TTIS as f64 * tti_s),
        TrafficType::Gaming => {
            f64::from(GAMING_PACKET_BYTES) * 8.0 / (GAMING_PERIOD_TTIS as f64 * tti_s)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoicePhase {
    On,
    Off,
}

#[derive(Debug, Clone)]
enum SourceState {
    Voice {
        phase: VoicePhase,
        /// First TTI of the next phase; `None` pins the current phase forever.
        phase_end: Option<u64>,
        slot_offset: u64,
    },
    Video {
        frame_offset: u64,
    },
    Gaming {
        next_emission: u64,
        next_nominal: u64,
    },
}

#[derive(Debug, Clone)]
pub struct FlowGenerator {
    flow_id: usize,
    traffic_type: TrafficType,
    qos: QoSSpec,
    state: SourceState,
    rng: ChaCha8Rng,
    last_tti: Option<u64>,
}

/// Creates a generator for `flow_id` whose first poll may happen at any TTI.
pub fn make_generator(flow_id: usize, traffic_type: TrafficType, seed: u64) -> FlowGenerator {
    FlowGenerator::new(flow_id, traffic_type, seed, 0)
}

impl FlowGenerator {
    /// `start_tti` anchors the random phase offsets; generators for UEs that
    /// join mid-episode pass their arrival TTI.
    pub fn new(flow_id: usize, traffic_type: TrafficType, seed: u64, start_tti: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = match traffic_type {
            TrafficType::Voice => {
                let phase = if rng.random_bool(0.5) {
                    VoicePhase::On
                } else {
                    VoicePhase::Off
                };
                let slot_offset = rng.random_range(0..VOICE_PERIOD_TTIS);
                let phase_end = Some(start_tti + sample_phase_length(&mut rng));
                SourceState::Voice {
                    phase,
                    phase_end,
                    slot_offset,
                }
            }
            TrafficType::Video => SourceState::Video {
                frame_offset: start_tti + rng.random_range(0..VIDEO_PERIOD_TTIS),
            },
            TrafficType::Gaming => {
                let nominal =
                    start_tti + GAMING_JITTER_TTIS as u64 + rng.random_range(0..GAMING_PERIOD_TTIS);
                let next_emission = jittered(&mut rng, nominal);
                SourceState::Gaming {
                    next_emission,
                    next_nominal: nominal + GAMING_PERIOD_TTIS,
                }
            }
        };
        Self {
            flow_id,
            traffic_type,
            qos: qos_spec(traffic_type),
            state,
            rng,
            last_tti: None,
        }
    }

    pub fn flow_id(&self) -> usize {
        self.flow_id
    }

    pub fn traffic_type(&self) -> TrafficType {
        self.traffic_type
    }

    /// Forces a voice source into `phase` permanently. No-op for other types.
    pub fn pin_voice_phase(&mut self, phase: VoicePhase) {
        if let SourceState::Voice {
            phase: p,
            phase_end,
            ..
        } = &mut self.state
        {
            *p = phase;
            *phase_end = None;
        }
    }

    pub fn voice_phase(&self) -> Option<VoicePhase> {
        match self.state {
            SourceState::Voice { phase, .. } => Some(phase),
            _ => None,
        }
    }

    /// Next TTI at which a gaming source emits.
    pub fn next_gaming_emission(&self) -> Option<u64> {
        match self.state {
            SourceState::Gaming { next_emission, .. } => Some(next_emission),
            _ => None,
        }
    }

    pub fn is_frame_tti(&self, tti: u64) -> bool {
        match self.state {
            SourceState::Video { frame_offset } => {
                tti >= frame_offset && (tti - frame_offset) % VIDEO_PERIOD_TTIS == 0
            }
            _ => false,
        }
    }

    /// Emits the packets generated during `tti`. TTIs must strictly increase
    /// between calls; skipped TTIs emit nothing but still advance phase state.
    pub fn generate_tti(&mut self, tti: u64) -> Result<Vec<Packet>, TrafficError> {
        if let Some(last) = self.last_tti {
            if tti <= last {
                return Err(TrafficError::NonMonotoneTti {
                    flow_id: self.flow_id,
                    last,
                    got: tti,
                });
            }
        }
        self.last_tti = Some(tti);

        let size = match &mut self.state {
            SourceState::Voice {
                phase,
                phase_end,
                slot_offset,
            } => {
                while let Some(end) = *phase_end {
                    if tti < end {
                        break;
                    }
                    *phase = match phase {
                        VoicePhase::On => VoicePhase::Off,
                        VoicePhase::Off => VoicePhase::On,
                    };
                    *phase_end = Some(end + sample_phase_length(&mut self.rng));
                }
                let slot = tti % VOICE_PERIOD_TTIS == *slot_offset;
                (*phase == VoicePhase::On && slot).then_some(VOICE_PACKET_BYTES)
            }
            SourceState::Video { frame_offset } => {
                let due = tti >= *frame_offset && (tti - *frame_offset) % VIDEO_PERIOD_TTIS == 0;
                due.then(|| sample_frame_bytes(&mut self.rng))
            }
            SourceState::Gaming {
                next_emission,
                next_nominal,
            } => {
                let mut emitted = None;
                while *next_emission <= tti {
                    if *next_emission == tti {
                        emitted = Some(GAMING_PACKET_BYTES);
                    }
                    *next_emission = jittered(&mut self.rng, *next_nominal);
                    *next_nominal += GAMING_PERIOD_TTIS;
                }
                emitted
            }
        };

        Ok(size
            .map(|size_bytes| {
                vec![Packet {
                    flow_id: self.flow_id,
                    size_bytes,
                    arrival_tti: tti,
                    deadline_tti: tti + self.qos.budget_ttis(),
                }]
            })
            .unwrap_or_default())
    }
}

fn sample_phase_length(rng: &mut ChaCha8Rng) -> u64 {
    // 1 + Geometric(p) has mean 1/p.
    let geo = Geometric::new(1.0 / VOICE_MEAN_PHASE_TTIS).expect("valid probability");
    1 + geo.sample(rng)
}

fn sample_frame_bytes(rng: &mut ChaCha8Rng) -> u32 {
    // 1 - U lies in (0, 1], so the inverse CDF is finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    let x = video_pareto_scale() / u.powf(1.0 / VIDEO_PARETO_SHAPE);
    x.min(VIDEO_MAX_FRAME_BYTES).round().max(1.0) as u32
}

fn jittered(rng: &mut ChaCha8Rng, nominal: u64) -> u64 {
    let j = rng.random_range(-GAMING_JITTER_TTIS..=GAMING_JITTER_TTIS);
    (nominal as i64 + j) as u64
}
