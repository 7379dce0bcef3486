//! Static multi-RAT topology: one LTE macro cell, a handful of NR small cells
//! and dual-connected UEs. Pathloss, SINR and Shannon link rates are pure
//! functions of geometry; there is no fading.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::traffic::{TrafficMix, TrafficType};

pub const LTE_CARRIER_GHZ: f64 = 0.8;
pub const LTE_BANDWIDTH_HZ: f64 = 10e6;
pub const LTE_TX_POWER_DBM: f64 = 46.0;
pub const NR_CARRIER_GHZ: f64 = 3.5;
pub const NR_BANDWIDTH_HZ: f64 = 20e6;
pub const NR_TX_POWER_DBM: f64 = 30.0;

/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const NOISE_FIGURE_DB: f64 = 9.0;
/// Distances below this are clamped before evaluating the pathloss law.
pub const MIN_PATHLOSS_DISTANCE_M: f64 = 35.0;
/// Spectral-efficiency ceiling applied to the Shannon rate.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 7.4;

pub const DEFAULT_MIN_INTER_SITE_M: f64 = 50.0;
pub const MAX_PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rat {
    Lte,
    Nr,
}

impl Rat {
    pub const ALL: [Rat; 2] = [Rat::Lte, Rat::Nr];

    pub fn index(self) -> usize {
        match self {
            Rat::Lte => 0,
            Rat::Nr => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Rat> {
        match i {
            0 => Some(Rat::Lte),
            1 => Some(Rat::Nr),
            _ => None,
        }
    }

    pub fn other(self) -> Rat {
        match self {
            Rat::Lte => Rat::Nr,
            Rat::Nr => Rat::Lte,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rat::Lte => "LTE",
            Rat::Nr => "NR",
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lte" => Ok(Rat::Lte),
            "nr" => Ok(Rat::Nr),
            other => Err(format!("unknown RAT `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: usize,
    pub rat: Rat,
    pub position: Position,
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
}

impl BaseStation {
    pub fn lte_macro(id: usize, position: Position) -> Self {
        Self {
            id,
            rat: Rat::Lte,
            position,
            carrier_ghz: LTE_CARRIER_GHZ,
            bandwidth_hz: LTE_BANDWIDTH_HZ,
            tx_power_dbm: LTE_TX_POWER_DBM,
        }
    }

    pub fn nr_small_cell(id: usize, position: Position) -> Self {
        Self {
            id,
            rat: Rat::Nr,
            position,
            carrier_ghz: NR_CARRIER_GHZ,
            bandwidth_hz: NR_BANDWIDTH_HZ,
            tx_power_dbm: NR_TX_POWER_DBM,
        }
    }

    /// Receiver noise floor over this carrier's bandwidth, in dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        noise_floor_dbm(self.bandwidth_hz)
    }
}

/// Dual-connectivity serving set of a UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServingSet {
    pub lte: usize,
    pub nr: usize,
}

impl ServingSet {
    pub fn bs_for(&self, rat: Rat) -> usize {
        match rat {
            Rat::Lte => self.lte,
            Rat::Nr => self.nr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEquipment {
    pub id: usize,
    pub position: Position,
    pub traffic_type: TrafficType,
    pub serving: ServingSet,
    /// TTI at which the UE joins the network. Zero for the initial population.
    pub arrival_tti: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    pub ue_id: usize,
    pub bs_id: usize,
    pub sinr_db: f64,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    pub n_small_cells: usize,
    pub n_ues: usize,
    pub macro_radius_m: f64,
    pub min_inter_site_m: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            n_small_cells: 4,
            n_ues: 60,
            macro_radius_m: 1000.0,
            min_inter_site_m: DEFAULT_MIN_INTER_SITE_M,
        }
    }
}

impl TopologyParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_small_cells == 0 {
            return Err(ConfigError::invalid(
                "topology.n_small_cells",
                "must be at least 1",
            ));
        }
        if self.n_ues == 0 {
            return Err(ConfigError::invalid("topology.n_ues", "must be at least 1"));
        }
        if !(self.macro_radius_m > 0.0 && self.macro_radius_m.is_finite()) {
            return Err(ConfigError::invalid(
                "topology.macro_radius_m",
                "must be positive",
            ));
        }
        if !(self.min_inter_site_m >= 0.0) {
            return Err(ConfigError::invalid(
                "topology.min_inter_site_m",
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Immutable network layout. Base station ids are indices into
/// `base_stations`; the LTE macro is always id 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub base_stations: Vec<BaseStation>,
    pub ues: Vec<UserEquipment>,
}

/// Builds a topology with the traffic types assigned in proportion to `mix`.
///
/// Small cells are rejection-sampled uniformly over the macro disk subject to
/// the minimum inter-site distance; UEs are uniform over the disk.
pub fn build_topology(
    params: &TopologyParams,
    mix: &TrafficMix,
    rng_seed: u64,
) -> Result<Topology, ConfigError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut base_stations = vec![BaseStation::lte_macro(0, Position::new(0.0, 0.0))];
    let mut retries = 0usize;
    while base_stations.len() < params.n_small_cells + 1 {
        let candidate = uniform_in_disk(&mut rng, params.macro_radius_m);
        let clear = base_stations[1..]
            .iter()
            .all(|bs| bs.position.distance(&candidate) >= params.min_inter_site_m);
        if clear {
            let id = base_stations.len();
            base_stations.push(BaseStation::nr_small_cell(id, candidate));
        } else {
            retries += 1;
            if retries > MAX_PLACEMENT_RETRIES {
                return Err(ConfigError::Placement {
                    placed: base_stations.len() - 1,
                    requested: params.n_small_cells,
                    retries: MAX_PLACEMENT_RETRIES,
                });
            }
        }
    }

    let mut types = mix.assign(params.n_ues);
    types.shuffle(&mut rng);

    let mut topology = Topology {
        base_stations,
        ues: Vec::with_capacity(params.n_ues),
    };
    for traffic_type in types {
        let position = uniform_in_disk(&mut rng, params.macro_radius_m);
        topology.push_ue(position, traffic_type, 0);
    }
    Ok(topology)
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Position::new(r * theta.cos(), r * theta.sin())
}

impl Topology {
    pub fn lte_bs(&self) -> &BaseStation {
        &self.base_stations[0]
    }

    pub fn small_cells(&self) -> impl Iterator<Item = &BaseStation> {
        self.base_stations.iter().filter(|bs| bs.rat == Rat::Nr)
    }

    pub fn bs(&self, id: usize) -> &BaseStation {
        &self.base_stations[id]
    }

    pub fn ue(&self, id: usize) -> &UserEquipment {
        &self.ues[id]
    }

    /// Geometrically nearest NR small cell (lowest id on exact ties).
    pub fn nearest_small_cell(&self, position: &Position) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for bs in self.small_cells() {
            let d = bs.position.distance(position);
            if d < best.0 {
                best = (d, bs.id);
            }
        }
        best.1
    }

    /// Appends a UE attached to the macro and its nearest small cell.
    /// Returns the new UE id.
    pub fn push_ue(
        &mut self,
        position: Position,
        traffic_type: TrafficType,
        arrival_tti: u64,
    ) -> usize {
        let id = self.ues.len();
        let serving = ServingSet {
            lte: self.lte_bs().id,
            nr: self.nearest_small_cell(&position),
        };
        self.ues.push(UserEquipment {
            id,
            position,
            traffic_type,
            serving,
            arrival_tti,
        });
        id
    }

    /// Link quality of every UE towards both of its serving base stations,
    /// indexed `[ue_id][rat.index()]`.
    pub fn link_table(&self) -> Vec<[LinkQuality; 2]> {
        self.ues
            .iter()
            .map(|ue| {
                Rat::ALL.map(|rat| {
                    let bs = self.bs(ue.serving.bs_for(rat));
                    let sinr = sinr_db(ue, bs, self);
                    LinkQuality {
                        ue_id: ue.id,
                        bs_id: bs.id,
                        sinr_db: sinr,
                        rate_bps: link_rate_bps(sinr, bs.bandwidth_hz),
                    }
                })
            })
            .collect()
    }
}

/// Log-distance pathloss with a 35 m near-field clamp.
pub fn pathloss_db(bs: &BaseStation, ue: &UserEquipment) -> f64 {
    pathloss_at_distance_db(bs.rat, bs.position.distance(&ue.position))
}

pub fn pathloss_at_distance_db(rat: Rat, distance_m: f64) -> f64 {
    let d_km = distance_m.max(MIN_PATHLOSS_DISTANCE_M) / 1000.0;
    match rat {
        Rat::Lte => 128.1 + 37.6 * d_km.log10(),
        Rat::Nr => 140.7 + 36.7 * d_km.log10(),
    }
}

pub fn noise_floor_dbm(bandwidth_hz: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + NOISE_FIGURE_DB
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn received_power_dbm(bs: &BaseStation, ue: &UserEquipment) -> f64 {
    bs.tx_power_dbm - pathloss_db(bs, ue)
}

/// SINR of `ue` on `bs`, treating every other base station of the same RAT as
/// a full-buffer co-channel interferer.
pub fn sinr_db(ue: &UserEquipment, bs: &BaseStation, topology: &Topology) -> f64 {
    let interferers_dbm: Vec<f64> = topology
        .base_stations
        .iter()
        .filter(|other| other.rat == bs.rat && other.id != bs.id)
        .map(|other| received_power_dbm(other, ue))
        .collect();
    sinr_from_powers_db(
        received_power_dbm(bs, ue),
        bs.noise_floor_dbm(),
        &interferers_dbm,
    )
}

/// SINR in dB from received power, noise floor and interferer powers (all dBm).
pub fn sinr_from_powers_db(rx_dbm: f64, noise_dbm: f64, interferers_dbm: &[f64]) -> f64 {
    let denom_mw = db_to_linear(noise_dbm)
        + interferers_dbm
            .iter()
            .map(|&p| db_to_linear(p))
            .sum::<f64>();
    rx_dbm - linear_to_db(denom_mw)
}

/// Shannon rate capped at 7.4 bit/s/Hz.
pub fn link_rate_bps(sinr_db: f64, bandwidth_hz: f64) -> f64 {
    let efficiency = (1.0 + db_to_linear(sinr_db))
        .log2()
        .min(MAX_SPECTRAL_EFFICIENCY);
    bandwidth_hz * efficiency.max(0.0)
}
