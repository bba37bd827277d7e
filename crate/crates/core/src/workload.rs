//! Synthetic scenario generation and trajectory ingestion.
//!
//! ```
//! use iov_offload::workload::{generate_scenario, WorkloadSpec};
//!
//! let s = generate_scenario(&WorkloadSpec::default(), 7).unwrap();
//! assert_eq!((s.edge_count(), s.cloud_count(), s.requests.len()), (10, 20, 20));
//! assert_eq!(s.to_toml().unwrap(), generate_scenario(&WorkloadSpec::default(), 7).unwrap().to_toml().unwrap());
//! ```
//!
//! Draws happen in a fixed order: the edge-cloud bandwidth matrix row by row,
//! then each vehicle (source, destination, speed samples), then each request
//! (length, size, CPU share).

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_scenario, Coverage, NetworkModel, Request, Scenario, Server, ServerKind, SpeedProfile,
    Vehicle, SCHEMA_VERSION,
};
use crate::error::{OffloadError, Result};

/// One row of the server catalogue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerType {
    pub ghz: f64,
    pub cores: u32,
    pub mem_gb: f64,
}

impl ServerType {
    /// Catalogue entry `1..=6`.
    pub fn catalogue(id: u8) -> Option<ServerType> {
        let (ghz, cores, mem_gb) = match id {
            1 => (2.59, 2, 2.0),
            2 => (2.80, 2, 4.0),
            3 => (2.30, 16, 32.0),
            4 => (2.10, 4, 16.0),
            5 => (3.70, 6, 16.0),
            6 => (2.60, 12, 64.0),
            _ => return None,
        };
        Some(ServerType { ghz, cores, mem_gb })
    }

    pub fn speed_mips(&self) -> f64 {
        self.ghz * f64::from(self.cores) * 1000.0
    }

    pub fn mem_kb(&self) -> f64 {
        self.mem_gb * 1e6
    }
}

pub const LATENCY_GRID_S: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1];
pub const PROC_GRID_S: [f64; 6] = [0.9, 1.1, 1.3, 1.5, 1.7, 1.9];
pub const DEADLINE_GRID_S: [f64; 6] = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
pub const REQUEST_GRID: [usize; 7] = [20, 25, 30, 35, 40, 45, 50];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub requests: usize,
    pub edges: usize,
    pub clouds: usize,
    /// Catalogue ids cycled over the edges.
    pub edge_types: Vec<u8>,
    /// Catalogue ids cycled over the clouds.
    pub cloud_types: Vec<u8>,
    pub length_mi: [f64; 2],
    pub size_kb: [f64; 2],
    /// Reply payload as a multiple of the request size.
    pub reply_ratio: f64,
    pub cpu_mean_pct: f64,
    pub cpu_sd_pct: f64,
    pub bw_vehicle_edge_gbps: f64,
    pub bw_edge_cloud_gbps: [f64; 2],
    pub swap_s: f64,
    pub cpu_threshold_pct: f64,
    pub max_latency_s: f64,
    pub max_proc_s: f64,
    pub max_deadline_s: f64,
    pub rsu_origin_x: f64,
    pub d_rsu_m: f64,
    pub speed_mps: [f64; 2],
    pub speed_samples: usize,
    pub speed_period_s: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            requests: 20,
            edges: 10,
            clouds: 20,
            edge_types: vec![1, 3],
            cloud_types: vec![2, 4, 5, 6],
            length_mi: [9000.0, 15000.0],
            size_kb: [1000.0, 5000.0],
            reply_ratio: 1.0,
            cpu_mean_pct: 20.0,
            cpu_sd_pct: 5.0,
            bw_vehicle_edge_gbps: 1.0,
            bw_edge_cloud_gbps: [1.0, 2.0],
            swap_s: 0.05,
            cpu_threshold_pct: 90.0,
            max_latency_s: LATENCY_GRID_S[0],
            max_proc_s: PROC_GRID_S[0],
            max_deadline_s: DEADLINE_GRID_S[0],
            rsu_origin_x: 0.0,
            d_rsu_m: 500.0,
            speed_mps: [10.0, 30.0],
            speed_samples: 60,
            speed_period_s: 1.0,
        }
    }
}

impl WorkloadSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OffloadError::InvalidWorkload(m.to_string()));
        let range_ok = |r: [f64; 2], min: f64| r[0] >= min && r[0] <= r[1] && r[1].is_finite();
        if self.edges == 0 {
            return bad("at least one edge is required");
        }
        if self.clouds > 0 && self.cloud_types.is_empty() || self.edge_types.is_empty() {
            return bad("server type lists must not be empty");
        }
        if let Some(t) = self
            .edge_types
            .iter()
            .chain(&self.cloud_types)
            .find(|&&t| ServerType::catalogue(t).is_none())
        {
            return bad(&format!("unknown server type {t}"));
        }
        if !(range_ok(self.length_mi, f64::MIN_POSITIVE) && range_ok(self.size_kb, f64::MIN_POSITIVE)) {
            return bad("length and size ranges must be positive and ordered");
        }
        if !(self.reply_ratio > 0.0) {
            return bad("reply ratio must be positive");
        }
        if !(self.cpu_sd_pct >= 0.0 && self.cpu_mean_pct > 0.0 && self.cpu_mean_pct <= 100.0) {
            return bad("CPU share distribution must lie in (0, 100]");
        }
        if !(self.bw_vehicle_edge_gbps > 0.0 && range_ok(self.bw_edge_cloud_gbps, f64::MIN_POSITIVE)) {
            return bad("bandwidths must be positive");
        }
        if !(self.swap_s >= 0.0 && self.cpu_threshold_pct > 0.0) {
            return bad("swap time and CPU threshold must be non-negative and positive");
        }
        if !(self.max_latency_s > 0.0 && self.max_proc_s > 0.0 && self.max_deadline_s > 0.0) {
            return bad("SLA bounds must be positive");
        }
        if !(self.d_rsu_m > 0.0 && self.rsu_origin_x.is_finite()) {
            return bad("RSU width must be positive");
        }
        if !(range_ok(self.speed_mps, 0.0) && self.speed_samples > 0 && self.speed_period_s > 0.0) {
            return bad("speed range, sample count and period must be valid");
        }
        Ok(())
    }

    fn road_span(&self) -> [f64; 2] {
        [self.rsu_origin_x, self.rsu_origin_x + self.edges as f64 * self.d_rsu_m]
    }
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn build_servers(spec: &WorkloadSpec) -> Vec<Server> {
    let edges = (0..spec.edges).map(|j| {
        let t = ServerType::catalogue(spec.edge_types[j % spec.edge_types.len()]).expect("validated");
        let left = spec.rsu_origin_x + j as f64 * spec.d_rsu_m;
        (ServerKind::Edge, t, Some(Coverage { left, right: left + spec.d_rsu_m }))
    });
    let clouds = (0..spec.clouds).map(|k| {
        let t = ServerType::catalogue(spec.cloud_types[k % spec.cloud_types.len()]).expect("validated");
        (ServerKind::Cloud, t, None)
    });
    edges
        .chain(clouds)
        .enumerate()
        .map(|(id, (kind, t, coverage))| Server {
            id,
            kind,
            speed_mips: t.speed_mips(),
            mem_kb: t.mem_kb(),
            swap_s: spec.swap_s,
            cpu_threshold_pct: spec.cpu_threshold_pct,
            coverage,
        })
        .collect()
}

/// Builds a scenario with one request per vehicle and synthetic vehicles
/// placed uniformly over the covered road.
pub fn generate_scenario(spec: &WorkloadSpec, seed: u64) -> Result<Scenario> {
    generate_inner(spec, seed, None)
}

/// Like [`generate_scenario`] but request `i` is submitted by vehicle
/// `i mod vehicles.len()` of the supplied fleet.
pub fn generate_with_vehicles(spec: &WorkloadSpec, seed: u64, vehicles: &[Vehicle]) -> Result<Scenario> {
    if vehicles.is_empty() {
        return Err(OffloadError::InvalidWorkload("empty vehicle fleet".into()));
    }
    generate_inner(spec, seed, Some(vehicles))
}

fn generate_inner(spec: &WorkloadSpec, seed: u64, fleet: Option<&[Vehicle]>) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let bw: Vec<Vec<f64>> = (0..spec.edges)
        .map(|_| (0..spec.clouds).map(|_| uniform(&mut rng, spec.bw_edge_cloud_gbps)).collect())
        .collect();

    let vehicles: Vec<Vehicle> = match fleet {
        Some(f) => f
            .iter()
            .enumerate()
            .map(|(id, v)| Vehicle { id, ..v.clone() })
            .collect(),
        None => {
            let span = spec.road_span();
            (0..spec.requests)
                .map(|id| {
                    let src = uniform(&mut rng, span);
                    let dst = uniform(&mut rng, span);
                    let samples_mps = (0..spec.speed_samples)
                        .map(|_| uniform(&mut rng, spec.speed_mps))
                        .collect();
                    Vehicle {
                        id,
                        src_xy: [src, 0.0],
                        dst_xy: [dst, 0.0],
                        speed_profile: SpeedProfile {
                            period_s: spec.speed_period_s,
                            samples_mps,
                        },
                        direction: if dst < src { -1 } else { 1 },
                    }
                })
                .collect()
        }
    };

    let cpu = Normal::new(spec.cpu_mean_pct, spec.cpu_sd_pct)
        .map_err(|e| OffloadError::InvalidWorkload(e.to_string()))?;
    let requests = (0..spec.requests)
        .map(|id| {
            let length_mi = uniform(&mut rng, spec.length_mi);
            let size_kb = uniform(&mut rng, spec.size_kb);
            let cpu_util_pct = loop {
                let x: f64 = cpu.sample(&mut rng);
                if (1.0..=100.0).contains(&x) {
                    break x;
                }
            };
            Request {
                id,
                length_mi,
                size_kb,
                reply_size_kb: size_kb * spec.reply_ratio,
                cpu_util_pct,
                max_latency_s: spec.max_latency_s,
                max_proc_s: spec.max_proc_s,
                max_deadline_s: spec.max_deadline_s,
                vehicle_id: id % vehicles.len().max(1),
            }
        })
        .collect();

    let s = Scenario {
        schema: SCHEMA_VERSION,
        seed,
        rsu_origin_x: spec.rsu_origin_x,
        d_rsu_m: spec.d_rsu_m,
        network: NetworkModel {
            bw_vehicle_edge_gbps: spec.bw_vehicle_edge_gbps,
            relay_cloud_id: NetworkModel::best_relay(&bw),
            bw_edge_cloud_gbps: bw,
        },
        servers: build_servers(spec),
        vehicles,
        requests,
    };
    validate_scenario(&s).into_result()?;
    Ok(s)
}

/// Maps dataset coordinates onto the road: `road_x = origin + scale * (x - x_min)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub x_min: f64,
    pub y_min: f64,
    pub scale: f64,
    pub origin: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64, y: f64) -> [f64; 2] {
        [self.origin + self.scale * (x - self.x_min), self.scale * (y - self.y_min)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub period_s: f64,
    pub scale: f64,
    pub origin: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            period_s: 0.1,
            scale: 1.0,
            origin: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    /// In order of first appearance in the input.
    pub vehicles: Vec<Vehicle>,
    pub map: AffineMap,
}

const ID_COLUMNS: [&str; 3] = ["id", "track_id", "agent_id"];

/// Reads per-agent position samples from CSV with `x_est`, `y_est` and an
/// agent id column. Rows of each agent are taken in file order.
pub fn ingest_trajectories<R: Read>(source: R, opts: &IngestOptions) -> Result<Trajectories> {
    if !(opts.period_s > 0.0 && opts.scale > 0.0) {
        return Err(OffloadError::InvalidWorkload(
            "trajectory period and scale must be positive".into(),
        ));
    }
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let missing = |what: &str| OffloadError::Trajectory {
        row: 1,
        message: format!("missing column {what}"),
    };
    let id_col = ID_COLUMNS
        .iter()
        .find_map(|n| col(n))
        .ok_or_else(|| missing("id, track_id or agent_id"))?;
    let x_col = col("x_est").ok_or_else(|| missing("x_est"))?;
    let y_col = col("y_est").ok_or_else(|| missing("y_est"))?;

    let mut order: Vec<String> = Vec::new();
    let mut samples: HashMap<String, Vec<[f64; 2]>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let cell = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let num = |c: usize, name: &str| {
            cell(c).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| OffloadError::Trajectory {
                row,
                message: format!("{name} is not a number: {:?}", cell(c)),
            })
        };
        let x = num(x_col, "x_est")?;
        let y = num(y_col, "y_est")?;
        let id = cell(id_col).to_string();
        if id.is_empty() {
            return Err(OffloadError::Trajectory {
                row,
                message: "empty agent id".into(),
            });
        }
        samples
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push([x, y]);
    }

    let all = samples.values().flatten();
    let x_min = all.clone().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let y_min = all.map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let map = AffineMap {
        x_min: if x_min.is_finite() { x_min } else { 0.0 },
        y_min: if y_min.is_finite() { y_min } else { 0.0 },
        scale: opts.scale,
        origin: opts.origin,
    };

    let vehicles = order
        .iter()
        .enumerate()
        .map(|(id, key)| {
            let pts: Vec<[f64; 2]> = samples[key].iter().map(|p| map.apply(p[0], p[1])).collect();
            let src = pts[0];
            let dst = pts[pts.len() - 1];
            let samples_mps = if pts.len() < 2 {
                vec![0.0]
            } else {
                pts.windows(2)
                    .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) / opts.period_s)
                    .collect()
            };
            Vehicle {
                id,
                src_xy: src,
                dst_xy: dst,
                speed_profile: SpeedProfile {
                    period_s: opts.period_s,
                    samples_mps,
                },
                direction: if dst[0] < src[0] { -1 } else { 1 },
            }
        })
        .collect();
    Ok(Trajectories { vehicles, map })
}
