//! Immutable world description: requests, vehicles, servers, the network and
//! the road layout, plus the structural checks a scenario must pass before it
//! can be evaluated.
//!
//! Positions live on a 1-D road axis. Every edge server sits behind an RSU
//! whose coverage is a half-open interval `[left, right)` of width `d_rsu_m`;
//! edge `j` covers `[rsu_origin_x + j * d_rsu_m, rsu_origin_x + (j + 1) * d_rsu_m)`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};

/// Version tag every serialized scenario must carry.
pub const SCHEMA_VERSION: u32 = 1;

/// One vehicular task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: usize,
    /// Work in million instructions.
    pub length_mi: f64,
    /// Request payload in kilobytes (also its memory footprint).
    pub size_kb: f64,
    /// Reply payload in kilobytes.
    pub reply_size_kb: f64,
    pub cpu_util_pct: f64,
    pub max_latency_s: f64,
    pub max_proc_s: f64,
    pub max_deadline_s: f64,
    pub vehicle_id: usize,
}

/// Piecewise-constant speed samples; sample `k` holds on
/// `[k * period_s, (k + 1) * period_s)` and the last sample holds forever.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub period_s: f64,
    pub samples_mps: Vec<f64>,
}

impl SpeedProfile {
    pub fn constant(speed_mps: f64) -> Self {
        Self {
            period_s: 1.0,
            samples_mps: vec![speed_mps],
        }
    }

    pub fn stationary() -> Self {
        Self::constant(0.0)
    }

    /// Distance covered during `[0, t_s]`.
    pub fn distance(&self, t_s: f64) -> f64 {
        if t_s <= 0.0 || self.samples_mps.is_empty() {
            return 0.0;
        }
        let mut remaining = t_s;
        let mut distance = 0.0;
        let last = self.samples_mps.len() - 1;
        for (k, &speed) in self.samples_mps.iter().enumerate() {
            if k == last {
                distance += speed * remaining;
                break;
            }
            let span = remaining.min(self.period_s);
            distance += speed * span;
            remaining -= span;
            if remaining <= 0.0 {
                break;
            }
        }
        distance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: usize,
    /// Source location in meters; `x` is the road coordinate.
    pub src_xy: [f64; 2],
    pub dst_xy: [f64; 2],
    pub speed_profile: SpeedProfile,
    /// `+1` or `-1` along the road axis.
    pub direction: i8,
}

impl Vehicle {
    pub fn stationary(id: usize, x: f64) -> Self {
        Self {
            id,
            src_xy: [x, 0.0],
            dst_xy: [x, 0.0],
            speed_profile: SpeedProfile::stationary(),
            direction: 1,
        }
    }

    /// Longest distance the vehicle can travel before it reaches its destination.
    pub fn trip_length(&self) -> f64 {
        (self.dst_xy[0] - self.src_xy[0]).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerKind {
    Edge,
    Cloud,
}

/// Half-open road interval `[left, right)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub left: f64,
    pub right: f64,
}

impl Coverage {
    pub fn contains(&self, x: f64) -> bool {
        self.left <= x && x < self.right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: usize,
    pub kind: ServerKind,
    pub speed_mips: f64,
    pub mem_kb: f64,
    pub swap_s: f64,
    pub cpu_threshold_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub bw_vehicle_edge_gbps: f64,
    /// `bw_edge_cloud_gbps[j][k]`: edge `j` to cloud `k`, used in both directions.
    pub bw_edge_cloud_gbps: Vec<Vec<f64>>,
    /// Cloud index used to forward replies between edges.
    pub relay_cloud_id: usize,
}

impl NetworkModel {
    pub fn edge_cloud(&self, edge: usize, cloud: usize) -> f64 {
        self.bw_edge_cloud_gbps[edge][cloud]
    }

    /// The cloud with the highest mean edge bandwidth, lowest index on ties.
    pub fn best_relay(bw_edge_cloud_gbps: &[Vec<f64>]) -> usize {
        let clouds = bw_edge_cloud_gbps.first().map_or(0, Vec::len);
        let mut best = 0;
        let mut best_mean = f64::NEG_INFINITY;
        for k in 0..clouds {
            let mean = bw_edge_cloud_gbps.iter().map(|row| row[k]).sum::<f64>()
                / bw_edge_cloud_gbps.len() as f64;
            if mean > best_mean {
                best_mean = mean;
                best = k;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    pub seed: u64,
    pub rsu_origin_x: f64,
    pub d_rsu_m: f64,
    pub network: NetworkModel,
    pub servers: Vec<Server>,
    pub vehicles: Vec<Vehicle>,
    pub requests: Vec<Request>,
}

impl Scenario {
    pub fn edges(&self) -> impl Iterator<Item = &Server> + '_ {
        self.servers.iter().filter(|s| s.kind == ServerKind::Edge)
    }

    pub fn clouds(&self) -> impl Iterator<Item = &Server> + '_ {
        self.servers.iter().filter(|s| s.kind == ServerKind::Cloud)
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn cloud_count(&self) -> usize {
        self.clouds().count()
    }

    /// Coverage intervals in edge order.
    pub fn layout(&self) -> RoadLayout {
        RoadLayout {
            intervals: self
                .edges()
                .map(|e| {
                    e.coverage.unwrap_or(Coverage {
                        left: f64::NAN,
                        right: f64::NAN,
                    })
                })
                .collect(),
        }
    }

    /// Edge index whose RSU covers the vehicle at submission time.
    pub fn home_edge(&self, vehicle_id: usize) -> Result<usize> {
        let vehicle = &self.vehicles[vehicle_id];
        let x = vehicle.src_xy[0];
        self.layout()
            .edge_covering(x)
            .ok_or(OffloadError::Uncovered {
                vehicle: vehicle_id,
                x,
            })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema: Option<u32>,
        }
        let header: Header = toml::from_str(text)?;
        match header.schema {
            Some(SCHEMA_VERSION) => Ok(toml::from_str(text)?),
            Some(found) => Err(OffloadError::Schema {
                found,
                expected: SCHEMA_VERSION,
            }),
            None => Err(OffloadError::Schema {
                found: 0,
                expected: SCHEMA_VERSION,
            }),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// Edge coverage intervals, indexed by edge.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadLayout {
    intervals: Vec<Coverage>,
}

impl RoadLayout {
    pub fn new(intervals: Vec<Coverage>) -> Self {
        Self { intervals }
    }

    pub fn intervals(&self) -> &[Coverage] {
        &self.intervals
    }

    /// Interval membership lookup; assumes intervals sorted by `left`.
    pub fn edge_covering(&self, x: f64) -> Option<usize> {
        let idx = self.intervals.partition_point(|c| c.left <= x);
        let j = idx.checked_sub(1)?;
        self.intervals[j].contains(x).then_some(j)
    }
}

/// One request's server choice: its home edge or one of the clouds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gene(u16);

impl Gene {
    pub const HOME_EDGE: Gene = Gene(0);

    pub fn cloud(k: usize) -> Gene {
        Gene(u16::try_from(k + 1).expect("cloud index fits in a gene"))
    }

    /// Gene from its position in the alphabet `{HOME_EDGE, cloud 0, cloud 1, ...}`.
    pub fn from_index(index: usize) -> Gene {
        Gene(u16::try_from(index).expect("alphabet index fits in a gene"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn raw(self) -> u16 {
        self.0
    }

    pub fn cloud_index(self) -> Option<usize> {
        (self.0 > 0).then(|| self.0 as usize - 1)
    }

    pub fn is_home_edge(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Gene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cloud_index() {
            None => f.write_str("E"),
            Some(k) => write!(f, "C{k}"),
        }
    }
}

/// A chromosome: one gene per request.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub genes: Vec<Gene>,
}

impl Assignment {
    pub fn new(genes: Vec<Gene>) -> Self {
        Self { genes }
    }

    pub fn all_home_edge(requests: usize) -> Self {
        Self::new(vec![Gene::HOME_EDGE; requests])
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    /// Number of distinct gene values for a scenario with `clouds` clouds.
    pub fn alphabet_size(clouds: usize) -> usize {
        clouds + 1
    }

    pub fn check(&self, requests: usize, clouds: usize) -> Result<()> {
        if self.genes.len() != requests {
            return Err(OffloadError::AssignmentLength {
                expected: requests,
                found: self.genes.len(),
            });
        }
        for (request, gene) in self.genes.iter().enumerate() {
            if gene.cloud_index().is_some_and(|k| k >= clouds) {
                return Err(OffloadError::UnknownCloud {
                    request,
                    gene: gene.raw(),
                    clouds,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.genes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ScenarioIssue {
    #[error("schema {0} is not supported")]
    Schema(u32),
    #[error("scenario has no edge server")]
    NoEdges,
    #[error("{what} at position {index} carries id {id}")]
    IdMismatch {
        what: &'static str,
        index: usize,
        id: usize,
    },
    #[error("{what} {index}: {field} must be positive")]
    NonPositive {
        what: &'static str,
        index: usize,
        field: &'static str,
    },
    #[error("request {0}: cpu utilization must lie in (0, 100]")]
    CpuOutOfRange(usize),
    #[error("request {request}: vehicle {vehicle} does not exist")]
    UnknownVehicle { request: usize, vehicle: usize },
    #[error("coverage width d_rsu_m must be positive")]
    BadRsuWidth,
    #[error("edge server {0} has no coverage interval")]
    MissingCoverage(usize),
    #[error("cloud server {0} must not have a coverage interval")]
    CloudCoverage(usize),
    #[error("coverage overlap between edges {0} and {1}")]
    CoverageOverlap(usize, usize),
    #[error("edge {edge}: coverage [{left}, {right}) is not the equidistant slot [{expected_left}, {expected_right})")]
    CoverageMisaligned {
        edge: usize,
        left: f64,
        right: f64,
        expected_left: f64,
        expected_right: f64,
    },
    #[error("vehicle uncovered: vehicle {vehicle} at x = {x} m")]
    VehicleUncovered { vehicle: usize, x: f64 },
    #[error("vehicle {0}: direction must be +1 or -1")]
    BadDirection(usize),
    #[error("vehicle {0}: direction points away from its destination")]
    DirectionMismatch(usize),
    #[error("vehicle {0}: speeds must be finite and non-negative")]
    NegativeSpeed(usize),
    #[error("vehicle {0}: speed sample period must be positive")]
    BadSpeedPeriod(usize),
    #[error("bandwidth matrix must be {edges} x {clouds}")]
    BandwidthShape { edges: usize, clouds: usize },
    #[error("all bandwidths must be positive")]
    NonPositiveBandwidth,
    #[error("relay cloud {0} does not exist")]
    MissingRelay(usize),
}

/// Outcome of [`validate_scenario`]: empty means the scenario is usable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ScenarioIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(OffloadError::InvalidScenario(self.issues))
        }
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Checks every structural invariant of a scenario. A valid scenario places
/// each vehicle inside exactly one edge coverage at submission time.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut issues = Vec::new();

    if s.schema != SCHEMA_VERSION {
        issues.push(ScenarioIssue::Schema(s.schema));
    }

    for (index, server) in s.servers.iter().enumerate() {
        if server.id != index {
            issues.push(ScenarioIssue::IdMismatch {
                what: "server",
                index,
                id: server.id,
            });
        }
        for (field, value) in [
            ("speed_mips", server.speed_mips),
            ("mem_kb", server.mem_kb),
            ("cpu_threshold_pct", server.cpu_threshold_pct),
        ] {
            if !positive(value) {
                issues.push(ScenarioIssue::NonPositive {
                    what: "server",
                    index,
                    field,
                });
            }
        }
        if !(server.swap_s.is_finite() && server.swap_s >= 0.0) {
            issues.push(ScenarioIssue::NonPositive {
                what: "server",
                index,
                field: "swap_s",
            });
        }
        if server.kind == ServerKind::Cloud && server.coverage.is_some() {
            issues.push(ScenarioIssue::CloudCoverage(index));
        }
    }

    let edges: Vec<&Server> = s.edges().collect();
    let clouds = s.cloud_count();
    if edges.is_empty() {
        issues.push(ScenarioIssue::NoEdges);
    }
    if !positive(s.d_rsu_m) {
        issues.push(ScenarioIssue::BadRsuWidth);
    }

    let mut coverage_ok = true;
    let mut intervals = Vec::with_capacity(edges.len());
    for (j, edge) in edges.iter().enumerate() {
        match edge.coverage {
            None => {
                coverage_ok = false;
                issues.push(ScenarioIssue::MissingCoverage(edge.id));
            }
            Some(c) => intervals.push((j, c)),
        }
    }
    for a in 0..intervals.len() {
        for b in a + 1..intervals.len() {
            let (ja, ca) = intervals[a];
            let (jb, cb) = intervals[b];
            if ca.left < cb.right && cb.left < ca.right {
                coverage_ok = false;
                issues.push(ScenarioIssue::CoverageOverlap(ja, jb));
            }
        }
    }
    if positive(s.d_rsu_m) {
        let tol = 1e-9 * s.d_rsu_m.max(1.0);
        for &(j, c) in &intervals {
            let expected_left = s.rsu_origin_x + j as f64 * s.d_rsu_m;
            let expected_right = expected_left + s.d_rsu_m;
            if (c.left - expected_left).abs() > tol || (c.right - expected_right).abs() > tol {
                coverage_ok = false;
                issues.push(ScenarioIssue::CoverageMisaligned {
                    edge: j,
                    left: c.left,
                    right: c.right,
                    expected_left,
                    expected_right,
                });
            }
        }
    }

    let shape_ok = s.network.bw_edge_cloud_gbps.len() == edges.len()
        && s.network.bw_edge_cloud_gbps.iter().all(|row| row.len() == clouds);
    if !shape_ok {
        issues.push(ScenarioIssue::BandwidthShape {
            edges: edges.len(),
            clouds,
        });
    }
    let all_bw_positive = positive(s.network.bw_vehicle_edge_gbps)
        && s.network
            .bw_edge_cloud_gbps
            .iter()
            .flatten()
            .all(|&bw| positive(bw));
    if !all_bw_positive {
        issues.push(ScenarioIssue::NonPositiveBandwidth);
    }
    if clouds > 0 && s.network.relay_cloud_id >= clouds {
        issues.push(ScenarioIssue::MissingRelay(s.network.relay_cloud_id));
    }

    let layout = s.layout();
    for (index, v) in s.vehicles.iter().enumerate() {
        if v.id != index {
            issues.push(ScenarioIssue::IdMismatch {
                what: "vehicle",
                index,
                id: v.id,
            });
        }
        if v.direction != 1 && v.direction != -1 {
            issues.push(ScenarioIssue::BadDirection(index));
        } else {
            let delta = v.dst_xy[0] - v.src_xy[0];
            if delta != 0.0 && delta.signum() != f64::from(v.direction) {
                issues.push(ScenarioIssue::DirectionMismatch(index));
            }
        }
        if !positive(v.speed_profile.period_s) {
            issues.push(ScenarioIssue::BadSpeedPeriod(index));
        }
        if v
            .speed_profile
            .samples_mps
            .iter()
            .any(|&sp| !(sp.is_finite() && sp >= 0.0))
        {
            issues.push(ScenarioIssue::NegativeSpeed(index));
        }
        if coverage_ok && layout.edge_covering(v.src_xy[0]).is_none() {
            issues.push(ScenarioIssue::VehicleUncovered {
                vehicle: index,
                x: v.src_xy[0],
            });
        }
    }

    for (index, r) in s.requests.iter().enumerate() {
        if r.id != index {
            issues.push(ScenarioIssue::IdMismatch {
                what: "request",
                index,
                id: r.id,
            });
        }
        for (field, value) in [
            ("length_mi", r.length_mi),
            ("size_kb", r.size_kb),
            ("reply_size_kb", r.reply_size_kb),
            ("max_latency_s", r.max_latency_s),
            ("max_proc_s", r.max_proc_s),
            ("max_deadline_s", r.max_deadline_s),
        ] {
            if !positive(value) {
                issues.push(ScenarioIssue::NonPositive {
                    what: "request",
                    index,
                    field,
                });
            }
        }
        if !(r.cpu_util_pct > 0.0 && r.cpu_util_pct <= 100.0) {
            issues.push(ScenarioIssue::CpuOutOfRange(index));
        }
        if r.vehicle_id >= s.vehicles.len() {
            issues.push(ScenarioIssue::UnknownVehicle {
                request: index,
                vehicle: r.vehicle_id,
            });
        }
    }

    ValidationReport { issues }
}
