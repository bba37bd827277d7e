//! Vehicle motion along the road and the communication time of a request.
//!
//! Three delivery patterns exist. A request executed on its home edge is
//! answered directly when the vehicle is still in range (pattern 1); when the
//! vehicle has moved on, the reply is relayed through a cloud to the edge now
//! covering it (pattern 2). A request offloaded to a cloud travels vehicle ->
//! home edge -> cloud, and the reply comes back through whichever edge covers
//! the vehicle when the reply is ready (pattern 3).

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::domain::{Gene, NetworkModel, Request, RoadLayout, Scenario, Vehicle};
use crate::error::{OffloadError, Result};

const BITS_PER_KB: f64 = 8_000.0;
const BITS_PER_GBIT: f64 = 1e9;

/// Seconds needed to move `payload_kb` kilobytes over a `bw_gbps` link
/// (1 KB = 1000 bytes, 1 Gbps = 10^9 bit/s).
pub fn transfer_time(payload_kb: f64, bw_gbps: f64) -> Result<f64> {
    if !(payload_kb > 0.0 && bw_gbps > 0.0) {
        return Err(OffloadError::NonPositiveTransfer {
            payload_kb,
            bw_gbps,
        });
    }
    Ok(payload_kb * BITS_PER_KB / (bw_gbps * BITS_PER_GBIT))
}

/// Distance travelled since submission, stopping at the destination.
pub fn travelled(v: &Vehicle, t_s: f64) -> f64 {
    v.speed_profile.distance(t_s).min(v.trip_length())
}

/// Road coordinate of the vehicle `t_s` seconds after submission.
pub fn position_at(v: &Vehicle, t_s: f64) -> f64 {
    v.src_xy[0] + f64::from(v.direction) * travelled(v, t_s)
}

/// Edge covering the vehicle at `t_s`.
pub fn edge_at(s: &Scenario, v: &Vehicle, t_s: f64) -> Result<usize> {
    let x = position_at(v, t_s);
    s.layout()
        .edge_covering(x)
        .ok_or(OffloadError::Uncovered { vehicle: v.id, x })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Node {
    Vehicle,
    Edge(usize),
    Cloud(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub from: Node,
    pub to: Node,
    pub payload_kb: f64,
    pub time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum CommScenario {
    /// Edge execution, vehicle still in range of its home edge.
    EdgeInRange = 1,
    /// Edge execution, vehicle handed over to another edge before the reply.
    EdgeHandover = 2,
    /// Cloud execution.
    Cloud = 3,
}

impl From<CommScenario> for u8 {
    fn from(s: CommScenario) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for CommScenario {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Self::EdgeInRange),
            2 => Ok(Self::EdgeHandover),
            3 => Ok(Self::Cloud),
            other => Err(format!("communication scenario {other} is not 1, 2 or 3")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityOutcome {
    /// Time from submission until the reply leaves the executing server.
    pub reply_ready_t_s: f64,
    /// Edge covering the vehicle at `reply_ready_t_s`; `None` if the vehicle
    /// left the covered road.
    pub reply_edge: Option<usize>,
    pub dist_total_m: f64,
    /// Part of `dist_total_m` travelled outside the home edge's range.
    pub dist_outside_m: f64,
    /// Distance travelled inside the home edge's range before submission.
    pub dist_before_submit_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommBreakdown {
    pub scenario: CommScenario,
    pub legs: ArrayVec<Leg, 4>,
    pub total_s: f64,
    pub mobility: MobilityOutcome,
    /// False when the vehicle was uncovered at reply time; `legs` then only
    /// holds the request legs.
    pub delivered: bool,
}

/// Everything `comm_time` needs that does not change between assignments.
#[derive(Clone, Copy, Debug)]
pub struct CommContext<'a> {
    pub layout: &'a RoadLayout,
    pub network: &'a NetworkModel,
}

impl CommContext<'_> {
    /// Communication legs for `request` (submitted from `home_edge`) executed
    /// on `assigned`, whose processing plus I/O takes `proc_plus_io_s`.
    /// An uncovered reply is not an error here; it yields `delivered == false`.
    pub fn breakdown(
        &self,
        request: &Request,
        vehicle: &Vehicle,
        home_edge: usize,
        assigned: Gene,
        proc_plus_io_s: f64,
    ) -> Result<CommBreakdown> {
        let mut legs = ArrayVec::<Leg, 4>::new();
        let push = |legs: &mut ArrayVec<Leg, 4>, from, to, payload_kb, bw| -> Result<f64> {
            let time_s = transfer_time(payload_kb, bw)?;
            legs.push(Leg {
                from,
                to,
                payload_kb,
                time_s,
            });
            Ok(time_s)
        };
        let ve = self.network.bw_vehicle_edge_gbps;
        let sigma = request.size_kb;
        let reply = request.reply_size_kb;

        let mut reply_ready = push(&mut legs, Node::Vehicle, Node::Edge(home_edge), sigma, ve)?;
        if let Some(k) = assigned.cloud_index() {
            reply_ready += push(
                &mut legs,
                Node::Edge(home_edge),
                Node::Cloud(k),
                sigma,
                self.network.edge_cloud(home_edge, k),
            )?;
        }
        reply_ready += proc_plus_io_s;

        let travel = travelled(vehicle, reply_ready);
        let x = vehicle.src_xy[0] + f64::from(vehicle.direction) * travel;
        let home = self.layout.intervals()[home_edge];
        let (dist_outside_m, dist_before_submit_m) = if vehicle.direction >= 0 {
            ((x - home.right).max(0.0), vehicle.src_xy[0] - home.left)
        } else {
            ((home.left - x).max(0.0), home.right - vehicle.src_xy[0])
        };
        let reply_edge = self.layout.edge_covering(x);
        let mobility = MobilityOutcome {
            reply_ready_t_s: reply_ready,
            reply_edge,
            dist_total_m: travel,
            dist_outside_m,
            dist_before_submit_m,
        };

        let scenario = match (assigned.cloud_index(), reply_edge) {
            (Some(_), _) => CommScenario::Cloud,
            (None, Some(e)) if e == home_edge => CommScenario::EdgeInRange,
            (None, _) => CommScenario::EdgeHandover,
        };

        if let Some(reply_edge) = reply_edge {
            match (scenario, assigned.cloud_index()) {
                (CommScenario::EdgeInRange, _) => {
                    push(&mut legs, Node::Edge(home_edge), Node::Vehicle, reply, ve)?;
                }
                (CommScenario::EdgeHandover, _) => {
                    let relay = self.network.relay_cloud_id;
                    push(
                        &mut legs,
                        Node::Edge(home_edge),
                        Node::Cloud(relay),
                        reply,
                        self.network.edge_cloud(home_edge, relay),
                    )?;
                    push(
                        &mut legs,
                        Node::Cloud(relay),
                        Node::Edge(reply_edge),
                        reply,
                        self.network.edge_cloud(reply_edge, relay),
                    )?;
                    push(&mut legs, Node::Edge(reply_edge), Node::Vehicle, reply, ve)?;
                }
                (CommScenario::Cloud, Some(k)) => {
                    push(
                        &mut legs,
                        Node::Cloud(k),
                        Node::Edge(reply_edge),
                        reply,
                        self.network.edge_cloud(reply_edge, k),
                    )?;
                    push(&mut legs, Node::Edge(reply_edge), Node::Vehicle, reply, ve)?;
                }
                (CommScenario::Cloud, None) => unreachable!("cloud scenario without a cloud"),
            }
        }

        let total_s = legs.iter().map(|l| l.time_s).sum();
        Ok(CommBreakdown {
            scenario,
            legs,
            total_s,
            mobility,
            delivered: reply_edge.is_some(),
        })
    }
}

/// Total communication time of `r` on `assigned` (its home edge or a cloud).
/// Fails with "uncovered at reply" when the vehicle has left the covered road
/// by the time the reply is ready.
pub fn comm_time(
    s: &Scenario,
    r: &Request,
    assigned: Gene,
    proc_plus_io_s: f64,
) -> Result<CommBreakdown> {
    let vehicle = &s.vehicles[r.vehicle_id];
    let home = s.home_edge(r.vehicle_id)?;
    let layout = s.layout();
    let ctx = CommContext {
        layout: &layout,
        network: &s.network,
    };
    let b = ctx.breakdown(r, vehicle, home, assigned, proc_plus_io_s)?;
    if !b.delivered {
        return Err(OffloadError::UncoveredAtReply {
            request: r.id,
            vehicle: vehicle.id,
            x: position_at(vehicle, b.mobility.reply_ready_t_s),
            t_s: b.mobility.reply_ready_t_s,
        });
    }
    Ok(b)
}
