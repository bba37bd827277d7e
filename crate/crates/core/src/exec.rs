//! Processing, I/O and total execution time of requests sharing a server.
//!
//! All requests placed on one server start together and share its MIPS. They
//! are ranked by standalone length (ties by request id): rank 0 finishes
//! first, everybody else finishes after it. A lone request runs at full
//! speed. The first finisher runs at `1/n` of the server speed for its whole
//! life. A later finisher shares the server for the first finisher's
//! lifetime `tau_m` and then continues with its remaining work stretched by
//! `n - n_bar`, where `n_bar` is its rank.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{self, ObjectiveValue, ResourceRule, ViolationVector};
use crate::domain::{validate_scenario, Assignment, Gene, Request, RoadLayout, Scenario, Server};
use crate::error::{OffloadError, Result};
use crate::mobility::{CommBreakdown, CommContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapCase {
    /// Case (i): alone on the server.
    Alone,
    /// Case (ii): overlaps others and completes first.
    FinishesFirst,
    /// Case (iii): overlaps others and completes after at least one of them.
    FinishesLater,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub request: usize,
    pub case: OverlapCase,
    /// Position in completion order.
    pub rank: usize,
    /// Requests on the server, this one included (1 when alone).
    pub n: usize,
    /// Co-located requests that complete before this one.
    pub n_bar: usize,
}

/// Ranks the requests of one server and assigns their overlap case. The
/// result is in rank order.
pub fn classify_overlap(requests: &[&Request]) -> Vec<Overlap> {
    let n = requests.len();
    let mut order: Vec<&Request> = requests.to_vec();
    order.sort_by(|a, b| a.length_mi.total_cmp(&b.length_mi).then(a.id.cmp(&b.id)));
    order
        .iter()
        .enumerate()
        .map(|(rank, r)| Overlap {
            request: r.id,
            case: match (n, rank) {
                (1, _) => OverlapCase::Alone,
                (_, 0) => OverlapCase::FinishesFirst,
                _ => OverlapCase::FinishesLater,
            },
            rank,
            n,
            n_bar: rank,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcTime {
    pub proc_s: f64,
    pub tau_m_s: f64,
    pub tau_a_s: f64,
}

/// Processing time of `r` on `server`. `tau_m_s` is the shortest processing
/// time among the other requests on the server and is only read in case (iii).
pub fn proc_time(r: &Request, server: &Server, overlap: &Overlap, tau_m_s: f64) -> Result<ProcTime> {
    let mu = server.speed_mips;
    let psi = r.length_mi;
    let n = overlap.n as f64;
    Ok(match overlap.case {
        OverlapCase::Alone => ProcTime {
            proc_s: psi / mu,
            tau_m_s: 0.0,
            tau_a_s: 0.0,
        },
        OverlapCase::FinishesFirst => ProcTime {
            proc_s: psi * n / mu,
            tau_m_s: 0.0,
            tau_a_s: 0.0,
        },
        OverlapCase::FinishesLater => {
            let mut remaining = psi - tau_m_s * mu / n;
            if remaining < 0.0 {
                if remaining < -1e-9 * psi {
                    return Err(OffloadError::OverlapInconsistency {
                        server: server.id,
                        request: r.id,
                    });
                }
                remaining = 0.0;
            }
            let tau_a_s = remaining / mu * (n - overlap.n_bar as f64);
            ProcTime {
                proc_s: tau_m_s + tau_a_s,
                tau_m_s,
                tau_a_s,
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoTime {
    /// Memory demand over available memory, rounded up.
    pub rho: f64,
    /// Disk/memory swaps.
    pub chi: f64,
    pub io_s: f64,
}

/// Disk/memory swap time of `r` on `server`.
pub fn io_time(r: &Request, server: &Server, overlap: &Overlap) -> IoTime {
    let sigma = r.size_kb;
    let theta = server.mem_kb;
    let xi = server.swap_s;
    let rho = match overlap.case {
        OverlapCase::Alone => (sigma / theta).ceil(),
        _ => (sigma * overlap.n as f64 / theta).ceil(),
    };
    let chi = if rho > 1.0 { rho - 1.0 } else { 0.0 };
    let io_s = match overlap.case {
        OverlapCase::Alone | OverlapCase::FinishesFirst => chi * xi,
        OverlapCase::FinishesLater => xi + sigma * xi * overlap.n_bar as f64 / theta,
    };
    IoTime { rho, chi, io_s }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(flatten)]
    pub overlap: Overlap,
    #[serde(flatten)]
    pub proc: ProcTime,
    #[serde(flatten)]
    pub io: IoTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerSchedule {
    pub server: usize,
    /// In rank order.
    pub entries: Vec<ScheduleEntry>,
}

/// Classifies, then computes processing and I/O time for every request on
/// `server`, in rank order so each `tau_m` only reads resolved times.
pub fn schedule_server(server: &Server, requests: &[&Request]) -> Result<ServerSchedule> {
    let overlaps = classify_overlap(requests);
    let mut entries: Vec<ScheduleEntry> = Vec::with_capacity(overlaps.len());
    for overlap in overlaps {
        let r = requests
            .iter()
            .find(|r| r.id == overlap.request)
            .expect("classified request belongs to the server");
        let tau_m = entries
            .iter()
            .map(|e| e.proc.proc_s)
            .fold(f64::INFINITY, f64::min);
        let proc = proc_time(r, server, &overlap, tau_m)?;
        let io = io_time(r, server, &overlap);
        entries.push(ScheduleEntry { overlap, proc, io });
    }
    Ok(ServerSchedule {
        server: server.id,
        entries,
    })
}

/// Per-request total time: communication + processing + I/O.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestTiming {
    pub request: usize,
    pub server: usize,
    pub gene: Gene,
    pub comm_s: f64,
    pub proc_s: f64,
    pub io_s: f64,
    pub total_s: f64,
    pub comm: CommBreakdown,
}

impl RequestTiming {
    pub fn uncovered(&self) -> bool {
        !self.comm.delivered
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecBreakdown {
    /// Indexed by request.
    pub requests: Vec<RequestTiming>,
    /// Only servers that received at least one request, by server id.
    pub schedules: Vec<ServerSchedule>,
}

/// Total time and SLA violations of one assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub assignment: Assignment,
    pub objective: ObjectiveValue,
    pub violations: ViolationVector,
    pub feasible: bool,
    pub breakdown: ExecBreakdown,
}

/// The two numbers the optimizers rank solutions by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionScore {
    pub total_time_s: f64,
    pub violations: ViolationVector,
}

impl SolutionScore {
    pub fn feasible(&self) -> bool {
        constraints::is_feasible(&self.violations)
    }
}

/// Reusable evaluation context for one validated scenario.
#[derive(Clone, Debug)]
pub struct Evaluator<'s> {
    scenario: &'s Scenario,
    layout: RoadLayout,
    edge_servers: Vec<usize>,
    cloud_servers: Vec<usize>,
    home_edges: Vec<usize>,
    rule: ResourceRule,
}

impl<'s> Evaluator<'s> {
    pub fn new(scenario: &'s Scenario) -> Result<Self> {
        validate_scenario(scenario).into_result()?;
        let edge_servers = scenario.edges().map(|s| s.id).collect();
        let cloud_servers = scenario.clouds().map(|s| s.id).collect();
        let layout = scenario.layout();
        let home_edges = scenario
            .requests
            .iter()
            .map(|r| scenario.home_edge(r.vehicle_id))
            .collect::<Result<_>>()?;
        Ok(Self {
            scenario,
            layout,
            edge_servers,
            cloud_servers,
            home_edges,
            rule: ResourceRule::Aggregate,
        })
    }

    pub fn with_resource_rule(mut self, rule: ResourceRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn scenario(&self) -> &'s Scenario {
        self.scenario
    }

    pub fn resource_rule(&self) -> ResourceRule {
        self.rule
    }

    pub fn requests(&self) -> usize {
        self.scenario.requests.len()
    }

    pub fn clouds(&self) -> usize {
        self.cloud_servers.len()
    }

    /// Edge index each request was submitted from.
    pub fn home_edges(&self) -> &[usize] {
        &self.home_edges
    }

    /// Server id that executes request `i` under `gene`.
    pub fn server_for(&self, i: usize, gene: Gene) -> usize {
        match gene.cloud_index() {
            None => self.edge_servers[self.home_edges[i]],
            Some(k) => self.cloud_servers[k],
        }
    }

    fn compute(&self, a: &Assignment) -> Result<ExecBreakdown> {
        a.check(self.requests(), self.clouds())?;
        let s = self.scenario;
        let mut groups: Vec<Vec<&Request>> = vec![Vec::new(); s.servers.len()];
        for (i, &gene) in a.genes.iter().enumerate() {
            groups[self.server_for(i, gene)].push(&s.requests[i]);
        }

        let mut proc_io = vec![(0.0, 0.0); self.requests()];
        let mut schedules = Vec::new();
        for (z, group) in groups.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            let schedule = schedule_server(&s.servers[z], group)?;
            for e in &schedule.entries {
                proc_io[e.overlap.request] = (e.proc.proc_s, e.io.io_s);
            }
            schedules.push(schedule);
        }

        let ctx = CommContext {
            layout: &self.layout,
            network: &s.network,
        };
        let requests = a
            .genes
            .iter()
            .enumerate()
            .map(|(i, &gene)| {
                let r = &s.requests[i];
                let (proc_s, io_s) = proc_io[i];
                let comm = ctx.breakdown(
                    r,
                    &s.vehicles[r.vehicle_id],
                    self.home_edges[i],
                    gene,
                    proc_s + io_s,
                )?;
                let comm_s = comm.total_s;
                Ok(RequestTiming {
                    request: i,
                    server: self.server_for(i, gene),
                    gene,
                    comm_s,
                    proc_s,
                    io_s,
                    total_s: comm_s + proc_s + io_s,
                    comm,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExecBreakdown {
            requests,
            schedules,
        })
    }

    /// Strict evaluation: fails with "uncovered at reply" if any vehicle has
    /// left the covered road before its reply is ready.
    pub fn evaluate(&self, a: &Assignment) -> Result<ExecBreakdown> {
        let b = self.compute(a)?;
        if let Some(t) = b.requests.iter().find(|t| t.uncovered()) {
            let r = &self.scenario.requests[t.request];
            let v = &self.scenario.vehicles[r.vehicle_id];
            return Err(OffloadError::UncoveredAtReply {
                request: r.id,
                vehicle: v.id,
                x: crate::mobility::position_at(v, t.comm.mobility.reply_ready_t_s),
                t_s: t.comm.mobility.reply_ready_t_s,
            });
        }
        Ok(b)
    }

    /// Reporting evaluation: an undeliverable reply is kept in the breakdown
    /// and charged as a deadline violation instead of failing.
    pub fn report(&self, a: &Assignment) -> Result<EvaluationReport> {
        let breakdown = self.compute(a)?;
        let objective = constraints::objective(&breakdown);
        let violations = constraints::violations_with(self.scenario, &breakdown, self.rule);
        Ok(EvaluationReport {
            assignment: a.clone(),
            objective,
            feasible: constraints::is_feasible(&violations),
            violations,
            breakdown,
        })
    }

    pub fn score(&self, a: &Assignment) -> Result<SolutionScore> {
        let breakdown = self.compute(a)?;
        Ok(SolutionScore {
            total_time_s: constraints::objective(&breakdown).total_time_s,
            violations: constraints::violations_with(self.scenario, &breakdown, self.rule),
        })
    }

    /// Scores many assignments; output order matches input order.
    pub fn score_all(&self, population: &[Assignment]) -> Result<Vec<SolutionScore>> {
        population.par_iter().map(|a| self.score(a)).collect()
    }
}

/// Strict evaluation of one assignment.
pub fn evaluate_assignment(s: &Scenario, a: &Assignment) -> Result<ExecBreakdown> {
    Evaluator::new(s)?.evaluate(a)
}
