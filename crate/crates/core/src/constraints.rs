//! Objective (total execution time) and SLA violation measures.

use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Scenario};
use crate::exec::ExecBreakdown;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total_time_s: f64,
}

pub fn objective(b: &ExecBreakdown) -> ObjectiveValue {
    ObjectiveValue {
        total_time_s: b.requests.iter().map(|t| t.total_s).sum(),
    }
}

/// How CPU and memory limits are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResourceRule {
    /// A server is overloaded when the sum over its requests exceeds its
    /// limit; every request on it then counts as violating.
    #[default]
    Aggregate,
    /// Each request is compared with the server limit on its own.
    PerRequest,
}

/// Violating requests per constraint type, plus requests violating anything.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub lat: u32,
    pub proc: u32,
    pub deadline: u32,
    pub cpu: u32,
    pub mem: u32,
    pub distinct: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationVector {
    /// Summed latency excess, seconds.
    pub lat: f64,
    /// Summed processing-time excess, seconds.
    pub proc: f64,
    /// Summed deadline excess, seconds.
    pub deadline: f64,
    /// Requests on CPU-overloaded servers.
    pub cpu: f64,
    /// Requests on memory-overloaded servers.
    pub mem: f64,
    pub counts: ViolationCounts,
}

impl ViolationVector {
    /// The five magnitudes in a fixed order: latency, processing, deadline,
    /// CPU, memory.
    pub fn components(&self) -> [f64; 5] {
        [self.lat, self.proc, self.deadline, self.cpu, self.mem]
    }
}

/// Violations under the aggregate resource rule.
pub fn violations(s: &Scenario, a: &Assignment, b: &ExecBreakdown) -> ViolationVector {
    debug_assert_eq!(a.len(), b.requests.len());
    violations_with(s, b, ResourceRule::Aggregate)
}

pub fn violations_with(s: &Scenario, b: &ExecBreakdown, rule: ResourceRule) -> ViolationVector {
    let mut v = ViolationVector::default();
    let n = b.requests.len();
    let mut flagged = vec![false; n];

    for t in &b.requests {
        let r = &s.requests[t.request];
        if t.comm_s > r.max_latency_s {
            v.lat += t.comm_s - r.max_latency_s;
            v.counts.lat += 1;
            flagged[t.request] = true;
        }
        if t.proc_s > r.max_proc_s {
            v.proc += t.proc_s - r.max_proc_s;
            v.counts.proc += 1;
            flagged[t.request] = true;
        }
        if t.uncovered() {
            // the reply is never delivered: the whole deadline budget is lost
            v.deadline += r.max_deadline_s;
            v.counts.deadline += 1;
            flagged[t.request] = true;
        } else if t.total_s > r.max_deadline_s {
            v.deadline += t.total_s - r.max_deadline_s;
            v.counts.deadline += 1;
            flagged[t.request] = true;
        }
    }

    for sched in &b.schedules {
        let server = &s.servers[sched.server];
        let ids = sched.entries.iter().map(|e| e.overlap.request);
        match rule {
            ResourceRule::Aggregate => {
                let cpu: f64 = ids.clone().map(|i| s.requests[i].cpu_util_pct).sum();
                let mem: f64 = ids.clone().map(|i| s.requests[i].size_kb).sum();
                let count = sched.entries.len() as u32;
                if cpu > server.cpu_threshold_pct {
                    v.counts.cpu += count;
                    ids.clone().for_each(|i| flagged[i] = true);
                }
                if mem > server.mem_kb {
                    v.counts.mem += count;
                    ids.for_each(|i| flagged[i] = true);
                }
            }
            ResourceRule::PerRequest => {
                for i in ids {
                    let r = &s.requests[i];
                    if r.cpu_util_pct > server.cpu_threshold_pct {
                        v.counts.cpu += 1;
                        flagged[i] = true;
                    }
                    if r.size_kb > server.mem_kb {
                        v.counts.mem += 1;
                        flagged[i] = true;
                    }
                }
            }
        }
    }
    v.cpu = f64::from(v.counts.cpu);
    v.mem = f64::from(v.counts.mem);
    v.counts.distinct = flagged.iter().filter(|&&f| f).count() as u32;
    v
}

pub fn is_feasible(v: &ViolationVector) -> bool {
    v.components().iter().all(|&c| c == 0.0)
}
