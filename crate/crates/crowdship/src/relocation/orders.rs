//! Turn a solved virtual assignment into per-courier relocation orders.
//!
//! Within a cluster, assigned jobs are matched to actual couriers by
//! repeatedly drawing a random job and handing it to the remaining courier
//! with the most availability. The job itself is never executed; the courier
//! only rides to the first pickup node of its routing.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::domain::{CourierId, Crowdsourcee, Request, RequestId, StopKind};
use crate::geometry::Point;
use crate::relocation::cluster::Cluster;
use crate::relocation::jobs::FeasibleJob;
use crate::relocation::mkp::VirtualAssignment;

/// One relocation instruction: ride to `target` and wait there.
#[derive(Debug, Clone, PartialEq)]
pub struct RelocationOrder {
    pub courier: CourierId,
    pub target: Point,
    /// Requests of the virtual job that motivated the order.
    pub job_requests: BTreeSet<RequestId>,
}

/// First pickup point of a job's routing.
fn first_pickup(job: &FeasibleJob, pool: &BTreeMap<RequestId, Request>) -> Point {
    let stop = job
        .stops
        .iter()
        .find(|s| s.kind == StopKind::Pickup)
        .expect("a feasible job begins with a pickup");
    pool[&stop.request].pickup
}

pub fn emit_orders<R: Rng>(
    assignment: &VirtualAssignment,
    jobs: &[FeasibleJob],
    clusters: &[Cluster],
    couriers: &BTreeMap<CourierId, Crowdsourcee>,
    pool: &BTreeMap<RequestId, Request>,
    now: f64,
    rng: &mut R,
) -> Vec<RelocationOrder> {
    let mut orders = Vec::new();
    for (k, cluster) in clusters.iter().enumerate() {
        let mut remaining_jobs = assignment.job_of_cluster(k);
        if remaining_jobs.is_empty() {
            continue;
        }
        // couriers by most availability first; surplus couriers stay put
        let mut ranked: Vec<CourierId> = cluster.members.clone();
        ranked.sort_by(|a, b| {
            let ba = couriers[a].budget_remaining(now);
            let bb = couriers[b].budget_remaining(now);
            bb.partial_cmp(&ba).unwrap().then(a.cmp(b))
        });
        let mut ranked = ranked.into_iter();
        while !remaining_jobs.is_empty() {
            let Some(courier) = ranked.next() else { break };
            let pick = rng.gen_range(0..remaining_jobs.len());
            let job_ix = remaining_jobs.swap_remove(pick);
            let job = &jobs[job_ix];
            orders.push(RelocationOrder {
                courier,
                target: first_pickup(job, pool),
                job_requests: job.requests.clone(),
            });
        }
    }
    orders
}
