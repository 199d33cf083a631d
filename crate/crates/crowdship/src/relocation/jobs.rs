//! Feasible-job formation for a courier cluster.
//!
//! Phase one screens every unassigned request into a single-request job if
//! the cluster's representative courier could serve it in time and within
//! the pickup threshold. Phase two repeatedly extends probabilistically
//! chosen jobs by one request at the end, re-placing the added pair at its
//! cheapest valid position; extended jobs are added alongside the originals.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::domain::{pair_placements, CostParams, Request, RequestId, Stop, StopKind};
use crate::geometry::{travel_minutes, Point};
use crate::relocation::cluster::Cluster;

/// A routed bundle of requests executable from a cluster centroid within the
/// time and capacity limits.
#[derive(Debug, Clone)]
pub struct FeasibleJob {
    pub stops: Vec<Stop>,
    pub requests: BTreeSet<RequestId>,
    /// Minutes from the centroid through every stop.
    pub duration: f64,
}

fn stop_point(stop: &Stop, pool: &BTreeMap<RequestId, Request>) -> Point {
    let req = &pool[&stop.request];
    match stop.kind {
        StopKind::Pickup => req.pickup,
        StopKind::Delivery => req.delivery,
    }
}

/// Simulate a job from the centroid and check every gate: the first stop is
/// a pickup within the threshold, loads stay within capacity, each delivery
/// meets its guarantee, and the whole job finishes within the cluster's
/// availability. Returns the duration when valid.
pub fn validate_job(
    stops: &[Stop],
    centroid: Point,
    availability_end: f64,
    pool: &BTreeMap<RequestId, Request>,
    now: f64,
    speed: f64,
    capacity: f64,
    pickup_threshold: f64,
) -> Option<f64> {
    let first = stops.first()?;
    if first.kind != StopKind::Pickup {
        return None;
    }
    if centroid.distance(pool[&first.request].pickup) > pickup_threshold {
        return None;
    }
    let mut pos = centroid;
    let mut t = now;
    let mut load = 0.0;
    let mut picked: BTreeSet<RequestId> = BTreeSet::new();
    for stop in stops {
        let req = pool.get(&stop.request)?;
        let point = stop_point(stop, pool);
        t += travel_minutes(pos.distance(point), speed);
        pos = point;
        match stop.kind {
            StopKind::Pickup => {
                if !picked.insert(stop.request) {
                    return None;
                }
                load += req.weight;
                if load > capacity + crate::domain::FEAS_EPS {
                    return None;
                }
            }
            StopKind::Delivery => {
                if !picked.contains(&stop.request) {
                    return None;
                }
                load -= req.weight;
                if t > req.deadline() + crate::domain::FEAS_EPS {
                    return None;
                }
            }
        }
    }
    if t > availability_end + crate::domain::FEAS_EPS {
        return None;
    }
    Some(t - now)
}

/// Weighted job pick: shorter jobs are likelier, using the same softmax
/// shape as solution selection with the mean duration as the reference.
fn select_job<R: Rng>(jobs: &[FeasibleJob], alpha: f64, rng: &mut R) -> usize {
    let mean: f64 = jobs.iter().map(|j| j.duration).sum::<f64>() / jobs.len() as f64;
    let weights: Vec<f64> = jobs
        .iter()
        .map(|j| {
            if mean.abs() < 1e-12 {
                1.0
            } else {
                ((alpha * (mean - j.duration) / mean).clamp(-60.0, 60.0)).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return i;
        }
    }
    jobs.len() - 1
}

/// Form the feasible jobs of one cluster over the unassigned request pool.
pub fn form_jobs<R: Rng>(
    cluster: &Cluster,
    pool: &BTreeMap<RequestId, Request>,
    now: f64,
    speed: f64,
    capacity: f64,
    params: &CostParams,
    rng: &mut R,
) -> Vec<FeasibleJob> {
    let availability_end = now + cluster.centroid_budget;
    let mut jobs: Vec<FeasibleJob> = Vec::new();
    let mut seen: BTreeSet<Vec<Stop>> = BTreeSet::new();

    // phase one: singletons
    for (id, req) in pool {
        let to_pickup = cluster.centroid_point.distance(req.pickup);
        if to_pickup > params.pickup_threshold {
            continue;
        }
        let finish = now + travel_minutes(to_pickup, speed) + req.direct_time(speed);
        if finish > req.deadline().min(availability_end) + crate::domain::FEAS_EPS {
            continue;
        }
        if req.weight > capacity + crate::domain::FEAS_EPS {
            continue;
        }
        let stops = vec![Stop::pickup(*id), Stop::delivery(*id)];
        seen.insert(stops.clone());
        jobs.push(FeasibleJob { stops, requests: BTreeSet::from([*id]), duration: finish - now });
    }
    if jobs.is_empty() {
        return jobs;
    }

    // phase two: probabilistic extension
    let rounds = (3 * jobs.len()).min(500);
    for _ in 0..rounds {
        let base_ix = select_job(&jobs, params.alpha, rng);
        let base = jobs[base_ix].clone();
        let last_point = stop_point(base.stops.last().unwrap(), pool);
        let end_time = now + base.duration;
        for (id, req) in pool {
            if base.requests.contains(id) {
                continue;
            }
            let to_pickup = last_point.distance(req.pickup);
            if to_pickup > params.pickup_threshold {
                continue;
            }
            let finish = end_time + travel_minutes(to_pickup, speed) + req.direct_time(speed);
            if finish > req.deadline().min(availability_end) + crate::domain::FEAS_EPS {
                continue;
            }
            // cheapest valid placement of the added pair
            let mut best: Option<(f64, Vec<Stop>)> = None;
            for stops in pair_placements(&base.stops, *id) {
                if let Some(duration) = validate_job(
                    &stops,
                    cluster.centroid_point,
                    availability_end,
                    pool,
                    now,
                    speed,
                    capacity,
                    params.pickup_threshold,
                ) {
                    if best.as_ref().map(|(d, _)| duration < *d).unwrap_or(true) {
                        best = Some((duration, stops));
                    }
                }
            }
            if let Some((duration, stops)) = best {
                if seen.insert(stops.clone()) {
                    let mut requests = base.requests.clone();
                    requests.insert(*id);
                    jobs.push(FeasibleJob { stops, requests, duration });
                }
                break;
            }
        }
    }
    jobs
}
