//! Initial solutions for each assignment epoch, and triage of requests no
//! courier can serve.
//!
//! Three construction orders are used: by request urgency (slack time), by
//! courier availability per request, and by courier time budget. Every
//! constructed solution is strictly feasible; requests that fit nowhere are
//! left unassigned for triage.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{
    pickup_distance, slack_time, CostParams, CourierId, EpochSnapshot, Request, RequestId,
    RoutePlan, Solution,
};
use crate::geometry::{travel_minutes, ServiceArea};
use crate::mtamp::pair_placement_min_feasible;

/// Selector for the three initial-solution construction orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialMethod {
    /// Requests in ascending slack time, nearest courier first.
    SlackUrgency,
    /// Requests in ascending count of couriers within the pickup threshold.
    CourierAvailability,
    /// Couriers in descending residual time, each taking its nearest request.
    CourierTimeDescending,
}

impl InitialMethod {
    pub const ALL: [InitialMethod; 3] = [
        InitialMethod::SlackUrgency,
        InitialMethod::CourierAvailability,
        InitialMethod::CourierTimeDescending,
    ];
}

/// Outcome of triaging unassignable requests: dispatch now or wait an epoch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TriageResult {
    pub backup_now: BTreeSet<RequestId>,
    pub deferred: BTreeSet<RequestId>,
}

/// Best strictly feasible placement of `request` on `courier`'s current route
/// in `solution`, if any. The pickup-distance threshold is checked against
/// the route before insertion; the returned plan is the cheapest placement
/// with zero violations.
pub fn best_feasible_insertion(
    solution: &Solution,
    courier_id: CourierId,
    request: &Request,
    snapshot: &EpochSnapshot,
    params: &CostParams,
) -> Option<RoutePlan> {
    let courier = snapshot.courier(courier_id);
    let plan = &solution.routes[&courier_id];
    if pickup_distance(courier, Some(plan), request, &snapshot.requests) > params.pickup_threshold {
        return None;
    }
    pair_placement_min_feasible(plan, request.id, courier, snapshot, params)
}

fn try_assign_nearest_courier(
    solution: &mut Solution,
    request: &Request,
    snapshot: &EpochSnapshot,
    params: &CostParams,
) -> bool {
    let mut order: Vec<(f64, CourierId)> = snapshot
        .couriers
        .iter()
        .map(|(id, c)| {
            (pickup_distance(c, solution.routes.get(id), request, &snapshot.requests), *id)
        })
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for (dist, id) in order {
        if dist > params.pickup_threshold {
            break;
        }
        if let Some(plan) = best_feasible_insertion(solution, id, request, snapshot, params) {
            solution.set_route(plan, snapshot, params);
            return true;
        }
    }
    false
}

/// Residual free time of a courier under its current plan: availability left
/// after the plan completes. Assigning work consumes it.
fn residual_budget(solution: &Solution, courier_id: CourierId, snapshot: &EpochSnapshot) -> f64 {
    let completion = solution.routes[&courier_id].completion_time(snapshot.now);
    snapshot.courier(courier_id).exit_deadline - completion
}

/// Build one initial solution on top of the committed routes.
pub fn build_initial(
    method: InitialMethod,
    snapshot: &EpochSnapshot,
    params: &CostParams,
) -> Solution {
    let mut solution = snapshot.base_solution(params);
    if snapshot.pending.is_empty() {
        return solution;
    }
    match method {
        InitialMethod::SlackUrgency => {
            let mut order: Vec<&Request> = snapshot.pending.iter().map(|id| snapshot.request(*id)).collect();
            order.sort_by(|a, b| {
                let sa = slack_time(a, default_speed(snapshot), snapshot.now);
                let sb = slack_time(b, default_speed(snapshot), snapshot.now);
                sa.partial_cmp(&sb).unwrap().then(a.id.cmp(&b.id))
            });
            for request in order {
                if try_assign_nearest_courier(&mut solution, request, snapshot, params) {
                    solution.unassigned.remove(&request.id);
                }
            }
        }
        InitialMethod::CourierAvailability => {
            let base = snapshot.base_solution(params);
            let mut order: Vec<(usize, f64, RequestId)> = snapshot
                .pending
                .iter()
                .map(|id| {
                    let req = snapshot.request(*id);
                    let available = snapshot
                        .couriers
                        .iter()
                        .filter(|(cid, c)| {
                            pickup_distance(c, base.routes.get(cid), req, &snapshot.requests)
                                <= params.pickup_threshold
                        })
                        .count();
                    (available, req.release_time, *id)
                })
                .collect();
            order.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(a.1.partial_cmp(&b.1).unwrap())
                    .then(a.2.cmp(&b.2))
            });
            for (_, _, id) in order {
                let request = snapshot.request(id);
                if try_assign_nearest_courier(&mut solution, request, snapshot, params) {
                    solution.unassigned.remove(&id);
                }
            }
        }
        InitialMethod::CourierTimeDescending => {
            let mut active: BTreeSet<CourierId> = snapshot.couriers.keys().copied().collect();
            let mut remaining: BTreeSet<RequestId> = snapshot.pending.clone();
            while !active.is_empty() && !remaining.is_empty() {
                // courier with the most free time; re-evaluated after each insertion
                let chosen = *active
                    .iter()
                    .max_by(|a, b| {
                        residual_budget(&solution, **a, snapshot)
                            .partial_cmp(&residual_budget(&solution, **b, snapshot))
                            .unwrap()
                            .then(b.cmp(a))
                    })
                    .unwrap();
                let courier = snapshot.courier(chosen);
                let mut nearest: Vec<(f64, RequestId)> = remaining
                    .iter()
                    .map(|id| {
                        let req = snapshot.request(*id);
                        (
                            pickup_distance(courier, solution.routes.get(&chosen), req, &snapshot.requests),
                            *id,
                        )
                    })
                    .collect();
                nearest.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let mut assigned = None;
                for (dist, id) in nearest {
                    if dist > params.pickup_threshold {
                        break;
                    }
                    let request = snapshot.request(id);
                    if let Some(plan) = best_feasible_insertion(&solution, chosen, request, snapshot, params) {
                        solution.set_route(plan, snapshot, params);
                        assigned = Some(id);
                        break;
                    }
                }
                match assigned {
                    Some(id) => {
                        remaining.remove(&id);
                        solution.unassigned.remove(&id);
                    }
                    None => {
                        active.remove(&chosen);
                    }
                }
            }
        }
    }
    solution
}

fn default_speed(snapshot: &EpochSnapshot) -> f64 {
    snapshot
        .couriers
        .values()
        .next()
        .map(|c| c.speed)
        .unwrap_or(10.0)
}

/// Travel minutes for a dedicated backup vehicle: depot to pickup to
/// delivery, one way.
pub fn backup_duration(area: &ServiceArea, request: &Request, backup_speed: f64) -> f64 {
    let dist = area.depot.distance(request.pickup) + request.pickup.distance(request.delivery);
    travel_minutes(dist, backup_speed)
}

/// Dollar cost of serving a request with a backup vehicle.
pub fn backup_cost_usd(area: &ServiceArea, request: &Request, params: &CostParams) -> f64 {
    backup_duration(area, request, params.backup_speed) / 60.0 * params.backup_rate
}

/// Split the unassigned requests into those that must go to a backup vehicle
/// now and those that can safely wait for the next assignment in `dt`
/// minutes. The boundary is inclusive: arriving exactly at the deadline still
/// counts as on time.
pub fn triage_unassigned(
    unassigned: &BTreeSet<RequestId>,
    requests: &BTreeMap<RequestId, Request>,
    area: &ServiceArea,
    params: &CostParams,
    now: f64,
    dt: f64,
) -> TriageResult {
    let mut result = TriageResult::default();
    for id in unassigned {
        let request = &requests[id];
        let arrival_if_deferred = now + dt + backup_duration(area, request, params.backup_speed);
        if arrival_if_deferred <= request.deadline() + crate::domain::FEAS_EPS {
            result.deferred.insert(*id);
        } else {
            result.backup_now.insert(*id);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Crowdsourcee, CourierState, RequestStatus};
    use crate::geometry::Point;

    fn courier(id: u64, p: Point, exit: f64) -> Crowdsourcee {
        Crowdsourcee {
            id: CourierId(id),
            entry_point: p,
            current_point: p,
            entry_time: 0.0,
            exit_deadline: exit,
            speed: 10.0,
            capacity: 10.0,
            state: CourierState::Idle,
            on_board: BTreeMap::new(),
            route: None,
            relocation_target: None,
        }
    }

    fn request(id: u64, pickup: Point, delivery: Point) -> Request {
        Request {
            id: RequestId(id),
            pickup,
            delivery,
            release_time: 0.0,
            guarantee: 120.0,
            weight: 3.0,
            status: RequestStatus::Pending,
        }
    }

    fn snapshot(couriers: Vec<Crowdsourcee>, requests: Vec<Request>, now: f64) -> EpochSnapshot {
        EpochSnapshot {
            now,
            pending: requests.iter().map(|r| r.id).collect(),
            couriers: couriers.into_iter().map(|c| (c.id, c)).collect(),
            requests: requests.into_iter().map(|r| (r.id, r)).collect(),
        }
    }

    #[test]
    fn no_pending_requests_leaves_routes_unchanged() {
        let snap = snapshot(vec![courier(0, Point::new(1.0, 1.0), 120.0)], vec![], 0.0);
        let params = CostParams::default();
        for method in InitialMethod::ALL {
            let sol = build_initial(method, &snap, &params);
            assert!(sol.unassigned.is_empty());
            assert!(sol.routes[&CourierId(0)].is_empty());
        }
    }

    #[test]
    fn slack_method_picks_nearer_courier() {
        // Both couriers feasible; enumeration over the two assignments shows
        // the nearer one is cheaper, which is what method 1 must pick.
        let r = request(0, Point::new(1.0, 0.0), Point::new(1.0, 0.5));
        let near = courier(0, Point::new(0.5, 0.0), 120.0);
        let far = courier(1, Point::new(0.0, 1.5), 120.0);
        let snap = snapshot(vec![near, far], vec![r.clone()], 0.0);
        let params = CostParams::default();

        let d_near = snap.courier(CourierId(0)).current_point.distance(r.pickup);
        let d_far = snap.courier(CourierId(1)).current_point.distance(r.pickup);
        assert!(d_near < d_far);

        let sol = build_initial(InitialMethod::SlackUrgency, &snap, &params);
        assert!(sol.unassigned.is_empty());
        assert_eq!(sol.routes[&CourierId(0)].stops.len(), 2);
        assert!(sol.routes[&CourierId(1)].is_empty());
        assert!(sol.is_feasible());
    }

    #[test]
    fn budget_limited_courier_takes_nearest_two_of_three() {
        // One courier whose time allows exactly two short jobs. Method 3
        // must hand it its nearest feasible requests one by one.
        let c = courier(0, Point::new(0.0, 0.0), 30.0);
        let r1 = request(1, Point::new(0.5, 0.0), Point::new(1.0, 0.0)); // near
        let r2 = request(2, Point::new(1.5, 0.0), Point::new(2.0, 0.0)); // next
        let r3 = request(3, Point::new(1.2, 1.2), Point::new(3.0, 3.0)); // too much
        let snap = snapshot(vec![c], vec![r1, r2, r3], 0.0);
        let params = CostParams::default();
        let sol = build_initial(InitialMethod::CourierTimeDescending, &snap, &params);
        let assigned = sol.routes[&CourierId(0)].request_ids();
        assert!(assigned.contains(&RequestId(1)));
        assert!(assigned.contains(&RequestId(2)));
        assert_eq!(sol.unassigned, BTreeSet::from([RequestId(3)]));
        assert!(sol.is_feasible());
    }

    #[test]
    fn initials_are_always_strictly_feasible() {
        let couriers = vec![
            courier(0, Point::new(0.2, 0.4), 120.0),
            courier(1, Point::new(1.4, 1.1), 90.0),
            courier(2, Point::new(2.2, 0.3), 45.0),
        ];
        let requests = vec![
            request(0, Point::new(0.5, 0.5), Point::new(1.5, 1.0)),
            request(1, Point::new(1.0, 1.0), Point::new(0.3, 2.0)),
            request(2, Point::new(2.0, 0.5), Point::new(2.5, 2.5)),
            request(3, Point::new(0.8, 0.1), Point::new(2.2, 1.9)),
        ];
        let snap = snapshot(couriers, requests, 0.0);
        let params = CostParams::default();
        for method in InitialMethod::ALL {
            let sol = build_initial(method, &snap, &params);
            assert!(sol.is_feasible(), "{method:?} produced an infeasible initial");
            // every pending request is on a route or unassigned, exactly once
            let mut seen = sol.unassigned.clone();
            for plan in sol.routes.values() {
                for id in plan.request_ids() {
                    assert!(seen.insert(id), "request assigned twice");
                }
            }
            assert_eq!(seen, snap.pending);
        }
    }

    #[test]
    fn empty_courier_pool_yields_all_unassigned() {
        let reqs = vec![request(0, Point::new(0.5, 0.5), Point::new(1.0, 1.0))];
        let snap = snapshot(vec![], reqs, 0.0);
        let params = CostParams::default();
        let sol = build_initial(InitialMethod::SlackUrgency, &snap, &params);
        assert_eq!(sol.unassigned, BTreeSet::from([RequestId(0)]));
    }

    #[test]
    fn triage_defers_when_backup_would_still_make_it() {
        let area = ServiceArea::new(6.0, 6.0, 0.5, Point::new(3.0, 3.0)).unwrap();
        let params = CostParams::default();
        // pickup near depot: backup needs well under 90 minutes
        let r = request(0, Point::new(3.5, 3.0), Point::new(4.0, 3.0));
        let need = backup_duration(&area, &r, params.backup_speed);
        assert!(need < 80.0);
        let requests: BTreeMap<_, _> = [(r.id, r)].into();
        let un = BTreeSet::from([RequestId(0)]);
        let out = triage_unassigned(&un, &requests, &area, &params, 30.0, 10.0);
        assert_eq!(out.deferred, BTreeSet::from([RequestId(0)]));
        assert!(out.backup_now.is_empty());
    }

    #[test]
    fn triage_boundary_is_inclusive() {
        let area = ServiceArea::new(6.0, 6.0, 0.5, Point::new(3.0, 3.0)).unwrap();
        let params = CostParams::default();
        let mut r = request(0, Point::new(4.0, 3.0), Point::new(5.0, 3.0));
        let need = backup_duration(&area, &r, params.backup_speed);
        let now = 0.0;
        let dt = 10.0;
        // deadline exactly at arrival of a backup departing next epoch
        r.guarantee = now + dt + need - r.release_time;
        let requests: BTreeMap<_, _> = [(r.id, r)].into();
        let un = BTreeSet::from([RequestId(0)]);
        let out = triage_unassigned(&un, &requests, &area, &params, now, dt);
        assert_eq!(out.deferred, BTreeSet::from([RequestId(0)]));
    }

    #[test]
    fn triage_escalates_impossible_request() {
        let area = ServiceArea::new(6.0, 6.0, 0.5, Point::new(3.0, 3.0)).unwrap();
        let params = CostParams::default();
        let mut r = request(0, Point::new(0.5, 0.5), Point::new(5.5, 5.5));
        r.guarantee = 1.0; // already hopeless even right now
        let requests: BTreeMap<_, _> = [(r.id, r)].into();
        let un = BTreeSet::from([RequestId(0)]);
        let out = triage_unassigned(&un, &requests, &area, &params, 5.0, 10.0);
        assert_eq!(out.backup_now, BTreeSet::from([RequestId(0)]));
    }

    #[test]
    fn triage_partitions_the_unassigned_set() {
        let area = ServiceArea::new(6.0, 6.0, 0.5, Point::new(3.0, 3.0)).unwrap();
        let params = CostParams::default();
        let mut requests = BTreeMap::new();
        let mut un = BTreeSet::new();
        for i in 0..12u64 {
            let mut r = request(i, Point::new(0.5 + 0.4 * i as f64, 1.0), Point::new(5.0, 5.0));
            r.guarantee = 20.0 + 10.0 * i as f64;
            un.insert(r.id);
            requests.insert(r.id, r);
        }
        let out = triage_unassigned(&un, &requests, &area, &params, 0.0, 10.0);
        let mut union = out.backup_now.clone();
        for id in &out.deferred {
            assert!(union.insert(*id), "request in both triage classes");
        }
        assert_eq!(union, un);
    }
}
