//! Exact optimum of tiny assignment instances by dynamic programming over
//! all routing permutations per courier and exhaustive enumeration of
//! request-to-courier assignments.

use std::collections::BTreeMap;

use crate::domain::{Crowdsourcee, EpochSnapshot, Request, RequestId};
use crate::geometry::travel_minutes;

const INF: f64 = f64::INFINITY;

/// Minimum travel minutes for `courier` to serve exactly the requests in
/// `subset` (bitmask over `requests`), respecting deadlines, capacity, and
/// the courier's availability. INF when no feasible order exists.
fn best_route_times(courier: &Crowdsourcee, requests: &[&Request], now: f64) -> Vec<f64> {
    let n = requests.len();
    let full = 1usize << n;
    // state: (picked mask, delivered mask subset of picked, last stop)
    // last: 0 = start, 1 + 2*i = pickup of i, 2 + 2*i = delivery of i
    let stops = 2 * n + 1;
    let mut time = vec![INF; full * full * stops];
    let index = |p: usize, d: usize, last: usize| (p * full + d) * stops + last;
    let point_of = |last: usize, courier: &Crowdsourcee| {
        if last == 0 {
            courier.current_point
        } else {
            let i = (last - 1) / 2;
            if (last - 1) % 2 == 0 {
                requests[i].pickup
            } else {
                requests[i].delivery
            }
        }
    };
    time[index(0, 0, 0)] = now;
    let mut best = vec![INF; full];
    best[0] = 0.0;
    // iterate states in increasing (picked, delivered) order
    for p in 0..full {
        for d in 0..full {
            if d & !p != 0 {
                continue;
            }
            for last in 0..stops {
                let t = time[index(p, d, last)];
                if !t.is_finite() {
                    continue;
                }
                let load: f64 = (0..n)
                    .filter(|i| p & (1 << i) != 0 && d & (1 << i) == 0)
                    .map(|i| requests[i].weight)
                    .sum();
                let here = point_of(last, courier);
                for i in 0..n {
                    let bit = 1 << i;
                    if p & bit == 0 {
                        // pick up request i
                        if load + requests[i].weight > courier.capacity + crate::domain::FEAS_EPS {
                            continue;
                        }
                        let t2 = t + travel_minutes(here.distance(requests[i].pickup), courier.speed);
                        let ix = index(p | bit, d, 1 + 2 * i);
                        if t2 < time[ix] {
                            time[ix] = t2;
                        }
                    } else if d & bit == 0 {
                        // deliver request i
                        let t2 =
                            t + travel_minutes(here.distance(requests[i].delivery), courier.speed);
                        if t2 > requests[i].deadline() + crate::domain::FEAS_EPS {
                            continue;
                        }
                        let ix = index(p, d | bit, 2 + 2 * i);
                        if t2 < time[ix] {
                            time[ix] = t2;
                        }
                    }
                }
                if p == d && p != 0 && t <= courier.exit_deadline + crate::domain::FEAS_EPS {
                    let travel = t - now;
                    if travel < best[p] {
                        best[p] = travel;
                    }
                }
            }
        }
    }
    best
}

/// The minimum total travel over all complete feasible assignments of the
/// pending requests to couriers (every request served). `None` when no
/// complete assignment is feasible.
pub fn micro_optimum(snapshot: &EpochSnapshot) -> Option<f64> {
    let requests: Vec<&Request> =
        snapshot.pending.iter().map(|id| &snapshot.requests[id]).collect();
    let couriers: Vec<&Crowdsourcee> = snapshot.couriers.values().collect();
    let n = requests.len();
    if n == 0 {
        return Some(0.0);
    }
    if couriers.is_empty() {
        return None;
    }
    let tables: Vec<Vec<f64>> = couriers
        .iter()
        .map(|c| best_route_times(c, &requests, snapshot.now))
        .collect();
    let k = couriers.len();
    let mut best = INF;
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut masks = vec![0usize; k];
        let mut c = code;
        for i in 0..n {
            masks[c % k] |= 1 << i;
            c /= k;
        }
        let mut cost = 0.0;
        let mut ok = true;
        for (ci, &mask) in masks.iter().enumerate() {
            let t = tables[ci][mask];
            if !t.is_finite() {
                ok = false;
                break;
            }
            cost += t;
        }
        if ok && cost < best {
            best = cost;
        }
    }
    if best.is_finite() {
        Some(best)
    } else {
        None
    }
}

/// Convenience: ids of requests that end up unassignable even alone.
pub fn unservable_requests(snapshot: &EpochSnapshot) -> Vec<RequestId> {
    let mut out = Vec::new();
    for id in &snapshot.pending {
        let request = &snapshot.requests[id];
        let servable = snapshot.couriers.values().any(|c| {
            let single: Vec<&Request> = vec![request];
            best_route_times(c, &single, snapshot.now)[1].is_finite()
        });
        if !servable {
            out.push(*id);
        }
    }
    out
}

/// Build a lookup of request weights for quick conservation checks in tests.
pub fn weights_of(snapshot: &EpochSnapshot) -> BTreeMap<RequestId, f64> {
    snapshot.requests.iter().map(|(id, r)| (*id, r.weight)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CourierId, CourierState, RequestStatus};
    use crate::geometry::Point;
    use std::collections::BTreeSet;

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

    #[test]
    fn single_request_single_courier_is_direct_geometry() {
        let c = courier(0, Point::new(0.0, 0.0), 120.0);
        let r = request(0, Point::new(1.0, 0.0), Point::new(1.0, 1.0));
        let snap = EpochSnapshot {
            now: 0.0,
            pending: BTreeSet::from([RequestId(0)]),
            couriers: [(c.id, c)].into(),
            requests: [(RequestId(0), r)].into(),
        };
        let opt = micro_optimum(&snap).unwrap();
        assert!((opt - 12.0).abs() < 1e-9);
    }

    #[test]
    fn two_requests_pair_better_than_split_when_colinear() {
        // both requests along one line from courier 0; courier 1 far away
        let c0 = courier(0, Point::new(0.0, 0.0), 240.0);
        let c1 = courier(1, Point::new(5.0, 5.0), 240.0);
        let r0 = request(0, Point::new(1.0, 0.0), Point::new(2.0, 0.0));
        let r1 = request(1, Point::new(2.0, 0.0), Point::new(3.0, 0.0));
        let snap = EpochSnapshot {
            now: 0.0,
            pending: BTreeSet::from([RequestId(0), RequestId(1)]),
            couriers: [(c0.id, c0), (c1.id, c1)].into(),
            requests: [(RequestId(0), r0), (RequestId(1), r1)].into(),
        };
        let opt = micro_optimum(&snap).unwrap();
        // chain: 0 -> p0 -> d0=p1 -> d1 is 3 miles = 18 minutes
        assert!((opt - 18.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_when_deadline_unreachable() {
        let c = courier(0, Point::new(0.0, 0.0), 120.0);
        let mut r = request(0, Point::new(5.0, 5.0), Point::new(0.0, 0.0));
        r.guarantee = 10.0;
        let snap = EpochSnapshot {
            now: 0.0,
            pending: BTreeSet::from([RequestId(0)]),
            couriers: [(c.id, c)].into(),
            requests: [(RequestId(0), r)].into(),
        };
        assert!(micro_optimum(&snap).is_none());
    }
}
