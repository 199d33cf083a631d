//! The four comparison assignment methods behind the same solver interface:
//! end-of-route insertion, insertion with intra-route improvement, simulated
//! annealing, and reactive tabu search. All of them commit only strictly
//! feasible solutions and honor the pickup-distance threshold at every move,
//! like the main search.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::Rng;

use crate::construction::best_feasible_insertion;
use crate::domain::{
    pair_placements, pickup_distance, route_cost, route_schedule, without_request, CostParams,
    CourierId, EpochSnapshot, RequestId, Solution, Stop,
};
use crate::mtamp::{fingerprint, movable_requests};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Insertion,
    InsertionIntra,
    SimulatedAnnealing,
    ReactiveTabu,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [
        BaselineMethod::Insertion,
        BaselineMethod::InsertionIntra,
        BaselineMethod::SimulatedAnnealing,
        BaselineMethod::ReactiveTabu,
    ];
}

/// Search effort limit: a fixed iteration count (deterministic, used in
/// tests) or a wall-clock cap in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Iterations(usize),
    WallClockSecs(f64),
}

struct BudgetGate {
    iterations: Option<usize>,
    deadline: Option<Instant>,
    spent: usize,
}

impl BudgetGate {
    fn new(budget: Budget) -> Self {
        match budget {
            Budget::Iterations(n) => BudgetGate { iterations: Some(n), deadline: None, spent: 0 },
            Budget::WallClockSecs(s) => BudgetGate {
                iterations: None,
                deadline: Some(Instant::now() + std::time::Duration::from_secs_f64(s.max(0.0))),
                spent: 0,
            },
        }
    }

    fn proceed(&mut self) -> bool {
        if let Some(n) = self.iterations {
            if self.spent >= n {
                return false;
            }
        }
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return false;
            }
        }
        self.spent += 1;
        true
    }
}

/// Tunables for the two metaheuristic baselines.
#[derive(Debug, Clone)]
pub struct BaselineParams {
    /// Initial SA temperature as a fraction of the starting cost.
    pub sa_initial_temp_factor: f64,
    /// Geometric cooling multiplier applied every iteration.
    pub sa_cooling: f64,
    /// Tabu tenure decay multiplier applied when no repetition is seen.
    pub rts_decay: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams { sa_initial_temp_factor: 0.1, sa_cooling: 0.995, rts_decay: 0.95 }
    }
}

fn release_order(snapshot: &EpochSnapshot) -> Vec<RequestId> {
    let mut order: Vec<RequestId> = snapshot.pending.iter().copied().collect();
    order.sort_by(|a, b| {
        let ra = snapshot.request(*a).release_time;
        let rb = snapshot.request(*b).release_time;
        ra.partial_cmp(&rb).unwrap().then(a.cmp(b))
    });
    order
}

/// Greedy end-of-route insertion: requests in release order, each appended to
/// the feasible courier whose route grows the least.
fn insertion(snapshot: &EpochSnapshot, params: &CostParams) -> Solution {
    let mut solution = snapshot.base_solution(params);
    for id in release_order(snapshot) {
        let request = snapshot.request(id);
        let mut best: Option<(f64, crate::domain::RoutePlan)> = None;
        for (&cid, courier) in &snapshot.couriers {
            let plan = &solution.routes[&cid];
            if pickup_distance(courier, Some(plan), request, &snapshot.requests) > params.pickup_threshold {
                continue;
            }
            let mut stops = plan.stops.clone();
            stops.push(Stop::pickup(id));
            stops.push(Stop::delivery(id));
            let candidate = route_schedule(&stops, courier, &snapshot.requests, snapshot.now)
                .expect("append preserves stop pairing");
            let bd = route_cost(&candidate, courier, &snapshot.requests, params, snapshot.now);
            if !bd.is_feasible() {
                continue;
            }
            let delta = bd.total - solution.route_cost(cid).total;
            if best.as_ref().map(|(d, _)| delta < *d).unwrap_or(true) {
                best = Some((delta, candidate));
            }
        }
        if let Some((_, plan)) = best {
            solution.set_route(plan, snapshot, params);
            solution.unassigned.remove(&id);
        }
    }
    solution
}

/// Insertion where each request may land at any feasible position of the
/// chosen route, i.e. insertion plus the intra-route move.
fn insertion_intra(snapshot: &EpochSnapshot, params: &CostParams) -> Solution {
    let mut solution = snapshot.base_solution(params);
    for id in release_order(snapshot) {
        let request = snapshot.request(id);
        let mut best: Option<(f64, crate::domain::RoutePlan)> = None;
        for &cid in snapshot.couriers.keys() {
            if let Some(plan) = best_feasible_insertion(&solution, cid, request, snapshot, params) {
                let delta = route_cost(&plan, snapshot.courier(cid), &snapshot.requests, params, snapshot.now)
                    .total
                    - solution.route_cost(cid).total;
                if best.as_ref().map(|(d, _)| delta < *d).unwrap_or(true) {
                    best = Some((delta, plan));
                }
            }
        }
        if let Some((_, plan)) = best {
            solution.set_route(plan, snapshot, params);
            solution.unassigned.remove(&id);
        }
    }
    solution
}

/// Where each movable request currently sits.
fn assignments(solution: &Solution) -> Vec<(RequestId, CourierId)> {
    let mut out = Vec::new();
    for (cid, plan) in &solution.routes {
        for r in movable_requests(plan) {
            out.push((r, *cid));
        }
    }
    out
}

/// Move a request to a courier, either at a specific placement index or at
/// the cheapest position. Returns `None` when the target fails the pickup
/// threshold. Violations of time or capacity are priced, not rejected.
fn relocate(
    solution: &Solution,
    request_id: RequestId,
    from: CourierId,
    target: CourierId,
    placement: Option<usize>,
    snapshot: &EpochSnapshot,
    params: &CostParams,
) -> Option<Solution> {
    let request = snapshot.request(request_id);
    let mut working = solution.clone();
    if from != target {
        let reduced = without_request(&working.routes[&from].stops, request_id);
        let plan = route_schedule(&reduced, snapshot.courier(from), &snapshot.requests, snapshot.now)
            .expect("removal preserves stop pairing");
        working.set_route(plan, snapshot, params);
        let target_plan = &working.routes[&target];
        if pickup_distance(snapshot.courier(target), Some(target_plan), request, &snapshot.requests)
            > params.pickup_threshold
        {
            return None;
        }
    }
    let base = without_request(&working.routes[&target].stops, request_id);
    let courier = snapshot.courier(target);
    let placements = pair_placements(&base, request_id);
    let stops = match placement {
        Some(ix) => {
            let n = placements.len();
            placements.into_iter().nth(ix % n)?
        }
        None => placements
            .into_iter()
            .map(|stops| {
                let plan = route_schedule(&stops, courier, &snapshot.requests, snapshot.now)
                    .expect("placement preserves stop pairing");
                let c = route_cost(&plan, courier, &snapshot.requests, params, snapshot.now).total;
                (c, stops)
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .map(|(_, s)| s)?,
    };
    let plan = route_schedule(&stops, courier, &snapshot.requests, snapshot.now)
        .expect("placement preserves stop pairing");
    working.set_route(plan, snapshot, params);
    Some(working)
}

/// Simulated annealing over single-request relocations and intra-route
/// repositions, geometric cooling, returning the best feasible solution seen.
fn simulated_annealing<R: Rng>(
    snapshot: &EpochSnapshot,
    params: &CostParams,
    tuning: &BaselineParams,
    budget: Budget,
    rng: &mut R,
) -> Solution {
    let start = insertion_intra(snapshot, params);
    let mut current = start.clone();
    let mut best = start;
    let mut temp = (best.cost.total * tuning.sa_initial_temp_factor).max(1e-6);
    let mut gate = BudgetGate::new(budget);
    let couriers: Vec<CourierId> = snapshot.couriers.keys().copied().collect();
    while gate.proceed() {
        let moves = assignments(&current);
        if moves.is_empty() || couriers.is_empty() {
            break;
        }
        let (request_id, from) = moves[rng.gen_range(0..moves.len())];
        let target = couriers[rng.gen_range(0..couriers.len())];
        let placement = rng.gen_range(0..1usize << 30);
        let Some(candidate) =
            relocate(&current, request_id, from, target, Some(placement), snapshot, params)
        else {
            temp *= tuning.sa_cooling;
            continue;
        };
        let delta = candidate.cost.total - current.cost.total;
        if delta < 0.0 || rng.gen::<f64>() < (-delta / temp).exp() {
            current = candidate;
            if current.is_feasible() && current.cost.total < best.cost.total {
                best = current.clone();
            }
        }
        temp *= tuning.sa_cooling;
    }
    best
}

/// Reactive tabu search: best-improvement scans over the same neighborhood,
/// an attribute tabu on (request, source courier) pairs, aspiration on the
/// global best, and a tenure that doubles on solution repetition and decays
/// otherwise.
fn reactive_tabu(
    snapshot: &EpochSnapshot,
    params: &CostParams,
    tuning: &BaselineParams,
    budget: Budget,
) -> Solution {
    let start = insertion_intra(snapshot, params);
    let mut current = start.clone();
    let mut best = start;
    let n_requests = snapshot.requests.len().max(1);
    let mut tenure: f64 = (n_requests as f64 / 4.0).max(1.0);
    let mut tabu: HashMap<(RequestId, CourierId), usize> = HashMap::new();
    let mut visited: HashSet<crate::mtamp::Fingerprint> = HashSet::new();
    let mut gate = BudgetGate::new(budget);
    let mut iteration = 0usize;
    while gate.proceed() {
        iteration += 1;
        let moves = assignments(&current);
        if moves.is_empty() {
            break;
        }
        let mut best_move: Option<(f64, RequestId, CourierId, Solution)> = None;
        for &(request_id, from) in &moves {
            for &target in snapshot.couriers.keys() {
                let Some(candidate) =
                    relocate(&current, request_id, from, target, None, snapshot, params)
                else {
                    continue;
                };
                if fingerprint(&candidate) == fingerprint(&current) {
                    continue;
                }
                let is_tabu = tabu
                    .get(&(request_id, target))
                    .map(|&until| until > iteration)
                    .unwrap_or(false);
                let aspirated =
                    candidate.is_feasible() && candidate.cost.total < best.cost.total - 1e-12;
                if is_tabu && !aspirated {
                    continue;
                }
                if best_move
                    .as_ref()
                    .map(|(c, _, _, _)| candidate.cost.total < *c)
                    .unwrap_or(true)
                {
                    best_move = Some((candidate.cost.total, request_id, from, candidate));
                }
            }
        }
        let Some((_, request_id, from, candidate)) = best_move else {
            break;
        };
        // moving the request back where it came from is tabu for a while
        tabu.insert((request_id, from), iteration + tenure.round() as usize);
        current = candidate;
        if current.is_feasible() && current.cost.total < best.cost.total {
            best = current.clone();
        }
        if !visited.insert(fingerprint(&current)) {
            tenure = (tenure * 2.0).min(n_requests as f64);
        } else {
            tenure = (tenure * tuning.rts_decay).max(1.0);
        }
    }
    best
}

/// Run one baseline on an epoch snapshot.
pub fn baseline_assign<R: Rng>(
    method: BaselineMethod,
    snapshot: &EpochSnapshot,
    params: &CostParams,
    tuning: &BaselineParams,
    budget: Budget,
    rng: &mut R,
) -> Solution {
    match method {
        BaselineMethod::Insertion => insertion(snapshot, params),
        BaselineMethod::InsertionIntra => insertion_intra(snapshot, params),
        BaselineMethod::SimulatedAnnealing => simulated_annealing(snapshot, params, tuning, budget, rng),
        BaselineMethod::ReactiveTabu => reactive_tabu(snapshot, params, tuning, budget),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CourierState, Crowdsourcee, Request, RequestStatus};
    use crate::geometry::Point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

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

    fn request(id: u64, pickup: Point, delivery: Point, release: f64) -> Request {
        Request {
            id: RequestId(id),
            pickup,
            delivery,
            release_time: release,
            guarantee: 120.0,
            weight: 3.0,
            status: RequestStatus::Pending,
        }
    }

    fn snapshot() -> EpochSnapshot {
        let couriers = vec![
            courier(0, Point::new(0.2, 0.4), 120.0),
            courier(1, Point::new(1.4, 1.1), 100.0),
            courier(2, Point::new(2.2, 0.3), 80.0),
        ];
        let requests = vec![
            request(0, Point::new(0.5, 0.5), Point::new(1.5, 1.0), 0.0),
            request(1, Point::new(1.0, 1.0), Point::new(0.3, 2.0), 1.0),
            request(2, Point::new(2.0, 0.5), Point::new(2.5, 2.5), 2.0),
            request(3, Point::new(0.8, 0.1), Point::new(2.2, 1.9), 3.0),
            request(4, Point::new(1.8, 1.4), Point::new(0.9, 0.9), 4.0),
        ];
        EpochSnapshot {
            now: 5.0,
            pending: requests.iter().map(|r| r.id).collect(),
            couriers: couriers.into_iter().map(|c| (c.id, c)).collect(),
            requests: requests.into_iter().map(|r| (r.id, r)).collect(),
        }
    }

    #[test]
    fn zero_requests_leave_solution_unchanged() {
        let mut snap = snapshot();
        snap.pending.clear();
        snap.requests.clear();
        let params = CostParams::default();
        let tuning = BaselineParams::default();
        for method in BaselineMethod::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let sol = baseline_assign(method, &snap, &params, &tuning, Budget::Iterations(50), &mut rng);
            assert!(sol.routes.values().all(|p| p.is_empty()));
        }
    }

    #[test]
    fn all_methods_return_strictly_feasible_solutions() {
        let snap = snapshot();
        let params = CostParams::default();
        let tuning = BaselineParams::default();
        for method in BaselineMethod::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let sol = baseline_assign(method, &snap, &params, &tuning, Budget::Iterations(200), &mut rng);
            assert!(sol.is_feasible(), "{method:?} returned an infeasible solution");
        }
    }

    #[test]
    fn metaheuristics_never_lose_to_their_start() {
        let snap = snapshot();
        let params = CostParams::default();
        let tuning = BaselineParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = baseline_assign(
            BaselineMethod::InsertionIntra,
            &snap,
            &params,
            &tuning,
            Budget::Iterations(1),
            &mut rng,
        );
        for method in [BaselineMethod::SimulatedAnnealing, BaselineMethod::ReactiveTabu] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let sol = baseline_assign(method, &snap, &params, &tuning, Budget::Iterations(300), &mut rng);
            assert!(
                sol.cost.total <= start.cost.total + 1e-9,
                "{method:?} worse than its starting point"
            );
        }
    }

    #[test]
    fn intra_variant_no_worse_than_plain_insertion() {
        let snap = snapshot();
        let params = CostParams::default();
        let tuning = BaselineParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plain = baseline_assign(BaselineMethod::Insertion, &snap, &params, &tuning, Budget::Iterations(1), &mut rng);
        let intra = baseline_assign(BaselineMethod::InsertionIntra, &snap, &params, &tuning, Budget::Iterations(1), &mut rng);
        assert!(intra.unassigned.len() <= plain.unassigned.len());
        if intra.unassigned.len() == plain.unassigned.len() {
            assert!(intra.cost.total <= plain.cost.total + 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed_in_iteration_mode() {
        let snap = snapshot();
        let params = CostParams::default();
        let tuning = BaselineParams::default();
        for method in [BaselineMethod::SimulatedAnnealing, BaselineMethod::ReactiveTabu] {
            let mut r1 = ChaCha8Rng::seed_from_u64(99);
            let mut r2 = ChaCha8Rng::seed_from_u64(99);
            let a = baseline_assign(method, &snap, &params, &tuning, Budget::Iterations(150), &mut r1);
            let b = baseline_assign(method, &snap, &params, &tuning, Budget::Iterations(150), &mut r2);
            assert_eq!(fingerprint(&a), fingerprint(&b));
            assert_eq!(a.cost.total, b.cost.total);
        }
    }

    #[test]
    fn wall_clock_cap_honored_within_overshoot() {
        let snap = snapshot();
        let params = CostParams::default();
        let tuning = BaselineParams::default();
        let cap = 0.05;
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let _ = baseline_assign(
            BaselineMethod::SimulatedAnnealing,
            &snap,
            &params,
            &tuning,
            Budget::WallClockSecs(cap),
            &mut rng,
        );
        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed <= cap * 1.1 + 0.05, "cap {cap}s overshot: {elapsed}s");
    }
}
