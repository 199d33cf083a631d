//! Core data model: requests, crowdsourcees, route plans, solutions, and the
//! total-shipping-cost function shared by every solver.
//!
//! All values here are immutable snapshots; the simulation engine is the only
//! place that mutates state, inside its single-threaded step.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{travel_minutes, Point};

pub const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CourierId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestStatus {
    Pending,
    Assigned,
    Delivered,
    /// Escalated to a backup vehicle at triage because it could not wait.
    Backup,
    /// Deferred at least once, then escalated when waiting longer became unsafe.
    ExpiredToBackup,
}

/// A pickup/delivery pair with a release time, delivery guarantee, and weight.
#[derive(Debug, Clone)]
pub struct Request {
    pub id: RequestId,
    pub pickup: Point,
    pub delivery: Point,
    /// Minutes since day start when the request was generated (a_i).
    pub release_time: f64,
    /// Guaranteed delivery time in minutes after release (G_i).
    pub guarantee: f64,
    /// Pounds.
    pub weight: f64,
    pub status: RequestStatus,
}

impl Request {
    /// Latest on-time delivery minute, a_i + G_i.
    pub fn deadline(&self) -> f64 {
        self.release_time + self.guarantee
    }

    /// Direct pickup-to-delivery travel time at `speed` mph.
    pub fn direct_time(&self, speed: f64) -> f64 {
        travel_minutes(self.pickup.distance(self.delivery), speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CourierState {
    Idle,
    EnRoute,
    Relocating,
    Exited,
}

/// A courier with an entry point, a wall-clock availability window, speed,
/// and carrying capacity.
#[derive(Debug, Clone)]
pub struct Crowdsourcee {
    pub id: CourierId,
    pub entry_point: Point,
    pub current_point: Point,
    pub entry_time: f64,
    /// Absolute minute at which the available time runs out.
    pub exit_deadline: f64,
    /// Miles per hour.
    pub speed: f64,
    /// Pounds.
    pub capacity: f64,
    pub state: CourierState,
    /// Requests already picked up and currently carried, with their weights.
    /// These cannot move to another courier; only their delivery stop remains.
    pub on_board: BTreeMap<RequestId, f64>,
    /// Committed route from the previous assignment, if any.
    pub route: Option<RoutePlan>,
    /// Destination of an in-progress relocation order.
    pub relocation_target: Option<Point>,
}

impl Crowdsourcee {
    /// Wall-clock availability left at `now`.
    pub fn budget_remaining(&self, now: f64) -> f64 {
        self.exit_deadline - now
    }

    pub fn carried_load(&self) -> f64 {
        self.on_board.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StopKind {
    Pickup,
    Delivery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stop {
    pub request: RequestId,
    pub kind: StopKind,
}

impl Stop {
    pub fn pickup(request: RequestId) -> Self {
        Stop { request, kind: StopKind::Pickup }
    }

    pub fn delivery(request: RequestId) -> Self {
        Stop { request, kind: StopKind::Delivery }
    }
}

/// An ordered stop sequence for one courier with projected arrival times and
/// the load carried after each stop.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub courier: CourierId,
    pub stops: Vec<Stop>,
    /// Projected arrival minute at each stop.
    pub schedule: Vec<f64>,
    /// Pounds carried after serving each stop.
    pub load_profile: Vec<f64>,
    /// Total travel minutes from the courier's current point through all stops.
    pub travel: f64,
}

impl RoutePlan {
    pub fn empty(courier: CourierId) -> Self {
        RoutePlan { courier, stops: Vec::new(), schedule: Vec::new(), load_profile: Vec::new(), travel: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    /// Request ids appearing on this plan (each once).
    pub fn request_ids(&self) -> BTreeSet<RequestId> {
        self.stops.iter().map(|s| s.request).collect()
    }

    pub fn completion_time(&self, now: f64) -> f64 {
        self.schedule.last().copied().unwrap_or(now)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("delivery of request {0:?} precedes its pickup")]
    DeliveryBeforePickup(RequestId),
    #[error("request {0:?} appears without a pickup and is not on board")]
    MissingPickup(RequestId),
    #[error("duplicate stop for request {0:?}")]
    DuplicateStop(RequestId),
    #[error("pickup of request {0:?} has no delivery stop")]
    MissingDelivery(RequestId),
    #[error("unknown request {0:?}")]
    UnknownRequest(RequestId),
}

/// The Eq.-style cost decomposition of a solution: travel plus priced
/// violations, all expressed in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub travel: f64,
    /// Total delivery lateness past the guarantees (T_g), minutes.
    pub lateness: f64,
    /// Total completion time past courier availability (T_avl), minutes.
    pub budget_violation: f64,
    /// Capacity violation measure (N_cap): excess pounds by default.
    pub capacity_excess: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn is_feasible(&self) -> bool {
        self.lateness <= FEAS_EPS && self.budget_violation <= FEAS_EPS && self.capacity_excess <= FEAS_EPS
    }

    fn accumulate(&mut self, other: &CostBreakdown) {
        self.travel += other.travel;
        self.lateness += other.lateness;
        self.budget_violation += other.budget_violation;
        self.capacity_excess += other.capacity_excess;
    }

    /// Recompute the weighted total from the components.
    pub fn refresh_total(&mut self, params: &CostParams) {
        self.total = self.travel
            + params.lateness_penalty * self.lateness
            + params.budget_penalty * self.budget_violation
            + params.capacity_penalty * self.capacity_excess;
    }
}

/// How the N_cap term of the cost function measures capacity violations.
/// The default prices total excess pounds; the alternative counts requests
/// whose pickup pushes the load over the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityMode {
    ExcessWeight,
    RequestCount,
}

/// Penalties, search weights, and rates shared across the solvers.
#[derive(Debug, Clone)]
pub struct CostParams {
    /// Lateness penalty ϑ.
    pub lateness_penalty: f64,
    /// Availability-violation penalty τ.
    pub budget_penalty: f64,
    /// Capacity penalty ρ (also converts pounds to minutes).
    pub capacity_penalty: f64,
    /// Selection emphasis α in the probabilistic choice rule.
    pub alpha: f64,
    /// Average spacing η between successive memory sizes.
    pub eta: usize,
    /// Maximum pickup distance in miles.
    pub pickup_threshold: f64,
    /// Candidate solutions costing more than (1+β) times the reference are discarded.
    pub discard_ratio: f64,
    /// Memory entries κ after which a solution becomes persistently attractive.
    pub tabu_count: u32,
    /// Crowdsourcee pay, $/hour, for delivery and relocation travel.
    pub crowdsourcee_rate: f64,
    /// Backup vehicle operating cost, $/hour.
    pub backup_rate: f64,
    /// Backup vehicle speed, mph.
    pub backup_speed: f64,
    pub capacity_mode: CapacityMode,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            lateness_penalty: 0.25,
            budget_penalty: 0.1,
            capacity_penalty: 5.0,
            alpha: 5.0,
            eta: 6,
            pickup_threshold: 1.67,
            discard_ratio: 0.5,
            tabu_count: 3,
            crowdsourcee_rate: 7.0,
            backup_rate: 68.0,
            backup_speed: 20.0,
            capacity_mode: CapacityMode::ExcessWeight,
        }
    }
}

/// Immutable view of the system handed to a solver at one assignment epoch.
#[derive(Debug, Clone)]
pub struct EpochSnapshot {
    pub now: f64,
    /// Active couriers (entered, not exited), keyed by id.
    pub couriers: BTreeMap<CourierId, Crowdsourcee>,
    /// Every request a solver may touch: pending ones plus those on routes.
    pub requests: BTreeMap<RequestId, Request>,
    /// Requests awaiting assignment at this epoch.
    pub pending: BTreeSet<RequestId>,
}

impl EpochSnapshot {
    pub fn request(&self, id: RequestId) -> &Request {
        &self.requests[&id]
    }

    pub fn courier(&self, id: CourierId) -> &Crowdsourcee {
        &self.couriers[&id]
    }

    /// The committed routes as a solution, with all pending requests
    /// unassigned. This is always strictly feasible: committed routes were
    /// feasible when adopted and deterministic travel preserves their times.
    pub fn base_solution(&self, params: &CostParams) -> Solution {
        let mut routes = BTreeMap::new();
        for (id, courier) in &self.couriers {
            let stops = courier.route.as_ref().map(|r| r.stops.clone()).unwrap_or_default();
            let plan = route_schedule(&stops, courier, &self.requests, self.now)
                .expect("committed route must be well-formed");
            routes.insert(*id, plan);
        }
        Solution::evaluate(routes, self.pending.clone(), self, params)
    }
}

/// A set of route plans plus the requests left unassigned, with the cost
/// breakdown cached per route for cheap delta evaluation.
#[derive(Debug, Clone)]
pub struct Solution {
    pub routes: BTreeMap<CourierId, RoutePlan>,
    pub unassigned: BTreeSet<RequestId>,
    pub cost: CostBreakdown,
    route_costs: BTreeMap<CourierId, CostBreakdown>,
}

impl Solution {
    pub fn evaluate(
        routes: BTreeMap<CourierId, RoutePlan>,
        unassigned: BTreeSet<RequestId>,
        snapshot: &EpochSnapshot,
        params: &CostParams,
    ) -> Self {
        let mut route_costs = BTreeMap::new();
        for (id, plan) in &routes {
            route_costs.insert(*id, route_cost(plan, snapshot.courier(*id), &snapshot.requests, params, snapshot.now));
        }
        let mut sol = Solution { routes, unassigned, cost: CostBreakdown::default(), route_costs };
        sol.refresh_total(params);
        sol
    }

    fn refresh_total(&mut self, params: &CostParams) {
        let mut total = CostBreakdown::default();
        for rc in self.route_costs.values() {
            total.accumulate(rc);
        }
        total.refresh_total(params);
        self.cost = total;
    }

    pub fn route_cost(&self, id: CourierId) -> &CostBreakdown {
        &self.route_costs[&id]
    }

    /// Replace one courier's plan and re-derive the totals.
    pub fn with_route(&self, plan: RoutePlan, snapshot: &EpochSnapshot, params: &CostParams) -> Solution {
        let mut next = self.clone();
        next.set_route(plan, snapshot, params);
        next
    }

    pub fn set_route(&mut self, plan: RoutePlan, snapshot: &EpochSnapshot, params: &CostParams) {
        let id = plan.courier;
        let cost = route_cost(&plan, snapshot.courier(id), &snapshot.requests, params, snapshot.now);
        self.routes.insert(id, plan);
        self.route_costs.insert(id, cost);
        self.refresh_total(params);
    }

    pub fn is_feasible(&self) -> bool {
        self.cost.is_feasible()
    }

    /// Couriers whose plans currently carry at least one stop, in id order.
    pub fn nonempty_routes(&self) -> Vec<CourierId> {
        self.routes
            .iter()
            .filter(|(_, p)| !p.is_empty())
            .map(|(id, _)| *id)
            .collect()
    }
}

/// Project timing and loads for a stop sequence starting from the courier's
/// current point at `now`. Rejects malformed sequences: a delivery before its
/// pickup, a delivery without a pickup for a request not on board, duplicate
/// stops, or a pickup without its delivery.
pub fn route_schedule(
    stops: &[Stop],
    courier: &Crowdsourcee,
    requests: &BTreeMap<RequestId, Request>,
    now: f64,
) -> Result<RoutePlan, RouteError> {
    let mut pickup_seen: BTreeSet<RequestId> = BTreeSet::new();
    let mut delivery_seen: BTreeSet<RequestId> = BTreeSet::new();
    for stop in stops {
        if !requests.contains_key(&stop.request) {
            return Err(RouteError::UnknownRequest(stop.request));
        }
        match stop.kind {
            StopKind::Pickup => {
                if !pickup_seen.insert(stop.request) {
                    return Err(RouteError::DuplicateStop(stop.request));
                }
                if courier.on_board.contains_key(&stop.request) {
                    return Err(RouteError::DuplicateStop(stop.request));
                }
            }
            StopKind::Delivery => {
                if !delivery_seen.insert(stop.request) {
                    return Err(RouteError::DuplicateStop(stop.request));
                }
                if !pickup_seen.contains(&stop.request) && !courier.on_board.contains_key(&stop.request) {
                    if stops.iter().any(|s| s.request == stop.request && s.kind == StopKind::Pickup) {
                        return Err(RouteError::DeliveryBeforePickup(stop.request));
                    }
                    return Err(RouteError::MissingPickup(stop.request));
                }
            }
        }
    }
    for picked in &pickup_seen {
        if !delivery_seen.contains(picked) {
            return Err(RouteError::MissingDelivery(*picked));
        }
    }

    let mut schedule = Vec::with_capacity(stops.len());
    let mut load_profile = Vec::with_capacity(stops.len());
    let mut pos = courier.current_point;
    let mut t = now;
    let mut load = courier.carried_load();
    for stop in stops {
        let req = &requests[&stop.request];
        let target = match stop.kind {
            StopKind::Pickup => req.pickup,
            StopKind::Delivery => req.delivery,
        };
        t += travel_minutes(pos.distance(target), courier.speed);
        pos = target;
        match stop.kind {
            StopKind::Pickup => load += req.weight,
            StopKind::Delivery => load -= req.weight,
        }
        schedule.push(t);
        load_profile.push(load);
    }
    Ok(RoutePlan {
        courier: courier.id,
        stops: stops.to_vec(),
        schedule,
        load_profile,
        travel: t - now,
    })
}

/// Cost contribution of a single route.
pub fn route_cost(
    plan: &RoutePlan,
    courier: &Crowdsourcee,
    requests: &BTreeMap<RequestId, Request>,
    params: &CostParams,
    now: f64,
) -> CostBreakdown {
    let mut bd = CostBreakdown { travel: plan.travel, ..CostBreakdown::default() };
    for (i, stop) in plan.stops.iter().enumerate() {
        if stop.kind == StopKind::Delivery {
            let late = plan.schedule[i] - requests[&stop.request].deadline();
            if late > 0.0 {
                bd.lateness += late;
            }
        }
    }
    if !plan.stops.is_empty() {
        let over = plan.completion_time(now) - courier.exit_deadline;
        if over > 0.0 {
            bd.budget_violation += over;
        }
    }
    bd.capacity_excess = match params.capacity_mode {
        CapacityMode::ExcessWeight => plan
            .load_profile
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max(l - courier.capacity))
            .max(0.0),
        CapacityMode::RequestCount => plan
            .stops
            .iter()
            .zip(&plan.load_profile)
            .filter(|(s, &l)| s.kind == StopKind::Pickup && l > courier.capacity + FEAS_EPS)
            .count() as f64,
    };
    bd.refresh_total(params);
    bd
}

/// Full cost of a solution. A pure function of the routes: infeasible
/// solutions are priced, never rejected.
pub fn solution_cost(solution: &Solution, snapshot: &EpochSnapshot, params: &CostParams) -> CostBreakdown {
    let mut total = CostBreakdown::default();
    for (id, plan) in &solution.routes {
        total.accumulate(&route_cost(plan, snapshot.courier(*id), &snapshot.requests, params, snapshot.now));
    }
    total.refresh_total(params);
    total
}

/// Distance a courier must deviate to reach a request's pickup node.
///
/// Idle couriers measure from their current point. En-route couriers measure
/// the minimum over the current point and every unserved stop on the plan.
pub fn pickup_distance(
    courier: &Crowdsourcee,
    plan: Option<&RoutePlan>,
    request: &Request,
    requests: &BTreeMap<RequestId, Request>,
) -> f64 {
    let mut best = courier.current_point.distance(request.pickup);
    if let Some(plan) = plan {
        for stop in &plan.stops {
            let req = &requests[&stop.request];
            let p = match stop.kind {
                StopKind::Pickup => req.pickup,
                StopKind::Delivery => req.delivery,
            };
            let d = p.distance(request.pickup);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Minutes until the latest feasible pickup moment for a request, measured
/// from `now`. Negative slack means no courier starting now can deliver on
/// time.
pub fn slack_time(request: &Request, speed: f64, now: f64) -> f64 {
    request.deadline() - request.direct_time(speed) - now
}

/// All ways to place a pickup/delivery pair into `base` while keeping the
/// relative order of the existing stops, pickup before delivery.
pub fn pair_placements(base: &[Stop], request: RequestId) -> Vec<Vec<Stop>> {
    let n = base.len();
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for p in 0..=n {
        for d in p..=n {
            let mut stops = Vec::with_capacity(n + 2);
            stops.extend_from_slice(&base[..p]);
            stops.push(Stop::pickup(request));
            stops.extend_from_slice(&base[p..d]);
            stops.push(Stop::delivery(request));
            stops.extend_from_slice(&base[d..]);
            out.push(stops);
        }
    }
    out
}

/// Remove both stops of `request` from a stop sequence.
pub fn without_request(stops: &[Stop], request: RequestId) -> Vec<Stop> {
    stops.iter().copied().filter(|s| s.request != request).collect()
}
