//! The discrete-time whole-day simulation: arrivals, periodic assignment,
//! triage to backup vehicles, proactive relocation, and state advancement.
//!
//! One replication is strictly single-threaded and deterministic per
//! (config, seed). Every random stream is derived from the seed with a
//! distinct tag, and the arrival stream is independent of solver randomness
//! so solvers can be compared on identical days.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{baseline_assign, BaselineMethod, BaselineParams, Budget};
use crate::construction::{backup_cost_usd, backup_duration, build_initial, triage_unassigned, InitialMethod};
use crate::domain::{
    CourierId, CourierState, Crowdsourcee, EpochSnapshot, Request, RequestId, RequestStatus,
    Solution, StopKind,
};
use crate::geometry::{travel_minutes, Point, ServiceArea};
use crate::mtamp::{derive_seed, run_mtamp, PhaseTrace};
use crate::relocation::cluster::{ah_cluster, pick_relocatable, Cluster};
use crate::relocation::flow::{
    compute_targets, forecast, relocation_triggered, solve_flow, zone_relocation_costs,
};
use crate::relocation::jobs::{form_jobs, validate_job, FeasibleJob};
use crate::relocation::mkp::solve_virtual;
use crate::relocation::orders::emit_orders;
use crate::sim::arrivals::{generate_streams, stream_checksum, CourierArrival};
use crate::sim::config::{ScenarioConfig, SolverChoice};

use thiserror::Error;

const TAG_ARRIVALS: u64 = 0xA1;
const TAG_SOLVER: u64 = 0xB2;
const TAG_JOBS: u64 = 0xC3;
const TAG_ORDERS: u64 = 0xD4;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration: {0}")]
    Config(#[from] crate::sim::config::ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    RequestArrived,
    CourierArrived,
    Assigned,
    PickedUp,
    Delivered,
    BackupDispatched,
    BackupDelivered,
    RelocationOrdered,
    RelocationArrived,
    RouteTravel,
    RelocationTravel,
    CourierExited,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RequestArrived => "request_arrived",
            EventKind::CourierArrived => "courier_arrived",
            EventKind::Assigned => "assigned",
            EventKind::PickedUp => "picked_up",
            EventKind::Delivered => "delivered",
            EventKind::BackupDispatched => "backup_dispatched",
            EventKind::BackupDelivered => "backup_delivered",
            EventKind::RelocationOrdered => "relocation_ordered",
            EventKind::RelocationArrived => "relocation_arrived",
            EventKind::RouteTravel => "route_travel",
            EventKind::RelocationTravel => "relocation_travel",
            EventKind::CourierExited => "courier_exited",
        }
    }
}

/// One priced or state-changing occurrence, a row of the event log.
#[derive(Debug, Clone)]
pub struct Event {
    pub seed: u64,
    pub t: f64,
    pub kind: EventKind,
    pub request: Option<RequestId>,
    pub courier: Option<CourierId>,
    pub zone_from: Option<usize>,
    pub zone_to: Option<usize>,
    pub cost_delta_usd: f64,
}

/// Everything a single replication produces.
#[derive(Debug, Clone)]
pub struct DayOutcome {
    pub seed: u64,
    pub tsc_usd: f64,
    pub courier_pay_usd: f64,
    pub relocation_pay_usd: f64,
    pub backup_cost_usd: f64,
    pub requests_total: usize,
    pub couriers_total: usize,
    pub delivered_by_courier: usize,
    pub delivered_by_backup: usize,
    pub late_deliveries: usize,
    pub relocation_orders_total: u32,
    pub arrival_checksum: u64,
    /// (zone, generated, courier-fulfilled) raw counts.
    pub zone_fulfilled: Vec<(usize, u32, u32)>,
    /// (minute, idle couriers per pending request) samples every hour.
    pub availability: Vec<(f64, f64)>,
    /// (epoch minute, relocation orders issued).
    pub relocation_counts: Vec<(f64, u32)>,
    /// (epoch minute, solver seconds).
    pub epoch_runtimes: Vec<(f64, f64)>,
    pub events: Vec<Event>,
    pub traces: Vec<PhaseTrace>,
    /// (epoch minute, from zone, to zone, count) for every planned move.
    pub flow_dump: Vec<(f64, usize, usize, u32)>,
    /// (epoch minute, clusters, jobs, objective) per relocation run.
    pub virtual_dump: Vec<(f64, usize, usize, f64)>,
}

struct Sim<'a> {
    config: &'a ScenarioConfig,
    area: ServiceArea,
    params: crate::domain::CostParams,
    tuning: BaselineParams,
    seed: u64,
    prev_time: f64,
    couriers: BTreeMap<CourierId, Crowdsourcee>,
    requests: BTreeMap<RequestId, Request>,
    pending: BTreeSet<RequestId>,
    deferred_once: BTreeSet<RequestId>,
    backups: Vec<(f64, RequestId)>,
    zone_costs: Vec<Vec<f64>>,
    courier_pay: f64,
    relocation_pay: f64,
    backup_cost: f64,
    delivered_courier: usize,
    delivered_backup: usize,
    late_deliveries: usize,
    zone_generated: Vec<u32>,
    zone_fulfilled: Vec<u32>,
    events: Vec<Event>,
    traces: Vec<PhaseTrace>,
    flow_dump: Vec<(f64, usize, usize, u32)>,
    virtual_dump: Vec<(f64, usize, usize, f64)>,
    relocation_counts: Vec<(f64, u32)>,
    epoch_runtimes: Vec<(f64, f64)>,
    availability: Vec<(f64, f64)>,
}

impl<'a> Sim<'a> {
    fn event(&mut self, t: f64, kind: EventKind) -> &mut Event {
        self.events.push(Event {
            seed: self.seed,
            t,
            kind,
            request: None,
            courier: None,
            zone_from: None,
            zone_to: None,
            cost_delta_usd: 0.0,
        });
        self.events.last_mut().unwrap()
    }

    fn zone_of(&self, p: Point) -> usize {
        self.area.zone_of(p).0
    }

    fn snapshot(&self, now: f64) -> EpochSnapshot {
        EpochSnapshot {
            now,
            couriers: self.couriers.clone(),
            requests: self.requests.clone(),
            pending: self.pending.clone(),
        }
    }

    fn ingest(&mut self, te: f64, requests: Vec<Request>, couriers: Vec<CourierArrival>) {
        for r in requests {
            let zone = self.zone_of(r.pickup);
            self.zone_generated[zone] += 1;
            let id = r.id;
            self.requests.insert(id, r);
            self.pending.insert(id);
            let seed = self.seed;
            let e = self.event(te, EventKind::RequestArrived);
            e.request = Some(id);
            e.zone_from = Some(zone);
            debug_assert_eq!(e.seed, seed);
        }
        for c in couriers {
            let zone = self.zone_of(c.entry_point);
            let courier = Crowdsourcee {
                id: c.id,
                entry_point: c.entry_point,
                current_point: c.entry_point,
                entry_time: c.entry_time,
                exit_deadline: c.entry_time + self.config.courier_budget,
                speed: self.config.courier_speed,
                capacity: self.config.courier_capacity,
                state: CourierState::Idle,
                on_board: BTreeMap::new(),
                route: None,
                relocation_target: None,
            };
            self.couriers.insert(c.id, courier);
            let e = self.event(te, EventKind::CourierArrived);
            e.courier = Some(c.id);
            e.zone_to = Some(zone);
        }
    }

    fn solve(&mut self, te: f64, epoch: usize) -> Solution {
        let snapshot = self.snapshot(te);
        let started = Instant::now();
        let solution = match self.config.solver {
            SolverChoice::Mtamp => {
                let initials: Vec<Solution> = InitialMethod::ALL
                    .iter()
                    .map(|m| build_initial(*m, &snapshot, &self.params))
                    .collect();
                let mut trace_sink = if self.config.trace { Some(Vec::new()) } else { None };
                let best = run_mtamp(
                    &initials,
                    &snapshot,
                    &self.params,
                    derive_seed(self.seed, TAG_SOLVER, epoch as u64),
                    trace_sink.as_mut(),
                );
                if let Some(tr) = trace_sink {
                    self.traces.extend(tr);
                }
                best
            }
            other => {
                let method = match other {
                    SolverChoice::Insertion => BaselineMethod::Insertion,
                    SolverChoice::InsertionIntra => BaselineMethod::InsertionIntra,
                    SolverChoice::SimulatedAnnealing => BaselineMethod::SimulatedAnnealing,
                    SolverChoice::ReactiveTabu => BaselineMethod::ReactiveTabu,
                    SolverChoice::Mtamp => unreachable!(),
                };
                let budget = if self.config.time_cap_secs > 0.0 {
                    Budget::WallClockSecs(self.config.time_cap_secs)
                } else {
                    let iters = match method {
                        BaselineMethod::SimulatedAnnealing => self.config.sa_iterations,
                        BaselineMethod::ReactiveTabu => self.config.rts_iterations,
                        _ => 1,
                    };
                    Budget::Iterations(iters)
                };
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.seed, TAG_SOLVER, epoch as u64));
                baseline_assign(method, &snapshot, &self.params, &self.tuning, budget, &mut rng)
            }
        };
        self.epoch_runtimes.push((te, started.elapsed().as_secs_f64()));
        solution
    }

    fn commit(&mut self, te: f64, solution: &Solution) {
        debug_assert!(solution.is_feasible(), "committed solutions must be strictly feasible");
        for (cid, plan) in &solution.routes {
            // newly assigned requests change status before touching the courier
            let mut newly_assigned = Vec::new();
            for stop in &plan.stops {
                if stop.kind == StopKind::Pickup {
                    let req = &self.requests[&stop.request];
                    if req.status == RequestStatus::Pending {
                        newly_assigned.push((stop.request, self.zone_of(req.pickup)));
                    }
                }
            }
            for (rid, zone) in newly_assigned {
                self.requests.get_mut(&rid).unwrap().status = RequestStatus::Assigned;
                self.pending.remove(&rid);
                let courier_zone = self.zone_of(self.couriers[cid].current_point);
                let e = self.event(te, EventKind::Assigned);
                e.request = Some(rid);
                e.courier = Some(*cid);
                e.zone_from = Some(courier_zone);
                e.zone_to = Some(zone);
            }
            let courier = self.couriers.get_mut(cid).unwrap();
            if plan.is_empty() {
                courier.route = None;
                if courier.state == CourierState::EnRoute {
                    courier.state = CourierState::Idle;
                }
            } else {
                courier.route = Some(plan.clone());
                courier.state = CourierState::EnRoute;
                courier.relocation_target = None;
            }
        }
        self.pending = solution.unassigned.clone();
    }

    fn dispatch_backup(&mut self, te: f64, rid: RequestId) {
        let request = &self.requests[&rid];
        let duration = backup_duration(&self.area, request, self.config.backup_speed);
        let cost = duration / 60.0 * self.config.backup_rate;
        let deliver_t = te + duration;
        let pickup_zone = self.zone_of(request.pickup);
        let delivery_zone = self.zone_of(request.delivery);
        self.backup_cost += cost;
        self.backups.push((deliver_t, rid));
        self.backups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expired = self.deferred_once.contains(&rid);
        self.requests.get_mut(&rid).unwrap().status = if expired {
            RequestStatus::ExpiredToBackup
        } else {
            RequestStatus::Backup
        };
        self.pending.remove(&rid);
        let e = self.event(te, EventKind::BackupDispatched);
        e.request = Some(rid);
        e.zone_from = Some(pickup_zone);
        e.zone_to = Some(delivery_zone);
        e.cost_delta_usd = cost;
    }

    fn triage(&mut self, te: f64, final_epoch: bool) {
        let result =
            triage_unassigned(&self.pending, &self.requests, &self.area, &self.params, te, self.config.dt);
        let mut to_backup: Vec<RequestId> = result.backup_now.iter().copied().collect();
        if final_epoch {
            to_backup.extend(result.deferred.iter().copied());
        } else {
            for rid in &result.deferred {
                self.deferred_once.insert(*rid);
            }
        }
        for rid in to_backup {
            self.dispatch_backup(te, rid);
        }
    }

    fn relocate(&mut self, te: f64, epoch: usize) {
        let snapshot = self.snapshot(te);
        let fc = forecast(
            &self.area,
            &snapshot,
            &self.pending,
            self.config.dt,
            self.config.courier_rate,
            self.config.request_rate,
            self.config.rounding,
        );
        let Some(targets) = compute_targets(&fc) else {
            self.relocation_counts.push((te, 0));
            return;
        };
        if !relocation_triggered(&fc, &targets) {
            self.relocation_counts.push((te, 0));
            return;
        }
        let plan = solve_flow(&fc, &targets, &self.zone_costs);
        if plan.skipped || plan.is_zero() {
            self.relocation_counts.push((te, 0));
            return;
        }
        if self.config.trace {
            for (r, row) in plan.w.iter().enumerate() {
                for (s, &units) in row.iter().enumerate() {
                    if units > 0 {
                        self.flow_dump.push((te, r, s, units));
                    }
                }
            }
        }
        let relocatable = pick_relocatable(&plan, &self.area, &self.couriers, te);
        if relocatable.is_empty() || self.pending.is_empty() {
            self.relocation_counts.push((te, 0));
            return;
        }
        let features: Vec<(CourierId, Point, f64)> = relocatable
            .iter()
            .map(|id| {
                let c = &self.couriers[id];
                (*id, c.current_point, c.budget_remaining(te))
            })
            .collect();
        let clusters: Vec<Cluster> =
            ah_cluster(&features, self.config.psi, self.config.courier_speed);
        let pool: BTreeMap<RequestId, Request> = self
            .pending
            .iter()
            .map(|id| (*id, self.requests[id].clone()))
            .collect();
        let mut all_jobs: Vec<FeasibleJob> = Vec::new();
        let mut seen_stops = BTreeSet::new();
        for (k, cluster) in clusters.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                self.seed,
                TAG_JOBS,
                (epoch as u64) << 16 | k as u64,
            ));
            for job in form_jobs(
                cluster,
                &pool,
                te,
                self.config.courier_speed,
                self.config.courier_capacity,
                &self.params,
                &mut rng,
            ) {
                if seen_stops.insert(job.stops.clone()) {
                    all_jobs.push(job);
                }
            }
        }
        if all_jobs.is_empty() {
            self.relocation_counts.push((te, 0));
            return;
        }
        let feasible: Vec<Vec<bool>> = all_jobs
            .iter()
            .map(|job| {
                clusters
                    .iter()
                    .map(|cluster| {
                        validate_job(
                            &job.stops,
                            cluster.centroid_point,
                            te + cluster.centroid_budget,
                            &pool,
                            te,
                            self.config.courier_speed,
                            self.config.courier_capacity,
                            self.params.pickup_threshold,
                        )
                        .is_some()
                    })
                    .collect()
            })
            .collect();
        let backup_costs: BTreeMap<RequestId, f64> = pool
            .iter()
            .map(|(id, r)| (*id, backup_cost_usd(&self.area, r, &self.params)))
            .collect();
        let assignment = solve_virtual(
            &all_jobs,
            &clusters,
            &feasible,
            self.config.relocation_objective,
            &backup_costs,
            &pool,
            self.config.courier_speed,
            &self.params,
        );
        self.virtual_dump.push((te, clusters.len(), all_jobs.len(), assignment.objective));
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, TAG_ORDERS, epoch as u64));
        let orders = emit_orders(&assignment, &all_jobs, &clusters, &self.couriers, &pool, te, &mut rng);
        debug_assert!(orders.len() as u32 <= plan.total_moved());
        let mut issued = 0u32;
        for order in orders {
            let courier = self.couriers.get_mut(&order.courier).unwrap();
            if courier.state != CourierState::Idle {
                continue;
            }
            let from_zone = self.area.zone_of(courier.current_point).0;
            let to_zone = self.area.zone_of(order.target).0;
            courier.state = CourierState::Relocating;
            courier.relocation_target = Some(order.target);
            issued += 1;
            let e = self.event(te, EventKind::RelocationOrdered);
            e.courier = Some(order.courier);
            e.zone_from = Some(from_zone);
            e.zone_to = Some(to_zone);
        }
        self.relocation_counts.push((te, issued));
    }

    /// Move the world from `prev_time` to `until`: backups deliver, couriers
    /// ride their routes or relocation legs, budgets expire.
    fn advance(&mut self, until: f64) {
        let from = self.prev_time;
        // backup deliveries due in this window
        while let Some(&(deliver_t, rid)) = self.backups.first() {
            if deliver_t > until + crate::domain::FEAS_EPS {
                break;
            }
            self.backups.remove(0);
            self.delivered_backup += 1;
            let deadline = self.requests[&rid].deadline();
            if deliver_t > deadline + crate::domain::FEAS_EPS {
                self.late_deliveries += 1;
            }
            let zone = self.zone_of(self.requests[&rid].delivery);
            let e = self.event(deliver_t, EventKind::BackupDelivered);
            e.request = Some(rid);
            e.zone_to = Some(zone);
        }
        let ids: Vec<CourierId> = self.couriers.keys().copied().collect();
        let mut exited = Vec::new();
        for id in ids {
            let state = self.couriers[&id].state;
            match state {
                CourierState::EnRoute => self.advance_route(id, from, until),
                CourierState::Relocating => self.advance_relocation(id, from, until),
                CourierState::Idle | CourierState::Exited => {}
            }
            let c = &self.couriers[&id];
            if c.state == CourierState::Idle && c.exit_deadline <= until + crate::domain::FEAS_EPS {
                let t_exit = c.exit_deadline.max(from);
                let zone = self.zone_of(c.current_point);
                let e = self.event(t_exit, EventKind::CourierExited);
                e.courier = Some(id);
                e.zone_from = Some(zone);
                exited.push(id);
            }
        }
        for id in exited {
            self.couriers.get_mut(&id).unwrap().state = CourierState::Exited;
            self.couriers.remove(&id);
        }
        self.prev_time = until;
    }

    fn advance_route(&mut self, id: CourierId, from: f64, until: f64) {
        let mut courier = self.couriers.remove(&id).unwrap();
        let mut plan = courier.route.take().unwrap();
        let mut cursor = from;
        let mut pos = courier.current_point;
        let mut fired = 0usize;
        for (i, stop) in plan.stops.iter().enumerate() {
            if plan.schedule[i] > until + crate::domain::FEAS_EPS {
                break;
            }
            let t_stop = plan.schedule[i];
            let req = self.requests[&stop.request].clone();
            match stop.kind {
                StopKind::Pickup => {
                    courier.on_board.insert(stop.request, req.weight);
                    pos = req.pickup;
                    let zone = self.zone_of(req.pickup);
                    let e = self.event(t_stop, EventKind::PickedUp);
                    e.request = Some(stop.request);
                    e.courier = Some(id);
                    e.zone_from = Some(zone);
                }
                StopKind::Delivery => {
                    courier.on_board.remove(&stop.request);
                    pos = req.delivery;
                    self.requests.get_mut(&stop.request).unwrap().status = RequestStatus::Delivered;
                    self.delivered_courier += 1;
                    let pickup_zone = self.zone_of(req.pickup);
                    let delivery_zone = self.zone_of(req.delivery);
                    self.zone_fulfilled[pickup_zone] += 1;
                    if t_stop > req.deadline() + crate::domain::FEAS_EPS {
                        self.late_deliveries += 1;
                    }
                    let e = self.event(t_stop, EventKind::Delivered);
                    e.request = Some(stop.request);
                    e.courier = Some(id);
                    e.zone_to = Some(delivery_zone);
                }
            }
            cursor = t_stop;
            fired = i + 1;
        }
        let pay_minutes;
        if fired < plan.stops.len() {
            // still moving toward the next stop at the window's end
            let next = &plan.stops[fired];
            let req = &self.requests[&next.request];
            let target = match next.kind {
                StopKind::Pickup => req.pickup,
                StopKind::Delivery => req.delivery,
            };
            let ride = courier.speed * (until - cursor) / 60.0;
            courier.current_point = pos.advance_toward(target, ride);
            plan.stops.drain(..fired);
            plan.schedule.drain(..fired);
            plan.load_profile.drain(..fired);
            courier.route = Some(plan);
            pay_minutes = until - from;
        } else {
            courier.current_point = pos;
            courier.route = None;
            courier.state = CourierState::Idle;
            pay_minutes = cursor - from;
        }
        if pay_minutes > crate::domain::FEAS_EPS {
            let cost = pay_minutes / 60.0 * self.config.crowdsourcee_rate;
            self.courier_pay += cost;
            let e = self.event(until.min(cursor.max(from)), EventKind::RouteTravel);
            e.courier = Some(id);
            e.cost_delta_usd = cost;
        }
        self.couriers.insert(id, courier);
    }

    fn advance_relocation(&mut self, id: CourierId, from: f64, until: f64) {
        let mut courier = self.couriers.remove(&id).unwrap();
        let target = courier.relocation_target.expect("relocating courier has a target");
        let arrive_t =
            from + travel_minutes(courier.current_point.distance(target), courier.speed);
        let stop_t = arrive_t.min(until).min(courier.exit_deadline);
        let ride = courier.speed * (stop_t - from).max(0.0) / 60.0;
        courier.current_point = courier.current_point.advance_toward(target, ride);
        let pay_minutes = (stop_t - from).max(0.0);
        if pay_minutes > crate::domain::FEAS_EPS {
            let cost = pay_minutes / 60.0 * self.config.crowdsourcee_rate;
            self.relocation_pay += cost;
            let e = self.event(stop_t, EventKind::RelocationTravel);
            e.courier = Some(id);
            e.cost_delta_usd = cost;
        }
        if arrive_t <= until + crate::domain::FEAS_EPS && arrive_t <= courier.exit_deadline {
            courier.state = CourierState::Idle;
            courier.relocation_target = None;
            let zone = self.zone_of(target);
            let e = self.event(arrive_t, EventKind::RelocationArrived);
            e.courier = Some(id);
            e.zone_to = Some(zone);
        } else if courier.exit_deadline <= until {
            // budget ran out mid-leg; the exit event follows in advance()
            courier.state = CourierState::Idle;
            courier.relocation_target = None;
        }
        self.couriers.insert(id, courier);
    }

    fn sample_availability(&mut self, te: f64) {
        let idle = self
            .couriers
            .values()
            .filter(|c| c.state == CourierState::Idle)
            .count();
        let pending = self.pending.len().max(1);
        self.availability.push((te, idle as f64 / pending as f64));
    }
}

/// Run one replication.
pub fn run_day(config: &ScenarioConfig, seed: u64) -> Result<DayOutcome, ScenarioError> {
    config.validate()?;
    let area = config.area()?;
    let zones = area.num_zones();
    let (all_requests, all_couriers) =
        generate_streams(config, &area, derive_seed(seed, TAG_ARRIVALS, 0));
    let checksum = stream_checksum(&all_requests, &all_couriers);
    let requests_total = all_requests.len();
    let couriers_total = all_couriers.len();

    let mut sim = Sim {
        config,
        params: config.cost_params(),
        tuning: BaselineParams {
            sa_initial_temp_factor: config.sa_initial_temp_factor,
            sa_cooling: config.sa_cooling,
            rts_decay: config.rts_decay,
        },
        zone_costs: if config.relocation {
            zone_relocation_costs(&area, config.courier_speed, config.crowdsourcee_rate)
        } else {
            Vec::new()
        },
        area,
        seed,
        prev_time: 0.0,
        couriers: BTreeMap::new(),
        requests: BTreeMap::new(),
        pending: BTreeSet::new(),
        deferred_once: BTreeSet::new(),
        backups: Vec::new(),
        courier_pay: 0.0,
        relocation_pay: 0.0,
        backup_cost: 0.0,
        delivered_courier: 0,
        delivered_backup: 0,
        late_deliveries: 0,
        zone_generated: vec![0; zones],
        zone_fulfilled: vec![0; zones],
        events: Vec::new(),
        traces: Vec::new(),
        flow_dump: Vec::new(),
        virtual_dump: Vec::new(),
        relocation_counts: Vec::new(),
        epoch_runtimes: Vec::new(),
        availability: Vec::new(),
    };

    let steps = config.steps();
    let mut req_iter = all_requests.into_iter().peekable();
    let mut cou_iter = all_couriers.into_iter().peekable();
    for epoch in 1..=steps {
        let te = epoch as f64 * config.dt;
        sim.advance(te);
        let mut new_requests = Vec::new();
        while req_iter.peek().map(|r| r.release_time <= te).unwrap_or(false) {
            new_requests.push(req_iter.next().unwrap());
        }
        let mut new_couriers = Vec::new();
        while cou_iter.peek().map(|c| c.entry_time <= te).unwrap_or(false) {
            new_couriers.push(cou_iter.next().unwrap());
        }
        sim.ingest(te, new_requests, new_couriers);
        if (te / 60.0 - (te / 60.0).round()).abs() < 1e-9 {
            sim.sample_availability(te);
        }
        let solution = sim.solve(te, epoch);
        sim.commit(te, &solution);
        sim.triage(te, epoch == steps);
        if config.relocation && epoch < steps {
            sim.relocate(te, epoch);
        }
    }
    // drain: let committed work and in-flight backups finish
    let mut guard = 0;
    while (!sim.couriers.is_empty() || !sim.backups.is_empty()) && guard < 100_000 {
        let next = sim.prev_time + config.dt.max(1.0);
        sim.advance(next);
        guard += 1;
    }
    debug_assert!(sim.couriers.is_empty() && sim.backups.is_empty(), "drain did not converge");

    let zone_fulfilled = (0..zones)
        .filter(|&z| sim.zone_generated[z] > 0)
        .map(|z| (z, sim.zone_generated[z], sim.zone_fulfilled[z]))
        .collect();
    Ok(DayOutcome {
        seed,
        tsc_usd: sim.courier_pay + sim.relocation_pay + sim.backup_cost,
        courier_pay_usd: sim.courier_pay,
        relocation_pay_usd: sim.relocation_pay,
        backup_cost_usd: sim.backup_cost,
        requests_total,
        couriers_total,
        delivered_by_courier: sim.delivered_courier,
        delivered_by_backup: sim.delivered_backup,
        late_deliveries: sim.late_deliveries,
        relocation_orders_total: sim.relocation_counts.iter().map(|(_, n)| n).sum(),
        arrival_checksum: checksum,
        zone_fulfilled,
        availability: sim.availability,
        relocation_counts: sim.relocation_counts,
        epoch_runtimes: sim.epoch_runtimes,
        events: sim.events,
        traces: sim.traces,
        flow_dump: sim.flow_dump,
        virtual_dump: sim.virtual_dump,
    })
}

/// Every request generated must terminate exactly once, nothing may be
/// delivered past its guarantee, and the cost accumulators must reconcile
/// with the priced events.
pub fn check_conservation(outcome: &DayOutcome) -> Result<(), String> {
    if outcome.delivered_by_courier + outcome.delivered_by_backup != outcome.requests_total {
        return Err(format!(
            "requests lost: {} + {} != {}",
            outcome.delivered_by_courier, outcome.delivered_by_backup, outcome.requests_total
        ));
    }
    if outcome.late_deliveries > 0 {
        return Err(format!("{} deliveries exceeded their guarantee", outcome.late_deliveries));
    }
    let priced: f64 = outcome.events.iter().map(|e| e.cost_delta_usd).sum();
    if (priced - outcome.tsc_usd).abs() > 0.01 {
        return Err(format!(
            "accounting mismatch: events {priced:.4} vs report {:.4}",
            outcome.tsc_usd
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ScenarioConfig {
        let mut c = ScenarioConfig::paper_small();
        c.width = 2.0;
        c.height = 2.0;
        c.zone_edge = 0.5;
        c.depot_x = 1.0;
        c.depot_y = 1.0;
        c.horizon = 120.0;
        c.dt = 10.0;
        c.request_rate = 0.08;
        c.courier_rate = 0.03;
        c.solver = SolverChoice::InsertionIntra;
        c.seeds = 1;
        c
    }

    #[test]
    fn empty_system_is_a_pure_time_advance() {
        let mut c = tiny_config();
        c.request_rate = 0.0;
        c.courier_rate = 0.0;
        let out = run_day(&c, 0).unwrap();
        assert_eq!(out.requests_total, 0);
        assert_eq!(out.tsc_usd, 0.0);
        check_conservation(&out).unwrap();
    }

    #[test]
    fn zero_horizon_gives_empty_outcome() {
        let mut c = tiny_config();
        c.horizon = 0.0;
        let out = run_day(&c, 0).unwrap();
        assert_eq!(out.requests_total, 0);
        assert!(out.events.is_empty());
    }

    #[test]
    fn conservation_and_accounting_hold_on_a_small_day() {
        let c = tiny_config();
        for seed in 0..3 {
            let out = run_day(&c, seed).unwrap();
            assert!(out.requests_total > 0, "want a non-trivial day");
            check_conservation(&out).unwrap();
        }
    }

    #[test]
    fn determinism_same_seed_same_outcome() {
        let c = tiny_config();
        let a = run_day(&c, 5).unwrap();
        let b = run_day(&c, 5).unwrap();
        assert_eq!(a.tsc_usd, b.tsc_usd);
        assert_eq!(a.events.len(), b.events.len());
        assert_eq!(a.arrival_checksum, b.arrival_checksum);
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t, y.t);
            assert_eq!(x.kind.name(), y.kind.name());
            assert_eq!(x.cost_delta_usd, y.cost_delta_usd);
        }
    }

    #[test]
    fn relocation_runs_without_breaking_conservation() {
        let mut c = tiny_config();
        c.relocation = true;
        c.request_rate = 0.12;
        c.courier_rate = 0.04;
        let out = run_day(&c, 2).unwrap();
        check_conservation(&out).unwrap();
    }

    #[test]
    fn mtamp_solver_day_is_conserved() {
        let mut c = tiny_config();
        c.solver = SolverChoice::Mtamp;
        c.horizon = 60.0;
        let out = run_day(&c, 1).unwrap();
        check_conservation(&out).unwrap();
    }
}
