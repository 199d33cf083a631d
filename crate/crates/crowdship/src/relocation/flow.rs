//! Zone-level supply/demand forecasting and the relocation sizing step.
//!
//! Right after each assignment, the per-zone counts of idle couriers and
//! open requests expected at the next epoch decide how many couriers should
//! move between zones. The integer program is solved exactly through its LP
//! relaxation, realized here as a min-cost flow on the zone graph; its
//! constraint matrix is totally unimodular, so the flow solution is the
//! integral optimum.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{CourierId, CourierState, Crowdsourcee, EpochSnapshot, Request, RequestId};
use crate::geometry::{travel_minutes, ServiceArea};
use crate::relocation::mincost::MinCostFlow;

/// Rounding rule for expected arrivals over the look-ahead window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingMode {
    HalfUp,
    Floor,
}

fn round_expected(x: f64, mode: RoundingMode) -> u32 {
    match mode {
        RoundingMode::HalfUp => (x + 0.5).floor().max(0.0) as u32,
        RoundingMode::Floor => x.floor().max(0.0) as u32,
    }
}

/// Per-zone supply and demand forecast for the next epoch, split into the
/// components it is built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneForecast {
    pub zones: usize,
    /// Idle couriers right after the assignment (n').
    pub idle_now: Vec<u32>,
    /// Couriers finishing deliveries or relocation trips before the next
    /// epoch, credited to their terminal zone (m).
    pub finishing: Vec<u32>,
    /// Expected newly arriving couriers (n_new).
    pub new_couriers: Vec<u32>,
    /// Unassigned requests deferred to the next epoch, by pickup zone (d').
    pub deferred: Vec<u32>,
    /// Expected newly arriving requests (d_new).
    pub new_requests: Vec<u32>,
}

impl ZoneForecast {
    /// n = n' + m + n_new
    pub fn supply(&self, r: usize) -> u32 {
        self.idle_now[r] + self.finishing[r] + self.new_couriers[r]
    }

    /// d = d' + d_new
    pub fn demand(&self, r: usize) -> u32 {
        self.deferred[r] + self.new_requests[r]
    }
}

/// Assemble the forecast from post-assignment courier states, the deferred
/// request pool, and the expected per-zone arrivals over `dt` minutes.
pub fn forecast(
    area: &ServiceArea,
    snapshot: &EpochSnapshot,
    deferred: &BTreeSet<RequestId>,
    dt: f64,
    expected_new_couriers_per_zone: f64,
    expected_new_requests_per_zone: f64,
    rounding: RoundingMode,
) -> ZoneForecast {
    let zones = area.num_zones();
    let mut fc = ZoneForecast {
        zones,
        idle_now: vec![0; zones],
        finishing: vec![0; zones],
        new_couriers: vec![round_expected(expected_new_couriers_per_zone, rounding); zones],
        deferred: vec![0; zones],
        new_requests: vec![round_expected(expected_new_requests_per_zone, rounding); zones],
    };
    let horizon = snapshot.now + dt;
    for courier in snapshot.couriers.values() {
        match courier.state {
            CourierState::Idle => {
                fc.idle_now[area.zone_of(courier.current_point).0] += 1;
            }
            CourierState::EnRoute => {
                if let Some(plan) = &courier.route {
                    if plan.is_empty() {
                        continue;
                    }
                    if plan.completion_time(snapshot.now) <= horizon && courier.exit_deadline >= horizon {
                        let last = plan.stops.last().unwrap();
                        let req = snapshot.request(last.request);
                        let point = match last.kind {
                            crate::domain::StopKind::Pickup => req.pickup,
                            crate::domain::StopKind::Delivery => req.delivery,
                        };
                        fc.finishing[area.zone_of(point).0] += 1;
                    }
                }
            }
            CourierState::Relocating => {
                if let Some(target) = courier.relocation_target {
                    let arrive = snapshot.now
                        + travel_minutes(courier.current_point.distance(target), courier.speed);
                    if arrive <= horizon && courier.exit_deadline >= horizon {
                        fc.finishing[area.zone_of(target).0] += 1;
                    }
                }
            }
            CourierState::Exited => {}
        }
    }
    for id in deferred {
        let req = snapshot.request(*id);
        fc.deferred[area.zone_of(req.pickup).0] += 1;
    }
    fc
}

/// Per-zone net excesses and the proportional redistribution targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RelocationTargets {
    /// n_exc: net courier excess per zone.
    pub supply_excess: Vec<u32>,
    /// d_exc: net request excess per zone.
    pub demand_excess: Vec<u32>,
    /// Fraction of system-wide excess requests sitting in each zone.
    pub theta: Vec<f64>,
    /// Desired post-relocation net excess per zone (can be negative).
    pub post_relocation_excess: Vec<i64>,
}

/// Net excesses and proportional targets. Returns `None` when there is no
/// courier excess or no request excess anywhere, in which case relocation is
/// skipped outright.
pub fn compute_targets(fc: &ZoneForecast) -> Option<RelocationTargets> {
    let zones = fc.zones;
    let mut supply_excess = vec![0u32; zones];
    let mut demand_excess = vec![0u32; zones];
    for r in 0..zones {
        let n = fc.supply(r) as i64;
        let d = fc.demand(r) as i64;
        supply_excess[r] = (n - d).max(0) as u32;
        demand_excess[r] = (d - n).max(0) as u32;
    }
    let total_supply: u32 = supply_excess.iter().sum();
    let total_demand: u32 = demand_excess.iter().sum();
    if total_supply == 0 || total_demand == 0 {
        return None;
    }
    let theta: Vec<f64> = demand_excess
        .iter()
        .map(|&d| d as f64 / total_demand as f64)
        .collect();
    let post_relocation_excess: Vec<i64> = (0..zones)
        .map(|r| (theta[r] * total_supply as f64).floor() as i64 - demand_excess[r] as i64)
        .collect();
    Some(RelocationTargets { supply_excess, demand_excess, theta, post_relocation_excess })
}

/// Zone-to-zone relocation counts with the cost of executing them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPlan {
    pub w: Vec<Vec<u32>>,
    pub cost: f64,
    /// Set when the program was infeasible and no relocation is performed.
    pub skipped: bool,
}

impl FlowPlan {
    pub fn zeros(zones: usize) -> Self {
        FlowPlan { w: vec![vec![0; zones]; zones], cost: 0.0, skipped: false }
    }

    pub fn skipped(zones: usize) -> Self {
        FlowPlan { w: vec![vec![0; zones]; zones], cost: 0.0, skipped: true }
    }

    pub fn outflow(&self, r: usize) -> u32 {
        self.w[r].iter().sum()
    }

    pub fn inflow(&self, s: usize) -> u32 {
        self.w.iter().map(|row| row[s]).sum()
    }

    pub fn total_moved(&self) -> u32 {
        self.w.iter().map(|row| row.iter().sum::<u32>()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.total_moved() == 0
    }
}

/// Relocation pay matrix: centroid-to-centroid travel time priced at the
/// courier rate. Diagonal is zero.
pub fn zone_relocation_costs(area: &ServiceArea, speed: f64, rate_per_hour: f64) -> Vec<Vec<f64>> {
    let zones = area.num_zones();
    let mut costs = vec![vec![0.0; zones]; zones];
    for r in 0..zones {
        let cr = area.centroid(crate::geometry::ZoneId(r));
        for s in 0..zones {
            if r == s {
                continue;
            }
            let cs = area.centroid(crate::geometry::ZoneId(s));
            costs[r][s] = travel_minutes(cr.distance(cs), speed) / 60.0 * rate_per_hour;
        }
    }
    costs
}

/// Solve the relocation program: minimize total relocation cost subject to
/// each zone ending at or above its post-relocation target, with outflows
/// capped by the idle couriers actually present. Returns an all-zero plan
/// when no zone violates its target, and a skipped plan when the program is
/// infeasible.
pub fn solve_flow(fc: &ZoneForecast, targets: &RelocationTargets, costs: &[Vec<f64>]) -> FlowPlan {
    let zones = fc.zones;
    // b_r: net inflow each zone must attract
    let mut demand_total = 0i64;
    let mut b = vec![0i64; zones];
    for r in 0..zones {
        let net = fc.supply(r) as i64 - fc.demand(r) as i64;
        b[r] = targets.post_relocation_excess[r] - net;
        if b[r] > 0 {
            demand_total += b[r];
        }
    }
    if demand_total == 0 {
        // nobody is short of the target: the cost-minimal answer is no move
        return FlowPlan::zeros(zones);
    }

    // nodes: balance 0..zones, gate zones..2*zones, source, sink
    let source = 2 * zones;
    let sink = 2 * zones + 1;
    let mut net = MinCostFlow::new(2 * zones + 2);
    let mut move_arcs = Vec::new();
    for r in 0..zones {
        net.add_arc(r, zones + r, fc.idle_now[r] as i64, 0.0);
        if b[r] > 0 {
            net.add_arc(r, sink, b[r], 0.0);
        } else if b[r] < 0 {
            net.add_arc(source, r, -b[r], 0.0);
        }
    }
    for r in 0..zones {
        for s in 0..zones {
            if r == s {
                continue;
            }
            let arc = net.add_arc(zones + r, s, demand_total, costs[r][s]);
            move_arcs.push((r, s, arc));
        }
    }
    let (flow, _) = net.send(source, sink, demand_total);
    if flow < demand_total {
        return FlowPlan::skipped(zones);
    }
    let mut plan = FlowPlan::zeros(zones);
    for (r, s, arc) in move_arcs {
        let units = net.flow_on(arc);
        if units > 0 {
            plan.w[r][s] = units as u32;
        }
    }
    // canonical summation order so the objective is reproducible
    let mut cost = 0.0;
    for r in 0..zones {
        for s in 0..zones {
            if plan.w[r][s] > 0 {
                cost += costs[r][s] * plan.w[r][s] as f64;
            }
        }
    }
    plan.cost = cost;
    plan
}

/// Whether relocation should run at all: courier excess and request excess
/// both exist, and at least one zone sits below its post-relocation target.
pub fn relocation_triggered(fc: &ZoneForecast, targets: &RelocationTargets) -> bool {
    (0..fc.zones).any(|r| {
        let net = fc.supply(r) as i64 - fc.demand(r) as i64;
        net < targets.post_relocation_excess[r]
    })
}

/// The idle couriers per zone keyed for relocation selection.
pub fn idle_by_zone(
    area: &ServiceArea,
    couriers: &BTreeMap<CourierId, Crowdsourcee>,
) -> BTreeMap<usize, Vec<CourierId>> {
    let mut map: BTreeMap<usize, Vec<CourierId>> = BTreeMap::new();
    for (id, c) in couriers {
        if c.state == CourierState::Idle {
            map.entry(area.zone_of(c.current_point).0).or_default().push(*id);
        }
    }
    map
}

/// Zone of a request, defined by its pickup node.
pub fn request_zone(area: &ServiceArea, request: &Request) -> usize {
    area.zone_of(request.pickup).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forecast_of(supply: &[u32], demand: &[u32]) -> ZoneForecast {
        let zones = supply.len();
        ZoneForecast {
            zones,
            idle_now: supply.to_vec(),
            finishing: vec![0; zones],
            new_couriers: vec![0; zones],
            deferred: demand.to_vec(),
            new_requests: vec![0; zones],
        }
    }

    #[test]
    fn three_zone_targets_match_hand_evaluation() {
        let fc = forecast_of(&[3, 0, 1], &[0, 2, 3]);
        let t = compute_targets(&fc).unwrap();
        assert_eq!(t.supply_excess, vec![3, 0, 0]);
        assert_eq!(t.demand_excess, vec![0, 2, 2]);
        assert!((t.theta[0] - 0.0).abs() < 1e-12);
        assert!((t.theta[1] - 0.5).abs() < 1e-12);
        assert!((t.theta[2] - 0.5).abs() < 1e-12);
        assert_eq!(t.post_relocation_excess, vec![0, -1, -1]);
    }

    #[test]
    fn balanced_zones_skip_relocation() {
        let fc = forecast_of(&[2, 1, 0], &[2, 1, 0]);
        assert!(compute_targets(&fc).is_none());
    }

    #[test]
    fn three_zone_flow_moves_two_couriers() {
        let fc = forecast_of(&[3, 0, 1], &[0, 2, 3]);
        let t = compute_targets(&fc).unwrap();
        assert!(relocation_triggered(&fc, &t));
        // centroid-like line costs: zones at x = 0, 1, 2
        let costs = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let plan = solve_flow(&fc, &t, &costs);
        assert!(!plan.skipped);
        assert_eq!(plan.total_moved(), 2);
        assert_eq!(plan.inflow(1), 1);
        assert_eq!(plan.inflow(2), 1);
        assert_eq!(plan.outflow(0), 2);
        assert!((plan.cost - 3.0).abs() < 1e-12);
    }

    #[test]
    fn floor_slack_still_meets_targets() {
        let fc = forecast_of(&[2, 1, 0, 0], &[0, 0, 1, 1]);
        // supply excess 3 against demand excess (1,1): theta = (.5,.5),
        // targets floor(1.5) - 1 = 0 for both deficit zones
        let t = compute_targets(&fc).unwrap();
        assert_eq!(t.post_relocation_excess[2], 0);
        assert!(relocation_triggered(&fc, &t));
        let costs = vec![vec![1.0; 4]; 4];
        let plan = solve_flow(&fc, &t, &costs);
        assert_eq!(plan.total_moved(), 2);
        assert_eq!(plan.inflow(2), 1);
        assert_eq!(plan.inflow(3), 1);
    }

    #[test]
    fn single_supplier_ships_all_its_excess_when_targets_are_tight() {
        let fc = forecast_of(&[4, 0], &[0, 6]);
        let t = compute_targets(&fc).unwrap();
        let costs = vec![vec![0.0, 2.5], vec![2.5, 0.0]];
        let plan = solve_flow(&fc, &t, &costs);
        assert!(!plan.skipped);
        assert_eq!(plan.outflow(0), 4);
        assert_eq!(plan.inflow(0), 0);
        assert_eq!(plan.outflow(1), 0);
    }

    #[test]
    fn infeasible_program_is_skipped_not_fatal() {
        // the deficit zone needs inflow but the supplier's couriers are all
        // expected arrivals, not idle ones, so the gate is shut
        let fc = ZoneForecast {
            zones: 2,
            idle_now: vec![0, 0],
            finishing: vec![3, 0],
            new_couriers: vec![0, 0],
            deferred: vec![0, 2],
            new_requests: vec![0, 0],
        };
        let t = compute_targets(&fc).unwrap();
        assert!(relocation_triggered(&fc, &t));
        let costs = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let plan = solve_flow(&fc, &t, &costs);
        assert!(plan.skipped);
        assert!(plan.is_zero());
    }
}
