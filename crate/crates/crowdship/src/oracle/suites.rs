//! Randomized validation suites: each one checks a production component
//! against an independent oracle over many generated instances and reports
//! case and violation counts. Shared by the `validate` command and the
//! acceptance tests.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{CostParams, CourierId, Request, RequestId, RequestStatus, Stop};
use crate::geometry::Point;
use crate::oracle::ilp::{
    net_inflow_requirements, relocation_ilp_direct, relocation_ilp_enumerate, relocation_lp,
};
use crate::oracle::mkp_enum::enumerate_mkp;
use crate::relocation::cluster::Cluster;
use crate::relocation::flow::{
    compute_targets, relocation_triggered, solve_flow, FlowPlan, RelocationTargets, ZoneForecast,
};
use crate::relocation::jobs::FeasibleJob;
use crate::relocation::mkp::{build_instance, solve_mkp, VirtualObjective};
use crate::mtamp::{horizontal_steps, phase_schedule};

/// Result of one validation suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    pub secs: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_forecast<R: Rng>(zones: usize, max_entry: u32, rng: &mut R) -> ZoneForecast {
    let part = (max_entry / 3).max(1);
    ZoneForecast {
        zones,
        idle_now: (0..zones).map(|_| rng.gen_range(0..=part)).collect(),
        finishing: (0..zones).map(|_| rng.gen_range(0..=part / 2 + 1)).collect(),
        new_couriers: (0..zones).map(|_| rng.gen_range(0..=1)).collect(),
        deferred: (0..zones).map(|_| rng.gen_range(0..=part)).collect(),
        new_requests: (0..zones).map(|_| rng.gen_range(0..=1)).collect(),
    }
}

fn euclidean_costs<R: Rng>(zones: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let points: Vec<Point> =
        (0..zones).map(|_| Point::new(rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0)).collect();
    (0..zones)
        .map(|r| (0..zones).map(|s| if r == s { 0.0 } else { points[r].distance(points[s]) }).collect())
        .collect()
}

/// Integer Manhattan costs from distinct grid points: metric and exactly
/// representable, so objective comparisons are exact.
fn manhattan_costs<R: Rng>(zones: usize, rng: &mut R) -> Vec<Vec<f64>> {
    loop {
        let points: Vec<(i64, i64)> =
            (0..zones).map(|_| (rng.gen_range(0..=15), rng.gen_range(0..=15))).collect();
        let distinct = points
            .iter()
            .enumerate()
            .all(|(i, p)| points.iter().skip(i + 1).all(|q| p != q));
        if !distinct {
            continue;
        }
        return (0..zones)
            .map(|r| {
                (0..zones)
                    .map(|s| {
                        ((points[r].0 - points[s].0).abs() + (points[r].1 - points[s].1).abs())
                            as f64
                    })
                    .collect()
            })
            .collect();
    }
}

fn remark_violations(fc: &ZoneForecast, targets: &RelocationTargets, plan: &FlowPlan) -> usize {
    let mut violations = 0;
    let requirements = net_inflow_requirements(fc, targets);
    let demand_total: i64 = requirements.iter().filter(|&&b| b > 0).sum();
    let supply_total: i64 = targets.supply_excess.iter().map(|&v| v as i64).sum();
    let tight = demand_total == supply_total;
    for r in 0..fc.zones {
        let net = fc.supply(r) as i64 - fc.demand(r) as i64;
        let inflow = plan.inflow(r) as i64;
        let outflow = plan.outflow(r) as i64;
        // the solved plan satisfies the program itself
        if net + inflow - outflow < targets.post_relocation_excess[r] {
            violations += 1;
        }
        if outflow > fc.idle_now[r] as i64 {
            violations += 1;
        }
        if targets.supply_excess[r] > 0 {
            // a courier-excess zone only sends, never receives, at most its
            // excess, and exactly its excess when the targets are tight
            if targets.post_relocation_excess[r] != 0 {
                violations += 1;
            }
            if inflow != 0 {
                violations += 1;
            }
            if outflow > targets.supply_excess[r] as i64 {
                violations += 1;
            }
            if tight && outflow != targets.supply_excess[r] as i64 {
                violations += 1;
            }
        }
        if targets.demand_excess[r] > 0 {
            // a request-excess zone only receives
            if outflow != 0 {
                violations += 1;
            }
            if supply_total < targets.demand_excess.iter().map(|&v| v as i64).sum::<i64>()
                && net + inflow - outflow > 0
            {
                violations += 1;
            }
        }
    }
    violations
}

/// Remarks on solved relocation plans over random forecasts.
pub fn validate_remarks(target_cases: usize, max_zones: usize, max_entry: u32, seed: u64) -> SuiteOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    let mut violations = 0;
    let mut attempts = 0;
    while cases < target_cases && attempts < target_cases * 100 {
        attempts += 1;
        let zones = rng.gen_range(2..=max_zones);
        let fc = random_forecast(zones, max_entry, &mut rng);
        let Some(targets) = compute_targets(&fc) else { continue };
        if !relocation_triggered(&fc, &targets) {
            continue;
        }
        let costs = euclidean_costs(zones, &mut rng);
        let plan = solve_flow(&fc, &targets, &costs);
        if plan.skipped {
            continue;
        }
        cases += 1;
        violations += remark_violations(&fc, &targets, &plan);
    }
    SuiteOutcome { name: "relocation-remarks", cases, violations, secs: started.elapsed().as_secs_f64() }
}

/// LP-relaxation integrality and agreement with brute-force integer search.
pub fn validate_tum(target_cases: usize, seed: u64) -> SuiteOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    let mut violations = 0;
    let mut attempts = 0;
    while cases < target_cases && attempts < target_cases * 100 {
        attempts += 1;
        let zones = rng.gen_range(2..=6usize);
        let fc = random_forecast(zones, 6, &mut rng);
        let Some(targets) = compute_targets(&fc) else { continue };
        if !relocation_triggered(&fc, &targets) {
            continue;
        }
        let costs = manhattan_costs(zones, &mut rng);
        let requirements = net_inflow_requirements(&fc, &targets);
        let plan = solve_flow(&fc, &targets, &costs);
        let lp = relocation_lp(&requirements, &fc.idle_now, &costs);
        if plan.skipped {
            // every route must agree on infeasibility
            if lp.is_some() {
                violations += 1;
                cases += 1;
            }
            continue;
        }
        cases += 1;
        let Some((x, lp_obj)) = lp else {
            violations += 1;
            continue;
        };
        // integrality of the LP vertex before rounding
        let max_frac = x
            .iter()
            .map(|v| (v - v.round()).abs())
            .fold(0.0_f64, f64::max);
        if max_frac >= 1e-9 {
            violations += 1;
        }
        let lp_rounded = lp_obj.round();
        if (lp_obj - lp_rounded).abs() > 1e-6 {
            violations += 1;
        }
        let ilp = if zones <= 4 {
            relocation_ilp_enumerate(&requirements, &fc.idle_now, &costs)
        } else {
            relocation_ilp_direct(&requirements, &fc.idle_now, &costs)
        };
        let Some(ilp_obj) = ilp else {
            violations += 1;
            continue;
        };
        // all integer-valued, so exact equality is meaningful
        if plan.cost != ilp_obj || lp_rounded != ilp_obj {
            violations += 1;
        }
    }
    SuiteOutcome { name: "tum-integrality", cases, violations, secs: started.elapsed().as_secs_f64() }
}

fn random_mkp_inputs<R: Rng>(
    rng: &mut R,
) -> (Vec<FeasibleJob>, Vec<Cluster>, Vec<Vec<bool>>, BTreeMap<RequestId, f64>, BTreeMap<RequestId, Request>) {
    let universe = 8u64;
    let pool: BTreeMap<RequestId, Request> = (0..universe)
        .map(|i| {
            let pickup = Point::new(rng.gen::<f64>() * 6.0, rng.gen::<f64>() * 6.0);
            let delivery = Point::new(rng.gen::<f64>() * 6.0, rng.gen::<f64>() * 6.0);
            (
                RequestId(i),
                Request {
                    id: RequestId(i),
                    pickup,
                    delivery,
                    release_time: 0.0,
                    guarantee: 120.0,
                    weight: 2.0 + rng.gen::<f64>() * 5.0,
                    status: RequestStatus::Pending,
                },
            )
        })
        .collect();
    let n_jobs = rng.gen_range(1..=12usize);
    let jobs: Vec<FeasibleJob> = (0..n_jobs)
        .map(|_| {
            let size = rng.gen_range(1..=3usize);
            let mut requests = std::collections::BTreeSet::new();
            while requests.len() < size {
                requests.insert(RequestId(rng.gen_range(0..universe)));
            }
            let mut stops = Vec::new();
            for r in &requests {
                stops.push(Stop::pickup(*r));
                stops.push(Stop::delivery(*r));
            }
            FeasibleJob { stops, requests, duration: rng.gen::<f64>() * 60.0 }
        })
        .collect();
    let n_clusters = rng.gen_range(1..=4usize);
    let clusters: Vec<Cluster> = (0..n_clusters)
        .map(|k| {
            let size = rng.gen_range(1..=2usize);
            Cluster {
                members: (0..size).map(|i| CourierId((k * 10 + i) as u64)).collect(),
                centroid_point: Point::new(rng.gen::<f64>() * 6.0, rng.gen::<f64>() * 6.0),
                centroid_budget: 30.0 + rng.gen::<f64>() * 90.0,
            }
        })
        .collect();
    let feasible: Vec<Vec<bool>> = (0..n_jobs)
        .map(|_| (0..n_clusters).map(|_| rng.gen::<f64>() < 0.85).collect())
        .collect();
    // quarter-dollar backup costs keep every objective value exactly
    // representable, so solver and enumeration can be compared bit for bit
    let backup_costs: BTreeMap<RequestId, f64> =
        (0..universe).map(|i| (RequestId(i), rng.gen_range(4..=60) as f64 * 0.25)).collect();
    (jobs, clusters, feasible, backup_costs, pool)
}

/// Exact agreement of the knapsack solver with exhaustive enumeration, for
/// both objectives.
pub fn validate_mkp(target_cases: usize, seed: u64) -> SuiteOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = CostParams::default();
    let mut cases = 0;
    let mut violations = 0;
    while cases < target_cases {
        let (jobs, clusters, feasible, backup_costs, pool) = random_mkp_inputs(&mut rng);
        cases += 1;
        for objective in [VirtualObjective::Count, VirtualObjective::Benefit] {
            let mut inst =
                build_instance(&jobs, &clusters, &feasible, objective, &backup_costs, &pool, 10.0, &params);
            // quantize to quarter dollars: sums of dyadic values are exact in
            // f64, so solver and enumeration must agree bit for bit
            for row in &mut inst.values {
                for v in row.iter_mut().flatten() {
                    *v = (*v * 4.0).round() / 4.0;
                }
            }
            let solved = solve_mkp(&inst);
            let exact = enumerate_mkp(&inst);
            if solved.objective != exact {
                violations += 1;
            }
            if !crate::relocation::mkp::assignment_satisfies_constraints(&inst, &solved) {
                violations += 1;
            }
        }
    }
    SuiteOutcome { name: "mkp-oracle", cases, violations, secs: started.elapsed().as_secs_f64() }
}

/// Phase-schedule arithmetic over random (delta, eta, memory) triples.
pub fn validate_schedule(target_cases: usize, seed: u64) -> SuiteOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..target_cases {
        let delta = rng.gen_range(1..=500usize);
        let eta = rng.gen_range(2..=12usize);
        let s = phase_schedule(delta, eta);
        if s.q_star != delta.div_ceil(eta) {
            violations += 1;
        }
        if *s.mu.last().unwrap() != delta {
            violations += 1;
        }
        if s.mu.windows(2).any(|w| w[0] >= w[1]) {
            violations += 1;
        }
        let am = rng.gen_range(0..=200usize);
        let steps = horizontal_steps(am, s.d_first);
        if steps.iter().sum::<usize>() != am {
            violations += 1;
        }
    }
    SuiteOutcome {
        name: "phase-schedule",
        cases: target_cases,
        violations,
        secs: started.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_remark_suite_is_clean() {
        let out = validate_remarks(60, 6, 10, 11);
        assert_eq!(out.cases, 60);
        assert_eq!(out.violations, 0, "remark violations detected");
    }

    #[test]
    fn small_tum_suite_is_clean() {
        let out = validate_tum(40, 13);
        assert_eq!(out.cases, 40);
        assert_eq!(out.violations, 0, "tum violations detected");
    }

    #[test]
    fn small_mkp_suite_is_clean() {
        let out = validate_mkp(25, 17);
        assert_eq!(out.violations, 0, "mkp mismatches detected");
    }

    #[test]
    fn small_schedule_suite_is_clean() {
        let out = validate_schedule(200, 19);
        assert_eq!(out.violations, 0);
    }
}
