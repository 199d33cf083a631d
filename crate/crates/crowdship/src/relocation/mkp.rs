//! The virtual assignment of feasible jobs to courier clusters, an exact
//! multiple-knapsack solve.
//!
//! Constraints: a cluster takes at most as many jobs as it has couriers,
//! every job goes to at most one cluster, and every request is covered by at
//! most one selected job. Solved by depth-first branch and bound with an
//! optimistic per-job bound; instances stay small because jobs are
//! pre-filtered per cluster.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{CostParams, Request, RequestId};
use crate::geometry::travel_minutes;
use crate::relocation::cluster::Cluster;
use crate::relocation::jobs::FeasibleJob;

/// Objective of the virtual assignment: cover as many requests as possible,
/// or maximize the backup-cost savings net of job execution cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VirtualObjective {
    Count,
    Benefit,
}

/// A solved assignment: selected (job, cluster) pairs and the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualAssignment {
    pub selected: Vec<(usize, usize)>,
    pub objective: f64,
}

impl VirtualAssignment {
    pub fn empty() -> Self {
        VirtualAssignment { selected: Vec::new(), objective: 0.0 }
    }

    pub fn job_of_cluster(&self, cluster: usize) -> Vec<usize> {
        self.selected.iter().filter(|(_, k)| *k == cluster).map(|(j, _)| *j).collect()
    }
}

/// Value matrix plus constraint data for one solve.
#[derive(Debug, Clone)]
pub struct MkpInstance {
    /// `values[j][k]`: value of assigning job j to cluster k, `None` when
    /// the pairing is infeasible.
    pub values: Vec<Vec<Option<f64>>>,
    pub job_requests: Vec<BTreeSet<RequestId>>,
    /// Courier count per cluster.
    pub capacity: Vec<u32>,
}

/// Execution cost of a job for a cluster: ride from the centroid to the
/// first pickup, then through the whole routing, at the courier rate.
pub fn job_cluster_cost(
    job: &FeasibleJob,
    cluster: &Cluster,
    pool: &BTreeMap<RequestId, Request>,
    speed: f64,
    params: &CostParams,
) -> f64 {
    let mut pos = cluster.centroid_point;
    let mut minutes = 0.0;
    for stop in &job.stops {
        let req = &pool[&stop.request];
        let point = match stop.kind {
            crate::domain::StopKind::Pickup => req.pickup,
            crate::domain::StopKind::Delivery => req.delivery,
        };
        minutes += travel_minutes(pos.distance(point), speed);
        pos = point;
    }
    minutes / 60.0 * params.crowdsourcee_rate
}

/// Assemble the instance for a set of jobs and clusters. `feasible[j][k]`
/// flags which pairings are allowed; `backup_costs` carries the per-request
/// cost of falling back to a backup vehicle.
#[allow(clippy::too_many_arguments)]
pub fn build_instance(
    jobs: &[FeasibleJob],
    clusters: &[Cluster],
    feasible: &[Vec<bool>],
    objective: VirtualObjective,
    backup_costs: &BTreeMap<RequestId, f64>,
    pool: &BTreeMap<RequestId, Request>,
    speed: f64,
    params: &CostParams,
) -> MkpInstance {
    let values = jobs
        .iter()
        .enumerate()
        .map(|(j, job)| {
            clusters
                .iter()
                .enumerate()
                .map(|(k, cluster)| {
                    if !feasible[j][k] {
                        return None;
                    }
                    match objective {
                        VirtualObjective::Count => Some(job.requests.len() as f64),
                        VirtualObjective::Benefit => {
                            let saved: f64 =
                                job.requests.iter().map(|r| backup_costs[r]).sum();
                            Some(saved - job_cluster_cost(job, cluster, pool, speed, params))
                        }
                    }
                })
                .collect()
        })
        .collect();
    MkpInstance {
        values,
        job_requests: jobs.iter().map(|j| j.requests.clone()).collect(),
        capacity: clusters.iter().map(|c| c.size() as u32).collect(),
    }
}

struct Search<'a> {
    inst: &'a MkpInstance,
    best_value: f64,
    best_selected: Vec<(usize, usize)>,
    current: Vec<(usize, usize)>,
    remaining_capacity: Vec<u32>,
    used_requests: BTreeSet<RequestId>,
    /// Optimistic value of jobs j.. ignoring capacity and conflicts.
    suffix_bound: Vec<f64>,
    order: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, depth: usize, value: f64) {
        if value > self.best_value + 1e-12 {
            self.best_value = value;
            self.best_selected = self.current.clone();
        }
        if depth == self.order.len() {
            return;
        }
        if value + self.suffix_bound[depth] <= self.best_value + 1e-12 {
            return;
        }
        let job = self.order[depth];
        // try each feasible cluster
        let conflict = self.inst.job_requests[job]
            .iter()
            .any(|r| self.used_requests.contains(r));
        if !conflict {
            for (k, v) in self.inst.values[job].iter().enumerate() {
                let Some(v) = v else { continue };
                if self.remaining_capacity[k] == 0 {
                    continue;
                }
                self.remaining_capacity[k] -= 1;
                for r in &self.inst.job_requests[job] {
                    self.used_requests.insert(*r);
                }
                self.current.push((job, k));
                self.dfs(depth + 1, value + v);
                self.current.pop();
                for r in &self.inst.job_requests[job] {
                    self.used_requests.remove(r);
                }
                self.remaining_capacity[k] += 1;
            }
        }
        // skip the job
        self.dfs(depth + 1, value);
    }
}

/// Exact solve. The empty assignment is always allowed, so the optimum is
/// never negative.
pub fn solve_mkp(inst: &MkpInstance) -> VirtualAssignment {
    let jobs = inst.values.len();
    let best_of: Vec<f64> = (0..jobs)
        .map(|j| {
            inst.values[j]
                .iter()
                .flatten()
                .fold(0.0_f64, |acc, &v| acc.max(v))
        })
        .collect();
    let mut order: Vec<usize> = (0..jobs).collect();
    order.sort_by(|&a, &b| best_of[b].partial_cmp(&best_of[a]).unwrap().then(a.cmp(&b)));
    let mut suffix_bound = vec![0.0; jobs + 1];
    for i in (0..jobs).rev() {
        suffix_bound[i] = suffix_bound[i + 1] + best_of[order[i]];
    }
    let mut search = Search {
        inst,
        best_value: 0.0,
        best_selected: Vec::new(),
        current: Vec::new(),
        remaining_capacity: inst.capacity.clone(),
        used_requests: BTreeSet::new(),
        suffix_bound,
        order,
    };
    search.dfs(0, 0.0);
    let mut selected = search.best_selected;
    selected.sort();
    VirtualAssignment { selected, objective: search.best_value }
}

/// Convenience entry point matching the full operation: build the instance
/// and solve it.
#[allow(clippy::too_many_arguments)]
pub fn solve_virtual(
    jobs: &[FeasibleJob],
    clusters: &[Cluster],
    feasible: &[Vec<bool>],
    objective: VirtualObjective,
    backup_costs: &BTreeMap<RequestId, f64>,
    pool: &BTreeMap<RequestId, Request>,
    speed: f64,
    params: &CostParams,
) -> VirtualAssignment {
    if jobs.is_empty() || clusters.is_empty() {
        return VirtualAssignment::empty();
    }
    let inst = build_instance(jobs, clusters, feasible, objective, backup_costs, pool, speed, params);
    solve_mkp(&inst)
}

/// Check constraints (cluster capacity, one cluster per job, one cluster per
/// request) on a solved assignment.
pub fn assignment_satisfies_constraints(inst: &MkpInstance, assignment: &VirtualAssignment) -> bool {
    let mut per_cluster: BTreeMap<usize, u32> = BTreeMap::new();
    let mut jobs_seen = BTreeSet::new();
    let mut requests_seen = BTreeSet::new();
    for (j, k) in &assignment.selected {
        if inst.values[*j][*k].is_none() {
            return false;
        }
        if !jobs_seen.insert(*j) {
            return false;
        }
        *per_cluster.entry(*k).or_insert(0) += 1;
        for r in &inst.job_requests[*j] {
            if !requests_seen.insert(*r) {
                return false;
            }
        }
    }
    per_cluster.iter().all(|(k, n)| *n <= inst.capacity[*k])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(values: Vec<Vec<Option<f64>>>, requests: Vec<Vec<u64>>, capacity: Vec<u32>) -> MkpInstance {
        MkpInstance {
            values,
            job_requests: requests
                .into_iter()
                .map(|v| v.into_iter().map(RequestId).collect())
                .collect(),
            capacity,
        }
    }

    #[test]
    fn dominant_singleton_is_selected() {
        let i = inst(vec![vec![Some(5.0)]], vec![vec![0]], vec![1]);
        let a = solve_mkp(&i);
        assert_eq!(a.selected, vec![(0, 0)]);
        assert!((a.objective - 5.0).abs() < 1e-12);
    }

    #[test]
    fn shared_request_blocks_double_selection() {
        // two jobs share request 7; cluster could hold both by capacity
        let i = inst(
            vec![vec![Some(3.0)], vec![Some(4.0)]],
            vec![vec![7], vec![7, 8]],
            vec![2],
        );
        let a = solve_mkp(&i);
        assert_eq!(a.selected.len(), 1);
        assert!((a.objective - 4.0).abs() < 1e-12);
        assert!(assignment_satisfies_constraints(&i, &a));
    }

    #[test]
    fn capacity_limits_jobs_per_cluster() {
        let i = inst(
            vec![vec![Some(2.0)], vec![Some(2.0)], vec![Some(2.0)]],
            vec![vec![1], vec![2], vec![3]],
            vec![2],
        );
        let a = solve_mkp(&i);
        assert_eq!(a.selected.len(), 2);
        assert!((a.objective - 4.0).abs() < 1e-12);
    }

    #[test]
    fn negative_values_are_left_unselected() {
        let i = inst(vec![vec![Some(-3.0)]], vec![vec![0]], vec![1]);
        let a = solve_mkp(&i);
        assert!(a.selected.is_empty());
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn empty_inputs_give_empty_assignment() {
        let i = inst(vec![], vec![], vec![]);
        let a = solve_mkp(&i);
        assert!(a.selected.is_empty());
        assert_eq!(a.objective, 0.0);
    }
}
