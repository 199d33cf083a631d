//! Exhaustive enumeration of the virtual-assignment knapsack: every job is
//! tried in every feasible cluster and left out, with only the hard
//! constraints pruning branches. Exponential and exact.

use std::collections::BTreeSet;

use crate::domain::RequestId;
use crate::relocation::mkp::MkpInstance;

pub fn enumerate_mkp(inst: &MkpInstance) -> f64 {
    fn go(
        inst: &MkpInstance,
        job: usize,
        value: f64,
        capacity: &mut Vec<u32>,
        used: &mut BTreeSet<RequestId>,
        best: &mut f64,
    ) {
        if job == inst.values.len() {
            if value > *best {
                *best = value;
            }
            return;
        }
        // leave the job out
        go(inst, job + 1, value, capacity, used, best);
        if inst.job_requests[job].iter().any(|r| used.contains(r)) {
            return;
        }
        for k in 0..capacity.len() {
            let Some(v) = inst.values[job][k] else { continue };
            if capacity[k] == 0 {
                continue;
            }
            capacity[k] -= 1;
            for r in &inst.job_requests[job] {
                used.insert(*r);
            }
            go(inst, job + 1, value + v, capacity, used, best);
            for r in &inst.job_requests[job] {
                used.remove(r);
            }
            capacity[k] += 1;
        }
    }
    let mut best = 0.0;
    let mut capacity = inst.capacity.clone();
    let mut used = BTreeSet::new();
    go(inst, 0, 0.0, &mut capacity, &mut used, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relocation::mkp::solve_mkp;

    #[test]
    fn enumeration_matches_solver_on_a_conflict_instance() {
        let inst = MkpInstance {
            values: vec![
                vec![Some(4.0), None],
                vec![Some(3.0), Some(5.0)],
                vec![None, Some(2.0)],
            ],
            job_requests: vec![
                [RequestId(1), RequestId(2)].into_iter().collect(),
                [RequestId(2)].into_iter().collect(),
                [RequestId(3)].into_iter().collect(),
            ],
            capacity: vec![1, 1],
        };
        let exact = enumerate_mkp(&inst);
        let solved = solve_mkp(&inst);
        assert_eq!(exact, solved.objective);
        // job 0 takes cluster 0 and job 2 takes cluster 1; job 1 conflicts on request 2
        assert!((exact - 6.0).abs() < 1e-12);
    }
}
