//! Brute-force integer solutions of the relocation program, and the LP
//! relaxation over the explicit constraint matrix.
//!
//! The program, per zone r: net inflow of w must bring the zone to its
//! post-relocation target (out_r - in_r <= -req_r), and gross outflow may not
//! exceed the idle couriers present (out_r <= gate_r).

use crate::oracle::simplex::{solve_min_lp, LpOutcome};
use crate::relocation::flow::{RelocationTargets, ZoneForecast};

/// Required net inflow per zone (positive means the zone must attract flow).
pub fn net_inflow_requirements(fc: &ZoneForecast, targets: &RelocationTargets) -> Vec<i64> {
    (0..fc.zones)
        .map(|r| targets.post_relocation_excess[r] - (fc.supply(r) as i64 - fc.demand(r) as i64))
        .collect()
}

/// Index of variable w[r][s] in the flattened (r != s) variable vector.
fn var_index(zones: usize, r: usize, s: usize) -> usize {
    debug_assert!(r != s);
    r * (zones - 1) + if s > r { s - 1 } else { s }
}

/// The LP relaxation solved over the explicit constraint matrix. Returns the
/// flattened solution and objective, or `None` when infeasible.
pub fn relocation_lp(
    requirements: &[i64],
    gates: &[u32],
    costs: &[Vec<f64>],
) -> Option<(Vec<f64>, f64)> {
    let zones = requirements.len();
    let n = zones * (zones - 1);
    let mut c = vec![0.0; n];
    for r in 0..zones {
        for s in 0..zones {
            if r != s {
                c[var_index(zones, r, s)] = costs[r][s];
            }
        }
    }
    // rows 0..zones: out_r - in_r <= -req_r; rows zones..2*zones: out_r <= gate_r
    let mut a = vec![vec![0.0; n]; 2 * zones];
    let mut b = vec![0.0; 2 * zones];
    for r in 0..zones {
        for s in 0..zones {
            if r == s {
                continue;
            }
            a[r][var_index(zones, r, s)] = 1.0;
            a[r][var_index(zones, s, r)] = -1.0;
            a[zones + r][var_index(zones, r, s)] = 1.0;
        }
        b[r] = -(requirements[r] as f64);
        b[zones + r] = gates[r] as f64;
    }
    match solve_min_lp(&c, &a, &b) {
        LpOutcome::Optimal { x, objective } => Some((x, objective)),
        _ => None,
    }
}

/// Exhaustive integer search over every variable, depth-first with partial
/// cost pruning. Exact on any instance; exponential, so keep zones small.
pub fn relocation_ilp_enumerate(
    requirements: &[i64],
    gates: &[u32],
    costs: &[Vec<f64>],
) -> Option<f64> {
    let zones = requirements.len();
    let demand_total: i64 = requirements.iter().filter(|&&b| b > 0).sum();
    if demand_total == 0 {
        return Some(0.0);
    }
    let mut vars = Vec::new();
    for r in 0..zones {
        for s in 0..zones {
            if r != s {
                vars.push((r, s));
            }
        }
    }
    // cheap arcs first so the incumbent tightens early
    vars.sort_by(|x, y| costs[x.0][x.1].partial_cmp(&costs[y.0][y.1]).unwrap());

    struct Dfs<'a> {
        vars: &'a [(usize, usize)],
        costs: &'a [Vec<f64>],
        gates: &'a [u32],
        requirements: &'a [i64],
        demand_total: i64,
        outflow: Vec<i64>,
        inflow: Vec<i64>,
        best: Option<f64>,
    }
    impl Dfs<'_> {
        fn feasible_leaf(&self) -> bool {
            self.requirements
                .iter()
                .enumerate()
                .all(|(r, &req)| self.inflow[r] - self.outflow[r] >= req)
        }
        fn go(&mut self, depth: usize, cost: f64) {
            if let Some(b) = self.best {
                if cost >= b - 1e-12 {
                    return;
                }
            }
            if depth == self.vars.len() {
                if self.feasible_leaf() {
                    self.best = Some(cost);
                }
                return;
            }
            let (r, s) = self.vars[depth];
            let cap = (self.gates[r] as i64 - self.outflow[r]).min(self.demand_total);
            for units in 0..=cap.max(0) {
                self.outflow[r] += units;
                self.inflow[s] += units;
                self.go(depth + 1, cost + units as f64 * self.costs[r][s]);
                self.outflow[r] -= units;
                self.inflow[s] -= units;
            }
        }
    }
    let mut dfs = Dfs {
        vars: &vars,
        costs,
        gates,
        requirements,
        demand_total,
        outflow: vec![0; zones],
        inflow: vec![0; zones],
        best: None,
    };
    dfs.go(0, 0.0);
    dfs.best
}

/// Integer enumeration restricted to direct supplier-to-demander shipping.
/// Exact whenever the cost matrix is a metric (triangle inequality), because
/// any optimal plan's transshipment paths can then be shortcut arc by arc
/// without raising cost or violating gates.
pub fn relocation_ilp_direct(
    requirements: &[i64],
    gates: &[u32],
    costs: &[Vec<f64>],
) -> Option<f64> {
    let zones = requirements.len();
    let senders: Vec<(usize, i64)> = (0..zones)
        .filter(|&r| requirements[r] < 0)
        .map(|r| (r, (-requirements[r]).min(gates[r] as i64)))
        .collect();
    let receivers: Vec<(usize, i64)> = (0..zones)
        .filter(|&r| requirements[r] > 0)
        .map(|r| (r, requirements[r]))
        .collect();
    if receivers.is_empty() {
        return Some(0.0);
    }
    let supply: i64 = senders.iter().map(|(_, c)| c).sum();
    let demand: i64 = receivers.iter().map(|(_, d)| d).sum();
    if supply < demand {
        return None;
    }

    struct Dfs<'a> {
        senders: &'a [(usize, i64)],
        receivers: &'a [(usize, i64)],
        costs: &'a [Vec<f64>],
        caps: Vec<i64>,
        best: Option<f64>,
    }
    impl Dfs<'_> {
        fn fill(&mut self, rcv: usize, sender_ix: usize, remaining: i64, cost: f64) {
            if let Some(b) = self.best {
                if cost >= b - 1e-12 {
                    return;
                }
            }
            if remaining == 0 {
                self.next_receiver(rcv + 1, cost);
                return;
            }
            if sender_ix == self.senders.len() {
                return;
            }
            let (zone, _) = self.senders[sender_ix];
            let take_max = self.caps[sender_ix].min(remaining);
            for take in 0..=take_max {
                self.caps[sender_ix] -= take;
                self.fill(
                    rcv,
                    sender_ix + 1,
                    remaining - take,
                    cost + take as f64 * self.costs[zone][self.receivers[rcv].0],
                );
                self.caps[sender_ix] += take;
            }
        }
        fn next_receiver(&mut self, rcv: usize, cost: f64) {
            if rcv == self.receivers.len() {
                let better = self.best.map(|b| cost < b).unwrap_or(true);
                if better {
                    self.best = Some(cost);
                }
                return;
            }
            self.fill(rcv, 0, self.receivers[rcv].1, cost);
        }
    }
    let caps: Vec<i64> = senders.iter().map(|(_, c)| *c).collect();
    let mut dfs = Dfs { senders: &senders, receivers: &receivers, costs, caps, best: None };
    dfs.next_receiver(0, 0.0);
    dfs.best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_routes_agree_on_a_line_instance() {
        // zones on a line at x = 0, 1, 2: zone 0 oversupplied, 1 and 2 short
        let requirements = vec![-3, 1, 1];
        let gates = vec![3, 0, 1];
        let costs = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let (x, lp) = relocation_lp(&requirements, &gates, &costs).unwrap();
        let full = relocation_ilp_enumerate(&requirements, &gates, &costs).unwrap();
        let direct = relocation_ilp_direct(&requirements, &gates, &costs).unwrap();
        assert!((lp - 3.0).abs() < 1e-9);
        assert!((full - 3.0).abs() < 1e-12);
        assert!((direct - 3.0).abs() < 1e-12);
        // the LP vertex is integral
        for v in x {
            assert!((v - v.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_instance_agrees_everywhere() {
        // zone 1 needs 2 but the only supplier has a shut gate
        let requirements = vec![-3, 2];
        let gates = vec![0, 5];
        let costs = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(relocation_lp(&requirements, &gates, &costs).is_none());
        assert!(relocation_ilp_enumerate(&requirements, &gates, &costs).is_none());
        assert!(relocation_ilp_direct(&requirements, &gates, &costs).is_none());
    }

    #[test]
    fn transshipment_instance_full_dfs_beats_direct_restriction() {
        // non-metric costs where relaying through zone 1 is cheaper
        let requirements = vec![-1, 0, 1];
        let gates = vec![1, 1, 0];
        let costs = vec![
            vec![0.0, 1.0, 10.0],
            vec![1.0, 0.0, 1.0],
            vec![10.0, 1.0, 0.0],
        ];
        let full = relocation_ilp_enumerate(&requirements, &gates, &costs).unwrap();
        assert!((full - 2.0).abs() < 1e-12);
        let (_, lp) = relocation_lp(&requirements, &gates, &costs).unwrap();
        assert!((lp - 2.0).abs() < 1e-9);
    }
}
