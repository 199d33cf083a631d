//! Successive-shortest-path min-cost flow with potentials.
//!
//! Capacities are integers, so every augmentation is integral and the final
//! flow is integral. Dijkstra breaks cost ties toward fewer arcs, which keeps
//! solutions free of zero-gain transshipment chains on symmetric cost grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const COST_EPS: f64 = 1e-9;

#[derive(Debug)]
pub struct MinCostFlow {
    n: usize,
    // arc i and i^1 form a forward/backward pair
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<f64>,
    adj: Vec<Vec<usize>>,
    initial_cap: Vec<i64>,
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    hops: usize,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap; ties prefer fewer hops
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then(other.hops.cmp(&self.hops))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    pub fn new(n: usize) -> Self {
        MinCostFlow { n, to: Vec::new(), cap: Vec::new(), cost: Vec::new(), adj: vec![Vec::new(); n], initial_cap: Vec::new() }
    }

    /// Add a directed arc; returns its id for later flow queries.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        debug_assert!(cost >= 0.0, "arcs must have non-negative cost");
        let id = self.to.len();
        self.adj[from].push(id);
        self.to.push(to);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[to].push(id + 1);
        self.to.push(from);
        self.cap.push(0);
        self.cost.push(-cost);
        self.initial_cap.push(cap);
        self.initial_cap.push(0);
        id
    }

    /// Flow routed through a forward arc.
    pub fn flow_on(&self, arc: usize) -> i64 {
        self.initial_cap[arc] - self.cap[arc]
    }

    /// Send up to `target` units from `s` to `t` at minimum cost. Returns
    /// `(flow, cost)`; flow is less than `target` when the network cannot
    /// carry it.
    pub fn send(&mut self, s: usize, t: usize, target: i64) -> (i64, f64) {
        let mut flow = 0i64;
        let mut total_cost = 0.0f64;
        let mut potential = vec![0.0f64; self.n];
        while flow < target {
            // Dijkstra on reduced costs
            let mut dist = vec![f64::INFINITY; self.n];
            let mut hops = vec![usize::MAX; self.n];
            let mut prev_arc = vec![usize::MAX; self.n];
            let mut done = vec![false; self.n];
            dist[s] = 0.0;
            hops[s] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(HeapItem { dist: 0.0, hops: 0, node: s });
            while let Some(HeapItem { dist: d, hops: h, node: u }) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                let _ = (d, h);
                for &arc in &self.adj[u] {
                    if self.cap[arc] <= 0 {
                        continue;
                    }
                    let v = self.to[arc];
                    if done[v] {
                        continue;
                    }
                    let nd = dist[u] + self.cost[arc] + potential[u] - potential[v];
                    let nh = hops[u] + 1;
                    let better = nd < dist[v] - COST_EPS
                        || (nd <= dist[v] + COST_EPS && nh < hops[v]);
                    if better {
                        dist[v] = nd.min(dist[v]);
                        hops[v] = nh;
                        prev_arc[v] = arc;
                        heap.push(HeapItem { dist: dist[v], hops: nh, node: v });
                    }
                }
            }
            if prev_arc[t] == usize::MAX && s != t {
                break;
            }
            if dist[t].is_infinite() {
                break;
            }
            for (node, p) in potential.iter_mut().enumerate() {
                if dist[node].is_finite() {
                    *p += dist[node];
                }
            }
            // bottleneck along the path
            let mut push = target - flow;
            let mut v = t;
            while v != s {
                let arc = prev_arc[v];
                push = push.min(self.cap[arc]);
                v = self.to[arc ^ 1];
            }
            let mut v = t;
            while v != s {
                let arc = prev_arc[v];
                self.cap[arc] -= push;
                self.cap[arc ^ 1] += push;
                total_cost += self.cost[arc] * push as f64;
                v = self.to[arc ^ 1];
            }
            flow += push;
        }
        (flow, total_cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_through_cheaper_path() {
        // s=0, t=3; direct 0->3 cost 10, via 1 cost 2+2
        let mut g = MinCostFlow::new(4);
        let direct = g.add_arc(0, 3, 5, 10.0);
        let a = g.add_arc(0, 1, 2, 2.0);
        let b = g.add_arc(1, 3, 2, 2.0);
        let (flow, cost) = g.send(0, 3, 3);
        assert_eq!(flow, 3);
        assert!((cost - (2.0 * 4.0 + 10.0)).abs() < 1e-9);
        assert_eq!(g.flow_on(a), 2);
        assert_eq!(g.flow_on(b), 2);
        assert_eq!(g.flow_on(direct), 1);
    }

    #[test]
    fn reports_partial_flow_when_capacity_short() {
        let mut g = MinCostFlow::new(2);
        g.add_arc(0, 1, 3, 1.0);
        let (flow, _) = g.send(0, 1, 10);
        assert_eq!(flow, 3);
    }

    #[test]
    fn tie_breaks_toward_fewer_hops() {
        // 0->2 direct cost 2; 0->1->2 also cost 2; prefer the direct arc
        let mut g = MinCostFlow::new(3);
        let direct = g.add_arc(0, 2, 1, 2.0);
        let a = g.add_arc(0, 1, 1, 1.0);
        let b = g.add_arc(1, 2, 1, 1.0);
        let (flow, cost) = g.send(0, 2, 1);
        assert_eq!(flow, 1);
        assert!((cost - 2.0).abs() < 1e-12);
        assert_eq!(g.flow_on(direct), 1);
        assert_eq!(g.flow_on(a), 0);
        assert_eq!(g.flow_on(b), 0);
    }
}
