//! Candidate list, adaptive memory, and the persistently-attractive set.
//!
//! Solutions are shared by reference count and the candidate list keeps its
//! selection weights in Fenwick trees, so probabilistic draws and
//! tabu-exclusion updates cost O(log n) rather than a scan per draw.

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use rand::Rng;

use crate::domain::{Solution, StopKind};

/// Canonical identity of a solution: the stop sequence of every non-empty
/// route (keyed by courier, so listing order is irrelevant) plus the
/// unassigned set. The hash is precomputed; memory operations hash
/// fingerprints constantly.
#[derive(Debug, Clone)]
pub struct Fingerprint {
    key: Vec<u64>,
    hash: u64,
}

impl PartialEq for Fingerprint {
    fn eq(&self, other: &Self) -> bool {
        self.hash == other.hash && self.key == other.key
    }
}

impl Eq for Fingerprint {}

impl std::hash::Hash for Fingerprint {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

pub fn fingerprint(solution: &Solution) -> Fingerprint {
    let mut key = Vec::new();
    for (courier, plan) in &solution.routes {
        if plan.is_empty() {
            continue;
        }
        key.push(courier.0);
        key.push(plan.stops.len() as u64);
        for stop in &plan.stops {
            let kind_bit = match stop.kind {
                StopKind::Pickup => 0,
                StopKind::Delivery => 1,
            };
            key.push(stop.request.0 << 1 | kind_bit);
        }
    }
    key.push(u64::MAX);
    key.extend(solution.unassigned.iter().map(|r| r.0));
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in &key {
        hash ^= v;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    Fingerprint { key, hash }
}

/// Selection weight of a candidate relative to the reference cost: the
/// bigger the cost reduction, the heavier the weight.
fn selection_weight(cost: f64, ref_cost: f64, alpha: f64) -> f64 {
    if ref_cost.abs() < 1e-12 {
        return 1.0;
    }
    let exponent = (alpha * (ref_cost - cost) / ref_cost).clamp(-60.0, 60.0);
    exponent.exp()
}

/// Normalized selection probabilities for a list of candidate costs.
pub fn selection_probabilities(costs: &[f64], ref_cost: f64, alpha: f64) -> Vec<f64> {
    let weights: Vec<f64> = costs.iter().map(|&c| selection_weight(c, ref_cost, alpha)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Sample one solution from a non-empty candidate slice with probability
/// proportional to its cost-reduction weight.
pub fn select_probabilistic<'a, R: Rng>(
    cl: &'a [Solution],
    ref_cost: f64,
    alpha: f64,
    rng: &mut R,
) -> &'a Solution {
    assert!(!cl.is_empty(), "probabilistic selection requires a non-empty candidate list");
    let weights: Vec<f64> = cl
        .iter()
        .map(|s| selection_weight(s.cost.total, ref_cost, alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return &cl[i];
        }
    }
    cl.last().unwrap()
}

/// Fenwick tree over non-negative weights supporting weighted sampling.
struct WeightTree {
    tree: Vec<f64>,
    vals: Vec<f64>,
    len: usize,
}

impl WeightTree {
    fn new() -> Self {
        WeightTree { tree: vec![0.0; 16], vals: Vec::new(), len: 0 }
    }

    fn push(&mut self, w: f64) {
        if self.len + 1 >= self.tree.len() {
            self.grow();
        }
        self.vals.push(w);
        self.len += 1;
        self.update(self.len, w);
    }

    fn grow(&mut self) {
        let cap = (self.tree.len() * 2).max(16);
        self.tree = vec![0.0; cap];
        for i in 0..self.vals.len() {
            let v = self.vals[i];
            self.update_raw(i + 1, v, cap);
        }
    }

    fn update_raw(&mut self, mut ix: usize, delta: f64, cap: usize) {
        while ix < cap {
            self.tree[ix] += delta;
            ix += ix & ix.wrapping_neg();
        }
    }

    fn update(&mut self, ix: usize, delta: f64) {
        let cap = self.tree.len();
        self.update_raw(ix, delta, cap);
    }

    /// Set entry `i` (0-based) to `w`.
    fn set(&mut self, i: usize, w: f64) {
        let delta = w - self.vals[i];
        self.vals[i] = w;
        self.update(i + 1, delta);
    }

    fn total(&self) -> f64 {
        let mut ix = self.len;
        let mut sum = 0.0;
        while ix > 0 {
            sum += self.tree[ix];
            ix &= ix - 1;
        }
        sum
    }

    /// Index of the entry containing prefix mass `target`.
    fn sample(&self, mut target: f64) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        let mut ix = 0usize;
        let mut mask = self.tree.len().next_power_of_two() >> 1;
        while mask > 0 {
            let next = ix + mask;
            if next <= self.len && self.tree[next] < target {
                target -= self.tree[next];
                ix = next;
            }
            mask >>= 1;
        }
        // ix is the count of entries strictly before the hit
        if ix >= self.len {
            // numeric edge: fall back to the last positive entry
            return self.vals.iter().rposition(|&v| v > 0.0);
        }
        if self.vals[ix] > 0.0 {
            Some(ix)
        } else {
            self.vals[ix + 1..]
                .iter()
                .position(|&v| v > 0.0)
                .map(|off| ix + 1 + off)
                .or_else(|| self.vals[..ix].iter().rposition(|&v| v > 0.0))
        }
    }
}

struct ClEntry {
    solution: Rc<Solution>,
    fp: Rc<Fingerprint>,
}

/// The evolving search memory of one M-TAMP start: the candidate list, the
/// adaptive memory ordered by entry time, and per-fingerprint entry counts
/// that decide persistent attractiveness.
pub struct SearchMemory {
    am: VecDeque<(Rc<Solution>, Rc<Fingerprint>)>,
    cl: Vec<ClEntry>,
    cl_seen: HashMap<Rc<Fingerprint>, usize>,
    counts: HashMap<Rc<Fingerprint>, u32>,
    weights_all: WeightTree,
    weights_nontabu: WeightTree,
    /// Reference cost of the current wave's base solution.
    pub ref_cost: f64,
    alpha: f64,
    kappa: u32,
    /// Cheapest strictly feasible solution that ever entered the memory.
    pub best_feasible: Option<Rc<Solution>>,
}

impl SearchMemory {
    pub fn new(alpha: f64, kappa: u32) -> Self {
        SearchMemory {
            am: VecDeque::new(),
            cl: Vec::new(),
            cl_seen: HashMap::new(),
            counts: HashMap::new(),
            weights_all: WeightTree::new(),
            weights_nontabu: WeightTree::new(),
            ref_cost: 1.0,
            alpha,
            kappa,
            best_feasible: None,
        }
    }

    /// Start a wave: drop the old candidate list and set the reference cost.
    /// The adaptive memory and entry counts persist across waves.
    pub fn begin_wave(&mut self, ref_cost: f64) {
        self.cl.clear();
        self.cl_seen.clear();
        self.weights_all = WeightTree::new();
        self.weights_nontabu = WeightTree::new();
        self.ref_cost = ref_cost;
    }

    pub fn am_len(&self) -> usize {
        self.am.len()
    }

    pub fn cl_len(&self) -> usize {
        self.cl.len()
    }

    pub fn am_iter(&self) -> impl Iterator<Item = &Solution> {
        self.am.iter().map(|(s, _)| s.as_ref())
    }

    pub fn min_cost_am(&self) -> Option<&Solution> {
        self.am
            .iter()
            .map(|(s, _)| s.as_ref())
            .min_by(|a, b| a.cost.total.partial_cmp(&b.cost.total).unwrap())
    }

    pub fn entry_count(&self, fp: &Fingerprint) -> u32 {
        self.counts.get(fp).copied().unwrap_or(0)
    }

    /// Persistently attractive: entered the memory at least `kappa` times.
    pub fn is_tabu(&self, fp: &Fingerprint) -> bool {
        self.entry_count(fp) >= self.kappa
    }

    /// Deduplicating insert into the candidate list.
    pub fn add_to_cl(&mut self, solution: Rc<Solution>) -> bool {
        let fp = Rc::new(fingerprint(&solution));
        self.add_to_cl_keyed(solution, fp)
    }

    fn add_to_cl_keyed(&mut self, solution: Rc<Solution>, fp: Rc<Fingerprint>) -> bool {
        if self.cl_seen.contains_key(fp.as_ref()) {
            return false;
        }
        let weight = selection_weight(solution.cost.total, self.ref_cost, self.alpha);
        self.cl_seen.insert(fp.clone(), self.cl.len());
        self.weights_all.push(weight);
        self.weights_nontabu.push(if self.is_tabu(&fp) { 0.0 } else { weight });
        self.cl.push(ClEntry { solution, fp });
        true
    }

    pub fn merge_am_into_cl(&mut self) {
        let snapshot: Vec<(Rc<Solution>, Rc<Fingerprint>)> = self.am.iter().cloned().collect();
        for (s, fp) in snapshot {
            self.add_to_cl_keyed(s, fp);
        }
    }

    pub fn has_selectable(&self, exclude_tabu: bool) -> bool {
        if exclude_tabu {
            self.weights_nontabu.total() > 1e-300
        } else {
            !self.cl.is_empty()
        }
    }

    /// Weighted sample over the candidate list; `exclude_tabu` restricts the
    /// draw to candidates outside the persistently-attractive set.
    pub fn select_cl<R: Rng>(&self, rng: &mut R, exclude_tabu: bool) -> Option<Rc<Solution>> {
        self.select_cl_entry(rng, exclude_tabu).map(|(s, _)| s)
    }

    /// Like [`Self::select_cl`] but also hands back the fingerprint, saving a
    /// recomputation when the winner goes straight into the memory.
    pub fn select_cl_entry<R: Rng>(
        &self,
        rng: &mut R,
        exclude_tabu: bool,
    ) -> Option<(Rc<Solution>, Rc<Fingerprint>)> {
        let tree = if exclude_tabu { &self.weights_nontabu } else { &self.weights_all };
        let total = tree.total();
        if total <= 1e-300 {
            return None;
        }
        let draw = rng.gen::<f64>() * total;
        tree.sample(draw).map(|ix| (self.cl[ix].solution.clone(), self.cl[ix].fp.clone()))
    }

    /// Append a solution to the back of the memory, counting the entry. When
    /// the count reaches the threshold the fingerprint becomes tabu and the
    /// entry can no longer be drawn as a replacement.
    pub fn push_am(&mut self, solution: Rc<Solution>) {
        let fp = Rc::new(fingerprint(&solution));
        self.push_am_entry(solution, fp);
    }

    /// Append with an already-known fingerprint.
    pub fn push_am_entry(&mut self, solution: Rc<Solution>, fp: Rc<Fingerprint>) {
        let count = self.counts.entry(fp.clone()).or_insert(0);
        *count += 1;
        if *count == self.kappa {
            if let Some(&ix) = self.cl_seen.get(fp.as_ref()) {
                self.weights_nontabu.set(ix, 0.0);
            }
        }
        if solution.is_feasible()
            && self
                .best_feasible
                .as_ref()
                .map(|b| solution.cost.total < b.cost.total)
                .unwrap_or(true)
        {
            self.best_feasible = Some(solution.clone());
        }
        self.am.push_back((solution, fp));
    }

    pub fn pop_am_front(&mut self) -> Option<(Rc<Solution>, Rc<Fingerprint>)> {
        self.am.pop_front()
    }

    /// Move a just-popped entry to the back without counting a new entry.
    pub fn rotate_to_back(&mut self, solution: Rc<Solution>, fp: Rc<Fingerprint>) {
        self.am.push_back((solution, fp));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq2_probability_matches_hand_value() {
        // ref 100, costs {90, 100}: p(90) = e^0.5 / (e^0.5 + 1)
        let p = selection_probabilities(&[90.0, 100.0], 100.0, 5.0);
        let expect = 0.5_f64.exp() / (0.5_f64.exp() + 1.0);
        assert!((p[0] - expect).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_costs_give_uniform_probabilities() {
        let p = selection_probabilities(&[70.0, 70.0, 70.0, 70.0], 100.0, 5.0);
        for v in &p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_decrease_with_cost() {
        let p = selection_probabilities(&[80.0, 90.0, 100.0, 110.0], 100.0, 5.0);
        for w in p.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weight_tree_sampling_matches_masses() {
        let mut t = WeightTree::new();
        for w in [1.0, 0.0, 3.0, 2.0] {
            t.push(w);
        }
        assert!((t.total() - 6.0).abs() < 1e-12);
        assert_eq!(t.sample(0.5), Some(0));
        assert_eq!(t.sample(1.5), Some(2));
        assert_eq!(t.sample(3.9), Some(2));
        assert_eq!(t.sample(4.5), Some(3));
        t.set(2, 0.0);
        assert!((t.total() - 3.0).abs() < 1e-12);
        assert_eq!(t.sample(1.5), Some(3));
    }

    #[test]
    fn weight_tree_growth_preserves_masses() {
        let mut t = WeightTree::new();
        for i in 0..100 {
            t.push((i % 7) as f64 + 0.5);
        }
        let expect: f64 = (0..100).map(|i| (i % 7) as f64 + 0.5).sum();
        assert!((t.total() - expect).abs() < 1e-9);
    }
}
