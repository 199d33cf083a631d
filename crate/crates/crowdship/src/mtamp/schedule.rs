//! Phase-count and step-size bookkeeping for the wave search.
//!
//! Given the memory size `delta` reached by a dry run and the average
//! spacing `eta`, the number of phases is `ceil(delta/eta)` and the memory
//! targets grow evenly to exactly `delta`. Horizontal phases split the
//! memory into steps whose sizes always sum to the memory length.

/// Per-wave growth plan: phase count, memory size targets, and the size of
/// the first horizontal step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSchedule {
    pub delta: usize,
    pub q_star: usize,
    /// Memory size target per phase; strictly increasing, ends at `delta`.
    pub mu: Vec<usize>,
    /// First-step removal count, the largest value strictly below `mu[0]`.
    pub d_first: usize,
}

impl PhaseSchedule {
    pub fn empty() -> Self {
        PhaseSchedule { delta: 0, q_star: 0, mu: Vec::new(), d_first: 0 }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Derive the phase plan from `delta` and `eta` (eta >= 2).
pub fn phase_schedule(delta: usize, eta: usize) -> PhaseSchedule {
    assert!(eta >= 2, "phase spacing must be at least 2");
    if delta == 0 {
        return PhaseSchedule::empty();
    }
    let q_star = delta.div_ceil(eta);
    let mu: Vec<usize> = (1..=q_star)
        .map(|q| round_half_up((q + 1) as f64 * delta as f64 / (q_star + 1) as f64))
        .collect();
    let d_first = mu[0].saturating_sub(1).max(1);
    PhaseSchedule { delta, q_star, mu, d_first }
}

/// Step sizes for one horizontal phase over a memory of `am_len` solutions.
/// The first step takes `d_first`, later steps split the remainder evenly;
/// the sizes sum to exactly `am_len`.
pub fn horizontal_steps(am_len: usize, d_first: usize) -> Vec<usize> {
    if am_len == 0 {
        return Vec::new();
    }
    if d_first >= am_len {
        return vec![am_len];
    }
    let h = am_len.div_ceil(d_first);
    let mut steps = Vec::with_capacity(h);
    steps.push(d_first);
    let mut remaining = am_len - d_first;
    for i in 2..=h {
        let left = h - i + 1;
        let d = remaining.div_ceil(left);
        steps.push(d);
        remaining -= d;
    }
    debug_assert_eq!(remaining, 0);
    steps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_30_eta_6_matches_hand_computation() {
        let s = phase_schedule(30, 6);
        assert_eq!(s.q_star, 5);
        assert_eq!(s.mu, vec![10, 15, 20, 25, 30]);
        assert_eq!(s.d_first, 9);
    }

    #[test]
    fn am_10_d_4_splits_into_4_3_3() {
        assert_eq!(horizontal_steps(10, 4), vec![4, 3, 3]);
    }

    #[test]
    fn minimal_memory() {
        let s = phase_schedule(1, 6);
        assert_eq!(s.q_star, 1);
        assert_eq!(s.mu, vec![1]);
        assert_eq!(s.d_first, 1);
    }

    #[test]
    fn schedule_invariants_over_a_grid() {
        for delta in 1..=120usize {
            for eta in 2..=12usize {
                let s = phase_schedule(delta, eta);
                assert_eq!(s.q_star, delta.div_ceil(eta));
                assert_eq!(*s.mu.last().unwrap(), delta);
                for w in s.mu.windows(2) {
                    assert!(w[0] < w[1], "mu not strictly increasing for delta={delta} eta={eta}");
                }
                assert!(s.d_first >= 1 && (s.mu[0] == 1 || s.d_first < s.mu[0]));
                for am in [1usize, 2, 3, 5, 17, 60, 200] {
                    let steps = horizontal_steps(am, s.d_first);
                    assert_eq!(steps.iter().sum::<usize>(), am);
                    assert!(steps.iter().all(|&d| d >= 1));
                }
            }
        }
    }
}
