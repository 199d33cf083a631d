//! Discrete-time whole-day simulation of the crowdshipping operation.

pub mod arrivals;
pub mod config;
pub mod engine;
pub mod report;

/// Longest assignment interval guaranteeing, with probability at least
/// 1 - epsilon, that a zone with peak arrival rate `lambda_max` (per minute)
/// sees more than one request per interval.
pub fn recommend_timestep(lambda_max: f64, epsilon: f64) -> f64 {
    (1.0 - epsilon).sqrt() / lambda_max
}

#[cfg(test)]
mod tests {
    use super::recommend_timestep;

    #[test]
    fn matches_reference_computation() {
        // sqrt(0.9)/0.15 is about 6.32 minutes
        let dt = recommend_timestep(0.15, 0.1);
        assert!((dt - 0.9_f64.sqrt() / 0.15).abs() < 1e-12);
        assert!((dt - 6.3246).abs() < 1e-3);
    }

    #[test]
    fn limits() {
        // epsilon -> 1 pushes the interval to zero
        assert!(recommend_timestep(0.15, 1.0 - 1e-12) < 1e-5);
        // unit case
        assert!((recommend_timestep(1.0, 0.0) - 1.0).abs() < 1e-12);
    }
}
