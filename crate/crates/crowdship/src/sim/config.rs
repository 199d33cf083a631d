//! Scenario configuration: a flat key-value text format with presets and
//! CLI-style overrides.

use std::fmt;

use thiserror::Error;

use crate::domain::{CapacityMode, CostParams};
use crate::geometry::{Point, ServiceArea};
use crate::relocation::flow::RoundingMode;
use crate::relocation::mkp::VirtualObjective;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Insertion,
    InsertionIntra,
    SimulatedAnnealing,
    ReactiveTabu,
    Mtamp,
}

impl SolverChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "insertion" => Some(SolverChoice::Insertion),
            "insertion-intra" => Some(SolverChoice::InsertionIntra),
            "sa" => Some(SolverChoice::SimulatedAnnealing),
            "rts" => Some(SolverChoice::ReactiveTabu),
            "mtamp" => Some(SolverChoice::Mtamp),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Insertion => "insertion",
            SolverChoice::InsertionIntra => "insertion-intra",
            SolverChoice::SimulatedAnnealing => "sa",
            SolverChoice::ReactiveTabu => "rts",
            SolverChoice::Mtamp => "mtamp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalLaw {
    Poisson,
    /// At most one arrival per zone and step, with probability equal to the rate.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightDist {
    TruncatedNormal,
    Uniform,
}

/// Full description of one simulated day.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub width: f64,
    pub height: f64,
    pub zone_edge: f64,
    pub depot_x: f64,
    pub depot_y: f64,
    /// Operating day length in minutes.
    pub horizon: f64,
    /// Assignment period in minutes.
    pub dt: f64,
    /// Expected requests per zone per step.
    pub request_rate: f64,
    /// Expected courier arrivals per zone per step.
    pub courier_rate: f64,
    pub arrival_law: ArrivalLaw,
    pub courier_speed: f64,
    pub courier_capacity: f64,
    /// Availability per courier in minutes.
    pub courier_budget: f64,
    /// Delivery guarantee per request in minutes.
    pub guarantee: f64,
    pub weight_dist: WeightDist,
    pub weight_min: f64,
    pub weight_max: f64,
    pub weight_mean: f64,
    pub weight_sd: f64,
    pub theta: f64,
    pub tau: f64,
    pub rho: f64,
    pub alpha: f64,
    pub eta: usize,
    pub pickup_threshold: f64,
    pub discard_ratio: f64,
    pub tabu_count: u32,
    pub crowdsourcee_rate: f64,
    pub backup_rate: f64,
    pub backup_speed: f64,
    pub capacity_mode: CapacityMode,
    /// Clustering dissimilarity threshold in miles.
    pub psi: f64,
    pub relocation: bool,
    pub relocation_objective: VirtualObjective,
    pub rounding: RoundingMode,
    pub solver: SolverChoice,
    /// Number of replications; seeds are seed_base..seed_base+seeds.
    pub seeds: u64,
    pub seed_base: u64,
    pub epsilon: f64,
    pub sa_iterations: usize,
    pub rts_iterations: usize,
    /// Optional wall-clock cap in seconds for SA/RTS; 0 keeps iteration mode.
    pub time_cap_secs: f64,
    pub sa_initial_temp_factor: f64,
    pub sa_cooling: f64,
    pub rts_decay: f64,
    /// Emit per-phase search traces and relocation dumps.
    pub trace: bool,
}

impl ScenarioConfig {
    /// The small problem: a 6x6-mile area with 0.5-mile zones and per-zone
    /// rates scaled to roughly 397 requests and 98 couriers per 8-hour day.
    pub fn paper_small() -> Self {
        ScenarioConfig {
            width: 6.0,
            height: 6.0,
            zone_edge: 0.5,
            depot_x: 3.0,
            depot_y: 3.0,
            horizon: 480.0,
            dt: 10.0,
            request_rate: 0.0575,
            courier_rate: 0.0142,
            arrival_law: ArrivalLaw::Poisson,
            courier_speed: 10.0,
            courier_capacity: 10.0,
            courier_budget: 120.0,
            guarantee: 120.0,
            weight_dist: WeightDist::TruncatedNormal,
            weight_min: 2.0,
            weight_max: 7.0,
            weight_mean: 4.5,
            weight_sd: 1.0,
            theta: 0.25,
            tau: 0.1,
            rho: 5.0,
            alpha: 5.0,
            eta: 6,
            pickup_threshold: 1.67,
            discard_ratio: 0.5,
            tabu_count: 3,
            crowdsourcee_rate: 7.0,
            backup_rate: 68.0,
            backup_speed: 20.0,
            capacity_mode: CapacityMode::ExcessWeight,
            psi: 0.95,
            relocation: false,
            relocation_objective: VirtualObjective::Benefit,
            rounding: RoundingMode::HalfUp,
            solver: SolverChoice::Mtamp,
            seeds: 10,
            seed_base: 0,
            epsilon: 0.1,
            sa_iterations: 3000,
            rts_iterations: 40,
            time_cap_secs: 0.0,
            sa_initial_temp_factor: 0.1,
            sa_cooling: 0.995,
            rts_decay: 0.95,
            trace: false,
        }
    }

    /// The larger problem: same area, rates scaled to roughly 1325 requests
    /// and 328 couriers per day.
    pub fn paper_large() -> Self {
        ScenarioConfig {
            request_rate: 0.1917,
            courier_rate: 0.0475,
            ..ScenarioConfig::paper_small()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper-small" => Some(Self::paper_small()),
            "paper-large" => Some(Self::paper_large()),
            _ => None,
        }
    }

    pub fn area(&self) -> Result<ServiceArea, ConfigError> {
        ServiceArea::new(self.width, self.height, self.zone_edge, Point::new(self.depot_x, self.depot_y))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn cost_params(&self) -> CostParams {
        CostParams {
            lateness_penalty: self.theta,
            budget_penalty: self.tau,
            capacity_penalty: self.rho,
            alpha: self.alpha,
            eta: self.eta,
            pickup_threshold: self.pickup_threshold,
            discard_ratio: self.discard_ratio,
            tabu_count: self.tabu_count,
            crowdsourcee_rate: self.crowdsourcee_rate,
            backup_rate: self.backup_rate,
            backup_speed: self.backup_speed,
            capacity_mode: self.capacity_mode,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Validate cross-field invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.area()?;
        if self.dt <= 0.0 {
            return Err(ConfigError::Invalid("dt must be positive".into()));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || self.horizon < 0.0 {
            return Err(ConfigError::Invalid("horizon must be a multiple of dt".into()));
        }
        if self.request_rate < 0.0 || self.courier_rate < 0.0 {
            return Err(ConfigError::Invalid("rates must be non-negative".into()));
        }
        if self.eta < 2 {
            return Err(ConfigError::Invalid("eta must be at least 2".into()));
        }
        if self.weight_min > self.weight_max || self.weight_min <= 0.0 {
            return Err(ConfigError::Invalid("weight bounds must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn f(v: &str, key: &str) -> Result<f64, ConfigError> {
            v.parse().map_err(|_| ConfigError::BadValue(key.into(), v.into()))
        }
        fn u(v: &str, key: &str) -> Result<u64, ConfigError> {
            v.parse().map_err(|_| ConfigError::BadValue(key.into(), v.into()))
        }
        match key {
            "width" => self.width = f(value, key)?,
            "height" => self.height = f(value, key)?,
            "zone_edge" => self.zone_edge = f(value, key)?,
            "depot_x" => self.depot_x = f(value, key)?,
            "depot_y" => self.depot_y = f(value, key)?,
            "horizon" => self.horizon = f(value, key)?,
            "dt" => self.dt = f(value, key)?,
            "request_rate" => self.request_rate = f(value, key)?,
            "courier_rate" => self.courier_rate = f(value, key)?,
            "arrival_law" => {
                self.arrival_law = match value {
                    "poisson" => ArrivalLaw::Poisson,
                    "uniform" => ArrivalLaw::Uniform,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            "courier_speed" => self.courier_speed = f(value, key)?,
            "courier_capacity" => self.courier_capacity = f(value, key)?,
            "courier_budget" => self.courier_budget = f(value, key)?,
            "guarantee" => self.guarantee = f(value, key)?,
            "weight_dist" => {
                self.weight_dist = match value {
                    "normal" => WeightDist::TruncatedNormal,
                    "uniform" => WeightDist::Uniform,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            "weight_min" => self.weight_min = f(value, key)?,
            "weight_max" => self.weight_max = f(value, key)?,
            "weight_mean" => self.weight_mean = f(value, key)?,
            "weight_sd" => self.weight_sd = f(value, key)?,
            "theta" => self.theta = f(value, key)?,
            "tau" => self.tau = f(value, key)?,
            "rho" => self.rho = f(value, key)?,
            "alpha" => self.alpha = f(value, key)?,
            "eta" => self.eta = u(value, key)? as usize,
            "pickup_threshold" => self.pickup_threshold = f(value, key)?,
            "discard_ratio" => self.discard_ratio = f(value, key)?,
            "tabu_count" => self.tabu_count = u(value, key)? as u32,
            "crowdsourcee_rate" => self.crowdsourcee_rate = f(value, key)?,
            "backup_rate" => self.backup_rate = f(value, key)?,
            "backup_speed" => self.backup_speed = f(value, key)?,
            "capacity_mode" => {
                self.capacity_mode = match value {
                    "excess-weight" => CapacityMode::ExcessWeight,
                    "request-count" => CapacityMode::RequestCount,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            "psi" => self.psi = f(value, key)?,
            "relocation" => {
                self.relocation = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            "relocation_objective" => {
                self.relocation_objective = match value {
                    "count" => VirtualObjective::Count,
                    "benefit" => VirtualObjective::Benefit,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            "rounding" => {
                self.rounding = match value {
                    "half-up" => RoundingMode::HalfUp,
                    "floor" => RoundingMode::Floor,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            "solver" => {
                self.solver = SolverChoice::parse(value)
                    .ok_or_else(|| ConfigError::BadValue(key.into(), value.into()))?
            }
            "seeds" => self.seeds = u(value, key)?,
            "seed_base" => self.seed_base = u(value, key)?,
            "epsilon" => self.epsilon = f(value, key)?,
            "sa_iterations" => self.sa_iterations = u(value, key)? as usize,
            "rts_iterations" => self.rts_iterations = u(value, key)? as usize,
            "time_cap_secs" => self.time_cap_secs = f(value, key)?,
            "sa_initial_temp_factor" => self.sa_initial_temp_factor = f(value, key)?,
            "sa_cooling" => self.sa_cooling = f(value, key)?,
            "rts_decay" => self.rts_decay = f(value, key)?,
            "trace" => {
                self.trace = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => return Err(ConfigError::BadValue(key.into(), value.into())),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Parse a scenario file: `key = value` lines, `#` comments.
    pub fn parse_str(text: &str, base: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
        let mut config = base;
        for (ix, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Line(ix + 1, format!("expected key = value, got {line:?}")));
            };
            config
                .set(key.trim(), value.trim())
                .map_err(|e| ConfigError::Line(ix + 1, e.to_string()))?;
        }
        Ok(config)
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::paper_small()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {0}: {1:?}")]
    BadValue(String, String),
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Line(n, _) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_totals_hit_paper_scale() {
        let c = ScenarioConfig::paper_small();
        let zones = 144.0;
        let steps = 48.0;
        let requests = c.request_rate * zones * steps;
        let couriers = c.courier_rate * zones * steps;
        assert!((requests - 397.0).abs() < 5.0, "requests/day {requests}");
        assert!((couriers - 98.0).abs() < 3.0, "couriers/day {couriers}");
        c.validate().unwrap();
    }

    #[test]
    fn parse_and_override() {
        let text = "\n# comment\nrequest_rate = 0.2  # trailing\nsolver = rts\nrelocation = on\n";
        let c = ScenarioConfig::parse_str(text, ScenarioConfig::paper_small()).unwrap();
        assert_eq!(c.request_rate, 0.2);
        assert_eq!(c.solver, SolverChoice::ReactiveTabu);
        assert!(c.relocation);
    }

    #[test]
    fn unknown_key_is_an_error_with_line_number() {
        let err = ScenarioConfig::parse_str("nonsense = 4\n", ScenarioConfig::paper_small()).unwrap_err();
        assert_eq!(err.line(), Some(1));
    }

    #[test]
    fn invalid_horizon_rejected() {
        let mut c = ScenarioConfig::paper_small();
        c.horizon = 475.0;
        assert!(c.validate().is_err());
    }
}
