//! Multi-seed runs, aggregation, and the CSV surfaces: run report, event
//! log, search traces, and relocation dumps. All output is byte-stable for
//! identical inputs; wall-clock solver runtimes therefore stay out of the
//! CSV files and are reported through [`RunReport::mean_solver_secs`].

use std::fmt::Write as _;

use crate::sim::config::ScenarioConfig;
use crate::sim::engine::{run_day, DayOutcome, ScenarioError};

/// Render a float with 6 significant digits, plain decimal notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One seed's metric rows, already ordered.
#[derive(Debug, Clone)]
pub struct SeedMetrics {
    pub seed: u64,
    pub values: Vec<(String, f64)>,
    pub checksum: u64,
}

/// Per-seed metrics plus aggregate statistics over the seeds.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub per_seed: Vec<SeedMetrics>,
    pub outcomes: Vec<DayOutcome>,
}

fn metrics_of(outcome: &DayOutcome) -> Vec<(String, f64)> {
    let mut m = vec![
        ("tsc_usd".to_string(), outcome.tsc_usd),
        ("courier_pay_usd".to_string(), outcome.courier_pay_usd),
        ("relocation_pay_usd".to_string(), outcome.relocation_pay_usd),
        ("backup_cost_usd".to_string(), outcome.backup_cost_usd),
        ("requests_total".to_string(), outcome.requests_total as f64),
        ("couriers_total".to_string(), outcome.couriers_total as f64),
        ("delivered_by_courier".to_string(), outcome.delivered_by_courier as f64),
        ("delivered_by_backup".to_string(), outcome.delivered_by_backup as f64),
        (
            "fulfilled_fraction".to_string(),
            if outcome.requests_total > 0 {
                outcome.delivered_by_courier as f64 / outcome.requests_total as f64
            } else {
                0.0
            },
        ),
        ("late_deliveries".to_string(), outcome.late_deliveries as f64),
        ("relocation_orders_total".to_string(), outcome.relocation_orders_total as f64),
    ];
    for (t, v) in &outcome.availability {
        m.push((format!("couriers_per_request_t{}", *t as i64), *v));
    }
    m
}

/// Run all seeds of a scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    let mut per_seed = Vec::new();
    let mut outcomes = Vec::new();
    for i in 0..config.seeds {
        let seed = config.seed_base + i;
        let outcome = run_day(config, seed)?;
        per_seed.push(SeedMetrics {
            seed,
            values: metrics_of(&outcome),
            checksum: outcome.arrival_checksum,
        });
        outcomes.push(outcome);
    }
    Ok(RunReport { per_seed, outcomes })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

impl RunReport {
    /// Mean per-epoch solver wall time across all seeds, in seconds.
    /// Informational only; never written into the deterministic CSVs.
    pub fn mean_solver_secs(&self) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for o in &self.outcomes {
            for (_, s) in &o.epoch_runtimes {
                total += s;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    pub fn mean_of(&self, metric: &str) -> f64 {
        let vals: Vec<f64> = self
            .per_seed
            .iter()
            .flat_map(|s| s.values.iter().filter(|(k, _)| k == metric).map(|(_, v)| *v))
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    /// The run report CSV: one row per (seed, metric), then an aggregate
    /// block with boxplot statistics per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,metric,value\n");
        for s in &self.per_seed {
            for (k, v) in &s.values {
                let _ = writeln!(out, "{},{},{}", s.seed, k, fmt_sig(*v));
            }
            let _ = writeln!(out, "{},arrival_checksum,{}", s.seed, s.checksum);
        }
        if let Some(first) = self.per_seed.first() {
            for (k, _) in &first.values {
                let mut vals: Vec<f64> = self
                    .per_seed
                    .iter()
                    .flat_map(|s| s.values.iter().filter(|(m, _)| m == k).map(|(_, v)| *v))
                    .collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let _ = writeln!(out, "aggregate,{}_mean,{}", k, fmt_sig(mean));
                let _ = writeln!(out, "aggregate,{}_min,{}", k, fmt_sig(vals[0]));
                let _ = writeln!(out, "aggregate,{}_q25,{}", k, fmt_sig(quantile(&vals, 0.25)));
                let _ = writeln!(out, "aggregate,{}_median,{}", k, fmt_sig(quantile(&vals, 0.5)));
                let _ = writeln!(out, "aggregate,{}_q75,{}", k, fmt_sig(quantile(&vals, 0.75)));
                let _ = writeln!(out, "aggregate,{}_max,{}", k, fmt_sig(vals[vals.len() - 1]));
            }
        }
        out
    }

    /// The event log CSV across all seeds.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("seed,t,event_type,request_id,courier_id,zone_from,zone_to,cost_delta_usd\n");
        for outcome in &self.outcomes {
            for e in &outcome.events {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    e.seed,
                    fmt_sig(e.t),
                    e.kind.name(),
                    e.request.map(|r| r.0.to_string()).unwrap_or_default(),
                    e.courier.map(|c| c.0.to_string()).unwrap_or_default(),
                    e.zone_from.map(|z| z.to_string()).unwrap_or_default(),
                    e.zone_to.map(|z| z.to_string()).unwrap_or_default(),
                    fmt_sig(e.cost_delta_usd),
                );
            }
        }
        out
    }

    /// Per-zone generated and courier-fulfilled counts.
    pub fn zones_csv(&self) -> String {
        let mut out = String::from("seed,zone,generated,fulfilled_by_courier\n");
        for outcome in &self.outcomes {
            for (zone, gen, ful) in &outcome.zone_fulfilled {
                let _ = writeln!(out, "{},{},{},{}", outcome.seed, zone, gen, ful);
            }
        }
        out
    }

    /// Search convergence traces (one row per phase), when tracing was on.
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("seed,start,wave,phase,am_len,cl_len,best_cost\n");
        for outcome in &self.outcomes {
            for t in &outcome.traces {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    outcome.seed, t.start, t.wave, t.phase, t.am_len, t.cl_len, fmt_sig(t.best_cost)
                );
            }
        }
        out
    }

    /// Relocation flow plans per epoch, when tracing was on.
    pub fn flow_csv(&self) -> String {
        let mut out = String::from("seed,t,zone_from,zone_to,count\n");
        for outcome in &self.outcomes {
            for (t, r, s, n) in &outcome.flow_dump {
                let _ = writeln!(out, "{},{},{},{},{}", outcome.seed, fmt_sig(*t), r, s, n);
            }
        }
        out
    }

    /// Cluster/job/objective summary per relocation run.
    pub fn virtual_csv(&self) -> String {
        let mut out = String::from("seed,t,clusters,jobs,objective\n");
        for outcome in &self.outcomes {
            for (t, clusters, jobs, objective) in &outcome.virtual_dump {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    outcome.seed,
                    fmt_sig(*t),
                    clusters,
                    jobs,
                    fmt_sig(*objective)
                );
            }
        }
        out
    }

    /// Relocation order counts per epoch.
    pub fn relocation_counts_csv(&self) -> String {
        let mut out = String::from("seed,t,orders\n");
        for outcome in &self.outcomes {
            for (t, n) in &outcome.relocation_counts {
                let _ = writeln!(out, "{},{},{}", outcome.seed, fmt_sig(*t), n);
            }
        }
        out
    }
}
