//! Request and courier arrival streams.
//!
//! Streams for a whole day are generated up front from their own seed,
//! independent of any solver randomness, so different solvers can be
//! compared on identical realizations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::domain::{CourierId, Request, RequestId, RequestStatus};
use crate::geometry::{Point, ServiceArea, ZoneId};
use crate::sim::config::{ArrivalLaw, ScenarioConfig, WeightDist};

/// A courier entering the system during the day.
#[derive(Debug, Clone)]
pub struct CourierArrival {
    pub id: CourierId,
    pub entry_time: f64,
    pub entry_point: Point,
}

fn arrivals_in_step<R: Rng>(law: ArrivalLaw, rate: f64, rng: &mut R) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    match law {
        ArrivalLaw::Poisson => Poisson::new(rate).map(|d| d.sample(rng) as u32).unwrap_or(0),
        ArrivalLaw::Uniform => {
            if rng.gen::<f64>() < rate.min(1.0) {
                1
            } else {
                0
            }
        }
    }
}

fn uniform_in_zone<R: Rng>(area: &ServiceArea, zone: ZoneId, rng: &mut R) -> Point {
    let origin = area.zone_origin(zone);
    Point::new(
        origin.x + rng.gen::<f64>() * area.zone_edge,
        origin.y + rng.gen::<f64>() * area.zone_edge,
    )
}

fn uniform_in_area<R: Rng>(area: &ServiceArea, rng: &mut R) -> Point {
    Point::new(rng.gen::<f64>() * area.width, rng.gen::<f64>() * area.height)
}

fn draw_weight<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> f64 {
    match config.weight_dist {
        WeightDist::Uniform => {
            config.weight_min + rng.gen::<f64>() * (config.weight_max - config.weight_min)
        }
        WeightDist::TruncatedNormal => {
            let normal = Normal::new(config.weight_mean, config.weight_sd)
                .expect("weight distribution parameters");
            for _ in 0..256 {
                let w = normal.sample(rng);
                if w >= config.weight_min && w <= config.weight_max {
                    return w;
                }
            }
            (config.weight_min + config.weight_max) / 2.0
        }
    }
}

/// Arrivals for one step: per zone, a drawn number of requests (pickup inside
/// the zone, delivery anywhere in the area) and couriers (entry inside the
/// zone). Times are uniform within the step window.
pub fn generate_arrivals<R: Rng>(
    config: &ScenarioConfig,
    area: &ServiceArea,
    step: usize,
    next_request_id: &mut u64,
    next_courier_id: &mut u64,
    rng: &mut R,
) -> (Vec<Request>, Vec<CourierArrival>) {
    let step_start = step as f64 * config.dt;
    let mut requests = Vec::new();
    let mut couriers = Vec::new();
    for z in 0..area.num_zones() {
        let zone = ZoneId(z);
        let n_req = arrivals_in_step(config.arrival_law, config.request_rate, rng);
        for _ in 0..n_req {
            let pickup = uniform_in_zone(area, zone, rng);
            let delivery = uniform_in_area(area, rng);
            let release_time = step_start + rng.gen::<f64>() * config.dt;
            let weight = draw_weight(config, rng);
            // a request no courier could ever serve on time is rejected at
            // the door rather than generated
            let direct = crate::geometry::travel_minutes(pickup.distance(delivery), config.courier_speed);
            if direct > config.guarantee {
                continue;
            }
            requests.push(Request {
                id: RequestId(*next_request_id),
                pickup,
                delivery,
                release_time,
                guarantee: config.guarantee,
                weight,
                status: RequestStatus::Pending,
            });
            *next_request_id += 1;
        }
        let n_cou = arrivals_in_step(config.arrival_law, config.courier_rate, rng);
        for _ in 0..n_cou {
            couriers.push(CourierArrival {
                id: CourierId(*next_courier_id),
                entry_time: step_start + rng.gen::<f64>() * config.dt,
                entry_point: uniform_in_zone(area, zone, rng),
            });
            *next_courier_id += 1;
        }
    }
    (requests, couriers)
}

/// The whole day's streams from a dedicated seed.
pub fn generate_streams(
    config: &ScenarioConfig,
    area: &ServiceArea,
    seed: u64,
) -> (Vec<Request>, Vec<CourierArrival>) {
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    let mut requests = Vec::new();
    let mut couriers = Vec::new();
    let mut next_request = 0u64;
    let mut next_courier = 0u64;
    for step in 0..config.steps() {
        let (r, c) = generate_arrivals(config, area, step, &mut next_request, &mut next_courier, &mut rng);
        requests.extend(r);
        couriers.extend(c);
    }
    (requests, couriers)
}

/// FNV-1a checksum over the canonical encoding of a stream pair; used to
/// prove that paired comparisons consumed identical arrivals.
pub fn stream_checksum(requests: &[Request], couriers: &[CourierArrival]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    };
    for r in requests {
        eat(r.id.0);
        eat(r.pickup.x.to_bits());
        eat(r.pickup.y.to_bits());
        eat(r.delivery.x.to_bits());
        eat(r.delivery.y.to_bits());
        eat(r.release_time.to_bits());
        eat(r.weight.to_bits());
    }
    for c in couriers {
        eat(c.id.0);
        eat(c.entry_time.to_bits());
        eat(c.entry_point.x.to_bits());
        eat(c.entry_point.y.to_bits());
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rates_generate_nothing() {
        let mut config = ScenarioConfig::paper_small();
        config.request_rate = 0.0;
        config.courier_rate = 0.0;
        let area = config.area().unwrap();
        let (r, c) = generate_streams(&config, &area, 7);
        assert!(r.is_empty());
        assert!(c.is_empty());
    }

    #[test]
    fn pickups_stay_in_their_zone_and_weights_in_range() {
        let config = ScenarioConfig::paper_small();
        let area = config.area().unwrap();
        let (requests, couriers) = generate_streams(&config, &area, 3);
        assert!(!requests.is_empty());
        assert!(!couriers.is_empty());
        for r in &requests {
            assert!(area.contains(r.pickup));
            assert!(area.contains(r.delivery));
            assert!(r.weight >= config.weight_min && r.weight <= config.weight_max);
            assert!(r.release_time >= 0.0 && r.release_time <= config.horizon);
        }
    }

    #[test]
    fn mean_arrivals_track_the_rate() {
        let mut config = ScenarioConfig::paper_small();
        config.width = 1.0;
        config.height = 1.0;
        config.zone_edge = 0.5;
        config.depot_x = 0.5;
        config.depot_y = 0.5;
        config.request_rate = 0.3;
        config.courier_rate = 0.0;
        config.horizon = 480.0;
        let area = config.area().unwrap();
        // many replications to smooth the law of large numbers
        let mut total = 0usize;
        let reps = 200u64;
        for seed in 0..reps {
            total += generate_streams(&config, &area, seed).0.len();
        }
        let expected = 0.3 * 4.0 * 48.0 * reps as f64;
        let got = total as f64;
        assert!(
            (got - expected).abs() / expected < 0.02,
            "mean arrivals {got} vs expected {expected}"
        );
    }

    #[test]
    fn streams_are_deterministic_per_seed() {
        let config = ScenarioConfig::paper_small();
        let area = config.area().unwrap();
        let (r1, c1) = generate_streams(&config, &area, 11);
        let (r2, c2) = generate_streams(&config, &area, 11);
        assert_eq!(stream_checksum(&r1, &c1), stream_checksum(&r2, &c2));
        let (r3, c3) = generate_streams(&config, &area, 12);
        assert_ne!(stream_checksum(&r1, &c1), stream_checksum(&r3, &c3));
    }
}
