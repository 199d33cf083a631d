//! Selecting relocatable couriers and grouping them by agglomerative
//! hierarchical clustering with average linkage.
//!
//! The dissimilarity between couriers combines location distance with the
//! speed-weighted difference in remaining availability, so a mile of
//! separation and the time to ride a mile weigh the same.

use std::collections::BTreeMap;

use crate::domain::{CourierId, Crowdsourcee};
use crate::geometry::{Point, ServiceArea};
use crate::relocation::flow::{idle_by_zone, FlowPlan};

/// A group of relocatable couriers represented by its centroid.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub members: Vec<CourierId>,
    pub centroid_point: Point,
    /// Mean remaining availability of the members, minutes.
    pub centroid_budget: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// From each zone, the planned number of outgoing couriers is drawn from the
/// idle couriers with the most remaining availability, ties by id.
pub fn pick_relocatable(
    plan: &FlowPlan,
    area: &ServiceArea,
    couriers: &BTreeMap<CourierId, Crowdsourcee>,
    now: f64,
) -> Vec<CourierId> {
    let idle = idle_by_zone(area, couriers);
    let mut selected = Vec::new();
    for (zone, ids) in idle {
        let quota = plan.outflow(zone) as usize;
        if quota == 0 {
            continue;
        }
        let mut ranked: Vec<CourierId> = ids;
        ranked.sort_by(|a, b| {
            let ba = couriers[a].budget_remaining(now);
            let bb = couriers[b].budget_remaining(now);
            bb.partial_cmp(&ba).unwrap().then(a.cmp(b))
        });
        debug_assert!(ranked.len() >= quota, "outflow exceeds idle couriers in zone {zone}");
        selected.extend(ranked.into_iter().take(quota.min(plan.outflow(zone) as usize)));
    }
    selected.sort();
    selected
}

/// Pairwise dissimilarity: location distance plus speed-weighted
/// availability difference (budget in minutes, speed in mph).
fn courier_distance(a: &(Point, f64), b: &(Point, f64), speed: f64) -> f64 {
    a.0.distance(b.0) + speed * (a.1 - b.1).abs() / 60.0
}

/// Average-linkage distance between two clusters over their members.
fn linkage(p: &[usize], q: &[usize], features: &[(Point, f64)], speed: f64) -> f64 {
    let mut sum = 0.0;
    for &i in p {
        for &j in q {
            sum += courier_distance(&features[i], &features[j], speed);
        }
    }
    sum / (p.len() * q.len()) as f64
}

/// Agglomerative clustering of the given couriers: merge the closest pair of
/// clusters until the minimum inter-cluster distance exceeds `psi` miles.
/// Singletons are allowed; an empty input yields no clusters.
pub fn ah_cluster(
    couriers: &[(CourierId, Point, f64)],
    psi: f64,
    speed: f64,
) -> Vec<Cluster> {
    if couriers.is_empty() {
        return Vec::new();
    }
    let features: Vec<(Point, f64)> = couriers.iter().map(|(_, p, b)| (*p, *b)).collect();
    let mut groups: Vec<Vec<usize>> = (0..couriers.len()).map(|i| vec![i]).collect();
    loop {
        if groups.len() < 2 {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let d = linkage(&groups[i], &groups[j], &features, speed);
                let better = match &best {
                    None => true,
                    Some((bd, _, _)) => d < *bd - 1e-12,
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.unwrap();
        if d > psi {
            break;
        }
        let merged = groups.remove(j);
        groups[i].extend(merged);
        groups[i].sort();
    }
    groups
        .into_iter()
        .map(|members| {
            let n = members.len() as f64;
            let cx = members.iter().map(|&i| features[i].0.x).sum::<f64>() / n;
            let cy = members.iter().map(|&i| features[i].0.y).sum::<f64>() / n;
            let budget = members.iter().map(|&i| features[i].1).sum::<f64>() / n;
            Cluster {
                members: members.iter().map(|&i| couriers[i].0).collect(),
                centroid_point: Point::new(cx, cy),
                centroid_budget: budget,
            }
        })
        .collect()
}
