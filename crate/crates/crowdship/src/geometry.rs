//! Planar geometry and the zoned service area.
//!
//! Distances are Euclidean miles, speeds are miles per hour, and times are
//! minutes since the start of the operating day.

use thiserror::Error;

/// A location in the service area, in miles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance in miles.
    pub fn distance(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Position after moving `dist` miles from `self` toward `target`,
    /// clamped to `target` if `dist` overshoots.
    pub fn advance_toward(&self, target: Point, dist: f64) -> Point {
        let total = self.distance(target);
        if total <= f64::EPSILON || dist >= total {
            return target;
        }
        let f = dist / total;
        Point::new(self.x + (target.x - self.x) * f, self.y + (target.y - self.y) * f)
    }
}

/// Travel time in minutes to cover `dist` miles at `speed` mph.
pub fn travel_minutes(dist: f64, speed: f64) -> f64 {
    dist / speed * 60.0
}

/// Index of a square zone inside the service area, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZoneId(pub usize);

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("area {0}x{1} is not an integer multiple of zone edge {2}")]
    NotZoneAligned(f64, f64, f64),
    #[error("dimensions and zone edge must be positive")]
    NonPositive,
}

/// Rectangular service area partitioned into square zones, with the backup
/// vehicle depot somewhere inside.
#[derive(Debug, Clone)]
pub struct ServiceArea {
    pub width: f64,
    pub height: f64,
    pub zone_edge: f64,
    pub depot: Point,
    cols: usize,
    rows: usize,
}

impl ServiceArea {
    pub fn new(width: f64, height: f64, zone_edge: f64, depot: Point) -> Result<Self, GeometryError> {
        if width <= 0.0 || height <= 0.0 || zone_edge <= 0.0 {
            return Err(GeometryError::NonPositive);
        }
        let cols = width / zone_edge;
        let rows = height / zone_edge;
        if (cols - cols.round()).abs() > 1e-9 || (rows - rows.round()).abs() > 1e-9 {
            return Err(GeometryError::NotZoneAligned(width, height, zone_edge));
        }
        Ok(ServiceArea {
            width,
            height,
            zone_edge,
            depot,
            cols: cols.round() as usize,
            rows: rows.round() as usize,
        })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_zones(&self) -> usize {
        self.cols * self.rows
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Zone containing `p`. Cells are half-open except on the far boundary,
    /// so every in-area point maps to exactly one zone.
    pub fn zone_of(&self, p: Point) -> ZoneId {
        let col = ((p.x / self.zone_edge).floor() as isize).clamp(0, self.cols as isize - 1) as usize;
        let row = ((p.y / self.zone_edge).floor() as isize).clamp(0, self.rows as isize - 1) as usize;
        ZoneId(row * self.cols + col)
    }

    pub fn centroid(&self, z: ZoneId) -> Point {
        let col = z.0 % self.cols;
        let row = z.0 / self.cols;
        Point::new(
            (col as f64 + 0.5) * self.zone_edge,
            (row as f64 + 0.5) * self.zone_edge,
        )
    }

    /// Lower-left corner of a zone; cells span `zone_edge` in each direction.
    pub fn zone_origin(&self, z: ZoneId) -> Point {
        let col = z.0 % self.cols;
        let row = z.0 / self.cols;
        Point::new(col as f64 * self.zone_edge, row as f64 * self.zone_edge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_small_area_has_144_zones() {
        let area = ServiceArea::new(6.0, 6.0, 0.5, Point::new(3.0, 3.0)).unwrap();
        assert_eq!(area.num_zones(), 144);
    }

    #[test]
    fn misaligned_area_rejected() {
        let err = ServiceArea::new(6.3, 6.0, 0.5, Point::new(3.0, 3.0)).unwrap_err();
        assert!(matches!(err, GeometryError::NotZoneAligned(..)));
    }

    #[test]
    fn zone_mapping_is_total_partition() {
        let area = ServiceArea::new(2.0, 1.0, 0.5, Point::new(1.0, 0.5)).unwrap();
        assert_eq!(area.num_zones(), 8);
        // interior points map uniquely; centroids round-trip
        for z in 0..area.num_zones() {
            let c = area.centroid(ZoneId(z));
            assert_eq!(area.zone_of(c), ZoneId(z));
        }
        // far boundary clamps into the last cell
        assert_eq!(area.zone_of(Point::new(2.0, 1.0)), ZoneId(7));
    }

    #[test]
    fn advance_toward_clamps_at_target() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(3.0, 4.0);
        let mid = a.advance_toward(b, 2.5);
        assert!((mid.distance(a) - 2.5).abs() < 1e-12);
        let past = a.advance_toward(b, 99.0);
        assert_eq!(past, b);
    }

    #[test]
    fn travel_time_units() {
        // 2 miles at 10 mph is 12 minutes
        assert!((travel_minutes(2.0, 10.0) - 12.0).abs() < 1e-12);
    }
}
