//! Interpretation of the `x`/`y` record columns.

use serde::{Deserialize, Serialize};

/// Mean Earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordSystem {
    /// Projected easting/northing in meters, Euclidean distance.
    #[default]
    Planar,
    /// `x` = longitude, `y` = latitude in degrees, great-circle distance.
    Geo,
}

impl CoordSystem {
    /// Distance in meters between two positions.
    pub fn distance(self, a: (f64, f64), b: (f64, f64)) -> f64 {
        match self {
            CoordSystem::Planar => (b.0 - a.0).hypot(b.1 - a.1),
            CoordSystem::Geo => haversine(a, b),
        }
    }

    pub fn validate(self, x: f64, y: f64) -> bool {
        match self {
            CoordSystem::Planar => x.is_finite() && y.is_finite(),
            CoordSystem::Geo => (-180.0..=180.0).contains(&x) && (-90.0..=90.0).contains(&y),
        }
    }
}

fn haversine((lon1, lat1): (f64, f64), (lon2, lat2): (f64, f64)) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Root-mean-square distance of `points` from their centroid, in meters.
///
/// Geographic points are projected onto a local equirectangular plane
/// around their mean latitude/longitude first.
pub fn radius_of_gyration(coords: CoordSystem, points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let (mx, my) = mean_xy(points);
    let project = |&(x, y): &(f64, f64)| -> (f64, f64) {
        match coords {
            CoordSystem::Planar => (x - mx, y - my),
            CoordSystem::Geo => {
                let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
                ((x - mx) * k * my.to_radians().cos(), (y - my) * k)
            }
        }
    };
    let projected: Vec<(f64, f64)> = points.iter().map(project).collect();
    // Re-centre in the projected plane; for planar input this is a no-op up to rounding.
    let (cx, cy) = mean_xy(&projected);
    let ss: f64 = projected
        .iter()
        .map(|&(x, y)| (x - cx).powi(2) + (y - cy).powi(2))
        .sum();
    (ss / n).sqrt()
}

fn mean_xy(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    (sx / n, sy / n)
}
