use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;
const KM_PER_DEGREE_LAT: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Great-circle distance in km.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoParams {
    /// Fixed pilot bandwidth; `None` uses Scott's rule on the user's centers.
    pub pilot_bandwidth_km: Option<f64>,
    pub min_bandwidth_km: f64,
    /// Exponent on the pilot-density ratio for local bandwidths.
    pub adaptivity: f64,
    /// Kernels further than this many local bandwidths contribute nothing.
    pub cutoff_bandwidths: f64,
}

impl Default for GeoParams {
    fn default() -> Self {
        GeoParams {
            pilot_bandwidth_km: None,
            min_bandwidth_km: 0.1,
            adaptivity: 0.5,
            cutoff_bandwidths: 10.0,
        }
    }
}

fn gaussian(d: f64, h: f64) -> f64 {
    (-(d * d) / (2.0 * h * h)).exp() / (2.0 * std::f64::consts::PI * h * h)
}

/// Adaptive-bandwidth Gaussian KDE over one user's check-in locations.
///
/// Centers are stored once per distinct location with a multiplicity weight, which is equivalent
/// to one kernel per check-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    centers: Vec<(f64, f64)>,
    weights: Vec<f64>,
    pilot_bandwidth: f64,
    bandwidths: Vec<f64>,
    adaptivity: f64,
    cutoff: f64,
}

impl KdeModel {
    /// Returns `None` when there are no centers. Multiplicities must be positive.
    pub fn fit(points: &[((f64, f64), f64)], params: &GeoParams) -> Option<KdeModel> {
        let mut pts: Vec<((f64, f64), f64)> = points.iter().copied().filter(|&(_, w)| w > 0.0).collect();
        if pts.is_empty() {
            return None;
        }
        pts.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
        let mut centers: Vec<(f64, f64)> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (loc, w) in pts {
            if centers.last() == Some(&loc) {
                *weights.last_mut().unwrap() += w;
            } else {
                centers.push(loc);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();

        let h = params
            .pilot_bandwidth_km
            .unwrap_or_else(|| scott_bandwidth(&centers, &weights, total))
            .max(params.min_bandwidth_km);

        let mut model = KdeModel {
            bandwidths: vec![h; centers.len()],
            centers,
            weights,
            pilot_bandwidth: h,
            adaptivity: params.adaptivity,
            cutoff: params.cutoff_bandwidths,
        };
        // pilot density at every center, then geometric mean
        let pilot: Vec<f64> = model.centers.iter().map(|&c| model.density(c)).collect();
        let log_g = pilot
            .iter()
            .zip(&model.weights)
            .map(|(f, w)| w * f.ln())
            .sum::<f64>()
            / total;
        model.bandwidths = pilot
            .iter()
            .map(|f| h * ((f.ln() - log_g) * -model.adaptivity).exp())
            .collect();
        Some(model)
    }

    pub fn pilot_bandwidth(&self) -> f64 {
        self.pilot_bandwidth
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    /// Density in km⁻² at a location.
    pub fn density(&self, at: (f64, f64)) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let mut sum = 0.0;
        for ((&c, &w), &h) in self.centers.iter().zip(&self.weights).zip(&self.bandwidths) {
            let reach = self.cutoff * h;
            // latitude difference alone bounds the distance from below
            if (at.0 - c.0).abs() * KM_PER_DEGREE_LAT > reach {
                continue;
            }
            let d = haversine_km(at, c);
            if d <= reach {
                sum += w * gaussian(d, h);
            }
        }
        sum / total
    }
}

/// Scott's rule `σ · n^(−1/6)` in km, with σ pooled over a local tangent-plane projection.
///
/// `n` counts distinct locations so that repeating the whole center set leaves the bandwidth alone.
fn scott_bandwidth(centers: &[(f64, f64)], weights: &[f64], total: f64) -> f64 {
    let mean_lat = centers.iter().zip(weights).map(|(c, w)| c.0 * w).sum::<f64>() / total;
    let mean_lon = centers.iter().zip(weights).map(|(c, w)| c.1 * w).sum::<f64>() / total;
    let scale_lon = KM_PER_DEGREE_LAT * mean_lat.to_radians().cos();
    let mut var = 0.0;
    for (c, w) in centers.iter().zip(weights) {
        let y = (c.0 - mean_lat) * KM_PER_DEGREE_LAT;
        let x = (c.1 - mean_lon) * scale_lon;
        var += w * (x * x + y * y);
    }
    let sigma = (var / (2.0 * total)).sqrt();
    sigma * (centers.len() as f64).powf(-1.0 / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const NYC: (f64, f64) = (40.7580, -73.9855);

    fn fixed(h: f64) -> GeoParams {
        GeoParams { pilot_bandwidth_km: Some(h), ..Default::default() }
    }

    #[test]
    fn haversine_known_distance() {
        // one degree of latitude
        assert_relative_eq!(haversine_km((0.0, 0.0), (1.0, 0.0)), 111.195, epsilon = 1e-3);
        assert_eq!(haversine_km(NYC, NYC), 0.0);
    }

    #[test]
    fn single_center_peak() {
        let h = 0.7;
        let m = KdeModel::fit(&[(NYC, 1.0)], &fixed(h)).unwrap();
        assert_eq!(m.bandwidths(), &[h]);
        assert_relative_eq!(m.density(NYC), 1.0 / (2.0 * std::f64::consts::PI * h * h), max_relative = 1e-12);
    }

    #[test]
    fn far_field_vanishes() {
        let m = KdeModel::fit(&[(NYC, 1.0), ((40.70, -74.01), 2.0)], &fixed(10.0)).unwrap();
        // Chicago is over 1000 km away
        let chicago = (41.8781, -87.6298);
        assert!(haversine_km(NYC, chicago) > 1000.0);
        assert!(m.density(chicago) < 1e-12);
    }

    #[test]
    fn single_point_floor_bandwidth() {
        let m = KdeModel::fit(&[(NYC, 5.0)], &GeoParams::default()).unwrap();
        assert_eq!(m.pilot_bandwidth(), 0.1);
        assert!(m.bandwidths().iter().all(|&h| h > 0.0));
    }

    #[test]
    fn denser_centers_get_narrower_kernels() {
        let pts = [(NYC, 1.0), ((40.7585, -73.9850), 1.0), ((40.7590, -73.9860), 1.0), ((40.90, -73.80), 1.0)];
        let m = KdeModel::fit(&pts, &fixed(1.0)).unwrap();
        let far = m.centers.iter().position(|&c| c == (40.90, -73.80)).unwrap();
        let near = m.centers.iter().position(|&c| c == NYC).unwrap();
        assert!(m.bandwidths()[far] > m.bandwidths()[near]);
    }

    #[test]
    fn integrates_to_one() {
        let pts = [(NYC, 2.0), ((40.78, -73.96), 1.0), ((40.74, -74.00), 3.0), ((40.80, -73.90), 1.0)];
        let m = KdeModel::fit(&pts, &GeoParams::default()).unwrap();
        // midpoint rule over a ±0.5° box with spherical cell areas
        let (n, half) = (400, 0.5);
        let step = 2.0 * half / n as f64;
        let mut mass = 0.0;
        for i in 0..n {
            let lat = NYC.0 - half + (i as f64 + 0.5) * step;
            let cell = (step * KM_PER_DEGREE_LAT) * (step * KM_PER_DEGREE_LAT * lat.to_radians().cos());
            for j in 0..n {
                let lon = NYC.1 - half + (j as f64 + 0.5) * step;
                mass += m.density((lat, lon)) * cell;
            }
        }
        assert!((mass - 1.0).abs() < 0.05, "mass {mass}");
    }

    proptest! {
        #[test]
        fn duplicating_centers_changes_nothing(
            pts in prop::collection::vec(((40.6f64..40.9, -74.1f64..-73.8), 1u32..4), 1..8),
            q in (40.6f64..40.9, -74.1f64..-73.8),
        ) {
            let once: Vec<_> = pts.iter().map(|&(l, w)| (l, w as f64)).collect();
            let twice: Vec<_> = once.iter().chain(once.iter()).copied().collect();
            let a = KdeModel::fit(&once, &GeoParams::default()).unwrap();
            let b = KdeModel::fit(&twice, &GeoParams::default()).unwrap();
            let (da, db) = (a.density(q), b.density(q));
            prop_assert!((da - db).abs() <= 1e-9 * da.max(1e-300));
            prop_assert!(da.is_finite() && da >= 0.0);
        }
    }
}
