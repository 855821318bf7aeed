//! Geodetic primitives: WGS84 points, a transverse-Mercator plane for the
//! zone-9 plane rectangular system (origin 36°N, 139°50'E, k0 = 0.9999), and
//! great-circle distances.
//!
//! Two frames are available. [`TransverseMercator::zone9`] is the frame used by
//! the graph builder; it projects on a sphere of [`EARTH_RADIUS_M`] so that
//! planar k-NN ranking agrees with the haversine radius filter to within the
//! zone scale error. [`TransverseMercator::epsg6677`] is the same zone on the
//! GRS80 ellipsoid (EPSG:6677) for interchange with other GIS tooling.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Mean earth radius used by [`haversine_m`].
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub const ZONE9_LAT0_DEG: f64 = 36.0;
pub const ZONE9_LON0_DEG: f64 = 139.0 + 50.0 / 60.0;
pub const ZONE9_SCALE: f64 = 0.9999;
/// Half-width of the accepted zone around the origin, in degrees.
pub const ZONE_HALF_WIDTH_DEG: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate lat={lat} lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("point lat={lat} lon={lon} is outside the projection zone")]
    OutOfZone { lat: f64, lon: f64 },
    #[error("plane coordinate x={x} y={y} is not finite or out of range")]
    InvalidPlane { x: f64, y: f64 },
}

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon)
        {
            return Err(GeoError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

/// Metres east (`x`) and north (`y`) of the zone origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeoError> {
        if !x.is_finite() || !y.is_finite() || x.abs() >= 1e7 || y.abs() >= 1e7 {
            return Err(GeoError::InvalidPlane { x, y });
        }
        Ok(Self { x, y })
    }

    pub fn distance(&self, other: &PlanePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub semi_major_m: f64,
    pub flattening: f64,
}

impl Ellipsoid {
    pub const GRS80: Ellipsoid = Ellipsoid { semi_major_m: 6_378_137.0, flattening: 1.0 / 298.257_222_101 };
    pub const SPHERE: Ellipsoid = Ellipsoid { semi_major_m: EARTH_RADIUS_M, flattening: 0.0 };
}

/// Gauss-Krüger transverse Mercator, Krüger series truncated after the n⁴ terms.
#[derive(Debug, Clone)]
pub struct TransverseMercator {
    lat0: f64,
    lon0: f64,
    eccentricity: f64,
    /// k0 times the rectifying radius.
    scaled_radius: f64,
    alpha: [f64; 4],
    beta: [f64; 4],
    xi0: f64,
}

impl TransverseMercator {
    pub fn new(ellipsoid: Ellipsoid, lat0_deg: f64, lon0_deg: f64, scale: f64) -> Self {
        let f = ellipsoid.flattening;
        let n = f / (2.0 - f);
        let (n2, n3, n4) = (n * n, n * n * n, n * n * n * n);
        let rectifying = ellipsoid.semi_major_m / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0);
        let alpha = [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0,
            49561.0 * n4 / 161280.0,
        ];
        let beta = [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0,
            4397.0 * n4 / 161280.0,
        ];
        let mut tm = Self {
            lat0: lat0_deg,
            lon0: lon0_deg,
            eccentricity: (f * (2.0 - f)).sqrt(),
            scaled_radius: scale * rectifying,
            alpha,
            beta,
            xi0: 0.0,
        };
        let chi0 = tm.conformal_tan(lat0_deg.to_radians()).atan();
        tm.xi0 = chi0 + (0..4).map(|j| tm.alpha[j] * (2.0 * (j + 1) as f64 * chi0).sin()).sum::<f64>();
        tm
    }

    /// Zone 9 frame on the haversine sphere.
    pub fn zone9() -> Self {
        Self::new(Ellipsoid::SPHERE, ZONE9_LAT0_DEG, ZONE9_LON0_DEG, ZONE9_SCALE)
    }

    /// Zone 9 frame on GRS80, i.e. EPSG:6677.
    pub fn epsg6677() -> Self {
        Self::new(Ellipsoid::GRS80, ZONE9_LAT0_DEG, ZONE9_LON0_DEG, ZONE9_SCALE)
    }

    fn in_zone(&self, lat: f64, lon: f64) -> bool {
        (lat - self.lat0).abs() <= ZONE_HALF_WIDTH_DEG && (lon - self.lon0).abs() <= ZONE_HALF_WIDTH_DEG
    }

    /// tan of the conformal latitude.
    fn conformal_tan(&self, phi: f64) -> f64 {
        let tau = phi.tan();
        let e = self.eccentricity;
        if e == 0.0 {
            return tau;
        }
        let sigma = (e * (e * phi.sin()).atanh()).sinh();
        tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt()
    }

    /// Inverse of [`Self::conformal_tan`] by Newton iteration.
    fn geodetic_tan(&self, tau_conf: f64) -> f64 {
        let e = self.eccentricity;
        if e == 0.0 {
            return tau_conf;
        }
        let e2 = e * e;
        let mut tau = tau_conf;
        for _ in 0..8 {
            let s = (1.0 + tau * tau).sqrt();
            let sigma = (e * (e * tau / s).atanh()).sinh();
            let tau_i = tau * (1.0 + sigma * sigma).sqrt() - sigma * s;
            let dtau = (tau_conf - tau_i) / (1.0 + tau_i * tau_i).sqrt() * (1.0 + (1.0 - e2) * tau * tau)
                / ((1.0 - e2) * s);
            tau += dtau;
            if dtau.abs() < 1e-15 * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }

    pub fn project(&self, p: GeoPoint) -> Result<PlanePoint, GeoError> {
        if !self.in_zone(p.lat, p.lon) {
            return Err(GeoError::OutOfZone { lat: p.lat, lon: p.lon });
        }
        let phi = p.lat.to_radians();
        let dlambda = (p.lon - self.lon0).to_radians();
        let t = self.conformal_tan(phi);
        let xi_p = t.atan2(dlambda.cos());
        let eta_p = (dlambda.sin() / (1.0 + t * t).sqrt()).atanh();
        let mut xi = xi_p;
        let mut eta = eta_p;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
            eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
        }
        PlanePoint::new(self.scaled_radius * eta, self.scaled_radius * (xi - self.xi0))
    }

    pub fn unproject(&self, p: PlanePoint) -> Result<GeoPoint, GeoError> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(GeoError::InvalidPlane { x: p.x, y: p.y });
        }
        let xi = p.y / self.scaled_radius + self.xi0;
        let eta = p.x / self.scaled_radius;
        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi_p -= b * (k * xi).sin() * (k * eta).cosh();
            eta_p -= b * (k * xi).cos() * (k * eta).sinh();
        }
        let tau_conf = xi_p.sin() / (eta_p.sinh().powi(2) + xi_p.cos().powi(2)).sqrt();
        let lat = self.geodetic_tan(tau_conf).atan().to_degrees();
        let lon = self.lon0 + eta_p.sinh().atan2(xi_p.cos()).to_degrees();
        if !self.in_zone(lat, lon) {
            return Err(GeoError::OutOfZone { lat, lon });
        }
        GeoPoint::new(lat, lon)
    }
}

thread_local! {
    static ZONE9: TransverseMercator = TransverseMercator::zone9();
}

/// Project into the zone-9 plane used throughout graph construction.
pub fn project(p: GeoPoint) -> Result<PlanePoint, GeoError> {
    ZONE9.with(|tm| tm.project(p))
}

pub fn unproject(p: PlanePoint) -> Result<GeoPoint, GeoError> {
    ZONE9.with(|tm| tm.unproject(p))
}

/// Degrees of latitude spanned by `metres` on the haversine sphere.
pub fn metres_to_lat_deg(metres: f64) -> f64 {
    metres / EARTH_RADIUS_M * 180.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn haversine_identity_and_meridian_degree() {
        assert_eq!(haversine_m(gp(36.0, 140.0), gp(36.0, 140.0)), 0.0);
        // one degree along a meridian: R * pi / 180
        let oracle = EARTH_RADIUS_M * PI / 180.0;
        let d = haversine_m(gp(35.0, 139.0), gp(36.0, 139.0));
        assert_abs_diff_eq!(d, oracle, epsilon = 1e-6);
        assert_abs_diff_eq!(d, 111_195.0, epsilon = 5.0);
    }

    #[test]
    fn haversine_small_east_offset_matches_planar_oracle() {
        let oracle = 36f64.to_radians().cos() * 0.02 * EARTH_RADIUS_M * PI / 180.0;
        let d = haversine_m(gp(36.0, 140.0), gp(36.0, 140.02));
        assert_abs_diff_eq!(d, oracle, epsilon = 10.0);
        assert_abs_diff_eq!(d, 1_800.0, epsilon = 10.0);
    }

    #[test]
    fn origin_maps_to_origin() {
        for tm in [TransverseMercator::zone9(), TransverseMercator::epsg6677()] {
            let p = tm.project(gp(ZONE9_LAT0_DEG, ZONE9_LON0_DEG)).unwrap();
            assert_abs_diff_eq!(p.x, 0.0, epsilon = 0.01);
            assert_abs_diff_eq!(p.y, 0.0, epsilon = 0.01);
            let g = tm.unproject(PlanePoint { x: 0.0, y: 0.0 }).unwrap();
            assert_abs_diff_eq!(g.lat, ZONE9_LAT0_DEG, epsilon = 1e-7);
            assert_abs_diff_eq!(g.lon, ZONE9_LON0_DEG, epsilon = 1e-7);
        }
    }

    #[test]
    fn east_offset_increases_longitude() {
        let g = unproject(PlanePoint { x: 1000.0, y: 0.0 }).unwrap();
        assert!(g.lon > ZONE9_LON0_DEG);
    }

    #[test]
    fn out_of_zone_rejected() {
        assert!(matches!(project(gp(43.0, 141.3)), Err(GeoError::OutOfZone { .. })));
        assert!(matches!(project(gp(36.0, 135.0)), Err(GeoError::OutOfZone { .. })));
    }

    #[test]
    fn invalid_coordinates_rejected() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(PlanePoint::new(2e7, 0.0).is_err());
    }

    #[test]
    fn grs80_scale_at_origin_is_k0() {
        // meridional radius of curvature at 36 deg on GRS80
        let e2 = Ellipsoid::GRS80.flattening * (2.0 - Ellipsoid::GRS80.flattening);
        let s2 = 36f64.to_radians().sin().powi(2);
        let m = Ellipsoid::GRS80.semi_major_m * (1.0 - e2) / (1.0 - e2 * s2).powf(1.5);
        let dlat = 1e-4;
        let tm = TransverseMercator::epsg6677();
        let p = tm.project(gp(ZONE9_LAT0_DEG + dlat, ZONE9_LON0_DEG)).unwrap();
        let expected = ZONE9_SCALE * m * dlat.to_radians();
        assert!((p.y - expected).abs() / expected < 1e-6);
    }

    #[test]
    fn grs80_round_trip() {
        let tm = TransverseMercator::epsg6677();
        for i in 0..25 {
            let lat = 33.5 + 0.2 * i as f64;
            let lon = 137.5 + 0.19 * i as f64;
            let back = tm.unproject(tm.project(gp(lat, lon)).unwrap()).unwrap();
            assert_abs_diff_eq!(back.lat, lat, epsilon = 1e-9);
            assert_abs_diff_eq!(back.lon, lon, epsilon = 1e-9);
        }
    }

    #[test]
    fn plane_grid_round_trip() {
        for i in 0..10 {
            for j in 0..10 {
                let p = PlanePoint { x: -90_000.0 + 20_000.0 * i as f64, y: -90_000.0 + 20_000.0 * j as f64 };
                let q = project(unproject(p).unwrap()).unwrap();
                assert_abs_diff_eq!(q.x, p.x, epsilon = 1e-5);
                assert_abs_diff_eq!(q.y, p.y, epsilon = 1e-5);
            }
        }
    }
}
