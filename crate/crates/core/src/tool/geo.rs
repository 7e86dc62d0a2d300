//! GPS fixes to T-R distance.
//!
//! Spherical earth: great-circle ground range by the haversine formula, then
//! the altitude difference as the other leg of a right triangle. Good to a
//! few tenths of a percent over the sub-kilometre links of a forest site.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IUGG mean earth radius.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl GpsFix {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Self {
        GpsFix { lat_deg, lon_deg, alt_m }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lat_deg.is_finite() && self.lon_deg.is_finite() && self.alt_m.is_finite()) {
            return Err(Error::domain("GPS fix has a non-finite coordinate"));
        }
        if self.lat_deg.abs() > 90.0 {
            return Err(Error::domain(format!("latitude {} deg outside [-90, 90]", self.lat_deg)));
        }
        Ok(())
    }
}

pub fn ground_range_m(a: &GpsFix, b: &GpsFix) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (p1, p2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin())
}

/// 3-D separation of two fixes.
pub fn tr_distance_m(a: &GpsFix, b: &GpsFix) -> Result<f64> {
    Ok(ground_range_m(a, b)?.hypot(b.alt_m - a.alt_m))
}

/// Elevation of `b` seen from `a`, degrees above the horizontal.
pub fn elevation_deg(a: &GpsFix, b: &GpsFix) -> Result<f64> {
    let g = ground_range_m(a, b)?;
    Ok((b.alt_m - a.alt_m).atan2(g).to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coincident_and_vertical() {
        let a = GpsFix::new(45.7, 126.6, 150.0);
        assert_eq!(tr_distance_m(&a, &a).unwrap(), 0.0);
        let up = GpsFix { alt_m: 250.0, ..a };
        assert_abs_diff_eq!(tr_distance_m(&a, &up).unwrap(), 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(elevation_deg(&a, &up).unwrap(), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn one_degree_of_latitude() {
        // R * pi / 180.
        let a = GpsFix::new(10.0, 20.0, 0.0);
        let b = GpsFix::new(11.0, 20.0, 0.0);
        assert_abs_diff_eq!(ground_range_m(&a, &b).unwrap(), 111_195.08, epsilon = 0.01);
    }

    #[test]
    fn slant_link_at_thirty_degrees() {
        let a = GpsFix::new(0.0, 0.0, 0.0);
        let east = 300.0 / EARTH_RADIUS_M;
        let b = GpsFix::new(0.0, east.to_degrees(), 300.0 * 30f64.to_radians().tan());
        assert_abs_diff_eq!(elevation_deg(&a, &b).unwrap(), 30.0, epsilon = 1e-6);
        assert_abs_diff_eq!(tr_distance_m(&a, &b).unwrap(), 300.0 / 30f64.to_radians().cos(), epsilon = 1e-6);
    }

    #[test]
    fn bad_latitude() {
        assert!(ground_range_m(&GpsFix::new(91.0, 0.0, 0.0), &GpsFix::new(0.0, 0.0, 0.0)).is_err());
    }
}
