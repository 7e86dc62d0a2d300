//! Angular power spectrum and azimuth spread from directional sweeps.
//!
//! Sector powers are point masses at the sector centres. The RMS spread is
//! the power-weighted standard deviation of arrival angles, unwrapped at the
//! cut that minimizes it, so the 0/360 seam never inflates the result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECTORS: usize = 12;
pub const SECTOR_STEP_DEG: f64 = 30.0;
pub const HPBW_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorReading {
    pub azimuth_deg: f64,
    pub rssi_dbm: f64,
}

/// One full revolution of 12 sector measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSweep {
    pub readings: Vec<SectorReading>,
    pub hpbw_deg: f64,
}

impl SectorSweep {
    /// Validates and sorts by azimuth.
    pub fn new(mut readings: Vec<SectorReading>) -> Result<Self> {
        if readings.len() != SECTORS {
            return Err(Error::arity(format!("sweep needs {SECTORS} sectors, got {}", readings.len())));
        }
        for r in &readings {
            if !r.rssi_dbm.is_finite() {
                return Err(Error::domain(format!("RSSI at {} deg is not finite", r.azimuth_deg)));
            }
        }
        readings.sort_by(|a, b| a.azimuth_deg.total_cmp(&b.azimuth_deg));
        for (i, r) in readings.iter().enumerate() {
            let expect = i as f64 * SECTOR_STEP_DEG;
            if (r.azimuth_deg - expect).abs() > 1e-9 {
                return Err(Error::arity(format!(
                    "sector centred at {expect} deg is missing (found {} deg)",
                    r.azimuth_deg
                )));
            }
        }
        Ok(SectorSweep {
            readings,
            hpbw_deg: HPBW_DEG,
        })
    }
}

/// Normalized per-direction power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularPowerSpectrum {
    pub azimuth_deg: Vec<f64>,
    pub power: Vec<f64>,
}

impl AngularPowerSpectrum {
    /// Builds a spectrum from linear powers at arbitrary azimuths.
    /// Azimuths are wrapped to [0, 360) and sorted; powers are normalized.
    pub fn from_linear(azimuth_deg: &[f64], power: &[f64]) -> Result<Self> {
        if azimuth_deg.len() != power.len() || power.is_empty() {
            return Err(Error::arity("spectrum needs equal, non-zero numbers of azimuths and powers"));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || azimuth_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("spectrum powers must be finite and non-negative"));
        }
        let total: f64 = power.iter().sum();
        if total <= 0.0 {
            return Err(Error::domain("spectrum carries no power"));
        }
        let mut pairs: Vec<(f64, f64)> = azimuth_deg
            .iter()
            .zip(power)
            .map(|(a, p)| (a.rem_euclid(360.0), p / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(AngularPowerSpectrum {
            azimuth_deg: pairs.iter().map(|p| p.0).collect(),
            power: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Every azimuth shifted by `delta_deg`.
    pub fn rotated(&self, delta_deg: f64) -> Self {
        let az: Vec<f64> = self.azimuth_deg.iter().map(|a| a + delta_deg).collect();
        Self::from_linear(&az, &self.power).expect("rotation keeps a valid spectrum")
    }
}

pub fn aps_from_sweep(sweep: &SectorSweep) -> Result<AngularPowerSpectrum> {
    if sweep.readings.len() != SECTORS {
        return Err(Error::arity(format!("sweep needs {SECTORS} sectors, got {}", sweep.readings.len())));
    }
    let az: Vec<f64> = sweep.readings.iter().map(|r| r.azimuth_deg).collect();
    let p: Vec<f64> = sweep.readings.iter().map(|r| 10f64.powf(r.rssi_dbm / 10.0)).collect();
    AngularPowerSpectrum::from_linear(&az, &p)
}

/// Wrap-aware RMS azimuth spread in degrees.
pub fn rms_asa(aps: &AngularPowerSpectrum) -> f64 {
    let n = aps.azimuth_deg.len();
    if n < 2 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    // Cut the circle in each gap between consecutive azimuths and measure
    // angles counter-clockwise from the azimuth just after the cut.
    for start in 0..n {
        let origin = aps.azimuth_deg[start];
        let (mut m1, mut m2) = (0.0, 0.0);
        for (a, p) in aps.azimuth_deg.iter().zip(&aps.power) {
            let x = (a - origin).rem_euclid(360.0);
            m1 += p * x;
            m2 += p * x * x;
        }
        best = best.min((m2 - m1 * m1).max(0.0).sqrt());
    }
    best
}

/// Power-weighted circular mean arrival angle in [0, 360).
pub fn avg_asa(aps: &AngularPowerSpectrum) -> Result<f64> {
    let (mut s, mut c) = (0.0, 0.0);
    for (a, p) in aps.azimuth_deg.iter().zip(&aps.power) {
        let r = a.to_radians();
        s += p * r.sin();
        c += p * r.cos();
    }
    if s.hypot(c) < 1e-9 {
        return Err(Error::UndefinedMean);
    }
    Ok(s.atan2(c).to_degrees().rem_euclid(360.0))
}
