//! Multipath extraction and delay-domain statistics.
//!
//! A CIR bin is kept as a multipath component when it is a local maximum of
//! the power profile and
//! 1. lies at least `min_spacing_samples` from every stronger kept peak,
//! 2. exceeds the estimated noise floor,
//! 3. lies within `rel_threshold_db` of the strongest peak.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::SampleStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NoiseFloorMethod {
    /// Median power of the trailing `fraction` of bins.
    TrailingWindow { fraction: f64 },
    /// `percentile` (0-100) of all bin powers.
    Percentile { percentile: f64 },
}

/// Scale on which `rel_threshold_db` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowScale {
    /// Threshold is 10 log10 of a power ratio.
    PowerDb,
    /// Threshold is 10 log10 of an amplitude ratio: -20 dB admits taps down
    /// to 1e-4 of the peak power.
    #[default]
    LinearAmplitudeDb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosMode {
    #[default]
    FirstArrival,
    Strongest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSearchConfig {
    pub min_spacing_samples: usize,
    pub noise_floor: NoiseFloorMethod,
    pub noise_margin_db: f64,
    pub rel_threshold_db: f64,
    pub window_scale: WindowScale,
    pub los_mode: LosMode,
}

impl Default for PeakSearchConfig {
    fn default() -> Self {
        PeakSearchConfig {
            min_spacing_samples: 1,
            noise_floor: NoiseFloorMethod::TrailingWindow { fraction: 0.25 },
            noise_margin_db: 6.0,
            rel_threshold_db: -20.0,
            window_scale: WindowScale::LinearAmplitudeDb,
            los_mode: LosMode::FirstArrival,
        }
    }
}

impl PeakSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_spacing_samples == 0 {
            return Err(Error::domain("minimum peak spacing must be at least one sample"));
        }
        if !(self.rel_threshold_db < 0.0) {
            return Err(Error::domain(format!(
                "relative threshold must be negative, got {} dB",
                self.rel_threshold_db
            )));
        }
        if !self.noise_margin_db.is_finite() {
            return Err(Error::domain("noise margin must be finite"));
        }
        match self.noise_floor {
            NoiseFloorMethod::TrailingWindow { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                Err(Error::domain(format!("trailing fraction must lie in (0, 1], got {fraction}")))
            }
            NoiseFloorMethod::Percentile { percentile } if !(0.0..=100.0).contains(&percentile) => {
                Err(Error::domain(format!("percentile must lie in [0, 100], got {percentile}")))
            }
            _ => Ok(()),
        }
    }

    /// Power ratio below the strongest peak that the relative threshold admits.
    pub fn window_power_ratio(&self) -> f64 {
        match self.window_scale {
            WindowScale::PowerDb => 10f64.powf(self.rel_threshold_db / 10.0),
            WindowScale::LinearAmplitudeDb => 10f64.powf(self.rel_threshold_db / 5.0),
        }
    }

    /// Spacing matching an effective bandwidth: ceil(fs / bw) samples.
    pub fn spacing_for_bandwidth(fs_hz: f64, bandwidth_hz: f64) -> usize {
        ((fs_hz / bandwidth_hz).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTap {
    pub delay_s: f64,
    pub power: f64,
}

/// Multipath components sorted by delay.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TapSet {
    pub taps: Vec<PathTap>,
}

impl TapSet {
    pub fn new(mut taps: Vec<PathTap>) -> Result<Self> {
        if let Some(t) = taps.iter().find(|t| !(t.power > 0.0 && t.power.is_finite() && t.delay_s.is_finite())) {
            return Err(Error::domain(format!("tap at {} s has invalid power {}", t.delay_s, t.power)));
        }
        taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
        Ok(TapSet { taps })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// The same taps with delays measured from the first one.
    pub fn relative_to_first(&self) -> TapSet {
        let t0 = self.taps.first().map_or(0.0, |t| t.delay_s);
        TapSet {
            taps: self.taps.iter().map(|t| PathTap { delay_s: t.delay_s - t0, power: t.power }).collect(),
        }
    }
}

/// Noise floor power: the configured statistic times the margin.
pub fn noise_floor(powers: &[f64], cfg: &PeakSearchConfig) -> f64 {
    if powers.is_empty() {
        return 0.0;
    }
    let mut region: Vec<f64> = match cfg.noise_floor {
        NoiseFloorMethod::TrailingWindow { fraction } => {
            let k = ((powers.len() as f64 * fraction).round() as usize).clamp(1, powers.len());
            powers[powers.len() - k..].to_vec()
        }
        NoiseFloorMethod::Percentile { .. } => powers.to_vec(),
    };
    region.sort_by(f64::total_cmp);
    let q = match cfg.noise_floor {
        NoiseFloorMethod::TrailingWindow { .. } => 0.5,
        NoiseFloorMethod::Percentile { percentile } => percentile / 100.0,
    };
    let stat = region[((region.len() - 1) as f64 * q).round() as usize];
    stat * 10f64.powf(cfg.noise_margin_db / 10.0)
}

/// Peak search; delays are bin index / fs.
pub fn detect_peaks(cir: &SampleStream, cfg: &PeakSearchConfig) -> Result<TapSet> {
    cfg.validate()?;
    let p = cir.powers();
    let floor = noise_floor(&p, cfg);
    let at = |i: isize| if i < 0 || i as usize >= p.len() { 0.0 } else { p[i as usize] };
    let mut cands: Vec<usize> = (0..p.len())
        .filter(|&i| {
            let v = p[i];
            v > floor && v > 0.0 && v >= at(i as isize - 1) && v >= at(i as isize + 1)
        })
        .collect();
    if cands.is_empty() {
        return Err(Error::NoSignal);
    }
    let p_max = cands.iter().map(|&i| p[i]).fold(0.0, f64::max);
    let min_power = p_max * cfg.window_power_ratio();
    cands.retain(|&i| p[i] >= min_power);
    // Strongest first; ties go to the earlier bin.
    cands.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = vec![];
    for i in cands {
        if kept.iter().all(|&k| k.abs_diff(i) >= cfg.min_spacing_samples) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    TapSet::new(
        kept.into_iter()
            .map(|i| PathTap {
                delay_s: i as f64 / cir.fs_hz,
                power: p[i],
            })
            .collect(),
    )
}

fn moments(taps: &TapSet) -> Result<(f64, f64)> {
    if taps.is_empty() {
        return Err(Error::arity("delay statistics of an empty tap set"));
    }
    let total: f64 = taps.taps.iter().map(|t| t.power).sum();
    let mean = taps.taps.iter().map(|t| t.power * t.delay_s).sum::<f64>() / total;
    let var = taps.taps.iter().map(|t| t.power * (t.delay_s - mean).powi(2)).sum::<f64>() / total;
    Ok((mean, var.max(0.0)))
}

/// Power-weighted mean delay.
pub fn mean_excess_delay(taps: &TapSet) -> Result<f64> {
    moments(taps).map(|m| m.0)
}

/// Power-weighted delay standard deviation.
pub fn rms_ds(taps: &TapSet) -> Result<f64> {
    moments(taps).map(|m| m.1.sqrt())
}

/// LoS power over the summed power of every other tap, in dB.
pub fn rician_k(taps: &TapSet, mode: LosMode) -> Result<f64> {
    if taps.len() < 2 {
        return Err(Error::UndefinedK(format!("{} tap(s), need at least 2", taps.len())));
    }
    let los = match mode {
        LosMode::FirstArrival => 0,
        LosMode::Strongest => (0..taps.len()).fold(0, |b, i| if taps.taps[i].power > taps.taps[b].power { i } else { b }),
    };
    let rest: f64 = taps.taps.iter().enumerate().filter(|(i, _)| *i != los).map(|(_, t)| t.power).sum();
    Ok(10.0 * (taps.taps[los].power / rest).log10())
}

/// Delay-domain summary of one CIR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub n_taps: usize,
    pub mean_delay_ns: f64,
    pub rms_ds_ns: f64,
    /// `None` for a single-tap CIR.
    pub k_db: Option<f64>,
}

/// Peak search followed by delay statistics, with delays measured from the
/// first detected tap.
pub fn extract(cir: &SampleStream, cfg: &PeakSearchConfig) -> Result<(TapSet, DelayStats)> {
    let taps = detect_peaks(cir, cfg)?.relative_to_first();
    let k = match rician_k(&taps, cfg.los_mode) {
        Ok(k) => Some(k),
        Err(Error::UndefinedK(_)) => None,
        Err(e) => return Err(e),
    };
    let stats = DelayStats {
        n_taps: taps.len(),
        mean_delay_ns: mean_excess_delay(&taps)? * 1e9,
        rms_ds_ns: rms_ds(&taps)? * 1e9,
        k_db: k,
    };
    Ok((taps, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::StreamOrigin;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn cir_from_powers(p: &[f64]) -> SampleStream {
        SampleStream::new(p.iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect(), 30.72e6, StreamOrigin::Cir)
    }

    fn taps(d_ns: &[f64], p: &[f64]) -> TapSet {
        TapSet::new(d_ns.iter().zip(p).map(|(d, p)| PathTap { delay_s: d * 1e-9, power: *p }).collect()).unwrap()
    }

    fn power_db_config() -> PeakSearchConfig {
        PeakSearchConfig {
            window_scale: WindowScale::PowerDb,
            ..Default::default()
        }
    }

    /// Taps at 0, -10 and -25 dB over a -40 dB floor.
    fn three_tap_cir() -> SampleStream {
        let mut p = vec![1e-4; 400];
        p[20] = 1.0;
        p[40] = 0.1;
        p[60] = 10f64.powf(-2.5);
        cir_from_powers(&p)
    }

    #[test]
    fn power_window_drops_the_weakest_tap() {
        let t = detect_peaks(&three_tap_cir(), &power_db_config()).unwrap();
        let bins: Vec<usize> = t.taps.iter().map(|x| (x.delay_s * 30.72e6).round() as usize).collect();
        assert_eq!(bins, [20, 40]);
    }

    #[test]
    fn amplitude_window_is_twice_as_wide() {
        let t = detect_peaks(&three_tap_cir(), &PeakSearchConfig::default()).unwrap();
        assert_eq!(t.len(), 3);
        let mut p = vec![1e-7; 400];
        p[20] = 1.0;
        p[40] = 10f64.powf(-4.5);
        assert_eq!(detect_peaks(&cir_from_powers(&p), &PeakSearchConfig::default()).unwrap().len(), 1);
        assert_abs_diff_eq!(PeakSearchConfig::default().window_power_ratio(), 1e-4, epsilon = 1e-18);
    }

    #[test]
    fn single_clean_tap() {
        let mut p = vec![0.0; 100];
        p[7] = 0.5;
        let t = detect_peaks(&cir_from_powers(&p), &PeakSearchConfig::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_abs_diff_eq!(t.taps[0].delay_s * 30.72e6, 7.0, epsilon = 1e-9);
    }

    #[test]
    fn spacing_merges_close_maxima() {
        let mut cfg = PeakSearchConfig { min_spacing_samples: 2, ..Default::default() };
        let t = detect_peaks(&cir_from_powers(&[0.0, 0.0, 1.0, 0.8, 0.0, 0.0, 0.0, 0.0]), &cfg).unwrap();
        assert_eq!(t.len(), 1);
        assert_abs_diff_eq!(t.taps[0].power, 1.0, epsilon = 1e-12);
        cfg.min_spacing_samples = 3;
        let t = detect_peaks(&cir_from_powers(&[0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]), &cfg).unwrap();
        assert_eq!(t.len(), 1);
        let plateau = detect_peaks(&cir_from_powers(&[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), &PeakSearchConfig { min_spacing_samples: 2, ..Default::default() }).unwrap();
        assert_eq!(plateau.len(), 1);
        assert_abs_diff_eq!(plateau.taps[0].delay_s * 30.72e6, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn silence_is_no_signal() {
        assert!(matches!(detect_peaks(&cir_from_powers(&[0.0; 64]), &PeakSearchConfig::default()), Err(Error::NoSignal)));
        assert!(matches!(detect_peaks(&cir_from_powers(&[1.0; 64]), &PeakSearchConfig::default()), Err(Error::NoSignal)));
    }

    #[test]
    fn delay_statistics_hand_values() {
        assert_eq!(mean_excess_delay(&taps(&[0.0], &[1.0])).unwrap(), 0.0);
        assert_eq!(rms_ds(&taps(&[0.0], &[1.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(mean_excess_delay(&taps(&[0.0, 100.0], &[1.0, 1.0])).unwrap(), 50e-9, epsilon = 1e-18);
        assert_abs_diff_eq!(rms_ds(&taps(&[0.0, 100.0], &[1.0, 1.0])).unwrap(), 50e-9, epsilon = 1e-18);
        let t = taps(&[0.0, 50.0, 100.0], &[0.5, 0.3, 0.2]);
        assert_abs_diff_eq!(mean_excess_delay(&t).unwrap(), 35e-9, epsilon = 1e-18);
        assert_abs_diff_eq!(rms_ds(&t).unwrap(), 1525f64.sqrt() * 1e-9, epsilon = 1e-17);
        assert!(matches!(rms_ds(&TapSet::default()), Err(Error::Arity(_))));
    }

    #[test]
    fn rician_k_hand_values() {
        assert_abs_diff_eq!(rician_k(&taps(&[0.0, 10.0], &[1.0, 1.0]), LosMode::FirstArrival).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rician_k(&taps(&[0.0, 10.0, 20.0], &[0.9, 0.06, 0.04]), LosMode::FirstArrival).unwrap(), 9.542_425, epsilon = 1e-6);
        assert!(rician_k(&taps(&[0.0, 10.0], &[0.2, 0.8]), LosMode::FirstArrival).unwrap() < 0.0);
        assert!(rician_k(&taps(&[0.0, 10.0], &[0.2, 0.8]), LosMode::Strongest).unwrap() > 0.0);
        assert!(matches!(rician_k(&taps(&[0.0], &[1.0]), LosMode::FirstArrival), Err(Error::UndefinedK(_))));
    }

    #[test]
    fn bandwidth_spacing() {
        assert_eq!(PeakSearchConfig::spacing_for_bandwidth(30.72e6, 18e6), 2);
        assert_eq!(PeakSearchConfig::spacing_for_bandwidth(30.72e6, 30.72e6), 1);
    }

    fn tapset_strategy() -> impl Strategy<Value = TapSet> {
        prop::collection::vec((0.0f64..2000.0, 1e-6f64..10.0), 2..12).prop_map(|v| {
            TapSet::new(v.into_iter().map(|(d, p)| PathTap { delay_s: d * 1e-9, power: p }).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn scale_invariance(t in tapset_strategy(), k in 1e-3f64..1e3) {
            let scaled = TapSet { taps: t.taps.iter().map(|x| PathTap { power: x.power * k, ..*x }).collect() };
            let a = rms_ds(&t).unwrap();
            let b = rms_ds(&scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-30) + 1e-24);
            let ka = rician_k(&t, LosMode::FirstArrival).unwrap();
            let kb = rician_k(&scaled, LosMode::FirstArrival).unwrap();
            prop_assert!((ka - kb).abs() <= 1e-12 * ka.abs().max(1.0));
        }

        #[test]
        fn translation_invariance(t in tapset_strategy(), shift_ns in -500.0f64..500.0) {
            let dt = shift_ns * 1e-9;
            let moved = TapSet { taps: t.taps.iter().map(|x| PathTap { delay_s: x.delay_s + dt, ..*x }).collect() };
            let a = rms_ds(&t).unwrap();
            prop_assert!((rms_ds(&moved).unwrap() - a).abs() <= 1e-9 * a + 1e-18);
            let m = mean_excess_delay(&t).unwrap();
            prop_assert!((mean_excess_delay(&moved).unwrap() - (m + dt)).abs() <= 1e-15);
        }
    }
}
