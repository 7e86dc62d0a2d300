//! Stochastic channel realizations.
//!
//! Two generators are provided. [`synth_sv`] draws Saleh-Valenzuela clustered
//! impulse responses. [`synth_forest_profile`] draws the three-component
//! forest channel: a LoS tap, a decaying LoS cluster whose analytic K and
//! RMS delay spread equal values drawn from target normals, and diffuse
//! low-power scatter behind the cluster.
//!
//! Forest cluster layout: M taps at delays s, 2s, ..., Ms samples with powers
//! proportional to r^(i-1). Separated taps (s >= 2) keep every cluster tap a
//! distinct local maximum for the peak search. Every tap is kept above the
//! extractor's relative window and above the scatter-derived noise floor, so
//! what is synthesized is exactly what a detector recovers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fitting::{Environment, LinkType};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Sounder sample interval, 1 / 30.72 MHz.
pub const SAMPLE_INTERVAL_S: f64 = 1.0 / 30.72e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TapClass {
    Los,
    Cluster,
    Scatter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    pub amp: Complex64,
}

impl Tap {
    pub fn new(delay_s: f64, amp: Complex64) -> Self {
        Tap { delay_s, amp }
    }

    pub fn power(&self) -> f64 {
        self.amp.norm_sqr()
    }
}

/// Serialized form of one tap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapRecord {
    pub delay_ns: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub class: TapClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathProfile {
    pub los: Tap,
    pub cluster: Vec<Tap>,
    pub scatter: Vec<Tap>,
}

impl MultipathProfile {
    pub fn single(tap: Tap) -> Self {
        MultipathProfile {
            los: tap,
            cluster: vec![],
            scatter: vec![],
        }
    }

    /// All taps with their class, sorted by delay (LoS first on ties).
    pub fn taps(&self) -> Vec<(TapClass, Tap)> {
        let mut out = Vec::with_capacity(1 + self.cluster.len() + self.scatter.len());
        out.push((TapClass::Los, self.los));
        out.extend(self.cluster.iter().map(|t| (TapClass::Cluster, *t)));
        out.extend(self.scatter.iter().map(|t| (TapClass::Scatter, *t)));
        out.sort_by(|a, b| a.1.delay_s.total_cmp(&b.1.delay_s));
        out
    }

    pub fn total_power(&self) -> f64 {
        self.taps().iter().map(|(_, t)| t.power()).sum()
    }

    pub fn scatter_fraction(&self) -> f64 {
        let total = self.total_power();
        if total == 0.0 {
            return 0.0;
        }
        self.scatter.iter().map(Tap::power).sum::<f64>() / total
    }

    /// K factor of the LoS tap against the cluster, scatter excluded.
    pub fn analytic_k_db(&self) -> Option<f64> {
        let rest: f64 = self.cluster.iter().map(Tap::power).sum();
        if rest == 0.0 {
            return None;
        }
        Some(10.0 * (self.los.power() / rest).log10())
    }

    /// RMS delay spread of LoS plus cluster, scatter excluded.
    pub fn analytic_rms_ds_s(&self) -> f64 {
        let taps: Vec<Tap> = std::iter::once(self.los).chain(self.cluster.iter().copied()).collect();
        let p: f64 = taps.iter().map(Tap::power).sum();
        let m1 = taps.iter().map(|t| t.power() * t.delay_s).sum::<f64>() / p;
        let m2 = taps.iter().map(|t| t.power() * (t.delay_s - m1).powi(2)).sum::<f64>() / p;
        m2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for (_, t) in self.taps() {
            if !(t.delay_s.is_finite() && t.delay_s >= 0.0 && t.amp.re.is_finite() && t.amp.im.is_finite()) {
                return Err(Error::domain(format!("invalid tap at {} s", t.delay_s)));
            }
            if t.delay_s < self.los.delay_s {
                return Err(Error::domain("a tap precedes the LoS tap"));
            }
        }
        if self.scatter_fraction() > 0.05 {
            return Err(Error::domain(format!(
                "scatter carries {:.2}% of total power, limit is 5%",
                100.0 * self.scatter_fraction()
            )));
        }
        Ok(())
    }

    pub fn records(&self) -> Vec<TapRecord> {
        self.taps()
            .into_iter()
            .map(|(class, t)| TapRecord {
                delay_ns: t.delay_s * 1e9,
                amp_re: t.amp.re,
                amp_im: t.amp.im,
                class,
            })
            .collect()
    }

    pub fn from_records(records: &[TapRecord]) -> Result<Self> {
        let mut los = None;
        let mut cluster = vec![];
        let mut scatter = vec![];
        for r in records {
            let t = Tap::new(r.delay_ns * 1e-9, Complex64::new(r.amp_re, r.amp_im));
            match r.class {
                TapClass::Los if los.is_some() => return Err(Error::domain("profile has more than one LoS tap")),
                TapClass::Los => los = Some(t),
                TapClass::Cluster => cluster.push(t),
                TapClass::Scatter => scatter.push(t),
            }
        }
        let los = los.ok_or_else(|| Error::arity("profile has no LoS tap"))?;
        let p = MultipathProfile { los, cluster, scatter };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    /// Cluster arrival rate, 1/s.
    pub cluster_rate_hz: f64,
    /// Ray arrival rate within a cluster, 1/s.
    pub ray_rate_hz: f64,
    /// Cluster power decay constant, s.
    pub cluster_decay_s: f64,
    /// Ray power decay constant, s.
    pub ray_decay_s: f64,
}

impl SvParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.rays_per_cluster == 0 {
            return Err(Error::arity("Saleh-Valenzuela needs at least one cluster and one ray"));
        }
        for (name, v) in [
            ("cluster rate", self.cluster_rate_hz),
            ("ray rate", self.ray_rate_hz),
            ("cluster decay", self.cluster_decay_s),
            ("ray decay", self.ray_decay_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Saleh-Valenzuela draw: Poisson cluster and ray arrivals, mean power
/// exp(-T/Gamma - tau/gamma), Rayleigh magnitudes, uniform phases. The first
/// ray of the first cluster arrives at 0 and is the LoS tap.
pub fn synth_sv(params: &SvParams, seed: u64) -> Result<MultipathProfile> {
    params.validate()?;
    let mut rng = stream_rng(seed, Stream::Profile);
    let cluster_gap = Exp::new(params.cluster_rate_hz).expect("rate checked");
    let ray_gap = Exp::new(params.ray_rate_hz).expect("rate checked");
    let mut taps = Vec::with_capacity(params.n_clusters * params.rays_per_cluster);
    let mut t_cluster = 0.0;
    for l in 0..params.n_clusters {
        if l > 0 {
            t_cluster += cluster_gap.sample(&mut rng);
        }
        let mut t_ray = 0.0;
        for m in 0..params.rays_per_cluster {
            if m > 0 {
                t_ray += ray_gap.sample(&mut rng);
            }
            let mean = (-t_cluster / params.cluster_decay_s - t_ray / params.ray_decay_s).exp();
            let e: f64 = Exp1.sample(&mut rng);
            let phase = rng.random_range(0.0..2.0 * PI);
            taps.push(Tap::new(t_cluster + t_ray, Complex64::from_polar((mean * e).sqrt(), phase)));
        }
    }
    let los = taps.remove(0);
    taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
    Ok(MultipathProfile {
        los,
        cluster: taps,
        scatter: vec![],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalSpec {
    pub fn fixed(mu: f64) -> Self {
        NormalSpec { mu, sigma: 0.0 }
    }
}

/// Geometry of the forest tap layout, in samples of [`ForestLayout::sample_interval_s`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestLayout {
    pub sample_interval_s: f64,
    pub max_cluster_taps: usize,
    pub min_spacing_samples: usize,
    pub max_cluster_delay_samples: usize,
    /// Relative power window the extractor applies; every LoS/cluster tap
    /// exceeds `window_power_ratio * window_margin` of the strongest tap.
    pub window_power_ratio: f64,
    pub window_margin: f64,
    pub scatter_fraction: f64,
    pub scatter_gap_samples: usize,
    /// Last scatter delay, samples after the LoS tap.
    pub scatter_end_samples: usize,
    /// Every LoS/cluster tap exceeds this multiple of the per-bin scatter power.
    pub scatter_clearance: f64,
}

impl Default for ForestLayout {
    fn default() -> Self {
        ForestLayout {
            sample_interval_s: SAMPLE_INTERVAL_S,
            max_cluster_taps: 8,
            min_spacing_samples: 2,
            max_cluster_delay_samples: 140,
            window_power_ratio: 1e-4,
            window_margin: 1.25,
            scatter_fraction: 0.017,
            scatter_gap_samples: 2,
            scatter_end_samples: 1180,
            scatter_clearance: 8.0,
        }
    }
}

impl ForestLayout {
    fn validate(&self) -> Result<()> {
        if !(self.sample_interval_s > 0.0) || self.max_cluster_taps == 0 || self.min_spacing_samples == 0 {
            return Err(Error::domain("forest layout needs a positive grid, taps and spacing"));
        }
        if self.min_spacing_samples > self.max_cluster_delay_samples {
            return Err(Error::domain("minimum tap spacing exceeds the maximum cluster delay"));
        }
        if !(0.0..1.0).contains(&self.window_power_ratio) || self.window_margin < 1.0 {
            return Err(Error::domain("window ratio must lie in [0, 1) and margin must be >= 1"));
        }
        if !(0.0..=0.05).contains(&self.scatter_fraction) {
            return Err(Error::domain("scatter fraction must lie in [0, 0.05]"));
        }
        if self.scatter_end_samples < self.max_cluster_delay_samples + self.scatter_gap_samples + 16 {
            return Err(Error::domain("scatter region is too short behind the cluster"));
        }
        Ok(())
    }

    fn scatter_bins(&self, cluster_end: usize) -> usize {
        self.scatter_end_samples + 1 - (cluster_end + self.scatter_gap_samples)
    }

    /// Per-bin scatter power relative to the LoS + cluster power.
    fn scatter_bin_power(&self, cluster_end: usize, scatter: bool) -> f64 {
        if !scatter || self.scatter_fraction == 0.0 {
            return 0.0;
        }
        self.scatter_fraction / (1.0 - self.scatter_fraction) / self.scatter_bins(cluster_end) as f64
    }

    /// Smallest tap power (relative to LoS + cluster) allowed for a cluster
    /// ending at `cluster_end`, given the strongest tap `p_max`.
    fn min_tap_power(&self, p_max: f64, cluster_end: usize, scatter: bool) -> f64 {
        (self.window_power_ratio * self.window_margin * p_max)
            .max(self.scatter_clearance * self.scatter_bin_power(cluster_end, scatter))
    }

    /// Largest K (dB) any layout can realize.
    pub fn max_k_db(&self, scatter: bool) -> f64 {
        let c = self.window_power_ratio * self.window_margin;
        let s = self.scatter_clearance * self.scatter_bin_power(self.max_cluster_delay_samples, scatter);
        // Single cluster tap holding eps: need eps >= c (1 - eps) and eps >= s.
        let eps_min = (c / (1.0 + c)).max(s);
        10.0 * ((1.0 - eps_min) / eps_min).log10() - 1e-6
    }

    /// Feasible RMS-DS range (s) at K (dB): one tap at the minimum or maximum delay.
    pub fn ds_range_s(&self, k_db: f64) -> (f64, f64) {
        let g = split_std(k_db);
        let ts = self.sample_interval_s;
        (
            self.min_spacing_samples as f64 * ts * g,
            self.max_cluster_delay_samples as f64 * ts * g,
        )
    }
}

fn cluster_power(k_db: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(k_db / 10.0))
}

/// sqrt(eps (1 - eps)): RMS-DS per unit delay of a two-tap split.
fn split_std(k_db: f64) -> f64 {
    let e = cluster_power(k_db);
    (e * (1.0 - e)).sqrt()
}

/// Forest channel targets; K and RMS-DS are jointly normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTargets {
    pub k_db: NormalSpec,
    pub rms_ds_ns: NormalSpec,
    /// Correlation between the K and RMS-DS draws.
    pub ds_k_correlation: f64,
    pub env: Environment,
    pub link: LinkType,
    pub elev_deg: Option<f64>,
    pub cluster_enabled: bool,
    pub scatter_enabled: bool,
    pub layout: ForestLayout,
}

pub const DEFAULT_DS_K_CORRELATION: f64 = -0.5;

impl StatTargets {
    pub fn new(k_db: NormalSpec, rms_ds_ns: NormalSpec) -> Self {
        StatTargets {
            k_db,
            rms_ds_ns,
            ds_k_correlation: DEFAULT_DS_K_CORRELATION,
            env: Environment::Other,
            link: LinkType::G2G,
            elev_deg: None,
            cluster_enabled: true,
            scatter_enabled: true,
            layout: ForestLayout::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("K", self.k_db), ("RMS-DS", self.rms_ds_ns)] {
            if !(n.mu.is_finite() && n.sigma.is_finite() && n.sigma >= 0.0) {
                return Err(Error::domain(format!("{name} target needs finite mu and sigma >= 0")));
            }
        }
        if !(-1.0..=1.0).contains(&self.ds_k_correlation) {
            return Err(Error::domain("K / RMS-DS correlation must lie in [-1, 1]"));
        }
        self.layout.validate()
    }

    fn is_fixed(&self) -> bool {
        self.k_db.sigma == 0.0 && self.rms_ds_ns.sigma == 0.0
    }
}

/// Cluster tap layout solved for one (K, RMS-DS) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDesign {
    pub n_taps: usize,
    pub spacing_samples: usize,
    pub decay_ratio: f64,
    /// LoS power, relative to LoS + cluster.
    pub los_power: f64,
    /// Cluster tap powers, relative to LoS + cluster.
    pub tap_powers: Vec<f64>,
}

impl ClusterDesign {
    fn build(n_taps: usize, spacing: usize, r: f64, eps: f64) -> Self {
        let w: Vec<f64> = (0..n_taps).map(|i| r.powi(i as i32)).collect();
        let sw: f64 = w.iter().sum();
        ClusterDesign {
            n_taps,
            spacing_samples: spacing,
            decay_ratio: r,
            los_power: 1.0 - eps,
            tap_powers: w.iter().map(|v| eps * v / sw).collect(),
        }
    }

    pub fn cluster_end(&self) -> usize {
        self.n_taps * self.spacing_samples
    }

    pub fn rms_ds_s(&self, ts: f64) -> f64 {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, p) in self.tap_powers.iter().enumerate() {
            let t = ((i + 1) * self.spacing_samples) as f64 * ts;
            m1 += p * t;
            m2 += p * t * t;
        }
        (m2 - m1 * m1).max(0.0).sqrt()
    }

    fn feasible(&self, layout: &ForestLayout, scatter: bool) -> bool {
        let p_max = self.tap_powers.iter().copied().fold(self.los_power, f64::max);
        let floor = layout.min_tap_power(p_max, self.cluster_end(), scatter);
        self.los_power >= floor && self.tap_powers.iter().all(|&p| p >= floor)
    }
}

const DECAY_GRID: usize = 48;
const DECAY_LOG10_SPAN: f64 = 2.0;

/// Solves the cluster layout for `k_db` and `ds_s`. Tries the most taps first
/// and the tightest spacing, returning `None` when no continuous layout hits
/// the target exactly.
pub fn design_cluster(k_db: f64, ds_s: f64, layout: &ForestLayout, scatter: bool) -> Option<ClusterDesign> {
    let eps = cluster_power(k_db);
    let ts = layout.sample_interval_s;
    for m in (2..=layout.max_cluster_taps).rev() {
        let max_s = layout.max_cluster_delay_samples / m;
        for s in layout.min_spacing_samples..=max_s {
            if let Some(d) = solve_decay(m, s, eps, ds_s, ts, layout, scatter) {
                return Some(d);
            }
        }
    }
    // One cluster tap: RMS-DS = s Ts sqrt(eps (1 - eps)) exactly.
    let g = (eps * (1.0 - eps)).sqrt();
    let s = (ds_s / (ts * g)).round();
    if s >= layout.min_spacing_samples as f64 && s <= layout.max_cluster_delay_samples as f64 {
        let d = ClusterDesign::build(1, s as usize, 1.0, eps);
        let ds = d.rms_ds_s(ts);
        if d.feasible(layout, scatter) && (ds / ds_s - 1.0).abs() <= 1e-9 {
            return Some(d);
        }
    }
    None
}

fn solve_decay(
    m: usize,
    s: usize,
    eps: f64,
    target: f64,
    ts: f64,
    layout: &ForestLayout,
    scatter: bool,
) -> Option<ClusterDesign> {
    let r_at = |i: usize| 10f64.powf(-DECAY_LOG10_SPAN + 2.0 * DECAY_LOG10_SPAN * i as f64 / (DECAY_GRID - 1) as f64);
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..DECAY_GRID {
        let r = r_at(i);
        let d = ClusterDesign::build(m, s, r, eps);
        if !d.feasible(layout, scatter) {
            prev = None;
            continue;
        }
        let f = d.rms_ds_s(ts) - target;
        if f == 0.0 {
            return Some(d);
        }
        if let Some((r0, f0)) = prev {
            if f0.signum() != f.signum() {
                return Some(bisect(m, s, eps, target, ts, r0, r, f0));
            }
        }
        prev = Some((r, f));
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn bisect(m: usize, s: usize, eps: f64, target: f64, ts: f64, mut lo: f64, mut hi: f64, f_lo: f64) -> ClusterDesign {
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        let f = ClusterDesign::build(m, s, mid, eps).rms_ds_s(ts) - target;
        if f.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Both ends are feasible and the feasible decay set is an interval.
    ClusterDesign::build(m, s, (lo * hi).sqrt(), eps)
}

/// One forest draw with its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestRealization {
    pub profile: MultipathProfile,
    pub drawn_k_db: f64,
    pub drawn_rms_ds_ns: f64,
    /// Targets after projection onto the realizable set.
    pub k_db: f64,
    pub rms_ds_ns: f64,
    pub projected: bool,
    pub design: Option<ClusterDesign>,
}

/// Draws a forest channel and returns only the profile.
pub fn synth_forest_profile(targets: &StatTargets, seed: u64) -> Result<MultipathProfile> {
    synth_forest_realization(targets, seed).map(|r| r.profile)
}

/// Draws (K, RMS-DS) from the targets, solves the cluster layout and builds
/// the profile. Random draws outside the realizable set are projected onto
/// it; fixed targets (both sigmas zero) outside it are an error.
pub fn synth_forest_realization(targets: &StatTargets, seed: u64) -> Result<ForestRealization> {
    targets.validate()?;
    let mut rng = stream_rng(seed, Stream::Profile);
    let z1: f64 = StandardNormal.sample(&mut rng);
    let z2: f64 = StandardNormal.sample(&mut rng);
    realize(targets, z1, z2, &mut rng)
}

/// `n` forest draws whose two standard-normal deviates are Latin-hypercube
/// stratified across the ensemble, so ensemble moments track the targets
/// with far less sampling noise than independent draws. Realization `i`
/// takes its phases from `derive_seed(seed, i)`.
pub fn synth_forest_ensemble(targets: &StatTargets, n: usize, seed: u64) -> Result<Vec<ForestRealization>> {
    targets.validate()?;
    let mut rng = stream_rng(seed, Stream::Ensemble);
    let z1 = stratified_normals(n, &mut rng);
    let z2 = stratified_normals(n, &mut rng);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = stream_rng(derive_seed(seed, i as u64), Stream::Profile);
            realize(targets, z1[i], z2[i], &mut r)
        })
        .collect()
}

/// One standard-normal deviate per equiprobable stratum, in random order.
fn stratified_normals(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|k| {
            // Open interval keeps the quantile finite.
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            unit.inverse_cdf((k as f64 + u) / n as f64)
        })
        .collect()
}

fn realize(targets: &StatTargets, z1: f64, z2: f64, rng: &mut ChaCha8Rng) -> Result<ForestRealization> {
    let layout = targets.layout;
    let scatter = targets.scatter_enabled;
    let rho = targets.ds_k_correlation;
    let drawn_k = targets.k_db.mu + targets.k_db.sigma * z1;
    let drawn_ds_ns = targets.rms_ds_ns.mu + targets.rms_ds_ns.sigma * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);

    let mut profile_taps = vec![];
    let (k_db, ds_ns, projected, design, los_power) = if !targets.cluster_enabled {
        (f64::INFINITY, 0.0, false, None, 1.0)
    } else {
        let fixed = targets.is_fixed();
        let k_max = layout.max_k_db(scatter);
        let mut k = drawn_k;
        if k > k_max {
            if fixed {
                return Err(Error::Infeasible {
                    constraint: format!("Rician K {k:.2} dB exceeds the detectable limit {k_max:.2} dB"),
                });
            }
            k = k_max;
        }
        let (lo, hi) = layout.ds_range_s(k);
        let mut ds = drawn_ds_ns * 1e-9;
        if ds < lo || ds > hi {
            if fixed {
                let side = if ds < lo { "below the one-tap minimum" } else { "above the maximum cluster extent" };
                return Err(Error::Infeasible {
                    constraint: format!(
                        "RMS delay spread {:.2} ns is {side} [{:.2}, {:.2}] ns at K = {k:.2} dB",
                        ds * 1e9,
                        lo * 1e9,
                        hi * 1e9
                    ),
                });
            }
            ds = ds.clamp(lo, hi);
        }
        let design = match design_cluster(k, ds, &layout, scatter) {
            Some(d) => d,
            None => {
                // Only grid quantization of a single far tap remains.
                let eps = cluster_power(k);
                let g = (eps * (1.0 - eps)).sqrt();
                let s = ((ds / (layout.sample_interval_s * g)).round() as usize)
                    .clamp(layout.min_spacing_samples, layout.max_cluster_delay_samples);
                let d = ClusterDesign::build(1, s, 1.0, eps);
                let realized = d.rms_ds_s(layout.sample_interval_s);
                if fixed && (realized / ds - 1.0).abs() > 0.02 {
                    return Err(Error::Infeasible {
                        constraint: format!(
                            "RMS delay spread {:.2} ns is not representable on the sample grid at K = {k:.2} dB",
                            ds * 1e9
                        ),
                    });
                }
                ds = realized;
                d
            }
        };
        let ts = layout.sample_interval_s;
        for (i, p) in design.tap_powers.iter().enumerate() {
            let phase = rng.random_range(0.0..2.0 * PI);
            let delay = ((i + 1) * design.spacing_samples) as f64 * ts;
            profile_taps.push((delay, *p, phase));
        }
        let proj = k != drawn_k || (ds * 1e9 - drawn_ds_ns).abs() > 1e-9 * drawn_ds_ns.abs().max(1.0);
        let lp = design.los_power;
        (k, ds * 1e9, proj, Some(design), lp)
    };

    let keep = if scatter { 1.0 - layout.scatter_fraction } else { 1.0 };
    let los = Tap::new(0.0, Complex64::new((los_power * keep).sqrt(), 0.0));
    let cluster: Vec<Tap> = profile_taps
        .into_iter()
        .map(|(d, p, ph)| Tap::new(d, Complex64::from_polar((p * keep).sqrt(), ph)))
        .collect();
    let mut scatter_taps = vec![];
    if scatter && layout.scatter_fraction > 0.0 {
        let end = design.as_ref().map_or(0, ClusterDesign::cluster_end);
        let first = end + layout.scatter_gap_samples;
        let n = layout.scatter_bins(end);
        let amp = (layout.scatter_fraction / n as f64).sqrt();
        for b in first..=layout.scatter_end_samples {
            let phase = rng.random_range(0.0..2.0 * PI);
            scatter_taps.push(Tap::new(b as f64 * layout.sample_interval_s, Complex64::from_polar(amp, phase)));
        }
    }
    Ok(ForestRealization {
        profile: MultipathProfile {
            los,
            cluster,
            scatter: scatter_taps,
        },
        drawn_k_db: drawn_k,
        drawn_rms_ds_ns: drawn_ds_ns,
        k_db,
        rms_ds_ns: ds_ns,
        projected,
        design,
    })
}

/// One shadow-fading draw, Normal(0, sigma_db).
pub fn draw_shadowing(sigma_db: f64, seed: u64) -> Result<f64> {
    Ok(draw_shadowing_series(sigma_db, 1, seed)?[0])
}

/// `n` independent shadow-fading draws from one seed.
pub fn draw_shadowing_series(sigma_db: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma_db.is_finite() && sigma_db >= 0.0) {
        return Err(Error::domain(format!("shadowing sigma must be non-negative, got {sigma_db}")));
    }
    let mut rng = stream_rng(seed, Stream::Shadowing);
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma_db * z
        })
        .collect())
}

/// Measured statistics of the two forests.
pub mod presets {
    use super::*;
    use crate::pathloss::presets::Forest;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "kebab-case")]
    pub enum Scenario {
        A2g30,
        A2g60,
        A2g90,
        G2g,
        Mixed,
    }

    impl Scenario {
        pub const ALL: [Scenario; 5] = [Scenario::A2g30, Scenario::A2g60, Scenario::A2g90, Scenario::G2g, Scenario::Mixed];

        pub fn name(self) -> &'static str {
            match self {
                Scenario::A2g30 => "a2g-30",
                Scenario::A2g60 => "a2g-60",
                Scenario::A2g90 => "a2g-90",
                Scenario::G2g => "g2g",
                Scenario::Mixed => "mixed",
            }
        }

        pub fn parse(s: &str) -> Option<Scenario> {
            let s = s.trim().to_ascii_lowercase().replace('_', "-");
            Scenario::ALL.into_iter().find(|x| x.name() == s)
        }

        pub fn elev_deg(self) -> Option<f64> {
            match self {
                Scenario::A2g30 => Some(30.0),
                Scenario::A2g60 => Some(60.0),
                Scenario::A2g90 => Some(90.0),
                _ => None,
            }
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    pub struct ChannelStats {
        pub shadowing_db: NormalSpec,
        pub rms_ds_ns: NormalSpec,
        pub k_db: NormalSpec,
    }

    pub fn channel_stats(forest: Forest, scenario: Scenario) -> ChannelStats {
        let n = |mu, sigma| NormalSpec { mu, sigma };
        let (sh, ds, k) = match (forest, scenario) {
            (Forest::Larch, Scenario::A2g30) => (n(0.0, 4.9), n(59.4, 30.9), n(14.2, 10.6)),
            (Forest::Larch, Scenario::A2g60) => (n(0.0, 2.9), n(51.5, 16.5), n(15.1, 7.2)),
            (Forest::Larch, Scenario::A2g90) => (n(0.0, 3.5), n(42.6, 21.0), n(23.1, 11.1)),
            (Forest::Larch, Scenario::G2g) => (n(0.0, 3.8), n(49.5, 28.6), n(19.8, 11.3)),
            (Forest::Larch, Scenario::Mixed) => (n(-0.1, 3.9), n(51.0, 27.1), n(17.4, 10.5)),
            (Forest::Birch, Scenario::A2g30) => (n(0.0, 2.8), n(107.6, 31.4), n(3.4, 5.8)),
            (Forest::Birch, Scenario::A2g60) => (n(0.0, 2.6), n(73.5, 27.1), n(13.1, 10.1)),
            (Forest::Birch, Scenario::A2g90) => (n(0.0, 3.1), n(73.1, 25.4), n(7.9, 8.7)),
            (Forest::Birch, Scenario::G2g) => (n(0.0, 2.6), n(80.1, 34.0), n(10.2, 9.8)),
            (Forest::Birch, Scenario::Mixed) => (n(0.0, 2.9), n(84.2, 33.2), n(7.6, 9.0)),
        };
        ChannelStats {
            shadowing_db: sh,
            rms_ds_ns: ds,
            k_db: k,
        }
    }

    pub fn targets(forest: Forest, scenario: Scenario) -> StatTargets {
        let s = channel_stats(forest, scenario);
        let mut t = StatTargets::new(s.k_db, s.rms_ds_ns);
        t.env = match forest {
            Forest::Larch => Environment::Larch,
            Forest::Birch => Environment::Birch,
        };
        t.link = if scenario == Scenario::G2g { LinkType::G2G } else { LinkType::A2G };
        t.elev_deg = scenario.elev_deg();
        t
    }
}
