//! LTE-style OFDM channel sounding.
//!
//! Transmit side: a Zadoff-Chu preamble of several periods followed by a
//! 14-symbol frame whose symbols 3 and 10 carry pilots. Receive side:
//! correlation sync against the preamble, CIR by circular correlation with
//! one preamble period, and CIR by inverting the pilot-estimated CFR.
//!
//! Transforms are forward unscaled and inverse scaled by 1/N. OFDM symbols
//! are built with an extra N/sqrt(n_subcarriers) gain so unit-modulus
//! subcarriers give unit mean sample power.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::synth::MultipathProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub n_fft: usize,
    pub n_subcarriers: usize,
    pub scs_hz: f64,
    pub n_symbols: usize,
    pub cp_long: usize,
    pub cp_short: usize,
    pub long_cp_symbols: Vec<usize>,
    pub fs_hz: f64,
    pub pilot_symbols: Vec<usize>,
    pub center_freq_ghz: f64,
    pub capture_len: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            n_fft: 2048,
            n_subcarriers: 1200,
            scs_hz: 15_000.0,
            n_symbols: 14,
            cp_long: 160,
            cp_short: 144,
            long_cp_symbols: vec![0, 7],
            fs_hz: 30.72e6,
            pilot_symbols: vec![3, 10],
            center_freq_ghz: 1.4,
            capture_len: 40_000,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 || self.n_subcarriers == 0 || !self.n_subcarriers.is_multiple_of(2) || self.n_subcarriers >= self.n_fft {
            return Err(Error::domain(format!(
                "need an even subcarrier count below the FFT size, got {} of {}",
                self.n_subcarriers, self.n_fft
            )));
        }
        if (self.fs_hz - self.n_fft as f64 * self.scs_hz).abs() > 1e-6 * self.fs_hz {
            return Err(Error::domain("sample rate must equal n_fft x subcarrier spacing"));
        }
        if self.long_cp_symbols.iter().chain(&self.pilot_symbols).any(|&s| s >= self.n_symbols) {
            return Err(Error::domain("symbol index outside the frame"));
        }
        if self.pilot_symbols.is_empty() {
            return Err(Error::domain("at least one pilot symbol is required"));
        }
        if self.cp_long > self.n_fft || self.cp_short > self.n_fft {
            return Err(Error::domain("cyclic prefix longer than a symbol"));
        }
        if !(self.center_freq_ghz > 0.0) {
            return Err(Error::domain("carrier frequency must be positive"));
        }
        Ok(())
    }

    pub fn sample_interval_s(&self) -> f64 {
        1.0 / self.fs_hz
    }

    pub fn cp_len(&self, symbol: usize) -> usize {
        if self.long_cp_symbols.contains(&symbol) {
            self.cp_long
        } else {
            self.cp_short
        }
    }

    /// Offset of the symbol's cyclic prefix within the frame.
    pub fn symbol_start(&self, symbol: usize) -> usize {
        (0..symbol).map(|s| self.cp_len(s) + self.n_fft).sum()
    }

    /// Offset of the symbol body (after the prefix) within the frame.
    pub fn body_start(&self, symbol: usize) -> usize {
        self.symbol_start(symbol) + self.cp_len(symbol)
    }

    pub fn frame_len(&self) -> usize {
        self.symbol_start(self.n_symbols)
    }

    pub fn data_symbols(&self) -> Vec<usize> {
        (0..self.n_symbols).filter(|s| !self.pilot_symbols.contains(s)).collect()
    }

    /// FFT bins of the active subcarriers, ordered by subcarrier index
    /// -half..-1, 1..half. DC is unused.
    pub fn active_bins(&self) -> Vec<usize> {
        let half = (self.n_subcarriers / 2) as i64;
        let n = self.n_fft as i64;
        (-half..=half)
            .filter(|&k| k != 0)
            .map(|k| k.rem_euclid(n) as usize)
            .collect()
    }

    fn symbol_gain(&self) -> f64 {
        self.n_fft as f64 / (self.n_subcarriers as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamOrigin {
    Tx,
    Rx,
    Cir,
    Cfr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub samples: Vec<Complex64>,
    pub fs_hz: f64,
    pub origin: StreamOrigin,
}

impl SampleStream {
    pub fn new(samples: Vec<Complex64>, fs_hz: f64, origin: StreamOrigin) -> Self {
        SampleStream { samples, fs_hz, origin }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.norm_sqr()).collect()
    }
}

struct Transforms {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Transforms {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

/// Forward DFT, unscaled.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    Transforms::new(buf.len()).forward(&mut buf);
    buf
}

/// Inverse DFT scaled by 1/N.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    Transforms::new(buf.len()).inverse(&mut buf);
    buf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZcConfig {
    pub root: u32,
    pub length: u32,
}

impl Default for ZcConfig {
    fn default() -> Self {
        ZcConfig { root: 25, length: 1201 }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zadoff-Chu sequence exp(-j pi u n (n + 1) / N) for odd N.
pub fn zc_sequence(cfg: &ZcConfig, fs_hz: f64) -> Result<SampleStream> {
    let n = cfg.length as u64;
    let u = cfg.root as u64;
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::domain(format!("Zadoff-Chu length must be odd and >= 3, got {n}")));
    }
    if u == 0 || gcd(u, n) != 1 {
        return Err(Error::domain(format!("Zadoff-Chu root {u} is not coprime with length {n}")));
    }
    let samples = (0..n)
        .map(|k| {
            // Exact phase index modulo 2N keeps full precision for long sequences.
            let idx = (u * ((k * (k + 1)) % (2 * n))) % (2 * n);
            Complex64::from_polar(1.0, -PI * idx as f64 / n as f64)
        })
        .collect();
    Ok(SampleStream::new(samples, fs_hz, StreamOrigin::Tx))
}

/// `periods` back-to-back copies of the sequence.
pub fn preamble(zc: &SampleStream, periods: usize) -> SampleStream {
    let samples = (0..periods).flat_map(|_| zc.samples.iter().copied()).collect();
    SampleStream::new(samples, zc.fs_hz, StreamOrigin::Tx)
}

/// Builds one frame. `data_symbols` holds the subcarrier values of the
/// non-pilot symbols in order, `n_subcarriers` per symbol; `pilot` holds
/// the subcarrier values repeated on every pilot symbol.
pub fn build_frame(cfg: &FrameConfig, data_symbols: &[Complex64], pilot: &[Complex64]) -> Result<SampleStream> {
    cfg.validate()?;
    let data_syms = cfg.data_symbols();
    let nsc = cfg.n_subcarriers;
    if data_symbols.len() != data_syms.len() * nsc {
        return Err(Error::arity(format!(
            "frame needs {} data values, got {}",
            data_syms.len() * nsc,
            data_symbols.len()
        )));
    }
    if pilot.len() != nsc {
        return Err(Error::arity(format!("pilot needs {nsc} values, got {}", pilot.len())));
    }
    let bins = cfg.active_bins();
    let tf = Transforms::new(cfg.n_fft);
    let gain = cfg.symbol_gain();
    let mut out = Vec::with_capacity(cfg.frame_len());
    let mut data_iter = data_symbols.chunks(nsc);
    for sym in 0..cfg.n_symbols {
        let values = if cfg.pilot_symbols.contains(&sym) {
            pilot
        } else {
            data_iter.next().expect("arity checked")
        };
        let mut grid = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
        for (b, v) in bins.iter().zip(values) {
            grid[*b] = *v;
        }
        tf.inverse(&mut grid);
        grid.iter_mut().for_each(|v| *v *= gain);
        let cp = cfg.cp_len(sym);
        out.extend_from_slice(&grid[cfg.n_fft - cp..]);
        out.extend_from_slice(&grid);
    }
    Ok(SampleStream::new(out, cfg.fs_hz, StreamOrigin::Tx))
}

fn qpsk(rng: &mut impl Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.random::<bool>() { s } else { -s };
    let im = if rng.random::<bool>() { s } else { -s };
    Complex64::new(re, im)
}

/// Seeded QPSK payload for every data symbol.
pub fn qpsk_payload(cfg: &FrameConfig, seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, Stream::Payload);
    (0..cfg.data_symbols().len() * cfg.n_subcarriers).map(|_| qpsk(&mut rng)).collect()
}

/// Seeded unit-modulus pilot values, one per active subcarrier.
pub fn pilot_sequence(cfg: &FrameConfig, seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, Stream::Pilot);
    (0..cfg.n_subcarriers).map(|_| qpsk(&mut rng)).collect()
}

/// Applies the tapped delay line of `profile` plus complex white noise at
/// `snr_db` (use `f64::INFINITY` for none). Output keeps the input length.
/// Tap delays are snapped to the nearest sample.
pub fn apply_channel(tx: &SampleStream, profile: &MultipathProfile, snr_db: f64, seed: u64) -> Result<SampleStream> {
    if snr_db.is_nan() {
        return Err(Error::domain("SNR must be a number"));
    }
    let n = tx.len();
    // Collapse the profile onto a sample-spaced impulse response.
    let mut h: Vec<Complex64> = vec![];
    for (_, tap) in profile.taps() {
        let exact = tap.delay_s * tx.fs_hz;
        let d = exact.round();
        if (exact - d).abs() > 1e-6 {
            log::warn!("tap delay {:.3} ns snapped to sample {}", tap.delay_s * 1e9, d);
        }
        let d = d as usize;
        if d >= n {
            continue;
        }
        if h.len() <= d {
            h.resize(d + 1, Complex64::new(0.0, 0.0));
        }
        h[d] += tap.amp;
    }
    let nonzero = h.iter().filter(|c| c.norm_sqr() > 0.0).count();
    let mut rx = if nonzero > DIRECT_CONVOLUTION_TAPS {
        fft_convolve(&tx.samples, &h)
    } else {
        let mut rx = vec![Complex64::new(0.0, 0.0); n];
        for (d, a) in h.iter().enumerate().filter(|(_, a)| a.norm_sqr() > 0.0) {
            for (o, x) in rx[d..].iter_mut().zip(&tx.samples[..n - d]) {
                *o += a * x;
            }
        }
        rx
    };
    if snr_db.is_finite() {
        let first = tx.samples.iter().position(|c| c.norm_sqr() > 0.0);
        let last = tx.samples.iter().rposition(|c| c.norm_sqr() > 0.0);
        if let (Some(a), Some(b)) = (first, last) {
            let p_tx = tx.samples[a..=b].iter().map(|c| c.norm_sqr()).sum::<f64>() / (b + 1 - a) as f64;
            let p_sig = p_tx * profile.total_power();
            let sd = (p_sig / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
            let mut rng = stream_rng(seed, Stream::Noise);
            for v in rx.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(re * sd, im * sd);
            }
        }
    }
    Ok(SampleStream::new(rx, tx.fs_hz, StreamOrigin::Rx))
}

/// Above this many taps the channel is applied by FFT convolution.
const DIRECT_CONVOLUTION_TAPS: usize = 64;

/// Linear convolution truncated to `x.len()`.
fn fft_convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let size = (n + h.len()).next_power_of_two();
    let t = Transforms::new(size);
    let mut a = x.to_vec();
    a.resize(size, Complex64::new(0.0, 0.0));
    let mut b = h.to_vec();
    b.resize(size, Complex64::new(0.0, 0.0));
    t.forward(&mut a);
    t.forward(&mut b);
    a.iter_mut().zip(&b).for_each(|(u, v)| *u *= v);
    t.inverse(&mut a);
    a.truncate(n);
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    pub offset: usize,
    pub peak: f64,
    pub secondary: f64,
}

impl SyncResult {
    pub fn ratio(&self) -> f64 {
        if self.secondary == 0.0 {
            f64::INFINITY
        } else {
            self.peak / self.secondary
        }
    }
}

/// Magnitude of the linear cross-correlation of `rx` with `template` at
/// every full-overlap lag.
pub fn cross_correlation(rx: &[Complex64], template: &[Complex64]) -> Vec<f64> {
    let (n, m) = (rx.len(), template.len());
    if m == 0 || n < m {
        return vec![];
    }
    let size = (n + m).next_power_of_two();
    let tf = Transforms::new(size);
    let mut a = rx.to_vec();
    a.resize(size, Complex64::new(0.0, 0.0));
    let mut b = template.to_vec();
    b.resize(size, Complex64::new(0.0, 0.0));
    tf.forward(&mut a);
    tf.forward(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y.conj();
    }
    tf.inverse(&mut a);
    a[..=n - m].iter().map(|c| c.norm()).collect()
}

/// Locates `template` in `rx` by the cross-correlation peak. The secondary
/// peak is the largest value more than `exclusion` lags from the main peak.
pub fn synchronize(rx: &SampleStream, template: &SampleStream, margin: f64, exclusion: usize) -> Result<SyncResult> {
    if template.is_empty() || rx.len() < template.len() {
        return Err(Error::arity(format!(
            "capture of {} samples cannot contain a {}-sample preamble",
            rx.len(),
            template.len()
        )));
    }
    let corr = cross_correlation(&rx.samples, &template.samples);
    let (offset, peak) = corr
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let secondary = corr
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(offset) > exclusion)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let res = SyncResult { offset, peak, secondary };
    if !(peak > 0.0) || res.ratio() < margin {
        return Err(Error::SyncFailure {
            ratio: if peak > 0.0 { res.ratio() } else { 0.0 },
            margin,
        });
    }
    Ok(res)
}

/// Per-subcarrier least-squares CFR averaged over the pilot symbols.
/// `rx_frame` starts at the frame's first prefix sample.
pub fn estimate_cfr(rx_frame: &[Complex64], cfg: &FrameConfig, pilot: &[Complex64]) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if pilot.len() != cfg.n_subcarriers {
        return Err(Error::arity(format!("pilot needs {} values, got {}", cfg.n_subcarriers, pilot.len())));
    }
    if pilot.iter().any(|p| p.norm_sqr() == 0.0) {
        return Err(Error::domain("pilot contains a zero-valued subcarrier"));
    }
    if rx_frame.len() < cfg.frame_len() {
        return Err(Error::arity(format!(
            "frame needs {} samples, got {}",
            cfg.frame_len(),
            rx_frame.len()
        )));
    }
    let bins = cfg.active_bins();
    let tf = Transforms::new(cfg.n_fft);
    let gain = cfg.symbol_gain();
    let mut acc = vec![Complex64::new(0.0, 0.0); cfg.n_subcarriers];
    for &sym in &cfg.pilot_symbols {
        let start = cfg.body_start(sym);
        let mut buf = rx_frame[start..start + cfg.n_fft].to_vec();
        tf.forward(&mut buf);
        for ((a, b), p) in acc.iter_mut().zip(&bins).zip(pilot) {
            *a += buf[*b] / (gain * p);
        }
    }
    let k = cfg.pilot_symbols.len() as f64;
    Ok(acc.into_iter().map(|v| v / k).collect())
}

/// Zero-filled inverse transform of an active-band CFR onto the n_fft grid.
pub fn cfr_to_cir(cfr: &[Complex64], cfg: &FrameConfig) -> Result<SampleStream> {
    if cfr.len() != cfg.n_subcarriers {
        return Err(Error::arity(format!("CFR needs {} values, got {}", cfg.n_subcarriers, cfr.len())));
    }
    let mut grid = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
    for (b, v) in cfg.active_bins().iter().zip(cfr) {
        grid[*b] = *v;
    }
    Transforms::new(cfg.n_fft).inverse(&mut grid);
    Ok(SampleStream::new(grid, cfg.fs_hz, StreamOrigin::Cir))
}

/// Blackman-tapered inverse transform for peak extraction. The DC bin is
/// filled with the mean of its neighbours. Scaled so an isolated on-grid tap
/// keeps its complex amplitude at its own bin; sidelobes stay below -58 dB.
pub fn cfr_to_cir_windowed(cfr: &[Complex64], cfg: &FrameConfig) -> Result<SampleStream> {
    let nsc = cfg.n_subcarriers;
    if cfr.len() != nsc {
        return Err(Error::arity(format!("CFR needs {nsc} values, got {}", cfr.len())));
    }
    let half = nsc / 2;
    let len = nsc + 1;
    let w = |i: usize| {
        let x = 2.0 * PI * i as f64 / (len - 1) as f64;
        0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
    };
    let n = cfg.n_fft;
    let mut grid = vec![Complex64::new(0.0, 0.0); n];
    let mut wsum = 0.0;
    for i in 0..len {
        let k = i as i64 - half as i64;
        let h = match k.cmp(&0) {
            std::cmp::Ordering::Less => cfr[i],
            std::cmp::Ordering::Equal => (cfr[half - 1] + cfr[half]) / 2.0,
            std::cmp::Ordering::Greater => cfr[i - 1],
        };
        let wi = w(i);
        wsum += wi;
        grid[k.rem_euclid(n as i64) as usize] = h * wi;
    }
    Transforms::new(n).inverse(&mut grid);
    let s = n as f64 / wsum;
    grid.iter_mut().for_each(|v| *v *= s);
    Ok(SampleStream::new(grid, cfg.fs_hz, StreamOrigin::Cir))
}

/// Circular cross-correlation of one sequence period of `rx` starting at
/// `start` with the sequence, divided by its length. On-grid taps appear at
/// their relative delay with their complex amplitude.
pub fn zc_cir(rx: &SampleStream, start: usize, zc: &SampleStream) -> Result<SampleStream> {
    let n = zc.len();
    if start + n > rx.len() {
        return Err(Error::arity("correlation window runs past the end of the capture"));
    }
    let tf = Transforms::new(n);
    let mut y = rx.samples[start..start + n].to_vec();
    let mut z = zc.samples.clone();
    tf.forward(&mut y);
    tf.forward(&mut z);
    for (a, b) in y.iter_mut().zip(&z) {
        *a *= b.conj() / n as f64;
    }
    tf.inverse(&mut y);
    Ok(SampleStream::new(y, rx.fs_hz, StreamOrigin::Cir))
}

/// Rotates a circular CIR so its first arrival sits at bin `lead`.
///
/// The first arrival is the earliest bin within `search` bins before the
/// strongest one whose power reaches `rel_threshold` of the peak and four
/// times the median bin power (which excludes diffuse scatter and noise).
pub fn align_first_arrival(cir: &SampleStream, lead: usize, search: usize, rel_threshold: f64) -> SampleStream {
    let n = cir.len();
    if n == 0 {
        return cir.clone();
    }
    let p = cir.powers();
    let peak = (0..n).fold(0, |best, i| if p[i] > p[best] { i } else { best });
    let mut sorted = p.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let thr = (rel_threshold * p[peak]).max(4.0 * median);
    let search = search.min(n - 1);
    let first = (0..=search)
        .rev()
        .map(|back| (peak + n - back) % n)
        .find(|&i| p[i] >= thr && p[i] > 0.0)
        .unwrap_or(peak);
    let shift = (first + n - lead % n) % n;
    let mut samples = cir.samples.clone();
    samples.rotate_left(shift);
    SampleStream::new(samples, cir.fs_hz, cir.origin)
}

/// Placement of preamble and frame inside a capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureLayout {
    pub lead_in: usize,
    pub preamble_periods: usize,
}

impl Default for CaptureLayout {
    fn default() -> Self {
        CaptureLayout {
            lead_in: 256,
            preamble_periods: 3,
        }
    }
}

/// Lead-in zeros, preamble, frame, then zero padding to `capture_len`.
pub fn build_capture(cfg: &FrameConfig, preamble: &SampleStream, frame: &SampleStream, layout: &CaptureLayout) -> Result<SampleStream> {
    let used = layout.lead_in + preamble.len() + frame.len();
    if used > cfg.capture_len {
        return Err(Error::arity(format!(
            "preamble and frame need {used} samples, capture holds {}",
            cfg.capture_len
        )));
    }
    let mut s = vec![Complex64::new(0.0, 0.0); layout.lead_in];
    s.extend_from_slice(&preamble.samples);
    s.extend_from_slice(&frame.samples);
    s.resize(cfg.capture_len, Complex64::new(0.0, 0.0));
    Ok(SampleStream::new(s, cfg.fs_hz, StreamOrigin::Tx))
}

/// End-to-end sounder settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sounder {
    pub frame: FrameConfig,
    pub zc: ZcConfig,
    pub layout: CaptureLayout,
    /// Correlation window starts this many samples before the strongest path.
    pub zc_backoff: usize,
    /// FFT timing is advanced this many samples into the cyclic prefix.
    pub frame_backoff: usize,
    /// Bin at which the aligned correlation CIR places the first arrival.
    pub zc_lead: usize,
    pub sync_margin: f64,
    pub first_arrival_threshold: f64,
    pub pilot_seed: u64,
    pub payload_seed: u64,
}

impl Default for Sounder {
    fn default() -> Self {
        Sounder {
            frame: FrameConfig::default(),
            zc: ZcConfig::default(),
            layout: CaptureLayout::default(),
            zc_backoff: 150,
            frame_backoff: 32,
            zc_lead: 8,
            sync_margin: 1.25,
            first_arrival_threshold: 1e-4,
            pilot_seed: 1,
            payload_seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub capture: SampleStream,
    pub preamble: SampleStream,
    pub sequence: SampleStream,
    pub pilot: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sounding {
    pub sync: SyncResult,
    /// Correlation CIR, first arrival at bin `zc_lead`.
    pub cir_zc: SampleStream,
    pub cfr: Vec<Complex64>,
    /// Zero-filled inverse of the CFR; strongest path at bin `frame_backoff`.
    pub cir_cfr: SampleStream,
    /// Tapered inverse of the CFR, same bin convention as `cir_cfr`.
    pub cir_cfr_windowed: SampleStream,
}

impl Sounder {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        let n = self.zc.length as usize;
        if self.layout.preamble_periods < 3 {
            return Err(Error::domain("preamble needs at least 3 periods"));
        }
        if self.zc_backoff >= n || self.zc_lead >= n {
            return Err(Error::domain("correlation back-off and lead must be shorter than the sequence"));
        }
        if self.frame_backoff > self.frame.cp_short {
            return Err(Error::domain("frame timing advance exceeds the short cyclic prefix"));
        }
        if self.sync_margin < 1.0 {
            return Err(Error::domain("sync margin must be >= 1"));
        }
        Ok(())
    }

    pub fn transmit(&self) -> Result<Transmission> {
        self.validate()?;
        let seq = zc_sequence(&self.zc, self.frame.fs_hz)?;
        let pre = preamble(&seq, self.layout.preamble_periods);
        let pilot = pilot_sequence(&self.frame, self.pilot_seed);
        let frame = build_frame(&self.frame, &qpsk_payload(&self.frame, self.payload_seed), &pilot)?;
        let capture = build_capture(&self.frame, &pre, &frame, &self.layout)?;
        Ok(Transmission {
            capture,
            preamble: pre,
            sequence: seq,
            pilot,
        })
    }

    pub fn receive(&self, rx: &SampleStream, tx: &Transmission) -> Result<Sounding> {
        self.validate()?;
        let n = tx.sequence.len();
        let sync = synchronize(rx, &tx.preamble, self.sync_margin, n / 2)?;
        // The middle period sees a full periodic neighbourhood.
        let start = (sync.offset + n)
            .checked_sub(self.zc_backoff)
            .ok_or_else(|| Error::domain("correlation window precedes the capture"))?;
        let raw = zc_cir(rx, start, &tx.sequence)?;
        let cir_zc = align_first_arrival(&raw, self.zc_lead, self.zc_backoff, self.first_arrival_threshold);
        let frame_start = (sync.offset + tx.preamble.len())
            .checked_sub(self.frame_backoff)
            .ok_or_else(|| Error::domain("frame timing precedes the capture"))?;
        let end = frame_start + self.frame.frame_len();
        if end > rx.len() {
            return Err(Error::arity("capture ends before the frame"));
        }
        let cfr = estimate_cfr(&rx.samples[frame_start..end], &self.frame, &tx.pilot)?;
        let cir_cfr = cfr_to_cir(&cfr, &self.frame)?;
        let cir_cfr_windowed = cfr_to_cir_windowed(&cfr, &self.frame)?;
        Ok(Sounding {
            sync,
            cir_zc,
            cfr,
            cir_cfr,
            cir_cfr_windowed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Tap, SAMPLE_INTERVAL_S};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn two_tap(a1: f64, d1: usize) -> MultipathProfile {
        MultipathProfile {
            los: Tap::new(0.0, c(1.0)),
            cluster: vec![Tap::new(d1 as f64 * SAMPLE_INTERVAL_S, c(a1))],
            scatter: vec![],
        }
    }

    #[test]
    fn frame_numerology() {
        let cfg = FrameConfig::default();
        assert_eq!(cfg.frame_len(), 30_720);
        assert_abs_diff_eq!(cfg.sample_interval_s() * 1e9, 32.552, epsilon = 1e-3);
        let cps: Vec<usize> = (0..14).map(|s| cfg.cp_len(s)).collect();
        assert_eq!(cps, [160, 144, 144, 144, 144, 144, 144, 160, 144, 144, 144, 144, 144, 144]);
        assert_eq!(cfg.active_bins().len(), 1200);
        assert!(!cfg.active_bins().contains(&0));
    }

    #[test]
    fn frame_cyclic_prefix_and_linearity() {
        let cfg = FrameConfig::default();
        let pilot = pilot_sequence(&cfg, 1);
        let frame = build_frame(&cfg, &qpsk_payload(&cfg, 2), &pilot).unwrap();
        assert_eq!(frame.len(), 30_720);
        for sym in 0..14 {
            let cp = cfg.cp_len(sym);
            let s = cfg.symbol_start(sym);
            let body = cfg.body_start(sym);
            assert_eq!(&frame.samples[s..s + cp], &frame.samples[body + cfg.n_fft - cp..body + cfg.n_fft]);
        }
        let p = frame.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / frame.len() as f64;
        assert_abs_diff_eq!(p, 1.0, epsilon = 0.02);
        let zeros = vec![c(0.0); 12 * 1200];
        let zf = build_frame(&cfg, &zeros, &vec![c(0.0); 1200]).unwrap();
        assert!(zf.samples.iter().all(|v| *v == c(0.0)));
        assert!(matches!(build_frame(&cfg, &zeros[1..], &pilot), Err(Error::Arity(_))));
    }

    #[test]
    fn zc_is_cazac() {
        let z = zc_sequence(&ZcConfig::default(), 30.72e6).unwrap();
        let n = z.len();
        assert!(z.samples.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        for lag in [0usize, 1, 7, 600, 1200] {
            let acc: Complex64 = (0..n).map(|i| z.samples[i] * z.samples[(i + lag) % n].conj()).sum();
            if lag == 0 {
                assert_abs_diff_eq!(acc.norm(), n as f64, epsilon = 1e-9);
            } else {
                assert!(acc.norm() < 1e-9, "lag {lag}: {}", acc.norm());
            }
        }
        let z2 = zc_sequence(&ZcConfig { root: 29, length: 1201 }, 30.72e6).unwrap();
        for lag in [0usize, 5, 333] {
            let acc: Complex64 = (0..n).map(|i| z.samples[i] * z2.samples[(i + lag) % n].conj()).sum();
            assert_abs_diff_eq!(acc.norm() / n as f64, 1.0 / (n as f64).sqrt(), epsilon = 1e-9);
        }
        assert!(zc_sequence(&ZcConfig { root: 5, length: 25 }, 1.0).is_err());
    }

    #[test]
    fn channel_identity_delay_and_superposition() {
        let cfg = FrameConfig::default();
        let tx = build_frame(&cfg, &qpsk_payload(&cfg, 3), &pilot_sequence(&cfg, 3)).unwrap();
        let id = apply_channel(&tx, &MultipathProfile::single(Tap::new(0.0, c(1.0))), f64::INFINITY, 0).unwrap();
        assert_eq!(id.samples, tx.samples);
        let delayed = apply_channel(&tx, &MultipathProfile::single(Tap::new(10.0 * SAMPLE_INTERVAL_S, c(1.0))), f64::INFINITY, 0).unwrap();
        assert!(delayed.samples[..10].iter().all(|v| *v == c(0.0)));
        assert_eq!(&delayed.samples[10..], &tx.samples[..tx.len() - 10]);
        let two = apply_channel(&tx, &two_tap(1.0, 10), f64::INFINITY, 0).unwrap();
        for i in 0..tx.len() {
            let expect = tx.samples[i] + if i >= 10 { tx.samples[i - 10] } else { c(0.0) };
            assert!((two.samples[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_channel_matches_direct_sum() {
        let cfg = FrameConfig::default();
        let tx = build_frame(&cfg, &qpsk_payload(&cfg, 5), &pilot_sequence(&cfg, 5)).unwrap();
        let cluster: Vec<Tap> = (1..=200)
            .map(|k| Tap::new(k as f64 * 3.0 * SAMPLE_INTERVAL_S, Complex64::from_polar(0.05, k as f64)))
            .collect();
        let profile = MultipathProfile { los: Tap::new(0.0, c(1.0)), cluster, scatter: vec![] };
        let rx = apply_channel(&tx, &profile, f64::INFINITY, 0).unwrap();
        for i in (0..tx.len()).step_by(97) {
            let mut expect = tx.samples[i];
            for k in 1..=200usize {
                if i >= 3 * k {
                    expect += Complex64::from_polar(0.05, k as f64) * tx.samples[i - 3 * k];
                }
            }
            assert!((rx.samples[i] - expect).norm() < 1e-10, "sample {i}");
        }
    }

    #[test]
    fn sync_finds_preamble() {
        let z = zc_sequence(&ZcConfig::default(), 30.72e6).unwrap();
        let pre = preamble(&z, 3);
        let mut rx = pre.samples.clone();
        rx.resize(8000, c(0.0));
        let at0 = synchronize(&SampleStream::new(rx, 30.72e6, StreamOrigin::Rx), &pre, 1.25, 600).unwrap();
        assert_eq!(at0.offset, 0);

        let cfg = FrameConfig::default();
        let frame = build_frame(&cfg, &qpsk_payload(&cfg, 4), &pilot_sequence(&cfg, 4)).unwrap();
        let layout = CaptureLayout { lead_in: 1234, preamble_periods: 3 };
        let cap = build_capture(&cfg, &pre, &frame, &layout).unwrap();
        let rx = apply_channel(&cap, &MultipathProfile::single(Tap::new(0.0, c(1.0))), 20.0, 6).unwrap();
        assert_eq!(synchronize(&rx, &pre, 1.25, 600).unwrap().offset, 1234);
    }

    #[test]
    fn sync_fails_on_noise() {
        let mut rng = stream_rng(3, Stream::Noise);
        let samples = (0..40_000)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let rx = SampleStream::new(samples, 30.72e6, StreamOrigin::Rx);
        let z = zc_sequence(&ZcConfig::default(), 30.72e6).unwrap();
        assert!(matches!(synchronize(&rx, &preamble(&z, 3), 1.25, 600), Err(Error::SyncFailure { .. })));
    }

    #[test]
    fn cfr_identity_and_two_tap_closed_form() {
        let s = Sounder::default();
        let tx = s.transmit().unwrap();
        let cfg = &s.frame;
        let start = s.layout.lead_in + tx.preamble.len();
        let id = estimate_cfr(&tx.capture.samples[start..], cfg, &tx.pilot).unwrap();
        assert!(id.iter().all(|h| (h - c(1.0)).norm() < 1e-9));

        let rx = apply_channel(&tx.capture, &two_tap(0.5, 10), f64::INFINITY, 0).unwrap();
        let h = estimate_cfr(&rx.samples[start..], cfg, &tx.pilot).unwrap();
        let half = 600i64;
        let ks = (-half..=half).filter(|&k| k != 0);
        for (hk, k) in h.iter().zip(ks) {
            let f = k as f64 * cfg.scs_hz;
            let tau = 10.0 / cfg.fs_hz;
            let expect = c(1.0) + Complex64::from_polar(0.5, -2.0 * PI * f * tau);
            assert!((hk - expect).norm() < 1e-9);
        }
        let mut bad = tx.pilot.clone();
        bad[7] = c(0.0);
        assert!(estimate_cfr(&rx.samples[start..], cfg, &bad).is_err());
    }

    #[test]
    fn cfr_noise_is_bounded() {
        let s = Sounder::default();
        let tx = s.transmit().unwrap();
        let rx = apply_channel(&tx.capture, &MultipathProfile::single(Tap::new(0.0, c(1.0))), 30.0, 17).unwrap();
        let start = s.layout.lead_in + tx.preamble.len();
        let h = estimate_cfr(&rx.samples[start..], &s.frame, &tx.pilot).unwrap();
        let rms = (h.iter().map(|v| (v - c(1.0)).norm_sqr()).sum::<f64>() / h.len() as f64).sqrt();
        assert!(rms <= 10f64.powf(-30.0 / 20.0) * 2f64.sqrt(), "rms {rms}");
    }

    #[test]
    fn cir_transforms() {
        let cfg = FrameConfig::default();
        let flat = vec![c(1.0); 1200];
        let cir = cfr_to_cir(&flat, &cfg).unwrap();
        let p = cir.powers();
        let peak = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        assert_eq!(peak, 0);
        let e_cir: f64 = p.iter().sum();
        assert_abs_diff_eq!(e_cir, 1200.0 / 2048.0, epsilon = 1e-12);

        let ks = (-600i64..=600).filter(|&k| k != 0);
        let delayed: Vec<Complex64> = ks.map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * 10.0 / 2048.0)).collect();
        let p = cfr_to_cir(&delayed, &cfg).unwrap().powers();
        assert_eq!((0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b }), 10);
        let w = cfr_to_cir_windowed(&delayed, &cfg).unwrap();
        // The interpolated DC bin perturbs the peak by O(1e-6).
        assert_abs_diff_eq!(w.samples[10].norm(), 1.0, epsilon = 1e-5);
        let side = w.samples.iter().enumerate().filter(|(i, _)| i.abs_diff(10) > 8).map(|(_, v)| v.norm_sqr()).fold(0.0, f64::max);
        assert!(side < 10f64.powf(-5.7), "sidelobe {side}");
    }

    #[test]
    fn parseval_holds() {
        let cfg = FrameConfig::default();
        let cfr: Vec<Complex64> = pilot_sequence(&cfg, 9).iter().enumerate().map(|(i, p)| p * (1.0 + i as f64 / 1200.0)).collect();
        let cir = cfr_to_cir(&cfr, &cfg).unwrap();
        let lhs: f64 = cir.powers().iter().sum();
        let rhs: f64 = cfr.iter().map(|v| v.norm_sqr()).sum::<f64>() / 2048.0;
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * rhs);
    }

    #[test]
    fn loopback_recovers_on_grid_taps() {
        let s = Sounder::default();
        let tx = s.transmit().unwrap();
        let prof = MultipathProfile {
            los: Tap::new(0.0, c(0.8)),
            cluster: vec![
                Tap::new(12.0 * SAMPLE_INTERVAL_S, Complex64::from_polar(0.5, 1.0)),
                Tap::new(30.0 * SAMPLE_INTERVAL_S, Complex64::from_polar(0.3, -2.0)),
            ],
            scatter: vec![],
        };
        let rx = apply_channel(&tx.capture, &prof, f64::INFINITY, 0).unwrap();
        let snd = s.receive(&rx, &tx).unwrap();
        assert_eq!(snd.sync.offset, s.layout.lead_in);
        for (delay, amp) in [(0usize, 0.8), (12, 0.5), (30, 0.3)] {
            let z = snd.cir_zc.samples[s.zc_lead + delay].norm();
            assert!((z / amp - 1.0).abs() <= 0.01, "zc tap {delay}: {z}");
            let w = snd.cir_cfr_windowed.samples[s.frame_backoff + delay].norm();
            assert!((w / amp - 1.0).abs() <= 0.01, "cfr tap {delay}: {w}");
        }
    }
}
