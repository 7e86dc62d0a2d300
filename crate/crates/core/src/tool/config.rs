//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! malformed values are errors carrying the file and line. Recognized keys:
//!
//! ```text
//! carrier_ghz          = 1.4
//! seed                 = 0
//! output_dir           = out
//! snr_db               = 30            # inf for a noiseless channel
//! fit.starts           = 16
//! frame.n_fft          = 2048          # also n_subcarriers, scs_hz,
//! frame.capture_len    = 40000         #   cp_long, cp_short
//! peak.min_spacing     = 1
//! peak.noise_floor     = trailing:0.25 # or percentile:<0-100>
//! peak.noise_margin_db = 6
//! peak.rel_threshold_db = -20
//! peak.window_scale    = amplitude     # or power
//! peak.los_mode        = first         # or strongest
//! model.rx_height_m    = 1.8           # also veg_depth_m, elev_deg,
//!                                      #   sui_bs_height_m, hata_bs_height_m,
//!                                      #   hata_ms_height_m
//! model.hata_area      = open          # urban | suburban | open
//! reflection           = printed       # or normalized
//! bhf_m.columns        = swapped       # or header
//! bhf_m.junction       = continuous    # or offset
//! bounds.bhf-m.alpha   = 0.1, 8
//! ```
//!
//! `FOREST_LINK_CONFIG` names the file when no path is given explicitly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::{Bounds, ModelContext, ModelFamily, ModelSpec};
use crate::mpc::{LosMode, NoiseFloorMethod, PeakSearchConfig, WindowScale};
use crate::ofdm::FrameConfig;
use crate::pathloss::presets::BhfMColumnOrder;
use crate::pathloss::{BhfMJunction, HataArea, ReflectionReading};

pub const CONFIG_ENV: &str = "FOREST_LINK_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub carrier_ghz: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub snr_db: f64,
    pub fit_starts: usize,
    pub frame: FrameConfig,
    pub peak: PeakSearchConfig,
    pub model: ModelContext,
    pub bhf_m_columns: BhfMColumnOrder,
    /// family -> parameter -> [lo, hi]
    pub bounds: BTreeMap<String, BTreeMap<String, [f64; 2]>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            carrier_ghz: 1.4,
            seed: 0,
            output_dir: PathBuf::from("out"),
            snr_db: 30.0,
            fit_starts: 16,
            frame: FrameConfig::default(),
            peak: PeakSearchConfig::default(),
            model: ModelContext::default(),
            bhf_m_columns: BhfMColumnOrder::default(),
            bounds: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    /// Loads `explicit` if given, else the file named by `FOREST_LINK_CONFIG`,
    /// else the defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses config text; `path` is only used in error records.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                path: path.to_path_buf(),
                line,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.finish().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: last_line,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "carrier_ghz" => self.carrier_ghz = num(key, v)?,
            "seed" => self.seed = v.parse().map_err(|_| bad(key, v))?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "snr_db" => {
                self.snr_db = match v {
                    "inf" | "infinity" => f64::INFINITY,
                    _ => num(key, v)?,
                }
            }
            "fit.starts" => self.fit_starts = int(key, v)?,
            "frame.n_fft" => self.frame.n_fft = int(key, v)?,
            "frame.n_subcarriers" => self.frame.n_subcarriers = int(key, v)?,
            "frame.scs_hz" => self.frame.scs_hz = num(key, v)?,
            "frame.cp_long" => self.frame.cp_long = int(key, v)?,
            "frame.cp_short" => self.frame.cp_short = int(key, v)?,
            "frame.capture_len" => self.frame.capture_len = int(key, v)?,
            "peak.min_spacing" => self.peak.min_spacing_samples = int(key, v)?,
            "peak.noise_floor" => {
                let (kind, x) = v.split_once(':').ok_or_else(|| bad(key, v))?;
                let x = num(key, x.trim())?;
                self.peak.noise_floor = match kind.trim() {
                    "trailing" => NoiseFloorMethod::TrailingWindow { fraction: x },
                    "percentile" => NoiseFloorMethod::Percentile { percentile: x },
                    _ => return Err(bad(key, v)),
                }
            }
            "peak.noise_margin_db" => self.peak.noise_margin_db = num(key, v)?,
            "peak.rel_threshold_db" => self.peak.rel_threshold_db = num(key, v)?,
            "peak.window_scale" => {
                self.peak.window_scale = choose(key, v, &[("amplitude", WindowScale::LinearAmplitudeDb), ("power", WindowScale::PowerDb)])?
            }
            "peak.los_mode" => {
                self.peak.los_mode = choose(key, v, &[("first", LosMode::FirstArrival), ("strongest", LosMode::Strongest)])?
            }
            "model.rx_height_m" => self.model.rx_height_m = num(key, v)?,
            "model.veg_depth_m" => self.model.veg_depth_m = num(key, v)?,
            "model.elev_deg" => self.model.elev_deg = num(key, v)?,
            "model.sui_bs_height_m" => self.model.sui_bs_height_m = num(key, v)?,
            "model.hata_bs_height_m" => self.model.hata_bs_height_m = num(key, v)?,
            "model.hata_ms_height_m" => self.model.hata_ms_height_m = num(key, v)?,
            "model.hata_area" => {
                self.model.hata_area = choose(
                    key,
                    v,
                    &[("urban", HataArea::Urban), ("suburban", HataArea::Suburban), ("open", HataArea::Open)],
                )?
            }
            "reflection" => {
                self.model.reflection = choose(
                    key,
                    v,
                    &[("printed", ReflectionReading::Printed), ("normalized", ReflectionReading::Normalized)],
                )?
            }
            "bhf_m.columns" => {
                self.bhf_m_columns = choose(key, v, &[("swapped", BhfMColumnOrder::Swapped), ("header", BhfMColumnOrder::Header)])?
            }
            "bhf_m.junction" => {
                self.model.bhf_m_junction =
                    choose(key, v, &[("continuous", BhfMJunction::Continuous), ("offset", BhfMJunction::Offset)])?
            }
            _ if key.starts_with("bounds.") => {
                let rest = &key["bounds.".len()..];
                let (fam, param) = rest.rsplit_once('.').ok_or_else(|| format!("expected bounds.<family>.<param>, got `{key}`"))?;
                let family = ModelFamily::parse(fam).ok_or_else(|| format!("unknown model family `{fam}`"))?;
                if !family.param_names().contains(&param) {
                    return Err(format!(
                        "model `{}` has no parameter `{param}` (parameters: {})",
                        family.name(),
                        family.param_names().join(", ")
                    ));
                }
                let (lo, hi) = v.split_once(',').ok_or_else(|| format!("bounds need `lo, hi`, got `{v}`"))?;
                let (lo, hi) = (num(key, lo.trim())?, num(key, hi.trim())?);
                if lo > hi {
                    return Err(format!("lower bound {lo} exceeds upper bound {hi} for {key}"));
                }
                self.bounds
                    .entry(family.name().to_string())
                    .or_default()
                    .insert(param.to_string(), [lo, hi]);
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Derives dependent fields and validates the whole configuration.
    fn finish(&mut self) -> Result<()> {
        if !(self.carrier_ghz.is_finite() && self.carrier_ghz > 0.0) {
            return Err(Error::domain(format!("carrier must be positive, got {} GHz", self.carrier_ghz)));
        }
        if self.snr_db.is_nan() {
            return Err(Error::domain("SNR must be a number"));
        }
        self.model.freq_ghz = self.carrier_ghz;
        self.frame.center_freq_ghz = self.carrier_ghz;
        self.frame.fs_hz = self.frame.n_fft as f64 * self.frame.scs_hz;
        self.frame.validate()?;
        self.peak.validate()?;
        let m = &self.model;
        if !(m.rx_height_m >= 0.0 && m.veg_depth_m >= 0.0 && (0.0..=90.0).contains(&m.elev_deg)) {
            return Err(Error::domain("model geometry needs non-negative heights and elevation in [0, 90]"));
        }
        if !(m.sui_bs_height_m > 0.0 && m.hata_bs_height_m > 0.0 && m.hata_ms_height_m > 0.0) {
            return Err(Error::domain("antenna heights must be positive"));
        }
        Ok(())
    }

    /// Default bounds of the family with configured overrides applied.
    pub fn bounds_for(&self, spec: &ModelSpec) -> Bounds {
        let mut b = spec.default_bounds();
        if let Some(over) = self.bounds.get(spec.family.name()) {
            for (i, name) in spec.param_names().iter().enumerate() {
                if let Some([lo, hi]) = over.get(*name) {
                    b.lower[i] = *lo;
                    b.upper[i] = *hi;
                }
            }
        }
        b
    }

    /// SHA-256 of the canonical JSON form, lowercase hex. The output
    /// directory is left out: where results land does not change them.
    /// A non-finite SNR is hashed by its string form.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["output_dir"] = serde_json::Value::Null;
        v["snr_db"] = serde_json::Value::String(self.snr_db.to_string());
        let bytes = serde_json::to_vec(&v).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn bad(key: &str, v: &str) -> String {
    format!("invalid value `{v}` for `{key}`")
}

fn num(key: &str, v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v))
}

fn int(key: &str, v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| bad(key, v))
}

fn choose<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> std::result::Result<T, String> {
    let lower = v.to_ascii_lowercase();
    options.iter().find(|(name, _)| *name == lower).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        format!("`{key}` must be one of {}, got `{v}`", names.join(" | "))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("run.cfg"))
    }

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse("# nothing\n\n").unwrap();
        let mut d = RunConfig::default();
        d.finish().unwrap();
        assert_eq!(c, d);
        assert_eq!(c.frame.fs_hz, 30.72e6);
    }

    #[test]
    fn keys_are_applied() {
        let c = parse(
            "carrier_ghz = 2.4\nseed = 7 # trailing comment\nsnr_db = inf\npeak.window_scale = power\n\
             peak.noise_floor = percentile:40\nreflection = normalized\nbhf_m.columns = header\n\
             bounds.bhf-m.alpha = 1, 6\nmodel.hata_area = urban\n",
        )
        .unwrap();
        assert_eq!(c.carrier_ghz, 2.4);
        assert_eq!(c.model.freq_ghz, 2.4);
        assert_eq!(c.seed, 7);
        assert!(c.snr_db.is_infinite());
        assert_eq!(c.peak.window_scale, WindowScale::PowerDb);
        assert_eq!(c.peak.noise_floor, NoiseFloorMethod::Percentile { percentile: 40.0 });
        assert_eq!(c.model.reflection, ReflectionReading::Normalized);
        assert_eq!(c.bhf_m_columns, BhfMColumnOrder::Header);
        assert_eq!(c.model.hata_area, HataArea::Urban);
        let spec = ModelSpec::new(ModelFamily::BhfM);
        let b = c.bounds_for(&spec);
        assert_eq!((b.lower[2], b.upper[2]), (1.0, 6.0));
        assert_eq!(b.lower[0], spec.default_bounds().lower[0]);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, line) in [
            ("seed = 1\nbogus = 3\n", 2),
            ("\n\ncarrier_ghz = fast\n", 3),
            ("bounds.ci.q = 1, 2\n", 1),
            ("bounds.ci.n = 3, 2\n", 1),
            ("seed 4\n", 1),
            ("peak.los_mode = last\n", 1),
        ] {
            match parse(text) {
                Err(Error::Config { line: l, path, .. }) => {
                    assert_eq!(l, line, "{text:?}");
                    assert_eq!(path, Path::new("run.cfg"));
                }
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn invariants_checked_at_load() {
        assert!(parse("frame.n_subcarriers = 2100\n").is_err());
        assert!(parse("carrier_ghz = -1\n").is_err());
        assert!(parse("model.elev_deg = 120\n").is_err());
        assert!(parse("peak.noise_floor = trailing:0\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse("seed = 1\n").unwrap();
        let b = parse("seed = 1 # same\n").unwrap();
        let c = parse("seed = 2\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
        assert_eq!(a.hash(), parse("seed = 1\noutput_dir = elsewhere\n").unwrap().hash());
        assert_ne!(parse("snr_db = inf\n").unwrap().hash(), parse("snr_db = 30\n").unwrap().hash());
    }

    #[test]
    fn environment_variable_is_honoured() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("env.cfg");
        std::fs::write(&p, "seed = 99\n").unwrap();
        // Explicit path wins; the variable is only read when none is given.
        assert_eq!(RunConfig::resolve(Some(&p)).unwrap().seed, 99);
        std::env::set_var(CONFIG_ENV, &p);
        let from_env = RunConfig::resolve(None);
        std::env::remove_var(CONFIG_ENV);
        assert_eq!(from_env.unwrap().seed, 99);
    }
}
