//! Least-squares regression of path-loss models against measured samples.
//!
//! A [`ModelSpec`] names a model family together with the fixed context the
//! family needs (carrier, antenna heights, breakpoint, reflection reading).
//! Free parameters are flat vectors ordered as in
//! [`ModelSpec::param_names`]. [`fit_model`] runs a deterministic multi-start
//! Levenberg-Marquardt over box bounds; coordinates with equal bounds are
//! held fixed.

pub mod lm;
pub mod stats;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathloss::{
    BhfMJunction, BhfMParams, BhfParams, Fe2rMParams, Fe2rParams, HataArea, HataParams, HataVariant,
    ItuHParams, ItuSParams, LinkGeometry, ModelParams, ReflectionReading, SuiParams, BHF_M_BREAKPOINT_M,
    DEFAULT_XI_R, SUI_REFERENCE_M,
};
use crate::rng::{stream_rng, Stream};

pub use lm::LmOptions;
pub use stats::{fit_normal, pearson, NormalFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Larch,
    Birch,
    #[default]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LinkType {
    #[default]
    G2G,
    A2G,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    pub dist_m: f64,
    pub pl_db: f64,
    pub elev_deg: Option<f64>,
    pub env: Environment,
    pub link: LinkType,
}

impl PathLossSample {
    pub fn new(dist_m: f64, pl_db: f64) -> Self {
        PathLossSample {
            dist_m,
            pl_db,
            elev_deg: None,
            env: Environment::Other,
            link: LinkType::G2G,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dist_m.is_finite() && self.dist_m > 0.0) {
            return Err(Error::domain(format!("sample distance must be positive, got {}", self.dist_m)));
        }
        if !self.pl_db.is_finite() {
            return Err(Error::domain(format!("sample path loss must be finite, got {}", self.pl_db)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Fspl,
    Ci,
    FsplH,
    Sui,
    Bhf,
    BhfM,
    FsplS,
    Fe2r,
    Fe2rM,
    OkumuraHata,
    Cost231Hata,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 11] = [
        ModelFamily::Fspl,
        ModelFamily::Ci,
        ModelFamily::FsplH,
        ModelFamily::Sui,
        ModelFamily::Bhf,
        ModelFamily::BhfM,
        ModelFamily::FsplS,
        ModelFamily::Fe2r,
        ModelFamily::Fe2rM,
        ModelFamily::OkumuraHata,
        ModelFamily::Cost231Hata,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Fspl => "fspl",
            ModelFamily::Ci => "ci",
            ModelFamily::FsplH => "fspl-h",
            ModelFamily::Sui => "sui",
            ModelFamily::Bhf => "bhf",
            ModelFamily::BhfM => "bhf-m",
            ModelFamily::FsplS => "fspl-s",
            ModelFamily::Fe2r => "fe2r",
            ModelFamily::Fe2rM => "fe2r-m",
            ModelFamily::OkumuraHata => "okumura-hata",
            ModelFamily::Cost231Hata => "cost231-hata",
        }
    }

    pub fn parse(s: &str) -> Option<ModelFamily> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelFamily::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelFamily::Fspl | ModelFamily::OkumuraHata | ModelFamily::Cost231Hata => &[],
            ModelFamily::Ci => &["n"],
            ModelFamily::FsplH => &["A_m", "mu"],
            ModelFamily::Sui => &["a", "b", "c"],
            ModelFamily::Bhf => &["alpha", "beta", "zeta"],
            ModelFamily::BhfM => &["n", "m", "alpha", "beta", "zeta"],
            ModelFamily::FsplS => &["A", "B", "C", "E", "G"],
            ModelFamily::Fe2r => &["xi_r"],
            ModelFamily::Fe2rM => &["xi_r", "n", "m", "l"],
        }
    }
}

/// Fixed, non-fitted inputs a model family needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelContext {
    pub freq_ghz: f64,
    pub rx_height_m: f64,
    pub veg_depth_m: f64,
    /// Elevation used for samples without one.
    pub elev_deg: f64,
    pub sui_bs_height_m: f64,
    pub sui_d0_m: f64,
    pub bhf_m_d0_m: f64,
    pub bhf_m_junction: BhfMJunction,
    pub reflection: ReflectionReading,
    pub hata_bs_height_m: f64,
    pub hata_ms_height_m: f64,
    pub hata_area: HataArea,
}

impl Default for ModelContext {
    fn default() -> Self {
        ModelContext {
            freq_ghz: 1.4,
            rx_height_m: 1.8,
            veg_depth_m: 20.0,
            elev_deg: 0.0,
            sui_bs_height_m: 30.0,
            sui_d0_m: SUI_REFERENCE_M,
            bhf_m_d0_m: BHF_M_BREAKPOINT_M,
            bhf_m_junction: BhfMJunction::Continuous,
            reflection: ReflectionReading::Printed,
            hata_bs_height_m: 30.0,
            hata_ms_height_m: 1.8,
            hata_area: HataArea::Open,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub ctx: ModelContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Bounds { lower, upper }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(Error::arity(format!(
                "bounds have {}/{} entries, model has {dim} parameters",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (l, h)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::domain(format!("bounds for parameter {i} are invalid: [{l}, {h}]")));
            }
        }
        Ok(())
    }

    fn free_count(&self) -> usize {
        self.lower.iter().zip(&self.upper).filter(|(l, h)| l < h).count()
    }
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Self {
        ModelSpec {
            family,
            ctx: ModelContext::default(),
        }
    }

    pub fn with_context(family: ModelFamily, ctx: ModelContext) -> Self {
        ModelSpec { family, ctx }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        self.family.param_names()
    }

    pub fn default_bounds(&self) -> Bounds {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self.family {
            ModelFamily::Fspl | ModelFamily::OkumuraHata | ModelFamily::Cost231Hata => (vec![], vec![]),
            ModelFamily::Ci => (vec![0.5], vec![8.0]),
            ModelFamily::FsplH => (vec![1.0, 0.0], vec![2000.0, 10.0]),
            ModelFamily::Sui => (vec![0.0, 0.0, 0.0], vec![10.0, 0.1, 50.0]),
            ModelFamily::Bhf => (vec![0.5, -200.0, -200.0], vec![8.0, 300.0, 200.0]),
            ModelFamily::BhfM => {
                let beta = match self.ctx.bhf_m_junction {
                    BhfMJunction::Continuous => (0.0, 0.0),
                    BhfMJunction::Offset => (-100.0, 100.0),
                };
                (
                    vec![0.1, -100.0, 0.1, beta.0, -200.0],
                    vec![8.0, 200.0, 8.0, beta.1, 200.0],
                )
            }
            ModelFamily::FsplS => (vec![0.0, -1.0, -1.0, 0.0, -2.0], vec![100.0, 2.0, 2.0, 0.0, 2.0]),
            ModelFamily::Fe2r => (vec![DEFAULT_XI_R], vec![DEFAULT_XI_R]),
            ModelFamily::Fe2rM => (vec![DEFAULT_XI_R, 0.3, -60.0, -60.0], vec![DEFAULT_XI_R, 3.0, 60.0, 200.0]),
        };
        Bounds::new(lo, hi)
    }

    /// A starting point inside the default bounds.
    pub fn default_init(&self) -> Vec<f64> {
        match self.family {
            ModelFamily::Fspl | ModelFamily::OkumuraHata | ModelFamily::Cost231Hata => vec![],
            ModelFamily::Ci => vec![2.0],
            ModelFamily::FsplH => vec![30.0, 0.1],
            ModelFamily::Sui => vec![4.0, 0.0065, 17.1],
            ModelFamily::Bhf => vec![4.0, 90.0, -40.0],
            ModelFamily::BhfM => vec![2.0, 30.0, 3.0, 0.0, -10.0],
            ModelFamily::FsplS => vec![0.2, 0.4, 0.2, 0.0, 0.1],
            ModelFamily::Fe2r => vec![DEFAULT_XI_R],
            ModelFamily::Fe2rM => vec![DEFAULT_XI_R, 1.0, 0.0, 0.0],
        }
    }

    pub fn params_from_vec(&self, x: &[f64]) -> Result<ModelParams> {
        let dim = self.param_names().len();
        if x.len() != dim {
            return Err(Error::arity(format!(
                "{} takes {dim} parameters, got {}",
                self.family.name(),
                x.len()
            )));
        }
        let c = &self.ctx;
        Ok(match self.family {
            ModelFamily::Fspl => ModelParams::Fspl,
            ModelFamily::Ci => ModelParams::Ci { n: x[0] },
            ModelFamily::FsplH => ModelParams::FsplH(ItuHParams { a_m: x[0], mu: x[1] }),
            ModelFamily::Sui => ModelParams::Sui(SuiParams {
                a: x[0],
                b: x[1],
                c: x[2],
                bs_height_m: c.sui_bs_height_m,
                d0_m: c.sui_d0_m,
            }),
            ModelFamily::Bhf => ModelParams::Bhf(BhfParams {
                alpha: x[0],
                beta: x[1],
                zeta: x[2],
            }),
            ModelFamily::BhfM => ModelParams::BhfM(BhfMParams {
                n: x[0],
                m: x[1],
                alpha: x[2],
                beta: x[3],
                zeta: x[4],
                d0_m: c.bhf_m_d0_m,
                junction: c.bhf_m_junction,
            }),
            ModelFamily::FsplS => ModelParams::FsplS(ItuSParams {
                a: x[0],
                b: x[1],
                c: x[2],
                e: x[3],
                g: x[4],
            }),
            ModelFamily::Fe2r => ModelParams::Fe2r(Fe2rParams {
                xi_r: x[0],
                reading: c.reflection,
            }),
            ModelFamily::Fe2rM => ModelParams::Fe2rM(Fe2rMParams {
                xi_r: x[0],
                n: x[1],
                m: x[2],
                l: x[3],
                reading: c.reflection,
            }),
            ModelFamily::OkumuraHata | ModelFamily::Cost231Hata => ModelParams::Hata(HataParams {
                bs_height_m: c.hata_bs_height_m,
                ms_height_m: c.hata_ms_height_m,
                variant: if self.family == ModelFamily::OkumuraHata {
                    HataVariant::OkumuraHata
                } else {
                    HataVariant::Cost231
                },
                area: c.hata_area,
            }),
        })
    }

    /// Flattens `params` into this family's parameter vector.
    pub fn vec_from_params(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let v = match (self.family, params) {
            (ModelFamily::Fspl, ModelParams::Fspl) => vec![],
            (ModelFamily::Ci, ModelParams::Ci { n }) => vec![*n],
            (ModelFamily::FsplH, ModelParams::FsplH(p)) => vec![p.a_m, p.mu],
            (ModelFamily::Sui, ModelParams::Sui(p)) => vec![p.a, p.b, p.c],
            (ModelFamily::Bhf, ModelParams::Bhf(p)) => vec![p.alpha, p.beta, p.zeta],
            (ModelFamily::BhfM, ModelParams::BhfM(p)) => vec![p.n, p.m, p.alpha, p.beta, p.zeta],
            (ModelFamily::FsplS, ModelParams::FsplS(p)) => vec![p.a, p.b, p.c, p.e, p.g],
            (ModelFamily::Fe2r, ModelParams::Fe2r(p)) => vec![p.xi_r],
            (ModelFamily::Fe2rM, ModelParams::Fe2rM(p)) => vec![p.xi_r, p.n, p.m, p.l],
            (ModelFamily::OkumuraHata | ModelFamily::Cost231Hata, ModelParams::Hata(_)) => vec![],
            _ => {
                return Err(Error::domain(format!(
                    "parameters do not belong to model family {}",
                    self.family.name()
                )))
            }
        };
        Ok(v)
    }

    pub fn geometry(&self, sample: &PathLossSample) -> LinkGeometry {
        LinkGeometry::new(self.ctx.freq_ghz, sample.dist_m)
            .with_elevation(sample.elev_deg.unwrap_or(self.ctx.elev_deg))
            .with_rx_height(self.ctx.rx_height_m)
            .with_veg_depth(self.ctx.veg_depth_m)
    }

    pub fn predict(&self, params: &ModelParams, sample: &PathLossSample) -> Result<f64> {
        params.evaluate(&self.geometry(sample))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Latin-hypercube starts in addition to the user init.
    pub starts: usize,
    pub seed: u64,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 16,
            seed: 0,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub param_vec: Vec<f64>,
    pub rmse_db: f64,
    pub n_samples: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Index of the winning start; 0 is the user init.
    pub start_index: usize,
}

fn residual_vec(spec: &ModelSpec, params: &ModelParams, samples: &[PathLossSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| Ok(s.pl_db - spec.predict(params, s)?))
        .collect()
}

/// Root-mean-square residual of `params` over `samples`.
pub fn rmse(params: &ModelParams, spec: &ModelSpec, samples: &[PathLossSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::arity("RMSE of an empty sample set"));
    }
    let r = residual_vec(spec, params, samples)?;
    Ok((r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt())
}

/// Per-sample shadow fading, measured minus fitted loss.
pub fn shadow_residuals(fitted: &FittedModel, samples: &[PathLossSample]) -> Result<Vec<f64>> {
    if !fitted.converged {
        return Err(Error::domain("shadowing residuals require a converged fit"));
    }
    residual_vec(&fitted.spec, &fitted.params, samples)
}

/// Multi-start bounded least-squares fit.
pub fn fit_model(
    samples: &[PathLossSample],
    spec: &ModelSpec,
    bounds: &Bounds,
    init: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    let dim = spec.param_names().len();
    bounds.validate(dim)?;
    if init.len() != dim {
        return Err(Error::arity(format!("init has {} entries, model has {dim} parameters", init.len())));
    }
    for (i, v) in init.iter().enumerate() {
        if !(bounds.lower[i] <= *v && *v <= bounds.upper[i]) {
            return Err(Error::domain(format!(
                "init {} = {v} lies outside [{}, {}]",
                spec.param_names()[i],
                bounds.lower[i],
                bounds.upper[i]
            )));
        }
    }
    for s in samples {
        s.validate()?;
    }
    let free = bounds.free_count();
    if samples.len() < free + 1 {
        return Err(Error::arity(format!(
            "{} free parameters need at least {} samples, got {}",
            free,
            free + 1,
            samples.len()
        )));
    }
    let distinct = distinct_abscissae(spec, samples);
    if distinct < free {
        return Err(Error::Degenerate(format!(
            "{distinct} distinct sample positions cannot identify {free} free parameters"
        )));
    }

    let mut starts = vec![init.to_vec()];
    starts.extend(latin_hypercube(bounds, opts.starts, opts.seed));

    let residuals = |x: &[f64]| -> Option<Vec<f64>> {
        let p = spec.params_from_vec(x).ok()?;
        residual_vec(spec, &p, samples).ok()
    };
    let outcomes: Vec<Option<lm::LmOutcome>> = starts
        .par_iter()
        .map(|x0| lm::minimize(residuals, x0, &bounds.lower, &bounds.upper, &opts.lm))
        .collect();

    let mut best: Option<(usize, lm::LmOutcome)> = None;
    for (i, out) in outcomes.into_iter().enumerate() {
        let Some(out) = out else { continue };
        let better = match &best {
            None => true,
            Some((_, b)) => out.cost < b.cost - 1e-12 * b.cost.abs(),
        };
        if better {
            best = Some((i, out));
        }
    }
    let (start_index, out) =
        best.ok_or_else(|| Error::domain("model cannot be evaluated at any start point within the bounds"))?;
    let params = spec.params_from_vec(&out.x)?;
    let rmse_db = rmse(&params, spec, samples)?;
    Ok(FittedModel {
        spec: *spec,
        params,
        param_vec: out.x,
        rmse_db,
        n_samples: samples.len(),
        converged: out.converged,
        iterations: out.iterations,
        start_index,
    })
}

fn distinct_abscissae(spec: &ModelSpec, samples: &[PathLossSample]) -> usize {
    let mut keys: Vec<(u64, u64)> = samples
        .iter()
        .map(|s| {
            let e = s.elev_deg.unwrap_or(spec.ctx.elev_deg);
            (s.dist_m.to_bits(), e.to_bits())
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// `n` stratified points over the free coordinates; fixed coordinates take
/// their bound.
fn latin_hypercube(bounds: &Bounds, n: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 0 {
        return vec![];
    }
    let mut rng = stream_rng(seed, Stream::MultiStart);
    let dim = bounds.lower.len();
    let mut pts = vec![bounds.lower.clone(); n];
    for j in 0..dim {
        let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
        if lo == hi {
            continue;
        }
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (i, p) in pts.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[j] = lo + (strata[i] as f64 + u) / n as f64 * (hi - lo);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathloss::presets::{self, Forest};
    use crate::synth::draw_shadowing_series;

    fn samples_from(spec: &ModelSpec, params: &ModelParams, dists: &[f64]) -> Vec<PathLossSample> {
        dists
            .iter()
            .map(|&d| {
                let mut s = PathLossSample::new(d, 0.0);
                s.pl_db = spec.predict(params, &s).unwrap();
                s
            })
            .collect()
    }

    fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn noiseless_ci_recovers_exponent() {
        let spec = ModelSpec::new(ModelFamily::Ci);
        let s = samples_from(&spec, &ModelParams::Ci { n: 2.6 }, &log_spaced(2.0, 300.0, 40));
        let fit = fit_model(&s, &spec, &spec.default_bounds(), &[2.0], &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.param_vec[0] - 2.6).abs() <= 1e-6);
        assert!(fit.rmse_db < 1e-6);
    }

    #[test]
    fn bhf_m_recovers_alpha_under_shadowing() {
        let spec = ModelSpec::new(ModelFamily::BhfM);
        let truth = presets::bhf_m(Forest::Larch, Default::default());
        let mut s = samples_from(&spec, &ModelParams::BhfM(truth), &log_spaced(5.0, 300.0, 200));
        for (x, n) in s.iter_mut().zip(draw_shadowing_series(3.8, 200, 5).unwrap()) {
            x.pl_db += n;
        }
        let fit = fit_model(&s, &spec, &spec.default_bounds(), &spec.default_init(), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.param_vec[2] / truth.alpha - 1.0).abs() <= 0.1, "alpha {}", fit.param_vec[2]);
        assert!((3.4..=4.2).contains(&fit.rmse_db), "rmse {}", fit.rmse_db);
    }

    #[test]
    fn constant_distance_is_degenerate() {
        let spec = ModelSpec::new(ModelFamily::Bhf);
        let s: Vec<_> = (0..10).map(|i| PathLossSample::new(50.0, 80.0 + i as f64)).collect();
        let err = fit_model(&s, &spec, &spec.default_bounds(), &spec.default_init(), &FitOptions::default());
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_few_samples_is_arity_error() {
        let spec = ModelSpec::new(ModelFamily::Bhf);
        let s: Vec<_> = (1..=3).map(|i| PathLossSample::new(10.0 * i as f64, 80.0)).collect();
        let err = fit_model(&s, &spec, &spec.default_bounds(), &spec.default_init(), &FitOptions::default());
        assert!(matches!(err, Err(Error::Arity(_))));
    }

    #[test]
    fn init_outside_bounds_is_rejected() {
        let spec = ModelSpec::new(ModelFamily::Ci);
        let s: Vec<_> = (1..=5).map(|i| PathLossSample::new(10.0 * i as f64, 80.0)).collect();
        assert!(fit_model(&s, &spec, &spec.default_bounds(), &[9.0], &FitOptions::default()).is_err());
    }

    #[test]
    fn rmse_hand_values() {
        let spec = ModelSpec::new(ModelFamily::Fspl);
        let mk = |d: f64, off: f64| {
            let mut s = PathLossSample::new(d, 0.0);
            s.pl_db = spec.predict(&ModelParams::Fspl, &s).unwrap() + off;
            s
        };
        let exact = [mk(10.0, 0.0), mk(20.0, 0.0)];
        assert_eq!(rmse(&ModelParams::Fspl, &spec, &exact).unwrap(), 0.0);
        let plus2 = [mk(10.0, 2.0), mk(20.0, 2.0), mk(40.0, 2.0)];
        assert!((rmse(&ModelParams::Fspl, &spec, &plus2).unwrap() - 2.0).abs() < 1e-12);
        let mixed = [mk(10.0, -3.0), mk(20.0, 4.0)];
        assert!((rmse(&ModelParams::Fspl, &spec, &mixed).unwrap() - 3.535_533_9).abs() < 1e-6);
        assert!(matches!(rmse(&ModelParams::Fspl, &spec, &[]), Err(Error::Arity(_))));
    }

    #[test]
    fn refit_is_idempotent_and_locally_optimal() {
        let spec = ModelSpec::new(ModelFamily::Bhf);
        let truth = ModelParams::Bhf(presets::bhf(Forest::Larch));
        let mut s = samples_from(&spec, &truth, &log_spaced(5.0, 300.0, 120));
        for (x, n) in s.iter_mut().zip(draw_shadowing_series(3.0, 120, 9).unwrap()) {
            x.pl_db += n;
        }
        let b = spec.default_bounds();
        let opts = FitOptions::default();
        let fit = fit_model(&s, &spec, &b, &spec.default_init(), &opts).unwrap();
        let again = fit_model(&s, &spec, &b, &fit.param_vec, &FitOptions { starts: 0, ..opts }).unwrap();
        assert!(again.iterations <= 2);
        assert!((again.rmse_db - fit.rmse_db).abs() <= 1e-6);

        let res = shadow_residuals(&fit, &s).unwrap();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        assert!(mean.abs() <= 1e-6, "mean residual {mean}");

        let mut rng = stream_rng(1, Stream::Samples);
        for _ in 0..100 {
            let x: Vec<f64> = fit
                .param_vec
                .iter()
                .enumerate()
                .map(|(i, v)| (v + rng.random_range(-0.05..0.05) * (1.0 + v.abs())).clamp(b.lower[i], b.upper[i]))
                .collect();
            let r = rmse(&spec.params_from_vec(&x).unwrap(), &spec, &s).unwrap();
            assert!(fit.rmse_db <= r + 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic_across_thread_counts() {
        let spec = ModelSpec::new(ModelFamily::BhfM);
        let truth = ModelParams::BhfM(presets::bhf_m(Forest::Birch, Default::default()));
        let mut s = samples_from(&spec, &truth, &log_spaced(5.0, 300.0, 100));
        for (x, n) in s.iter_mut().zip(draw_shadowing_series(2.6, 100, 2).unwrap()) {
            x.pl_db += n;
        }
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| fit_model(&s, &spec, &spec.default_bounds(), &spec.default_init(), &FitOptions::default()).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn unconverged_fit_refuses_residuals() {
        let spec = ModelSpec::new(ModelFamily::Ci);
        let s: Vec<_> = (1..=5).map(|i| PathLossSample::new(10.0 * i as f64, 80.0)).collect();
        let mut fit = fit_model(&s, &spec, &spec.default_bounds(), &[2.0], &FitOptions::default()).unwrap();
        fit.converged = false;
        assert!(shadow_residuals(&fit, &s).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in ModelFamily::ALL {
            assert_eq!(ModelFamily::parse(f.name()), Some(f));
            let spec = ModelSpec::new(f);
            let init = spec.default_init();
            let b = spec.default_bounds();
            assert_eq!(init.len(), f.param_names().len());
            for (i, v) in init.iter().enumerate() {
                assert!(b.lower[i] <= *v && *v <= b.upper[i], "{} init {i}", f.name());
            }
            let p = spec.params_from_vec(&init).unwrap();
            assert_eq!(spec.vec_from_params(&p).unwrap(), init);
        }
    }
}
