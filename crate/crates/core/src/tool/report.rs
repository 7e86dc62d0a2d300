//! Run reports.
//!
//! A report carries no timestamps or host data: identical config, seed and
//! inputs give byte-identical JSON. Maps are ordered.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::fitting::{FittedModel, NormalFit};
use crate::tool::config::RunConfig;

pub const TOOL_NAME: &str = "forest-link";

/// One fitted model family, in the shape of a parameter table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub rmse_db: f64,
    pub n_samples: usize,
    pub converged: bool,
    /// Normal fit of the residuals (measured minus model).
    pub shadowing_db: Option<NormalFit>,
}

impl FitRow {
    pub fn from_fit(fit: &FittedModel, shadowing_db: Option<NormalFit>) -> Self {
        FitRow {
            family: fit.spec.family.name().to_string(),
            params: fit
                .spec
                .param_names()
                .iter()
                .zip(&fit.param_vec)
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
            rmse_db: fit.rmse_db,
            n_samples: fit.n_samples,
            converged: fit.converged,
            shadowing_db,
        }
    }
}

/// Small-scale statistics of one capture batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub label: String,
    pub n_captures: usize,
    pub rms_ds_ns: NormalFit,
    /// `None` when fewer than two captures had a defined K.
    pub k_db: Option<NormalFit>,
    pub ds_k_pearson: Option<f64>,
    pub mean_taps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularRow {
    pub source: String,
    pub rms_asa_deg: f64,
    /// `None` for a spectrum with zero resultant.
    pub avg_asa_deg: Option<f64>,
    pub peak_azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub fits: Vec<FitRow>,
    pub channel_stats: Vec<StatRow>,
    pub angular: Vec<AngularRow>,
    /// Named scalar results of single-shot verbs.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// Artifact file names, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Report {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            fits: vec![],
            channel_stats: vec![],
            angular: vec![],
            metrics: BTreeMap::new(),
            notes: vec![],
            artifacts: vec![],
        }
    }

    /// Appends the rows, notes and artifacts of `other`.
    pub fn absorb(&mut self, other: Report) {
        self.fits.extend(other.fits);
        self.channel_stats.extend(other.channel_stats);
        self.angular.extend(other.angular);
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{}.{k}", other.command), v);
        }
        self.notes.extend(other.notes);
        for a in other.artifacts {
            if !self.artifacts.contains(&a) {
                self.artifacts.push(a);
            }
        }
    }

    /// Long-form `family,quantity,value` table of the fitted models.
    pub fn fits_csv(&self) -> String {
        let mut s = String::from("family,quantity,value\n");
        for f in &self.fits {
            for (k, v) in &f.params {
                writeln!(s, "{},{k},{v}", f.family).unwrap();
            }
            writeln!(s, "{},rmse_db,{}", f.family, f.rmse_db).unwrap();
            if let Some(sh) = &f.shadowing_db {
                writeln!(s, "{},shadowing_mu_db,{}", f.family, sh.mu).unwrap();
                writeln!(s, "{},shadowing_sigma_db,{}", f.family, sh.sigma).unwrap();
            }
        }
        s
    }

    /// `label,quantity,mu,sigma` table of the channel statistics.
    pub fn stats_csv(&self) -> String {
        let mut s = String::from("label,quantity,mu,sigma\n");
        for r in &self.channel_stats {
            writeln!(s, "{},rms_ds_ns,{},{}", r.label, r.rms_ds_ns.mu, r.rms_ds_ns.sigma).unwrap();
            if let Some(k) = &r.k_db {
                writeln!(s, "{},k_db,{},{}", r.label, k.mu, k.sigma).unwrap();
            }
        }
        s
    }
}
