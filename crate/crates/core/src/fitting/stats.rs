use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mu: f64,
    /// Sample standard deviation (N - 1 denominator).
    pub sigma: f64,
    /// 100 x RMSE between the histogram density and the fitted normal pdf.
    /// `None` when the series has zero variance.
    pub fit_err_pct: Option<f64>,
}

/// Fits a normal distribution by moments and scores it against a
/// Freedman-Diaconis histogram of the series.
pub fn fit_normal(series: &[f64]) -> Result<NormalFit> {
    let n = series.len();
    if n < 2 {
        return Err(Error::arity(format!("normal fit needs at least 2 values, got {n}")));
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("series contains non-finite value {bad}")));
    }
    let mu = mean(series);
    let var = series.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Ok(NormalFit { mu, sigma, fit_err_pct: None });
    }
    Ok(NormalFit {
        mu,
        sigma,
        fit_err_pct: Some(100.0 * histogram_rmse(series, mu, sigma)),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn histogram_rmse(series: &[f64], mu: f64, sigma: f64) -> f64 {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let mut width = 2.0 * iqr / n.cbrt();
    if width <= 0.0 {
        width = 3.49 * sigma / n.cbrt();
    }
    let bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &v in &sorted {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let sq: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let centre = lo + (i as f64 + 0.5) * width;
            let pdf = norm * (-0.5 * ((centre - mu) / sigma).powi(2)).exp();
            (c as f64 / (n * width) - pdf).powi(2)
        })
        .sum();
    (sq / bins as f64).sqrt()
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arity(format!(
            "correlation needs two equal-length series of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
