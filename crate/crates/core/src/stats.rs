//! Small statistical helpers: least-squares power-law fits and the
//! Kolmogorov distance to a continuous law.

use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(LabError::domain("fit needs equally many abscissae and ordinates"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(LabError::domain(format!("fit needs at least 2 points, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::domain("fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        points: n,
    })
}

/// Fit of `ln y` against `ln x` over the points with `lo ≤ x ≤ hi` and `y > 0`.
pub fn log_log_fit(points: &[(f64, f64)], lo: f64, hi: f64) -> Result<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(x, y)| *x >= lo && *x <= hi && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    line_fit(&xs, &ys)
}

/// `sup_x |F_N(x) − F(x)|` for the empirical law of `samples` against a
/// continuous CDF. Ties are handled exactly: the empirical CDF is compared on
/// both sides of every jump.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if samples.is_empty() {
        return Err(LabError::domain("KS distance needs at least one sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i])?;
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(d)
}
