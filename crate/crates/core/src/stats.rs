//! Small statistics toolbox: moments, blocked jackknife, line fits.

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Delete-one-block jackknife of `estimator` with blocks of `block` samples.
/// Trailing samples that do not fill a block are dropped. Returns the
/// full-sample estimate and its standard error.
pub fn jackknife<F>(x: &[f64], block: usize, estimator: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let block = block.max(1);
    let nb = x.len() / block;
    if nb < 2 {
        return Err(Error::invalid(format!(
            "jackknife needs at least two blocks of {block} samples, got {} samples",
            x.len()
        )));
    }
    let used = &x[..nb * block];
    let full = estimator(used);
    let mut reduced = Vec::with_capacity(used.len() - block);
    let mut thetas = Vec::with_capacity(nb);
    for b in 0..nb {
        reduced.clear();
        reduced.extend_from_slice(&used[..b * block]);
        reduced.extend_from_slice(&used[(b + 1) * block..]);
        thetas.push(estimator(&reduced));
    }
    let tm = mean(&thetas);
    let var = thetas.iter().map(|t| (t - tm).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    Ok((full, var.sqrt()))
}

/// Ordinary least squares `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope assuming independent residuals.
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(Error::invalid("linear fit needs at least two paired points"));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear fit needs distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LineFit {
        intercept,
        slope,
        slope_se,
    })
}

/// Theil–Sen slope: median of pairwise slopes. `O(n²)`.
pub fn theil_sen(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::invalid("Theil-Sen needs at least two paired points"));
    }
    let mut slopes = Vec::with_capacity(x.len() * (x.len() - 1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::invalid("Theil-Sen needs distinct abscissae"));
    }
    slopes.sort_by(f64::total_cmp);
    let m = slopes.len();
    Ok(if m % 2 == 1 {
        slopes[m / 2]
    } else {
        0.5 * (slopes[m / 2 - 1] + slopes[m / 2])
    })
}

pub fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// One Newton step on top of the library value tightens it to a few ulp.
pub fn erfc_inv(x: f64) -> f64 {
    let y = statrs::function::erf::erfc_inv(x);
    if !y.is_finite() {
        return y;
    }
    let d = -2.0 / std::f64::consts::PI.sqrt() * (-y * y).exp();
    y - (erfc(y) - x) / d
}
