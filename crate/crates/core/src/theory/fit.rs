//! Least-squares rate extraction on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
    /// Points inside the window dropped because their error was not positive.
    pub excluded: usize,
}

/// Fit `log(error) = intercept + slope * log(t)` over `window.0 <= t <= window.1`.
///
/// ```
/// let data: Vec<(f64, f64)> = (0..8).map(|k| {
///     let t = 2f64.powi(k);
///     (t, 3.0 / t)
/// }).collect();
/// let fit = sgdlab::theory::slope_fit(&data, (1.0, 128.0)).unwrap();
/// assert!((fit.slope + 1.0).abs() < 1e-12);
/// assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
/// ```
pub fn slope_fit(trajectory: &[(f64, f64)], window: (f64, f64)) -> Result<SlopeFit> {
    let mut excluded = 0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, e) in trajectory {
        if !(t >= window.0 && t <= window.1) || t <= 0.0 {
            continue;
        }
        if e > 0.0 && e.is_finite() {
            xs.push(t.ln());
            ys.push(e.ln());
        } else {
            excluded += 1;
        }
    }
    let n = xs.len();
    if n < 4 {
        return Err(Error::Validation(format!(
            "slope fit needs at least 4 positive points in [{}, {}], found {n}",
            window.0, window.1
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Validation("slope fit needs at least two distinct t".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (sse / nf).sqrt(),
        points: n,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic(lo: i32, hi: i32, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (lo..=hi).map(|k| 2f64.powi(k)).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exact_power() {
        let fit = slope_fit(&dyadic(0, 16, |t| t.powf(-0.5)), (1.0, 65536.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn log_factor_flattens_the_slope() {
        let data = dyadic(6, 16, |t| t.powf(-0.5) * t.ln());
        let fit = slope_fit(&data, (64.0, 65536.0)).unwrap();
        assert!((fit.slope - (-0.361_641_283_672_708_5)).abs() < 1e-12, "{}", fit.slope);
        assert!(fit.slope > -0.5);
    }

    #[test]
    fn non_positive_values_are_counted() {
        let mut data = dyadic(0, 6, |t| 1.0 / t);
        data[2].1 = 0.0;
        data[3].1 = -1.0;
        let fit = slope_fit(&data, (1.0, 64.0)).unwrap();
        assert_eq!(fit.excluded, 2);
        assert_eq!(fit.points, 5);
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let data = dyadic(0, 6, |t| 1.0 / t);
        assert!(slope_fit(&data, (8.0, 32.0)).is_err());
    }
}
