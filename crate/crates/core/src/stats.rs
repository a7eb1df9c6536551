//! Small regression helpers shared by the tail and decay fits.

use serde::{Deserialize, Serialize};

/// Ordinary least squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub points: usize,
}

/// OLS fit; `None` with fewer than two points or constant `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = (0..n).map(|i| (y[i] - slope * x[i] - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        rss,
        points: n,
    })
}

/// Residual sum of squares of `y ≈ slope·x + c` with the slope held fixed
/// and the intercept refit.
pub fn rss_fixed_slope(x: &[f64], y: &[f64], slope: f64) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let c = (0..n).map(|i| y[i] - slope * x[i]).sum::<f64>() / n as f64;
    (0..n).map(|i| (y[i] - slope * x[i] - c).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(rss_fixed_slope(&x, &y, 2.0) < 1e-20);
        assert!(rss_fixed_slope(&x, &y, 1.0) > 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(ols(&[1.0], &[2.0]).is_none());
        assert!(ols(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
