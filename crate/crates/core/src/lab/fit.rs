//! Least-squares line fits with confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

/// `y = intercept + slope x`, with a 95% confidence interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Standard error of the slope; NaN with two points.
    pub slope_stderr: f64,
    /// `(lo, hi)` of the 95% interval; infinite with two points.
    pub slope_ci: (f64, f64),
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("a line fit needs at least two matching points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite data in line fit"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(invalid("line fit needs two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let (slope_stderr, slope_ci) = if xs.len() > 2 {
        let se = (rss / (n - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| invalid(e.to_string()))?.inverse_cdf(0.975);
        (se, (slope - t * se, slope + t * se))
    } else {
        (f64::NAN, (f64::NEG_INFINITY, f64::INFINITY))
    };
    Ok(LinearFit { slope, intercept, points: xs.len(), slope_stderr, slope_ci, r_squared })
}

/// `top, top/2, ..., top/2^(count-1)`.
pub fn dyadic_ladder(top: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| top * 0.5f64.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_covers_noisy_slope() {
        let xs: Vec<f64> = (0..8).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(k, x)| x + if k % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!(f.slope_ci.0 < 1.0 && 1.0 < f.slope_ci.1);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(linear_fit(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn ladder_halves() {
        assert_eq!(dyadic_ladder(1.0, 4), vec![1.0, 0.5, 0.25, 0.125]);
    }
}
