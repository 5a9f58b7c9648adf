//! Measured moduli of continuity and log-power fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::fit::{linear_fit, LinearFit};
use super::graph::STENCIL16;
use crate::error::{invalid, Error, Result};

/// `omega(t)` for each separation: the largest `|u(x) - u(y)|` over node
/// pairs `y = x + m d` with `d` one of the 16 stencil directions and
/// `|y - x| <= t`.
pub fn modulus_ladder(u: &GridField, separations: &[f64]) -> Vec<f64> {
    let h = u.spacing();
    let top = separations.iter().copied().fold(0.0, f64::max);
    // the stencil is symmetric, so half the directions cover every pair
    let mut offsets: Vec<(i64, i64, f64)> = Vec::new();
    for &(a, b) in STENCIL16.iter().filter(|&&(a, b)| a > 0 || (a == 0 && b > 0)) {
        let unit = ((a * a + b * b) as f64).sqrt() * h;
        let mut m = 1;
        while m as f64 * unit <= top * (1.0 + 1e-12) {
            offsets.push((a * m, b * m, m as f64 * unit));
            m += 1;
        }
    }
    let (nx, ny) = (u.nx() as i64, u.ny() as i64);
    let vals = u.values();
    let per_offset: Vec<(f64, f64)> = offsets
        .par_iter()
        .map(|&(a, b, len)| {
            let mut worst: f64 = 0.0;
            for i in 0.max(-a)..nx.min(nx - a) {
                for j in 0.max(-b)..ny.min(ny - b) {
                    let k = u.index(i as usize, j as usize);
                    let w = u.index((i + a) as usize, (j + b) as usize);
                    if u.is_active(k) && u.is_active(w) {
                        worst = worst.max((vals[k] - vals[w]).abs());
                    }
                }
            }
            (len, worst)
        })
        .collect();
    separations
        .iter()
        .map(|&t| per_offset.iter().filter(|o| o.0 <= t * (1.0 + 1e-12)).map(|o| o.1).fold(0.0, f64::max))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub separation: f64,
    pub modulus: f64,
}

/// Fit of `omega(t) ~ C |log t|^(-M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusFit {
    pub rows: Vec<ModulusRow>,
    /// `+inf` when the field is constant.
    pub exponent: f64,
    pub constant: f64,
    pub fit: Option<LinearFit>,
    /// Exponent a Lipschitz modulus would produce on the same ladder: the
    /// largest exponent the grid can tell apart.
    pub resolvable: f64,
    /// The fit reached the resolvable limit; read `exponent` as `>= resolvable`.
    pub saturated: bool,
}

/// Dyadic separations `2h, 4h, ...`, `count` of them, all below `1/2`.
pub fn dyadic_separations(u: &GridField, count: usize) -> Result<Vec<f64>> {
    let seps: Vec<f64> = (1..=count).map(|k| u.spacing() * 2f64.powi(k as i32)).collect();
    if seps.last().is_some_and(|&t| t >= 0.5) {
        return Err(invalid("separations reach 1/2; use a finer grid or fewer scales"));
    }
    Ok(seps)
}

/// Fit `log omega` against `log |log t|` over the given separations.
pub fn fit_log_modulus(u: &GridField, separations: &[f64]) -> Result<ModulusFit> {
    if separations.len() < 4 || separations.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(invalid("need at least four separations in (0, 1)"));
    }
    let omega = modulus_ladder(u, separations);
    let rows: Vec<ModulusRow> =
        separations.iter().zip(&omega).map(|(&t, &w)| ModulusRow { separation: t, modulus: w }).collect();
    let xs: Vec<f64> = separations.iter().map(|t| t.ln().abs().ln()).collect();
    let lin = linear_fit(&xs, &separations.iter().map(|t| t.ln()).collect::<Vec<_>>())?;
    let resolvable = -lin.slope;
    if omega.iter().all(|&w| w == 0.0) {
        return Ok(ModulusFit { rows, exponent: f64::INFINITY, constant: 0.0, fit: None, resolvable, saturated: true });
    }
    let keep: Vec<usize> = (0..omega.len()).filter(|&k| omega[k] > 0.0).collect();
    if keep.len() < 4 {
        return Err(Error::Degenerate("fewer than four separations with positive oscillation".into()));
    }
    let fx: Vec<f64> = keep.iter().map(|&k| xs[k]).collect();
    let fy: Vec<f64> = keep.iter().map(|&k| omega[k].ln()).collect();
    let fit = linear_fit(&fx, &fy)?;
    let exponent = -fit.slope;
    Ok(ModulusFit {
        rows,
        exponent,
        constant: fit.intercept.exp(),
        fit: Some(fit),
        resolvable,
        saturated: exponent >= 0.9 * resolvable,
    })
}
