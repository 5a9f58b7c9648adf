//! Geodesic distance of a conformal metric `(Laplacian(u)/4 + theta + delta)|dz|^2`
//! and its log-type decay near a base point.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::fit::{linear_fit, LinearFit};
use super::graph::grid_dijkstra;
use super::jensen::ball_nodes;
use super::mass::discrete_laplacian;
use super::modulus::modulus_ladder;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampanatoParams {
    pub theta: f64,
    pub delta: f64,
    /// Target exponent `M`; the hypothesis is a `log^(2M)` modulus.
    pub exponent: f64,
    /// Constant of the hypothesis modulus.
    pub c0: f64,
    pub base: (f64, f64),
    /// Number of dyadic radii, from a quarter of the box size down.
    pub scales: usize,
}

impl Default for CampanatoParams {
    fn default() -> Self {
        CampanatoParams { theta: 0.0, delta: 0.1, exponent: 2.0, c0: 1.0, base: (0.0, 0.0), scales: 5 }
    }
}

/// Fitted exponent may fall short of `M - 1` by this much.
pub const EXPONENT_SLACK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellRow {
    pub radius: f64,
    /// Largest distance from the base over nodes within `radius`.
    pub distance: f64,
    /// Ball average of the distance at the base.
    pub average: f64,
    /// Difference to the previous (twice larger) average.
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampanatoReport {
    /// Largest `omega(t) |log t|^(2M) / c0` over the checked separations.
    pub hypothesis_ratio: f64,
    pub min_factor: f64,
    pub rows: Vec<ShellRow>,
    /// Fit of `distance ~ C |log r|^(-p)`; `exponent = p`.
    pub fit: LinearFit,
    pub exponent: f64,
    /// `max step |log r|^M` over the ladder.
    pub step_constant: f64,
    /// Tail bound `step_constant / ((M - 1) log 2)`.
    pub tail_constant: f64,
    /// `|d(base) - average(r)| <= tail_constant |log r|^(1 - M)` on every radius.
    pub tail_ok: bool,
    pub passed: bool,
}

/// Conformal factor at every node; boundary nodes take the value of the
/// nearest interior node.
pub fn conformal_factor(u: &GridField, theta: f64, delta: f64) -> Result<Vec<f64>> {
    let (nx, ny) = (u.nx(), u.ny());
    if nx < 3 || ny < 3 {
        return Err(invalid("grid too small for a Laplacian"));
    }
    (0..u.len())
        .map(|k| {
            let (i, j) = u.ij(k);
            let inner = u.index(i.clamp(1, nx - 2), j.clamp(1, ny - 2));
            let lap =
                discrete_laplacian(u, inner).ok_or_else(|| Error::Degenerate("masked node in the chart".into()))?;
            Ok(0.25 * lap + theta + delta)
        })
        .collect()
}

/// Graph distance from the node nearest `base`, with edge weights
/// `|edge| (sqrt f(a) + sqrt f(b)) / 2`.
pub fn conformal_distance(u: &GridField, factor: &[f64], base: (f64, f64)) -> Result<Vec<f64>> {
    if let Some(k) = (0..u.len()).find(|&k| factor[k] <= 0.0) {
        let (x, y) = u.coords(k);
        return Err(Error::Precondition(format!("nonpositive conformal factor {:e} at ({x}, {y})", factor[k])));
    }
    let src = nearest_node(u, base)?;
    let root: Vec<f64> = factor.iter().map(|f| f.sqrt()).collect();
    let h = u.spacing();
    let ny = u.ny();
    Ok(grid_dijkstra(u.nx(), ny, [(src, 0.0)], |a, b| {
        let (di, dj) = ((a / ny) as f64 - (b / ny) as f64, (a % ny) as f64 - (b % ny) as f64);
        Some(h * di.hypot(dj) * 0.5 * (root[a] + root[b]))
    }))
}

fn nearest_node(u: &GridField, p: (f64, f64)) -> Result<usize> {
    if !u.contains(p.0, p.1) {
        return Err(Error::Precondition("base point outside the grid".into()));
    }
    let (x0, y0) = u.origin();
    let h = u.spacing();
    let i = ((p.0 - x0) / h).round() as usize;
    let j = ((p.1 - y0) / h).round() as usize;
    Ok(u.index(i.min(u.nx() - 1), j.min(u.ny() - 1)))
}

/// Check the hypothesis, build the conformal distance from the base, and
/// fit its decay.
pub fn campanato_distance_check(u: &GridField, p: &CampanatoParams) -> Result<CampanatoReport> {
    let m = p.exponent;
    if !(m > 1.0) || !(p.c0 > 0.0) || p.scales < 4 {
        return Err(invalid("need M > 1, c0 > 0 and at least four scales"));
    }
    let h = u.spacing();
    let (x0, y0) = u.origin();
    let (x1, y1) = u.corner();
    let half = (p.base.0 - x0).min(x1 - p.base.0).min(p.base.1 - y0).min(y1 - p.base.1);
    let top = 0.5 * half.min(0.5);
    let radii: Vec<f64> = (0..p.scales).map(|k| top * 0.5f64.powi(k as i32)).collect();
    if radii.last().is_some_and(|&r| r < 3.0 * h) {
        return Err(invalid("smallest radius is below three grid cells"));
    }

    let seps: Vec<f64> = (0..).map(|k| h * 2f64.powi(k)).take_while(|&t| t < top).collect();
    let omega = modulus_ladder(u, &seps);
    let hypothesis_ratio =
        seps.iter().zip(&omega).map(|(t, w)| w * t.ln().abs().powf(2.0 * m) / p.c0).fold(0.0, f64::max);
    if hypothesis_ratio > 1.0 {
        return Err(Error::Precondition(format!(
            "measured modulus exceeds c0 |log t|^(-2M) by a factor {hypothesis_ratio:.3}"
        )));
    }

    let factor = conformal_factor(u, p.theta, p.delta)?;
    let min_factor = factor.iter().copied().fold(f64::INFINITY, f64::min);
    let d = conformal_distance(u, &factor, p.base)?;
    let at_base = d[nearest_node(u, p.base)?];

    let mut rows = Vec::with_capacity(radii.len());
    let mut prev: Option<f64> = None;
    for &r in &radii {
        let (mut top_d, mut sum, mut count) = (0.0f64, 0.0, 0usize);
        for k in ball_nodes(u, p.base, r) {
            top_d = top_d.max(d[k]);
            sum += d[k];
            count += 1;
        }
        let average = sum / count as f64;
        rows.push(ShellRow { radius: r, distance: top_d, average, step: prev.map(|a| (a - average).abs()) });
        prev = Some(average);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.radius.ln().abs().ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.distance.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let exponent = -fit.slope;

    let step_constant = rows.iter().filter_map(|r| r.step.map(|s| s * r.radius.ln().abs().powf(m))).fold(0.0, f64::max);
    let tail_constant = step_constant / ((m - 1.0) * LN_2);
    // the first radius has no larger neighbour, so its tail is checked from the rest
    let tail_ok = rows
        .iter()
        .skip(1)
        .all(|r| (r.average - at_base).abs() <= tail_constant * r.radius.ln().abs().powf(1.0 - m) * (1.0 + 1e-9));
    let passed = tail_ok && exponent >= m - 1.0 - EXPONENT_SLACK;
    Ok(CampanatoReport {
        hypothesis_ratio,
        min_factor,
        rows,
        fit,
        exponent,
        step_constant,
        tail_constant,
        tail_ok,
        passed,
    })
}

/// `c (1 + |log |z||)^(-2M)`, continued by 0 at the origin.
pub fn radial_profile(c: f64, m: f64) -> impl Fn(f64, f64) -> f64 + Sync {
    move |x, y| {
        let r = x.hypot(y);
        if r == 0.0 {
            0.0
        } else {
            c * (1.0 + r.ln().abs()).powf(-2.0 * m)
        }
    }
}
