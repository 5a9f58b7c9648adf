//! Ball statistics and the sup-minus-value gap of subharmonic fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::fit::{linear_fit, LinearFit};
use crate::error::{invalid, Error, Result};

/// Axis-aligned rectangle `[lo.0, hi.0] x [lo.1, hi.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
}

impl Rect {
    pub fn new(lo: (f64, f64), hi: (f64, f64)) -> Result<Self> {
        if !(hi.0 > lo.0 && hi.1 > lo.1) {
            return Err(invalid("rectangle needs hi > lo on both axes"));
        }
        Ok(Rect { lo, hi })
    }

    pub fn square(half: f64) -> Result<Self> {
        Rect::new((-half, -half), (half, half))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.lo.0 && x <= self.hi.0 && y >= self.lo.1 && y <= self.hi.1
    }
}

const BOX_TOL: f64 = 1e-12;

fn check_ball(u: &GridField, x: (f64, f64), r: f64) -> Result<()> {
    let h = u.spacing();
    if !(r >= h * (1.0 - BOX_TOL)) {
        return Err(invalid(format!("ball radius {r:e} below the grid spacing {h:e}")));
    }
    let (x0, y0) = u.origin();
    let (x1, y1) = u.corner();
    let tol = BOX_TOL * (1.0 + r);
    if x.0 - r < x0 - tol || x.0 + r > x1 + tol || x.1 - r < y0 - tol || x.1 + r > y1 + tol {
        return Err(Error::Precondition("ball exits the grid box".into()));
    }
    Ok(())
}

/// Active nodes whose centers lie in the closed ball.
pub(crate) fn ball_nodes(u: &GridField, x: (f64, f64), r: f64) -> impl Iterator<Item = usize> + '_ {
    let h = u.spacing();
    let (x0, y0) = u.origin();
    let span = |c: f64, o: f64, n: usize| {
        let lo = ((c - r - o) / h - 1e-9).ceil().max(0.0) as usize;
        let hi = (((c + r - o) / h + 1e-9).floor().max(0.0) as usize).min(n - 1);
        lo..=hi
    };
    let (ri, rj) = (span(x.0, x0, u.nx()), span(x.1, y0, u.ny()));
    let r2 = r * r * (1.0 + 1e-12);
    ri.flat_map(move |i| rj.clone().map(move |j| (i, j))).map(move |(i, j)| u.index(i, j)).filter(move |&k| {
        let (px, py) = u.coords(k);
        (px - x.0).powi(2) + (py - x.1).powi(2) <= r2 && u.is_active(k)
    })
}

/// Largest value over grid nodes in the ball.
pub fn sup_ball(u: &GridField, x: (f64, f64), s: f64) -> Result<f64> {
    check_ball(u, x, s)?;
    ball_nodes(u, x, s)
        .map(|k| u.values()[k])
        .reduce(f64::max)
        .ok_or_else(|| Error::Degenerate("ball contains no active node".into()))
}

/// Average over grid nodes in the ball.
pub fn mean_ball(u: &GridField, x: (f64, f64), r: f64) -> Result<f64> {
    check_ball(u, x, r)?;
    let (sum, count) = ball_nodes(u, x, r).fold((0.0, 0usize), |(s, c), k| (s + u.values()[k], c + 1));
    if count == 0 {
        return Err(Error::Degenerate("ball contains no active node".into()));
    }
    Ok(sum / count as f64)
}

/// Integer offsets of the nodes within `r` of a node.
pub(crate) fn disk_offsets(h: f64, r: f64) -> Vec<(i64, i64)> {
    let m = (r / h + 1e-9).floor() as i64;
    let r2 = (r / h).powi(2) * (1.0 + 1e-12);
    let mut out = Vec::new();
    for di in -m..=m {
        for dj in -m..=m {
            if (di * di + dj * dj) as f64 <= r2 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// A quarter of the distance from `k` to the edge of the grid box.
pub fn inner_margin(u: &GridField, k: &Rect) -> f64 {
    let (x0, y0) = u.origin();
    let (x1, y1) = u.corner();
    let gap = (k.lo.0 - x0).min(k.lo.1 - y0).min(x1 - k.hi.0).min(y1 - k.hi.1);
    0.25 * gap
}

/// Grid estimate of `int_K |sup_{B(x, s)} u - u(x)| dx`.
pub fn jensen_gap(u: &GridField, k: &Rect, s: f64) -> Result<f64> {
    let r0 = inner_margin(u, k);
    if !(r0 > 0.0) {
        return Err(Error::Precondition("inner box must sit strictly inside the grid box".into()));
    }
    if s >= r0.powi(3) {
        return Err(Error::Precondition(format!("scale {s:e} must stay below r0^3 = {:e}", r0.powi(3))));
    }
    let h = u.spacing();
    if s < h {
        return Err(invalid(format!("scale {s:e} below the grid spacing {h:e}")));
    }
    let offsets = disk_offsets(h, s);
    let (nx, ny) = (u.nx() as i64, u.ny() as i64);
    let vals = u.values();
    // per-row sums are added in order so the result ignores the thread count
    let rows: Vec<f64> = (0..u.nx())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..u.ny() {
                let kk = u.index(i, j);
                let (px, py) = u.coords(kk);
                if !k.contains(px, py) || !u.is_active(kk) {
                    continue;
                }
                let mut top = vals[kk];
                for &(di, dj) in &offsets {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a >= 0 && b >= 0 && a < nx && b < ny {
                        let w = u.index(a as usize, b as usize);
                        if u.is_active(w) {
                            top = top.max(vals[w]);
                        }
                    }
                }
                acc += top - vals[kk];
            }
            acc
        })
        .collect();
    Ok(rows.iter().sum::<f64>() * h * h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenRow {
    pub scale: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub rows: Vec<JensenRow>,
    /// Fitted exponent of `gap ~ C s^a`; infinite when every gap vanishes.
    pub exponent: f64,
    pub fit: Option<LinearFit>,
}

/// Gap over a ladder of scales and the fitted power law.
pub fn jensen_sweep(u: &GridField, k: &Rect, scales: &[f64]) -> Result<JensenReport> {
    if scales.len() < 4 {
        return Err(invalid("exponent fits need at least four scales"));
    }
    let rows =
        scales.iter().map(|&s| Ok(JensenRow { scale: s, gap: jensen_gap(u, k, s)? })).collect::<Result<Vec<_>>>()?;
    if rows.iter().all(|r| r.gap == 0.0) {
        return Ok(JensenReport { rows, exponent: f64::INFINITY, fit: None });
    }
    if rows.iter().any(|r| r.gap <= 0.0) {
        return Err(Error::Degenerate("gap vanishes at some scales but not others".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.scale.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(JensenReport { rows, exponent: fit.slope, fit: Some(fit) })
}

/// `u` plus `amplitude` on a random `fraction` of the nodes.
pub fn plant_salt(u: &GridField, fraction: f64, amplitude: f64, seed: u64) -> Result<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = u.values().iter().map(|&v| if rng.gen::<f64>() < fraction { v + amplitude } else { v }).collect();
    u.with_values(values)
}
