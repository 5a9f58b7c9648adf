//! Discrete Laplacian mass and the Lelong-type ratio on balls.

use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::jensen::ball_nodes;
use crate::error::{invalid, Error, Result};

/// Complex dimension of the 2-D real grids.
const COMPLEX_DIM: i32 = 1;

/// Five-point Laplacian at node `k`; `None` on the boundary or next to a
/// masked node.
pub fn discrete_laplacian(u: &GridField, k: usize) -> Option<f64> {
    let (i, j) = u.ij(k);
    if i == 0 || j == 0 || i + 1 >= u.nx() || j + 1 >= u.ny() {
        return None;
    }
    let around = [u.index(i - 1, j), u.index(i + 1, j), u.index(i, j - 1), u.index(i, j + 1)];
    if !u.is_active(k) || around.iter().any(|&w| !u.is_active(w)) {
        return None;
    }
    let v = u.values();
    let h2 = u.spacing() * u.spacing();
    Some((around.iter().map(|&w| v[w]).sum::<f64>() - 4.0 * v[k]) / h2)
}

fn check_scale(v: &GridField, x: (f64, f64), eps: f64) -> Result<()> {
    let h = v.spacing();
    if eps < 2.0 * h {
        return Err(invalid(format!("radius {eps:e} below twice the spacing {h:e}")));
    }
    let (x0, y0) = v.origin();
    let (x1, y1) = v.corner();
    let r = eps + h;
    if x.0 - r < x0 || x.0 + r > x1 || x.1 - r < y0 || x.1 + r > y1 {
        return Err(Error::Precondition("ball plus one cell exits the grid box".into()));
    }
    Ok(())
}

/// `sum of (discrete Laplacian) h^2` over nodes in the closed ball; this is
/// the discrete flux of `grad v` through the ball's boundary.
pub fn laplacian_mass(v: &GridField, x: (f64, f64), eps: f64) -> Result<f64> {
    check_scale(v, x, eps)?;
    let h2 = v.spacing() * v.spacing();
    Ok(ball_nodes(v, x, eps).filter_map(|k| discrete_laplacian(v, k)).sum::<f64>() * h2)
}

/// `eps^(2 - 2n)` times the Laplacian mass plus the ball's area, `n = 1`.
pub fn lelong_ratio(v: &GridField, x: (f64, f64), eps: f64) -> Result<f64> {
    check_scale(v, x, eps)?;
    let area = ball_nodes(v, x, eps).count() as f64 * v.spacing() * v.spacing();
    Ok(eps.powi(2 - 2 * COMPLEX_DIM) * (laplacian_mass(v, x, eps)? + area))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LelongRow {
    pub eps: f64,
    pub ratio: f64,
    /// `ratio |log eps|`.
    pub weighted: f64,
    /// Largest `weighted` over this and all larger radii: the smallest `C`
    /// with `ratio <= C / |log eps|` on the sweep so far.
    pub running_constant: f64,
}

/// Variation above this fraction marks a constant that keeps growing.
pub const LELONG_VARIATION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LelongReport {
    pub rows: Vec<LelongRow>,
    /// `(max - min) / max` of the running constant.
    pub variation: f64,
    pub bounded: bool,
    /// The ratio stops decaying while the constant grows: a positive
    /// Lelong number at the point.
    pub positive_mass: bool,
}

/// Lelong ratios of `f` at `x`, each radius on its own `nodes x nodes` grid
/// over `[x - 2 eps, x + 2 eps]^2`. Use an even `nodes` to keep `x` off
/// the grid.
pub fn lelong_sweep(f: impl Fn(f64, f64) -> f64, x: (f64, f64), radii: &[f64], nodes: usize) -> Result<LelongReport> {
    if radii.len() < 2 || radii.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(invalid("need at least two radii in (0, 1)"));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(radii.len());
    let mut running: f64 = 0.0;
    for eps in radii {
        let h = 4.0 * eps / (nodes as f64 - 1.0);
        let v = GridField::from_fn_box(nodes, nodes, x.0 - 2.0 * eps, x.1 - 2.0 * eps, h, &f)?;
        let ratio = lelong_ratio(&v, x, eps)?;
        let weighted = ratio * eps.ln().abs();
        running = running.max(weighted);
        rows.push(LelongRow { eps, ratio, weighted, running_constant: running });
    }
    let top = rows.iter().map(|r| r.running_constant).fold(0.0, f64::max);
    let low = rows.iter().map(|r| r.running_constant).fold(f64::INFINITY, f64::min);
    let variation = if top > 0.0 { (top - low) / top } else { 0.0 };
    let bounded = variation < LELONG_VARIATION;
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let positive_mass = !bounded && last.ratio >= 0.5 * first.ratio;
    Ok(LelongReport { rows, variation, bounded, positive_mass })
}
