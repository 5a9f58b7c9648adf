//! Radial mollification and the curvature defect of the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::jensen::disk_offsets;
use super::mass::discrete_laplacian;
use crate::error::{invalid, Error, Result};

/// Radial profile `k(|z|^2 / eps^2)`, supported in the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-1 / (1 - t))`.
    #[default]
    Bump,
    /// Indicator of the ball.
    Flat,
}

impl Kernel {
    pub fn weight(self, t: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Bump => (-1.0 / (1.0 - t)).exp(),
            Kernel::Flat => 1.0,
        }
    }
}

fn offsets_in(u: &GridField, eps: f64) -> Result<Vec<(i64, i64)>> {
    let h = u.spacing();
    if eps < 2.0 * h {
        return Err(invalid(format!("radius {eps:e} below twice the spacing {h:e}")));
    }
    Ok(disk_offsets(h, eps))
}

/// Discrete convolution with the normalized kernel. Nodes whose ball leaves
/// the box, or that are masked, come back masked.
pub fn mollify(u: &GridField, eps: f64, kernel: Kernel) -> Result<GridField> {
    let h = u.spacing();
    let offsets = offsets_in(u, eps)?;
    let weights: Vec<f64> =
        offsets.iter().map(|&(a, b)| kernel.weight(((a * a + b * b) as f64) * h * h / (eps * eps))).collect();
    let reach = (eps / h + 1e-9).floor() as usize;
    let (nx, ny) = (u.nx(), u.ny());
    if 2 * reach >= nx || 2 * reach >= ny {
        return Err(Error::Precondition("mollifier wider than the grid".into()));
    }
    let vals = u.values();
    let out: Vec<(f64, bool)> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (i, j) = u.ij(k);
            if i < reach || j < reach || i + reach >= nx || j + reach >= ny || !u.is_active(k) {
                return (f64::NAN, false);
            }
            let (mut acc, mut mass) = (0.0, 0.0);
            for (&(a, b), &w) in offsets.iter().zip(&weights) {
                let kk = u.index((i as i64 + a) as usize, (j as i64 + b) as usize);
                if w > 0.0 && u.is_active(kk) {
                    acc += w * vals[kk];
                    mass += w;
                }
            }
            if mass > 0.0 {
                (acc / mass, true)
            } else {
                (f64::NAN, false)
            }
        })
        .collect();
    let (values, mask): (Vec<f64>, Vec<bool>) = out.into_iter().unzip();
    u.with_values(vec![0.0; u.len()])?.with_mask(mask)?.with_values(values)
}

/// `-min (Laplacian/4 + theta)` over nodes where the stencil is available.
/// In one complex dimension the complex Hessian is a quarter of the
/// Laplacian, so this is minus its smallest eigenvalue.
pub fn curvature_defect(u: &GridField, theta: f64) -> Result<f64> {
    (0..u.len())
        .into_par_iter()
        .filter_map(|k| discrete_laplacian(u, k))
        .map(|l| -(0.25 * l + theta))
        .reduce_with(f64::max)
        .ok_or_else(|| Error::Degenerate("no node with a full Laplacian stencil".into()))
}

/// `max |u(x) - u(y)|` over active node pairs at distance at most `eps`.
pub fn grid_modulus(u: &GridField, eps: f64) -> f64 {
    let offsets = disk_offsets(u.spacing(), eps);
    let (nx, ny) = (u.nx() as i64, u.ny() as i64);
    let vals = u.values();
    (0..u.len())
        .into_par_iter()
        .filter(|&k| u.is_active(k))
        .map(|k| {
            let (i, j) = u.ij(k);
            let mut top: f64 = 0.0;
            for &(a, b) in &offsets {
                let (p, q) = (i as i64 + a, j as i64 + b);
                if p >= 0 && q >= 0 && p < nx && q < ny {
                    let w = u.index(p as usize, q as usize);
                    if u.is_active(w) {
                        top = top.max((vals[w] - vals[k]).abs());
                    }
                }
            }
            top
        })
        .reduce(|| 0.0, f64::max)
}

/// `max |a - b|` over nodes active in both fields.
pub fn sup_distance(a: &GridField, b: &GridField) -> Result<f64> {
    if a.len() != b.len() || a.nx() != b.nx() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok((0..a.len())
        .filter(|&k| a.is_active(k) && b.is_active(k))
        .map(|k| (a.values()[k] - b.values()[k]).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifyRow {
    pub eps: f64,
    pub sup_error: f64,
    pub modulus: f64,
    pub defect: f64,
    /// `defect |log eps|`.
    pub weighted_defect: f64,
}

/// Largest `defect |log eps|` accepted as bounded.
pub const DEFECT_BOUND: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifyReport {
    pub rows: Vec<MollifyRow>,
    pub within_modulus: bool,
    pub defect_bounded: bool,
}

/// For each radius, sample `f` on a `nodes x nodes` grid over
/// `[c - 4 eps, c + 4 eps]^2`, mollify, and compare against the measured
/// modulus and the curvature defect with respect to `theta`.
pub fn mollify_sweep(
    f: impl Fn(f64, f64) -> f64,
    center: (f64, f64),
    radii: &[f64],
    nodes: usize,
    theta: f64,
    kernel: Kernel,
) -> Result<MollifyReport> {
    let rows = radii
        .iter()
        .map(|&eps| {
            let h = 8.0 * eps / (nodes as f64 - 1.0);
            let u = GridField::from_fn_box(nodes, nodes, center.0 - 4.0 * eps, center.1 - 4.0 * eps, h, &f)?;
            let smooth = mollify(&u, eps, kernel)?;
            let defect = curvature_defect(&smooth, theta)?;
            Ok(MollifyRow {
                eps,
                sup_error: sup_distance(&smooth, &u)?,
                modulus: grid_modulus(&u, eps),
                defect,
                weighted_defect: defect * eps.ln().abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let within_modulus = rows.iter().all(|r| r.sup_error <= r.modulus * (1.0 + 1e-12));
    let defect_bounded = rows.iter().all(|r| r.weighted_defect <= DEFECT_BOUND);
    Ok(MollifyReport { rows, within_modulus, defect_bounded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinked(x: f64, y: f64) -> f64 {
        x.hypot(y).ln().max(-1.0) - (x * x + y * y)
    }

    #[test]
    fn kernels() {
        assert_eq!(Kernel::Bump.weight(1.0), 0.0);
        assert!((Kernel::Bump.weight(0.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(Kernel::Flat.weight(0.5), 1.0);
    }

    #[test]
    fn mollified_constant_and_linear_fields() {
        let u = GridField::from_fn(65, -1.0, 1.0, |x, y| 1.0 + x - 2.0 * y).unwrap();
        let m = mollify(&u, 0.2, Kernel::Bump).unwrap();
        // radial kernels reproduce affine functions
        assert!(sup_distance(&m, &u).unwrap() < 1e-12);
        assert!(!m.is_active(0));
        assert!(mollify(&u, 0.01, Kernel::Bump).is_err());
    }

    #[test]
    fn smooth_psh_has_no_defect() {
        let u = GridField::from_fn(129, -1.0, 1.0, |x, y| x * x + y * y - 0.5 * x * y).unwrap();
        let m = mollify(&u, 0.1, Kernel::Bump).unwrap();
        // Laplacian/4 = 1 for this quadratic, and mollification keeps that
        assert!(curvature_defect(&m, 0.0).unwrap() <= -1.0 + 1e-6);
    }

    #[test]
    fn error_shrinks_along_halving() {
        let u = GridField::from_fn(257, -1.0, 1.0, kinked).unwrap();
        let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e| sup_distance(&mollify(&u, e, Kernel::Bump).unwrap(), &u).unwrap())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn sweep_on_the_kinked_field() {
        let c = (std::f64::consts::E.recip(), 0.0);
        let rep = mollify_sweep(kinked, c, &[1e-1, 1e-2, 1e-3], 96, 1.0, Kernel::Bump).unwrap();
        assert!(rep.within_modulus && rep.defect_bounded, "{rep:?}");
    }
}
