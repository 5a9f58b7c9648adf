//! Blowups of `C^n` along coordinate subspaces and the transfer of log
//! continuity from a blowup back to its base.
//!
//! The model is the polydisk `|x_i| < R` blown up along
//! `V = {x_1 = ... = x_q = 0}`. The blowup sits inside `polydisk x CP^{q-1}`
//! and carries the product of the Euclidean and Fubini-Study metrics, the
//! latter scaled so that `CP^{q-1}` has diameter `pi/2`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::geometry::EPS_GEO;
use crate::lab::field::GridField;
use crate::lab::graph::{dijkstra, STENCIL16};
use crate::logmod::{VerificationReport, VERIFY_TOL};

/// A point of `C^n`.
pub type CPoint = DVector<Complex64>;

/// `|D lift| <= K_JAC / dist(., V)^2` wherever `dist(., V) <= 1`.
pub const K_JAC: f64 = SQRT_2;

/// Relative slack granted to the graph oracle in calibration ratios.
pub const ORACLE_SLACK: f64 = 0.05;

/// Polydisk of radius `radius` in `C^n`, blown up along the first
/// `center_codim` coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupModel {
    pub ambient_dim: usize,
    pub center_codim: usize,
    pub radius: f64,
}

impl BlowupModel {
    pub fn new(ambient_dim: usize, center_codim: usize, radius: f64) -> Result<Self> {
        if center_codim < 2 || center_codim > ambient_dim {
            return Err(invalid(format!("need 2 <= q <= n, got q = {center_codim}, n = {ambient_dim}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("polydisk radius must be positive"));
        }
        Ok(BlowupModel { ambient_dim, center_codim, radius })
    }

    pub fn chart(&self, index: usize) -> Result<BlowupChart> {
        BlowupChart::new(self.ambient_dim, self.center_codim, index)
    }

    /// Euclidean diameter of the polydisk.
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius * (self.ambient_dim as f64).sqrt()
    }

    /// Largest possible distance to the center inside the polydisk.
    pub fn max_clearance(&self) -> f64 {
        self.radius * (self.center_codim as f64).sqrt()
    }

    pub fn contains(&self, a: &CPoint) -> bool {
        a.len() == self.ambient_dim && a.iter().all(|z| z.norm() <= self.radius * (1.0 + 1e-12))
    }

    pub fn center_dist(&self, a: &CPoint) -> f64 {
        a.rows(0, self.center_codim).norm()
    }

    pub fn on_center(&self, a: &CPoint) -> bool {
        self.center_dist(a) <= EPS_GEO
    }

    /// Orthogonal projection onto the center.
    pub fn project(&self, a: &CPoint) -> CPoint {
        let mut p = a.clone();
        p.rows_mut(0, self.center_codim).fill(Complex64::new(0.0, 0.0));
        p
    }

    fn check(&self, a: &CPoint) -> Result<()> {
        ensure_dim(self.ambient_dim, a.len())?;
        if !self.contains(a) {
            return Err(Error::Precondition("point outside the model polydisk".into()));
        }
        Ok(())
    }

    /// The unique preimage of `a`, in the chart of its largest leading
    /// coordinate.
    pub fn lift(&self, a: &CPoint) -> Result<(BlowupChart, ChartPoint)> {
        ensure_dim(self.ambient_dim, a.len())?;
        if self.on_center(a) {
            return Err(Error::OnCenter);
        }
        let index = (0..self.center_codim)
            .max_by(|&i, &k| a[i].norm().total_cmp(&a[k].norm()).then(k.cmp(&i)))
            .expect("q >= 2");
        let chart = self.chart(index)?;
        let p = chart.lift(a)?;
        Ok((chart, p))
    }

    /// Upper bounds on the fiber distance between `a` and `b`.
    pub fn fiber_bound(&self, routes: &RouteConstants, a: &CPoint, b: &CPoint) -> Result<FiberBound> {
        self.check(a)?;
        self.check(b)?;
        let s = (a - b).norm();
        let clearance = [self.center_dist(a), self.center_dist(b)];
        let touches = self.on_center(a) || self.on_center(b);
        let segment = touches.then_some(routes.segment * s);
        let mu = clearance[0].min(clearance[1]);
        let derivative = (!touches).then(|| routes.derivative * s / (mu * mu));
        let three_hop = (mu * mu <= s.sqrt()).then(|| routes.projection * s.powf(0.25));
        Ok(FiberBound { separation: s, clearance, segment, derivative, three_hop })
    }
}

/// The chart `U_j = {v_j != 0}` of the blowup, `index = j` counted from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupChart {
    pub ambient_dim: usize,
    pub center_codim: usize,
    pub index: usize,
}

/// A point of a chart: the pivot coordinate `x_j`, homogeneous direction
/// coordinates normalized to `v_j = 1`, and the coordinates along the center.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub pivot: Complex64,
    pub direction: Vec<Complex64>,
    pub tail: Vec<Complex64>,
}

impl BlowupChart {
    pub fn new(ambient_dim: usize, center_codim: usize, index: usize) -> Result<Self> {
        BlowupModel::new(ambient_dim, center_codim, 1.0)?;
        if index >= center_codim {
            return Err(invalid(format!("chart index {index} out of range for q = {center_codim}")));
        }
        Ok(BlowupChart { ambient_dim, center_codim, index })
    }

    /// `(v_1 x_j / v_j, ..., v_q x_j / v_j, tail)`.
    pub fn forward(&self, pivot: Complex64, direction: &[Complex64], tail: &[Complex64]) -> Result<CPoint> {
        ensure_dim(self.center_codim, direction.len())?;
        ensure_dim(self.ambient_dim - self.center_codim, tail.len())?;
        let vj = direction[self.index];
        if vj.norm() == 0.0 {
            return Err(Error::Precondition("direction has v_j = 0, outside this chart".into()));
        }
        let scale = pivot / vj;
        Ok(CPoint::from_iterator(self.ambient_dim, direction.iter().map(|&v| v * scale).chain(tail.iter().copied())))
    }

    pub fn apply(&self, p: &ChartPoint) -> Result<CPoint> {
        self.forward(p.pivot, &p.direction, &p.tail)
    }

    /// Preimage of `a` in this chart.
    pub fn lift(&self, a: &CPoint) -> Result<ChartPoint> {
        ensure_dim(self.ambient_dim, a.len())?;
        let q = self.center_codim;
        if a.rows(0, q).norm() <= EPS_GEO {
            return Err(Error::OnCenter);
        }
        let pivot = a[self.index];
        if pivot.norm() == 0.0 {
            return Err(Error::Precondition("point not covered by this chart".into()));
        }
        Ok(ChartPoint {
            pivot,
            direction: (0..q).map(|i| if i == self.index { Complex64::new(1.0, 0.0) } else { a[i] / pivot }).collect(),
            tail: a.iter().skip(q).copied().collect(),
        })
    }
}

/// Fubini-Study distance between the lines through `u` and `v`, in `[0, pi/2]`.
pub fn fs_distance(u: &[Complex64], v: &[Complex64]) -> f64 {
    let dot: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (dot.norm() / (nu * nv)).min(1.0).acos()
}

/// Constants in the three fiber-distance routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConstants {
    /// `d_f(a, b) <= segment |a - b|` when `a` or `b` lies on the center.
    pub segment: f64,
    /// `d_f(a, b) <= derivative |a - b| / min(dist(a, V), dist(b, V))^2`.
    pub derivative: f64,
    /// Three-hop sum through the projections, `<= projection |a - b|^(1/4)`.
    pub projection: f64,
    /// Each hop is at most `hop |a - b|^(1/4)`.
    pub hop: f64,
}

impl RouteConstants {
    /// Constants proved for the model polydisk.
    ///
    /// The segment route lifts `b + t(a - b)` with a frozen direction, so its
    /// length is exactly `|a - b|`. The derivative route follows the segment
    /// when `|a - b| <= mu/2` and detours through the center otherwise. The
    /// projection route uses `dist(a, V) <= |a - b| + |a - b|^(1/4)`.
    pub fn analytic(model: &BlowupModel) -> Self {
        let mu = model.max_clearance();
        let hop = 1.0 + model.diameter().powf(0.75);
        RouteConstants {
            segment: 1.0,
            derivative: (mu * mu + 4.0 * mu / 3.0).max(6.0 * mu * mu + PI * mu),
            projection: 2.0 * hop,
            hop,
        }
    }
}

/// Per-route upper bounds for one pair.
///
/// `segment` and `derivative` bound the fiber distance itself. `three_hop`
/// bounds `d_f(a, a_V) + d_f(a_V, b_V) + d_f(b_V, b)`, which controls
/// `|u(a) - u(b)|` but not `d_f(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberBound {
    pub separation: f64,
    pub clearance: [f64; 2],
    pub segment: Option<f64>,
    pub derivative: Option<f64>,
    pub three_hop: Option<f64>,
}

impl FiberBound {
    /// Best bound on the fiber distance.
    pub fn direct(&self) -> f64 {
        self.segment.into_iter().chain(self.derivative).fold(f64::INFINITY, f64::min)
    }

    /// Minimum over all three routes.
    pub fn value(&self) -> f64 {
        self.direct().min(self.three_hop.unwrap_or(f64::INFINITY))
    }
}

/// Route bounds with the analytic constants of `model`.
pub fn fiber_distance_upper(model: &BlowupModel, a: &CPoint, b: &CPoint) -> Result<FiberBound> {
    model.fiber_bound(&RouteConstants::analytic(model), a, b)
}

/// Operator norm of the differential of the lift at `a`, by central
/// differences in the chart of `a`, with the product metric on the target.
pub fn lift_jacobian_norm(model: &BlowupModel, a: &CPoint) -> Result<f64> {
    let (chart, p) = model.lift(a)?;
    let q = model.center_codim;
    let slopes = |p: &ChartPoint| -> Vec<Complex64> {
        p.direction.iter().enumerate().filter(|&(i, _)| i != chart.index).map(|(_, &z)| z).collect()
    };
    let w = slopes(&p);
    let dim = 2 * model.ambient_dim;
    let step = 1e-6 * model.center_dist(a);
    let dw: Vec<Vec<Complex64>> = (0..dim)
        .map(|k| {
            let mut e = CPoint::zeros(model.ambient_dim);
            e[k / 2] = if k % 2 == 0 { Complex64::new(step, 0.0) } else { Complex64::new(0.0, step) };
            let plus = slopes(&chart.lift(&(a + &e))?);
            let minus = slopes(&chart.lift(&(a - &e))?);
            Ok(plus.iter().zip(&minus).map(|(x, y)| (x - y) / (2.0 * step)).collect())
        })
        .collect::<Result<_>>()?;
    let w2 = 1.0 + w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let inner = |x: &[Complex64], y: &[Complex64]| -> Complex64 { x.iter().zip(y).map(|(a, b)| a.conj() * b).sum() };
    let fs = |x: &[Complex64], y: &[Complex64]| (inner(x, y) / w2 - inner(x, &w) * inner(&w, y) / (w2 * w2)).re;
    let gram = DMatrix::from_fn(dim, dim, |k, l| f64::from(k == l) + fs(&dw[k], &dw[l]));
    debug_assert!(q >= 2);
    let top = SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(0.0, f64::max);
    Ok(top.sqrt())
}

/// Graph discretization of the real slice of the blowup of `R^2` at the
/// origin (times an optional real line along the center).
///
/// Its points are `rho (cos theta, sin theta)` with `rho` signed and
/// `theta in [0, pi)`; `(rho, theta + pi)` is identified with
/// `(-rho, theta)`, which makes the slice a Mobius band. The product metric
/// restricts to `d rho^2 + (1 + rho^2) d theta^2 + dz^2`. Paths in the slice
/// are paths in the blowup, so graph distances bound true fiber distances
/// from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobiusGrid {
    pub rho_max: f64,
    pub radial: usize,
    pub angular: usize,
    pub tail: Option<TailAxis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailAxis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl MobiusGrid {
    /// `radial` must be odd so that the middle row is the exceptional fiber.
    pub fn new(rho_max: f64, radial: usize, angular: usize) -> Result<Self> {
        if radial < 3 || radial.is_multiple_of(2) || angular < 4 {
            return Err(invalid("need an odd radial count >= 3 and at least 4 angles"));
        }
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            return Err(invalid("rho_max must be positive"));
        }
        Ok(MobiusGrid { rho_max, radial, angular, tail: None })
    }

    pub fn with_tail(mut self, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 || !(hi > lo) {
            return Err(invalid("tail axis needs hi > lo and at least 2 nodes"));
        }
        self.tail = Some(TailAxis { lo, hi, nodes });
        Ok(self)
    }

    fn depth(&self) -> usize {
        self.tail.map_or(1, |t| t.nodes)
    }

    pub fn len(&self) -> usize {
        self.radial * self.angular * self.depth()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center_row(&self) -> usize {
        self.radial / 2
    }

    fn steps(&self) -> (f64, f64, f64) {
        let hz = self.tail.map_or(0.0, |t| (t.hi - t.lo) / (t.nodes - 1) as f64);
        (2.0 * self.rho_max / (self.radial - 1) as f64, PI / self.angular as f64, hz)
    }

    /// Largest edge length of a unit cell.
    pub fn spacing(&self) -> f64 {
        let (hr, ht, hz) = self.steps();
        hr.max(ht * (1.0 + self.rho_max * self.rho_max).sqrt()).max(hz)
    }

    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.angular + j) * self.depth() + l
    }

    fn split(&self, k: usize) -> (usize, usize, usize) {
        let d = self.depth();
        (k / (self.angular * d), (k / d) % self.angular, k % d)
    }

    /// `(rho, theta, z)` of node `k`.
    pub fn coords(&self, k: usize) -> (f64, f64, f64) {
        let (i, j, l) = self.split(k);
        let (hr, ht, hz) = self.steps();
        let z = self.tail.map_or(0.0, |t| t.lo + l as f64 * hz);
        (-self.rho_max + i as f64 * hr, j as f64 * ht, z)
    }

    /// Image of node `k` in the real base.
    pub fn base_point(&self, k: usize) -> Vec<f64> {
        let (r, t, z) = self.coords(k);
        let mut p = vec![r * t.cos(), r * t.sin()];
        if self.tail.is_some() {
            p.push(z);
        }
        p
    }

    pub fn on_center(&self, k: usize) -> bool {
        self.split(k).0 == self.center_row()
    }

    /// Nodes of the exceptional fiber at tail index `l`.
    pub fn fiber(&self, l: usize) -> Vec<usize> {
        (0..self.angular).map(|j| self.index(self.center_row(), j, l)).collect()
    }

    /// Nodes over the real base point `p`, or `None` if `p` is not a node image.
    pub fn preimages(&self, p: &[f64]) -> Option<Vec<usize>> {
        let (hr, ht, hz) = self.steps();
        let l = match (self.tail, p.len()) {
            (None, 2) => 0,
            (Some(t), 3) => snap((p[2] - t.lo) / hz, t.nodes)?,
            _ => return None,
        };
        let r = p[0].hypot(p[1]);
        if r <= 1e-9 * hr {
            return Some(self.fiber(l));
        }
        let mut theta = p[1].atan2(p[0]);
        let mut rho = r;
        if theta < 0.0 {
            theta += PI;
            rho = -rho;
        }
        let mut j = snap(theta / ht, self.angular + 1)?;
        if j == self.angular {
            j = 0;
            rho = -rho;
        }
        let i = snap((rho + self.rho_max) / hr, self.radial)?;
        Some(vec![self.index(i, j, l)])
    }

    fn offsets(&self) -> Vec<(i64, i64, i64)> {
        if self.tail.is_none() {
            return STENCIL16.iter().map(|&(a, b)| (a, b, 0)).collect();
        }
        let r = -2..=2i64;
        let mut out = Vec::new();
        for a in r.clone() {
            for b in r.clone() {
                for c in r.clone() {
                    let g = gcd(gcd(a.unsigned_abs(), b.unsigned_abs()), c.unsigned_abs());
                    if g == 1 {
                        out.push((a, b, c));
                    }
                }
            }
        }
        out
    }

    /// Graph distances from `sources` to every node.
    pub fn distances(&self, sources: &[usize]) -> Vec<f64> {
        let offsets = self.offsets();
        let (hr, ht, hz) = self.steps();
        let (nr, nt, nd) = (self.radial as i64, self.angular as i64, self.depth() as i64);
        dijkstra(self.len(), sources.iter().map(|&s| (s, 0.0)), |v, out| {
            let (i, j, l) = self.split(v);
            let (rho, _, _) = self.coords(v);
            for &(di, dj, dl) in &offsets {
                let (mut a, mut b, c) = (i as i64 + di, j as i64 + dj, l as i64 + dl);
                if a < 0 || a >= nr || c < 0 || c >= nd {
                    continue;
                }
                if b < 0 || b >= nt {
                    b = b.rem_euclid(nt);
                    a = nr - 1 - a;
                }
                let (dr, dt, dz) = (di as f64 * hr, dj as f64 * ht, dl as f64 * hz);
                let speed = |t: f64| {
                    let r = rho + t * dr;
                    (dr * dr + (1.0 + r * r) * dt * dt + dz * dz).sqrt()
                };
                let len = (speed(0.0) + 4.0 * speed(0.5) + speed(1.0)) / 6.0;
                out.push((self.index(a as usize, b as usize, c as usize), len));
            }
        })
    }

    /// Graph fiber distance between two real base points on the grid.
    pub fn fiber_distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let off = || Error::Precondition("point is not a grid node image".into());
        let from = self.preimages(a).ok_or_else(off)?;
        let to = self.preimages(b).ok_or_else(off)?;
        let d = self.distances(&from);
        Ok(to.iter().map(|&k| d[k]).fold(f64::INFINITY, f64::min))
    }
}

fn snap(x: f64, n: usize) -> Option<usize> {
    let k = x.round();
    ((x - k).abs() <= 1e-6 && k >= 0.0 && (k as usize) < n).then_some(k as usize)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Calibration of the route constants against the graph oracle.
///
/// Ratios are `oracle / ((1 + ORACLE_SLACK) bound + 2 spacing)`, so values
/// at most 1 mean the analytic constant held on every sampled pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub model: BlowupModel,
    pub routes: RouteConstants,
    pub jacobian: f64,
    pub grid: MobiusGrid,
    pub pairs: usize,
    pub segment_ratio: f64,
    pub derivative_ratio: f64,
    pub three_hop_ratio: f64,
    /// Largest `|D lift| dist^2 / K_JAC` over sampled rays.
    pub jacobian_ratio: f64,
    /// Derivative and three-hop bounds compared against the oracle, and how
    /// many fell below it before the discretization allowance. The segment
    /// route is sharp, so it is only judged with the allowance.
    pub checks: usize,
    pub misses: usize,
}

impl Calibration {
    pub fn passed(&self) -> bool {
        [self.segment_ratio, self.derivative_ratio, self.three_hop_ratio, self.jacobian_ratio].iter().all(|&r| r <= 1.0)
    }

    /// Fraction of checks where the bound is at least the raw oracle.
    pub fn hit_rate(&self) -> f64 {
        if self.checks == 0 {
            1.0
        } else {
            1.0 - self.misses as f64 / self.checks as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationOptions {
    pub sources: usize,
    pub jacobian_samples: usize,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { sources: 16, jacobian_samples: 2000, seed: 7 }
    }
}

/// Default oracle grid for `model`: 65 x 64 for `n = 2`, and a coarser
/// 33 x 32 x 9 grid for `n = 3`.
pub fn oracle_grid(model: &BlowupModel) -> Result<MobiusGrid> {
    let rho = 0.9 * model.radius;
    match (model.ambient_dim, model.center_codim) {
        (2, 2) => MobiusGrid::new(rho, 65, 64),
        (3, 2) => MobiusGrid::new(rho, 33, 32)?.with_tail(-rho, rho, 9),
        (n, q) => Err(Error::Precondition(format!("graph oracle only covers q = 2, n <= 3 (got n = {n}, q = {q})"))),
    }
}

#[cfg(test)]
fn to_cpoint(p: &[f64]) -> CPoint {
    CPoint::from_iterator(p.len(), p.iter().map(|&x| Complex64::new(x, 0.0)))
}

fn slack_ratio(oracle: f64, bound: f64, spacing: f64) -> f64 {
    oracle / ((1.0 + ORACLE_SLACK) * bound + 2.0 * spacing)
}

/// Check the analytic constants against the oracle and the Jacobian bound
/// against finite differences.
pub fn calibrate(model: &BlowupModel, opts: &CalibrationOptions) -> Result<Calibration> {
    let grid = oracle_grid(model)?;
    let routes = RouteConstants::analytic(model);
    let h = grid.spacing();
    let depth = grid.depth();
    let base: Vec<Vec<f64>> = (0..grid.len()).map(|k| grid.base_point(k)).collect();
    let tail_of = |k: usize| k % depth;
    let from_center: Vec<Vec<f64>> = (0..depth).into_par_iter().map(|l| grid.distances(&grid.fiber(l))).collect();
    let fiber_min = |d: &[f64], l: usize| grid.fiber(l).iter().map(|&k| d[k]).fold(f64::INFINITY, f64::min);

    let mut pairs = 0;
    let mut segment_ratio: f64 = 0.0;
    for (l, d) in from_center.iter().enumerate() {
        let v = base[grid.fiber(l)[0]].clone();
        for k in (0..grid.len()).filter(|&k| !grid.on_center(k) || tail_of(k) != l) {
            let s = dist(&v, &base[k]);
            let oracle = if grid.on_center(k) { fiber_min(d, tail_of(k)) } else { d[k] };
            segment_ratio = segment_ratio.max(slack_ratio(oracle, routes.segment * s, h));
            pairs += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let off: Vec<usize> = (0..grid.len()).filter(|&k| !grid.on_center(k)).collect();
    let sources: Vec<usize> = (0..opts.sources).map(|_| off[rng.gen_range(0..off.len())]).collect();
    let per_source: Vec<(usize, f64, f64, usize, usize)> = sources
        .par_iter()
        .map(|&a| {
            let d = grid.distances(&[a]);
            let pa = &base[a];
            let (mut n, mut der, mut hop): (usize, f64, f64) = (0, 0.0, 0.0);
            let (mut checked, mut missed) = (0usize, 0usize);
            for &b in off.iter().filter(|&&b| b != a) {
                let pb = &base[b];
                let s = dist(pa, pb);
                let (ca, cb) = (pa[0].hypot(pa[1]), pb[0].hypot(pb[1]));
                let mu = ca.min(cb);
                let bound = routes.derivative * s / (mu * mu);
                der = der.max(slack_ratio(d[b], bound, h));
                checked += 1;
                missed += usize::from(d[b] > bound);
                if mu * mu <= s.sqrt() {
                    let (la, lb) = (tail_of(a), tail_of(b));
                    let hops = from_center[la][a] + fiber_min(&from_center[la], lb) + from_center[lb][b];
                    let bound = routes.projection * s.powf(0.25);
                    hop = hop.max(slack_ratio(hops, bound, h));
                    checked += 1;
                    missed += usize::from(hops > bound);
                }
                n += 1;
            }
            (n, der, hop, checked, missed)
        })
        .collect();
    let derivative_ratio = per_source.iter().map(|r| r.1).fold(0.0, f64::max);
    let three_hop_ratio = per_source.iter().map(|r| r.2).fold(0.0, f64::max);
    pairs += per_source.iter().map(|r| r.0).sum::<usize>();
    let checks = per_source.iter().map(|r| r.3).sum::<usize>();
    let misses = per_source.iter().map(|r| r.4).sum::<usize>();

    let jacobian_ratio = jacobian_sweep(model, opts.jacobian_samples, opts.seed ^ 0x5eed)?;
    Ok(Calibration {
        model: *model,
        routes,
        jacobian: K_JAC,
        grid,
        pairs,
        segment_ratio,
        derivative_ratio,
        three_hop_ratio,
        jacobian_ratio,
        checks,
        misses,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random point of `C^k` with independent Gaussian coordinates.
fn gaussian(rng: &mut impl Rng, k: usize) -> CPoint {
    CPoint::from_fn(k, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Largest `|D lift| dist^2 / K_JAC` along random rays toward the center,
/// with `dist` log-uniform in `[1e-4, min(1, R)]`.
pub fn jacobian_sweep(model: &BlowupModel, samples: usize, seed: u64) -> Result<f64> {
    let (n, q) = (model.ambient_dim, model.center_codim);
    let top = model.radius.min(1.0);
    let points: Vec<(CPoint, f64)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let dir = gaussian(&mut rng, q).normalize();
                let mu = top * 10f64.powf(-4.0 * rng.gen::<f64>());
                let tail = gaussian(&mut rng, n - q).map(|z| z * (0.1 * model.radius));
                let mut a = CPoint::zeros(n);
                a.rows_mut(0, q).copy_from(&(dir * Complex64::new(mu, 0.0)));
                a.rows_mut(q, n - q).copy_from(&tail);
                (a, mu)
            })
            .collect()
    };
    let ratios = points
        .par_iter()
        .map(|(a, mu)| Ok(lift_jacobian_norm(model, a)? * mu * mu / K_JAC))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Largest `|forward(lift(a)) - a|` and `|lift(forward(p)) - p|` over
/// `samples` Gaussian points of the polydisk, scaled to a third of the radius.
pub fn round_trip_sweep(model: &BlowupModel, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = Complex64::new(model.radius / 3.0, 0.0);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a = gaussian(&mut rng, model.ambient_dim) * scale;
        if model.on_center(&a) {
            continue;
        }
        let (chart, p) = model.lift(&a)?;
        let back = chart.apply(&p)?;
        worst = worst.max((&back - &a).norm());
        let again = chart.lift(&back)?;
        worst = worst.max((again.pivot - p.pivot).norm());
        for (x, y) in again.direction.iter().zip(&p.direction) {
            worst = worst.max((x - y).norm() / (1.0 + y.norm()));
        }
    }
    Ok(worst)
}

/// Which case of the transfer argument a pair falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferRoute {
    Segment,
    Derivative,
    Projection,
}

/// One case: `d <= K s^beta` (or hops `<= K s^beta`) turns `|log d|` into
/// at least `(beta/2) |log s|` once `s <= K^(-2/beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteFactor {
    pub route: TransferRoute,
    pub power: f64,
    pub constant: f64,
    pub threshold: f64,
    /// Multiplier on the pullback constant.
    pub factor: f64,
}

/// Base constant derived from a pullback constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCertificate {
    pub exponent: f64,
    pub c_pullback: f64,
    pub routes: Vec<RouteFactor>,
    /// Pairs closer than this are handled by the routes.
    pub near_threshold: f64,
    pub c_near: f64,
    pub oscillation: f64,
    pub diameter: f64,
    pub c_far: f64,
    pub constant: f64,
}

/// If `|U(p) - U(p')| <= c_pullback |log d(p, p')|^(-M)` for `d < 1` on
/// the blowup, then `|u(a) - u(b)| <= constant |log |a - b||^(-M)` on a base
/// of diameter `diameter` where `u` has the given oscillation.
pub fn transfer_constant(
    routes: &RouteConstants,
    diameter: f64,
    exponent: f64,
    c_pullback: f64,
    oscillation: f64,
) -> Result<TransferCertificate> {
    if !(exponent > 0.0) || !(c_pullback >= 0.0) || !(oscillation >= 0.0) || !(diameter > 0.0) {
        return Err(invalid("need M > 0, diameter > 0 and nonnegative constants"));
    }
    let route = |route, power: f64, constant: f64, count: f64| {
        let threshold = constant.powf(-2.0 / power).min(1.0);
        RouteFactor { route, power, constant, threshold, factor: count * (2.0 / power).powf(exponent) }
    };
    let factors = vec![
        route(TransferRoute::Segment, 1.0, routes.segment, 1.0),
        route(TransferRoute::Derivative, 0.5, routes.derivative, 1.0),
        route(TransferRoute::Projection, 0.25, routes.hop, 3.0),
    ];
    let near_threshold = factors.iter().map(|r| r.threshold).fold(1.0, f64::min);
    let c_near = c_pullback * factors.iter().map(|r| r.factor).fold(0.0, f64::max);
    let far_log = near_threshold.ln().abs().max(diameter.ln().max(0.0));
    let c_far = oscillation * far_log.powf(exponent);
    Ok(TransferCertificate {
        exponent,
        c_pullback,
        routes: factors,
        near_threshold,
        c_near,
        oscillation,
        diameter,
        c_far,
        constant: c_near.max(c_far),
    })
}

/// One blowup in a tower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub routes: RouteConstants,
    pub diameter: f64,
}

impl Stage {
    pub fn of(model: &BlowupModel) -> Self {
        Stage { routes: RouteConstants::analytic(model), diameter: model.diameter() }
    }
}

/// Transfer through successive blowups, listed from the top of the tower
/// down to the base. The last certificate carries the base constant.
pub fn compose_transfer(
    stages: &[Stage],
    exponent: f64,
    c_pullback: f64,
    oscillation: f64,
) -> Result<Vec<TransferCertificate>> {
    let mut c = c_pullback;
    let mut out = Vec::with_capacity(stages.len());
    for st in stages {
        let cert = transfer_constant(&st.routes, st.diameter, exponent, c, oscillation)?;
        c = cert.constant;
        out.push(cert);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferOptions {
    /// Pullback constant; measured on the oracle grid when absent.
    pub c_pullback: Option<f64>,
    /// Random base pairs on top of all grid-neighbour pairs.
    pub pairs: usize,
    /// Dijkstra sources used to measure the pullback constant.
    pub sources: usize,
    pub seed: u64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions { c_pullback: None, pairs: 20_000, sources: 32, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub certificate: TransferCertificate,
    pub pullback_measured: bool,
    pub verification: VerificationReport,
}

/// Measured `max |U(p) - U(p')| |log d|^M` over oracle pairs with `d < 1`,
/// where `U` is `u` pulled back to the real slice of the blowup.
pub fn measure_pullback(u: &GridField, exponent: f64, sources: usize, seed: u64) -> Result<f64> {
    let (x0, y0) = u.origin();
    let (x1, y1) = u.corner();
    let rho = [x0.hypot(y0), x0.hypot(y1), x1.hypot(y0), x1.hypot(y1)].into_iter().fold(0.0, f64::max);
    let grid = MobiusGrid::new(rho, 65, 64)?;
    let values: Vec<Option<f64>> = (0..grid.len())
        .map(|k| {
            let p = grid.base_point(k);
            u.sample(p[0], p[1])
        })
        .collect();
    let defined: Vec<usize> = (0..grid.len()).filter(|&k| values[k].is_some()).collect();
    if defined.is_empty() {
        return Err(Error::Precondition("field does not cover any oracle node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..sources).map(|_| defined[rng.gen_range(0..defined.len())]).collect();
    let worst = picks
        .par_iter()
        .map(|&a| {
            let d = grid.distances(&[a]);
            let ua = values[a].expect("defined");
            defined
                .iter()
                .filter(|&&b| d[b] > 0.0 && d[b] < 1.0)
                .map(|&b| (ua - values[b].expect("defined")).abs() * d[b].ln().abs().powf(exponent))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Base constant for `u` on the real slice of the blown-up `C^2`, checked
/// on grid pairs.
pub fn transfer_logmod(
    u: &GridField,
    model: &BlowupModel,
    exponent: f64,
    opts: &TransferOptions,
) -> Result<TransferReport> {
    if (model.ambient_dim, model.center_codim) != (2, 2) {
        return Err(Error::Precondition("grid fields live on the real slice of C^2 blown up at a point".into()));
    }
    let (x0, y0) = u.origin();
    let (x1, y1) = u.corner();
    if [x0, y0, x1, y1].iter().any(|c| c.abs() > model.radius) {
        return Err(Error::Precondition("grid box leaves the model polydisk".into()));
    }
    let h = u.spacing();
    let nearest = (0..u.len()).map(|k| u.coords(k)).map(|(x, y)| x.hypot(y)).fold(f64::INFINITY, f64::min);
    if nearest < 0.5 * h {
        return Err(Error::GridTouchesCenter { distance: nearest, required: 0.5 * h });
    }
    let (c_pullback, measured) = match opts.c_pullback {
        Some(c) => (c, false),
        None => (measure_pullback(u, exponent, opts.sources, opts.seed)?, true),
    };
    let certificate =
        transfer_constant(&RouteConstants::analytic(model), model.diameter(), exponent, c_pullback, u.oscillation())?;
    let verification = verify_grid_pairs(u, certificate.constant, exponent, opts.pairs, opts.seed);
    Ok(TransferReport { certificate, pullback_measured: measured, verification })
}

/// `|u(a) - u(b)| |log |a - b||^M <= constant` on all axis-neighbour pairs
/// and on `random` pairs with log-uniform offsets.
pub fn verify_grid_pairs(u: &GridField, constant: f64, exponent: f64, random: usize, seed: u64) -> VerificationReport {
    let (nx, ny) = (u.nx(), u.ny());
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let k = u.index(i, j);
            if i + 1 < nx {
                pairs.push((k, u.index(i + 1, j)));
            }
            if j + 1 < ny {
                pairs.push((k, u.index(i, j + 1)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = nx.max(ny) as f64;
    for _ in 0..random {
        let (i, j) = (rng.gen_range(0..nx), rng.gen_range(0..ny));
        let len = span.powf(rng.gen::<f64>());
        let ang = rng.gen_range(0.0..2.0 * PI);
        let a = i as f64 + len * ang.cos();
        let b = j as f64 + len * ang.sin();
        if a < 0.0 || b < 0.0 || a.round() >= nx as f64 || b.round() >= ny as f64 {
            continue;
        }
        let (a, b) = (a.round() as usize, b.round() as usize);
        if (a, b) != (i, j) {
            pairs.push((u.index(i, j), u.index(a, b)));
        }
    }
    pairs.retain(|&(a, b)| u.is_active(a) && u.is_active(b));

    let ratio = |&(a, b): &(usize, usize)| {
        let (pa, pb) = (u.coords(a), u.coords(b));
        let s = (pa.0 - pb.0).hypot(pa.1 - pb.1);
        let du = (u.values()[a] - u.values()[b]).abs();
        if du == 0.0 {
            0.0
        } else {
            du * s.ln().abs().powf(exponent) / constant
        }
    };
    let scored: Vec<f64> = pairs.par_iter().map(ratio).collect();
    let violation_count = scored.iter().filter(|&&r| r > 1.0 + VERIFY_TOL).count();
    let worst = scored.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1));
    let worst_ratio = worst.map_or(0.0, |w| *w.1);
    let worst_pair = worst.map(|(k, _)| {
        let (a, b) = pairs[k];
        let (pa, pb) = (u.coords(a), u.coords(b));
        (vec![pa.0, pa.1], vec![pb.0, pb.1])
    });
    VerificationReport { pairs: pairs.len(), violation_count, worst_ratio, worst_pair, passed: violation_count == 0 }
}

/// Composite chart map of two point blowups of `C^2`:
/// `(sigma, omega) -> (sigma, sigma^2 omega)`.
pub fn two_step_chart(sigma: f64, omega: f64) -> (f64, f64) {
    (sigma, sigma * sigma * omega)
}

/// Sample pairs `(a, b)` in the polydisk with `dist(b, V) <= |a - b|^(1/4)`.
pub fn projection_pairs(model: &BlowupModel, n: usize, seed: u64) -> Vec<(CPoint, CPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dim, q) = (model.ambient_dim, model.center_codim);
    let clamp =
        |p: CPoint| p.map(|z: Complex64| if z.norm() > model.radius { z * (model.radius / z.norm()) } else { z });
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = clamp(gaussian(&mut rng, dim) * Complex64::new(0.3 * model.radius, 0.0));
        let s = 10f64.powf(-8.0 * rng.gen::<f64>());
        let b = clamp(&a + gaussian(&mut rng, dim).normalize() * Complex64::new(s, 0.0));
        let mut b = b;
        let pull = s.powf(0.25) * rng.gen::<f64>();
        let nb = model.center_dist(&b);
        if nb > pull {
            let f = Complex64::new(pull / nb, 0.0);
            for i in 0..q {
                b[i] *= f;
            }
        }
        let sep = (&a - &b).norm();
        if sep > 0.0 && model.center_dist(&a).min(model.center_dist(&b)).powi(2) <= sep.sqrt() {
            out.push((a, b));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn real(p: &[f64]) -> CPoint {
        to_cpoint(p)
    }

    fn model2() -> BlowupModel {
        BlowupModel::new(2, 2, 1.0).unwrap()
    }

    #[test]
    fn forward_examples() {
        let chart = BlowupChart::new(2, 2, 0).unwrap();
        let p = chart.forward(c(0.5), &[c(1.0), c(2.0)], &[]).unwrap();
        assert_eq!(p, real(&[0.5, 1.0]));
        let on_v = chart.forward(c(0.0), &[c(1.0), c(-3.0)], &[]).unwrap();
        assert!(model2().on_center(&on_v));
        assert!(chart.forward(c(0.5), &[c(0.0), c(1.0)], &[]).is_err());
        assert!(BlowupChart::new(2, 2, 2).is_err());
        assert!(BlowupModel::new(3, 1, 1.0).is_err());
    }

    #[test]
    fn lift_round_trip() {
        let model = BlowupModel::new(4, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let a = gaussian(&mut rng, 4) * c(0.3);
            let (chart, p) = model.lift(&a).unwrap();
            worst = worst.max((chart.apply(&p).unwrap() - &a).norm());
            // lift after forward, away from the exceptional divisor
            let again = chart.lift(&chart.apply(&p).unwrap()).unwrap();
            assert!((again.pivot - p.pivot).norm() < 1e-12);
            for (x, y) in again.direction.iter().zip(&p.direction) {
                assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn round_trip_sweep_is_exact() {
        for (n, q) in [(2, 2), (3, 2), (5, 3)] {
            let model = BlowupModel::new(n, q, 2.0).unwrap();
            assert!(round_trip_sweep(&model, 2000, 5).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lift_chart_selection_and_errors() {
        let model = BlowupModel::new(3, 2, 1.0).unwrap();
        let (chart, _) = model.lift(&real(&[0.0, 0.4, 0.1])).unwrap();
        assert_eq!(chart.index, 1);
        let (chart, _) = model.lift(&real(&[0.5, -0.4, 0.9])).unwrap();
        assert_eq!(chart.index, 0);
        assert!(matches!(model.lift(&real(&[0.0, 0.0, 0.3])), Err(Error::OnCenter)));
        assert!(model.chart(0).unwrap().lift(&real(&[0.0, 0.4, 0.0])).is_err());
    }

    #[test]
    fn fs_distance_scale() {
        assert!((fs_distance(&[c(1.0), c(0.0)], &[c(0.0), c(2.0)]) - PI / 2.0).abs() < 1e-15);
        assert!(fs_distance(&[c(1.0), c(1.0)], &[Complex64::new(0.0, 3.0), Complex64::new(0.0, 3.0)]) < 1e-7);
        let t: f64 = 0.3;
        assert!((fs_distance(&[c(1.0), c(0.0)], &[c(t.cos()), c(t.sin())]) - t).abs() < 1e-12);
    }

    #[test]
    fn route_constants_for_the_unit_bidisk() {
        let r = RouteConstants::analytic(&model2());
        assert_eq!(r.segment, 1.0);
        assert!((r.derivative - (12.0 + PI * SQRT_2)).abs() < 1e-12);
        assert!((r.hop - (1.0 + 8f64.powf(0.375))).abs() < 1e-12);
        assert_eq!(r.projection, 2.0 * r.hop);
    }

    #[test]
    fn fiber_bound_cases() {
        let m = model2();
        let a = real(&[0.2, 0.1]);
        assert_eq!(fiber_distance_upper(&m, &a, &a).unwrap().value(), 0.0);
        let origin = real(&[0.0, 0.0]);
        let fb = fiber_distance_upper(&m, &a, &origin).unwrap();
        assert_eq!(fb.segment, Some(a.norm()));
        assert_eq!(fb.derivative, None);
        let eps = 1e-3;
        let fb = fiber_distance_upper(&m, &real(&[eps, 0.0]), &real(&[0.0, eps])).unwrap();
        let k3 = RouteConstants::analytic(&m).projection;
        assert!((fb.three_hop.unwrap() - k3 * (SQRT_2 * eps).powf(0.25)).abs() < 1e-12);
        assert!(fb.direct() > 1e4);
        assert!(m.fiber_bound(&RouteConstants::analytic(&m), &real(&[1.5, 0.0]), &a).is_err());
    }

    #[test]
    fn oracle_on_the_mobius_band() {
        let eps = 1e-3;
        let grid = MobiusGrid::new(4.0 * eps, 65, 64).unwrap();
        let (a, b) = ([eps, 0.0], [0.0, eps]);
        assert_eq!(grid.preimages(&a).unwrap().len(), 1);
        assert_eq!(grid.preimages(&[0.0, 0.0]).unwrap().len(), 64);
        assert!(grid.preimages(&[0.3 * eps, 0.0]).is_none());
        // each hop through the origin is a straight ray
        let hop = grid.fiber_distance(&a, &[0.0, 0.0]).unwrap();
        assert!((hop - eps).abs() < 1e-12);
        let hops = hop + grid.fiber_distance(&[0.0, 0.0], &b).unwrap();
        let k3 = RouteConstants::analytic(&model2()).projection;
        assert!(hops <= k3 * (SQRT_2 * eps).powf(0.25));
        // the lifts themselves are a quarter turn apart
        let direct = grid.fiber_distance(&a, &b).unwrap();
        assert!(direct > 0.9 * PI / 2.0 && direct < 1.05 * (PI / 2.0 + 2.0 * eps), "{direct}");
        let fb = fiber_distance_upper(&model2(), &real(&a), &real(&b)).unwrap();
        assert!(direct <= fb.direct());
        assert!(direct > fb.three_hop.unwrap());
    }

    #[test]
    fn oracle_along_the_center() {
        let grid = MobiusGrid::new(0.5, 17, 16).unwrap().with_tail(-0.5, 0.5, 9).unwrap();
        let d = grid.fiber_distance(&[0.0, 0.0, -0.5], &[0.0, 0.0, 0.25]).unwrap();
        assert!((d - 0.75).abs() < 1e-12);
        let m = BlowupModel::new(3, 2, 1.0).unwrap();
        let fb = fiber_distance_upper(&m, &real(&[0.0, 0.0, -0.5]), &real(&[0.0, 0.0, 0.25])).unwrap();
        assert!(d <= fb.segment.unwrap() + 1e-12);
    }

    #[test]
    fn wrap_identifies_opposite_rays() {
        let grid = MobiusGrid::new(1.0, 9, 8).unwrap();
        // (rho, theta) just below pi is one step from (-rho, 0)
        let near_pi = grid.index(6, 7, 0);
        let d = grid.distances(&[near_pi]);
        let across = grid.index(2, 0, 0);
        let step = PI / 8.0 * (1.0 + 0.25f64).sqrt();
        assert!((d[across] - step).abs() < 1e-9, "{} vs {step}", d[across]);
        let p = grid.base_point(across);
        let q = grid.base_point(grid.preimages(&p).unwrap()[0]);
        assert!(dist(&p, &q) < 1e-12);
    }

    #[test]
    fn jacobian_bound_holds_on_rays() {
        for (n, q) in [(2, 2), (3, 2), (3, 3)] {
            let m = BlowupModel::new(n, q, 1.0).unwrap();
            let r = jacobian_sweep(&m, 300, 5).unwrap();
            assert!(r <= 1.0 && r > 0.5, "n = {n}, q = {q}: {r}");
        }
        // |D lift| behaves like sqrt(1 + 1/mu^2)
        let m = model2();
        let j = lift_jacobian_norm(&m, &real(&[1e-3, 0.0])).unwrap();
        assert!((j - (1.0 + 1e6f64).sqrt()).abs() < 1e-3 * j);
    }

    #[test]
    fn projection_inequalities() {
        let m = BlowupModel::new(3, 2, 1.0).unwrap();
        let routes = RouteConstants::analytic(&m);
        for (a, b) in projection_pairs(&m, 5000, 9) {
            let s = (&a - &b).norm();
            assert!((m.project(&a) - m.project(&b)).norm() <= s * (1.0 + 1e-12));
            for p in [&a, &b] {
                assert!(m.center_dist(p) <= routes.hop * s.powf(0.25));
            }
        }
    }

    #[test]
    fn calibration_passes_for_small_models() {
        for n in [2, 3] {
            let m = BlowupModel::new(n, 2, 1.0).unwrap();
            let opts = CalibrationOptions { sources: 4, jacobian_samples: 100, seed: 1 };
            let cal = calibrate(&m, &opts).unwrap();
            assert!(cal.passed(), "{cal:?}");
            assert!(cal.checks > cal.pairs / 2 && cal.misses <= cal.checks);
            assert!(cal.segment_ratio > 0.5, "segment route is sharp: {}", cal.segment_ratio);
            let json = serde_json::to_string(&cal).unwrap();
            let back: Calibration = serde_json::from_str(&json).unwrap();
            assert_eq!(back, cal);
        }
        assert!(oracle_grid(&BlowupModel::new(4, 2, 1.0).unwrap()).is_err());
    }

    #[test]
    fn transfer_constant_structure() {
        let routes = RouteConstants::analytic(&model2());
        let t = transfer_constant(&routes, 2.0 * SQRT_2, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(t.c_near, 3.0 * 64.0);
        assert_eq!(t.constant, t.c_near);
        let f: Vec<f64> = t.routes.iter().map(|r| r.factor).collect();
        assert_eq!(f, vec![4.0, 16.0, 192.0]);
        assert_eq!(t.near_threshold, routes.derivative.powi(-4).min(routes.hop.powi(-8)));
        let zero = transfer_constant(&routes, 1.0, 2.0, 0.0, 0.0).unwrap();
        assert_eq!(zero.constant, 0.0);
        assert!(transfer_constant(&routes, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    fn log_profile_field(n: usize) -> GridField {
        GridField::from_fn(n, -0.5, 0.5, |x, y| x.hypot(y).ln().abs().powi(-2).min(1.0)).unwrap()
    }

    #[test]
    fn transfer_constant_field() {
        let u = GridField::from_fn(16, -0.5, 0.5, |_, _| 2.0).unwrap();
        let rep = transfer_logmod(&u, &model2(), 2.0, &TransferOptions { pairs: 500, ..Default::default() }).unwrap();
        // bilinear sampling leaves only rounding noise in the pullback
        assert!(rep.certificate.constant < 1e-9);
        assert!(rep.verification.passed);
        assert_eq!(rep.verification.violation_count, 0);
    }

    #[test]
    fn transfer_log_profile_passes() {
        let u = log_profile_field(64);
        let opts = TransferOptions { pairs: 5000, sources: 8, ..Default::default() };
        let rep = transfer_logmod(&u, &model2(), 2.0, &opts).unwrap();
        assert!(rep.pullback_measured);
        assert!(rep.certificate.c_pullback > 0.0);
        assert!(rep.verification.passed, "{:?}", rep.verification);
    }

    #[test]
    fn transfer_catches_a_planted_jump() {
        let smooth = measure_pullback(&log_profile_field(64), 2.0, 8, 1).unwrap();
        let h = 1e-13;
        let (x0, y0) = (0.3, 0.2);
        let u = GridField::from_fn_box(64, 64, x0, y0, h, |x, y| {
            let base = x.hypot(y).ln().abs().powi(-2).min(1.0);
            base + if x > x0 + 31.5 * h { 10.0 } else { 0.0 }
        })
        .unwrap();
        let opts = TransferOptions { c_pullback: Some(smooth), pairs: 2000, ..Default::default() };
        let rep = transfer_logmod(&u, &model2(), 2.0, &opts).unwrap();
        assert!(!rep.pullback_measured);
        assert!(!rep.verification.passed);
        assert!(rep.verification.worst_ratio > 1.5, "{:?}", rep.verification);
    }

    #[test]
    fn transfer_rejects_grids_touching_the_center() {
        let u = GridField::from_fn(65, -0.5, 0.5, |x, y| x + y).unwrap();
        assert!(matches!(
            transfer_logmod(&u, &model2(), 2.0, &TransferOptions::default()),
            Err(Error::GridTouchesCenter { .. })
        ));
        let wide = GridField::from_fn(16, -2.0, 2.0, |x, y| x + y).unwrap();
        assert!(transfer_logmod(&wide, &model2(), 2.0, &TransferOptions::default()).is_err());
        let m3 = BlowupModel::new(3, 2, 1.0).unwrap();
        assert!(transfer_logmod(&log_profile_field(16), &m3, 2.0, &TransferOptions::default()).is_err());
    }

    #[test]
    fn two_step_composition() {
        let m = 2.0;
        let f = |x: f64, y: f64| x.hypot(y).ln().abs().powi(-2).min(1.0);
        // pullback through both blowups, measured in chart coordinates
        let top = GridField::from_fn(64, -0.5, 0.5, |s, w| {
            let (x, y) = two_step_chart(s, w);
            f(x, y)
        })
        .unwrap();
        let mut c_top: f64 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20_000 {
            let (a, b) = (rng.gen_range(0..top.len()), rng.gen_range(0..top.len()));
            let (pa, pb) = (top.coords(a), top.coords(b));
            let d = (pa.0 - pb.0).hypot(pa.1 - pb.1);
            if d > 0.0 && d < 1.0 {
                c_top = c_top.max((top.values()[a] - top.values()[b]).abs() * d.ln().abs().powf(m));
            }
        }
        let base = log_profile_field(64);
        let stage = Stage::of(&model2());
        let certs = compose_transfer(&[stage, stage], m, c_top, base.oscillation()).unwrap();
        assert_eq!(certs.len(), 2);
        assert_eq!(certs[1].c_pullback, certs[0].constant);
        let single =
            transfer_constant(&stage.routes, stage.diameter, m, certs[0].constant, base.oscillation()).unwrap();
        assert_eq!(single.constant, certs[1].constant);
        let rep = verify_grid_pairs(&base, certs[1].constant, m, 5000, 2);
        assert!(rep.passed, "{rep:?}");
    }
}
