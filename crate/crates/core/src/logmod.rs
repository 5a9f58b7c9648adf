//! Local-to-global propagation of log-type moduli for B-pseudometrics, and
//! an empirical verifier.
//!
//! A B-pseudometric `d` satisfies `d(x_1, x_m) <= B * sum d(x_j, x_{j+1})`.
//! The local hypothesis bounds `d(x, y)` by `C0 / |log |x - y||^alpha` only
//! for pairs that are small compared to their clearance; propagation returns
//! a constant valid for every pair of the domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::geometry::{chambers, AffineSubspace, Arrangement, Ball, ConvexDomain, Point, EPS_GEO};

/// Smallest admissible `alpha - 1` for the unit-shrink variant.
pub const UNIT_ALPHA_GUARD: f64 = 1e-6;

/// Slack allowed on the ratio before a pair counts as a violation.
pub const VERIFY_TOL: f64 = 1e-6;

/// Which pairs a modulus covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Validity {
    AllPairs,
    /// Pairs with `|x - y|^d <= min(clearance(x), clearance(y))`.
    Clearance {
        d: f64,
    },
}

/// `d(x, y) <= constant / |log |x - y||^exponent` on the pairs of `validity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogModulus {
    pub constant: f64,
    pub exponent: f64,
    pub validity: Validity,
}

impl LogModulus {
    pub fn new(constant: f64, exponent: f64, validity: Validity) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(invalid("modulus constant must be positive and finite"));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(invalid("modulus exponent must be positive"));
        }
        Ok(LogModulus { constant, exponent, validity })
    }

    /// The bound at separation `t`.
    pub fn bound(&self, t: f64) -> f64 {
        self.constant / t.ln().abs().powf(self.exponent)
    }
}

/// The local hypothesis together with the quasi-triangle constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalBound {
    pub quasi_triangle: f64,
    pub c0: f64,
    pub alpha: f64,
    /// Clearance exponent: the bound holds when `|x - y|^d` is at most the
    /// clearance of both points.
    pub d: f64,
}

impl LocalBound {
    fn validate(&self) -> Result<()> {
        if !(self.quasi_triangle >= 1.0 && self.quasi_triangle.is_finite()) {
            return Err(invalid("quasi-triangle constant must be at least 1"));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(invalid("local constant must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("exponent must be positive"));
        }
        if !(self.d >= 1.0 && self.d.is_finite()) {
            return Err(invalid("clearance exponent must be at least 1"));
        }
        Ok(())
    }

    pub fn modulus(&self) -> LogModulus {
        LogModulus { constant: self.c0, exponent: self.alpha, validity: Validity::Clearance { d: self.d } }
    }
}

/// Step constant of the convex propagation: the geometric chain
/// `x_k -> x` with `|x - x_k| = delta^(D^k)` and `steps` substeps per link
/// gives `d(x, x_0) <= B^2 C0 steps / (1 - D^-alpha) / |log delta|^alpha`.
pub fn convex_step_constant(b: f64, c0: f64, steps: f64, d: f64, alpha: f64) -> f64 {
    b * b * c0 * steps / (1.0 - d.powf(-alpha))
}

/// Step constant of the unit-shrink propagation: dyadic links with `steps`
/// substeps each give `B C0 steps / ((alpha - 1) log 2) / |log delta|^(alpha - 1)`.
pub fn unit_step_constant(b: f64, c0: f64, steps: f64, alpha: f64) -> f64 {
    b * c0 * steps / ((alpha - 1.0) * std::f64::consts::LN_2)
}

/// Scales read off a convex domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScales {
    pub center: Vec<f64>,
    /// Clearance of the center.
    pub radius: f64,
    pub diameter: f64,
    /// `radius / max(1, diameter)`: the clearance gained per unit of
    /// distance walked from a point toward the center.
    pub shrink: f64,
}

impl DomainScales {
    pub fn of(domain: &ConvexDomain) -> Result<Self> {
        let (a, r) = domain.chebyshev_center()?;
        let diameter = domain.diameter_bound()?;
        if !(r > 0.0) || !diameter.is_finite() {
            return Err(Error::Degenerate("domain has empty interior or is unbounded".into()));
        }
        Ok(DomainScales { center: a.iter().copied().collect(), radius: r, diameter, shrink: r / diameter.max(1.0) })
    }
}

/// Everything the convex propagation used, so the constant can be audited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexCertificate {
    pub scales: DomainScales,
    /// Substeps per link on the `x` side and on the `y` side.
    pub steps: u64,
    pub steps_far: u64,
    pub c1: f64,
    pub c2: f64,
    /// Pairs closer than this use the chain argument.
    pub near_threshold: f64,
    /// Upper bound on `d` over the whole domain.
    pub sup_bound: f64,
    pub c_near: f64,
    pub c_direct: f64,
    pub c_far: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation<T> {
    pub modulus: LogModulus,
    pub certificate: T,
}

/// Global constant on a bounded convex domain from a local bound with
/// `D > 1`. Same exponent.
pub fn propagate_convex(domain: &ConvexDomain, local: &LocalBound) -> Result<Propagation<ConvexCertificate>> {
    local.validate()?;
    if !(local.d > 1.0) {
        return Err(invalid("clearance exponent must exceed 1; use the unit variant for D = 1"));
    }
    let scales = DomainScales::of(domain)?;
    let (b, c0, alpha, dx) = (local.quasi_triangle, local.c0, local.alpha, local.d);
    let rho = scales.shrink;
    let steps = (1.0 / rho).floor() + 1.0;
    let steps_far = (2.0 / rho).floor() + 1.0;
    let c1 = convex_step_constant(b, c0, steps, dx, alpha);
    // y sits within 2 delta of x_0, whose clearance is only half as large
    // relative to that distance; |log 2 delta| >= |log delta| / 2 below 1/4.
    let c2 = 2f64.powf(alpha) * convex_step_constant(b, c0, steps_far, dx, alpha);
    let c_near = b * (c1 + c2);

    let first = rho / 4.0;
    let h = 0.5f64.min((rho * rho / 4.0).powf(1.0 / dx));
    let sup_bound = sup_from_center(b, c0, alpha, scales.diameter, c1 / first.ln().abs().powf(alpha), h);
    let near_threshold = rho / 2.0;
    let c_far = sup_bound * far_log(near_threshold, scales.diameter).powf(alpha);
    let constant = c_near.max(c0).max(c_far);
    let certificate = ConvexCertificate {
        scales,
        steps: steps as u64,
        steps_far: steps_far as u64,
        c1,
        c2,
        near_threshold,
        sup_bound,
        c_near,
        c_direct: c0,
        c_far,
        constant,
    };
    Ok(Propagation { modulus: LogModulus::new(constant, alpha, Validity::AllPairs)?, certificate })
}

/// Global constant from a local bound with `D = 1` and `alpha > 1`. The
/// exponent drops to `alpha - 1`.
pub fn propagate_convex_unit(domain: &ConvexDomain, local: &LocalBound) -> Result<Propagation<ConvexCertificate>> {
    local.validate()?;
    if !(local.alpha >= 1.0 + UNIT_ALPHA_GUARD) {
        return Err(invalid(format!("unit variant needs alpha >= 1 + {UNIT_ALPHA_GUARD:e}")));
    }
    let scales = DomainScales::of(domain)?;
    let (b, c0, alpha) = (local.quasi_triangle, local.c0, local.alpha);
    let out = alpha - 1.0;
    let rho = scales.shrink;
    let steps = (1.0 / rho).ceil();
    let steps_far = (2.0 / rho).ceil();
    let c1 = unit_step_constant(b, c0, steps, alpha);
    let c2 = 2f64.powf(out) * unit_step_constant(b, c0, steps_far, alpha);
    let c_near = b * (c1 + c2);

    let first = rho / 4.0;
    let h = 0.5f64.min(rho * rho / 4.0);
    let sup_bound = sup_from_center(b, c0, alpha, scales.diameter, c1 / first.ln().abs().powf(out), h);
    let near_threshold = rho / 2.0;
    let c_far = sup_bound * far_log(near_threshold, scales.diameter).powf(out);
    // direct pairs sit below 1/4, where |log t| > 1
    let constant = c_near.max(c0).max(c_far);
    let certificate = ConvexCertificate {
        scales,
        steps: steps as u64,
        steps_far: steps_far as u64,
        c1,
        c2,
        near_threshold,
        sup_bound,
        c_near,
        c_direct: c0,
        c_far,
        constant,
    };
    Ok(Propagation { modulus: LogModulus::new(constant, out, Validity::AllPairs)?, certificate })
}

/// `sup d` over the domain: walk from any point a short first hop (bounded
/// by `first_hop`), then to the center in uniform hops of length `h`.
fn sup_from_center(b: f64, c0: f64, alpha: f64, diameter: f64, first_hop: f64, h: f64) -> f64 {
    let hops = (diameter / h).ceil();
    let to_center = b * (first_hop + hops * c0 / h.ln().abs().powf(alpha));
    2.0 * b * to_center
}

/// Largest `|log t|` over separations not handled by the near regime.
fn far_log(near_threshold: f64, diameter: f64) -> f64 {
    near_threshold.ln().abs().max(diameter.ln().max(0.0))
}

/// Local hypothesis variant on a ball minus flats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `D > 1`, same exponent.
    Scaled,
    /// `D = 1`; the local exponent is one more than the global one.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamberConstant {
    pub signs: Vec<i8>,
    pub certificate: ConvexCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrangementCertificate {
    pub flats: usize,
    pub chambers: Vec<ChamberConstant>,
    pub chamber_max: f64,
    pub sup_bound: f64,
    pub c_near: f64,
    pub c_far: f64,
    pub constant: f64,
}

/// Global constant on `ball \ N` for flats of codimension at least two.
/// With no flats this is the convex propagation on the ball.
pub fn propagate_ball_minus_arrangement(
    ball: &Ball,
    arrangement: &Arrangement,
    local: &LocalBound,
    variant: Variant,
) -> Result<Propagation<ArrangementCertificate>> {
    ensure_dim(ball.center.len(), arrangement.ambient_dim())?;
    if let Some(c) = arrangement.subspaces().iter().map(|s| s.codim()).min() {
        if c < 2 {
            return Err(Error::CodimensionTooSmall { codim: c, required: 2 });
        }
    }
    let disk = ConvexDomain::ball(ball.center.clone(), ball.radius)?;
    let convex = |dom: &ConvexDomain| match variant {
        Variant::Scaled => propagate_convex(dom, local),
        Variant::Unit => propagate_convex_unit(dom, local),
    };
    let exponent = match variant {
        Variant::Scaled => local.alpha,
        Variant::Unit => local.alpha - 1.0,
    };
    let cells = chambers(ball, &arrangement.hyperplanes()?)?;
    let per: Vec<ChamberConstant> = cells
        .iter()
        .map(|ch| convex(&ch.domain).map(|p| ChamberConstant { signs: ch.signs.clone(), certificate: p.certificate }))
        .collect::<Result<_>>()?;
    if arrangement.is_empty() {
        let p = convex(&disk)?;
        let c = p.certificate.clone();
        return Ok(Propagation {
            modulus: p.modulus,
            certificate: ArrangementCertificate {
                flats: 0,
                chambers: per,
                chamber_max: c.constant,
                sup_bound: c.sup_bound,
                c_near: c.constant,
                c_far: 0.0,
                constant: c.constant,
            },
        });
    }
    let b = local.quasi_triangle;
    let p1 = (arrangement.len() + 1) as f64;
    let chamber_max = per.iter().map(|c| c.certificate.constant).fold(0.0, f64::max);
    let chamber_sup = per.iter().map(|c| c.certificate.sup_bound).fold(0.0, f64::max);
    let factor = b * b * p1 * p1;
    let c_near = factor * chamber_max;
    let sup_bound = factor * chamber_sup;
    let c_far = sup_bound * (2.0 * ball.radius).ln().max(0.0).powf(exponent);
    let constant = c_near.max(c_far);
    Ok(Propagation {
        modulus: LogModulus::new(constant, exponent, Validity::AllPairs)?,
        certificate: ArrangementCertificate {
            flats: arrangement.len(),
            chambers: per,
            chamber_max,
            sup_bound,
            c_near,
            c_far,
            constant,
        },
    })
}

/// A pure, thread-safe distance evaluator.
pub trait Pseudometric: Sync {
    fn distance(&self, x: &Point, y: &Point) -> f64;
}

impl<F> Pseudometric for F
where
    F: Fn(&Point, &Point) -> f64 + Sync,
{
    fn distance(&self, x: &Point, y: &Point) -> f64 {
        self(x, y)
    }
}

/// Concave log profile: `|log t|^-alpha` up to `e^-(alpha + 1)`, constant
/// after. Subadditive, so `|phi(s) - phi(t)| <= phi(|s - t|)`.
pub fn log_profile(t: f64, alpha: f64) -> f64 {
    let knee = (-(alpha + 1.0)).exp();
    if t <= 0.0 {
        0.0
    } else if t <= knee {
        t.ln().abs().powf(-alpha)
    } else {
        (alpha + 1.0).powf(-alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSource {
    pub weight: f64,
    pub flat: AffineSubspace,
}

/// Pseudometrics with known local constants, for testing propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticMetric {
    Zero,
    /// `|u(x) - u(y)|` with `u = sum w_j phi_alpha(dist(., flat_j))`.
    LogProfile {
        alpha: f64,
        sources: Vec<ProfileSource>,
    },
    /// `scale |x - y|`.
    Scaled {
        scale: f64,
    },
    /// `value` for distinct points.
    Discrete {
        value: f64,
    },
    /// `base` plus `value` on one unordered pair.
    Planted {
        base: Box<SyntheticMetric>,
        x: Vec<f64>,
        y: Vec<f64>,
        value: f64,
    },
}

const PLANT_TOL: f64 = 1e-12;

impl SyntheticMetric {
    fn potential(alpha: f64, sources: &[ProfileSource], p: &Point) -> f64 {
        sources.iter().map(|s| s.weight * log_profile(s.flat.dist(p), alpha)).sum()
    }

    /// A constant `C0` with `d(x, y) <= C0 / |log |x - y||^alpha` for every
    /// pair with `|x - y| <= max_sep`, or `None` if there is none.
    pub fn local_constant(&self, alpha: f64, max_sep: f64) -> Option<f64> {
        match self {
            SyntheticMetric::Zero => Some(0.0),
            SyntheticMetric::LogProfile { alpha: beta, sources } => {
                (alpha <= *beta && max_sep <= (beta + 1.0).exp()).then(|| sources.iter().map(|s| s.weight.abs()).sum())
            }
            SyntheticMetric::Scaled { scale } => {
                let g = |t: f64| t * t.ln().abs().powf(alpha);
                let below = g(max_sep.min(1.0).min((-alpha).exp()));
                let above = if max_sep > 1.0 { g(max_sep) } else { 0.0 };
                Some(scale.abs() * below.max(above))
            }
            SyntheticMetric::Discrete { .. } | SyntheticMetric::Planted { .. } => None,
        }
    }
}

impl Pseudometric for SyntheticMetric {
    fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self {
            SyntheticMetric::Zero => 0.0,
            SyntheticMetric::LogProfile { alpha, sources } => {
                (Self::potential(*alpha, sources, x) - Self::potential(*alpha, sources, y)).abs()
            }
            SyntheticMetric::Scaled { scale } => scale * (x - y).norm(),
            SyntheticMetric::Discrete { value } => {
                if x == y {
                    0.0
                } else {
                    *value
                }
            }
            SyntheticMetric::Planted { base, x: px, y: py, value } => {
                let near = |a: &Point, b: &[f64]| {
                    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= PLANT_TOL)
                };
                let hit = (near(x, px.as_slice()) && near(y, py.as_slice()))
                    || (near(x, py.as_slice()) && near(y, px.as_slice()));
                base.distance(x, y) + if hit { *value } else { 0.0 }
            }
        }
    }
}

/// Where pairs live.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Convex(ConvexDomain),
    BallMinus { ball: Ball, obstacles: Arrangement },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Convex(d) => d.dim(),
            Region::BallMinus { ball, .. } => ball.center.len(),
        }
    }

    /// Clearance that enters the local hypothesis: distance to the boundary
    /// for a convex domain and to the flats for a punctured ball.
    pub fn clearance(&self, p: &Point) -> f64 {
        match self {
            Region::Convex(d) => d.signed_clearance(p),
            Region::BallMinus { ball, obstacles } => {
                if (p - &ball.center).norm() < ball.radius {
                    obstacles.dist(p)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.clearance(p) > 0.0
    }

    fn on_obstacle(&self, p: &Point) -> bool {
        match self {
            Region::Convex(_) => false,
            Region::BallMinus { obstacles, .. } => obstacles.dist(p) <= EPS_GEO,
        }
    }

    pub fn diameter(&self) -> Result<f64> {
        match self {
            Region::Convex(d) => d.diameter_bound(),
            Region::BallMinus { ball, .. } => Ok(2.0 * ball.radius),
        }
    }

    fn bounding_box(&self) -> Result<(Point, Point)> {
        match self {
            Region::Convex(d) => d.bounding_box(),
            Region::BallMinus { ball, .. } => {
                let r = Point::from_element(ball.center.len(), ball.radius);
                Ok((&ball.center - &r, &ball.center + r))
            }
        }
    }
}

/// Random pairs with log-uniform separation and uniform direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSampler {
    region: Region,
    lo: (Point, Point),
    min_sep: f64,
    max_sep: f64,
    /// If set, only pairs with `|x - y|^d <= min clearance` are drawn.
    restrict: Option<f64>,
}

const MAX_ATTEMPTS: usize = 100_000;

impl PairSampler {
    pub fn new(region: Region) -> Result<Self> {
        let max_sep = region.diameter()?;
        let lo = region.bounding_box()?;
        Ok(PairSampler { region, lo, min_sep: 1e-12, max_sep, restrict: None })
    }

    pub fn with_separation(mut self, min_sep: f64, max_sep: f64) -> Result<Self> {
        if !(min_sep > 0.0 && max_sep > min_sep) {
            return Err(invalid("separation range must satisfy 0 < min < max"));
        }
        self.min_sep = min_sep;
        self.max_sep = max_sep;
        Ok(self)
    }

    /// Draw only pairs covered by a local hypothesis with exponent `d`.
    pub fn restricted(mut self, d: f64) -> Self {
        self.restrict = Some(d);
        self
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    fn point(&self, rng: &mut ChaCha8Rng) -> Result<Point> {
        let (lo, hi) = &self.lo;
        for _ in 0..MAX_ATTEMPTS {
            let p = Point::from_fn(lo.len(), |i, _| rng.gen_range(lo[i]..hi[i]));
            if self.region.contains(&p) {
                return Ok(p);
            }
        }
        Err(Error::Degenerate("could not sample a point of the region".into()))
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(Point, Point)> {
        let m = self.region.dim();
        for _ in 0..MAX_ATTEMPTS {
            let x = self.point(rng)?;
            let cx = self.region.clearance(&x);
            let cap = match self.restrict {
                Some(d) => self.max_sep.min(cx.powf(1.0 / d)),
                None => self.max_sep,
            };
            if cap <= self.min_sep {
                continue;
            }
            let t = (rng.gen_range(self.min_sep.ln()..cap.ln())).exp();
            let dir = Point::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = dir.norm();
            if n == 0.0 {
                continue;
            }
            let y = &x + dir * (t / n);
            let cy = self.region.clearance(&y);
            if cy <= 0.0 {
                continue;
            }
            if let Some(d) = self.restrict {
                if t.powf(d) > cx.min(cy) {
                    continue;
                }
            }
            return Ok((x, y));
        }
        Err(Error::Degenerate("could not sample a pair in the requested separation range".into()))
    }

    /// `n` pairs, deterministic in `seed`.
    pub fn pairs(&self, n: usize, seed: u64) -> Result<Vec<(Point, Point)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pairs: usize,
    pub violation_count: usize,
    pub worst_ratio: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub passed: bool,
}

/// `d(x, y) |log |x - y||^alpha / C`.
pub fn ratio(metric: &dyn Pseudometric, bound: &LogModulus, x: &Point, y: &Point) -> f64 {
    let t = (x - y).norm();
    if t == 0.0 {
        return 0.0;
    }
    metric.distance(x, y) * t.ln().abs().powf(bound.exponent) / bound.constant
}

/// Check a bound on `n_pairs` sampled pairs.
pub fn verify_logmod(
    metric: &dyn Pseudometric,
    bound: &LogModulus,
    sampler: &PairSampler,
    n_pairs: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if n_pairs == 0 {
        return Err(invalid("need at least one pair"));
    }
    let pairs = sampler.pairs(n_pairs, seed)?;
    verify_pairs(metric, bound, sampler.region(), &pairs)
}

/// Check a bound on explicit pairs.
pub fn verify_pairs(
    metric: &dyn Pseudometric,
    bound: &LogModulus,
    region: &Region,
    pairs: &[(Point, Point)],
) -> Result<VerificationReport> {
    if pairs.is_empty() {
        return Err(invalid("need at least one pair"));
    }
    if pairs.iter().any(|(x, y)| region.on_obstacle(x) || region.on_obstacle(y)) {
        return Err(Error::EndpointOnObstacle);
    }
    let ratios: Vec<f64> = pairs.par_iter().map(|(x, y)| ratio(metric, bound, x, y)).collect();
    let (worst, worst_ratio) =
        ratios
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r > acc.1 || r.is_nan() { (i, r) } else { acc });
    let violation_count = ratios.iter().filter(|r| !(**r <= 1.0 + VERIFY_TOL)).count();
    let (x, y) = &pairs[worst];
    Ok(VerificationReport {
        pairs: pairs.len(),
        violation_count,
        worst_ratio,
        worst_pair: Some((x.iter().copied().collect(), y.iter().copied().collect())),
        passed: violation_count == 0,
    })
}

/// Largest `d(x, y) |log |x - y||^alpha` over the sampled pairs; with a
/// restricted sampler this estimates the local constant from below.
pub fn estimate_local_constant(
    metric: &dyn Pseudometric,
    alpha: f64,
    sampler: &PairSampler,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let unit = LogModulus { constant: 1.0, exponent: alpha, validity: Validity::AllPairs };
    let pairs = sampler.pairs(n_pairs, seed)?;
    Ok(pairs.par_iter().map(|(x, y)| ratio(metric, &unit, x, y)).reduce(|| 0.0, f64::max))
}

/// Check symmetry, zero diagonal and the chain inequality with constant `b`
/// on random tuples. Returns the largest observed chain ratio
/// `d(x_1, x_k) / sum d(x_j, x_{j+1})`.
pub fn check_pseudometric(
    metric: &dyn Pseudometric,
    b: f64,
    sampler: &PairSampler,
    tuples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..tuples {
        let k = rng.gen_range(3..7);
        let pts: Vec<Point> = (0..k).map(|_| sampler.point(&mut rng)).collect::<Result<_>>()?;
        let x = &pts[0];
        if metric.distance(x, x) != 0.0 {
            return Err(Error::Precondition("d(x, x) is not zero".into()));
        }
        let (a, c) = (metric.distance(&pts[0], &pts[1]), metric.distance(&pts[1], &pts[0]));
        if (a - c).abs() > 1e-12 * a.abs().max(1.0) || a < 0.0 {
            return Err(Error::Precondition("d is not symmetric and nonnegative".into()));
        }
        let sum: f64 = pts.windows(2).map(|w| metric.distance(&w[0], &w[1])).sum();
        let direct = metric.distance(&pts[0], &pts[k - 1]);
        if direct > b * sum * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Precondition("chain inequality fails".into()));
        }
        if sum > 0.0 {
            worst = worst.max(direct / sum);
        }
    }
    Ok(worst)
}
