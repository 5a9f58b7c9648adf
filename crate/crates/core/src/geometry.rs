//! Affine flats, finite arrangements of flats and convex domains.
//!
//! Points live in `R^m` and are represented by [`nalgebra::DVector`]. Every
//! flat keeps an orthonormal basis of its direction space, so projections and
//! distances are a single residual computation.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Error, Result};

pub type Point = DVector<f64>;

/// Absolute geometric tolerance used for incidence tests.
pub const EPS_GEO: f64 = 1e-10;

/// Relative tolerance for declaring a direction parallel to a flat.
pub const PARALLEL_TOL: f64 = 1e-9;

/// Orthonormalise `candidates` against `basis` (assumed orthonormal) and
/// against each other, dropping vectors whose residual norm is below `tol`.
pub(crate) fn gram_schmidt(basis: &[Point], candidates: &[Point], tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for c in candidates {
        let mut v = c.clone();
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for q in basis.iter().chain(out.iter()) {
                let coeff = q.dot(&v);
                v.axpy(-coeff, q, 1.0);
            }
        }
        let n = v.norm();
        if n > tol {
            out.push(v / n);
        }
    }
    out
}

pub(crate) fn standard_basis(m: usize) -> Vec<Point> {
    (0..m)
        .map(|i| {
            let mut e = Point::zeros(m);
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Closest approach of a segment (or line) to a flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    /// Parameter of the closest point, `a + t (b - a)`.
    pub t: f64,
    pub dist: f64,
}

/// An affine flat `base + span(directions)` with orthonormal directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubspaceRecord", into = "SubspaceRecord")]
pub struct AffineSubspace {
    base: Point,
    directions: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubspaceRecord {
    base: Vec<f64>,
    #[serde(default)]
    directions: Vec<Vec<f64>>,
}

impl TryFrom<SubspaceRecord> for AffineSubspace {
    type Error = Error;
    fn try_from(r: SubspaceRecord) -> Result<Self> {
        let base = Point::from_vec(r.base);
        let dirs = r.directions.into_iter().map(Point::from_vec).collect();
        AffineSubspace::new(base, dirs)
    }
}

impl From<AffineSubspace> for SubspaceRecord {
    fn from(s: AffineSubspace) -> Self {
        SubspaceRecord {
            base: s.base.iter().copied().collect(),
            directions: s.directions.iter().map(|d| d.iter().copied().collect()).collect(),
        }
    }
}

impl AffineSubspace {
    /// Build a flat from a base point and spanning vectors. The spanning
    /// vectors must be linearly independent.
    pub fn new(base: Point, spanning: Vec<Point>) -> Result<Self> {
        let m = base.len();
        if m == 0 {
            return Err(invalid("ambient dimension must be positive"));
        }
        for v in &spanning {
            ensure_dim(m, v.len())?;
        }
        let scale = spanning.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let directions = gram_schmidt(&[], &spanning, EPS_GEO * scale.max(1.0));
        if directions.len() != spanning.len() {
            return Err(Error::Degenerate("spanning vectors are linearly dependent".into()));
        }
        Ok(AffineSubspace { base, directions })
    }

    /// The zero-dimensional flat `{p}`.
    pub fn point(p: Point) -> Self {
        AffineSubspace { base: p, directions: Vec::new() }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn directions(&self) -> &[Point] {
        &self.directions
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.len()
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    /// Component of a vector orthogonal to the direction space.
    pub fn normal_part(&self, v: &Point) -> Point {
        let mut r = v.clone();
        for d in &self.directions {
            let c = d.dot(&r);
            r.axpy(-c, d, 1.0);
        }
        r
    }

    /// `p - proj(p)`.
    pub fn residual(&self, p: &Point) -> Point {
        self.normal_part(&(p - &self.base))
    }

    pub fn project(&self, p: &Point) -> Point {
        p - self.residual(p)
    }

    pub fn dist(&self, p: &Point) -> f64 {
        self.residual(p).norm()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.dist(p) <= EPS_GEO * (1.0 + p.norm().max(self.base.norm()))
    }

    /// Orthonormal basis of the orthogonal complement, obtained by
    /// orthonormalising `e_1, ..., e_m` against the directions in order.
    pub fn complement_basis(&self) -> Vec<Point> {
        gram_schmidt(&self.directions, &standard_basis(self.ambient_dim()), 1e-8)
    }

    /// Deterministic hyperplane containing the flat: its normal is the first
    /// complement basis vector.
    pub fn hyperplane_containing(&self) -> Result<Hyperplane> {
        let normal =
            self.complement_basis().into_iter().next().ok_or(Error::CodimensionTooSmall { codim: 0, required: 1 })?;
        let offset = normal.dot(&self.base);
        Ok(Hyperplane { normal, offset })
    }

    /// Exact minimum distance from the segment `[a, b]` to the flat.
    pub fn segment_proximity(&self, a: &Point, b: &Point) -> Proximity {
        let u = self.residual(a);
        let w = self.normal_part(&(b - a));
        let ww = w.norm_squared();
        let t = if ww > 0.0 { (-u.dot(&w) / ww).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (u + w * t).norm();
        // the endpoints are exact candidates too; guards against cancellation
        let da = self.dist(a);
        let db = self.dist(b);
        if da <= dist && da <= db {
            Proximity { t: 0.0, dist: da }
        } else if db < dist {
            Proximity { t: 1.0, dist: db }
        } else {
            Proximity { t, dist }
        }
    }

    /// Closest approach of the full line through `a` and `b`. `None` when the
    /// line is parallel to the flat.
    pub fn line_proximity(&self, a: &Point, b: &Point) -> Option<Proximity> {
        let u = self.residual(a);
        let w = self.normal_part(&(b - a));
        let ww = w.norm_squared();
        // rank test: the direction is parallel when its normal part is tiny
        if ww == 0.0 || ww <= PARALLEL_TOL * PARALLEL_TOL * (b - a).norm_squared() {
            return None;
        }
        let t = -u.dot(&w) / ww;
        Some(Proximity { t, dist: (u + w * t).norm() })
    }
}

/// Oriented hyperplane `{x : normal . x = offset}` with unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub normal: Point,
    pub offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate("hyperplane normal is zero".into()));
        }
        Ok(Hyperplane { normal: normal / n, offset: offset / n })
    }

    /// Signed distance, positive on the side the normal points to.
    pub fn signed(&self, p: &Point) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Parameters in `(0, 1)` at which the open segment crosses the hyperplane.
    pub fn crossing(&self, a: &Point, b: &Point) -> Option<f64> {
        let sa = self.signed(a);
        let sb = self.signed(b);
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            Some(sa / (sa - sb))
        } else {
            None
        }
    }
}

/// A finite union of affine flats in a common ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArrangementRecord", into = "ArrangementRecord")]
pub struct Arrangement {
    ambient_dim: usize,
    subspaces: Vec<AffineSubspace>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrangementRecord {
    ambient_dim: usize,
    subspaces: Vec<AffineSubspace>,
}

impl TryFrom<ArrangementRecord> for Arrangement {
    type Error = Error;
    fn try_from(r: ArrangementRecord) -> Result<Self> {
        Arrangement::new(r.ambient_dim, r.subspaces)
    }
}

impl From<Arrangement> for ArrangementRecord {
    fn from(a: Arrangement) -> Self {
        ArrangementRecord { ambient_dim: a.ambient_dim, subspaces: a.subspaces }
    }
}

impl Arrangement {
    pub fn new(ambient_dim: usize, subspaces: Vec<AffineSubspace>) -> Result<Self> {
        for s in &subspaces {
            ensure_dim(ambient_dim, s.ambient_dim())?;
        }
        Ok(Arrangement { ambient_dim, subspaces })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn subspaces(&self) -> &[AffineSubspace] {
        &self.subspaces
    }

    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    /// Smallest codimension among the flats (`ambient_dim` when empty).
    pub fn min_codim(&self) -> usize {
        self.subspaces.iter().map(|s| s.codim()).min().unwrap_or(self.ambient_dim)
    }

    /// Distance to the union; `+inf` for the empty arrangement.
    pub fn dist(&self, p: &Point) -> f64 {
        self.subspaces.iter().map(|s| s.dist(p)).fold(f64::INFINITY, f64::min)
    }

    /// Exact minimum distance from a segment to the union.
    pub fn segment_dist(&self, a: &Point, b: &Point) -> f64 {
        self.subspaces.iter().map(|s| s.segment_proximity(a, b).dist).fold(f64::INFINITY, f64::min)
    }

    pub fn hyperplanes(&self) -> Result<Vec<Hyperplane>> {
        self.subspaces.iter().map(|s| s.hyperplane_containing()).collect()
    }
}

/// Closed ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

/// Half-space `{x : normal . x <= offset}` with unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Point,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        let h = Hyperplane::new(normal, offset)?;
        Ok(HalfSpace { normal: h.normal, offset: h.offset })
    }

    pub fn slack(&self, p: &Point) -> f64 {
        self.offset - self.normal.dot(p)
    }
}

/// A bounded convex domain: an optional ball intersected with finitely many
/// half-spaces. Balls, polytopes and chambers of a cut ball all fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexDomain {
    dim: usize,
    ball: Option<Ball>,
    halfspaces: Vec<HalfSpace>,
}

impl ConvexDomain {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("ball radius must be positive"));
        }
        Ok(ConvexDomain { dim: center.len(), ball: Some(Ball { center, radius }), halfspaces: Vec::new() })
    }

    pub fn unit_ball(dim: usize) -> Self {
        ConvexDomain { dim, ball: Some(Ball { center: Point::zeros(dim), radius: 1.0 }), halfspaces: Vec::new() }
    }

    /// Intersection of half-spaces; must be bounded with nonempty interior.
    pub fn polytope(dim: usize, halfspaces: Vec<HalfSpace>) -> Result<Self> {
        for h in &halfspaces {
            ensure_dim(dim, h.normal.len())?;
        }
        let d = ConvexDomain { dim, ball: None, halfspaces };
        d.bounding_box()?;
        Ok(d)
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn aabb(lo: &Point, hi: &Point) -> Result<Self> {
        ensure_dim(lo.len(), hi.len())?;
        let m = lo.len();
        let mut hs = Vec::with_capacity(2 * m);
        for (i, e) in standard_basis(m).into_iter().enumerate() {
            if !(hi[i] > lo[i]) {
                return Err(invalid("box must have positive side lengths"));
            }
            hs.push(HalfSpace { normal: e.clone(), offset: hi[i] });
            hs.push(HalfSpace { normal: -e, offset: -lo[i] });
        }
        ConvexDomain::polytope(m, hs)
    }

    /// Intersect with one more half-space.
    pub fn cut(&self, h: HalfSpace) -> Result<Self> {
        ensure_dim(self.dim, h.normal.len())?;
        let mut d = self.clone();
        d.halfspaces.push(h);
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ball_part(&self) -> Option<&Ball> {
        self.ball.as_ref()
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    /// Signed clearance: distance to the boundary for interior points and a
    /// nonpositive value outside. Concave on the whole space.
    pub fn signed_clearance(&self, p: &Point) -> f64 {
        let b = self.ball.as_ref().map_or(f64::INFINITY, |b| b.radius - (p - &b.center).norm());
        self.halfspaces.iter().map(|h| h.slack(p)).fold(b, f64::min)
    }

    /// Distance to the boundary of a point of the closure.
    pub fn dist_to_boundary(&self, p: &Point) -> Result<f64> {
        ensure_dim(self.dim, p.len())?;
        let c = self.signed_clearance(p);
        if c < -EPS_GEO {
            return Err(Error::Precondition("point lies outside the domain".into()));
        }
        Ok(c.max(0.0))
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.signed_clearance(p) > 0.0
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> Result<(Point, Point)> {
        if let Some(b) = &self.ball {
            let r = Point::from_element(self.dim, b.radius);
            return Ok((&b.center - &r, &b.center + r));
        }
        let mut lo = Point::zeros(self.dim);
        let mut hi = Point::zeros(self.dim);
        for i in 0..self.dim {
            let mut c = Point::zeros(self.dim);
            c[i] = 1.0;
            hi[i] = lp_extreme(&self.halfspaces, &c, self.dim)?;
            lo[i] = -lp_extreme(&self.halfspaces, &(-c), self.dim)?;
        }
        Ok((lo, hi))
    }

    /// Upper bound on the diameter.
    pub fn diameter_bound(&self) -> Result<f64> {
        if let Some(b) = &self.ball {
            return Ok(2.0 * b.radius);
        }
        let (lo, hi) = self.bounding_box()?;
        Ok((hi - lo).norm())
    }

    /// Point maximising the clearance, with its clearance. For a ball this
    /// is exact; otherwise a linear program, with the ball constraint (if
    /// any) handled by tangent cuts. The returned radius is always the true
    /// clearance of the returned point.
    pub fn chebyshev_center(&self) -> Result<(Point, f64)> {
        if self.halfspaces.is_empty() {
            let b = self.ball.as_ref().ok_or_else(|| Error::Degenerate("empty description".into()))?;
            return Ok((b.center.clone(), b.radius));
        }
        let mut cuts: Vec<Point> = Vec::new();
        if self.ball.is_some() {
            for e in standard_basis(self.dim) {
                cuts.push(e.clone());
                cuts.push(-e);
            }
        }
        let mut best: Option<(Point, f64)> = None;
        for _ in 0..200 {
            let (p, t) = self.chebyshev_lp(&cuts)?;
            let r = self.signed_clearance(&p);
            if best.as_ref().is_none_or(|(_, br)| r > *br) {
                best = Some((p.clone(), r));
            }
            let Some(b) = &self.ball else { break };
            if t - r <= 1e-12 * (1.0 + b.radius) {
                break;
            }
            let dir = &p - &b.center;
            let n = dir.norm();
            if n == 0.0 {
                break;
            }
            cuts.push(dir / n);
        }
        best.ok_or_else(|| Error::Lp("no iterate".into()))
    }

    fn chebyshev_lp(&self, ball_cuts: &[Point]) -> Result<(Point, f64)> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        let mut pb = Problem::new(OptimizationDirection::Maximize);
        let xs: Vec<_> = (0..self.dim).map(|_| pb.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        let t = pb.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        for h in &self.halfspaces {
            let mut row: Vec<_> = xs.iter().zip(h.normal.iter()).map(|(&v, &c)| (v, c)).collect();
            row.push((t, 1.0));
            pb.add_constraint(row.as_slice(), ComparisonOp::Le, h.offset);
        }
        if let Some(b) = &self.ball {
            for u in ball_cuts {
                let mut row: Vec<_> = xs.iter().zip(u.iter()).map(|(&v, &c)| (v, c)).collect();
                row.push((t, 1.0));
                pb.add_constraint(row.as_slice(), ComparisonOp::Le, b.radius + u.dot(&b.center));
            }
        }
        let sol = pb
            .solve()
            .map_err(|e| Error::Lp(e.to_string()))?
            .into_solution()
            .map_err(|_| Error::Lp("interrupted".into()))?;
        let p = Point::from_iterator(self.dim, xs.iter().map(|&v| sol.var_value(v)));
        Ok((p, sol.var_value(t)))
    }
}

fn lp_extreme(halfspaces: &[HalfSpace], objective: &Point, dim: usize) -> Result<f64> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..dim).map(|i| pb.add_var(objective[i], (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for h in halfspaces {
        let row: Vec<_> = xs.iter().zip(h.normal.iter()).map(|(&v, &c)| (v, c)).collect();
        pb.add_constraint(row.as_slice(), ComparisonOp::Le, h.offset);
    }
    match pb.solve() {
        Ok(out) => {
            let sol = out.into_solution().map_err(|_| Error::Lp("interrupted".into()))?;
            Ok(sol.objective())
        }
        Err(microlp::Error::Unbounded) => Err(Error::Degenerate("domain is unbounded".into())),
        Err(microlp::Error::Infeasible) => Err(Error::Degenerate("domain is empty".into())),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

/// A chamber of a ball cut by hyperplanes, with its side of each hyperplane
/// (`-1` or `+1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chamber {
    pub signs: Vec<i8>,
    pub domain: ConvexDomain,
}

/// Minimum inradius for a cell to count as a chamber.
const CHAMBER_MIN_RADIUS: f64 = 1e-9;

/// Connected components of `ball \ union(hyperplanes)`. Each is convex; cells
/// are refined one hyperplane at a time and empty ones are discarded.
pub fn chambers(ball: &Ball, hyperplanes: &[Hyperplane]) -> Result<Vec<Chamber>> {
    let dim = ball.center.len();
    for h in hyperplanes {
        ensure_dim(dim, h.normal.len())?;
    }
    let root = ConvexDomain::ball(ball.center.clone(), ball.radius)?;
    let mut cells = vec![Chamber { signs: Vec::new(), domain: root }];
    for h in hyperplanes {
        let mut next = Vec::with_capacity(2 * cells.len());
        for cell in &cells {
            for sign in [-1i8, 1] {
                let s = f64::from(sign);
                // side `sign` means sign * (n.x - c) > 0, i.e. -s n.x <= -s c
                let half = HalfSpace { normal: &h.normal * -s, offset: -s * h.offset };
                let dom = cell.domain.cut(half)?;
                let nonempty = match dom.chebyshev_center() {
                    Ok((_, r)) => r > CHAMBER_MIN_RADIUS,
                    Err(Error::Lp(_)) | Err(Error::Degenerate(_)) => false,
                    Err(e) => return Err(e),
                };
                if nonempty {
                    let mut signs = cell.signs.clone();
                    signs.push(sign);
                    next.push(Chamber { signs, domain: dom });
                }
            }
        }
        cells = next;
    }
    Ok(cells)
}

/// Parameters in `(0, 1)` where `[a, b]` crosses any of the hyperplanes,
/// sorted. The segment splits into at most `hyperplanes.len() + 1` pieces,
/// each inside the closure of one chamber.
pub fn chamber_breakpoints(a: &Point, b: &Point, hyperplanes: &[Hyperplane]) -> Vec<f64> {
    let mut ts: Vec<f64> = hyperplanes.iter().filter_map(|h| h.crossing(a, b)).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() <= EPS_GEO);
    ts
}
