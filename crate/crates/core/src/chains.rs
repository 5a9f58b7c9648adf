//! Polygonal chains that route around a union of affine flats of
//! codimension at least two.
//!
//! A chain from `x` to `y` built for `k` flats has exactly `4^k + 1`
//! vertices, length at most `C_k |x - y|`, and every point `p` on it satisfies
//! `C_k dist(p, N) >= min(dist(x, N), dist(y, N))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::geometry::{gram_schmidt, standard_basis, AffineSubspace, Arrangement, Point, EPS_GEO};

/// Constant for a single flat. The detour needs a length factor 3 and a
/// clearance factor 2; 6 covers both.
pub const BASE_CONSTANT: f64 = 6.0;

/// Chain constant for `k` flats: `C_0 = 1`, `C_1 = 6`,
/// `C_{k+1} = 8 (C_k + 4^k)`.
pub fn chain_constant(k: usize) -> f64 {
    match k {
        0 => 1.0,
        _ => (1..k).fold(BASE_CONSTANT, |c, j| 8.0 * (c + 4f64.powi(j as i32))),
    }
}

/// Tunables for construction and verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub eps_geo: f64,
    pub samples_per_segment: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { eps_geo: EPS_GEO, samples_per_segment: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalChain {
    ambient_dim: usize,
    vertices: Vec<Point>,
}

impl PolygonalChain {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(invalid("a chain needs at least two vertices"));
        }
        let m = vertices[0].len();
        for v in &vertices {
            ensure_dim(m, v.len())?;
        }
        Ok(PolygonalChain { ambient_dim: m, vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn segments(&self) -> impl Iterator<Item = (&Point, &Point)> {
        self.vertices.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Same path with consecutive repeated vertices merged.
    pub fn dedup(&self) -> PolygonalChain {
        let mut vs = self.vertices.clone();
        vs.dedup();
        if vs.len() == 1 {
            vs.push(vs[0].clone());
        }
        PolygonalChain { ambient_dim: self.ambient_dim, vertices: vs }
    }
}

/// Certified constants and measured quantities for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCertificate {
    pub clearance_constant: f64,
    pub length_bound: f64,
    pub measured_length: f64,
    pub measured_min_clearance_ratio: f64,
}

/// Outcome of [`verify_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub measured_length: f64,
    pub length_bound: f64,
    /// `inf C dist(p, N) / min(dist(x, N), dist(y, N))` over checked points.
    pub min_clearance_ratio: f64,
    pub length_ok: bool,
    pub clearance_ok: bool,
    pub passed: bool,
}

fn check_flat(n: &AffineSubspace, m: usize) -> Result<()> {
    ensure_dim(m, n.ambient_dim())?;
    if n.codim() < 2 {
        return Err(Error::CodimensionTooSmall { codim: n.codim(), required: 2 });
    }
    Ok(())
}

/// Unit vector along which `p` moves away from `n` orthogonally. Points on
/// the flat use the first complement direction.
fn escape_direction(n: &AffineSubspace, p: &Point, eps: f64) -> Point {
    let r = n.residual(p);
    let len = r.norm();
    if len > eps {
        r / len
    } else {
        n.complement_basis().swap_remove(0)
    }
}

/// Detour point for one flat: for every `p` on `[x, w] u [w, y]`,
/// `2 r dist(p, N) >= R >= r dist(p, [x, y])` with
/// `R = min(dist(x, N), dist(y, N))`, and `|x - w| + |w - y| <= 3 |x - y|`.
pub fn waypoint_single_subspace(x: &Point, y: &Point, n: &AffineSubspace, r: f64) -> Result<Point> {
    waypoint_with(x, y, n, r, EPS_GEO)
}

fn waypoint_with(x: &Point, y: &Point, n: &AffineSubspace, r: f64, eps: f64) -> Result<Point> {
    let m = x.len();
    ensure_dim(m, y.len())?;
    check_flat(n, m)?;
    if !(r >= 1.0) {
        return Err(invalid(format!("detour ratio must be >= 1, got {r}")));
    }
    let (dx, dy) = (n.dist(x), n.dist(y));
    if dx <= eps || dy <= eps {
        return Err(Error::EndpointOnObstacle);
    }
    let big_r = dx.min(dy);
    if n.segment_proximity(x, y).dist >= big_r / (2.0 * r) {
        return Ok(x.clone());
    }
    let d = y - x;
    let Some(line) = n.line_proximity(x, y) else {
        // parallel: the clearance is constant along the line
        return Ok(x.clone());
    };
    let foot = x + &d * line.t;
    let lift = big_r / r;
    if line.dist < eps * d.norm() {
        // the segment meets N: leave the hyperplane spanned by N and the line
        let mut span = n.directions().to_vec();
        span.extend(gram_schmidt(&span, &[d], 1e-12));
        let off = gram_schmidt(&span, &standard_basis(m), 1e-8).swap_remove(0);
        Ok(foot + off * lift)
    } else {
        // skew: continue along the common perpendicular
        let perp = n.residual(&foot);
        let len = perp.norm();
        Ok(&foot + perp * (lift / len))
    }
}

/// Safe chain with the default configuration.
pub fn build_safe_chain(x: &Point, y: &Point, arr: &Arrangement) -> Result<(PolygonalChain, ChainCertificate)> {
    build_safe_chain_with(x, y, arr, &ChainConfig::default())
}

pub fn build_safe_chain_with(
    x: &Point,
    y: &Point,
    arr: &Arrangement,
    cfg: &ChainConfig,
) -> Result<(PolygonalChain, ChainCertificate)> {
    let m = arr.ambient_dim();
    ensure_dim(m, x.len())?;
    ensure_dim(m, y.len())?;
    for n in arr.subspaces() {
        check_flat(n, m)?;
    }
    if arr.dist(x) <= cfg.eps_geo || arr.dist(y) <= cfg.eps_geo {
        return Err(Error::EndpointOnObstacle);
    }
    let k = arr.len();
    let vertices = if x == y {
        vec![x.clone(); 4usize.pow(k as u32) + 1]
    } else {
        chain_vertices(x, y, arr.subspaces(), cfg.eps_geo)?
    };
    let chain = PolygonalChain::new(vertices)?;
    let c = chain_constant(k);
    let report = verify_chain_with(&chain, arr, c, cfg);
    let cert = ChainCertificate {
        clearance_constant: c,
        length_bound: report.length_bound,
        measured_length: report.measured_length,
        measured_min_clearance_ratio: report.min_clearance_ratio,
    };
    Ok((chain, cert))
}

fn chain_vertices(x: &Point, y: &Point, flats: &[AffineSubspace], eps: f64) -> Result<Vec<Point>> {
    let k = flats.len();
    if k == 0 {
        return Ok(vec![x.clone(), y.clone()]);
    }
    if k == 1 {
        let w = waypoint_with(x, y, &flats[0], 1.0, eps)?;
        return Ok(vec![x.clone(), w.clone(), w.clone(), w, y.clone()]);
    }
    let coarse = chain_vertices(x, y, &flats[..k - 1], eps)?;
    let c0 = chain_constant(k - 1);
    let newest = &flats[k - 1];
    let dist_all = |p: &Point| flats.iter().map(|f| f.dist(p)).fold(f64::INFINITY, f64::min);
    let anchor = dist_all(x).min(dist_all(y));

    // lift vertices that are too close to the union; only the newest flat can
    // be the close one
    let lifted: Vec<(Point, bool)> = coarse
        .iter()
        .map(|a| {
            if 2.0 * c0 * dist_all(a) >= anchor {
                (a.clone(), false)
            } else {
                let step = (anchor / (2.0 * c0) - newest.dist(a)).max(0.0);
                (a + escape_direction(newest, a, eps) * step, true)
            }
        })
        .collect();

    let near = anchor / (4.0 * c0);
    let mut out = Vec::with_capacity(4 * (lifted.len() - 1) + 1);
    out.push(lifted[0].0.clone());
    for pair in lifted.windows(2) {
        let ((bs, ls), (be, le)) = (&pair[0], &pair[1]);
        let prox = newest.segment_proximity(bs, be);
        if prox.dist >= near {
            out.extend([be.clone(), be.clone(), be.clone()]);
        } else if *ls || *le {
            let q = waypoint_with(bs, be, newest, 2.0, eps)?;
            out.extend([q.clone(), q.clone(), q]);
        } else {
            let closest = bs + (be - bs) * prox.t;
            let mid = &closest + escape_direction(newest, &closest, eps) * (near - prox.dist);
            let q1 = waypoint_with(bs, &mid, newest, 1.0, eps)?;
            let q3 = waypoint_with(&mid, be, newest, 1.0, eps)?;
            out.extend([q1, mid, q3]);
        }
        out.push(be.clone());
    }
    Ok(out)
}

/// Measure a chain against the two certificate inequalities for constant `c`.
pub fn verify_chain(chain: &PolygonalChain, arr: &Arrangement, c: f64, samples_per_segment: usize) -> ChainReport {
    let cfg = ChainConfig { samples_per_segment, ..ChainConfig::default() };
    verify_chain_with(chain, arr, c, &cfg)
}

/// Relative margin under which the sampled clearance is replaced by the
/// exact segment minimum.
const REFINE_MARGIN: f64 = 1.1;

pub fn verify_chain_with(chain: &PolygonalChain, arr: &Arrangement, c: f64, cfg: &ChainConfig) -> ChainReport {
    let vs = chain.vertices();
    let (x, y) = (&vs[0], &vs[vs.len() - 1]);
    let measured_length = chain.length();
    let length_bound = c * (y - x).norm();
    let length_ok = measured_length <= length_bound + cfg.eps_geo;

    let anchor = arr.dist(x).min(arr.dist(y));
    let samples = cfg.samples_per_segment.max(2);
    let mut ratio = f64::INFINITY;
    if !arr.is_empty() {
        for (a, b) in chain.segments() {
            for n in arr.subspaces() {
                let u = n.residual(a);
                let w = n.normal_part(&(b - a));
                let (uu, uw, ww) = (u.norm_squared(), u.dot(&w), w.norm_squared());
                let sampled = (0..samples)
                    .map(|i| {
                        let t = i as f64 / (samples - 1) as f64;
                        (uu + 2.0 * t * uw + t * t * ww).max(0.0).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                let mut seg_ratio = if anchor > 0.0 { c * sampled / anchor } else { 0.0 };
                if seg_ratio < REFINE_MARGIN && anchor > 0.0 {
                    seg_ratio = c * n.segment_proximity(a, b).dist / anchor;
                }
                ratio = ratio.min(seg_ratio);
            }
        }
    }
    let clearance_ok = ratio >= 1.0 - 1e-8;
    ChainReport {
        measured_length,
        length_bound,
        min_clearance_ratio: ratio,
        length_ok,
        clearance_ok,
        passed: length_ok && clearance_ok,
    }
}

/// Endpoints and obstacles of one routing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainInstance {
    pub arrangement: Arrangement,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChainInstance {
    /// Two points off the `z`-axis of `R^3` whose segment crosses it.
    pub fn z_axis() -> Self {
        let axis = AffineSubspace::new(Point::zeros(3), vec![Point::from_vec(vec![0.0, 0.0, 1.0])]).expect("axis");
        ChainInstance {
            arrangement: Arrangement::new(3, vec![axis]).expect("arrangement"),
            x: vec![1.0, 0.0, -1.0],
            y: vec![-1.0, 0.0, 1.0],
        }
    }

    /// Random instance in `R^m` with `k` flats of codimension at least 2,
    /// coordinates uniform in `[-2, 2]`, endpoints at least `1e-6` off the flats.
    pub fn random<R: Rng>(rng: &mut R, m: usize, k: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("flats of codimension 2 need m >= 2"));
        }
        let v = |r: &mut R| Point::from_fn(m, |_, _| r.gen_range(-2.0..2.0));
        let mut flats = Vec::with_capacity(k);
        while flats.len() < k {
            let dim = rng.gen_range(0..=m - 2);
            let base = v(rng);
            let dirs = (0..dim).map(|_| v(rng)).collect();
            if let Ok(f) = AffineSubspace::new(base, dirs) {
                flats.push(f);
            }
        }
        let arrangement = Arrangement::new(m, flats)?;
        loop {
            let (x, y) = (v(rng), v(rng));
            if arrangement.dist(&x) > 1e-6 && arrangement.dist(&y) > 1e-6 {
                return Ok(ChainInstance {
                    arrangement,
                    x: x.iter().copied().collect(),
                    y: y.iter().copied().collect(),
                });
            }
        }
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (Point::from_column_slice(&self.x), Point::from_column_slice(&self.y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    fn z_axis() -> AffineSubspace {
        AffineSubspace::new(p(&[0.0, 0.0, 0.0]), vec![p(&[0.0, 0.0, 1.0])]).unwrap()
    }

    /// Brute-force check of the detour inequalities on both legs.
    fn detour_holds(x: &Point, y: &Point, w: &Point, n: &AffineSubspace, r: f64, samples: usize) -> bool {
        let big_r = n.dist(x).min(n.dist(y));
        let dist_to_xy = |q: &Point| {
            let d = y - x;
            let t = if x == y { 0.0 } else { ((q - x).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) };
            (q - (x + d * t)).norm()
        };
        let tol = 1e-9 * (1.0 + big_r);
        let length_ok = (x - w).norm() + (w - y).norm() <= 3.0 * (x - y).norm() + 1e-10;
        let legs = [(x, w), (w, y)];
        length_ok
            && legs.iter().all(|(a, b)| {
                (0..=samples).all(|i| {
                    let t = i as f64 / samples as f64;
                    let q = *a + (*b - *a) * t;
                    2.0 * r * n.dist(&q) >= big_r - tol && big_r >= r * dist_to_xy(&q) - tol
                })
            })
    }

    #[test]
    fn constants_recursion() {
        assert_eq!(chain_constant(0), 1.0);
        assert_eq!(chain_constant(1), 6.0);
        assert_eq!(chain_constant(2), 80.0);
        assert_eq!(chain_constant(3), 768.0);
    }

    #[test]
    fn waypoint_equal_endpoints() {
        let x = p(&[1.0, 0.0, 0.0]);
        assert_eq!(waypoint_single_subspace(&x, &x, &z_axis(), 1.0).unwrap(), x);
    }

    #[test]
    fn waypoint_through_axis() {
        let x = p(&[1.0, 0.0, 0.0]);
        let y = p(&[-1.0, 0.0, 0.0]);
        let n = z_axis();
        let w = waypoint_single_subspace(&x, &y, &n, 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 0.0, epsilon = 1e-15);
        assert!(detour_holds(&x, &y, &w, &n, 1.0, 10_000));
    }

    #[test]
    fn waypoint_clear_segment() {
        let x = p(&[1.0, 0.0, 0.0]);
        let y = p(&[1.0, 1.0, 0.0]);
        let n = z_axis();
        assert_eq!(waypoint_single_subspace(&x, &y, &n, 1.0).unwrap(), x);
        let min = (0..=1000).map(|i| n.dist(&(&x + (&y - &x) * (i as f64 / 1000.0)))).fold(f64::MAX, f64::min);
        assert!(min >= 0.5);
    }

    #[test]
    fn waypoint_errors() {
        let n = z_axis();
        let on = p(&[0.0, 0.0, 3.0]);
        let off = p(&[1.0, 0.0, 0.0]);
        assert!(matches!(waypoint_single_subspace(&on, &off, &n, 1.0), Err(Error::EndpointOnObstacle)));
        let plane = AffineSubspace::new(p(&[0.0, 0.0, 0.0]), vec![p(&[0.0, 1.0, 0.0]), p(&[0.0, 0.0, 1.0])]).unwrap();
        assert!(matches!(
            waypoint_single_subspace(&off, &p(&[2.0, 0.0, 0.0]), &plane, 1.0),
            Err(Error::CodimensionTooSmall { codim: 1, required: 2 })
        ));
        assert!(waypoint_single_subspace(&off, &p(&[-1.0, 0.1, 0.0]), &n, 0.5).is_err());
    }

    #[test]
    fn crossing_leg_interior_bound() {
        // on [x, w] the clearance dominates the Pythagorean combination
        let x = p(&[1.0, 0.0, 0.0]);
        let y = p(&[-1.0, 0.0, 0.0]);
        let n = z_axis();
        let r = 2.0;
        let w = waypoint_single_subspace(&x, &y, &n, r).unwrap();
        let big_r = 1.0;
        for i in 0..=1000 {
            let a = i as f64 / 1000.0;
            let q = &x * a + &w * (1.0 - a);
            let bound = (a * a * big_r * big_r + (1.0 - a) * (1.0 - a) * big_r * big_r / (r * r)).sqrt();
            assert!(n.dist(&q) >= bound - 1e-12);
        }
    }

    #[test]
    fn single_flat_chain() {
        let arr = Arrangement::new(3, vec![z_axis()]).unwrap();
        let x = p(&[1.0, 0.0, 0.0]);
        let y = p(&[-1.0, 0.0, 0.0]);
        let (chain, cert) = build_safe_chain(&x, &y, &arr).unwrap();
        assert_eq!(chain.vertices().len(), 5);
        assert!(cert.measured_length <= 3.0 * 2.0 + 1e-12);
        assert!(cert.measured_min_clearance_ratio >= 1.0);
        assert_eq!(cert.clearance_constant, 6.0);
    }

    #[test]
    fn equal_endpoints_chain() {
        let arr = Arrangement::new(3, vec![z_axis(), AffineSubspace::point(p(&[5.0, 0.0, 0.0]))]).unwrap();
        let x = p(&[1.0, 2.0, 0.0]);
        let (chain, cert) = build_safe_chain(&x, &x, &arr).unwrap();
        assert_eq!(chain.vertices().len(), 17);
        assert_eq!(cert.measured_length, 0.0);
        assert!(cert.measured_min_clearance_ratio >= 1.0);
    }

    #[test]
    fn verify_trivial_cases() {
        let arr = Arrangement::new(3, vec![z_axis()]).unwrap();
        let far = PolygonalChain::new(vec![p(&[5.0, 0.0, 0.0]), p(&[5.0, 1.0, 0.0])]).unwrap();
        assert!(verify_chain(&far, &arr, 1.0, 1000).passed);
        let through = PolygonalChain::new(vec![p(&[1.0, 0.0, 0.0]), p(&[-1.0, 0.0, 0.0])]).unwrap();
        let rep = verify_chain(&through, &arr, 1.0, 1000);
        assert!(rep.min_clearance_ratio.abs() < 1e-12);
        assert!(!rep.passed);
    }

    #[test]
    fn two_coordinate_planes_in_r4() {
        let e = |i: usize| {
            let mut v = Point::zeros(4);
            v[i] = 1.0;
            v
        };
        let n1 = AffineSubspace::new(Point::zeros(4), vec![e(2), e(3)]).unwrap();
        let n2 = AffineSubspace::new(Point::zeros(4), vec![e(0), e(1)]).unwrap();
        let arr = Arrangement::new(4, vec![n1, n2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = Point::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let y = Point::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let (chain, cert) = build_safe_chain(&x, &y, &arr).unwrap();
            assert_eq!(chain.vertices().len(), 17);
            assert_eq!(cert.clearance_constant, 80.0);
            assert!(cert.measured_length <= cert.length_bound + 1e-10);
            assert!(cert.measured_min_clearance_ratio >= 1.0 - 1e-8);
        }
    }

    fn flat_strategy(m: usize) -> impl Strategy<Value = AffineSubspace> {
        let v = move || prop::collection::vec(-1.0f64..1.0, m).prop_map(Point::from_vec);
        (v(), prop::collection::vec(v(), 0..=m - 2))
            .prop_filter_map("independent", |(b, d)| AffineSubspace::new(b, d).ok())
    }

    fn instance() -> impl Strategy<Value = (Point, Point, Vec<AffineSubspace>)> {
        (3usize..=6).prop_flat_map(|m| {
            let v = move || prop::collection::vec(-2.0f64..2.0, m).prop_map(Point::from_vec);
            (v(), v(), prop::collection::vec(flat_strategy(m), 1..=3))
        })
    }

    proptest! {
        #[test]
        fn detour_inequalities((x, y, flats) in instance(), r in 1.0f64..4.0) {
            let n = &flats[0];
            prop_assume!(n.dist(&x) > 1e-6 && n.dist(&y) > 1e-6);
            let w = waypoint_single_subspace(&x, &y, n, r).unwrap();
            prop_assert!(detour_holds(&x, &y, &w, n, r, 1000));
        }

        #[test]
        fn detour_through_flat((x, _y, flats) in instance(), t in 0.1f64..0.9, r in 1.0f64..3.0) {
            // force the segment to cross the flat
            let n = &flats[0];
            prop_assume!(n.dist(&x) > 1e-3);
            let hit = n.project(&x);
            let y = &x + (&hit - &x) / t;
            prop_assume!(n.dist(&y) > 1e-3);
            let w = waypoint_single_subspace(&x, &y, n, r).unwrap();
            prop_assert!(detour_holds(&x, &y, &w, n, r, 1000));
        }

        #[test]
        fn chain_certificates((x, y, flats) in instance()) {
            let m = x.len();
            let arr = Arrangement::new(m, flats).unwrap();
            prop_assume!(arr.dist(&x) > 1e-6 && arr.dist(&y) > 1e-6);
            let (chain, cert) = build_safe_chain(&x, &y, &arr).unwrap();
            prop_assert_eq!(chain.vertices().len(), 4usize.pow(arr.len() as u32) + 1);
            prop_assert_eq!(&chain.vertices()[0], &x);
            prop_assert_eq!(chain.vertices().last().unwrap(), &y);
            prop_assert!(cert.measured_length <= cert.length_bound + 1e-10);
            prop_assert!(cert.measured_min_clearance_ratio >= 1.0 - 1e-8);
            prop_assert!(chain.dedup().length() <= chain.length() + 1e-12);
        }
    }
}
