//! Acceptance criteria. One line per criterion; exits nonzero if any fails.

use std::f64::consts::{E, LN_2};
use std::time::{Duration, Instant};

use logcert::blowup::{calibrate, round_trip_sweep, BlowupModel, CalibrationOptions};
use logcert::bounds::{bootstrap_exponents, certify_weak_logmod, ApproxSchedule};
use logcert::chains::{build_safe_chain, chain_constant, verify_chain, ChainInstance};
use logcert::geometry::{AffineSubspace, Arrangement, Ball, ConvexDomain, Point};
use logcert::lab::{
    campanato_distance_check, jensen_sweep, lelong_sweep, mollify_sweep, radial_profile, CampanatoParams, GridField,
    Kernel, Rect,
};
use logcert::logmod::{
    convex_step_constant, propagate_ball_minus_arrangement, propagate_convex, propagate_convex_unit,
    unit_step_constant, verify_logmod, verify_pairs, LocalBound, LogModulus, PairSampler, ProfileSource, Region,
    SyntheticMetric, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHAIN_INSTANCES: usize = 10_000;
const CHAIN_SAMPLES: usize = 1000;
const FORMULA_TOL: f64 = 1e-10;
const PROPAGATION_PAIRS: usize = 10_000;
const PLANTS_PER_METRIC: usize = 20;
const SLOPE_SLACK: f64 = 0.05;
const EXPONENT_SLACK: f64 = 0.1;
const LELONG_RADII: [f64; 3] = [1e-1, 1e-2, 1e-3];
const MOLLIFY_RADII: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
const REFINEMENT_TOL: f64 = 0.05;
const ROUND_TRIP_POINTS: usize = 10_000;
const ROUND_TRIP_TOL: f64 = 1e-12;
const HIT_RATE: f64 = 0.999;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

type Check = fn() -> logcert::Result<Outcome>;

fn chains() -> logcert::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut failures, mut worst_len, mut worst_clear) = (0usize, 0.0f64, f64::INFINITY);
    for _ in 0..CHAIN_INSTANCES {
        let m = rng.gen_range(3..=6);
        let k = rng.gen_range(1..=3);
        let inst = ChainInstance::random(&mut rng, m, k)?;
        let (x, y) = inst.endpoints();
        let (chain, _) = build_safe_chain(&x, &y, &inst.arrangement)?;
        let rep = verify_chain(&chain, &inst.arrangement, chain_constant(k), CHAIN_SAMPLES);
        let count_ok = chain.vertices().len() == 4usize.pow(k as u32) + 1;
        if !(rep.passed && count_ok) {
            failures += 1;
        }
        worst_len = worst_len.max(rep.measured_length / rep.length_bound);
        worst_clear = worst_clear.min(rep.min_clearance_ratio);
    }
    Ok(Outcome::new(
        failures == 0,
        format!("{failures} failures in {CHAIN_INSTANCES}; worst length/bound {worst_len:.3}, worst clearance ratio {worst_clear:.3}"),
    ))
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn formulas() -> logcert::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let (alpha, d) = (0.2 + 0.3 * i as f64, 1.5 + 0.25 * j as f64);
            let (b, c0, steps) = (1.0 + 0.2 * j as f64, 0.1 + 0.5 * i as f64, (1 + (i + j) % 7) as f64);
            // links at |x - x_k| = delta^(D^k) contribute B^2 C0 M D^-(k-1) alpha each
            let mut series = 0.0;
            for k in 0.. {
                let term = b * b * c0 * steps * d.powf(-(k as f64) * alpha);
                series += term;
                if term < 1e-18 * series {
                    break;
                }
            }
            let closed = convex_step_constant(b, c0, steps, d, alpha);
            worst = worst.max((closed - series).abs() / series);

            let (alpha, b, c0) = (1.5 + 0.3 * i as f64, 1.0 + 0.2 * j as f64, 0.1 + 0.5 * j as f64);
            // int_0^inf (1 + x log 2)^-alpha dx with x = e^s - 1, tail below 1e-16
            let f = |s: f64| (1.0 + s.exp_m1() * LN_2).powf(-alpha) * s.exp();
            let top = 40.0 / (alpha - 1.0);
            let integral = b * c0 * simpson(&f, 0.0, top, 1e-14);
            let closed = unit_step_constant(b, c0, 1.0, alpha);
            worst = worst.max((closed - integral).abs() / integral);
        }
    }
    Ok(Outcome::new(worst <= FORMULA_TOL, format!("200 constants, worst relative error {worst:.2e}")))
}

fn pt(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

fn profile(alpha: f64, flat: AffineSubspace) -> SyntheticMetric {
    SyntheticMetric::LogProfile { alpha, sources: vec![ProfileSource { weight: 1.0, flat }] }
}

struct Case {
    name: &'static str,
    metric: SyntheticMetric,
    region: Region,
    alpha: f64,
    d: f64,
    variant: Variant,
}

fn certify(case: &Case, local: &LocalBound) -> logcert::Result<LogModulus> {
    Ok(match &case.region {
        Region::Convex(dom) => match case.variant {
            Variant::Scaled => propagate_convex(dom, local)?.modulus,
            Variant::Unit => propagate_convex_unit(dom, local)?.modulus,
        },
        Region::BallMinus { ball, obstacles } => {
            propagate_ball_minus_arrangement(ball, obstacles, local, case.variant)?.modulus
        }
    })
}

fn propagation() -> logcert::Result<Outcome> {
    let axis3 = AffineSubspace::new(pt(&[0.1, -0.2, 0.0]), vec![pt(&[0.0, 0.0, 1.0])])?;
    let q = pt(&[0.3, -0.2]);
    let cases = [
        Case {
            name: "point profile, disk",
            metric: profile(1.0, AffineSubspace::point(pt(&[0.2, 0.1]))),
            region: Region::Convex(ConvexDomain::unit_ball(2)),
            alpha: 1.0,
            d: 2.0,
            variant: Variant::Scaled,
        },
        Case {
            name: "line profile, 3-ball",
            metric: profile(2.0, axis3.clone()),
            region: Region::Convex(ConvexDomain::unit_ball(3)),
            alpha: 2.0,
            d: 1.5,
            variant: Variant::Scaled,
        },
        Case {
            name: "euclidean, unit cube",
            metric: SyntheticMetric::Scaled { scale: 1.0 },
            region: Region::Convex(ConvexDomain::aabb(&pt(&[0.0; 3]), &pt(&[1.0; 3]))?),
            alpha: 2.0,
            d: 1.0,
            variant: Variant::Unit,
        },
        Case {
            name: "punctured disk",
            metric: profile(1.0, AffineSubspace::point(q.clone())),
            region: Region::BallMinus {
                ball: Ball { center: pt(&[0.0, 0.0]), radius: 1.0 },
                obstacles: Arrangement::new(2, vec![AffineSubspace::point(q)])?,
            },
            alpha: 1.0,
            d: 2.0,
            variant: Variant::Scaled,
        },
        Case {
            name: "3-ball minus a line, unit",
            metric: profile(2.0, axis3.clone()),
            region: Region::BallMinus {
                ball: Ball { center: pt(&[0.0; 3]), radius: 1.0 },
                obstacles: Arrangement::new(3, vec![axis3])?,
            },
            alpha: 2.0,
            d: 1.0,
            variant: Variant::Unit,
        },
    ];
    let mut notes = Vec::new();
    let mut passed = true;
    for (seed, case) in cases.iter().enumerate() {
        let seed = seed as u64 + 1;
        let c0 = case
            .metric
            .local_constant(case.alpha, case.region.diameter()?)
            .ok_or_else(|| logcert::Error::Precondition(format!("{}: no local constant", case.name)))?;
        let local = LocalBound { quasi_triangle: 1.0, c0, alpha: case.alpha, d: case.d };
        let bound = certify(case, &local)?;
        let sampler = PairSampler::new(case.region.clone())?;
        let rep = verify_logmod(&case.metric, &bound, &sampler, PROPAGATION_PAIRS, seed)?;
        let pairs = sampler.pairs(PLANTS_PER_METRIC, seed + 100)?;
        let caught = pairs.iter().all(|(x, y)| {
            let planted = SyntheticMetric::Planted {
                base: Box::new(case.metric.clone()),
                x: x.iter().copied().collect(),
                y: y.iter().copied().collect(),
                value: 10.0 * bound.bound((x - y).norm()) + 1.0,
            };
            verify_pairs(&planted, &bound, sampler.region(), &pairs).is_ok_and(|r| r.violation_count == 1)
        });
        passed &= rep.passed && caught;
        notes.push(format!("{} worst {:.3}{}", case.name, rep.worst_ratio, if caught { "" } else { " MISSED PLANT" }));
    }
    Ok(Outcome::new(passed, notes.join("; ")))
}

fn budget() -> logcert::Result<Outcome> {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut passed = true;
    for gamma in [0.5, 0.9] {
        for d in [1.0, 2.0] {
            for b in [1.0, 2.0] {
                for n in [1, 2] {
                    let cert = certify_weak_logmod(&ApproxSchedule::from_gamma(n, gamma, b, d)?, 1e-12, 1e-2)?;
                    let gap = cert.slope + gamma;
                    worst_gap = worst_gap.max(gap);
                    passed &= cert.constant.is_finite() && gap <= SLOPE_SLACK;
                }
            }
        }
    }
    Ok(Outcome::new(passed, format!("16 schedules, largest slope + gamma {worst_gap:.4}")))
}

fn bootstrap() -> logcert::Result<Outcome> {
    let seq = bootstrap_exponents(0.5, 100.0)?;
    let exact = seq[..4] == [0.5, 0.75, 1.3125, 3.03515625];
    let steps = seq.len() - 1;
    Ok(Outcome::new(exact && steps <= 8, format!("prefix exact: {exact}; exceeds 100 after {steps} steps")))
}

fn jensen() -> logcert::Result<Outcome> {
    let u = GridField::from_fn(512, -3.0, 3.0, |x, y| x.hypot(y).ln().max(-1.0))?;
    let h = u.spacing();
    let rep = jensen_sweep(&u, &Rect::square(0.5)?, &[h, 2.0 * h, 4.0 * h, 8.0 * h])?;
    let target = 2.0 / 3.0 - EXPONENT_SLACK;
    Ok(Outcome::new(rep.exponent >= target, format!("exponent {:.4} >= {target:.4}", rep.exponent)))
}

fn lelong() -> logcert::Result<Outcome> {
    let clipped = lelong_sweep(|x, y| x.hypot(y).ln().max(-1.0), (0.0, 0.0), &LELONG_RADII, 64)?;
    let log = lelong_sweep(|x, y| x.hypot(y).ln(), (0.0, 0.0), &LELONG_RADII, 64)?;
    Ok(Outcome::new(
        clipped.bounded && !clipped.positive_mass && log.positive_mass,
        format!(
            "clipped variation {:.3} bounded {}; log variation {:.3} positive mass {}",
            clipped.variation, clipped.bounded, log.variation, log.positive_mass
        ),
    ))
}

fn mollification() -> logcert::Result<Outcome> {
    let kinked = |x: f64, y: f64| x.hypot(y).ln().max(-1.0) - (x * x + y * y);
    let rep = mollify_sweep(kinked, (E.recip(), 0.0), &MOLLIFY_RADII, 256, 1.0, Kernel::Bump)?;
    let ratio = rep.rows.iter().map(|r| r.sup_error / r.modulus).fold(0.0, f64::max);
    let weighted = rep.rows.iter().map(|r| r.weighted_defect).fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome::new(
        rep.within_modulus && rep.defect_bounded,
        format!("max error/modulus {ratio:.3}; max defect |log eps| {weighted:.3}"),
    ))
}

fn campanato() -> logcert::Result<Outcome> {
    let params = CampanatoParams { scales: 6, ..CampanatoParams::default() };
    let f = radial_profile(0.1, params.exponent);
    let coarse = campanato_distance_check(&GridField::from_fn(512, -0.5, 0.5, &f)?, &params)?;
    let fine = campanato_distance_check(&GridField::from_fn(1024, -0.5, 0.5, &f)?, &params)?;
    let target = params.exponent - 1.0 - EXPONENT_SLACK;
    let drift = (fine.exponent - coarse.exponent).abs();
    Ok(Outcome::new(
        coarse.passed && coarse.exponent >= target && drift <= REFINEMENT_TOL,
        format!(
            "exponent {:.4} at 512, {:.4} at 1024 (drift {drift:.4}); tail ok {}",
            coarse.exponent, fine.exponent, coarse.tail_ok
        ),
    ))
}

fn blowup() -> logcert::Result<Outcome> {
    let mut round_trip: f64 = 0.0;
    for (n, q) in [(2, 2), (3, 2), (4, 3), (5, 2)] {
        round_trip = round_trip.max(round_trip_sweep(&BlowupModel::new(n, q, 2.0)?, ROUND_TRIP_POINTS, n as u64)?);
    }
    let mut notes = vec![format!("round trip {round_trip:.1e}")];
    let mut passed = round_trip <= ROUND_TRIP_TOL;
    for n in [2, 3] {
        let cal = calibrate(&BlowupModel::new(n, 2, 1.0)?, &CalibrationOptions::default())?;
        passed &= cal.passed() && cal.hit_rate() >= HIT_RATE;
        notes.push(format!(
            "n = {n}: hit rate {:.5} over {} checks, worst slack ratios {:.3}/{:.3}",
            cal.hit_rate(),
            cal.checks,
            cal.derivative_ratio,
            cal.three_hop_ratio
        ));
    }
    Ok(Outcome::new(passed, notes.join("; ")))
}

fn main() {
    let criteria: [(&str, Check, u64); 10] = [
        ("chain certificates", chains, 60),
        ("constant formulas", formulas, 5),
        ("propagation soundness", propagation, 120),
        ("budget sweep", budget, 30),
        ("bootstrap", bootstrap, 1),
        ("jensen gap", jensen, 120),
        ("lelong ratio", lelong, 60),
        ("mollification", mollification, 60),
        ("campanato distance", campanato, 300),
        ("blowup transfer", blowup, 300),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let ok = out.passed && in_time;
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {} [{:.2} s of {limit} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            out.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
