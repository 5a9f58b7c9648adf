use anyhow::{bail, Context, Result};
use logcert::geometry::{AffineSubspace, Arrangement, Ball, ConvexDomain, Point};
use logcert::logmod::{
    propagate_ball_minus_arrangement, propagate_convex, propagate_convex_unit, verify_logmod, verify_pairs, LocalBound,
    LogModulus, PairSampler, ProfileSource, Pseudometric, Region, SyntheticMetric, Variant,
};
use serde_json::Value;

use super::selftest_report;
use crate::args::{DomainKind, LocalArgs, MetricPreset, Propagate, VariantArg, Verify};
use crate::report::{Ctx, Report};

struct Setup {
    region: Region,
    local: LocalBound,
    variant: Variant,
}

fn obstacle(dim: usize) -> Result<AffineSubspace> {
    if dim < 2 {
        bail!("ball-minus-flat needs dim >= 2");
    }
    let dirs = (0..dim - 2)
        .map(|i| {
            let mut e = Point::zeros(dim);
            e[i] = 1.0;
            e
        })
        .collect();
    Ok(AffineSubspace::new(Point::zeros(dim), dirs)?)
}

fn setup(a: &LocalArgs, c0: Option<f64>) -> Result<Setup> {
    let dim = a.dim.unwrap_or(2);
    let radius = a.radius.unwrap_or(1.0);
    let region = match a.domain.unwrap_or(DomainKind::Ball) {
        DomainKind::Ball => Region::Convex(ConvexDomain::ball(Point::zeros(dim), radius)?),
        DomainKind::Cube => {
            let r = Point::from_element(dim, radius);
            Region::Convex(ConvexDomain::aabb(&(-&r), &r)?)
        }
        DomainKind::BallMinusFlat => Region::BallMinus {
            ball: Ball { center: Point::zeros(dim), radius },
            obstacles: Arrangement::new(dim, vec![obstacle(dim)?])?,
        },
    };
    let local = LocalBound {
        quasi_triangle: a.b.unwrap_or(1.0),
        c0: c0.or(a.c0).unwrap_or(1.0),
        alpha: a.alpha.unwrap_or(2.0),
        d: a.d.unwrap_or(2.0),
    };
    let variant = match a.variant.unwrap_or(VariantArg::Scaled) {
        VariantArg::Scaled => Variant::Scaled,
        VariantArg::Unit => Variant::Unit,
    };
    Ok(Setup { region, local, variant })
}

fn certify(s: &Setup) -> Result<(LogModulus, Value)> {
    Ok(match &s.region {
        Region::Convex(dom) => {
            let p = match s.variant {
                Variant::Scaled => propagate_convex(dom, &s.local)?,
                Variant::Unit => propagate_convex_unit(dom, &s.local)?,
            };
            (p.modulus, serde_json::to_value(p.certificate)?)
        }
        Region::BallMinus { ball, obstacles } => {
            let p = propagate_ball_minus_arrangement(ball, obstacles, &s.local, s.variant)?;
            (p.modulus, serde_json::to_value(p.certificate)?)
        }
    })
}

fn selftest(ctx: &Ctx, command: &str) -> Result<Report> {
    let dom = ConvexDomain::unit_ball(2);
    let local = LocalBound { quasi_triangle: 1.0, c0: 1.0, alpha: 2.0, d: 2.0 };
    let p = propagate_convex(&dom, &local)?;
    let unit_guard = propagate_convex_unit(&dom, &LocalBound { alpha: 1.0, ..local }).is_err();
    let sampler = PairSampler::new(Region::Convex(dom.clone()))?;
    let zero = verify_logmod(&SyntheticMetric::Zero, &p.modulus, &sampler, 200, ctx.seed)?;
    let pairs = sampler.pairs(1, ctx.seed)?;
    let (x, y) = &pairs[0];
    let planted = SyntheticMetric::Planted {
        base: Box::new(SyntheticMetric::Zero),
        x: x.iter().copied().collect(),
        y: y.iter().copied().collect(),
        value: 10.0 * p.modulus.bound((x - y).norm()),
    };
    let caught = !verify_pairs(&planted, &p.modulus, sampler.region(), &pairs)?.passed;
    Ok(selftest_report(
        ctx,
        command,
        vec![
            ("global_constant_dominates_local", p.modulus.constant >= local.c0),
            ("same_exponent", p.modulus.exponent == local.alpha),
            ("unit_variant_rejects_alpha_one", unit_guard),
            ("zero_metric_verifies", zero.passed),
            ("planted_violator_caught", caught),
        ],
    ))
}

pub fn propagate(ctx: &Ctx, a: &Propagate) -> Result<Report> {
    const COMMAND: &str = "logmod propagate";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let s = setup(&a.local, None)?;
    let (modulus, cert) = certify(&s)?;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("local", s.local)?;
    report.metric("modulus", modulus)?;
    report.check("constant_finite", modulus.constant.is_finite());
    report.check("constant_dominates_local", modulus.constant >= s.local.c0);
    report.certificate(cert)?;
    Ok(report)
}

fn metric_for(a: &Verify, s: &Setup, dim: usize) -> Result<SyntheticMetric> {
    if let Some(p) = &a.metric_file {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading metric {}", p.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing metric {}", p.display()));
    }
    Ok(match a.metric.unwrap_or(MetricPreset::Profile) {
        MetricPreset::Zero => SyntheticMetric::Zero,
        MetricPreset::Scaled => SyntheticMetric::Scaled { scale: 1.0 },
        MetricPreset::Profile => {
            let flat = match &s.region {
                Region::BallMinus { obstacles, .. } => obstacles.subspaces()[0].clone(),
                Region::Convex(_) => AffineSubspace::point(Point::zeros(dim)),
            };
            SyntheticMetric::LogProfile { alpha: s.local.alpha, sources: vec![ProfileSource { weight: 1.0, flat }] }
        }
    })
}

pub fn verify(ctx: &Ctx, a: &Verify) -> Result<Report> {
    const COMMAND: &str = "logmod verify";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let draft = setup(&a.local, Some(1.0))?;
    let dim = draft.region.dim();
    let base = metric_for(a, &draft, dim)?;
    let c0 = match a.local.c0 {
        Some(c) => c,
        None => base
            .local_constant(draft.local.alpha, draft.region.diameter()?)
            .context("no analytic local constant for this metric; pass --c0")?
            .max(f64::MIN_POSITIVE),
    };
    let s = setup(&a.local, Some(c0))?;
    let (modulus, cert) = certify(&s)?;
    let sampler = PairSampler::new(s.region.clone())?;
    let n = a.pairs.unwrap_or(10_000);
    let pairs = sampler.pairs(n, ctx.seed)?;
    let plant = a.plant.unwrap_or(false);
    let metric: Box<dyn Pseudometric> = if plant {
        let (x, y) = &pairs[0];
        Box::new(SyntheticMetric::Planted {
            base: Box::new(base),
            x: x.iter().copied().collect(),
            y: y.iter().copied().collect(),
            value: 10.0 * modulus.bound((x - y).norm()) + 1.0,
        })
    } else {
        Box::new(base)
    };
    let rep = verify_pairs(metric.as_ref(), &modulus, sampler.region(), &pairs)?;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("local", s.local)?;
    report.metric("modulus", modulus)?;
    report.metric("planted", plant)?;
    report.metric("verification", &rep)?;
    report.check("bound_holds_on_all_pairs", rep.passed);
    report.certificate(cert)?;
    Ok(report)
}
