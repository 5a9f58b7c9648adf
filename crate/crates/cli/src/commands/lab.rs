use anyhow::{bail, Result};
use logcert::lab::campanato::{campanato_distance_check, conformal_distance, conformal_factor, CampanatoParams};
use logcert::lab::jensen::plant_salt;
use logcert::lab::mass::discrete_laplacian;
use logcert::lab::mollify::sup_distance;
use logcert::lab::{
    dyadic_separations, fit_log_modulus, jensen_gap, jensen_sweep, lelong_ratio, lelong_sweep, mollify as smooth,
    mollify_sweep, GridField, Kernel, Rect,
};

use super::selftest_report;
use crate::args::{Campanato, Expectation, Fitmod, Jensen, KernelArg, Mass, Mollify, Profile};
use crate::fields::{load, profile_fn, FieldDefaults};
use crate::report::{Ctx, Plot, Report};

const SALT_AMPLITUDE: f64 = 10.0;

fn point(at: &Option<Vec<f64>>, default: (f64, f64)) -> (f64, f64) {
    match at.as_deref() {
        Some([x, y]) => (*x, *y),
        _ => default,
    }
}

fn jensen_selftest(ctx: &Ctx) -> Result<Report> {
    let lin = GridField::from_fn(401, -2.0, 2.0, |x, y| 2.0 * x - y)?;
    let k = Rect::square(0.5)?;
    let s = 0.02;
    let gap = jensen_gap(&lin, &k, s)?;
    let flat = GridField::from_fn(256, -3.0, 3.0, |_, _| 1.0)?;
    let h = flat.spacing();
    let rep = jensen_sweep(&flat, &k, &[h, 2.0 * h, 3.0 * h, 4.0 * h])?;
    Ok(selftest_report(
        ctx,
        "lab jensen",
        vec![
            ("linear_gap_at_most_lipschitz_times_scale", gap <= 5f64.sqrt() * s * 1.05),
            ("constant_field_has_no_gap", rep.exponent.is_infinite()),
            ("scale_guard", jensen_gap(&lin, &k, 0.5).is_err()),
        ],
    ))
}

pub fn jensen(ctx: &Ctx, a: &Jensen) -> Result<Report> {
    if ctx.selftest {
        return jensen_selftest(ctx);
    }
    let d = FieldDefaults { profile: Profile::ClippedLog, nodes: 512, half: 3.0, power: 1.0, scale: 1.0 };
    let mut u = load(&a.source, d)?.field;
    if let Some(f) = a.salt {
        u = plant_salt(&u, f, SALT_AMPLITUDE, ctx.seed)?;
    }
    let k = Rect::square(a.inner.unwrap_or(0.5))?;
    let h = u.spacing();
    let scales: Vec<f64> = (0..a.scales.unwrap_or(4)).map(|i| h * 2f64.powi(i as i32)).collect();
    let rep = jensen_sweep(&u, &k, &scales)?;
    let target = a.target.unwrap_or(2.0 / 3.0);
    let mut report = Report::new("lab jensen", ctx.seed);
    report.metric("exponent", rep.exponent)?;
    report.metric("fit", rep.fit)?;
    report.metric("target", target)?;
    report.check("gap_monotone", rep.rows.windows(2).all(|w| w[1].gap >= w[0].gap));
    report.check("exponent_reaches_target", rep.exponent >= target - ctx.tol.exponent_slack);
    let plot = Plot { x: 1, y: 2, logx: true, logy: true, title: "Jensen gap" };
    ctx.write_rows(&mut report, "lab-jensen", &rep.rows, Some(plot))?;
    Ok(report)
}

fn mass_selftest(ctx: &Ctx) -> Result<Report> {
    let q = GridField::from_fn(11, -1.0, 1.0, |x, y| x * x + 3.0 * y * y)?;
    let lap = discrete_laplacian(&q, q.index(5, 5)).unwrap_or(f64::NAN);
    let smooth_field = GridField::from_fn(64, -1.0, 1.0, |x, y| (x + 2.0 * y).sin())?;
    let eps = 0.3;
    let lam = lelong_ratio(&smooth_field, (0.0, 0.0), eps)?;
    Ok(selftest_report(
        ctx,
        "lab mass",
        vec![
            ("quadratic_laplacian", (lap - 8.0).abs() < 1e-9),
            ("smooth_ratio_is_ball_area", (lam - std::f64::consts::PI * eps * eps).abs() < 0.05),
            ("radius_guard", lelong_ratio(&smooth_field, (0.0, 0.0), 0.01).is_err()),
        ],
    ))
}

pub fn mass(ctx: &Ctx, a: &Mass) -> Result<Report> {
    if ctx.selftest {
        return mass_selftest(ctx);
    }
    let f = profile_fn(a.profile.unwrap_or(Profile::ClippedLog), a.power.unwrap_or(1.0), a.scale.unwrap_or(1.0));
    let radii = a.radii.clone().unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
    let rep = lelong_sweep(&f, point(&a.at, (0.0, 0.0)), &radii, a.nodes.unwrap_or(64))?;
    let expect = a.expect.unwrap_or(Expectation::Bounded);
    let mut report = Report::new("lab mass", ctx.seed);
    report.metric("variation", rep.variation)?;
    report.metric("bounded", rep.bounded)?;
    report.metric("positive_mass", rep.positive_mass)?;
    report.metric("expect", expect)?;
    match expect {
        Expectation::Bounded => report.check("ratio_times_log_bounded", rep.bounded),
        Expectation::Positive => report.check("positive_lelong_mass_flagged", rep.positive_mass),
    }
    let plot = Plot { x: 1, y: 3, logx: true, logy: false, title: "Lelong ratio |log eps|" };
    ctx.write_rows(&mut report, "lab-mass", &rep.rows, Some(plot))?;
    Ok(report)
}

fn kernel(k: Option<KernelArg>) -> Kernel {
    match k.unwrap_or(KernelArg::Bump) {
        KernelArg::Bump => Kernel::Bump,
        KernelArg::Flat => Kernel::Flat,
    }
}

fn mollify_selftest(ctx: &Ctx) -> Result<Report> {
    let affine = GridField::from_fn(65, -1.0, 1.0, |x, y| 1.0 + x - 2.0 * y)?;
    let m = smooth(&affine, 0.2, Kernel::Bump)?;
    let quad = GridField::from_fn(129, -1.0, 1.0, |x, y| x * x + y * y - 0.5 * x * y)?;
    let mq = smooth(&quad, 0.1, Kernel::Bump)?;
    Ok(selftest_report(
        ctx,
        "lab mollify",
        vec![
            ("affine_fields_are_fixed", sup_distance(&m, &affine)? < 1e-12),
            ("smooth_psh_has_no_defect", logcert::lab::curvature_defect(&mq, 0.0)? <= 1e-6),
            ("radius_guard", smooth(&affine, 0.01, Kernel::Bump).is_err()),
        ],
    ))
}

pub fn mollify(ctx: &Ctx, a: &Mollify) -> Result<Report> {
    if ctx.selftest {
        return mollify_selftest(ctx);
    }
    let f = profile_fn(a.profile.unwrap_or(Profile::Kinked), a.power.unwrap_or(1.0), a.scale.unwrap_or(1.0));
    let radii = a.radii.clone().unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
    let center = point(&a.at, (std::f64::consts::E.recip(), 0.0));
    let rep = mollify_sweep(&f, center, &radii, a.nodes.unwrap_or(256), a.theta.unwrap_or(1.0), kernel(a.kernel))?;
    let mut report = Report::new("lab mollify", ctx.seed);
    report.check("uniform_error_within_modulus", rep.within_modulus);
    report.check("defect_times_log_bounded", rep.defect_bounded);
    report
        .metric("max_weighted_defect", rep.rows.iter().map(|r| r.weighted_defect).fold(f64::NEG_INFINITY, f64::max))?;
    let plot = Plot { x: 1, y: 2, logx: true, logy: true, title: "mollification error" };
    ctx.write_rows(&mut report, "lab-mollify", &rep.rows, Some(plot))?;
    Ok(report)
}

fn campanato_selftest(ctx: &Ctx) -> Result<Report> {
    let u = GridField::from_fn(65, -0.5, 0.5, |_, _| 0.0)?;
    let f = conformal_factor(&u, 1.0, 0.0)?;
    let d = conformal_distance(&u, &f, (0.0, 0.0))?;
    let euclid = (0..u.len()).all(|k| {
        let (x, y) = u.coords(k);
        let e = x.hypot(y);
        d[k] >= e - 1e-12 && d[k] <= 1.03 * e + 1e-12
    });
    let neg = GridField::from_fn(64, -0.5, 0.5, |x, y| -(x * x + y * y))?;
    let p = CampanatoParams { delta: 0.5, c0: 100.0, ..Default::default() };
    Ok(selftest_report(
        ctx,
        "lab campanato",
        vec![
            ("flat_metric_is_euclidean", euclid),
            ("nonpositive_factor_rejected", campanato_distance_check(&neg, &p).is_err()),
        ],
    ))
}

pub fn campanato(ctx: &Ctx, a: &Campanato) -> Result<Report> {
    if ctx.selftest {
        return campanato_selftest(ctx);
    }
    let d = FieldDefaults { profile: Profile::RadialLog, nodes: 512, half: 0.5, power: 2.0, scale: 0.1 };
    let loaded = load(&a.source, d)?;
    let m = a.m.unwrap_or(2.0);
    let base = CampanatoParams::default();
    let params = CampanatoParams {
        theta: a.theta.unwrap_or(base.theta),
        delta: a.delta.unwrap_or(base.delta),
        exponent: m,
        c0: a.c0.unwrap_or(base.c0),
        base: (0.0, 0.0),
        scales: a.scales.unwrap_or(6),
    };
    let rep = campanato_distance_check(&loaded.field, &params)?;
    let mut report = Report::new("lab campanato", ctx.seed);
    report.metric("params", params)?;
    report.metric("hypothesis_ratio", rep.hypothesis_ratio)?;
    report.metric("exponent", rep.exponent)?;
    report.metric("tail_constant", rep.tail_constant)?;
    report.check("exponent_reaches_m_minus_one", rep.exponent >= m - 1.0 - ctx.tol.exponent_slack);
    report.check("tail_bound", rep.tail_ok);
    if a.refine.unwrap_or(false) {
        let Some((f, half)) = &loaded.profile else {
            bail!("--refine resamples a profile; it cannot refine a field file")
        };
        let n = loaded.field.nx();
        let fine = GridField::from_fn(2 * n, -half, *half, f)?;
        let again = campanato_distance_check(&fine, &params)?;
        report.metric("refined_exponent", again.exponent)?;
        report.check("stable_under_refinement", (again.exponent - rep.exponent).abs() <= ctx.tol.refinement);
    }
    let plot = Plot { x: 1, y: 2, logx: true, logy: true, title: "geodesic distance" };
    ctx.write_rows(&mut report, "lab-campanato", &rep.rows, Some(plot))?;
    report.certificate(&rep)?;
    Ok(report)
}

fn fitmod_selftest(ctx: &Ctx) -> Result<Report> {
    let c = GridField::from_fn(129, -0.5, 0.5, |_, _| 4.0)?;
    let seps = dyadic_separations(&c, 5)?;
    let flat = fit_log_modulus(&c, &seps)?;
    let lip = fit_log_modulus(&GridField::from_fn(129, -0.5, 0.5, |x, y| 3.0 * x + y)?, &seps)?;
    Ok(selftest_report(
        ctx,
        "lab fitmod",
        vec![
            ("constant_field_has_infinite_exponent", flat.exponent.is_infinite()),
            ("lipschitz_field_saturates", lip.saturated),
            ("separation_guard", dyadic_separations(&c, 7).is_err()),
        ],
    ))
}

pub fn fitmod(ctx: &Ctx, a: &Fitmod) -> Result<Report> {
    if ctx.selftest {
        return fitmod_selftest(ctx);
    }
    let d = FieldDefaults { profile: Profile::LogPower, nodes: 513, half: 0.5, power: 3.0, scale: 1.0 };
    let u = load(&a.source, d)?.field;
    let seps = dyadic_separations(&u, a.separations.unwrap_or(6))?;
    let fit = fit_log_modulus(&u, &seps)?;
    let mut report = Report::new("lab fitmod", ctx.seed);
    report.metric("exponent", fit.exponent)?;
    report.metric("constant", fit.constant)?;
    report.metric("resolvable", fit.resolvable)?;
    report.metric("saturated", fit.saturated)?;
    report.metric("fit", fit.fit)?;
    if let Some(m) = a.expect {
        report.check("exponent_matches_expectation", (fit.exponent - m).abs() <= ctx.tol.fit);
    }
    let plot = Plot { x: 1, y: 2, logx: true, logy: true, title: "measured modulus" };
    ctx.write_rows(&mut report, "lab-fitmod", &fit.rows, Some(plot))?;
    Ok(report)
}
