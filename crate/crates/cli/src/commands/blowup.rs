use anyhow::Result;
use logcert::blowup::{
    calibrate as run_calibration, fs_distance, jacobian_sweep, round_trip_sweep, transfer_logmod, BlowupModel,
    CalibrationOptions, RouteConstants, TransferOptions,
};
use num_complex::Complex64;

use super::selftest_report;
use crate::args::{Calibrate, Check, ModelArgs, Profile, Transfer};
use crate::fields::{load, FieldDefaults};
use crate::report::{Ctx, Report};

fn model(a: &ModelArgs) -> Result<BlowupModel> {
    Ok(BlowupModel::new(a.n.unwrap_or(2), a.q.unwrap_or(2), a.radius.unwrap_or(1.0))?)
}

fn selftest(ctx: &Ctx, command: &str) -> Result<Report> {
    let m = BlowupModel::new(2, 2, 1.0)?;
    let chart = m.chart(0)?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let forward = chart.forward(Complex64::new(0.5, 0.0), &[one, Complex64::new(2.0, 0.0)], &[])?;
    let u = [one, Complex64::new(0.0, 1.0)];
    Ok(selftest_report(
        ctx,
        command,
        vec![
            ("forward_example", (forward[0] - 0.5).norm() < 1e-15 && (forward[1] - 1.0).norm() < 1e-15),
            ("forward_rejects_vj_zero", chart.forward(one, &[zero, one], &[]).is_err()),
            ("lift_rejects_center", m.lift(&logcert::blowup::CPoint::zeros(2)).is_err()),
            ("fs_distance_zero_on_a_line", fs_distance(&u, &u.map(|z| z * 3.0)) < 1e-7),
            ("round_trip", round_trip_sweep(&m, 100, ctx.seed)? < ctx.tol.roundtrip),
        ],
    ))
}

pub fn check(ctx: &Ctx, a: &Check) -> Result<Report> {
    const COMMAND: &str = "blowup check";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let m = model(&a.model)?;
    let round_trip = round_trip_sweep(&m, a.points.unwrap_or(10_000), ctx.seed)?;
    let jacobian = jacobian_sweep(&m, a.jacobian_samples.unwrap_or(2000), ctx.seed)?;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("model", m)?;
    report.metric("round_trip_error", round_trip)?;
    report.metric("jacobian_ratio", jacobian)?;
    report.check("round_trip", round_trip <= ctx.tol.roundtrip);
    report.check("jacobian_bound", jacobian <= 1.0);
    report.certificate(RouteConstants::analytic(&m))?;
    Ok(report)
}

pub fn calibrate(ctx: &Ctx, a: &Calibrate) -> Result<Report> {
    const COMMAND: &str = "blowup calibrate";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let m = model(&a.model)?;
    let d = CalibrationOptions::default();
    let opts = CalibrationOptions {
        sources: a.sources.unwrap_or(d.sources),
        jacobian_samples: a.jacobian_samples.unwrap_or(d.jacobian_samples),
        seed: ctx.seed,
    };
    let cal = run_calibration(&m, &opts)?;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("pairs", cal.pairs)?;
    for (name, r) in [
        ("segment", cal.segment_ratio),
        ("derivative", cal.derivative_ratio),
        ("three_hop", cal.three_hop_ratio),
        ("jacobian", cal.jacobian_ratio),
    ] {
        report.metric(&format!("{name}_ratio"), r)?;
        report.check(&format!("{name}_route"), r <= 1.0);
    }
    report.metric("hit_rate", cal.hit_rate())?;
    report.check("hit_rate", cal.hit_rate() >= 0.999);
    report.certificate(&cal)?;
    Ok(report)
}

pub fn transfer(ctx: &Ctx, a: &Transfer) -> Result<Report> {
    const COMMAND: &str = "blowup transfer";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let defaults = FieldDefaults { profile: Profile::LogPower, nodes: 64, half: 0.5, power: 2.0, scale: 1.0 };
    let u = load(&a.source, defaults)?.field;
    let m = BlowupModel::new(2, 2, a.radius.unwrap_or(1.0))?;
    let d = TransferOptions::default();
    let opts = TransferOptions {
        c_pullback: a.c_pullback,
        pairs: a.pairs.unwrap_or(d.pairs),
        sources: a.sources.unwrap_or(d.sources),
        seed: ctx.seed,
    };
    let rep = transfer_logmod(&u, &m, a.exponent.unwrap_or(2.0), &opts)?;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("pullback_measured", rep.pullback_measured)?;
    report.metric("verification", &rep.verification)?;
    report.check("base_bound_holds", rep.verification.passed);
    report.certificate(&rep.certificate)?;
    Ok(report)
}
