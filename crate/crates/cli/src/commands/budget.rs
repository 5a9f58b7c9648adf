use anyhow::Result;
use logcert::bounds::{bootstrap_exponents, certify_weak_logmod, choose_m, write_sweep_csv, ApproxSchedule, Route};

use super::selftest_report;
use crate::args::{Bootstrap, RouteArg, Sweep};
use crate::report::{Ctx, Plot, Report};

fn selftest(ctx: &Ctx, command: &str) -> Result<Report> {
    let seq = bootstrap_exponents(0.5, 3.0)?;
    let s = ApproxSchedule::from_gamma(1, 0.5, 1.0, 1.0)?;
    Ok(selftest_report(
        ctx,
        command,
        vec![
            ("bootstrap_sequence", seq == [0.5, 0.75, 1.3125, 3.03515625]),
            ("choose_m_floor", choose_m(1e-2, 0.5, 1.0, 5) == 6),
            ("delta_rejects_small_m", s.delta(u64::from(s.m0)).is_err()),
            ("delta_schedule", s.delta(10)? == 10f64.powf(-2.0)),
        ],
    ))
}

pub fn sweep(ctx: &Ctx, a: &Sweep) -> Result<Report> {
    const COMMAND: &str = "budget sweep";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let gamma = a.gamma.unwrap_or(0.5);
    let route = match a.route.unwrap_or(RouteArg::Direct) {
        RouteArg::Direct => Route::Direct,
        RouteArg::Improved => Route::Improved,
    };
    let schedule =
        ApproxSchedule::from_gamma(a.n.unwrap_or(1), gamma, a.b.unwrap_or(1.0), a.d.unwrap_or(1.0))?.with_route(route);
    let cert = certify_weak_logmod(&schedule, a.t_lo.unwrap_or(1e-12), a.t_hi.unwrap_or(1e-2))?;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("schedule", schedule)?;
    report.metric("constant", cert.constant)?;
    report.metric("slope", cert.slope)?;
    report.metric("floor_factor", cert.floor_factor)?;
    report.check("constant_finite", cert.constant.is_finite());
    report.check("slope_within_window", cert.slope <= -gamma + ctx.tol.slope_slack);
    let file = "budget-sweep.csv";
    write_sweep_csv(&cert.rows, std::fs::File::create(ctx.out.join(file))?)?;
    let plot = Plot { x: 1, y: 7, logx: true, logy: false, title: "envelope |log t|^gamma" };
    ctx.wrote(&mut report, file, Some(plot))?;
    report.metric("grid_points", cert.rows.len())?;
    Ok(report)
}

pub fn bootstrap(ctx: &Ctx, a: &Bootstrap) -> Result<Report> {
    const COMMAND: &str = "budget bootstrap";
    if ctx.selftest {
        return selftest(ctx, COMMAND);
    }
    let target = a.target.unwrap_or(100.0);
    let seq = bootstrap_exponents(a.start.unwrap_or(0.5), target)?;
    let steps = seq.len() - 1;
    let mut report = Report::new(COMMAND, ctx.seed);
    report.metric("sequence", &seq)?;
    report.metric("steps", steps)?;
    report.check("exceeds_target", seq.last().is_some_and(|&g| g > target));
    report.check("within_step_budget", steps <= a.max_steps.unwrap_or(8));
    Ok(report)
}
