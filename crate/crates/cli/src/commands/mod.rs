//! One module per command group.

mod blowup;
mod budget;
mod chain;
mod lab;
mod logmod;

use anyhow::Result;

use crate::args::{BlowupCmd, BudgetCmd, ChainCmd, Command, LabCmd, LogmodCmd};
use crate::config::{merge, RunConfig};
use crate::report::{Ctx, Report};

/// Report for a list of named self-checks.
pub(crate) fn selftest_report(ctx: &Ctx, command: &str, checks: Vec<(&str, bool)>) -> Report {
    let mut r = Report::new(&format!("{command} selftest"), ctx.seed);
    for (name, ok) in checks {
        r.check(name, ok);
    }
    r
}

pub fn dispatch(ctx: &Ctx, cfg: &RunConfig, command: Command) -> Result<Report> {
    match command {
        Command::Chain { cmd: ChainCmd::Build(a) } => chain::build(ctx, &merge(&a, cfg.chain.build.as_ref())?),
        Command::Logmod { cmd: LogmodCmd::Propagate(a) } => {
            logmod::propagate(ctx, &merge(&a, cfg.logmod.propagate.as_ref())?)
        }
        Command::Logmod { cmd: LogmodCmd::Verify(a) } => logmod::verify(ctx, &merge(&a, cfg.logmod.verify.as_ref())?),
        Command::Blowup { cmd: BlowupCmd::Check(a) } => blowup::check(ctx, &merge(&a, cfg.blowup.check.as_ref())?),
        Command::Blowup { cmd: BlowupCmd::Calibrate(a) } => {
            blowup::calibrate(ctx, &merge(&a, cfg.blowup.calibrate.as_ref())?)
        }
        Command::Blowup { cmd: BlowupCmd::Transfer(a) } => {
            blowup::transfer(ctx, &merge(&a, cfg.blowup.transfer.as_ref())?)
        }
        Command::Budget { cmd: BudgetCmd::Sweep(a) } => budget::sweep(ctx, &merge(&a, cfg.budget.sweep.as_ref())?),
        Command::Budget { cmd: BudgetCmd::Bootstrap(a) } => {
            budget::bootstrap(ctx, &merge(&a, cfg.budget.bootstrap.as_ref())?)
        }
        Command::Lab { cmd: LabCmd::Jensen(a) } => lab::jensen(ctx, &merge(&a, cfg.lab.jensen.as_ref())?),
        Command::Lab { cmd: LabCmd::Mass(a) } => lab::mass(ctx, &merge(&a, cfg.lab.mass.as_ref())?),
        Command::Lab { cmd: LabCmd::Mollify(a) } => lab::mollify(ctx, &merge(&a, cfg.lab.mollify.as_ref())?),
        Command::Lab { cmd: LabCmd::Campanato(a) } => lab::campanato(ctx, &merge(&a, cfg.lab.campanato.as_ref())?),
        Command::Lab { cmd: LabCmd::Fitmod(a) } => lab::fitmod(ctx, &merge(&a, cfg.lab.fitmod.as_ref())?),
    }
}
