//! Run context, JSON reports and CSV curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

/// Machine-readable outcome of one command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub status: Status,
    pub seed: u64,
    pub metrics: BTreeMap<String, Value>,
    pub checks: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Value>,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report {
            command: command.to_string(),
            status: Status::Pass,
            seed,
            metrics: BTreeMap::new(),
            checks: BTreeMap::new(),
            certificate: None,
            artifacts: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: impl Serialize) -> Result<()> {
        self.metrics.insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Record an assertion; any failed one fails the report.
    pub fn check(&mut self, name: &str, ok: bool) {
        self.checks.insert(name.to_string(), ok);
        if !ok {
            self.status = Status::Fail;
        }
    }

    pub fn certificate(&mut self, value: impl Serialize) -> Result<()> {
        self.certificate = Some(serde_json::to_value(value)?);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// How a CSV curve should be drawn by the optional gnuplot script.
#[derive(Debug, Clone, Copy)]
pub struct Plot<'a> {
    pub x: usize,
    pub y: usize,
    pub logx: bool,
    pub logy: bool,
    pub title: &'a str,
}

pub struct Ctx {
    pub out: PathBuf,
    pub seed: u64,
    pub tol: Tolerances,
    pub gnuplot: bool,
    pub selftest: bool,
}

impl Ctx {
    fn stem(command: &str) -> String {
        command.replace(' ', "-")
    }

    /// Write rows as CSV under `--out` and register the artifact.
    pub fn write_rows<T: Serialize>(
        &self,
        report: &mut Report,
        name: &str,
        rows: &[T],
        plot: Option<Plot>,
    ) -> Result<()> {
        let file = format!("{}.csv", name);
        let mut w = csv::Writer::from_path(self.out.join(&file)).with_context(|| format!("writing {file}"))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        report.artifacts.push(file.clone());
        if let Some(p) = plot {
            self.write_plot(report, &file, p)?;
        }
        Ok(())
    }

    /// Register a file already written under `--out`.
    pub fn wrote(&self, report: &mut Report, file: &str, plot: Option<Plot>) -> Result<()> {
        report.artifacts.push(file.to_string());
        if let Some(p) = plot {
            self.write_plot(report, file, p)?;
        }
        Ok(())
    }

    fn write_plot(&self, report: &mut Report, csv: &str, p: Plot) -> Result<()> {
        if !self.gnuplot {
            return Ok(());
        }
        let stem = csv.trim_end_matches(".csv");
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        if p.logx {
            s.push_str("set logscale x\n");
        }
        if p.logy {
            s.push_str("set logscale y\n");
        }
        s.push_str(&format!("set title '{}'\nset terminal pngcairo\nset output '{stem}.png'\n", p.title));
        s.push_str(&format!("plot '{csv}' using {}:{} with linespoints\n", p.x, p.y));
        let file = format!("{stem}.gp");
        fs::write(self.out.join(&file), s).with_context(|| format!("writing {file}"))?;
        report.artifacts.push(file);
        Ok(())
    }

    /// Write the report as `<command>.json` under `--out` and return its text.
    pub fn finish(&self, report: &Report) -> Result<String> {
        let text = serde_json::to_string_pretty(report)?;
        let file = format!("{}.json", Self::stem(&report.command));
        fs::write(self.out.join(&file), format!("{text}\n")).with_context(|| format!("writing {file}"))?;
        Ok(text)
    }
}
