//! JSON run configuration and the flag-over-config merge.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{
    Bootstrap, Calibrate, Campanato, ChainBuild, Check, Fitmod, Jensen, Mass, Mollify, Propagate, Sweep, Transfer,
    Verify,
};

/// Thresholds of the command-level assertions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed shortfall of a fitted exponent below its target.
    pub exponent_slack: f64,
    /// Allowed excess of the budget slope over `-gamma`.
    pub slope_slack: f64,
    /// Allowed exponent change under one grid refinement.
    pub refinement: f64,
    /// Allowed distance of a fitted modulus exponent from the expected one.
    pub fit: f64,
    /// Round-trip error of the blowup charts.
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { exponent_slack: 0.1, slope_slack: 0.05, refinement: 0.05, fit: 0.1, roundtrip: 1e-12 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub build: Option<ChainBuild>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogmodSection {
    pub propagate: Option<Propagate>,
    pub verify: Option<Verify>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupSection {
    pub check: Option<Check>,
    pub calibrate: Option<Calibrate>,
    pub transfer: Option<Transfer>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    pub sweep: Option<Sweep>,
    pub bootstrap: Option<Bootstrap>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabSection {
    pub jensen: Option<Jensen>,
    pub mass: Option<Mass>,
    pub mollify: Option<Mollify>,
    pub campanato: Option<Campanato>,
    pub fitmod: Option<Fitmod>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub tolerances: Tolerances,
    pub chain: ChainSection,
    pub logmod: LogmodSection,
    pub blowup: BlowupSection,
    pub budget: BudgetSection,
    pub lab: LabSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if v.is_object() => overlay(slot, v),
                    _ if v.is_null() => {}
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) if !t.is_null() => *b = t,
        _ => {}
    }
}

/// `flags` with every unset field taken from `block`.
pub fn merge<T: Serialize + DeserializeOwned + Clone>(flags: &T, block: Option<&T>) -> Result<T> {
    let Some(block) = block else { return Ok(flags.clone()) };
    let mut base = serde_json::to_value(block)?;
    overlay(&mut base, serde_json::to_value(flags)?);
    Ok(serde_json::from_value(base)?)
}
