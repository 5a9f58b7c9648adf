use anyhow::{Context, Result};
use logcert::chains::{build_safe_chain, chain_constant, verify_chain, ChainInstance};
use logcert::geometry::{Arrangement, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::selftest_report;
use crate::args::ChainBuild;
use crate::report::{Ctx, Plot, Report};

const COMMAND: &str = "chain build";

#[derive(Serialize)]
struct InstanceRow {
    instance: usize,
    m: usize,
    k: usize,
    length_ratio: f64,
    min_clearance_ratio: f64,
    passed: bool,
}

fn selftest(ctx: &Ctx) -> Result<Report> {
    let straight = {
        let arr = Arrangement::new(3, Vec::new())?;
        let (x, y) = (Point::from_vec(vec![0.0, 1.0, 2.0]), Point::from_vec(vec![1.0, -1.0, 0.5]));
        let (chain, _) = build_safe_chain(&x, &y, &arr)?;
        (chain.length() - (y - x).norm()).abs() < 1e-12
    };
    let z = ChainInstance::z_axis();
    let (x, y) = z.endpoints();
    let (chain, cert) = build_safe_chain(&x, &y, &z.arrangement)?;
    Ok(selftest_report(
        ctx,
        COMMAND,
        vec![
            ("constants_recursion", [0, 1, 2, 3].map(chain_constant) == [1.0, 6.0, 80.0, 768.0]),
            ("no_flats_gives_the_segment", straight),
            ("z_axis_chain_verifies", verify_chain(&chain, &z.arrangement, cert.clearance_constant, 1000).passed),
            ("z_axis_chain_has_five_vertices", chain.vertices().len() == 5),
        ],
    ))
}

pub fn build(ctx: &Ctx, a: &ChainBuild) -> Result<Report> {
    if ctx.selftest {
        return selftest(ctx);
    }
    let samples = a.samples.unwrap_or(1000);
    let mut report = Report::new(COMMAND, ctx.seed);
    if let Some(n) = a.random {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let (m, k) = (rng.gen_range(3..=6), rng.gen_range(1..=3));
            let inst = ChainInstance::random(&mut rng, m, k)?;
            let (x, y) = inst.endpoints();
            let (chain, cert) = build_safe_chain(&x, &y, &inst.arrangement)?;
            let rep = verify_chain(&chain, &inst.arrangement, cert.clearance_constant, samples);
            rows.push(InstanceRow {
                instance: i,
                m,
                k,
                length_ratio: rep.measured_length / rep.length_bound.max(f64::MIN_POSITIVE),
                min_clearance_ratio: rep.min_clearance_ratio,
                passed: rep.passed,
            });
        }
        let failures = rows.iter().filter(|r| !r.passed).count();
        report.metric("instances", n)?;
        report.metric("failures", failures)?;
        report.metric("worst_length_ratio", rows.iter().map(|r| r.length_ratio).fold(0.0, f64::max))?;
        report.metric(
            "worst_clearance_ratio",
            rows.iter().map(|r| r.min_clearance_ratio).fold(f64::INFINITY, f64::min),
        )?;
        report.check("all_instances_certified", failures == 0);
        ctx.write_rows(&mut report, "chain-build-instances", &rows, None)?;
        return Ok(report);
    }
    let inst = match &a.instance {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading instance {}", p.display()))?;
            serde_json::from_str::<ChainInstance>(&text).with_context(|| format!("parsing instance {}", p.display()))?
        }
        None => ChainInstance::z_axis(),
    };
    let (x, y) = inst.endpoints();
    let (chain, cert) = build_safe_chain(&x, &y, &inst.arrangement)?;
    let rep = verify_chain(&chain, &inst.arrangement, cert.clearance_constant, samples);
    report.metric("flats", inst.arrangement.len())?;
    report.metric("ambient_dim", inst.arrangement.ambient_dim())?;
    report.metric("vertices", chain.vertices().len())?;
    report.metric("verification", &rep)?;
    report.check("length_bound", rep.length_ok);
    report.check("clearance_bound", rep.clearance_ok);
    report.certificate(&cert)?;
    let file = "chain-build.csv";
    let mut w = csv::Writer::from_path(ctx.out.join(file)).with_context(|| format!("writing {file}"))?;
    let header: Vec<String> =
        std::iter::once("index".to_string()).chain((0..chain.ambient_dim()).map(|i| format!("x{i}"))).collect();
    w.write_record(&header)?;
    for (i, v) in chain.vertices().iter().enumerate() {
        w.write_record(std::iter::once(i.to_string()).chain(v.iter().map(|c| c.to_string())))?;
    }
    w.flush()?;
    let plot = Plot { x: 2, y: 3, logx: false, logy: false, title: "chain vertices" };
    ctx.wrote(&mut report, file, Some(plot))?;
    Ok(report)
}
