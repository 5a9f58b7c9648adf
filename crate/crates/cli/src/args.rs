//! Command-line surface. Every parameter struct doubles as its config block,
//! so its fields are optional and defaults live in the command.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "logcert", version, about = "Certified log-modulus constants and grid experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Directory for reports and curves; artifact paths are relative to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; explicit flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw (default 1).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides LOGMOD_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run the built-in examples of the command instead of the experiment.
    #[arg(long, global = true)]
    pub selftest: bool,
    /// Also write a gnuplot script next to every CSV curve.
    #[arg(long = "gnuplot-script", global = true)]
    pub gnuplot_script: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Safe polygonal chains around affine flats.
    Chain {
        #[command(subcommand)]
        cmd: ChainCmd,
    },
    /// Local-to-global propagation of log moduli.
    Logmod {
        #[command(subcommand)]
        cmd: LogmodCmd,
    },
    /// Blowup charts and modulus transfer.
    Blowup {
        #[command(subcommand)]
        cmd: BlowupCmd,
    },
    /// Approximation budget calculus.
    Budget {
        #[command(subcommand)]
        cmd: BudgetCmd,
    },
    /// Grid experiments on sampled fields.
    Lab {
        #[command(subcommand)]
        cmd: LabCmd,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChainCmd {
    /// Build and verify a safe chain.
    Build(ChainBuild),
}

#[derive(Debug, Subcommand)]
pub enum LogmodCmd {
    /// Certify a global constant from a local bound.
    Propagate(Propagate),
    /// Certify, then test the bound on sampled pairs of a synthetic metric.
    Verify(Verify),
}

#[derive(Debug, Subcommand)]
pub enum BlowupCmd {
    /// Chart round trips and the lift Jacobian bound.
    Check(Check),
    /// Route constants against the graph oracle.
    Calibrate(Calibrate),
    /// Base constant of a field pulled back to the blowup of C^2.
    Transfer(Transfer),
}

#[derive(Debug, Subcommand)]
pub enum BudgetCmd {
    /// Weak log-continuity envelope over a range of separations.
    Sweep(Sweep),
    /// Iterate the exponent map until it passes a target.
    Bootstrap(Bootstrap),
}

#[derive(Debug, Subcommand)]
pub enum LabCmd {
    /// Sup-minus-value gap over dyadic scales.
    Jensen(Jensen),
    /// Lelong ratio sweep over radii.
    Mass(Mass),
    /// Mollification error and curvature defect over radii.
    Mollify(Mollify),
    /// Conformal geodesic distance and its log decay.
    Campanato(Campanato),
    /// Fit a log-power modulus of continuity.
    Fitmod(Fitmod),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainBuild {
    /// JSON instance `{arrangement, x, y}`; the z-axis instance of R^3 when absent.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Check this many random instances instead.
    #[arg(long)]
    pub random: Option<usize>,
    /// Samples per segment when verifying.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Ball,
    Cube,
    /// Unit ball minus the last-two-coordinates-zero flat.
    BallMinusFlat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Scaled,
    Unit,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalArgs {
    /// Domain of the pairs.
    #[arg(long)]
    pub domain: Option<DomainKind>,
    /// Real dimension of the domain.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Radius of the domain.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Quasi-triangle constant B.
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Constant of the local hypothesis.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Local exponent alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Clearance exponent D.
    #[arg(long = "d")]
    pub d: Option<f64>,
    /// Scaled needs D > 1; unit uses D = 1 and loses one in the exponent.
    #[arg(long)]
    pub variant: Option<VariantArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Propagate {
    #[command(flatten)]
    pub local: LocalArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricPreset {
    Zero,
    /// Log profile around the center point.
    Profile,
    Scaled,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Verify {
    #[command(flatten)]
    pub local: LocalArgs,
    /// Synthetic pseudometric to test.
    #[arg(long)]
    pub metric: Option<MetricPreset>,
    /// JSON synthetic metric; overrides `--metric`.
    #[arg(long)]
    pub metric_file: Option<PathBuf>,
    /// Number of sampled pairs.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Add a pair whose distance exceeds the certified bound.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plant: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelArgs {
    /// Ambient complex dimension n.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Codimension q of the center.
    #[arg(long = "q")]
    pub q: Option<usize>,
    /// Radius of the domain.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Check {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Random points for the round trip.
    #[arg(long)]
    pub points: Option<usize>,
    /// Random rays for the Jacobian bound.
    #[arg(long)]
    pub jacobian_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibrate {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Dijkstra sources for the derivative and three-hop routes.
    #[arg(long)]
    pub sources: Option<usize>,
    /// Random rays for the Jacobian bound.
    #[arg(long)]
    pub jacobian_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Transfer {
    #[command(flatten)]
    pub source: FieldArgs,
    /// Radius of the domain.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Exponent M of the pulled-back modulus.
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Pullback constant; measured on the oracle grid when absent.
    #[arg(long)]
    pub c_pullback: Option<f64>,
    /// Random pairs for the verification.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Dijkstra sources for the measured pullback constant.
    #[arg(long)]
    pub sources: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteArg {
    Direct,
    Improved,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    /// Complex dimension.
    #[arg(long = "n")]
    pub n: Option<u32>,
    /// Target exponent gamma in (0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Sup-norm bound B of the potential.
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Schedule exponent D.
    #[arg(long = "d")]
    pub d: Option<f64>,
    /// Smallest t of the sweep.
    #[arg(long)]
    pub t_lo: Option<f64>,
    /// Largest t of the sweep.
    #[arg(long)]
    pub t_hi: Option<f64>,
    /// Rule that picks m from t.
    #[arg(long)]
    pub route: Option<RouteArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bootstrap {
    /// Initial exponent.
    #[arg(long)]
    pub start: Option<f64>,
    /// Exponent to exceed.
    #[arg(long)]
    pub target: Option<f64>,
    /// Steps allowed before the check fails.
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `max(log|z|, -1)`.
    ClippedLog,
    /// `log|z|`.
    Log,
    /// `max(log|z|, -1) - |z|^2`.
    Kinked,
    /// `min(1, |log|z||^-power)`.
    LogPower,
    /// `scale (1 + |log|z||)^(-2 power)`.
    RadialLog,
    /// `scale x + y`.
    Linear,
    Constant,
}

/// Where a lab field comes from: a file, or a profile sampled on a square.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldArgs {
    /// CSV or GF01 binary field.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Analytic profile to sample.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Nodes per side of the profile grid.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Half side of the profile square centered at 0.
    #[arg(long)]
    pub half: Option<f64>,
    /// Exponent parameter of the profile.
    #[arg(long)]
    pub power: Option<f64>,
    /// Amplitude parameter of the profile.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Jensen {
    #[command(flatten)]
    pub source: FieldArgs,
    /// Half side of the inner square K.
    #[arg(long)]
    pub inner: Option<f64>,
    /// Number of dyadic scales `h, 2h, 4h, ...`.
    #[arg(long)]
    pub scales: Option<usize>,
    /// Exponent the fit must reach.
    #[arg(long)]
    pub target: Option<f64>,
    /// Plant salt noise on this fraction of the nodes.
    #[arg(long)]
    pub salt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Bounded,
    Positive,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mass {
    /// Analytic profile to sample.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Exponent parameter of the profile.
    #[arg(long)]
    pub power: Option<f64>,
    /// Amplitude parameter of the profile.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Center of the balls, as `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub at: Option<Vec<f64>>,
    /// Radii of the sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Nodes per side of each per-radius grid.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Verdict the sweep must reach.
    #[arg(long)]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Bump,
    Flat,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mollify {
    /// Analytic profile to sample.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Exponent parameter of the profile.
    #[arg(long)]
    pub power: Option<f64>,
    /// Amplitude parameter of the profile.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Center of the balls, as `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub at: Option<Vec<f64>>,
    /// Radii of the sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Nodes per side of each per-radius grid.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Curvature offset theta.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Mollifier kernel.
    #[arg(long)]
    pub kernel: Option<KernelArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Campanato {
    #[command(flatten)]
    pub source: FieldArgs,
    /// Curvature offset theta.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Positivity margin added to the conformal factor.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Target exponent M.
    #[arg(long = "m")]
    pub m: Option<f64>,
    /// Constant of the assumed `log^(-2M)` modulus.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Number of dyadic radii.
    #[arg(long)]
    pub scales: Option<usize>,
    /// Repeat on a grid with half the spacing and compare exponents.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fitmod {
    #[command(flatten)]
    pub source: FieldArgs,
    /// Number of dyadic separations `2h, 4h, ...`.
    #[arg(long)]
    pub separations: Option<usize>,
    /// Exponent the fit should reproduce.
    #[arg(long)]
    pub expect: Option<f64>,
}
