use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eprsim_core::ensemble::{Model, Sampler, Wing};
use eprsim_core::Direction;

use crate::output::Format;

/// Spin-pair correlation models: analytic tables, Monte Carlo runs, CHSH
/// evaluation and a three-process locality harness.
///
/// Angles on the command line are in degrees. Directions are given as
/// `theta,phi`: polar angle from +z, then azimuth from +x.
#[derive(Debug, Parser)]
#[command(name = "eprsim", version)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form correlations and coincidence tables over a sweep of the relative angle.
    Analytic(AnalyticArgs),
    /// Monte Carlo pair events plus a correlation summary.
    Simulate(SimulateArgs),
    /// CHSH combination at fixed angles or maximized over a planar grid.
    Chsh(ChshArgs),
    /// Emit particles to two detectors.
    NetSource(NetSourceArgs),
    /// Measure incoming particles at one wing and forward results to the collector.
    NetDetector(NetDetectorArgs),
    /// Join detector results by pair id and report the correlation.
    NetCollector(NetCollectorArgs),
    /// Summary table of the model's reference quantities.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,

    /// Write records here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Entangled,
    Disentangled,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Entangled => Model::Entangled,
            ModelArg::Disentangled => Model::Disentangled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableSel {
    Entangled,
    Disentangled,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Raw,
    PerPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WingArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

impl From<WingArg> for Wing {
    fn from(w: WingArg) -> Wing {
        match w {
            WingArg::A => Wing::A,
            WingArg::B => Wing::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChshModel {
    Entangled,
    /// Disentangled pair with planar axes, in the normalization given by --normalization.
    Disentangled,
    /// Local hidden-variable integral with shared isotropic axis.
    Lhv,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// Which coincidence tables to include.
    #[arg(long, value_enum, default_value = "both")]
    pub model: TableSel,
    /// First relative angle.
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    /// Last relative angle, inclusive.
    #[arg(long, default_value_t = 180.0)]
    pub to: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Normalization of the disentangled table columns.
    #[arg(long, value_enum, default_value = "per-pairs")]
    pub normalization: NormArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "entangled")]
    pub model: ModelArg,
    /// isotropic | planar | fixed:THETA,PHI
    #[arg(long, default_value = "isotropic")]
    pub sampler: String,
    #[arg(long, default_value_t = 100_000)]
    pub pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Planar settings a = 0, b = THETA_AB. Conflicts with --setting-a/--setting-b.
    #[arg(long, conflicts_with_all = ["setting_a", "setting_b"])]
    pub theta_ab: Option<f64>,
    /// Wing A setting as THETA,PHI.
    #[arg(long, allow_hyphen_values = true)]
    pub setting_a: Option<String>,
    /// Wing B setting as THETA,PHI.
    #[arg(long, allow_hyphen_values = true)]
    pub setting_b: Option<String>,
    /// Keep each pair with this probability before estimating.
    #[arg(long)]
    pub thin: Option<f64>,
    /// Omit the hidden axis and branch columns.
    #[arg(long)]
    pub detector_view: bool,
    /// Write only the summary record to the output.
    #[arg(long)]
    pub summary_only: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ChshArgs {
    #[arg(long, value_enum, default_value = "entangled")]
    pub model: ChshModel,
    #[arg(long, value_enum, default_value = "per-pairs")]
    pub normalization: NormArg,
    /// Planar angles A,A',B,B'. Default 0,90,45,135.
    #[arg(long, allow_hyphen_values = true)]
    pub angles: Option<String>,
    /// Maximize |S| over this many planar angles per arm instead.
    #[arg(long, conflicts_with = "angles")]
    pub scan: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct NetSourceArgs {
    /// Detector endpoints HOST:PORT, wing A first then wing B.
    #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
    pub connect: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    pub pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "isotropic")]
    pub sampler: String,
}

#[derive(Debug, Args)]
pub struct NetDetectorArgs {
    #[arg(long, value_enum)]
    pub wing: WingArg,
    /// THETA,PHI
    #[arg(long, allow_hyphen_values = true)]
    pub setting: String,
    /// Address to accept the source on; the bound address is the first stdout line.
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
    /// Collector endpoint HOST:PORT.
    #[arg(long)]
    pub connect: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Save the raw inbound byte stream to this file.
    #[arg(long)]
    pub capture: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NetCollectorArgs {
    /// The bound address is the first stdout line.
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
    /// Pairs the source will emit; enables the missing-message count.
    #[arg(long)]
    pub pairs: Option<u64>,
    /// Join wing A pair i with wing B pair i+1.
    #[arg(long)]
    pub mismatch: bool,
    /// Unmatched results held before the oldest becomes an orphan.
    #[arg(long, default_value_t = 1 << 20)]
    pub capacity: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Pairs per Monte Carlo row; 0 skips them.
    #[arg(long, default_value_t = 100_000)]
    pub pairs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Collects every invalid field before reporting.
#[derive(Debug, Default)]
pub struct Problems(pub Vec<String>);

impl Problems {
    pub fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    pub fn check<T>(&mut self, field: &str, r: Result<T, String>) -> Option<T> {
        r.map_err(|e| self.push(field, e)).ok()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {s:?}"));
    }
    parts
        .iter()
        .map(|p| match p.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("{p:?} is not a finite number")),
        })
        .collect()
}

/// `THETA,PHI` in degrees.
pub fn parse_direction(s: &str) -> Result<Direction, String> {
    let v = numbers(s, 2)?;
    Ok(Direction::from_polar_deg(v[0], v[1]))
}

pub fn parse_sampler(s: &str) -> Result<Sampler, String> {
    match s {
        "isotropic" => Ok(Sampler::Isotropic),
        "planar" => Ok(Sampler::PlanarXY),
        _ => match s.strip_prefix("fixed:") {
            Some(rest) => parse_direction(rest).map(Sampler::Fixed),
            None => Err(format!("{s:?} is not isotropic, planar or fixed:THETA,PHI")),
        },
    }
}

/// Four planar angles in degrees.
pub fn parse_angles(s: &str) -> Result<[f64; 4], String> {
    let v = numbers(s, 4)?;
    Ok([v[0], v[1], v[2], v[3]])
}

pub fn sampler_name(s: &Sampler) -> String {
    match s {
        Sampler::Isotropic => "isotropic".into(),
        Sampler::PlanarXY => "planar".into(),
        Sampler::Fixed(d) => format!("fixed:{:.6},{:.6}", d.polar_angle().to_degrees(), d.azimuth().to_degrees()),
    }
}
