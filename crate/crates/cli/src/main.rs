//! `vlc-orient`: channel laws, error rates and region tables from a JSON
//! scenario config.
//!
//! Exit codes: 0 success, 2 bad config or arguments, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod emit;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use vlc_orient::distributions::RandomStream;
use vlc_orient::law::SquareChannelLaw;
use vlc_orient::metrics::{ber_curve, outage_of_law};
use vlc_orient::montecarlo::{ks_distance, sample_sq_channel};
use vlc_orient::multi_led::{gain_sweep, joint_regions, region_partition, RegionPartition};

use config::{Grid, ScenarioConfig, ScenarioKind};
use emit::{emit_csv, emit_json, sha256_hex};

const DEFAULT_GRID_POINTS: usize = 512;
const KS_LIMIT: f64 = 0.005;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl From<vlc_orient::Error> for CliError {
    fn from(e: vlc_orient::Error) -> Self {
        match e {
            vlc_orient::Error::Config(msg) => CliError::Config(msg),
            e if e.is_numeric() => CliError::Numeric(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlc-orient", version, about = "Statistics of an indoor optical link with a randomly oriented receiver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Density of the squared channel on a grid over its support.
    Pdf(RunArgs),
    /// Cdf of the squared channel, atom included.
    Cdf(RunArgs),
    /// Average bit error rate of OOK over an SNR grid.
    Ber(RunArgs),
    /// Outage probability over channel thresholds.
    Outage(RunArgs),
    /// Simulates the link and compares it with the analytical law.
    McVerify(RunArgs),
    /// Strongest and second-strongest LED of an array against tilt.
    Regions(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Artifact {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    config: String,
    config_sha256: String,
    scenario: ScenarioKind,
    /// Analytical models behind the artifacts.
    models: Vec<String>,
    warnings: Vec<String>,
    atom_mass: Option<f64>,
    seed: u64,
    samples: Option<usize>,
    grid_points: Option<usize>,
    artifacts: Vec<Artifact>,
}

struct Run {
    cfg: ScenarioConfig,
    manifest: Manifest,
    out: PathBuf,
}

impl Run {
    fn new(command: &'static str, args: &RunArgs) -> Result<Self, CliError> {
        let (mut cfg, bytes) = ScenarioConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.mc.seed = seed;
        }
        if let Some(n) = args.samples {
            cfg.mc.n = n;
        }
        if let Some(n) = args.grid_points {
            cfg.metrics.grid_points = Some(n);
        }
        if cfg.metrics.grid_points.is_some_and(|n| n < 2) {
            return Err(CliError::Config("grid_points must be at least 2".into()));
        }
        let out = args
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: args
                .config
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            config_sha256: sha256_hex(&bytes),
            scenario: cfg.scenario,
            models: Vec::new(),
            warnings: Vec::new(),
            atom_mass: None,
            seed: cfg.mc.seed,
            samples: None,
            grid_points: None,
            artifacts: Vec::new(),
        };
        Ok(Self { cfg, manifest, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(format!("{}{name}", self.cfg.output.prefix))
    }

    fn grid_points(&mut self) -> usize {
        let n = self.cfg.metrics.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
        self.manifest.grid_points = Some(n);
        n
    }

    fn law(&mut self) -> Result<SquareChannelLaw, CliError> {
        let scenario = self.cfg.scenario().ok_or_else(|| {
            CliError::Config("an LED array config only supports `regions`".into())
        })?;
        let law = scenario.law()?;
        self.manifest.models = law.models().to_vec();
        self.manifest.warnings = law.warnings().to_vec();
        self.manifest.atom_mass = Some(law.atom_mass());
        Ok(law)
    }

    fn record(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read back {}: {e}", path.display())))?;
        self.manifest.artifacts.push(Artifact {
            file: path
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, columns: &[(&str, &[f64])]) -> Result<(), CliError> {
        let path = self.path(name);
        emit_csv(columns, &path)?;
        self.record(&path)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        emit_json(value, &path)?;
        self.record(&path)
    }

    fn finish(self) -> Result<(), CliError> {
        let path = self.path(&format!("{}.manifest.json", self.manifest.command));
        emit_json(&self.manifest, &path)
    }
}

/// `n` points from 0 to the top of the support, both ends included.
fn cdf_grid(law: &SquareChannelLaw, n: usize) -> Vec<f64> {
    let hi = law.upper();
    (0..n).map(|k| hi * k as f64 / (n - 1) as f64).collect()
}

fn pdf(args: &RunArgs) -> Result<(), CliError> {
    let mut run = Run::new("pdf", args)?;
    let n = run.grid_points();
    let law = run.law()?;
    if let Some(x0) = law.point_mass_location() {
        return Err(CliError::Config(format!(
            "the channel is deterministic (h² = {x0:e}) and has no density"
        )));
    }
    // cell midpoints keep clear of the support ends, where the density may blow up
    let (lo, hi) = law.support();
    let x: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
        .collect();
    let f = x
        .iter()
        .map(|&x| law.try_pdf_at(x))
        .collect::<vlc_orient::Result<Vec<_>>>()?;
    run.csv("pdf.csv", &[("x", &x), ("pdf", &f)])?;
    run.finish()
}

fn cdf(args: &RunArgs) -> Result<(), CliError> {
    let mut run = Run::new("cdf", args)?;
    let n = run.grid_points();
    let law = run.law()?;
    let x = cdf_grid(&law, n);
    let f = x
        .iter()
        .map(|&x| law.try_cdf_at(x))
        .collect::<vlc_orient::Result<Vec<_>>>()?;
    run.csv("cdf.csv", &[("x", &x), ("cdf", &f)])?;
    run.finish()
}

fn ber(args: &RunArgs) -> Result<(), CliError> {
    let mut run = Run::new("ber", args)?;
    let law = run.law()?;
    let grid = run
        .cfg
        .metrics
        .snr_db
        .clone()
        .unwrap_or(Grid::Range {
            from: 0.0,
            to: 150.0,
            step: 5.0,
        })
        .values("metrics.snr_db")?;
    let curve = ber_curve(&law, &grid)?;
    run.csv("ber.csv", &[("snr_db", &curve.snr_db), ("ber", &curve.ber)])?;
    run.finish()
}

fn outage(args: &RunArgs) -> Result<(), CliError> {
    let mut run = Run::new("outage", args)?;
    let law = run.law()?;
    let thresholds = match run.cfg.metrics.thresholds.clone() {
        Some(g) => g.values("metrics.thresholds")?,
        None => {
            let n = run.grid_points();
            cdf_grid(&law, n)
        }
    };
    let curve = outage_of_law(&law, &thresholds)?;
    run.csv(
        "outage.csv",
        &[("threshold", &curve.thresholds), ("outage", &curve.outage)],
    )?;
    run.finish()
}

#[derive(Debug, Serialize)]
struct Verification {
    ks: f64,
    ks_limit: f64,
    pass: bool,
    zero_fraction: f64,
    atom_mass: f64,
    samples: usize,
    seed: u64,
}

fn mc_verify(args: &RunArgs) -> Result<(), CliError> {
    let mut run = Run::new("mc-verify", args)?;
    let law = run.law()?;
    let scenario = run.cfg.scenario().expect("law() checked the scenario");
    let (n, seed) = (run.cfg.mc.n, run.cfg.mc.seed);
    run.manifest.samples = Some(n);
    let e = sample_sq_channel(&scenario, n, &RandomStream::new(seed, 0))?;
    let ks = ks_distance(&law, &e);
    let report = Verification {
        ks,
        ks_limit: KS_LIMIT,
        pass: ks < KS_LIMIT,
        zero_fraction: e.zero_fraction(),
        atom_mass: law.atom_mass(),
        samples: n,
        seed,
    };
    run.json("mc_verify.json", &report)?;
    run.finish()
}

#[derive(Debug, Serialize)]
struct Region {
    lo: f64,
    hi: f64,
    strongest: usize,
    second: usize,
}

#[derive(Debug, Serialize)]
struct Partition {
    fov: f64,
    regions: Vec<Region>,
}

impl Partition {
    fn new(fov: f64, p: &RegionPartition) -> Self {
        let regions = p
            .labels
            .iter()
            .enumerate()
            .map(|(k, &(strongest, second))| {
                let (lo, hi) = p.bounds(k);
                Region {
                    lo,
                    hi,
                    strongest,
                    second,
                }
            })
            .collect();
        Self { fov, regions }
    }
}

#[derive(Debug, Serialize)]
struct JointRow {
    lo: f64,
    hi: f64,
    first: (usize, usize),
    compare: (usize, usize),
}

#[derive(Debug, Serialize)]
struct RegionReport {
    phi_range: (f64, f64),
    partition: Partition,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<Partition>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    joint: Vec<JointRow>,
}

fn regions(args: &RunArgs) -> Result<(), CliError> {
    let mut run = Run::new("regions", args)?;
    if run.cfg.scenario != ScenarioKind::MultiLed {
        return Err(CliError::Config("`regions` needs a multi_led scenario".into()));
    }
    let block = run.cfg.multi_led.clone().expect("checked on load");
    let array = run.cfg.array(None)?.expect("checked on load");
    let fov = run.cfg.geometry.theta_fov();
    run.manifest.models = vec!["linear LED array, strongest-pair partition".into()];
    let first = region_partition(&array, block.phi_range, block.resolution)?;
    let mut report = RegionReport {
        phi_range: block.phi_range,
        partition: Partition::new(fov, &first),
        compare: None,
        joint: Vec::new(),
    };
    if let Some(other_fov) = block.compare_fov {
        let other = run.cfg.array(Some(other_fov))?.expect("checked on load");
        let second = region_partition(&other, block.phi_range, block.resolution)?;
        report.joint = joint_regions(&first, &second)
            .into_iter()
            .map(|r| JointRow {
                lo: r.lo,
                hi: r.hi,
                first: r.wide,
                compare: r.narrow,
            })
            .collect();
        report.compare = Some(Partition::new(other_fov, &second));
    }
    run.json("regions.json", &report)?;

    let n = run.grid_points();
    let (lo, hi) = block.phi_range;
    let phi: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let gains = gain_sweep(&array, &phi)?;
    let names: Vec<String> = (1..=gains.len()).map(|i| format!("led{i}")).collect();
    let mut columns: Vec<(&str, &[f64])> = vec![("phi_deg", &phi)];
    columns.extend(names.iter().map(String::as_str).zip(gains.iter().map(Vec::as_slice)));
    run.csv("gains.csv", &columns)?;
    run.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pdf(a) => pdf(a),
        Command::Cdf(a) => cdf(a),
        Command::Ber(a) => ber(a),
        Command::Outage(a) => outage(a),
        Command::McVerify(a) => mc_verify(a),
        Command::Regions(a) => regions(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vlc-orient: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
