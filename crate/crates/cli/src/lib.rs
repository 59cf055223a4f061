//! `hestenes`: batch verification of the projection identities, with JSON
//! reports and CSV grids for plotting.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hestenes::bell::{BellFunction, Ramp};
use hestenes::report::VerificationReport;
use serde::Serialize;

pub mod suites;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hestenes::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hestenes", version, about = "Verify smooth orthogonal projections and their averages")]
pub struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Directory for CSV grids.
    #[arg(long, global = true)]
    pub dump_dir: Option<PathBuf>,
    /// Order of the rotation-average rule (command default if omitted).
    #[arg(long, global = true)]
    pub so3_order: Option<usize>,
    /// Sample evaluation points at random with this seed instead of on a fixed grid.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Ramp of the bell function.
    #[arg(long, global = true, value_enum, default_value_t = RampArg::Bump)]
    pub ramp: RampArg,
    /// Record wall time in the report (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampArg {
    /// Normalized integral of exp(-1/(1-u²)).
    Bump,
    /// h(1+x)/(h(1+x)+h(1-x)) with h(y) = exp(-1/y).
    ExpQuotient,
}

impl RampArg {
    pub fn bell(self, delta: f64) -> CliResult<BellFunction> {
        let ramp = match self {
            RampArg::Bump => Ramp::default(),
            RampArg::ExpQuotient => Ramp::ExpQuotient,
        };
        Ok(BellFunction::new(delta, ramp)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Projection laws on the line.
    #[command(name = "verify-1d")]
    Verify1d(OneDArgs),
    /// Lattice tiling and decomposition of identity in the plane.
    VerifyLattice(LatticeArgs),
    /// Arc projections and their rotation average on the circle.
    VerifyCircle(CircleArgs),
    /// Latitudinal, patch and ball projections on the sphere.
    VerifySphere(SphereArgs),
    /// The localized continuous Parseval frame on the sphere.
    VerifyFrame(FrameArgs),
    /// Write every plotting grid to --dump-dir.
    DumpProfiles(DumpArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OneDArgs {
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Right end of the adjacent interval used by the sum rule.
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LatticeArgs {
    /// `square`, `hexagon`, or a polygon file (one "x y" vertex per line, counter-clockwise).
    #[arg(long, default_value = "square")]
    pub domain: String,
    /// Lattice generator: `integer`, `hexagonal`, or four numbers "a b c d" (columns (a,c), (b,d)).
    /// Defaults to the lattice matching the domain.
    #[arg(long)]
    pub lattice: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub n: u32,
    #[arg(long, default_value_t = 0.4)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Evaluation grid is `grid × grid`.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CircleArgs {
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Gauss–Legendre panels per smooth piece of the average.
    #[arg(long, default_value_t = 4)]
    pub panels: usize,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SphereArgs {
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.3)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub arc_alpha: f64,
    #[arg(long, default_value_t = 2.2)]
    pub arc_beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub ball_radius: f64,
    /// Evaluation points for the averages.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrameArgs {
    /// Truncation `N` of the local frame.
    #[arg(long = "N", default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps0: f64,
    /// Patch as "theta1,theta2,lon1,lon2,delta".
    #[arg(long)]
    pub patch: Option<String>,
    /// Gauss–Legendre nodes per smooth piece of the cube grid.
    #[arg(long, default_value_t = 24)]
    pub quad_order: usize,
    /// Size of the random function family for the frame-bound scan.
    #[arg(long, default_value_t = 10)]
    pub family: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DumpArgs {
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

/// Caps the rayon pool at `HESTENES_THREADS` workers when set.
pub fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("HESTENES_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("HESTENES_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Usage("HESTENES_THREADS must be positive".into()));
        }
        // A pool that already exists (e.g. in tests) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// CSV files produced by a command: `(file name, contents)`.
pub type Dumps = Vec<(String, String)>;

/// Runs one subcommand, writes the report and dumps, and returns the report.
pub fn run(cli: &Cli) -> CliResult<VerificationReport> {
    let start = Instant::now();
    let (mut report, dumps) = match &cli.command {
        Command::Verify1d(a) => suites::verify_1d(a, cli)?,
        Command::VerifyLattice(a) => suites::verify_lattice(a, cli)?,
        Command::VerifyCircle(a) => suites::verify_circle(a, cli)?,
        Command::VerifySphere(a) => suites::verify_sphere(a, cli)?,
        Command::VerifyFrame(a) => suites::verify_frame(a, cli)?,
        Command::DumpProfiles(a) => {
            if cli.dump_dir.is_none() {
                return Err(CliError::Usage("dump-profiles needs --dump-dir".into()));
            }
            suites::dump_profiles(a, cli)?
        }
    };
    if let Some(dir) = &cli.dump_dir {
        write_dumps(dir, &dumps)?;
        report.value("dumps", dumps.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    }
    if cli.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let json = report.to_json();
    match &cli.report {
        Some(p) => fs::write(p, json + "\n").map_err(|source| CliError::Io { path: p.clone(), source })?,
        None => println!("{json}"),
    }
    Ok(report)
}

fn write_dumps(dir: &Path, dumps: &Dumps) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    for (name, body) in dumps {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|source| CliError::Io { path: p, source })?;
    }
    Ok(())
}

/// Header plus rows, numbers in shortest round-trip form.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |rec: Vec<String>| w.write_record(rec).expect("writing to memory");
    put(header.iter().map(|h| h.to_string()).collect());
    for r in rows {
        put(r.iter().map(|v| v.to_string()).collect());
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
}

pub(crate) fn report_for(command: &str, cli: &Cli, args: &impl Serialize) -> VerificationReport {
    let mut params = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
    if let serde_json::Value::Object(m) = &mut params {
        m.insert("ramp".into(), serde_json::to_value(cli.ramp).unwrap_or_default());
        if let Some(o) = cli.so3_order {
            m.insert("so3_order".into(), o.into());
        }
        if let Some(s) = cli.seed {
            m.insert("seed".into(), s.into());
        }
    }
    VerificationReport::new(command, params)
}
