use std::path::PathBuf;
use std::time::Duration;

use aerotrace_core::series::Timestamp;
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

pub const STORE_ROOT_ENV: &str = "AEROTRACE_STORE_ROOT";

#[derive(Debug, Parser)]
#[command(
    name = "aerotrace",
    version,
    about = "Air-quality and traffic telemetry: node simulation, blob store, cleaning, calibration, vehicle counting, correlation",
    after_help = "Exit status: 0 ok, 1 usage error, 2 data error, 3 store backend error."
)]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulated node: sensor sampling, video chunking, uploads.
    #[command(subcommand)]
    Node(NodeCommand),
    /// Inspect and maintain a filesystem blob store.
    #[command(subcommand)]
    Store(StoreCommand),
    /// PM2.5 cleaning and sensor calibration.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Count vehicles crossing a line in FSEQ video.
    Count(CountArgs),
    /// Lagged correlation of hourly vehicle counts against PM2.5.
    Correlate(CorrelateArgs),
    /// Render a scripted synthetic traffic scene to FSEQ.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum NodeCommand {
    /// Run the node loops for a fixed span of (virtual) time.
    Run(NodeRunArgs),
}

#[derive(Debug, Args)]
pub struct NodeRunArgs {
    /// Node config file (flat key=value).
    #[arg(long)]
    pub config: PathBuf,
    /// Virtual time to run, e.g. `1h` or `90s`.
    #[arg(long, value_parser = humantime::parse_duration)]
    pub duration: Duration,
    /// Virtual seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub accel: f64,
    /// Virtual start time (RFC 3339); defaults to now.
    #[arg(long, value_parser = timestamp)]
    pub start: Option<Timestamp>,
}

#[derive(Debug, Args)]
pub struct StoreRoot {
    /// Store root directory.
    #[arg(long, env = STORE_ROOT_ENV)]
    pub root: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum StoreCommand {
    /// List objects, one per line: container/key, size, tier, upload time.
    Ls {
        #[command(flatten)]
        root: StoreRoot,
        /// Only this node's container.
        #[arg(long)]
        node: Option<String>,
    },
    /// Copy one object's bytes to --out or stdout.
    Get {
        #[command(flatten)]
        root: StoreRoot,
        /// Container, which is the node id.
        #[arg(long)]
        node: String,
        /// Object key, e.g. `video/<file>` or `csv/<file>`.
        #[arg(long)]
        key: String,
        /// Destination file; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Move objects older than --archive-after to the Archive tier.
    TierSweep {
        #[command(flatten)]
        root: StoreRoot,
        /// Only this node's container; all containers otherwise.
        #[arg(long)]
        node: Option<String>,
        /// Age past which Cool objects move to Archive; an object exactly
        /// this old stays Cool.
        #[arg(long, default_value = "30days", value_parser = humantime::parse_duration)]
        archive_after: Duration,
        /// Reference time (RFC 3339); defaults to now.
        #[arg(long, value_parser = timestamp)]
        now: Option<Timestamp>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Hardware-error filter, outlier removal, hourly resampling, min-max scaling.
    Clean(CleanArgs),
    /// Compare a test sensor against a reference sensor.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Sensor CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "pm2_5")]
    pub column: String,
    #[arg(long, default_value = "timestamp")]
    pub time_column: String,
    /// Output CSV `hour_start,value_scaled`. The audit goes to `<out>.audit`.
    /// Without it the CSV goes to stdout and the audit to stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Readings above this are dropped as hardware errors.
    #[arg(long, default_value_t = aerotrace_core::clean::DEFAULT_HW_ERROR_THRESHOLD)]
    pub hw_threshold: f64,
    /// Outlier band in standard deviations.
    #[arg(long, default_value_t = aerotrace_core::clean::DEFAULT_STDDEV_K)]
    pub stddev_k: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Reference sensor CSV.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Sensor under test CSV.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "pm2_5")]
    pub column: String,
    #[arg(long, default_value = "timestamp")]
    pub time_column: String,
    /// Moving-average window.
    #[arg(long, default_value = "10m", value_parser = humantime::parse_duration)]
    pub window: Duration,
    /// Hodrick-Prescott smoothing parameter.
    #[arg(long, default_value_t = aerotrace_core::calib::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Report file (flat key=value); stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    /// FSEQ files or directories of them. Several chunks are counted as
    /// one stream where they are contiguous.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Count line `x1,y1,x2,y2` in pixels.
    #[arg(long)]
    pub line: String,
    /// Stream start (RFC 3339) for a single file not named `<node>_YYYYMMDD_HHMMSS.fseq`.
    #[arg(long, value_parser = timestamp)]
    pub start: Option<Timestamp>,
    /// Smallest foreground blob, in pixels, that counts as a vehicle.
    #[arg(long)]
    pub min_area: Option<usize>,
    /// Output CSV `hour_start,count_up,count_down,count_total`; stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Hourly vehicle counts CSV.
    #[arg(long)]
    pub vehicles: PathBuf,
    #[arg(long, default_value = "count_total")]
    pub vehicles_column: String,
    /// Hourly PM2.5 CSV.
    #[arg(long)]
    pub pm25: PathBuf,
    #[arg(long, default_value = "value_scaled")]
    pub pm25_column: String,
    /// Time column of both inputs.
    #[arg(long, default_value = "hour_start")]
    pub time_column: String,
    /// Largest PM2.5 delay, in hours, to test.
    #[arg(long, default_value_t = 6)]
    pub max_lag: usize,
    /// Receives chart.svg, joined.csv and lags.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene script.
    #[arg(long)]
    pub script: PathBuf,
    /// FSEQ output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the scripted line crossings as CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Overrides the script's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the script's frame rate.
    #[arg(long)]
    pub fps: Option<u8>,
}

fn timestamp(text: &str) -> Result<Timestamp, String> {
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("`{text}` is not an RFC 3339 time: {e}"))
}

fn positive_f64(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("`{text}` is not a positive number")),
    }
}
