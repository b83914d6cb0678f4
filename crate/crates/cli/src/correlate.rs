use aerotrace_core::correlate::{best_lag, emit_report, join_hourly, lagged_cross_correlation};
use log::info;

use crate::args::CorrelateArgs;
use crate::error::{CliError, CliResult};
use crate::io::read_series;

pub fn run(args: &CorrelateArgs) -> CliResult {
    let vehicles = read_series(&args.vehicles, &args.time_column, &args.vehicles_column)?;
    let pm25 = read_series(&args.pm25, &args.time_column, &args.pm25_column)?;
    let pair = || format!("{} and {}", args.vehicles.display(), args.pm25.display());

    let joined =
        join_hourly(&vehicles, &pm25).map_err(|e| CliError::data(format!("{}: {e}", pair())))?;
    if joined.dropped_vehicles + joined.dropped_pm25 > 0 {
        info!(
            "joined {} consecutive hours; dropped {} vehicle and {} PM2.5 hour(s)",
            joined.len(),
            joined.dropped_vehicles,
            joined.dropped_pm25
        );
    }
    let lags = lagged_cross_correlation(&joined, args.max_lag)
        .map_err(|e| CliError::data(format!("{}: {e}", pair())))?;
    let files =
        emit_report(&joined, &lags, &args.out_dir).map_err(|e| CliError::data(e.to_string()))?;
    match best_lag(&lags) {
        Some(b) => info!("best lag {} h, r = {:.3} over {} hours", b.lag, b.r, b.n),
        None => info!("no lag had a defined correlation; lags table omitted"),
    }
    info!(
        "report in {}",
        files.chart.parent().unwrap_or(&args.out_dir).display()
    );
    Ok(())
}
