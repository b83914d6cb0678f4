use std::path::PathBuf;

use aerotrace_core::calib::{calibration_report, CalibError};
use aerotrace_core::clean::{clean_pipeline, CleanConfig, CleanError};
use aerotrace_core::kv;
use aerotrace_core::series::write_series_csv;
use log::info;

use crate::args::{AnalyzeCommand, CalibrateArgs, CleanArgs};
use crate::error::{CliError, CliResult};
use crate::io::{emit, read_series, write_text};

pub fn run(cmd: &AnalyzeCommand) -> CliResult {
    match cmd {
        AnalyzeCommand::Clean(args) => clean(args),
        AnalyzeCommand::Calibrate(args) => calibrate(args),
    }
}

fn audit_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".audit");
    PathBuf::from(s)
}

fn clean(args: &CleanArgs) -> CliResult {
    let config = CleanConfig {
        hw_error_threshold: args.hw_threshold,
        stddev_k: args.stddev_k,
    };
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let raw = read_series(&args.input, &args.time_column, &args.column)?;
    let outcome = clean_pipeline(&raw, &config).map_err(|e| match e {
        CleanError::InvalidConfig(_) => CliError::usage(e.to_string()),
        _ => CliError::at(&args.input, e),
    })?;

    emit(args.out.as_deref(), |w| {
        write_series_csv(w, "hour_start", "value_scaled", &outcome.series)
    })?;

    let d = outcome.drops;
    let audit = kv::render([
        ("input", args.input.display().to_string()),
        ("column", args.column.clone()),
        ("input_points", raw.len().to_string()),
        ("hw_error_threshold", config.hw_error_threshold.to_string()),
        ("stddev_k", config.stddev_k.to_string()),
        ("dropped_hw_errors", d.hw_errors.to_string()),
        ("dropped_outliers", d.outliers.to_string()),
        ("dropped_resample", d.resample.to_string()),
        ("dropped_normalize", d.normalize.to_string()),
        ("interpolated_hours", outcome.interpolated_hours.to_string()),
        ("output_hours", outcome.series.len().to_string()),
        ("x_min", outcome.params.x_min.to_string()),
        ("x_max", outcome.params.x_max.to_string()),
        ("constant", outcome.params.constant.to_string()),
    ]);
    match &args.out {
        Some(out) => write_text(&audit_path(out), &audit),
        None => {
            eprint!("{audit}");
            Ok(())
        }
    }
}

fn calibrate(args: &CalibrateArgs) -> CliResult {
    let reference = read_series(&args.reference, &args.time_column, &args.column)?;
    let test = read_series(&args.test, &args.time_column, &args.column)?;
    let report =
        calibration_report(&reference, &test, args.window, args.lambda).map_err(|e| match e {
            CalibError::NonPositiveLambda(_) => CliError::usage(e.to_string()),
            _ => CliError::data(format!(
                "{} vs {}: {e}",
                args.reference.display(),
                args.test.display()
            )),
        })?;
    info!(
        "{} aligned points, mape {:.2}%",
        report.n_points, report.mape_pct
    );
    let text = kv::render([
        ("reference", args.reference.display().to_string()),
        ("test", args.test.display().to_string()),
        ("column", args.column.clone()),
    ]) + &report.to_text();
    emit(args.out.as_deref(), |w| w.write_all(text.as_bytes()))
}
