use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aerotrace_core::fseq::FseqReader;
use aerotrace_core::traffic::{
    count_video, count_videos, CountLine, CountParams, Direction, Scene, TrafficError,
};
use log::info;

use crate::args::{CountArgs, SynthArgs};
use crate::error::{CliError, CliResult};
use crate::io::{emit, write_text};

/// Expands directories to their `.fseq` files, sorted by name.
fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| CliError::at(p, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "fseq"))
                .collect();
            if found.is_empty() {
                return Err(CliError::at(p, "no .fseq files"));
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn traffic_error(path: &Path, e: TrafficError) -> CliError {
    match e {
        TrafficError::DegenerateLine => CliError::usage(e.to_string()),
        _ => CliError::at(path, e),
    }
}

pub fn count(args: &CountArgs) -> CliResult {
    let line = CountLine::parse(&args.line)
        .map_err(|e| CliError::usage(format!("--line `{}`: {e}", args.line)))?;
    let mut params = CountParams::default();
    if let Some(a) = args.min_area {
        params.min_area = a;
    }
    let files = collect_inputs(&args.input)?;
    // open every header up front so a bad file is reported by name
    for f in &files {
        FseqReader::open(f).map_err(|e| CliError::at(f, e))?;
    }

    let counts = match (&files[..], args.start) {
        ([single], start) => {
            count_video(single, &line, &params, start).map_err(|e| traffic_error(single, e))?
        }
        (_, Some(_)) => {
            return Err(CliError::usage(
                "--start applies to a single input file; chunk files carry their own start",
            ))
        }
        (many, None) => {
            count_videos(many, &line, &params).map_err(|e| traffic_error(&many[0], e))?
        }
    };
    let (up, down): (u64, u64) = counts
        .rows()
        .iter()
        .fold((0, 0), |(u, d), r| (u + r.up, d + r.down));
    info!(
        "{} file(s), {} hour(s): {up} up, {down} down",
        files.len(),
        counts.rows().len()
    );
    emit(args.out.as_deref(), |w| counts.write_csv(w))
}

pub fn synth(args: &SynthArgs) -> CliResult {
    let mut scene = Scene::load(&args.script).map_err(|e| CliError::at(&args.script, e))?;
    if let Some(seed) = args.seed {
        scene = scene.with_seed(seed);
    }
    if let Some(fps) = args.fps {
        if fps == 0 {
            return Err(CliError::usage("--fps must be at least 1"));
        }
        scene = scene.with_fps(fps);
    }
    // resolve the line before rendering so a bad request writes nothing
    let truth = match &args.truth {
        Some(path) => {
            let line = scene
                .script_line()
                .map_err(|e| CliError::at(&args.script, e))?;
            Some((path, scene.ground_truth(&line)))
        }
        None => None,
    };
    let header = scene
        .write_fseq(&args.out)
        .map_err(|e| CliError::at(&args.out, e))?;
    info!(
        "{}: {} frames of {}x{} at {} fps",
        args.out.display(),
        header.frame_count,
        header.width,
        header.height,
        header.fps
    );
    if let Some((path, crossings)) = truth {
        let mut csv = String::from("object,t_s,direction\n");
        for c in &crossings {
            let dir = match c.direction {
                Direction::Up => "up",
                Direction::Down => "down",
            };
            let _ = writeln!(csv, "{},{:.3},{dir}", c.object, c.t);
        }
        write_text(path, &csv)?;
    }
    Ok(())
}
