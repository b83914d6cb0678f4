use std::path::{Path, PathBuf};
use std::sync::Arc;

use aerotrace_core::clock::AcceleratedClock;
use aerotrace_core::kv::{self, KvDoc};
use aerotrace_core::node::{
    run_node_with, FlatFrames, FrameSource, NodeConfig, NodeError, RunPlan, SceneFrames,
    SessionSummary, SimulatedSensor,
};
use aerotrace_core::series::{format_timestamp, Timestamp};
use aerotrace_core::store::{FsBackend, RetryPolicy};
use aerotrace_core::traffic::Scene;
use chrono::Utc;
use log::info;

use crate::args::{NodeRunArgs, STORE_ROOT_ENV};
use crate::error::{CliError, CliResult};
use crate::io::emit;

/// Config keys owned by the CLI rather than the node runtime.
const CLI_KEYS: &[&str] = &["store_root", "scene", "seed"];

/// Grey level of the frames recorded when no scene is configured.
const FLAT_LEVEL: u8 = 96;

struct Setup {
    config: NodeConfig,
    store_root: PathBuf,
    scene: Option<Scene>,
    seed: u64,
}

/// Relative paths in the config file are taken from the file's directory.
fn resolve(config_path: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        return p;
    }
    config_path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or(p.clone(), |d| d.join(&p))
}

fn load(path: &Path) -> CliResult<Setup> {
    let at = |e: &dyn std::fmt::Display| CliError::at(path, e);
    let text = std::fs::read_to_string(path).map_err(|e| at(&e))?;
    let doc = KvDoc::parse(&text).map_err(|e| at(&e))?;
    let strays: Vec<&str> = doc
        .keys()
        .filter(|k| !NodeConfig::KEYS.contains(k) && !CLI_KEYS.contains(k))
        .collect();
    if !strays.is_empty() {
        return Err(at(&format!("unknown key(s): {}", strays.join(", "))));
    }

    let mut config = NodeConfig::from_doc(&doc).map_err(|e| at(&e))?;
    config.buffer_dir = resolve(path, &config.buffer_dir.to_string_lossy());
    let seed = doc.parse_or("seed", 0u64).map_err(|e| at(&e))?;

    // the environment wins over the file so one config can target many stores
    let store_root = match std::env::var_os(STORE_ROOT_ENV) {
        Some(root) => PathBuf::from(root),
        None => doc
            .get("store_root")
            .map(|v| resolve(path, v))
            .ok_or_else(|| at(&format!("no store: set `store_root` or {STORE_ROOT_ENV}")))?,
    };

    let scene = match doc.get("scene") {
        None => None,
        Some(v) => {
            let scene_path = resolve(path, v);
            let scene = Scene::load(&scene_path)
                .map_err(|e| CliError::at(&scene_path, e))?
                .with_seed(seed);
            for (key, configured, actual) in [
                ("frame_width", &mut config.frame_width, scene.width),
                ("frame_height", &mut config.frame_height, scene.height),
            ] {
                if doc.get(key).is_none() {
                    *configured = actual;
                } else if *configured != actual {
                    return Err(at(&format!(
                        "{key}={configured} but the scene is {actual} pixels"
                    )));
                }
            }
            Some(scene)
        }
    };
    config.validate().map_err(|e| at(&e))?;
    Ok(Setup {
        config,
        store_root,
        scene,
        seed,
    })
}

fn summary_text(node_id: &str, start: Timestamp, s: &SessionSummary) -> String {
    kv::render([
        ("node_id", node_id.to_string()),
        ("start", format_timestamp(start)),
        ("samples_written", s.samples_written.to_string()),
        ("samples_dropped", s.samples_dropped.to_string()),
        ("frames_written", s.frames_written.to_string()),
        ("frames_dropped", s.frames_dropped.to_string()),
        ("chunks_sealed", s.chunks_sealed.to_string()),
        ("csv_sealed", s.csv_sealed.to_string()),
        ("restart_enqueued", s.restart_enqueued.to_string()),
        ("enqueued", s.enqueued.to_string()),
        ("queue_overflows", s.queue_overflows.to_string()),
        ("confirmed", s.confirmed.to_string()),
        ("failed", s.failed.to_string()),
        ("files_deleted", s.files_deleted.to_string()),
    ])
}

pub fn run(args: &NodeRunArgs) -> CliResult {
    let setup = load(&args.config)?;
    let start = args
        .start
        .unwrap_or_else(|| Timestamp::from_timestamp(Utc::now().timestamp(), 0).expect("in range"));
    let config = &setup.config;
    let frames: Box<dyn FrameSource> = match setup.scene {
        Some(scene) => Box::new(SceneFrames::new(scene, start)),
        None => Box::new(FlatFrames::new(
            config.frame_width,
            config.frame_height,
            FLAT_LEVEL,
        )),
    };
    info!(
        "node {}: buffer {}, store {}",
        config.node_id,
        config.buffer_dir.display(),
        setup.store_root.display()
    );
    let summary = run_node_with(
        config,
        Box::new(SimulatedSensor::new(setup.seed)),
        frames,
        Arc::new(FsBackend::new(&setup.store_root)),
        Arc::new(AcceleratedClock::new(start, args.accel)),
        RunPlan {
            start,
            duration: args.duration,
            retry: RetryPolicy::default(),
        },
    )
    .map_err(|e| match e {
        NodeError::Config(e) => CliError::at(&args.config, e),
        other => CliError::data(other.to_string()),
    })?;

    let text = summary_text(&config.node_id, start, &summary);
    emit(None, |w| w.write_all(text.as_bytes()))?;
    if summary.failed > 0 {
        return Err(CliError::backend(format!(
            "{} upload(s) failed against {}; the files stay in {} for the next run",
            summary.failed,
            setup.store_root.display(),
            config.buffer_dir.display()
        )));
    }
    Ok(())
}
