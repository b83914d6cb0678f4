use std::hint::black_box;

use aerotrace_core::calib::{dtw, hp_filter, DEFAULT_LAMBDA};
use aerotrace_core::correlate::{join_hourly, lagged_cross_correlation};
use aerotrace_core::sensor::{decode_pms7003_frame, encode_pms7003_frame, Pms7003Frame};
use aerotrace_core::series::TimeSeries;
use aerotrace_core::traffic::{hungarian, CountParams, CountingPipeline, Scene};
use chrono::{Duration, TimeZone, Utc};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FOUR_LANES: &str = include_str!("../../core/tests/fixtures/scenes/four_lanes.scene");

fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x = 20.0;
    (0..n)
        .map(|_| {
            x += rng.random_range(-1.0..1.0);
            x
        })
        .collect()
}

fn codec(c: &mut Criterion) {
    let frame = Pms7003Frame {
        pm2_5_std: 35,
        pm2_5_atm: 33,
        count_0_3um: 4120,
        ..Default::default()
    };
    let bytes = encode_pms7003_frame(&frame);
    c.bench_function("pms7003_encode", |b| {
        b.iter(|| encode_pms7003_frame(black_box(&frame)))
    });
    c.bench_function("pms7003_decode", |b| {
        b.iter(|| decode_pms7003_frame(black_box(&bytes)))
    });
}

fn dtw_scaling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("dtw");
    for n in [64, 256, 1024] {
        let a = random_walk(&mut rng, n);
        let b = random_walk(&mut rng, n);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| dtw(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn hungarian_scaling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("hungarian");
    for n in [8, 32, 128] {
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| hungarian(black_box(&cost)))
        });
    }
    group.finish();
}

fn hp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("hp_filter");
    for n in [360, 8640] {
        let y = random_walk(&mut rng, n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| hp_filter(black_box(&y), DEFAULT_LAMBDA).unwrap())
        });
    }
    group.finish();
}

fn counting(c: &mut Criterion) {
    let scene = Scene::parse(FOUR_LANES).unwrap();
    let line = scene.script_line().unwrap();
    let frames: Vec<_> = scene.frames().collect();
    let start = scene.start.unwrap();
    let step = Duration::nanoseconds(1_000_000_000 / scene.fps as i64);
    let mut group = c.benchmark_group("counting");
    group.sample_size(10);
    group.throughput(Throughput::Elements(frames.len() as u64));
    group.bench_function("four_lanes_324x182", |b| {
        b.iter(|| {
            let mut p =
                CountingPipeline::new(scene.width, scene.height, line, CountParams::default());
            for (i, f) in frames.iter().enumerate() {
                p.push(f, start + step * i as i32).unwrap();
            }
            p.finish().events.len()
        })
    });
    group.finish();
}

fn lags(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t0 = Utc.with_ymd_and_hms(2026, 3, 2, 0, 0, 0).unwrap();
    let hourly = |v: Vec<f64>| TimeSeries::from_values(t0, Duration::hours(1), &v).unwrap();
    let joined = join_hourly(
        &hourly(random_walk(&mut rng, 720)),
        &hourly(random_walk(&mut rng, 720)),
    )
    .unwrap();
    c.bench_function("lagged_correlation_720h", |b| {
        b.iter(|| lagged_cross_correlation(black_box(&joined), 24).unwrap())
    });
}

criterion_group!(
    benches,
    codec,
    dtw_scaling,
    hungarian_scaling,
    hp,
    counting,
    lags
);
criterion_main!(benches);
