use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use paraloq::adc0808::{quantize, sar_convert, AdcConfig};
use paraloq::logstore::{parse_csv, to_csv_string};
use paraloq::psychro::reading;
use paraloq::{run_acquisition, ChannelSetup, PsychroConfig, RunConfig, Stimulus};

fn converter(c: &mut Criterion) {
    let cfg = AdcConfig::default();
    let volts: Vec<f64> = (0..1024).map(|i| i as f64 * 5.0 / 1024.0).collect();
    let mut group = c.benchmark_group("adc");
    group.throughput(Throughput::Elements(volts.len() as u64));
    group.bench_function("quantize", |b| {
        b.iter(|| {
            for &v in &volts {
                black_box(quantize(black_box(v), &cfg).unwrap());
            }
        })
    });
    group.bench_function("sar_convert", |b| {
        b.iter(|| {
            for &v in &volts {
                black_box(sar_convert(black_box(v), 0, 640_000.0, &cfg).unwrap());
            }
        })
    });
    group.finish();
}

fn psychrometrics(c: &mut Criterion) {
    let cfg = PsychroConfig::default();
    c.bench_function("psychro/reading", |b| {
        b.iter(|| reading(black_box(19.92858), black_box(18.02167), &cfg).unwrap())
    });
}

fn sine_run(duration_s: f64) -> RunConfig {
    RunConfig {
        duration_s,
        dry: ChannelSetup {
            stimulus: Stimulus::Sine {
                amplitude_c: 5.0,
                freq_hz: 0.05,
                offset_c: 25.0,
            },
            ..ChannelSetup::constant(0.0)
        },
        ..RunConfig::default()
    }
}

fn acquisition(c: &mut Criterion) {
    let cfg = sine_run(600.0);
    let mut group = c.benchmark_group("acquisition");
    group.throughput(Throughput::Elements(cfg.tick_count()));
    group.sample_size(20);
    group.bench_function("run_10min_2hz", |b| {
        b.iter(|| run_acquisition(black_box(&cfg), &mut []).unwrap())
    });
    group.finish();
}

fn csv(c: &mut Criterion) {
    let log = run_acquisition(&sine_run(600.0), &mut []).unwrap().log;
    let text = to_csv_string(&log);
    let mut group = c.benchmark_group("csv");
    group.throughput(Throughput::Bytes(text.len() as u64));
    group.bench_function("serialize", |b| b.iter(|| to_csv_string(black_box(&log))));
    group.bench_function("parse", |b| b.iter(|| parse_csv(black_box(&text)).unwrap()));
    group.finish();
}

criterion_group!(benches, converter, psychrometrics, acquisition, csv);
criterion_main!(benches);
