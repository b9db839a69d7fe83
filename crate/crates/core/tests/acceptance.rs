//! Acceptance criteria for the logger model. Each criterion prints one
//! PASS/FAIL line; the process exits non-zero if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use paraloq::acquisition::{run_acquisition, Channel, ChannelSetup, RunConfig};
use paraloq::adc0808::{
    clock_frequency, decode_temp, decode_volts, quantize, sar_convert, AdcConfig, ClockConfig,
    CLOCK_MAX_HZ, CLOCK_MIN_HZ,
};
use paraloq::logstore::{
    parse_csv, read_csv, timestamp_at, to_csv_string, write_csv, PsychroRow, RunLog, RunMeta,
};
use paraloq::pport::{
    acquire_byte, control_value_for_wire, status_line_from_read, HandshakeMap, HandshakeTiming,
    HostLink, PortBackend, SimulatedBackend, CONTROL_DIRECTION_BIT, HIGH_Z,
};
use paraloq::psychro::{
    dew_point, dew_point_from_vapor_pressure, relative_humidity, saturation_vapor_pressure,
    PsychroConfig,
};
use paraloq::signal_chain::{alias_frequency, amplify_and_clamp, chain_output, ChainConfig};
use paraloq::stimulus::{AnalogInput, Stimulus};
use paraloq::Error;

const TEMP_STEP_C: f64 = 50.0 / 255.0;

fn within(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}

fn criterion_1_resolution() {
    let started = Instant::now();
    let chain = ChainConfig::default();
    let adc = AdcConfig::default();
    let mut max_err: f64 = 0.0;
    for i in 0..50_000 {
        let t = i as f64 * 0.001;
        let code = quantize(chain_output(t, &chain).unwrap(), &adc).unwrap();
        let decoded = decode_temp(code);
        let grid = decoded / TEMP_STEP_C;
        assert!((grid - grid.round()).abs() < 1e-9, "{decoded} off grid");
        max_err = max_err.max((decoded - t).abs());
    }
    within(TEMP_STEP_C, 0.196078, 1e-6, "grid spacing");
    assert!(max_err <= 0.19608, "max error {max_err}");
    assert!(started.elapsed() < Duration::from_secs(1));
}

fn criterion_2_step_voltage() {
    let adc = AdcConfig::default();
    // Locate every code transition by bisection on the transfer function.
    let transition = |code: u8| {
        let (mut lo, mut hi) = (-1.0f64, 6.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if quantize(mid, &adc).unwrap() >= code {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let edges: Vec<f64> = (1..=255u8).map(transition).collect();
    for pair in edges.windows(2) {
        within(pair[1] - pair[0], 5.0 / 256.0, 1e-9, "transition spacing");
    }
    for code in 0..255u8 {
        within(
            decode_volts(code + 1, adc.vref) - decode_volts(code, adc.vref),
            5.0 / 255.0,
            1e-9,
            "decode span",
        );
    }
    within(5.0 / 255.0, 0.0196, 1e-4, "nominal step");
}

fn criterion_3_conversion_timing() {
    let adc = AdcConfig::default();
    assert_eq!(sar_convert(2.5, 0, 640e3, &adc).unwrap().latency_s, 100e-6);
    assert_eq!(sar_convert(2.5, 0, 1_280e3, &adc).unwrap().latency_s, 50e-6);
    assert!(sar_convert(2.5, 0, CLOCK_MIN_HZ, &adc).is_ok());
    assert!(sar_convert(2.5, 0, CLOCK_MAX_HZ, &adc).is_ok());
    for hz in [CLOCK_MIN_HZ - 0.01, CLOCK_MAX_HZ + 0.01, 0.0] {
        assert!(matches!(
            sar_convert(2.5, 0, hz, &adc),
            Err(Error::ClockRange { .. })
        ));
    }
}

fn criterion_4_clock_formula() {
    let f = clock_frequency(&ClockConfig {
        r_ohms: 1e6,
        c_farads: 1e-6,
    })
    .unwrap()
    .hz;
    within(f, 1.0 / 1.1, 1e-12 / 1.1, "unit RC");
    let rc = ClockConfig::for_frequency(640e3, 1e-9)
        .unwrap()
        .rc_seconds();
    within(rc, 1.4205e-6, 1.4205e-6 * 1e-4, "RC for 640 kHz");
}

fn criterion_5_sar_oracle() {
    let started = Instant::now();
    let adc = AdcConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut matches = 0;
    for _ in 0..10_000 {
        let v: f64 = rng.random_range(-1.0..6.0);
        if sar_convert(v, 0, 640e3, &adc).unwrap().code == quantize(v, &adc).unwrap() {
            matches += 1;
        }
    }
    assert_eq!(matches, 10_000);
    assert!(started.elapsed() < Duration::from_secs(1));
}

fn criterion_6_humidity_table() {
    let cfg = PsychroConfig::default();
    let rh = relative_humidity(19.92858, 18.02167, &cfg).unwrap();
    let dew = dew_point(19.92858, 18.02167, &cfg).unwrap();
    // Magnus + psychrometer equation evaluated in 40-digit arithmetic.
    within(rh, 83.296_885_473_324_4, 1e-6, "RH regression");
    within(dew, 17.009_288_515_905_59, 1e-6, "dew regression");
    within(rh, 85.183416, 3.0, "RH vs table");
    within(dew, 17.360743, 1.0, "dew vs table");
}

fn criterion_7_sampling() {
    let cfg = RunConfig {
        duration_s: 60.0,
        ..RunConfig::default()
    };
    let out = run_acquisition(&cfg, &mut []).unwrap();
    assert_eq!(out.log.rows.len(), 121);
    for (k, row) in out.log.rows.iter().enumerate() {
        assert_eq!(row.t_s, k as f64 * 0.5);
    }

    let long = RunConfig {
        duration_s: 520.0,
        ..RunConfig::default()
    };
    let out = run_acquisition(&long, &mut []).unwrap();
    assert_eq!(out.log.rows.len(), 1041);
    let tick_1000: Vec<_> = out.samples.iter().filter(|s| s.seq == 1000).collect();
    assert_eq!(tick_1000.len(), 2);
    assert!(tick_1000.iter().all(|s| s.t_s == 500.0));
    assert_eq!(out.log.rows[1000].t_s, 500.0);
}

fn dominant_frequency(values: &[f64], rate_hz: f64) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    let (bin, _) = buf[..=buf.len() / 2]
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| (i, c.norm()))
        .fold(
            (0, 0.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    bin as f64 * rate_hz / values.len() as f64
}

fn criterion_8_aliasing() {
    for (signal_hz, expected_warnings) in [(1.5, 1), (0.3, 0)] {
        let mut cfg = RunConfig {
            // 200 samples at 2 S/s: 0.01 Hz bins.
            duration_s: 99.5,
            ..RunConfig::default()
        };
        cfg.dry = ChannelSetup {
            chain: ChainConfig::default(),
            stimulus: Stimulus::Sine {
                amplitude_c: 10.0,
                freq_hz: signal_hz,
                offset_c: 25.0,
            },
        };
        let out = run_acquisition(&cfg, &mut []).unwrap();
        assert_eq!(out.warnings.len(), expected_warnings);
        let temps: Vec<f64> = out
            .samples
            .iter()
            .filter(|s| s.channel == Channel::Dry)
            .map(|s| s.temp_c)
            .collect();
        assert_eq!(temps.len(), 200);
        let peak = dominant_frequency(&temps, cfg.sample_rate_hz);
        let predicted = alias_frequency(signal_hz, cfg.sample_rate_hz).unwrap();
        within(peak, predicted, 0.01, "dominant FFT bin");
    }
    within(
        alias_frequency(1.5, 2.0).unwrap(),
        0.5,
        1e-12,
        "alias 1.5 Hz",
    );
    within(
        alias_frequency(0.3, 2.0).unwrap(),
        0.3,
        1e-12,
        "alias 0.3 Hz",
    );
}

fn random_run(rng: &mut ChaCha8Rng) -> RunLog {
    let rate = [0.5, 1.0, 2.0, 3.0, 7.0, 10.0][rng.random_range(0..6)];
    let start = Utc
        .timestamp_opt(rng.random_range(1.6e9 as i64..2.0e9 as i64), 0)
        .unwrap()
        + chrono::Duration::milliseconds(rng.random_range(0..1000));
    let meta = RunMeta {
        run_id: format!("{:08x}", rng.random::<u32>()),
        start,
        sample_rate_hz: rate,
        channel_map: if rng.random_bool(0.5) {
            vec![(Channel::Dry, 0), (Channel::Wet, 1)]
        } else {
            vec![(Channel::Wet, 1), (Channel::Dry, 0)]
        },
        config_fingerprint: format!("{:016x}", rng.random::<u64>()),
    };
    let psychro = PsychroConfig::default();
    let rows = (0..rng.random_range(0..40u64))
        .map(|k| {
            let t = k as f64 / rate;
            let dry: u8 = rng.random();
            let wet = if rng.random_bool(0.8) {
                rng.random_range(0..=dry)
            } else {
                rng.random()
            };
            PsychroRow::from_codes(t, timestamp_at(start, t), dry, wet, &psychro)
        })
        .collect();
    RunLog { meta, rows }
}

/// Deliberately simple CSV reader, independent of the library parser.
fn minimal_csv_check(text: &str) -> usize {
    assert!(!text.contains('"'), "quoting present");
    let mut lines = text.split("\r\n").filter(|l| !l.starts_with('#'));
    let header = lines.next().expect("header");
    let width = header.split(',').count();
    assert_eq!(width, 8);
    let mut rows = 0;
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), width, "{line}");
        for (i, cell) in cells.iter().enumerate() {
            if i != 1 && !cell.is_empty() {
                cell.parse::<f64>()
                    .unwrap_or_else(|_| panic!("cell '{cell}'"));
            }
        }
        rows += 1;
    }
    rows
}

fn criterion_9_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..1_000 {
        let run = random_run(&mut rng);
        let text = to_csv_string(&run);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, run);
        assert_eq!(
            to_csv_string(&back),
            text,
            "re-serialization not byte-stable"
        );
        assert_eq!(minimal_csv_check(&text), run.rows.len());
        if i % 50 == 0 {
            let path = dir.path().join(run.meta.file_name());
            write_csv(&run, &path).unwrap();
            assert_eq!(read_csv(&path).unwrap(), run);
            assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
        }
    }
}

fn criterion_10_invariants() {
    let chain = ChainConfig::default();
    let adc = AdcConfig::default();
    let psychro = PsychroConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    for _ in 0..10_000 {
        let v: f64 = rng.random_range(-1e6..1e6);
        let out = amplify_and_clamp(v, &chain).unwrap();
        assert!((0.0..=chain.clamp_volts()).contains(&out));
    }

    let mut prev = 0u8;
    for i in 0..=70_000 {
        let code = quantize(-1.0 + i as f64 * 1e-4, &adc).unwrap();
        assert!(code >= prev);
        prev = code;
    }

    for _ in 0..5_000 {
        let dry: f64 = rng.random_range(0.0..50.0);
        let wet_a: f64 = rng.random_range(0.0..=dry);
        let wet_b: f64 = rng.random_range(wet_a..=dry);
        if let (Ok(a), Ok(b)) = (
            relative_humidity(dry, wet_a, &psychro),
            relative_humidity(dry, wet_b, &psychro),
        ) {
            assert!(a <= b + 1e-12);
            assert!((0.0..=100.0).contains(&a));
            assert!(dew_point(dry, wet_a, &psychro).unwrap() <= dry);
        }
        let dry_hi = dry + rng.random_range(0.0..5.0);
        if let (Ok(lo), Ok(hi)) = (
            relative_humidity(dry, wet_a, &psychro),
            relative_humidity(dry_hi, wet_a, &psychro),
        ) {
            assert!(hi <= lo + 1e-12);
        }
    }
    for i in 0..=500 {
        let t = i as f64 * 0.1;
        let es = saturation_vapor_pressure(t, &psychro).unwrap();
        within(
            dew_point_from_vapor_pressure(es, &psychro).unwrap(),
            t,
            1e-9,
            "saturation fixed point",
        );
        assert_eq!(relative_humidity(t, t, &psychro).unwrap(), 100.0);
    }

    let clock_hz = 640e3;
    let map = HandshakeMap::default();
    let mut backend = SimulatedBackend::new(adc, clock_hz, map, 0).unwrap();
    backend
        .attach_input(
            0,
            AnalogInput::new(Stimulus::Constant { temp_c: 25.0 }, chain).unwrap(),
        )
        .unwrap();
    let idle = 1 << CONTROL_DIRECTION_BIT;
    backend.select_channel(0).unwrap();
    backend.write_control(control_value_for_wire(idle | 1 << map.start_ale));
    backend.write_control(control_value_for_wire(idle));
    backend.wait_ns(1_000_000);
    assert!(status_line_from_read(backend.read_status(), map.eoc));
    assert_eq!(backend.read_data(), HIGH_Z, "data readable before OE");

    backend.disconnect();
    let timed_out = acquire_byte(
        &mut backend,
        &map,
        &HandshakeTiming::default(),
        &adc,
        clock_hz,
        0,
    );
    assert!(matches!(timed_out, Err(Error::DeviceTimeout { .. })));
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("1 resolution 0.196 °C", criterion_1_resolution),
        ("2 ADC step 19.6 mV", criterion_2_step_voltage),
        ("3 conversion timing", criterion_3_conversion_timing),
        ("4 clock formula", criterion_4_clock_formula),
        ("5 SAR oracle equivalence", criterion_5_sar_oracle),
        ("6 humidity table", criterion_6_humidity_table),
        ("7 sampling 2 S/s", criterion_7_sampling),
        ("8 aliasing", criterion_8_aliasing),
        ("9 CSV round trip", criterion_9_csv_round_trip),
        ("10 invariant suites", criterion_10_invariants),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
        if outcome.is_err() {
            failed += 1;
        }
        println!(
            "criterion {name}: {verdict} ({:.3} s)",
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
