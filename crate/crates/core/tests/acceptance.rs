//! Acceptance criteria, one PASS/FAIL line each.

use std::sync::OnceLock;
use std::time::Instant;

use qfclink::analysis::{
    expected_g2_zero, optimize_window, sbr, CollectedRun, CollectorSettings, CorrelationResult, CountSummary,
    NoiseModel, ScanLimits, StreamCollector, WindowCriterion, WindowSpec,
};
use qfclink::cli::{
    analyze_run, cmd_analyze, cmd_simulate, correlate_run, parse_duration_s, AnalysisParams, RunAnalysis,
    SimulateOptions,
};
use qfclink::model::{
    channel_window_probability, fit_efficiency_curve, stage_efficiency, EfficiencyCurve, FitPoint, SignalChannel,
    SourceSpec,
};
use qfclink::sequencer::{build_schedule, NoiseRates, RunLength, RunPlan, SequenceSpec, Simulator};
use qfclink::tagio::ExperimentConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn verdict(id: &str, pass: bool, detail: String) -> bool {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

#[test]
fn criterion_01_closed_form_g2() {
    let t = Instant::now();
    let c = CountSummary::new(3.92e5f64, 3.59e3, 1.27e6, 5.49e4, 1.54e9).unwrap();
    let g = expected_g2_zero(&c).unwrap();
    let ms = t.elapsed().as_secs_f64() * 1e3;
    assert!(verdict(
        "1",
        (g - 0.0505).abs() <= 0.0005 && ms < 1.0,
        format!("g2(0) = {g:.5} (target 0.0505 +- 0.0005), {ms:.3} ms")
    ));
}

#[test]
fn criterion_02_sbr_arithmetic() {
    let a = sbr(3.956e5f64, 3.59e3).unwrap();
    let b = sbr(1.3249e6f64, 5.49e4).unwrap();
    let ok_a = (a.value - 109.2).abs() < 0.05 && (1.7..=2.0).contains(&a.sigma);
    let ok_b = (b.value - 23.1).abs() < 0.05 && (0.09..=0.12).contains(&b.sigma);
    assert!(verdict(
        "2",
        ok_a && ok_b,
        format!("telecom {:.2} +- {:.3}, visible {:.2} +- {:.3}", a.value, a.sigma, b.value, b.sigma)
    ));
}

#[test]
fn criterion_03_noise_count() {
    let source = SourceSpec::new(13.89f64, 8.25e-4, 2.545e-4).unwrap();
    let p = channel_window_probability(&source, SignalChannel::Pmt, 857.0, 41.6).unwrap();
    let n = p.noise * 1.54e9;
    assert!(verdict(
        "3",
        (n / 5.49e4 - 1.0).abs() <= 0.01,
        format!("857 Hz x 41.6 ns x 1.54e9 = {n:.0} (target 5.49e4 +- 1%)")
    ));
}

#[test]
fn criterion_04_fit_round_trip() {
    let t = Instant::now();
    let truth = EfficiencyCurve::new(0.356, 278.0).unwrap();
    let powers = [50.0, 110.0, 170.0, 230.0, 330.0];
    let exact: Vec<FitPoint<f64>> =
        powers.iter().map(|&p| FitPoint::new(p, stage_efficiency(p, &truth).unwrap(), 0.01)).collect();
    let f = fit_efficiency_curve(&exact).unwrap();
    let e0 = (f.curve.eta0() / 0.356 - 1.0).abs();
    let e1 = (f.curve.pm_mw() / 278.0 - 1.0).abs();
    let noiseless = e0 <= 1e-3 && e1 <= 1e-3;

    let mut good = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = Normal::new(0.0, 1.0).unwrap();
        let points: Vec<FitPoint<f64>> = exact
            .iter()
            .map(|p| {
                let sigma = 0.01 * p.value;
                FitPoint::new(p.pump_mw, p.value + sigma * gauss.sample(&mut rng), sigma)
            })
            .collect();
        if let Ok(f) = fit_efficiency_curve(&points) {
            if (f.curve.eta0() / 0.356 - 1.0).abs() <= 0.02 && (f.curve.pm_mw() / 278.0 - 1.0).abs() <= 0.03 {
                good += 1;
            }
        }
    }
    let s = t.elapsed().as_secs_f64();
    assert!(verdict(
        "4",
        noiseless && good >= 95 && s < 10.0,
        format!("noiseless errors {e0:.1e}/{e1:.1e}, noisy in tolerance {good}/100, {s:.2} s")
    ));
}

struct Replica {
    config: ExperimentConfig,
    params: AnalysisParams,
    run: CollectedRun,
    analysis: RunAnalysis,
    g2: CorrelationResult,
    seconds: f64,
}

const REPLICA_ATTEMPTS: u64 = 150_000_000;
const REPLICA_SEED: u64 = 1;

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn replica() -> &'static Replica {
    static CELL: OnceLock<Replica> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let config = ExperimentConfig::default();
        let mut params = AnalysisParams::from_config(&config);
        params.max_n = 500;
        let sim = Simulator::new(config.simulation_setup(RunPlan::attempts(REPLICA_ATTEMPTS, REPLICA_SEED))).unwrap();
        let mut collector = StreamCollector::new(params.collector(80)).unwrap();
        sim.run(workers(), &mut collector).unwrap();
        let run = collector.finish();
        let analysis = analyze_run(&run, &params).unwrap();
        let g2 = correlate_run(&run, &analysis, &params).unwrap();
        Replica { config, params, run, analysis, g2, seconds: t.elapsed().as_secs_f64() }
    })
}

#[test]
fn criterion_05_desk_scale_replica() {
    let r = replica();
    let s = &r.analysis.snspd;

    let p = s.p_window();
    let a = verdict(
        "5a",
        (p / 2.6e-4 - 1.0).abs() <= 0.05,
        format!("SNSPD in-window probability {p:.4e} (target 2.6e-4 +- 5%)"),
    );

    // Prediction for the window actually placed: emission starts at the
    // excitation pulse, which follows the trigger by the trigger width.
    let setup = r.config.simulation_setup(RunPlan::attempts(REPLICA_ATTEMPTS, REPLICA_SEED));
    let excite_ns = r.config.sequence.trigger_ns;
    let pd = setup.detection_probability(SignalChannel::Snspd);
    let rel = s.signal.start_ns - excite_ns;
    let p_sig = pd * r.config.source.capture_between(rel, rel + s.signal.width_ns);
    let p_noise = r.config.snspd_noise_hz() * s.signal.width_ns * 1e-9;
    let predicted = p_sig / p_noise;
    let measured = s.sbr.as_ref().unwrap();
    let b = verdict(
        "5b",
        (measured.value - predicted).abs() <= 3.0 * measured.sigma && (90.0..=130.0).contains(&measured.value),
        format!("telecom SBR {:.1} +- {:.1}, model {predicted:.1}, band [90, 130]", measured.value, measured.sigma),
    );

    let (m, ms) = r.g2.off_zero_mean().unwrap();
    let d = verdict(
        "5d",
        (0.97..=1.03).contains(&m),
        format!("mean g2(n != 0) over |n| <= {} = {m:.4} +- {ms:.4}", r.params.max_n),
    );

    println!("criterion 5: {} attempts, seed {REPLICA_SEED}, {:.1} s", r.run.attempts, r.seconds);
    assert!(a && b && d);
}

fn g2_zero_verdict(id: &str, g: &CorrelationResult) -> bool {
    let (g0, g0s, c0) = g.at(0).unwrap();
    verdict(
        id,
        (0.02..=0.08).contains(&g0),
        format!(
            "g2(0) = {g0:.3} +- {g0s:.3} from {c0} coincidences over {} attempts (target [0.02, 0.08])",
            g.attempts
        ),
    )
}

#[test]
fn criterion_05c_g2_zero() {
    assert!(g2_zero_verdict("5c", &replica().g2));
}

/// The same measurement at the full 1.54e9 attempts of the reference run.
#[test]
#[ignore = "full-scale run, about ten times the desk-scale replica"]
fn criterion_05c_g2_zero_full_statistics() {
    let config = ExperimentConfig::default();
    let params = AnalysisParams::from_config(&config);
    let sim = Simulator::new(config.simulation_setup(RunPlan::attempts(1_540_000_000, REPLICA_SEED))).unwrap();
    let mut collector = StreamCollector::new(params.collector(80)).unwrap();
    sim.run(workers(), &mut collector).unwrap();
    let run = collector.finish();
    let analysis = analyze_run(&run, &params).unwrap();
    let g2 = correlate_run(&run, &analysis, &params).unwrap();
    assert!(g2_zero_verdict("5c full statistics", &g2));
}

#[test]
fn criterion_06_pulse_shape() {
    let r = replica();
    let o = *r.analysis.shape_overlap.as_ref().unwrap();
    assert!(verdict("6", o >= 0.98, format!("shape overlap {o:.4} (target >= 0.98)")));
}

#[test]
fn criterion_07_window_capture() {
    let tau: f64 = 13.89;
    let analytic = 1.0 - (-41.6 / tau).exp();

    // Noise-free, jitter-free source with a high detection rate so the
    // sample is large.
    let cfg = ExperimentConfig {
        source: SourceSpec::new(tau, 0.0, 0.5).unwrap(),
        snspd: qfclink::model::DetectorSpec::new("snspd", 0.87, 0.0, 0.0).unwrap(),
        ..ExperimentConfig::default()
    };
    let mut setup = cfg.simulation_setup(RunPlan::attempts(1_000_000, 7));
    setup.noise = NoiseRates::none();
    let sim = Simulator::new(setup).unwrap();
    let mut c =
        StreamCollector::new(CollectorSettings { range_end_ns: 1000.0, ..CollectorSettings::default() }).unwrap();
    sim.run(workers(), &mut c).unwrap();
    let run = c.finish();
    let d = run.snspd();
    let window = WindowSpec::new(cfg.sequence.trigger_ns, 41.6).unwrap();
    let mc = d.window_count(&window).unwrap() as f64 / d.histogram.total() as f64;
    let capture_ok = (analytic - 0.95).abs() <= 0.002 && (mc - 0.95).abs() <= 0.002;
    let a = verdict(
        "7 capture",
        capture_ok,
        format!(
            "analytic {analytic:.4}, Monte Carlo {mc:.4} from {} detections (target 0.950 +- 0.002)",
            d.histogram.total()
        ),
    );

    // Width at a fixed SBR floor shrinks as the background grows.
    let pulse = &d.histogram;
    let mut widths = Vec::new();
    for floor in [20.0, 40.0, 80.0] {
        let counts: Vec<u64> = pulse.counts().iter().map(|&k| k + floor as u64).collect();
        let h = qfclink::analysis::Histogram::new(800, 0, counts, pulse.attempts()).unwrap();
        let w = optimize_window(
            &h,
            &NoiseModel::PerBin(floor),
            WindowCriterion::MaxCaptureAtSbrFloor(100.0),
            ScanLimits::widths(1, 400),
        )
        .unwrap();
        widths.push(w.width_bins);
    }
    let b = verdict(
        "7 monotonicity",
        widths[0] > widths[1] && widths[1] > widths[2],
        format!("optimal widths {widths:?} bins at noise 20/40/80 per bin"),
    );

    // A 20.8 ns window on the replica's telecom histogram beats 41.6 ns.
    let r = replica();
    let h = &r.run.snspd().histogram;
    let noise = NoiseModel::Window(r.analysis.snspd.noise);
    let narrow = optimize_window(h, &noise, WindowCriterion::MaxSbr, ScanLimits::fixed_width(26)).unwrap();
    let wide = r.analysis.snspd.sbr.as_ref().unwrap().value;
    let c = verdict(
        "7 narrow window",
        narrow.sbr > wide,
        format!("20.8 ns SBR {:.1} vs 41.6 ns SBR {wide:.1}", narrow.sbr),
    );
    assert!(a && b && c);
}

#[test]
fn criterion_08_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: usize, name: &str| {
        let out = dir.path().join(name);
        cmd_simulate(&SimulateOptions {
            config: None,
            seed: Some(1),
            length: Some(RunLength::Attempts(1_000_000)),
            out: out.clone(),
            workers,
        })
        .unwrap();
        std::fs::read(out).unwrap()
    };
    let a = run(1, "w1.qtag");
    let b = run(8, "w8.qtag");
    assert!(verdict("8", a == b, format!("{} vs {} bytes, identical = {}", a.len(), b.len(), a == b)));
}

#[test]
fn criterion_09_schedule() {
    let seconds = parse_duration_s("4.27h").unwrap();
    let s = build_schedule(&SequenceSpec::default(), &RunPlan::duration(seconds, 1)).unwrap();
    // 15372 s = 3014117 cycles of 5.1 ms plus 3.3 ms, which holds 320
    // attempts after the 100 us cooling.
    let closed_form = 3_014_117u64 * 500 + 320;
    let gap = 1.0 - s.attempts as f64 / 1.54e9;
    assert!(verdict(
        "9",
        s.attempts == closed_form && gap.abs() < 0.03,
        format!("{} attempts (closed form {closed_form}), {:.2}% below 1.54e9", s.attempts, gap * 100.0)
    ));
}

#[test]
fn criterion_10_statistical_soundness() {
    // Noise only, at a rate giving well over 1e5 events.
    let cfg = ExperimentConfig { source: SourceSpec::new(13.89, 0.0, 0.0).unwrap(), ..ExperimentConfig::default() };
    let mut setup = cfg.simulation_setup(RunPlan::attempts(200_000, 11));
    setup.noise = NoiseRates { pmt_hz: 1e5, snspd_hz: 0.0, gated: false };
    let sim = Simulator::new(setup).unwrap();
    let stream = sim.run_to_stream(workers()).unwrap();
    let tick_s = stream.header.tick_ps as f64 * 1e-12;
    let ticks: Vec<u64> = stream.records.iter().filter(|r| r.channel == 1).map(|r| r.ticks).collect();
    let n = 100_000usize;
    assert!(ticks.len() > n + 1, "only {} noise events", ticks.len());

    // Kolmogorov-Smirnov on inter-arrival times against Exp(1e5 Hz),
    // evaluated on the tick grid.
    let mut gaps: Vec<f64> = ticks.windows(2).take(n).map(|w| (w[1] - w[0]) as f64).collect();
    gaps.sort_by(f64::total_cmp);
    let cdf = |k: f64| 1.0 - (-1e5 * (k + 0.5) * tick_s).exp();
    let mut d = 0.0f64;
    for (i, &g) in gaps.iter().enumerate() {
        let f = cdf(g);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let ks_crit = 1.628 / (n as f64).sqrt();
    let a = verdict("10 exponential", d < ks_crit, format!("KS D = {d:.5} vs 1% critical {ks_crit:.5} over {n} gaps"));

    // Chi-square uniformity of the trigger-relative histogram over one
    // attempt period, on the first 1e5 detections, in 100 bins.
    let mut c =
        StreamCollector::new(CollectorSettings { range_end_ns: 10_000.0, ..CollectorSettings::default() }).unwrap();
    let mut seen = 0usize;
    for r in &stream.records {
        c.push(r);
        if r.channel == 1 {
            seen += 1;
            if seen == n {
                break;
            }
        }
    }
    let h = c.finish().pmt().histogram.rebin(125).unwrap();
    let total = h.total() as f64;
    let expect = total / h.len() as f64;
    let chi2: f64 = h.counts().iter().map(|&k| (k as f64 - expect).powi(2) / expect).sum();
    let crit = ChiSquared::new((h.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    let b = verdict(
        "10 uniform",
        chi2 < crit,
        format!("chi2 = {chi2:.1} vs 1% critical {crit:.1} ({} bins, {total} events)", h.len()),
    );
    assert!(a && b);
}

#[test]
fn criterion_11_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("throughput.qtag");
    let s = cmd_simulate(&SimulateOptions {
        config: None,
        seed: Some(3),
        length: Some(RunLength::Attempts(10_000_000)),
        out: path.clone(),
        workers: workers(),
    })
    .unwrap();
    let t = Instant::now();
    let report = cmd_analyze(&path, &AnalysisParams::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    report.validate().unwrap();
    assert!(verdict(
        "11",
        s.records >= 10_000_000 && secs < 10.0,
        format!("{} records analyzed in {secs:.2} s", s.records)
    ));
}
