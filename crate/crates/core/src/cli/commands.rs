use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::CliError;
use crate::analysis::{
    background_subtract_normalize_in, capture_fraction, default_signal_window, expected_g2_zero, g2_from_hits, sbr,
    shape_overlap, AnalysisError, ChannelData, CollectedRun, CollectorSettings, CorrelationResult, CountSummary,
    NormalizedShape, SbrResult, StreamCollector, WindowSpec,
};
use crate::model::{
    cascade_throughput, fit_efficiency_curve, fit_noise_line, noise_rate, stage_efficiency, CascadeSpec, FitPoint,
    StageSpec,
};
use crate::sequencer::{Channel, RunLength, Simulator, StreamHeader};
use crate::tagio::{
    config_digest, load_config, load_config_file, read_tags_csv, write_tags_csv, Cell, ExperimentConfig, Report, Table,
    TagReader, TagWriter,
};

/// Run length used when neither the command line nor the config sets one.
pub const DEFAULT_ATTEMPTS: u64 = 1_000_000;

const TOOL_VERSION: &str = concat!("qfclink ", env!("CARGO_PKG_VERSION"));

fn load(config: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    Ok(match config {
        Some(p) => load_config_file(p)?,
        None => load_config("")?,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub length: Option<RunLength>,
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub header: StreamHeader,
    pub bytes: u64,
    pub records: u64,
    /// SHA-256 of the written file.
    pub sha256: [u8; 32],
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Simulate a run and write it to `opts.out`: CSV when the file name ends
/// in `.csv`, binary otherwise.
pub fn cmd_simulate(opts: &SimulateOptions) -> Result<SimulateSummary, CliError> {
    let cfg = load(opts.config.as_deref())?;
    let mut plan = cfg.run_plan(RunLength::Attempts(DEFAULT_ATTEMPTS));
    if let Some(l) = opts.length {
        plan.length = l;
    }
    if let Some(s) = opts.seed {
        plan.master_seed = s;
    }
    let sim = Simulator::new(cfg.simulation_setup(plan))?;
    let file = File::create(&opts.out).map_err(|e| CliError::Io(format!("{}: {e}", opts.out.display())))?;
    let mut out = HashingWriter { inner: BufWriter::new(file), hasher: Sha256::new() };
    let csv = opts.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (header, bytes, records) = if csv {
        let stream = sim.run_to_stream(opts.workers)?;
        let bytes = write_tags_csv(&stream, &mut out)?;
        (stream.header, bytes, stream.records.len() as u64)
    } else {
        let mut w = TagWriter::new(&mut out, &sim.header())?;
        let header = sim.run(opts.workers, &mut w)?;
        let records = w.records();
        let (bytes, _) = w.finish()?;
        (header, bytes, records)
    };
    out.flush()?;
    Ok(SimulateSummary { header, bytes, records, sha256: out.hasher.finalize().into() })
}

/// Window and binning choices shared by the analysis commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    /// Fixed trigger-relative signal window start; placed from each
    /// channel's histogram peak when absent.
    pub window_start_ns: Option<f64>,
    pub window_width_ns: f64,
    pub noise_delay_ns: f64,
    pub bin_ns: f64,
    /// End of the retained trigger-relative range.
    pub range_end_ns: f64,
    pub max_n: u64,
    pub attempts_per_shift: u64,
}

impl AnalysisParams {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            window_start_ns: cfg.windows.signal_start_ns,
            window_width_ns: cfg.windows.signal_width_ns,
            noise_delay_ns: cfg.windows.noise_delay_ns,
            bin_ns: cfg.windows.bin_ns,
            range_end_ns: cfg.sequence.attempt_us * 1e3,
            max_n: 20,
            attempts_per_shift: 1,
        }
    }

    pub fn collector(&self, tick_ps: u32) -> CollectorSettings {
        CollectorSettings { tick_ps, bin_width_ns: self.bin_ns, range_start_ns: 0.0, range_end_ns: self.range_end_ns }
    }
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self::from_config(&ExperimentConfig::default())
    }
}

/// Stream a tag file of either format through a collector.
pub fn collect_file(path: &Path, params: &AnalysisParams) -> Result<(StreamHeader, CollectedRun), CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let first = reader.fill_buf()?.first().copied();
    if matches!(first, Some(b) if b == b'#' || b.is_ascii_digit()) {
        let stream = read_tags_csv(reader)?;
        let mut c = StreamCollector::new(params.collector(stream.header.tick_ps))?;
        stream.records.iter().for_each(|r| c.push(r));
        return Ok((stream.header, c.finish()));
    }
    let mut tags = TagReader::new(reader)?;
    let mut c = StreamCollector::new(params.collector(tags.header().tick_ps))?;
    tags.drain_into(&mut c)?;
    Ok((tags.header().clone(), c.finish()))
}

/// Windowed observables of one detector channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub signal: WindowSpec,
    pub noise: WindowSpec,
    /// Why the window could not be placed from the histogram, if it could not.
    pub placement_error: Option<AnalysisError>,
    pub signal_total: u64,
    pub noise_total: u64,
    pub sbr: Result<SbrResult<f64>, AnalysisError>,
    pub capture: Result<f64, AnalysisError>,
    pub orphans: u64,
    pub out_of_range: u64,
    pub attempts: u64,
}

impl ChannelSummary {
    /// Background-subtracted in-window signal per attempt.
    pub fn p_signal_window(&self) -> f64 {
        (self.signal_total as f64 - self.noise_total as f64) / self.attempts.max(1) as f64
    }

    /// In-window signal plus background per attempt.
    pub fn p_window(&self) -> f64 {
        self.signal_total as f64 / self.attempts.max(1) as f64
    }
}

fn summarize(data: &ChannelData, channel: Channel, params: &AnalysisParams) -> Result<ChannelSummary, AnalysisError> {
    let hist = &data.histogram;
    let (signal, placement_error) = match params.window_start_ns {
        Some(s) => (WindowSpec::new(s, params.window_width_ns)?, None),
        None => match default_signal_window(hist, params.window_width_ns) {
            Ok(w) => (w, None),
            Err(e) => (WindowSpec::new(hist.origin_ns(), params.window_width_ns)?, Some(e)),
        },
    };
    let noise = signal.shifted(params.noise_delay_ns);
    let signal_total = data.window_count(&signal)?;
    let noise_total = data.window_count(&noise)?;
    Ok(ChannelSummary {
        channel,
        signal,
        noise,
        placement_error,
        signal_total,
        noise_total,
        sbr: sbr(signal_total as f64, noise_total as f64),
        capture: capture_fraction(hist, &signal, &noise),
        orphans: data.orphans,
        out_of_range: data.out_of_range,
        attempts: hist.attempts(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunAnalysis {
    pub attempts: u64,
    pub pmt: ChannelSummary,
    pub snspd: ChannelSummary,
    /// Overlap of the two background-subtracted shapes over the telecom
    /// signal window.
    pub shape_overlap: Result<f64, AnalysisError>,
    /// Same-attempt `g2(0)` expected from background alone.
    pub expected_g2_zero: Result<f64, AnalysisError>,
}

impl RunAnalysis {
    pub fn counts(&self) -> Result<CountSummary<f64>, AnalysisError> {
        let sub = |c: &ChannelSummary| (c.signal_total as f64 - c.noise_total as f64).max(0.0);
        CountSummary::new(
            sub(&self.snspd),
            self.snspd.noise_total as f64,
            sub(&self.pmt),
            self.pmt.noise_total as f64,
            self.attempts as f64,
        )
    }
}

/// Windowed counts, SBR, capture, shape overlap and the expected `g2(0)`.
pub fn analyze_run(run: &CollectedRun, params: &AnalysisParams) -> Result<RunAnalysis, AnalysisError> {
    let pmt = summarize(run.pmt(), Channel::Pmt, params)?;
    let snspd = summarize(run.snspd(), Channel::Snspd, params)?;
    let shape = |d: &ChannelData, noise: &WindowSpec| -> Result<NormalizedShape<f64>, AnalysisError> {
        background_subtract_normalize_in(&d.histogram, noise, &snspd.signal)
    };
    let shape_overlap =
        shape(run.pmt(), &pmt.noise).and_then(|a| shape(run.snspd(), &snspd.noise).and_then(|b| shape_overlap(&a, &b)));
    let mut out = RunAnalysis {
        attempts: run.attempts,
        pmt,
        snspd,
        shape_overlap,
        expected_g2_zero: Err(AnalysisError::UndefinedG2("no attempts")),
    };
    out.expected_g2_zero = out.counts().and_then(|c| expected_g2_zero(&c));
    Ok(out)
}

/// `g2(n)` between the two channels' signal windows.
pub fn correlate_run(
    run: &CollectedRun,
    analysis: &RunAnalysis,
    params: &AnalysisParams,
) -> Result<CorrelationResult, AnalysisError> {
    g2_from_hits(
        &run.pmt().hits(&analysis.pmt.signal)?,
        &run.snspd().hits(&analysis.snspd.signal)?,
        params.max_n,
        params.attempts_per_shift,
    )
}

fn provenance(kind: &str, header: &StreamHeader, source: &Path) -> Report {
    let mut r = Report::new(kind);
    r.meta("config_digest", hex::encode(header.config_digest))
        .meta("seed", header.master_seed)
        .meta("tool_version", TOOL_VERSION)
        .meta("source", source.display())
        .meta("attempt_count", header.attempt_count)
        .meta("tick_ps", header.tick_ps);
    r
}

struct Summary {
    table: Table,
    errors: Table,
}

impl Summary {
    fn new() -> Self {
        Self {
            table: Table::new("summary", &["quantity", "value", "sigma"]),
            errors: Table::new("errors", &["quantity", "message"]),
        }
    }

    fn value(&mut self, name: &str, v: impl Into<Cell>) {
        self.table.push(vec![name.into(), v.into(), "".into()]);
    }

    fn with_sigma(&mut self, name: &str, v: f64, s: f64) {
        self.table.push(vec![name.into(), v.into(), s.into()]);
    }

    fn result(&mut self, name: &str, r: &Result<f64, AnalysisError>) {
        match r {
            Ok(v) if v.is_finite() => self.value(name, *v),
            Ok(v) => self.error(name, format!("not finite: {v}")),
            Err(e) => self.error(name, e.to_string()),
        }
    }

    fn error(&mut self, name: &str, message: impl Into<String>) {
        self.errors.push(vec![name.into(), message.into().into()]);
    }

    fn into_report(self, r: &mut Report) {
        r.add(self.table);
        if !self.errors.rows.is_empty() {
            r.add(self.errors);
        }
    }
}

fn channel_rows(s: &mut Summary, c: &ChannelSummary) {
    let p = match c.channel {
        Channel::Pmt => "pmt",
        _ => "snspd",
    };
    if let Some(e) = &c.placement_error {
        s.error(&format!("{p}.signal_start_ns"), format!("placed at range start: {e}"));
    }
    s.value(&format!("{p}.signal_start_ns"), c.signal.start_ns);
    s.value(&format!("{p}.signal_width_ns"), c.signal.width_ns);
    s.value(&format!("{p}.noise_start_ns"), c.noise.start_ns);
    s.value(&format!("{p}.signal_total"), c.signal_total);
    s.value(&format!("{p}.noise_total"), c.noise_total);
    match &c.sbr {
        Ok(r) => s.with_sigma(&format!("{p}.sbr"), r.value, r.sigma),
        Err(e) => s.error(&format!("{p}.sbr"), e.to_string()),
    }
    s.result(&format!("{p}.capture"), &c.capture);
    s.value(&format!("{p}.p_window"), c.p_window());
    s.value(&format!("{p}.p_signal_window"), c.p_signal_window());
    s.value(&format!("{p}.p_noise_window"), c.noise_total as f64 / c.attempts.max(1) as f64);
    s.value(&format!("{p}.orphans"), c.orphans);
    s.value(&format!("{p}.out_of_range"), c.out_of_range);
}

fn analysis_report(header: &StreamHeader, source: &Path, run: &CollectedRun, a: &RunAnalysis) -> Report {
    let mut r = provenance("analyze", header, source);
    let mut s = Summary::new();
    s.value("attempts", a.attempts);
    channel_rows(&mut s, &a.pmt);
    channel_rows(&mut s, &a.snspd);
    s.result("shape_overlap", &a.shape_overlap);
    s.result("expected_g2_zero", &a.expected_g2_zero);
    s.into_report(&mut r);

    let (hp, hs) = (&run.pmt().histogram, &run.snspd().histogram);
    let mut h = Table::new("histogram", &["bin_start_ns", "pmt", "snspd"]);
    for i in 0..hp.len() {
        h.push(vec![hp.bin_start_ns(i).into(), hp.counts()[i].into(), hs.counts()[i].into()]);
    }
    r.add(h);
    r
}

/// Histograms, windowed counts, SBR and capture of a tag file.
pub fn cmd_analyze(tags: &Path, params: &AnalysisParams) -> Result<Report, CliError> {
    let (header, run) = collect_file(tags, params)?;
    let a = analyze_run(&run, params)?;
    Ok(analysis_report(&header, tags, &run, &a))
}

fn g2_report(
    header: &StreamHeader,
    source: &Path,
    a: &RunAnalysis,
    g: Result<CorrelationResult, AnalysisError>,
) -> Report {
    let mut r = provenance("g2", header, source);
    let mut s = Summary::new();
    s.result("expected_g2_zero", &a.expected_g2_zero);
    match g {
        Ok(g) => {
            if let Some((v, sigma, c)) = g.at(0) {
                s.with_sigma("g2_0", v, sigma);
                s.value("coincidences_0", c);
            }
            if let Some((m, e)) = g.off_zero_mean() {
                s.with_sigma("g2_off_zero_mean", m, e);
            }
            s.value("c1_total", g.c1_total);
            s.value("c2_total", g.c2_total);
            s.value("attempts", g.attempts);
            s.value("attempts_per_shift", g.attempts_per_shift);
            s.into_report(&mut r);
            let mut t = Table::new("g2", &["n", "g2", "sigma", "coincidences"]);
            for i in 0..g.n_values.len() {
                t.push(vec![g.n_values[i].into(), g.g2[i].into(), g.sigma[i].into(), g.coincidences[i].into()]);
            }
            r.add(t);
        }
        Err(e) => {
            s.error("g2", e.to_string());
            s.into_report(&mut r);
        }
    }
    r
}

/// Cross-correlation `g2(n)` of a tag file.
pub fn cmd_g2(tags: &Path, params: &AnalysisParams) -> Result<Report, CliError> {
    let (header, run) = collect_file(tags, params)?;
    let a = analyze_run(&run, params)?;
    let g = correlate_run(&run, &a, params);
    Ok(g2_report(&header, tags, &a, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitLaw {
    /// `eta0 * sin^2(pi/2 * sqrt(P / Pm))`
    Sin2,
    /// `slope * P + intercept`
    Linear,
}

fn read_points(text: &str) -> Result<Vec<FitPoint<f64>>, CliError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = t.split(',').map(str::trim).collect();
        let nums: Option<Vec<f64>> = cells.iter().map(|c| c.parse().ok()).collect();
        match nums.as_deref() {
            Some([p, v]) => points.push(FitPoint::new(*p, *v, 1.0)),
            Some([p, v, s]) => points.push(FitPoint::new(*p, *v, *s)),
            _ if points.is_empty() && cells.iter().any(|c| c.parse::<f64>().is_err()) => {}
            _ => {
                return Err(CliError::Parse(format!(
                    "points line {}: expected `pump_mw,value[,sigma]`, got `{t}`",
                    i + 1
                )))
            }
        }
    }
    Ok(points)
}

/// Fit a characterization curve to `pump_mw,value[,sigma]` rows.
pub fn cmd_fit(points_csv: &Path, law: FitLaw) -> Result<Report, CliError> {
    let text =
        std::fs::read_to_string(points_csv).map_err(|e| CliError::Io(format!("{}: {e}", points_csv.display())))?;
    let points = read_points(&text)?;
    let mut r = Report::new("fit");
    r.meta("config_digest", hex::encode(config_digest(&text)))
        .meta("seed", "none")
        .meta("tool_version", TOOL_VERSION)
        .meta("source", points_csv.display());
    let mut params = Table::new("parameters", &["parameter", "value"]);
    let mut res = Table::new("residuals", &["pump_mw", "value", "model", "residual"]);
    let model: Box<dyn Fn(f64) -> f64> = match law {
        FitLaw::Sin2 => {
            let f = fit_efficiency_curve(&points)?;
            params.push(vec!["law".into(), "sin2".into()]);
            params.push(vec!["eta0".into(), f.curve.eta0().into()]);
            params.push(vec!["pm_mw".into(), f.curve.pm_mw().into()]);
            params.push(vec!["residual".into(), f.residual.into()]);
            params.push(vec!["iterations".into(), f.iterations.into()]);
            let c = f.curve;
            Box::new(move |p| stage_efficiency(p, &c).unwrap_or(f64::NAN))
        }
        FitLaw::Linear => {
            let f = fit_noise_line(&points)?;
            params.push(vec!["law".into(), "linear".into()]);
            params.push(vec!["slope_hz_per_mw".into(), f.slope_hz_per_mw.into()]);
            params.push(vec!["intercept_hz".into(), f.intercept_hz.into()]);
            params.push(vec!["residual".into(), f.residual.into()]);
            params.push(vec!["flagged".into(), (f.flagged as u64).into()]);
            Box::new(move |p| f.intercept_hz + f.slope_hz_per_mw * p)
        }
    };
    for p in &points {
        let m = model(p.pump_mw);
        res.push(vec![p.pump_mw.into(), p.value.into(), m.into(), (p.value - m).into()]);
    }
    r.add(params).add(res);
    Ok(r)
}

/// Stage-2 efficiency, pump-induced noise and link efficiency over a pump grid.
pub fn cmd_sweep(config: Option<&Path>, pump_grid_mw: &[f64]) -> Result<Report, CliError> {
    let cfg = load(config)?;
    let mut r = Report::new("sweep");
    r.meta("config_digest", hex::encode(cfg.digest)).meta("seed", cfg.run.seed).meta("tool_version", TOOL_VERSION);
    let s2 = cfg.stage2();
    let mut t =
        Table::new("sweep", &["pump_mw", "efficiency", "noise_hz", "link_efficiency", "link_efficiency_polarized"]);
    for &p in pump_grid_mw {
        let eta = stage_efficiency(p, s2.curve())?;
        let noise = noise_rate(p, s2.noise())?;
        let stage = StageSpec::new("stage2", *s2.curve(), p, *s2.noise(), s2.polarization())?;
        let link = CascadeSpec::new(
            vec![cfg.stage1().clone(), stage],
            cfg.cascade.interstage_coupling(),
            cfg.cascade.source_polarization_split(),
        )?;
        t.push(vec![
            p.into(),
            eta.into(),
            noise.into(),
            cascade_throughput(&link, false).into(),
            cascade_throughput(&link, true).into(),
        ]);
    }
    r.add(t);
    Ok(r)
}

/// Analysis, correlation and the model sweep for one tag file, plus a fit
/// when points are given.
pub fn cmd_report(
    tags: &Path,
    config: Option<&Path>,
    params: &AnalysisParams,
    pump_grid_mw: &[f64],
    fit: Option<(&Path, FitLaw)>,
) -> Result<Report, CliError> {
    let (header, run) = collect_file(tags, params)?;
    let a = analyze_run(&run, params)?;
    let g = correlate_run(&run, &a, params);
    let mut r = provenance("report", &header, tags);
    r.absorb("analyze", analysis_report(&header, tags, &run, &a));
    r.absorb("g2", g2_report(&header, tags, &a, g));
    r.absorb("sweep", cmd_sweep(config, pump_grid_mw)?);
    if let Some((points, law)) = fit {
        r.absorb("fit", cmd_fit(points, law)?);
    }
    Ok(r)
}
