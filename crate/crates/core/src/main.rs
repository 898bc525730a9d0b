use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qfclink::cli::{
    cmd_analyze, cmd_fit, cmd_g2, cmd_report, cmd_simulate, cmd_sweep, parse_count, parse_duration_ns,
    parse_duration_s, parse_grid, AnalysisParams, CliError, FitLaw, Report, SimulateOptions, EXIT_PARSE,
};
use qfclink::sequencer::RunLength;
use qfclink::tagio::{load_config, load_config_file};

#[derive(Parser)]
#[command(
    name = "qfclink",
    version,
    about = "Simulate and analyze single-photon time-tag streams of a frequency-converted ion source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write a QTAG file (CSV when --out ends in .csv).
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of attempts, e.g. 1000000 or 1.5e8.
        #[arg(long, value_parser = count, conflicts_with = "duration")]
        attempts: Option<u64>,
        /// Wallclock duration with unit, e.g. 4.27h or 1500s.
        #[arg(long, value_parser = seconds)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; the output does not depend on this.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Histograms, windowed counts, SBR and capture fraction.
    Analyze {
        tags: PathBuf,
        #[command(flatten)]
        windows: WindowArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-correlation g2(n) between the two detector channels.
    G2 {
        tags: PathBuf,
        #[command(flatten)]
        windows: WindowArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit pump_mw,value[,sigma] points to the efficiency or noise law.
    Fit {
        points: PathBuf,
        #[arg(long, value_enum, default_value = "sin2")]
        law: Law,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Model efficiency and noise over a pump-power grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// start:stop:step or a comma list, in mW.
        #[arg(long, default_value = "0:400:10")]
        pump: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze, g2 and sweep bundled for one tag file.
    Report {
        tags: PathBuf,
        #[command(flatten)]
        windows: WindowArgs,
        #[arg(long, default_value = "0:400:10")]
        pump: String,
        /// Points file to fit as part of the report.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sin2")]
        law: Law,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal window start relative to the trigger, e.g. 200ns.
    #[arg(long, value_parser = nanos, allow_hyphen_values = true)]
    window_start: Option<f64>,
    #[arg(long, value_parser = nanos)]
    window_width: Option<f64>,
    #[arg(long, value_parser = nanos)]
    noise_delay: Option<f64>,
    #[arg(long, value_parser = nanos)]
    bin: Option<f64>,
    #[arg(long, default_value_t = 20)]
    max_n: u64,
    /// Attempts per unit of the g2 separation n.
    #[arg(long, default_value_t = 1)]
    attempts_per_shift: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Sin2,
    Linear,
}

impl From<Law> for FitLaw {
    fn from(l: Law) -> Self {
        match l {
            Law::Sin2 => FitLaw::Sin2,
            Law::Linear => FitLaw::Linear,
        }
    }
}

fn count(s: &str) -> Result<u64, String> {
    parse_count(s).map_err(|e| e.to_string())
}

fn seconds(s: &str) -> Result<f64, String> {
    parse_duration_s(s).map_err(|e| e.to_string())
}

fn nanos(s: &str) -> Result<f64, String> {
    parse_duration_ns(s).map_err(|e| e.to_string())
}

impl WindowArgs {
    fn params(&self) -> Result<AnalysisParams, CliError> {
        let cfg = match &self.config {
            Some(p) => load_config_file(p)?,
            None => load_config("")?,
        };
        let mut p = AnalysisParams::from_config(&cfg);
        if self.window_start.is_some() {
            p.window_start_ns = self.window_start;
        }
        p.window_width_ns = self.window_width.unwrap_or(p.window_width_ns);
        p.noise_delay_ns = self.noise_delay.unwrap_or(p.noise_delay_ns);
        p.bin_ns = self.bin.unwrap_or(p.bin_ns);
        p.max_n = self.max_n;
        p.attempts_per_shift = self.attempts_per_shift;
        Ok(p)
    }
}

fn emit(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    let text = report.render()?;
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, seed, attempts, duration, out, workers } => {
            let length = attempts.map(RunLength::Attempts).or(duration.map(RunLength::Duration));
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from)).max(1);
            let s = cmd_simulate(&SimulateOptions { config, seed, length, out: out.clone(), workers })?;
            eprintln!(
                "wrote {} records ({} bytes, {} attempts) to {}; sha256 {}",
                s.records,
                s.bytes,
                s.header.attempt_count,
                out.display(),
                hex::encode(s.sha256)
            );
            Ok(())
        }
        Command::Analyze { tags, windows, out } => emit(&cmd_analyze(&tags, &windows.params()?)?, out.as_deref()),
        Command::G2 { tags, windows, out } => emit(&cmd_g2(&tags, &windows.params()?)?, out.as_deref()),
        Command::Fit { points, law, out } => emit(&cmd_fit(&points, law.into())?, out.as_deref()),
        Command::Sweep { config, pump, out } => {
            emit(&cmd_sweep(config.as_deref(), &parse_grid(&pump)?)?, out.as_deref())
        }
        Command::Report { tags, windows, pump, points, law, out } => {
            let params = windows.params()?;
            let fit = points.as_deref().map(|p| (p, law.into()));
            let r = cmd_report(&tags, windows.config.as_deref(), &params, &parse_grid(&pump)?, fit)?;
            emit(&r, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
