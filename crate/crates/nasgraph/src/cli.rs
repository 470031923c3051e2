//! Command-line front end: `nasgraph score|convert|correlate|search|bias`.
//!
//! `-h` is the surrogate channel count, so help is only available as `--help`.
//! Exit status is 0 on success, 1 for bad input and 2 for internal failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

use crate::archspec::SurrogateConfig;
use crate::harness::{
    self, BiasArgs, CorrelateArgs, GraphFormat, HarnessError, Metric, ScoreConfig, SearchArgs,
};
use crate::measures::MeasureKind;

#[derive(Debug, Parser)]
#[command(name = "nasgraph", version, about = "Training-free architecture scoring via graph conversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one architecture and show the per-seed breakdown.
    #[command(disable_help_flag = true)]
    Score {
        #[arg(long)]
        arch: String,
        #[arg(long, default_value = "avg_deg", value_parser = parse_measure)]
        measure: MeasureKind,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
    /// Export the converted graph of one architecture.
    #[command(disable_help_flag = true)]
    Convert {
        #[arg(long)]
        arch: String,
        /// Initialization seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "dot")]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Rank correlation of a metric with benchmark accuracy.
    #[command(disable_help_flag = true)]
    Correlate {
        #[command(flatten)]
        bench: BenchArgs,
        /// `arch,score` CSV combined with the metric by rank sum.
        #[arg(long)]
        combine: Option<PathBuf>,
        /// Per-architecture CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated random search guided by a metric.
    #[command(disable_help_flag = true)]
    Search {
        #[command(flatten)]
        bench: BenchArgs,
        /// Architectures sampled per trial.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Seed of the first trial; trial t uses seed + t.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Operation frequency bias among top-ranked architectures.
    #[command(disable_help_flag = true)]
    Bias {
        #[command(flatten)]
        bench: BenchArgs,
        /// Fraction of architectures kept under each ranking.
        #[arg(long, default_value_t = 0.10)]
        top: f64,
        /// `arch,score` CSV used as the metric instead of a graph measure.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// `arch,score` CSV combined with the metric by rank sum.
        #[arg(long)]
        combine: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// JSON Lines benchmark file.
    #[arg(long)]
    bench: PathBuf,
    #[arg(long, default_value = "cifar10")]
    dataset: String,
    /// Graph measure, or `gt` for benchmark accuracy.
    #[arg(long, default_value = "avg_deg", value_parser = parse_metric)]
    measure: Metric,
}

#[derive(Debug, Args)]
struct Common {
    /// Channels of the first module.
    #[arg(short = 'h', long, default_value_t = 16)]
    channels: usize,
    /// Cell copies per module.
    #[arg(short = 'c', long, default_value_t = 1)]
    cells: usize,
    /// Number of modules.
    #[arg(short = 'm', long, default_value_t = 3)]
    modules: usize,
    /// Spatial size of the probe input.
    #[arg(long, default_value_t = 32)]
    probe_resolution: usize,
    /// Initialization seeds; repeatable or comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = harness::DEFAULT_SEEDS)]
    seeds: Vec<u64>,
    /// Worker threads (default: logical CPUs).
    #[arg(long, env = "NASGRAPH_JOBS")]
    jobs: Option<usize>,
    #[arg(long, action = ArgAction::Help)]
    help: Option<bool>,
}

impl Common {
    fn score_config(&self, measure: MeasureKind) -> Result<ScoreConfig, HarnessError> {
        let surrogate = SurrogateConfig::new(self.channels, self.cells, self.modules)
            .with_probe_resolution(self.probe_resolution);
        surrogate.validate()?;
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        Ok(ScoreConfig {
            surrogate,
            measure,
            seeds,
        })
    }

    fn jobs(&self) -> Result<usize, HarnessError> {
        match self.jobs {
            Some(0) => Err(HarnessError::ZeroJobs),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)),
        }
    }
}

fn parse_measure(s: &str) -> Result<MeasureKind, String> {
    s.parse().map_err(|e: crate::measures::MeasureError| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
        .map_err(|_| format!("unknown metric `{s}` (avg_deg, density, resilience, wedge or gt)"))
}

fn measure_of(metric: Metric) -> MeasureKind {
    match metric {
        Metric::Measure(m) => m,
        Metric::GroundTruth => MeasureKind::AvgDeg,
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(command: Command) -> Result<String, HarnessError> {
    match command {
        Command::Score {
            arch,
            measure,
            common,
            json: as_json,
        } => {
            let out = harness::cmd_score(&arch, &common.score_config(measure)?)?;
            Ok(if as_json { json(&out) } else { out.to_text() })
        }
        Command::Convert {
            arch,
            seed,
            format,
            out,
            common,
        } => {
            let config = common.score_config(MeasureKind::AvgDeg)?;
            let text = harness::cmd_convert(&arch, config.surrogate, seed, format)?;
            match out {
                Some(path) => write_file(&path, &text).map(|_| String::new()),
                None => Ok(text),
            }
        }
        Command::Correlate {
            bench,
            combine,
            out,
            json: as_json,
            common,
        } => {
            let args = CorrelateArgs {
                dataset: bench.dataset,
                metric: bench.measure,
                config: common.score_config(measure_of(bench.measure))?,
                jobs: common.jobs()?,
                combine: combine.map(harness::load_scores).transpose()?,
            };
            let report = harness::cmd_correlate(&bench.bench, &args)?;
            if let Some(path) = out {
                write_file(&path, &report.to_csv())?;
            }
            Ok(if as_json { json(&report) } else { report.to_text() })
        }
        Command::Search {
            bench,
            n,
            trials,
            seed,
            json: as_json,
            common,
        } => {
            let args = SearchArgs {
                dataset: bench.dataset,
                metric: bench.measure,
                config: common.score_config(measure_of(bench.measure))?,
                n,
                trials,
                seed,
                jobs: common.jobs()?,
            };
            let report = harness::cmd_search(&bench.bench, &args)?;
            Ok(if as_json { json(&report) } else { report.to_text() })
        }
        Command::Bias {
            bench,
            top,
            scores,
            combine,
            json: as_json,
            common,
        } => {
            let mut args = BiasArgs::new(
                bench.dataset,
                bench.measure,
                common.score_config(measure_of(bench.measure))?,
            );
            args.top_fraction = top;
            args.jobs = common.jobs()?;
            args.scores = scores.map(harness::load_scores).transpose()?;
            args.combine = combine.map(harness::load_scores).transpose()?;
            let out = harness::cmd_bias(&bench.bench, &args)?;
            Ok(if as_json { json(&out) } else { out.to_text() })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            if stdout.write_all(text.as_bytes()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
