//! Benchmark ingestion and the end-to-end commands behind the CLI.
//!
//! Benchmark files are JSON Lines, one architecture per line:
//!
//! ```text
//! {"arch": "|nor_conv_3x3~0|+...", "acc": {"cifar10": {"val": 89.1, "test": 88.7}}}
//! ```
//!
//! Every command is a pure function of its arguments and input files except
//! for the timing fields, which are observational only.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archspec::{self, ArchError, CellSpec, SurrogateConfig};
use crate::graphify::{self, GraphError};
use crate::measures::{MeasureError, MeasureKind};
use crate::ranker::{self, BiasReport, RankError, RankTable};
use crate::search::{self, Accuracy, SearchError, TrialReport, TrialStats};

/// Default probe seeds: eight initializations.
pub const DEFAULT_SEEDS: [u64; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: malformed record: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("line {line}: invalid architecture: {source}")]
    InvalidArch { line: usize, source: ArchError },
    #[error("line {line}: {dataset} accuracy {value} is outside [0, 100]")]
    AccuracyOutOfRange {
        line: usize,
        dataset: String,
        value: f64,
    },
    #[error("dataset `{0}` is missing from the benchmark")]
    UnknownDataset(String),
    #[error("benchmark has no records")]
    EmptyBenchmark,
    #[error("score file: {0}")]
    ScoreFile(String),
    #[error("jobs must be positive")]
    ZeroJobs,
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl HarnessError {
    /// 1 for bad input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Graph(_) | HarnessError::ThreadPool(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub arch: String,
    pub cell: CellSpec,
    pub accuracies: BTreeMap<String, Accuracy>,
}

#[derive(Serialize, Deserialize)]
struct RawAccuracy {
    val: f64,
    test: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    arch: String,
    acc: BTreeMap<String, RawAccuracy>,
}

impl BenchmarkRecord {
    pub fn accuracy(&self, dataset: &str) -> Option<Accuracy> {
        self.accuracies.get(dataset).copied()
    }

    pub fn to_json_line(&self) -> String {
        let raw = RawRecord {
            arch: self.arch.clone(),
            acc: self
                .accuracies
                .iter()
                .map(|(k, a)| {
                    (
                        k.clone(),
                        RawAccuracy {
                            val: a.val,
                            test: a.test,
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("record serializes")
    }
}

/// Parses JSON Lines records; blank lines are skipped, line numbers start at 1.
pub fn parse_benchmark(reader: impl BufRead) -> Result<Vec<BenchmarkRecord>, HarnessError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| HarnessError::MalformedRecord {
            line: line_no,
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| HarnessError::MalformedRecord {
                line: line_no,
                detail: e.to_string(),
            })?;
        let cell = archspec::parse_cell(&raw.arch).map_err(|source| HarnessError::InvalidArch {
            line: line_no,
            source,
        })?;
        let mut accuracies = BTreeMap::new();
        for (dataset, acc) in raw.acc {
            for value in [acc.val, acc.test] {
                if !(0.0..=100.0).contains(&value) {
                    return Err(HarnessError::AccuracyOutOfRange {
                        line: line_no,
                        dataset,
                        value,
                    });
                }
            }
            accuracies.insert(
                dataset,
                Accuracy {
                    val: acc.val,
                    test: acc.test,
                },
            );
        }
        records.push(BenchmarkRecord {
            arch: raw.arch,
            cell,
            accuracies,
        });
    }
    Ok(records)
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchmarkRecord>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_benchmark(BufReader::new(file))
}

pub fn write_benchmark(records: &[BenchmarkRecord], mut out: impl Write) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

/// What an architecture is ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    Measure(MeasureKind),
    /// Benchmark accuracy itself.
    GroundTruth,
}

impl FromStr for Metric {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "gt" {
            Ok(Metric::GroundTruth)
        } else {
            s.parse().map(Metric::Measure)
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Measure(m) => f.write_str(m.name()),
            Metric::GroundTruth => f.write_str("gt"),
        }
    }
}

/// Conversion settings shared by the commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreConfig {
    pub surrogate: SurrogateConfig,
    pub measure: MeasureKind,
    pub seeds: Vec<u64>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            surrogate: SurrogateConfig::default(),
            measure: MeasureKind::AvgDeg,
            seeds: DEFAULT_SEEDS.to_vec(),
        }
    }
}

pub fn score_cell(cell: &CellSpec, config: &ScoreConfig) -> Result<f64, HarnessError> {
    let arch = archspec::expand(cell, config.surrogate)?;
    Ok(graphify::score_architecture(&arch, config.measure, &config.seeds)?)
}

fn with_jobs<T: Send>(
    jobs: usize,
    f: impl FnOnce() -> Result<T, HarnessError> + Send,
) -> Result<T, HarnessError> {
    if jobs == 0 {
        return Err(HarnessError::ZeroJobs);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
        .install(f)
}

/// Scores cells on `jobs` worker threads; output order matches input order.
pub fn score_cells(cells: &[&CellSpec], config: &ScoreConfig, jobs: usize) -> Result<Vec<f64>, HarnessError> {
    with_jobs(jobs, || {
        cells
            .par_iter()
            .map(|cell| score_cell(cell, config))
            .collect()
    })
}

fn dataset_accuracies(
    records: &[BenchmarkRecord],
    dataset: &str,
) -> Result<Vec<Accuracy>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyBenchmark);
    }
    records
        .iter()
        .map(|r| {
            r.accuracy(dataset)
                .ok_or_else(|| HarnessError::UnknownDataset(dataset.to_string()))
        })
        .collect()
}

/// Reads `arch,score` pairs from a CSV with a header row naming at least
/// those two columns.
pub fn load_scores(path: impl AsRef<Path>) -> Result<HashMap<String, f64>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_scores(file)
}

pub fn parse_scores(reader: impl Read) -> Result<HashMap<String, f64>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| HarnessError::ScoreFile(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::ScoreFile(format!("missing `{name}` column")))
    };
    let (arch_col, score_col) = (col("arch")?, col("score")?);
    let mut scores = HashMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| HarnessError::ScoreFile(e.to_string()))?;
        let value: f64 = row[score_col].trim().parse().map_err(|_| {
            HarnessError::ScoreFile(format!("row {}: bad score `{}`", i + 2, &row[score_col]))
        })?;
        scores.insert(row[arch_col].to_string(), value);
    }
    Ok(scores)
}

fn external_scores(
    records: &[BenchmarkRecord],
    scores: &HashMap<String, f64>,
) -> Result<Vec<f64>, HarnessError> {
    records
        .iter()
        .map(|r| {
            scores
                .get(&r.arch)
                .copied()
                .ok_or_else(|| HarnessError::ScoreFile(format!("no score for {}", r.arch)))
        })
        .collect()
}

fn metric_scores(
    records: &[BenchmarkRecord],
    accs: &[Accuracy],
    metric: Metric,
    config: &ScoreConfig,
    jobs: usize,
) -> Result<Vec<f64>, HarnessError> {
    match metric {
        Metric::GroundTruth => Ok(accs.iter().map(|a| a.test).collect()),
        Metric::Measure(measure) => {
            let config = ScoreConfig {
                measure,
                ..config.clone()
            };
            let cells: Vec<&CellSpec> = records.iter().map(|r| &r.cell).collect();
            score_cells(&cells, &config, jobs)
        }
    }
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedScore {
    pub seed: u64,
    pub value: f64,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreOutput {
    pub arch: String,
    pub measure: MeasureKind,
    pub surrogate: SurrogateConfig,
    pub score: f64,
    pub per_seed: Vec<SeedScore>,
}

impl ScoreOutput {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "arch\t{}", self.arch);
        let _ = writeln!(
            s,
            "surrogate\t{} probe={}",
            self.surrogate, self.surrogate.probe_resolution
        );
        let _ = writeln!(s, "measure\t{}", self.measure);
        for p in &self.per_seed {
            let _ = writeln!(
                s,
                "seed {}\t{}\tnodes={} edges={}",
                p.seed, p.value, p.nodes, p.edges
            );
        }
        let _ = writeln!(s, "score\t{}", self.score);
        s
    }
}

pub fn cmd_score(arch: &str, config: &ScoreConfig) -> Result<ScoreOutput, HarnessError> {
    if config.seeds.is_empty() {
        return Err(GraphError::NoSeeds.into());
    }
    let cell = archspec::parse_cell(arch)?;
    let spec = archspec::expand(&cell, config.surrogate)?;
    let per_seed = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let g = graphify::convert(&spec, seed)?;
            Ok(SeedScore {
                seed,
                value: config.measure.evaluate(&g)?,
                nodes: g.node_count(),
                edges: g.edge_count(),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let values: Vec<f64> = per_seed.iter().map(|p| p.value).collect();
    Ok(ScoreOutput {
        arch: arch.trim().to_string(),
        measure: config.measure,
        surrogate: config.surrogate,
        score: graphify::order_free_mean(&values),
        per_seed,
    })
}

// -------------------------------------------------------------- convert

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Tsv,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "tsv" => Ok(GraphFormat::Tsv),
            other => Err(format!("unknown graph format `{other}` (dot or tsv)")),
        }
    }
}

pub fn cmd_convert(
    arch: &str,
    surrogate: SurrogateConfig,
    seed: u64,
    format: GraphFormat,
) -> Result<String, HarnessError> {
    let cell = archspec::parse_cell(arch)?;
    let spec = archspec::expand(&cell, surrogate)?;
    let graph = graphify::convert(&spec, seed)?;
    Ok(match format {
        GraphFormat::Dot => graph.to_dot(),
        GraphFormat::Tsv => graph.to_tsv(),
    })
}

// ------------------------------------------------------------ correlate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub arch: String,
    pub score: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub rank_score: f64,
    pub rank_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub channels: usize,
    pub cells_per_module: usize,
    pub modules: usize,
    pub probe_resolution: usize,
    pub seeds: Vec<u64>,
    pub metric: String,
}

impl ConfigEcho {
    fn new(config: &ScoreConfig, metric: Metric) -> Self {
        ConfigEcho {
            channels: config.surrogate.channels,
            cells_per_module: config.surrogate.cells_per_module,
            modules: config.surrogate.modules,
            probe_resolution: config.surrogate.probe_resolution,
            seeds: config.seeds.clone(),
            metric: metric.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlations {
    pub spearman_test: f64,
    pub kendall_test: f64,
    pub spearman_val: f64,
    pub kendall_val: f64,
}

impl Correlations {
    fn compute(scores: &[f64], accs: &[Accuracy]) -> Result<Self, RankError> {
        let test: Vec<f64> = accs.iter().map(|a| a.test).collect();
        let val: Vec<f64> = accs.iter().map(|a| a.val).collect();
        Ok(Correlations {
            spearman_test: ranker::spearman_rho(scores, &test)?,
            kendall_test: ranker::kendall_tau(scores, &test)?,
            spearman_val: ranker::spearman_rho(scores, &val)?,
            kendall_val: ranker::kendall_tau(scores, &val)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub dataset: String,
    pub config: ConfigEcho,
    pub records: usize,
    pub correlations: Correlations,
    /// Correlations of the combined rank with an external metric, if given.
    pub combined: Option<Correlations>,
    pub seconds: f64,
    pub entries: Vec<ReportEntry>,
}

impl MetricReport {
    /// `arch,score,val_acc,test_acc,rank_score,rank_acc` with a header row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["arch", "score", "val_acc", "test_acc", "rank_score", "rank_acc"])
            .expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.arch.clone(),
                e.score.to_string(),
                e.val_acc.to_string(),
                e.test_acc.to_string(),
                e.rank_score.to_string(),
                e.rank_acc.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset {}  metric {}  NASGraph({}, {}, {})  seeds {:?}  records {}",
            self.dataset, c.metric, c.channels, c.cells_per_module, c.modules, c.seeds, self.records
        );
        let row = |s: &mut String, name: &str, k: &Correlations| {
            let _ = writeln!(
                s,
                "{name:<10} test rho {:.4} tau {:.4} | val rho {:.4} tau {:.4}",
                k.spearman_test, k.kendall_test, k.spearman_val, k.kendall_val
            );
        };
        row(&mut s, &c.metric, &self.correlations);
        if let Some(k) = &self.combined {
            row(&mut s, "comb_rank", k);
        }
        let _ = writeln!(s, "seconds {:.3}", self.seconds);
        s
    }
}

#[derive(Debug, Clone)]
pub struct CorrelateArgs {
    pub dataset: String,
    pub metric: Metric,
    pub config: ScoreConfig,
    pub jobs: usize,
    /// External `arch,score` table combined with the metric by rank sum.
    pub combine: Option<HashMap<String, f64>>,
}

pub fn correlate(records: &[BenchmarkRecord], args: &CorrelateArgs) -> Result<MetricReport, HarnessError> {
    let start = Instant::now();
    let accs = dataset_accuracies(records, &args.dataset)?;
    let scores = metric_scores(records, &accs, args.metric, &args.config, args.jobs)?;
    let test: Vec<f64> = accs.iter().map(|a| a.test).collect();
    let rank_score = ranker::rank_with_ties(&scores)?;
    let rank_acc = ranker::rank_with_ties(&test)?;
    let correlations = Correlations::compute(&scores, &accs)?;

    let combined = match &args.combine {
        None => None,
        Some(table) => {
            let other = ranker::rank_with_ties(&external_scores(records, table)?)?;
            let comb = ranker::combined_rank(&rank_score, &other)?;
            // higher is better for the correlation
            let as_score: Vec<f64> = comb.iter().map(|r| -r).collect();
            Some(Correlations::compute(&as_score, &accs)?)
        }
    };

    let entries = records
        .iter()
        .zip(&accs)
        .enumerate()
        .map(|(i, (r, a))| ReportEntry {
            arch: r.arch.clone(),
            score: scores[i],
            val_acc: a.val,
            test_acc: a.test,
            rank_score: rank_score[i],
            rank_acc: rank_acc[i],
        })
        .collect();

    Ok(MetricReport {
        dataset: args.dataset.clone(),
        config: ConfigEcho::new(&args.config, args.metric),
        records: records.len(),
        correlations,
        combined,
        seconds: start.elapsed().as_secs_f64(),
        entries,
    })
}

pub fn cmd_correlate(bench: impl AsRef<Path>, args: &CorrelateArgs) -> Result<MetricReport, HarnessError> {
    correlate(&load_benchmark(bench)?, args)
}

// --------------------------------------------------------------- search

#[derive(Debug, Clone)]
pub struct SearchArgs {
    pub dataset: String,
    pub metric: Metric,
    pub config: ScoreConfig,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub dataset: String,
    pub config: ConfigEcho,
    pub n: usize,
    pub trials: usize,
    pub chosen_val: TrialStats,
    pub chosen_test: TrialStats,
    pub gt_val: TrialStats,
    pub gt_test: TrialStats,
    /// Architectures converted across all trials.
    pub scored_architectures: usize,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
}

impl SearchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset {}  metric {}  N {}  trials {}",
            self.dataset, self.config.metric, self.n, self.trials
        );
        let _ = writeln!(s, "{:<8} {:>16} {:>16}", "", "validation", "test");
        for (name, v, t) in [
            ("chosen", &self.chosen_val, &self.chosen_test),
            ("GT", &self.gt_val, &self.gt_test),
        ] {
            let _ = writeln!(
                s,
                "{name:<8} {:>8.2} ± {:<5.2} {:>8.2} ± {:<5.2}",
                v.mean, v.std, t.mean, t.std
            );
        }
        let _ = writeln!(
            s,
            "scored {} architectures in {:.3} CPU s ({:.3} s wall)",
            self.scored_architectures, self.cpu_seconds, self.wall_seconds
        );
        s
    }
}

/// CPU time consumed by this process, all threads included.
pub fn process_cpu_seconds() -> f64 {
    #[cfg(unix)]
    {
        let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
        // SAFETY: getrusage only writes into the provided struct.
        let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
        if rc == 0 {
            // SAFETY: rc == 0 means the struct was filled in.
            let u = unsafe { usage.assume_init() };
            let tv = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
            return tv(u.ru_utime) + tv(u.ru_stime);
        }
    }
    0.0
}

pub fn run_search(records: &[BenchmarkRecord], args: &SearchArgs) -> Result<SearchReport, HarnessError> {
    let wall = Instant::now();
    let cpu = process_cpu_seconds();
    let accs = dataset_accuracies(records, &args.dataset)?;
    let pool: Vec<usize> = (0..records.len()).collect();
    let accuracy = |i: usize| Some(accs[i]);

    // only architectures drawn by some trial are converted
    let mut needed = vec![false; records.len()];
    for t in 0..args.trials as u64 {
        for i in search::sample_subset(records.len(), args.n, args.seed.wrapping_add(t))? {
            needed[i] = true;
        }
    }
    let scored_architectures = match args.metric {
        Metric::GroundTruth => 0,
        Metric::Measure(_) => needed.iter().filter(|&&b| b).count(),
    };

    let report = match args.metric {
        Metric::GroundTruth => {
            let by_val = search::repeated_trials(
                &pool,
                |i| accs[i].val,
                accuracy,
                args.n,
                args.trials,
                args.seed,
            )?;
            let by_test = search::repeated_trials(
                &pool,
                |i| accs[i].test,
                accuracy,
                args.n,
                args.trials,
                args.seed,
            )?;
            TrialReport::merge_columns(by_val, by_test)
        }
        Metric::Measure(measure) => {
            let config = ScoreConfig {
                measure,
                ..args.config.clone()
            };
            let ids: Vec<usize> = (0..records.len()).filter(|&i| needed[i]).collect();
            let cells: Vec<&CellSpec> = ids.iter().map(|&i| &records[i].cell).collect();
            let values = score_cells(&cells, &config, args.jobs)?;
            let mut score = vec![f64::NAN; records.len()];
            for (&i, v) in ids.iter().zip(values) {
                score[i] = v;
            }
            with_jobs(args.jobs, || {
                Ok(search::repeated_trials(
                    &pool,
                    |i| score[i],
                    accuracy,
                    args.n,
                    args.trials,
                    args.seed,
                )?)
            })?
        }
    };

    let unwrap = |s: Option<TrialStats>| s.expect("accuracies are present for every record");
    Ok(SearchReport {
        dataset: args.dataset.clone(),
        config: ConfigEcho::new(&args.config, args.metric),
        n: args.n,
        trials: args.trials,
        chosen_val: unwrap(report.chosen_val),
        chosen_test: unwrap(report.chosen_test),
        gt_val: unwrap(report.gt_val),
        gt_test: unwrap(report.gt_test),
        scored_architectures,
        wall_seconds: wall.elapsed().as_secs_f64(),
        cpu_seconds: process_cpu_seconds() - cpu,
    })
}

pub fn cmd_search(bench: impl AsRef<Path>, args: &SearchArgs) -> Result<SearchReport, HarnessError> {
    run_search(&load_benchmark(bench)?, args)
}

// ----------------------------------------------------------------- bias

#[derive(Debug, Clone)]
pub struct BiasArgs {
    pub dataset: String,
    pub metric: Metric,
    pub config: ScoreConfig,
    pub top_fraction: f64,
    pub jobs: usize,
    /// Use these `arch -> score` values instead of a graph measure.
    pub scores: Option<HashMap<String, f64>>,
    /// Combine the metric with these scores by rank sum.
    pub combine: Option<HashMap<String, f64>>,
}

impl BiasArgs {
    pub fn new(dataset: impl Into<String>, metric: Metric, config: ScoreConfig) -> Self {
        BiasArgs {
            dataset: dataset.into(),
            metric,
            config,
            top_fraction: 0.10,
            jobs: 1,
            scores: None,
            combine: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasOutput {
    pub dataset: String,
    pub metric: String,
    pub report: BiasReport,
}

impl BiasOutput {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset {}  metric {}  top {} ({} architectures)",
            self.dataset, self.metric, self.report.top_fraction, self.report.top_count
        );
        let _ = writeln!(s, "{:<14} {:>8} {:>8}", "operation", "metric", "gt");
        for (op, m, g) in self.report.rows() {
            let _ = writeln!(s, "{:<14} {m:>8.4} {g:>8.4}", op.name());
        }
        let _ = writeln!(s, "bias {:.4}", self.report.bias);
        s
    }
}

pub fn bias(records: &[BenchmarkRecord], args: &BiasArgs) -> Result<BiasOutput, HarnessError> {
    let accs = dataset_accuracies(records, &args.dataset)?;
    let (scores, mut label) = match &args.scores {
        Some(table) => (external_scores(records, table)?, "external".to_string()),
        None => (
            metric_scores(records, &accs, args.metric, &args.config, args.jobs)?,
            args.metric.to_string(),
        ),
    };
    let ids: Vec<String> = (0..records.len()).map(|i| i.to_string()).collect();
    let mut metric = RankTable::from_scores(ids.iter().cloned().zip(scores))?;
    if let Some(table) = &args.combine {
        let other = RankTable::from_scores(ids.iter().cloned().zip(external_scores(records, table)?))?;
        metric = metric.combined(&other)?;
        label = format!("comb_rank({label})");
    }
    let gt = RankTable::from_scores(ids.iter().cloned().zip(accs.iter().map(|a| a.test)))?;
    let cells: HashMap<String, CellSpec> = ids
        .into_iter()
        .zip(records.iter().map(|r| r.cell.clone()))
        .collect();
    let report = ranker::operation_bias(&metric, &gt, &cells, args.top_fraction)?;
    Ok(BiasOutput {
        dataset: args.dataset.clone(),
        metric: label,
        report,
    })
}

pub fn cmd_bias(bench: impl AsRef<Path>, args: &BiasArgs) -> Result<BiasOutput, HarnessError> {
    bias(&load_benchmark(bench)?, args)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARCH: &str = "|nor_conv_3x3~0|+|none~0|skip_connect~1|+|none~0|none~1|avg_pool_3x3~2|";

    #[test]
    fn empty_and_single_record() {
        assert!(parse_benchmark("".as_bytes()).unwrap().is_empty());
        let line = format!(r#"{{"arch": "{ARCH}", "acc": {{"cifar10": {{"val": 89.1, "test": 88.7}}}}}}"#);
        let recs = parse_benchmark(line.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(
            recs[0].accuracy("cifar10"),
            Some(Accuracy {
                val: 89.1,
                test: 88.7
            })
        );
        assert_eq!(parse_benchmark(recs[0].to_json_line().as_bytes()).unwrap(), recs);
    }

    #[test]
    fn validation_errors_carry_line_numbers() {
        let good = format!(r#"{{"arch": "{ARCH}", "acc": {{"c": {{"val": 1, "test": 2}}}}}}"#);
        let high = format!(r#"{{"arch": "{ARCH}", "acc": {{"c": {{"val": 101.0, "test": 2}}}}}}"#);
        let text = format!("{good}\n\n{high}\n");
        match parse_benchmark(text.as_bytes()) {
            Err(HarnessError::AccuracyOutOfRange { line, value, .. }) => {
                assert_eq!((line, value), (3, 101.0))
            }
            other => panic!("{other:?}"),
        }
        let bad_arch = r#"{"arch": "|conv~0|", "acc": {}}"#;
        assert!(matches!(
            parse_benchmark(format!("{good}\n{bad_arch}").as_bytes()),
            Err(HarnessError::InvalidArch { line: 2, .. })
        ));
        assert!(matches!(
            parse_benchmark("{not json".as_bytes()),
            Err(HarnessError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn metric_names() {
        assert_eq!("gt".parse::<Metric>(), Ok(Metric::GroundTruth));
        assert_eq!(
            "wedge".parse::<Metric>(),
            Ok(Metric::Measure(MeasureKind::WedgeCount))
        );
        assert!("synflow".parse::<Metric>().is_err());
    }

    #[test]
    fn score_files() {
        let table = parse_scores("score,arch,extra\n1.5,a,x\n-2,\"b,c\",y\n".as_bytes()).unwrap();
        assert_eq!(table["a"], 1.5);
        assert_eq!(table["b,c"], -2.0);
        assert!(parse_scores("arch,value\na,1\n".as_bytes()).is_err());
        assert!(parse_scores("arch,score\na,zz\n".as_bytes()).is_err());
    }

    #[test]
    fn unknown_dataset() {
        let recs = parse_benchmark(
            format!(r#"{{"arch": "{ARCH}", "acc": {{"c": {{"val": 1, "test": 2}}}}}}"#).as_bytes(),
        )
        .unwrap();
        let args = CorrelateArgs {
            dataset: "imagenet".into(),
            metric: Metric::GroundTruth,
            config: ScoreConfig::default(),
            jobs: 1,
            combine: None,
        };
        assert!(matches!(
            correlate(&recs, &args),
            Err(HarnessError::UnknownDataset(_))
        ));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::EmptyBenchmark.exit_code(), 1);
        assert_eq!(HarnessError::Graph(GraphError::NoSeeds).exit_code(), 2);
    }
}
