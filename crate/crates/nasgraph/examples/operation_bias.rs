//! Operation frequencies in the top 10% under a metric versus under the
//! ground truth.

use nasgraph::harness::{self, BiasArgs, Metric, ScoreConfig};
use nasgraph::measures::MeasureKind;
use nasgraph::synthetic::{self, AccuracyModel};
use nasgraph::SurrogateConfig;

fn main() -> Result<(), nasgraph::Error> {
    let config = ScoreConfig {
        surrogate: SurrogateConfig::new(8, 1, 2).with_probe_resolution(16),
        measure: MeasureKind::AvgDeg,
        seeds: vec![0],
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let records = synthetic::benchmark(100, 4, "cifar10", AccuracyModel::Noise, &config, jobs)?;
    for metric in [Metric::Measure(MeasureKind::AvgDeg), Metric::GroundTruth] {
        let mut args = BiasArgs::new("cifar10", metric, config.clone());
        args.jobs = jobs;
        print!("{}", harness::bias(&records, &args)?.to_text());
    }
    Ok(())
}
