//! Repeated random search guided by average degree, against the best
//! architecture in each sampled subset.

use nasgraph::harness::{self, Metric, ScoreConfig, SearchArgs};
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
    let records = synthetic::benchmark(150, 2, "cifar10", AccuracyModel::Noise, &config, jobs)?;
    for metric in [Metric::Measure(MeasureKind::AvgDeg), Metric::GroundTruth] {
        let args = SearchArgs {
            dataset: "cifar10".into(),
            metric,
            config: config.clone(),
            n: 40,
            trials: 25,
            seed: 0,
            jobs,
        };
        print!("{}", harness::run_search(&records, &args)?.to_text());
    }
    Ok(())
}
