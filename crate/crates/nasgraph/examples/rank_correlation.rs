//! Spearman and Kendall correlation of average degree against a synthetic
//! benchmark, plus the combined rank of two metrics.

use nasgraph::harness::{self, CorrelateArgs, Metric, ScoreConfig};
use nasgraph::measures::MeasureKind;
use nasgraph::ranker;
use nasgraph::synthetic::{self, AccuracyModel};
use nasgraph::SurrogateConfig;

fn main() -> Result<(), nasgraph::Error> {
    let config = ScoreConfig {
        surrogate: SurrogateConfig::new(8, 1, 2).with_probe_resolution(16),
        measure: MeasureKind::AvgDeg,
        seeds: vec![0, 1],
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    for model in [AccuracyModel::MonotoneInScore, AccuracyModel::Noise] {
        let records = synthetic::benchmark(60, 1, "cifar10", model, &config, jobs)?;
        let args = CorrelateArgs {
            dataset: "cifar10".into(),
            metric: Metric::Measure(MeasureKind::AvgDeg),
            config: config.clone(),
            jobs,
            combine: None,
        };
        println!("{model:?}");
        print!("{}", harness::correlate(&records, &args)?.to_text());
    }

    let a = [3.0, 1.0, 2.0, 5.0];
    let b = [2.0, 1.0, 3.0, 5.0];
    let (ra, rb) = (ranker::rank_with_ties(&a)?, ranker::rank_with_ties(&b)?);
    println!("ranks {ra:?} / {rb:?} -> combined {:?}", ranker::combined_rank(&ra, &rb)?);
    println!("rho {:.3}, tau {:.3}", ranker::spearman_rho(&a, &b)?, ranker::kendall_tau(&a, &b)?);
    Ok(())
}
