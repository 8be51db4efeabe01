//! Train and evaluate the one-vs-rest linear detector on synthetic clusters,
//! then on the same points with shuffled labels.
//!
//! cargo run --example detector

use rand::seq::SliceRandom;

use threadsim::detector::{circle_clusters, run_experiment, ExperimentConfig, LabeledDataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = circle_clusters(40, 0.05, 1);
    let cfg = ExperimentConfig { seed: 5, ..ExperimentConfig::default() };
    let report = run_experiment(&data, &cfg)?;
    println!("separable: accuracy {:?} +/- {:?}", report.accuracy.mean, report.accuracy.std);
    print!("{}", report.metrics_table().to_csv_string());
    print!("{}", report.confusion_table().to_csv_string());

    let mut y = data.y.clone();
    y.shuffle(&mut threadsim::seed::rng(5, "example-shuffle", 0));
    let noise = LabeledDataset::new(data.x.clone(), y, data.class_names.clone())?;
    let report = run_experiment(&noise, &cfg)?;
    println!("shuffled labels: accuracy {:.3} (chance 0.2)", report.accuracy.mean.unwrap_or(f64::NAN));
    Ok(())
}
