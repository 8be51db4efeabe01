use super::{temp_dir, StageLog};
use crate::cli::manifest::StageStatus;
use crate::cli::{CliError, Context};
use crate::detector::{run_experiment, DetectorError, ExperimentConfig, LabeledDataset, SvmParams};
use crate::embedspace::read_centroids_csv;

/// Trains and evaluates the one-vs-rest linear detector on user centroids
/// for every subreddit and temperature.
pub fn cmd_detect(ctx: &Context) -> Result<(), CliError> {
    let d = &ctx.cfg.detector;
    let mut log = StageLog::new(ctx);
    let mut result = Ok(());
    'subs: for sub in &ctx.cfg.subreddits {
        for &t in &ctx.cfg.generation.temperatures {
            let path = log.input(&temp_dir(ctx, "analyze", &sub.name, t).join("centroids.csv"), "analyze")?;
            let centroids = read_centroids_csv(&path).map_err(|e| CliError::Runtime(e.to_string()))?;
            let usable: Vec<_> = centroids.into_iter().filter(|c| !c.is_zero).collect();
            let cfg = ExperimentConfig {
                split_fraction: d.split_fraction,
                runs: d.runs,
                seed: crate::seed::derive(ctx.cfg.seed, "detector", 0),
                normalize: d.normalize,
                svm: SvmParams {
                    c: d.c,
                    tol: d.tol,
                    max_epochs: d.max_epochs,
                },
            };
            let report = LabeledDataset::from_centroids(&usable).and_then(|data| run_experiment(&data, &cfg));
            let report = match report {
                Ok(r) => r,
                Err(e @ DetectorError::ClassTooSmall { .. }) => {
                    result = Err(CliError::Runtime(format!(
                        "{} at {t}: {e}; add targets or users (generation.max_targets_per_user, a wider target window) so every group has at least 2 users",
                        sub.name
                    )));
                    break 'subs;
                }
                Err(e) => {
                    result = Err(CliError::Runtime(format!("{} at {t}: {e}", sub.name)));
                    break 'subs;
                }
            };
            if !report.all_converged {
                log.note(format!("{} at {t}: some runs hit max_epochs before converging", sub.name));
            }
            let dir = temp_dir(ctx, "detect", &sub.name, t);
            log.json(&dir.join("report.json"), &report)?;
            log.csv(&dir.join("confusion.csv"), &report.confusion_table())?;
            log.csv(&dir.join("metrics.csv"), &report.metrics_table())?;
            log::info!(
                "{} at {t}: accuracy {:.4} over {} runs",
                sub.name,
                report.accuracy.mean.unwrap_or(f64::NAN),
                report.runs
            );
        }
    }
    let status = if result.is_ok() { StageStatus::Complete } else { StageStatus::Partial };
    log.finish("detect", status, None)?;
    result
}
