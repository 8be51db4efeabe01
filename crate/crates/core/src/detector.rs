//! One-vs-rest linear SVM over user centroids, trained by dual coordinate
//! descent on the L2-regularized hinge loss, with repeated stratified
//! holdout evaluation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedspace::{Group, UserCentroid};
use crate::io::{fmt_f64, CsvTable};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectorError {
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("class {class} has {count} member(s); every class needs at least 2 for a stratified split")]
    ClassTooSmall { class: String, count: usize },
    #[error("invalid dataset or parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    /// Indices into `class_names`.
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, class_names: Vec<String>) -> Result<Self, DetectorError> {
        if x.len() != y.len() {
            return Err(DetectorError::Invalid(format!("{} rows but {} labels", x.len(), y.len())));
        }
        let d = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != d) {
            return Err(DetectorError::Invalid("rows differ in length".into()));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DetectorError::NonFinite);
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= class_names.len()) {
            return Err(DetectorError::Invalid(format!("label {bad} has no class name")));
        }
        Ok(LabeledDataset { x, y, class_names })
    }

    /// Classes are the groups present, in their fixed order.
    pub fn from_centroids(centroids: &[UserCentroid]) -> Result<Self, DetectorError> {
        let present: Vec<Group> = Group::ALL
            .into_iter()
            .filter(|g| centroids.iter().any(|c| c.group == *g))
            .collect();
        let y = centroids
            .iter()
            .map(|c| present.iter().position(|g| *g == c.group).expect("present"))
            .collect();
        let x = centroids.iter().map(|c| c.vector.clone()).collect();
        LabeledDataset::new(x, y, present.iter().map(|g| g.to_string()).collect())
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &l in &self.y {
            c[l] += 1;
        }
        c
    }

    pub fn check_stratifiable(&self) -> Result<(), DetectorError> {
        for (name, &count) in self.class_names.iter().zip(&self.class_counts()) {
            if count < 2 {
                return Err(DetectorError::ClassTooSmall {
                    class: name.clone(),
                    count,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// False if any per-class problem hit `max_epochs`.
    pub converged: bool,
}

impl LinearSvm {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

/// First index of the maximum, so ties go to the earlier class.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Trains one binary problem per class. The bias is learned as the weight
/// of a constant feature; coordinates are visited in a seeded random order
/// each epoch and training stops once the projected-gradient spread falls
/// below `tol`.
pub fn train_linear_svm(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<LinearSvm, DetectorError> {
    if !(params.c > 0.0) {
        return Err(DetectorError::Invalid("C must be positive".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DetectorError::NonFinite);
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(DetectorError::Invalid("empty or mismatched training set".into()));
    }
    let fits: Vec<(Vec<f64>, f64, bool)> = (0..n_classes)
        .map(|k| {
            let signs: Vec<f64> = y.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            binary_dcd(x, &signs, params, crate::seed::derive(seed, "svm-class", k as u64))
        })
        .collect();
    let converged = fits.iter().all(|f| f.2);
    if !converged {
        log::warn!("linear SVM stopped at {} epochs before converging", params.max_epochs);
    }
    Ok(LinearSvm {
        weights: fits.iter().map(|f| f.0.clone()).collect(),
        biases: fits.iter().map(|f| f.1).collect(),
        converged,
    })
}

fn binary_dcd(x: &[Vec<f64>], s: &[f64], p: &SvmParams, seed: u64) -> (Vec<f64>, f64, bool) {
    let n = x.len();
    let d = x[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qii: Vec<f64> = x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::seed::rng(seed, "dcd", 0);
    for _ in 0..p.max_epochs {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let margin = x[i].iter().zip(&w).map(|(v, wj)| v * wj).sum::<f64>() + b;
            let g = s[i] * margin - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == p.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, p.c);
                let step = (alpha[i] - old) * s[i];
                w.iter_mut().zip(&x[i]).for_each(|(wj, v)| *wj += step * v);
                b += step;
            }
        }
        if pg_max - pg_min <= p.tol {
            return (w, b, true);
        }
    }
    (w, b, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class is absent from the test labels.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<u64>>,
}

pub fn evaluate(model: &LinearSvm, x_test: &[Vec<f64>], y_test: &[usize]) -> Result<Evaluation, DetectorError> {
    if x_test.is_empty() {
        return Err(DetectorError::EmptyTestSet);
    }
    let preds: Vec<usize> = x_test.iter().map(|r| model.predict(r)).collect();
    Ok(score_predictions(&preds, y_test, model.weights.len()))
}

pub fn score_predictions(preds: &[usize], truth: &[usize], k: usize) -> Evaluation {
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in preds.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let per_class = (0..k)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = (0..k).map(|r| confusion[r][c]).sum();
            let precision = (predicted > 0).then(|| tp / predicted as f64);
            let recall = (support > 0).then(|| tp / support as f64);
            let f1 = match (precision, recall) {
                (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                (Some(_), Some(_)) => Some(0.0),
                _ => None,
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    Evaluation {
        per_class,
        accuracy: correct as f64 / preds.len() as f64,
        confusion,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub split_fraction: f64,
    pub runs: usize,
    pub seed: u64,
    pub normalize: bool,
    pub svm: SvmParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split_fraction: 0.8,
            runs: 10,
            seed: 0,
            normalize: true,
            svm: SvmParams::default(),
        }
    }
}

/// Mean and sample standard deviation over the runs where a value exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl RunStat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> RunStat {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return RunStat { mean: None, std: None, n: 0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        RunStat {
            mean: Some(mean),
            std: Some(std),
            n: v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub precision: RunStat,
    pub recall: RunStat,
    pub f1: RunStat,
    pub test_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassSummary>,
    pub accuracy: RunStat,
    pub confusion: Vec<Vec<u64>>,
    pub runs: usize,
    pub split_fraction: f64,
    pub config: ExperimentConfig,
    pub all_converged: bool,
    pub per_run: Vec<Evaluation>,
}

impl DetectorReport {
    pub fn confusion_table(&self) -> CsvTable {
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        let mut t = CsvTable::new(&header);
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let mut cells = vec![name.clone()];
            cells.extend(row.iter().map(u64::to_string));
            t.row(cells);
        }
        t
    }

    pub fn metrics_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "class", "precision_mean", "precision_std", "recall_mean", "recall_std", "f1_mean", "f1_std", "test_count",
        ]);
        let f = |x: Option<f64>| fmt_f64(x.unwrap_or(f64::NAN));
        for c in &self.per_class {
            t.row(vec![
                c.class.clone(),
                f(c.precision.mean),
                f(c.precision.std),
                f(c.recall.mean),
                f(c.recall.std),
                f(c.f1.mean),
                f(c.f1.std),
                c.test_count.to_string(),
            ]);
        }
        t
    }
}

pub fn l2_normalize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter().map(|v| v / n).collect()
            } else {
                r.clone()
            }
        })
        .collect()
}

/// Per class, a seeded shuffle puts `round((1 - split) * n)` members, at
/// least one and at most `n - 1`, in the test set.
pub fn stratified_split(y: &[usize], n_classes: usize, split_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for k in 0..n_classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == k).collect();
        idx.shuffle(&mut crate::seed::rng(seed, "stratify", k as u64));
        let n = idx.len();
        let n_test = (((1.0 - split_fraction) * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Repeated stratified holdout; runs execute in parallel and are
/// aggregated by run index.
pub fn run_experiment(data: &LabeledDataset, cfg: &ExperimentConfig) -> Result<DetectorReport, DetectorError> {
    data.check_stratifiable()?;
    if !(0.0 < cfg.split_fraction && cfg.split_fraction < 1.0) || cfg.runs == 0 {
        return Err(DetectorError::Invalid("split_fraction must be in (0, 1) and runs >= 1".into()));
    }
    let x = if cfg.normalize { l2_normalize(&data.x) } else { data.x.clone() };
    let k = data.n_classes();
    let results: Vec<Result<(Evaluation, bool), DetectorError>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let run_seed = crate::seed::derive(cfg.seed, "detector-run", run as u64);
            let (train, test) = stratified_split(&data.y, k, cfg.split_fraction, run_seed);
            let pick = |ix: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
                (ix.iter().map(|&i| x[i].clone()).collect(), ix.iter().map(|&i| data.y[i]).collect())
            };
            let (xtr, ytr) = pick(&train);
            let (xte, yte) = pick(&test);
            let model = train_linear_svm(&xtr, &ytr, k, &cfg.svm, run_seed)?;
            Ok((evaluate(&model, &xte, &yte)?, model.converged))
        })
        .collect();
    let mut per_run = Vec::with_capacity(cfg.runs);
    let mut all_converged = true;
    for r in results {
        let (e, c) = r?;
        all_converged &= c;
        per_run.push(e);
    }
    let mut confusion = vec![vec![0u64; k]; k];
    for e in &per_run {
        for (row, erow) in confusion.iter_mut().zip(&e.confusion) {
            row.iter_mut().zip(erow).for_each(|(a, b)| *a += b);
        }
    }
    let per_class = (0..k)
        .map(|c| ClassSummary {
            class: data.class_names[c].clone(),
            precision: RunStat::of(per_run.iter().map(|e| e.per_class[c].precision)),
            recall: RunStat::of(per_run.iter().map(|e| e.per_class[c].recall)),
            f1: RunStat::of(per_run.iter().map(|e| e.per_class[c].f1)),
            test_count: confusion[c].iter().sum(),
        })
        .collect();
    Ok(DetectorReport {
        class_names: data.class_names.clone(),
        per_class,
        accuracy: RunStat::of(per_run.iter().map(|e| Some(e.accuracy))),
        confusion,
        runs: cfg.runs,
        split_fraction: cfg.split_fraction,
        config: cfg.clone(),
        all_converged,
        per_run,
    })
}

/// Five 2-D Gaussian clusters with centres on the unit circle.
pub fn circle_clusters(per_class: usize, sigma: f64, seed: u64) -> LabeledDataset {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = crate::seed::rng(seed, "circle-clusters", 0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in 0..5 {
        let a = std::f64::consts::TAU * k as f64 / 5.0;
        for _ in 0..per_class {
            x.push(vec![a.cos() + normal.sample(&mut rng), a.sin() + normal.sample(&mut rng)]);
            y.push(k);
        }
    }
    let names = Group::ALL.iter().map(|g| g.to_string()).collect();
    LabeledDataset::new(x, y, names).expect("well-formed")
}
