//! Embedding-space analysis: user centroids, similarity baselines, group
//! distance matrices and 2-D projection (PCA, exact t-SNE).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{fmt_f64, CsvTable};
use crate::scenario::ScenarioKind;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EmbedError {
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("generated user {0} has no real counterpart")]
    MissingCounterpart(String),
    #[error("group {0} has a single member")]
    SingletonGroup(Group),
    #[error("t-SNE needs at least 3 x perplexity points: {n} points, perplexity {perplexity}")]
    PerplexityTooLarge { n: usize, perplexity: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Where a comment (or user centroid) comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Real,
    RealHistory,
    NoHistory,
    ProCandidate,
    AntiCandidate,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::Real,
        Group::RealHistory,
        Group::NoHistory,
        Group::ProCandidate,
        Group::AntiCandidate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Real => "real",
            Group::RealHistory => "real_history",
            Group::NoHistory => "no_history",
            Group::ProCandidate => "pro_candidate",
            Group::AntiCandidate => "anti_candidate",
        }
    }

    pub fn index(self) -> usize {
        Group::ALL.iter().position(|&g| g == self).expect("listed")
    }
}

impl From<ScenarioKind> for Group {
    fn from(s: ScenarioKind) -> Self {
        match s {
            ScenarioKind::RealHistory => Group::RealHistory,
            ScenarioKind::NoHistory => Group::NoHistory,
            ScenarioKind::ProCandidate => Group::ProCandidate,
            ScenarioKind::AntiCandidate => Group::AntiCandidate,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Group::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown group {s:?}"))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedComment {
    pub author: String,
    pub group: Group,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCentroid {
    pub author: String,
    pub group: Group,
    pub vector: Vec<f64>,
    pub n_comments: usize,
    /// Set when the mean cancels to the zero vector.
    pub is_zero: bool,
}

/// One centroid per (group, author), sorted by that key.
pub fn user_centroids(comments: &[EmbeddedComment]) -> Result<Vec<UserCentroid>, EmbedError> {
    let mut acc: BTreeMap<(Group, &str), (Vec<f64>, usize)> = BTreeMap::new();
    for c in comments {
        let slot = acc
            .entry((c.group, c.author.as_str()))
            .or_insert_with(|| (vec![0.0; c.vector.len()], 0));
        if slot.0.len() != c.vector.len() {
            return Err(EmbedError::DimMismatch(slot.0.len(), c.vector.len()));
        }
        slot.0.iter_mut().zip(&c.vector).for_each(|(s, v)| *s += v);
        slot.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|((group, author), (mut sum, n))| {
            sum.iter_mut().for_each(|s| *s /= n as f64);
            UserCentroid {
                author: author.to_string(),
                group,
                is_zero: sum.iter().all(|&x| x == 0.0),
                vector: sum,
                n_comments: n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Global threshold: mean similarity under random generated/real pairings.
    #[default]
    RandomMatch,
    /// Per-user threshold: mean similarity to every real centroid.
    AllRealMean,
}

pub const DEFAULT_SHUFFLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserExceedance {
    pub author: String,
    pub similarity: f64,
    pub threshold: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub baseline: Baseline,
    pub proportion: f64,
    pub n_users: usize,
    pub n_exceeding: usize,
    pub users: Vec<UserExceedance>,
}

/// Fraction of generated users whose similarity to their own real centroid
/// is strictly above the baseline threshold.
pub fn similarity_exceedance(
    generated: &[UserCentroid],
    real: &[UserCentroid],
    baseline: Baseline,
    seed: u64,
    n_shuffles: usize,
) -> Result<Exceedance, EmbedError> {
    if generated.is_empty() {
        return Err(EmbedError::InvalidInput("no generated centroids".into()));
    }
    let by_author: HashMap<&str, &UserCentroid> = real.iter().map(|c| (c.author.as_str(), c)).collect();
    let sims: Vec<f64> = generated
        .iter()
        .map(|g| {
            let r = by_author
                .get(g.author.as_str())
                .ok_or_else(|| EmbedError::MissingCounterpart(g.author.clone()))?;
            cosine_similarity(&g.vector, &r.vector)
        })
        .collect::<Result<_, _>>()?;
    let thresholds: Vec<f64> = match baseline {
        Baseline::RandomMatch => {
            let t = random_match_threshold(generated, real, seed, n_shuffles.max(1))?;
            vec![t; generated.len()]
        }
        Baseline::AllRealMean => generated
            .iter()
            .map(|g| {
                let total = real
                    .iter()
                    .map(|r| cosine_similarity(&g.vector, &r.vector))
                    .sum::<Result<f64, _>>()?;
                Ok(total / real.len() as f64)
            })
            .collect::<Result<_, EmbedError>>()?,
    };
    let users: Vec<UserExceedance> = generated
        .iter()
        .zip(sims.iter().zip(&thresholds))
        .map(|(g, (&similarity, &threshold))| UserExceedance {
            author: g.author.clone(),
            similarity,
            threshold,
            exceeds: similarity > threshold,
        })
        .collect();
    let n_exceeding = users.iter().filter(|u| u.exceeds).count();
    Ok(Exceedance {
        baseline,
        proportion: n_exceeding as f64 / users.len() as f64,
        n_users: users.len(),
        n_exceeding,
        users,
    })
}

/// Mean over shuffles of the mean similarity when each generated user is
/// paired with a random real user (without replacement).
pub fn random_match_threshold(
    generated: &[UserCentroid],
    real: &[UserCentroid],
    seed: u64,
    n_shuffles: usize,
) -> Result<f64, EmbedError> {
    if real.len() < generated.len() {
        return Err(EmbedError::InvalidInput("fewer real than generated centroids".into()));
    }
    let mut total = 0.0;
    for s in 0..n_shuffles {
        let mut idx: Vec<usize> = (0..real.len()).collect();
        idx.shuffle(&mut crate::seed::rng(seed, "random-match", s as u64));
        let mut sum = 0.0;
        for (g, &j) in generated.iter().zip(&idx) {
            sum += cosine_similarity(&g.vector, &real[j].vector)?;
        }
        total += sum / generated.len() as f64;
    }
    Ok(total / n_shuffles as f64)
}

/// Mean pairwise cosine similarity over distinct unordered pairs.
pub fn intra_group_similarity(vectors: &[&[f64]], group: Group) -> Result<f64, EmbedError> {
    if vectors.len() < 2 {
        return Err(EmbedError::SingletonGroup(group));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            sum += cosine_similarity(vectors[i], vectors[j])?;
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub groups: Vec<Group>,
    /// Mean cosine distance; `NaN` on the diagonal of a singleton group.
    pub values: Vec<Vec<f64>>,
    pub singleton: Vec<bool>,
}

impl DistanceMatrix {
    pub fn table(&self) -> CsvTable {
        let mut header = vec!["group".to_string()];
        header.extend(self.groups.iter().map(|g| g.to_string()));
        let mut t = CsvTable::new(&header);
        for (g, row) in self.groups.iter().zip(&self.values) {
            let mut cells = vec![g.to_string()];
            cells.extend(row.iter().map(|&v| fmt_f64(v)));
            t.row(cells);
        }
        t
    }
}

fn group_members(centroids: &[UserCentroid]) -> BTreeMap<Group, Vec<&[f64]>> {
    let mut m: BTreeMap<Group, Vec<&[f64]>> = BTreeMap::new();
    for c in centroids {
        m.entry(c.group).or_default().push(&c.vector);
    }
    m
}

/// Mean cosine distance between groups over all cross pairs; diagonal
/// entries average distinct intra-group pairs.
pub fn group_distance_matrix(centroids: &[UserCentroid]) -> Result<DistanceMatrix, EmbedError> {
    let members = group_members(centroids);
    let groups: Vec<Group> = members.keys().copied().collect();
    let g = groups.len();
    let cells: Vec<(usize, usize)> = (0..g).flat_map(|i| (i..g).map(move |j| (i, j))).collect();
    let computed: Vec<Result<f64, EmbedError>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let a = &members[&groups[i]];
            let b = &members[&groups[j]];
            let mut sum = 0.0;
            let mut n = 0usize;
            for (p, x) in a.iter().enumerate() {
                for (q, y) in b.iter().enumerate() {
                    if i == j && q <= p {
                        continue;
                    }
                    sum += cosine_distance(x, y)?;
                    n += 1;
                }
            }
            // a singleton group has no distinct pairs
            Ok(if n == 0 { f64::NAN } else { sum / n as f64 })
        })
        .collect();
    let mut values = vec![vec![0.0; g]; g];
    for (&(i, j), v) in cells.iter().zip(computed) {
        let v = v?;
        values[i][j] = v;
        values[j][i] = v;
    }
    let singleton = groups.iter().map(|k| members[k].len() < 2).collect();
    Ok(DistanceMatrix {
        groups,
        values,
        singleton,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// N rows of `k` coordinates.
    pub coords: Vec<Vec<f64>>,
    /// D rows of `k` loadings.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    /// `k` was lowered to the numerical rank of the centered data.
    pub rank_deficient: bool,
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize, EmbedError> {
    let d = x.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(EmbedError::InvalidInput("empty matrix".into()));
    }
    for r in x {
        if r.len() != d {
            return Err(EmbedError::DimMismatch(d, r.len()));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidInput("non-finite value".into()));
        }
    }
    Ok(d)
}

/// Projects centered rows onto the top `k` principal directions. Each
/// direction is signed so its largest-magnitude loading is positive.
pub fn pca_reduce(x: &[Vec<f64>], k: usize) -> Result<PcaResult, EmbedError> {
    let d = check_rows(x)?;
    let n = x.len();
    if n < 2 || k == 0 || k > (n - 1).min(d) {
        return Err(EmbedError::InvalidInput(format!("pca k={k} with {n} rows of dimension {d}")));
    }
    let mut mean = vec![0.0; d];
    for r in x {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);

    // eigen-decompose whichever Gram form is smaller
    let (vals, dirs) = if n < d {
        let eig = SymmetricEigen::new(&xc * xc.transpose());
        let loadings = xc.transpose() * &eig.eigenvectors;
        (eig.eigenvalues, loadings)
    } else {
        let eig = SymmetricEigen::new(xc.transpose() * &xc);
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let top = vals[order[0]].max(0.0);
    let tol = top * 1e-10 * n.max(d) as f64;
    let rank = order.iter().filter(|&&i| vals[i] > tol).count();
    let kk = k.min(rank.max(1));
    if kk < k {
        log::warn!("pca: requested {k} components but data has rank {rank}; using {kk}");
    }
    let mut components = vec![vec![0.0; kk]; d];
    let mut eigenvalues = Vec::with_capacity(kk);
    for (c, &i) in order.iter().take(kk).enumerate() {
        let mut v: Vec<f64> = dirs.column(i).iter().copied().collect();
        let nv = norm(&v);
        if nv > 0.0 {
            v.iter_mut().for_each(|e| *e /= nv);
        }
        let big = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, e)| if e.abs() > v[best].abs() { j } else { best });
        if v[big] < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        for j in 0..d {
            components[j][c] = v[j];
        }
        eigenvalues.push(vals[i].max(0.0));
    }
    let coords = (0..n)
        .map(|i| {
            (0..kk)
                .map(|c| (0..d).map(|j| xc[(i, j)] * components[j][c]).sum())
                .collect()
        })
        .collect();
    Ok(PcaResult {
        coords,
        components,
        mean,
        eigenvalues,
        k: kk,
        rank_deficient: kk < k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Inputs wider than this are first reduced by PCA.
    pub pca_dims: usize,
    pub kl_every: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            pca_dims: 50,
            kl_every: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlCheckpoint {
    pub iteration: usize,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutput {
    pub coords: Vec<[f64; 2]>,
    pub kl_trace: Vec<KlCheckpoint>,
}

fn row_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Conditional affinities for one point, with the bandwidth found by
/// bisection so that the entropy matches `ln(perplexity)`.
fn conditional_row(dist: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
    let mut p = vec![0.0; dist.len()];
    for _ in 0..200 {
        let mut sum = 0.0;
        let mut wsum = 0.0;
        for (j, &d) in dist.iter().enumerate() {
            p[j] = if j == i { 0.0 } else { (-(d - dmin) * beta).exp() };
            sum += p[j];
            wsum += (d - dmin) * p[j];
        }
        let h = sum.ln() + beta * wsum / sum;
        let diff = h - target;
        if diff.abs() < 1e-10 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

fn initial_position(row: &[f64], seed: u64) -> [f64; 2] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for v in row {
        h.update(v.to_bits().to_le_bytes());
    }
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(h.finalize().into());
    let a: f64 = StandardNormal.sample(&mut rng);
    let b: f64 = StandardNormal.sample(&mut rng);
    [a * 1e-4, b * 1e-4]
}

/// Exact t-SNE. Rows are processed in a content-sorted order and each
/// point's start position is hashed from its own values, so permuting the
/// input permutes the output identically.
pub fn tsne(x: &[Vec<f64>], params: &TsneParams) -> Result<TsneOutput, EmbedError> {
    let d = check_rows(x)?;
    let n = x.len();
    if params.perplexity <= 0.0 || (n as f64) < 3.0 * params.perplexity {
        return Err(EmbedError::PerplexityTooLarge {
            n,
            perplexity: params.perplexity,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| row_cmp(&x[a], &x[b]));
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let data = if d > params.pca_dims {
        let k = params.pca_dims.min(n - 1);
        pca_reduce(&sorted, k)?.coords
    } else {
        sorted.clone()
    };

    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| sq(&data[i], &data[j])).collect())
        .collect();
    let cond: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| conditional_row(&dist[i], i, params.perplexity))
        .collect();
    let p: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12) })
                .collect()
        })
        .collect();

    let mut y: Vec<[f64; 2]> = sorted.iter().map(|r| initial_position(r, params.seed)).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::new();
    let mut aff = StudentT::of(&y);
    let mut kl = f64::NAN;
    for it in 0..params.iterations {
        let exaggerating = it < params.exaggeration_iters;
        let exag = if exaggerating { params.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating { 0.5 } else { 0.8 };
        if !exaggerating && kl.is_nan() {
            kl = aff.kl(&p);
        }
        let grad = aff.gradient(&p, &y, exag);
        let mut next = y.clone();
        for i in 0..n {
            for c in 0..2 {
                let same_sign = (grad[i][c] > 0.0) == (update[i][c] > 0.0);
                gains[i][c] = if same_sign { gains[i][c] * 0.8 } else { gains[i][c] + 0.2 };
                gains[i][c] = gains[i][c].max(0.01);
                update[i][c] = momentum * update[i][c] - params.learning_rate * gains[i][c] * grad[i][c];
                next[i][c] += update[i][c];
            }
        }
        center(&mut next);
        let mut next_aff = StudentT::of(&next);
        if !exaggerating {
            // After exaggeration a step is only kept if it does not raise
            // the divergence; otherwise momentum is dropped and a plain
            // gradient step is backtracked until it does.
            let mut next_kl = next_aff.kl(&p);
            if next_kl > kl {
                update = vec![[0.0; 2]; n];
                gains = vec![[1.0; 2]; n];
                let mut step = params.learning_rate;
                let mut accepted = false;
                for _ in 0..60 {
                    next = y.iter().zip(&grad).map(|(v, g)| [v[0] - step * g[0], v[1] - step * g[1]]).collect();
                    center(&mut next);
                    next_aff = StudentT::of(&next);
                    next_kl = next_aff.kl(&p);
                    if next_kl <= kl {
                        accepted = true;
                        break;
                    }
                    step /= 2.0;
                }
                if !accepted {
                    next = y.clone();
                    next_aff = StudentT::of(&next);
                    next_kl = kl;
                }
            }
            kl = next_kl;
        }
        y = next;
        aff = next_aff;
        let done = it + 1;
        if params.kl_every > 0 && (done % params.kl_every == 0 || done == params.iterations) {
            kl_trace.push(KlCheckpoint {
                iteration: done,
                kl: if kl.is_nan() { aff.kl(&p) } else { kl },
            });
        }
    }
    let mut coords = vec![[0.0; 2]; n];
    for (pos, &orig) in order.iter().enumerate() {
        coords[orig] = y[pos];
    }
    Ok(TsneOutput { coords, kl_trace })
}

fn center(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    for c in 0..2 {
        let m = y.iter().map(|v| v[c]).sum::<f64>() / n;
        y.iter_mut().for_each(|v| v[c] -= m);
    }
}

/// Unnormalized Student-t kernel between embedded points and its total.
struct StudentT {
    num: Vec<Vec<f64>>,
    z: f64,
}

impl StudentT {
    fn of(y: &[[f64; 2]]) -> StudentT {
        let n = y.len();
        let num: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            1.0 / (1.0 + (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2))
                        }
                    })
                    .collect()
            })
            .collect();
        let z = num.iter().map(|r| r.iter().sum::<f64>()).sum();
        StudentT { num, z }
    }

    fn gradient(&self, p: &[Vec<f64>], y: &[[f64; 2]], exag: f64) -> Vec<[f64; 2]> {
        let n = y.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    let m = (exag * p[i][j] - self.num[i][j] / self.z) * self.num[i][j];
                    g[0] += 4.0 * m * (y[i][0] - y[j][0]);
                    g[1] += 4.0 * m * (y[i][1] - y[j][1]);
                }
                g
            })
            .collect()
    }

    fn kl(&self, p: &[Vec<f64>]) -> f64 {
        let n = p.len();
        let mut kl = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let q = (self.num[i][j] / self.z).max(1e-300);
                    kl += p[i][j] * (p[i][j] / q).ln();
                }
            }
        }
        kl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub author: String,
    pub group: Group,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub group: Group,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<ProjectedPoint>,
    pub params: TsneParams,
    pub kl_trace: Vec<KlCheckpoint>,
}

impl Projection2D {
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "y", "group", "author"]);
        for p in &self.points {
            t.row(vec![fmt_f64(p.x), fmt_f64(p.y), p.group.to_string(), p.author.clone()]);
        }
        t
    }

    /// Scatter plot, one colour per group.
    pub fn svg(&self) -> String {
        const COLORS: [&str; 5] = ["#1b1b1b", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];
        let (w, h, pad) = (640.0, 640.0, 40.0);
        let span = |f: fn(&ProjectedPoint) -> f64| {
            let lo = self.points.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = self.points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            (lo, (hi - lo).max(1e-12))
        };
        let ((x0, xs), (y0, ys)) = (span(|p| p.x), span(|p| p.y));
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        );
        for p in &self.points {
            let cx = pad + (p.x - x0) / xs * (w - 2.0 * pad);
            let cy = h - pad - (p.y - y0) / ys * (h - 2.0 * pad);
            s.push_str(&format!(
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"><title>{} {}</title></circle>\n",
                COLORS[p.group.index()],
                p.group,
                xml_escape(&p.author)
            ));
        }
        for (i, g) in Group::ALL.iter().enumerate() {
            let ly = 20.0 + 16.0 * i as f64;
            s.push_str(&format!(
                "<circle cx=\"12\" cy=\"{ly}\" r=\"4\" fill=\"{}\"/><text x=\"20\" y=\"{}\" font-size=\"12\">{g}</text>\n",
                COLORS[i],
                ly + 4.0
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Runs t-SNE on labelled vectors. Perplexity is lowered to `n / 3` when the
/// input is too small for the requested value; the params record the value
/// actually used.
pub fn project(items: &[LabeledVector], params: &TsneParams) -> Result<Projection2D, EmbedError> {
    let x: Vec<Vec<f64>> = items.iter().map(|i| i.vector.clone()).collect();
    let mut used = params.clone();
    let cap = x.len() as f64 / 3.0;
    if used.perplexity > cap {
        log::warn!("t-SNE perplexity {} lowered to {cap} for {} points", used.perplexity, x.len());
        used.perplexity = cap;
    }
    let out = tsne(&x, &used)?;
    Ok(Projection2D {
        points: items
            .iter()
            .zip(&out.coords)
            .map(|(it, c)| ProjectedPoint {
                x: c[0],
                y: c[1],
                group: it.group,
                author: it.author.clone(),
            })
            .collect(),
        params: used,
        kl_trace: out.kl_trace,
    })
}

/// `author,group,n_comments,v0..v{d-1}`; floats print in shortest
/// round-trip form.
pub fn centroids_table(centroids: &[UserCentroid]) -> CsvTable {
    let d = centroids.first().map_or(0, |c| c.vector.len());
    let mut header = vec!["author".to_string(), "group".into(), "n_comments".into()];
    header.extend((0..d).map(|i| format!("v{i}")));
    let mut t = CsvTable::new(&header);
    for c in centroids {
        let mut cells = vec![c.author.clone(), c.group.to_string(), c.n_comments.to_string()];
        cells.extend(c.vector.iter().map(|v| format!("{v}")));
        t.row(cells);
    }
    t
}

/// Reads a table written by [`centroids_table`].
pub fn read_centroids_csv(path: &Path) -> Result<Vec<UserCentroid>, EmbedError> {
    let where_ = |line: u64, m: String| EmbedError::InvalidInput(format!("{}:{line}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| where_(0, e.to_string()))?;
    let d = rdr.headers().map_err(|e| where_(1, e.to_string()))?.len().saturating_sub(3);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| where_(line, e.to_string()))?;
        if rec.len() != d + 3 {
            return Err(where_(line, "wrong number of columns".into()));
        }
        let vector: Vec<f64> = rec
            .iter()
            .skip(3)
            .map(|c| c.parse::<f64>().map_err(|e| where_(line, e.to_string())))
            .collect::<Result<_, _>>()?;
        out.push(UserCentroid {
            author: rec[0].to_string(),
            group: rec[1].parse().map_err(|e: String| where_(line, e))?,
            n_comments: rec[2].parse().map_err(|e: std::num::ParseIntError| where_(line, e.to_string()))?,
            is_zero: vector.iter().all(|&v| v == 0.0),
            vector,
        });
    }
    Ok(out)
}
