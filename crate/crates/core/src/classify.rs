//! Party / sentiment / violence labelling through in-context prompting, and
//! the aggregate statistics built on those labels.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, GenerationParams, ModelRequest};
use crate::scenario::Candidate;

pub const CLASSIFICATION_OPENING: &str =
    "You can only return three numbers, such as 1, -1, 0, without providing any other text.";
pub const CLASSIFY_TEXT_LEAD: &str = "Continue classifying the following comment: ";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifyError {
    #[error("malformed classification reply {reply:?}: {reason}")]
    MalformedReply { reply: String, reason: String },
    #[error("nothing to aggregate")]
    EmptyInput,
}

/// The classification prompt for `text`, ending in `Assistant:`.
pub fn build_classification_prompt(text: &str, candidate: Candidate) -> String {
    let (full, short, sample) = match candidate {
        Candidate::Clinton => ("Hillary Clinton", "Hillary", "Hillary Clinton is a whore!"),
        Candidate::Trump => ("Donald Trump", "Trump", "Donald Trump is a piece of shit!"),
    };
    format!(
        "{CLASSIFICATION_OPENING} Classify the text provided based on the following categories, returning the right number for each entry:\n\
         - Position on {full}: Pro-{short} [1], Neutral [0], Anti-{short} [-1].\n\
         - Sentiment of the text: Positive [1], Neutral [0], Negative [-1].\n\
         - Level of violence in language: Violent [1], Non-violent [0].\n\
         The text to classify is: {sample}\n\
         Assistant: -1, -1, 1\n\
         {CLASSIFY_TEXT_LEAD}{text}\n\
         Assistant:"
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassificationTriple {
    pub party: i8,
    pub sentiment: i8,
    pub violence: i8,
}

impl ClassificationTriple {
    pub fn new(party: i8, sentiment: i8, violence: i8) -> Option<Self> {
        let tri = |v: i8| (-1..=1).contains(&v);
        (tri(party) && tri(sentiment) && (0..=1).contains(&violence)).then_some(
            ClassificationTriple {
                party,
                sentiment,
                violence,
            },
        )
    }

    pub fn get(&self, axis: Axis) -> i8 {
        match axis {
            Axis::Party => self.party,
            Axis::Sentiment => self.sentiment,
            Axis::Violence => self.violence,
        }
    }
}

fn integer_pattern() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+−]?\d+").expect("valid regex"))
}

/// Reads `party, sentiment, violence` from a model reply.
pub fn parse_classification(reply: &str) -> Result<ClassificationTriple, ClassifyError> {
    let bad = |reason: String| ClassifyError::MalformedReply {
        reply: reply.to_string(),
        reason,
    };
    let body = reply.trim();
    let body = body.strip_prefix("Assistant:").unwrap_or(body);
    let nums: Vec<i64> = integer_pattern()
        .find_iter(body)
        .map(|m| m.as_str().replace('−', "-").parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(e.to_string()))?;
    if nums.len() != 3 {
        return Err(bad(format!("expected 3 integers, found {}", nums.len())));
    }
    let narrow = |v: i64| i8::try_from(v).unwrap_or(i8::MAX);
    ClassificationTriple::new(narrow(nums[0]), narrow(nums[1]), narrow(nums[2]))
        .ok_or_else(|| bad("value outside its label set".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Party,
    Sentiment,
    Violence,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Party, Axis::Sentiment, Axis::Violence];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Party => "party",
            Axis::Sentiment => "sentiment",
            Axis::Violence => "violence",
        }
    }

    /// Column names for the labels -1, 0, 1.
    pub fn label_names(self) -> [&'static str; 3] {
        match self {
            Axis::Party => ["anti", "neutral", "pro"],
            Axis::Sentiment => ["negative", "neutral", "positive"],
            Axis::Violence => ["unused", "non_violent", "violent"],
        }
    }
}

/// Most frequent label; any tie resolves to 0.
pub fn modal_label(labels: impl IntoIterator<Item = i8>) -> i8 {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[(l + 1) as usize] += 1;
    }
    let max = *counts.iter().max().expect("three slots");
    let winners: Vec<usize> = (0..3).filter(|&i| counts[i] == max).collect();
    if winners.len() == 1 {
        winners[0] as i8 - 1
    } else {
        0
    }
}

/// Per-text summary over repeated classifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedScore {
    pub party_mean: f64,
    pub sentiment_mean: f64,
    pub violence_rate: f64,
    pub modal_triple: ClassificationTriple,
    pub n_runs: usize,
    pub runs: Vec<ClassificationTriple>,
}

impl AveragedScore {
    pub fn from_runs(runs: &[ClassificationTriple]) -> Option<Self> {
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let mean = |axis: Axis| runs.iter().map(|t| t.get(axis) as f64).sum::<f64>() / n;
        let modal = |axis: Axis| modal_label(runs.iter().map(|t| t.get(axis)));
        Some(AveragedScore {
            party_mean: mean(Axis::Party),
            sentiment_mean: mean(Axis::Sentiment),
            violence_rate: mean(Axis::Violence),
            modal_triple: ClassificationTriple {
                party: modal(Axis::Party),
                sentiment: modal(Axis::Sentiment),
                violence: modal(Axis::Violence),
            },
            n_runs: runs.len(),
            runs: runs.to_vec(),
        })
    }

    pub fn mean(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Party => self.party_mean,
            Axis::Sentiment => self.sentiment_mean,
            Axis::Violence => self.violence_rate,
        }
    }
}

/// Outcome of classifying one text `n_runs` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedText {
    /// `None` where a run stayed malformed after its one re-query.
    pub runs: Vec<Option<ClassificationTriple>>,
    pub score: Option<AveragedScore>,
    pub requeries: usize,
}

impl ClassifiedText {
    pub fn unclassified_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.is_none()).count()
    }
}

/// Classifies one text `n_runs` times. A malformed reply is re-asked once;
/// if it is still malformed that run is recorded as unclassified.
pub fn classify_text(
    gateway: &Gateway,
    text: &str,
    candidate: Candidate,
    n_runs: u32,
    params: &GenerationParams,
) -> Result<ClassifiedText, GatewayError> {
    let prompt = build_classification_prompt(text, candidate);
    let mut runs = Vec::with_capacity(n_runs as usize);
    let mut requeries = 0;
    for run_index in 0..n_runs {
        let mut label = None;
        for attempt in 0..2 {
            let (reply, _) = gateway.complete(&ModelRequest {
                prompt: prompt.clone(),
                params: params.clone(),
                run_index,
                attempt,
            })?;
            match parse_classification(&reply) {
                Ok(t) => {
                    label = Some(t);
                    break;
                }
                Err(e) => {
                    log::debug!("{e}");
                    if attempt == 0 {
                        requeries += 1;
                    }
                }
            }
        }
        runs.push(label);
    }
    let ok: Vec<_> = runs.iter().flatten().copied().collect();
    Ok(ClassifiedText {
        score: AveragedScore::from_runs(&ok),
        runs,
        requeries,
    })
}

/// Classifies a corpus; gateway failures are reported per text.
pub fn classify_corpus(
    gateway: &Gateway,
    texts: &[String],
    candidate: Candidate,
    n_runs: u32,
    params: &GenerationParams,
) -> Vec<Result<ClassifiedText, GatewayError>> {
    use rayon::prelude::*;
    texts
        .par_iter()
        .map(|t| classify_text(gateway, t, candidate, n_runs, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMode {
    /// One label per text: its modal label across runs.
    #[default]
    Modal,
    /// Every run's label counts separately.
    Pooled,
}

/// Label shares for one axis, indexed by label -1, 0, 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareBreakdown {
    pub axis: Axis,
    pub shares: [f64; 3],
    pub counts: [u64; 3],
    pub n_classified: u64,
    pub n_unclassified: u64,
}

impl ShareBreakdown {
    pub fn share(&self, label: i8) -> f64 {
        self.shares[(label + 1) as usize]
    }
}

pub fn aggregate_shares(
    scores: &[Option<AveragedScore>],
    axis: Axis,
    mode: ShareMode,
) -> Result<ShareBreakdown, ClassifyError> {
    if scores.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    let mut counts = [0u64; 3];
    let mut unclassified = 0;
    for s in scores {
        match s {
            None => unclassified += 1,
            Some(s) => match mode {
                ShareMode::Modal => counts[(s.modal_triple.get(axis) + 1) as usize] += 1,
                ShareMode::Pooled => {
                    for r in &s.runs {
                        counts[(r.get(axis) + 1) as usize] += 1;
                    }
                }
            },
        }
    }
    let total: u64 = counts.iter().sum();
    let shares = if total == 0 {
        [0.0; 3]
    } else {
        counts.map(|c| c as f64 / total as f64)
    };
    Ok(ShareBreakdown {
        axis,
        shares,
        counts,
        n_classified: total,
        n_unclassified: unclassified,
    })
}

fn sorted_mean(values: &mut [f64]) -> f64 {
    // sorting first makes the float sum independent of input order
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMeanHistogram {
    pub author_means: BTreeMap<String, f64>,
    /// `bins + 1` edges from -1 to 1.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Per-author mean party score, histogrammed over [-1, 1]; the last bin is
/// closed on the right.
pub fn user_mean_distribution(items: &[(String, f64)], bins: usize) -> UserMeanHistogram {
    let bins = bins.max(1);
    let mut per_author: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (a, v) in items {
        per_author.entry(a.clone()).or_default().push(*v);
    }
    let author_means: BTreeMap<String, f64> = per_author
        .into_iter()
        .map(|(a, mut v)| (a, sorted_mean(&mut v)))
        .collect();
    let width = 2.0 / bins as f64;
    let edges = (0..=bins).map(|i| -1.0 + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &m in author_means.values() {
        let idx = (((m + 1.0) / width).floor() as isize).clamp(0, bins as isize - 1);
        counts[idx as usize] += 1;
    }
    UserMeanHistogram {
        author_means,
        edges,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    pub start: usize,
    pub end: usize,
    pub count: u64,
    /// `None` for an empty bin.
    pub mean: Option<f64>,
}

/// Mean party score per fixed-width prompt-length bin, from 0 up to the
/// bin holding the longest prompt.
pub fn bin_by_prompt_length(scores: &[f64], token_estimates: &[usize], bin_width: usize) -> Vec<LengthBin> {
    assert_eq!(scores.len(), token_estimates.len(), "one token estimate per score");
    let w = bin_width.max(1);
    let Some(&max_len) = token_estimates.iter().max() else {
        return Vec::new();
    };
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); max_len / w + 1];
    for (&s, &t) in scores.iter().zip(token_estimates) {
        buckets[t / w].push(s);
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, mut v)| LengthBin {
            start: i * w,
            end: (i + 1) * w,
            count: v.len() as u64,
            mean: (!v.is_empty()).then(|| sorted_mean(&mut v)),
        })
        .collect()
}

/// Counts of outcome labels conditioned on a prior label, with row
/// fractions. Rows and columns are ordered -1, 0, 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub counts: [[u64; 3]; 3],
    pub fractions: [[f64; 3]; 3],
    pub empty_rows: [bool; 3],
}

pub fn cross_tab(pairs: &[(i8, i8)]) -> CrossTab {
    let mut counts = [[0u64; 3]; 3];
    for &(c, o) in pairs {
        counts[(c + 1) as usize][(o + 1) as usize] += 1;
    }
    let mut fractions = [[0.0; 3]; 3];
    let mut empty_rows = [false; 3];
    for r in 0..3 {
        let total: u64 = counts[r].iter().sum();
        if total == 0 {
            empty_rows[r] = true;
        } else {
            for c in 0..3 {
                fractions[r][c] = counts[r][c] as f64 / total as f64;
            }
        }
    }
    CrossTab {
        counts,
        fractions,
        empty_rows,
    }
}
