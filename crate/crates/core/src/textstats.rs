//! Lexical features, n-gram rank-frequency tables and Zipf fits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, write_atomic, CsvTable};

pub const URL_TOKEN: &str = "<url>";
pub const ARTICLES: [&str; 3] = ["a", "an", "the"];

const FUNCTION_WORDS_FILE: &str = include_str!("../data/function_words.txt");
const ABBREVIATIONS: [&str; 17] = [
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "u.s", "gen", "sen",
    "gov", "rep",
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TextStatsError {
    #[error("corpus has no text with at least one token")]
    EmptyCorpus,
    #[error("n-gram order must be 1, 2 or 3, got {0}")]
    InvalidOrder(usize),
    #[error("zipf fit needs at least 3 ranks with count >= {min_count}, found {found}")]
    InsufficientData { min_count: u64, found: usize },
    #[error("rank correlation needs at least 2 shared grams, found {0}")]
    TooFewShared(usize),
}

pub fn function_words() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        FUNCTION_WORDS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
}

/// Lowercases, splits on whitespace, trims non-alphanumeric characters at
/// both ends of each piece and collapses URLs to [`URL_TOKEN`].
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let lower = piece.to_lowercase();
            let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
            if is_url(trimmed) {
                Some(URL_TOKEN.to_string())
            } else if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’')
}

/// Splits on runs of `.`, `!` or `?` followed by whitespace or the end of
/// the text. A lone period after a known abbreviation does not split.
/// Pieces without any alphanumeric character are dropped.
pub fn sentence_split(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        let single_period = j == i + 1 && c == '.';
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        if at_boundary && !(single_period && ends_with_abbreviation(&text[start..pos])) {
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            push_sentence(&mut out, &text[start..end]);
            start = end;
        }
        i = j.max(i + 1);
    }
    push_sentence(&mut out, &text[start..]);
    out
}

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn push_sentence(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if s.chars().any(char::is_alphanumeric) {
        out.push(s.to_string());
    }
}

/// Feature values of a single text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextFeatures {
    pub sentence_length: f64,
    pub article_pct: f64,
    pub function_word_pct: f64,
    pub ttr: f64,
    pub tokens: usize,
    pub sentences: usize,
}

/// `None` when the text has no tokens.
pub fn text_features(text: &str) -> Option<TextFeatures> {
    let sentence_tokens: Vec<Vec<String>> = sentence_split(text)
        .iter()
        .map(|s| tokenize(s))
        .filter(|t| !t.is_empty())
        .collect();
    let tokens: Vec<&String> = sentence_tokens.iter().flatten().collect();
    if tokens.is_empty() {
        return None;
    }
    let n = tokens.len() as f64;
    let fw = function_words();
    let articles = tokens.iter().filter(|t| ARTICLES.contains(&t.as_str())).count();
    let function = tokens.iter().filter(|t| fw.contains(t.as_str())).count();
    let unique: HashSet<&String> = tokens.iter().copied().collect();
    Some(TextFeatures {
        sentence_length: n / sentence_tokens.len() as f64,
        article_pct: 100.0 * articles as f64 / n,
        function_word_pct: 100.0 * function as f64 / n,
        ttr: unique.len() as f64 / n,
        tokens: tokens.len(),
        sentences: sentence_tokens.len(),
    })
}

/// Mean with sample standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStat {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

impl MeanStat {
    /// Single values get zero spread.
    pub fn of(values: &[f64]) -> MeanStat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStat {
            mean,
            std,
            stderr: std / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub avg_sentence_length: MeanStat,
    pub article_pct: MeanStat,
    pub function_word_pct: MeanStat,
    pub ttr: MeanStat,
    pub n_texts: usize,
    /// Texts without tokens, left out of every mean.
    pub n_skipped: usize,
}

pub fn features<S: AsRef<str> + Sync>(corpus: &[S]) -> Result<FeatureRecord, TextStatsError> {
    let per_text: Vec<Option<TextFeatures>> = corpus.par_iter().map(|t| text_features(t.as_ref())).collect();
    let ok: Vec<TextFeatures> = per_text.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(TextStatsError::EmptyCorpus);
    }
    let stat = |f: fn(&TextFeatures) -> f64| MeanStat::of(&ok.iter().map(f).collect::<Vec<_>>());
    Ok(FeatureRecord {
        avg_sentence_length: stat(|f| f.sentence_length),
        article_pct: stat(|f| f.article_pct),
        function_word_pct: stat(|f| f.function_word_pct),
        ttr: stat(|f| f.ttr),
        n_texts: ok.len(),
        n_skipped: corpus.len() - ok.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramEntry {
    pub gram: String,
    pub count: u64,
    pub rank: usize,
    pub normalized_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramTable {
    pub n: usize,
    pub entries: Vec<NgramEntry>,
}

impl NgramTable {
    /// Ranks and normalizes raw counts: descending count, ties by gram.
    pub fn from_counts(n: usize, counts: impl IntoIterator<Item = (String, u64)>) -> NgramTable {
        let mut pairs: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total: u64 = pairs.iter().map(|p| p.1).sum();
        let entries = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (gram, count))| NgramEntry {
                gram,
                count,
                rank: i + 1,
                normalized_freq: count as f64 / total as f64,
            })
            .collect();
        NgramTable { n, entries }
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn rank_of(&self) -> HashMap<&str, usize> {
        self.entries.iter().map(|e| (e.gram.as_str(), e.rank)).collect()
    }

    /// Writes `rank\tgram\tcount\tnormalized_freq` lines, gzip-compressed.
    pub fn write_tsv_gz(&self, path: &Path) -> std::io::Result<()> {
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        writeln!(enc, "rank\tgram\tcount\tnormalized_freq")?;
        for e in &self.entries {
            writeln!(enc, "{}\t{}\t{}\t{}", e.rank, e.gram, e.count, e.normalized_freq)?;
        }
        write_atomic(path, &enc.finish()?)
    }
}

fn count_ngrams(text: &str, n: usize) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for sentence in sentence_split(text) {
        let toks = tokenize(&sentence);
        for w in toks.windows(n) {
            *counts.entry(w.join(" ")).or_insert(0) += 1;
        }
    }
    counts
}

/// Counts n-grams inside sentences; grams never span a sentence boundary.
pub fn ngram_table<S: AsRef<str> + Sync>(corpus: &[S], n: usize) -> Result<NgramTable, TextStatsError> {
    if !(1..=3).contains(&n) {
        return Err(TextStatsError::InvalidOrder(n));
    }
    let merged = corpus
        .par_iter()
        .map(|t| count_ngrams(t.as_ref(), n))
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    Ok(NgramTable::from_counts(n, merged))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfFit {
    pub s: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r2: f64,
    pub n_points: usize,
}

pub const DEFAULT_MIN_COUNT: u64 = 2;

/// Least squares of ln(freq) on ln(rank) over entries with
/// `count >= min_count`; `s` is the negated slope.
pub fn zipf_fit(table: &NgramTable, min_count: u64) -> Result<ZipfFit, TextStatsError> {
    let pts: Vec<(f64, f64)> = table
        .entries
        .iter()
        .filter(|e| e.count >= min_count)
        .map(|e| ((e.rank as f64).ln(), e.normalized_freq.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(TextStatsError::InsufficientData {
            min_count,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a flat distribution is fit perfectly by a zero slope
    let r2 = if ss_tot <= 1e-20 * n { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ZipfFit {
        s: -slope,
        c: intercept.exp(),
        r2,
        n_points: pts.len(),
    })
}

/// Pearson correlation of the two tables' ranks over grams they share.
pub fn rank_correlation(a: &NgramTable, b: &NgramTable) -> Result<f64, TextStatsError> {
    let rb = b.rank_of();
    let pairs: Vec<(f64, f64)> = a
        .entries
        .iter()
        .filter_map(|e| rb.get(e.gram.as_str()).map(|&r| (e.rank as f64, r as f64)))
        .collect();
    if pairs.len() < 2 {
        return Err(TextStatsError::TooFewShared(pairs.len()));
    }
    Ok(pearson(&pairs))
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// One row per labelled corpus: mean, std and stderr of every feature.
pub fn features_table(rows: &BTreeMap<String, FeatureRecord>) -> CsvTable {
    let mut header = vec!["corpus".to_string(), "n_texts".into(), "n_skipped".into()];
    for f in ["sentence_length", "article_pct", "function_word_pct", "ttr"] {
        for s in ["mean", "std", "stderr"] {
            header.push(format!("{f}_{s}"));
        }
    }
    let mut t = CsvTable::new(&header);
    for (name, r) in rows {
        let mut cells = vec![name.clone(), r.n_texts.to_string(), r.n_skipped.to_string()];
        for m in [r.avg_sentence_length, r.article_pct, r.function_word_pct, r.ttr] {
            cells.extend([fmt_f64(m.mean), fmt_f64(m.std), fmt_f64(m.stderr)]);
        }
        t.row(cells);
    }
    t
}
