//! Fixtures and brute-force oracles shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use threadsim::classify::build_classification_prompt;
use threadsim::corpus::{build_forest, extract_targets, parse_dump, Forest, HistoryEntry, ParsedDump, UserHistory};
use threadsim::embedspace::{cosine_distance, cosine_similarity, Baseline, Group, UserCentroid};
use threadsim::gateway::GenerationParams;
use threadsim::scenario::{render_branch, Candidate, PromptBuilder, PromptInput, ScenarioKind};
use threadsim::textstats::{sentence_split, tokenize};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn parse_fixture(rel: &str) -> ParsedDump {
    parse_dump(BufReader::new(File::open(fixture(rel)).unwrap())).unwrap()
}

pub fn forest_fixture(rel: &str) -> (ParsedDump, Forest) {
    let parsed = parse_fixture(rel);
    let forest = build_forest(parsed.records.clone()).unwrap();
    (parsed, forest)
}

/// Every corpus fixture, including the demo dumps.
pub const CORPUS_FIXTURES: [&str; 7] = [
    "corpus/seven_lines.jsonl",
    "corpus/forest_with_orphan.jsonl",
    "corpus/noisy.jsonl",
    "demo/demo_trump_posts.jsonl",
    "demo/demo_trump_comments.jsonl",
    "demo/demo_clinton_posts.jsonl",
    "demo/demo_clinton_comments.jsonl",
];

/// (non-blank lines, tree sizes + orphans + skipped) for one dump.
pub fn conservation(rel: &str) -> (usize, usize) {
    let (parsed, forest) = forest_fixture(rel);
    let sizes: usize = forest.trees.iter().map(|t| t.size()).sum();
    (parsed.lines, sizes + forest.orphans.len() + parsed.skipped.len())
}

/// Sorted parent edges plus orphan ids: equal values mean isomorphic forests.
pub fn forest_shape(f: &Forest) -> (Vec<(String, String)>, Vec<String>) {
    let mut edges: Vec<(String, String)> = f.trees.iter().flat_map(|t| t.edges()).collect();
    edges.sort();
    let mut orphans: Vec<String> = f.orphans.iter().map(|o| o.record.id.clone()).collect();
    orphans.sort();
    (edges, orphans)
}

// ---------------------------------------------------------------- goldens

fn golden_history() -> UserHistory {
    UserHistory {
        author: "dave".into(),
        entries: vec![
            HistoryEntry {
                comment_id: "h1".into(),
                created_utc: 1420100000,
                user_comment: "Turnout will decide this.".into(),
                replied_to: "Who is going to win Iowa?".into(),
            },
            HistoryEntry {
                comment_id: "h2".into(),
                created_utc: 1420200000,
                user_comment: "I watched the whole thing.".into(),
                replied_to: "Did anyone see the town hall?".into(),
            },
        ],
        window: None,
    }
}

/// Rendered prompts for every scenario (target c2 of the seven-line
/// fixture) and both classification prompts, keyed by snapshot name.
pub fn golden_prompts() -> Vec<(String, String)> {
    let (_, forest) = forest_fixture("corpus/seven_lines.jsonl");
    let target = extract_targets("dave", &forest).into_iter().next().expect("dave has a leaf");
    let tree = forest.tree(&target.tree_id).unwrap();
    let branch = render_branch(tree, &target).unwrap();
    let history = golden_history();
    let builder = PromptBuilder::new(GenerationParams::default());
    let target_ref = target.target_ref();
    let mut out = Vec::new();
    for s in ScenarioKind::ALL {
        let input = PromptInput {
            target_ref: &target_ref,
            author: "dave",
            candidate: Candidate::Trump,
            branch: &branch,
            real_history: Some(&history),
        };
        out.push((format!("scenario_{}.txt", s.as_str()), builder.build(s, &input).unwrap().text));
    }
    for (name, c) in [("trump", Candidate::Trump), ("clinton", Candidate::Clinton)] {
        out.push((
            format!("classification_{name}.txt"),
            build_classification_prompt("Same here, see you at the rally.", c),
        ));
    }
    out
}

/// Compares against `fixtures/golden/<name>`; with `UPDATE_GOLDEN` set the
/// snapshot is rewritten instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = fixture("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
        Err(format!("{name} differs from its snapshot at {line}"))
    }
}

// ----------------------------------------------------------------- n-grams

const WORDS: [&str; 24] = [
    "the", "vote", "rally", "was", "a", "big", "win", "for", "us", "they", "lost", "again", "polls", "say", "so",
    "and", "I", "think", "not", "now", "media", "lies", "jobs", "wall",
];

/// Up to 1,000 tokens drawn from a small vocabulary, with sentence
/// punctuation, split into a handful of texts.
pub fn random_corpus(rng: &mut impl Rng) -> Vec<String> {
    let n_tokens = rng.random_range(1..=1000);
    let mut texts = vec![String::new()];
    for _ in 0..n_tokens {
        let cur = texts.last_mut().unwrap();
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(WORDS.choose(rng).unwrap());
        match rng.random_range(0..20) {
            0 => cur.push('.'),
            1 => cur.push('?'),
            2 => cur.push(','),
            3 => texts.push(String::new()),
            _ => {}
        }
    }
    texts
}

/// Sliding-window count over each sentence's tokens.
pub fn ngram_oracle(corpus: &[String], n: usize) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for text in corpus {
        for s in sentence_split(text) {
            let toks = tokenize(&s);
            let mut i = 0;
            while i + n <= toks.len() {
                let gram = toks[i..i + n].join(" ");
                *counts.entry(gram).or_insert(0) += 1;
                i += 1;
            }
        }
    }
    counts
}

/// Integer counts following `C * rank^-s` closely enough that rounding
/// stays far below the fit tolerance.
pub fn planted_counts(s: f64, ranks: usize) -> Vec<(String, u64)> {
    (1..=ranks)
        .map(|r| (format!("w{r:03}"), (1e13 * (r as f64).powf(-s)).round() as u64))
        .collect()
}

// -------------------------------------------------------------- embeddings

/// Ten users with real centroids and two generated groups.
pub fn ten_user_fixture(seed: u64) -> Vec<UserCentroid> {
    let mut rng = threadsim::seed::rng(seed, "ten-user-fixture", 0);
    let mut out = Vec::new();
    for group in [Group::Real, Group::NoHistory, Group::ProCandidate] {
        for u in 0..10 {
            let vector: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            out.push(UserCentroid {
                author: format!("user{u}"),
                group,
                vector,
                n_comments: 1,
                is_zero: false,
            });
        }
    }
    out
}

/// Per-user (similarity, threshold, exceeds) by explicit loops.
pub fn exceedance_oracle(
    generated: &[UserCentroid],
    real: &[UserCentroid],
    baseline: Baseline,
    seed: u64,
    shuffles: usize,
) -> Vec<(f64, f64, bool)> {
    let own = |g: &UserCentroid| {
        let r = real.iter().find(|r| r.author == g.author).unwrap();
        cosine_similarity(&g.vector, &r.vector).unwrap()
    };
    let threshold: Vec<f64> = match baseline {
        Baseline::AllRealMean => generated
            .iter()
            .map(|g| {
                let mut sum = 0.0;
                for r in real {
                    sum += cosine_similarity(&g.vector, &r.vector).unwrap();
                }
                sum / real.len() as f64
            })
            .collect(),
        Baseline::RandomMatch => {
            let mut total = 0.0;
            for s in 0..shuffles {
                let mut perm: Vec<usize> = (0..real.len()).collect();
                perm.shuffle(&mut threadsim::seed::rng(seed, "random-match", s as u64));
                let mut sum = 0.0;
                for (k, g) in generated.iter().enumerate() {
                    sum += cosine_similarity(&g.vector, &real[perm[k]].vector).unwrap();
                }
                total += sum / generated.len() as f64;
            }
            vec![total / shuffles as f64; generated.len()]
        }
    };
    generated
        .iter()
        .zip(threshold)
        .map(|(g, t)| {
            let s = own(g);
            (s, t, s > t)
        })
        .collect()
}

/// Mean cosine distance over every cross pair, or distinct pairs within a group.
pub fn distance_oracle(centroids: &[UserCentroid], a: Group, b: Group) -> f64 {
    let ga: Vec<&UserCentroid> = centroids.iter().filter(|c| c.group == a).collect();
    let gb: Vec<&UserCentroid> = centroids.iter().filter(|c| c.group == b).collect();
    let mut sum = 0.0;
    let mut n = 0;
    for (i, x) in ga.iter().enumerate() {
        for (j, y) in gb.iter().enumerate() {
            if a == b && j <= i {
                continue;
            }
            sum += cosine_distance(&x.vector, &y.vector).unwrap();
            n += 1;
        }
    }
    sum / n as f64
}

// ---------------------------------------------------------------- pipeline

pub fn demo_config() -> PathBuf {
    fixture("demo/demo.toml")
}

/// Runs the CLI in-process and returns its exit code.
pub fn cli(args: &[&str]) -> i32 {
    let mut all = vec!["threadsim"];
    all.extend_from_slice(args);
    threadsim::cli::main_with_args(all)
}

/// Relative path to bytes for every file under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in walkdir::WalkDir::new(root) {
        let e = e.unwrap();
        if e.file_type().is_file() {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            out.insert(rel, std::fs::read(e.path()).unwrap());
        }
    }
    out
}

/// Parsed share table rows: (group, axis) to [share_-1, share_0, share_1].
pub fn read_shares(path: &Path) -> BTreeMap<(String, String), [f64; 3]> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        out.insert((rec[0].to_string(), rec[1].to_string()), [f(7), f(8), f(9)]);
    }
    out
}

pub mod checks;
