//! One function per acceptance criterion. Each returns a short summary on
//! success and a description of the first violation otherwise.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use threadsim::classify::{
    aggregate_shares, classify_text, cross_tab, parse_classification, AveragedScore, Axis, ClassificationTriple,
    ShareMode,
};
use threadsim::corpus::{
    build_forest, extract_history, extract_targets, read_forest_jsonl, write_forest_jsonl, Forest,
};
use threadsim::detector::{circle_clusters, run_experiment, score_predictions, ExperimentConfig, LabeledDataset};
use threadsim::embedspace::{
    cosine_similarity, group_distance_matrix, similarity_exceedance, tsne, Baseline, Group, TsneParams,
};
use threadsim::gateway::{Gateway, GatewayConfig, GenerationParams, GenerationRequest, ResponseCache};
use threadsim::scenario::{fictitious_history, render_branch, Candidate, PromptBuilder, PromptInput, ScenarioKind, Stance};
use threadsim::textstats::{ngram_table, text_features, zipf_fit, NgramTable};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- 1

pub fn template_fidelity() -> Check {
    let prompts: BTreeMap<String, String> = super::golden_prompts().into_iter().collect();
    for (name, text) in &prompts {
        super::check_golden(name, text)?;
    }
    for s in ScenarioKind::ALL {
        let t = &prompts[&format!("scenario_{}.txt", s.as_str())];
        ensure!(t.contains("We are playing a role game."), "{s} lacks the role-game opening");
        if let Some(stance) = s.fictitious_stance() {
            let h = fictitious_history(Candidate::Trump, stance);
            ensure!(
                t.contains(&h.entries[0].user_comment) && t.contains(&h.entries[0].replied_to),
                "{s} lacks its fictitious history"
            );
        }
    }
    for c in ["trump", "clinton"] {
        let t = &prompts[&format!("classification_{c}.txt")];
        ensure!(t.contains("You can only return three numbers"), "{c} classification prompt lacks the format rule");
    }
    // every stance/candidate pairing renders its own text
    let mut seen = std::collections::HashSet::new();
    for c in [Candidate::Trump, Candidate::Clinton] {
        for st in [Stance::Pro, Stance::Anti] {
            seen.insert(fictitious_history(c, st).entries[0].user_comment.clone());
        }
    }
    ensure!(seen.len() == 4, "fictitious histories are not distinct");
    Ok(format!("{} snapshots byte-identical", prompts.len()))
}

// ---------------------------------------------------------------- 2

pub fn random_triple(rng: &mut impl Rng) -> ClassificationTriple {
    ClassificationTriple::new(rng.random_range(-1..=1), rng.random_range(-1..=1), rng.random_range(0..=1)).unwrap()
}

pub fn parsing_and_aggregation() -> Check {
    let t = parse_classification("-1, -1, 1").map_err(|e| e.to_string())?;
    ensure!(t == ClassificationTriple::new(-1, -1, 1).unwrap(), "parsed {t:?}");
    let mut rng = threadsim::seed::rng(2, "aggregation-cases", 0);
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let scores: Vec<Option<AveragedScore>> = (0..n)
            .map(|_| {
                let runs: Vec<ClassificationTriple> =
                    (0..rng.random_range(0..4)).map(|_| random_triple(&mut rng)).collect();
                AveragedScore::from_runs(&runs)
            })
            .collect();
        for axis in Axis::ALL {
            for mode in [ShareMode::Modal, ShareMode::Pooled] {
                let b = aggregate_shares(&scores, axis, mode).map_err(|e| e.to_string())?;
                let sum: f64 = b.shares.iter().sum();
                if b.n_classified > 0 {
                    ensure!((sum - 1.0).abs() <= 1e-9, "case {case}: shares sum to {sum}");
                } else {
                    ensure!(sum == 0.0, "case {case}: empty breakdown has shares");
                }
            }
        }
        let pairs: Vec<(i8, i8)> = (0..rng.random_range(0..60))
            .map(|_| (rng.random_range(-1..=1), rng.random_range(-1..=1)))
            .collect();
        let ct = cross_tab(&pairs);
        for r in 0..3 {
            let sum: f64 = ct.fractions[r].iter().sum();
            if ct.empty_rows[r] {
                ensure!(sum == 0.0, "case {case}: empty row {r} has mass");
            } else {
                ensure!((sum - 1.0).abs() <= 1e-9, "case {case}: row {r} sums to {sum}");
            }
        }
    }
    Ok("1000 randomized cases".into())
}

// ---------------------------------------------------------------- 3

/// Runs the demo pipeline into `out` with a fixed manifest timestamp.
pub fn run_demo(out: &Path, extra: &[&str]) -> i32 {
    let cfg = super::demo_config();
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--timestamp", "0"];
    args.extend_from_slice(extra);
    args.push("run");
    super::cli(&args)
}

pub fn scripted_mock_pipeline() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let code = run_demo(out, &[]);
        ensure!(code == 0, "pipeline exited with {code}");
    }
    let mut checked = 0;
    for sub in ["demo_trump", "demo_clinton"] {
        let shares = super::read_shares(&a.join("analyze").join(sub).join("t0.00").join("shares.csv"));
        let get = |g: &str| shares.get(&(g.to_string(), "party".to_string())).copied();
        let pro = get("pro_candidate").ok_or("no pro_candidate row")?;
        let anti = get("anti_candidate").ok_or("no anti_candidate row")?;
        let null = get("no_history").ok_or("no no_history row")?;
        ensure!(pro[2] == 1.0, "{sub}: pro share {}", pro[2]);
        ensure!(anti[0] == 1.0, "{sub}: anti share {}", anti[0]);
        ensure!(null[1] == 1.0, "{sub}: null-model neutral share {}", null[1]);
        checked += 1;
    }
    let (sa, sb) = (super::snapshot(&a), super::snapshot(&b));
    ensure!(sa.keys().eq(sb.keys()), "file sets differ");
    for (k, v) in &sa {
        ensure!(&sb[k] == v, "{k} differs between runs");
    }
    Ok(format!("{checked} subreddits, {} files byte-identical", sa.len()))
}

// ---------------------------------------------------------------- 4

pub fn ngram_and_zipf() -> Check {
    let mut rng = threadsim::seed::rng(4, "ngram-corpora", 0);
    for case in 0..20 {
        let corpus = super::random_corpus(&mut rng);
        for n in 1..=3 {
            let table = ngram_table(&corpus, n).map_err(|e| e.to_string())?;
            let got: BTreeMap<String, u64> = table.entries.iter().map(|e| (e.gram.clone(), e.count)).collect();
            ensure!(got == super::ngram_oracle(&corpus, n), "corpus {case}, n = {n}: counts differ");
            ensure!(
                table.entries.iter().enumerate().all(|(i, e)| e.rank == i + 1),
                "corpus {case}: ranks are not 1..k"
            );
        }
    }
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 1.5, 2.0] {
        let table = NgramTable::from_counts(1, super::planted_counts(s, 200));
        let fit = zipf_fit(&table, 1).map_err(|e| e.to_string())?;
        ensure!((fit.s - s).abs() <= 1e-6, "planted {s}, fitted {}", fit.s);
        ensure!(fit.r2 >= 0.999999, "planted {s}, r2 {}", fit.r2);
        worst = worst.max((fit.s - s).abs());
    }
    Ok(format!("20 corpora exact; worst exponent error {worst:.1e}"))
}

// ---------------------------------------------------------------- 5

#[derive(serde::Deserialize)]
pub struct Annotated {
    pub text: String,
    pub tokens: usize,
    pub types: usize,
    pub articles: usize,
    pub function_words: usize,
    pub sentences: usize,
}

pub fn annotated_fixture() -> Vec<Annotated> {
    std::fs::read_to_string(super::fixture("features/annotated.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn feature_formulas() -> Check {
    let rows = annotated_fixture();
    ensure!(rows.len() == 20, "fixture has {} rows", rows.len());
    for (i, r) in rows.iter().enumerate() {
        let f = text_features(&r.text).ok_or(format!("row {i} has no tokens"))?;
        let n = r.tokens as f64;
        let expected = [
            ("ttr", r.types as f64 / n, f.ttr),
            ("article_pct", 100.0 * r.articles as f64 / n, f.article_pct),
            ("function_word_pct", 100.0 * r.function_words as f64 / n, f.function_word_pct),
            ("sentence_length", n / r.sentences as f64, f.sentence_length),
        ];
        ensure!(f.tokens == r.tokens && f.sentences == r.sentences, "row {i}: counts {f:?}");
        for (name, want, got) in expected {
            ensure!(want == got, "row {i}: {name} {got} != {want}");
        }
    }
    let mut summary = "20 annotated comments exact".to_string();
    if let Some(path) = std::env::var_os("THREADSIM_REFERENCE_COMMENTS") {
        // full-corpus comparison is reported, never enforced
        let parsed = threadsim::corpus::parse_dump(BufReader::new(
            std::fs::File::open(&path).map_err(|e| format!("{}: {e}", Path::new(&path).display()))?,
        ))
        .map_err(|e| e.to_string())?;
        let texts: Vec<&str> = parsed.records.iter().map(|r| r.body.as_str()).collect();
        let rec = threadsim::textstats::features(&texts).map_err(|e| e.to_string())?;
        summary.push_str(&format!(
            "; reference-only TTR {:.4} +/- {:.4} (published 0.5088 +/- 0.0093 for real Trump comments)",
            rec.ttr.mean, rec.ttr.std
        ));
    }
    Ok(summary)
}

// ---------------------------------------------------------------- 6

pub fn two_gaussian_clusters(seed: u64, per: usize, dim: usize) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = threadsim::seed::rng(seed, "gaussian-clusters", 0);
    (0..2 * per)
        .map(|i| {
            let center = if i < per { 0.0 } else { 8.0 };
            (0..dim).map(|_| center + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
        })
        .collect()
}

/// Mean pairwise 2-D distance within and across the two halves.
pub fn intra_inter(coords: &[[f64; 2]], per: usize) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            let d = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            if (i < per) == (j < per) {
                intra += d;
                ni += 1;
            } else {
                inter += d;
                nx += 1;
            }
        }
    }
    (intra / ni as f64, inter / nx as f64)
}

pub fn cosine_identities(seed: u64, cases: usize) -> Check {
    let mut rng = threadsim::seed::rng(seed, "cosine-cases", 0);
    for case in 0..cases {
        let dim = rng.random_range(1..32);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        if a.iter().all(|&x| x == 0.0) || b.iter().all(|&x| x == 0.0) {
            continue;
        }
        let k = rng.random_range(0.01..100.0);
        let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
        let ab = cosine_similarity(&a, &b).unwrap();
        ensure!((ab - cosine_similarity(&b, &a).unwrap()).abs() <= 1e-12, "case {case}: asymmetric");
        ensure!((ab - cosine_similarity(&scaled, &b).unwrap()).abs() <= 1e-12, "case {case}: scale dependent");
        ensure!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() <= 1e-12, "case {case}: self-similarity");
    }
    Ok(format!("{cases} vector pairs"))
}

pub fn embedding_math() -> Check {
    cosine_identities(6, 2000)?;
    for seed in 0..5 {
        let all = super::ten_user_fixture(seed);
        let real: Vec<_> = all.iter().filter(|c| c.group == Group::Real).cloned().collect();
        let generated: Vec<_> = all.iter().filter(|c| c.group == Group::ProCandidate).cloned().collect();
        for baseline in [Baseline::RandomMatch, Baseline::AllRealMean] {
            let got = similarity_exceedance(&generated, &real, baseline, seed, 25).map_err(|e| e.to_string())?;
            let want = super::exceedance_oracle(&generated, &real, baseline, seed, 25);
            for (u, (s, t, e)) in got.users.iter().zip(&want) {
                ensure!(
                    u.similarity == *s && u.threshold == *t && u.exceeds == *e,
                    "seed {seed} {baseline:?}: {} differs from the oracle",
                    u.author
                );
            }
            let n = want.iter().filter(|w| w.2).count();
            ensure!(got.proportion == n as f64 / 10.0, "seed {seed}: proportion {}", got.proportion);
        }
        let m = group_distance_matrix(&all).map_err(|e| e.to_string())?;
        for (i, &a) in m.groups.iter().enumerate() {
            for (j, &b) in m.groups.iter().enumerate() {
                // the matrix is symmetric; the oracle sums in row-major group order
                let (lo, hi) = if i <= j { (a, b) } else { (b, a) };
                let want = super::distance_oracle(&all, lo, hi);
                ensure!(m.values[i][j] == want, "seed {seed}: d({a}, {b}) = {} != {want}", m.values[i][j]);
            }
        }
    }
    let x = two_gaussian_clusters(9, 30, 10);
    let p = TsneParams {
        perplexity: 15.0,
        iterations: 750,
        seed: 13,
        ..TsneParams::default()
    };
    let out = tsne(&x, &p).map_err(|e| e.to_string())?;
    let (intra, inter) = intra_inter(&out.coords, 30);
    ensure!(inter > intra, "t-SNE inter {inter} <= intra {intra}");
    for w in out.kl_trace.windows(2).filter(|w| w[0].iteration >= p.exaggeration_iters) {
        ensure!(w[1].kl <= w[0].kl + 1e-6, "KL rose from {:?} to {:?}", w[0], w[1]);
    }
    let again = tsne(&x, &p).map_err(|e| e.to_string())?;
    let bits = |o: &threadsim::embedspace::TsneOutput| -> Vec<u64> {
        o.coords.iter().flat_map(|c| [c[0].to_bits(), c[1].to_bits()]).collect()
    };
    ensure!(bits(&out) == bits(&again), "t-SNE is not seed-deterministic");
    Ok(format!("oracles exact on 5 fixtures; t-SNE inter/intra {:.2}", inter / intra))
}

// ---------------------------------------------------------------- 7

pub fn shuffled_labels(data: &LabeledDataset, seed: u64) -> LabeledDataset {
    let mut y = data.y.clone();
    y.shuffle(&mut threadsim::seed::rng(seed, "label-shuffle", 0));
    LabeledDataset::new(data.x.clone(), y, data.class_names.clone()).unwrap()
}

pub fn detector_checks() -> Check {
    let cfg = ExperimentConfig {
        seed: 21,
        ..ExperimentConfig::default()
    };
    let sep = run_experiment(&circle_clusters(40, 0.05, 1), &cfg).map_err(|e| e.to_string())?;
    ensure!(
        sep.accuracy.mean == Some(1.0) && sep.accuracy.std == Some(0.0) && sep.runs == 10,
        "separable accuracy {:?}",
        sep.accuracy
    );
    let shuffled = run_experiment(&shuffled_labels(&circle_clusters(40, 0.05, 1), 5), &cfg).map_err(|e| e.to_string())?;
    let acc = shuffled.accuracy.mean.unwrap();
    ensure!((0.1..=0.3).contains(&acc), "shuffled-label accuracy {acc}");
    let mut rng = threadsim::seed::rng(7, "f1-cases", 0);
    let mut checked = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..80);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        for m in score_predictions(&preds, &truth, 5).per_class {
            if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
                if p + r > 0.0 {
                    ensure!((f - 2.0 * p * r / (p + r)).abs() <= 1e-12, "F1 {f} for P {p} R {r}");
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("separable 1.000 +/- 0.000; shuffled {acc:.3}; {checked} F1 values"))
}

// ---------------------------------------------------------------- 8

pub fn corpus_conservation() -> Check {
    for f in super::CORPUS_FIXTURES {
        let (records, accounted) = super::conservation(f);
        ensure!(records == accounted, "{f}: {records} lines, {accounted} accounted for");
        let (_, forest) = super::forest_fixture(f);
        let mut buf = Vec::new();
        write_forest_jsonl(&forest, &mut buf).map_err(|e| e.to_string())?;
        let back = Forest {
            trees: read_forest_jsonl(BufReader::new(buf.as_slice())).map_err(|e| e.to_string())?,
            orphans: forest.orphans.clone(),
        };
        ensure!(super::forest_shape(&back) == super::forest_shape(&forest), "{f}: round trip changed the forest");
    }
    Ok(format!("{} fixtures", super::CORPUS_FIXTURES.len()))
}

// ---------------------------------------------------------------- 9

pub const LIVE_KEY_ENV: &str = "OPENAI_API_KEY";

/// `None` when no credential is available.
pub fn live_smoke() -> Option<Check> {
    std::env::var_os(LIVE_KEY_ENV)?;
    Some(live_smoke_inner())
}

fn live_smoke_inner() -> Check {
    use threadsim::gateway::live::{LiveChat, LiveConfig};
    let base = std::env::var("OPENAI_BASE_URL").unwrap_or_else(|_| "https://api.openai.com/v1".into());
    let live = LiveConfig::from_env(&base, LIVE_KEY_ENV).map_err(|e| e.to_string())?;
    let gateway = Gateway::new(
        Arc::new(LiveChat::new(live)),
        ResponseCache::in_memory(),
        GatewayConfig {
            budget: threadsim::gateway::Budget::new(Some(60)),
            ..GatewayConfig::default()
        },
    );
    let mut records = super::parse_fixture("demo/demo_trump_posts.jsonl").records;
    records.extend(super::parse_fixture("demo/demo_trump_comments.jsonl").records);
    let forest = build_forest(records).map_err(|e| e.to_string())?;
    let mut authors: Vec<String> = forest
        .trees
        .iter()
        .flat_map(|t| t.nodes.iter().map(|n| n.record.author.clone()))
        .filter(|a| a.starts_with("tr_user"))
        .collect();
    authors.sort();
    authors.dedup();
    let targets: Vec<_> = authors.iter().filter_map(|a| extract_targets(a, &forest).into_iter().next()).take(5).collect();
    ensure!(targets.len() == 5, "only {} targets in the demo corpus", targets.len());
    let params = GenerationParams::default();
    let builder = PromptBuilder::new(params.clone());
    let mut generated = 0;
    let mut violent = 0;
    let mut classified = 0;
    for t in &targets {
        let tree = forest.tree(&t.tree_id).unwrap();
        let branch = render_branch(tree, t).map_err(|e| e.to_string())?;
        let history = extract_history(&t.author, &forest);
        let target_ref = t.target_ref();
        for s in ScenarioKind::ALL {
            let input = PromptInput {
                target_ref: &target_ref,
                author: &t.author,
                candidate: Candidate::Trump,
                branch: &branch,
                real_history: Some(&history),
            };
            let prompt = builder.build(s, &input).map_err(|e| e.to_string())?;
            let reply = gateway.generate(&GenerationRequest::new(prompt), 0).map_err(|e| e.to_string())?;
            ensure!(!reply.text.is_empty(), "{target_ref} {s}: empty reply");
            generated += 1;
            let c = classify_text(&gateway, &reply.text, Candidate::Trump, 1, &GenerationParams::default())
                .map_err(|e| e.to_string())?;
            ensure!(c.runs.iter().all(Option::is_some), "{target_ref} {s}: classification did not parse");
            classified += 1;
            violent += c.score.map_or(0, |s| s.modal_triple.violence as usize);
        }
    }
    let share = violent as f64 / classified as f64;
    ensure!(share <= 0.2, "violence share {share}");
    Ok(format!("{generated} generations, {classified} classifications, violence share {share:.2}"))
}
