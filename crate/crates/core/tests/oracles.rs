//! Brute-force oracles and invariants for the analysis modules.

mod common;

use proptest::prelude::*;

use common::checks;
use threadsim::classify::{cross_tab, parse_classification, ClassificationTriple};
use threadsim::detector::{circle_clusters, run_experiment, score_predictions, ExperimentConfig};
use threadsim::embedspace::{cosine_similarity, group_distance_matrix, user_centroids, EmbeddedComment, Group};
use threadsim::textstats::{ngram_table, text_features, zipf_fit, NgramTable};

#[test]
fn classification_parsing_and_aggregation() {
    checks::parsing_and_aggregation().unwrap();
}

#[test]
fn ngram_counts_and_zipf_exponents() {
    checks::ngram_and_zipf().unwrap();
}

#[test]
fn annotated_feature_values() {
    checks::feature_formulas().unwrap();
}

#[test]
fn embedding_oracles_and_tsne() {
    checks::embedding_math().unwrap();
}

#[test]
fn detector_separable_shuffled_and_f1() {
    checks::detector_checks().unwrap();
}

#[test]
fn detector_reports_depend_on_seed() {
    let data = checks::shuffled_labels(&circle_clusters(20, 0.3, 2), 1);
    let cfg = |seed| ExperimentConfig { seed, runs: 4, ..ExperimentConfig::default() };
    let a = run_experiment(&data, &cfg(1)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run_experiment(&data, &cfg(1)).unwrap()).unwrap());
    assert_ne!(a.per_run, run_experiment(&data, &cfg(2)).unwrap().per_run);
}

#[test]
fn annotated_rows_were_counted_by_hand() {
    // spot checks of the independently annotated fixture
    let rows = checks::annotated_fixture();
    let r = &rows[0];
    assert_eq!(r.text, "The debate was a disaster for him.");
    assert_eq!((r.tokens, r.types, r.articles, r.function_words, r.sentences), (7, 7, 2, 5, 1));
    let f = text_features(&r.text).unwrap();
    assert_eq!(f.article_pct, 100.0 * 2.0 / 7.0);
}

#[test]
fn zipf_needs_three_points() {
    let t = NgramTable::from_counts(1, [("a".to_string(), 5), ("b".to_string(), 2)]);
    assert!(zipf_fit(&t, 1).is_err());
}

#[test]
fn cosine_identities() {
    checks::cosine_identities(1, 5000).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn any_valid_triple_round_trips(p in -1i8..=1, s in -1i8..=1, v in 0i8..=1, sep in prop::sample::select(vec![", ", ",", " ", " , "])) {
        let reply = format!("{p}{sep}{s}{sep}{v}");
        prop_assert_eq!(parse_classification(&reply).unwrap(), ClassificationTriple::new(p, s, v).unwrap());
    }

    #[test]
    fn crosstab_rows_are_stochastic(pairs in prop::collection::vec((-1i8..=1, -1i8..=1), 0..200)) {
        let ct = cross_tab(&pairs);
        let total: u64 = ct.counts.iter().flatten().sum();
        prop_assert_eq!(total as usize, pairs.len());
        for r in 0..3 {
            let s: f64 = ct.fractions[r].iter().sum();
            let ok = if ct.empty_rows[r] { s == 0.0 } else { (s - 1.0).abs() <= 1e-9 };
            prop_assert!(ok, "row {} sums to {}", r, s);
        }
    }

    #[test]
    fn unigram_total_is_token_count(seed in any::<u64>()) {
        let corpus = common::random_corpus(&mut threadsim::seed::rng(seed, "prop-corpus", 0));
        let t = ngram_table(&corpus, 1).unwrap();
        let tokens: usize = corpus.iter().filter_map(|c| text_features(c)).map(|f| f.tokens).sum();
        prop_assert_eq!(t.total() as usize, tokens);
        let freq: f64 = t.entries.iter().map(|e| e.normalized_freq).sum();
        prop_assert!(t.entries.is_empty() || (freq - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn features_are_bounded(seed in any::<u64>()) {
        let corpus = common::random_corpus(&mut threadsim::seed::rng(seed, "prop-features", 0));
        for text in &corpus {
            if let Some(f) = text_features(text) {
                prop_assert!(f.ttr > 0.0 && f.ttr <= 1.0);
                prop_assert!((0.0..=100.0).contains(&f.article_pct));
                prop_assert!(f.article_pct <= f.function_word_pct);
                prop_assert!(f.sentence_length >= 1.0);
            }
        }
    }

    #[test]
    fn centroid_of_one_comment_is_the_comment(v in prop::collection::vec(-5.0f64..5.0, 1..16)) {
        let c = user_centroids(&[EmbeddedComment { author: "a".into(), group: Group::Real, vector: v.clone() }]).unwrap();
        prop_assert_eq!(&c[0].vector, &v);
    }

    #[test]
    fn distance_matrix_is_symmetric(seed in any::<u64>()) {
        let m = group_distance_matrix(&common::ten_user_fixture(seed)).unwrap();
        for i in 0..m.groups.len() {
            for j in 0..m.groups.len() {
                prop_assert_eq!(m.values[i][j].to_bits(), m.values[j][i].to_bits());
                prop_assert!((0.0..=2.0).contains(&m.values[i][j]));
            }
        }
    }

    #[test]
    fn cosine_is_bounded(a in prop::collection::vec(-5.0f64..5.0, 4), b in prop::collection::vec(-5.0f64..5.0, 4)) {
        if let Ok(s) = cosine_similarity(&a, &b) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn accuracy_is_the_confusion_trace(preds in prop::collection::vec(0usize..5, 1..100), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = threadsim::seed::rng(seed, "truth", 0);
        let truth: Vec<usize> = preds.iter().map(|_| rng.random_range(0..5)).collect();
        let e = score_predictions(&preds, &truth, 5);
        let hits = preds.iter().zip(&truth).filter(|(p, t)| p == t).count();
        prop_assert_eq!(e.accuracy, hits as f64 / preds.len() as f64);
        let total: u64 = e.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, preds.len());
    }
}
