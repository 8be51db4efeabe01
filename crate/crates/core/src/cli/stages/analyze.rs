use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_jsonl, stage_dir, temp_dir, StageLog};
use crate::classify::{
    aggregate_shares, bin_by_prompt_length, classify_text, cross_tab, user_mean_distribution, AveragedScore, Axis,
    ClassificationTriple,
};
use crate::cli::manifest::StageStatus;
use crate::cli::{CliError, Context};
use crate::corpus::TargetComment;
use crate::embedspace::{
    centroids_table, group_distance_matrix, intra_group_similarity, project, similarity_exceedance, Baseline,
    EmbeddedComment, Group, LabeledVector, Projection2D, TsneParams, UserCentroid,
};
use crate::gateway::{Gateway, GatewayError, GeneratedComment, GenerationParams};
use crate::io::{fmt_f64, CsvTable};
use crate::scenario::{Candidate, PromptBundle};
use crate::seed::derive;
use crate::textstats::{features, features_table, ngram_table, rank_correlation, zipf_fit, NgramTable};

/// One text under analysis: a real target comment or a generated reply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Item {
    pub group: Group,
    pub author: String,
    pub target_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<u32>,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassificationRecord {
    group: Group,
    author: String,
    target_ref: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    run_index: Option<u32>,
    runs: Vec<Option<ClassificationTriple>>,
    requeries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScoreRecord {
    group: Group,
    author: String,
    target_ref: String,
    score: Option<AveragedScore>,
}

#[derive(Debug, Serialize)]
struct Summary {
    temperature: f64,
    items: BTreeMap<String, usize>,
    unclassified_items: usize,
    embedding_failures: usize,
    projected_users: usize,
    notes: Vec<String>,
}

fn items_for(targets: &[TargetComment], prompts: &[PromptBundle], generated: &[GeneratedComment]) -> Vec<Item> {
    let simulated: BTreeSet<&str> = prompts.iter().map(|p| p.target_ref.as_str()).collect();
    let mut items: Vec<Item> = targets
        .iter()
        .filter(|t| simulated.contains(t.target_ref().as_str()))
        .map(|t| Item {
            group: Group::Real,
            author: t.author.clone(),
            target_ref: t.target_ref(),
            run_index: None,
            text: t.body.clone(),
        })
        .collect();
    items.extend(generated.iter().map(|c| Item {
        group: c.scenario.into(),
        author: c.author.clone(),
        target_ref: c.target_ref.clone(),
        run_index: Some(c.run_index),
        text: c.text.clone(),
    }));
    items.sort_by(|a, b| (a.group, &a.target_ref, a.run_index).cmp(&(b.group, &b.target_ref, b.run_index)));
    items
}

/// Applies `f` to every item in parallel. A budget or authentication error
/// stops further calls and is returned; other errors stay per item.
fn per_item<T: Send>(
    pool: &rayon::ThreadPool,
    items: &[Item],
    f: impl Fn(&Item) -> Result<T, GatewayError> + Sync,
) -> Result<Vec<Result<T, GatewayError>>, CliError> {
    let stop = AtomicBool::new(false);
    let out: Vec<Option<Result<T, GatewayError>>> = pool.install(|| {
        items
            .par_iter()
            .map(|it| {
                if stop.load(Ordering::SeqCst) {
                    return None;
                }
                let r = f(it);
                if matches!(r, Err(GatewayError::BudgetExceeded { .. } | GatewayError::AuthError(_))) {
                    stop.store(true, Ordering::SeqCst);
                }
                Some(r)
            })
            .collect()
    });
    let mut results = Vec::with_capacity(out.len());
    for r in out {
        match r {
            Some(Err(e @ (GatewayError::BudgetExceeded { .. } | GatewayError::AuthError(_)))) => return Err(e.into()),
            Some(r) => results.push(r),
            None => {}
        }
    }
    if results.len() != items.len() {
        return Err(CliError::Runtime("analysis halted before every item was processed".into()));
    }
    Ok(results)
}

fn present_groups(items: &[Item]) -> Vec<Group> {
    items.iter().map(|i| i.group).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Scores per (group, target): every run of every item for that target.
fn pool_scores(items: &[Item], records: &[ClassificationRecord]) -> Vec<ScoreRecord> {
    let mut acc: BTreeMap<(Group, &str), (&str, Vec<ClassificationTriple>, bool)> = BTreeMap::new();
    for (it, rec) in items.iter().zip(records) {
        let slot = acc
            .entry((it.group, it.target_ref.as_str()))
            .or_insert((it.author.as_str(), Vec::new(), false));
        slot.1.extend(rec.runs.iter().flatten().copied());
        slot.2 = true;
    }
    acc.into_iter()
        .map(|((group, target_ref), (author, runs, _))| ScoreRecord {
            group,
            author: author.to_string(),
            target_ref: target_ref.to_string(),
            score: AveragedScore::from_runs(&runs),
        })
        .collect()
}

fn shares_table(groups: &[Group], scores: &[ScoreRecord], mode: crate::classify::ShareMode) -> CsvTable {
    let mut t = CsvTable::new(&[
        "group", "axis", "n_classified", "n_unclassified", "count_-1", "count_0", "count_1", "share_-1", "share_0",
        "share_1",
    ]);
    for &g in groups {
        let s: Vec<Option<AveragedScore>> = scores.iter().filter(|r| r.group == g).map(|r| r.score.clone()).collect();
        for axis in Axis::ALL {
            let Ok(b) = aggregate_shares(&s, axis, mode) else { continue };
            let mut row = vec![g.to_string(), axis.as_str().to_string(), b.n_classified.to_string(), b.n_unclassified.to_string()];
            row.extend(b.counts.iter().map(u64::to_string));
            row.extend(b.shares.iter().map(|&x| fmt_f64(x)));
            t.row(row);
        }
    }
    t
}

fn user_tables(groups: &[Group], scores: &[ScoreRecord], bins: usize) -> (CsvTable, CsvTable) {
    let mut means = CsvTable::new(&["group", "author", "party_mean"]);
    let mut hist = CsvTable::new(&["group", "bin_start", "bin_end", "users"]);
    for &g in groups {
        let pairs: Vec<(String, f64)> = scores
            .iter()
            .filter(|r| r.group == g)
            .filter_map(|r| r.score.as_ref().map(|s| (r.author.clone(), s.party_mean)))
            .collect();
        let h = user_mean_distribution(&pairs, bins);
        for (a, m) in &h.author_means {
            means.row(vec![g.to_string(), a.clone(), fmt_f64(*m)]);
        }
        for (i, c) in h.counts.iter().enumerate() {
            hist.row(vec![g.to_string(), fmt_f64(h.edges[i]), fmt_f64(h.edges[i + 1]), c.to_string()]);
        }
    }
    (means, hist)
}

fn length_table(scores: &[ScoreRecord], prompts: &[PromptBundle], width: usize) -> CsvTable {
    let mut t = CsvTable::new(&["group", "bin_start", "bin_end", "count", "party_mean"]);
    let tokens: HashMap<(Group, &str), usize> = prompts
        .iter()
        .map(|p| ((Group::from(p.scenario), p.target_ref.as_str()), p.token_estimate))
        .collect();
    let groups: BTreeSet<Group> = tokens.keys().map(|k| k.0).collect();
    for g in groups {
        let (vals, toks): (Vec<f64>, Vec<usize>) = scores
            .iter()
            .filter(|r| r.group == g)
            .filter_map(|r| {
                let s = r.score.as_ref()?;
                Some((s.party_mean, *tokens.get(&(g, r.target_ref.as_str()))?))
            })
            .unzip();
        for b in bin_by_prompt_length(&vals, &toks, width) {
            t.row(vec![
                g.to_string(),
                b.start.to_string(),
                b.end.to_string(),
                b.count.to_string(),
                fmt_f64(b.mean.unwrap_or(f64::NAN)),
            ]);
        }
    }
    t
}

/// Real modal label against generated modal label, per target.
fn crosstab_table(groups: &[Group], scores: &[ScoreRecord]) -> CsvTable {
    let mut t = CsvTable::new(&["group", "axis", "real_label", "generated_label", "count", "row_fraction"]);
    let real: HashMap<&str, &AveragedScore> = scores
        .iter()
        .filter(|r| r.group == Group::Real)
        .filter_map(|r| r.score.as_ref().map(|s| (r.target_ref.as_str(), s)))
        .collect();
    for &g in groups.iter().filter(|&&g| g != Group::Real) {
        for axis in [Axis::Party, Axis::Sentiment] {
            let pairs: Vec<(i8, i8)> = scores
                .iter()
                .filter(|r| r.group == g)
                .filter_map(|r| {
                    let gen = r.score.as_ref()?;
                    let re = real.get(r.target_ref.as_str())?;
                    Some((re.modal_triple.get(axis), gen.modal_triple.get(axis)))
                })
                .collect();
            let ct = cross_tab(&pairs);
            for (ri, real_label) in (-1i8..=1).enumerate() {
                for (ci, gen_label) in (-1i8..=1).enumerate() {
                    t.row(vec![
                        g.to_string(),
                        axis.as_str().to_string(),
                        real_label.to_string(),
                        gen_label.to_string(),
                        ct.counts[ri][ci].to_string(),
                        if ct.empty_rows[ri] { String::new() } else { fmt_f64(ct.fractions[ri][ci]) },
                    ]);
                }
            }
        }
    }
    t
}

struct TextTables {
    features: CsvTable,
    zipf: CsvTable,
    rank: CsvTable,
    ngrams: Vec<(String, NgramTable)>,
}

fn text_tables(groups: &[Group], items: &[Item], min_count: u64, notes: &mut Vec<String>) -> TextTables {
    let mut feats = BTreeMap::new();
    let mut zipf = CsvTable::new(&["group", "n", "s", "C", "r2", "n_points", "note"]);
    let mut rank = CsvTable::new(&["group", "n", "rank_correlation_with_real", "note"]);
    let mut ngrams = Vec::new();
    let mut real_tables: HashMap<usize, NgramTable> = HashMap::new();
    for &g in groups {
        let corpus: Vec<&str> = items.iter().filter(|i| i.group == g).map(|i| i.text.as_str()).collect();
        match features(&corpus) {
            Ok(f) => {
                feats.insert(g.to_string(), f);
            }
            Err(e) => notes.push(format!("features for {g}: {e}")),
        }
        for n in 1..=3 {
            let table = ngram_table(&corpus, n).expect("order in range");
            match zipf_fit(&table, min_count) {
                Ok(z) => zipf.row(vec![
                    g.to_string(),
                    n.to_string(),
                    fmt_f64(z.s),
                    fmt_f64(z.c),
                    fmt_f64(z.r2),
                    z.n_points.to_string(),
                    String::new(),
                ]),
                Err(e) => zipf.row(vec![g.to_string(), n.to_string(), String::new(), String::new(), String::new(), "0".into(), e.to_string()]),
            }
            if g == Group::Real {
                real_tables.insert(n, table.clone());
            } else if let Some(real) = real_tables.get(&n) {
                match rank_correlation(&table, real) {
                    Ok(r) => rank.row(vec![g.to_string(), n.to_string(), fmt_f64(r), String::new()]),
                    Err(e) => rank.row(vec![g.to_string(), n.to_string(), String::new(), e.to_string()]),
                }
            }
            ngrams.push((format!("{g}_n{n}"), table));
        }
    }
    TextTables {
        features: features_table(&feats),
        zipf,
        rank,
        ngrams,
    }
}

fn exceedance_tables(
    groups: &[Group],
    centroids: &[UserCentroid],
    seed: u64,
    shuffles: usize,
    notes: &mut Vec<String>,
) -> (CsvTable, CsvTable) {
    let mut summary = CsvTable::new(&["group", "baseline", "proportion", "n_users", "n_exceeding", "mean_similarity", "mean_threshold", "note"]);
    let mut users = CsvTable::new(&["group", "baseline", "author", "similarity", "threshold", "exceeds"]);
    let real: Vec<UserCentroid> = centroids.iter().filter(|c| c.group == Group::Real).cloned().collect();
    for &g in groups.iter().filter(|&&g| g != Group::Real) {
        let gen: Vec<UserCentroid> = centroids.iter().filter(|c| c.group == g).cloned().collect();
        for baseline in [Baseline::RandomMatch, Baseline::AllRealMean] {
            let bname = serde_json::to_value(baseline).expect("serializable").as_str().unwrap_or_default().to_string();
            match similarity_exceedance(&gen, &real, baseline, derive(seed, "exceedance", g.index() as u64), shuffles) {
                Ok(e) => {
                    let n = e.users.len() as f64;
                    summary.row(vec![
                        g.to_string(),
                        bname.clone(),
                        fmt_f64(e.proportion),
                        e.n_users.to_string(),
                        e.n_exceeding.to_string(),
                        fmt_f64(e.users.iter().map(|u| u.similarity).sum::<f64>() / n),
                        fmt_f64(e.users.iter().map(|u| u.threshold).sum::<f64>() / n),
                        String::new(),
                    ]);
                    for u in &e.users {
                        users.row(vec![
                            g.to_string(),
                            bname.clone(),
                            u.author.clone(),
                            fmt_f64(u.similarity),
                            fmt_f64(u.threshold),
                            u.exceeds.to_string(),
                        ]);
                    }
                }
                Err(e) => {
                    notes.push(format!("exceedance for {g} ({bname}): {e}"));
                    summary.row(vec![g.to_string(), bname, String::new(), gen.len().to_string(), String::new(), String::new(), String::new(), e.to_string()]);
                }
            }
        }
    }
    (summary, users)
}

fn intra_table(groups: &[Group], centroids: &[UserCentroid]) -> CsvTable {
    let mut t = CsvTable::new(&["group", "n_users", "mean_pairwise_similarity", "note"]);
    for &g in groups {
        let v: Vec<&[f64]> = centroids.iter().filter(|c| c.group == g).map(|c| c.vector.as_slice()).collect();
        match intra_group_similarity(&v, g) {
            Ok(s) => t.row(vec![g.to_string(), v.len().to_string(), fmt_f64(s), String::new()]),
            Err(e) => t.row(vec![g.to_string(), v.len().to_string(), String::new(), e.to_string()]),
        }
    }
    t
}

fn tsne_params(ctx: &Context, label: &str) -> TsneParams {
    let a = &ctx.cfg.analysis;
    TsneParams {
        perplexity: a.perplexity,
        iterations: a.tsne_iterations,
        learning_rate: a.learning_rate,
        early_exaggeration: a.early_exaggeration,
        exaggeration_iters: a.exaggeration_iters,
        pca_dims: a.pca_dims,
        seed: derive(ctx.cfg.seed, label, 0),
        ..TsneParams::default()
    }
}

/// Smallest input for which the perplexity cap still leaves a usable value.
const MIN_PROJECTED: usize = 6;

fn write_projection(
    log: &mut StageLog,
    dir: &Path,
    stem: &str,
    vectors: &[LabeledVector],
    params: &TsneParams,
    svg: bool,
) -> Result<Option<Projection2D>, CliError> {
    if vectors.len() < MIN_PROJECTED {
        log.note(format!("{}: {} points are too few to project", dir.join(stem).display(), vectors.len()));
        return Ok(None);
    }
    let p = project(vectors, params).map_err(|e| CliError::Runtime(format!("projection: {e}")))?;
    log.csv(&dir.join(format!("{stem}.csv")), &p.table())?;
    log.json(
        &dir.join(format!("{stem}.params.json")),
        &serde_json::json!({ "params": p.params, "kl_trace": p.kl_trace, "n_points": p.points.len() }),
    )?;
    if svg {
        log.bytes(&dir.join(format!("{stem}.svg")), p.svg().as_bytes())?;
    }
    Ok(Some(p))
}

#[allow(clippy::too_many_arguments)]
fn analyze_one(
    ctx: &Context,
    log: &mut StageLog,
    gateway: &Gateway,
    pool: &rayon::ThreadPool,
    dir: &Path,
    candidate: Candidate,
    t: f64,
    items: &[Item],
    prompts: &[PromptBundle],
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let c = &cfg.classification;
    let mut notes = Vec::new();
    let groups = present_groups(items);

    let params = GenerationParams {
        temperature: c.temperature,
        top_p: 1.0,
        model_name: c.model.clone(),
    };
    let classified = per_item(pool, items, |it| classify_text(gateway, &it.text, candidate, c.n_runs, &params))?;
    let records: Vec<ClassificationRecord> = items
        .iter()
        .zip(classified)
        .map(|(it, r)| {
            let (runs, requeries, error) = match r {
                Ok(ct) => (ct.runs, ct.requeries, None),
                Err(e) => (Vec::new(), 0, Some(e.to_string())),
            };
            ClassificationRecord {
                group: it.group,
                author: it.author.clone(),
                target_ref: it.target_ref.clone(),
                run_index: it.run_index,
                runs,
                requeries,
                error,
            }
        })
        .collect();
    let unclassified = records.iter().filter(|r| r.runs.iter().all(Option::is_none)).count();
    if unclassified > 0 {
        notes.push(format!("{unclassified} item(s) have no valid classification"));
    }
    let scores = pool_scores(items, &records);
    log.jsonl(&dir.join("classifications.jsonl"), &records)?;
    log.jsonl(&dir.join("scores.jsonl"), &scores)?;
    log.csv(&dir.join("shares.csv"), &shares_table(&groups, &scores, c.share_mode))?;
    let (means, hist) = user_tables(&groups, &scores, c.histogram_bins);
    log.csv(&dir.join("user_means.csv"), &means)?;
    log.csv(&dir.join("user_mean_hist.csv"), &hist)?;
    log.csv(&dir.join("length_bins.csv"), &length_table(&scores, prompts, c.length_bin_width))?;
    log.csv(&dir.join("crosstab.csv"), &crosstab_table(&groups, &scores))?;

    let tt = text_tables(&groups, items, cfg.analysis.zipf_min_count, &mut notes);
    log.csv(&dir.join("features.csv"), &tt.features)?;
    log.csv(&dir.join("zipf.csv"), &tt.zipf)?;
    log.csv(&dir.join("rank_correlation.csv"), &tt.rank)?;
    if cfg.analysis.write_ngram_tables {
        for (name, table) in &tt.ngrams {
            let p = dir.join("ngrams").join(format!("{name}.tsv.gz"));
            table.write_tsv_gz(&p)?;
            log.wrote(&p);
        }
    }

    let embedded = per_item(pool, items, |it| gateway.embed(&it.text))?;
    let mut comments = Vec::new();
    let mut embed_failures = 0;
    for (it, e) in items.iter().zip(embedded) {
        match e {
            Ok(v) => comments.push(EmbeddedComment {
                author: it.author.clone(),
                group: it.group,
                vector: v.values,
            }),
            Err(err) => {
                embed_failures += 1;
                notes.push(format!("embedding {} {} failed: {err}", it.group, it.target_ref));
            }
        }
    }
    let centroids = crate::embedspace::user_centroids(&comments).map_err(|e| CliError::Runtime(e.to_string()))?;
    log.csv(&dir.join("centroids.csv"), &centroids_table(&centroids))?;
    let (exc, exc_users) = exceedance_tables(&groups, &centroids, cfg.seed, cfg.analysis.shuffles, &mut notes);
    log.csv(&dir.join("exceedance.csv"), &exc)?;
    log.csv(&dir.join("exceedance_users.csv"), &exc_users)?;
    match group_distance_matrix(&centroids) {
        Ok(m) => log.csv(&dir.join("distance_matrix.csv"), &m.table())?,
        Err(e) => notes.push(format!("distance matrix: {e}")),
    }
    log.csv(&dir.join("intra_similarity.csv"), &intra_table(&groups, &centroids))?;

    let users: Vec<LabeledVector> = centroids
        .iter()
        .filter(|c| !c.is_zero)
        .map(|c| LabeledVector {
            author: c.author.clone(),
            group: c.group,
            vector: c.vector.clone(),
        })
        .collect();
    let projected = write_projection(log, dir, "projection_users", &users, &tsne_params(ctx, "tsne-users"), cfg.analysis.svg)?
        .map_or(0, |p| p.points.len());
    if cfg.analysis.project_comments {
        let all: Vec<LabeledVector> = comments
            .iter()
            .map(|c| LabeledVector {
                author: c.author.clone(),
                group: c.group,
                vector: c.vector.clone(),
            })
            .collect();
        write_projection(log, dir, "projection_comments", &all, &tsne_params(ctx, "tsne-comments"), cfg.analysis.svg)?;
    }

    let mut counts = BTreeMap::new();
    for it in items {
        *counts.entry(it.group.to_string()).or_insert(0) += 1;
    }
    for n in &notes {
        log.note(format!("{}: {n}", dir.display()));
    }
    log.json(
        &dir.join("summary.json"),
        &Summary {
            temperature: t,
            items: counts,
            unclassified_items: unclassified,
            embedding_failures: embed_failures,
            projected_users: projected,
            notes,
        },
    )
}

/// Classification, text statistics and embedding-space tables for every
/// subreddit and temperature.
pub fn cmd_analyze(ctx: &Context) -> Result<(), CliError> {
    let gateway = ctx.gateway()?;
    let pool = ctx.pool()?;
    let mut log = StageLog::new(ctx);
    let mut result = Ok(());
    'subs: for sub in &ctx.cfg.subreddits {
        let targets: Vec<TargetComment> =
            read_jsonl(&log.input(&stage_dir(ctx, "ingest", &sub.name).join("targets.jsonl"), "ingest")?)?;
        for &t in &ctx.cfg.generation.temperatures {
            let sdir = temp_dir(ctx, "simulate", &sub.name, t);
            let prompts: Vec<PromptBundle> = read_jsonl(&log.input(&sdir.join("prompts.jsonl"), "simulate")?)?;
            let generated: Vec<GeneratedComment> = read_jsonl(&log.input(&sdir.join("generated.jsonl"), "simulate")?)?;
            let items = items_for(&targets, &prompts, &generated);
            if items.is_empty() {
                log.note(format!("{} at {t}: nothing to analyze", sub.name));
                continue;
            }
            let dir = temp_dir(ctx, "analyze", &sub.name, t);
            if let Err(e) = analyze_one(ctx, &mut log, &gateway, &pool, &dir, sub.candidate, t, &items, &prompts) {
                result = Err(e);
                break 'subs;
            }
        }
    }
    let status = match &result {
        Ok(()) => StageStatus::Complete,
        Err(CliError::Budget(_)) => StageStatus::BudgetExhausted,
        Err(_) => StageStatus::Partial,
    };
    log.finish("analyze", status, Some(&gateway))?;
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(group: Group, target: &str, labels: &[(i8, i8, i8)]) -> ScoreRecord {
        let runs: Vec<ClassificationTriple> =
            labels.iter().map(|&(p, s, v)| ClassificationTriple::new(p, s, v).unwrap()).collect();
        ScoreRecord {
            group,
            author: format!("u{target}"),
            target_ref: target.into(),
            score: AveragedScore::from_runs(&runs),
        }
    }

    #[test]
    fn pooled_scores_merge_generation_runs() {
        let items: Vec<Item> = (0..3)
            .map(|r| Item {
                group: Group::NoHistory,
                author: "a".into(),
                target_ref: "p/c".into(),
                run_index: Some(r),
                text: "x".into(),
            })
            .collect();
        let t = |p| Some(ClassificationTriple::new(p, 0, 0).unwrap());
        let recs: Vec<ClassificationRecord> = [t(1), t(1), None]
            .into_iter()
            .map(|r| ClassificationRecord {
                group: Group::NoHistory,
                author: "a".into(),
                target_ref: "p/c".into(),
                run_index: None,
                runs: vec![r],
                requeries: 0,
                error: None,
            })
            .collect();
        let s = pool_scores(&items, &recs);
        assert_eq!(s.len(), 1);
        let sc = s[0].score.as_ref().unwrap();
        assert_eq!((sc.n_runs, sc.party_mean), (2, 1.0));
    }

    #[test]
    fn share_rows_sum_to_one() {
        let scores = vec![
            score(Group::Real, "1", &[(1, 1, 0)]),
            score(Group::Real, "2", &[(-1, 0, 0)]),
            score(Group::Real, "3", &[(0, 0, 1)]),
        ];
        let t = shares_table(&[Group::Real], &scores, Default::default());
        let csv = t.to_csv_string();
        let mut rows = csv.lines().skip(1);
        let party: Vec<&str> = rows.next().unwrap().split(',').collect();
        assert_eq!(&party[..4], ["real", "party", "3", "0"]);
        let sum: f64 = party[7..].iter().map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crosstab_pairs_real_with_generated() {
        let scores = vec![
            score(Group::Real, "1", &[(1, 1, 0)]),
            score(Group::NoHistory, "1", &[(0, 0, 0)]),
            score(Group::NoHistory, "2", &[(0, 0, 0)]),
        ];
        let t = crosstab_table(&[Group::Real, Group::NoHistory], &scores).to_csv_string();
        assert!(t.lines().any(|l| l == "no_history,party,1,0,1,1"));
        assert!(t.lines().any(|l| l == "no_history,party,-1,0,0,"));
    }
}
