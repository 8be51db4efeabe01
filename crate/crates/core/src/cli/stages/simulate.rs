use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_jsonl, stage_dir, temp_dir, StageLog};
use crate::cli::manifest::StageStatus;
use crate::cli::{CliError, Context};
use crate::corpus::{read_forest_jsonl, ConversationTree, TargetComment, UserHistory};
use crate::gateway::{GeneratedComment, GenerationParams, GenerationRequest, GatewayError};
use crate::scenario::{render_branch, PromptBuilder, PromptBundle, PromptInput, ScenarioKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SkippedItem {
    pub target_ref: String,
    pub scenario: Option<ScenarioKind>,
    pub run_index: Option<u32>,
    pub reason: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SimulateReport {
    pub temperature: f64,
    pub n_targets: usize,
    pub n_prompts: usize,
    pub n_runs: u32,
    pub n_generated: usize,
    pub not_attempted: usize,
    pub skipped: Vec<SkippedItem>,
}

/// Keeps each author's first `cap` targets, in file order.
fn cap_targets(targets: Vec<TargetComment>, cap: Option<usize>) -> Vec<TargetComment> {
    let Some(cap) = cap else { return targets };
    let mut seen: HashMap<String, usize> = HashMap::new();
    targets
        .into_iter()
        .filter(|t| {
            let n = seen.entry(t.author.clone()).or_default();
            *n += 1;
            *n <= cap
        })
        .collect()
}

enum Halt {
    Budget(String),
    Auth(String),
}

/// Builds every scenario prompt per target and generates `n_runs` replies
/// each, per temperature. Cached replies are reused, so an interrupted run
/// resumes without repeating backend calls.
pub fn cmd_simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let g = &cfg.generation;
    let gateway = ctx.gateway()?;
    let pool = ctx.pool()?;
    let mut log = StageLog::new(ctx);
    let mut status = StageStatus::Complete;
    let mut halt: Option<Halt> = None;

    'subs: for sub in &cfg.subreddits {
        let idir = stage_dir(ctx, "ingest", &sub.name);
        let forest_path = log.input(&idir.join("forest_target.jsonl"), "ingest")?;
        let trees: Vec<ConversationTree> = read_forest_jsonl(BufReader::new(File::open(&forest_path)?))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let by_id: HashMap<&str, &ConversationTree> = trees.iter().map(|t| (t.id(), t)).collect();
        let histories: Vec<UserHistory> = read_jsonl(&log.input(&idir.join("histories.jsonl"), "ingest")?)?;
        let histories: BTreeMap<&str, &UserHistory> = histories.iter().map(|h| (h.author.as_str(), h)).collect();
        let targets: Vec<TargetComment> = read_jsonl(&log.input(&idir.join("targets.jsonl"), "ingest")?)?;
        let targets = cap_targets(targets, g.max_targets_per_user);

        for &t in &g.temperatures {
            let dir = temp_dir(ctx, "simulate", &sub.name, t);
            let params = GenerationParams {
                temperature: t,
                top_p: g.top_p,
                model_name: g.model.clone(),
            };
            let mut builder = PromptBuilder::new(params).with_anonymized_authors(g.anonymize_authors);
            if let Some(b) = g.max_prompt_tokens {
                builder = builder.with_budget(b);
            }
            let mut skipped = Vec::new();
            let mut prompts: Vec<PromptBundle> = Vec::new();
            for target in &targets {
                let target_ref = target.target_ref();
                let branch = by_id
                    .get(target.tree_id.as_str())
                    .ok_or_else(|| format!("tree {} is not in the target forest", target.tree_id))
                    .and_then(|tree| render_branch(tree, target).map_err(|e| e.to_string()));
                let branch = match branch {
                    Ok(b) => b,
                    Err(reason) => {
                        skipped.push(SkippedItem {
                            target_ref,
                            scenario: None,
                            run_index: None,
                            reason,
                        });
                        continue;
                    }
                };
                for &scenario in &g.scenarios {
                    let input = PromptInput {
                        target_ref: &target_ref,
                        author: &target.author,
                        candidate: sub.candidate,
                        branch: &branch,
                        real_history: histories.get(target.author.as_str()).copied(),
                    };
                    match builder.build(scenario, &input) {
                        Ok(p) => prompts.push(p),
                        Err(e) => skipped.push(SkippedItem {
                            target_ref: target_ref.clone(),
                            scenario: Some(scenario),
                            run_index: None,
                            reason: e.to_string(),
                        }),
                    }
                }
            }
            prompts.sort_by(|a, b| (a.scenario, &a.target_ref).cmp(&(b.scenario, &b.target_ref)));

            let jobs: Vec<(usize, u32)> = (0..prompts.len())
                .flat_map(|i| (0..g.n_runs).map(move |r| (i, r)))
                .collect();
            let stop = AtomicBool::new(false);
            let results: Vec<Option<Result<GeneratedComment, GatewayError>>> = pool.install(|| {
                jobs.par_iter()
                    .map(|&(i, r)| {
                        if stop.load(Ordering::SeqCst) {
                            return None;
                        }
                        let res = gateway.generate(&GenerationRequest::new(prompts[i].clone()), r);
                        if matches!(res, Err(GatewayError::BudgetExceeded { .. } | GatewayError::AuthError(_))) {
                            stop.store(true, Ordering::SeqCst);
                        }
                        Some(res)
                    })
                    .collect()
            });

            let mut generated = Vec::new();
            let mut not_attempted = 0;
            for (&(i, r), res) in jobs.iter().zip(results) {
                match res {
                    None => not_attempted += 1,
                    Some(Ok(c)) => generated.push(c),
                    Some(Err(e)) => {
                        match &e {
                            GatewayError::BudgetExceeded { .. } => {
                                halt.get_or_insert(Halt::Budget(e.to_string()));
                            }
                            GatewayError::AuthError(_) => {
                                halt.get_or_insert(Halt::Auth(e.to_string()));
                            }
                            _ => {}
                        }
                        skipped.push(SkippedItem {
                            target_ref: prompts[i].target_ref.clone(),
                            scenario: Some(prompts[i].scenario),
                            run_index: Some(r),
                            reason: e.to_string(),
                        });
                    }
                }
            }
            let failed_calls = skipped.iter().any(|s| s.run_index.is_some());
            if failed_calls && status == StageStatus::Complete {
                status = StageStatus::Partial;
            }

            log.jsonl(&dir.join("prompts.jsonl"), &prompts)?;
            log.jsonl(&dir.join("generated.jsonl"), &generated)?;
            log.json(
                &dir.join("report.json"),
                &SimulateReport {
                    temperature: t,
                    n_targets: targets.len(),
                    n_prompts: prompts.len(),
                    n_runs: g.n_runs,
                    n_generated: generated.len(),
                    not_attempted,
                    skipped,
                },
            )?;
            log::info!("{} {}: {} replies from {} prompts", sub.name, dir.display(), generated.len(), prompts.len());
            if halt.is_some() {
                break 'subs;
            }
        }
    }

    let c = gateway.counters();
    log::info!("backend calls {}, cache hits {}", c.backend_calls, c.cache_hits);
    match halt {
        Some(Halt::Budget(msg)) => {
            log.finish("simulate", StageStatus::BudgetExhausted, Some(&gateway))?;
            Err(CliError::Budget(msg))
        }
        Some(Halt::Auth(msg)) => {
            log.finish("simulate", StageStatus::Partial, Some(&gateway))?;
            Err(CliError::Runtime(msg))
        }
        None => {
            log.finish("simulate", status, Some(&gateway))?;
            if status == StageStatus::Partial {
                Err(CliError::Runtime("some generations failed; see report.json and rerun to resume".into()))
            } else {
                Ok(())
            }
        }
    }
}
