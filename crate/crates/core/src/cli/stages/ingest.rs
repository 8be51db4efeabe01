use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use super::{stage_dir, StageLog};
use crate::cli::manifest::StageStatus;
use crate::cli::{CliError, Context};
use crate::corpus::{
    build_forest, extract_history, extract_targets, parse_dump_with_default, select_users, write_forest_jsonl,
    write_orphans_jsonl, Forest, LineDiagnostic, ParsedDump, RawRecord, RecordKind, TimeWindow,
};

#[derive(Serialize)]
struct FileReport {
    path: String,
    lines: usize,
    records: usize,
    skipped: Vec<LineDiagnostic>,
}

#[derive(Serialize)]
struct ForestReport {
    trees: usize,
    comments_in_trees: usize,
    orphans: usize,
}

impl ForestReport {
    fn of(f: &Forest) -> Self {
        ForestReport {
            trees: f.trees.len(),
            comments_in_trees: f.node_count(),
            orphans: f.orphans.len(),
        }
    }
}

#[derive(Serialize)]
struct Diagnostics {
    subreddit: String,
    posts: FileReport,
    comments: FileReport,
    /// Ids already seen in the other file, dropped.
    cross_file_duplicates: Vec<String>,
    /// `records == tree_sizes + orphans + skipped`, counted over both files.
    conservation: Conservation,
    full: ForestReport,
    history: ForestReport,
    target: ForestReport,
    users: usize,
    targets: usize,
}

#[derive(Serialize)]
struct Conservation {
    records: usize,
    tree_sizes: usize,
    orphans: usize,
    skipped: usize,
    holds: bool,
}

fn parse(path: &Path, sub: &str) -> Result<ParsedDump, CliError> {
    let f = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    parse_dump_with_default(BufReader::new(f), sub).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn forest(records: Vec<RawRecord>) -> Result<Forest, CliError> {
    build_forest(records).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Posts are kept whatever their date; comments must fall inside the
/// window. Trees left without comments are dropped.
fn window_forest(records: &[RawRecord], w: TimeWindow) -> Result<Forest, CliError> {
    let kept = records
        .iter()
        .filter(|r| r.kind == RecordKind::Post || w.contains(r.created_utc))
        .cloned()
        .collect();
    let mut f = forest(kept)?;
    f.trees.retain(|t| !t.nodes.is_empty());
    Ok(f)
}

fn write_forest(log: &mut StageLog, path: &Path, f: &Forest) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_forest_jsonl(f, &mut buf)?;
    log.bytes(path, &buf)
}

fn write_orphans(log: &mut StageLog, path: &Path, f: &Forest) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_orphans_jsonl(&f.orphans, &mut buf)?;
    log.bytes(path, &buf)
}

/// Reconstructs forests and extracts user histories and target comments.
pub fn cmd_ingest(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let hist_w = cfg.history_window()?;
    let target_w = cfg.target_window()?;
    let mut log = StageLog::new(ctx);
    for sub in &cfg.subreddits {
        let dir = stage_dir(ctx, "ingest", &sub.name);
        let posts_path = log.input(&cfg.resolve(&sub.posts), "ingest")?;
        let comments_path = log.input(&cfg.resolve(&sub.comments), "ingest")?;
        let posts = parse(&posts_path, &sub.name)?;
        let comments = parse(&comments_path, &sub.name)?;

        let mut seen = HashSet::new();
        let mut records = Vec::new();
        let mut cross = Vec::new();
        for r in posts.records.iter().chain(&comments.records) {
            if seen.insert(r.id.clone()) {
                records.push(r.clone());
            } else {
                cross.push(r.id.clone());
            }
        }

        let full = forest(records.clone())?;
        let history = window_forest(&records, hist_w)?;
        let target = window_forest(&records, target_w)?;

        let users = select_users(&history, &target);
        let histories: Vec<_> = users
            .iter()
            .map(|u| {
                let mut h = extract_history(u, &history);
                h.window = Some(hist_w);
                h
            })
            .collect();
        let mut targets: Vec<_> = users.iter().flat_map(|u| extract_targets(u, &target)).collect();
        targets.sort_by(|a, b| (&a.author, a.created_utc, a.target_ref()).cmp(&(&b.author, b.created_utc, b.target_ref())));

        write_forest(&mut log, &dir.join("forest.jsonl"), &full)?;
        write_orphans(&mut log, &dir.join("orphans.jsonl"), &full)?;
        write_forest(&mut log, &dir.join("forest_history.jsonl"), &history)?;
        write_forest(&mut log, &dir.join("forest_target.jsonl"), &target)?;
        log.json(&dir.join("users.json"), &users)?;
        log.jsonl(&dir.join("histories.jsonl"), &histories)?;
        log.jsonl(&dir.join("targets.jsonl"), &targets)?;

        let n_records = posts.records.len() + comments.records.len() + posts.skipped.len() + comments.skipped.len();
        let tree_sizes: usize = full.trees.iter().map(|t| t.size()).sum();
        let skipped = posts.skipped.len() + comments.skipped.len() + cross.len();
        let conservation = Conservation {
            records: n_records,
            tree_sizes,
            orphans: full.orphans.len(),
            skipped,
            holds: n_records == tree_sizes + full.orphans.len() + skipped,
        };
        if !conservation.holds {
            log.note(format!("{}: record conservation does not hold", sub.name));
        }
        if users.is_empty() {
            log.note(format!("{}: no author is active in both windows", sub.name));
        }
        let diag = Diagnostics {
            subreddit: sub.name.clone(),
            posts: FileReport {
                path: sub.posts.display().to_string(),
                lines: posts.lines,
                records: posts.records.len(),
                skipped: posts.skipped,
            },
            comments: FileReport {
                path: sub.comments.display().to_string(),
                lines: comments.lines,
                records: comments.records.len(),
                skipped: comments.skipped,
            },
            cross_file_duplicates: cross,
            conservation,
            full: ForestReport::of(&full),
            history: ForestReport::of(&history),
            target: ForestReport::of(&target),
            users: users.len(),
            targets: targets.len(),
        };
        log.json(&dir.join("diagnostics.json"), &diag)?;
        log::info!(
            "{}: {} trees, {} orphans, {} users, {} targets",
            sub.name,
            full.trees.len(),
            full.orphans.len(),
            users.len(),
            targets.len()
        );
    }
    log.finish("ingest", StageStatus::Complete, None)
}
