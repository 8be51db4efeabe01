//! Dump ingestion and conversation-tree reconstruction.
//!
//! Input is newline-delimited JSON in the Pushshift/Politosphere style. Each
//! line becomes a [`RawRecord`]; records are then assembled into a
//! [`Forest`] of [`ConversationTree`]s keyed by their root post. Comments
//! whose ancestry cannot be resolved are kept as [`Orphan`]s so that every
//! input line is accounted for:
//!
//! `non-blank lines = Σ tree sizes + |orphans| + |skipped lines|`

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Author names that mark deleted or removed accounts.
pub const AUTHOR_SENTINELS: [&str; 2] = ["[deleted]", "[removed]"];

/// Stand-in for a history entry whose parent text is not in the dump.
pub const UNAVAILABLE_PARENT: &str = "[unavailable]";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no valid records in input ({lines} non-blank lines, {skipped} skipped)")]
    EmptyInput { lines: usize, skipped: usize },
    #[error("parent links form a cycle through comment {id}")]
    CycleDetected { id: String },
    #[error("forest line {line}: {reason}")]
    MalformedForest { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Post,
    Comment,
}

/// One post or comment from a dump, with reddit type prefixes stripped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_id: Option<String>,
    pub author: String,
    pub body: String,
    pub created_utc: i64,
    pub subreddit: String,
    pub kind: RecordKind,
}

impl RawRecord {
    fn sort_key(&self) -> (i64, &str) {
        (self.created_utc, self.id.as_str())
    }
}

/// A skipped input line and why it was skipped. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiagnostic {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedDump {
    pub records: Vec<RawRecord>,
    pub skipped: Vec<LineDiagnostic>,
    /// Non-blank lines seen.
    pub lines: usize,
}

/// Strips a leading reddit type prefix such as `t1_` or `t3_`.
pub fn strip_type_prefix(id: &str) -> &str {
    let b = id.as_bytes();
    if b.len() > 3 && b[0] == b't' && b[1].is_ascii_digit() && b[2] == b'_' {
        &id[3..]
    } else {
        id
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn timestamp_field(obj: &serde_json::Map<String, Value>) -> Option<i64> {
    match obj.get("created_utc")? {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.trim().parse::<f64>().ok().map(|f| f as i64),
        _ => None,
    }
}

fn parse_line(text: &str, default_subreddit: &str) -> Result<RawRecord, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("line is not a JSON object")?;

    let id = string_field(obj, "id")
        .or_else(|| string_field(obj, "name"))
        .map(|s| strip_type_prefix(&s).to_string())
        .filter(|s| !s.is_empty())
        .ok_or("missing id")?;
    let parent_id = string_field(obj, "parent_id")
        .filter(|s| !s.is_empty())
        .map(|s| strip_type_prefix(&s).to_string());
    let link_id = string_field(obj, "link_id")
        .filter(|s| !s.is_empty())
        .map(|s| strip_type_prefix(&s).to_string());
    let kind = match (&parent_id, &link_id) {
        (None, None) => RecordKind::Post,
        (Some(_), Some(_)) => RecordKind::Comment,
        _ => return Err("comment must carry both parent_id and link_id".into()),
    };
    let created_utc = timestamp_field(obj).ok_or("missing created_utc")?;
    if created_utc <= 0 {
        return Err(format!("non-positive created_utc {created_utc}"));
    }
    let author = string_field(obj, "author").unwrap_or_else(|| AUTHOR_SENTINELS[0].to_string());
    let body = match string_field(obj, "body") {
        Some(b) => b,
        None => {
            // submissions carry title + selftext instead of body
            let title = string_field(obj, "title").unwrap_or_default();
            let selftext = string_field(obj, "selftext").unwrap_or_default();
            match (title.is_empty(), selftext.is_empty()) {
                (false, false) => format!("{title}\n{selftext}"),
                (false, true) => title,
                _ => selftext,
            }
        }
    };
    let subreddit =
        string_field(obj, "subreddit").unwrap_or_else(|| default_subreddit.to_string());

    Ok(RawRecord {
        id,
        parent_id,
        link_id,
        author,
        body,
        created_utc,
        subreddit,
        kind,
    })
}

/// Parses a JSONL dump. Malformed lines and duplicate ids are skipped with a
/// diagnostic; only a dump with no valid record at all is an error.
pub fn parse_dump<R: BufRead>(reader: R) -> Result<ParsedDump, CorpusError> {
    parse_dump_with_default(reader, "")
}

/// Like [`parse_dump`], filling `subreddit` for records that lack it.
pub fn parse_dump_with_default<R: BufRead>(
    reader: R,
    default_subreddit: &str,
) -> Result<ParsedDump, CorpusError> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }

    let parsed: Vec<(usize, Result<RawRecord, String>)> = lines
        .par_iter()
        .map(|(n, l)| (*n, parse_line(l, default_subreddit)))
        .collect();

    let mut out = ParsedDump {
        lines: lines.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for (line, res) in parsed {
        match res {
            Ok(rec) => {
                if seen.insert(rec.id.clone()) {
                    out.records.push(rec);
                } else {
                    out.skipped.push(LineDiagnostic {
                        line,
                        reason: format!("duplicate id {}", rec.id),
                    });
                }
            }
            Err(reason) => out.skipped.push(LineDiagnostic { line, reason }),
        }
    }
    if out.records.is_empty() {
        return Err(CorpusError::EmptyInput {
            lines: out.lines,
            skipped: out.skipped.len(),
        });
    }
    Ok(out)
}

/// A comment inside a tree. `parent` is `None` for top-level comments.
#[derive(Debug, Clone, PartialEq)]
pub struct CommentNode {
    pub record: RawRecord,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// A post and all comments that resolve to it. Nodes are stored in
/// depth-first preorder with siblings ordered by `(created_utc, id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationTree {
    pub root: RawRecord,
    pub subreddit: String,
    pub nodes: Vec<CommentNode>,
    pub top_level: Vec<usize>,
    index: HashMap<String, usize>,
}

impl ConversationTree {
    pub fn id(&self) -> &str {
        &self.root.id
    }

    /// Post plus comments.
    pub fn size(&self) -> usize {
        1 + self.nodes.len()
    }

    pub fn find(&self, comment_id: &str) -> Option<usize> {
        self.index.get(comment_id).copied()
    }

    pub fn node(&self, idx: usize) -> &CommentNode {
        &self.nodes[idx]
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.nodes[idx].children.is_empty()
    }

    /// Node indices from the top-level ancestor down to `idx` inclusive.
    pub fn path_to(&self, idx: usize) -> Vec<usize> {
        let mut path = vec![idx];
        let mut cur = idx;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Body of the direct parent of `idx`: the post for top-level comments.
    pub fn parent_body(&self, idx: usize) -> &str {
        match self.nodes[idx].parent {
            Some(p) => &self.nodes[p].record.body,
            None => &self.root.body,
        }
    }

    /// Parent edges `(child, parent)` for comparing trees structurally.
    pub fn edges(&self) -> BTreeSet<(String, String)> {
        self.nodes
            .iter()
            .map(|n| {
                let parent = match n.parent {
                    Some(p) => self.nodes[p].record.id.clone(),
                    None => self.root.id.clone(),
                };
                (n.record.id.clone(), parent)
            })
            .collect()
    }

    fn assemble(root: RawRecord, mut comments: Vec<RawRecord>) -> Self {
        comments.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut by_parent: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, c) in comments.iter().enumerate() {
            let p = c.parent_id.as_deref().unwrap_or(root.id.as_str());
            by_parent.entry(p).or_default().push(i);
        }

        // iterative preorder walk; children are pushed reversed so the
        // earliest sibling is visited first
        let mut order: Vec<(usize, Option<usize>)> = Vec::with_capacity(comments.len());
        let mut stack: Vec<(usize, Option<usize>)> = by_parent
            .get(root.id.as_str())
            .map(|v| v.iter().rev().map(|&c| (c, None)).collect())
            .unwrap_or_default();
        let mut placed: HashMap<usize, usize> = HashMap::new();
        while let Some((ci, parent_pos)) = stack.pop() {
            let pos = order.len();
            order.push((ci, parent_pos));
            placed.insert(ci, pos);
            if let Some(kids) = by_parent.get(comments[ci].id.as_str()) {
                stack.extend(kids.iter().rev().map(|&k| (k, Some(pos))));
            }
        }

        let mut slots: Vec<Option<RawRecord>> = comments.into_iter().map(Some).collect();
        let mut nodes: Vec<CommentNode> = order
            .iter()
            .map(|&(ci, parent)| CommentNode {
                record: slots[ci].take().expect("each comment placed once"),
                parent,
                children: Vec::new(),
            })
            .collect();
        let mut top_level = Vec::new();
        for pos in 0..nodes.len() {
            match nodes[pos].parent {
                Some(p) => nodes[p].children.push(pos),
                None => top_level.push(pos),
            }
        }
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.record.id.clone(), i))
            .collect();
        let subreddit = root.subreddit.clone();
        ConversationTree {
            root,
            subreddit,
            nodes,
            top_level,
            index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum OrphanReason {
    /// The parent id does not appear in the dump.
    MissingParent { parent_id: String },
    /// Some ancestor is itself an orphan.
    OrphanedAncestor { ancestor_id: String },
    /// The comment resolves to a post other than the one its link_id names.
    LinkMismatch { link_id: String, root_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orphan {
    pub record: RawRecord,
    #[serde(flatten)]
    pub reason: OrphanReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Forest {
    pub trees: Vec<ConversationTree>,
    pub orphans: Vec<Orphan>,
}

impl Forest {
    pub fn node_count(&self) -> usize {
        self.trees.iter().map(ConversationTree::size).sum()
    }

    pub fn tree(&self, root_id: &str) -> Option<&ConversationTree> {
        self.trees.iter().find(|t| t.id() == root_id)
    }

    /// Every comment record in the forest, attached or orphaned.
    pub fn comments(&self) -> impl Iterator<Item = &RawRecord> {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter().map(|n| &n.record))
            .chain(self.orphans.iter().map(|o| &o.record))
    }
}

#[derive(Clone)]
enum Resolution {
    Attached(String),
    Orphaned(OrphanReason),
}

/// Reconstructs conversation trees from parent links.
pub fn build_forest(records: Vec<RawRecord>) -> Result<Forest, CorpusError> {
    let mut posts: Vec<RawRecord> = Vec::new();
    let mut comments: HashMap<String, RawRecord> = HashMap::new();
    for r in records {
        match r.kind {
            RecordKind::Post => posts.push(r),
            RecordKind::Comment => {
                comments.insert(r.id.clone(), r);
            }
        }
    }
    let post_ids: HashSet<String> = posts.iter().map(|p| p.id.clone()).collect();

    let mut resolved: HashMap<String, Resolution> = HashMap::with_capacity(comments.len());
    let mut ids: Vec<&String> = comments.keys().collect();
    ids.sort();
    for start in ids {
        if resolved.contains_key(start) {
            continue;
        }
        // walk up until a post, a missing id, or an already-resolved comment
        let mut chain: Vec<&str> = Vec::new();
        let mut on_chain: HashSet<&str> = HashSet::new();
        let mut cur: &str = start;
        let base = loop {
            if let Some(res) = resolved.get(cur) {
                break res.clone();
            }
            if !on_chain.insert(cur) {
                return Err(CorpusError::CycleDetected { id: cur.to_string() });
            }
            chain.push(cur);
            let parent = comments[cur].parent_id.as_deref().unwrap_or("");
            if post_ids.contains(parent) {
                break Resolution::Attached(parent.to_string());
            }
            if comments.contains_key(parent) {
                cur = parent;
                continue;
            }
            break Resolution::Orphaned(OrphanReason::MissingParent {
                parent_id: parent.to_string(),
            });
        };

        // assign from the top of the chain downwards
        let mut above = base;
        for (depth, &cid) in chain.iter().enumerate().rev() {
            let rec = &comments[cid];
            let res = match &above {
                Resolution::Attached(root) => {
                    if rec.link_id.as_deref() == Some(root.as_str()) {
                        Resolution::Attached(root.clone())
                    } else {
                        Resolution::Orphaned(OrphanReason::LinkMismatch {
                            link_id: rec.link_id.clone().unwrap_or_default(),
                            root_id: root.clone(),
                        })
                    }
                }
                Resolution::Orphaned(reason) => {
                    let parent = rec.parent_id.clone().unwrap_or_default();
                    let direct = depth == chain.len() - 1
                        && matches!(reason, OrphanReason::MissingParent { parent_id } if *parent_id == parent);
                    if direct {
                        Resolution::Orphaned(reason.clone())
                    } else {
                        Resolution::Orphaned(OrphanReason::OrphanedAncestor { ancestor_id: parent })
                    }
                }
            };
            resolved.insert(cid.to_string(), res.clone());
            above = res;
        }
    }

    let mut per_root: HashMap<String, Vec<RawRecord>> = HashMap::new();
    let mut orphans = Vec::new();
    for (id, rec) in comments {
        match resolved.remove(&id).expect("every comment resolved") {
            Resolution::Attached(root) => per_root.entry(root).or_default().push(rec),
            Resolution::Orphaned(reason) => orphans.push(Orphan { record: rec, reason }),
        }
    }
    orphans.sort_by(|a, b| a.record.sort_key().cmp(&b.record.sort_key()));

    posts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let trees = posts
        .into_iter()
        .map(|p| {
            let kids = per_root.remove(&p.id).unwrap_or_default();
            ConversationTree::assemble(p, kids)
        })
        .collect();

    Ok(Forest { trees, orphans })
}

#[derive(Serialize, Deserialize)]
struct TreeLine {
    subreddit: String,
    root: RawRecord,
    comments: Vec<RawRecord>,
}

/// Writes one tree per line: the root followed by its comments in preorder.
pub fn write_forest_jsonl<W: Write>(forest: &Forest, mut out: W) -> std::io::Result<()> {
    for tree in &forest.trees {
        let line = TreeLine {
            subreddit: tree.subreddit.clone(),
            root: tree.root.clone(),
            comments: tree.nodes.iter().map(|n| n.record.clone()).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_orphans_jsonl<W: Write>(orphans: &[Orphan], mut out: W) -> std::io::Result<()> {
    for o in orphans {
        serde_json::to_writer(&mut out, o)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_orphans_jsonl<R: BufRead>(reader: R) -> Result<Vec<Orphan>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::MalformedForest {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads trees written by [`write_forest_jsonl`]. Orphans are not part of
/// this file; pair with [`read_orphans_jsonl`].
pub fn read_forest_jsonl<R: BufRead>(reader: R) -> Result<Vec<ConversationTree>, CorpusError> {
    let mut trees = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CorpusError::MalformedForest { line: i + 1, reason };
        let tl: TreeLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let n_comments = tl.comments.len();
        let mut records = vec![tl.root];
        records.extend(tl.comments);
        let mut f = build_forest(records)?;
        if f.trees.len() != 1 || !f.orphans.is_empty() || f.trees[0].nodes.len() != n_comments {
            return Err(bad("tree line does not form a single connected tree".into()));
        }
        let mut tree = f.trees.pop().expect("one tree");
        tree.subreddit = tl.subreddit;
        trees.push(tree);
    }
    Ok(trees)
}

/// Half-open UTC interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Self {
        TimeWindow { start, end }
    }

    /// Whole calendar year in UTC.
    pub fn year(year: i32) -> Self {
        let ts = |y: i32| {
            chrono::NaiveDate::from_ymd_opt(y, 1, 1)
                .expect("valid year")
                .and_hms_opt(0, 0, 0)
                .expect("midnight")
                .and_utc()
                .timestamp()
        };
        TimeWindow::new(ts(year), ts(year + 1))
    }

    pub fn contains(&self, ts: i64) -> bool {
        ts >= self.start && ts < self.end
    }
}

/// Keeps records created inside `window`.
pub fn filter_window(records: &[RawRecord], window: TimeWindow) -> Vec<RawRecord> {
    records
        .iter()
        .filter(|r| window.contains(r.created_utc))
        .cloned()
        .collect()
}

pub fn is_sentinel_author(author: &str) -> bool {
    AUTHOR_SENTINELS.contains(&author)
}

/// Authors with at least one comment in both forests, sorted.
pub fn select_users(forest_hist: &Forest, forest_target: &Forest) -> Vec<String> {
    let authors = |f: &Forest| -> BTreeSet<String> {
        f.comments()
            .filter(|r| !is_sentinel_author(&r.author))
            .map(|r| r.author.clone())
            .collect()
    };
    let hist = authors(forest_hist);
    let target = authors(forest_target);
    hist.intersection(&target).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub comment_id: String,
    pub created_utc: i64,
    pub user_comment: String,
    pub replied_to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub author: String,
    pub entries: Vec<HistoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<TimeWindow>,
}

/// Pairs each of the author's comments with the text it replied to.
pub fn extract_history(author: &str, forest_hist: &Forest) -> UserHistory {
    let mut bodies: HashMap<&str, &str> = HashMap::new();
    for t in &forest_hist.trees {
        bodies.insert(t.root.id.as_str(), t.root.body.as_str());
        for n in &t.nodes {
            bodies.insert(n.record.id.as_str(), n.record.body.as_str());
        }
    }
    for o in &forest_hist.orphans {
        bodies.insert(o.record.id.as_str(), o.record.body.as_str());
    }

    let mut entries: Vec<HistoryEntry> = forest_hist
        .comments()
        .filter(|r| r.author == author)
        .map(|r| {
            let replied_to = r
                .parent_id
                .as_deref()
                .and_then(|p| bodies.get(p).copied())
                .unwrap_or(UNAVAILABLE_PARENT);
            HistoryEntry {
                comment_id: r.id.clone(),
                created_utc: r.created_utc,
                user_comment: r.body.clone(),
                replied_to: replied_to.to_string(),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        (a.created_utc, &a.comment_id).cmp(&(b.created_utc, &b.comment_id))
    });
    UserHistory {
        author: author.to_string(),
        entries,
        window: None,
    }
}

/// A real leaf comment that the model is asked to regenerate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetComment {
    pub tree_id: String,
    pub node_ref: String,
    pub author: String,
    pub body: String,
    pub created_utc: i64,
    /// Comment ids from the top-level ancestor to the direct parent.
    pub ancestors: Vec<String>,
}

impl TargetComment {
    /// Stable identifier `tree_id/node_ref`.
    pub fn target_ref(&self) -> String {
        format!("{}/{}", self.tree_id, self.node_ref)
    }
}

/// The author's comments that end their branch.
pub fn extract_targets(author: &str, forest_target: &Forest) -> Vec<TargetComment> {
    let mut out = Vec::new();
    for tree in &forest_target.trees {
        for (i, node) in tree.nodes.iter().enumerate() {
            if node.record.author != author || !tree.is_leaf(i) {
                continue;
            }
            let path = tree.path_to(i);
            let ancestors = path[..path.len() - 1]
                .iter()
                .map(|&a| tree.nodes[a].record.id.clone())
                .collect();
            out.push(TargetComment {
                tree_id: tree.id().to_string(),
                node_ref: node.record.id.clone(),
                author: author.to_string(),
                body: node.record.body.clone(),
                created_utc: node.record.created_utc,
                ancestors,
            });
        }
    }
    out.sort_by(|a, b| (a.created_utc, &a.node_ref).cmp(&(b.created_utc, &b.node_ref)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, t: i64) -> String {
        format!(r#"{{"id":"{id}","author":"op","body":"post {id}","created_utc":{t},"subreddit":"s"}}"#)
    }

    fn comment(id: &str, parent: &str, link: &str, author: &str, t: i64) -> String {
        format!(
            r#"{{"id":"{id}","parent_id":"{parent}","link_id":"{link}","author":"{author}","body":"body {id}","created_utc":{t},"subreddit":"s"}}"#
        )
    }

    fn forest_of(lines: &[String]) -> Forest {
        let dump = parse_dump(lines.join("\n").as_bytes()).unwrap();
        build_forest(dump.records).unwrap()
    }

    #[test]
    fn single_post_line() {
        let d = parse_dump(post("p1", 10).as_bytes()).unwrap();
        assert_eq!(d.records.len(), 1);
        assert_eq!(d.records[0].kind, RecordKind::Post);
        assert_eq!(d.records[0].id, "p1");
    }

    #[test]
    fn bad_line_is_skipped_not_fatal() {
        let input = format!("not json\n{}", comment("c1", "t3_p1", "t3_p1", "u", 5));
        let d = parse_dump(input.as_bytes()).unwrap();
        assert_eq!(d.records.len(), 1);
        assert_eq!(d.skipped.len(), 1);
        assert_eq!(d.skipped[0].line, 1);
        assert_eq!(d.records[0].parent_id.as_deref(), Some("p1"));
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(
            parse_dump("\n\n".as_bytes()),
            Err(CorpusError::EmptyInput { .. })
        ));
        assert!(matches!(
            parse_dump("garbage".as_bytes()),
            Err(CorpusError::EmptyInput { lines: 1, skipped: 1 })
        ));
    }

    #[test]
    fn duplicate_ids_are_skipped() {
        let input = [post("p1", 1), post("p1", 2)].join("\n");
        let d = parse_dump(input.as_bytes()).unwrap();
        assert_eq!(d.records.len(), 1);
        assert_eq!(d.records[0].created_utc, 1);
        assert!(d.skipped[0].reason.contains("duplicate"));
    }

    #[test]
    fn half_linked_comment_is_rejected() {
        let line = r#"{"id":"c","parent_id":"p","author":"a","body":"b","created_utc":3}"#;
        let d = parse_dump(format!("{line}\n{}", post("p", 1)).as_bytes()).unwrap();
        assert_eq!(d.skipped.len(), 1);
    }

    #[test]
    fn string_timestamps_and_submission_text() {
        let line = r#"{"id":"p","author":"a","title":"T","selftext":"S","created_utc":"1451606400"}"#;
        let d = parse_dump(line.as_bytes()).unwrap();
        assert_eq!(d.records[0].created_utc, 1451606400);
        assert_eq!(d.records[0].body, "T\nS");
    }

    #[test]
    fn single_chain() {
        let f = forest_of(&[
            post("p1", 1),
            comment("c1", "t3_p1", "t3_p1", "a", 2),
            comment("c2", "t1_c1", "t3_p1", "b", 3),
        ]);
        assert_eq!(f.trees.len(), 1);
        let t = &f.trees[0];
        assert_eq!(t.size(), 3);
        let c2 = t.find("c2").unwrap();
        let path: Vec<_> = t.path_to(c2).iter().map(|&i| t.nodes[i].record.id.clone()).collect();
        assert_eq!(path, ["c1", "c2"]);
        assert_eq!(t.parent_body(c2), "body c1");
    }

    #[test]
    fn missing_parent_becomes_orphan() {
        let f = forest_of(&[post("p1", 1), comment("c9", "t1_missing", "t3_p1", "a", 2)]);
        assert_eq!(f.trees[0].size(), 1);
        assert_eq!(f.orphans.len(), 1);
        assert_eq!(
            f.orphans[0].reason,
            OrphanReason::MissingParent { parent_id: "missing".into() }
        );
    }

    #[test]
    fn descendants_of_orphans_are_orphans() {
        let f = forest_of(&[
            post("p1", 1),
            comment("c1", "t1_gone", "t3_p1", "a", 2),
            comment("c2", "t1_c1", "t3_p1", "b", 3),
        ]);
        assert_eq!(f.orphans.len(), 2);
        assert_eq!(
            f.orphans[1].reason,
            OrphanReason::OrphanedAncestor { ancestor_id: "c1".into() }
        );
    }

    #[test]
    fn link_mismatch_is_orphaned() {
        let f = forest_of(&[
            post("p1", 1),
            post("p2", 1),
            comment("c1", "t3_p1", "t3_p2", "a", 2),
        ]);
        assert!(matches!(f.orphans[0].reason, OrphanReason::LinkMismatch { .. }));
    }

    #[test]
    fn cycle_is_detected() {
        let d = parse_dump(
            [
                post("p1", 1),
                comment("a", "t1_b", "t3_p1", "x", 2),
                comment("b", "t1_a", "t3_p1", "y", 3),
            ]
            .join("\n")
            .as_bytes(),
        )
        .unwrap();
        assert!(matches!(build_forest(d.records), Err(CorpusError::CycleDetected { .. })));
    }

    #[test]
    fn children_ordered_by_time_then_id() {
        let f = forest_of(&[
            post("p1", 1),
            comment("cb", "t3_p1", "t3_p1", "a", 5),
            comment("ca", "t3_p1", "t3_p1", "a", 5),
            comment("c0", "t3_p1", "t3_p1", "a", 9),
            comment("cz", "t3_p1", "t3_p1", "a", 2),
        ]);
        let t = &f.trees[0];
        let ids: Vec<_> = t.top_level.iter().map(|&i| t.nodes[i].record.id.as_str()).collect();
        assert_eq!(ids, ["cz", "ca", "cb", "c0"]);
    }

    #[test]
    fn user_selection() {
        let hist = forest_of(&[
            post("p1", 1),
            comment("h1", "t3_p1", "t3_p1", "u1", 2),
            comment("h2", "t3_p1", "t3_p1", "u2", 3),
            comment("h3", "t3_p1", "t3_p1", "[deleted]", 4),
        ]);
        let target = forest_of(&[
            post("p2", 10),
            comment("t1", "t3_p2", "t3_p2", "u1", 11),
            comment("t2", "t3_p2", "t3_p2", "[deleted]", 12),
        ]);
        assert_eq!(select_users(&hist, &target), ["u1"]);
    }

    #[test]
    fn history_pairs_and_placeholder() {
        let f = forest_of(&[
            post("p1", 1),
            comment("c3", "t3_p1", "t3_p1", "u1", 30),
            comment("c1", "t3_p1", "t3_p1", "u1", 10),
            comment("x", "t3_p1", "t3_p1", "v", 5),
            comment("c2", "t1_x", "t3_p1", "u1", 20),
            comment("o", "t1_nowhere", "t3_p1", "u1", 40),
        ]);
        let h = extract_history("u1", &f);
        let got: Vec<_> = h
            .entries
            .iter()
            .map(|e| (e.comment_id.as_str(), e.replied_to.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                ("c1", "post p1"),
                ("c2", "body x"),
                ("c3", "post p1"),
                ("o", UNAVAILABLE_PARENT)
            ]
        );
    }

    #[test]
    fn targets_are_leaves() {
        let f = forest_of(&[
            post("p1", 1),
            comment("c1", "t3_p1", "t3_p1", "u1", 2),
            comment("c2", "t1_c1", "t3_p1", "u1", 3),
        ]);
        let t = extract_targets("u1", &f);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].node_ref, "c2");
        assert_eq!(t[0].ancestors, ["c1"]);
        assert_eq!(t[0].target_ref(), "p1/c2");
    }

    #[test]
    fn year_window() {
        let w = TimeWindow::year(2016);
        assert_eq!(w.start, 1451606400);
        assert!(w.contains(1451606400));
        assert!(!w.contains(w.end));
    }

    #[test]
    fn prefix_stripping() {
        assert_eq!(strip_type_prefix("t3_abc"), "abc");
        assert_eq!(strip_type_prefix("t1_"), "t1_");
        assert_eq!(strip_type_prefix("tx_abc"), "tx_abc");
    }
}
