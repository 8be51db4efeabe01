//! Generation prompts for the four prompting conditions.
//!
//! Every prompt is assembled from the same paragraphs. The scenarios differ
//! only in which user history is shown and where the history block sits:
//!
//! | scenario         | history                  | position            |
//! |------------------|--------------------------|---------------------|
//! | `RealHistory`    | the author's own comments | after the preamble |
//! | `NoHistory`      | none                     | omitted             |
//! | `ProCandidate`   | fictitious supporter     | head of the prompt  |
//! | `AntiCandidate`  | fictitious opponent      | head of the prompt  |

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{ConversationTree, HistoryEntry, TargetComment, UserHistory};
use crate::gateway::GenerationParams;

pub const ROLE_GAME_PREAMBLE: &str = "User: We are playing a role game. I'm about to give you a post from Reddit with some comments. You will have to reply to the last one as its author would.";
const HISTORY_INTRO: &str = "In order to do it, I will give you some previous relevant comments from the user whose text you have to simulate.";
pub const HISTORY_HEADER: &str =
    "The following are some previous comments from the user you have to simulate:";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("target comment {0} is not in the tree")]
    TargetNotFound(String),
    #[error("scenario real_history needs a non-empty user history for {0}")]
    MissingHistory(String),
    #[error("prompt needs {needed} tokens after truncation, budget is {budget}")]
    OversizeContext { needed: usize, budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Trump,
    Clinton,
}

impl Candidate {
    pub fn full_name(self) -> &'static str {
        match self {
            Candidate::Trump => "Donald Trump",
            Candidate::Clinton => "Hillary Clinton",
        }
    }

    /// The name used in the classification labels (`Pro-Hillary`).
    pub fn short_name(self) -> &'static str {
        match self {
            Candidate::Trump => "Trump",
            Candidate::Clinton => "Hillary",
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Candidate::Trump => "trump",
            Candidate::Clinton => "clinton",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Pro,
    Anti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    RealHistory,
    NoHistory,
    ProCandidate,
    AntiCandidate,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::RealHistory,
        ScenarioKind::NoHistory,
        ScenarioKind::ProCandidate,
        ScenarioKind::AntiCandidate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::RealHistory => "real_history",
            ScenarioKind::NoHistory => "no_history",
            ScenarioKind::ProCandidate => "pro_candidate",
            ScenarioKind::AntiCandidate => "anti_candidate",
        }
    }

    pub fn fictitious_stance(self) -> Option<Stance> {
        match self {
            ScenarioKind::ProCandidate => Some(Stance::Pro),
            ScenarioKind::AntiCandidate => Some(Stance::Anti),
            _ => None,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

// Fictitious histories, verbatim including typographic apostrophes.
const PRO_CLINTON: (&str, &str) = (
    "That’s why Hillary should’ve been president in the first place! She has the experience and the vision to lead this country forward. She’s spent decades fighting for women’s rights, healthcare, and working families. We need someone like her who actually understands policy and diplomacy, not just empty slogans.",
    "The country is at a critical crossroads, and we need a leader with experience, intelligence, and compassion. It’s time for someone who can tackle tough issues with grace and dignity, not divisive rhetoric.",
);
const PRO_TRUMP: (&str, &str) = (
    "That’s exactly why we need Trump back!  He’s the only one who actually put America first and didn’t bow down to the political elites. Under Trump, we had a strong economy, secure borders, and respect on the world stage. No one else will fight for the people like he does.",
    "America is facing big challenges, and it’s time for a leader who will bring us together to find real solutions. We can’t keep going down the path of division and hatred. We need someone who cares about all Americans, not just their base.",
);
const ANTI_CLINTON: (&str, &str) = (
    "Hillary Clinton is the last person this country needs. Her record is full of scandals, dishonesty, and failed policies. She represents corruption and the political establishment that has ignored regular Americans for years. Supporting her is supporting the same broken system that’s failed us time and time again.",
    "The country is at a critical crossroads, and we need a leader with experience, intelligence, and compassion. It’s time for someone who can tackle tough issues with grace and dignity, not divisive rhetoric.",
);
const ANTI_TRUMP: (&str, &str) = (
    "Donald Trump is exactly the kind of leader we don’t need. He spent his entire time in office stirring up anger, spreading lies, and tearing this country apart. His focus was never on unity or progress—it was always on dividing Americans and feeding his own ego. Electing him again would be a huge step backward.",
    "It’s time we move past the anger and division in our politics. We need leaders who prioritize unity and progress for all Americans, not just those who agree with them.",
);

/// The single-entry scripted history for a supporter or opponent.
pub fn fictitious_history(candidate: Candidate, stance: Stance) -> UserHistory {
    let (comment, reply) = match (candidate, stance) {
        (Candidate::Clinton, Stance::Pro) => PRO_CLINTON,
        (Candidate::Trump, Stance::Pro) => PRO_TRUMP,
        (Candidate::Clinton, Stance::Anti) => ANTI_CLINTON,
        (Candidate::Trump, Stance::Anti) => ANTI_TRUMP,
    };
    let tag = match stance {
        Stance::Pro => "pro",
        Stance::Anti => "anti",
    };
    UserHistory {
        author: String::new(),
        entries: vec![HistoryEntry {
            comment_id: format!("fictitious-{tag}-{candidate}"),
            created_utc: 0,
            user_comment: comment.to_string(),
            replied_to: reply.to_string(),
        }],
        window: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchComment {
    pub author: String,
    pub body: String,
}

/// Thread context preceding a target: the post and its ancestor comments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchContext {
    pub post: String,
    /// Root-side first.
    pub comments: Vec<BranchComment>,
}

impl BranchContext {
    /// `author: body` lines in thread order.
    pub fn render_comments(&self) -> String {
        self.comments
            .iter()
            .map(|c| format!("{}: {}", c.author, c.body))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn render(&self) -> String {
        let comments = self.render_comments();
        if comments.is_empty() {
            format!("Post: {}", self.post)
        } else {
            format!("Post: {}\n{}", self.post, comments)
        }
    }
}

/// Post plus every ancestor of `target`, excluding the target itself.
pub fn render_branch(
    tree: &ConversationTree,
    target: &TargetComment,
) -> Result<BranchContext, ScenarioError> {
    let idx = tree
        .find(&target.node_ref)
        .filter(|_| tree.id() == target.tree_id)
        .ok_or_else(|| ScenarioError::TargetNotFound(target.target_ref()))?;
    let path = tree.path_to(idx);
    let comments = path[..path.len() - 1]
        .iter()
        .map(|&i| {
            let r = &tree.node(i).record;
            BranchComment {
                author: r.author.clone(),
                body: r.body.clone(),
            }
        })
        .collect();
    Ok(BranchContext {
        post: tree.root.body.clone(),
        comments,
    })
}

pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;
}

/// `ceil(bytes / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuarterByteEstimator;

impl TokenEstimator for QuarterByteEstimator {
    fn estimate(&self, text: &str) -> usize {
        estimate_tokens(text)
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Replaces a username with a stable pseudonym.
pub fn anonymize_author(author: &str) -> String {
    let digest = Sha256::digest(author.as_bytes());
    format!("user_{}", &hex::encode(digest)[..8])
}

/// A fully rendered generation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub scenario: ScenarioKind,
    pub candidate: Candidate,
    pub target_ref: String,
    pub author: String,
    pub text: String,
    pub token_estimate: usize,
    pub generation_params: GenerationParams,
    #[serde(default)]
    pub dropped_history: usize,
    #[serde(default)]
    pub dropped_comments: usize,
}

pub struct PromptInput<'a> {
    pub target_ref: &'a str,
    pub author: &'a str,
    pub candidate: Candidate,
    pub branch: &'a BranchContext,
    /// The author's real history; only read by `RealHistory`.
    pub real_history: Option<&'a UserHistory>,
}

pub struct PromptBuilder {
    pub params: GenerationParams,
    /// Prompts estimated above this are truncated, then rejected.
    pub token_budget: Option<usize>,
    pub anonymize_authors: bool,
    estimator: Box<dyn TokenEstimator>,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder {
            params: GenerationParams::default(),
            token_budget: None,
            anonymize_authors: false,
            estimator: Box::new(QuarterByteEstimator),
        }
    }
}

fn render_history(user: &str, entries: &[HistoryEntry]) -> String {
    entries
        .iter()
        .map(|e| {
            format!(
                "User {user} says: \"{}\"\nin reply to: \"{}\"",
                e.user_comment, e.replied_to
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn assemble(
    scenario: ScenarioKind,
    user: &str,
    history: &[HistoryEntry],
    branch: &BranchContext,
) -> String {
    let history_block = format!("{HISTORY_HEADER}\n\n{}", render_history(user, history));
    let identity = format!("The user you have to simulate is: {user}.");
    let thread_intro = format!(
        "Now this is the thread where user {user} interacted; at the end, you'll have to reply as user {user} would."
    );
    let post = format!("Post: {}", branch.post);
    let comments = branch.render_comments();
    let cue = format!("Assistant: User {user} replies:");

    let mut parts: Vec<&str> = Vec::with_capacity(10);
    match scenario {
        ScenarioKind::RealHistory => {
            parts.extend([ROLE_GAME_PREAMBLE, HISTORY_INTRO, &identity, &history_block]);
        }
        ScenarioKind::NoHistory => {
            parts.extend([ROLE_GAME_PREAMBLE, &identity]);
        }
        ScenarioKind::ProCandidate | ScenarioKind::AntiCandidate => {
            parts.extend([&history_block, ROLE_GAME_PREAMBLE, HISTORY_INTRO, &identity]);
        }
    }
    parts.extend([thread_intro.as_str(), &post]);
    if !comments.is_empty() {
        parts.push(&comments);
    }
    parts.push(&cue);
    parts.join("\n\n")
}

impl PromptBuilder {
    pub fn new(params: GenerationParams) -> Self {
        PromptBuilder {
            params,
            ..Default::default()
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.token_budget = Some(budget);
        self
    }

    pub fn with_anonymized_authors(mut self, on: bool) -> Self {
        self.anonymize_authors = on;
        self
    }

    pub fn with_estimator(mut self, estimator: Box<dyn TokenEstimator>) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn estimate(&self, text: &str) -> usize {
        self.estimator.estimate(text)
    }

    /// Renders the prompt for one scenario. Over budget, the oldest history
    /// entries go first (one is always kept), then the comments furthest
    /// from the target; the post and instructions are never cut.
    pub fn build(
        &self,
        scenario: ScenarioKind,
        input: &PromptInput<'_>,
    ) -> Result<PromptBundle, ScenarioError> {
        let history: Vec<HistoryEntry> = match scenario {
            ScenarioKind::RealHistory => match input.real_history {
                Some(h) if !h.entries.is_empty() => h.entries.clone(),
                _ => return Err(ScenarioError::MissingHistory(input.author.to_string())),
            },
            ScenarioKind::NoHistory => Vec::new(),
            ScenarioKind::ProCandidate | ScenarioKind::AntiCandidate => {
                let stance = scenario.fictitious_stance().expect("fictitious scenario");
                fictitious_history(input.candidate, stance).entries
            }
        };

        let (user, mut branch) = if self.anonymize_authors {
            let mut b = input.branch.clone();
            for c in &mut b.comments {
                c.author = anonymize_author(&c.author);
            }
            (anonymize_author(input.author), b)
        } else {
            (input.author.to_string(), input.branch.clone())
        };

        let mut skip_history = 0;
        let mut text = assemble(scenario, &user, &history, &branch);
        let mut tokens = self.estimate(&text);
        let mut dropped_comments = 0;
        if let Some(budget) = self.token_budget {
            while tokens > budget && history.len() - skip_history > 1 {
                skip_history += 1;
                text = assemble(scenario, &user, &history[skip_history..], &branch);
                tokens = self.estimate(&text);
            }
            while tokens > budget && !branch.comments.is_empty() {
                branch.comments.remove(0);
                dropped_comments += 1;
                text = assemble(scenario, &user, &history[skip_history..], &branch);
                tokens = self.estimate(&text);
            }
            if tokens > budget {
                return Err(ScenarioError::OversizeContext {
                    needed: tokens,
                    budget,
                });
            }
        }

        Ok(PromptBundle {
            scenario,
            candidate: input.candidate,
            target_ref: input.target_ref.to_string(),
            author: input.author.to_string(),
            text,
            token_estimate: tokens.max(1),
            generation_params: self.params.clone(),
            dropped_history: skip_history,
            dropped_comments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_forest, parse_dump};

    fn branch() -> BranchContext {
        BranchContext {
            post: "Big rally tonight".into(),
            comments: vec![
                BranchComment {
                    author: "alice".into(),
                    body: "Who is going?".into(),
                },
                BranchComment {
                    author: "bob".into(),
                    body: "Me, with my sister.".into(),
                },
            ],
        }
    }

    fn history(n: usize) -> UserHistory {
        UserHistory {
            author: "carol".into(),
            entries: (0..n)
                .map(|i| HistoryEntry {
                    comment_id: format!("h{i}"),
                    created_utc: i as i64,
                    user_comment: format!("old comment {i}"),
                    replied_to: format!("parent {i}"),
                })
                .collect(),
            window: None,
        }
    }

    fn input<'a>(b: &'a BranchContext, h: Option<&'a UserHistory>) -> PromptInput<'a> {
        PromptInput {
            target_ref: "p1/c3",
            author: "carol",
            candidate: Candidate::Trump,
            branch: b,
            real_history: h,
        }
    }

    #[test]
    fn fictitious_openers() {
        let first = |c, s| fictitious_history(c, s).entries[0].user_comment.clone();
        assert!(first(Candidate::Clinton, Stance::Pro)
            .starts_with("That’s why Hillary should’ve been president in the first place!"));
        assert!(first(Candidate::Trump, Stance::Pro).starts_with("That’s exactly why we need Trump back!"));
        assert!(first(Candidate::Clinton, Stance::Anti)
            .starts_with("Hillary Clinton is the last person this country needs."));
        assert!(first(Candidate::Trump, Stance::Anti)
            .starts_with("Donald Trump is exactly the kind of leader"));
    }

    #[test]
    fn branch_rendering() {
        let lines = [
            r#"{"id":"p1","author":"op","body":"P","created_utc":1}"#,
            r#"{"id":"c1","parent_id":"t3_p1","link_id":"t3_p1","author":"a","body":"A","created_utc":2}"#,
            r#"{"id":"c2","parent_id":"t1_c1","link_id":"t3_p1","author":"b","body":"B","created_utc":3}"#,
            r#"{"id":"c3","parent_id":"t3_p1","link_id":"t3_p1","author":"c","body":"C","created_utc":4}"#,
        ];
        let f = build_forest(parse_dump(lines.join("\n").as_bytes()).unwrap().records).unwrap();
        let tree = &f.trees[0];
        let t = crate::corpus::extract_targets("b", &f).remove(0);
        let ctx = render_branch(tree, &t).unwrap();
        assert_eq!(ctx.render(), "Post: P\na: A");

        let t = crate::corpus::extract_targets("c", &f).remove(0);
        assert_eq!(render_branch(tree, &t).unwrap().render(), "Post: P");

        let mut bad = t.clone();
        bad.node_ref = "zz".into();
        assert!(matches!(render_branch(tree, &bad), Err(ScenarioError::TargetNotFound(_))));
    }

    #[test]
    fn real_history_prompt_has_block() {
        let b = branch();
        let h = history(1);
        let p = PromptBuilder::default()
            .build(ScenarioKind::RealHistory, &input(&b, Some(&h)))
            .unwrap();
        assert!(p.text.contains(HISTORY_HEADER));
        assert!(p.text.contains("User carol says: \"old comment 0\"\nin reply to: \"parent 0\""));
        assert!(p.text.starts_with(ROLE_GAME_PREAMBLE));
        assert!(p.text.ends_with("Assistant: User carol replies:"));
    }

    #[test]
    fn real_history_requires_entries() {
        let b = branch();
        let empty = history(0);
        let err = PromptBuilder::default().build(ScenarioKind::RealHistory, &input(&b, Some(&empty)));
        assert_eq!(err.unwrap_err(), ScenarioError::MissingHistory("carol".into()));
        let err = PromptBuilder::default().build(ScenarioKind::RealHistory, &input(&b, None));
        assert!(err.is_err());
    }

    #[test]
    fn no_history_prompt_has_no_block() {
        let b = branch();
        let h = history(2);
        let p = PromptBuilder::default()
            .build(ScenarioKind::NoHistory, &input(&b, Some(&h)))
            .unwrap();
        assert!(p.text.contains("We are playing a role game."));
        assert!(!p.text.contains(HISTORY_HEADER));
        assert!(!p.text.contains("old comment"));
    }

    #[test]
    fn fictitious_block_leads() {
        let b = branch();
        let p = PromptBuilder::default()
            .build(ScenarioKind::ProCandidate, &input(&b, None))
            .unwrap();
        let hist = p.text.find("need Trump back").unwrap();
        let thread = p.text.find("Post: ").unwrap();
        assert!(hist < thread);
        assert!(p.text.starts_with(HISTORY_HEADER));
    }

    #[test]
    fn placeholders_never_survive() {
        let b = branch();
        let h = history(2);
        for s in ScenarioKind::ALL {
            let p = PromptBuilder::default().build(s, &input(&b, Some(&h))).unwrap();
            for ph in ["<user>", "<post>", "<comments>", "<user_history>"] {
                assert!(!p.text.contains(ph), "{s}: {ph}");
            }
        }
    }

    #[test]
    fn scenarios_differ_only_in_history() {
        let b = branch();
        let h = history(2);
        let builder = PromptBuilder::default();
        let skeleton = |s: ScenarioKind| -> Vec<String> {
            builder
                .build(s, &input(&b, Some(&h)))
                .unwrap()
                .text
                .split("\n\n")
                .filter(|p| {
                    *p != HISTORY_INTRO && *p != HISTORY_HEADER && !p.starts_with("User carol says:")
                })
                .map(str::to_string)
                .collect()
        };
        let base = skeleton(ScenarioKind::NoHistory);
        for s in ScenarioKind::ALL {
            assert_eq!(skeleton(s), base, "{s}");
        }
    }

    #[test]
    fn budget_drops_oldest_history_then_root_comments() {
        let b = branch();
        let h = history(5);
        let full = PromptBuilder::default()
            .build(ScenarioKind::RealHistory, &input(&b, Some(&h)))
            .unwrap();
        let builder = PromptBuilder::default().with_budget(full.token_estimate - 10);
        let p = builder.build(ScenarioKind::RealHistory, &input(&b, Some(&h))).unwrap();
        assert!(p.dropped_history >= 1);
        assert!(!p.text.contains("old comment 0"));
        assert!(p.text.contains("old comment 4"));
        assert!(p.token_estimate <= full.token_estimate - 10);

        // a budget only the bare skeleton fits in
        let bare = PromptBuilder::default()
            .build(
                ScenarioKind::RealHistory,
                &input(
                    &BranchContext {
                        post: b.post.clone(),
                        comments: vec![],
                    },
                    Some(&history(1)),
                ),
            )
            .unwrap();
        let p = PromptBuilder::default()
            .with_budget(bare.token_estimate + 6)
            .build(ScenarioKind::RealHistory, &input(&b, Some(&h)))
            .unwrap();
        assert_eq!(p.dropped_history, 4);
        assert!(p.dropped_comments >= 1);
        assert!(p.text.contains("Big rally tonight"));
        assert!(!p.text.contains("Who is going?"));

        let err = PromptBuilder::default()
            .with_budget(10)
            .build(ScenarioKind::NoHistory, &input(&b, None));
        assert!(matches!(err, Err(ScenarioError::OversizeContext { .. })));
    }

    #[test]
    fn anonymization_hides_usernames() {
        let b = branch();
        let p = PromptBuilder::default()
            .with_anonymized_authors(true)
            .build(ScenarioKind::NoHistory, &input(&b, None))
            .unwrap();
        assert!(!p.text.contains("carol"));
        assert!(!p.text.contains("alice"));
        assert!(p.text.contains(&anonymize_author("carol")));
        assert_eq!(p.author, "carol");
    }

    #[test]
    fn token_estimates() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
        assert_eq!(estimate_tokens("abcdefghi"), 3);
    }

    proptest::proptest! {
        #[test]
        fn estimate_is_monotone_under_concatenation(a in ".{0,200}", b in ".{0,200}") {
            let joined = format!("{a}{b}");
            let e = estimate_tokens(&joined);
            proptest::prop_assert!(e >= estimate_tokens(&a).max(estimate_tokens(&b)));
        }
    }
}
