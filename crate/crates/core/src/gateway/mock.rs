//! Deterministic offline backends.
//!
//! [`ScriptedMock`] answers generation prompts with template text whose
//! stance is fixed by the prompt's scenario, and answers classification
//! prompts by looking for those scripted stance markers. The pair gives the
//! analysis stages a known ground truth without any network access.

use rand::seq::IndexedRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

use super::{BackendError, ChatBackend, EmbeddingBackend, ModelRequest};
use crate::classify::{CLASSIFICATION_OPENING, CLASSIFY_TEXT_LEAD};
use crate::scenario::{fictitious_history, Candidate, Stance};

/// Present in every supportive mock comment.
pub const SUPPORT_MARKER: &str = "has my full support";
/// Present in every opposing mock comment.
pub const OPPOSE_MARKER: &str = "will never get my vote";
/// Present in every neutral mock comment.
pub const NEUTRAL_MARKER: &str = "wait for more facts";

const OPENERS: [&str; 12] = [
    "Honestly,",
    "Look,",
    "I have to say,",
    "To be fair,",
    "Well,",
    "Speaking for myself,",
    "Interesting thread.",
    "Good point above.",
    "Not gonna lie,",
    "Fair enough.",
    "I keep coming back to this.",
    "Here is my take.",
];

const MIDDLES: [&str; 16] = [
    "The coverage this week has been relentless.",
    "Turnout is going to decide everything.",
    "People in my town talk about this constantly.",
    "The polls keep moving around.",
    "This primary season has been exhausting.",
    "The debates will settle a lot of questions.",
    "Everyone I work with has an opinion on it.",
    "The media narrative rarely matches what voters say.",
    "November cannot come soon enough.",
    "My family is split on this one.",
    "Every rally brings out bigger crowds.",
    "The ground game matters more than ads.",
    "Swing states are where this gets decided.",
    "Nobody expected this race to look like this.",
    "Volunteers are doing the real work.",
    "The convention changed the mood.",
];

const CLOSERS: [&str; 12] = [
    "That is all I have to say for now.",
    "We will see soon enough.",
    "Just my two cents.",
    "Curious what others think.",
    "Time will tell.",
    "Anyway, back to work.",
    "Let us keep the discussion civil.",
    "Stay engaged, everyone.",
    "Make sure you are registered.",
    "Enough said.",
    "Thanks for posting this.",
    "Keep it coming.",
];

/// Scripted generator and classifier in one backend.
#[derive(Debug, Clone)]
pub struct ScriptedMock {
    seed: u64,
}

impl ScriptedMock {
    pub fn new(seed: u64) -> Self {
        ScriptedMock { seed }
    }
}

/// Which fictitious history, if any, the prompt carries.
fn scripted_stance(prompt: &str) -> Option<(Candidate, Stance)> {
    for c in [Candidate::Trump, Candidate::Clinton] {
        for s in [Stance::Pro, Stance::Anti] {
            if prompt.contains(&fictitious_history(c, s).entries[0].user_comment) {
                return Some((c, s));
            }
        }
    }
    None
}

/// The text under classification, if `prompt` is a classification prompt.
fn classification_subject(prompt: &str) -> Option<&str> {
    if !prompt.starts_with(CLASSIFICATION_OPENING) {
        return None;
    }
    let start = prompt.rfind(CLASSIFY_TEXT_LEAD)? + CLASSIFY_TEXT_LEAD.len();
    let rest = &prompt[start..];
    Some(rest.strip_suffix("\nAssistant:").unwrap_or(rest))
}

/// Scripted label for a text: markers decide, everything else is neutral.
pub fn scripted_label(text: &str) -> &'static str {
    if text.contains(SUPPORT_MARKER) {
        "1, 1, 0"
    } else if text.contains(OPPOSE_MARKER) {
        "-1, -1, 0"
    } else {
        "0, 0, 0"
    }
}

/// A few words from the last thread line before the reply cue.
fn echo_words(prompt: &str) -> Option<String> {
    let body = prompt.rsplit_once("\n\nAssistant:").map(|(b, _)| b).unwrap_or(prompt);
    let last = body.rsplit("\n").find(|l| !l.trim().is_empty())?;
    let last = last.split_once(": ").map(|(_, t)| t).unwrap_or(last);
    let words: Vec<&str> = last.split_whitespace().take(6).collect();
    (!words.is_empty()).then(|| words.join(" "))
}

pub fn mock_generate(seed: u64, req: &ModelRequest) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(req.prompt.as_bytes());
    h.update(serde_json::to_vec(&req.params).expect("params serialize"));
    h.update(req.run_index.to_le_bytes());
    h.update(req.attempt.to_le_bytes());
    let digest = h.finalize();
    let mut rng = {
        use rand::SeedableRng;
        let mut s = [0u8; 32];
        s.copy_from_slice(&digest);
        rand_chacha::ChaCha8Rng::from_seed(s)
    };

    let stance_line = match scripted_stance(&req.prompt) {
        Some((c, Stance::Pro)) => format!("{} {SUPPORT_MARKER}.", c.full_name()),
        Some((c, Stance::Anti)) => format!("{} {OPPOSE_MARKER}.", c.full_name()),
        None => format!("I would rather {NEUTRAL_MARKER} before deciding."),
    };
    let mut parts = vec![OPENERS.choose(&mut rng).expect("non-empty").to_string()];
    if let Some(echo) = echo_words(&req.prompt) {
        parts.push(format!("You wrote \"{echo}\" and that stuck with me."));
    }
    parts.push(stance_line);
    parts.push(MIDDLES.choose(&mut rng).expect("non-empty").to_string());
    parts.push(format!("I have followed this for {} years.", rng.random_range(2..=30)));
    parts.push(CLOSERS.choose(&mut rng).expect("non-empty").to_string());
    parts.join(" ")
}

impl ChatBackend for ScriptedMock {
    fn id(&self) -> String {
        format!("scripted-mock/{}", self.seed)
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError> {
        match classification_subject(&req.prompt) {
            Some(subject) => Ok(scripted_label(subject).to_string()),
            None => Ok(mock_generate(self.seed, req)),
        }
    }
}

/// Hashed bag of words: each token adds ±1 to one of `dim` buckets, then
/// the sum is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedBowEmbedder { dim }
    }

    pub fn embed_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for t in tokens {
            let d = Sha256::digest(t.as_bytes());
            let bucket = u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) % self.dim as u64;
            let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingBackend for HashedBowEmbedder {
    fn model_id(&self) -> String {
        format!("hashed-bow-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let tokens = crate::textstats::tokenize(text);
        if tokens.is_empty() {
            return Err(BackendError::Fatal("text has no tokens to embed".into()));
        }
        Ok(self.embed_tokens(&tokens))
    }
}
