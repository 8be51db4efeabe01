mod common;

use threadsim::scenario::{Candidate, ScenarioKind};

#[test]
fn prompts_match_snapshots() {
    let prompts = common::golden_prompts();
    assert_eq!(prompts.len(), 6);
    for (name, text) in &prompts {
        common::check_golden(name, text).unwrap();
    }
}

#[test]
fn snapshots_carry_the_fixed_strings() {
    let p: std::collections::HashMap<String, String> = common::golden_prompts().into_iter().collect();
    for s in ScenarioKind::ALL {
        let text = &p[&format!("scenario_{}.txt", s.as_str())];
        assert!(text.contains("We are playing a role game."));
        assert!(text.ends_with("Assistant: User dave replies:"), "{s:?}");
        for placeholder in ["<user>", "<post>", "<comments>", "<user_history>"] {
            assert!(!text.contains(placeholder));
        }
    }
    assert!(p["scenario_real_history.txt"].contains("Turnout will decide this."));
    assert!(!p["scenario_no_history.txt"].contains("Turnout will decide this."));
    let pro = &p["scenario_pro_candidate.txt"];
    let fict = threadsim::scenario::fictitious_history(Candidate::Trump, threadsim::scenario::Stance::Pro);
    let at = pro.find(&fict.entries[0].user_comment).unwrap();
    assert!(at < pro.find("Rally tonight").unwrap(), "fictitious block comes before the thread");
    assert!(p["classification_trump.txt"].contains("Donald Trump is a piece of shit!"));
    assert!(p["classification_clinton.txt"].contains("Position on Hillary Clinton: Pro-Hillary [1]"));
    for c in ["classification_trump.txt", "classification_clinton.txt"] {
        assert!(p[c].starts_with("You can only return three numbers"));
        assert!(p[c].contains("Assistant: -1, -1, 1"));
        assert!(p[c].ends_with("Assistant:"));
    }
}

#[test]
fn scenarios_differ_only_in_the_history_block() {
    let p: Vec<(String, String)> = common::golden_prompts();
    let tail = |t: &str| t[t.find("Post:").or_else(|| t.find("Rally tonight")).unwrap()..].to_string();
    let base = tail(&p[0].1);
    for (_, text) in &p[1..4] {
        assert_eq!(tail(text), base);
    }
}
