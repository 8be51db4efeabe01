//! Render the four scenario prompts for one target comment.
//!
//! cargo run --example build_prompts

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use threadsim::corpus::{build_forest, extract_history, extract_targets, parse_dump};
use threadsim::gateway::GenerationParams;
use threadsim::scenario::{render_branch, Candidate, PromptBuilder, PromptInput, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/seven_lines.jsonl");
    let forest = build_forest(parse_dump(BufReader::new(File::open(fixture)?))?.records)?;
    let target = extract_targets("dave", &forest).into_iter().next().ok_or("dave has no leaf comment")?;
    let branch = render_branch(forest.tree(&target.tree_id).ok_or("missing tree")?, &target)?;
    // history from the same forest, just to have something to show
    let history = extract_history("dave", &forest);
    let target_ref = target.target_ref();
    let builder = PromptBuilder::new(GenerationParams::default()).with_budget(4000);
    for scenario in ScenarioKind::ALL {
        let prompt = builder.build(
            scenario,
            &PromptInput {
                target_ref: &target_ref,
                author: &target.author,
                candidate: Candidate::Trump,
                branch: &branch,
                real_history: Some(&history),
            },
        )?;
        println!("===== {scenario} (~{} tokens) =====\n{}\n", prompt.token_estimate, prompt.text);
    }
    println!("removed target comment: {:?}", target.body);
    Ok(())
}
