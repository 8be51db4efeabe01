//! Generate replies through the gateway with the scripted mock backend:
//! caching, a call budget and per-run variation.
//!
//! cargo run --example mock_generation

use std::sync::Arc;

use threadsim::gateway::mock::ScriptedMock;
use threadsim::gateway::{Budget, Gateway, GatewayConfig, GatewayError, GenerationParams, ModelRequest, ResponseCache};
use threadsim::scenario::{fictitious_history, Candidate, Stance};

fn main() {
    let gateway = Gateway::new(
        Arc::new(ScriptedMock::new(42)),
        ResponseCache::in_memory(),
        GatewayConfig {
            budget: Budget::new(Some(4)),
            ..GatewayConfig::default()
        },
    );
    let pro = fictitious_history(Candidate::Trump, Stance::Pro).entries[0].user_comment.clone();
    let prompts = [
        ("plain", "User: We are playing a role game.\nPost: Debate night\nAssistant: User dave replies:".to_string()),
        ("pro history", format!("User: We are playing a role game.\n{pro}\nAssistant: User dave replies:")),
    ];
    for (label, prompt) in &prompts {
        for run_index in 0..2 {
            let req = ModelRequest {
                prompt: prompt.clone(),
                params: GenerationParams::default(),
                run_index,
                attempt: 0,
            };
            let (text, cached) = gateway.complete(&req).expect("within budget");
            println!("{label} run {run_index} (cached: {cached}): {text}");
        }
    }
    // the same requests again come from the cache and cost nothing
    let again = ModelRequest {
        prompt: prompts[0].1.clone(),
        params: GenerationParams::default(),
        run_index: 0,
        attempt: 0,
    };
    println!("repeat served from cache: {}", gateway.complete(&again).unwrap().1);
    let fresh = ModelRequest { run_index: 9, ..again };
    match gateway.complete(&fresh) {
        Err(e @ GatewayError::BudgetExceeded { .. }) => println!("fifth backend call refused: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    println!("{:?}", gateway.counters());
}
