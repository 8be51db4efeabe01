//! Classify texts with the scripted mock classifier and aggregate label
//! shares and a real-versus-generated cross tabulation.
//!
//! cargo run --example classify_shares

use std::sync::Arc;

use threadsim::classify::{aggregate_shares, classify_text, cross_tab, parse_classification, Axis, ShareMode};
use threadsim::gateway::mock::ScriptedMock;
use threadsim::gateway::{Gateway, GatewayConfig, GenerationParams, ResponseCache};
use threadsim::scenario::Candidate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("parsed reply: {:?}", parse_classification("-1, -1, 1")?);
    let gateway = Gateway::new(Arc::new(ScriptedMock::new(1)), ResponseCache::in_memory(), GatewayConfig::default());
    let texts = [
        "Any news on the rally?",
        "Honestly, he has my full support.",
        "He will never get my vote.",
        "Who is watching tonight?",
    ];
    let params = GenerationParams::default();
    let mut scores = Vec::new();
    for t in texts {
        let c = classify_text(&gateway, t, Candidate::Trump, 3, &params)?;
        println!("{:>50} -> {:?}", t, c.score.as_ref().map(|s| s.modal_triple));
        scores.push(c.score);
    }
    for axis in Axis::ALL {
        let b = aggregate_shares(&scores, axis, ShareMode::Modal)?;
        let parts: Vec<String> = (-1..=1)
            .zip(axis.label_names())
            .filter(|&(l, name)| name != "unused" || b.share(l) > 0.0)
            .map(|(l, name)| format!("{name} {:.2}", b.share(l)))
            .collect();
        println!("{:<9} {}", axis.as_str(), parts.join(", "));
    }
    let pairs = [(0, 0), (0, 1), (1, 1), (-1, -1), (0, -1)];
    let ct = cross_tab(&pairs);
    for (label, row) in [-1, 0, 1].iter().zip(ct.fractions) {
        println!("real {label:>2}: generated fractions {row:?}");
    }
    Ok(())
}
