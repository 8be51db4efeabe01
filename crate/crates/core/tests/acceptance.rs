//! Acceptance runner: one PASS/FAIL/SKIP line per criterion.

mod common;

use std::time::{Duration, Instant};

use common::checks::{self, Check};

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Option<Check>,
}

fn always(f: fn() -> Check) -> Option<Check> {
    Some(f())
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "template fidelity", limit: Duration::from_secs(1), run: || always(checks::template_fidelity) },
        Criterion { id: 2, name: "parsing and aggregation", limit: Duration::from_secs(5), run: || always(checks::parsing_and_aggregation) },
        Criterion { id: 3, name: "scripted-mock end to end", limit: Duration::from_secs(30), run: || always(checks::scripted_mock_pipeline) },
        Criterion { id: 4, name: "n-gram and Zipf oracle", limit: Duration::from_secs(10), run: || always(checks::ngram_and_zipf) },
        Criterion { id: 5, name: "feature formulas", limit: Duration::from_secs(5), run: || always(checks::feature_formulas) },
        Criterion { id: 6, name: "embedding-space math", limit: Duration::from_secs(60), run: || always(checks::embedding_math) },
        Criterion { id: 7, name: "detector", limit: Duration::from_secs(60), run: || always(checks::detector_checks) },
        Criterion { id: 8, name: "corpus conservation", limit: Duration::from_secs(5), run: || always(checks::corpus_conservation) },
        Criterion { id: 9, name: "live smoke test", limit: Duration::from_secs(600), run: checks::live_smoke },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Some(Err(msg))
        });
        let took = start.elapsed();
        let (tag, detail) = match outcome {
            None => ("SKIP", format!("set {} to run", checks::LIVE_KEY_ENV)),
            Some(Ok(d)) if took <= c.limit => ("PASS", d),
            Some(Ok(d)) => ("FAIL", format!("{d}; exceeded the {:?} limit", c.limit)),
            Some(Err(e)) => ("FAIL", e),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} criterion {} ({}) [{:.2}s]: {detail}", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
