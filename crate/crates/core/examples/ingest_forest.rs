//! Parse a posts dump and a comments dump, rebuild the reply trees and pick
//! the users active in both time windows.
//!
//! cargo run --example ingest_forest

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use threadsim::corpus::{
    build_forest, extract_history, extract_targets, filter_window, parse_dump, select_users, TimeWindow,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let mut records = Vec::new();
    let mut lines = 0;
    let mut skipped = 0;
    for file in ["demo_trump_posts.jsonl", "demo_trump_comments.jsonl"] {
        let parsed = parse_dump(BufReader::new(File::open(demo.join(file))?))?;
        for d in &parsed.skipped {
            println!("{file}:{}: skipped ({})", d.line, d.reason);
        }
        lines += parsed.lines;
        skipped += parsed.skipped.len();
        records.extend(parsed.records);
    }

    let forest = build_forest(records.clone())?;
    let in_trees: usize = forest.trees.iter().map(|t| t.size()).sum();
    println!(
        "{lines} lines = {in_trees} in {} trees + {} orphans + {skipped} skipped",
        forest.trees.len(),
        forest.orphans.len()
    );

    let history = build_forest(filter_window(&records, TimeWindow::year(2015)))?;
    let target = build_forest(filter_window(&records, TimeWindow::year(2016)))?;
    let users = select_users(&history, &target);
    println!("{} users commented in both windows", users.len());
    if let Some(user) = users.first() {
        let h = extract_history(user, &history);
        let t = extract_targets(user, &target);
        println!("{user}: {} history pairs, {} leaf targets", h.entries.len(), t.len());
        if let Some(e) = h.entries.first() {
            println!("  replied {:?}\n  to      {:?}", e.user_comment, e.replied_to);
        }
    }
    Ok(())
}
