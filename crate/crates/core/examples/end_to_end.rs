//! The whole pipeline (ingest, simulate, analyze, detect) on the bundled
//! demo corpus with mock backends, as the command-line tool runs it.
//!
//! cargo run --example end_to_end [out_dir]

use std::path::Path;

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/demo.toml");
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("threadsim-demo").display().to_string());
    let code = threadsim::cli::main_with_args(["threadsim", "--config", config.to_str().unwrap(), "--out", &out, "run"]);
    if code != 0 {
        std::process::exit(code);
    }
    let shares = Path::new(&out).join("analyze/demo_trump/t0.00/shares.csv");
    println!("{}", std::fs::read_to_string(shares).unwrap_or_default());
    let metrics = Path::new(&out).join("detect/demo_trump/t0.00/metrics.csv");
    println!("{}", std::fs::read_to_string(metrics).unwrap_or_default());
    println!("artifacts and manifest.json in {out}");
}
