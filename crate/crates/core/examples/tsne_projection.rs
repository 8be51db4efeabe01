//! Project two Gaussian clusters to 2-D with exact t-SNE and write an SVG.
//!
//! cargo run --example tsne_projection [out.svg]

use rand_distr::{Distribution, StandardNormal};

use threadsim::embedspace::{project, Group, LabeledVector, TsneParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = threadsim::seed::rng(1, "example-clusters", 0);
    let items: Vec<LabeledVector> = (0..60)
        .map(|i| {
            let (group, center) = if i < 30 { (Group::Real, 0.0) } else { (Group::NoHistory, 6.0) };
            LabeledVector {
                author: format!("user{i:02}"),
                group,
                vector: (0..20).map(|_| center + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect(),
            }
        })
        .collect();
    let params = TsneParams {
        perplexity: 15.0,
        iterations: 750,
        seed: 3,
        ..TsneParams::default()
    };
    let p = project(&items, &params)?;
    for k in &p.kl_trace {
        println!("iteration {:>4}: KL {:.4}", k.iteration, k.kl);
    }
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("tsne.svg").display().to_string());
    std::fs::write(&out, p.svg())?;
    println!("wrote {out}");
    Ok(())
}
