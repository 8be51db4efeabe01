//! Embed comments with the hashed bag-of-words mock, average them into user
//! centroids and compare generated users with their real counterparts.
//!
//! cargo run --example embedding_space

use std::sync::Arc;

use threadsim::embedspace::{
    group_distance_matrix, similarity_exceedance, user_centroids, Baseline, EmbeddedComment, Group,
};
use threadsim::gateway::mock::{HashedBowEmbedder, ScriptedMock};
use threadsim::gateway::{Gateway, GatewayConfig, ResponseCache};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = Gateway::new(Arc::new(ScriptedMock::new(0)), ResponseCache::in_memory(), GatewayConfig::default())
        .with_embedder(Arc::new(HashedBowEmbedder::new(64)));
    let comments = [
        ("ann", Group::Real, "The rally was packed, what a night."),
        ("ann", Group::Real, "Packed rally again, loud crowd."),
        ("bob", Group::Real, "Tax policy matters more than rallies."),
        ("bob", Group::Real, "Read the tax plan before voting."),
        ("cat", Group::Real, "Debate night, popcorn ready."),
        ("ann", Group::NoHistory, "What a night at the rally, packed crowd."),
        ("bob", Group::NoHistory, "Everyone should read the tax plan."),
        ("cat", Group::NoHistory, "It is important to stay informed."),
    ];
    let mut embedded = Vec::new();
    for (author, group, text) in comments {
        embedded.push(EmbeddedComment {
            author: author.into(),
            group,
            vector: gateway.embed(text)?.values,
        });
    }
    let centroids = user_centroids(&embedded)?;
    let real: Vec<_> = centroids.iter().filter(|c| c.group == Group::Real).cloned().collect();
    let generated: Vec<_> = centroids.iter().filter(|c| c.group == Group::NoHistory).cloned().collect();
    for baseline in [Baseline::RandomMatch, Baseline::AllRealMean] {
        let e = similarity_exceedance(&generated, &real, baseline, 7, 100)?;
        println!("{baseline:?}: {}/{} generated users beat the baseline", e.n_exceeding, e.n_users);
        for u in &e.users {
            println!("  {:<4} similarity {:.3} threshold {:.3}", u.author, u.similarity, u.threshold);
        }
    }
    print!("{}", group_distance_matrix(&centroids)?.table().to_csv_string());
    Ok(())
}
