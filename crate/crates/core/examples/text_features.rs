//! Stylometric features, n-gram tables and Zipf fits for two small corpora.
//!
//! cargo run --example text_features

use threadsim::textstats::{features, ngram_table, rank_correlation, text_features, zipf_fit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let human = [
        "The debate was a disaster for him. I think the polls are wrong.",
        "Is this a joke? No, it is not. They were wrong before!",
        "Turnout will decide this. The rally was packed and the crowd was loud.",
        "I watched the whole thing and I think he won the night.",
    ];
    let generated = [
        "It is important to consider all perspectives in this debate.",
        "The rally was a great opportunity to engage with voters.",
        "It is important to stay informed and engaged in the process.",
        "The debate was a great opportunity for both candidates.",
    ];
    println!("{:?}", text_features(human[0]).unwrap());
    for (name, corpus) in [("human", &human), ("generated", &generated)] {
        let f = features(corpus)?;
        println!(
            "{name:>9}: TTR {:.3}  articles {:.2}%  function words {:.2}%  sentence length {:.2}",
            f.ttr.mean, f.article_pct.mean, f.function_word_pct.mean, f.avg_sentence_length.mean
        );
        let uni = ngram_table(corpus, 1)?;
        let top: Vec<String> = uni.entries.iter().take(5).map(|e| format!("{}:{}", e.gram, e.count)).collect();
        println!("           top unigrams {}", top.join(" "));
        match zipf_fit(&uni, 1) {
            Ok(z) => println!("           Zipf s = {:.3} (r2 {:.3}, {} ranks)", z.s, z.r2, z.n_points),
            Err(e) => println!("           Zipf fit unavailable: {e}"),
        }
    }
    let r = rank_correlation(&ngram_table(&human, 1)?, &ngram_table(&generated, 1)?)?;
    println!("unigram rank correlation: {r:.3}");
    Ok(())
}
