//! Regenerates the synthetic demo files under `data/`.
//!
//! `demo_lexicon.csv` covers the vocabulary of the bundled Alice text with
//! seeded random scores; it exercises the pipeline but carries no real affect
//! ratings. `structure_demo.tsv` is a labeled corpus for the four default
//! structure categories built from per-class marker words.
//!
//! Run with `cargo run --example make_demo_data`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use narrarc::corpus::{read_text_lossy, tokenize};
use narrarc::structure::DEFAULT_CATEGORIES;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_007;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let text = read_text_lossy(&data.join("alice_in_wonderland.txt"))?;

    let mut freq: HashMap<String, usize> = HashMap::new();
    for w in tokenize(&text) {
        *freq.entry(w).or_insert(0) += 1;
    }
    let mut vocab: Vec<(String, usize)> = freq.into_iter().collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut lex = String::from(
        "# Synthetic demo lexicon: seeded random scores, not real affect ratings.\n\
         Word,Ranking,Arousal,Valence,Dominance\n",
    );
    for (rank, (word, _)) in vocab.iter().enumerate() {
        let mut s = || (rng.random_range(0..=1000) as f64) / 1000.0;
        let (a, v, d) = (s(), s(), s());
        writeln!(lex, "{word},{},{a:.3},{v:.3},{d:.3}", rank + 1)?;
    }
    std::fs::write(data.join("demo_lexicon.csv"), lex)?;

    let neutral: Vec<String> = vocab.iter().take(300).map(|(w, _)| w.clone()).collect();
    let markers: HashMap<&str, &[&str]> = HashMap::from([
        (
            "tension",
            &["suspense", "dread", "threat", "brink", "looming", "uneasy"][..],
        ),
        (
            "punishment",
            &[
                "penalty", "sentence", "exile", "scolded", "punished", "banished",
            ][..],
        ),
        (
            "reward",
            &["prize", "gift", "bounty", "treasure", "rewarded", "granted"][..],
        ),
        (
            "victory",
            &[
                "triumph",
                "won",
                "conquered",
                "champion",
                "defeated",
                "prevailed",
            ][..],
        ),
    ]);
    let mut tsv = String::from("label\ttext\n");
    for _ in 0..40 {
        for cat in DEFAULT_CATEGORIES {
            let mut words: Vec<&str> = Vec::with_capacity(60);
            for i in 0..60 {
                if i % 6 == 0 {
                    words.push(markers[cat].choose(&mut rng).copied().unwrap());
                } else {
                    words.push(neutral.choose(&mut rng).unwrap());
                }
            }
            writeln!(tsv, "{cat}\t{}", words.join(" "))?;
        }
    }
    std::fs::write(data.join("structure_demo.tsv"), tsv)?;
    Ok(())
}
