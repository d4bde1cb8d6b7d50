//! Writes the synthetic sample inputs under `data/`.
//!
//! `cargo run -p symbed-core --example sample_data -- [DIR]`

use std::path::PathBuf;

use symbed_core::corpus::{save_corpus, write_propositions};
use symbed_core::synthetic::{separable_propositions, synthetic_corpus};

// shared by every mock model in data/mock.toml
const MOCK_SEED: u64 = 11;

fn main() -> symbed_core::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&dir).expect("create output directory");
    save_corpus(
        &dir.join("synthetic-corpus.json"),
        &synthetic_corpus(200, 0),
    )?;
    write_propositions(
        &dir.join("synthetic-propositions.jsonl"),
        &separable_propositions(200, 0, MOCK_SEED),
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}
