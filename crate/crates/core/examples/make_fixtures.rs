//! Writes the synthetic fixture used by the bundled configuration:
//! `fixtures/{vocab.tsv, train.jsonl, docs.jsonl}`.
//!
//!     cargo run --example make_fixtures [-- <out dir>]

use std::path::PathBuf;

use subject_ensemble::corpus::write_records;
use subject_ensemble::synthetic;
use subject_ensemble::vocabulary::write_vocabulary;

fn main() -> subject_ensemble::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&out).expect("create output directory");
    let corpus = synthetic::corpus(2024);
    write_vocabulary(out.join("vocab.tsv"), &corpus.vocabulary)?;
    write_records(out.join("train.jsonl"), &corpus.train)?;
    write_records(out.join("docs.jsonl"), &corpus.docs)?;
    println!(
        "wrote {} concepts, {} training records and {} documents to {}",
        corpus.vocabulary.len(),
        corpus.train.len(),
        corpus.docs.len(),
        out.display()
    );
    Ok(())
}
