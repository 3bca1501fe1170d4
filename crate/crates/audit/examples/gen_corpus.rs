//! Regenerates the bundled synthetic corpus and the stored predictions
//! under `fixtures/synthetic/`.

use std::path::PathBuf;

use essay_audit::io::{write_corpus, write_predictions, ColumnMapping};
use essay_audit::synth::{generate_corpus, noisy_predictions, SynthOptions};
use essay_audit_core::Split;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    std::fs::create_dir_all(&dir)?;
    let records = generate_corpus(&SynthOptions::default());
    write_corpus(&dir.join("corpus.csv"), &records, &ColumnMapping::default())?;
    let test: Vec<_> = records.into_iter().filter(|r| r.split == Split::Test).collect();
    write_predictions(&dir.join("predictions.csv"), &noisy_predictions(&test, 0.7, 11))?;
    println!("wrote {}", dir.display());
    Ok(())
}
