//! Regenerates the bundled smoke-test corpus at `data/sample_tweets.csv`.
//!
//! The output is fully determined by the seed below, so rerunning this
//! reproduces the committed file byte for byte:
//!
//! ```bash
//! cargo run -p ctp-core --example generate_sample_corpus
//! ```

use ctp_core::synth::{generate_corpus, write_corpus_csv, SynthConfig};

fn main() {
    let config = SynthConfig {
        n_docs: 200,
        label_noise: 0.10,
    };
    let docs = generate_corpus(&config, 42);

    let out_path = std::path::Path::new("data/sample_tweets.csv");
    std::fs::create_dir_all(out_path.parent().unwrap()).expect("create data/");
    let file = std::fs::File::create(out_path).expect("create corpus file");
    write_corpus_csv(&docs, file).expect("write corpus");
    println!("wrote {} documents to {}", docs.len(), out_path.display());
}
