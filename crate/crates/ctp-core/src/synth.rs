//! Seeded synthetic tweet corpus for benchmarks and smoke tests.
//!
//! Documents come from two topics with disjoint marker vocabularies (device
//! talk vs. store talk), so k-means can recover the topics from counts
//! alone. Sentiment keywords drive the labels: a shared positive/negative
//! vocabulary, one dominant negative keyword ("freak"), and a set of
//! slang words whose polarity flips with the topic, which only per-topic
//! classifiers can fully exploit. Label noise caps attainable accuracy.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Label, LabeledDocument};

const TOPIC_DEVICE: &[&str] = &["phone", "battery", "screen", "camera", "charger"];
const TOPIC_STORE: &[&str] = &["store", "staff", "queue", "warranty", "repair"];
const POSITIVE: &[&str] = &["love", "great", "awesome", "amazing", "happy"];
const NEGATIVE: &[&str] = &["hate", "terrible", "awful", "broken", "angry"];
/// The dominant negative keyword; it should surface at the root of a fitted
/// tree on this corpus.
pub const DOMINANT_NEGATIVE: &str = "freak";
/// Slang that reads positive in device tweets and negative in store tweets.
const SLANG_DEVICE_POS: &[&str] = &["wild", "insane", "unreal"];
/// Slang with the opposite polarity: negative for devices ("basic" hardware),
/// positive for stores ("quiet" queue).
const SLANG_DEVICE_NEG: &[&str] = &["quiet", "basic", "simple"];
const FILLER: &[&str] = &["apple", "new", "today", "update", "week", "launch"];
const MENTIONS: &[&str] = &["@AppleSupport", "@technews", "@dailygadget"];
const URLS: &[&str] = &["http://t.co/x1", "https://short.ly/q7", "www.tech.example.com"];

/// Fraction of documents whose sentiment is carried only by topic-dependent
/// slang. Globally these words are uninformative (their polarity flips with
/// the topic), so only topic-aware models can classify these documents.
const SLANG_ONLY_RATE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    /// Probability that a document's observed label is flipped.
    pub label_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_docs: 1200,
            label_noise: 0.10,
        }
    }
}

fn push_samples(out: &mut Vec<String>, rng: &mut ChaCha8Rng, pool: &[&str], count: usize) {
    for _ in 0..count {
        out.push(pool[rng.gen_range(0..pool.len())].to_string());
    }
}

/// Generates the two-topic corpus; identical `(config, seed)` pairs produce
/// identical corpora.
pub fn generate_corpus(config: &SynthConfig, seed: u64) -> Vec<LabeledDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(config.n_docs);
    for id in 0..config.n_docs {
        let device_topic = rng.gen_bool(0.5);
        let positive = rng.gen_bool(0.5);

        let mut words: Vec<String> = Vec::new();
        let markers = if device_topic { TOPIC_DEVICE } else { TOPIC_STORE };
        let n_markers = rng.gen_range(3..=5);
        push_samples(&mut words, &mut rng, markers, n_markers);

        if rng.gen_bool(SLANG_ONLY_RATE) {
            // Sentiment expressed only through topic-flipped slang.
            let pool = if positive == device_topic {
                SLANG_DEVICE_POS
            } else {
                SLANG_DEVICE_NEG
            };
            let n_slang = rng.gen_range(1..=2);
            push_samples(&mut words, &mut rng, pool, n_slang);
        } else {
            let sentiment_pool = if positive { POSITIVE } else { NEGATIVE };
            let n_sentiment = rng.gen_range(1..=2);
            push_samples(&mut words, &mut rng, sentiment_pool, n_sentiment);
            if !positive && rng.gen_bool(0.65) {
                words.push(DOMINANT_NEGATIVE.to_string());
            }
        }
        let n_filler = rng.gen_range(2..=3);
        push_samples(&mut words, &mut rng, FILLER, n_filler);

        words.shuffle(&mut rng);
        let mut text = words.join(" ");
        if rng.gen_bool(0.1) {
            text.push(' ');
            text.push_str(MENTIONS[rng.gen_range(0..MENTIONS.len())]);
        }
        if rng.gen_bool(0.1) {
            text.push(' ');
            text.push_str(URLS[rng.gen_range(0..URLS.len())]);
        }

        let truth = if positive { Label::Positive } else { Label::Negative };
        let label = if rng.gen_bool(config.label_noise) {
            match truth {
                Label::Positive => Label::Negative,
                Label::Negative => Label::Positive,
            }
        } else {
            truth
        };
        docs.push(LabeledDocument { id, text, label });
    }
    docs
}

/// Writes a corpus in the CSV layout expected by the loader
/// (`text,label` columns, RFC 4180 quoting).
pub fn write_corpus_csv<W: std::io::Write>(
    docs: &[LabeledDocument],
    out: W,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["text", "label"])?;
    for doc in docs {
        let label = match doc.label {
            Label::Negative => "Negative",
            Label::Positive => "Positive",
        };
        writer.write_record([doc.text.as_str(), label])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_csv_reader, LabelRule};

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig {
            n_docs: 50,
            ..SynthConfig::default()
        };
        assert_eq!(generate_corpus(&config, 7), generate_corpus(&config, 7));
        assert_ne!(generate_corpus(&config, 7), generate_corpus(&config, 8));
    }

    #[test]
    fn corpus_has_both_labels_and_contiguous_ids() {
        let docs = generate_corpus(&SynthConfig::default(), 1);
        assert_eq!(docs.len(), 1200);
        assert!(docs.iter().any(|d| d.label == Label::Positive));
        assert!(docs.iter().any(|d| d.label == Label::Negative));
        for (i, doc) in docs.iter().enumerate() {
            assert_eq!(doc.id, i);
            assert!(!doc.text.is_empty());
        }
    }

    #[test]
    fn csv_round_trip_preserves_the_corpus() {
        let config = SynthConfig {
            n_docs: 40,
            ..SynthConfig::default()
        };
        let docs = generate_corpus(&config, 3);
        let mut buffer = Vec::new();
        write_corpus_csv(&docs, &mut buffer).unwrap();
        let reloaded =
            load_csv_reader(buffer.as_slice(), "text", "label", &LabelRule::default()).unwrap();
        assert_eq!(docs, reloaded);
    }

    #[test]
    fn freak_appears_mostly_in_negative_documents() {
        let docs = generate_corpus(&SynthConfig::default(), 5);
        let with_freak: Vec<&LabeledDocument> = docs
            .iter()
            .filter(|d| d.text.split_whitespace().any(|w| w == DOMINANT_NEGATIVE))
            .collect();
        assert!(!with_freak.is_empty());
        let negative = with_freak
            .iter()
            .filter(|d| d.label == Label::Negative)
            .count();
        // Only label noise can attach "freak" to a positive label.
        assert!(negative as f64 / with_freak.len() as f64 > 0.8);
    }
}
