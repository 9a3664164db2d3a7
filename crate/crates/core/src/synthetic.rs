//! Seeded toy corpora and matching cluster files for tests and demos.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Label};

const HATE: &[&str] = &["vermin", "subhuman", "deport", "filth", "invaders", "exterminate", "savages", "parasites"];
const OFFENSIVE: &[&str] = &["damn", "crap", "bloody", "freaking", "idiot", "stupid", "sucks", "moron"];
const OK: &[&str] = &["lovely", "weekend", "coffee", "sunshine", "friends", "music", "happy", "garden"];
const SHARED: &[&str] = &["the", "a", "you", "they", "this", "is", "so", "and", "today", "people", "really", "just"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub per_class: [usize; 3],
    /// Chance that a content word comes from the document's own class.
    pub signal: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            per_class: [40, 60, 80],
            signal: 0.7,
            seed: 1,
        }
    }
}

fn class_words(label: Label) -> &'static [&'static str] {
    match label {
        Label::Hate => HATE,
        Label::Offensive => OFFENSIVE,
        Label::Ok => OK,
    }
}

/// Short tweet-like documents whose content words lean toward their class.
/// Some documents carry a mention, a URL or an emoji for the normalizer.
pub fn corpus(spec: &SyntheticSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::new();
    for label in Label::ALL {
        for _ in 0..spec.per_class[label.index()] {
            let len = rng.gen_range(5..12);
            let mut words: Vec<String> = Vec::with_capacity(len + 2);
            for _ in 0..len {
                let word = if rng.gen_bool(0.4) {
                    *SHARED.choose(&mut rng).unwrap()
                } else if rng.gen_bool(spec.signal) {
                    *class_words(label).choose(&mut rng).unwrap()
                } else {
                    let other = Label::ALL[rng.gen_range(0..3)];
                    *class_words(other).choose(&mut rng).unwrap()
                };
                words.push(word.to_string());
            }
            match rng.gen_range(0..6) {
                0 => words.insert(0, "@someone".into()),
                1 => words.push("https://t.co/xyz".into()),
                2 => words.push("\u{1F600}".into()),
                _ => {}
            }
            if rng.gen_bool(0.3) {
                words[0] = words[0].to_uppercase();
            }
            docs.push(Document {
                id: String::new(),
                text: words.join(" "),
                label,
            });
        }
    }
    docs.shuffle(&mut rng);
    for (i, d) in docs.iter_mut().enumerate() {
        d.id = format!("doc{i:05}");
    }
    Corpus::new(docs).expect("generated corpus is valid")
}

/// Writes the corpus as a tab-separated file with `id`, `text`, `label`.
pub fn to_tsv(corpus: &Corpus) -> String {
    let mut out = String::from("id\ttext\tlabel\n");
    for d in corpus.documents() {
        writeln!(out, "{}\t{}\t{}", d.id, d.text, d.label.name()).unwrap();
    }
    out
}

/// A cluster file covering the generator vocabulary. Words of one class
/// share a path prefix, so prefixes carry class signal.
pub fn cluster_file(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: [(&str, &[&str]); 4] = [("00", HATE), ("01", OFFENSIVE), ("10", OK), ("11", SHARED)];
    let mut out = String::new();
    for (prefix, words) in groups {
        for w in words {
            let extra = rng.gen_range(2..10);
            let tail: String = (0..extra).map(|_| if rng.gen_bool(0.5) { '1' } else { '0' }).collect();
            writeln!(out, "{prefix}{tail}\t{w}\t{}", rng.gen_range(10..1000)).unwrap();
        }
    }
    out
}
