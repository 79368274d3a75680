use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{Corpus, RawExample};
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::label::RelevanceLabel;

/// Token whose presence makes a synthetic example relevant.
pub const MARKER: &str = "flood";

/// A toy corpus where an example is `Relevant` exactly when it contains
/// [`MARKER`], plus an embedding table covering its vocabulary.
///
/// The marker's vector is 1 on axis 0 and every filler's is 0 there; the
/// remaining axes are uniform noise in [-1, 1]. Each text has 4 to 12 filler words drawn from `vocab` distinct tokens;
/// about half the texts also carry the marker at a random position.
pub fn synthetic_corpus(n: usize, dim: usize, vocab: usize, seed: u64) -> Result<(EmbeddingTable, Corpus)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers: Vec<String> = (0..vocab.max(1)).map(|i| format!("w{i}")).collect();
    let mut entries: Vec<(String, Vec<f32>)> = Vec::with_capacity(fillers.len() + 1);
    for (k, word) in std::iter::once(MARKER.to_string()).chain(fillers.iter().cloned()).enumerate() {
        // Axis 0 is reserved for the marker; every other axis is noise.
        let mut v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        v[0] = if k == 0 { 1.0 } else { 0.0 };
        entries.push((word, v));
    }
    let table = EmbeddingTable::from_entries(dim, entries)?;

    let examples = (0..n)
        .map(|i| {
            let len = rng.gen_range(4..=12);
            let mut words: Vec<&str> = (0..len).map(|_| fillers.choose(&mut rng).unwrap().as_str()).collect();
            let relevant = rng.gen_bool(0.5);
            if relevant {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, MARKER);
            }
            RawExample {
                id: format!("syn{i}"),
                text: words.join(" "),
                label: if relevant {
                    RelevanceLabel::Relevant
                } else {
                    RelevanceLabel::NotRelevant
                },
            }
        })
        .collect();
    Ok((table, Corpus::new("synthetic", examples)?))
}
