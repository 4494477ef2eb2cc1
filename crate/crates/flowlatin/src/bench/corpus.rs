//! Deterministic benchmark corpora: whitespace-separated words drawn from a
//! fixed 1,000-word lexicon, sized to a KB target within 2%.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: [&str; 10] = ["ka", "re", "mi", "to", "su", "ne", "val", "dor", "pel", "gri"];
const MIDDLES: [&str; 10] = ["ba", "lu", "ti", "ron", "se", "qua", "ve", "nor", "pi", "zad"];
const CODAS: [&str; 10] = ["n", "sh", "ta", "rim", "ko", "l", "ver", "dus", "ma", "x"];

/// The fixed lexicon: 1,000 distinct pronounceable words.
pub fn lexicon() -> Vec<String> {
    let mut words = Vec::with_capacity(1000);
    for onset in ONSETS {
        for middle in MIDDLES {
            for coda in CODAS {
                words.push(format!("{onset}{middle}{coda}"));
            }
        }
    }
    words
}

/// Generate corpus text of roughly `size_kb` kilobytes (within 2%),
/// deterministic in `seed`.
pub fn generate_corpus(size_kb: u64, seed: u64) -> String {
    assert!(size_kb >= 1, "corpus must be at least 1 KB");
    let words = lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (size_kb << 32));
    let target = (size_kb * 1024) as usize;
    let mut out = String::with_capacity(target + 64);
    let mut col = 0usize;
    while out.len() < target {
        if col > 0 {
            out.push(' ');
        }
        out.push_str(&words[rng.gen_range(0..words.len())]);
        col += 1;
        if col >= 12 {
            out.push('\n');
            col = 0;
        }
    }
    if col > 0 {
        out.push('\n');
    }
    out
}
