//! Small text-feature helpers shared by the hashed embedder and the offline backend.

use std::hash::Hasher;

use fnv::FnvHasher;

/// 64-bit FNV-1a over raw bytes; stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn stable_hash_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(bytes);
    h.finish()
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn normalized_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Character 3-grams of the lowercased, whitespace-collapsed text padded with
/// one space on each side. Texts shorter than three characters after padding
/// yield the padded text itself.
pub fn char_trigrams(text: &str) -> Vec<String> {
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if normalized.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = format!(" {normalized} ").chars().collect();
    chars.windows(3).map(|w| w.iter().collect()).collect()
}
