use xxhash_rust::xxh3::xxh3_64_with_seed;

/// Independent sub-seed for a named stage and index.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut buf = Vec::with_capacity(tag.len() + 8);
    buf.extend_from_slice(tag.as_bytes());
    buf.extend_from_slice(&index.to_le_bytes());
    xxh3_64_with_seed(&buf, seed)
}
