//! Small helpers for converting between integers and little-endian bits.

pub fn bits_of(v: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| i < 64 && (v >> i) & 1 == 1).collect()
}

pub fn value_of(bits: &[bool]) -> u64 {
    bits.iter()
        .take(64)
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
}

/// Number of bits needed to index `n` items (at least one).
pub fn index_bits(n: usize) -> usize {
    let mut bits = 1;
    while (1usize << bits) < n {
        bits += 1;
    }
    bits
}
