//! Hashes, PRFs and keystreams shared by all protocol layers.

use std::sync::OnceLock;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::label::{CircuitSeed, Label, Security};

const FIXED_KEY: [u8; 16] = *b"pgc fixed aes k1";

/// Tweak domains for the fixed-key hash.
pub mod domain {
    pub const GATE: u32 = 1;
    pub const PARTIAL: u32 = 2;
    pub const TRANSLATE: u32 = 3;
}

/// PRF domains for seed-derived values.
pub mod prf_domain {
    pub const DELTA: u64 = 1;
    pub const WIRE: u64 = 2;
    pub const R_VALUE: u64 = 3;
    pub const COMMIT_PERM: u64 = 4;
}

fn fixed_cipher() -> &'static Aes128 {
    static CIPHER: OnceLock<Aes128> = OnceLock::new();
    CIPHER.get_or_init(|| Aes128::new(GenericArray::from_slice(&FIXED_KEY)))
}

fn encrypt(cipher: &Aes128, x: u128) -> u128 {
    let mut block = GenericArray::from(x.to_le_bytes());
    cipher.encrypt_block(&mut block);
    u128::from_le_bytes(block.into())
}

/// Tweakable correlation-robust hash from a fixed-key permutation.
pub fn tccr(x: u128, tweak: u128) -> u128 {
    let cipher = fixed_cipher();
    let px = encrypt(cipher, x);
    encrypt(cipher, px ^ tweak) ^ px
}

pub fn tweak(domain: u32, hi: u32, lo: u64) -> u128 {
    ((domain as u128) << 96) | ((hi as u128) << 64) | lo as u128
}

/// Row key for a two-input garbled gate.
pub fn gate_hash(a: Label, b: Label, gate_id: u32) -> u128 {
    let g = gate_id as u64;
    tccr(a.0, tweak(domain::GATE, 0, 2 * g)) ^ tccr(b.0, tweak(domain::GATE, 0, 2 * g + 1))
}

/// One-input hash used by partial input gates and input translation gates.
pub fn wire_hash(sec: Security, domain: u32, x: Label, circuit: u32, wire: u64) -> Label {
    sec.truncate(tccr(x.0, tweak(domain, circuit, wire)))
}

/// AES-based PRF keyed by a circuit seed.
pub struct Prf {
    cipher: Aes128,
    sec: Security,
}

impl Prf {
    pub fn new(sec: Security, seed: CircuitSeed) -> Self {
        let key = seed.0 .0.to_le_bytes();
        Self {
            cipher: Aes128::new(GenericArray::from_slice(&key)),
            sec,
        }
    }

    pub fn block(&self, domain: u64, index: u64) -> u128 {
        encrypt(&self.cipher, ((domain as u128) << 64) | index as u128)
    }

    pub fn label(&self, domain: u64, index: u64) -> Label {
        self.sec.truncate(self.block(domain, index))
    }
}

/// Domain-separated SHA-256 over length-prefixed parts.
pub fn hash_parts(domain: &str, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain.as_bytes());
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

pub fn hash_to_label(sec: Security, domain: &str, parts: &[&[u8]]) -> Label {
    let d = hash_parts(domain, parts);
    let mut buf = [0u8; 16];
    buf.copy_from_slice(&d[..16]);
    sec.truncate(u128::from_le_bytes(buf))
}

pub fn label_bytes(l: Label) -> [u8; 16] {
    l.0.to_le_bytes()
}

/// Deterministic RNG derived from a domain and byte parts.
pub fn derived_rng(domain: &str, parts: &[&[u8]]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(hash_parts(domain, parts))
}

pub fn keystream(domain: &str, key: &[u8], len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    derived_rng(domain, &[key]).fill_bytes(&mut out);
    out
}

pub fn xor_in_place(data: &mut [u8], pad: &[u8]) {
    for (d, p) in data.iter_mut().zip(pad) {
        *d ^= p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tccr_depends_on_tweak() {
        assert_ne!(tccr(5, 1), tccr(5, 2));
        assert_eq!(tccr(5, 1), tccr(5, 1));
    }

    #[test]
    fn prf_separates_domains() {
        let sec = Security::default();
        let prf = Prf::new(sec, CircuitSeed(Label(42)));
        assert_ne!(prf.label(1, 0), prf.label(2, 0));
        assert_eq!(prf.label(1, 7).0 >> 80, 0);
    }

    #[test]
    fn hash_parts_is_length_prefixed() {
        assert_ne!(hash_parts("d", &[b"ab", b"c"]), hash_parts("d", &[b"a", b"bc"]));
    }

    #[test]
    fn keystream_is_deterministic() {
        assert_eq!(keystream("x", b"k", 40), keystream("x", b"k", 40));
        assert_ne!(keystream("x", b"k", 40), keystream("y", b"k", 40));
    }
}
