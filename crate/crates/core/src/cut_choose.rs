//! Circuit split selection, per-circuit key pairs, split-hash verification
//! and the saved-key file.

use rand::seq::index::sample;
use rand::{CryptoRng, Rng};
use thiserror::Error;

use crate::abort::Role;
use crate::crypto::{hash_parts, hash_to_label, keystream, label_bytes, xor_in_place};
use crate::label::{Label, Security};
use crate::wire::{pack_bits, unpack_bits, Reader, WireError, Writer};

/// Smallest circuit count for which a split is defined.
pub const MIN_CIRCUITS: usize = 5;

const KEY_MAGIC: &[u8; 4] = b"PGC1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CutChooseError {
    #[error("cut-and-choose needs at least {MIN_CIRCUITS} circuits, got {0}")]
    TooFewCircuits(usize),
    #[error("split hash mismatch at circuit {0}")]
    SplitHashMismatch(usize),
    #[error("expected {expected} entries, got {actual}")]
    Count { expected: usize, actual: usize },
    #[error("bad key file: {0}")]
    KeyFile(String),
}

impl From<WireError> for CutChooseError {
    fn from(e: WireError) -> Self {
        CutChooseError::KeyFile(e.to_string())
    }
}

/// Number of evaluation circuits among `s`.
pub fn eval_count(s: usize) -> usize {
    2 * s / 5
}

/// Which circuits are opened for checking (`true`) and which are evaluated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CircuitSplit {
    check: Vec<bool>,
}

impl CircuitSplit {
    pub fn select<R: Rng + CryptoRng>(s: usize, rng: &mut R) -> Result<Self, CutChooseError> {
        if s < MIN_CIRCUITS {
            return Err(CutChooseError::TooFewCircuits(s));
        }
        let mut check = vec![true; s];
        for i in sample(rng, s, eval_count(s)) {
            check[i] = false;
        }
        Ok(Self { check })
    }

    pub fn from_bits(check: Vec<bool>) -> Self {
        Self { check }
    }

    /// A single evaluation circuit with nothing opened.
    pub fn all_eval(s: usize) -> Self {
        Self { check: vec![false; s] }
    }

    pub fn len(&self) -> usize {
        self.check.len()
    }

    pub fn is_empty(&self) -> bool {
        self.check.is_empty()
    }

    pub fn is_check(&self, i: usize) -> bool {
        self.check[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.check
    }

    pub fn eval_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.check[i]).collect()
    }

    pub fn check_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.check[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitKeyPair {
    pub eval_key: Label,
    pub check_key: Label,
}

impl CircuitKeyPair {
    pub fn random<R: Rng + CryptoRng>(sec: Security, rng: &mut R) -> Self {
        Self {
            eval_key: sec.random_label(rng),
            check_key: sec.random_label(rng),
        }
    }

    pub fn get(&self, check: bool) -> Label {
        if check {
            self.check_key
        } else {
            self.eval_key
        }
    }

    pub fn evolve(&self, sec: Security) -> Self {
        Self {
            eval_key: evolve_key(sec, self.eval_key),
            check_key: evolve_key(sec, self.check_key),
        }
    }
}

/// Key for the next execution of a chain.
pub fn evolve_key(sec: Security, key: Label) -> Label {
    hash_to_label(sec, "evolve key", &[&label_bytes(key)])
}

pub type SplitHash = [u8; 32];

pub fn key_hash(key: Label) -> SplitHash {
    hash_parts("split hash", &[&label_bytes(key)])
}

/// Generator's hashes per circuit, indexed by the check bit.
pub fn split_hash_pairs(keys: &[CircuitKeyPair]) -> Vec<[SplitHash; 2]> {
    keys.iter()
        .map(|k| [key_hash(k.eval_key), key_hash(k.check_key)])
        .collect()
}

/// Accepts the cloud's claimed split iff each claimed hash equals the
/// generator hash that its bit selects.
pub fn verify_split_hashes(
    gen: &[[SplitHash; 2]],
    cloud: &[(bool, SplitHash)],
) -> Result<CircuitSplit, CutChooseError> {
    if gen.len() != cloud.len() {
        return Err(CutChooseError::Count {
            expected: gen.len(),
            actual: cloud.len(),
        });
    }
    for (i, (pair, (bit, h))) in gen.iter().zip(cloud).enumerate() {
        if pair[*bit as usize] != *h {
            return Err(CutChooseError::SplitHashMismatch(i));
        }
    }
    Ok(CircuitSplit::from_bits(cloud.iter().map(|(b, _)| *b).collect()))
}

/// One-time-pad encryption of a package section under a circuit key.
pub fn seal(key: Label, section: &str, data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    xor_in_place(&mut out, &keystream(section, &label_bytes(key), data.len()));
    out
}

pub fn open(key: Label, section: &str, data: &[u8]) -> Vec<u8> {
    seal(key, section, data)
}

/// Keys held by one party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyRecords {
    /// Both keys of every circuit; the generator never learns the split.
    Generator(Vec<CircuitKeyPair>),
    /// The selected key and its check bit per circuit.
    Cloud(Vec<(bool, Label)>),
}

impl KeyRecords {
    pub fn len(&self) -> usize {
        match self {
            KeyRecords::Generator(k) => k.len(),
            KeyRecords::Cloud(k) => k.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn role(&self) -> Role {
        match self {
            KeyRecords::Generator(_) => Role::Generator,
            KeyRecords::Cloud(_) => Role::Cloud,
        }
    }

    pub fn evolve(&self, sec: Security) -> Self {
        match self {
            KeyRecords::Generator(k) => KeyRecords::Generator(k.iter().map(|p| p.evolve(sec)).collect()),
            KeyRecords::Cloud(k) => KeyRecords::Cloud(k.iter().map(|&(b, l)| (b, evolve_key(sec, l))).collect()),
        }
    }

    /// Split bits as stored on disk; all zero for the generator.
    pub fn split_bits(&self) -> Vec<bool> {
        match self {
            KeyRecords::Generator(k) => vec![false; k.len()],
            KeyRecords::Cloud(k) => k.iter().map(|(b, _)| *b).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(KEY_MAGIC)
            .u8(self.role().code())
            .u32(self.len() as u32)
            .bytes(&pack_bits(&self.split_bits()));
        match self {
            KeyRecords::Generator(k) => {
                for p in k {
                    w.bytes(&label_bytes(p.eval_key)).bytes(&label_bytes(p.check_key));
                }
            }
            KeyRecords::Cloud(k) => {
                for (b, l) in k {
                    w.u8(*b as u8).bytes(&label_bytes(*l));
                }
            }
        }
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, CutChooseError> {
        let mut r = Reader::new(buf);
        if r.take(4)? != KEY_MAGIC {
            return Err(CutChooseError::KeyFile("bad magic".into()));
        }
        let role = Role::from_code(r.u8()?).ok_or_else(|| CutChooseError::KeyFile("bad role".into()))?;
        let s = r.u32()? as usize;
        let split = unpack_bits(r.take(s.div_ceil(8))?, s);
        let label = |r: &mut Reader<'_>| -> Result<Label, CutChooseError> {
            Ok(Label(u128::from_le_bytes(r.take(16)?.try_into().unwrap())))
        };
        let keys = match role {
            Role::Generator => {
                if split.iter().any(|&b| b) {
                    return Err(CutChooseError::KeyFile("generator file carries a split".into()));
                }
                let mut k = Vec::with_capacity(s);
                for _ in 0..s {
                    let eval_key = label(&mut r)?;
                    let check_key = label(&mut r)?;
                    k.push(CircuitKeyPair { eval_key, check_key });
                }
                KeyRecords::Generator(k)
            }
            Role::Cloud => {
                let mut k = Vec::with_capacity(s);
                for &bit in split.iter() {
                    let b = r.u8()?;
                    if b > 1 || (b == 1) != bit {
                        return Err(CutChooseError::KeyFile("record disagrees with split".into()));
                    }
                    k.push((bit, label(&mut r)?));
                }
                KeyRecords::Cloud(k)
            }
            Role::Evaluator => return Err(CutChooseError::KeyFile("evaluator holds no keys".into())),
        };
        r.finish()?;
        Ok(keys)
    }
}
