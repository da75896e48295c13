//! Per-party state carried between executions of one chain.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::abort::Role;
use crate::cut_choose::{CircuitSplit, CutChooseError, KeyRecords};
use crate::label::{Label, Security};
use crate::wire::{pack_bits, unpack_bits, Reader, WireError, Writer};

const MAGIC: &[u8; 4] = b"PGCS";
pub const STATE_VERSION: u16 = 1;

const FLAG_POISONED: u8 = 1;
const FLAG_SEMI_HONEST: u8 = 2;

const HAS0: u8 = 1;
const HAS1: u8 = 2;
const SINGLE: u8 = 4;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("not a saved-state file")]
    BadMagic,
    #[error("unsupported state version {0}")]
    Version(u16),
    #[error("corrupt state: {0}")]
    Corrupt(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<WireError> for StateError {
    fn from(e: WireError) -> Self {
        StateError::Corrupt(e.to_string())
    }
}

impl From<CutChooseError> for StateError {
    fn from(e: CutChooseError) -> Self {
        StateError::Corrupt(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Malicious,
    SemiHonest,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Malicious => "malicious",
            Mode::SemiHonest => "semi",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "malicious" => Some(Mode::Malicious),
            "semi" | "semi_honest" | "semi-honest" => Some(Mode::SemiHonest),
            _ => None,
        }
    }
}

/// What one party knows about a saved wire of one circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireSave {
    Both(Label, Label),
    /// The evaluated label; its bit is unknown to the holder.
    Single(Label),
    /// The circuit's evaluation failed before this wire was reached.
    Missing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SavedState {
    pub role: Role,
    pub mode: Mode,
    pub sec: Security,
    /// Index of the next execution in the chain.
    pub next_execution: u64,
    pub circuits: usize,
    /// Known to the cloud only; all evaluation for the generator.
    pub split: CircuitSplit,
    pub keys: Option<KeyRecords>,
    pub wires: Vec<Vec<WireSave>>,
    pub poisoned: bool,
}

impl SavedState {
    pub fn saved_wire_count(&self) -> usize {
        self.wires.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        let bad = |m: &str| Err(StateError::Corrupt(m.into()));
        if self.role == Role::Evaluator {
            return bad("evaluator keeps no state");
        }
        if self.split.len() != self.circuits || self.wires.len() != self.circuits {
            return bad("circuit count disagrees with split or wire sections");
        }
        if let Some(k) = &self.keys {
            if k.len() != self.circuits || k.role() != self.role {
                return bad("key section disagrees with header");
            }
            if k.split_bits() != self.split.bits() && self.role == Role::Cloud {
                return bad("key section disagrees with split");
            }
        } else if self.mode == Mode::Malicious {
            return bad("malicious chain without keys");
        }
        let n = self.saved_wire_count();
        if self.wires.iter().any(|w| w.len() != n) {
            return bad("circuits save different wire counts");
        }
        for (i, ws) in self.wires.iter().enumerate() {
            let full = self.role == Role::Generator || self.split.is_check(i);
            for w in ws {
                let ok = match w {
                    WireSave::Both(..) => full,
                    WireSave::Single(_) | WireSave::Missing => !full,
                };
                if !ok {
                    return bad("wire record kind does not match circuit role");
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        let mut flags = 0;
        if self.poisoned {
            flags |= FLAG_POISONED;
        }
        if self.mode == Mode::SemiHonest {
            flags |= FLAG_SEMI_HONEST;
        }
        w.bytes(MAGIC)
            .u16(STATE_VERSION)
            .u8(self.role.code())
            .u8(flags)
            .u8(self.sec.bits() as u8)
            .u64(self.next_execution)
            .u32(self.circuits as u32)
            .bytes(&pack_bits(self.split.bits()));
        match &self.keys {
            Some(k) => w.blob(&k.encode()),
            None => w.blob(&[]),
        };
        for ws in &self.wires {
            w.u32(ws.len() as u32);
            for rec in ws {
                match *rec {
                    WireSave::Both(a, b) => {
                        w.u8(HAS0 | HAS1).label(self.sec, a).label(self.sec, b);
                    }
                    WireSave::Single(l) => {
                        w.u8(SINGLE).label(self.sec, l);
                    }
                    WireSave::Missing => {
                        w.u8(0);
                    }
                }
            }
        }
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, StateError> {
        let mut r = Reader::new(buf);
        if r.take(4).map_err(|_| StateError::BadMagic)? != MAGIC {
            return Err(StateError::BadMagic);
        }
        let version = r.u16()?;
        if version != STATE_VERSION {
            return Err(StateError::Version(version));
        }
        let role = Role::from_code(r.u8()?).ok_or_else(|| StateError::Corrupt("bad role".into()))?;
        let flags = r.u8()?;
        if flags & !(FLAG_POISONED | FLAG_SEMI_HONEST) != 0 {
            return Err(StateError::Corrupt("unknown flags".into()));
        }
        let sec = Security::new(r.u8()? as usize).map_err(|e| StateError::Corrupt(e.to_string()))?;
        let next_execution = r.u64()?;
        let circuits = r.u32()? as usize;
        let split = CircuitSplit::from_bits(unpack_bits(r.take(circuits.div_ceil(8))?, circuits));
        let key_blob = r.blob()?;
        let keys = if key_blob.is_empty() {
            None
        } else {
            Some(KeyRecords::decode(key_blob)?)
        };
        let mut wires = Vec::with_capacity(circuits);
        for _ in 0..circuits {
            let n = r.u32()? as usize;
            if n > r.remaining() {
                return Err(StateError::Corrupt("wire count exceeds file".into()));
            }
            let mut ws = Vec::with_capacity(n);
            for _ in 0..n {
                ws.push(match r.u8()? {
                    f if f == HAS0 | HAS1 => WireSave::Both(r.label(sec)?, r.label(sec)?),
                    SINGLE => WireSave::Single(r.label(sec)?),
                    0 => WireSave::Missing,
                    f => return Err(StateError::Corrupt(format!("bad wire flags {f:#x}"))),
                });
            }
            wires.push(ws);
        }
        r.finish()?;
        let state = SavedState {
            role,
            mode: if flags & FLAG_SEMI_HONEST != 0 {
                Mode::SemiHonest
            } else {
                Mode::Malicious
            },
            sec,
            next_execution,
            circuits,
            split,
            keys,
            wires,
            poisoned: flags & FLAG_POISONED != 0,
        };
        state.validate()?;
        Ok(state)
    }

    /// Writes atomically via a temporary file in the same directory.
    pub fn persist(&self, path: &Path) -> Result<(), StateError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.encode())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StateError> {
        Self::decode(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut_choose::CircuitKeyPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn cloud_state() -> SavedState {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let sec = Security::default();
        let split = CircuitSplit::select(5, &mut rng).unwrap();
        let keys = KeyRecords::Cloud(split.bits().iter().map(|&b| (b, sec.random_label(&mut rng))).collect());
        let wires = (0..5)
            .map(|i| {
                if split.is_check(i) {
                    vec![WireSave::Both(Label(1), Label(2)); 3]
                } else {
                    vec![
                        WireSave::Single(Label(3)),
                        WireSave::Missing,
                        WireSave::Single(Label(4)),
                    ]
                }
            })
            .collect();
        SavedState {
            role: Role::Cloud,
            mode: Mode::Malicious,
            sec,
            next_execution: 2,
            circuits: 5,
            split,
            keys: Some(keys),
            wires,
            poisoned: false,
        }
    }

    #[test]
    fn round_trip_and_truncation() {
        let s = cloud_state();
        let bytes = s.encode();
        assert_eq!(SavedState::decode(&bytes).unwrap(), s);
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(SavedState::decode(&bytes[..cut]).is_err());
        }
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(SavedState::decode(&v), Err(StateError::Version(_))));
    }

    #[test]
    fn generator_state_round_trips_through_file() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let sec = Security::default();
        let s = SavedState {
            role: Role::Generator,
            mode: Mode::Malicious,
            sec,
            next_execution: 1,
            circuits: 5,
            split: CircuitSplit::all_eval(5),
            keys: Some(KeyRecords::Generator(
                (0..5).map(|_| CircuitKeyPair::random(sec, &mut rng)).collect(),
            )),
            wires: vec![vec![WireSave::Both(Label(8), Label(9))]; 5],
            poisoned: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gen.pgcs");
        s.persist(&p).unwrap();
        assert_eq!(SavedState::load(&p).unwrap(), s);
    }

    #[test]
    fn inconsistent_records_rejected() {
        let mut s = cloud_state();
        let e = s.split.eval_indices()[0];
        s.wires[e][0] = WireSave::Both(Label(1), Label(2));
        assert!(SavedState::decode(&s.encode()).is_err());
    }
}
