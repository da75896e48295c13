//! Partial input gates: one-wire garbled gates that map a label saved by an
//! earlier execution onto an input label of a fresh circuit.
//!
//! The same construction, keyed by outsourced-OT seeds instead of saved
//! labels, translates evaluator inputs into free-XOR labels.

use rand::Rng;
use thiserror::Error;

use crate::crypto::{derived_rng, domain, label_bytes, prf_domain, wire_hash, Prf};
use crate::label::{CircuitSeed, Label, Security};
use crate::wire::{Reader, WireError, Writer};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartialError {
    #[error("hash collision on wire {0}: both values hash alike")]
    HashCollision(usize),
    #[error("expected {expected} wires, got {actual}")]
    Count { expected: usize, actual: usize },
}

/// Selects the permutation bit of a one-wire gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    Partial,
    Translate,
}

impl GateKind {
    fn name(self) -> &'static str {
        match self {
            GateKind::Partial => "partial pp location",
            GateKind::Translate => "translate pp location",
        }
    }
}

/// Two rows indexed by the bit of the hashed key at `loc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneWireGate {
    pub loc: u8,
    pub rows: [Label; 2],
}

impl OneWireGate {
    pub fn encode(&self, sec: Security, w: &mut Writer) {
        w.u8(self.loc).label(sec, self.rows[0]).label(sec, self.rows[1]);
    }

    pub fn decode(sec: Security, r: &mut Reader<'_>) -> Result<Self, WireError> {
        let loc = r.u8()?;
        if loc as usize >= sec.bits() {
            return Err(WireError::Invalid(format!("pp location {loc} beyond label width")));
        }
        Ok(Self {
            loc,
            rows: [r.label(sec)?, r.label(sec)?],
        })
    }

    pub fn encoded_len(sec: Security) -> usize {
        1 + 2 * sec.label_bytes()
    }

    /// Recovers the target label from one hashed key.
    pub fn evaluate(&self, t: Label) -> Label {
        self.rows[t.bit(self.loc as usize) as usize] ^ t
    }
}

/// First position, in a permutation of `0..K` drawn from `(seed, wire)`,
/// where `t0` and `t1` differ.
pub fn set_pp_bit_gen(
    sec: Security,
    kind: GateKind,
    seed: CircuitSeed,
    wire: usize,
    t0: Label,
    t1: Label,
) -> Result<u8, PartialError> {
    let diff = t0 ^ t1;
    if diff.is_zero() {
        return Err(PartialError::HashCollision(wire));
    }
    let mut rng = derived_rng(kind.name(), &[&label_bytes(seed.0), &(wire as u64).to_be_bytes()]);
    let mut order: Vec<u8> = (0..sec.bits() as u8).collect();
    for k in 0..order.len() {
        let pick = rng.gen_range(k..order.len());
        order.swap(k, pick);
        if diff.bit(order[k] as usize) {
            return Ok(order[k]);
        }
    }
    unreachable!("labels differ at some bit below K")
}

/// Builds the gate mapping key `t_b` to `targets_b`.
pub fn build_gate(
    sec: Security,
    kind: GateKind,
    seed: CircuitSeed,
    wire: usize,
    t: (Label, Label),
    targets: (Label, Label),
) -> Result<OneWireGate, PartialError> {
    let loc = set_pp_bit_gen(sec, kind, seed, wire, t.0, t.1)?;
    let mut rows = [Label::ZERO; 2];
    rows[t.0.bit(loc as usize) as usize] = targets.0 ^ t.0;
    rows[t.1.bit(loc as usize) as usize] = targets.1 ^ t.1;
    Ok(OneWireGate { loc, rows })
}

/// Per-circuit transformation value R_i.
pub fn transformation_value(sec: Security, seed: CircuitSeed) -> Label {
    Prf::new(sec, seed).label(prf_domain::R_VALUE, 0)
}

/// Hashed key for a saved label under transformation value `r`.
pub fn partial_key(sec: Security, pout: Label, r: Label, circuit: usize, wire: usize) -> Label {
    wire_hash(sec, domain::PARTIAL, pout ^ r, circuit as u32, wire as u64)
}

/// Partial input gates of one circuit. `pouts[j]` are the saved label pair
/// of wire `j`; `gins[j]` the fresh input labels it must map to.
pub fn generate_partial_gates(
    sec: Security,
    seed: CircuitSeed,
    circuit: usize,
    r: Label,
    pouts: &[(Label, Label)],
    gins: &[(Label, Label)],
) -> Result<Vec<OneWireGate>, PartialError> {
    if pouts.len() != gins.len() {
        return Err(PartialError::Count {
            expected: gins.len(),
            actual: pouts.len(),
        });
    }
    pouts
        .iter()
        .zip(gins)
        .enumerate()
        .map(|(j, (p, g))| {
            let t = (
                partial_key(sec, p.0, r, circuit, j),
                partial_key(sec, p.1, r, circuit, j),
            );
            build_gate(sec, GateKind::Partial, seed, j, t, *g)
        })
        .collect()
}

/// Outcome of regenerating a check circuit's partial gates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartialCheck {
    Valid,
    WrongTransform,
    WrongGate(usize),
}

/// Regenerates the gates of a check circuit from its seed and both saved
/// labels of every wire, and compares them with what was received.
pub fn check_partial_gates(
    sec: Security,
    seed: CircuitSeed,
    circuit: usize,
    received_r: Label,
    pouts: &[(Label, Label)],
    gins: &[(Label, Label)],
    received: &[OneWireGate],
) -> Result<PartialCheck, PartialError> {
    let r = transformation_value(sec, seed);
    if r != received_r {
        return Ok(PartialCheck::WrongTransform);
    }
    if received.len() != pouts.len() {
        return Ok(PartialCheck::WrongGate(received.len().min(pouts.len())));
    }
    let expected = generate_partial_gates(sec, seed, circuit, r, pouts, gins)?;
    Ok(expected
        .iter()
        .zip(received)
        .position(|(a, b)| a != b)
        .map_or(PartialCheck::Valid, PartialCheck::WrongGate))
}

pub fn evaluate_partial_gate(
    sec: Security,
    gate: &OneWireGate,
    r: Label,
    pout: Label,
    circuit: usize,
    wire: usize,
) -> Label {
    gate.evaluate(partial_key(sec, pout, r, circuit, wire))
}

/// Messages of the semi-honest remap for one wire, indexed by the
/// permutation bit of the saved label.
pub fn semi_honest_messages(prev: (Label, Label), next: (Label, Label)) -> [Label; 2] {
    let mut m = [Label::ZERO; 2];
    m[prev.0.pp() as usize] = prev.0 ^ next.0;
    m[prev.1.pp() as usize] = prev.1 ^ next.1;
    m
}

pub fn semi_honest_remap(w_prev: Label, msgs: &[Label; 2]) -> Label {
    w_prev ^ msgs[w_prev.pp() as usize]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sec() -> Security {
        Security::default()
    }

    #[test]
    fn location_is_forced_by_single_difference() {
        let seed = CircuitSeed(Label(99));
        for wire in 0..20 {
            let loc = set_pp_bit_gen(sec(), GateKind::Partial, seed, wire, Label(0), Label(1 << 5)).unwrap();
            assert_eq!(loc, 5);
        }
        assert_eq!(
            set_pp_bit_gen(sec(), GateKind::Partial, seed, 3, Label(7), Label(7)),
            Err(PartialError::HashCollision(3))
        );
    }

    #[test]
    fn gates_map_both_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let s = sec();
        let seed = CircuitSeed(s.random_label(&mut rng));
        let r = transformation_value(s, seed);
        let delta_prev = Label(s.random_label(&mut rng).0 | 1);
        let delta_new = Label(s.random_label(&mut rng).0 | 1);
        let pouts: Vec<_> = (0..16)
            .map(|_| {
                let l = s.random_label(&mut rng);
                (l, l ^ delta_prev)
            })
            .collect();
        let gins: Vec<_> = (0..16)
            .map(|_| {
                let l = s.random_label(&mut rng);
                (l, l ^ delta_new)
            })
            .collect();
        let gates = generate_partial_gates(s, seed, 2, r, &pouts, &gins).unwrap();
        for (j, g) in gates.iter().enumerate() {
            assert_eq!(evaluate_partial_gate(s, g, r, pouts[j].0, 2, j), gins[j].0);
            assert_eq!(evaluate_partial_gate(s, g, r, pouts[j].1, 2, j), gins[j].1);
        }
        assert_eq!(
            check_partial_gates(s, seed, 2, r, &pouts, &gins, &gates).unwrap(),
            PartialCheck::Valid
        );
        let mut bad = gates.clone();
        bad[9].rows[1].0 ^= 1;
        assert_eq!(
            check_partial_gates(s, seed, 2, r, &pouts, &gins, &bad).unwrap(),
            PartialCheck::WrongGate(9)
        );
        assert_eq!(
            check_partial_gates(s, seed, 2, r ^ Label(2), &pouts, &gins, &gates).unwrap(),
            PartialCheck::WrongTransform
        );
    }

    #[test]
    fn semi_honest_remap_selects_matching_message() {
        let prev = (Label(0b1010), Label(0b0101));
        let next = (Label(0b1110_0000), Label(0b0001_1111));
        let m = semi_honest_messages(prev, next);
        assert_eq!(semi_honest_remap(prev.0, &m), next.0);
        assert_eq!(semi_honest_remap(prev.1, &m), next.1);
    }

    #[test]
    fn gate_encoding_round_trip() {
        let s = sec();
        let g = OneWireGate {
            loc: 17,
            rows: [Label(5), Label(1 << 70)],
        };
        let mut w = Writer::new();
        g.encode(s, &mut w);
        let bytes = w.finish();
        assert_eq!(bytes.len(), OneWireGate::encoded_len(s));
        let mut r = Reader::new(&bytes);
        assert_eq!(OneWireGate::decode(s, &mut r).unwrap(), g);
    }
}
