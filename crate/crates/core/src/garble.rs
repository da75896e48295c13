//! Free-XOR garbling with point-and-permute rows.

use std::collections::HashMap;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, Op, WireId};
use crate::crypto::{gate_hash, prf_domain, Prf};
use crate::label::{CircuitKey, CircuitSeed, Label, Security};
use crate::wire::{Reader, WireError, Writer};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GarbleError {
    #[error("injected labels for wire {0} do not differ by the circuit key")]
    FreeXorViolation(WireId),
    #[error("injected label for wire {0}, which is not an input")]
    NotAnInput(WireId),
    #[error("gate {0} decrypted to an invalid row")]
    CorruptGate(WireId),
    #[error("expected garbled gate {expected}, got {found}")]
    GateOrder { expected: WireId, found: WireId },
    #[error("gate {gate} has {rows} rows, expected {expected}")]
    RowCount { gate: WireId, rows: usize, expected: usize },
    #[error("expected {expected} garbled gates, got {found}")]
    GateCount { expected: usize, found: usize },
    #[error("expected {expected} input labels, got {found}")]
    InputCount { expected: usize, found: usize },
}

/// All zero-labels of one circuit instance plus its free-XOR offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarblingContext {
    pub sec: Security,
    pub seed: CircuitSeed,
    pub delta: CircuitKey,
    labels0: Vec<Label>,
}

impl GarblingContext {
    pub fn label0(&self, w: WireId) -> Label {
        self.labels0[w as usize]
    }

    pub fn label(&self, w: WireId, bit: bool) -> Label {
        self.labels0[w as usize].select(self.delta.label(), bit)
    }

    pub fn pair(&self, w: WireId) -> (Label, Label) {
        let l0 = self.label0(w);
        (l0, l0 ^ self.delta.label())
    }

    /// Point-and-permute bit of the 0-label; XOR with a held label's pp bit
    /// gives the plaintext value.
    pub fn decoding_bit(&self, w: WireId) -> bool {
        self.label0(w).pp()
    }

    pub fn wire_count(&self) -> usize {
        self.labels0.len()
    }
}

/// Derives every label of `c` from `seed`. Input wires listed in `injected`
/// take the given pair instead; the pair must respect the circuit key.
pub fn derive_context(
    sec: Security,
    seed: CircuitSeed,
    c: &Circuit,
    injected: &HashMap<WireId, (Label, Label)>,
) -> Result<GarblingContext, GarbleError> {
    let prf = Prf::new(sec, seed);
    let delta = CircuitKey::from_raw(sec, prf.block(prf_domain::DELTA, 0));
    let d = delta.label();
    let n = c.input_count();
    let mut labels0 = Vec::with_capacity(c.wire_count());
    for w in 0..n as WireId {
        labels0.push(prf.label(prf_domain::WIRE, w as u64));
    }
    for (&w, &(l0, l1)) in injected {
        if w as usize >= n {
            return Err(GarbleError::NotAnInput(w));
        }
        if l0 ^ l1 != d {
            return Err(GarbleError::FreeXorViolation(w));
        }
        labels0[w as usize] = l0;
    }
    for g in &c.gates {
        let a = labels0[g.inputs[0] as usize];
        let out = match g.op {
            Op::And => prf.label(prf_domain::WIRE, g.id as u64),
            Op::Xor => a ^ labels0[g.inputs[1] as usize],
            Op::Not => a ^ d,
        };
        labels0.push(out);
    }
    Ok(GarblingContext {
        sec,
        seed,
        delta,
        labels0,
    })
}

/// Garbled table of one gate. Only AND gates carry rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledGate {
    pub gate_id: WireId,
    pub rows: Vec<u128>,
}

impl GarbledGate {
    pub fn encode(&self, sec: Security, w: &mut Writer) {
        w.u32(self.gate_id).u8(self.rows.len() as u8);
        for r in &self.rows {
            w.bytes(&r.to_le_bytes()[..sec.row_bytes()]);
        }
    }

    pub fn decode(sec: Security, r: &mut Reader<'_>) -> Result<Self, WireError> {
        let gate_id = r.u32()?;
        let n = r.u8()? as usize;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let b = r.take(sec.row_bytes())?;
            let mut buf = [0u8; 16];
            buf[..b.len()].copy_from_slice(b);
            let v = u128::from_le_bytes(buf);
            if v & !sec.row_mask() != 0 {
                return Err(WireError::Invalid(format!("row of gate {gate_id} exceeds row width")));
            }
            rows.push(v);
        }
        Ok(Self { gate_id, rows })
    }

    pub fn encoded_len(&self, sec: Security) -> usize {
        5 + self.rows.len() * sec.row_bytes()
    }
}

pub fn row_count(op: Op) -> usize {
    match op {
        Op::And => 4,
        Op::Xor | Op::Not => 0,
    }
}

pub fn garble_gate(ctx: &GarblingContext, gate: &Gate) -> GarbledGate {
    if gate.op != Op::And {
        return GarbledGate {
            gate_id: gate.id,
            rows: Vec::new(),
        };
    }
    let sec = ctx.sec;
    let mut rows = vec![0u128; 4];
    for a in [false, true] {
        for b in [false, true] {
            let la = ctx.label(gate.inputs[0], a);
            let lb = ctx.label(gate.inputs[1], b);
            let out = ctx.label(gate.id, a & b);
            let idx = (la.pp() as usize) * 2 + lb.pp() as usize;
            rows[idx] = (gate_hash(la, lb, gate.id) ^ out.0) & sec.row_mask();
        }
    }
    GarbledGate { gate_id: gate.id, rows }
}

/// Garbled tables for the AND gates of `c`, in gate order.
pub fn garble_circuit(ctx: &GarblingContext, c: &Circuit) -> Vec<GarbledGate> {
    c.gates
        .iter()
        .filter(|g| g.op == Op::And)
        .map(|g| garble_gate(ctx, g))
        .collect()
}

pub fn evaluate_gate(sec: Security, gg: &GarbledGate, a: Label, b: Label) -> Result<Label, GarbleError> {
    if gg.rows.len() != 4 {
        return Err(GarbleError::RowCount {
            gate: gg.gate_id,
            rows: gg.rows.len(),
            expected: 4,
        });
    }
    let idx = (a.pp() as usize) * 2 + b.pp() as usize;
    let v = (gate_hash(a, b, gg.gate_id) ^ gg.rows[idx]) & sec.row_mask();
    if v >> sec.bits() != 0 {
        return Err(GarbleError::CorruptGate(gg.gate_id));
    }
    Ok(Label(v))
}

/// Evaluates a whole circuit from one label per input wire. Returns the
/// label of every wire.
pub fn evaluate_circuit(
    sec: Security,
    c: &Circuit,
    gates: &[GarbledGate],
    inputs: &[Label],
) -> Result<Vec<Label>, GarbleError> {
    if inputs.len() != c.input_count() {
        return Err(GarbleError::InputCount {
            expected: c.input_count(),
            found: inputs.len(),
        });
    }
    let and_count = c.and_count();
    if gates.len() != and_count {
        return Err(GarbleError::GateCount {
            expected: and_count,
            found: gates.len(),
        });
    }
    let mut labels = Vec::with_capacity(c.wire_count());
    labels.extend_from_slice(inputs);
    let mut next = gates.iter();
    for g in &c.gates {
        let a = labels[g.inputs[0] as usize];
        let out = match g.op {
            Op::Xor => a ^ labels[g.inputs[1] as usize],
            Op::Not => a,
            Op::And => {
                let gg = next.next().expect("gate count checked");
                if gg.gate_id != g.id {
                    return Err(GarbleError::GateOrder {
                        expected: g.id,
                        found: gg.gate_id,
                    });
                }
                evaluate_gate(sec, gg, a, labels[g.inputs[1] as usize])?
            }
        };
        labels.push(out);
    }
    Ok(labels)
}

/// Byte-level comparison of a regenerated gate with a received one.
pub fn verify_gate(expected: &GarbledGate, received: &GarbledGate) -> bool {
    expected == received
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn and_circuit() -> Circuit {
        parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 AND 0 1\ngate 3 XOR 0 1\ngate 4 NOT 2\nout evl 2 3 4\n")
            .unwrap()
    }

    #[test]
    fn deterministic_and_free_xor() {
        let sec = Security::default();
        let c = and_circuit();
        let a = derive_context(sec, CircuitSeed(Label(9)), &c, &HashMap::new()).unwrap();
        let b = derive_context(sec, CircuitSeed(Label(9)), &c, &HashMap::new()).unwrap();
        assert_eq!(a, b);
        for w in 0..c.wire_count() as WireId {
            let (l0, l1) = a.pair(w);
            assert_eq!(l0 ^ l1, a.delta.label());
            assert_ne!(l0.pp(), l1.pp());
        }
        assert_eq!(garble_circuit(&a, &c), garble_circuit(&b, &c));
    }

    #[test]
    fn distinct_seeds_give_distinct_keys() {
        let sec = Security::default();
        let c = and_circuit();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let ctx = derive_context(sec, CircuitSeed::random(sec, &mut rng), &c, &HashMap::new()).unwrap();
            assert!(seen.insert(ctx.delta.label()));
        }
    }

    #[test]
    fn and_gate_all_combinations() {
        let sec = Security::new(63).unwrap();
        let c = and_circuit();
        let ctx = derive_context(sec, CircuitSeed(Label(1)), &c, &HashMap::new()).unwrap();
        let gg = garble_gate(&ctx, &c.gates[0]);
        assert_eq!(gg.rows.len(), 4);
        for x in [false, true] {
            for y in [false, true] {
                let out = evaluate_gate(sec, &gg, ctx.label(0, x), ctx.label(1, y)).unwrap();
                assert_eq!(out, ctx.label(2, x & y));
            }
        }
        assert!(garble_gate(&ctx, &c.gates[1]).rows.is_empty());
        assert!(garble_gate(&ctx, &c.gates[2]).rows.is_empty());
    }

    #[test]
    fn flipped_row_is_detected() {
        let sec = Security::default();
        let c = and_circuit();
        let ctx = derive_context(sec, CircuitSeed(Label(5)), &c, &HashMap::new()).unwrap();
        let mut gg = garble_gate(&ctx, &c.gates[0]);
        let (la, lb) = (ctx.label(0, true), ctx.label(1, false));
        let idx = la.pp() as usize * 2 + lb.pp() as usize;
        gg.rows[idx] ^= 1 << (sec.bits() + 3);
        assert_eq!(evaluate_gate(sec, &gg, la, lb), Err(GarbleError::CorruptGate(2)));
    }

    #[test]
    fn injected_labels_checked() {
        let sec = Security::default();
        let c = and_circuit();
        let ctx = derive_context(sec, CircuitSeed(Label(5)), &c, &HashMap::new()).unwrap();
        let d = ctx.delta.label();
        let good = HashMap::from([(1, (Label(6), Label(6) ^ d))]);
        let injected = derive_context(sec, CircuitSeed(Label(5)), &c, &good).unwrap();
        assert_eq!(injected.label0(1), Label(6));
        let bad = HashMap::from([(1, (Label(6), Label(7)))]);
        assert_eq!(
            derive_context(sec, CircuitSeed(Label(5)), &c, &bad),
            Err(GarbleError::FreeXorViolation(1))
        );
        let not_input = HashMap::from([(3, (Label(6), Label(6) ^ d))]);
        assert!(derive_context(sec, CircuitSeed(Label(5)), &c, &not_input).is_err());
    }

    #[test]
    fn encoding_round_trip() {
        let sec = Security::new(63).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let gg = GarbledGate {
            gate_id: 77,
            rows: (0..4).map(|_| rng.gen::<u128>() & sec.row_mask()).collect(),
        };
        let mut w = Writer::new();
        gg.encode(sec, &mut w);
        let buf = w.finish();
        assert_eq!(buf.len(), gg.encoded_len(sec));
        assert_eq!(&buf[..5], &[0, 0, 0, 77, 4]);
        let back = GarbledGate::decode(sec, &mut Reader::new(&buf)).unwrap();
        assert!(verify_gate(&gg, &back));
        let mut swapped = gg.clone();
        swapped.rows.swap(0, 1);
        assert!(!verify_gate(&gg, &swapped));
    }
}
