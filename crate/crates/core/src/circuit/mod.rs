//! Boolean circuit representation.
//!
//! Wire ids are dense: `0..gen_inputs` are generator inputs, followed by
//! evaluator inputs and then partial (reused) inputs. Gate `k` defines wire
//! `input_count() + k`.

mod augment;
mod builder;
mod parse;
pub mod programs;
mod sim;

pub use augment::{augment_for_protocol, toeplitz_tag, AugmentError, AugmentationSpec, AugmentedLayout};
pub use builder::{Bit, Builder};
pub use parse::{emit_circuit, parse_circuit, ParseError};
pub use programs::{build_program, ProgramError};
pub use sim::{simulate_plaintext, SimOutput};

use thiserror::Error;

pub type WireId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    And,
    Xor,
    Not,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Not => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::And => "AND",
            Op::Xor => "XOR",
            Op::Not => "NOT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub id: WireId,
    pub op: Op,
    /// Second entry is ignored for NOT.
    pub inputs: [WireId; 2],
}

impl Gate {
    pub fn inputs(&self) -> &[WireId] {
        &self.inputs[..self.op.arity()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Circuit {
    pub gen_inputs: usize,
    pub evl_inputs: usize,
    pub partial_inputs: usize,
    pub gates: Vec<Gate>,
    pub evl_outputs: Vec<WireId>,
    pub gen_outputs: Vec<WireId>,
    pub saved_wires: Vec<WireId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("gate {index} defines wire {found}, expected {expected}")]
    NonDense {
        index: usize,
        expected: WireId,
        found: WireId,
    },
    #[error("gate {gate} reads wire {wire} which is not defined before it")]
    NotTopological { gate: WireId, wire: WireId },
    #[error("{kind} references undefined wire {wire}")]
    UndefinedOutput { kind: &'static str, wire: WireId },
    #[error("input length mismatch for {party}: expected {expected}, got {actual}")]
    InputLength {
        party: &'static str,
        expected: usize,
        actual: usize,
    },
}

impl Circuit {
    pub fn input_count(&self) -> usize {
        self.gen_inputs + self.evl_inputs + self.partial_inputs
    }

    pub fn wire_count(&self) -> usize {
        self.input_count() + self.gates.len()
    }

    pub fn gen_input_wire(&self, i: usize) -> WireId {
        i as WireId
    }

    pub fn evl_input_wire(&self, i: usize) -> WireId {
        (self.gen_inputs + i) as WireId
    }

    pub fn partial_input_wire(&self, i: usize) -> WireId {
        (self.gen_inputs + self.evl_inputs + i) as WireId
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| g.op == Op::And).count()
    }

    /// Checks the dense-id and topological-order invariants.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.input_count();
        for (k, g) in self.gates.iter().enumerate() {
            let expected = (n + k) as WireId;
            if g.id != expected {
                return Err(CircuitError::NonDense {
                    index: k,
                    expected,
                    found: g.id,
                });
            }
            for &w in g.inputs() {
                if w >= g.id {
                    return Err(CircuitError::NotTopological { gate: g.id, wire: w });
                }
            }
        }
        let total = self.wire_count() as WireId;
        for (kind, list) in [
            ("evl output", &self.evl_outputs),
            ("gen output", &self.gen_outputs),
            ("saved wire", &self.saved_wires),
        ] {
            if let Some(&w) = list.iter().find(|&&w| w >= total) {
                return Err(CircuitError::UndefinedOutput { kind, wire: w });
            }
        }
        Ok(())
    }

    /// Digest of the canonical text form, used to check that parties agree.
    pub fn digest(&self) -> [u8; 32] {
        crate::crypto::hash_parts("circuit", &[emit_circuit(self).as_bytes()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_forward_reference() {
        let c = Circuit {
            gen_inputs: 1,
            evl_inputs: 1,
            gates: vec![Gate {
                id: 2,
                op: Op::And,
                inputs: [0, 2],
            }],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(CircuitError::NotTopological { .. })));
    }

    #[test]
    fn validate_rejects_unknown_output() {
        let c = Circuit {
            gen_inputs: 1,
            evl_outputs: vec![3],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
