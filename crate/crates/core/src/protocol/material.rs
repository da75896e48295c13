//! Everything a circuit seed determines. The generator builds these for all
//! circuits; the cloud rebuilds them for check circuits and compares.

use std::collections::HashMap;

use rand::Rng;

use super::Prepared;
use crate::circuit::WireId;
use crate::crypto::{derived_rng, prf_domain, Prf};
use crate::garble::{derive_context, garble_circuit, GarbledGate, GarblingContext};
use crate::label::{CircuitSeed, Label, Security};
use crate::ot::{commit_label, Commitment};
use crate::partial::{build_gate, GateKind, OneWireGate, PartialError};

pub(crate) struct Instance {
    pub seed: CircuitSeed,
    pub ctx: GarblingContext,
}

impl Instance {
    pub fn new(sec: Security, seed: CircuitSeed, prep: &Prepared) -> Self {
        let ctx = derive_context(sec, seed, &prep.circuit, &HashMap::new()).expect("no injected labels");
        Self { seed, ctx }
    }

    pub fn gen_labels(&self, prep: &Prepared, bits: &[bool]) -> Vec<Label> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| self.ctx.label(prep.circuit.gen_input_wire(i), b))
            .collect()
    }

    pub fn evl_pair(&self, prep: &Prepared, j: usize) -> (Label, Label) {
        self.ctx.pair(prep.circuit.evl_input_wire(j))
    }

    pub fn partial_pairs(&self, prep: &Prepared) -> Vec<(Label, Label)> {
        (0..prep.circuit.partial_inputs)
            .map(|j| self.ctx.pair(prep.circuit.partial_input_wire(j)))
            .collect()
    }

    pub fn saved_pairs(&self, prep: &Prepared) -> Vec<(Label, Label)> {
        prep.circuit.saved_wires.iter().map(|&w| self.ctx.pair(w)).collect()
    }

    /// Gates mapping hashed evaluator keys `ts[j]` onto input labels.
    pub fn translation_gates(&self, prep: &Prepared, ts: &[(Label, Label)]) -> Result<Vec<OneWireGate>, PartialError> {
        ts.iter()
            .enumerate()
            .map(|(j, &t)| {
                build_gate(
                    self.ctx.sec,
                    GateKind::Translate,
                    self.seed,
                    j,
                    t,
                    self.evl_pair(prep, j),
                )
            })
            .collect()
    }

    /// Commitment pair for evaluator input `j`, in seed-determined order.
    pub fn commitments(&self, prep: &Prepared, j: usize, openings: (&[u8; 16], &[u8; 16])) -> [Commitment; 2] {
        let (l0, l1) = self.evl_pair(prep, j);
        let c0 = commit_label(l0, openings.0);
        let c1 = commit_label(l1, openings.1);
        if commit_swap(self.ctx.sec, self.seed, j) {
            [c1, c0]
        } else {
            [c0, c1]
        }
    }

    pub fn garbled_gates(&self, prep: &Prepared) -> Vec<GarbledGate> {
        garble_circuit(&self.ctx, &prep.circuit)
    }

    /// Decoding bits of the evaluator outputs followed by the generator's.
    pub fn output_decoding(&self, prep: &Prepared) -> Vec<bool> {
        output_wires(prep).map(|w| self.ctx.decoding_bit(w)).collect()
    }

    /// Decoding bit of each row of the consistency digest.
    pub fn consistency_decoding(&self, prep: &Prepared, matrix: &[Vec<bool>]) -> Vec<bool> {
        let pp: Vec<bool> = (0..prep.circuit.gen_inputs)
            .map(|i| self.ctx.decoding_bit(prep.circuit.gen_input_wire(i)))
            .collect();
        digest_bits(prep, matrix, &pp)
    }
}

pub(crate) fn output_wires(prep: &Prepared) -> impl Iterator<Item = WireId> + '_ {
    prep.circuit
        .evl_outputs
        .iter()
        .chain(&prep.circuit.gen_outputs)
        .copied()
}

fn commit_swap(sec: Security, seed: CircuitSeed, j: usize) -> bool {
    Prf::new(sec, seed).block(prf_domain::COMMIT_PERM, j as u64) & 1 == 1
}

/// Rows over the generator inputs that precede the consistency mask.
pub fn consistency_matrix(h: &[u8; 32], rows: usize, cols: usize) -> Vec<Vec<bool>> {
    let mut rng = derived_rng("consistency matrix", &[h]);
    (0..rows).map(|_| (0..cols).map(|_| rng.gen()).collect()).collect()
}

/// `M * x ^ mask`, where `values` covers every generator input and the
/// last `rows` of them are the mask.
pub(crate) fn digest_bits(prep: &Prepared, matrix: &[Vec<bool>], values: &[bool]) -> Vec<bool> {
    let rows = matrix.len();
    let n = prep.circuit.gen_inputs;
    let cols = n - rows;
    matrix
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let acc = (0..cols).fold(false, |a, c| a ^ (row[c] & values[c]));
            acc ^ values[cols + r]
        })
        .collect()
}

/// Strict majority of each bit; `Err(bit)` on a tie.
pub fn majority(outputs: &[Vec<bool>]) -> Result<Vec<bool>, usize> {
    let n = outputs.first().map_or(0, Vec::len);
    (0..n)
        .map(|b| {
            let ones = outputs.iter().filter(|o| o[b]).count();
            let zeros = outputs.len() - ones;
            match ones.cmp(&zeros) {
                std::cmp::Ordering::Greater => Ok(true),
                std::cmp::Ordering::Less => Ok(false),
                std::cmp::Ordering::Equal => Err(b),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_cases() {
        assert_eq!(majority(&[vec![true], vec![true], vec![false]]), Ok(vec![true]));
        assert_eq!(majority(&vec![vec![false]; 5]), Ok(vec![false]));
        assert_eq!(majority(&[vec![true, true], vec![true, false]]), Err(1));
    }
}
