use super::{Circuit, CircuitError, Op};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SimOutput {
    pub evl: Vec<bool>,
    pub gen: Vec<bool>,
    pub saved: Vec<bool>,
}

/// Reference evaluation of a circuit on plaintext bits.
pub fn simulate_plaintext(
    c: &Circuit,
    gen: &[bool],
    evl: &[bool],
    partial: &[bool],
) -> Result<SimOutput, CircuitError> {
    for (party, expected, actual) in [
        ("gen", c.gen_inputs, gen.len()),
        ("evl", c.evl_inputs, evl.len()),
        ("partial", c.partial_inputs, partial.len()),
    ] {
        if expected != actual {
            return Err(CircuitError::InputLength {
                party,
                expected,
                actual,
            });
        }
    }
    let values = wire_values(c, gen, evl, partial);
    let pick = |ws: &[u32]| ws.iter().map(|&w| values[w as usize]).collect();
    Ok(SimOutput {
        evl: pick(&c.evl_outputs),
        gen: pick(&c.gen_outputs),
        saved: pick(&c.saved_wires),
    })
}

/// Plaintext value of every wire.
pub(crate) fn wire_values(c: &Circuit, gen: &[bool], evl: &[bool], partial: &[bool]) -> Vec<bool> {
    let mut v = Vec::with_capacity(c.wire_count());
    v.extend_from_slice(gen);
    v.extend_from_slice(evl);
    v.extend_from_slice(partial);
    for g in &c.gates {
        let a = v[g.inputs[0] as usize];
        let out = match g.op {
            Op::And => a & v[g.inputs[1] as usize],
            Op::Xor => a ^ v[g.inputs[1] as usize],
            Op::Not => !a,
        };
        v.push(out);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    #[test]
    fn and_gate() {
        let c = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 AND 0 1\nout evl 2\n").unwrap();
        assert_eq!(simulate_plaintext(&c, &[true], &[true], &[]).unwrap().evl, vec![true]);
        assert_eq!(simulate_plaintext(&c, &[true], &[false], &[]).unwrap().evl, vec![false]);
        assert!(simulate_plaintext(&c, &[true], &[], &[]).is_err());
    }
}
