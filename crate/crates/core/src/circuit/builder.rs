use super::{Circuit, Gate, Op, WireId};

/// A circuit value that is either a known constant or a wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bit {
    Const(bool),
    Wire(WireId),
}

/// Incremental circuit construction with constant folding.
pub struct Builder {
    c: Circuit,
}

impl Builder {
    pub fn new(gen_inputs: usize, evl_inputs: usize, partial_inputs: usize) -> Self {
        Self {
            c: Circuit {
                gen_inputs,
                evl_inputs,
                partial_inputs,
                ..Default::default()
            },
        }
    }

    pub fn gen_inputs(&self, start: usize, n: usize) -> Vec<Bit> {
        (start..start + n)
            .map(|i| Bit::Wire(self.c.gen_input_wire(i)))
            .collect()
    }

    pub fn evl_inputs(&self, start: usize, n: usize) -> Vec<Bit> {
        (start..start + n)
            .map(|i| Bit::Wire(self.c.evl_input_wire(i)))
            .collect()
    }

    pub fn partial_inputs(&self, start: usize, n: usize) -> Vec<Bit> {
        (start..start + n)
            .map(|i| Bit::Wire(self.c.partial_input_wire(i)))
            .collect()
    }

    pub fn gate(&mut self, op: Op, a: WireId, b: WireId) -> WireId {
        let id = self.c.wire_count() as WireId;
        self.c.gates.push(Gate {
            id,
            op,
            inputs: [a, if op == Op::Not { 0 } else { b }],
        });
        id
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x ^ y),
            (Bit::Const(false), w) | (w, Bit::Const(false)) => w,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => self.not(w),
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::Const(false),
            (Bit::Wire(x), Bit::Wire(y)) => Bit::Wire(self.gate(Op::Xor, x, y)),
        }
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x & y),
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::Const(false),
            (Bit::Const(true), w) | (w, Bit::Const(true)) => w,
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::Wire(x),
            (Bit::Wire(x), Bit::Wire(y)) => Bit::Wire(self.gate(Op::And, x, y)),
        }
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Const(x) => Bit::Const(!x),
            Bit::Wire(w) => Bit::Wire(self.gate(Op::Not, w, 0)),
        }
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `sel ? t : f`
    pub fn mux(&mut self, sel: Bit, t: Bit, f: Bit) -> Bit {
        let d = self.xor(t, f);
        let m = self.and(sel, d);
        self.xor(f, m)
    }

    pub fn mux_vec(&mut self, sel: Bit, t: &[Bit], f: &[Bit]) -> Vec<Bit> {
        t.iter().zip(f).map(|(&x, &y)| self.mux(sel, x, y)).collect()
    }

    pub fn and_vec(&mut self, sel: Bit, v: &[Bit]) -> Vec<Bit> {
        v.iter().map(|&x| self.and(sel, x)).collect()
    }

    pub fn xor_vec(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect()
    }

    pub fn equal_bit(&mut self, a: Bit, b: Bit) -> Bit {
        let d = self.xor(a, b);
        self.not(d)
    }

    pub fn equal(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut acc = Bit::Const(true);
        for (&x, &y) in a.iter().zip(b) {
            let e = self.equal_bit(x, y);
            acc = self.and(acc, e);
        }
        acc
    }

    pub fn equal_const(&mut self, a: &[Bit], k: u64) -> Bit {
        let consts: Vec<Bit> = (0..a.len()).map(|i| Bit::Const((k >> i) & 1 == 1)).collect();
        self.equal(a, &consts)
    }

    /// Little-endian addition modulo `2^len(a)`.
    pub fn add(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        let mut carry = Bit::Const(false);
        let mut out = Vec::with_capacity(a.len());
        for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
            let xc = self.xor(x, carry);
            out.push(self.xor(xc, y));
            if i + 1 < a.len() {
                let yc = self.xor(y, carry);
                let t = self.and(xc, yc);
                carry = self.xor(carry, t);
            }
        }
        out
    }

    pub fn increment(&mut self, a: &[Bit]) -> Vec<Bit> {
        let mut one = vec![Bit::Const(false); a.len()];
        if let Some(first) = one.first_mut() {
            *first = Bit::Const(true);
        }
        self.add(a, &one)
    }

    /// Unsigned `a > b` for little-endian vectors of equal length.
    pub fn greater_than(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut gt = Bit::Const(false);
        for (&x, &y) in a.iter().zip(b) {
            let xg = self.xor(x, gt);
            let yg = self.xor(y, gt);
            let t = self.and(xg, yg);
            gt = self.xor(x, t);
        }
        gt
    }

    pub fn max(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        let gt = self.greater_than(a, b);
        self.mux_vec(gt, a, b)
    }

    /// Turns a bit into a real wire. Constants become fresh `AND(w, NOT w)`
    /// gates on wire 0 so every materialized constant has its own label.
    pub fn materialize(&mut self, b: Bit) -> WireId {
        match b {
            Bit::Wire(w) => w,
            Bit::Const(v) => {
                assert!(self.c.input_count() > 0, "constants need at least one input wire");
                let n = self.gate(Op::Not, 0, 0);
                let z = self.gate(Op::And, 0, n);
                if v {
                    self.gate(Op::Not, z, 0)
                } else {
                    z
                }
            }
        }
    }

    pub fn output_evl(&mut self, bits: &[Bit]) {
        for &b in bits {
            let w = self.materialize(b);
            self.c.evl_outputs.push(w);
        }
    }

    pub fn output_gen(&mut self, bits: &[Bit]) {
        for &b in bits {
            let w = self.materialize(b);
            self.c.gen_outputs.push(w);
        }
    }

    pub fn save(&mut self, bits: &[Bit]) {
        for &b in bits {
            let w = self.materialize(b);
            self.c.saved_wires.push(w);
        }
    }

    pub fn finish(self) -> Circuit {
        debug_assert!(self.c.validate().is_ok());
        self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::simulate_plaintext;
    use crate::util::{bits_of, value_of};

    #[test]
    fn adder_and_comparator_exhaustive() {
        let mut b = Builder::new(3, 3, 0);
        let x = b.gen_inputs(0, 3);
        let y = b.evl_inputs(0, 3);
        let s = b.add(&x, &y);
        let g = b.greater_than(&x, &y);
        let e = b.equal(&x, &y);
        b.output_evl(&s);
        b.output_evl(&[g, e]);
        let c = b.finish();
        for a in 0..8u64 {
            for d in 0..8u64 {
                let out = simulate_plaintext(&c, &bits_of(a, 3), &bits_of(d, 3), &[]).unwrap();
                assert_eq!(value_of(&out.evl[..3]), (a + d) % 8);
                assert_eq!(out.evl[3], a > d);
                assert_eq!(out.evl[4], a == d);
            }
        }
    }

    #[test]
    fn constants_materialize_to_distinct_wires() {
        let mut b = Builder::new(0, 1, 0);
        b.save(&[Bit::Const(false), Bit::Const(false), Bit::Const(true)]);
        let c = b.finish();
        assert_eq!(c.saved_wires.len(), 3);
        assert_ne!(c.saved_wires[0], c.saved_wires[1]);
        let out = simulate_plaintext(&c, &[], &[true], &[]).unwrap();
        assert_eq!(out.saved, vec![false, false, true]);
    }
}
