//! Rewrites a program circuit into the form the protocol garbles.
//!
//! Input layout of the result:
//!
//! * generator: `[program inputs][output pad][MAC key][consistency mask]`
//! * evaluator: `[encoding_width shares per program input][output pad][MAC key]`
//! * partial: unchanged
//!
//! Each party's outputs become `(data || tag) ^ pad`, where `tag` is a
//! Toeplitz-matrix MAC of `data` under that party's key.

use thiserror::Error;

use super::{Circuit, Op, WireId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AugmentationSpec {
    pub tag_bits: usize,
    pub encoding_width: usize,
    pub pad_evl_bits: usize,
    pub pad_gen_bits: usize,
    pub mac_key_bits_evl: usize,
    pub mac_key_bits_gen: usize,
    pub consistency_bits: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("{what}: expected {expected} bits, spec has {actual}")]
    WidthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("encoding width must be at least 1")]
    ZeroEncoding,
}

fn tag_for(data: usize, tag_bits: usize) -> usize {
    if data == 0 {
        0
    } else {
        tag_bits
    }
}

fn key_for(data: usize, tag: usize) -> usize {
    if tag == 0 {
        0
    } else {
        tag + data - 1
    }
}

impl AugmentationSpec {
    /// The augmentation layout matching `c`'s output widths.
    pub fn for_circuit(c: &Circuit, encoding_width: usize, tag_bits: usize, consistency_bits: usize) -> Self {
        let de = c.evl_outputs.len();
        let dg = c.gen_outputs.len();
        let te = tag_for(de, tag_bits);
        let tg = tag_for(dg, tag_bits);
        let gen_total = c.gen_inputs + dg + tg + key_for(dg, tg);
        Self {
            tag_bits,
            encoding_width,
            pad_evl_bits: de + te,
            pad_gen_bits: dg + tg,
            mac_key_bits_evl: key_for(de, te),
            mac_key_bits_gen: key_for(dg, tg),
            consistency_bits: if gen_total > 0 { consistency_bits } else { 0 },
        }
    }

    fn check(&self, c: &Circuit) -> Result<(), AugmentError> {
        if self.encoding_width == 0 {
            return Err(AugmentError::ZeroEncoding);
        }
        let expected = Self::for_circuit(c, self.encoding_width, self.tag_bits, self.consistency_bits);
        for (what, e, a) in [
            ("evaluator pad", expected.pad_evl_bits, self.pad_evl_bits),
            ("generator pad", expected.pad_gen_bits, self.pad_gen_bits),
            ("evaluator MAC key", expected.mac_key_bits_evl, self.mac_key_bits_evl),
            ("generator MAC key", expected.mac_key_bits_gen, self.mac_key_bits_gen),
        ] {
            if e != a {
                return Err(AugmentError::WidthMismatch {
                    what,
                    expected: e,
                    actual: a,
                });
            }
        }
        Ok(())
    }
}

/// Where each logical input and output lives in an augmented circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentedLayout {
    pub spec: AugmentationSpec,
    pub program_gen_inputs: usize,
    pub program_evl_inputs: usize,
    pub data_evl: usize,
    pub data_gen: usize,
}

impl AugmentedLayout {
    pub fn tag_evl(&self) -> usize {
        self.spec.pad_evl_bits - self.data_evl
    }

    pub fn tag_gen(&self) -> usize {
        self.spec.pad_gen_bits - self.data_gen
    }

    pub fn gen_input_count(&self) -> usize {
        self.program_gen_inputs + self.spec.pad_gen_bits + self.spec.mac_key_bits_gen + self.spec.consistency_bits
    }

    pub fn evl_input_count(&self) -> usize {
        self.program_evl_inputs * self.spec.encoding_width + self.spec.pad_evl_bits + self.spec.mac_key_bits_evl
    }

    /// Concatenates generator input sections in circuit order.
    pub fn gen_inputs(&self, program: &[bool], pad: &[bool], key: &[bool], mask: &[bool]) -> Vec<bool> {
        assert_eq!(program.len(), self.program_gen_inputs);
        assert_eq!(pad.len(), self.spec.pad_gen_bits);
        assert_eq!(key.len(), self.spec.mac_key_bits_gen);
        assert_eq!(mask.len(), self.spec.consistency_bits);
        [program, pad, key, mask].concat()
    }

    /// Concatenates evaluator input sections in circuit order. `shares` holds
    /// `encoding_width` consecutive shares per program input bit.
    pub fn evl_inputs(&self, shares: &[bool], pad: &[bool], key: &[bool]) -> Vec<bool> {
        assert_eq!(shares.len(), self.program_evl_inputs * self.spec.encoding_width);
        assert_eq!(pad.len(), self.spec.pad_evl_bits);
        assert_eq!(key.len(), self.spec.mac_key_bits_evl);
        [shares, pad, key].concat()
    }
}

/// Toeplitz MAC: `tag[r] = XOR_c key[r - c + data.len() - 1] & data[c]`.
pub fn toeplitz_tag(key: &[bool], data: &[bool], tag_bits: usize) -> Vec<bool> {
    if data.is_empty() || tag_bits == 0 {
        return Vec::new();
    }
    let d = data.len();
    assert_eq!(key.len(), tag_bits + d - 1);
    (0..tag_bits)
        .map(|r| {
            data.iter()
                .enumerate()
                .fold(false, |acc, (c, &x)| acc ^ (x & key[r + d - 1 - c]))
        })
        .collect()
}

struct Raw {
    c: Circuit,
}

impl Raw {
    fn gate(&mut self, op: Op, a: WireId, b: WireId) -> WireId {
        let id = self.c.wire_count() as WireId;
        self.c.gates.push(super::Gate {
            id,
            op,
            inputs: [a, if op == Op::Not { 0 } else { b }],
        });
        id
    }

    fn xor_all(&mut self, ws: &[WireId]) -> Option<WireId> {
        let mut it = ws.iter().copied();
        let first = it.next()?;
        Some(it.fold(first, |acc, w| self.gate(Op::Xor, acc, w)))
    }

    /// Returns the output wires `(data || tag) ^ pad`.
    fn mac_and_pad(&mut self, data: &[WireId], key: &[WireId], pad: &[WireId], tag_bits: usize) -> Vec<WireId> {
        let d = data.len();
        let mut plain = data.to_vec();
        if tag_bits > 0 && d > 0 {
            for r in 0..tag_bits {
                let terms: Vec<WireId> = (0..d)
                    .map(|c| self.gate(Op::And, key[r + d - 1 - c], data[c]))
                    .collect();
                let t = self.xor_all(&terms).expect("non-empty data");
                plain.push(t);
            }
        }
        plain.iter().zip(pad).map(|(&w, &p)| self.gate(Op::Xor, w, p)).collect()
    }
}

pub fn augment_for_protocol(c: &Circuit, spec: &AugmentationSpec) -> Result<(Circuit, AugmentedLayout), AugmentError> {
    spec.check(c)?;
    let layout = AugmentedLayout {
        spec: *spec,
        program_gen_inputs: c.gen_inputs,
        program_evl_inputs: c.evl_inputs,
        data_evl: c.evl_outputs.len(),
        data_gen: c.gen_outputs.len(),
    };
    let mut raw = Raw {
        c: Circuit {
            gen_inputs: layout.gen_input_count(),
            evl_inputs: layout.evl_input_count(),
            partial_inputs: c.partial_inputs,
            ..Default::default()
        },
    };
    let gen_base = 0 as WireId;
    let evl_base = raw.c.gen_inputs as WireId;
    let partial_base = evl_base + raw.c.evl_inputs as WireId;
    let k = spec.encoding_width;

    let mut map: Vec<WireId> = Vec::with_capacity(c.wire_count());
    map.extend((0..c.gen_inputs as WireId).map(|i| gen_base + i));
    for j in 0..c.evl_inputs {
        let shares: Vec<WireId> = (0..k).map(|s| evl_base + (j * k + s) as WireId).collect();
        let w = raw.xor_all(&shares).expect("encoding width is positive");
        map.push(w);
    }
    map.extend((0..c.partial_inputs as WireId).map(|i| partial_base + i));
    for g in &c.gates {
        let a = map[g.inputs[0] as usize];
        let b = if g.op == Op::Not { 0 } else { map[g.inputs[1] as usize] };
        map.push(raw.gate(g.op, a, b));
    }

    let gen_pad: Vec<WireId> = (0..spec.pad_gen_bits)
        .map(|i| gen_base + (c.gen_inputs + i) as WireId)
        .collect();
    let gen_key: Vec<WireId> = (0..spec.mac_key_bits_gen)
        .map(|i| gen_base + (c.gen_inputs + spec.pad_gen_bits + i) as WireId)
        .collect();
    let evl_off = c.evl_inputs * k;
    let evl_pad: Vec<WireId> = (0..spec.pad_evl_bits)
        .map(|i| evl_base + (evl_off + i) as WireId)
        .collect();
    let evl_key: Vec<WireId> = (0..spec.mac_key_bits_evl)
        .map(|i| evl_base + (evl_off + spec.pad_evl_bits + i) as WireId)
        .collect();

    let evl_data: Vec<WireId> = c.evl_outputs.iter().map(|&w| map[w as usize]).collect();
    let gen_data: Vec<WireId> = c.gen_outputs.iter().map(|&w| map[w as usize]).collect();
    let evl_out = raw.mac_and_pad(&evl_data, &evl_key, &evl_pad, layout.tag_evl());
    let gen_out = raw.mac_and_pad(&gen_data, &gen_key, &gen_pad, layout.tag_gen());
    raw.c.evl_outputs = evl_out;
    raw.c.gen_outputs = gen_out;
    raw.c.saved_wires = c.saved_wires.iter().map(|&w| map[w as usize]).collect();
    debug_assert!(raw.c.validate().is_ok());
    Ok((raw.c, layout))
}
