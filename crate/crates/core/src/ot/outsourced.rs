//! Outsourced oblivious transfer: the cloud learns one 16-byte seed per
//! evaluator input bit, the evaluator learns only a random key, and the
//! generator learns nothing.

use rand::{CryptoRng, Rng, RngCore};

use super::{msg, OtProvider};
use crate::abort::{Abort, AbortCause};
use crate::channel::Channel;
use crate::crypto::{hash_to_label, keystream, label_bytes, xor_in_place};
use crate::label::{Label, Security};
use crate::wire::{Reader, Writer};

pub const OOT_KEY_BYTES: usize = 16;

pub type OotSeed = [u8; 16];

/// Evaluator input after XOR-share encoding: `width` random shares per bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInput {
    pub shares: Vec<bool>,
    pub true_bits: Vec<bool>,
    pub width: usize,
}

impl EncodedInput {
    pub fn decode(&self) -> Vec<bool> {
        self.shares
            .chunks(self.width)
            .map(|c| c.iter().fold(false, |a, &b| a ^ b))
            .collect()
    }
}

pub fn encode_input<R: Rng>(bits: &[bool], width: usize, rng: &mut R) -> EncodedInput {
    assert!(width >= 1);
    let mut shares = Vec::with_capacity(bits.len() * width);
    for &b in bits {
        let mut acc = b;
        for _ in 1..width {
            let s: bool = rng.gen();
            acc ^= s;
            shares.push(s);
        }
        shares.push(acc);
    }
    EncodedInput {
        shares,
        true_bits: bits.to_vec(),
        width,
    }
}

/// Label-sized value the cloud derives from a seed for circuit input key `ikey`.
pub fn derive_eval_input_label(sec: Security, ikey: Label, seed: &OotSeed, wire: u32) -> Label {
    hash_to_label(sec, "evl input", &[&label_bytes(ikey), seed, &wire.to_be_bytes()])
}

const OOT_LABEL: &str = "oot";

fn pad(key: &[u8], len: usize) -> Vec<u8> {
    keystream("oot pad", key, len)
}

fn malformed(ch: &Channel, phase: u8, what: String) -> Abort {
    Abort::new(phase, ch.me(), AbortCause::Malformed(format!("outsourced OT: {what}")))
}

/// Generator side. `seeds[j]` holds the seeds for bit 0 and bit 1 of wire `j`.
pub fn oot_generator<R: RngCore + CryptoRng>(
    evl: &mut Channel,
    cloud: &mut Channel,
    phase: u8,
    ot: &OtProvider,
    seeds: &[(OotSeed, OotSeed)],
    rng: &mut R,
) -> Result<(), Abort> {
    let mut pairs = Vec::with_capacity(seeds.len());
    let mut w = Writer::new();
    w.u32(seeds.len() as u32);
    for (s0, s1) in seeds {
        let mut keys = [[0u8; OOT_KEY_BYTES]; 2];
        rng.fill_bytes(&mut keys[0]);
        rng.fill_bytes(&mut keys[1]);
        let flip: bool = rng.gen();
        let msg_for = |b: bool| {
            let c = b ^ flip;
            let mut m = keys[c as usize].to_vec();
            m.push(c as u8);
            m
        };
        pairs.push((msg_for(false), msg_for(true)));
        for c in [false, true] {
            let mut ct = if c ^ flip { *s1 } else { *s0 };
            xor_in_place(&mut ct, &pad(&keys[c as usize], 16));
            w.bytes(&ct);
        }
    }
    ot.send(evl, phase, OOT_LABEL, &pairs, rng)?;
    cloud.send(phase, msg::OOT_CIPHERTEXTS, w.finish())
}

/// Evaluator side: obtains a key per bit and forwards it to the cloud.
pub fn oot_evaluator<R: RngCore + CryptoRng>(
    gen: &mut Channel,
    cloud: &mut Channel,
    phase: u8,
    ot: &OtProvider,
    bits: &[bool],
    rng: &mut R,
) -> Result<(), Abort> {
    let got = ot.receive(gen, phase, OOT_LABEL, bits, rng)?;
    let mut w = Writer::new();
    w.u32(bits.len() as u32);
    for m in &got {
        if m.len() != OOT_KEY_BYTES + 1 || m[OOT_KEY_BYTES] > 1 {
            return Err(malformed(gen, phase, "bad key message".into()));
        }
        w.u8(m[OOT_KEY_BYTES]).bytes(&m[..OOT_KEY_BYTES]);
    }
    cloud.send(phase, msg::OOT_KEYS, w.finish())
}

/// Cloud side: returns the seed for each evaluator input bit.
pub fn oot_cloud(gen: &mut Channel, evl: &mut Channel, phase: u8, n: usize) -> Result<Vec<OotSeed>, Abort> {
    let cts = gen.recv(phase, msg::OOT_CIPHERTEXTS)?;
    let keys = evl.recv(phase, msg::OOT_KEYS)?;
    let mut rc = Reader::new(&cts);
    let mut rk = Reader::new(&keys);
    let bad_g = |e: crate::wire::WireError| malformed(gen, phase, e.to_string());
    let bad_e = |e: crate::wire::WireError| malformed(evl, phase, e.to_string());
    if rc.u32().map_err(bad_g)? as usize != n {
        return Err(malformed(gen, phase, "wrong ciphertext count".into()));
    }
    if rk.u32().map_err(bad_e)? as usize != n {
        return Err(malformed(evl, phase, "wrong key count".into()));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let ct0 = rc.take(16).map_err(bad_g)?;
        let ct1 = rc.take(16).map_err(bad_g)?;
        let c = rk.u8().map_err(bad_e)?;
        let key = rk.take(OOT_KEY_BYTES).map_err(bad_e)?;
        let mut seed: OotSeed = match c {
            0 => ct0.try_into().unwrap(),
            1 => ct1.try_into().unwrap(),
            _ => return Err(malformed(evl, phase, "bad key index".into())),
        };
        xor_in_place(&mut seed, &pad(key, 16));
        out.push(seed);
    }
    rc.finish().map_err(bad_g)?;
    rk.finish().map_err(bad_e)?;
    Ok(out)
}
