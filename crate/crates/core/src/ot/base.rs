//! Chou-Orlandi "simplest" OT over the Ristretto group.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, RngCore};

use super::{msg, OtStats};
use crate::abort::{Abort, AbortCause};
use crate::channel::Channel;
use crate::crypto::{hash_parts, keystream, xor_in_place};
use crate::wire::{Reader, Writer};

pub type OtKey = [u8; 16];

fn derive_key(a: &CompressedRistretto, b: &CompressedRistretto, i: usize, p: &RistrettoPoint) -> OtKey {
    let d = hash_parts(
        "simplest-ot key",
        &[
            a.as_bytes(),
            b.as_bytes(),
            &(i as u64).to_be_bytes(),
            p.compress().as_bytes(),
        ],
    );
    d[..16].try_into().unwrap()
}

fn malformed(ch: &Channel, phase: u8, what: &str) -> Abort {
    Abort::new(phase, ch.me(), AbortCause::Malformed(format!("base OT: {what}")))
}

fn decompress(ch: &Channel, phase: u8, bytes: &[u8]) -> Result<(CompressedRistretto, RistrettoPoint), Abort> {
    let c = CompressedRistretto::from_slice(bytes).map_err(|_| malformed(ch, phase, "bad point length"))?;
    let p = c
        .decompress()
        .ok_or_else(|| malformed(ch, phase, "invalid group element"))?;
    Ok((c, p))
}

/// Sender side of `n` random OTs: returns both keys per transfer.
pub fn random_ot_sender<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    phase: u8,
    n: usize,
    rng: &mut R,
    stats: &OtStats,
) -> Result<Vec<(OtKey, OtKey)>, Abort> {
    let a = Scalar::random(rng);
    let big_a = &a * RISTRETTO_BASEPOINT_TABLE;
    let a_c = big_a.compress();
    ch.send(phase, msg::BASE_A, a_c.as_bytes().to_vec())?;
    let payload = ch.recv(phase, msg::BASE_B)?;
    if payload.len() != 32 * n {
        return Err(malformed(ch, phase, "wrong number of receiver points"));
    }
    let a_a = a * big_a;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (b_c, b) = decompress(ch, phase, &payload[32 * i..32 * (i + 1)])?;
        let ab = a * b;
        let k0 = derive_key(&a_c, &b_c, i, &ab);
        let k1 = derive_key(&a_c, &b_c, i, &(ab - a_a));
        out.push((k0, k1));
    }
    stats.bump("base.public_key_ops", 2 * n as u64 + 1);
    Ok(out)
}

/// Receiver side of `choices.len()` random OTs.
pub fn random_ot_receiver<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    phase: u8,
    choices: &[bool],
    rng: &mut R,
    stats: &OtStats,
) -> Result<Vec<OtKey>, Abort> {
    let payload = ch.recv(phase, msg::BASE_A)?;
    let (a_c, big_a) = decompress(ch, phase, &payload)?;
    let mut points = Vec::with_capacity(32 * choices.len());
    let mut keys = Vec::with_capacity(choices.len());
    for (i, &c) in choices.iter().enumerate() {
        let b = Scalar::random(rng);
        let mut big_b = &b * RISTRETTO_BASEPOINT_TABLE;
        if c {
            big_b += big_a;
        }
        let b_c = big_b.compress();
        points.extend_from_slice(b_c.as_bytes());
        keys.push(derive_key(&a_c, &b_c, i, &(b * big_a)));
    }
    ch.send(phase, msg::BASE_B, points)?;
    stats.bump("base.public_key_ops", 2 * choices.len() as u64);
    Ok(keys)
}

fn pad(key: &OtKey, len: usize) -> Vec<u8> {
    keystream("base ot pad", key, len)
}

/// Chosen-message OT with one public-key operation pair per transfer.
pub fn base_ot_send<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    phase: u8,
    pairs: &[(Vec<u8>, Vec<u8>)],
    rng: &mut R,
    stats: &OtStats,
) -> Result<(), Abort> {
    let keys = random_ot_sender(ch, phase, pairs.len(), rng, stats)?;
    let mut w = Writer::new();
    for ((m0, m1), (k0, k1)) in pairs.iter().zip(&keys) {
        let mut y0 = m0.clone();
        xor_in_place(&mut y0, &pad(k0, m0.len()));
        let mut y1 = m1.clone();
        xor_in_place(&mut y1, &pad(k1, m1.len()));
        w.blob(&y0).blob(&y1);
    }
    ch.send(phase, msg::BASE_Y, w.finish())
}

pub fn base_ot_receive<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    phase: u8,
    bits: &[bool],
    rng: &mut R,
    stats: &OtStats,
) -> Result<Vec<Vec<u8>>, Abort> {
    let keys = random_ot_receiver(ch, phase, bits, rng, stats)?;
    let payload = ch.recv(phase, msg::BASE_Y)?;
    let mut r = Reader::new(&payload);
    let mut out = Vec::with_capacity(bits.len());
    for (&b, k) in bits.iter().zip(&keys) {
        let y0 = r.blob().map_err(|e| malformed(ch, phase, &e.to_string()))?;
        let y1 = r.blob().map_err(|e| malformed(ch, phase, &e.to_string()))?;
        let mut m = if b { y1.to_vec() } else { y0.to_vec() };
        let p = pad(k, m.len());
        xor_in_place(&mut m, &p);
        out.push(m);
    }
    r.finish().map_err(|e| malformed(ch, phase, &e.to_string()))?;
    Ok(out)
}
