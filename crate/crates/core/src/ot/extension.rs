//! IKNP OT extension with a GF(2^128) consistency check on the receiver's
//! correction matrix.

use rand::{CryptoRng, Rng, RngCore};

use super::base::{random_ot_receiver, random_ot_sender, OtKey};
use super::{msg, OtStats};
use crate::abort::{Abort, AbortCause};
use crate::channel::Channel;
use crate::crypto::{derived_rng, keystream, xor_in_place};
use crate::wire::{Reader, Writer};

/// Extra random rows that mask the consistency-check combination.
const CHECK_PADDING: usize = 128;

#[derive(Clone, Copy, Debug, Default)]
pub struct ExtensionOptions {
    /// Test hook: the receiver flips its first choice bit in this column
    /// only, producing an inconsistent correction matrix.
    pub corrupt_column: Option<usize>,
}

/// Multiplication in GF(2^128) modulo x^128 + x^7 + x^2 + x + 1.
pub fn gf128_mul(mut a: u128, mut b: u128) -> u128 {
    let mut r = 0u128;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        let carry = a >> 127;
        a <<= 1;
        if carry == 1 {
            a ^= 0x87;
        }
        b >>= 1;
    }
    r
}

fn prg(key: &OtKey, bytes: usize) -> Vec<u8> {
    keystream("iknp prg", key, bytes)
}

fn row_pad(j: usize, row: u128, len: usize) -> Vec<u8> {
    let mut key = [0u8; 24];
    key[..8].copy_from_slice(&(j as u64).to_be_bytes());
    key[8..].copy_from_slice(&row.to_le_bytes());
    keystream("iknp out", &key, len)
}

/// Row `j` of a column-major bit matrix, one bit per column.
fn rows(cols: &[Vec<u8>], m: usize) -> Vec<u128> {
    let mut out = vec![0u128; m];
    for (i, col) in cols.iter().enumerate() {
        for (j, row) in out.iter_mut().enumerate() {
            if (col[j / 8] >> (j % 8)) & 1 == 1 {
                *row |= 1u128 << i;
            }
        }
    }
    out
}

fn chis(seed: &[u8], m: usize) -> Vec<u128> {
    let mut rng = derived_rng("iknp chi", &[seed]);
    (0..m).map(|_| rng.gen()).collect()
}

fn padded_len(m: usize) -> usize {
    m.div_ceil(8) * 8 + CHECK_PADDING
}

fn malformed(ch: &Channel, phase: u8, what: String) -> Abort {
    Abort::new(phase, ch.me(), AbortCause::Malformed(format!("OT extension: {what}")))
}

/// Sender side. All messages must share one length.
pub fn extension_send<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    phase: u8,
    k: usize,
    pairs: &[(Vec<u8>, Vec<u8>)],
    rng: &mut R,
    stats: &OtStats,
) -> Result<(), Abort> {
    assert!((1..=128).contains(&k), "base count must be in 1..=128");
    let m = pairs.len();
    let len = pairs.first().map(|p| p.0.len()).unwrap_or(0);
    assert!(pairs.iter().all(|(a, b)| a.len() == len && b.len() == len));
    let mp = padded_len(m);
    let bytes = mp / 8;

    let s: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
    let keys = random_ot_receiver(ch, phase, &s, rng, stats)?;
    let u = ch.recv(phase, msg::EXT_U)?;
    if u.len() != k * bytes {
        return Err(malformed(
            ch,
            phase,
            format!("matrix has {} bytes, expected {}", u.len(), k * bytes),
        ));
    }
    let cols: Vec<Vec<u8>> = (0..k)
        .map(|i| {
            let mut q = prg(&keys[i], bytes);
            if s[i] {
                xor_in_place(&mut q, &u[i * bytes..(i + 1) * bytes]);
            }
            q
        })
        .collect();
    let q = rows(&cols, mp);
    let s_vec = s
        .iter()
        .enumerate()
        .fold(0u128, |acc, (i, &b)| acc | ((b as u128) << i));

    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    ch.send(phase, msg::EXT_CHI, seed.to_vec())?;
    let check = ch.recv(phase, msg::EXT_CHECK)?;
    if check.len() != 32 {
        return Err(malformed(ch, phase, "bad check length".into()));
    }
    let x = u128::from_le_bytes(check[..16].try_into().unwrap());
    let t = u128::from_le_bytes(check[16..].try_into().unwrap());
    let chi = chis(&seed, mp);
    let qsum = q.iter().zip(&chi).fold(0u128, |acc, (&qj, &c)| acc ^ gf128_mul(qj, c));
    if qsum != t ^ gf128_mul(x, s_vec) {
        return Err(Abort::new(phase, ch.me(), AbortCause::OtConsistency));
    }

    let mut w = Writer::new();
    w.u32(m as u32).u32(len as u32);
    for (j, (m0, m1)) in pairs.iter().enumerate() {
        let mut y0 = m0.clone();
        xor_in_place(&mut y0, &row_pad(j, q[j], len));
        let mut y1 = m1.clone();
        xor_in_place(&mut y1, &row_pad(j, q[j] ^ s_vec, len));
        w.bytes(&y0).bytes(&y1);
    }
    ch.send(phase, msg::EXT_Y, w.finish())
}

/// Receiver side.
pub fn extension_receive<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    phase: u8,
    k: usize,
    bits: &[bool],
    rng: &mut R,
    stats: &OtStats,
    opts: ExtensionOptions,
) -> Result<Vec<Vec<u8>>, Abort> {
    assert!((1..=128).contains(&k), "base count must be in 1..=128");
    let m = bits.len();
    let mp = padded_len(m);
    let bytes = mp / 8;
    let mut r: Vec<bool> = bits.to_vec();
    r.extend((m..mp).map(|_| rng.gen::<bool>()));
    let r_packed = crate::wire::pack_bits(&r);

    let base = random_ot_sender(ch, phase, k, rng, stats)?;
    let mut u = Vec::with_capacity(k * bytes);
    let mut cols = Vec::with_capacity(k);
    for (i, (k0, k1)) in base.iter().enumerate() {
        let t = prg(k0, bytes);
        let mut ui = prg(k1, bytes);
        xor_in_place(&mut ui, &t);
        xor_in_place(&mut ui, &r_packed);
        if opts.corrupt_column == Some(i) {
            ui[0] ^= 1;
        }
        u.extend_from_slice(&ui);
        cols.push(t);
    }
    ch.send(phase, msg::EXT_U, u)?;
    let t_rows = rows(&cols, mp);

    let seed = ch.recv(phase, msg::EXT_CHI)?;
    let chi = chis(&seed, mp);
    let mut x = 0u128;
    let mut t = 0u128;
    for j in 0..mp {
        if r[j] {
            x ^= chi[j];
        }
        t ^= gf128_mul(t_rows[j], chi[j]);
    }
    let mut check = Vec::with_capacity(32);
    check.extend_from_slice(&x.to_le_bytes());
    check.extend_from_slice(&t.to_le_bytes());
    ch.send(phase, msg::EXT_CHECK, check)?;

    let payload = ch.recv(phase, msg::EXT_Y)?;
    let mut rd = Reader::new(&payload);
    let bad = |e: crate::wire::WireError| malformed(ch, phase, e.to_string());
    let count = rd.u32().map_err(bad)? as usize;
    let len = rd.u32().map_err(bad)? as usize;
    if count != m {
        return Err(malformed(
            ch,
            phase,
            format!("{count} ciphertext pairs for {m} choices"),
        ));
    }
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let y0 = rd.take(len).map_err(bad)?;
        let y1 = rd.take(len).map_err(bad)?;
        let mut v = if bits[j] { y1.to_vec() } else { y0.to_vec() };
        xor_in_place(&mut v, &row_pad(j, t_rows[j], len));
        out.push(v);
    }
    rd.finish().map_err(bad)?;
    Ok(out)
}
