//! Oblivious transfer: base OT, IKNP extension, a trusted-dealer stand-in
//! for tests, and the three-party outsourced OT used for evaluator inputs.

mod base;
mod commit;
mod dealer;
mod extension;
mod outsourced;

pub use base::{base_ot_receive, base_ot_send, random_ot_receiver, random_ot_sender};
pub use commit::{commit_label, opening_for, verify_opening, Commitment};
pub use dealer::Dealer;
pub use extension::{extension_receive, extension_send, gf128_mul, ExtensionOptions};
pub use outsourced::{
    derive_eval_input_label, encode_input, oot_cloud, oot_evaluator, oot_generator, EncodedInput, OotSeed,
    OOT_KEY_BYTES,
};

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{CryptoRng, RngCore};

use crate::abort::{Abort, AbortCause};
use crate::channel::Channel;

/// Message types used by OT sub-protocols. They share the phase of the
/// surrounding protocol step.
pub mod msg {
    pub const BASE_A: u8 = 0xA0;
    pub const BASE_B: u8 = 0xA1;
    pub const BASE_Y: u8 = 0xA2;
    pub const EXT_U: u8 = 0xA3;
    pub const EXT_CHI: u8 = 0xA4;
    pub const EXT_CHECK: u8 = 0xA5;
    pub const EXT_Y: u8 = 0xA6;
    pub const OOT_CIPHERTEXTS: u8 = 0xA7;
    pub const OOT_KEYS: u8 = 0xA8;
}

/// Call counters, keyed by `<session label>.<send|recv>` and
/// `base.public_key_ops`.
#[derive(Debug, Default)]
pub struct OtStats {
    counts: Mutex<HashMap<String, u64>>,
}

impl OtStats {
    pub fn bump(&self, key: &str, by: u64) {
        *self.counts.lock().unwrap().entry(key.to_string()).or_default() += by;
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.lock().unwrap().get(key).copied().unwrap_or(0)
    }

    pub fn snapshot(&self) -> HashMap<String, u64> {
        self.counts.lock().unwrap().clone()
    }
}

#[derive(Clone, Debug)]
pub enum OtKind {
    /// Chou-Orlandi base OTs on Ristretto, extended with IKNP.
    GroupBased,
    /// Insecure in-process dealer for fast deterministic tests.
    TrustedDealer(Arc<Dealer>),
}

#[derive(Clone, Debug)]
pub struct OtProvider {
    kind: OtKind,
    stats: Arc<OtStats>,
    base_count: usize,
}

impl OtProvider {
    /// `base_count` is the number of base OTs behind each extension (K).
    pub fn group_based(base_count: usize) -> Self {
        Self {
            kind: OtKind::GroupBased,
            stats: Arc::default(),
            base_count,
        }
    }

    pub fn trusted_dealer() -> Self {
        Self {
            kind: OtKind::TrustedDealer(Arc::new(Dealer::default())),
            stats: Arc::default(),
            base_count: 0,
        }
    }

    pub fn kind(&self) -> &OtKind {
        &self.kind
    }

    pub fn stats(&self) -> &OtStats {
        &self.stats
    }

    /// Offers `pairs`; the receiver learns one message of each.
    pub fn send<R: RngCore + CryptoRng>(
        &self,
        ch: &mut Channel,
        phase: u8,
        label: &str,
        pairs: &[(Vec<u8>, Vec<u8>)],
        rng: &mut R,
    ) -> Result<(), Abort> {
        self.stats.bump(&format!("{label}.send"), 1);
        match &self.kind {
            OtKind::GroupBased => extension_send(ch, phase, self.base_count, pairs, rng, &self.stats),
            OtKind::TrustedDealer(d) => {
                d.deposit(ch.exec_id(), label, pairs.to_vec());
                Ok(())
            }
        }
    }

    pub fn receive<R: RngCore + CryptoRng>(
        &self,
        ch: &mut Channel,
        phase: u8,
        label: &str,
        bits: &[bool],
        rng: &mut R,
    ) -> Result<Vec<Vec<u8>>, Abort> {
        self.stats.bump(&format!("{label}.recv"), 1);
        match &self.kind {
            OtKind::GroupBased => extension_receive(
                ch,
                phase,
                self.base_count,
                bits,
                rng,
                &self.stats,
                ExtensionOptions::default(),
            ),
            OtKind::TrustedDealer(d) => {
                let pairs = d
                    .take(ch.exec_id(), label, ch.timeout())
                    .ok_or_else(|| Abort::new(phase, ch.me(), AbortCause::Transport("dealer timed out".into())))?;
                if pairs.len() != bits.len() {
                    return Err(Abort::new(
                        phase,
                        ch.me(),
                        AbortCause::Malformed(format!("dealer holds {} pairs for {} choices", pairs.len(), bits.len())),
                    ));
                }
                Ok(pairs
                    .into_iter()
                    .zip(bits)
                    .map(|((m0, m1), &b)| if b { m1 } else { m0 })
                    .collect())
            }
        }
    }
}
