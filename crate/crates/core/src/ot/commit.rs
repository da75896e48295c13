//! Hash commitments to evaluator input labels.
//!
//! Openings are derived from the per-circuit input key and the outsourced-OT
//! seed of the committed bit, so the cloud can open exactly the commitment
//! matching the seed it received.

use crate::crypto::{hash_parts, label_bytes};
use crate::label::Label;

pub type Commitment = [u8; 32];

pub fn commit_label(label: Label, opening: &[u8; 16]) -> Commitment {
    hash_parts("label commitment", &[&label_bytes(label), opening])
}

pub fn opening_for(ikey: Label, seed: &[u8; 16], wire: u32) -> [u8; 16] {
    let d = hash_parts("label opening", &[&label_bytes(ikey), seed, &wire.to_be_bytes()]);
    d[..16].try_into().unwrap()
}

pub fn verify_opening(c: &Commitment, label: Label, opening: &[u8; 16]) -> bool {
    commit_label(label, opening) == *c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binds_label_and_opening() {
        let o = opening_for(Label(3), &[1; 16], 0);
        let c = commit_label(Label(9), &o);
        assert!(verify_opening(&c, Label(9), &o));
        assert!(!verify_opening(&c, Label(8), &o));
        assert!(!verify_opening(&c, Label(9), &opening_for(Label(3), &[1; 16], 1)));
    }
}
