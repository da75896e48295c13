//! Three-party state machines for one execution of a chain.
//!
//! Each party runs on its own thread of control over two [`Channel`]s. Every
//! error is converted into an [`Abort`] that the detecting party sends to
//! both peers before returning it.

mod cloud;
mod evaluator;
mod generator;
mod local;
mod material;
mod tamper;

pub use cloud::{run_cloud, CloudOutcome, CloudReport};
pub use evaluator::{run_evaluator, EvaluatorOutcome};
pub use generator::{run_generator, GeneratorOutcome};
pub use local::{LocalSession, PartyResults, SessionOptions};
pub use material::{consistency_matrix, majority};
pub use tamper::{Hooks, SplitOracle, Tamper, TamperTarget};

use std::time::Duration;

use crate::abort::{Abort, AbortCause, Role};
use crate::channel::Channel;
use crate::circuit::{augment_for_protocol, AugmentError, AugmentationSpec, AugmentedLayout, Circuit};
use crate::crypto::hash_parts;
use crate::label::Security;
use crate::ot::OtProvider;
use crate::state::{Mode, SavedState};
use crate::wire::{Reader, WireError, Writer};

/// Message types per phase.
pub mod msg {
    pub const HELLO: u8 = 1;
    pub const SPLIT_HASHES_GEN: u8 = 8;
    pub const SPLIT_HASHES_CLOUD: u8 = 9;
    pub const COMMITMENTS: u8 = 10;
    pub const PACKAGES: u8 = 11;
    pub const GEN_LABELS: u8 = 12;
    pub const IKEYS: u8 = 22;
    pub const IKEYS_FWD: u8 = 23;
    pub const INPUT_GATES: u8 = 24;
    pub const HASH_SEED: u8 = 30;
    pub const DIGEST_DECODING: u8 = 31;
    pub const PARTIAL_GATES: u8 = 40;
    pub const REMAP: u8 = 41;
    pub const GATES: u8 = 50;
    pub const OUTPUT_DECODING: u8 = 51;
    pub const OUTPUT: u8 = 60;
    pub const OUTPUT_ACK: u8 = 61;
    pub const SAVED: u8 = 70;
}

/// OT session labels, also the keys of the provider's call counters.
pub mod ot_label {
    pub const CUT_AND_CHOOSE: &str = "cc";
    pub const OUTSOURCED: &str = "oot";
}

pub const DEFAULT_TAG_BITS: usize = 32;
pub const DEFAULT_CONSISTENCY_BITS: usize = 32;
pub const DEFAULT_ENCODING_WIDTH: usize = 8;

/// Garbled gates per streamed frame.
pub const GATE_CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub sec: Security,
    pub circuits: usize,
    pub encoding_width: usize,
    pub tag_bits: usize,
    pub consistency_bits: usize,
    pub mode: Mode,
    pub exec_id: u64,
    pub timeout: Duration,
    pub ot: OtProvider,
}

impl ProtocolConfig {
    pub fn malicious(circuits: usize) -> Self {
        Self {
            sec: Security::default(),
            circuits,
            encoding_width: DEFAULT_ENCODING_WIDTH,
            tag_bits: DEFAULT_TAG_BITS,
            consistency_bits: DEFAULT_CONSISTENCY_BITS,
            mode: Mode::Malicious,
            exec_id: 1,
            timeout: crate::channel::DEFAULT_TIMEOUT,
            ot: OtProvider::group_based(Security::default().bits()),
        }
    }

    pub fn semi_honest() -> Self {
        Self {
            circuits: 1,
            consistency_bits: 0,
            mode: Mode::SemiHonest,
            ..Self::malicious(1)
        }
    }

    pub fn with_dealer_ot(mut self) -> Self {
        self.ot = OtProvider::trusted_dealer();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.mode {
            Mode::SemiHonest if self.circuits != 1 => Err("semi-honest mode runs exactly one circuit".into()),
            Mode::Malicious if self.circuits < crate::cut_choose::MIN_CIRCUITS => Err(format!(
                "malicious mode needs at least {} circuits",
                crate::cut_choose::MIN_CIRCUITS
            )),
            _ if self.encoding_width == 0 => Err("encoding width must be at least 1".into()),
            _ => Ok(()),
        }
    }

    fn consistency_bits(&self) -> usize {
        match self.mode {
            Mode::Malicious => self.consistency_bits,
            Mode::SemiHonest => 0,
        }
    }
}

/// A program together with the augmented circuit that is actually garbled.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub program: Circuit,
    pub circuit: Circuit,
    pub layout: AugmentedLayout,
}

impl Prepared {
    pub fn new(program: Circuit, cfg: &ProtocolConfig) -> Result<Self, AugmentError> {
        let spec = AugmentationSpec::for_circuit(&program, cfg.encoding_width, cfg.tag_bits, cfg.consistency_bits());
        let (circuit, layout) = augment_for_protocol(&program, &spec)?;
        Ok(Self {
            program,
            circuit,
            layout,
        })
    }

    /// Digest that all three parties must agree on.
    fn config_digest(&self, cfg: &ProtocolConfig) -> [u8; 32] {
        let mut w = Writer::new();
        w.u8(cfg.sec.bits() as u8)
            .u32(cfg.circuits as u32)
            .u32(cfg.encoding_width as u32)
            .u32(cfg.tag_bits as u32)
            .u32(cfg.consistency_bits() as u32)
            .u8(cfg.mode as u8)
            .u64(cfg.exec_id);
        hash_parts("config", &[&w.finish(), &self.program.digest()])
    }
}

/// Builds an abort attributed to `me`.
pub(crate) fn fail(phase: u8, me: Role, cause: AbortCause) -> Abort {
    Abort::new(phase, me, cause)
}

pub(crate) fn malformed(phase: u8, me: Role, from: Role, e: impl std::fmt::Display) -> Abort {
    fail(phase, me, AbortCause::Malformed(format!("from {from}: {e}")))
}

pub(crate) trait WireResult<T> {
    fn or_malformed(self, phase: u8, ch: &Channel) -> Result<T, Abort>;
}

impl<T> WireResult<T> for Result<T, WireError> {
    fn or_malformed(self, phase: u8, ch: &Channel) -> Result<T, Abort> {
        self.map_err(|e| malformed(phase, ch.me(), ch.peer(), e))
    }
}

/// Chain position announced during the handshake.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Hello {
    pub digest: [u8; 32],
    pub next_execution: u64,
    pub has_state: bool,
}

impl Hello {
    pub fn for_state(prep: &Prepared, cfg: &ProtocolConfig, state: Option<&SavedState>) -> Self {
        Self {
            digest: prep.config_digest(cfg),
            next_execution: state.map_or(0, |s| s.next_execution),
            has_state: state.is_some(),
        }
    }

    fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.digest).u64(self.next_execution).u8(self.has_state as u8);
        w.finish()
    }

    fn decode(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(buf);
        let digest = r.take(32)?.try_into().unwrap();
        let next_execution = r.u64()?;
        let has_state = r.u8()? != 0;
        r.finish()?;
        Ok(Self {
            digest,
            next_execution,
            has_state,
        })
    }
}

/// Sends our hello to both peers and returns theirs, checking the digest.
pub(crate) fn handshake(me: &Hello, a: &mut Channel, b: &mut Channel) -> Result<(Hello, Hello), Abort> {
    a.send(1, msg::HELLO, me.encode())?;
    b.send(1, msg::HELLO, me.encode())?;
    let recv = |ch: &mut Channel| -> Result<Hello, Abort> {
        let h = Hello::decode(&ch.recv(1, msg::HELLO)?).or_malformed(1, ch)?;
        if h.digest != me.digest {
            return Err(fail(1, ch.me(), AbortCause::ConfigMismatch(ch.peer())));
        }
        Ok(h)
    };
    Ok((recv(a)?, recv(b)?))
}

/// Checks that the generator and cloud hold matching chain positions.
pub(crate) fn check_chain(
    me: Role,
    mine: &Hello,
    theirs: &Hello,
    state: Option<&SavedState>,
    prep: &Prepared,
    cfg: &ProtocolConfig,
) -> Result<(), Abort> {
    let f = |c| Err(fail(1, me, c));
    if let Some(s) = state {
        if s.poisoned {
            return f(AbortCause::ChainPoisoned);
        }
        if s.circuits != cfg.circuits {
            return f(AbortCause::StateMismatch(format!(
                "state holds {} circuits, configuration asks for {}",
                s.circuits, cfg.circuits
            )));
        }
        if s.mode != cfg.mode || s.sec != cfg.sec {
            return f(AbortCause::StateMismatch("mode or security differs from state".into()));
        }
        if s.role != me {
            return f(AbortCause::StateMismatch(format!("state belongs to {}", s.role)));
        }
        if prep.circuit.partial_inputs != s.saved_wire_count() && prep.circuit.partial_inputs > 0 {
            return f(AbortCause::StateMismatch(format!(
                "program consumes {} saved wires, state holds {}",
                prep.circuit.partial_inputs,
                s.saved_wire_count()
            )));
        }
    } else if prep.circuit.partial_inputs > 0 {
        return f(AbortCause::MissingState);
    }
    if mine.has_state != theirs.has_state || mine.next_execution != theirs.next_execution {
        return f(AbortCause::StateMismatch(format!(
            "chain position {} vs peer {}",
            mine.next_execution, theirs.next_execution
        )));
    }
    Ok(())
}

/// Sends `abort` to both peers unless it came from one of them, in which
/// case it is relayed to the other.
pub(crate) fn broadcast(abort: &Abort, a: &mut Channel, b: &mut Channel) {
    if abort.origin != a.peer() {
        a.send_abort(abort);
    }
    if abort.origin != b.peer() {
        b.send_abort(abort);
    }
    a.flush_recorder();
    b.flush_recorder();
}
