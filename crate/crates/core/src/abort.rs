//! Abort reasons shared by every party.

use std::fmt;

use thiserror::Error;

use crate::wire::{Reader, WireError, Writer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Generator,
    Evaluator,
    Cloud,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::Generator => 0,
            Role::Evaluator => 1,
            Role::Cloud => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Role> {
        match c {
            0 => Some(Role::Generator),
            1 => Some(Role::Evaluator),
            2 => Some(Role::Cloud),
            _ => None,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Role::Generator => "gen",
            Role::Evaluator => "evl",
            Role::Cloud => "cloud",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "gen" | "generator" => Some(Role::Generator),
            "evl" | "evaluator" => Some(Role::Evaluator),
            "cloud" => Some(Role::Cloud),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Which regenerated artifact of a check circuit disagreed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckKind {
    Gates,
    PartialGates,
    PartialTransform,
    InputGates,
    Commitments,
    OutputDecoding,
    ConsistencyDecoding,
}

impl CheckKind {
    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        use CheckKind::*;
        [
            Gates,
            PartialGates,
            PartialTransform,
            InputGates,
            Commitments,
            OutputDecoding,
            ConsistencyDecoding,
        ]
        .get(c as usize)
        .copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Gates => "garbled gates",
            CheckKind::PartialGates => "partial input gates",
            CheckKind::PartialTransform => "transformation value",
            CheckKind::InputGates => "input translation gates",
            CheckKind::Commitments => "label commitments",
            CheckKind::OutputDecoding => "output decoding",
            CheckKind::ConsistencyDecoding => "consistency decoding",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AbortCause {
    #[error("configuration mismatch with {0}")]
    ConfigMismatch(Role),
    #[error("split hash mismatch at circuit {0}")]
    SplitHashMismatch(usize),
    #[error("check circuit {circuit} failed verification of {} at item {item}", kind.name())]
    CheckCircuitFailed {
        circuit: usize,
        kind: CheckKind,
        item: usize,
    },
    #[error("label commitment mismatch at circuit {circuit}, input {wire}")]
    CommitmentMismatch { circuit: usize, wire: usize },
    #[error("generator input inconsistent at circuit {0}")]
    InconsistentGeneratorInput(usize),
    #[error("oblivious transfer consistency check failed")]
    OtConsistency,
    #[error("no evaluation circuit produced a valid output")]
    NoValidCircuit,
    #[error("evaluation circuits tied on output bit {0}")]
    UnreliableOutput(usize),
    #[error("output MAC mismatch")]
    OutputMac,
    #[error("no prior execution: saved state missing")]
    MissingState,
    #[error("saved state does not match this execution: {0}")]
    StateMismatch(String),
    #[error("chain was abandoned after detected cheating")]
    ChainPoisoned,
    #[error("hash collision on wire {wire} of circuit {circuit}")]
    HashCollision { circuit: usize, wire: usize },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

impl AbortCause {
    fn code(&self) -> u8 {
        match self {
            AbortCause::ConfigMismatch(_) => 1,
            AbortCause::SplitHashMismatch(_) => 2,
            AbortCause::CheckCircuitFailed { .. } => 3,
            AbortCause::CommitmentMismatch { .. } => 4,
            AbortCause::InconsistentGeneratorInput(_) => 5,
            AbortCause::OtConsistency => 6,
            AbortCause::NoValidCircuit => 7,
            AbortCause::UnreliableOutput(_) => 8,
            AbortCause::OutputMac => 9,
            AbortCause::MissingState => 10,
            AbortCause::StateMismatch(_) => 11,
            AbortCause::ChainPoisoned => 12,
            AbortCause::HashCollision { .. } => 13,
            AbortCause::Malformed(_) => 14,
            AbortCause::Transport(_) => 15,
        }
    }

    /// Short stable identifier, used in CSV output.
    pub fn slug(&self) -> &'static str {
        match self {
            AbortCause::ConfigMismatch(_) => "config_mismatch",
            AbortCause::SplitHashMismatch(_) => "split_hash_mismatch",
            AbortCause::CheckCircuitFailed { .. } => "check_circuit_failed",
            AbortCause::CommitmentMismatch { .. } => "commitment_mismatch",
            AbortCause::InconsistentGeneratorInput(_) => "inconsistent_generator_input",
            AbortCause::OtConsistency => "ot_consistency",
            AbortCause::NoValidCircuit => "no_valid_circuit",
            AbortCause::UnreliableOutput(_) => "unreliable_output",
            AbortCause::OutputMac => "output_mac",
            AbortCause::MissingState => "missing_state",
            AbortCause::StateMismatch(_) => "state_mismatch",
            AbortCause::ChainPoisoned => "chain_poisoned",
            AbortCause::HashCollision { .. } => "hash_collision",
            AbortCause::Malformed(_) => "malformed",
            AbortCause::Transport(_) => "transport",
        }
    }

    /// True for causes that prove the generator misbehaved.
    pub fn caught_generator(&self) -> bool {
        matches!(
            self,
            AbortCause::CheckCircuitFailed { .. }
                | AbortCause::CommitmentMismatch { .. }
                | AbortCause::InconsistentGeneratorInput(_)
        )
    }

    fn fields(&self) -> (u32, u32, u8, String) {
        match self {
            AbortCause::ConfigMismatch(r) => (r.code() as u32, 0, 0, String::new()),
            AbortCause::SplitHashMismatch(i)
            | AbortCause::InconsistentGeneratorInput(i)
            | AbortCause::UnreliableOutput(i) => (*i as u32, 0, 0, String::new()),
            AbortCause::CheckCircuitFailed { circuit, kind, item } => {
                (*circuit as u32, *item as u32, kind.code(), String::new())
            }
            AbortCause::CommitmentMismatch { circuit, wire } | AbortCause::HashCollision { circuit, wire } => {
                (*circuit as u32, *wire as u32, 0, String::new())
            }
            AbortCause::StateMismatch(s) | AbortCause::Malformed(s) | AbortCause::Transport(s) => (0, 0, 0, s.clone()),
            _ => (0, 0, 0, String::new()),
        }
    }

    fn from_fields(code: u8, a: u32, b: u32, k: u8, s: String) -> Option<Self> {
        let (a, b) = (a as usize, b as usize);
        Some(match code {
            1 => AbortCause::ConfigMismatch(Role::from_code(a as u8)?),
            2 => AbortCause::SplitHashMismatch(a),
            3 => AbortCause::CheckCircuitFailed {
                circuit: a,
                kind: CheckKind::from_code(k)?,
                item: b,
            },
            4 => AbortCause::CommitmentMismatch { circuit: a, wire: b },
            5 => AbortCause::InconsistentGeneratorInput(a),
            6 => AbortCause::OtConsistency,
            7 => AbortCause::NoValidCircuit,
            8 => AbortCause::UnreliableOutput(a),
            9 => AbortCause::OutputMac,
            10 => AbortCause::MissingState,
            11 => AbortCause::StateMismatch(s),
            12 => AbortCause::ChainPoisoned,
            13 => AbortCause::HashCollision { circuit: a, wire: b },
            14 => AbortCause::Malformed(s),
            15 => AbortCause::Transport(s),
            _ => return None,
        })
    }
}

/// A terminated execution: where it stopped, who noticed, and why.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("aborted in phase {phase} by {origin}: {cause}")]
pub struct Abort {
    pub phase: u8,
    pub origin: Role,
    pub cause: AbortCause,
}

impl Abort {
    pub fn new(phase: u8, origin: Role, cause: AbortCause) -> Self {
        Self { phase, origin, cause }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (a, b, k, s) = self.cause.fields();
        let mut w = Writer::new();
        w.u8(self.origin.code())
            .u8(self.phase)
            .u8(self.cause.code())
            .u8(k)
            .u32(a)
            .u32(b)
            .blob(s.as_bytes());
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(buf);
        let origin = Role::from_code(r.u8()?).ok_or_else(|| WireError::Invalid("bad role".into()))?;
        let phase = r.u8()?;
        let code = r.u8()?;
        let k = r.u8()?;
        let a = r.u32()?;
        let b = r.u32()?;
        let s = String::from_utf8_lossy(r.blob()?).into_owned();
        r.finish()?;
        let cause = AbortCause::from_fields(code, a, b, k, s)
            .ok_or_else(|| WireError::Invalid(format!("unknown abort code {code}")))?;
        Ok(Self { phase, origin, cause })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abort_round_trip() {
        let causes = [
            AbortCause::ConfigMismatch(Role::Cloud),
            AbortCause::CheckCircuitFailed {
                circuit: 3,
                kind: CheckKind::PartialGates,
                item: 9,
            },
            AbortCause::Malformed("x".into()),
            AbortCause::OutputMac,
            AbortCause::HashCollision { circuit: 1, wire: 2 },
        ];
        for cause in causes {
            let a = Abort::new(4, Role::Evaluator, cause);
            assert_eq!(Abort::decode(&a.encode()).unwrap(), a);
        }
    }
}
