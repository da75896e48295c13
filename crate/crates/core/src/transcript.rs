//! Offline verification of recorded transcripts.
//!
//! A transcript is the concatenation of every frame one party sent to one
//! peer, possibly across several executions.

use std::fmt;

use crate::abort::Abort;
use crate::channel::ABORT_TYPE;
use crate::frame::{split_frames, FrameError};
use crate::ot::msg as ot_msg;
use crate::protocol::msg;

#[derive(Debug)]
pub enum Issue {
    Corrupt { frame: usize, error: FrameError },
    ExecRegression { frame: usize, exec_id: u64, after: u64 },
    PhaseRegression { frame: usize, phase: u8, after: u8 },
    UnknownType { frame: usize, phase: u8, msg_type: u8 },
    MissingHello { frame: usize, exec_id: u64 },
    Aborted { frame: usize, abort: Abort },
    BadAbort { frame: usize, error: String },
}

impl Issue {
    pub fn frame(&self) -> usize {
        match self {
            Issue::Corrupt { frame, .. }
            | Issue::ExecRegression { frame, .. }
            | Issue::PhaseRegression { frame, .. }
            | Issue::UnknownType { frame, .. }
            | Issue::MissingHello { frame, .. }
            | Issue::Aborted { frame, .. }
            | Issue::BadAbort { frame, .. } => *frame,
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Corrupt { frame, error } => write!(f, "frame {frame}: corrupt: {error}"),
            Issue::ExecRegression { frame, exec_id, after } => {
                write!(f, "frame {frame}: execution id {exec_id} after {after}")
            }
            Issue::PhaseRegression { frame, phase, after } => {
                write!(f, "frame {frame}: phase regression {phase} after {after}")
            }
            Issue::UnknownType { frame, phase, msg_type } => {
                write!(f, "frame {frame}: message type {msg_type} not valid in phase {phase}")
            }
            Issue::MissingHello { frame, exec_id } => {
                write!(f, "frame {frame}: execution {exec_id} does not start with a hello")
            }
            Issue::Aborted { frame, abort } => write!(f, "frame {frame}: {abort} [{}]", abort.cause.slug()),
            Issue::BadAbort { frame, error } => write!(f, "frame {frame}: undecodable abort: {error}"),
        }
    }
}

#[derive(Debug, Default)]
pub struct TranscriptReport {
    pub frames: usize,
    pub bytes: u64,
    /// `(exec_id, bytes)` in transcript order.
    pub executions: Vec<(u64, u64)>,
    pub issues: Vec<Issue>,
}

impl TranscriptReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

fn allowed(phase: u8, t: u8) -> bool {
    let ot_base = (ot_msg::BASE_A..=ot_msg::EXT_Y).contains(&t);
    match phase {
        1 => {
            ot_base
                || matches!(
                    t,
                    msg::HELLO
                        | msg::SPLIT_HASHES_GEN
                        | msg::SPLIT_HASHES_CLOUD
                        | msg::COMMITMENTS
                        | msg::PACKAGES
                        | msg::GEN_LABELS
                )
        }
        2 => {
            ot_base
                || matches!(
                    t,
                    ot_msg::OOT_CIPHERTEXTS | ot_msg::OOT_KEYS | msg::IKEYS | msg::IKEYS_FWD | msg::INPUT_GATES
                )
        }
        3 => matches!(t, msg::HASH_SEED | msg::DIGEST_DECODING),
        4 => matches!(t, msg::PARTIAL_GATES | msg::REMAP),
        5 => matches!(t, msg::GATES | msg::OUTPUT_DECODING),
        6 => matches!(t, msg::OUTPUT | msg::OUTPUT_ACK),
        7 => t == msg::SAVED,
        _ => false,
    }
}

/// Checks framing, execution and phase order, message types, and decodes
/// any abort notification.
pub fn verify_transcript(buf: &[u8], cap: usize) -> TranscriptReport {
    let mut report = TranscriptReport::default();
    let mut current: Option<u64> = None;
    let mut last_phase = 0u8;
    for (i, item) in split_frames(buf, cap).into_iter().enumerate() {
        let (m, n) = match item {
            Ok(x) => x,
            Err(error) => {
                report.issues.push(Issue::Corrupt { frame: i, error });
                break;
            }
        };
        report.frames += 1;
        report.bytes += n as u64;
        match current {
            Some(prev) if m.exec_id < prev => {
                report.issues.push(Issue::ExecRegression {
                    frame: i,
                    exec_id: m.exec_id,
                    after: prev,
                });
            }
            Some(prev) if m.exec_id == prev => {
                if let Some(e) = report.executions.last_mut() {
                    e.1 += n as u64;
                }
            }
            _ => {
                current = Some(m.exec_id);
                last_phase = 0;
                report.executions.push((m.exec_id, n as u64));
                if m.msg_type != msg::HELLO && m.msg_type != ABORT_TYPE {
                    report.issues.push(Issue::MissingHello {
                        frame: i,
                        exec_id: m.exec_id,
                    });
                }
            }
        }
        if m.msg_type == ABORT_TYPE {
            match Abort::decode(&m.payload) {
                Ok(abort) => report.issues.push(Issue::Aborted { frame: i, abort }),
                Err(e) => report.issues.push(Issue::BadAbort {
                    frame: i,
                    error: e.to_string(),
                }),
            }
            continue;
        }
        if m.phase < last_phase {
            report.issues.push(Issue::PhaseRegression {
                frame: i,
                phase: m.phase,
                after: last_phase,
            });
        }
        last_phase = last_phase.max(m.phase);
        if !allowed(m.phase, m.msg_type) {
            report.issues.push(Issue::UnknownType {
                frame: i,
                phase: m.phase,
                msg_type: m.msg_type,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::PartyMessage;

    fn frame(phase: u8, msg_type: u8, exec_id: u64) -> Vec<u8> {
        PartyMessage {
            phase,
            msg_type,
            exec_id,
            payload: vec![0; 3],
        }
        .encode()
    }

    #[test]
    fn ordered_transcript_passes() {
        let t = [
            frame(1, msg::HELLO, 1),
            frame(3, msg::HASH_SEED, 1),
            frame(1, msg::HELLO, 2),
        ]
        .concat();
        let r = verify_transcript(&t, 1 << 20);
        assert!(r.ok(), "{:?}", r.issues);
        assert_eq!(r.frames, 3);
        assert_eq!(r.bytes, t.len() as u64);
        assert_eq!(r.executions.iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn phase_regression_names_frame() {
        let t = [
            frame(1, msg::HELLO, 1),
            frame(5, msg::GATES, 1),
            frame(3, msg::HASH_SEED, 1),
        ]
        .concat();
        let r = verify_transcript(&t, 1 << 20);
        assert_eq!(r.issues.len(), 1);
        assert!(matches!(
            r.issues[0],
            Issue::PhaseRegression {
                frame: 2,
                phase: 3,
                after: 5
            }
        ));
    }

    #[test]
    fn truncation_and_bad_types_are_reported() {
        let mut t = [frame(1, msg::HELLO, 1), frame(3, msg::GATES, 1)].concat();
        t.pop();
        let r = verify_transcript(&t, 1 << 20);
        assert!(matches!(r.issues[0], Issue::Corrupt { frame: 1, .. }));
        let t = [frame(1, msg::HELLO, 1), frame(3, msg::GATES, 1)].concat();
        assert!(matches!(
            verify_transcript(&t, 1 << 20).issues[0],
            Issue::UnknownType { frame: 1, .. }
        ));
    }
}
