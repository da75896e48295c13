//! Typed, phase-checked link between two parties.

use std::io::Write;
use std::time::Duration;

use crate::abort::{Abort, AbortCause, Role};
use crate::frame::{decode_frame, PartyMessage, DEFAULT_MAX_FRAME};
use crate::transport::{Transport, TransportError};

/// Message type reserved for abort notifications.
pub const ABORT_TYPE: u8 = 0xFF;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub sent: u64,
    pub received: u64,
}

pub struct Channel {
    me: Role,
    peer: Role,
    transport: Box<dyn Transport>,
    exec_id: u64,
    timeout: Duration,
    cap: usize,
    stats: LinkStats,
    last_sent_phase: u8,
    last_recv_phase: u8,
    recorder: Option<Box<dyn Write + Send>>,
}

impl Channel {
    pub fn new(me: Role, peer: Role, transport: Box<dyn Transport>, exec_id: u64) -> Self {
        Self {
            me,
            peer,
            transport,
            exec_id,
            timeout: DEFAULT_TIMEOUT,
            cap: DEFAULT_MAX_FRAME,
            stats: LinkStats::default(),
            last_sent_phase: 0,
            last_recv_phase: 0,
            recorder: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Copies every frame this side sends into `w`.
    pub fn with_recorder(mut self, w: Box<dyn Write + Send>) -> Self {
        self.recorder = Some(w);
        self
    }

    /// Starts a new execution on the same link.
    pub fn reset(&mut self, exec_id: u64) {
        self.exec_id = exec_id;
        self.last_sent_phase = 0;
        self.last_recv_phase = 0;
        self.stats = LinkStats::default();
    }

    pub fn peer(&self) -> Role {
        self.peer
    }

    pub fn me(&self) -> Role {
        self.me
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn exec_id(&self) -> u64 {
        self.exec_id
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    fn fail(&self, phase: u8, cause: AbortCause) -> Abort {
        Abort::new(phase, self.me, cause)
    }

    fn write_frame(&mut self, msg: &PartyMessage) -> Result<(), TransportError> {
        let bytes = msg.encode();
        if let Some(r) = self.recorder.as_mut() {
            let _ = r.write_all(&bytes);
        }
        self.transport.send(&bytes)?;
        self.stats.sent += bytes.len() as u64;
        Ok(())
    }

    pub fn send(&mut self, phase: u8, msg_type: u8, payload: Vec<u8>) -> Result<(), Abort> {
        if phase < self.last_sent_phase {
            return Err(self.fail(
                phase,
                AbortCause::Malformed(format!(
                    "phase regression on send to {}: {} after {}",
                    self.peer, phase, self.last_sent_phase
                )),
            ));
        }
        self.last_sent_phase = phase;
        let msg = PartyMessage {
            phase,
            msg_type,
            exec_id: self.exec_id,
            payload,
        };
        match self.write_frame(&msg) {
            Ok(()) => Ok(()),
            Err(e) => Err(self
                .pending_abort()
                .unwrap_or_else(|| self.fail(phase, AbortCause::Transport(format!("send to {}: {e}", self.peer))))),
        }
    }

    /// A peer that aborted and hung up may have left its reason queued.
    fn pending_abort(&mut self) -> Option<Abort> {
        while let Ok(raw) = self.transport.recv(Duration::from_millis(100)) {
            let (msg, _) = decode_frame(&raw, self.cap).ok()?;
            if msg.msg_type == ABORT_TYPE {
                return Abort::decode(&msg.payload).ok();
            }
        }
        None
    }

    /// Receives the next frame, which must carry `(phase, msg_type)`.
    pub fn recv(&mut self, phase: u8, msg_type: u8) -> Result<Vec<u8>, Abort> {
        let raw = self
            .transport
            .recv(self.timeout)
            .map_err(|e| self.fail(phase, AbortCause::Transport(format!("receive from {}: {e}", self.peer))))?;
        let (msg, _) = decode_frame(&raw, self.cap)
            .map_err(|e| self.fail(phase, AbortCause::Malformed(format!("frame from {}: {e}", self.peer))))?;
        self.stats.received += raw.len() as u64;
        if msg.msg_type == ABORT_TYPE {
            return Err(Abort::decode(&msg.payload).unwrap_or_else(|e| {
                self.fail(
                    phase,
                    AbortCause::Malformed(format!("abort frame from {}: {e}", self.peer)),
                )
            }));
        }
        if msg.exec_id != self.exec_id {
            return Err(self.fail(
                phase,
                AbortCause::Malformed(format!(
                    "execution id {} from {}, expected {}",
                    msg.exec_id, self.peer, self.exec_id
                )),
            ));
        }
        if msg.phase < self.last_recv_phase {
            return Err(self.fail(
                phase,
                AbortCause::Malformed(format!(
                    "phase regression from {}: {} after {}",
                    self.peer, msg.phase, self.last_recv_phase
                )),
            ));
        }
        self.last_recv_phase = msg.phase;
        if msg.phase != phase || msg.msg_type != msg_type {
            return Err(self.fail(
                phase,
                AbortCause::Malformed(format!(
                    "unexpected message ({}, {}) from {}, expected ({phase}, {msg_type})",
                    msg.phase, msg.msg_type, self.peer
                )),
            ));
        }
        Ok(msg.payload)
    }

    /// Best-effort abort notification; failures are ignored.
    pub fn send_abort(&mut self, abort: &Abort) {
        let msg = PartyMessage {
            phase: abort.phase.clamp(1, 7),
            msg_type: ABORT_TYPE,
            exec_id: self.exec_id,
            payload: abort.encode(),
        };
        let _ = self.write_frame(&msg);
        if let Some(r) = self.recorder.as_mut() {
            let _ = r.flush();
        }
    }

    pub fn flush_recorder(&mut self) {
        if let Some(r) = self.recorder.as_mut() {
            let _ = r.flush();
        }
    }
}
