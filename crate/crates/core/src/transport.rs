//! Byte transports that move whole frames between two parties.

use std::io::Write;
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use thiserror::Error;

use crate::frame::{read_frame_bytes, FrameError, DEFAULT_MAX_FRAME};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer disconnected")]
    Disconnected,
    #[error("timed out waiting for peer")]
    Timeout,
    #[error("frame error: {0}")]
    Frame(FrameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Transport: Send {
    /// Sends one encoded frame.
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError>;
    /// Receives one encoded frame, including its length prefix.
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>, TransportError>;
}

/// In-process transport over unbounded channels.
pub struct MemTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl MemTransport {
    pub fn pair() -> (MemTransport, MemTransport) {
        let (a_tx, b_rx) = channel();
        let (b_tx, a_rx) = channel();
        (MemTransport { tx: a_tx, rx: a_rx }, MemTransport { tx: b_tx, rx: b_rx })
    }
}

impl Transport for MemTransport {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.tx.send(frame.to_vec()).map_err(|_| TransportError::Disconnected)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>, TransportError> {
        self.rx.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => TransportError::Timeout,
            RecvTimeoutError::Disconnected => TransportError::Disconnected,
        })
    }
}

/// Length-prefixed frames over a TCP stream.
pub struct TcpTransport {
    stream: TcpStream,
    cap: usize,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Self {
        let _ = stream.set_nodelay(true);
        Self {
            stream,
            cap: DEFAULT_MAX_FRAME,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.stream.write_all(frame).map_err(|e| match e.kind() {
            std::io::ErrorKind::BrokenPipe | std::io::ErrorKind::ConnectionReset => TransportError::Disconnected,
            _ => TransportError::Io(e),
        })
    }

    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>, TransportError> {
        self.stream.set_read_timeout(Some(timeout))?;
        read_frame_bytes(&mut self.stream, self.cap).map_err(|e| match e {
            FrameError::Io(io) => match io.kind() {
                std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => TransportError::Timeout,
                std::io::ErrorKind::UnexpectedEof
                | std::io::ErrorKind::ConnectionReset
                | std::io::ErrorKind::BrokenPipe => TransportError::Disconnected,
                _ => TransportError::Io(io),
            },
            other => TransportError::Frame(other),
        })
    }
}
