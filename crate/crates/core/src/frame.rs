//! Length-prefixed protocol frames.
//!
//! Layout: `length: u32 BE | phase: u8 | type: u8 | exec_id: u64 BE | payload`,
//! where `length` counts every byte after the length field.

use std::io::Read;

use thiserror::Error;

pub const LENGTH_BYTES: usize = 4;
pub const HEADER_REMAINDER: usize = 10;
pub const HEADER_BYTES: usize = LENGTH_BYTES + HEADER_REMAINDER;
pub const DEFAULT_MAX_FRAME: usize = 256 << 20;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame of {len} bytes exceeds cap of {cap}")]
    Oversize { len: usize, cap: usize },
    #[error("frame length {0} is shorter than the header")]
    ShortLength(usize),
    #[error("invalid phase tag {0}")]
    BadPhase(u8),
    #[error("frame truncated: expected {expected} bytes, have {available}")]
    Truncated { expected: usize, available: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyMessage {
    pub phase: u8,
    pub msg_type: u8,
    pub exec_id: u64,
    pub payload: Vec<u8>,
}

impl PartyMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.len());
        out.extend_from_slice(&((HEADER_REMAINDER + self.payload.len()) as u32).to_be_bytes());
        out.push(self.phase);
        out.push(self.msg_type);
        out.extend_from_slice(&self.exec_id.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + self.payload.len()
    }
}

fn check_length(len: usize, cap: usize) -> Result<(), FrameError> {
    if len < HEADER_REMAINDER {
        return Err(FrameError::ShortLength(len));
    }
    if len + LENGTH_BYTES > cap {
        return Err(FrameError::Oversize {
            len: len + LENGTH_BYTES,
            cap,
        });
    }
    Ok(())
}

fn parse_body(body: &[u8]) -> Result<PartyMessage, FrameError> {
    let phase = body[0];
    if !(1..=7).contains(&phase) {
        return Err(FrameError::BadPhase(phase));
    }
    Ok(PartyMessage {
        phase,
        msg_type: body[1],
        exec_id: u64::from_be_bytes(body[2..10].try_into().unwrap()),
        payload: body[10..].to_vec(),
    })
}

/// Decodes one frame from the front of `buf`, returning it and the number
/// of bytes consumed.
pub fn decode_frame(buf: &[u8], cap: usize) -> Result<(PartyMessage, usize), FrameError> {
    if buf.len() < LENGTH_BYTES {
        return Err(FrameError::Truncated {
            expected: LENGTH_BYTES,
            available: buf.len(),
        });
    }
    let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    check_length(len, cap)?;
    let total = LENGTH_BYTES + len;
    if buf.len() < total {
        return Err(FrameError::Truncated {
            expected: total,
            available: buf.len(),
        });
    }
    Ok((parse_body(&buf[LENGTH_BYTES..total])?, total))
}

/// Reads one raw frame (including the length prefix) from a stream.
pub fn read_frame_bytes<R: Read>(r: &mut R, cap: usize) -> Result<Vec<u8>, FrameError> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let len = u32::from_be_bytes(len_buf) as usize;
    check_length(len, cap)?;
    let mut out = vec![0u8; LENGTH_BYTES + len];
    out[..4].copy_from_slice(&len_buf);
    r.read_exact(&mut out[4..])?;
    Ok(out)
}

/// Splits a concatenation of frames, as written by transcript recording.
pub fn split_frames(mut buf: &[u8], cap: usize) -> Vec<Result<(PartyMessage, usize), FrameError>> {
    let mut out = Vec::new();
    while !buf.is_empty() {
        match decode_frame(buf, cap) {
            Ok((m, n)) => {
                buf = &buf[n..];
                out.push(Ok((m, n)));
            }
            Err(e) => {
                out.push(Err(e));
                break;
            }
        }
    }
    out
}
