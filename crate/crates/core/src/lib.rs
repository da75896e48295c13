//! Three-party outsourced garbled-circuit evaluation with reusable wire
//! values.

pub mod abort;
pub mod bench;
pub mod channel;
pub mod circuit;
pub mod crypto;
pub mod cut_choose;
pub mod frame;
pub mod garble;
pub mod label;
pub mod ot;
pub mod partial;
pub mod protocol;
pub mod state;
pub mod transcript;
pub mod transport;
pub mod util;
pub mod wire;
