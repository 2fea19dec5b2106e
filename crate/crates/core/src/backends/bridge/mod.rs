//! Framed wire protocol for driving segmentation models in another process.
//!
//! Every frame is an 8-byte little-endian length `N` followed by `N` bytes:
//! a one-line JSON header, a `\n`, then `payload_bytes` bytes of raw payload
//! (possibly none). The header's `type` field names the message:
//!
//! | type             | direction        | payload                         |
//! |------------------|------------------|---------------------------------|
//! | `HELLO`          | both, first      | none                            |
//! | `SESSION_START`  | client → server  | image, float32 little-endian    |
//! | `PROMPTS`        | client → server  | previous mask, uint8 (optional) |
//! | `SEGMENT_RESULT` | server → client  | mask, uint8                     |
//! | `ERROR`          | server → client  | none                            |
//! | `SESSION_END`    | client → server  | none                            |
//!
//! Only `PROMPTS` gets a reply. Volumes are x-fastest, matching
//! [`Geometry::index`](crate::volume::Geometry::index). A server answers any
//! protocol violation with an `ERROR` frame and closes the connection.

mod client;
mod frame;
mod server;

use thiserror::Error;

pub use client::{BridgeBackend, Transport};
pub use frame::{read_frame, write_frame, Frame, Message, PROTOCOL_VERSION};
pub use server::{serve, serve_tcp, ErrorCode};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("bridge connection closed")]
    ConnectionClosed,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unexpected {found} frame while waiting for {expected}")]
    Unexpected { expected: &'static str, found: String },
    #[error("result geometry {found} does not match session geometry {expected}")]
    GeometryMismatch { expected: String, found: String },
    #[error("remote error [{code}]: {message}")]
    Remote { code: String, message: String },
    #[error("protocol version mismatch: ours {ours}, theirs {theirs}")]
    Version { ours: u32, theirs: u32 },
    /// Returned by the server after it sent the client an `ERROR` frame.
    #[error("rejected client [{code}]: {message}")]
    Rejected { code: &'static str, message: String },
    #[error("bridge I/O: {0}")]
    Io(#[from] std::io::Error),
}
