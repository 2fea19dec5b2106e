use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpListener;

use super::frame::{read_frame, write_frame, Frame, Message, PROTOCOL_VERSION};
use super::BridgeError;
use crate::backends::{SegmentationRequest, Segmenter};
use crate::error::Result;
use crate::prompts::PromptSet;
use crate::volume::{BinaryMask, Geometry, VoxelGrid};

pub(crate) const SERVER_CAPABILITIES: [&str; 4] = ["points", "box", "scribbles", "previous_mask"];

/// `code` field of the `ERROR` frames a server sends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    /// HELLO carried a protocol version other than ours.
    Version,
    /// A message arrived in a state where it is not allowed.
    State,
    /// A frame or its payload could not be decoded.
    Malformed,
    /// The model failed on an otherwise valid request.
    Backend,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Version => "version",
            ErrorCode::State => "state",
            ErrorCode::Malformed => "malformed",
            ErrorCode::Backend => "backend",
        }
    }
}

struct Session {
    id: String,
    image: VoxelGrid,
    model: Box<dyn Segmenter>,
}

fn reject(w: &mut impl Write, code: ErrorCode, message: String) -> Result<(), BridgeError> {
    log::debug!("bridge server rejecting client [{}]: {message}", code.as_str());
    write_frame(
        w,
        &Frame::new(Message::Error {
            code: code.as_str().into(),
            message: message.clone(),
        }),
    )?;
    Err(BridgeError::Rejected {
        code: code.as_str(),
        message,
    })
}

fn decode_image(session_id: &str, dims: [usize; 3], spacing: [f64; 3], dtype: &str, payload: &[u8]) -> Result<VoxelGrid, String> {
    if dtype != "float32" {
        return Err(format!("image dtype {dtype:?}, expected \"float32\""));
    }
    let geom = Geometry::new(dims, spacing).map_err(|e| e.to_string())?;
    if payload.len() != geom.len() * 4 {
        return Err(format!(
            "session {session_id}: image payload is {} bytes, {geom} needs {}",
            payload.len(),
            geom.len() * 4
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VoxelGrid::from_f32(geom, values).map_err(|e| e.to_string())
}

/// Serves one connection until the client closes it.
///
/// `factory` builds a fresh model for each `SESSION_START` from the session
/// id and image. Protocol violations and model failures are answered with an
/// `ERROR` frame, after which the connection is abandoned and
/// [`BridgeError::Rejected`] returned.
pub fn serve<R, W, F>(reader: R, writer: W, mut factory: F) -> Result<(), BridgeError>
where
    R: Read,
    W: Write,
    F: FnMut(&str, &VoxelGrid) -> Result<Box<dyn Segmenter>>,
{
    let mut r = reader;
    let mut w = writer;
    let mut greeted = false;
    let mut session: Option<Session> = None;
    loop {
        let frame = match read_frame(&mut r) {
            Ok(f) => f,
            Err(BridgeError::ConnectionClosed) => return Ok(()),
            Err(BridgeError::MalformedFrame(m)) => return reject(&mut w, ErrorCode::Malformed, m),
            Err(e) => return Err(e),
        };
        match (greeted, frame.message) {
            (false, Message::Hello { version, .. }) => {
                if version != PROTOCOL_VERSION {
                    return reject(
                        &mut w,
                        ErrorCode::Version,
                        format!("protocol version {version} not supported; this server speaks {PROTOCOL_VERSION}"),
                    );
                }
                greeted = true;
                write_frame(
                    &mut w,
                    &Frame::new(Message::Hello {
                        version: PROTOCOL_VERSION,
                        capabilities: SERVER_CAPABILITIES.iter().map(|s| s.to_string()).collect(),
                    }),
                )?;
            }
            (false, other) => {
                return reject(&mut w, ErrorCode::State, format!("expected HELLO, got {}", other.kind()));
            }
            (true, Message::SessionStart {
                session_id,
                dims,
                spacing,
                dtype,
            }) => {
                if let Some(s) = &session {
                    return reject(
                        &mut w,
                        ErrorCode::State,
                        format!("SESSION_START while session {} is open", s.id),
                    );
                }
                let image = match decode_image(&session_id, dims, spacing, &dtype, &frame.payload) {
                    Ok(g) => g,
                    Err(m) => return reject(&mut w, ErrorCode::Malformed, m),
                };
                let model = match factory(&session_id, &image) {
                    Ok(m) => m,
                    Err(e) => return reject(&mut w, ErrorCode::Backend, e.to_string()),
                };
                session = Some(Session {
                    id: session_id,
                    image,
                    model,
                });
            }
            (true, Message::Prompts {
                iteration,
                prompts,
                previous_mask,
            }) => {
                let Some(s) = session.as_mut() else {
                    return reject(&mut w, ErrorCode::State, "PROMPTS before SESSION_START".into());
                };
                let geom = *s.image.geometry();
                let prompts = match PromptSet::from_records(prompts, iteration) {
                    Ok(p) => p,
                    Err(e) => return reject(&mut w, ErrorCode::Malformed, e.to_string()),
                };
                let prev = match (previous_mask, frame.payload.len()) {
                    (false, 0) => None,
                    (true, n) if n == geom.len() => match BinaryMask::from_u8(geom, &frame.payload) {
                        Ok(m) => Some(m),
                        Err(e) => return reject(&mut w, ErrorCode::Malformed, format!("previous mask: {e}")),
                    },
                    (flag, n) => {
                        return reject(
                            &mut w,
                            ErrorCode::Malformed,
                            format!("previous_mask={flag} with {n} payload bytes for {geom}"),
                        )
                    }
                };
                let req = SegmentationRequest {
                    image: &s.image,
                    prompts: &prompts,
                    previous_mask: prev.as_ref(),
                    session_id: &s.id,
                    iteration,
                };
                let mask = match s.model.segment(&req).and_then(|m| {
                    geom.ensure_same(m.geometry())?;
                    Ok(m)
                }) {
                    Ok(m) => m,
                    Err(e) => return reject(&mut w, ErrorCode::Backend, e.to_string()),
                };
                write_frame(
                    &mut w,
                    &Frame::with_payload(
                        Message::SegmentResult {
                            iteration,
                            dims: geom.dims,
                        },
                        mask.to_u8(),
                    ),
                )?;
            }
            (true, Message::SessionEnd) => {
                let Some(mut s) = session.take() else {
                    return reject(&mut w, ErrorCode::State, "SESSION_END without an open session".into());
                };
                if let Err(e) = s.model.end_session() {
                    return reject(&mut w, ErrorCode::Backend, e.to_string());
                }
            }
            (true, other) => {
                return reject(&mut w, ErrorCode::State, format!("unexpected {} from a client", other.kind()));
            }
        }
    }
}

/// Accepts connections on `listener`, serving each on its own thread.
/// Returns after `max_connections` connections have finished, or never.
pub fn serve_tcp<F>(listener: TcpListener, factory: F, max_connections: Option<usize>) -> Result<(), BridgeError>
where
    F: Fn(&str, &VoxelGrid) -> Result<Box<dyn Segmenter>> + Sync,
{
    let factory = &factory;
    std::thread::scope(|scope| {
        let mut accepted = 0;
        while max_connections.is_none_or(|m| accepted < m) {
            let (stream, peer) = listener.accept()?;
            accepted += 1;
            stream.set_nodelay(true).ok();
            let read_half = stream.try_clone()?;
            scope.spawn(move || {
                match serve(BufReader::new(read_half), BufWriter::new(stream), factory) {
                    Ok(()) => log::debug!("bridge connection from {peer} closed"),
                    Err(e) => log::warn!("bridge connection from {peer}: {e}"),
                }
            });
        }
        Ok(())
    })
}
