use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::frame::{read_frame, write_frame, Frame, Message, PROTOCOL_VERSION};
use super::BridgeError;
use crate::backends::{SegmentationRequest, Segmenter};
use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Geometry};

pub(crate) const CLIENT_CAPABILITIES: [&str; 4] = ["points", "box", "scribbles", "previous_mask"];

/// Where the server lives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Spawn `command[0]` with the remaining arguments and talk over its stdin/stdout.
    Stdio { command: Vec<String> },
    Tcp { address: String },
}

/// Client side of the bridge. One instance drives one session at a time.
pub struct BridgeBackend {
    reader: Box<dyn Read + Send>,
    writer: Option<Box<dyn Write + Send>>,
    child: Option<Child>,
    session: Option<(String, Geometry)>,
    server_capabilities: Vec<String>,
}

impl std::fmt::Debug for BridgeBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeBackend")
            .field("session", &self.session)
            .field("server_capabilities", &self.server_capabilities)
            .finish_non_exhaustive()
    }
}

fn bridge_err(e: BridgeError) -> Error {
    Error::Bridge(e)
}

impl BridgeBackend {
    pub fn connect(transport: &Transport) -> Result<Self> {
        match transport {
            Transport::Stdio { command } => {
                let (program, args) = command
                    .split_first()
                    .ok_or_else(|| Error::Config("bridge stdio command is empty".into()))?;
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::io(program, e))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut backend = Self::unconnected(Box::new(BufReader::new(stdout)), Box::new(BufWriter::new(stdin)));
                backend.child = Some(child);
                backend.handshake()?;
                Ok(backend)
            }
            Transport::Tcp { address } => {
                let stream = TcpStream::connect(address).map_err(|e| Error::io(address, e))?;
                stream.set_nodelay(true).ok();
                let read_half = stream.try_clone().map_err(BridgeError::Io).map_err(bridge_err)?;
                Self::from_streams(Box::new(BufReader::new(read_half)), Box::new(BufWriter::new(stream)))
            }
        }
    }

    /// Performs the handshake over an already open byte stream pair.
    pub fn from_streams(reader: Box<dyn Read + Send>, writer: Box<dyn Write + Send>) -> Result<Self> {
        let mut backend = Self::unconnected(reader, writer);
        backend.handshake()?;
        Ok(backend)
    }

    fn unconnected(reader: Box<dyn Read + Send>, writer: Box<dyn Write + Send>) -> Self {
        Self {
            reader,
            writer: Some(writer),
            child: None,
            session: None,
            server_capabilities: Vec::new(),
        }
    }

    pub fn server_capabilities(&self) -> &[String] {
        &self.server_capabilities
    }

    fn handshake(&mut self) -> Result<()> {
        self.send(&Frame::new(Message::Hello {
            version: PROTOCOL_VERSION,
            capabilities: CLIENT_CAPABILITIES.iter().map(|s| s.to_string()).collect(),
        }))?;
        match self.receive()?.message {
            Message::Hello { version, capabilities } if version == PROTOCOL_VERSION => {
                self.server_capabilities = capabilities;
                Ok(())
            }
            Message::Hello { version, .. } => Err(bridge_err(BridgeError::Version {
                ours: PROTOCOL_VERSION,
                theirs: version,
            })),
            other => Err(unexpected("HELLO", &other)),
        }
    }

    /// Writes a frame. If the peer already hung up, its parting ERROR frame
    /// (if any) is the more useful failure to report.
    fn send(&mut self, frame: &Frame) -> Result<()> {
        let writer = self.writer.as_mut().ok_or(bridge_err(BridgeError::ConnectionClosed))?;
        match write_frame(writer, frame) {
            Ok(()) => Ok(()),
            Err(e) if matches!(e.kind(), io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset) => {
                match read_frame(&mut self.reader) {
                    Ok(Frame {
                        message: Message::Error { code, message },
                        ..
                    }) => Err(bridge_err(BridgeError::Remote { code, message })),
                    _ => Err(bridge_err(BridgeError::ConnectionClosed)),
                }
            }
            Err(e) => Err(bridge_err(BridgeError::Io(e))),
        }
    }

    fn receive(&mut self) -> Result<Frame> {
        let frame = read_frame(&mut self.reader).map_err(bridge_err)?;
        if let Message::Error { code, message } = frame.message {
            return Err(bridge_err(BridgeError::Remote { code, message }));
        }
        Ok(frame)
    }

    fn start_session(&mut self, req: &SegmentationRequest<'_>) -> Result<()> {
        let geom = *req.geometry();
        let payload: Vec<u8> = req.image.to_f32_vec().iter().flat_map(|v| v.to_le_bytes()).collect();
        self.send(&Frame::with_payload(
            Message::SessionStart {
                session_id: req.session_id.to_string(),
                dims: geom.dims,
                spacing: geom.spacing,
                dtype: "float32".into(),
            },
            payload,
        ))?;
        self.session = Some((req.session_id.to_string(), geom));
        Ok(())
    }
}

fn unexpected(expected: &'static str, found: &Message) -> Error {
    bridge_err(BridgeError::Unexpected {
        expected,
        found: found.kind().into(),
    })
}

impl Segmenter for BridgeBackend {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        req.validate()?;
        let geom = *req.geometry();
        match &self.session {
            Some((id, g)) if id == req.session_id && *g == geom => {}
            Some(_) => {
                self.end_session()?;
                self.start_session(req)?;
            }
            None => self.start_session(req)?,
        }
        let payload = req.previous_mask.map(BinaryMask::to_u8).unwrap_or_default();
        self.send(&Frame::with_payload(
            Message::Prompts {
                iteration: req.iteration,
                prompts: req.prompts.records(),
                previous_mask: req.previous_mask.is_some(),
            },
            payload,
        ))?;
        let frame = self.receive()?;
        let Message::SegmentResult { iteration, dims } = frame.message else {
            return Err(unexpected("SEGMENT_RESULT", &frame.message));
        };
        if iteration != req.iteration {
            return Err(bridge_err(BridgeError::MalformedFrame(format!(
                "result for iteration {iteration}, requested {}",
                req.iteration
            ))));
        }
        if dims != geom.dims || frame.payload.len() != geom.len() {
            return Err(bridge_err(BridgeError::GeometryMismatch {
                expected: geom.to_string(),
                found: format!("{dims:?} with {} payload bytes", frame.payload.len()),
            }));
        }
        BinaryMask::from_u8(geom, &frame.payload)
            .map_err(|e| bridge_err(BridgeError::MalformedFrame(format!("mask payload: {e}"))))
    }

    fn end_session(&mut self) -> Result<()> {
        if self.session.take().is_some() {
            self.send(&Frame::new(Message::SessionEnd))?;
        }
        Ok(())
    }
}

impl Drop for BridgeBackend {
    fn drop(&mut self) {
        // closing our end lets a stdio server see EOF and exit
        self.writer = None;
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => return,
                    Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                    _ => break,
                }
            }
            log::warn!("bridge server process did not exit; killing it");
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
