use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::BridgeError;
use crate::prompts::PromptRecord;

pub const PROTOCOL_VERSION: u32 = 1;

/// Header of a frame, without the `payload_bytes` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    Hello {
        version: u32,
        capabilities: Vec<String>,
    },
    SessionStart {
        session_id: String,
        dims: [usize; 3],
        spacing: [f64; 3],
        dtype: String,
    },
    Prompts {
        iteration: usize,
        prompts: Vec<PromptRecord>,
        previous_mask: bool,
    },
    SegmentResult {
        iteration: usize,
        dims: [usize; 3],
    },
    Error {
        code: String,
        message: String,
    },
    SessionEnd,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::SessionStart { .. } => "SESSION_START",
            Message::Prompts { .. } => "PROMPTS",
            Message::SegmentResult { .. } => "SEGMENT_RESULT",
            Message::Error { .. } => "ERROR",
            Message::SessionEnd => "SESSION_END",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub message: Message,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(message: Message) -> Self {
        Self {
            message,
            payload: Vec::new(),
        }
    }

    pub fn with_payload(message: Message, payload: Vec<u8>) -> Self {
        Self { message, payload }
    }

    /// Frame body: header line plus payload, without the length prefix.
    pub fn encode_body(&self) -> Vec<u8> {
        let mut header = serde_json::to_string(&self.message).expect("messages serialize");
        header.pop(); // closing brace
        header.push_str(&format!(",\"payload_bytes\":{}}}\n", self.payload.len()));
        let mut body = header.into_bytes();
        body.extend_from_slice(&self.payload);
        body
    }

    pub fn decode_body(body: &[u8]) -> Result<Self, BridgeError> {
        let bad = |m: String| BridgeError::MalformedFrame(m);
        let nl = body
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("header is not newline-terminated".into()))?;
        let text = std::str::from_utf8(&body[..nl]).map_err(|e| bad(format!("header is not UTF-8: {e}")))?;
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(format!("header: {e}")))?;
        let declared = value
            .as_object_mut()
            .and_then(|o| o.remove("payload_bytes"))
            .and_then(|v| v.as_u64())
            .ok_or_else(|| bad("header lacks an integer payload_bytes".into()))?;
        let payload = &body[nl + 1..];
        if payload.len() as u64 != declared {
            return Err(bad(format!(
                "header declares {declared} payload bytes, frame carries {}",
                payload.len()
            )));
        }
        let message = serde_json::from_value(value).map_err(|e| bad(format!("header: {e}")))?;
        Ok(Self {
            message,
            payload: payload.to_vec(),
        })
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    let body = frame.encode_body();
    w.write_all(&(body.len() as u64).to_le_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Reads one frame. End of stream before the first length byte is a closed
/// connection; end of stream anywhere later is a truncated frame.
pub fn read_frame(r: &mut impl Read) -> Result<Frame, BridgeError> {
    let mut len = [0u8; 8];
    let mut got = 0;
    while got < len.len() {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Err(BridgeError::ConnectionClosed),
            Ok(0) => return Err(BridgeError::MalformedFrame(format!("length prefix truncated at {got} bytes"))),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let n = u64::from_le_bytes(len);
    let mut body = Vec::new();
    // grows with the data actually received, so a garbage length cannot force a huge allocation
    r.take(n).read_to_end(&mut body)?;
    if (body.len() as u64) < n {
        return Err(BridgeError::MalformedFrame(format!(
            "frame declares {n} bytes, stream ended after {}",
            body.len()
        )));
    }
    Frame::decode_body(&body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_bytes() {
        let f = Frame::new(Message::Hello {
            version: 1,
            capabilities: vec!["points".into()],
        });
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        let header = b"{\"type\":\"HELLO\",\"version\":1,\"capabilities\":[\"points\"],\"payload_bytes\":0}\n";
        assert_eq!(&buf[..8], &(header.len() as u64).to_le_bytes());
        assert_eq!(&buf[8..], header);
        assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn session_end_round_trip_with_payload() {
        let f = Frame::with_payload(Message::SessionEnd, vec![0, 10, 255]);
        let body = f.encode_body();
        assert!(body.starts_with(b"{\"type\":\"SESSION_END\",\"payload_bytes\":3}\n"));
        assert_eq!(Frame::decode_body(&body).unwrap(), f);
    }

    #[test]
    fn failures_are_distinct() {
        assert!(matches!(read_frame(&mut &[][..]), Err(BridgeError::ConnectionClosed)));
        assert!(matches!(read_frame(&mut &[3u8, 0][..]), Err(BridgeError::MalformedFrame(_))));
        let mut short = 100u64.to_le_bytes().to_vec();
        short.extend_from_slice(b"{}");
        assert!(matches!(read_frame(&mut short.as_slice()), Err(BridgeError::MalformedFrame(_))));
        for body in [
            &b"{\"type\":\"SESSION_END\",\"payload_bytes\":0}"[..],
            b"{\"type\":\"NOPE\",\"payload_bytes\":0}\n",
            b"{\"type\":\"SESSION_END\"}\n",
            b"{\"type\":\"SESSION_END\",\"payload_bytes\":2}\nx",
            b"\xff\n",
        ] {
            assert!(matches!(Frame::decode_body(body), Err(BridgeError::MalformedFrame(_))), "{body:?}");
        }
    }
}
