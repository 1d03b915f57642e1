//! The executor ↔ runner-shim wire format.
//!
//! A record is `<decimal byte length>:<UTF-8 JSON object>\n`. The parent
//! writes exactly one request to the shim's stdin and reads exactly one
//! response from its stdout.

use std::str;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WIRE_VERSION: u32 = 1;

/// Upper bound on a declared record length, independent of output caps.
const MAX_RECORD: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub version: u32,
    pub source: String,
    pub entry_point: String,
    /// Canonical list literal of positional arguments.
    pub args: String,
}

impl WireRequest {
    pub fn new(source: impl Into<String>, entry_point: impl Into<String>, args: impl Into<String>) -> Self {
        Self { version: WIRE_VERSION, source: source.into(), entry_point: entry_point.into(), args: args.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireStatus {
    Ok,
    Exception,
    Timeout,
    Memory,
    ProtocolError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub version: u32,
    pub status: WireStatus,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub stderr_tail: String,
}

impl WireResponse {
    pub fn ok(value: impl Into<String>) -> Self {
        Self { version: WIRE_VERSION, status: WireStatus::Ok, value: Some(value.into()), stderr_tail: String::new() }
    }

    pub fn failure(status: WireStatus, stderr_tail: impl Into<String>) -> Self {
        Self { version: WIRE_VERSION, status, value: None, stderr_tail: stderr_tail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("record has no length prefix")]
    MissingLength,
    #[error("record length {declared} but {available} bytes available")]
    Truncated { declared: usize, available: usize },
    #[error("record length {0} exceeds limit")]
    TooLong(usize),
    #[error("record body is not valid UTF-8")]
    Utf8,
    #[error("malformed record body: {0}")]
    Json(String),
    #[error("unexpected bytes after record")]
    TrailingData,
    #[error("wire version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
}

pub fn encode<T: Serialize>(record: &T) -> Vec<u8> {
    let body = serde_json::to_string(record).expect("wire records serialize");
    format!("{}:{}\n", body.len(), body).into_bytes()
}

/// Splits one record off the front of `bytes`, returning the body and the
/// remaining bytes.
pub fn split_record(bytes: &[u8]) -> Result<(&[u8], &[u8]), WireError> {
    let colon = bytes.iter().take(21).position(|&b| b == b':').ok_or(WireError::MissingLength)?;
    let digits = str::from_utf8(&bytes[..colon]).map_err(|_| WireError::MissingLength)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(WireError::MissingLength);
    }
    let declared: usize = digits.parse().map_err(|_| WireError::MissingLength)?;
    if declared > MAX_RECORD {
        return Err(WireError::TooLong(declared));
    }
    let rest = &bytes[colon + 1..];
    if rest.len() < declared {
        return Err(WireError::Truncated { declared, available: rest.len() });
    }
    let (body, mut tail) = rest.split_at(declared);
    if tail.first() == Some(&b'\n') {
        tail = &tail[1..];
    }
    Ok((body, tail))
}

fn decode_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, WireError> {
    let text = str::from_utf8(body).map_err(|_| WireError::Utf8)?;
    serde_json::from_str(text).map_err(|e| WireError::Json(e.to_string()))
}

/// Decodes exactly one record; anything but whitespace after it is an error.
pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, WireError> {
    let (body, tail) = split_record(bytes)?;
    if !tail.iter().all(u8::is_ascii_whitespace) {
        return Err(WireError::TrailingData);
    }
    decode_body(body)
}

pub fn decode_request(bytes: &[u8]) -> Result<WireRequest, WireError> {
    let request: WireRequest = decode(bytes)?;
    check_version(request.version)?;
    Ok(request)
}

pub fn decode_response(bytes: &[u8]) -> Result<WireResponse, WireError> {
    let response: WireResponse = decode(bytes)?;
    check_version(response.version)?;
    Ok(response)
}

fn check_version(found: u32) -> Result<(), WireError> {
    if found == WIRE_VERSION {
        Ok(())
    } else {
        Err(WireError::Version { found, expected: WIRE_VERSION })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn request_round_trip() {
        let req = WireRequest::new("def f(x):\n    return x\n", "f", "[42]");
        let bytes = encode(&req);
        assert!(bytes.ends_with(b"\n"));
        assert_eq!(decode_request(&bytes).unwrap(), req);
    }

    #[test]
    fn length_counts_bytes_not_chars() {
        let resp = WireResponse::ok("'héllo'");
        let bytes = encode(&resp);
        let text = String::from_utf8(bytes.clone()).unwrap();
        let (len, body) = text.trim_end().split_once(':').unwrap();
        assert_eq!(len.parse::<usize>().unwrap(), body.len());
        assert_eq!(decode_response(&bytes).unwrap(), resp);
    }

    #[test]
    fn malformed_records() {
        assert_eq!(decode_response(b"{}"), Err(WireError::MissingLength));
        assert!(matches!(decode_response(b"100:{}"), Err(WireError::Truncated { .. })));
        assert!(matches!(decode_response(b"2:{}"), Err(WireError::Json(_))));
        let mut bytes = encode(&WireResponse::ok("1"));
        bytes.extend_from_slice(b"junk");
        assert_eq!(decode_response(&bytes), Err(WireError::TrailingData));
        let mut resp = WireResponse::ok("1");
        resp.version = 9;
        assert_eq!(decode_response(&encode(&resp)), Err(WireError::Version { found: 9, expected: 1 }));
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_response(&bytes);
            let _ = decode_request(&bytes);
        }

        #[test]
        fn any_source_round_trips(source in "\\PC{0,80}", ep in "[a-z_]{1,8}") {
            let req = WireRequest::new(source, ep, "[]");
            prop_assert_eq!(decode_request(&encode(&req)).unwrap(), req);
        }
    }
}
