//! Device framing.
//!
//! Every frame on the wire is laid out as
//!
//! ```text
//! +------+------+-----+-------------------+----------+
//! | 0xAA | 0xAA | len | payload (len B)   | checksum |
//! +------+------+-----+-------------------+----------+
//! ```
//!
//! with `1 <= len <= 169` and `checksum = !(sum(payload) mod 256)`.
//! A length byte of `0xAA` is read as an extra sync byte, so any number of
//! leading sync bytes is tolerated.

use thiserror::Error;

pub const SYNC: u8 = 0xAA;
pub const MAX_PAYLOAD: usize = 169;

/// Bytes of framing around the payload: two sync bytes, length, checksum.
pub const FRAME_OVERHEAD: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    /// The frame at the head of the buffer failed its checksum. `consumed`
    /// bytes (leading garbage plus the bad frame) should be dropped.
    #[error("checksum mismatch: expected {expected:#04x}, found {found:#04x}")]
    ChecksumMismatch {
        expected: u8,
        found: u8,
        consumed: usize,
    },
    /// No complete frame is buffered yet. The first `discardable` bytes can
    /// never start a frame and may be dropped before more input is appended.
    #[error("truncated frame: more input required")]
    Truncated { discardable: usize },
    #[error("payload length {0} outside 1..={MAX_PAYLOAD}")]
    InvalidLength(usize),
}

/// A checksum-valid frame. Construction enforces the length bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    payload: Vec<u8>,
}

impl RawFrame {
    pub fn new(payload: Vec<u8>) -> Result<Self, FrameError> {
        if payload.is_empty() || payload.len() > MAX_PAYLOAD {
            return Err(FrameError::InvalidLength(payload.len()));
        }
        Ok(Self { payload })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn checksum(&self) -> u8 {
        checksum(&self.payload)
    }

    pub fn encoded_len(&self) -> usize {
        self.payload.len() + FRAME_OVERHEAD
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&[SYNC, SYNC, self.payload.len() as u8]);
        out.extend_from_slice(&self.payload);
        out.push(self.checksum());
    }
}

/// Bitwise NOT of the payload byte sum modulo 256.
pub fn checksum(payload: &[u8]) -> u8 {
    !payload.iter().fold(0u8, |acc, b| acc.wrapping_add(*b))
}

/// Parse the first complete frame in `bytes`, skipping any garbage before it.
///
/// On success returns the frame and the number of bytes consumed (garbage
/// included). Never panics, whatever the input.
pub fn parse_frame(bytes: &[u8]) -> Result<(RawFrame, usize), FrameError> {
    let len = bytes.len();
    let mut start = 0;
    loop {
        let Some(sync_at) = find_sync(bytes, start) else {
            // Keep a trailing lone sync byte: its partner may arrive next.
            let discardable = if bytes.last() == Some(&SYNC) {
                len - 1
            } else {
                len
            };
            return Err(FrameError::Truncated { discardable });
        };
        let len_at = sync_at + 2;
        if len_at >= len {
            return Err(FrameError::Truncated {
                discardable: sync_at,
            });
        }
        let payload_len = bytes[len_at] as usize;
        if payload_len == 0 || payload_len > MAX_PAYLOAD {
            // 0xAA lands here too: treat it as one more sync byte.
            start = sync_at + 1;
            continue;
        }
        let checksum_at = len_at + 1 + payload_len;
        if checksum_at >= len {
            return Err(FrameError::Truncated {
                discardable: sync_at,
            });
        }
        let payload = &bytes[len_at + 1..checksum_at];
        let expected = checksum(payload);
        let found = bytes[checksum_at];
        let consumed = checksum_at + 1;
        if expected != found {
            return Err(FrameError::ChecksumMismatch {
                expected,
                found,
                consumed,
            });
        }
        return Ok((
            RawFrame {
                payload: payload.to_vec(),
            },
            consumed,
        ));
    }
}

fn find_sync(bytes: &[u8], from: usize) -> Option<usize> {
    if bytes.len() < 2 || from >= bytes.len() - 1 {
        return None;
    }
    bytes[from..]
        .windows(2)
        .position(|w| w[0] == SYNC && w[1] == SYNC)
        .map(|p| p + from)
}

/// Counters kept by [`FrameParser`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParserStats {
    pub frames: u64,
    pub checksum_errors: u64,
    pub discarded_bytes: u64,
}

/// Incremental single-consumer frame parser. Feed arbitrary chunks with
/// [`push`](Self::push) and drain frames with [`next_frame`](Self::next_frame).
#[derive(Debug, Default)]
pub struct FrameParser {
    buf: Vec<u8>,
    stats: ParserStats,
}

impl FrameParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn stats(&self) -> ParserStats {
        self.stats
    }

    /// Next valid frame, or `None` once the buffer holds no complete frame.
    /// Checksum failures are counted and skipped.
    pub fn next_frame(&mut self) -> Option<RawFrame> {
        loop {
            match parse_frame(&self.buf) {
                Ok((frame, consumed)) => {
                    self.stats.discarded_bytes += (consumed - frame.encoded_len()) as u64;
                    self.stats.frames += 1;
                    self.buf.drain(..consumed);
                    return Some(frame);
                }
                Err(FrameError::ChecksumMismatch { consumed, .. }) => {
                    self.stats.checksum_errors += 1;
                    self.stats.discarded_bytes += consumed as u64;
                    self.buf.drain(..consumed);
                }
                Err(FrameError::Truncated { discardable }) => {
                    self.stats.discarded_bytes += discardable as u64;
                    self.buf.drain(..discardable);
                    return None;
                }
                Err(FrameError::InvalidLength(_)) => unreachable!("parse_frame never reports length"),
            }
        }
    }

    /// Push `bytes` and return every frame that became complete.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<RawFrame> {
        self.push(bytes);
        std::iter::from_fn(|| self.next_frame()).collect()
    }
}
