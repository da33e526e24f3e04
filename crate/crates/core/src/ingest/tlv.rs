//! Payload field codes.
//!
//! A payload is a sequence of `code value` fields:
//!
//! | code        | value                                               |
//! |-------------|-----------------------------------------------------|
//! | `0x02`      | signal quality, 1 byte (0 = best, 200 = no contact) |
//! | `0x00-0x7F` | any other single-byte code: 1 value byte, skipped   |
//! | `0x80`      | one R-R interval, u16 big-endian, milliseconds      |
//! | `0x83`      | eight band powers, 8 x u32 big-endian, device order |
//! | `0x81-0xFF` | any other multi-byte code: 1 length byte + value    |
//!
//! The two known multi-byte codes have fixed widths and carry no length byte.

use thiserror::Error;

use super::frame::RawFrame;
use crate::domain::BAND_COUNT;

pub const CODE_QUALITY: u8 = 0x02;
pub const CODE_RR_INTERVAL: u8 = 0x80;
pub const CODE_BAND_POWER: u8 = 0x83;

const RR_WIDTH: usize = 2;
const BAND_POWER_WIDTH: usize = 4 * BAND_COUNT;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TlvError {
    #[error("field {code:#04x} at offset {offset} declares {declared} bytes, {available} left")]
    Malformed {
        code: u8,
        offset: usize,
        declared: usize,
        available: usize,
    },
}

/// Fields carried by one frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PayloadUpdate {
    pub quality: Option<u8>,
    pub rr_intervals: Vec<u16>,
    pub band_power: Option<[u32; BAND_COUNT]>,
    /// Unknown fields skipped.
    pub skipped: usize,
}

pub fn decode_payload(frame: &RawFrame) -> Result<PayloadUpdate, TlvError> {
    decode_fields(frame.payload())
}

pub fn decode_fields(payload: &[u8]) -> Result<PayloadUpdate, TlvError> {
    let mut update = PayloadUpdate::default();
    let mut pos = 0;
    while pos < payload.len() {
        let code = payload[pos];
        let offset = pos;
        pos += 1;
        let width = match code {
            CODE_RR_INTERVAL => RR_WIDTH,
            CODE_BAND_POWER => BAND_POWER_WIDTH,
            c if c < 0x80 => 1,
            _ => {
                let Some(&declared) = payload.get(pos) else {
                    return Err(TlvError::Malformed {
                        code,
                        offset,
                        declared: 1,
                        available: 0,
                    });
                };
                pos += 1;
                declared as usize
            }
        };
        let available = payload.len() - pos;
        if width > available {
            return Err(TlvError::Malformed {
                code,
                offset,
                declared: width,
                available,
            });
        }
        let value = &payload[pos..pos + width];
        pos += width;
        match code {
            CODE_QUALITY => update.quality = Some(value[0]),
            CODE_RR_INTERVAL => update
                .rr_intervals
                .push(u16::from_be_bytes([value[0], value[1]])),
            CODE_BAND_POWER => {
                let mut powers = [0u32; BAND_COUNT];
                for (p, chunk) in powers.iter_mut().zip(value.chunks_exact(4)) {
                    *p = u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                }
                update.band_power = Some(powers);
            }
            _ => update.skipped += 1,
        }
    }
    Ok(update)
}

/// Builds payloads in the field format above.
#[derive(Debug, Clone, Default)]
pub struct PayloadBuilder {
    bytes: Vec<u8>,
}

impl PayloadBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn quality(mut self, quality: u8) -> Self {
        self.bytes.extend_from_slice(&[CODE_QUALITY, quality]);
        self
    }

    pub fn rr_interval(mut self, ms: u16) -> Self {
        self.bytes.push(CODE_RR_INTERVAL);
        self.bytes.extend_from_slice(&ms.to_be_bytes());
        self
    }

    pub fn band_power(mut self, powers: &[u32; BAND_COUNT]) -> Self {
        self.bytes.push(CODE_BAND_POWER);
        for p in powers {
            self.bytes.extend_from_slice(&p.to_be_bytes());
        }
        self
    }

    /// An opaque field with an explicit length byte (`code >= 0x81`).
    pub fn extended(mut self, code: u8, value: &[u8]) -> Self {
        debug_assert!(code > CODE_RR_INTERVAL && code != CODE_BAND_POWER);
        self.bytes.push(code);
        self.bytes.push(value.len() as u8);
        self.bytes.extend_from_slice(value);
        self
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn build(self) -> Vec<u8> {
        self.bytes
    }
}
