//! Packed bit buffers and the TRNB bitstream file format.
//!
//! TRNB layout (normative for cross-module tests): magic `"TRNB"`, one
//! version byte (1), one flags byte (bit 0 = conditioned), an 8-byte
//! little-endian bit count, then the bits packed LSB-first into bytes.
//! Unused high bits of the final byte are zero.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const TRNB_MAGIC: [u8; 4] = *b"TRNB";
pub const TRNB_VERSION: u8 = 1;
pub const FLAG_CONDITIONED: u8 = 0x01;
const HEADER_LEN: u64 = 14;

/// Bits packed LSB-first into bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitBuffer {
    bytes: Vec<u8>,
    len_bits: u64,
}

impl BitBuffer {
    pub fn new() -> Self {
        BitBuffer::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitBuffer {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len_bits: 0,
        }
    }

    /// Builds a buffer from explicit bits (index 0 first).
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut buf = BitBuffer::new();
        for b in bits {
            buf.push(b);
        }
        buf
    }

    /// Reinterprets packed bytes as a bit buffer of `len_bits` bits.
    pub fn from_bytes(bytes: Vec<u8>, len_bits: u64) -> Result<Self> {
        if bytes.len() as u64 != len_bits.div_ceil(8) {
            return Err(Error::invalid(format!(
                "{} bytes cannot hold exactly {len_bits} bits",
                bytes.len()
            )));
        }
        Ok(BitBuffer { bytes, len_bits })
    }

    pub fn len(&self) -> u64 {
        self.len_bits
    }

    pub fn is_empty(&self) -> bool {
        self.len_bits == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn push(&mut self, bit: bool) {
        let byte = (self.len_bits / 8) as usize;
        let offset = (self.len_bits % 8) as u8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[byte] |= 1 << offset;
        }
        self.len_bits += 1;
    }

    pub fn get(&self, index: u64) -> bool {
        assert!(index < self.len_bits, "bit index out of range");
        (self.bytes[(index / 8) as usize] >> (index % 8)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len_bits).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> u64 {
        // the writer keeps padding bits zero, so popcount over bytes is exact
        self.bytes.iter().map(|b| b.count_ones() as u64).sum()
    }

    pub fn extend_from(&mut self, other: &BitBuffer) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Drops bits past `len_bits`.
    pub fn truncate(&mut self, len_bits: u64) {
        if len_bits >= self.len_bits {
            return;
        }
        self.len_bits = len_bits;
        self.bytes.truncate(len_bits.div_ceil(8) as usize);
        let tail = (len_bits % 8) as u8;
        if tail != 0 {
            let last = self.bytes.len() - 1;
            self.bytes[last] &= (1u16 << tail) as u8 - 1;
        }
    }
}

/// Serializes a bit buffer to the TRNB format.
pub fn write_trnb<W: Write>(mut w: W, bits: &BitBuffer, conditioned: bool) -> Result<()> {
    w.write_all(&TRNB_MAGIC)?;
    w.write_all(&[TRNB_VERSION])?;
    w.write_all(&[if conditioned { FLAG_CONDITIONED } else { 0 }])?;
    w.write_all(&bits.len().to_le_bytes())?;
    w.write_all(bits.as_bytes())?;
    Ok(())
}

/// Parses a TRNB stream, returning the bits and the conditioned flag.
/// Validation failures report the byte offset of the first offending byte.
pub fn read_trnb<R: Read>(mut r: R) -> Result<(BitBuffer, bool)> {
    let mut header = [0u8; HEADER_LEN as usize];
    let got = read_up_to(&mut r, &mut header)?;
    if got < header.len() {
        return Err(Error::MalformedBitstream {
            offset: got as u64,
            reason: format!("truncated header ({got} of {HEADER_LEN} bytes)"),
        });
    }
    if header[0..4] != TRNB_MAGIC {
        return Err(Error::MalformedBitstream {
            offset: 0,
            reason: format!("bad magic {:02x?} (expected \"TRNB\")", &header[0..4]),
        });
    }
    if header[4] != TRNB_VERSION {
        return Err(Error::MalformedBitstream {
            offset: 4,
            reason: format!("unsupported version {}", header[4]),
        });
    }
    if header[5] & !FLAG_CONDITIONED != 0 {
        return Err(Error::MalformedBitstream {
            offset: 5,
            reason: format!("unknown flag bits 0x{:02x}", header[5]),
        });
    }
    let conditioned = header[5] & FLAG_CONDITIONED != 0;
    let len_bits = u64::from_le_bytes(header[6..14].try_into().unwrap());
    let expected_bytes = len_bits.div_ceil(8);
    let mut payload = vec![0u8; expected_bytes as usize];
    let got = read_up_to(&mut r, &mut payload)?;
    if (got as u64) < expected_bytes {
        return Err(Error::MalformedBitstream {
            offset: HEADER_LEN + got as u64,
            reason: format!(
                "truncated payload ({got} of {expected_bytes} bytes for {len_bits} bits)"
            ),
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::MalformedBitstream {
            offset: HEADER_LEN + expected_bytes,
            reason: "trailing data after payload".into(),
        });
    }
    let tail = (len_bits % 8) as u8;
    if tail != 0 {
        let mask = !((1u16 << tail) as u8).wrapping_sub(1);
        let last = payload[expected_bytes as usize - 1];
        if last & mask != 0 {
            return Err(Error::MalformedBitstream {
                offset: HEADER_LEN + expected_bytes - 1,
                reason: "nonzero padding bits in final byte".into(),
            });
        }
    }
    Ok((BitBuffer::from_bytes(payload, len_bits)?, conditioned))
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_and_get_lsb_first() {
        let mut b = BitBuffer::new();
        b.push(true);
        b.push(false);
        b.push(true);
        assert_eq!(b.as_bytes(), &[0b101]);
        assert!(b.get(0));
        assert!(!b.get(1));
        assert!(b.get(2));
    }

    #[test]
    fn truncate_clears_padding() {
        let mut b = BitBuffer::from_bits((0..16).map(|_| true));
        b.truncate(9);
        assert_eq!(b.len(), 9);
        assert_eq!(b.as_bytes(), &[0xFF, 0x01]);
        assert_eq!(b.count_ones(), 9);
    }

    #[test]
    fn header_layout_is_exact() {
        let bits = BitBuffer::from_bits([true, false, true, true]);
        let mut out = Vec::new();
        write_trnb(&mut out, &bits, true).unwrap();
        assert_eq!(&out[0..4], b"TRNB");
        assert_eq!(out[4], 1);
        assert_eq!(out[5], 1);
        assert_eq!(u64::from_le_bytes(out[6..14].try_into().unwrap()), 4);
        assert_eq!(out[14], 0b1101);
        assert_eq!(out.len(), 15);
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let err = read_trnb(&b"TRN"[..]).unwrap_err();
        assert!(matches!(err, Error::MalformedBitstream { offset: 3, .. }), "{err}");

        let err = read_trnb(&b"XRNB\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00"[..]).unwrap_err();
        assert!(matches!(err, Error::MalformedBitstream { offset: 0, .. }));

        let err = read_trnb(&b"TRNB\x02\x00\x00\x00\x00\x00\x00\x00\x00\x00"[..]).unwrap_err();
        assert!(matches!(err, Error::MalformedBitstream { offset: 4, .. }));

        // 9 bits declared, one payload byte supplied
        let err =
            read_trnb(&b"TRNB\x01\x00\x09\x00\x00\x00\x00\x00\x00\x00\xff"[..]).unwrap_err();
        assert!(matches!(err, Error::MalformedBitstream { offset: 15, .. }), "{err}");

        // trailing byte after payload
        let err =
            read_trnb(&b"TRNB\x01\x00\x08\x00\x00\x00\x00\x00\x00\x00\xff\x00"[..]).unwrap_err();
        assert!(matches!(err, Error::MalformedBitstream { offset: 15, .. }));

        // nonzero padding in final byte (4 bits declared)
        let err =
            read_trnb(&b"TRNB\x01\x00\x04\x00\x00\x00\x00\x00\x00\x00\xff"[..]).unwrap_err();
        assert!(matches!(err, Error::MalformedBitstream { offset: 14, .. }));
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_bits(bits in proptest::collection::vec(any::<bool>(), 0..600),
                                    conditioned in any::<bool>()) {
            let buf = BitBuffer::from_bits(bits.iter().copied());
            let mut out = Vec::new();
            write_trnb(&mut out, &buf, conditioned).unwrap();
            let (back, flag) = read_trnb(&out[..]).unwrap();
            prop_assert_eq!(back, buf);
            prop_assert_eq!(flag, conditioned);
        }
    }
}
