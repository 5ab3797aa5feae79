//! Serialized block message:
//!
//! ```text
//! "DSIC" | version u8 | n | d | |X| | |Y| | digest [32] | x_fill | y_fill
//!        | context count | bit length per context ... | payload
//! ```
//!
//! Integers are unsigned LEB128. The payload is the concatenation of the
//! per-context substreams, MSB first, zero-padded to a whole byte.

use std::io::{Cursor, Read};

use super::bits::{bit_at, BitWriter};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSIC";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub n: u64,
    pub d: u64,
    pub x_size: u64,
    pub y_size: u64,
    /// SHA-256 of the model's canonical bytes.
    pub digest: [u8; 32],
    pub x_fill: u64,
    pub y_fill: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecMessage {
    pub header: Header,
    /// Substream bit lengths in canonical context order.
    pub lengths: Vec<u64>,
    pub payload: BitWriter,
}

fn varint(out: &mut Vec<u8>, v: u64) {
    leb128::write::unsigned(out, v).expect("writing to a Vec cannot fail");
}

fn read_varint(cur: &mut Cursor<&[u8]>, field: &str) -> Result<u64> {
    let at = cur.position();
    leb128::read::unsigned(cur).map_err(|e| Error::corrupt(format!("{field} at byte {at}"), e))
}

impl CodecMessage {
    pub fn payload_bits(&self) -> u64 {
        self.payload.len()
    }

    /// Offset of each substream within the payload.
    pub fn offsets(&self) -> Vec<u64> {
        let mut acc = 0;
        self.lengths
            .iter()
            .map(|l| {
                let o = acc;
                acc += l;
                o
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + self.lengths.len() + self.payload.as_bytes().len());
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        for v in [h.n, h.d, h.x_size, h.y_size] {
            varint(&mut out, v);
        }
        out.extend_from_slice(&h.digest);
        varint(&mut out, h.x_fill);
        varint(&mut out, h.y_fill);
        varint(&mut out, self.lengths.len() as u64);
        for &l in &self.lengths {
            varint(&mut out, l);
        }
        out.extend_from_slice(self.payload.as_bytes());
        out
    }

    /// Size of everything before the payload, in bytes.
    pub fn header_len(&self) -> usize {
        self.to_bytes().len() - self.payload.as_bytes().len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..4] != MAGIC {
            return Err(Error::corrupt("byte 0", "missing DSIC magic"));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::corrupt(
                "byte 4",
                format!("unsupported format version {}", bytes[4]),
            ));
        }
        let mut cur = Cursor::new(bytes);
        cur.set_position(5);
        let n = read_varint(&mut cur, "n")?;
        let d = read_varint(&mut cur, "d")?;
        let x_size = read_varint(&mut cur, "|X|")?;
        let y_size = read_varint(&mut cur, "|Y|")?;
        let mut digest = [0u8; 32];
        let at = cur.position();
        cur.read_exact(&mut digest)
            .map_err(|_| Error::corrupt(format!("digest at byte {at}"), "truncated"))?;
        let x_fill = read_varint(&mut cur, "x_fill")?;
        let y_fill = read_varint(&mut cur, "y_fill")?;
        let count = read_varint(&mut cur, "context count")?;
        let remaining = bytes.len() as u64 - cur.position();
        if count > remaining {
            return Err(Error::corrupt(
                format!("context count at byte {}", cur.position()),
                format!("{count} contexts cannot fit in {remaining} bytes"),
            ));
        }
        let mut lengths = Vec::with_capacity(count as usize);
        let mut total: u64 = 0;
        for c in 0..count {
            let l = read_varint(&mut cur, &format!("length of context {c}"))?;
            total = total
                .checked_add(l)
                .ok_or_else(|| Error::corrupt(format!("length of context {c}"), "overflow"))?;
            lengths.push(l);
        }
        let start = cur.position() as usize;
        let payload = &bytes[start..];
        if payload.len() as u64 != total.div_ceil(8) {
            return Err(Error::corrupt(
                format!("payload at byte {start}"),
                format!("{} payload bytes for {total} bits", payload.len()),
            ));
        }
        if (total..payload.len() as u64 * 8).any(|i| bit_at(payload, i)) {
            return Err(Error::corrupt(format!("byte {}", bytes.len() - 1), "non-zero padding"));
        }
        Ok(Self {
            header: Header {
                n,
                d,
                x_size,
                y_size,
                digest,
                x_fill,
                y_fill,
            },
            lengths,
            payload: BitWriter::from_parts(payload.to_vec(), total),
        })
    }
}
