//! MSB-first bit buffers.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.last_mut().expect("byte allocated above");
            *last |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub(crate) fn from_parts(bytes: Vec<u8>, len: u64) -> Self {
        debug_assert_eq!(bytes.len() as u64, len.div_ceil(8));
        Self { bytes, len }
    }

    pub fn extend(&mut self, other: &BitWriter) {
        if self.len.is_multiple_of(8) {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
            return;
        }
        for i in 0..other.len {
            self.push(bit_at(&other.bytes, i));
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Backing bytes; bits past `len` in the last byte are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[inline]
pub(crate) fn bit_at(bytes: &[u8], index: u64) -> bool {
    bytes[(index / 8) as usize] & (0x80 >> (index % 8)) != 0
}

/// Reads `len` bits starting at bit `start`, then zeros.
#[derive(Debug, Clone)]
pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    start: u64,
    len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], start: u64, len: u64) -> Self {
        debug_assert!(start + len <= bytes.len() as u64 * 8);
        Self {
            bytes,
            start,
            len,
            pos: 0,
        }
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        let bit = self.pos < self.len && bit_at(self.bytes, self.start + self.pos);
        self.pos += 1;
        bit
    }

    /// Bits requested beyond the end of the slice.
    pub fn overrun(&self) -> u64 {
        self.pos.saturating_sub(self.len)
    }
}
