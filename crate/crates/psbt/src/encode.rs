//! Bitcoin compact-size integers and a bounds-checked byte reader.

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unexpected end of data")]
    Truncated,
    #[error("non-canonical or oversized compact size")]
    MalformedVarint,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("declared count exceeds available data")]
    Oversized,
}

pub fn write_compact_size(out: &mut Vec<u8>, n: u64) {
    match n {
        0..=0xfc => out.push(n as u8),
        0xfd..=0xffff => {
            out.push(0xfd);
            out.extend_from_slice(&(n as u16).to_le_bytes());
        }
        0x1_0000..=0xffff_ffff => {
            out.push(0xfe);
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        _ => {
            out.push(0xff);
            out.extend_from_slice(&n.to_le_bytes());
        }
    }
}

pub fn write_var_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    write_compact_size(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    /// Reads a compact size, rejecting encodings that are not the shortest form.
    pub fn compact_size(&mut self) -> Result<u64, DecodeError> {
        let n = match self.u8()? {
            0xfd => {
                let v = u16::from_le_bytes(self.array()?) as u64;
                if v < 0xfd {
                    return Err(DecodeError::MalformedVarint);
                }
                v
            }
            0xfe => {
                let v = self.u32()? as u64;
                if v <= 0xffff {
                    return Err(DecodeError::MalformedVarint);
                }
                v
            }
            0xff => {
                let v = self.u64()?;
                if v <= 0xffff_ffff {
                    return Err(DecodeError::MalformedVarint);
                }
                v
            }
            b => b as u64,
        };
        Ok(n)
    }

    /// Reads a count whose items each occupy at least `min_item` bytes.
    pub fn count(&mut self, min_item: usize) -> Result<usize, DecodeError> {
        let n = self.compact_size()?;
        if n.saturating_mul(min_item as u64) > self.remaining() as u64 {
            return Err(DecodeError::Oversized);
        }
        Ok(n as usize)
    }

    pub fn var_bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.compact_size()?;
        if n > self.remaining() as u64 {
            return Err(DecodeError::Truncated);
        }
        self.take(n as usize)
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_size_boundaries() {
        for (n, len) in [(0u64, 1), (0xfc, 1), (0xfd, 3), (0xffff, 3), (0x10000, 5), (0xffff_ffff, 5), (1 << 32, 9)] {
            let mut buf = Vec::new();
            write_compact_size(&mut buf, n);
            assert_eq!(buf.len(), len, "{n}");
            let mut r = Reader::new(&buf);
            assert_eq!(r.compact_size().unwrap(), n);
            assert!(r.is_empty());
        }
    }

    #[test]
    fn non_canonical_compact_size_is_rejected() {
        for bytes in [&[0xfd, 0x10, 0x00][..], &[0xfe, 0xff, 0xff, 0, 0], &[0xff, 1, 0, 0, 0, 0, 0, 0, 0]] {
            assert_eq!(Reader::new(bytes).compact_size(), Err(DecodeError::MalformedVarint));
        }
        assert_eq!(Reader::new(&[0xfd, 0x10]).compact_size(), Err(DecodeError::Truncated));
    }

    #[test]
    fn var_bytes_bounds() {
        assert_eq!(Reader::new(&[3, 1, 2]).var_bytes(), Err(DecodeError::Truncated));
        assert_eq!(Reader::new(&[2, 1, 2]).var_bytes().unwrap(), &[1, 2]);
        assert_eq!(Reader::new(&[0xfe, 0, 0, 0, 1]).count(1), Err(DecodeError::Oversized));
    }
}
