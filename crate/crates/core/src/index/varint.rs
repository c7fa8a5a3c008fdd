//! LEB128-style variable-length integers and a small byte cursor.

/// Appends `value` using 7 bits per byte, low bits first; the high bit of
/// each byte marks a continuation.
pub fn write_u64(buf: &mut Vec<u8>, mut value: u64) {
    while value >= 0x80 {
        buf.push((value as u8 & 0x7f) | 0x80);
        value >>= 7;
    }
    buf.push(value as u8);
}

pub fn write_u32(buf: &mut Vec<u8>, value: u32) {
    write_u64(buf, u64::from(value));
}

pub fn write_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    write_u64(buf, bytes.len() as u64);
    buf.extend_from_slice(bytes);
}

pub fn write_str(buf: &mut Vec<u8>, s: &str) {
    write_bytes(buf, s.as_bytes());
}

/// Delta-encodes a sorted sequence: count, first value, then gaps.
pub fn write_sorted_u32s(buf: &mut Vec<u8>, values: &[u32]) {
    write_u64(buf, values.len() as u64);
    let mut prev = 0u32;
    for &v in values {
        debug_assert!(v >= prev);
        write_u32(buf, v - prev);
        prev = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncated;

/// Read cursor over a byte slice. Every read fails with [`Truncated`]
/// instead of panicking on short input.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn u64(&mut self) -> Result<u64, Truncated> {
        let mut value = 0u64;
        let mut shift = 0u32;
        loop {
            let byte = *self.data.get(self.pos).ok_or(Truncated)?;
            self.pos += 1;
            if shift >= 64 {
                return Err(Truncated);
            }
            value |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            shift += 7;
        }
    }

    pub fn u32(&mut self) -> Result<u32, Truncated> {
        u32::try_from(self.u64()?).map_err(|_| Truncated)
    }

    pub fn len(&mut self) -> Result<usize, Truncated> {
        usize::try_from(self.u64()?).map_err(|_| Truncated)
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], Truncated> {
        let end = self.pos.checked_add(n).ok_or(Truncated)?;
        let out = self.data.get(self.pos..end).ok_or(Truncated)?;
        self.pos = end;
        Ok(out)
    }

    pub fn prefixed_bytes(&mut self) -> Result<&'a [u8], Truncated> {
        let n = self.len()?;
        self.bytes(n)
    }

    pub fn string(&mut self) -> Result<String, Truncated> {
        let b = self.prefixed_bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| Truncated)
    }

    pub fn u8(&mut self) -> Result<u8, Truncated> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32_le(&mut self) -> Result<u32, Truncated> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn i32_le(&mut self) -> Result<i32, Truncated> {
        Ok(self.u32_le()? as i32)
    }

    pub fn u64_le(&mut self) -> Result<u64, Truncated> {
        let b = self.bytes(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    pub fn sorted_u32s(&mut self) -> Result<Vec<u32>, Truncated> {
        let n = self.len()?;
        // Each value takes at least one byte; reject absurd counts early.
        if n > self.data.len() - self.pos.min(self.data.len()) {
            return Err(Truncated);
        }
        let mut out = Vec::with_capacity(n);
        let mut prev = 0u32;
        for _ in 0..n {
            prev = prev.checked_add(self.u32()?).ok_or(Truncated)?;
            out.push(prev);
        }
        Ok(out)
    }
}
