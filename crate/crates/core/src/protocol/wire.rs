//! Byte-level primitives shared by the message, loss and mechanism encodings.

use num::bigint::Sign;
use num::{BigInt, BigRational};

#[derive(Debug, Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_be_bytes());
    }

    pub(crate) fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    pub(crate) fn raw(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub(crate) fn rational(&mut self, r: &BigRational) {
        let sign = match r.numer().sign() {
            Sign::Minus => 1,
            _ => 0,
        };
        self.u8(sign);
        self.bytes(&r.numer().magnitude().to_bytes_be());
        self.bytes(&r.denom().magnitude().to_bytes_be());
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Some(head)
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f64(&mut self) -> Option<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        let v = f64::from_bits(u64::from_be_bytes(a));
        (!v.is_nan()).then_some(v)
    }

    pub(crate) fn bytes(&mut self) -> Option<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub(crate) fn rest(&mut self) -> &'a [u8] {
        std::mem::take(&mut self.buf)
    }

    pub(crate) fn rational(&mut self) -> Option<BigRational> {
        let sign = self.u8()?;
        let numer = self.bytes()?;
        let denom = self.bytes()?;
        let numer = BigInt::from_bytes_be(
            if sign == 1 { Sign::Minus } else { Sign::Plus },
            numer,
        );
        let denom = BigInt::from_bytes_be(Sign::Plus, denom);
        if sign > 1 || denom == BigInt::from(0) {
            return None;
        }
        Some(BigRational::new(numer, denom))
    }
}
