//! Canonical byte encoding used for every hash and signature.
//!
//! Each field is written as an 8-byte big-endian length followed by the
//! field bytes. Integers are 8-byte big-endian, booleans a single byte,
//! nested values and lists are themselves length-prefixed. A list body is
//! its element count followed by each element as a length-prefixed field.

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes a length-prefixed byte field.
    pub fn bytes(&mut self, field: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(&(field.len() as u64).to_be_bytes());
        self.buf.extend_from_slice(field);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.bytes(&[u8::from(v)])
    }

    pub fn nested<T: Canonical + ?Sized>(&mut self, value: &T) -> &mut Self {
        let inner = value.to_canonical_bytes();
        self.bytes(&inner)
    }

    pub fn list<T: Canonical>(&mut self, items: &[T]) -> &mut Self {
        let mut body = Encoder::new();
        body.u64(items.len() as u64);
        for item in items {
            body.nested(item);
        }
        self.bytes(&body.finish())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Types with a bit-exact canonical serialization.
pub trait Canonical {
    fn encode(&self, enc: &mut Encoder);

    fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        enc.finish()
    }
}
