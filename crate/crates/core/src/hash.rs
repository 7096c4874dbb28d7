//! Content hashing for prompt ids and run fingerprints.

use alloc::string::String;
use core::fmt::Write;

use sha2::{Digest, Sha256};

/// Incremental SHA-256 over length-prefixed fields, rendered as 32 hex
/// characters (the first 128 bits).
///
/// Length prefixes keep `("ab", "c")` and `("a", "bc")` distinct.
#[derive(Clone, Default)]
pub struct ContentHasher {
    inner: Sha256,
}

impl ContentHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn finish_bytes(&self) -> [u8; 32] {
        self.inner.clone().finalize().into()
    }

    pub fn finish(&self) -> String {
        let digest = self.inner.clone().finalize();
        let mut out = String::with_capacity(32);
        for b in &digest[..16] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

/// Hash of a single byte string.
pub fn content_hash(bytes: &[u8]) -> String {
    ContentHasher::new().field(bytes).finish()
}
