//! Deterministic content hashing for cache keys and manifests.
//!
//! FNV-1a over little-endian byte images. The hash is stable across runs and
//! platforms with IEEE-754 `f64`, which is what the artifact cache and the
//! bit-reproducibility guarantees rely on.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a (64-bit) hasher.
#[derive(Debug, Clone)]
pub struct ContentHasher {
    state: u64,
}

impl Default for ContentHasher {
    fn default() -> Self {
        Self::new()
    }
}

impl ContentHasher {
    /// Fresh hasher at the FNV offset basis.
    pub fn new() -> Self {
        ContentHasher { state: FNV_OFFSET }
    }

    /// Absorb raw bytes.
    pub fn update_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= u64::from(b);
            self.state = self.state.wrapping_mul(FNV_PRIME);
        }
    }

    /// Absorb a `u64` in little-endian byte order.
    pub fn update_u64(&mut self, v: u64) {
        self.update_bytes(&v.to_le_bytes());
    }

    /// Absorb an `f64` via its little-endian bit image.
    pub fn update_f64(&mut self, v: f64) {
        self.update_bytes(&v.to_bits().to_le_bytes());
    }

    /// Absorb a slice of `f64` values.
    pub fn update_f64_slice(&mut self, vs: &[f64]) {
        for &v in vs {
            self.update_f64(v);
        }
    }

    /// Absorb a UTF-8 string (length-prefixed so concatenations cannot collide
    /// across field boundaries).
    pub fn update_str(&mut self, s: &str) {
        self.update_u64(s.len() as u64);
        self.update_bytes(s.as_bytes());
    }

    /// Final digest.
    pub fn finish(&self) -> u64 {
        self.state
    }

    /// Final digest as a fixed-width lowercase hex string.
    pub fn finish_hex(&self) -> String {
        format!("{:016x}", self.state)
    }
}

/// One-shot hash of a byte slice.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h = ContentHasher::new();
    h.update_bytes(bytes);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_vectors() {
        // Standard FNV-1a 64 test vectors.
        assert_eq!(hash_bytes(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(hash_bytes(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(hash_bytes(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn field_boundaries_do_not_collide() {
        let mut a = ContentHasher::new();
        a.update_str("ab");
        a.update_str("c");
        let mut b = ContentHasher::new();
        b.update_str("a");
        b.update_str("bc");
        assert_ne!(a.finish(), b.finish());
    }

    #[test]
    fn f64_hash_depends_on_bits() {
        let mut a = ContentHasher::new();
        a.update_f64(0.0);
        let mut b = ContentHasher::new();
        b.update_f64(-0.0);
        assert_ne!(a.finish(), b.finish());
    }
}
