//! Deterministic derivation of per-stage seeds from one master seed, and
//! content digests.

use sha2::{Digest, Sha256};

/// Seed for `stage`'s `index`-th stream: the first eight bytes of
/// `SHA-256(master || stage || index)`, little-endian.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Hex SHA-256 of `bytes`, used to fingerprint inputs and outputs.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
