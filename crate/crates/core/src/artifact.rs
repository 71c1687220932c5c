//! Content hashes that tie pipeline artifacts to the inputs they came from.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the value's canonical JSON encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("artifact serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            content_hash(&"abc"),
            // sha256 of the four bytes "abc" including quotes
            hex::encode(Sha256::digest(b"\"abc\""))
        );
        assert_eq!(content_hash(&1u8).len(), 64);
        assert_ne!(content_hash(&1u8), content_hash(&2u8));
    }
}
