use tiny_keccak::{Hasher, Keccak};

use crate::mcvm::Word;

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut hasher = Keccak::v256();
    hasher.update(data);
    let mut out = [0u8; 32];
    hasher.finalize(&mut out);
    out
}

pub fn keccak_word(data: &[u8]) -> Word {
    Word::from_big_endian(&keccak256(data))
}

/// Solidity mapping layout: `keccak(key . base)`.
pub fn mapping_slot(key: Word, base: Word) -> Word {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(&key.to_big_endian());
    buf[32..].copy_from_slice(&base.to_big_endian());
    keccak_word(&buf)
}

/// Solidity dynamic-array element layout: `keccak(base) + index`.
pub fn array_slot(base: Word, index: u64) -> Word {
    keccak_word(&base.to_big_endian()).overflowing_add(Word::from(index)).0
}
