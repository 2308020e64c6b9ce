//! TEA in counter mode for data payloads.
//!
//! Layout: `counter (8, BE) || ciphertext (padded len) || plaintext length (4, BE)`.
//! The plaintext is padded with `0x80` then zeros up to a multiple of 8 bytes;
//! block `i` is XORed with `TEA(counter + i)`.

use super::tea::{tea_encrypt, Block64, TeaKey};
use crate::error::CryptoError;

const PREFIX: usize = 8;
const TRAILER: usize = 4;

fn padded_len(n: usize) -> usize {
    (n + 1).div_ceil(8) * 8
}

fn keystream_xor(data: &mut [u8], key: TeaKey, counter: u64) {
    for (i, chunk) in data.chunks_mut(8).enumerate() {
        let ks = tea_encrypt(Block64::from_u64(counter.wrapping_add(i as u64)), key).to_bytes();
        for (b, k) in chunk.iter_mut().zip(ks) {
            *b ^= k;
        }
    }
}

pub fn encrypt_payload(payload: &[u8], key: TeaKey, counter: u64) -> Vec<u8> {
    let len = u32::try_from(payload.len()).expect("payload longer than 4 GiB");
    let mut body = Vec::with_capacity(padded_len(payload.len()));
    body.extend_from_slice(payload);
    body.push(0x80);
    body.resize(padded_len(payload.len()), 0);
    keystream_xor(&mut body, key, counter);

    let mut out = Vec::with_capacity(PREFIX + body.len() + TRAILER);
    out.extend_from_slice(&counter.to_be_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&len.to_be_bytes());
    out
}

pub fn decrypt_payload(ciphertext: &[u8], key: TeaKey) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < PREFIX + 8 + TRAILER {
        return Err(CryptoError::MalformedCiphertext("too short"));
    }
    let body_len = ciphertext.len() - PREFIX - TRAILER;
    if body_len % 8 != 0 {
        return Err(CryptoError::MalformedCiphertext("body not block aligned"));
    }
    let counter = u64::from_be_bytes(ciphertext[..PREFIX].try_into().expect("8 bytes"));
    let len = u32::from_be_bytes(
        ciphertext[PREFIX + body_len..]
            .try_into()
            .expect("4 bytes"),
    ) as usize;
    if padded_len(len) != body_len {
        return Err(CryptoError::MalformedCiphertext("length trailer mismatch"));
    }
    let mut body = ciphertext[PREFIX..PREFIX + body_len].to_vec();
    keystream_xor(&mut body, key, counter);
    if body[len] != 0x80 || body[len + 1..].iter().any(|&b| b != 0) {
        return Err(CryptoError::MalformedCiphertext("bad padding"));
    }
    body.truncate(len);
    Ok(body)
}
