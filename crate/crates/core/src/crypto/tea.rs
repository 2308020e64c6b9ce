//! The Tiny Encryption Algorithm: 64-bit blocks, 128-bit keys, 32 cycles.
//!
//! Bytes map to words big-endian: `Block64::from_bytes([a,b,c,d,e,f,g,h])`
//! gives `v0 = 0xabcd..`, `v1 = 0xefgh..` and keys likewise take `k0..k3`
//! from consecutive 4-byte groups.

/// Key schedule constant, `floor(2^32 / golden ratio)`.
pub const DELTA: u32 = 0x9E37_79B9;
pub const CYCLES: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TeaKey(pub [u32; 4]);

impl TeaKey {
    pub fn from_bytes(b: [u8; 16]) -> Self {
        let w = |i: usize| u32::from_be_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        TeaKey([w(0), w(4), w(8), w(12)])
    }

    pub fn to_bytes(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        for (i, w) in self.0.iter().enumerate() {
            out[i * 4..i * 4 + 4].copy_from_slice(&w.to_be_bytes());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Block64 {
    pub v0: u32,
    pub v1: u32,
}

impl Block64 {
    pub fn new(v0: u32, v1: u32) -> Self {
        Block64 { v0, v1 }
    }

    pub fn from_u64(x: u64) -> Self {
        Block64 {
            v0: (x >> 32) as u32,
            v1: x as u32,
        }
    }

    pub fn to_u64(self) -> u64 {
        (u64::from(self.v0) << 32) | u64::from(self.v1)
    }

    pub fn from_bytes(b: [u8; 8]) -> Self {
        Self::from_u64(u64::from_be_bytes(b))
    }

    pub fn to_bytes(self) -> [u8; 8] {
        self.to_u64().to_be_bytes()
    }
}

pub fn tea_encrypt(block: Block64, key: TeaKey) -> Block64 {
    let [k0, k1, k2, k3] = key.0;
    let Block64 { mut v0, mut v1 } = block;
    let mut sum: u32 = 0;
    for _ in 0..CYCLES {
        sum = sum.wrapping_add(DELTA);
        v0 = v0.wrapping_add(
            (v1 << 4).wrapping_add(k0) ^ v1.wrapping_add(sum) ^ (v1 >> 5).wrapping_add(k1),
        );
        v1 = v1.wrapping_add(
            (v0 << 4).wrapping_add(k2) ^ v0.wrapping_add(sum) ^ (v0 >> 5).wrapping_add(k3),
        );
    }
    Block64 { v0, v1 }
}

pub fn tea_decrypt(block: Block64, key: TeaKey) -> Block64 {
    let [k0, k1, k2, k3] = key.0;
    let Block64 { mut v0, mut v1 } = block;
    let mut sum: u32 = DELTA.wrapping_mul(CYCLES);
    for _ in 0..CYCLES {
        v1 = v1.wrapping_sub(
            (v0 << 4).wrapping_add(k2) ^ v0.wrapping_add(sum) ^ (v0 >> 5).wrapping_add(k3),
        );
        v0 = v0.wrapping_sub(
            (v1 << 4).wrapping_add(k0) ^ v1.wrapping_add(sum) ^ (v1 >> 5).wrapping_add(k1),
        );
        sum = sum.wrapping_sub(DELTA);
    }
    Block64 { v0, v1 }
}
