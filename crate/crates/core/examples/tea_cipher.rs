//! Encrypts one block with TEA, then a whole payload in counter mode.
//!
//! Run with `cargo run --example tea_cipher`.

use hsrp::crypto::{decrypt_payload, encrypt_payload, tea_decrypt, tea_encrypt, Block64, TeaKey};

fn main() {
    let key = TeaKey([0x0123_4567, 0x89ab_cdef, 0xfedc_ba98, 0x7654_3210]);
    let block = Block64::new(0xdead_beef, 0x0bad_f00d);

    let cipher = tea_encrypt(block, key);
    let plain = tea_decrypt(cipher, key);
    println!("block      {:08x} {:08x}", block.v0, block.v1);
    println!("encrypted  {:08x} {:08x}", cipher.v0, cipher.v1);
    println!("decrypted  {:08x} {:08x}", plain.v0, plain.v1);
    assert_eq!(plain, block);

    let payload = b"route reply for n7 via n3, lifetime 20 s";
    let sealed = encrypt_payload(payload, key, 42);
    let opened = decrypt_payload(&sealed, key).expect("well-formed ciphertext");
    println!("payload    {} bytes -> {} bytes sealed", payload.len(), sealed.len());
    println!("opened     {:?}", String::from_utf8_lossy(&opened));
    assert_eq!(opened, payload);
}
