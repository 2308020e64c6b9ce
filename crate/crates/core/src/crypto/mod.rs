//! TEA block cipher, payload encryption, signatures and multi-signature chains.

mod multisig;
mod payload;
mod sign;
mod tea;

pub use multisig::{multisig_append, multisig_verify, ChainVerdict, MultiSig};
pub use payload::{decrypt_payload, encrypt_payload};
pub use sign::{
    KeyCenter, KeyDirectory, KeyPairRecord, PrivateKey, PublicKey, Signature, SignatureScheme,
};
pub use tea::{tea_decrypt, tea_encrypt, Block64, TeaKey, CYCLES, DELTA};
