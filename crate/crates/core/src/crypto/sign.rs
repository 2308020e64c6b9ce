//! Node key pairs, the trusted key directory and the signature scheme.
//!
//! The default scheme is a keyed digest: a signature is
//! `HMAC-SHA256(secret, message)` and the public key is
//! `SHA-256("hsrp-public-key" || secret)`. Verification needs the secret, so
//! the [`KeyCenter`] that generated the pairs keeps a public-key-to-secret table
//! and acts as the verifier. Nodes only ever hold their own [`PrivateKey`]; the
//! table is never serialized or printed.

use std::collections::BTreeMap;
use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::error::CryptoError;
use crate::kernel::RandomStream;
use crate::NodeId;

type HmacSha256 = Hmac<Sha256>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(&self.0[..8]))
    }
}

/// Never printed: `Debug` shows a placeholder.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateKey([u8; 32]);

impl PrivateKey {
    /// Raw secret bytes; used by tests that scan outputs for leaks.
    pub fn expose_secret(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(<redacted>)")
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(pub Vec<u8>);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0))
    }
}

#[derive(Debug, Clone)]
pub struct KeyPairRecord {
    pub node: NodeId,
    pub public_key: PublicKey,
    pub private_key: PrivateKey,
}

/// Public keys of every legitimate node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyDirectory {
    keys: BTreeMap<NodeId, PublicKey>,
}

impl KeyDirectory {
    pub fn get(&self, node: NodeId) -> Option<&PublicKey> {
        self.keys.get(&node)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &PublicKey)> {
        self.keys.iter().map(|(n, k)| (*n, k))
    }
}

/// Pluggable signing interface; a real asymmetric scheme can stand in here.
pub trait SignatureScheme: Send + Sync {
    fn sign(&self, key: &PrivateKey, message: &[u8]) -> Signature;
    fn verify(&self, key: &PublicKey, message: &[u8], sig: &Signature) -> bool;
}

/// Trusted key generation center: issues key pairs and verifies signatures.
#[derive(Default)]
pub struct KeyCenter {
    directory: KeyDirectory,
    secrets: BTreeMap<PublicKey, PrivateKey>,
}

impl fmt::Debug for KeyCenter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyCenter")
            .field("directory", &self.directory)
            .finish_non_exhaustive()
    }
}

fn derive_public(secret: &[u8; 32]) -> PublicKey {
    let mut h = Sha256::new();
    h.update(b"hsrp-public-key");
    h.update(secret);
    PublicKey(h.finalize().into())
}

impl KeyCenter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn keygen(
        &mut self,
        node: NodeId,
        stream: &mut RandomStream,
    ) -> Result<KeyPairRecord, CryptoError> {
        if self.directory.keys.contains_key(&node) {
            return Err(CryptoError::DuplicateNode(node));
        }
        let mut secret = [0u8; 32];
        stream.fill_bytes(&mut secret);
        let public_key = derive_public(&secret);
        let private_key = PrivateKey(secret);
        self.directory.keys.insert(node, public_key);
        self.secrets.insert(public_key, private_key.clone());
        Ok(KeyPairRecord {
            node,
            public_key,
            private_key,
        })
    }

    pub fn directory(&self) -> &KeyDirectory {
        &self.directory
    }
}

impl SignatureScheme for KeyCenter {
    fn sign(&self, key: &PrivateKey, message: &[u8]) -> Signature {
        keyed_digest(key, message)
    }

    fn verify(&self, key: &PublicKey, message: &[u8], sig: &Signature) -> bool {
        let Some(secret) = self.secrets.get(key) else {
            return false;
        };
        let mut mac = HmacSha256::new_from_slice(&secret.0).expect("any key length");
        mac.update(message);
        mac.verify_slice(&sig.0).is_ok()
    }
}

fn keyed_digest(key: &PrivateKey, message: &[u8]) -> Signature {
    let mut mac = HmacSha256::new_from_slice(&key.0).expect("any key length");
    mac.update(message);
    Signature(mac.finalize().into_bytes().to_vec())
}
