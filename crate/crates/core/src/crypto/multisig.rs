//! Ordered per-hop signature chains.
//!
//! Hop `i` signs `canonical || encode(chain[..i])`, so each signature commits
//! to the packet's immutable fields and to every earlier signer and signature.

use super::sign::{KeyDirectory, PrivateKey, Signature, SignatureScheme};
use crate::error::CryptoError;
use crate::NodeId;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MultiSig {
    entries: Vec<(NodeId, Signature)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainVerdict {
    Valid,
    Invalid { at_index: usize },
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }
}

impl MultiSig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a chain from raw entries without checking anything.
    pub fn from_entries(entries: Vec<(NodeId, Signature)>) -> Self {
        MultiSig { entries }
    }

    pub fn entries(&self) -> &[(NodeId, Signature)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Vec<(NodeId, Signature)> {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn signers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.entries.iter().any(|(n, _)| *n == node)
    }

    pub fn first_signer(&self) -> Option<NodeId> {
        self.entries.first().map(|(n, _)| *n)
    }

    pub fn last_signer(&self) -> Option<NodeId> {
        self.entries.last().map(|(n, _)| *n)
    }

    /// Wire encoding of the first `n` entries.
    pub fn encode_prefix(&self, n: usize, out: &mut Vec<u8>) {
        for (signer, sig) in &self.entries[..n] {
            out.extend_from_slice(&signer.0.to_be_bytes());
            out.extend_from_slice(&(sig.0.len() as u16).to_be_bytes());
            out.extend_from_slice(&sig.0);
        }
    }

    fn signed_message(&self, index: usize, canonical: &[u8]) -> Vec<u8> {
        let mut msg = canonical.to_vec();
        self.encode_prefix(index, &mut msg);
        msg
    }
}

pub fn multisig_append(
    chain: &MultiSig,
    signer: NodeId,
    key: &PrivateKey,
    canonical: &[u8],
    scheme: &dyn SignatureScheme,
) -> Result<MultiSig, CryptoError> {
    if chain.contains(signer) {
        return Err(CryptoError::DuplicateSigner(signer));
    }
    let msg = chain.signed_message(chain.len(), canonical);
    let mut next = chain.clone();
    next.entries.push((signer, scheme.sign(key, &msg)));
    Ok(next)
}

pub fn multisig_verify(
    chain: &MultiSig,
    directory: &KeyDirectory,
    canonical: &[u8],
    scheme: &dyn SignatureScheme,
) -> ChainVerdict {
    for (i, (signer, sig)) in chain.entries.iter().enumerate() {
        let duplicate = chain.entries[..i].iter().any(|(n, _)| n == signer);
        let ok = !duplicate
            && directory
                .get(*signer)
                .is_some_and(|pk| scheme.verify(pk, &chain.signed_message(i, canonical), sig));
        if !ok {
            return ChainVerdict::Invalid { at_index: i };
        }
    }
    ChainVerdict::Valid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sign::{KeyCenter, KeyPairRecord};
    use crate::kernel::fork_stream;

    fn setup(n: u32) -> (KeyCenter, Vec<KeyPairRecord>) {
        let mut kc = KeyCenter::new();
        let mut s = fork_stream(7, b"keys");
        let pairs = (0..n).map(|i| kc.keygen(NodeId(i), &mut s).unwrap()).collect();
        (kc, pairs)
    }

    fn build(kc: &KeyCenter, pairs: &[KeyPairRecord], canonical: &[u8]) -> MultiSig {
        pairs.iter().fold(MultiSig::new(), |c, p| {
            multisig_append(&c, p.node, &p.private_key, canonical, kc).unwrap()
        })
    }

    #[test]
    fn empty_chain_is_valid() {
        let (kc, _) = setup(1);
        assert_eq!(multisig_verify(&MultiSig::new(), kc.directory(), b"x", &kc), ChainVerdict::Valid);
    }

    #[test]
    fn single_signer_verifies() {
        let (kc, pairs) = setup(1);
        let chain = build(&kc, &pairs, b"rreq");
        assert_eq!(chain.len(), 1);
        assert!(multisig_verify(&chain, kc.directory(), b"rreq", &kc).is_valid());
    }

    #[test]
    fn altered_middle_signature_fails_at_that_index() {
        let (kc, pairs) = setup(3);
        let mut chain = build(&kc, &pairs, b"rrep");
        chain.entries_mut()[1].1 .0[0] ^= 1;
        assert_eq!(
            multisig_verify(&chain, kc.directory(), b"rrep", &kc),
            ChainVerdict::Invalid { at_index: 1 }
        );
    }

    #[test]
    fn duplicate_signer_rejected() {
        let (kc, pairs) = setup(1);
        let chain = build(&kc, &pairs, b"x");
        let err = multisig_append(&chain, pairs[0].node, &pairs[0].private_key, b"x", &kc).unwrap_err();
        assert_eq!(err, CryptoError::DuplicateSigner(pairs[0].node));
    }

    #[test]
    fn unknown_signer_is_invalid_at_its_index() {
        let (kc, pairs) = setup(2);
        let mut chain = build(&kc, &pairs, b"x");
        // A masquerading node claims an id the directory does not know.
        chain = multisig_append(&chain, NodeId(99), &pairs[0].private_key, b"x", &kc).unwrap();
        assert_eq!(
            multisig_verify(&chain, kc.directory(), b"x", &kc),
            ChainVerdict::Invalid { at_index: 2 }
        );
    }

    #[test]
    fn claiming_another_nodes_identity_fails() {
        let (kc, pairs) = setup(2);
        // Node 1 signs under node 0's id with its own key.
        let chain = multisig_append(&MultiSig::new(), NodeId(0), &pairs[1].private_key, b"x", &kc).unwrap();
        assert_eq!(
            multisig_verify(&chain, kc.directory(), b"x", &kc),
            ChainVerdict::Invalid { at_index: 0 }
        );
    }

    #[test]
    fn reordering_entries_is_invalid() {
        let (kc, pairs) = setup(3);
        let chain = build(&kc, &pairs, b"x");
        let mut e = chain.entries().to_vec();
        e.swap(0, 1);
        let swapped = MultiSig::from_entries(e);
        assert!(!multisig_verify(&swapped, kc.directory(), b"x", &kc).is_valid());
    }

    #[test]
    fn canonical_bytes_are_committed() {
        let (kc, pairs) = setup(3);
        let chain = build(&kc, &pairs, b"dest_seq=10");
        assert_eq!(
            multisig_verify(&chain, kc.directory(), b"dest_seq=11", &kc),
            ChainVerdict::Invalid { at_index: 0 }
        );
    }
}
