//! Builds a hop-by-hop signature chain and shows which mutations it catches.
//!
//! Run with `cargo run --example multisig_chain`.

use hsrp::crypto::{multisig_append, multisig_verify, KeyCenter, MultiSig};
use hsrp::kernel::fork_stream;
use hsrp::NodeId;

fn main() {
    let mut kc = KeyCenter::new();
    let mut stream = fork_stream(7, b"keys");
    let hops: Vec<_> = (0..4).map(|i| kc.keygen(NodeId(i), &mut stream).unwrap()).collect();
    let message = b"RREQ origin=n0 dest=n3 counter=1";

    let mut chain = MultiSig::new();
    for hop in &hops {
        chain = multisig_append(&chain, hop.node, &hop.private_key, message, &kc).unwrap();
        println!("{} signed; chain length {}", hop.node, chain.len());
    }
    println!("honest chain:      {:?}", multisig_verify(&chain, kc.directory(), message, &kc));

    let mut swapped = chain.clone();
    swapped.entries_mut().swap(1, 2);
    println!("hops reordered:    {:?}", multisig_verify(&swapped, kc.directory(), message, &kc));

    let mut impostor = chain.clone();
    impostor.entries_mut()[2].0 = NodeId(0);
    println!("signer replaced:   {:?}", multisig_verify(&impostor, kc.directory(), message, &kc));

    let altered = b"RREQ origin=n0 dest=n9 counter=1";
    println!("content altered:   {:?}", multisig_verify(&chain, kc.directory(), altered, &kc));

    let again = multisig_append(&chain, hops[1].node, &hops[1].private_key, message, &kc);
    println!("signing twice:     {:?}", again.err());
}
