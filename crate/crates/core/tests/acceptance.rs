//! Acceptance criteria 1–10. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured numbers before asserting.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use hsrp::adversary::AttackKind;
use hsrp::batch::{self, RunSpec};
use hsrp::crypto::{
    multisig_append, multisig_verify, tea_decrypt, tea_encrypt, Block64, ChainVerdict, KeyCenter, MultiSig,
    SignatureScheme, TeaKey,
};
use hsrp::kernel::{fork_stream, RandomStream, SimTime};
use hsrp::metrics::MetricsReport;
use hsrp::mobility::{self, Area, Position};
use hsrp::packet::{Packet, SignedInner, NONEXISTENT};
use hsrp::routing::common::check_rate_bound;
use hsrp::routing::Protocol;
use hsrp::scenario::{load_scenario, Scenario};
use hsrp::sim::{MobilityConfig, SimConfig, Simulation};
use hsrp::trace::{self, Record};
use hsrp::trust::{classify, Outcome, TrustClass, TrustConfig, TrustTable};
use hsrp::NodeId;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(path).expect("bundled scenario loads")
}

fn baseline_with(kind: AttackKind) -> Scenario {
    let mut s = scenario("baseline_700.scn");
    s.attack.as_mut().unwrap().kind = kind;
    s
}

fn run(s: &Scenario, protocol: Protocol, attack_on: bool, seed: u64) -> MetricsReport {
    let spec = RunSpec {
        scenario: s.clone(),
        protocol,
        attack_on,
        seed,
    };
    let (_, report) = batch::run_one(&spec, None).expect("run succeeds");
    assert_conserved(&report);
    report
}

/// Criterion 6 holds for every report produced anywhere in this suite.
fn assert_conserved(r: &MetricsReport) {
    let c = &r.counters;
    assert_eq!(c.data_originated, c.data_delivered + c.md_count);
    assert_eq!(c.control_tx_total, c.rreq_tx + c.rrep_tx + c.rerr_tx + c.proactive_tx + c.hello_tx);
}

/// Hop distances from `src` in the unit-disk graph, `None` if unreachable.
/// Paths may end at, but not pass through, `barred`.
fn bfs_avoiding(positions: &[Position], range: f64, src: usize, barred: Option<usize>) -> Vec<Option<u32>> {
    let adj = mobility::neighbors(positions, range);
    let mut dist = vec![None; positions.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                if Some(v) != barred {
                    queue.push_back(v);
                }
            }
        }
    }
    dist
}

fn bfs(positions: &[Position], range: f64, src: usize) -> Vec<Option<u32>> {
    bfs_avoiding(positions, range, src, None)
}

fn connected(positions: &[Position], range: f64) -> bool {
    bfs(positions, range, 0).iter().all(Option::is_some)
}

/// A connected random static layout of `n` nodes.
fn connected_layout(n: usize, area: Area, range: f64, stream: &mut RandomStream) -> Vec<Position> {
    loop {
        let p = mobility::init_positions(n, area, stream);
        if connected(&p, range) {
            return p;
        }
    }
}

fn static_config(protocol: Protocol, positions: Vec<Position>, area: Area) -> SimConfig {
    let mut cfg = SimConfig {
        nodes: positions.len(),
        protocol,
        area,
        duration: SimTime::from_secs(10),
        mobility: MobilityConfig {
            speed_max: 0.0,
            ..Default::default()
        },
        positions: Some(positions),
        ..Default::default()
    };
    cfg.channel.jitter = SimTime::ZERO;
    cfg.channel.loss_probability = 0.0;
    cfg
}

#[test]
fn criterion_01_determinism() {
    let s = scenario("baseline_700.scn");
    let spec = RunSpec {
        scenario: s.clone(),
        protocol: s.protocol,
        attack_on: true,
        seed: 42,
    };
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    let mut slowest = 0.0f64;
    for i in 0..2 {
        let path = dir.path().join(format!("run{i}.trace"));
        let start = Instant::now();
        let (row, _) = batch::run_one(&spec, Some(&path)).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let mut csv = Vec::new();
        batch::write_csv(&[row], &mut csv).unwrap();
        outputs.push((csv, fs::read(&path).unwrap()));
    }
    let same = outputs[0] == outputs[1];
    verdict(
        1,
        same && slowest < 10.0,
        &format!(
            "identical CSV rows and traces: {same} ({} trace bytes); slowest run {slowest:.2} s",
            outputs[0].1.len()
        ),
    );
}

/// Straight-line TEA written from the algorithm's definition.
fn reference_tea(v: [u32; 2], k: [u32; 4], decrypt: bool) -> [u32; 2] {
    let (mut y, mut z) = (v[0], v[1]);
    let delta: u32 = 0x9e37_79b9;
    if !decrypt {
        let mut sum: u32 = 0;
        let mut n = 32;
        while n > 0 {
            sum = sum.wrapping_add(delta);
            y = y.wrapping_add((z << 4).wrapping_add(k[0]) ^ z.wrapping_add(sum) ^ (z >> 5).wrapping_add(k[1]));
            z = z.wrapping_add((y << 4).wrapping_add(k[2]) ^ y.wrapping_add(sum) ^ (y >> 5).wrapping_add(k[3]));
            n -= 1;
        }
    } else {
        let mut sum: u32 = 0xc6ef_3720;
        let mut n = 32;
        while n > 0 {
            z = z.wrapping_sub((y << 4).wrapping_add(k[2]) ^ y.wrapping_add(sum) ^ (y >> 5).wrapping_add(k[3]));
            y = y.wrapping_sub((z << 4).wrapping_add(k[0]) ^ z.wrapping_add(sum) ^ (z >> 5).wrapping_add(k[1]));
            sum = sum.wrapping_sub(delta);
            n -= 1;
        }
    }
    [y, z]
}

#[test]
fn criterion_02_cipher_oracle() {
    let mut rng = fork_stream(2, b"tea-oracle");
    let word = |rng: &mut RandomStream| rng.below(1 << 32) as u32;
    let mut mismatches = 0;
    for _ in 0..100 {
        let k = [word(&mut rng), word(&mut rng), word(&mut rng), word(&mut rng)];
        let v = [word(&mut rng), word(&mut rng)];
        let c = tea_encrypt(Block64::new(v[0], v[1]), TeaKey(k));
        if [c.v0, c.v1] != reference_tea(v, k, false) {
            mismatches += 1;
        }
        let d = tea_decrypt(Block64::new(v[0], v[1]), TeaKey(k));
        if [d.v0, d.v1] != reference_tea(v, k, true) {
            mismatches += 1;
        }
    }
    let mut failed_trips = 0;
    for _ in 0..10_000 {
        let k = TeaKey([word(&mut rng), word(&mut rng), word(&mut rng), word(&mut rng)]);
        let b = Block64::new(word(&mut rng), word(&mut rng));
        if tea_decrypt(tea_encrypt(b, k), k) != b {
            failed_trips += 1;
        }
    }
    verdict(
        2,
        mismatches == 0 && failed_trips == 0,
        &format!("{mismatches} oracle mismatches over 100 pairs; {failed_trips} of 10000 round trips failed"),
    );
}

#[test]
fn criterion_03_signature_integrity() {
    let mut kc = KeyCenter::new();
    let mut stream = fork_stream(3, b"sig");
    let keys: Vec<_> = (0..4).map(|i| kc.keygen(NodeId(i), &mut stream).unwrap()).collect();
    let msg: Vec<u8> = (0..64).map(|i| (i * 37 + 11) as u8).collect();
    let sig = kc.sign(&keys[0].private_key, &msg);
    let untampered = kc.verify(&keys[0].public_key, &msg, &sig);
    let mut accepted_tampers = 0;
    for bit in 0..512 {
        let mut m = msg.clone();
        m[bit / 8] ^= 1 << (bit % 8);
        if kc.verify(&keys[0].public_key, &m, &sig) {
            accepted_tampers += 1;
        }
    }

    let mut chain = MultiSig::new();
    for k in &keys {
        chain = multisig_append(&chain, k.node, &k.private_key, &msg, &kc).unwrap();
    }
    let chain_valid = multisig_verify(&chain, kc.directory(), &msg, &kc).is_valid();
    let mut mutations: Vec<(&str, MultiSig, Vec<u8>)> = Vec::new();
    for i in 0..keys.len() - 1 {
        let mut c = chain.clone();
        c.entries_mut().swap(i, i + 1);
        mutations.push(("order", c, msg.clone()));
    }
    for i in 0..keys.len() {
        let mut c = chain.clone();
        c.entries_mut()[i].0 = NodeId((i as u32 + 1) % keys.len() as u32);
        mutations.push(("signer", c, msg.clone()));
        let mut c = chain.clone();
        c.entries_mut()[i].1 .0[0] ^= 1;
        mutations.push(("signature", c, msg.clone()));
    }
    for byte in [0, 31, 63] {
        let mut m = msg.clone();
        m[byte] ^= 0x80;
        mutations.push(("content", chain.clone(), m));
    }
    let mut dropped = chain.clone();
    dropped.entries_mut().remove(1);
    mutations.push(("removal", dropped, msg.clone()));
    let missed: Vec<&str> = mutations
        .iter()
        .filter(|(_, c, m)| multisig_verify(c, kc.directory(), m, &kc) == ChainVerdict::Valid)
        .map(|(what, _, _)| *what)
        .collect();
    verdict(
        3,
        untampered && accepted_tampers == 0 && chain_valid && missed.is_empty(),
        &format!(
            "untampered verifies: {untampered}; {accepted_tampers}/512 bit flips accepted; \
             honest chain valid: {chain_valid}; {}/{} chain mutations undetected {missed:?}",
            missed.len(),
            mutations.len()
        ),
    );
}

#[test]
fn criterion_04_trust_bands() {
    let probes = [
        (0.0, TrustClass::Bad),
        (0.499_999_999, TrustClass::Bad),
        (0.5, TrustClass::Neutral),
        (0.799_999_999, TrustClass::Neutral),
        (0.8, TrustClass::Good),
        (1.0, TrustClass::Good),
    ];
    let band_errors = probes.iter().filter(|(x, c)| classify(*x) != *c).count();

    let mut rng = fork_stream(4, b"histories");
    let mut violations = 0;
    for _ in 0..10_000 {
        let mut table = TrustTable::new(NodeId(0), TrustConfig::default()).unwrap();
        let peer = NodeId(1);
        let len = 1 + rng.below(40);
        for _ in 0..len {
            let before = table.fused(peer);
            let outcome = if rng.unit() < 0.5 { Outcome::Success } else { Outcome::Failure };
            table.record_interaction(peer, outcome).unwrap();
            let after = table.fused(peer);
            let ok = match outcome {
                Outcome::Success => after >= before,
                Outcome::Failure => after <= before,
            };
            if !ok {
                violations += 1;
            }
        }
    }
    verdict(
        4,
        band_errors == 0 && violations == 0,
        &format!("{band_errors} boundary probes misclassified; {violations} monotonicity violations over 10000 histories"),
    );
}

#[test]
fn criterion_05_route_optimality() {
    let area = Area {
        width: 800.0,
        height: 800.0,
    };
    let range = 250.0;
    let mut layouts = fork_stream(5, b"topologies");
    let mut cases = 0;
    let mut optimal = 0;
    let mut checked_routes = 0;
    let mut first_failure = None;
    for topo in 0..100 {
        let positions = connected_layout(30, area, range, &mut layouts);
        let src = layouts.below(30) as usize;
        let mut dst = layouts.below(29) as usize;
        if dst >= src {
            dst += 1;
        }
        // The destination answers the request instead of relaying it, so
        // reverse routes are shortest paths among the relaying nodes.
        let from_src = bfs_avoiding(&positions, range, src, Some(dst));
        let from_dst = bfs(&positions, range, dst);
        for protocol in [Protocol::Aodv, Protocol::Hsrp] {
            cases += 1;
            let mut sim = Simulation::new(static_config(protocol, positions.clone(), area)).unwrap();
            sim.start(false).unwrap();
            sim.schedule_discovery(NodeId(src as u32), NodeId(dst as u32), SimTime::from_secs(1))
                .unwrap();
            sim.run_until(SimTime::from_secs(3)).unwrap();
            let now = sim.now();
            let mut ok = sim.router(NodeId(src as u32)).best_route(NodeId(dst as u32), now).is_some();
            for v in 0..30 {
                let router = sim.router(NodeId(v as u32));
                for (target, dist) in [(src, &from_src), (dst, &from_dst)] {
                    if v == target {
                        continue;
                    }
                    if let Some(r) = router.best_route(NodeId(target as u32), now) {
                        checked_routes += 1;
                        if Some(r.hop_count) != dist[v] {
                            ok = false;
                        }
                    }
                }
            }
            if ok {
                optimal += 1;
            } else if first_failure.is_none() {
                first_failure = Some(format!("topology {topo}, {protocol}, {src} -> {dst}"));
            }
        }
    }
    verdict(
        5,
        optimal == cases,
        &format!(
            "{optimal}/{cases} (topology, protocol) cases optimal; {checked_routes} installed routes compared with BFS{}",
            first_failure.map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_06_conservation() {
    let mut runs = 0;
    for kind in [AttackKind::Blackhole, AttackKind::Sinkhole, AttackKind::Jammer] {
        let s = baseline_with(kind);
        for protocol in [Protocol::Aodv, Protocol::Hsrp] {
            for attack_on in [false, true] {
                run(&s, protocol, attack_on, 6);
                runs += 1;
            }
        }
    }
    let mut flood = baseline_with(AttackKind::Flooder);
    flood.duration_s = 30.0;
    for protocol in [Protocol::Aodv, Protocol::Hsrp] {
        run(&flood, protocol, true, 6);
        runs += 1;
    }
    // The trace-derived report must also balance and match the recorded one.
    let mut sim = Simulation::new(scenario("baseline_700.scn").to_sim_config(6, Protocol::Hsrp, true)).unwrap();
    sim.record_in_memory();
    let report = sim.run().unwrap();
    let v = trace::verify_records(sim.records()).unwrap();
    assert_conserved(&v.recomputed);
    runs += 1;
    verdict(
        6,
        v.report_matches && report == v.recorded,
        &format!("{runs} runs balance (originated = delivered + md, control total = sum of parts); trace re-derivation matches"),
    );
}

fn paired(s: &Scenario, a: (Protocol, bool), b: (Protocol, bool)) -> (Vec<f64>, Vec<f64>) {
    (0..10)
        .map(|seed| (run(s, a.0, a.1, seed).pdr, run(s, b.0, b.1, seed).pdr))
        .unzip()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_07_attack_degradation() {
    let s = baseline_with(AttackKind::Blackhole);
    let (clean, attacked) = paired(&s, (Protocol::Aodv, false), (Protocol::Aodv, true));
    let degraded = clean.iter().zip(&attacked).filter(|(c, a)| a < c).count();
    verdict(
        7,
        mean(&attacked) < mean(&clean) && degraded >= 9,
        &format!(
            "AODV mean PDR {:.4} without attack vs {:.4} with 5 blackholes; {degraded}/10 seeds degrade",
            mean(&clean),
            mean(&attacked)
        ),
    );
}

/// Per honest forwarder and flooding originator, forwarding times of the
/// flooder's requests.
fn forwarded_flood(records: &[Record]) -> BTreeMap<(NodeId, NodeId), Vec<SimTime>> {
    let flooders: BTreeSet<NodeId> = trace::header(records)
        .unwrap()
        .attackers
        .iter()
        .filter(|a| a.kind == AttackKind::Flooder)
        .map(|a| a.node)
        .collect();
    let mut out: BTreeMap<(NodeId, NodeId), Vec<SimTime>> = BTreeMap::new();
    for r in records {
        let Record::Tx { t, node, .. } = r else { continue };
        if flooders.contains(node) {
            continue;
        }
        if let Some(Packet::Signed(p)) = r.tx_packet() {
            if let SignedInner::Rreq(q) = &p.inner {
                if flooders.contains(&q.origin()) {
                    out.entry((*node, q.origin())).or_default().push(*t);
                }
            }
        }
    }
    out
}

#[test]
fn criterion_08_defense_effectiveness() {
    let bh = baseline_with(AttackKind::Blackhole);
    let (aodv, hsrp) = paired(&bh, (Protocol::Aodv, true), (Protocol::Hsrp, true));
    let bh_wins = aodv.iter().zip(&hsrp).filter(|(a, h)| h > a).count();
    let bh_ok = mean(&hsrp) > mean(&aodv) && bh_wins >= 9;

    let sk = baseline_with(AttackKind::Sinkhole);
    assert_eq!(sk.attack.as_ref().unwrap().drop_fraction, 0.5);
    let (aodv_s, hsrp_s) = paired(&sk, (Protocol::Aodv, true), (Protocol::Hsrp, true));
    let sk_wins = aodv_s.iter().zip(&hsrp_s).filter(|(a, h)| h > a).count();
    let sk_ok = mean(&hsrp_s) > mean(&aodv_s) && sk_wins >= 8;

    let fl = baseline_with(AttackKind::Flooder);
    let cfg = fl.to_sim_config(8, Protocol::Hsrp, true);
    let (capacity, rate) = (cfg.hsrp.bucket_capacity, cfg.hsrp.bucket_rate);
    let mut sim = Simulation::new(cfg).unwrap();
    sim.record_in_memory();
    assert_conserved(&sim.run().unwrap());
    let forwarded = forwarded_flood(sim.records());
    let total: usize = forwarded.values().map(Vec::len).sum();
    let breaches = forwarded
        .values()
        .filter(|times| check_rate_bound(times, capacity, rate).is_some())
        .count();
    let busiest_second = forwarded
        .values()
        .flat_map(|times| {
            let mut per_second: BTreeMap<u64, u64> = BTreeMap::new();
            for t in times {
                *per_second.entry(t.as_micros() / 1_000_000).or_default() += 1;
            }
            per_second.into_values()
        })
        .max()
        .unwrap_or(0);
    let fl_ok = total > 0 && breaches == 0;

    verdict(
        8,
        bh_ok && sk_ok && fl_ok,
        &format!(
            "blackhole: HSRP {:.4} vs AODV {:.4}, HSRP ahead on {bh_wins}/10; \
             sinkhole: HSRP {:.4} vs AODV {:.4}, ahead on {sk_wins}/10; \
             flooding: {total} forwarded attacker RREQs over {} (node, flooder) pairs, \
             {breaches} exceed the {capacity}-burst {rate}/s bucket, busiest second {busiest_second}",
            mean(&hsrp),
            mean(&aodv),
            mean(&hsrp_s),
            mean(&aodv_s),
            forwarded.len()
        ),
    );
}

#[test]
fn criterion_09_hybrid_overhead() {
    let s = scenario("baseline_700.scn").static_override();
    let mut details = Vec::new();
    let mut ok = true;
    for seed in 0..10 {
        let sim = Simulation::new(s.to_sim_config(seed, Protocol::Aodv, false)).unwrap();
        let layout_connected = connected(&sim.positions(), s.channel.range);
        let aodv = run(&s, Protocol::Aodv, false, seed);
        let hsrp = run(&s, Protocol::Hsrp, false, seed);
        let good = layout_connected && hsrp.overhead_ratio > aodv.overhead_ratio && hsrp.pdr == aodv.pdr;
        ok &= good;
        details.push(format!(
            "seed {seed}{}: overhead {:.3} vs {:.3}, pdr {:.4}/{:.4}",
            if layout_connected { "" } else { " (disconnected)" },
            hsrp.overhead_ratio,
            aodv.overhead_ratio,
            hsrp.pdr,
            aodv.pdr
        ));
    }
    verdict(9, ok, &format!("HSRP vs AODV, static attack-free: {}", details.join("; ")));
}

#[test]
fn criterion_10_hf_semantics() {
    let area = Area {
        width: 700.0,
        height: 700.0,
    };
    let range = 250.0;
    let positions = connected_layout(25, area, range, &mut fork_stream(10, b"hf-layout"));
    let mut hf = Vec::new();
    for protocol in [Protocol::Aodv, Protocol::Hsrp] {
        let mut sim = Simulation::new(static_config(protocol, positions.clone(), area)).unwrap();
        sim.start(false).unwrap();
        sim.schedule_discovery(NodeId(0), NONEXISTENT, SimTime::from_secs(1)).unwrap();
        // Before the first retry could fire.
        sim.run_until(SimTime::from_secs(2)).unwrap();
        let c = sim.counters();
        let stores_once = c.hf_per_node.len() == 24 && c.hf_per_node.values().all(|n| *n == 1);
        hf.push((protocol, c.hf_count, stores_once, !c.hf_per_node.contains_key(&NodeId(0))));
    }
    verdict(
        10,
        hf.iter().all(|(_, n, once, origin_clear)| *n == 24 && *once && *origin_clear),
        &format!("single RREQ flood over 25 connected nodes: {hf:?} (protocol, HF, each non-origin stores once, origin stores none)"),
    );
}
