use super::*;
use crate::group::{counters, DecodeError};
use crate::policy::attr_value;
use crate::pseudonym::key_gen;
use crate::sok::LinkProof;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const NOW: u64 = 1_900_000_000;

/// A linear chain of registered nodes with populated neighbor directories.
struct Chain {
    params: PublicParams,
    issuer: IssuerKeyPair,
    vk: VerifierKey,
    policy: Policy,
    nodes: Vec<NodeRecord>,
}

fn chain(len: usize, attr_count: usize, disclose: &[usize], rng: &mut ChaCha20Rng) -> Chain {
    let params = PublicParams::setup(attr_count);
    let issuer = IssuerKeyPair::generate(&params, rng);
    let attrs = AttributeVector::from_labels(
        &(0..attr_count).map(|i| format!("v{i}")).collect::<Vec<_>>(),
    );
    let policy = Policy::new(
        "chain-policy",
        attr_count as u16,
        disclose.iter().map(|&i| (i as u16, *attrs.get(i))).collect(),
    );
    let mut nodes: Vec<NodeRecord> = (0..len)
        .map(|i| {
            let keys = key_gen(&params, rng);
            let cred = register(&params, &issuer, &keys, &attrs, rng).unwrap();
            NodeRecord::new(format!("n{i}"), keys, attrs.clone(), cred)
        })
        .collect();
    for i in 0..len {
        if i > 0 {
            let (prev_id, prev_pk) = (nodes[i - 1].id.clone(), *nodes[i - 1].public_key());
            nodes[i].directory.insert(prev_id, prev_pk);
        }
        if i + 1 < len {
            let (next_id, next_pk) = (nodes[i + 1].id.clone(), *nodes[i + 1].public_key());
            nodes[i].directory.insert(next_id, next_pk);
        }
    }
    let vk = VerifierKey::new(&params, issuer.public());
    Chain {
        params,
        issuer,
        vk,
        policy,
        nodes,
    }
}

/// Drives one message through the whole chain.
fn run_chain(c: &Chain, rng: &mut ChaCha20Rng) -> HopMessage {
    let (_, mut msgs) = sender_init(&c.policy, 1, &[c.nodes[0].id.clone()], NOW, rng).unwrap();
    let mut msg = msgs.remove(0);
    let mut predecessor: Option<String> = None;
    for node in &c.nodes {
        let from = match &predecessor {
            None => Predecessor::Sender,
            Some(id) => Predecessor::Node(id),
        };
        msg = node_forward(&c.params, node, &msg, from, c.issuer.public(), NOW, rng).unwrap();
        predecessor = Some(node.id.clone());
    }
    msg
}

#[test]
fn registration_rejects_wrong_key_and_replay() {
    let mut rng = ChaCha20Rng::seed_from_u64(40);
    let params = PublicParams::setup(2);
    let issuer = IssuerKeyPair::generate(&params, &mut rng);
    let node = key_gen(&params, &mut rng);
    let attrs = AttributeVector::from_labels(&["a", "b"]);

    let cred = register(&params, &issuer, &node, &attrs, &mut rng).unwrap();
    let msg = pedersen_message(&params, node.public(), &attrs);
    assert!(crate::groth::verify(&params, issuer.public(), &cred, &msg));

    // proof for a different key
    let did = fresh_did(&mut rng);
    let other = key_gen(&params, &mut rng);
    let proof = sok::prove_registration(&params, other.secret(), other.public(), &did, &mut rng);
    assert_eq!(
        issue_credential(&params, &issuer, node.public(), &attrs, &did, &proof, &mut rng),
        Err(RegistrationError::ProofInvalid)
    );

    // replay of an old proof under a fresh nonce
    let did1 = fresh_did(&mut rng);
    let proof1 = sok::prove_registration(&params, node.secret(), node.public(), &did1, &mut rng);
    let did2 = fresh_did(&mut rng);
    assert_eq!(
        issue_credential(&params, &issuer, node.public(), &attrs, &did2, &proof1, &mut rng),
        Err(RegistrationError::ProofInvalid)
    );
}

#[test]
fn sender_init_shapes_and_fresh_sids() {
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let policy = Policy::open("p", 2);
    let entries: Vec<NodeId> = vec!["a".into(), "b".into(), "c".into()];
    let (sid, msgs) = sender_init(&policy, 3, &entries, NOW, &mut rng).unwrap();
    assert_eq!(msgs.len(), 3);
    for m in &msgs {
        assert_eq!(m.sid, sid);
        assert!(m.hops.is_empty());
        assert!(m.link.is_none());
    }
    let (single_sid, single) = sender_init(&policy, 1, &entries[..1], NOW, &mut rng).unwrap();
    assert_eq!(single.len(), 1);
    assert_ne!(single_sid, sid);
    assert!(matches!(
        sender_init(&policy, 2, &entries[..1], NOW, &mut rng),
        Err(SenderError::EntryNodeMismatch { .. })
    ));
    assert!(matches!(
        sender_init(&policy, 0, &[], NOW, &mut rng),
        Err(SenderError::NoPaths)
    ));
}

#[test]
fn chain_end_to_end_accepts() {
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let c = chain(3, 2, &[0], &mut rng);
    let msg = run_chain(&c, &mut rng);
    assert_eq!(msg.hops.len(), 3);
    let verdict = receiver_verify(
        &c.params,
        &c.vk,
        &c.policy,
        &[msg],
        &[*c.nodes[2].public_key()],
    );
    assert_eq!(verdict.accepted(), Some(1));
}

#[test]
fn entry_node_enforces_freshness_and_uniqueness() {
    let mut rng = ChaCha20Rng::seed_from_u64(43);
    let c = chain(1, 2, &[], &mut rng);
    let entry = &c.nodes[0];
    let (_, msgs) = sender_init(&c.policy, 1, &[entry.id.clone()], NOW, &mut rng).unwrap();

    // stale timestamp
    let mut stale = msgs[0].clone();
    stale.sid.timestamp = NOW - FRESHNESS_WINDOW_SECS - 1;
    assert!(matches!(
        node_forward(&c.params, entry, &stale, Predecessor::Sender, c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::StaleSession { .. })
    ));

    // future timestamp outside the window
    let mut future = msgs[0].clone();
    future.sid.timestamp = NOW + FRESHNESS_WINDOW_SECS + 1;
    assert!(matches!(
        node_forward(&c.params, entry, &future, Predecessor::Sender, c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::StaleSession { .. })
    ));

    // replayed nonce
    node_forward(&c.params, entry, &msgs[0], Predecessor::Sender, c.issuer.public(), NOW, &mut rng)
        .unwrap();
    assert_eq!(
        node_forward(&c.params, entry, &msgs[0], Predecessor::Sender, c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::DuplicateSession)
    );
}

#[test]
fn forwarding_rejects_bad_links_and_unknown_predecessors() {
    let mut rng = ChaCha20Rng::seed_from_u64(44);
    let c = chain(3, 2, &[], &mut rng);
    let (_, mut msgs) = sender_init(&c.policy, 1, &[c.nodes[0].id.clone()], NOW, &mut rng).unwrap();
    let after_first = node_forward(
        &c.params, &c.nodes[0], &msgs.remove(0), Predecessor::Sender, c.issuer.public(), NOW,
        &mut rng,
    )
    .unwrap();

    // predecessor not in the directory
    assert!(matches!(
        node_forward(&c.params, &c.nodes[1], &after_first, Predecessor::Node("stranger"), c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::UnknownPredecessor(_))
    ));

    // link proof forged by a key other than the claimed neighbor's
    let mut forged = after_first.clone();
    let mallory = key_gen(&c.params, &mut rng);
    let sid_bytes = forged.sid.to_bytes();
    let ctx = proof_context(
        c.issuer.public(),
        &forged.sid,
        &forged.policy,
        &forged.hops[..forged.hops.len() - 1],
    );
    forged.link = Some(sok::prove_link(
        &c.params,
        mallory.secret(),
        &sid_bytes,
        &forged.hops.last().unwrap().nym,
        mallory.public(),
        &ctx,
        &mut rng,
    ));
    assert_eq!(
        node_forward(&c.params, &c.nodes[1], &forged, Predecessor::Node("n0"), c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::LinkProofInvalid)
    );

    // missing link
    let mut stripped = after_first.clone();
    stripped.link = None;
    assert_eq!(
        node_forward(&c.params, &c.nodes[1], &stripped, Predecessor::Node("n0"), c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::LinkProofInvalid)
    );
}

#[test]
fn policy_refusal_at_forwarding() {
    let mut rng = ChaCha20Rng::seed_from_u64(45);
    let c = chain(1, 2, &[0], &mut rng);
    let mut strict = c.policy.clone();
    strict = Policy::new(
        strict.policy_id.clone(),
        strict.attr_count,
        [(0u16, attr_value("something-else"))].into(),
    );
    let (_, msgs) = sender_init(&strict, 1, &[c.nodes[0].id.clone()], NOW, &mut rng).unwrap();
    assert_eq!(
        node_forward(&c.params, &c.nodes[0], &msgs[0], Predecessor::Sender, c.issuer.public(), NOW, &mut rng),
        Err(ForwardError::PolicyUnsatisfied)
    );
}

#[test]
fn receiver_rejects_structural_faults() {
    let mut rng = ChaCha20Rng::seed_from_u64(46);
    let c = chain(3, 2, &[1], &mut rng);
    let msg = run_chain(&c, &mut rng);
    let exit = *c.nodes[2].public_key();

    // stripping one hop breaks the context chain of everything after it
    let mut stripped = msg.clone();
    stripped.hops.remove(1);
    let verdict = receiver_verify(&c.params, &c.vk, &c.policy, &[stripped], &[exit]);
    assert!(matches!(verdict, Verdict::Reject(_)));

    // reordering hops is rejected
    let mut reordered = msg.clone();
    reordered.hops.swap(0, 1);
    let verdict = receiver_verify(&c.params, &c.vk, &c.policy, &[reordered], &[exit]);
    assert!(matches!(verdict, Verdict::Reject(_)));

    // wrong exit key
    let other = key_gen(&c.params, &mut rng);
    assert_eq!(
        receiver_verify(&c.params, &c.vk, &c.policy, &[msg.clone()], &[*other.public()]),
        Verdict::Reject(RejectReason::LinkInvalid { path: 0 })
    );

    // differing policy
    let other_policy = Policy::open("other", 2);
    assert_eq!(
        receiver_verify(&c.params, &c.vk, &other_policy, &[msg.clone()], &[exit]),
        Verdict::Reject(RejectReason::PolicyMismatch)
    );

    // empty message set
    assert!(matches!(
        receiver_verify(&c.params, &c.vk, &c.policy, &[], &[]),
        Verdict::Reject(RejectReason::SidMismatch)
    ));

    // empty hop list
    let mut empty = msg.clone();
    empty.hops.clear();
    empty.link = Some(LinkProof {
        c: crate::group::Scalar::one(),
        z: crate::group::Scalar::one(),
    });
    assert_eq!(
        receiver_verify(&c.params, &c.vk, &c.policy, &[empty], &[exit]),
        Verdict::Reject(RejectReason::LinkInvalid { path: 0 })
    );
}

#[test]
fn receiver_counter_totals_single_path() {
    let mut rng = ChaCha20Rng::seed_from_u64(47);
    let l = 3;
    let n = 4;
    let c = chain(n, l, &[], &mut rng);
    let msg = run_chain(&c, &mut rng);
    let exit = *c.nodes[n - 1].public_key();
    let (verdict, ops) = counters::measure(|| {
        receiver_verify(&c.params, &c.vk, &c.policy, &[msg], &[exit])
    });
    assert_eq!(verdict.accepted(), Some(1));
    assert_eq!(ops.g1_exp, ((l as u64 + 3) * n as u64) + 4);
    assert_eq!(ops.g2_exp, 0);
    assert_eq!(ops.gt_exp, 4 * n as u64);
    assert_eq!(ops.pairings, 4 * n as u64);
}

#[test]
fn wire_roundtrip_and_offsets() {
    let mut rng = ChaCha20Rng::seed_from_u64(48);
    let c = chain(2, 3, &[2], &mut rng);
    let msg = run_chain(&c, &mut rng);
    let bytes = serialize_hop_message(&msg);
    assert_eq!(deserialize_hop_message(&bytes).unwrap(), msg);

    // truncation reports the failing offset
    let err = deserialize_hop_message(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(matches!(err.kind, DecodeError::BadLength { .. }));

    // trailing garbage rejected
    let mut long = bytes.clone();
    long.push(0);
    assert!(deserialize_hop_message(&long).is_err());

    // bad magic
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert_eq!(
        deserialize_hop_message(&bad).unwrap_err(),
        WireError {
            offset: 0,
            kind: DecodeError::NonCanonical
        }
    );

    // corrupt a point encoding: offset points at the nym of hop 0
    let hop0_nym = 5 + SessionId::BYTES + msg.policy.encode().len() + 2;
    let mut corrupt = bytes.clone();
    corrupt[hop0_nym] = 0; // clears the compression flag
    let err = deserialize_hop_message(&corrupt).unwrap_err();
    assert_eq!(err.offset, hop0_nym);
    assert_eq!(err.kind, DecodeError::NonCanonical);

    // sender's initial message (no hops, no link) round-trips
    let initial = HopMessage {
        sid: msg.sid,
        policy: msg.policy.clone(),
        hops: vec![],
        link: None,
    };
    let bytes = serialize_hop_message(&initial);
    assert_eq!(deserialize_hop_message(&bytes).unwrap(), initial);
}

#[test]
fn payload_byte_accounting() {
    let mut rng = ChaCha20Rng::seed_from_u64(49);
    let c = chain(2, 4, &[0, 1], &mut rng);
    let msg = run_chain(&c, &mut rng);
    // 2 hops, ℓ=4, d=2: 2·(144+96) + 2·(4+2)·32 + 64
    assert_eq!(payload_bytes(&msg), 2 * 240 + 2 * 6 * 32 + 64);
    let initial = HopMessage {
        sid: msg.sid,
        policy: msg.policy.clone(),
        hops: vec![],
        link: None,
    };
    assert_eq!(payload_bytes(&initial), 0);
}

#[test]
fn session_id_bytes_roundtrip() {
    let sid = SessionId {
        nonce: [7; 16],
        timestamp: 123_456_789,
    };
    assert_eq!(SessionId::from_bytes(&sid.to_bytes()), sid);
}
