//! The four protocol roles: issuer registration, sender initiation, node
//! forwarding and receiver verification, as deterministic state machines
//! over the wire format.
//!
//! A forwarding node first authenticates its physical predecessor's link
//! proof (entry nodes instead validate session freshness and replay), then
//! appends its own credential presentation and pseudonym bound to the
//! serialized message prefix, and re-signs the link towards its successor.
//! The receiver verifies the terminal link proof of each path against the
//! exit node's known key, every hop proof against its reconstructed prefix,
//! and finally that all pseudonyms across all paths are pairwise distinct.

pub mod wire;

pub use wire::{
    deserialize_hop_message, payload_bytes, serialize_hop_message, Hop, HopMessage, SessionId,
    WireError,
};

use crate::group::{G1Element, G2Element, PublicParams, Scalar};
use crate::groth::{GrothSignature, IssuerKeyPair};
use crate::policy::{pedersen_message, AttributeVector, Policy};
use crate::pseudonym::{nym_gen_with_base, NodeKeyPair, Scope};
use crate::sok::{
    self, prove_credential_blinded, prove_link_with_base, verify_credential_with_base,
    verify_link_with_base, ProofContext, RegistrationProof, VerifierKey,
};
use rand::{CryptoRng, Rng, RngCore};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use thiserror::Error;

pub type NodeId = String;

/// Entry nodes reject session timestamps further than this many seconds
/// from their local clock.
pub const FRESHNESS_WINDOW_SECS: u64 = 120;

// ---------------------------------------------------------------------------
// Registration
// ---------------------------------------------------------------------------

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RegistrationError {
    #[error("registration proof is invalid")]
    ProofInvalid,
}

/// Issuer-chosen per-registration nonce.
pub fn fresh_did(rng: &mut (impl RngCore + CryptoRng)) -> [u8; 16] {
    rng.gen()
}

/// Issuer side: verify the node's key-possession proof for `did`, then sign
/// the Pedersen binding of key and attributes.
pub fn issue_credential(
    params: &PublicParams,
    issuer: &IssuerKeyPair,
    pk_node: &G1Element,
    attrs: &AttributeVector,
    did: &[u8; 16],
    proof: &RegistrationProof,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<GrothSignature, RegistrationError> {
    if !sok::verify_registration(params, pk_node, did, proof) {
        return Err(RegistrationError::ProofInvalid);
    }
    let msg = pedersen_message(params, pk_node, attrs);
    Ok(crate::groth::sign(params, issuer, &msg, rng))
}

/// The full registration flow between an honest node and the issuer.
pub fn register(
    params: &PublicParams,
    issuer: &IssuerKeyPair,
    node: &NodeKeyPair,
    attrs: &AttributeVector,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<GrothSignature, RegistrationError> {
    let did = fresh_did(rng);
    let proof = sok::prove_registration(params, node.secret(), node.public(), &did, rng);
    issue_credential(params, issuer, node.public(), attrs, &did, &proof, rng)
}

// ---------------------------------------------------------------------------
// Sender
// ---------------------------------------------------------------------------

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SenderError {
    #[error("need {expected} distinct entry nodes, got {got}")]
    EntryNodeMismatch { expected: usize, got: usize },
    #[error("path count must be at least 1")]
    NoPaths,
}

/// Picks a fresh session id and produces one empty-prefix message per path,
/// all sharing the sid and policy.
pub fn sender_init(
    policy: &Policy,
    n_paths: usize,
    entry_nodes: &[NodeId],
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(SessionId, Vec<HopMessage>), SenderError> {
    if n_paths == 0 {
        return Err(SenderError::NoPaths);
    }
    let mut distinct: Vec<&NodeId> = entry_nodes.iter().collect();
    distinct.sort();
    distinct.dedup();
    if entry_nodes.len() != n_paths || distinct.len() != n_paths {
        return Err(SenderError::EntryNodeMismatch {
            expected: n_paths,
            got: distinct.len().min(entry_nodes.len()),
        });
    }
    let sid = SessionId {
        nonce: rng.gen(),
        timestamp: now,
    };
    let messages = (0..n_paths)
        .map(|_| HopMessage {
            sid,
            policy: policy.clone(),
            hops: Vec::new(),
            link: None,
        })
        .collect();
    Ok((sid, messages))
}

// ---------------------------------------------------------------------------
// Forwarding node
// ---------------------------------------------------------------------------

/// Per-node state backing a repeater: long-term key material, certified
/// attributes, the credential, and the directory of physical neighbors.
#[derive(Debug)]
pub struct NodeRecord {
    pub id: NodeId,
    keys: NodeKeyPair,
    pub attrs: AttributeVector,
    pub cred: GrothSignature,
    pub directory: BTreeMap<NodeId, G1Element>,
    entry_state: Mutex<EntryState>,
}

impl Clone for NodeRecord {
    fn clone(&self) -> Self {
        NodeRecord {
            id: self.id.clone(),
            keys: self.keys.clone(),
            attrs: self.attrs.clone(),
            cred: self.cred,
            directory: self.directory.clone(),
            entry_state: Mutex::new(self.entry_state.lock().unwrap().clone()),
        }
    }
}

/// Seen-nonce set with timestamp-based expiry; shared mutable state of an
/// entry node, linearized by the mutex.
#[derive(Debug, Default, Clone)]
struct EntryState {
    seen: HashMap<[u8; 16], u64>,
}

impl NodeRecord {
    pub fn new(
        id: NodeId,
        keys: NodeKeyPair,
        attrs: AttributeVector,
        cred: GrothSignature,
    ) -> NodeRecord {
        NodeRecord {
            id,
            keys,
            attrs,
            cred,
            directory: BTreeMap::new(),
            entry_state: Mutex::new(EntryState::default()),
        }
    }

    pub fn public_key(&self) -> &G1Element {
        self.keys.public()
    }

    pub fn keys(&self) -> &NodeKeyPair {
        &self.keys
    }

    /// Records the sid at an entry node, enforcing freshness and uniqueness.
    fn admit_session(&self, sid: &SessionId, now: u64) -> Result<(), ForwardError> {
        let fresh = now.abs_diff(sid.timestamp) <= FRESHNESS_WINDOW_SECS;
        if !fresh {
            return Err(ForwardError::StaleSession {
                timestamp: sid.timestamp,
                now,
            });
        }
        let mut state = self.entry_state.lock().unwrap();
        let horizon = now.saturating_sub(2 * FRESHNESS_WINDOW_SECS);
        state.seen.retain(|_, ts| *ts >= horizon);
        if state.seen.insert(sid.nonce, sid.timestamp).is_some() {
            return Err(ForwardError::DuplicateSession);
        }
        Ok(())
    }
}

/// Who handed the message to the current node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predecessor<'a> {
    Sender,
    Node(&'a str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForwardError {
    #[error("link proof from predecessor is invalid")]
    LinkProofInvalid,
    #[error("predecessor {0:?} is not a known neighbor")]
    UnknownPredecessor(NodeId),
    #[error("session timestamp {timestamp} outside freshness window at {now}")]
    StaleSession { timestamp: u64, now: u64 },
    #[error("session id was already used at this entry node")]
    DuplicateSession,
    #[error("node attributes do not satisfy the session policy")]
    PolicyUnsatisfied,
}

/// Honest forwarding: validate the incoming message, append this node's
/// credential proof and pseudonym, and re-sign the link.
pub fn node_forward(
    params: &PublicParams,
    node: &NodeRecord,
    incoming: &HopMessage,
    predecessor: Predecessor,
    pk_issuer: &G2Element,
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<HopMessage, ForwardError> {
    forward_inner(params, node, incoming, predecessor, pk_issuer, now, rng, true)
}

/// Forwarding with the honest policy refusal optionally disabled; only the
/// simulator's fault injection uses the dishonest variant.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward_inner(
    params: &PublicParams,
    node: &NodeRecord,
    incoming: &HopMessage,
    predecessor: Predecessor,
    pk_issuer: &G2Element,
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
    enforce_policy: bool,
) -> Result<HopMessage, ForwardError> {
    if enforce_policy && !incoming.policy.evaluate(&node.attrs) {
        return Err(ForwardError::PolicyUnsatisfied);
    }

    let sid_bytes = incoming.sid.to_bytes();
    let session_base = Scope::Session(&sid_bytes).base(params);

    match predecessor {
        Predecessor::Sender => node.admit_session(&incoming.sid, now)?,
        Predecessor::Node(prev_id) => {
            let prev_pk = node
                .directory
                .get(prev_id)
                .ok_or_else(|| ForwardError::UnknownPredecessor(prev_id.to_owned()))?;
            let link = incoming.link.as_ref().ok_or(ForwardError::LinkProofInvalid)?;
            let last = incoming.hops.last().ok_or(ForwardError::LinkProofInvalid)?;
            let prev_ctx = proof_context(
                pk_issuer,
                &incoming.sid,
                &incoming.policy,
                &incoming.hops[..incoming.hops.len() - 1],
            );
            if !verify_link_with_base(
                params,
                &session_base,
                &sid_bytes,
                &last.nym,
                prev_pk,
                &prev_ctx,
                link,
            ) {
                return Err(ForwardError::LinkProofInvalid);
            }
        }
    }

    let ctx = proof_context(pk_issuer, &incoming.sid, &incoming.policy, &incoming.hops);
    let nym = nym_gen_with_base(&session_base, node.keys.secret());
    let (blinded, alpha, beta) = sok::blind_credential(&node.cred, rng);
    let proof = prove_credential_blinded(
        params,
        &session_base,
        node.keys.secret(),
        &node.attrs,
        &blinded,
        &alpha,
        &beta,
        &incoming.policy,
        &sid_bytes,
        &nym,
        &ctx,
        pk_issuer,
        rng,
    )
    .map_err(|e| match e {
        sok::ProveError::PolicyUnsatisfied => ForwardError::PolicyUnsatisfied,
        // structurally broken credential: the node cannot authenticate itself
        sok::ProveError::InvalidCredential => ForwardError::LinkProofInvalid,
    });
    // a dishonest node presses on even with a proof its verifier will reject
    let proof = match proof {
        Ok(p) => p,
        Err(e) if enforce_policy => return Err(e),
        Err(_) => prove_credential_dishonest(
            params,
            &session_base,
            node,
            &blinded,
            &alpha,
            &beta,
            incoming,
            &sid_bytes,
            &nym,
            &ctx,
            pk_issuer,
            rng,
        ),
    };
    let link = prove_link_with_base(
        params,
        &session_base,
        node.keys.secret(),
        &sid_bytes,
        &nym,
        node.keys.public(),
        &ctx,
        rng,
    );

    let mut out = incoming.clone();
    out.hops.push(Hop { proof, nym });
    out.link = Some(link);
    Ok(out)
}

/// Runs the honest prover algorithm on behalf of a node whose attributes do
/// not satisfy the policy (fault injection): the resulting proof is
/// well-formed but cannot verify against the policy's disclosed values.
#[allow(clippy::too_many_arguments)]
fn prove_credential_dishonest(
    params: &PublicParams,
    session_base: &G1Element,
    node: &NodeRecord,
    blinded: &sok::BlindedCredential,
    alpha: &Scalar,
    beta: &Scalar,
    incoming: &HopMessage,
    sid_bytes: &[u8],
    nym: &crate::pseudonym::Pseudonym,
    ctx: &ProofContext,
    pk_issuer: &G2Element,
    rng: &mut (impl RngCore + CryptoRng),
) -> sok::CredentialProof {
    // a permissive policy with the node's own values lets the prover run;
    // the proof is then presented against the real policy
    let own_policy = Policy::new(
        incoming.policy.policy_id.clone(),
        incoming.policy.attr_count,
        incoming
            .policy
            .disclosed()
            .map(|(i, _)| (i as u16, *node.attrs.get(i)))
            .collect(),
    );
    prove_credential_blinded(
        params,
        session_base,
        node.keys.secret(),
        &node.attrs,
        blinded,
        alpha,
        beta,
        &own_policy,
        sid_bytes,
        nym,
        ctx,
        pk_issuer,
        rng,
    )
    .expect("own-attribute policy is satisfied by construction")
}

/// Serialized public prefix all of a hop's proofs bind to: issuer key,
/// session id, policy, and every prior hop in wire layout.
pub fn proof_context(
    pk_issuer: &G2Element,
    sid: &SessionId,
    policy: &Policy,
    hops: &[Hop],
) -> ProofContext {
    let mut bytes = Vec::with_capacity(
        G2Element::BYTES
            + SessionId::BYTES
            + 40
            + 2
            + hops.len() * HopMessage::hop_wire_size(policy),
    );
    bytes.extend_from_slice(&pk_issuer.to_bytes());
    bytes.extend_from_slice(&sid.to_bytes());
    bytes.extend_from_slice(&policy.encode());
    bytes.extend_from_slice(&(hops.len() as u16).to_be_bytes());
    for hop in hops {
        wire::write_hop(&mut bytes, hop);
    }
    ProofContext(bytes)
}

// ---------------------------------------------------------------------------
// Receiver
// ---------------------------------------------------------------------------

/// Reasons the receiver outputs ⊥ instead of a path count.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    #[error("messages do not share one session id")]
    SidMismatch,
    #[error("message policy differs from the agreed policy")]
    PolicyMismatch,
    #[error("terminal link proof of path {path} is invalid")]
    LinkInvalid { path: usize },
    #[error("credential proof of path {path}, hop {hop} is invalid")]
    ProofInvalid { path: usize, hop: usize },
    #[error("pseudonym of path {first_path}, hop {first_hop} reappears at path {second_path}, hop {second_hop}")]
    DuplicatePseudonym {
        first_path: usize,
        first_hop: usize,
        second_path: usize,
        second_hop: usize,
    },
}

/// Receiver output: the number of validated disjoint paths, or ⊥.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept { paths: u32 },
    Reject(RejectReason),
}

impl Verdict {
    pub fn accepted(&self) -> Option<u32> {
        match self {
            Verdict::Accept { paths } => Some(*paths),
            Verdict::Reject(_) => None,
        }
    }
}

/// Verifies the final messages of all paths: shared sid, agreed policy, the
/// terminal link proof of each path against the exit node's key, every hop
/// proof against its reconstructed prefix, then global pseudonym
/// distinctness. Checks are ordered reject-fast; the first failure (in path,
/// then hop order) is reported.
///
/// `exit_keys[i]` is the known public key of the node that delivered
/// `finals[i]`.
pub fn receiver_verify(
    params: &PublicParams,
    vk: &VerifierKey,
    policy: &Policy,
    finals: &[HopMessage],
    exit_keys: &[G1Element],
) -> Verdict {
    let Some(first) = finals.first() else {
        return Verdict::Reject(RejectReason::SidMismatch);
    };
    if finals.len() != exit_keys.len() {
        return Verdict::Reject(RejectReason::LinkInvalid {
            path: finals.len().min(exit_keys.len()),
        });
    }
    let sid = first.sid;
    if finals.iter().any(|m| m.sid != sid) {
        return Verdict::Reject(RejectReason::SidMismatch);
    }
    let agreed = policy.encode();
    if finals.iter().any(|m| m.policy.encode() != agreed) {
        return Verdict::Reject(RejectReason::PolicyMismatch);
    }

    let sid_bytes = sid.to_bytes();
    let session_base = Scope::Session(&sid_bytes).base(params);

    // terminal link proofs first
    for (path, (msg, exit_pk)) in finals.iter().zip(exit_keys).enumerate() {
        let (Some(link), Some(last)) = (&msg.link, msg.hops.last()) else {
            return Verdict::Reject(RejectReason::LinkInvalid { path });
        };
        let ctx = proof_context(
            vk.issuer(),
            &sid,
            policy,
            &msg.hops[..msg.hops.len() - 1],
        );
        if !verify_link_with_base(params, &session_base, &sid_bytes, &last.nym, exit_pk, &ctx, link)
        {
            return Verdict::Reject(RejectReason::LinkInvalid { path });
        }
    }

    // hop proofs, independently verifiable once each prefix is reconstructed
    let mut tasks = Vec::new();
    for (path, msg) in finals.iter().enumerate() {
        for hop in 0..msg.hops.len() {
            let ctx = proof_context(vk.issuer(), &sid, policy, &msg.hops[..hop]);
            tasks.push((path, hop, ctx));
        }
    }
    let results: Vec<(usize, usize, bool, crate::group::OpCounters)> = tasks
        .par_iter()
        .map(|(path, hop, ctx)| {
            let (ok, ops) = crate::group::counters::tally_detached(|| {
                let entry = &finals[*path].hops[*hop];
                verify_credential_with_base(
                    params,
                    vk,
                    &session_base,
                    &entry.proof,
                    policy,
                    &sid_bytes,
                    &entry.nym,
                    ctx,
                )
            });
            (*path, *hop, ok, ops)
        })
        .collect();
    for (_, _, _, ops) in &results {
        crate::group::counters::merge(*ops);
    }
    if let Some(&(path, hop, _, _)) = results.iter().filter(|(_, _, ok, _)| !ok).min_by_key(|r| (r.0, r.1))
    {
        return Verdict::Reject(RejectReason::ProofInvalid { path, hop });
    }

    // global pairwise distinctness of pseudonyms — the disjointness check
    let mut seen: BTreeMap<[u8; 48], (usize, usize)> = BTreeMap::new();
    for (path, msg) in finals.iter().enumerate() {
        for (hop, entry) in msg.hops.iter().enumerate() {
            if let Some(&(first_path, first_hop)) = seen.get(&entry.nym.to_bytes()) {
                return Verdict::Reject(RejectReason::DuplicatePseudonym {
                    first_path,
                    first_hop,
                    second_path: path,
                    second_hop: hop,
                });
            }
            seen.insert(entry.nym.to_bytes(), (path, hop));
        }
    }

    Verdict::Accept {
        paths: finals.len() as u32,
    }
}

#[cfg(test)]
mod tests;
