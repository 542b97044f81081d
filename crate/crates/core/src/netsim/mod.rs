//! In-process simulated QKD network: topology and neighbor directories,
//! disjoint-route selection, honest session orchestration, adversarial
//! fault injection, and the executable security-experiment harnesses.
//!
//! Message passing is purely in-process and deterministic under a seeded
//! randomness source; every session serializes its final messages through
//! the real wire format before receiver verification.

pub mod routing;

pub use routing::{check_disjoint_routes, find_disjoint_paths, Adjacency, NoSuchRoutes};

use crate::group::counters::{self, OpCounters};
use crate::group::{G1Element, G2Element, PublicParams};
use crate::groth::{self, IssuerKeyPair};
use crate::policy::{AttributeVector, Policy};
use crate::protocol::{
    self, deserialize_hop_message, forward_inner, node_forward, payload_bytes, register,
    sender_init, serialize_hop_message, ForwardError, HopMessage, NodeId, NodeRecord,
    Predecessor, RegistrationError, RejectReason, SessionId, Verdict, WireError,
};
use crate::pseudonym::key_gen;
use crate::sok::VerifierKey;
use rand::{CryptoRng, Rng, RngCore};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use thiserror::Error;

/// Fixed simulation epoch; sessions are stamped and validated against it.
pub const DEFAULT_NOW: u64 = 1_900_000_000;

// ---------------------------------------------------------------------------
// Graph description and construction
// ---------------------------------------------------------------------------

/// Parsed operator-side topology description.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphSpec {
    pub nodes: Vec<(NodeId, Vec<String>)>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub sender_attach: Vec<NodeId>,
    pub receiver_attach: Vec<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphParseError {
    #[error("line {0}: {1}")]
    Malformed(usize, String),
}

impl GraphSpec {
    /// Line-oriented text format:
    ///
    /// ```text
    /// node <id> attrs <v1,...,vl>
    /// edge <id> <id>
    /// sender <id> [<id> ...]
    /// receiver <id> [<id> ...]
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<GraphSpec, GraphParseError> {
        let mut spec = GraphSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut words = line.split_whitespace();
            let kind = words.next().unwrap();
            let rest: Vec<&str> = words.collect();
            let err = |msg: &str| GraphParseError::Malformed(lineno + 1, msg.to_string());
            match kind {
                "node" => {
                    if rest.len() != 3 || rest[1] != "attrs" {
                        return Err(err("expected: node <id> attrs <v1,...,vl>"));
                    }
                    let attrs = rest[2].split(',').map(str::to_owned).collect();
                    spec.nodes.push((rest[0].to_owned(), attrs));
                }
                "edge" => {
                    if rest.len() != 2 {
                        return Err(err("expected: edge <id> <id>"));
                    }
                    spec.edges.push((rest[0].to_owned(), rest[1].to_owned()));
                }
                "sender" => {
                    if rest.is_empty() {
                        return Err(err("expected: sender <id> [<id> ...]"));
                    }
                    spec.sender_attach.extend(rest.iter().map(|s| s.to_string()));
                }
                "receiver" => {
                    if rest.is_empty() {
                        return Err(err("expected: receiver <id> [<id> ...]"));
                    }
                    spec.receiver_attach.extend(rest.iter().map(|s| s.to_string()));
                }
                other => return Err(err(&format!("unknown directive {other:?}"))),
            }
        }
        Ok(spec)
    }
}

/// A fully registered network: per-node records with populated neighbor
/// directories, plus the sender/receiver attachment points.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    pub issuer_pk: G2Element,
    pub nodes: BTreeMap<NodeId, NodeRecord>,
    pub adjacency: Adjacency,
    pub sender_attach: Vec<NodeId>,
    pub receiver_attach: Vec<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("node {node} has {got} attributes, parameters require {expected}")]
    AttrCount {
        node: NodeId,
        expected: usize,
        got: usize,
    },
    #[error("attachment references unknown node {0}")]
    UnknownAttachment(NodeId),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
}

/// Builds and registers the network using the attribute labels in the spec.
pub fn build_graph(
    params: &PublicParams,
    spec: &GraphSpec,
    issuer: &IssuerKeyPair,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<NetworkGraph, BuildError> {
    let attrs = spec
        .nodes
        .iter()
        .map(|(id, labels)| (id.clone(), AttributeVector::from_labels(labels)))
        .collect();
    build_graph_with_attrs(params, spec, &attrs, issuer, rng)
}

/// Builds the network with explicit per-node attribute vectors (the
/// experiments let the adversary choose them); registration stays honest.
pub fn build_graph_with_attrs(
    params: &PublicParams,
    spec: &GraphSpec,
    attrs: &BTreeMap<NodeId, AttributeVector>,
    issuer: &IssuerKeyPair,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<NetworkGraph, BuildError> {
    let mut nodes: BTreeMap<NodeId, NodeRecord> = BTreeMap::new();
    for (id, _) in &spec.nodes {
        let attr_vec = attrs
            .get(id)
            .ok_or_else(|| BuildError::UnknownNode(id.clone()))?;
        if attr_vec.len() != params.attr_count() {
            return Err(BuildError::AttrCount {
                node: id.clone(),
                expected: params.attr_count(),
                got: attr_vec.len(),
            });
        }
        let keys = key_gen(params, rng);
        let cred = register(params, issuer, &keys, attr_vec, rng)?;
        let record = NodeRecord::new(id.clone(), keys, attr_vec.clone(), cred);
        if nodes.insert(id.clone(), record).is_some() {
            return Err(BuildError::DuplicateNode(id.clone()));
        }
    }

    let mut adjacency: Adjacency = nodes.keys().map(|id| (id.clone(), BTreeSet::new())).collect();
    for (a, b) in &spec.edges {
        if a == b {
            return Err(BuildError::SelfLoop(a.clone()));
        }
        for id in [a, b] {
            if !nodes.contains_key(id) {
                return Err(BuildError::UnknownNode(id.clone()));
            }
        }
        adjacency.get_mut(a).unwrap().insert(b.clone());
        adjacency.get_mut(b).unwrap().insert(a.clone());
    }
    for id in spec.sender_attach.iter().chain(&spec.receiver_attach) {
        if !nodes.contains_key(id) {
            return Err(BuildError::UnknownAttachment(id.clone()));
        }
    }

    // directories: each node knows exactly its physical neighbors
    let pks: BTreeMap<NodeId, G1Element> = nodes
        .iter()
        .map(|(id, n)| (id.clone(), *n.public_key()))
        .collect();
    for (id, record) in nodes.iter_mut() {
        for neighbor in &adjacency[id] {
            record.directory.insert(neighbor.clone(), pks[neighbor]);
        }
    }

    Ok(NetworkGraph {
        issuer_pk: *issuer.public(),
        nodes,
        adjacency,
        sender_attach: spec.sender_attach.clone(),
        receiver_attach: spec.receiver_attach.clone(),
    })
}

impl NetworkGraph {
    /// Routes via the max-flow selector, validated by the independent checker.
    pub fn disjoint_routes(&self, k: usize) -> Result<RouteSpec, NoSuchRoutes> {
        let paths = find_disjoint_paths(
            &self.adjacency,
            &self.sender_attach,
            &self.receiver_attach,
            k,
        )?;
        check_disjoint_routes(
            &self.adjacency,
            &self.sender_attach,
            &self.receiver_attach,
            &paths,
            k,
        )
        .expect("flow routine produced invalid routes");
        Ok(RouteSpec { paths })
    }

    fn exit_key(&self, route: &[NodeId]) -> G1Element {
        *self.nodes[route.last().expect("routes are non-empty")].public_key()
    }
}

/// The chosen transmission paths: sequences of adjacent repeaters from an
/// entry attachment to an exit attachment. Disjointness is *not* an
/// invariant here — the compliance experiments deliberately route
/// overlapping paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSpec {
    pub paths: Vec<Vec<NodeId>>,
}

impl RouteSpec {
    pub fn total_hops(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }
}

// ---------------------------------------------------------------------------
// Sessions and fault injection
// ---------------------------------------------------------------------------

/// Which wire field of a hop entry a tampering fault flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperField {
    Nym,
    CredRHat,
    CredS,
    CredT,
    Challenge,
    ZSk,
    ZAlpha,
    ZBeta,
    ZHidden(usize),
}

impl TamperField {
    /// Byte offset of the field inside one serialized hop entry.
    fn offset(&self) -> usize {
        match self {
            TamperField::Nym => 0,
            TamperField::CredRHat => 48,
            TamperField::CredS => 144,
            TamperField::CredT => 192,
            TamperField::Challenge => 240,
            TamperField::ZSk => 272,
            TamperField::ZAlpha => 304,
            TamperField::ZBeta => 336,
            TamperField::ZHidden(i) => 368 + 32 * i,
        }
    }
}

/// One adversarial behavior per session run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Route one node onto two paths (crypto stays honest).
    ShareNodeAcrossPaths,
    /// The node at (path, hop) relays the message without appending itself.
    SkipAppendAndRelay { path: usize, hop: usize },
    /// An unregistered device impersonates the node at (path, hop).
    UncertifiedNodeInject { path: usize, hop: usize },
    /// The node at (path, hop) violates the policy but forwards anyway.
    PolicyViolatingAttrs { path: usize, hop: usize },
    /// A second transmission reuses the session id at the entry node.
    ReplaySid,
    /// Flip one byte of a hop field in the serialized final message.
    TamperHop {
        path: usize,
        hop: usize,
        field: TamperField,
    },
}

/// Session outcome as observed end to end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionVerdict {
    Accepted(u32),
    ReceiverRejected(RejectReason),
    /// An honest node refused to forward; the transmission died mid-path.
    NodeAborted {
        path: usize,
        hop: usize,
        error: ForwardError,
    },
    /// The receiver could not decode a final message.
    DecodeFailed(WireError),
}

impl SessionVerdict {
    pub fn accepted(&self) -> Option<u32> {
        match self {
            SessionVerdict::Accepted(n) => Some(*n),
            _ => None,
        }
    }
}

/// Everything that crossed the receiver boundary, in wire form.
#[derive(Debug, Clone)]
pub struct SessionTranscript {
    pub sid: SessionId,
    pub paths: Vec<PathTranscript>,
}

/// One path's final message plus the exit key the receiver resolved.
#[derive(Debug, Clone)]
pub struct PathTranscript {
    pub exit_pk: G1Element,
    pub wire: Vec<u8>,
}

/// Instrumentation collected during a session.
#[derive(Debug, Clone, Default)]
pub struct SessionCounters {
    /// One entry per executed forwarding step, in delivery order.
    pub per_hop: Vec<OpCounters>,
    pub node_total: OpCounters,
    pub receiver: OpCounters,
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub verdict: SessionVerdict,
    pub transcript: SessionTranscript,
    pub counters: SessionCounters,
    pub payload_bytes: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid routes: {0}")]
    InvalidRoutes(String),
    #[error("route references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("fault not applicable: {0}")]
    FaultNotApplicable(String),
    #[error("sender error: {0}")]
    Sender(#[from] protocol::SenderError),
}

/// Orchestrates one transmission: sender initiation, the per-path forwarding
/// chains (with optional fault injection), wire round-trip of the final
/// messages, and receiver verification. Never panics on protocol failures;
/// they surface in the verdict.
pub fn run_session(
    g: &NetworkGraph,
    routes: &RouteSpec,
    policy: &Policy,
    fault: Option<&Fault>,
    params: &PublicParams,
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<SessionOutcome, SimError> {
    let sid_nonce: [u8; 16] = rng.gen();
    run_transmission(g, routes, policy, fault, params, sid_nonce, now, rng)
}

#[allow(clippy::too_many_arguments)]
fn run_transmission(
    g: &NetworkGraph,
    routes: &RouteSpec,
    policy: &Policy,
    fault: Option<&Fault>,
    params: &PublicParams,
    sid_nonce: [u8; 16],
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<SessionOutcome, SimError> {
    let routes = apply_route_fault(g, routes, fault)?;
    validate_routes(g, &routes)?;

    let entries: Vec<NodeId> = routes.paths.iter().map(|p| p[0].clone()).collect();
    let (sid, mut messages) = sender_init(policy, routes.paths.len(), &entries, now, rng)?;
    let sid = SessionId {
        nonce: sid_nonce,
        ..sid
    };
    for m in &mut messages {
        m.sid = sid;
    }

    let mut counters_out = SessionCounters::default();
    let mut finals: Vec<HopMessage> = Vec::with_capacity(routes.paths.len());
    let mut exit_keys: Vec<G1Element> = Vec::with_capacity(routes.paths.len());

    for (path_idx, route) in routes.paths.iter().enumerate() {
        let mut msg = messages[path_idx].clone();
        let mut predecessor: Option<NodeId> = None;
        for (hop_idx, node_id) in route.iter().enumerate() {
            let node = &g.nodes[node_id];
            let from = match &predecessor {
                None => Predecessor::Sender,
                Some(id) => Predecessor::Node(id),
            };
            let step = hop_step(fault, path_idx, hop_idx);
            let forwarded = match step {
                HopStep::Skip => {
                    predecessor = Some(node_id.clone());
                    continue;
                }
                HopStep::Honest => {
                    let (res, ops) = counters::tally_detached(|| {
                        node_forward(params, node, &msg, from, &g.issuer_pk, now, rng)
                    });
                    counters_out.per_hop.push(ops);
                    counters_out.node_total += ops;
                    res
                }
                HopStep::Uncertified => {
                    let fake = fabricate_uncertified(params, node, rng);
                    let (res, ops) = counters::tally_detached(|| {
                        node_forward(params, &fake, &msg, from, &g.issuer_pk, now, rng)
                    });
                    counters_out.per_hop.push(ops);
                    counters_out.node_total += ops;
                    res
                }
                HopStep::PolicyViolating => {
                    let bad = policy_violating_clone(node, policy)
                        .map_err(SimError::FaultNotApplicable)?;
                    let (res, ops) = counters::tally_detached(|| {
                        forward_inner(params, &bad, &msg, from, &g.issuer_pk, now, rng, false)
                    });
                    counters_out.per_hop.push(ops);
                    counters_out.node_total += ops;
                    res
                }
            };
            counters::merge(*counters_out.per_hop.last().unwrap());
            match forwarded {
                Ok(next) => msg = next,
                Err(error) => {
                    return Ok(SessionOutcome {
                        verdict: SessionVerdict::NodeAborted {
                            path: path_idx,
                            hop: hop_idx,
                            error,
                        },
                        transcript: SessionTranscript {
                            sid,
                            paths: Vec::new(),
                        },
                        counters: counters_out,
                        payload_bytes: 0,
                    });
                }
            }
            predecessor = Some(node_id.clone());
        }
        finals.push(msg);
        exit_keys.push(g.exit_key(route));
    }

    // replay: deliver the same initial message to the entry node again
    if matches!(fault, Some(Fault::ReplaySid)) {
        let entry = &g.nodes[&routes.paths[0][0]];
        let replayed = HopMessage {
            sid,
            policy: policy.clone(),
            hops: Vec::new(),
            link: None,
        };
        if let Err(error) =
            node_forward(params, entry, &replayed, Predecessor::Sender, &g.issuer_pk, now, rng)
        {
            return Ok(SessionOutcome {
                verdict: SessionVerdict::NodeAborted {
                    path: 0,
                    hop: 0,
                    error,
                },
                transcript: SessionTranscript {
                    sid,
                    paths: Vec::new(),
                },
                counters: counters_out,
                payload_bytes: 0,
            });
        }
    }

    // serialize the final messages; tampering happens on the wire bytes
    let mut path_transcripts = Vec::with_capacity(finals.len());
    for (path_idx, msg) in finals.iter().enumerate() {
        let mut bytes = serialize_hop_message(msg);
        if let Some(Fault::TamperHop { path, hop, field }) = fault {
            if *path == path_idx {
                let at = hop_field_offset(msg, *hop, *field)
                    .map_err(SimError::FaultNotApplicable)?;
                bytes[at] ^= 0x01;
            }
        }
        path_transcripts.push(PathTranscript {
            exit_pk: exit_keys[path_idx],
            wire: bytes,
        });
    }

    // wire round trip into the receiver
    let mut decoded = Vec::with_capacity(path_transcripts.len());
    for pt in &path_transcripts {
        match deserialize_hop_message(&pt.wire) {
            Ok(m) => decoded.push(m),
            Err(e) => {
                return Ok(SessionOutcome {
                    verdict: SessionVerdict::DecodeFailed(e),
                    transcript: SessionTranscript {
                        sid,
                        paths: path_transcripts.clone(),
                    },
                    counters: counters_out,
                    payload_bytes: path_transcripts.iter().map(|p| plain_payload(&p.wire)).sum(),
                });
            }
        }
    }
    let payload: usize = decoded.iter().map(payload_bytes).sum();

    let vk = VerifierKey::new(params, &g.issuer_pk);
    let (verdict, receiver_ops) = counters::tally_detached(|| {
        protocol::receiver_verify(params, &vk, policy, &decoded, &exit_keys)
    });
    counters::merge(receiver_ops);
    counters_out.receiver = receiver_ops;

    Ok(SessionOutcome {
        verdict: match verdict {
            Verdict::Accept { paths } => SessionVerdict::Accepted(paths),
            Verdict::Reject(r) => SessionVerdict::ReceiverRejected(r),
        },
        transcript: SessionTranscript {
            sid,
            paths: path_transcripts,
        },
        counters: counters_out,
        payload_bytes: payload,
    })
}

enum HopStep {
    Honest,
    Skip,
    Uncertified,
    PolicyViolating,
}

fn hop_step(fault: Option<&Fault>, path: usize, hop: usize) -> HopStep {
    match fault {
        Some(Fault::SkipAppendAndRelay { path: p, hop: h }) if (*p, *h) == (path, hop) => {
            HopStep::Skip
        }
        Some(Fault::UncertifiedNodeInject { path: p, hop: h }) if (*p, *h) == (path, hop) => {
            HopStep::Uncertified
        }
        Some(Fault::PolicyViolatingAttrs { path: p, hop: h }) if (*p, *h) == (path, hop) => {
            HopStep::PolicyViolating
        }
        _ => HopStep::Honest,
    }
}

/// A device with fresh keys and a credential from a rogue issuer,
/// impersonating `node` (same id and directory).
fn fabricate_uncertified(
    params: &PublicParams,
    node: &NodeRecord,
    rng: &mut (impl RngCore + CryptoRng),
) -> NodeRecord {
    let rogue_issuer = IssuerKeyPair::generate(params, rng);
    let keys = key_gen(params, rng);
    let msg = crate::policy::pedersen_message(params, keys.public(), &node.attrs);
    let cred = groth::sign(params, &rogue_issuer, &msg, rng);
    let mut fake = NodeRecord::new(node.id.clone(), keys, node.attrs.clone(), cred);
    fake.directory = node.directory.clone();
    fake
}

/// Clones `node` with one constrained attribute flipped away from the
/// policy's required value.
fn policy_violating_clone(node: &NodeRecord, policy: &Policy) -> Result<NodeRecord, String> {
    let Some((idx, required)) = policy.disclosed().next() else {
        return Err("policy constrains no attribute to violate".into());
    };
    let mut bad = node.clone();
    bad.attrs = node
        .attrs
        .with_value(idx, required.add(&crate::group::Scalar::one()));
    Ok(bad)
}

/// Byte offset of `field` of hop `hop` inside the serialized message.
fn hop_field_offset(msg: &HopMessage, hop: usize, field: TamperField) -> Result<usize, String> {
    if hop >= msg.hops.len() {
        return Err(format!("hop {hop} out of range ({} hops)", msg.hops.len()));
    }
    let hidden = msg.policy.hidden_count();
    if let TamperField::ZHidden(i) = field {
        if i >= hidden {
            return Err(format!("hidden response {i} out of range ({hidden})"));
        }
    }
    let header = 5 + SessionId::BYTES + msg.policy.encode().len() + 2;
    let hop_size = HopMessage::hop_wire_size(&msg.policy);
    // flip the last byte of the field for scalars, first data byte for points
    let within = field.offset();
    Ok(header + hop * hop_size + within)
}

/// Payload bytes of an undecodable wire blob: counted from the well-formed
/// prefix only (best effort for tampered transcripts).
fn plain_payload(bytes: &[u8]) -> usize {
    deserialize_hop_message(bytes)
        .map(|m| payload_bytes(&m))
        .unwrap_or(0)
}

fn apply_route_fault(
    g: &NetworkGraph,
    routes: &RouteSpec,
    fault: Option<&Fault>,
) -> Result<RouteSpec, SimError> {
    let mut routes = routes.clone();
    if matches!(fault, Some(Fault::ShareNodeAcrossPaths)) {
        if routes.paths.len() < 2 {
            return Err(SimError::FaultNotApplicable(
                "sharing a node needs at least two paths".into(),
            ));
        }
        let (first, rest) = routes.paths.split_at_mut(1);
        let donor = &first[0];
        let target = &mut rest[0];
        let mut placed = false;
        'search: for i in 1..donor.len() {
            let candidate = &donor[i];
            for j in 1..target.len() {
                if target.contains(candidate) {
                    continue;
                }
                let prev_ok = g.adjacency[&target[j - 1]].contains(candidate);
                let next_ok = j + 1 >= target.len()
                    || g.adjacency[candidate].contains(&target[j + 1]);
                if prev_ok && next_ok {
                    target[j] = candidate.clone();
                    placed = true;
                    break 'search;
                }
            }
        }
        if !placed {
            return Err(SimError::FaultNotApplicable(
                "no adjacency-preserving node substitution exists".into(),
            ));
        }
    }
    Ok(routes)
}

/// Adjacency, loop and attachment validation (disjointness deliberately not
/// included).
fn validate_routes(g: &NetworkGraph, routes: &RouteSpec) -> Result<(), SimError> {
    if routes.paths.is_empty() {
        return Err(SimError::InvalidRoutes("no paths".into()));
    }
    for (i, path) in routes.paths.iter().enumerate() {
        if path.is_empty() {
            return Err(SimError::InvalidRoutes(format!("path {i} is empty")));
        }
        for node in path {
            if !g.nodes.contains_key(node) {
                return Err(SimError::UnknownNode(node.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for node in path {
            if !seen.insert(node) {
                return Err(SimError::InvalidRoutes(format!(
                    "path {i} visits {node} twice"
                )));
            }
        }
        if !g.sender_attach.contains(&path[0]) {
            return Err(SimError::InvalidRoutes(format!(
                "path {i} does not start at a sender attachment"
            )));
        }
        if !g.receiver_attach.contains(path.last().unwrap()) {
            return Err(SimError::InvalidRoutes(format!(
                "path {i} does not end at a receiver attachment"
            )));
        }
        for pair in path.windows(2) {
            if !g.adjacency[&pair[0]].contains(&pair[1]) {
                return Err(SimError::InvalidRoutes(format!(
                    "path {i}: {} and {} are not adjacent",
                    pair[0], pair[1]
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment harnesses
// ---------------------------------------------------------------------------

/// The compliance game: the adversary picks every node's attributes, the
/// routes and the policy; registration and transmission stay honest. Returns
/// 1 iff the receiver accepted although a policy violation, a path overlap
/// or a path-count mismatch occurred.
#[allow(clippy::too_many_arguments)]
pub fn run_policy_compliance_experiment(
    params: &PublicParams,
    spec: &GraphSpec,
    attr_choice: &BTreeMap<NodeId, AttributeVector>,
    route_choice: &RouteSpec,
    policy: &Policy,
    fault: Option<&Fault>,
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<bool, ExperimentError> {
    let issuer = IssuerKeyPair::generate(params, rng);
    let g = build_graph_with_attrs(params, spec, attr_choice, &issuer, rng)?;
    let outcome = run_session(&g, route_choice, policy, fault, params, now, rng)?;

    let Some(n_reported) = outcome.verdict.accepted() else {
        return Ok(false);
    };

    // ground truth over the effective routed behavior
    let effective_routes = apply_route_fault(&g, route_choice, fault)?;
    let policy_violated = effective_routes.paths.iter().enumerate().any(|(p, path)| {
        path.iter().enumerate().any(|(h, id)| {
            let violated_by_fault = matches!(
                fault,
                Some(Fault::PolicyViolatingAttrs { path, hop }) if (*path, *hop) == (p, h)
            );
            violated_by_fault || !policy.evaluate(&attr_choice[id])
        })
    });
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    let overlapping = effective_routes
        .paths
        .iter()
        .flatten()
        .any(|id| !seen.insert(id));
    let wrong_count = n_reported as usize != effective_routes.paths.len();

    Ok(policy_violated || overlapping || wrong_count)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExperimentError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Why a challenge to the path-hiding oracle was refused.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChallengeReject {
    #[error("session id was already used")]
    SidReused,
    #[error("path {path} of branch {branch} contains a loop")]
    PathHasLoop { branch: usize, path: usize },
    #[error("paths of branch {branch} are not pairwise disjoint")]
    PathsNotDisjoint { branch: usize },
    #[error("branches differ in path count, lengths, or entry/exit nodes")]
    ShapeMismatch,
    #[error("node {node} does not satisfy the policy")]
    PolicyUnsatisfied { node: NodeId },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureCheckError {
    #[error("challenge excluded: {0}")]
    Excluded(#[from] ChallengeReject),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One wire field of a receiver transcript: schema name and byte width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDesc {
    pub name: String,
    pub len: usize,
}

/// Structural comparison of the receiver views of the two challenge
/// branches. This deliberately does not claim computational
/// indistinguishability; it demonstrates that both transcripts expose
/// identical field types and counts and no topology-bearing values.
#[derive(Debug, Clone)]
pub struct StructureReport {
    /// Per branch, per path: the field schema of the final message.
    pub branch_fields: [Vec<Vec<FieldDesc>>; 2],
    pub shapes_match: bool,
    /// Node identifiers or long-term keys found in the transcripts (must be
    /// empty).
    pub leaked_tokens: Vec<String>,
}

/// Implements the challenge-oracle input validation (one-shot sid, loop,
/// disjointness, shape and policy exclusions), then runs both branches with
/// the same session id on cloned network state and reports the structural
/// comparison of the receiver transcripts.
#[allow(clippy::too_many_arguments)]
pub fn run_path_hiding_structure_check(
    g: &NetworkGraph,
    sid_nonce: [u8; 16],
    seen_sids: &mut HashSet<[u8; 16]>,
    routes: [&RouteSpec; 2],
    policy: &Policy,
    params: &PublicParams,
    now: u64,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<StructureReport, StructureCheckError> {
    if seen_sids.contains(&sid_nonce) {
        return Err(ChallengeReject::SidReused.into());
    }
    for (branch, spec) in routes.iter().enumerate() {
        let mut all: BTreeSet<&NodeId> = BTreeSet::new();
        for (p, path) in spec.paths.iter().enumerate() {
            let mut in_path = BTreeSet::new();
            for node in path {
                if !in_path.insert(node) {
                    return Err(ChallengeReject::PathHasLoop { branch, path: p }.into());
                }
            }
            for node in path {
                if !all.insert(node) {
                    return Err(ChallengeReject::PathsNotDisjoint { branch }.into());
                }
                let record = g
                    .nodes
                    .get(node)
                    .ok_or_else(|| SimError::UnknownNode(node.clone()))?;
                if !policy.evaluate(&record.attrs) {
                    return Err(ChallengeReject::PolicyUnsatisfied { node: node.clone() }.into());
                }
            }
        }
    }
    let shape = |spec: &RouteSpec| -> Vec<(usize, NodeId, NodeId)> {
        spec.paths
            .iter()
            .map(|p| (p.len(), p[0].clone(), p.last().unwrap().clone()))
            .collect()
    };
    if shape(routes[0]) != shape(routes[1]) {
        return Err(ChallengeReject::ShapeMismatch.into());
    }
    seen_sids.insert(sid_nonce);

    let mut branch_fields: [Vec<Vec<FieldDesc>>; 2] = [Vec::new(), Vec::new()];
    let mut leaked = Vec::new();
    for (branch, spec) in routes.iter().enumerate() {
        // clone so both branches observe identical entry-node state
        let fresh = g.clone();
        let outcome =
            run_transmission(&fresh, spec, policy, None, params, sid_nonce, now, rng)?;
        for pt in &outcome.transcript.paths {
            branch_fields[branch].push(enumerate_fields(&pt.wire));
            leaked.extend(scan_for_leaks(g, &pt.wire));
        }
    }
    let shapes_match = branch_fields[0] == branch_fields[1];
    leaked.sort();
    leaked.dedup();
    Ok(StructureReport {
        branch_fields,
        shapes_match,
        leaked_tokens: leaked,
    })
}

/// Walks the wire schema of a final message, naming each field.
pub fn enumerate_fields(bytes: &[u8]) -> Vec<FieldDesc> {
    let msg = match deserialize_hop_message(bytes) {
        Ok(m) => m,
        Err(_) => {
            return vec![FieldDesc {
                name: "undecodable".into(),
                len: bytes.len(),
            }]
        }
    };
    let mut fields = vec![
        FieldDesc { name: "magic".into(), len: 4 },
        FieldDesc { name: "version".into(), len: 1 },
        FieldDesc { name: "sid.nonce".into(), len: 16 },
        FieldDesc { name: "sid.timestamp".into(), len: 8 },
        FieldDesc { name: "policy".into(), len: msg.policy.encode().len() },
        FieldDesc { name: "hop_count".into(), len: 2 },
    ];
    let hidden = msg.policy.hidden_count();
    for i in 0..msg.hops.len() {
        for (name, len) in [
            ("nym", 48),
            ("cred.r_hat", 96),
            ("cred.s", 48),
            ("cred.t", 48),
            ("proof.c", 32),
            ("proof.z_sk", 32),
            ("proof.z_alpha", 32),
            ("proof.z_beta", 32),
        ] {
            fields.push(FieldDesc {
                name: format!("hop[{i}].{name}"),
                len,
            });
        }
        fields.push(FieldDesc {
            name: format!("hop[{i}].proof.z_hidden"),
            len: 32 * hidden,
        });
    }
    fields.push(FieldDesc { name: "link_present".into(), len: 1 });
    if msg.link.is_some() {
        fields.push(FieldDesc { name: "link.c".into(), len: 32 });
        fields.push(FieldDesc { name: "link.z".into(), len: 32 });
    }
    fields
}

/// Scans a transcript for topology-bearing byte strings: node identifiers
/// and long-term node public keys. Identifiers shorter than four bytes are
/// skipped; they cannot be told apart from chance occurrences inside
/// group-element encodings.
fn scan_for_leaks(g: &NetworkGraph, wire: &[u8]) -> Vec<String> {
    let mut leaks = Vec::new();
    for (id, record) in &g.nodes {
        if id.len() >= 4 && contains(wire, id.as_bytes()) {
            leaks.push(format!("node id {id:?}"));
        }
        if contains(wire, &record.public_key().to_bytes()) {
            leaks.push(format!("public key of node {id:?}"));
        }
    }
    leaks
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

// ---------------------------------------------------------------------------
// Topology helpers
// ---------------------------------------------------------------------------

/// Complete graph on `n` nodes, all attached on both sides; every node gets
/// the same attribute labels.
pub fn complete_spec(n: usize, labels: &[&str]) -> GraphSpec {
    let ids: Vec<NodeId> = (0..n).map(|i| format!("relay-{i:02}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((ids[i].clone(), ids[j].clone()));
        }
    }
    GraphSpec {
        nodes: ids
            .iter()
            .map(|id| (id.clone(), labels.iter().map(|s| s.to_string()).collect()))
            .collect(),
        edges,
        sender_attach: ids.clone(),
        receiver_attach: ids,
    }
}

/// A single chain of `n` nodes, sender attached to the head, receiver to the
/// tail.
pub fn chain_spec(n: usize, labels: &[&str]) -> GraphSpec {
    let ids: Vec<NodeId> = (0..n).map(|i| format!("r{i:03}")).collect();
    GraphSpec {
        nodes: ids
            .iter()
            .map(|id| (id.clone(), labels.iter().map(|s| s.to_string()).collect()))
            .collect(),
        edges: ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect(),
        sender_attach: vec![ids[0].clone()],
        receiver_attach: vec![ids[ids.len() - 1].clone()],
    }
}

/// `k` disjoint chains with the given lengths; sender attached to every
/// head, receiver to every tail.
pub fn multi_chain_spec(lengths: &[usize], labels: &[&str]) -> GraphSpec {
    let mut spec = GraphSpec::default();
    for (c, &len) in lengths.iter().enumerate() {
        let ids: Vec<NodeId> = (0..len).map(|i| format!("p{c}n{i:03}")).collect();
        spec.edges
            .extend(ids.windows(2).map(|w| (w[0].clone(), w[1].clone())));
        spec.sender_attach.push(ids[0].clone());
        spec.receiver_attach.push(ids[ids.len() - 1].clone());
        spec.nodes.extend(
            ids.into_iter()
                .map(|id| (id, labels.iter().map(|s| s.to_string()).collect())),
        );
    }
    spec
}

/// Random connected graph on `n` nodes (spanning tree plus extra edges) with
/// 1–3 attachment points per side.
pub fn random_connected_spec(
    n: usize,
    labels: &[&str],
    rng: &mut (impl RngCore + CryptoRng),
) -> GraphSpec {
    assert!(n >= 2);
    let ids: Vec<NodeId> = (0..n).map(|i| format!("g{i:02}")).collect();
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert((ids[j.min(i)].clone(), ids[j.max(i)].clone()));
    }
    let extra = n + rng.gen_range(0..n);
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            let (x, y) = (a.min(b), a.max(b));
            edges.insert((ids[x].clone(), ids[y].clone()));
        }
    }
    let pick_attach = |rng: &mut dyn RngCore| {
        let count = 1 + (rng.next_u32() as usize) % 3;
        let mut chosen = BTreeSet::new();
        while chosen.len() < count {
            chosen.insert(ids[(rng.next_u32() as usize) % n].clone());
        }
        chosen.into_iter().collect::<Vec<_>>()
    };
    GraphSpec {
        nodes: ids
            .iter()
            .map(|id| (id.clone(), labels.iter().map(|s| s.to_string()).collect()))
            .collect(),
        edges: edges.into_iter().collect(),
        sender_attach: pick_attach(rng),
        receiver_attach: pick_attach(rng),
    }
}
