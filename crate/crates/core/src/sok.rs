//! Fiat-Shamir signatures of knowledge for the three proof goals of the
//! protocol: key-possession at registration, credential possession with
//! selective attribute disclosure during forwarding, and the per-link
//! equal-discrete-log proof that ties a session pseudonym to a neighbor's
//! public key.
//!
//! The credential proof works over a blinded signature (R̂″, S″, T″) =
//! (R̂^r′, S^{1/(r′α)}, T^{1/(r′β)}) and shows knowledge of (α, β, sk,
//! hidden attributes) satisfying
//!
//! ```text
//!   (i)   e(S″,R̂″)^α = e(Y,Ĝ)·e(G,pk_I)
//!   (ii)  e(T″,R̂″)^β = e(Y,pk_I)·e(H(setup)^sk·∏H_i^{a_i}, Ĝ)
//!   (iii) nym = H(sid)^sk
//! ```
//!
//! Disclosed attribute values move to the public side of (ii): the verifier
//! sources them from the policy encoding, so a credential that does not
//! match the policy at a disclosed index cannot verify. Every proof is bound
//! to the serialized hop prefix (the context), which is what makes stripping
//! or reordering hops detectable.

use crate::group::{
    hash_to_scalar, pairing, DecodeError, G1Element, G2Element, GtElement, PublicParams, Scalar,
};
use crate::groth::GrothSignature;
use crate::policy::Policy;
use crate::pseudonym::{Pseudonym, Scope};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

const REG_DST: &[u8] = b"AQKD/v1/reg";
const CRED_DST: &[u8] = b"AQKD/v1/cred";
const LINK_DST: &[u8] = b"AQKD/v1/link";

/// Serialized public bytes all proofs of one hop are bound to: the issuer
/// key, session id, policy encoding and every prior (proof, pseudonym) pair
/// on the path. Any byte change invalidates every proof bound to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofContext(pub Vec<u8>);

impl ProofContext {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ProveError {
    /// Honest provers refuse to prove against a policy their attributes
    /// do not satisfy.
    #[error("attributes do not satisfy the policy")]
    PolicyUnsatisfied,
    /// The credential is structurally unusable (degenerate elements). Full
    /// validity is the caller's precondition; it is not re-verified here
    /// because that would distort the per-operation cost profile.
    #[error("credential is malformed")]
    InvalidCredential,
}

// ---------------------------------------------------------------------------
// Registration proof
// ---------------------------------------------------------------------------

/// Schnorr proof of knowledge of sk with pk = H(setup)^sk, bound to the
/// issuer-chosen registration nonce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistrationProof {
    pub c: Scalar,
    pub z: Scalar,
}

/// c = H(pk ‖ t ‖ did) with t = H(setup)^r; z = r + c·sk.
pub fn prove_registration(
    params: &PublicParams,
    sk: &Scalar,
    pk: &G1Element,
    did: &[u8],
    rng: &mut (impl RngCore + CryptoRng),
) -> RegistrationProof {
    let r = Scalar::rand(rng);
    let t = params.setup_base().mul(&r);
    let c = registration_challenge(pk, &t, did);
    RegistrationProof {
        c,
        z: r.add(&c.mul(sk)),
    }
}

pub fn verify_registration(
    params: &PublicParams,
    pk: &G1Element,
    did: &[u8],
    proof: &RegistrationProof,
) -> bool {
    let t = params
        .setup_base()
        .mul(&proof.z)
        .add(&pk.mul(&proof.c.neg()));
    registration_challenge(pk, &t, did) == proof.c
}

fn registration_challenge(pk: &G1Element, t: &G1Element, did: &[u8]) -> Scalar {
    let mut transcript = Vec::with_capacity(96 + did.len());
    transcript.extend_from_slice(&pk.to_bytes());
    transcript.extend_from_slice(&t.to_bytes());
    transcript.extend_from_slice(did);
    hash_to_scalar(REG_DST, &transcript)
}

// ---------------------------------------------------------------------------
// Link proof
// ---------------------------------------------------------------------------

/// Equality-of-discrete-logs proof: nym = H(sid)^sk ∧ pk = H(setup)^sk,
/// bound to the hop context. 64 bytes on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkProof {
    pub c: Scalar,
    pub z: Scalar,
}

impl LinkProof {
    pub const BYTES: usize = 2 * Scalar::BYTES;

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        out[..32].copy_from_slice(&self.c.to_bytes());
        out[32..].copy_from_slice(&self.z.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LinkProof, DecodeError> {
        if bytes.len() != Self::BYTES {
            return Err(DecodeError::BadLength {
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        Ok(LinkProof {
            c: Scalar::from_bytes(&bytes[..32])?,
            z: Scalar::from_bytes(&bytes[32..])?,
        })
    }
}

pub fn prove_link(
    params: &PublicParams,
    sk: &Scalar,
    sid: &[u8],
    nym: &Pseudonym,
    pk: &G1Element,
    ctx: &ProofContext,
    rng: &mut (impl RngCore + CryptoRng),
) -> LinkProof {
    prove_link_with_base(params, &Scope::Session(sid).base(params), sk, sid, nym, pk, ctx, rng)
}

#[allow(clippy::too_many_arguments)]
pub fn prove_link_with_base(
    params: &PublicParams,
    session_base: &G1Element,
    sk: &Scalar,
    sid: &[u8],
    nym: &Pseudonym,
    pk: &G1Element,
    ctx: &ProofContext,
    rng: &mut (impl RngCore + CryptoRng),
) -> LinkProof {
    let r = Scalar::rand(rng);
    let t_sid = session_base.mul(&r);
    let t_setup = params.setup_base().mul(&r);
    let c = link_challenge(sid, ctx, nym, pk, &t_sid, &t_setup);
    LinkProof {
        c,
        z: r.add(&c.mul(sk)),
    }
}

pub fn verify_link(
    params: &PublicParams,
    sid: &[u8],
    nym: &Pseudonym,
    pk: &G1Element,
    ctx: &ProofContext,
    proof: &LinkProof,
) -> bool {
    verify_link_with_base(params, &Scope::Session(sid).base(params), sid, nym, pk, ctx, proof)
}

pub fn verify_link_with_base(
    params: &PublicParams,
    session_base: &G1Element,
    sid: &[u8],
    nym: &Pseudonym,
    pk: &G1Element,
    ctx: &ProofContext,
    proof: &LinkProof,
) -> bool {
    let neg_c = proof.c.neg();
    let t_sid = session_base.mul(&proof.z).add(&nym.0.mul(&neg_c));
    let t_setup = params.setup_base().mul(&proof.z).add(&pk.mul(&neg_c));
    link_challenge(sid, ctx, nym, pk, &t_sid, &t_setup) == proof.c
}

fn link_challenge(
    sid: &[u8],
    ctx: &ProofContext,
    nym: &Pseudonym,
    pk: &G1Element,
    t_sid: &G1Element,
    t_setup: &G1Element,
) -> Scalar {
    let mut transcript = Vec::with_capacity(sid.len() + ctx.0.len() + 4 * 48);
    transcript.extend_from_slice(sid);
    transcript.extend_from_slice(&ctx.0);
    transcript.extend_from_slice(&nym.to_bytes());
    transcript.extend_from_slice(&pk.to_bytes());
    transcript.extend_from_slice(&t_sid.to_bytes());
    transcript.extend_from_slice(&t_setup.to_bytes());
    hash_to_scalar(LINK_DST, &transcript)
}

// ---------------------------------------------------------------------------
// Credential blinding
// ---------------------------------------------------------------------------

/// A re-randomized, exponent-blinded credential (R̂″, S″, T″); publicly
/// unlinkable to the issued signature. 192 bytes on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlindedCredential {
    pub r_hat: G2Element,
    pub s: G1Element,
    pub t: G1Element,
}

impl BlindedCredential {
    pub const BYTES: usize = G2Element::BYTES + 2 * G1Element::BYTES;
}

/// Re-randomizes the credential with r′ and blinds with α, β, returning the
/// blinding trapdoors for the prover. Costs 4 G1 and 1 G2 exponentiations.
pub fn blind_credential(
    cred: &GrothSignature,
    rng: &mut (impl RngCore + CryptoRng),
) -> (BlindedCredential, Scalar, Scalar) {
    let rerandomized = crate::groth::rerandomize(cred, rng);
    let alpha = Scalar::rand_blinding(rng);
    let beta = Scalar::rand_blinding(rng);
    let blinded = BlindedCredential {
        r_hat: rerandomized.r_hat,
        s: rerandomized.s.mul(&alpha.inverse().expect("nonzero")),
        t: rerandomized.t.mul(&beta.inverse().expect("nonzero")),
    };
    (blinded, alpha, beta)
}

// ---------------------------------------------------------------------------
// Credential proof
// ---------------------------------------------------------------------------

/// The per-hop credential presentation: blinded credential plus the
/// Fiat-Shamir responses. ℤₚ payload is 4 + (ℓ − d) scalars: challenge,
/// z_sk, z_α, z_β and one response per hidden attribute (ascending index
/// order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialProof {
    pub blinded: BlindedCredential,
    pub c: Scalar,
    pub z_alpha: Scalar,
    pub z_beta: Scalar,
    pub z_sk: Scalar,
    pub z_hidden: Vec<Scalar>,
}

impl CredentialProof {
    /// Serialized size given the policy's hidden-attribute count.
    pub fn wire_size(hidden_count: usize) -> usize {
        BlindedCredential::BYTES + (4 + hidden_count) * Scalar::BYTES
    }
}

/// Verifier-side precomputation for a fixed issuer: V1 = e(Y,Ĝ)·e(G,pk_I).
/// Building it costs one pairing (e(Y,Ĝ) is cached in the parameters) and is
/// done once per issuer, outside any per-proof accounting.
#[derive(Debug, Clone)]
pub struct VerifierKey {
    pk_issuer: G2Element,
    v1: GtElement,
}

impl VerifierKey {
    pub fn new(params: &PublicParams, pk_issuer: &G2Element) -> VerifierKey {
        VerifierKey {
            pk_issuer: *pk_issuer,
            v1: params.gt_y_ghat().mul(&pairing(params.g(), pk_issuer)),
        }
    }

    pub fn issuer(&self) -> &G2Element {
        &self.pk_issuer
    }
}

/// Proves credential possession and policy satisfaction for one hop,
/// blinding the credential internally. See [`prove_credential_blinded`] for
/// the proof itself.
#[allow(clippy::too_many_arguments)]
pub fn prove_credential(
    params: &PublicParams,
    sk: &Scalar,
    attrs: &crate::policy::AttributeVector,
    cred: &GrothSignature,
    policy: &Policy,
    sid: &[u8],
    nym: &Pseudonym,
    ctx: &ProofContext,
    pk_issuer: &G2Element,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<CredentialProof, ProveError> {
    let (blinded, alpha, beta) = blind_credential(cred, rng);
    let session_base = Scope::Session(sid).base(params);
    prove_credential_blinded(
        params,
        &session_base,
        sk,
        attrs,
        &blinded,
        &alpha,
        &beta,
        policy,
        sid,
        nym,
        ctx,
        pk_issuer,
        rng,
    )
}

/// The Fiat-Shamir proof over an already-blinded credential. Costs
/// (ℓ − d) + 3 G1 exponentiations, 2 GT exponentiations and 3 pairings.
#[allow(clippy::too_many_arguments)]
pub fn prove_credential_blinded(
    params: &PublicParams,
    session_base: &G1Element,
    sk: &Scalar,
    attrs: &crate::policy::AttributeVector,
    blinded: &BlindedCredential,
    alpha: &Scalar,
    beta: &Scalar,
    policy: &Policy,
    sid: &[u8],
    nym: &Pseudonym,
    ctx: &ProofContext,
    pk_issuer: &G2Element,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<CredentialProof, ProveError> {
    if !policy.evaluate(attrs) {
        return Err(ProveError::PolicyUnsatisfied);
    }
    if blinded.r_hat.is_identity() || blinded.s.is_identity() || blinded.t.is_identity() {
        return Err(ProveError::InvalidCredential);
    }
    debug_assert_eq!(policy.attr_count as usize, params.attr_count());

    let hidden = policy.hidden_indices();
    let r_alpha = Scalar::rand(rng);
    let r_beta = Scalar::rand(rng);
    let r_sk = Scalar::rand(rng);
    let r_hidden: Vec<Scalar> = hidden.iter().map(|_| Scalar::rand(rng)).collect();

    let b1 = pairing(&blinded.s, &blinded.r_hat);
    let b2 = pairing(&blinded.t, &blinded.r_hat);

    // W_r = H(setup)^{r_sk} · ∏_{hidden} H_i^{r_i}, committed through one
    // pairing with Ĝ.
    let mut bases = Vec::with_capacity(1 + hidden.len());
    let mut exps = Vec::with_capacity(1 + hidden.len());
    bases.push(*params.setup_base());
    exps.push(r_sk);
    for (slot, &i) in hidden.iter().enumerate() {
        bases.push(*params.attr_base(i));
        exps.push(r_hidden[slot]);
    }
    let w_r = G1Element::msm(&bases, &exps);

    let t1 = b1.pow(&r_alpha);
    let t2 = b2.pow(&r_beta).mul(&pairing(&w_r.neg(), params.g_hat()));
    let t3 = session_base.mul(&r_sk);

    let c = credential_challenge(pk_issuer, sid, policy, ctx, blinded, nym, &t1, &t2, &t3);

    let z_hidden = hidden
        .iter()
        .enumerate()
        .map(|(slot, &i)| r_hidden[slot].add(&c.mul(attrs.get(i))))
        .collect();
    Ok(CredentialProof {
        blinded: *blinded,
        c,
        z_alpha: r_alpha.add(&c.mul(alpha)),
        z_beta: r_beta.add(&c.mul(beta)),
        z_sk: r_sk.add(&c.mul(sk)),
        z_hidden,
    })
}

/// Verifies a credential proof. Costs exactly ℓ+3 G1 exponentiations, 4 GT
/// exponentiations and 4 pairings.
pub fn verify_credential(
    params: &PublicParams,
    vk: &VerifierKey,
    proof: &CredentialProof,
    policy: &Policy,
    sid: &[u8],
    nym: &Pseudonym,
    ctx: &ProofContext,
) -> bool {
    verify_credential_with_base(
        params,
        vk,
        &Scope::Session(sid).base(params),
        proof,
        policy,
        sid,
        nym,
        ctx,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn verify_credential_with_base(
    params: &PublicParams,
    vk: &VerifierKey,
    session_base: &G1Element,
    proof: &CredentialProof,
    policy: &Policy,
    sid: &[u8],
    nym: &Pseudonym,
    ctx: &ProofContext,
) -> bool {
    if policy.attr_count as usize != params.attr_count()
        || proof.z_hidden.len() != policy.hidden_count()
    {
        return false;
    }
    if proof.blinded.r_hat.is_identity() || nym.0.is_identity() {
        return false;
    }

    let neg_c = proof.c.neg();
    let b1 = pairing(&proof.blinded.s, &proof.blinded.r_hat);
    let b2 = pairing(&proof.blinded.t, &proof.blinded.r_hat);
    let k2 = pairing(params.y(), &vk.pk_issuer);

    let t1 = b1.pow(&proof.z_alpha).mul(&vk.v1.pow(&neg_c));

    // W = H(setup)^{-z_sk} · ∏_hidden H_i^{-z_i} · ∏_disclosed H_i^{-c·a_i}
    let hidden = policy.hidden_indices();
    let mut bases = Vec::with_capacity(1 + params.attr_count());
    let mut exps = Vec::with_capacity(1 + params.attr_count());
    bases.push(*params.setup_base());
    exps.push(proof.z_sk.neg());
    for (slot, &i) in hidden.iter().enumerate() {
        bases.push(*params.attr_base(i));
        exps.push(proof.z_hidden[slot].neg());
    }
    for (i, value) in policy.disclosed() {
        bases.push(*params.attr_base(i));
        exps.push(neg_c.mul(value));
    }
    let w = G1Element::msm(&bases, &exps);

    let t2 = b2
        .pow(&proof.z_beta)
        .mul(&pairing(&w, params.g_hat()))
        .mul(&k2.pow(&neg_c));
    let t3 = session_base.mul(&proof.z_sk).add(&nym.0.mul(&neg_c));

    credential_challenge(
        &vk.pk_issuer,
        sid,
        policy,
        ctx,
        &proof.blinded,
        nym,
        &t1,
        &t2,
        &t3,
    ) == proof.c
}

/// Challenge transcript: DST ‖ pk_I ‖ sid ‖ policy ‖ ctx ‖ statement elements
/// in declaration order ‖ commitments in equation order.
#[allow(clippy::too_many_arguments)]
fn credential_challenge(
    pk_issuer: &G2Element,
    sid: &[u8],
    policy: &Policy,
    ctx: &ProofContext,
    blinded: &BlindedCredential,
    nym: &Pseudonym,
    t1: &GtElement,
    t2: &GtElement,
    t3: &G1Element,
) -> Scalar {
    let policy_bytes = policy.encode();
    let mut transcript = Vec::with_capacity(
        96 + sid.len() + policy_bytes.len() + ctx.0.len() + 192 + 48 + 2 * 576 + 48,
    );
    transcript.extend_from_slice(&pk_issuer.to_bytes());
    transcript.extend_from_slice(sid);
    transcript.extend_from_slice(&policy_bytes);
    transcript.extend_from_slice(&ctx.0);
    transcript.extend_from_slice(&blinded.r_hat.to_bytes());
    transcript.extend_from_slice(&blinded.s.to_bytes());
    transcript.extend_from_slice(&blinded.t.to_bytes());
    transcript.extend_from_slice(&nym.to_bytes());
    transcript.extend_from_slice(&t1.to_bytes());
    transcript.extend_from_slice(&t2.to_bytes());
    transcript.extend_from_slice(&t3.to_bytes());
    hash_to_scalar(CRED_DST, &transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::counters;
    use crate::groth;
    use crate::policy::{attr_value, pedersen_message, AttributeVector};
    use crate::pseudonym::{key_gen, nym_gen};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rayon::prelude::*;
    use std::collections::BTreeMap;

    struct Fixture {
        params: PublicParams,
        issuer: groth::IssuerKeyPair,
        node: crate::pseudonym::NodeKeyPair,
        attrs: AttributeVector,
        cred: GrothSignature,
        policy: Policy,
        vk: VerifierKey,
    }

    fn fixture(attr_count: usize, disclose: &[usize], rng: &mut ChaCha20Rng) -> Fixture {
        let params = PublicParams::setup(attr_count);
        let issuer = groth::IssuerKeyPair::generate(&params, rng);
        let node = key_gen(&params, rng);
        let attrs = AttributeVector::from_scalars(
            (0..attr_count).map(|i| attr_value(&format!("attr-{i}"))).collect(),
        );
        let msg = pedersen_message(&params, node.public(), &attrs);
        let cred = groth::sign(&params, &issuer, &msg, rng);
        let disclosed: BTreeMap<u16, Scalar> = disclose
            .iter()
            .map(|&i| (i as u16, *attrs.get(i)))
            .collect();
        let policy = Policy::new("test-policy", attr_count as u16, disclosed);
        let vk = VerifierKey::new(&params, issuer.public());
        Fixture {
            params,
            issuer,
            node,
            attrs,
            cred,
            policy,
            vk,
        }
    }

    fn sid_bytes(tag: u8) -> Vec<u8> {
        let mut sid = vec![0u8; 24];
        sid[0] = tag;
        sid
    }

    #[test]
    fn registration_proof_roundtrip_and_binding() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let params = PublicParams::setup(1);
        let node = key_gen(&params, &mut rng);
        let did = b"did-nonce-0123456";
        let proof = prove_registration(&params, node.secret(), node.public(), did, &mut rng);
        assert!(verify_registration(&params, node.public(), did, &proof));
        // replay under a different nonce
        assert!(!verify_registration(&params, node.public(), b"did-other", &proof));
        // wrong key
        let other = key_gen(&params, &mut rng);
        assert!(!verify_registration(&params, other.public(), did, &proof));
    }

    #[test]
    fn link_proof_roundtrip_and_binding() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let params = PublicParams::setup(1);
        let node = key_gen(&params, &mut rng);
        let sid = sid_bytes(1);
        let nym = nym_gen(&params, node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(b"hop prefix bytes".to_vec());
        let proof = prove_link(&params, node.secret(), &sid, &nym, node.public(), &ctx, &mut rng);
        assert!(verify_link(&params, &sid, &nym, node.public(), &ctx, &proof));
        // neighbor's key instead of the prover's
        let other = key_gen(&params, &mut rng);
        assert!(!verify_link(&params, &sid, &nym, other.public(), &ctx, &proof));
        // tampered context
        let bad_ctx = ProofContext(b"hop prefix byteZ".to_vec());
        assert!(!verify_link(&params, &sid, &nym, node.public(), &bad_ctx, &proof));
        // wrong scope
        let sid2 = sid_bytes(2);
        assert!(!verify_link(&params, &sid2, &nym, node.public(), &ctx, &proof));
        // encoding
        assert_eq!(LinkProof::from_bytes(&proof.to_bytes()).unwrap(), proof);
        assert_eq!(proof.to_bytes().len(), 64);
    }

    #[test]
    fn blinding_satisfies_both_equations_with_trapdoors() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let f = fixture(3, &[], &mut rng);
        let (blinded, alpha, beta) = blind_credential(&f.cred, &mut rng);
        // e(S″,R̂″)^α = e(Y,Ĝ)·e(G,pk_I)
        let lhs1 = pairing(&blinded.s, &blinded.r_hat).pow(&alpha);
        let rhs1 = f
            .params
            .gt_y_ghat()
            .mul(&pairing(f.params.g(), f.issuer.public()));
        assert_eq!(lhs1, rhs1);
        // e(T″,R̂″)^β = e(Y,pk_I)·e(msg,Ĝ)
        let msg = pedersen_message(&f.params, f.node.public(), &f.attrs);
        let lhs2 = pairing(&blinded.t, &blinded.r_hat).pow(&beta);
        let rhs2 = pairing(f.params.y(), f.issuer.public()).mul(&pairing(&msg, f.params.g_hat()));
        assert_eq!(lhs2, rhs2);
        // fresh elements
        assert_ne!(blinded.r_hat, f.cred.r_hat);
        assert_ne!(blinded.s, f.cred.s);
        assert_ne!(blinded.t, f.cred.t);
    }

    #[test]
    fn credential_proof_accepts_honest_and_rejects_tampering() {
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let f = fixture(4, &[1, 3], &mut rng);
        let sid = sid_bytes(7);
        let nym = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(vec![9; 40]);
        let proof = prove_credential(
            &f.params, f.node.secret(), &f.attrs, &f.cred, &f.policy, &sid, &nym, &ctx,
            f.issuer.public(), &mut rng,
        )
        .unwrap();
        assert!(verify_credential(&f.params, &f.vk, &proof, &f.policy, &sid, &nym, &ctx));

        // different sid
        let sid2 = sid_bytes(8);
        let nym2 = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid2));
        assert!(!verify_credential(&f.params, &f.vk, &proof, &f.policy, &sid2, &nym2, &ctx));

        // tampered blinded credential
        let mut bad = proof.clone();
        bad.blinded.r_hat = bad.blinded.r_hat.add(f.params.g_hat());
        assert!(!verify_credential(&f.params, &f.vk, &bad, &f.policy, &sid, &nym, &ctx));

        // tampered context
        let bad_ctx = ProofContext(vec![8; 40]);
        assert!(!verify_credential(&f.params, &f.vk, &proof, &f.policy, &sid, &nym, &bad_ctx));

        // flipped disclosed value in the policy
        let mut disclosed: BTreeMap<u16, Scalar> =
            f.policy.disclosed().map(|(i, v)| (i as u16, *v)).collect();
        let first = *disclosed.keys().next().unwrap();
        disclosed.insert(first, disclosed[&first].add(&Scalar::one()));
        let bad_policy = Policy::new("test-policy", 4, disclosed);
        assert!(!verify_credential(&f.params, &f.vk, &proof, &bad_policy, &sid, &nym, &ctx));

        // response vector of the wrong arity
        let mut short = proof.clone();
        short.z_hidden.pop();
        assert!(!verify_credential(&f.params, &f.vk, &short, &f.policy, &sid, &nym, &ctx));
    }

    #[test]
    fn prover_refuses_policy_violation() {
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let f = fixture(3, &[0], &mut rng);
        let sid = sid_bytes(9);
        let nym = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(vec![]);
        let bad_attrs = f.attrs.with_value(0, f.attrs.get(0).add(&Scalar::one()));
        let err = prove_credential(
            &f.params, f.node.secret(), &bad_attrs, &f.cred, &f.policy, &sid, &nym, &ctx,
            f.issuer.public(), &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, ProveError::PolicyUnsatisfied);
    }

    #[test]
    fn fixed_seed_is_bit_reproducible_and_fresh_seeds_differ() {
        let mut rng_a = ChaCha20Rng::seed_from_u64(26);
        let f = fixture(3, &[2], &mut rng_a);
        let sid = sid_bytes(10);
        let nym = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(vec![1, 2, 3]);
        let prove = |seed: u64| {
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            prove_credential(
                &f.params, f.node.secret(), &f.attrs, &f.cred, &f.policy, &sid, &nym, &ctx,
                f.issuer.public(), &mut r,
            )
            .unwrap()
        };
        let p1 = prove(99);
        let p2 = prove(99);
        assert_eq!(p1, p2);
        let p3 = prove(100);
        assert_ne!(p1, p3);
        assert!(verify_credential(&f.params, &f.vk, &p3, &f.policy, &sid, &nym, &ctx));
    }

    #[test]
    fn counter_conformance_per_operation() {
        let mut rng = ChaCha20Rng::seed_from_u64(27);
        let l = 5;
        // d = 0: all attributes hidden, the general cost profile
        let f = fixture(l, &[], &mut rng);
        let sid = sid_bytes(11);
        let session_base = Scope::Session(&sid).base(&f.params);
        let nym = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(vec![5; 16]);

        let ((blinded, alpha, beta), ops) =
            counters::measure(|| blind_credential(&f.cred, &mut rng));
        assert_eq!((ops.g1_exp, ops.g2_exp, ops.gt_exp, ops.pairings), (4, 1, 0, 0));

        let (proof, ops) = counters::measure(|| {
            prove_credential_blinded(
                &f.params, &session_base, f.node.secret(), &f.attrs, &blinded, &alpha, &beta,
                &f.policy, &sid, &nym, &ctx, f.issuer.public(), &mut rng,
            )
            .unwrap()
        });
        assert_eq!(ops.g1_exp, l as u64 + 2);
        assert_eq!(ops.g2_exp, 0);
        assert_eq!(ops.gt_exp, 2);
        assert!(ops.pairings == 3 || ops.pairings == 4);

        let (ok, ops) = counters::measure(|| {
            verify_credential_with_base(
                &f.params, &f.vk, &session_base, &proof, &f.policy, &sid, &nym, &ctx,
            )
        });
        assert!(ok);
        assert_eq!(
            (ops.g1_exp, ops.g2_exp, ops.gt_exp, ops.pairings),
            (l as u64 + 3, 0, 4, 4)
        );

        let (link, ops) = counters::measure(|| {
            prove_link_with_base(
                &f.params, &session_base, f.node.secret(), &sid, &nym, f.node.public(), &ctx,
                &mut rng,
            )
        });
        assert_eq!((ops.g1_exp, ops.g2_exp, ops.gt_exp, ops.pairings), (2, 0, 0, 0));

        let (ok, ops) = counters::measure(|| {
            verify_link_with_base(
                &f.params, &session_base, &sid, &nym, f.node.public(), &ctx, &link,
            )
        });
        assert!(ok);
        assert_eq!((ops.g1_exp, ops.g2_exp, ops.gt_exp, ops.pairings), (4, 0, 0, 0));
    }

    #[test]
    fn verifier_counts_hold_with_disclosure() {
        let mut rng = ChaCha20Rng::seed_from_u64(28);
        let l = 6;
        let f = fixture(l, &[0, 2, 4], &mut rng);
        let sid = sid_bytes(12);
        let session_base = Scope::Session(&sid).base(&f.params);
        let nym = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(vec![]);
        let proof = prove_credential(
            &f.params, f.node.secret(), &f.attrs, &f.cred, &f.policy, &sid, &nym, &ctx,
            f.issuer.public(), &mut rng,
        )
        .unwrap();
        let (ok, ops) = counters::measure(|| {
            verify_credential_with_base(
                &f.params, &f.vk, &session_base, &proof, &f.policy, &sid, &nym, &ctx,
            )
        });
        assert!(ok);
        assert_eq!(
            (ops.g1_exp, ops.g2_exp, ops.gt_exp, ops.pairings),
            (l as u64 + 3, 0, 4, 4)
        );
    }

    #[test]
    fn completeness_sweep_all_proof_kinds() {
        // ≥1000 honest instances per proof kind
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let f = fixture(2, &[1], &mut rng);
        let seeds: Vec<u64> = (0..1000).collect();

        let reg_ok = seeds
            .par_iter()
            .filter(|&&seed| {
                let mut r = ChaCha20Rng::seed_from_u64(seed);
                let node = key_gen(&f.params, &mut r);
                let did: [u8; 16] = rand::Rng::gen(&mut r);
                let p = prove_registration(&f.params, node.secret(), node.public(), &did, &mut r);
                verify_registration(&f.params, node.public(), &did, &p)
            })
            .count();
        assert_eq!(reg_ok, 1000);

        let link_ok = seeds
            .par_iter()
            .filter(|&&seed| {
                let mut r = ChaCha20Rng::seed_from_u64(seed + 7_000);
                let node = key_gen(&f.params, &mut r);
                let sid: [u8; 24] = rand::Rng::gen(&mut r);
                let nym = nym_gen(&f.params, node.secret(), &Scope::Session(&sid));
                let ctx = ProofContext(sid.to_vec());
                let p = prove_link(&f.params, node.secret(), &sid, &nym, node.public(), &ctx, &mut r);
                verify_link(&f.params, &sid, &nym, node.public(), &ctx, &p)
            })
            .count();
        assert_eq!(link_ok, 1000);

        let cred_ok = seeds
            .par_iter()
            .filter(|&&seed| {
                let mut r = ChaCha20Rng::seed_from_u64(seed + 50_000);
                let node = key_gen(&f.params, &mut r);
                let attrs = AttributeVector::from_scalars(vec![
                    Scalar::rand(&mut r),
                    *f.policy.disclosed().next().unwrap().1,
                ]);
                let msg = pedersen_message(&f.params, node.public(), &attrs);
                let cred = groth::sign(&f.params, &f.issuer, &msg, &mut r);
                let sid: [u8; 24] = rand::Rng::gen(&mut r);
                let nym = nym_gen(&f.params, node.secret(), &Scope::Session(&sid));
                let ctx = ProofContext(vec![seed as u8]);
                let p = prove_credential(
                    &f.params, node.secret(), &attrs, &cred, &f.policy, &sid, &nym, &ctx,
                    f.issuer.public(), &mut r,
                )
                .unwrap();
                verify_credential(&f.params, &f.vk, &p, &f.policy, &sid, &nym, &ctx)
            })
            .count();
        assert_eq!(cred_ok, 1000);
    }

    #[test]
    fn context_single_byte_flip_breaks_every_dependent_proof() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let f = fixture(2, &[], &mut rng);
        let sid = sid_bytes(13);
        let nym = nym_gen(&f.params, f.node.secret(), &Scope::Session(&sid));
        let ctx = ProofContext(vec![0xAA; 24]);
        let cred_proof = prove_credential(
            &f.params, f.node.secret(), &f.attrs, &f.cred, &f.policy, &sid, &nym, &ctx,
            f.issuer.public(), &mut rng,
        )
        .unwrap();
        let link = prove_link(&f.params, f.node.secret(), &sid, &nym, f.node.public(), &ctx, &mut rng);
        for byte in 0..ctx.0.len() {
            for bit in [0, 7] {
                let mut flipped = ctx.clone();
                flipped.0[byte] ^= 1 << bit;
                assert!(!verify_credential(
                    &f.params, &f.vk, &cred_proof, &f.policy, &sid, &nym, &flipped
                ));
                assert!(!verify_link(
                    &f.params, &sid, &nym, f.node.public(), &flipped, &link
                ));
            }
        }
    }
}
