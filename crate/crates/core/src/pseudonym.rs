//! Scope-exclusive pseudonyms: nym = H(scope)^sk.
//!
//! A pseudonym is deterministic per (secret key, scope) and unlinkable across
//! scopes. Node public keys are the pseudonym under the distinguished setup
//! scope, session pseudonyms use the session id as scope. Equality of
//! pseudonyms within one session is exactly what exposes path overlap.

use crate::group::{hash_to_g1, DecodeError, G1Element, PublicParams, Scalar};
use rand::{CryptoRng, RngCore};

/// Domain tag for session scopes; the full session id is the hash input.
pub const SESSION_SCOPE_TAG: &[u8] = b"AQKD/v1/sid";

/// A pseudonym scope: either the distinguished setup scope or a session id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope<'a> {
    Setup,
    Session(&'a [u8]),
}

impl Scope<'_> {
    /// The scope's group base H(scope). The setup base is cached in the
    /// parameters; session bases are derived from the full session id bytes.
    pub fn base(&self, params: &PublicParams) -> G1Element {
        match self {
            Scope::Setup => *params.setup_base(),
            Scope::Session(sid) => hash_to_g1(SESSION_SCOPE_TAG, sid),
        }
    }
}

/// Node key pair; pk is the pseudonym of sk under the setup scope.
#[derive(Debug, Clone)]
pub struct NodeKeyPair {
    sk: Scalar,
    pk: G1Element,
}

impl NodeKeyPair {
    pub fn public(&self) -> &G1Element {
        &self.pk
    }

    pub fn secret(&self) -> &Scalar {
        &self.sk
    }

    pub fn from_secret(params: &PublicParams, sk: Scalar) -> NodeKeyPair {
        assert!(!sk.is_zero(), "node secret key must be nonzero");
        let pk = nym_gen(params, &sk, &Scope::Setup).0;
        NodeKeyPair { sk, pk }
    }
}

/// Samples sk ∈ ℤₚ* and derives pk = H(setup)^sk.
pub fn key_gen(params: &PublicParams, rng: &mut (impl RngCore + CryptoRng)) -> NodeKeyPair {
    NodeKeyPair::from_secret(params, Scalar::rand_nonzero(rng))
}

/// A scope-exclusive pseudonym; 48 bytes on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pseudonym(pub G1Element);

impl Pseudonym {
    pub const BYTES: usize = G1Element::BYTES;

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Pseudonym, DecodeError> {
        G1Element::from_bytes(bytes).map(Pseudonym)
    }
}

/// Deterministically computes nym = H(scope)^sk.
pub fn nym_gen(params: &PublicParams, sk: &Scalar, scope: &Scope) -> Pseudonym {
    debug_assert!(!sk.is_zero());
    Pseudonym(scope.base(params).mul(sk))
}

/// Same as [`nym_gen`] with an already-derived scope base, so callers that
/// evaluate many pseudonym equations for one session hash only once.
pub fn nym_gen_with_base(base: &G1Element, sk: &Scalar) -> Pseudonym {
    Pseudonym(base.mul(sk))
}
