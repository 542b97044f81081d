//! Re-randomizable structure-preserving signatures on a single 𝔾₁ element.
//!
//! A signature is σ = (R̂, S, T) = (Ĝʳ, (Y·G^sk)^{1/r}, (Y^sk·msg)^{1/r}) and
//! verifies via the two pairing-product equations
//!
//! ```text
//!   e(S, R̂) = e(Y, Ĝ) · e(G, pk)
//!   e(T, R̂) = e(Y, pk) · e(msg, Ĝ)
//! ```
//!
//! Signatures can be re-randomized to a fresh-looking signature on the same
//! message, which is what makes credential presentations unlinkable.

use crate::group::{multi_pairing, DecodeError, G1Element, G2Element, PublicParams, Scalar};
use rand::{CryptoRng, RngCore};

/// Issuer signing key and verification key pk = Ĝ^sk.
#[derive(Debug, Clone)]
pub struct IssuerKeyPair {
    sk: Scalar,
    pk: G2Element,
}

impl IssuerKeyPair {
    pub fn generate(params: &PublicParams, rng: &mut (impl RngCore + CryptoRng)) -> IssuerKeyPair {
        let sk = Scalar::rand_nonzero(rng);
        let pk = params.g_hat().mul(&sk);
        IssuerKeyPair { sk, pk }
    }

    pub fn from_secret(params: &PublicParams, sk: Scalar) -> IssuerKeyPair {
        assert!(!sk.is_zero(), "issuer secret key must be nonzero");
        let pk = params.g_hat().mul(&sk);
        IssuerKeyPair { sk, pk }
    }

    pub fn public(&self) -> &G2Element {
        &self.pk
    }

    pub fn secret(&self) -> &Scalar {
        &self.sk
    }
}

/// Signature σ = (R̂, S, T); 96 + 48 + 48 bytes on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrothSignature {
    pub r_hat: G2Element,
    pub s: G1Element,
    pub t: G1Element,
}

impl GrothSignature {
    pub const BYTES: usize = G2Element::BYTES + 2 * G1Element::BYTES;

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        out[..96].copy_from_slice(&self.r_hat.to_bytes());
        out[96..144].copy_from_slice(&self.s.to_bytes());
        out[144..].copy_from_slice(&self.t.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GrothSignature, DecodeError> {
        if bytes.len() != Self::BYTES {
            return Err(DecodeError::BadLength {
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        Ok(GrothSignature {
            r_hat: G2Element::from_bytes(&bytes[..96])?,
            s: G1Element::from_bytes(&bytes[96..144])?,
            t: G1Element::from_bytes(&bytes[144..])?,
        })
    }
}

/// Signs a single 𝔾₁ message with fresh randomness r ∈ ℤₚ* \ {1}.
pub fn sign(
    params: &PublicParams,
    issuer: &IssuerKeyPair,
    msg: &G1Element,
    rng: &mut (impl RngCore + CryptoRng),
) -> GrothSignature {
    let r = Scalar::rand_blinding(rng);
    let r_inv = r.inverse().expect("r is nonzero");
    let r_hat = params.g_hat().mul(&r);
    let s = params.y().add(&params.g().mul(issuer.secret())).mul(&r_inv);
    let t = params.y().mul(issuer.secret()).add(msg).mul(&r_inv);
    GrothSignature { r_hat, s, t }
}

/// Re-randomizes a valid signature into a fresh one on the same message.
pub fn rerandomize(
    sig: &GrothSignature,
    rng: &mut (impl RngCore + CryptoRng),
) -> GrothSignature {
    let r = Scalar::rand_blinding(rng);
    let r_inv = r.inverse().expect("r is nonzero");
    GrothSignature {
        r_hat: sig.r_hat.mul(&r),
        s: sig.s.mul(&r_inv),
        t: sig.t.mul(&r_inv),
    }
}

/// Checks both verification equations.
pub fn verify(
    params: &PublicParams,
    pk: &G2Element,
    sig: &GrothSignature,
    msg: &G1Element,
) -> bool {
    if sig.r_hat.is_identity() {
        return false;
    }
    // e(S,R̂) · e(-Y,Ĝ) · e(-G,pk) == 1
    let eq1 = multi_pairing(&[
        (sig.s, sig.r_hat),
        (params.y().neg(), *params.g_hat()),
        (params.g().neg(), *pk),
    ]);
    if !eq1.is_identity() {
        return false;
    }
    // e(T,R̂) · e(-Y,pk) · e(-msg,Ĝ) == 1
    let eq2 = multi_pairing(&[
        (sig.t, sig.r_hat),
        (params.y().neg(), *pk),
        (msg.neg(), *params.g_hat()),
    ]);
    eq2.is_identity()
}
