//! Hashing to the curve and to the scalar field.
//!
//! `hash_to_g1` is the standards-track simplified-SWU construction
//! (expand_message_xmd with SHA-256, Wahby-Boneh isogeny map), with the
//! domain tag used as the DST. `hash_to_scalar` derives 64 bytes with
//! SHA-512 and wide-reduces them modulo the group order, so outputs are
//! statistically uniform over ℤₚ.

use super::{G1Element, Scalar};
use ark_bls12_381::{g1, Fr, G1Projective};
use ark_ec::hashing::{
    curve_maps::wb::WBMap, map_to_curve_hasher::MapToCurveBasedHasher, HashToCurve,
};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::PrimeField;
use sha2::{Digest, Sha256, Sha512};

type G1Hasher = MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>;

/// Hashes `input` into the prime-order subgroup of 𝔾₁ under `domain_tag`.
///
/// Total and deterministic; distinct `(domain_tag, input)` pairs map to
/// independent-looking points. Not tallied by the operation counters.
pub fn hash_to_g1(domain_tag: &[u8], input: &[u8]) -> G1Element {
    assert!(!domain_tag.is_empty(), "domain tag must be non-empty");
    let hasher = G1Hasher::new(domain_tag).expect("hasher construction is infallible");
    let point = hasher.hash(input).expect("hash-to-curve is total");
    G1Element(point.into())
}

/// Hashes a transcript into ℤₚ under `domain_tag` (wide reduction).
pub fn hash_to_scalar(domain_tag: &[u8], transcript: &[u8]) -> Scalar {
    assert!(!domain_tag.is_empty(), "domain tag must be non-empty");
    let mut h = Sha512::new();
    h.update((domain_tag.len() as u16).to_be_bytes());
    h.update(domain_tag);
    h.update(transcript);
    let digest = h.finalize();
    Scalar(Fr::from_be_bytes_mod_order(&digest))
}
