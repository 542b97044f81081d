//! Bilinear-group arithmetic over BLS12-381: scalars, source-group and
//! target-group elements, pairings, canonical serialization and the
//! nothing-up-my-sleeve public parameters.
//!
//! Every exponentiation and pairing routed through this module is tallied in
//! [`counters`]; all other modules build on these wrappers exclusively, which
//! keeps the curve choice an internal seam.
//!
//! Canonical encodings are 32 bytes for scalars (big-endian), 48 bytes for
//! G1 and 96 bytes for G2 (compressed). Deserialization enforces canonical
//! form, curve membership and prime-order-subgroup membership. Target-group
//! elements are never placed on the wire; they serialize only into challenge
//! transcripts.

pub mod counters;
mod hash;

pub use counters::OpCounters;
pub use hash::{hash_to_g1, hash_to_scalar};

use ark_bls12_381::{Bls12_381, Fq, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, Group, VariableBaseMSM};
use ark_ff::fields::Field;
use ark_ff::{BigInteger, CyclotomicMultSubgroup, One, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

/// Domain tag under which the `Y` parameter is derived.
const Y_TAG: &[u8] = b"AQKD/v1/Y";
/// Domain tag prefix for the attribute bases `H_i` (1-based suffix).
const ATTR_BASE_TAG_PREFIX: &str = "AQKD/v1/H/";
/// Domain tag for the distinguished setup scope.
pub const SETUP_SCOPE_TAG: &[u8] = b"AQKD/v1/setup";

/// Rejection reasons for non-canonical or invalid encodings.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad length: expected {expected} bytes, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("point is not on the curve")]
    NotOnCurve,
    #[error("point is not in the prime-order subgroup")]
    NotInSubgroup,
    #[error("encoding is not canonical")]
    NonCanonical,
}

// ---------------------------------------------------------------------------
// Scalar
// ---------------------------------------------------------------------------

/// An element of the scalar field ℤₚ. Canonical encoding: 32 bytes big-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scalar(pub(crate) Fr);

impl Scalar {
    pub const BYTES: usize = 32;

    pub fn zero() -> Self {
        Scalar(Fr::zero())
    }

    pub fn one() -> Self {
        Scalar(Fr::one())
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(Fr::from(v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 + other.0)
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 - other.0)
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 * other.0)
    }

    pub fn neg(&self) -> Scalar {
        Scalar(-self.0)
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(&self) -> Option<Scalar> {
        self.0.inverse().map(Scalar)
    }

    /// Uniform element of ℤₚ.
    pub fn rand(rng: &mut (impl RngCore + CryptoRng)) -> Scalar {
        Scalar(Fr::rand(rng))
    }

    /// Uniform element of ℤₚ*.
    pub fn rand_nonzero(rng: &mut (impl RngCore + CryptoRng)) -> Scalar {
        loop {
            let s = Fr::rand(rng);
            if !s.is_zero() {
                return Scalar(s);
            }
        }
    }

    /// Uniform element of ℤₚ* \ {1}, for randomizers whose effect must be
    /// observable element-wise.
    pub fn rand_blinding(rng: &mut (impl RngCore + CryptoRng)) -> Scalar {
        loop {
            let s = Fr::rand(rng);
            if !s.is_zero() && !s.is_one() {
                return Scalar(s);
            }
        }
    }

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let be = self.0.into_bigint().to_bytes_be();
        debug_assert_eq!(be.len(), Self::BYTES);
        let mut out = [0u8; Self::BYTES];
        out.copy_from_slice(&be);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Scalar, DecodeError> {
        if bytes.len() != Self::BYTES {
            return Err(DecodeError::BadLength {
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        let mut limbs = [0u64; 4];
        for (i, chunk) in bytes.rchunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(chunk);
            limbs[i] = u64::from_be_bytes(buf);
        }
        Fr::from_bigint(ark_ff::BigInt::new(limbs))
            .map(Scalar)
            .ok_or(DecodeError::NonCanonical)
    }
}

// ---------------------------------------------------------------------------
// Source groups
// ---------------------------------------------------------------------------

/// A point in the prime-order subgroup 𝔾₁. Canonical encoding: 48 bytes compressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct G1Element(pub(crate) G1Projective);

/// A point in the prime-order subgroup 𝔾₂. Canonical encoding: 96 bytes compressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct G2Element(pub(crate) G2Projective);

/// An element of the target group 𝔾_T (multiplicative notation in the API).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtElement(pub(crate) PairingOutput<Bls12_381>);

impl G1Element {
    pub const BYTES: usize = 48;

    pub fn generator() -> Self {
        G1Element(G1Projective::generator())
    }

    pub fn identity() -> Self {
        G1Element(G1Projective::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    /// Exponentiation (counted).
    pub fn mul(&self, s: &Scalar) -> G1Element {
        counters::bump_g1(1);
        G1Element(self.0 * s.0)
    }

    /// Multi-scalar multiplication ∏ basesᵢ^scalarsᵢ, counted as one
    /// exponentiation per term.
    pub fn msm(bases: &[G1Element], scalars: &[Scalar]) -> G1Element {
        assert_eq!(bases.len(), scalars.len());
        counters::bump_g1(bases.len() as u64);
        let affine: Vec<G1Affine> = bases.iter().map(|b| b.0.into_affine()).collect();
        let exps: Vec<Fr> = scalars.iter().map(|s| s.0).collect();
        G1Element(G1Projective::msm(&affine, &exps).expect("equal lengths"))
    }

    pub fn add(&self, other: &G1Element) -> G1Element {
        G1Element(self.0 + other.0)
    }

    pub fn sub(&self, other: &G1Element) -> G1Element {
        G1Element(self.0 - other.0)
    }

    pub fn neg(&self) -> G1Element {
        G1Element(-self.0)
    }

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        self.0
            .into_affine()
            .serialize_compressed(&mut out[..])
            .expect("48-byte buffer");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<G1Element, DecodeError> {
        if bytes.len() != Self::BYTES {
            return Err(DecodeError::BadLength {
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        precheck_compressed(bytes, 1)?;
        let affine = G1Affine::deserialize_compressed_unchecked(bytes)
            .map_err(|_| DecodeError::NotOnCurve)?;
        if !affine.is_in_correct_subgroup_assuming_on_curve() {
            return Err(DecodeError::NotInSubgroup);
        }
        Ok(G1Element(affine.into()))
    }
}

impl G2Element {
    pub const BYTES: usize = 96;

    pub fn generator() -> Self {
        G2Element(G2Projective::generator())
    }

    pub fn identity() -> Self {
        G2Element(G2Projective::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    /// Exponentiation (counted).
    pub fn mul(&self, s: &Scalar) -> G2Element {
        counters::bump_g2(1);
        G2Element(self.0 * s.0)
    }

    pub fn add(&self, other: &G2Element) -> G2Element {
        G2Element(self.0 + other.0)
    }

    pub fn neg(&self) -> G2Element {
        G2Element(-self.0)
    }

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        self.0
            .into_affine()
            .serialize_compressed(&mut out[..])
            .expect("96-byte buffer");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<G2Element, DecodeError> {
        if bytes.len() != Self::BYTES {
            return Err(DecodeError::BadLength {
                expected: Self::BYTES,
                got: bytes.len(),
            });
        }
        precheck_compressed(bytes, 2)?;
        let affine = G2Affine::deserialize_compressed_unchecked(bytes)
            .map_err(|_| DecodeError::NotOnCurve)?;
        if !affine.is_in_correct_subgroup_assuming_on_curve() {
            return Err(DecodeError::NotInSubgroup);
        }
        Ok(G2Element(affine.into()))
    }
}

impl GtElement {
    /// Transcript encoding width (never a wire format).
    pub const BYTES: usize = 576;

    pub fn identity() -> Self {
        GtElement(PairingOutput::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    /// Group operation in 𝔾_T (multiplicative; uncounted).
    pub fn mul(&self, other: &GtElement) -> GtElement {
        GtElement(self.0 + other.0)
    }

    pub fn inverse(&self) -> GtElement {
        GtElement(-self.0)
    }

    /// Exponentiation (counted). Elements of 𝔾_T live in the cyclotomic
    /// subgroup, so the faster cyclotomic ladder applies.
    pub fn pow(&self, s: &Scalar) -> GtElement {
        counters::bump_gt(1);
        let e = s.0.into_bigint();
        GtElement(PairingOutput(self.0 .0.cyclotomic_exp(e)))
    }

    /// Canonical byte view for challenge transcripts only.
    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        self.0
            .serialize_compressed(&mut out[..])
            .expect("576-byte buffer");
        out
    }
}

/// Pairing evaluation e: 𝔾₁ × 𝔾₂ → 𝔾_T (counted).
pub fn pairing(a: &G1Element, b: &G2Element) -> GtElement {
    counters::bump_pairing(1);
    GtElement(Bls12_381::pairing(a.0, b.0))
}

/// Product of pairings ∏ e(aᵢ, bᵢ), counted as one pairing per input pair.
pub fn multi_pairing(pairs: &[(G1Element, G2Element)]) -> GtElement {
    counters::bump_pairing(pairs.len() as u64);
    let left: Vec<G1Projective> = pairs.iter().map(|(a, _)| a.0).collect();
    let right: Vec<G2Projective> = pairs.iter().map(|(_, b)| b.0).collect();
    GtElement(Bls12_381::multi_pairing(left, right))
}

/// Classifies failures of compressed decoding that the backend reports as a
/// single opaque error: out-of-range field coordinates and malformed flag
/// bits are non-canonical encodings, anything else is an x with no point on
/// the curve. `limbs` is the number of base-field coordinates (1 for G1, 2
/// for G2).
///
/// The layout is the standard 48/96-byte big-endian compressed form with
/// three flag bits in the leading byte: compression (must be set), infinity,
/// and y-sign.
fn precheck_compressed(bytes: &[u8], limbs: usize) -> Result<(), DecodeError> {
    let flags = bytes[0] >> 5;
    if flags & 0b100 == 0 {
        // compression bit missing
        return Err(DecodeError::NonCanonical);
    }
    if flags & 0b010 != 0 {
        // Point at infinity: sign bit clear, every other bit zero.
        if flags & 0b001 != 0 {
            return Err(DecodeError::NonCanonical);
        }
        if bytes[0] & 0x1f != 0 || bytes[1..].iter().any(|&b| b != 0) {
            return Err(DecodeError::NonCanonical);
        }
        return Ok(());
    }
    // Each 48-byte big-endian coordinate must be a canonical Fq element.
    let modulus = Fq::MODULUS.to_bytes_be();
    for limb in 0..limbs {
        let mut coord = [0u8; 48];
        coord.copy_from_slice(&bytes[limb * 48..(limb + 1) * 48]);
        if limb == 0 {
            coord[0] &= 0x1f;
        }
        if !lt_be(&coord, &modulus) {
            return Err(DecodeError::NonCanonical);
        }
    }
    Ok(())
}

/// Big-endian byte-string comparison a < b.
fn lt_be(a: &[u8], b: &[u8]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    for i in 0..a.len() {
        if a[i] != b[i] {
            return a[i] < b[i];
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Public parameters
// ---------------------------------------------------------------------------

/// System parameters: the fixed generators, the signature parameter `Y`, the
/// attribute bases `H_1..H_ℓ` and cached derived values.
///
/// All sampled-looking parameters are derived by hashing fixed labels to the
/// curve, so parameter generation is deterministic and verifiable.
#[derive(Debug, Clone)]
pub struct PublicParams {
    g: G1Element,
    g_hat: G2Element,
    y: G1Element,
    attr_bases: Vec<G1Element>,
    h_setup: G1Element,
    gt_y_ghat: GtElement,
}

impl PublicParams {
    /// Derives parameters supporting up to `attr_count` (ℓ ≥ 1) attributes.
    pub fn setup(attr_count: usize) -> PublicParams {
        assert!(attr_count >= 1, "at least one attribute base is required");
        let g = G1Element::generator();
        let g_hat = G2Element::generator();
        let y = hash_to_g1(Y_TAG, b"");
        let attr_bases = (1..=attr_count)
            .map(|i| hash_to_g1(format!("{ATTR_BASE_TAG_PREFIX}{i}").as_bytes(), b""))
            .collect();
        let h_setup = hash_to_g1(SETUP_SCOPE_TAG, b"");
        let gt_y_ghat = pairing(&y, &g_hat);
        PublicParams {
            g,
            g_hat,
            y,
            attr_bases,
            h_setup,
            gt_y_ghat,
        }
    }

    pub fn g(&self) -> &G1Element {
        &self.g
    }

    pub fn g_hat(&self) -> &G2Element {
        &self.g_hat
    }

    pub fn y(&self) -> &G1Element {
        &self.y
    }

    /// Maximum number of attributes ℓ.
    pub fn attr_count(&self) -> usize {
        self.attr_bases.len()
    }

    /// Attribute base H_i (0-based index).
    pub fn attr_base(&self, i: usize) -> &G1Element {
        &self.attr_bases[i]
    }

    /// Base of the distinguished setup scope, H(setup).
    pub fn setup_base(&self) -> &G1Element {
        &self.h_setup
    }

    /// Cached e(Y, Ĝ).
    pub fn gt_y_ghat(&self) -> &GtElement {
        &self.gt_y_ghat
    }
}
