//! Attribute vectors, the Pedersen-hash message binding a node key to its
//! attributes, and disclosure-based policies.
//!
//! A policy names the disclosed attribute indices and pins a required value
//! for each; the remaining attributes stay hidden inside the credential
//! proof. Attribute strings map to scalars by hashing, so equality policies
//! over labels ("certification level", vendor, country) are scalar equality
//! checks.

use crate::group::{hash_to_scalar, DecodeError, G1Element, PublicParams, Scalar};
use std::collections::BTreeMap;

/// Domain tag for mapping attribute strings to scalars.
pub const ATTR_VALUE_TAG: &[u8] = b"AQKD/v1/attr";

/// A node's attribute values; length must equal the parameter ℓ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeVector {
    values: Vec<Scalar>,
    labels: Option<Vec<String>>,
}

impl AttributeVector {
    pub fn from_scalars(values: Vec<Scalar>) -> AttributeVector {
        AttributeVector {
            values,
            labels: None,
        }
    }

    /// Maps attribute strings to scalars via the domain-separated hash.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> AttributeVector {
        let values = labels
            .iter()
            .map(|l| attr_value(l.as_ref()))
            .collect();
        AttributeVector {
            values,
            labels: Some(labels.iter().map(|l| l.as_ref().to_owned()).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn get(&self, i: usize) -> &Scalar {
        &self.values[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Replaces one value (fault-injection helper; drops the source label).
    pub fn with_value(&self, i: usize, v: Scalar) -> AttributeVector {
        let mut values = self.values.clone();
        values[i] = v;
        AttributeVector {
            values,
            labels: None,
        }
    }
}

/// Scalar encoding of one attribute string.
pub fn attr_value(label: &str) -> Scalar {
    hash_to_scalar(ATTR_VALUE_TAG, label.as_bytes())
}

/// An equality policy over disclosed attributes: each entry (index → value)
/// must be matched exactly; all other attributes remain hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub policy_id: Vec<u8>,
    pub attr_count: u16,
    disclosed: BTreeMap<u16, Scalar>,
}

impl Policy {
    pub fn new(
        policy_id: impl Into<Vec<u8>>,
        attr_count: u16,
        disclosed: BTreeMap<u16, Scalar>,
    ) -> Policy {
        assert!(attr_count >= 1);
        assert!(disclosed.len() <= attr_count as usize);
        assert!(disclosed.keys().all(|&i| i < attr_count));
        Policy {
            policy_id: policy_id.into(),
            attr_count,
            disclosed,
        }
    }

    /// The empty policy: nothing disclosed, everything accepted.
    pub fn open(policy_id: impl Into<Vec<u8>>, attr_count: u16) -> Policy {
        Policy::new(policy_id, attr_count, BTreeMap::new())
    }

    /// Number of disclosed attributes d.
    pub fn disclosed_count(&self) -> usize {
        self.disclosed.len()
    }

    /// Number of hidden attributes ℓ − d.
    pub fn hidden_count(&self) -> usize {
        self.attr_count as usize - self.disclosed.len()
    }

    pub fn disclosed(&self) -> impl Iterator<Item = (usize, &Scalar)> {
        self.disclosed.iter().map(|(&i, v)| (i as usize, v))
    }

    /// Hidden indices in ascending order.
    pub fn hidden_indices(&self) -> Vec<usize> {
        (0..self.attr_count as usize)
            .filter(|i| !self.disclosed.contains_key(&(*i as u16)))
            .collect()
    }

    /// 1 iff the attributes match every constrained index.
    pub fn evaluate(&self, attrs: &AttributeVector) -> bool {
        attrs.len() == self.attr_count as usize
            && self
                .disclosed
                .iter()
                .all(|(&i, v)| attrs.get(i as usize) == v)
    }

    /// Canonical encoding:
    /// id-len u16 ‖ id ‖ ℓ u16 ‖ d u16 ‖ d × (index u16 ‖ value 32 B),
    /// all big-endian, indices ascending.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.policy_id.len() + 34 * self.disclosed.len());
        out.extend_from_slice(&(self.policy_id.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.policy_id);
        out.extend_from_slice(&self.attr_count.to_be_bytes());
        out.extend_from_slice(&(self.disclosed.len() as u16).to_be_bytes());
        for (&i, v) in &self.disclosed {
            out.extend_from_slice(&i.to_be_bytes());
            out.extend_from_slice(&v.to_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Policy, DecodeError> {
        let (policy, rest) = Policy::decode_prefix(bytes)?;
        if !rest.is_empty() {
            return Err(DecodeError::BadLength {
                expected: bytes.len() - rest.len(),
                got: bytes.len(),
            });
        }
        Ok(policy)
    }

    /// Decodes a policy from the front of `bytes`, returning the remainder.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Policy, &[u8]), DecodeError> {
        let too_short = |need: usize, have: usize| DecodeError::BadLength {
            expected: need,
            got: have,
        };
        if bytes.len() < 2 {
            return Err(too_short(2, bytes.len()));
        }
        let id_len = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        let header = 2 + id_len + 4;
        if bytes.len() < header {
            return Err(too_short(header, bytes.len()));
        }
        let policy_id = bytes[2..2 + id_len].to_vec();
        let attr_count = u16::from_be_bytes([bytes[2 + id_len], bytes[3 + id_len]]);
        let d = u16::from_be_bytes([bytes[4 + id_len], bytes[5 + id_len]]);
        if attr_count == 0 || d > attr_count {
            return Err(DecodeError::NonCanonical);
        }
        let body = header + d as usize * 34;
        if bytes.len() < body {
            return Err(too_short(body, bytes.len()));
        }
        let mut disclosed = BTreeMap::new();
        let mut prev: Option<u16> = None;
        for k in 0..d as usize {
            let at = header + k * 34;
            let index = u16::from_be_bytes([bytes[at], bytes[at + 1]]);
            if index >= attr_count || prev.is_some_and(|p| index <= p) {
                return Err(DecodeError::NonCanonical);
            }
            prev = Some(index);
            let value = Scalar::from_bytes(&bytes[at + 2..at + 34])?;
            disclosed.insert(index, value);
        }
        Ok((
            Policy {
                policy_id,
                attr_count,
                disclosed,
            },
            &bytes[body..],
        ))
    }
}

/// msg = pk_N · ∏ H_i^{a_i}, the single 𝔾₁ element the issuer signs.
pub fn pedersen_message(
    params: &PublicParams,
    pk: &G1Element,
    attrs: &AttributeVector,
) -> G1Element {
    assert_eq!(attrs.len(), params.attr_count(), "attribute count mismatch");
    let bases: Vec<G1Element> = (0..attrs.len()).map(|i| *params.attr_base(i)).collect();
    pk.add(&G1Element::msm(&bases, attrs.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn params() -> PublicParams {
        PublicParams::setup(4)
    }

    #[test]
    fn pedersen_message_with_zero_attrs_is_pk() {
        let params = params();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let pk = G1Element::generator().mul(&Scalar::rand_nonzero(&mut rng));
        let attrs = AttributeVector::from_scalars(vec![Scalar::zero(); 4]);
        assert_eq!(pedersen_message(&params, &pk, &attrs), pk);
    }

    #[test]
    fn pedersen_message_depends_on_each_attribute() {
        let params = params();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let pk = G1Element::generator().mul(&Scalar::rand_nonzero(&mut rng));
        let attrs = AttributeVector::from_scalars(
            (0..4).map(|_| Scalar::rand(&mut rng)).collect(),
        );
        let base = pedersen_message(&params, &pk, &attrs);
        for i in 0..4 {
            let tweaked = attrs.with_value(i, attrs.get(i).add(&Scalar::one()));
            assert_ne!(pedersen_message(&params, &pk, &tweaked), base);
        }
    }

    #[test]
    fn pedersen_message_shift_identity() {
        // msg(pk·H_j, a with a_j − 1) == msg(pk, a)
        let params = params();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let pk = G1Element::generator().mul(&Scalar::rand_nonzero(&mut rng));
        let attrs = AttributeVector::from_scalars(
            (0..4).map(|_| Scalar::rand(&mut rng)).collect(),
        );
        let j = 2;
        let shifted_pk = pk.add(params.attr_base(j));
        let shifted_attrs = attrs.with_value(j, attrs.get(j).sub(&Scalar::one()));
        assert_eq!(
            pedersen_message(&params, &shifted_pk, &shifted_attrs),
            pedersen_message(&params, &pk, &attrs)
        );
    }

    #[test]
    fn evaluate_checks_constrained_indices() {
        let v = attr_value("gold");
        let policy = Policy::new("p", 4, BTreeMap::from([(3u16, v)]));
        let mut attrs = vec![Scalar::zero(); 4];
        attrs[3] = v;
        assert!(policy.evaluate(&AttributeVector::from_scalars(attrs.clone())));
        attrs[3] = v.add(&Scalar::one());
        assert!(!policy.evaluate(&AttributeVector::from_scalars(attrs)));
        // empty policy accepts anything of the right length
        let open = Policy::open("p", 4);
        assert!(open.evaluate(&AttributeVector::from_scalars(vec![Scalar::one(); 4])));
        // wrong length rejected
        assert!(!open.evaluate(&AttributeVector::from_scalars(vec![Scalar::one(); 3])));
    }

    #[test]
    fn encoding_is_canonical_and_roundtrips() {
        let v1 = attr_value("a");
        let v2 = attr_value("b");
        // same content, different construction order
        let p1 = Policy::new("pol", 5, BTreeMap::from([(1u16, v1), (4u16, v2)]));
        let p2 = Policy::new("pol", 5, BTreeMap::from([(4u16, v2), (1u16, v1)]));
        assert_eq!(p1.encode(), p2.encode());
        // different disclosure sets differ
        let q1 = Policy::new("pol", 5, BTreeMap::from([(1u16, v1)]));
        let q2 = Policy::new("pol", 5, BTreeMap::from([(2u16, v1)]));
        assert_ne!(q1.encode(), q2.encode());
        let decoded = Policy::decode(&p1.encode()).unwrap();
        assert_eq!(decoded, p1);
    }

    #[test]
    fn decode_rejects_malformed() {
        let v = attr_value("x");
        let p = Policy::new("id", 3, BTreeMap::from([(0u16, v), (2u16, v)]));
        let enc = p.encode();
        // truncation
        assert!(Policy::decode(&enc[..enc.len() - 1]).is_err());
        // trailing garbage
        let mut long = enc.clone();
        long.push(0);
        assert!(Policy::decode(&long).is_err());
        // unsorted indices
        let mut swapped = enc.clone();
        let header = 2 + 2 + 4;
        let (a, b) = (header, header + 34);
        for k in 0..34 {
            swapped.swap(a + k, b + k);
        }
        assert_eq!(Policy::decode(&swapped), Err(DecodeError::NonCanonical));
        // index out of range
        let mut oob = enc;
        oob[header] = 0;
        oob[header + 1] = 7;
        assert_eq!(Policy::decode(&oob), Err(DecodeError::NonCanonical));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn policy_roundtrip(id in proptest::collection::vec(any::<u8>(), 0..16),
                            l in 1u16..12,
                            picks in proptest::collection::btree_set(0u16..12, 0..8),
                            seeds in proptest::collection::vec(any::<u64>(), 12)) {
            let disclosed: BTreeMap<u16, Scalar> = picks
                .into_iter()
                .filter(|&i| i < l)
                .map(|i| (i, Scalar::from_u64(seeds[i as usize])))
                .collect();
            let p = Policy::new(id, l, disclosed);
            prop_assert_eq!(Policy::decode(&p.encode()).unwrap(), p);
        }
    }
}
