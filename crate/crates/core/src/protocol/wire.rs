//! Canonical wire format for the growing audit payload.
//!
//! Layout (big-endian throughout):
//!
//! ```text
//! magic "AQKD" ‖ version u8=1
//! sid: nonce 16 B ‖ timestamp u64
//! policy encoding (self-delimiting, see `policy`)
//! hop-count u16
//! per hop:
//!   nym 48 ‖ R̂″ 96 ‖ S″ 48 ‖ T″ 48 ‖ c 32 ‖ z_sk 32 ‖ z_α 32 ‖ z_β 32
//!   ‖ (ℓ−d)×32 hidden responses
//! link-present u8 ‖ [ c 32 ‖ z 32 ]
//! ```
//!
//! Deserialization applies every group-level decode check and reports the
//! byte offset of the offending field. The payload-byte metric counts only
//! the per-hop group elements, the ℤₚ responses and the final link proof —
//! the audit data itself, excluding framing.

use crate::group::{DecodeError, G1Element, G2Element, Scalar};
use crate::policy::Policy;
use crate::pseudonym::Pseudonym;
use crate::sok::{BlindedCredential, CredentialProof, LinkProof};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"AQKD";
pub const VERSION: u8 = 1;

/// A decode failure located in the input buffer.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("decode error at byte {offset}: {kind}")]
pub struct WireError {
    pub offset: usize,
    pub kind: DecodeError,
}

/// Unique per-transmission session id; doubles as the pseudonym scope and
/// the replay/freshness anchor at entry nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionId {
    pub nonce: [u8; 16],
    pub timestamp: u64,
}

impl SessionId {
    pub const BYTES: usize = 24;

    pub fn to_bytes(&self) -> [u8; Self::BYTES] {
        let mut out = [0u8; Self::BYTES];
        out[..16].copy_from_slice(&self.nonce);
        out[16..].copy_from_slice(&self.timestamp.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; Self::BYTES]) -> SessionId {
        let mut nonce = [0u8; 16];
        nonce.copy_from_slice(&bytes[..16]);
        let mut ts = [0u8; 8];
        ts.copy_from_slice(&bytes[16..]);
        SessionId {
            nonce,
            timestamp: u64::from_be_bytes(ts),
        }
    }
}

/// One path step's contribution: the credential presentation and the
/// session pseudonym.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub proof: CredentialProof,
    pub nym: Pseudonym,
}

/// The audit payload in flight: grows by one hop per forwarding step; the
/// link proof always refers to the last hop and is absent only on the
/// sender's initial message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMessage {
    pub sid: SessionId,
    pub policy: Policy,
    pub hops: Vec<Hop>,
    pub link: Option<LinkProof>,
}

impl HopMessage {
    /// Serialized size of one hop entry under `policy`.
    pub fn hop_wire_size(policy: &Policy) -> usize {
        Pseudonym::BYTES + CredentialProof::wire_size(policy.hidden_count())
    }
}

/// Appends one hop in wire layout; shared by the serializer and the proof
/// context construction so both views are byte-identical.
pub fn write_hop(out: &mut Vec<u8>, hop: &Hop) {
    out.extend_from_slice(&hop.nym.to_bytes());
    out.extend_from_slice(&hop.proof.blinded.r_hat.to_bytes());
    out.extend_from_slice(&hop.proof.blinded.s.to_bytes());
    out.extend_from_slice(&hop.proof.blinded.t.to_bytes());
    out.extend_from_slice(&hop.proof.c.to_bytes());
    out.extend_from_slice(&hop.proof.z_sk.to_bytes());
    out.extend_from_slice(&hop.proof.z_alpha.to_bytes());
    out.extend_from_slice(&hop.proof.z_beta.to_bytes());
    for z in &hop.proof.z_hidden {
        out.extend_from_slice(&z.to_bytes());
    }
}

pub fn serialize_hop_message(msg: &HopMessage) -> Vec<u8> {
    assert!(msg.hops.len() <= u16::MAX as usize);
    let mut out = Vec::with_capacity(
        5 + SessionId::BYTES + 2 + msg.hops.len() * HopMessage::hop_wire_size(&msg.policy) + 65,
    );
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&msg.sid.to_bytes());
    out.extend_from_slice(&msg.policy.encode());
    out.extend_from_slice(&(msg.hops.len() as u16).to_be_bytes());
    for hop in &msg.hops {
        debug_assert_eq!(hop.proof.z_hidden.len(), msg.policy.hidden_count());
        write_hop(&mut out, hop);
    }
    match &msg.link {
        None => out.push(0),
        Some(link) => {
            out.push(1);
            out.extend_from_slice(&link.to_bytes());
        }
    }
    out
}

pub fn deserialize_hop_message(bytes: &[u8]) -> Result<HopMessage, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };

    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.invalid_at(0));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(r.invalid_at(4));
    }
    let mut sid_bytes = [0u8; SessionId::BYTES];
    sid_bytes.copy_from_slice(r.take(SessionId::BYTES)?);
    let sid = SessionId::from_bytes(&sid_bytes);

    let policy_start = r.pos;
    let (policy, rest) = Policy::decode_prefix(&r.buf[r.pos..]).map_err(|kind| WireError {
        offset: policy_start,
        kind,
    })?;
    r.pos = bytes.len() - rest.len();

    let hop_count = {
        let b = r.take(2)?;
        u16::from_be_bytes([b[0], b[1]]) as usize
    };
    let hidden = policy.hidden_count();
    let mut hops = Vec::with_capacity(hop_count);
    for _ in 0..hop_count {
        let nym = Pseudonym(r.take_g1()?);
        let r_hat = r.take_g2()?;
        let s = r.take_g1()?;
        let t = r.take_g1()?;
        let c = r.take_scalar()?;
        let z_sk = r.take_scalar()?;
        let z_alpha = r.take_scalar()?;
        let z_beta = r.take_scalar()?;
        let mut z_hidden = Vec::with_capacity(hidden);
        for _ in 0..hidden {
            z_hidden.push(r.take_scalar()?);
        }
        hops.push(Hop {
            proof: CredentialProof {
                blinded: BlindedCredential { r_hat, s, t },
                c,
                z_alpha,
                z_beta,
                z_sk,
                z_hidden,
            },
            nym,
        });
    }

    let link_flag_at = r.pos;
    let link = match r.take(1)?[0] {
        0 => None,
        1 => Some(LinkProof {
            c: r.take_scalar()?,
            z: r.take_scalar()?,
        }),
        _ => return Err(r.invalid_at(link_flag_at)),
    };
    r.finish()?;
    Ok(HopMessage {
        sid,
        policy,
        hops,
        link,
    })
}

/// Audit-data bytes of one message: 3·48 + 96 group bytes and (4+(ℓ−d))·32
/// response bytes per hop, plus 2·32 for the final link proof when present.
pub fn payload_bytes(msg: &HopMessage) -> usize {
    let hidden = msg.policy.hidden_count();
    let per_hop = 3 * G1Element::BYTES + G2Element::BYTES + (4 + hidden) * Scalar::BYTES;
    msg.hops.len() * per_hop + if msg.link.is_some() { 2 * Scalar::BYTES } else { 0 }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.buf.len() {
            return Err(WireError {
                offset: self.pos,
                kind: DecodeError::BadLength {
                    expected: self.pos + n,
                    got: self.buf.len(),
                },
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_g1(&mut self) -> Result<G1Element, WireError> {
        let at = self.pos;
        G1Element::from_bytes(self.take(G1Element::BYTES)?)
            .map_err(|kind| WireError { offset: at, kind })
    }

    fn take_g2(&mut self) -> Result<G2Element, WireError> {
        let at = self.pos;
        G2Element::from_bytes(self.take(G2Element::BYTES)?)
            .map_err(|kind| WireError { offset: at, kind })
    }

    fn take_scalar(&mut self) -> Result<Scalar, WireError> {
        let at = self.pos;
        Scalar::from_bytes(self.take(Scalar::BYTES)?)
            .map_err(|kind| WireError { offset: at, kind })
    }

    fn invalid_at(&self, offset: usize) -> WireError {
        WireError {
            offset,
            kind: DecodeError::NonCanonical,
        }
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError {
                offset: self.pos,
                kind: DecodeError::BadLength {
                    expected: self.pos,
                    got: self.buf.len(),
                },
            });
        }
        Ok(())
    }
}
