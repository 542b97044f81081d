//! On-disk formats for keys, credential stores, policies and transcripts.
//!
//! Key files carry a 5-byte magic+version header followed by the raw
//! canonical encodings. The credential store is a header with the attribute
//! count followed by records of `id-len u16 ‖ id ‖ pk 48 ‖ attrs ℓ×32 ‖
//! cred 192`. A transcript holds the session id and, per path, the exit
//! node's public key and the final message in wire format.

use crate::CliError;
use aqkd_core::group::{G1Element, G2Element, PublicParams, Scalar};
use aqkd_core::groth::{GrothSignature, IssuerKeyPair};
use aqkd_core::policy::{AttributeVector, Policy};
use aqkd_core::protocol::SessionId;
use aqkd_core::pseudonym::NodeKeyPair;
use std::fs;
use std::path::Path;

const ISSUER_KEY_MAGIC: &[u8; 4] = b"AQKI";
const NODE_KEY_MAGIC: &[u8; 4] = b"AQKN";
const PUBKEY_MAGIC: &[u8; 4] = b"AQKP";
const STORE_MAGIC: &[u8; 4] = b"AQKS";
const TRANSCRIPT_MAGIC: &[u8; 4] = b"AQKT";
const VERSION: u8 = 1;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn decode_err(path: &Path, what: &str) -> CliError {
    CliError::Decode(format!("{}: {what}", path.display()))
}

fn check_header<'a>(
    path: &Path,
    bytes: &'a [u8],
    magic: &[u8; 4],
    body_len: Option<usize>,
) -> Result<&'a [u8], CliError> {
    if bytes.len() < 5 || &bytes[..4] != magic {
        return Err(decode_err(path, "bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(decode_err(path, "unsupported version"));
    }
    let body = &bytes[5..];
    if let Some(expected) = body_len {
        if body.len() != expected {
            return Err(decode_err(path, "truncated or oversized file"));
        }
    }
    Ok(body)
}

pub fn write_issuer_key(path: &Path, issuer: &IssuerKeyPair) -> Result<(), CliError> {
    let mut out = Vec::with_capacity(5 + 32 + 96);
    out.extend_from_slice(ISSUER_KEY_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&issuer.secret().to_bytes());
    out.extend_from_slice(&issuer.public().to_bytes());
    fs::write(path, out).map_err(|e| io_err(path, e))?;
    write_public_key(&pub_path(path), 1, &issuer.public().to_bytes())
}

pub fn read_issuer_key(path: &Path, params: &PublicParams) -> Result<IssuerKeyPair, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let body = check_header(path, &bytes, ISSUER_KEY_MAGIC, Some(32 + 96))?;
    let sk = Scalar::from_bytes(&body[..32]).map_err(|e| decode_err(path, &e.to_string()))?;
    let issuer = IssuerKeyPair::from_secret(params, sk);
    if issuer.public().to_bytes() != body[32..] {
        return Err(decode_err(path, "public key does not match secret key"));
    }
    Ok(issuer)
}

pub fn write_node_key(path: &Path, node: &NodeKeyPair) -> Result<(), CliError> {
    let mut out = Vec::with_capacity(5 + 32 + 48);
    out.extend_from_slice(NODE_KEY_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&node.secret().to_bytes());
    out.extend_from_slice(&node.public().to_bytes());
    fs::write(path, out).map_err(|e| io_err(path, e))?;
    write_public_key(&pub_path(path), 2, &node.public().to_bytes())
}

/// Secret scalar and *claimed* public key; callers decide whether to trust
/// or re-derive the latter.
pub fn read_node_key(path: &Path) -> Result<(Scalar, G1Element), CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let body = check_header(path, &bytes, NODE_KEY_MAGIC, Some(32 + 48))?;
    let sk = Scalar::from_bytes(&body[..32]).map_err(|e| decode_err(path, &e.to_string()))?;
    let pk = G1Element::from_bytes(&body[32..]).map_err(|e| decode_err(path, &e.to_string()))?;
    Ok((sk, pk))
}

fn pub_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".pub");
    name.into()
}

fn write_public_key(path: &Path, kind: u8, pk: &[u8]) -> Result<(), CliError> {
    let mut out = Vec::with_capacity(6 + pk.len());
    out.extend_from_slice(PUBKEY_MAGIC);
    out.push(VERSION);
    out.push(kind);
    out.extend_from_slice(pk);
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes `<base>.issuer.pub` next to a transcript.
pub fn write_issuer_public_for(base: &Path, pk: &G2Element) -> Result<(), CliError> {
    let mut name = base.as_os_str().to_owned();
    name.push(".issuer.pub");
    write_public_key(&std::path::PathBuf::from(name), 1, &pk.to_bytes())
}

/// Issuer public key, accepted from either a `.pub` file or a full key file.
pub fn read_issuer_public(path: &Path) -> Result<G2Element, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() >= 4 && &bytes[..4] == PUBKEY_MAGIC {
        if bytes.len() != 6 + 96 || bytes[5] != 1 {
            return Err(decode_err(path, "not an issuer public key"));
        }
        return G2Element::from_bytes(&bytes[6..]).map_err(|e| decode_err(path, &e.to_string()));
    }
    let body = check_header(path, &bytes, ISSUER_KEY_MAGIC, Some(32 + 96))?;
    G2Element::from_bytes(&body[32..]).map_err(|e| decode_err(path, &e.to_string()))
}

/// One credential-store record.
pub struct StoreRecord {
    pub node_id: String,
    pub pk: G1Element,
    pub attrs: AttributeVector,
    pub cred: GrothSignature,
}

/// Appends a record, creating the store (with its ℓ header) when absent.
pub fn append_store_record(
    path: &Path,
    attr_count: usize,
    record: &StoreRecord,
) -> Result<(), CliError> {
    let mut bytes = match fs::read(path) {
        Ok(existing) => {
            let body = check_header(path, &existing, STORE_MAGIC, None)?;
            if body.len() < 2
                || u16::from_be_bytes([body[0], body[1]]) as usize != attr_count
            {
                return Err(decode_err(path, "store attribute count mismatch"));
            }
            existing
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let mut fresh = Vec::new();
            fresh.extend_from_slice(STORE_MAGIC);
            fresh.push(VERSION);
            fresh.extend_from_slice(&(attr_count as u16).to_be_bytes());
            fresh
        }
        Err(e) => return Err(io_err(path, e)),
    };
    let id = record.node_id.as_bytes();
    bytes.extend_from_slice(&(id.len() as u16).to_be_bytes());
    bytes.extend_from_slice(id);
    bytes.extend_from_slice(&record.pk.to_bytes());
    for v in record.attrs.values() {
        bytes.extend_from_slice(&v.to_bytes());
    }
    bytes.extend_from_slice(&record.cred.to_bytes());
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn read_store(path: &Path) -> Result<(usize, Vec<StoreRecord>), CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let body = check_header(path, &bytes, STORE_MAGIC, None)?;
    if body.len() < 2 {
        return Err(decode_err(path, "missing attribute count"));
    }
    let attr_count = u16::from_be_bytes([body[0], body[1]]) as usize;
    let mut rest = &body[2..];
    let mut records = Vec::new();
    while !rest.is_empty() {
        let record_len = |need: usize, rest: &[u8]| -> Result<(), CliError> {
            if rest.len() < need {
                Err(decode_err(path, "truncated record"))
            } else {
                Ok(())
            }
        };
        record_len(2, rest)?;
        let id_len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
        let total = 2 + id_len + 48 + 32 * attr_count + GrothSignature::BYTES;
        record_len(total, rest)?;
        let node_id = String::from_utf8(rest[2..2 + id_len].to_vec())
            .map_err(|_| decode_err(path, "node id is not UTF-8"))?;
        let mut at = 2 + id_len;
        let pk = G1Element::from_bytes(&rest[at..at + 48])
            .map_err(|e| decode_err(path, &e.to_string()))?;
        at += 48;
        let mut values = Vec::with_capacity(attr_count);
        for _ in 0..attr_count {
            values.push(
                Scalar::from_bytes(&rest[at..at + 32])
                    .map_err(|e| decode_err(path, &e.to_string()))?,
            );
            at += 32;
        }
        let cred = GrothSignature::from_bytes(&rest[at..at + GrothSignature::BYTES])
            .map_err(|e| decode_err(path, &e.to_string()))?;
        records.push(StoreRecord {
            node_id,
            pk,
            attrs: AttributeVector::from_scalars(values),
            cred,
        });
        rest = &rest[total..];
    }
    Ok((attr_count, records))
}

pub fn write_policy(path: &Path, policy: &Policy) -> Result<(), CliError> {
    fs::write(path, policy.encode()).map_err(|e| io_err(path, e))
}

pub fn read_policy(path: &Path) -> Result<Policy, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Policy::decode(&bytes).map_err(|e| decode_err(path, &e.to_string()))
}

/// A stored session transcript: per path the exit public key and final
/// message wire bytes.
pub struct TranscriptFile {
    pub sid: SessionId,
    pub paths: Vec<(G1Element, Vec<u8>)>,
}

pub fn write_transcript(path: &Path, t: &TranscriptFile) -> Result<(), CliError> {
    let mut out = Vec::new();
    out.extend_from_slice(TRANSCRIPT_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&t.sid.to_bytes());
    out.extend_from_slice(&(t.paths.len() as u16).to_be_bytes());
    for (exit_pk, wire) in &t.paths {
        out.extend_from_slice(&exit_pk.to_bytes());
        out.extend_from_slice(&(wire.len() as u32).to_be_bytes());
        out.extend_from_slice(wire);
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_transcript(path: &Path) -> Result<TranscriptFile, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let body = check_header(path, &bytes, TRANSCRIPT_MAGIC, None)?;
    if body.len() < SessionId::BYTES + 2 {
        return Err(decode_err(path, "truncated header"));
    }
    let mut sid_bytes = [0u8; SessionId::BYTES];
    sid_bytes.copy_from_slice(&body[..SessionId::BYTES]);
    let sid = SessionId::from_bytes(&sid_bytes);
    let count = u16::from_be_bytes([body[24], body[25]]) as usize;
    let mut rest = &body[26..];
    let mut paths = Vec::with_capacity(count);
    for _ in 0..count {
        if rest.len() < 52 {
            return Err(decode_err(path, "truncated path entry"));
        }
        let exit_pk = G1Element::from_bytes(&rest[..48])
            .map_err(|e| decode_err(path, &e.to_string()))?;
        let len = u32::from_be_bytes([rest[48], rest[49], rest[50], rest[51]]) as usize;
        if rest.len() < 52 + len {
            return Err(decode_err(path, "truncated message"));
        }
        paths.push((exit_pk, rest[52..52 + len].to_vec()));
        rest = &rest[52 + len..];
    }
    if !rest.is_empty() {
        return Err(decode_err(path, "trailing bytes"));
    }
    Ok(TranscriptFile { sid, paths })
}
