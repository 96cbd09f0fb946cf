//! Binary parameter checkpoints.
//!
//! Header (40 bytes, little-endian): `"ORPTCKPT"`, version u32, cell code u8,
//! direction count u8, two zero bytes, F u32, M u32, C u32, payload length
//! u32, payload CRC-32 u32, header CRC-32 u32 (over the preceding 36 bytes).
//! The payload is the flat parameter buffer as little-endian f32.

use std::path::Path;

use orpt_core::nn::{CellKind, Direction, RecurrentParams, Shape};

use crate::error::{OrptError, Result};

pub const MAGIC: &[u8; 8] = b"ORPTCKPT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

fn encode_header(shape: &Shape, payload_len: u32, payload_crc: u32) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    h[8..12].copy_from_slice(&VERSION.to_le_bytes());
    h[12] = shape.kind.code();
    h[13] = shape.direction.count() as u8;
    let fields = [
        shape.input_dim as u32,
        shape.hidden_dim as u32,
        shape.classes as u32,
        payload_len,
        payload_crc,
    ];
    for (i, v) in fields.iter().enumerate() {
        h[16 + 4 * i..20 + 4 * i].copy_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&h[..36]);
    h[36..].copy_from_slice(&crc.to_le_bytes());
    h
}

pub fn to_bytes(params: &RecurrentParams<f32>) -> Vec<u8> {
    let payload: Vec<u8> = params.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    let header = encode_header(&params.shape(), params.len() as u32, crc32fast::hash(&payload));
    let mut out = header.to_vec();
    out.extend_from_slice(&payload);
    out
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<RecurrentParams<f32>> {
    if bytes.len() < HEADER_LEN {
        return Err(OrptError::format(path, bytes.len() as u64, "truncated checkpoint header"));
    }
    let h = &bytes[..HEADER_LEN];
    if &h[..8] != MAGIC {
        return Err(OrptError::format(path, 0, "bad checkpoint magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
    if crc32fast::hash(&h[..36]) != u32_at(36) {
        return Err(OrptError::format(path, 36, "header checksum mismatch"));
    }
    if u32_at(8) != VERSION {
        return Err(OrptError::format(path, 8, format!("unsupported version {}", u32_at(8))));
    }
    let kind = CellKind::from_code(h[12])
        .ok_or_else(|| OrptError::format(path, 12, format!("unknown cell code {}", h[12])))?;
    let direction = match h[13] {
        1 => Direction::Forward,
        2 => Direction::Bidirectional,
        n => return Err(OrptError::format(path, 13, format!("bad direction count {n}"))),
    };
    let shape = Shape {
        kind,
        direction,
        input_dim: u32_at(16) as usize,
        hidden_dim: u32_at(20) as usize,
        classes: u32_at(24) as usize,
    };
    let len = u32_at(28) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len * 4 {
        return Err(OrptError::format(
            path,
            HEADER_LEN as u64,
            format!("payload is {} bytes, header declares {}", payload.len(), len * 4),
        ));
    }
    if crc32fast::hash(payload) != u32_at(32) {
        return Err(OrptError::format(path, HEADER_LEN as u64, "payload checksum mismatch"));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let params = RecurrentParams::from_vec(shape, data)
        .map_err(|e| OrptError::format(path, 16, format!("shape/payload disagree: {e}")))?;
    if !params.is_finite() {
        return Err(OrptError::format(path, HEADER_LEN as u64, "non-finite parameter"));
    }
    Ok(params)
}

pub fn save(path: &Path, params: &RecurrentParams<f32>) -> Result<()> {
    std::fs::write(path, to_bytes(params)).map_err(|e| OrptError::io(path, e))
}

pub fn load(path: &Path) -> Result<RecurrentParams<f32>> {
    let bytes = std::fs::read(path).map_err(|e| OrptError::io(path, e))?;
    from_bytes(path, &bytes)
}

/// Loads a checkpoint and insists that it matches `expected`.
pub fn load_matching(path: &Path, expected: &Shape) -> Result<RecurrentParams<f32>> {
    let params = load(path)?;
    if params.shape() != *expected {
        let s = params.shape();
        return Err(OrptError::StateMismatch(format!(
            "checkpoint {} holds {} {} F={} M={} C={}, run expects {} {} F={} M={} C={}",
            path.display(),
            s.kind.name(),
            s.direction.name(),
            s.input_dim,
            s.hidden_dim,
            s.classes,
            expected.kind.name(),
            expected.direction.name(),
            expected.input_dim,
            expected.hidden_dim,
            expected.classes,
        )));
    }
    Ok(params)
}
