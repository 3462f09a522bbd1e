//! Checkpoint file: `"MMF1"`, u32 header length, `ArchSpec` JSON, u64
//! parameter count, little-endian f64 parameters in tensor order, CRC32 of
//! everything before it.

use std::path::Path;

use super::model::FusionModel;
use super::{ArchSpec, NetError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MMF1";

pub fn encode_checkpoint(model: &FusionModel) -> Vec<u8> {
    let header = serde_json::to_vec(model.arch()).expect("arch serializes");
    let mut buf = Vec::with_capacity(4 + 4 + header.len() + 8 + 8 * model.param_count() + 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], NetError> {
    let end = pos.checked_add(n).filter(|e| *e <= buf.len()).ok_or(NetError::Truncated)?;
    let out = &buf[*pos..end];
    *pos = end;
    Ok(out)
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<FusionModel, NetError> {
    if buf.len() < 4 {
        return Err(NetError::Truncated);
    }
    if &buf[..4] != CHECKPOINT_MAGIC {
        return Err(NetError::BadMagic);
    }
    if buf.len() < 8 {
        return Err(NetError::Truncated);
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(NetError::Crc { stored, computed });
    }
    let mut pos = 4;
    let hlen = u32::from_le_bytes(take(body, &mut pos, 4)?.try_into().expect("4 bytes")) as usize;
    let arch: ArchSpec = serde_json::from_slice(take(body, &mut pos, hlen)?)?;
    let count = u64::from_le_bytes(take(body, &mut pos, 8)?.try_into().expect("8 bytes")) as usize;
    let raw = take(body, &mut pos, count.checked_mul(8).ok_or(NetError::Truncated)?)?;
    if pos != body.len() {
        return Err(NetError::Shape { what: "checkpoint payload", expected: pos, found: body.len() });
    }
    let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    FusionModel::from_params(arch, params)
}

pub fn save_checkpoint(model: &FusionModel, path: &Path) -> Result<(), NetError> {
    std::fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<FusionModel, NetError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = FusionModel::init_params(ArchSpec::tiny(), 7).unwrap();
        let bytes = encode_checkpoint(&m);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), m);
    }

    #[test]
    fn corruption_is_detected() {
        let m = FusionModel::init_params(ArchSpec::tiny(), 7).unwrap();
        let mut bytes = encode_checkpoint(&m);
        assert!(matches!(decode_checkpoint(&bytes[..3]), Err(NetError::Truncated)));
        assert!(matches!(decode_checkpoint(b"MMR1xxxxxxxx"), Err(NetError::BadMagic)));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(decode_checkpoint(&bytes), Err(NetError::Crc { .. })));
    }
}
