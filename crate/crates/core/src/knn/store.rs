//! Binary store for a [`KnnIndex`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "TYPF"
//! version   u16      1
//! dim       u32
//! count     u64
//! model_len u32      followed by model_len bytes of UTF-8 model id
//! records   count x { id u64, dim x f32 }
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::knn::index::KnnIndex;

pub const MAGIC: &[u8; 4] = b"TYPF";
pub const VERSION: u16 = 1;

pub fn encode_index(index: &KnnIndex) -> Vec<u8> {
    let model = index.model_id().as_bytes();
    let record = 8 + 4 * index.dim();
    let mut out = Vec::with_capacity(22 + model.len() + record * index.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    out.extend_from_slice(&(model.len() as u32).to_le_bytes());
    out.extend_from_slice(model);
    for (id, v) in index.iter() {
        out.extend_from_slice(&id.to_le_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                reason: format!("truncated {what}: need {n} bytes, {remaining} left"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_index(bytes: &[u8]) -> Result<KnnIndex> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    r.pos = 4;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let dim_at = r.pos as u64;
    let dim = r.u32("dim")? as usize;
    if dim == 0 {
        return Err(Error::Format {
            offset: dim_at,
            reason: "dim is zero".into(),
        });
    }
    let count_at = r.pos as u64;
    let count = r.u64("count")?;
    if count == 0 {
        return Err(Error::Format {
            offset: count_at,
            reason: "count is zero".into(),
        });
    }
    let model_len = r.u32("model id length")? as usize;
    let model_at = r.pos as u64;
    let model_id = std::str::from_utf8(r.take(model_len, "model id")?)
        .map_err(|e| Error::Format {
            offset: model_at + e.valid_up_to() as u64,
            reason: "model id is not UTF-8".into(),
        })?
        .to_string();

    let record = 8 + 4 * dim;
    let records_at = r.pos;
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(record))
        .ok_or_else(|| Error::Format {
            offset: count_at,
            reason: format!("count {count} overflows"),
        })?;
    let available = bytes.len() - records_at;
    if available < expected {
        let whole = available / record;
        return Err(Error::Format {
            offset: (records_at + whole * record) as u64,
            reason: format!(
                "truncated record {whole} of {count}: file ends {} bytes short",
                expected - available
            ),
        });
    }
    if available > expected {
        return Err(Error::Format {
            offset: (records_at + expected) as u64,
            reason: format!("{} trailing bytes after last record", available - expected),
        });
    }

    let count = count as usize;
    let mut ids = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    for _ in 0..count {
        ids.push(r.u64("record id")?);
        let raw = r.take(4 * dim, "record vector")?;
        vectors.extend(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
        );
    }
    KnnIndex::from_parts(ids, vectors, dim, model_id).map_err(|e| match e {
        Error::Build { id, reason } => Error::Format {
            offset: records_at as u64,
            reason: format!("record {id}: {reason}"),
        },
        other => other,
    })
}

/// Writes atomically: a temporary sibling file is renamed over `path`.
pub fn save_index(index: &KnnIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_index(index))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<KnnIndex> {
    decode_index(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{Embedding, Modality};
    use proptest::prelude::*;

    fn fixture() -> KnnIndex {
        let e = |v: &[f32]| Embedding::new(v.to_vec(), Modality::Image, "ref-image-v1");
        KnnIndex::build(vec![
            (1, e(&[1.0, 0.0, 0.0])),
            (2, e(&[0.0, 1.0, 0.0])),
            (3, e(&[0.0, 0.0, 1.0])),
        ])
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_index(&fixture());
        assert_eq!(&bytes[..4], b"TYPF");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[10..18].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 12);
        assert_eq!(&bytes[22..34], b"ref-image-v1");
        assert_eq!(bytes.len(), 34 + 3 * (8 + 12));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.typf");
        let idx = fixture();
        save_index(&idx, &path).unwrap();
        let back = load_index(&path).unwrap();
        assert_eq!(back, idx);
        assert_eq!(encode_index(&back), fs::read(&path).unwrap());
    }

    #[test]
    fn empty_file_is_bad_magic() {
        let err = decode_index(&[]).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
        assert!(decode_index(b"NOPE\x01\x00").unwrap_err().to_string().contains("bad magic"));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_index(&fixture());
        // Cut in the middle of the second record.
        let cut = 34 + 20 + 10;
        match decode_index(&bytes[..cut]) {
            Err(Error::Format { offset, reason }) => {
                assert_eq!(offset, 34 + 20);
                assert!(reason.contains("truncated"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        for cut in 0..bytes.len() {
            assert!(decode_index(&bytes[..cut]).is_err(), "prefix {cut} accepted");
        }
    }

    #[test]
    fn version_and_trailing_bytes() {
        let mut bytes = encode_index(&fixture());
        bytes[4] = 2;
        match decode_index(&bytes) {
            Err(Error::Format { offset: 4, reason }) => assert!(reason.contains("version")),
            other => panic!("{other:?}"),
        }
        let mut bytes = encode_index(&fixture());
        bytes.push(0);
        assert!(matches!(decode_index(&bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn corrupted_vector_rejected() {
        let mut bytes = encode_index(&fixture());
        // First vector component of record 1 -> 2.0
        bytes[34 + 8..34 + 12].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(decode_index(&bytes), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            seed in any::<u64>(),
            n in 1usize..40,
            dim in 1usize..24,
            model in "[a-z0-9/-]{0,20}",
        ) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let entries: Vec<(u64, Embedding)> = (0..n)
                .map(|i| {
                    let raw: Vec<f64> = (0..dim).map(|_| rng.next_signed_unit()).collect();
                    let e = Embedding::normalized(&raw, Modality::Image, model.clone()).unwrap();
                    (i as u64 * 31 + seed % 7, e)
                })
                .collect();
            let idx = KnnIndex::build(entries).unwrap();
            let bytes = encode_index(&idx);
            let back = decode_index(&bytes).unwrap();
            prop_assert_eq!(&back, &idx);
            for ((a, va), (b, vb)) in idx.iter().zip(back.iter()) {
                prop_assert_eq!(a, b);
                let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(va), bits(vb));
            }
        }
    }
}
