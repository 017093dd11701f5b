//! Named-tensor checkpoint archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    "FSRLCKPT"
//! version  u32
//! step     u64
//! meta     u32 length + UTF-8 bytes
//! count    u32
//! entry*   u32 name length, name, u8 dtype length, dtype,
//!          u32 rank, u64 dims[rank], value[n], first_moment[n], second_moment[n]
//! ```

use std::fs;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"FSRLCKPT";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub fn encode<S: Scalar>(store: &ParamStore<S>, metadata: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + store.total_size() * 3 * S::BYTES);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, store.step());
    put_str(&mut out, metadata);
    put_u32(&mut out, store.len() as u32);
    for id in store.ids() {
        put_str(&mut out, store.name(id));
        out.push(S::DTYPE.len() as u8);
        out.extend_from_slice(S::DTYPE.as_bytes());
        let value = store.value(id);
        put_u32(&mut out, value.shape().len() as u32);
        for &d in value.shape() {
            put_u64(&mut out, d as u64);
        }
        for t in [
            value,
            &store.first_moment[id.index()],
            &store.second_moment[id.index()],
        ] {
            for &x in t.data() {
                x.write_le(&mut out);
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Format("checkpoint string is not UTF-8".into()))
    }

    fn tensor<S: Scalar>(&mut self, shape: &[usize]) -> Result<Tensor<S>> {
        let n: usize = shape.iter().product();
        let bytes = self.take(n * S::BYTES)?;
        let data = bytes.chunks(S::BYTES).map(S::read_le).collect();
        Tensor::new(shape.to_vec(), data)
    }
}

/// Decodes an archive into a fresh store plus its metadata string.
pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<(ParamStore<S>, String)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let step = r.u64()?;
    let meta_len = r.u32()? as usize;
    let metadata = r.string(meta_len)?;
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = r.string(name_len)?;
        let dtype_len = r.take(1)?[0] as usize;
        let dtype = r.string(dtype_len)?;
        if dtype != S::DTYPE {
            return Err(Error::Format(format!(
                "parameter `{name}` stored as {dtype}, expected {}",
                S::DTYPE
            )));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let value = r.tensor(&shape)?;
        let m = r.tensor(&shape)?;
        let v = r.tensor(&shape)?;
        let id = store.insert(name, value.clone())?;
        store.restore_state(id, value, m, v);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    store.set_step(step);
    Ok((store, metadata))
}

pub fn save<S: Scalar>(store: &ParamStore<S>, metadata: &str, path: &Path) -> Result<()> {
    fs::write(path, encode(store, metadata))?;
    Ok(())
}

pub fn load<S: Scalar>(path: &Path) -> Result<(ParamStore<S>, String)> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archive_round_trips_bitwise() {
        let mut store = ParamStore::<f64>::new();
        let a = store
            .insert("a.w", Tensor::matrix(2, 2, vec![0.1, -0.2, 1e-300, 3.5]).unwrap())
            .unwrap();
        store.insert("b", Tensor::vector(vec![7.0])).unwrap();
        store.first_moment[a.index()].data_mut()[1] = 0.25;
        store.set_step(42);
        let bytes = encode(&store, "{\"k\":1}");
        let (back, meta) = decode::<f64>(&bytes).unwrap();
        assert_eq!(meta, "{\"k\":1}");
        assert_eq!(back, {
            let mut s = store.clone();
            s.zero_grads();
            s
        });
        assert_eq!(encode(&back, &meta), bytes);
    }

    #[test]
    fn rejects_dtype_mismatch_and_truncation() {
        let mut store = ParamStore::<f32>::new();
        store.insert("x", Tensor::vector(vec![1.0f32, 2.0])).unwrap();
        let bytes = encode(&store, "");
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Format(_))));
        assert!(matches!(decode::<f32>(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
    }
}
