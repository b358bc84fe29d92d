//! Append-only on-disk embedding cache.
//!
//! One file, `embeddings.hbc`, holding a sequence of entries:
//!
//! ```text
//! magic "HBE1" | key [32] | created_at i64 | rows u32 | cols u32 | checksum [8] | rows*cols f64
//! ```
//!
//! All integers are little-endian. `key = SHA-256(backend_id ‖ 0x00 ‖ text)`
//! and `checksum` is the first 8 bytes of SHA-256 over the payload bytes.
//! The index is rebuilt by scanning the file on open; later entries
//! shadow earlier ones with the same key. A torn tail is truncated.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use super::EmbeddingError;
use crate::nn::Matrix;

const MAGIC: &[u8; 4] = b"HBE1";
const HEADER: usize = 4 + 32 + 8 + 4 + 4 + 8;
pub const CACHE_FILE: &str = "embeddings.hbc";

type Key = [u8; 32];

#[derive(Debug, Clone, Copy)]
struct Slot {
    payload_at: u64,
    rows: u32,
    cols: u32,
    checksum: [u8; 8],
}

#[derive(Debug)]
struct Inner {
    file: File,
    end: u64,
    index: HashMap<Key, Slot>,
}

/// Concurrent readers, one writer at a time.
#[derive(Debug)]
pub struct EmbeddingCache {
    path: PathBuf,
    inner: RwLock<Inner>,
}

pub fn cache_key(backend_id: &str, text: &str) -> Key {
    let mut h = Sha256::new();
    h.update(backend_id.as_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    h.finalize().into()
}

fn checksum(payload: &[u8]) -> [u8; 8] {
    Sha256::digest(payload)[..8].try_into().expect("digest is 32 bytes")
}

enum Lookup {
    Miss,
    Hit(Matrix),
    Corrupt,
}

impl EmbeddingCache {
    pub fn open(dir: &Path) -> Result<Self, EmbeddingError> {
        fs::create_dir_all(dir).map_err(|e| EmbeddingError::io(dir, e))?;
        let path = dir.join(CACHE_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)
            .map_err(|e| EmbeddingError::io(&path, e))?;
        let (index, end) = scan(&mut file).map_err(|e| EmbeddingError::io(&path, e))?;
        let len = file.metadata().map_err(|e| EmbeddingError::io(&path, e))?.len();
        if end < len {
            log::warn!("{}: discarding {} trailing bytes of a torn entry", path.display(), len - end);
            file.set_len(end).map_err(|e| EmbeddingError::io(&path, e))?;
        }
        Ok(EmbeddingCache { path, inner: RwLock::new(Inner { file, end, index }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock").index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, key: &Key) -> Result<Lookup, EmbeddingError> {
        let inner = self.inner.read().expect("cache lock");
        let Some(slot) = inner.index.get(key).copied() else { return Ok(Lookup::Miss) };
        let mut buf = vec![0u8; slot.rows as usize * slot.cols as usize * 8];
        read_at(&inner.file, &mut buf, slot.payload_at).map_err(|e| EmbeddingError::io(&self.path, e))?;
        if checksum(&buf) != slot.checksum {
            return Ok(Lookup::Corrupt);
        }
        let values: Vec<f64> =
            buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Ok(Lookup::Hit(
            Matrix::from_shape_vec((slot.rows as usize, slot.cols as usize), values).expect("stored shape"),
        ))
    }

    pub fn get(&self, backend_id: &str, text: &str) -> Result<Option<Matrix>, EmbeddingError> {
        match self.lookup(&cache_key(backend_id, text))? {
            Lookup::Hit(m) => Ok(Some(m)),
            _ => Ok(None),
        }
    }

    pub fn put(&self, backend_id: &str, text: &str, value: &Matrix) -> Result<(), EmbeddingError> {
        let key = cache_key(backend_id, text);
        let mut payload = Vec::with_capacity(value.len() * 8);
        for x in value.iter() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
        let (rows, cols) = (value.nrows() as u32, value.ncols() as u32);
        let sum = checksum(&payload);
        let mut entry = Vec::with_capacity(HEADER + payload.len());
        entry.extend_from_slice(MAGIC);
        entry.extend_from_slice(&key);
        entry.extend_from_slice(&chrono::Utc::now().timestamp().to_le_bytes());
        entry.extend_from_slice(&rows.to_le_bytes());
        entry.extend_from_slice(&cols.to_le_bytes());
        entry.extend_from_slice(&sum);
        entry.extend_from_slice(&payload);

        let mut inner = self.inner.write().expect("cache lock");
        let at = inner.end;
        inner.file.seek(SeekFrom::Start(at)).map_err(|e| EmbeddingError::io(&self.path, e))?;
        inner.file.write_all(&entry).map_err(|e| EmbeddingError::io(&self.path, e))?;
        inner.end = at + entry.len() as u64;
        inner.index.insert(key, Slot { payload_at: at + HEADER as u64, rows, cols, checksum: sum });
        Ok(())
    }

    /// Returns the stored value bit-exactly, or computes, stores and
    /// returns it. A corrupt entry is evicted and recomputed.
    pub fn get_or_compute<F>(&self, backend_id: &str, text: &str, compute: F) -> Result<Matrix, EmbeddingError>
    where
        F: FnOnce() -> Result<Matrix, EmbeddingError>,
    {
        let key = cache_key(backend_id, text);
        match self.lookup(&key)? {
            Lookup::Hit(m) => return Ok(m),
            Lookup::Corrupt => {
                log::warn!("{}: corrupt entry for backend {backend_id}, recomputing", self.path.display());
                self.inner.write().expect("cache lock").index.remove(&key);
            }
            Lookup::Miss => {}
        }
        let value = compute()?;
        self.put(backend_id, text, &value)?;
        Ok(value)
    }
}

fn scan(file: &mut File) -> std::io::Result<(HashMap<Key, Slot>, u64)> {
    let len = file.metadata()?.len();
    let mut index = HashMap::new();
    let mut pos = 0u64;
    file.seek(SeekFrom::Start(0))?;
    let mut reader = std::io::BufReader::new(&*file);
    let mut header = [0u8; HEADER];
    while pos + HEADER as u64 <= len {
        reader.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            break;
        }
        let key: Key = header[4..36].try_into().expect("32-byte key");
        let rows = u32::from_le_bytes(header[44..48].try_into().expect("u32"));
        let cols = u32::from_le_bytes(header[48..52].try_into().expect("u32"));
        let checksum: [u8; 8] = header[52..60].try_into().expect("8-byte checksum");
        let payload = rows as u64 * cols as u64 * 8;
        if pos + HEADER as u64 + payload > len {
            break;
        }
        std::io::copy(&mut (&mut reader).take(payload), &mut std::io::sink())?;
        index.insert(key, Slot { payload_at: pos + HEADER as u64, rows, cols, checksum });
        pos += HEADER as u64 + payload;
    }
    Ok((index, pos))
}

#[cfg(unix)]
fn read_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    std::os::unix::fs::FileExt::read_exact_at(file, buf, offset)
}

#[cfg(windows)]
fn read_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        let n = file.seek_read(buf, offset)?;
        if n == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        buf = &mut buf[n..];
        offset += n as u64;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn m(v: &[f64]) -> Matrix {
        Matrix::from_shape_vec((1, v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn miss_then_hit_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Cell::new(0);
        let value = m(&[0.1, -2.5, f64::MIN_POSITIVE]);
        {
            let c = EmbeddingCache::open(dir.path()).unwrap();
            for _ in 0..2 {
                let got = c
                    .get_or_compute("b", "text", || {
                        calls.set(calls.get() + 1);
                        Ok(value.clone())
                    })
                    .unwrap();
                assert_eq!(got, value);
            }
        }
        assert_eq!(calls.get(), 1);
        let c = EmbeddingCache::open(dir.path()).unwrap();
        assert_eq!(c.get("b", "text").unwrap().unwrap(), value);
    }

    #[test]
    fn backend_id_is_part_of_the_key() {
        assert_ne!(cache_key("a", "t"), cache_key("b", "t"));
        assert_ne!(cache_key("a", "bc"), cache_key("ab", "c"));
        let dir = tempfile::tempdir().unwrap();
        let c = EmbeddingCache::open(dir.path()).unwrap();
        c.put("a", "t", &m(&[1.0])).unwrap();
        c.put("b", "t", &m(&[2.0])).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("a", "t").unwrap().unwrap(), m(&[1.0]));
    }

    #[test]
    fn cold_cache_stores_one_entry_per_text() {
        let dir = tempfile::tempdir().unwrap();
        let c = EmbeddingCache::open(dir.path()).unwrap();
        for i in 0..25 {
            c.get_or_compute("b", &format!("t{i}"), || Ok(m(&[i as f64; 3]))).unwrap();
        }
        assert_eq!(c.len(), 25);
    }

    #[test]
    fn corrupt_entry_is_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let c = EmbeddingCache::open(dir.path()).unwrap();
            c.put("b", "t", &m(&[1.0, 2.0])).unwrap();
        }
        let p = dir.path().join(CACHE_FILE);
        let mut bytes = fs::read(&p).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&p, bytes).unwrap();
        let c = EmbeddingCache::open(dir.path()).unwrap();
        assert!(c.get("b", "t").unwrap().is_none());
        let got = c.get_or_compute("b", "t", || Ok(m(&[1.0, 2.0]))).unwrap();
        assert_eq!(got, m(&[1.0, 2.0]));
        let c = EmbeddingCache::open(dir.path()).unwrap();
        assert_eq!(c.get("b", "t").unwrap().unwrap(), m(&[1.0, 2.0]));
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        {
            let c = EmbeddingCache::open(dir.path()).unwrap();
            c.put("b", "t", &m(&[1.0])).unwrap();
        }
        let p = dir.path().join(CACHE_FILE);
        let good = fs::metadata(&p).unwrap().len();
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"HBE1 partial").unwrap();
        drop(f);
        let c = EmbeddingCache::open(dir.path()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(fs::metadata(&p).unwrap().len(), good);
    }

    #[test]
    fn concurrent_readers_and_writer() {
        let dir = tempfile::tempdir().unwrap();
        let c = EmbeddingCache::open(dir.path()).unwrap();
        std::thread::scope(|s| {
            for t in 0..4 {
                let c = &c;
                s.spawn(move || {
                    for i in 0..50 {
                        let text = format!("t{}", i % 10);
                        let v = c.get_or_compute("b", &text, || Ok(m(&[(i % 10) as f64; 4]))).unwrap();
                        assert_eq!(v, m(&[(i % 10) as f64; 4]), "thread {t}");
                    }
                });
            }
        });
        assert!(c.len() >= 10);
    }
}
