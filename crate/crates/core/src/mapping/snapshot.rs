//! Index snapshot file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   magic "SEVXIDX\0" (8 bytes)
//!          version u32 (= 1)
//!          dimension u32
//!          hnsw m u32, ef_construction u32, ef_search u32, seed u64
//!          bm25 k1 f64, b f64
//!          entry_count u64
//! entries  entry_count × { label: u32 len + UTF-8, concept_id: u32 len + UTF-8 }
//! vectors  entry_count × dimension × f32
//! graph    entry_point u64 (u64::MAX when empty)
//!          entry_count × { layers u8, layers × { count u32, count × u32 } }
//! ```
//!
//! The BM25 index is rebuilt from the labels on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{Bm25Params, Hnsw, HnswParams, IndexEntry, VocabularyIndex};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SEVXIDX\0";
const VERSION: u32 = 1;

impl VocabularyIndex {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let params = self.params();
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_u32::<LE>(self.dimension() as u32)?;
        w.write_u32::<LE>(params.hnsw.m as u32)?;
        w.write_u32::<LE>(params.hnsw.ef_construction as u32)?;
        w.write_u32::<LE>(params.hnsw.ef_search as u32)?;
        w.write_u64::<LE>(params.hnsw.seed)?;
        w.write_f64::<LE>(params.bm25.k1)?;
        w.write_f64::<LE>(params.bm25.b)?;
        w.write_u64::<LE>(self.entries.len() as u64)?;
        for e in &self.entries {
            write_str(w, &e.label)?;
            write_str(w, &e.concept_id)?;
        }
        for x in &self.graph.vectors {
            w.write_f32::<LE>(*x)?;
        }
        w.write_u64::<LE>(self.graph.entry.map_or(u64::MAX, u64::from))?;
        for layers in &self.graph.links {
            w.write_u8(layers.len() as u8)?;
            for ns in layers {
                w.write_u32::<LE>(ns.len() as u32)?;
                for n in ns {
                    w.write_u32::<LE>(*n)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r).map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData | std::io::ErrorKind::UnexpectedEof => {
                Error::Snapshot(format!("{}: {e}", path.display()))
            }
            _ => Error::io(path, e),
        })
    }

    fn read_from(r: &mut impl Read) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not an index snapshot"));
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(bad(&format!("unsupported snapshot version {version}")));
        }
        let dim = r.read_u32::<LE>()? as usize;
        let hnsw = HnswParams {
            m: r.read_u32::<LE>()? as usize,
            ef_construction: r.read_u32::<LE>()? as usize,
            ef_search: r.read_u32::<LE>()? as usize,
            seed: r.read_u64::<LE>()?,
        };
        let bm25 = Bm25Params {
            k1: r.read_f64::<LE>()?,
            b: r.read_f64::<LE>()?,
        };
        let n = r.read_u64::<LE>()? as usize;
        if dim == 0 {
            return Err(bad("zero dimension"));
        }
        let mut entries = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            entries.push(IndexEntry {
                label: read_str(r)?,
                concept_id: read_str(r)?,
            });
        }
        let mut vectors = vec![0f32; n * dim];
        r.read_f32_into::<LE>(&mut vectors)?;
        let entry = match r.read_u64::<LE>()? {
            u64::MAX => None,
            e if (e as usize) < n => Some(e as u32),
            _ => return Err(bad("entry point out of range")),
        };
        let mut links = Vec::with_capacity(n);
        for _ in 0..n {
            let layers = r.read_u8()? as usize;
            let mut node = Vec::with_capacity(layers);
            for _ in 0..layers {
                let count = r.read_u32::<LE>()? as usize;
                let mut ns = vec![0u32; count];
                r.read_u32_into::<LE>(&mut ns)?;
                if ns.iter().any(|&x| x as usize >= n) {
                    return Err(bad("neighbor id out of range"));
                }
                node.push(ns);
            }
            links.push(node);
        }
        let graph = Hnsw {
            dim,
            params: hnsw,
            vectors,
            links,
            entry,
        };
        Ok(VocabularyIndex::assemble(entries, graph, bm25))
    }

    #[cfg(test)]
    pub(crate) fn graph(&self) -> &Hnsw {
        &self.graph
    }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> std::io::Result<String> {
    let len = r.read_u32::<LE>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
