//! On-disk binary snapshot of an index.
//!
//! Layout (all integers little-endian, varints are LEB128):
//!
//! ```text
//! magic        8 bytes  "PRFIDX1\n"
//! version      u32      currently 1
//! n_docs       u64
//! per doc (ordinal order = sorted docid order):
//!   docid      u32 length + UTF-8 bytes
//!   doc_length u64
//! n_terms      u64
//! per term (sorted):
//!   term           u32 length + UTF-8 bytes
//!   postings_len   u64
//!   per posting:   varint doc-ordinal delta (first is absolute), varint tf
//! ```
//!
//! Collection stats and the forward index are rebuilt on load and the
//! tf sums are checked against the stored document lengths.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::InvertedIndex;

pub const MAGIC: &[u8; 8] = b"PRFIDX1\n";
pub const VERSION: u32 = 1;

fn write_varint<W: Write>(w: &mut W, mut value: u64) -> Result<()> {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            w.write_all(&[byte])?;
            return Ok(());
        }
        w.write_all(&[byte | 0x80])?;
    }
}

fn read_varint<R: Read>(r: &mut R) -> Result<u64> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        if shift >= 64 {
            return Err(Error::Snapshot("varint overflows u64".into()));
        }
        value |= u64::from(byte[0] & 0x7f) << shift;
        if byte[0] & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Snapshot("non-UTF-8 string".into()))
}

pub fn write_snapshot<W: Write>(index: &InvertedIndex, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(index.n_docs() as u64).to_le_bytes())?;
    for ord in 0..index.n_docs() as u32 {
        write_string(w, index.docid(ord))?;
        w.write_all(&u64::from(index.doc_len(ord)).to_le_bytes())?;
    }
    w.write_all(&(index.n_terms() as u64).to_le_bytes())?;
    for tid in 0..index.n_terms() as u32 {
        write_string(w, index.term(tid))?;
        let postings = index.postings(tid);
        w.write_all(&(postings.len() as u64).to_le_bytes())?;
        let mut prev = 0u32;
        for &(ord, tf) in postings {
            write_varint(w, u64::from(ord - prev))?;
            write_varint(w, u64::from(tf))?;
            prev = ord;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<InvertedIndex> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic bytes".into()));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(Error::Snapshot(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }

    let mut n = [0u8; 8];
    r.read_exact(&mut n)?;
    let n_docs = u64::from_le_bytes(n) as usize;
    let mut docids = Vec::with_capacity(n_docs);
    let mut doc_lengths = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let docid = read_string(r)?;
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        if let Some(prev) = docids.last() {
            if *prev >= docid {
                return Err(Error::Snapshot(format!("docids out of order at `{docid}`")));
            }
        }
        docids.push(docid);
        doc_lengths.push(u64::from_le_bytes(len) as u32);
    }

    r.read_exact(&mut n)?;
    let n_terms = u64::from_le_bytes(n) as usize;
    let mut terms = Vec::with_capacity(n_terms);
    let mut postings = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let term = read_string(r)?;
        if let Some(prev) = terms.last() {
            if *prev >= term {
                return Err(Error::Snapshot(format!("terms out of order at `{term}`")));
            }
        }
        terms.push(term);
        r.read_exact(&mut n)?;
        let len = u64::from_le_bytes(n) as usize;
        let mut list = Vec::with_capacity(len);
        let mut ord = 0u32;
        for i in 0..len {
            let delta = read_varint(r)?;
            let tf = read_varint(r)?;
            if tf == 0 {
                return Err(Error::Snapshot("posting with tf = 0".into()));
            }
            ord = if i == 0 {
                u32::try_from(delta).map_err(|_| Error::Snapshot("ordinal overflow".into()))?
            } else {
                ord.checked_add(u32::try_from(delta).map_err(|_| {
                    Error::Snapshot("ordinal overflow".into())
                })?)
                .ok_or_else(|| Error::Snapshot("ordinal overflow".into()))?
            };
            if ord as usize >= n_docs || (i > 0 && delta == 0) {
                return Err(Error::Snapshot("posting ordinal out of range".into()));
            }
            list.push((ord, tf as u32));
        }
        postings.push(list);
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Snapshot("trailing bytes after postings".into()));
    }

    InvertedIndex::from_snapshot_parts(docids, doc_lengths, terms, postings)
}

pub fn save_to_path<P: AsRef<Path>>(index: &InvertedIndex, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(index, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<InvertedIndex> {
    let mut r = BufReader::new(File::open(path)?);
    read_snapshot(&mut r)
}
