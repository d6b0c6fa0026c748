//! Binary model checkpoints.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic       4 bytes  "KGRF"
//! version     u32
//! config      u32 length + UTF-8 JSON of ModelConfig
//! entities    u32 count, then per name: u32 length + UTF-8 bytes
//! relations   same layout
//! labels      same layout
//! types       u32 count (= entities), then u32 label row per entity
//!             (row == label count means UNK)
//! blocks      u32 count, then per block:
//!             u8 tag, u32 rows, u32 cols, rows*cols f64
//! ```

use std::path::Path;

use super::{Block, EmbeddingModel, ModelConfig};
use crate::error::{Error, Result};
use crate::util::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"KGRF";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode(model: &EmbeddingModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    let config = serde_json::to_string(&model.config).expect("config serializes");
    put_str(&mut buf, &config);
    for table in [&model.entities, &model.relations, &model.labels] {
        put_u32(&mut buf, table.len() as u32);
        for name in table {
            put_str(&mut buf, name);
        }
    }
    put_u32(&mut buf, model.type_rows().len() as u32);
    for &t in model.type_rows() {
        put_u32(&mut buf, t);
    }
    put_u32(&mut buf, Block::ALL.len() as u32);
    for &b in &Block::ALL {
        let (rows, cols) = model.shape(b);
        buf.push(b.tag());
        put_u32(&mut buf, rows as u32);
        put_u32(&mut buf, cols as u32);
        for v in model.block(b) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Data(format!(
                "checkpoint truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Data("checkpoint string is not UTF-8".into()))
    }

    fn table(&mut self) -> Result<Vec<String>> {
        let n = self.u32()?;
        (0..n).map(|_| self.string()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Data("not a model checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Data(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config: ModelConfig = serde_json::from_str(&r.string()?)
        .map_err(|e| Error::Data(format!("checkpoint config: {e}")))?;
    let entities = r.table()?;
    let relations = r.table()?;
    let labels = r.table()?;
    let n_types = r.u32()?;
    let types = (0..n_types).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let n_blocks = r.u32()? as usize;
    let mut blocks = vec![Vec::new(); Block::ALL.len()];
    for _ in 0..n_blocks {
        let tag = r.u8()?;
        let b = Block::from_tag(tag)
            .ok_or_else(|| Error::Data(format!("unknown parameter block tag {tag}")))?;
        let len = r.u32()? as usize * r.u32()? as usize;
        blocks[b as usize] = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Data("trailing bytes after checkpoint".into()));
    }
    EmbeddingModel::from_parts(config, entities, relations, labels, types, blocks)
}

pub fn write_checkpoint(model: &EmbeddingModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode(model))
}

pub fn read_checkpoint(path: &Path) -> Result<EmbeddingModel> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes)
}
