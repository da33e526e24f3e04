//! Binary model file.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic            4  b"CLRF"
//! version          1  = 1
//! -- config --
//! n_estimators     4  u32
//! max_features     1+4  tag (0 sqrt, 1 all, 2 count) + u32 count
//! min_samples_leaf 4  u32
//! min_samples_split 4 u32
//! bootstrap        1  0/1
//! random_state     8  u64
//! vote             1  0 soft, 1 hard
//! -- model --
//! n_features       4  u32
//! n_classes        1  then one byte per class (0 Baseline, 1 Low, 2 High)
//! fingerprint      32
//! degenerate       1  0/1
//! oob              1+8  flag + f64 bits
//! -- trees --
//! n_trees          4  u32
//!   n_nodes        4  u32
//!     tag          1  0 split, 1 leaf
//!     split:  feature u16, threshold f64 bits, left u32, right u32
//!     leaf:   n_classes x u32 counts
//! -- trailer --
//! crc32            4  over every preceding byte
//! ```

use std::path::Path;

use thiserror::Error;

use super::config::{ForestConfig, MaxFeatures, VoteMode};
use super::tree::{DecisionTree, Node};
use super::ForestModel;
use crate::domain::LoadLabel;

pub const MAGIC: [u8; 4] = *b"CLRF";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model format version {found}, expected {FORMAT_VERSION}")]
    VersionMismatch { found: u8 },
    #[error("corrupt model file: {0}")]
    CorruptModel(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn save(model: &ForestModel, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ForestModel, ModelIoError> {
    from_bytes(&std::fs::read(path)?)
}

pub fn to_bytes(model: &ForestModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);

    let c = &model.config;
    put_u32(&mut out, c.n_estimators as u32);
    let (tag, count) = match c.max_features {
        MaxFeatures::Sqrt => (0u8, 0u32),
        MaxFeatures::All => (1, 0),
        MaxFeatures::Count(n) => (2, n as u32),
    };
    out.push(tag);
    put_u32(&mut out, count);
    put_u32(&mut out, c.min_samples_leaf as u32);
    put_u32(&mut out, c.min_samples_split as u32);
    out.push(c.bootstrap as u8);
    out.extend_from_slice(&c.random_state.to_le_bytes());
    out.push(match c.vote {
        VoteMode::Soft => 0,
        VoteMode::Hard => 1,
    });

    put_u32(&mut out, model.n_features as u32);
    out.push(model.classes.len() as u8);
    out.extend(model.classes.iter().map(|l| l.index() as u8));
    out.extend_from_slice(&model.fingerprint);
    out.push(model.degenerate as u8);
    out.push(model.oob_accuracy.is_some() as u8);
    out.extend_from_slice(&model.oob_accuracy.unwrap_or(0.0).to_bits().to_le_bytes());

    put_u32(&mut out, model.trees.len() as u32);
    for tree in &model.trees {
        put_u32(&mut out, tree.nodes.len() as u32);
        for node in &tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(0);
                    out.extend_from_slice(&feature.to_le_bytes());
                    out.extend_from_slice(&threshold.to_bits().to_le_bytes());
                    put_u32(&mut out, *left);
                    put_u32(&mut out, *right);
                }
                Node::Leaf { counts } => {
                    out.push(1);
                    for &n in counts {
                        put_u32(&mut out, n);
                    }
                }
            }
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<ForestModel, ModelIoError> {
    if bytes.len() < MAGIC.len() + 1 || bytes[..4] != MAGIC {
        return Err(ModelIoError::CorruptModel("bad magic"));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(ModelIoError::VersionMismatch { found: bytes[4] });
    }
    if bytes.len() < 9 {
        return Err(ModelIoError::CorruptModel("file too short"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(ModelIoError::CorruptModel("checksum mismatch"));
    }

    let mut r = Reader { buf: body, pos: 5 };
    let n_estimators = r.u32()? as usize;
    let tag = r.u8()?;
    let count = r.u32()? as usize;
    let max_features = match tag {
        0 => MaxFeatures::Sqrt,
        1 => MaxFeatures::All,
        2 => MaxFeatures::Count(count),
        _ => return Err(ModelIoError::CorruptModel("max_features tag")),
    };
    let min_samples_leaf = r.u32()? as usize;
    let min_samples_split = r.u32()? as usize;
    let bootstrap = r.flag()?;
    let random_state = r.u64()?;
    let vote = match r.u8()? {
        0 => VoteMode::Soft,
        1 => VoteMode::Hard,
        _ => return Err(ModelIoError::CorruptModel("vote mode")),
    };
    let config = ForestConfig {
        n_estimators,
        max_features,
        min_samples_leaf,
        min_samples_split,
        bootstrap,
        random_state,
        vote,
    };

    let n_features = r.u32()? as usize;
    let n_classes = r.u8()? as usize;
    if n_classes == 0 {
        return Err(ModelIoError::CorruptModel("empty class list"));
    }
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let idx = r.u8()? as usize;
        classes.push(LoadLabel::from_index(idx).ok_or(ModelIoError::CorruptModel("class code"))?);
    }
    let mut fingerprint = [0u8; 32];
    fingerprint.copy_from_slice(r.take(32)?);
    let degenerate = r.flag()?;
    let has_oob = r.flag()?;
    let oob = f64::from_bits(r.u64()?);
    let oob_accuracy = has_oob.then_some(oob);

    let n_trees = r.u32()? as usize;
    if n_trees == 0 {
        return Err(ModelIoError::CorruptModel("no trees"));
    }
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for _ in 0..n_trees {
        let n_nodes = r.u32()? as usize;
        if n_nodes == 0 {
            return Err(ModelIoError::CorruptModel("empty tree"));
        }
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        for i in 0..n_nodes {
            let node = match r.u8()? {
                0 => {
                    let feature = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
                    let threshold = f64::from_bits(r.u64()?);
                    let left = r.u32()?;
                    let right = r.u32()?;
                    let valid = |c: u32| (c as usize) > i && (c as usize) < n_nodes;
                    if feature as usize >= n_features || !valid(left) || !valid(right) {
                        return Err(ModelIoError::CorruptModel("split node"));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                1 => {
                    let mut counts = Vec::with_capacity(n_classes);
                    for _ in 0..n_classes {
                        counts.push(r.u32()?);
                    }
                    Node::Leaf { counts }
                }
                _ => return Err(ModelIoError::CorruptModel("node tag")),
            };
            nodes.push(node);
        }
        trees.push(DecisionTree { nodes });
    }
    if r.pos != body.len() {
        return Err(ModelIoError::CorruptModel("trailing bytes"));
    }
    Ok(ForestModel {
        config,
        n_features,
        classes,
        fingerprint,
        trees,
        degenerate,
        oob_accuracy,
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(ModelIoError::CorruptModel("unexpected end of data"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelIoError> {
        Ok(self.take(1)?[0])
    }

    fn flag(&mut self) -> Result<bool, ModelIoError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(ModelIoError::CorruptModel("flag byte")),
        }
    }

    fn u32(&mut self) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model() -> ForestModel {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<[f64; 3]> = (0..120).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<LoadLabel> = x
            .iter()
            .map(|r| if r[0] + r[1] > 1.0 { LoadLabel::High } else if r[2] > 0.5 { LoadLabel::Low } else { LoadLabel::Baseline })
            .collect();
        fit(&x, &y, &ForestConfig::default().with_trees(15)).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let m = small_model();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = to_bytes(&small_model());
        for cut in [5, 9, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(ModelIoError::CorruptModel(_))), "cut {cut}");
        }
    }

    #[test]
    fn bumped_version_is_rejected() {
        let mut bytes = to_bytes(&small_model());
        bytes[4] += 1;
        assert!(matches!(from_bytes(&bytes), Err(ModelIoError::VersionMismatch { found: 2 })));
    }

    #[test]
    fn flipped_tree_byte_fails_checksum() {
        let mut bytes = to_bytes(&small_model());
        let i = bytes.len() - 20;
        bytes[i] ^= 0x10;
        assert!(matches!(from_bytes(&bytes), Err(ModelIoError::CorruptModel("checksum mismatch"))));
    }
}
