//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "HPC1"  u32 version
//! u64 vars, u64 width, u64 replicas, u64 leaves, u64 structure seed
//! u8 variant (0 plain, 1 hyper)
//!   hyper only: u64 embed dim, u64 decoder width, u64 decoder depth, u8 activation
//! u32 section count, then per section: u64 length, length × f64
//! u8 history flag, then u64 count and count × (u64 epoch, u64 steps, f64 train nll, f64 valid ll)
//! ```
//!
//! Plain models store one section of logits. Hyper models store the
//! embeddings, each decoder layer's weights and bias, and the top logits.

use hyperspn::circuit::{CircuitStructure, StructureConfig, StructureError};
use hyperspn::hypernet::{init_hyper, Activation, DecoderConfig, HyperError};
use hyperspn::training::{EpochRecord, Params, TrainError, TrainableModel};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"HPC1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic bytes)")]
    Magic,
    #[error("unsupported model file version {found}, this build reads version {VERSION}")]
    Version { found: u32 },
    #[error("unknown {what} tag {tag}")]
    Tag { what: &'static str, tag: u8 },
    #[error("invalid structure: {0}")]
    Structure(#[from] StructureError),
    #[error("invalid hypernetwork: {0}")]
    Hyper(#[from] HyperError),
    #[error("invalid parameters: {0}")]
    Params(#[from] TrainError),
    #[error("section {index} has {found} values, expected {expected}")]
    Section {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("value {0} does not fit this platform")]
    Overflow(u64),
    #[error("trailing bytes after the model")]
    Trailing,
}

/// A trained model plus its optional training history.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: TrainableModel,
    pub history: Option<Vec<EpochRecord>>,
}

impl ModelFile {
    pub fn new(model: TrainableModel) -> Self {
        Self {
            model,
            history: None,
        }
    }

    pub fn with_history(model: TrainableModel, history: Vec<EpochRecord>) -> Self {
        Self {
            model,
            history: Some(history),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = self.model.structure().config();
        for v in [cfg.vars, cfg.width, cfg.replicas, cfg.leaves] {
            put_u64(&mut out, v as u64);
        }
        put_u64(&mut out, cfg.seed);
        let sections: Vec<&[f64]> = match self.model.params() {
            Params::Plain(logits) => {
                out.push(0);
                vec![logits]
            }
            Params::Hyper(hp) => {
                out.push(1);
                let dec = hp.decoder_config();
                for v in [hp.embed_dim, dec.width, dec.depth] {
                    put_u64(&mut out, v as u64);
                }
                out.push(match dec.activation {
                    Activation::Tanh => 0,
                    Activation::Sigmoid => 1,
                });
                let mut s: Vec<&[f64]> = vec![&hp.embeddings];
                for layer in &hp.decoder.layers {
                    s.push(&layer.weights);
                    s.push(&layer.bias);
                }
                s.push(&hp.top_logits);
                s
            }
        };
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for section in sections {
            put_u64(&mut out, section.len() as u64);
            for v in section {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        match &self.history {
            None => out.push(0),
            Some(history) => {
                out.push(1);
                put_u64(&mut out, history.len() as u64);
                for rec in history {
                    put_u64(&mut out, rec.epoch as u64);
                    put_u64(&mut out, rec.steps);
                    out.extend_from_slice(&rec.train_nll.to_le_bytes());
                    out.extend_from_slice(&rec.valid_ll.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFileError> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ModelFileError::Magic);
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(ModelFileError::Version { found: version });
        }
        let vars = get_usize(&mut r)?;
        let width = get_usize(&mut r)?;
        let replicas = get_usize(&mut r)?;
        let leaves = get_usize(&mut r)?;
        let seed = get_u64(&mut r)?;
        let structure = CircuitStructure::build(
            StructureConfig::new(vars, width, replicas, seed).with_leaves(leaves),
        )?;

        let variant = get_u8(&mut r)?;
        let model = match variant {
            0 => {
                let sections = read_sections(&mut r, &[structure.param_count()])?;
                let logits = sections.into_iter().next().expect("one section");
                TrainableModel::new(structure, Params::Plain(logits))?
            }
            1 => {
                let embed_dim = get_usize(&mut r)?;
                let dec_width = get_usize(&mut r)?;
                let depth = get_usize(&mut r)?;
                let activation = match get_u8(&mut r)? {
                    0 => Activation::Tanh,
                    1 => Activation::Sigmoid,
                    tag => {
                        return Err(ModelFileError::Tag {
                            what: "activation",
                            tag,
                        })
                    }
                };
                let config = DecoderConfig {
                    width: dec_width,
                    depth,
                    activation,
                };
                // Shapes come from a freshly initialized network; values are then overwritten.
                let mut hp = init_hyper(&structure, embed_dim, config, 0)?;
                let mut expected = vec![hp.embeddings.len()];
                for layer in &hp.decoder.layers {
                    expected.push(layer.weights.len());
                    expected.push(layer.bias.len());
                }
                expected.push(hp.top_logits.len());
                let flat: Vec<f64> = read_sections(&mut r, &expected)?.concat();
                hp.load_flat(&flat)?;
                TrainableModel::new(structure, Params::Hyper(hp))?
            }
            tag => {
                return Err(ModelFileError::Tag {
                    what: "variant",
                    tag,
                })
            }
        };

        let history = match get_u8(&mut r)? {
            0 => None,
            1 => {
                let count = get_usize(&mut r)?;
                let mut records = Vec::with_capacity(count.min(1 << 20));
                for _ in 0..count {
                    records.push(EpochRecord {
                        epoch: get_usize(&mut r)?,
                        steps: get_u64(&mut r)?,
                        train_nll: get_f64(&mut r)?,
                        valid_ll: get_f64(&mut r)?,
                    });
                }
                Some(records)
            }
            tag => {
                return Err(ModelFileError::Tag {
                    what: "history",
                    tag,
                })
            }
        };
        if !r.is_empty() {
            return Err(ModelFileError::Trailing);
        }
        Ok(Self { model, history })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelFileError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_sections(r: &mut &[u8], expected: &[usize]) -> Result<Vec<Vec<f64>>, ModelFileError> {
    let count = get_u32(r)? as usize;
    if count != expected.len() {
        return Err(ModelFileError::Section {
            index: count.min(expected.len()),
            expected: expected.len(),
            found: count,
        });
    }
    let mut out = Vec::with_capacity(count);
    for (index, &want) in expected.iter().enumerate() {
        let found = get_usize(r)?;
        if found != want {
            return Err(ModelFileError::Section {
                index,
                expected: want,
                found,
            });
        }
        let mut values = Vec::with_capacity(want);
        for _ in 0..want {
            values.push(get_f64(r)?);
        }
        out.push(values);
    }
    Ok(out)
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn get_u8(r: &mut &[u8]) -> std::io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn get_u32(r: &mut &[u8]) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut &[u8]) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_usize(r: &mut &[u8]) -> Result<usize, ModelFileError> {
    let v = get_u64(r)?;
    usize::try_from(v).map_err(|_| ModelFileError::Overflow(v))
}

fn get_f64(r: &mut &[u8]) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
