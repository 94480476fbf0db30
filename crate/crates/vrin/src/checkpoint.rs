//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VRIN" | version: u32 | header_len: u64 | header (UTF-8) | payload_len: u64 | payload: f64 x payload_len
//! ```
//!
//! The header has three sections. `[config]` echoes every training key,
//! `[variables]` lists feature names in index order, and `[manifest]` holds one
//! `name dims offset` line per tensor (dims joined by `x`, offset counted in
//! f64 slots). Normalization statistics are stored as the tensors `norm.mean`
//! and `norm.std`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vrin_core::data::NormStats;
use vrin_core::model::{Model, ModelDims};
use vrin_core::params::Group;
use vrin_core::{ParameterStore, Tensor, TrainConfig};

use crate::config_file;
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"VRIN";
pub const VERSION: u32 = 1;

const NORM_MEAN: &str = "norm.mean";
const NORM_STD: &str = "norm.std";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub variables: Vec<String>,
    pub stats: NormStats,
    pub model: Model,
}

struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors: Vec<(&str, Vec<usize>, &[f64])> = self
            .model
            .store
            .iter()
            .map(|(_, p)| (p.name.as_str(), p.tensor.shape().to_vec(), p.tensor.data()))
            .collect();
        tensors.push((NORM_MEAN, vec![self.stats.mean.len()], &self.stats.mean));
        tensors.push((NORM_STD, vec![self.stats.std.len()], &self.stats.std));

        let mut header = String::from("[config]\n");
        header.push_str(&config_file::render(&self.config));
        header.push_str("[variables]\n");
        for v in &self.variables {
            let _ = writeln!(header, "{v}");
        }
        header.push_str("[manifest]\n");
        let mut offset = 0;
        for (name, shape, data) in &tensors {
            let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(header, "{name} {} {offset}", dims.join("x"));
            offset += data.len();
        }

        let mut out = Vec::with_capacity(24 + header.len() + offset * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(offset as u64).to_le_bytes());
        for (_, _, data) in &tensors {
            for v in *data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let bad = |m: &str| CliError::Mismatch(format!("corrupt checkpoint: {m}"));
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4).ok_or_else(|| bad("truncated"))? != MAGIC {
            return Err(bad("missing VRIN magic"));
        }
        let version = u32::from_le_bytes(cur.array().ok_or_else(|| bad("truncated"))?);
        if version != VERSION {
            return Err(CliError::Mismatch(format!(
                "checkpoint format version {version} is not supported (this build reads version {VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(cur.array().ok_or_else(|| bad("truncated"))?) as usize;
        let header = cur.take(header_len).ok_or_else(|| bad("truncated header"))?;
        let header = std::str::from_utf8(header).map_err(|_| bad("header is not UTF-8"))?;
        let payload_len = u64::from_le_bytes(cur.array().ok_or_else(|| bad("truncated"))?) as usize;
        let payload_bytes = cur.take(payload_len.checked_mul(8).ok_or_else(|| bad("payload size"))?);
        let payload_bytes = payload_bytes.ok_or_else(|| bad("truncated payload"))?;
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let payload: Vec<f64> = payload_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();

        let (config_text, variables, entries) = split_header(header).map_err(|m| bad(&m))?;
        let config = config_file::parse_full(&config_text)
            .map_err(|e| CliError::Mismatch(format!("checkpoint config: {e}")))?;

        let mut store = ParameterStore::new();
        let mut mean = None;
        let mut std = None;
        let mut next = 0;
        for e in &entries {
            let len: usize = e.shape.iter().product();
            if e.offset != next || e.offset + len > payload.len() {
                return Err(bad(&format!("tensor `{}` overlaps or runs past the payload", e.name)));
            }
            next = e.offset + len;
            let data = payload[e.offset..next].to_vec();
            match e.name.as_str() {
                NORM_MEAN => mean = Some(data),
                NORM_STD => std = Some(data),
                _ => {
                    let t = Tensor::new(e.shape.clone(), data).map_err(|x| bad(&x.to_string()))?;
                    store.insert(&e.name, t, Group::Recurrent, false);
                }
            }
        }
        if next != payload.len() {
            return Err(bad("payload has unreferenced values"));
        }
        let (Some(mean), Some(std)) = (mean, std) else {
            return Err(bad("normalization statistics missing"));
        };
        if mean.len() != config.features || std.len() != config.features || variables.len() != config.features {
            return Err(CliError::Mismatch(format!(
                "checkpoint declares {} features but stores {} variables and {} normalization entries",
                config.features,
                variables.len(),
                mean.len()
            )));
        }
        let model = Model::from_store(ModelDims::from_config(&config), store)?;
        Ok(Checkpoint {
            config,
            variables,
            stats: NormStats { mean, std },
            model,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().expect("exact length"))
    }
}

fn split_header(header: &str) -> Result<(String, Vec<String>, Vec<Entry>), String> {
    let mut section = "";
    let mut config = String::new();
    let mut variables = Vec::new();
    let mut entries = Vec::new();
    for line in header.lines() {
        match line {
            "[config]" | "[variables]" | "[manifest]" => {
                section = line;
                continue;
            }
            _ => {}
        }
        match section {
            "[config]" => {
                config.push_str(line);
                config.push('\n');
            }
            "[variables]" => variables.push(line.to_string()),
            "[manifest]" => {
                let parts: Vec<&str> = line.split(' ').collect();
                let [name, dims, offset] = parts[..] else {
                    return Err(format!("bad manifest line `{line}`"));
                };
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| format!("bad shape in `{line}`"))?;
                let offset = offset.parse().map_err(|_| format!("bad offset in `{line}`"))?;
                entries.push(Entry {
                    name: name.to_string(),
                    shape,
                    offset,
                });
            }
            _ => return Err(format!("content outside a section: `{line}`")),
        }
    }
    Ok((config, variables, entries))
}
