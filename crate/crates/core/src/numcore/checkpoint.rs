//! Checkpoint file format.
//!
//! A checkpoint is a UTF-8 header followed by raw data:
//!
//! ```text
//! DACER-CHECKPOINT 1
//! meta <key> <value...>
//! tensor <name> <ndim> <d0> <d1> ...
//! ...
//! end
//! <payload>
//! ```
//!
//! The payload is every tensor's elements, in header order, row-major, as
//! little-endian IEEE-754 `f64`. Names and meta keys contain no
//! whitespace; meta values run to the end of the line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::nn::{Activation, Linear, Mlp};
use super::scalar::Scalar;
use super::tensor::Tensor;

const MAGIC: &str = "DACER-CHECKPOINT 1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    meta: BTreeMap<String, String>,
    tensors: Vec<(String, Tensor<f64>)>,
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::Checkpoint(format!("{what} {s:?} must be a non-empty token")));
    }
    Ok(())
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Parse a meta value, failing with the key's name if absent or malformed.
    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta(key)
            .ok_or_else(|| Error::Checkpoint(format!("missing meta key {key}")))?;
        raw.parse()
            .map_err(|_| Error::Checkpoint(format!("meta key {key}: cannot parse {raw:?}")))
    }

    pub fn insert<S: Scalar>(&mut self, name: &str, t: &Tensor<S>) {
        let data = t.data().iter().map(|x| x.as_f64()).collect();
        let t = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        match self.tensors.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = t,
            None => self.tensors.push((name.to_string(), t)),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn tensor<S: Scalar>(&self, name: &str) -> Result<Tensor<S>> {
        let (_, t) = self
            .tensors
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| S::lit(x)).collect())
    }

    /// Store a network as `<prefix>.<layer>.weight` / `<prefix>.<layer>.bias`.
    pub fn insert_mlp<S: Scalar>(&mut self, prefix: &str, net: &Mlp<S>) {
        for (i, layer) in net.layers().iter().enumerate() {
            self.insert(&format!("{prefix}.{i}.weight"), &layer.weight);
            self.insert(&format!("{prefix}.{i}.bias"), &layer.bias);
        }
    }

    pub fn mlp<S: Scalar>(&self, prefix: &str, activation: Activation) -> Result<Mlp<S>> {
        let mut layers = Vec::new();
        while self.names().any(|n| n == format!("{prefix}.{}.weight", layers.len())) {
            let i = layers.len();
            let weight = self.tensor(&format!("{prefix}.{i}.weight"))?;
            let bias = self.tensor(&format!("{prefix}.{i}.bias"))?;
            if weight.shape().len() != 2 || bias.len() != weight.cols() {
                return Err(Error::Checkpoint(format!(
                    "tensor {prefix}.{i}.bias has shape {:?}, weight is {:?}",
                    bias.shape(),
                    weight.shape()
                )));
            }
            layers.push(Linear { weight, bias });
        }
        if layers.is_empty() {
            return Err(Error::Checkpoint(format!("missing tensor {prefix}.0.weight")));
        }
        Mlp::from_layers(layers, activation)
            .map_err(|e| Error::Checkpoint(format!("network {prefix}: {e}")))
    }

    /// Overwrite `net` in place; every tensor must already match its shape.
    pub fn load_into<S: Scalar>(&self, prefix: &str, net: &mut Mlp<S>) -> Result<()> {
        let loaded = self.mlp::<S>(prefix, net.activation())?;
        for (i, (dst, src)) in net.params_mut().zip(loaded.params()).enumerate() {
            if dst.shape() != src.shape() {
                let kind = if i % 2 == 0 { "weight" } else { "bias" };
                return Err(Error::Checkpoint(format!(
                    "tensor {prefix}.{}.{kind}: expected {:?}, found {:?}",
                    i / 2,
                    dst.shape(),
                    src.shape()
                )));
            }
            *dst = src.clone();
        }
        if net.layers().len() != loaded.layers().len() {
            return Err(Error::Checkpoint(format!(
                "network {prefix}: expected {} layers, found {}",
                net.layers().len(),
                loaded.layers().len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "{MAGIC}").expect("vec write");
        for (k, v) in &self.meta {
            check_token(k, "meta key")?;
            if v.contains('\n') {
                return Err(Error::Checkpoint(format!("meta value for {k} spans lines")));
            }
            writeln!(out, "meta {k} {v}").expect("vec write");
        }
        for (name, t) in &self.tensors {
            check_token(name, "tensor name")?;
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            writeln!(out, "tensor {name} {} {}", t.shape().len(), dims.join(" "))
                .expect("vec write");
        }
        writeln!(out, "end").expect("vec write");
        for (_, t) in &self.tensors {
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header".into()))?;
            pos += nl + 1;
            std::str::from_utf8(&rest[..nl]).map_err(|_| bad("header is not UTF-8".into()))
        };
        if next_line()? != MAGIC {
            return Err(bad("not a checkpoint (bad magic line)".into()));
        }
        let mut ck = Checkpoint::new();
        let mut layout: Vec<(String, Vec<usize>)> = Vec::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ck.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split_whitespace();
                let name = parts.next().ok_or_else(|| bad(format!("bad line {line:?}")))?;
                let nums: Vec<usize> = parts
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(format!("tensor {name}: bad shape")))?;
                match nums.split_first() {
                    Some((&ndim, dims)) if dims.len() == ndim => {
                        layout.push((name.to_string(), dims.to_vec()))
                    }
                    _ => return Err(bad(format!("tensor {name}: bad shape"))),
                }
            } else {
                return Err(bad(format!("unrecognised header line {line:?}")));
            }
        }
        let mut payload = &bytes[pos..];
        for (name, shape) in layout {
            let n: usize = shape.iter().product();
            if payload.len() < n * 8 {
                return Err(bad(format!("tensor {name}: payload truncated")));
            }
            let data = payload[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            payload = &payload[n * 8..];
            ck.tensors.push((name, Tensor::new(shape, data)?));
        }
        if !payload.is_empty() {
            return Err(bad(format!("{} trailing payload bytes", payload.len())));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
