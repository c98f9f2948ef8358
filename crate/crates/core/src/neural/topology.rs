use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize, stride: usize },
    Dense { units: usize, bias: bool },
    Relu,
}

/// Input shape plus an ordered layer list.
///
/// Textual form (used in checkpoints and configs):
/// `in=4x32x32;conv8k4s2;relu;conv16k3s1;relu;dense64;relu;dense4`.
/// A dense layer without bias is written `dense4nb`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub layers: Vec<LayerSpec>,
}

impl Topology {
    /// conv 8@4x4/2 -> relu -> conv 16@3x3/1 -> relu -> dense 64 -> relu -> dense `actions`.
    pub fn toy(history: usize, height: usize, width: usize, actions: usize) -> Self {
        Self {
            channels: history,
            height,
            width,
            layers: vec![
                LayerSpec::Conv { filters: 8, kernel: 4, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::Conv { filters: 16, kernel: 3, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 64, bias: true },
                LayerSpec::Relu,
                LayerSpec::Dense { units: actions, bias: true },
            ],
        }
    }

    /// A single bias-free dense layer: with one-hot inputs each weight is one
    /// table entry.
    pub fn linear(inputs: usize, actions: usize) -> Self {
        Self {
            channels: 1,
            height: 1,
            width: inputs,
            layers: vec![LayerSpec::Dense { units: actions, bias: false }],
        }
    }

    /// Named topologies accepted by the CLI: `toy`, `linear`, or a full descriptor.
    pub fn named(name: &str, history: usize, height: usize, width: usize, actions: usize) -> Result<Self> {
        match name {
            "toy" => Ok(Self::toy(history, height, width, actions)),
            "linear" => Ok(Self::linear(history * height * width, actions)),
            other => Self::parse(other),
        }
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn parse(desc: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("topology `{desc}`: {msg}"));
        let mut tokens = desc.split([';', ' ']).filter(|t| !t.is_empty());
        let head = tokens.next().ok_or_else(|| bad("empty".into()))?;
        let dims = head
            .strip_prefix("in=")
            .ok_or_else(|| bad("must start with in=CxHxW".into()))?;
        let dims: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| bad(format!("bad dimension `{d}`"))))
            .collect::<Result<_>>()?;
        let [channels, height, width] = dims[..] else {
            return Err(bad("input needs three dimensions".into()));
        };
        let mut layers = Vec::new();
        for t in tokens {
            let layer = if t == "relu" {
                LayerSpec::Relu
            } else if let Some(rest) = t.strip_prefix("conv") {
                let (f, rest) = rest.split_once('k').ok_or_else(|| bad(format!("bad conv `{t}`")))?;
                let (k, s) = rest.split_once('s').ok_or_else(|| bad(format!("bad conv `{t}`")))?;
                let num = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad conv `{t}`")));
                LayerSpec::Conv { filters: num(f)?, kernel: num(k)?, stride: num(s)? }
            } else if let Some(rest) = t.strip_prefix("dense") {
                let (units, bias) = match rest.strip_suffix("nb") {
                    Some(u) => (u, false),
                    None => (rest, true),
                };
                let units = units.parse().map_err(|_| bad(format!("bad dense `{t}`")))?;
                LayerSpec::Dense { units, bias }
            } else {
                return Err(bad(format!("unknown layer `{t}`")));
            };
            layers.push(layer);
        }
        Ok(Self { channels, height, width, layers })
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in={}x{}x{}", self.channels, self.height, self.width)?;
        for l in &self.layers {
            match l {
                LayerSpec::Conv { filters, kernel, stride } => write!(f, ";conv{filters}k{kernel}s{stride}")?,
                LayerSpec::Dense { units, bias: true } => write!(f, ";dense{units}")?,
                LayerSpec::Dense { units, bias: false } => write!(f, ";dense{units}nb")?,
                LayerSpec::Relu => write!(f, ";relu")?,
            }
        }
        Ok(())
    }
}
