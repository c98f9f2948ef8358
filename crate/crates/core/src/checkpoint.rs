//! Network checkpoint files.
//!
//! Layout: the 8-byte magic `DQNCKPT\0`, a little-endian `u32` format
//! version, a little-endian `u32` header length, a UTF-8 header of
//! `key=value` lines, then the parameters followed by the optimizer's
//! mean-square and momentum arrays, each value a little-endian `f64`.
//! Header keys: `topology`, `scalar`, `params`, `optimizer`, `mean_square`,
//! `momentum`, `step`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neural::{QNetwork, Topology};
use crate::optim::{Optimizer, Variant};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"DQNCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub topology: Topology,
    /// Element type of the network that was saved (`f32` or `f64`).
    pub scalar: String,
    pub step: u64,
    pub params: Vec<f64>,
    pub optimizer: Option<Variant>,
    pub mean_square: Vec<f64>,
    pub momentum: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn capture<F: Scalar>(net: &QNetwork<F>, optimizer: Option<&Optimizer<F>>, step: u64) -> Self {
        let widen = |v: &[F]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        Self {
            topology: net.topology().clone(),
            scalar: F::NAME.to_string(),
            step,
            params: widen(net.params()),
            optimizer: optimizer.map(|o| o.config.variant),
            mean_square: optimizer.map(|o| widen(&o.state.mean_square)).unwrap_or_default(),
            momentum: optimizer.map(|o| widen(&o.state.momentum)).unwrap_or_default(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!(
            "topology={}\nscalar={}\nparams={}\noptimizer={}\nmean_square={}\nmomentum={}\nstep={}\n",
            self.topology,
            self.scalar,
            self.params.len(),
            self.optimizer.map_or("none", Variant::name),
            self.mean_square.len(),
            self.momentum.len(),
            self.step,
        );
        let n = self.params.len() + self.mean_square.len() + self.momentum.len();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for v in self.params.iter().chain(&self.mean_square).chain(&self.momentum) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body_start = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header = std::str::from_utf8(&bytes[16..body_start]).map_err(|_| bad("header is not UTF-8"))?;

        let mut fields = std::collections::HashMap::new();
        for line in header.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("header is missing `{k}`")));
        let count = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad `{k}` count"))) };

        let topology = Topology::parse(get("topology")?)?;
        let scalar = get("scalar")?.to_string();
        let step = get("step")?.parse().map_err(|_| bad("bad step"))?;
        let optimizer = match get("optimizer")? {
            "none" => None,
            name => Some(name.parse()?),
        };
        let (np, nms, nmom) = (count("params")?, count("mean_square")?, count("momentum")?);

        let body = &bytes[body_start..];
        let total = np.checked_add(nms).and_then(|n| n.checked_add(nmom)).ok_or_else(|| bad("counts overflow"))?;
        if body.len() != total.checked_mul(8).ok_or_else(|| bad("counts overflow"))? {
            return Err(bad(format!("expected {} value bytes, found {}", total * 8, body.len())));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let params: Vec<f64> = values.by_ref().take(np).collect();
        let mean_square: Vec<f64> = values.by_ref().take(nms).collect();
        let momentum: Vec<f64> = values.collect();

        let expected = QNetwork::<f64>::new(topology.clone())?.num_params();
        if params.len() != expected {
            return Err(bad(format!("topology needs {expected} parameters, file has {}", params.len())));
        }
        Ok(Self { topology, scalar, step, params, optimizer, mean_square, momentum })
    }

    /// Writes via a temporary file and rename, so readers never see a torn file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn to_network<F: Scalar>(&self) -> Result<QNetwork<F>> {
        let mut net = QNetwork::new(self.topology.clone())?;
        let values: Vec<F> = self.params.iter().map(|&v| F::of(v)).collect();
        net.load_slice(&values)?;
        Ok(net)
    }

    /// Restores optimizer state saved with the same variant and size.
    pub fn restore_optimizer<F: Scalar>(&self, optimizer: &mut Optimizer<F>) -> Result<()> {
        if self.optimizer != Some(optimizer.config.variant) {
            return Err(bad(format!(
                "checkpoint optimizer {:?} does not match {}",
                self.optimizer.map(Variant::name),
                optimizer.config.variant
            )));
        }
        let state = &mut optimizer.state;
        if state.mean_square.len() != self.mean_square.len() || state.momentum.len() != self.momentum.len() {
            return Err(bad("optimizer state size mismatch"));
        }
        for (d, &s) in state.mean_square.iter_mut().zip(&self.mean_square) {
            *d = F::of(s);
        }
        for (d, &s) in state.momentum.iter_mut().zip(&self.momentum) {
            *d = F::of(s);
        }
        Ok(())
    }
}
