//! Versioned flat binary format for learned Q-functions.
//!
//! Layout (little-endian):
//! `"EBEQ1"`, kind `u8` (0 table, 1 network), then
//! * table: `states u64`, `actions u64`, `alpha f64`, `gamma f64`,
//!   `states` terminal flags (`u8`), `states × actions` values (row-major `f64`);
//! * network: `layers u64`, then per layer `inputs u64`, `outputs u64`,
//!   activation `u8`, `inputs × outputs` weights (row-major by input, `f64`),
//!   `outputs` biases (`f64`).

use std::path::Path;

use super::mlp::{Activation, Dense, Mlp, Workspace};
use super::tabular::QTable;
use crate::envs::Environment;
use crate::error::{EbeError, Result};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 5] = b"EBEQ1";
const KIND_TABLE: u8 = 0;
const KIND_NETWORK: u8 = 1;
const MAX_DIM: u64 = 1 << 24;

/// A learned Q-function of either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum QModel<F> {
    Table(QTable<F>),
    Network(Mlp<F>),
}

impl<F: Scalar> QModel<F> {
    /// Q-values in the environment's current state.
    pub fn q_values(&self, env: &dyn Environment, ws: &mut Workspace<F>) -> Result<Vec<F>> {
        match self {
            Self::Table(t) => {
                let s = env
                    .state_index()
                    .ok_or_else(|| EbeError::ModelFormat("tabular model needs an enumerable environment".into()))?;
                if s >= t.states() {
                    return Err(EbeError::DimensionMismatch { expected: t.states(), got: s + 1 });
                }
                Ok(t.row(s).to_vec())
            }
            Self::Network(n) => {
                let obs: Vec<F> = env.observe().into_iter().map(F::lit).collect();
                Ok(n.forward_with(&obs, ws)?.to_vec())
            }
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Self::Table(t) => t.actions(),
            Self::Network(n) => n.output_dim(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MODEL_MAGIC.to_vec();
        let put_u64 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u64).to_le_bytes());
        let put_f = |out: &mut Vec<u8>, v: F| out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        match self {
            Self::Table(t) => {
                out.push(KIND_TABLE);
                put_u64(&mut out, t.states());
                put_u64(&mut out, t.actions());
                put_f(&mut out, t.alpha());
                put_f(&mut out, t.gamma());
                out.extend((0..t.states()).map(|s| u8::from(t.is_terminal_row(s))));
                t.values().iter().for_each(|&v| put_f(&mut out, v));
            }
            Self::Network(n) => {
                out.push(KIND_NETWORK);
                put_u64(&mut out, n.layers().len());
                for l in n.layers() {
                    put_u64(&mut out, l.inputs());
                    put_u64(&mut out, l.outputs());
                    out.push(l.activation().tag());
                    l.weights().iter().chain(l.bias()).for_each(|&v| put_f(&mut out, v));
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(5)? != MODEL_MAGIC {
            return Err(EbeError::ModelFormat("bad magic bytes".into()));
        }
        let model = match r.u8()? {
            KIND_TABLE => {
                let states = r.dim()?;
                let actions = r.dim()?;
                let alpha = r.f()?;
                let gamma = r.f()?;
                let terminal: Vec<usize> =
                    (0..states).map(|s| r.u8().map(|b| (s, b))).collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .filter_map(|(s, b)| (b != 0).then_some(s))
                        .collect();
                let values = (0..states * actions).map(|_| r.f()).collect::<Result<Vec<F>>>()?;
                Self::Table(QTable::from_values(states, actions, values, alpha, gamma)?.with_terminal_rows(&terminal)?)
            }
            KIND_NETWORK => {
                let count = r.dim()?;
                let mut layers = Vec::with_capacity(count);
                for _ in 0..count {
                    let inputs = r.dim()?;
                    let outputs = r.dim()?;
                    let act = Activation::from_tag(r.u8()?)
                        .ok_or_else(|| EbeError::ModelFormat("unknown activation tag".into()))?;
                    let weights = (0..inputs * outputs).map(|_| r.f()).collect::<Result<Vec<F>>>()?;
                    let bias = (0..outputs).map(|_| r.f()).collect::<Result<Vec<F>>>()?;
                    if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                        return Err(EbeError::ModelFormat("non-finite network parameter".into()));
                    }
                    layers.push(Dense::new(inputs, outputs, weights, bias, act)?);
                }
                Self::Network(Mlp::from_layers(layers)?)
            }
            k => return Err(EbeError::ModelFormat(format!("unknown model kind {k}"))),
        };
        if r.pos != bytes.len() {
            return Err(EbeError::ModelFormat("trailing bytes".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| EbeError::ModelFormat("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn dim(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        if v == 0 || v > MAX_DIM {
            return Err(EbeError::ModelFormat(format!("implausible dimension {v}")));
        }
        Ok(v as usize)
    }

    fn f<F: Scalar>(&mut self) -> Result<F> {
        Ok(F::lit(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"))))
    }
}
