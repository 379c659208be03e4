//! JSON report layout. Reals are written as `{:.16e}` strings (17
//! significant digits) so reports compare byte-for-byte.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::audit::{IdentityCheck, ReadingOverrides};
use crate::tensor::Dense;

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn reals(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| real(*x)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub meta: Meta,
    pub checks: Vec<CheckEntry>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<Vec<InvariantEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathEntry>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario_digest: String,
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<String>,
    pub curvature: &'static str,
    pub theta: u8,
    pub grid: GridMeta,
    /// Each ambiguous formula: the fixed reading, or `auto` when every
    /// reading is evaluated and the best one kept.
    pub readings: BTreeMap<&'static str, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub count: usize,
    pub seed: u64,
}

pub fn readings_meta(r: &ReadingOverrides) -> BTreeMap<&'static str, String> {
    fn show<R: ToString>(v: Option<R>) -> String {
        v.map_or_else(|| "auto".to_string(), |r| r.to_string())
    }
    BTreeMap::from([
        ("pairing", show(r.pairing)),
        ("contraction", show(r.contraction)),
        ("rho", show(r.rho)),
        ("nu_hat", show(r.nu_hat)),
        ("ricci_trace", show(r.ricci_trace)),
        ("weyl_trace", show(r.weyl_trace)),
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct AlternativeEntry {
    pub reading: String,
    pub residual: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub id: String,
    pub label: &'static str,
    pub layer: &'static str,
    pub residual: String,
    pub tolerance: String,
    pub pass: bool,
    pub inherited: bool,
    pub argmax_point: Vec<String>,
    pub argmax_index: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reading: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<AlternativeEntry>,
}

impl From<&IdentityCheck<f64>> for CheckEntry {
    fn from(c: &IdentityCheck<f64>) -> Self {
        CheckEntry {
            id: c.id.to_string(),
            label: c.eq_ref,
            layer: c.layer.name(),
            residual: real(c.residual),
            tolerance: real(c.tolerance),
            pass: c.pass,
            inherited: c.inherited,
            argmax_point: reals(&c.argmax_point),
            argmax_index: c.argmax_index.clone(),
            reading: c.reading.clone(),
            alternatives: c
                .alternatives
                .iter()
                .map(|a| AlternativeEntry {
                    reading: a.reading.clone(),
                    residual: real(a.residual),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub status: &'static str,
    pub total: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    pub message: String,
}

/// Components in storage order with the valence needed to read them.
#[derive(Debug, Clone, Serialize)]
pub struct TensorEntry {
    pub upper: usize,
    pub lower: usize,
    pub values: Vec<String>,
}

impl TensorEntry {
    pub fn new(d: &Dense<f64>, upper: usize) -> Self {
        TensorEntry {
            upper,
            lower: d.rank() - upper,
            values: reals(d.data()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantEntry {
    pub point: Vec<String>,
    pub thomas: TensorEntry,
    pub u: TensorEntry,
    pub f_script: TensorEntry,
    pub weyl: TensorEntry,
    /// `max |ω^i_{jk} - ω^i_{kj}|`.
    pub omega_asymmetry: String,
    pub omega_symmetric: bool,
    /// `max |𝒯̄ - 𝒯|` and `max |𝒲̄ - 𝒲|` at this point.
    pub thomas_gap: String,
    pub weyl_gap: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<ExtraInvariants>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtraInvariants {
    pub t1: MaybeTensor,
    pub t2hat: BTreeMap<&'static str, TensorEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathEntry {
    pub x0: Vec<String>,
    pub l0: Vec<String>,
    pub t_end: String,
    pub steps: usize,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_defect: Option<String>,
    pub tolerance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum MaybeTensor {
    Tensor(TensorEntry),
    Undefined { undefined: String },
}
