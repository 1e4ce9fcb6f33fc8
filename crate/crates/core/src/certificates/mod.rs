//! Finite, auditable evidence for the explosion and non-explosion criteria.
//!
//! Each check returns a [`CertificateReport`]: a verdict plus every
//! inequality that was evaluated, with the index it was evaluated at. Grid
//! evidence never proves an asymptotic statement; reports carry that caveat.

mod counterexample;
mod crosscheck;
mod explosion;
mod nonexplosion;
mod window;

pub use counterexample::{
    counterexample_certificate, partition_ab, Counterexample, CounterexampleRow, PartitionAB, I_MAX_BUDGET,
};
pub use crosscheck::{certificate_vs_simulation, Consistency, ConsistencySummary};
pub use explosion::{check_condition_i, TailBound};
pub use nonexplosion::{check_condition_ii, check_condition_ii_dominated, ParamTriple, SearchBudget};
pub use window::{iterated_log_window, min_window_index, WindowRow};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub const GRID_CAVEAT: &str =
    "finite-grid evidence: asymptotic hypotheses are extrapolated from the checked indices, not proved";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ExplosionCertified,
    NonExplosionCertified,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Convergent reciprocal series.
    ReciprocalSeries,
    /// Rate growth plus window-sum condition.
    WindowCondition,
    /// Window condition on a dominating sequence.
    WindowConditionDominated,
    /// Bound chain for the pathological rates.
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    /// Recorded for the audit trail, not a pass/fail inequality.
    #[serde(rename = "info")]
    Info,
}

impl Relation {
    pub fn check(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Le => value <= threshold,
            Relation::Lt => value < threshold,
            Relation::Ge => value >= threshold,
            Relation::Gt => value > threshold,
            Relation::Info => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub name: String,
    pub index: Option<u64>,
    pub value: f64,
    pub relation: Relation,
    pub threshold: Option<f64>,
    pub holds: bool,
}

impl EvidenceRow {
    pub fn check(name: &str, index: Option<u64>, value: f64, relation: Relation, threshold: f64) -> Self {
        Self {
            name: name.into(),
            index,
            value,
            relation,
            threshold: Some(threshold),
            holds: relation.check(value, threshold),
        }
    }

    pub fn info(name: &str, index: Option<u64>, value: f64) -> Self {
        Self { name: name.into(), index, value, relation: Relation::Info, threshold: None, holds: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub certificate: CertificateKind,
    pub verdict: Verdict,
    pub parameters: Vec<Parameter>,
    pub evidence: Vec<EvidenceRow>,
    /// Stage that blocked a certified verdict, with its witness index.
    pub failed_stage: Option<FailedStage>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedStage {
    pub stage: String,
    pub witness_index: Option<u64>,
}

impl CertificateReport {
    pub(crate) fn new(certificate: CertificateKind) -> Self {
        Self {
            certificate,
            verdict: Verdict::Inconclusive,
            parameters: Vec::new(),
            evidence: Vec::new(),
            failed_stage: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn param(&mut self, name: &str, value: f64) {
        self.parameters.push(Parameter { name: name.into(), value });
    }

    pub(crate) fn fail(&mut self, stage: &str, witness_index: Option<u64>) {
        if self.failed_stage.is_none() {
            self.failed_stage = Some(FailedStage { stage: stage.into(), witness_index });
        }
    }

    pub fn rows<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a EvidenceRow> + 'a {
        self.evidence.iter().filter(move |r| r.name == name)
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Log-spaced integer grid from `lo` to `hi` inclusive, `per_decade` points
/// per factor of ten, deduplicated.
pub fn log_grid(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    assert!(lo >= 1 && lo <= hi && per_decade >= 1);
    let (a, b) = (libm::log10(lo as f64), libm::log10(hi as f64));
    let steps = libm::ceil((b - a) * per_decade as f64) as u64;
    let mut out: Vec<u64> = (0..=steps)
        .map(|s| {
            let x = a + (b - a) * s as f64 / steps.max(1) as f64;
            (libm::round(libm::pow(10.0, x)) as u64).clamp(lo, hi)
        })
        .collect();
    out.push(hi);
    out.sort_unstable();
    out.dedup();
    out
}

/// `⌈ε log n⌉`, at least 1.
pub(crate) fn window_start(eps: f64, n: u64) -> u64 {
    (libm::ceil(eps * libm::log(n as f64)) as u64).max(1)
}
