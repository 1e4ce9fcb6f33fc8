//! Flags disagreements between a certificate verdict and an explosion probe.
//! Advisory only: the certificate is never overridden.

use alloc::format;
use alloc::string::String;
use serde::{Deserialize, Serialize};

use super::{CertificateReport, Verdict};
use crate::cmj::ProbeTable;

/// Probability level separating explosive-like from non-explosive-like runs.
const SIGNAL_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    Contradiction,
    NoSimulationEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub verdict: Verdict,
    pub consistency: Consistency,
    /// `P̂{τ_N <= T}` at the smallest horizon.
    pub early_mass: Option<f64>,
    /// `P̂{τ_N <= T}` at the largest horizon.
    pub late_mass: Option<f64>,
    pub message: String,
}

pub fn certificate_vs_simulation(report: &CertificateReport, probe: Option<&ProbeTable>) -> ConsistencySummary {
    let verdict = report.verdict;
    let rows = probe.filter(|p| p.replicates > 0 && !p.rows.is_empty()).map(|p| {
        let mut rows = p.rows.clone();
        rows.sort_by(|a, b| a.horizon.total_cmp(&b.horizon));
        (p, rows)
    });
    let Some((p, rows)) = rows else {
        return ConsistencySummary {
            verdict,
            consistency: Consistency::NoSimulationEvidence,
            early_mass: None,
            late_mass: None,
            message: "no simulation evidence".into(),
        };
    };
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let explosive_like = first.probability >= SIGNAL_LEVEL;
    let calm_like = last.probability <= SIGNAL_LEVEL;
    let (consistency, message) = match verdict {
        Verdict::NonExplosionCertified if explosive_like => (
            Consistency::Contradiction,
            format!(
                "non-explosion certified but P(tau_{} <= {}) = {:.3}; review",
                p.population, first.horizon, first.probability
            ),
        ),
        Verdict::ExplosionCertified if calm_like => (
            Consistency::Contradiction,
            format!(
                "explosion certified but P(tau_{} <= {}) = {:.3}; review",
                p.population, last.horizon, last.probability
            ),
        ),
        _ => (
            Consistency::Consistent,
            format!(
                "probe P(tau_{} <= T) ranges {:.3}..{:.3} over T in [{}, {}]",
                p.population, first.probability, last.probability, first.horizon, last.horizon
            ),
        ),
    };
    ConsistencySummary {
        verdict,
        consistency,
        early_mass: Some(first.probability),
        late_mass: Some(last.probability),
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{CertificateKind, CertificateReport};
    use crate::cmj::ProbeRow;

    fn report(v: Verdict) -> CertificateReport {
        let mut r = CertificateReport::new(CertificateKind::ReciprocalSeries);
        r.verdict = v;
        r
    }

    fn probe(ps: &[(f64, f64)]) -> ProbeTable {
        ProbeTable {
            population: 100,
            replicates: 100,
            rows: ps.iter().map(|&(h, p)| ProbeRow { horizon: h, probability: p, std_error: 0.0 }).collect(),
            cap_fraction: 0.0,
        }
    }

    #[test]
    fn flags() {
        let s = certificate_vs_simulation(&report(Verdict::ExplosionCertified), None);
        assert_eq!(s.consistency, Consistency::NoSimulationEvidence);
        assert_eq!(s.message, "no simulation evidence");
        let fast = probe(&[(10.0, 1.0), (1.0, 0.99)]);
        let slow = probe(&[(1.0, 0.0), (10.0, 0.1)]);
        let c = |v, p: &ProbeTable| certificate_vs_simulation(&report(v), Some(p)).consistency;
        assert_eq!(c(Verdict::ExplosionCertified, &fast), Consistency::Consistent);
        assert_eq!(c(Verdict::NonExplosionCertified, &fast), Consistency::Contradiction);
        assert_eq!(c(Verdict::ExplosionCertified, &slow), Consistency::Contradiction);
        assert_eq!(c(Verdict::Inconclusive, &slow), Consistency::Consistent);
    }
}
