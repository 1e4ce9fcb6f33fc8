//! Evidence for a convergent reciprocal series `Σ 1/λ_i`.

use alloc::format;
use serde::{Deserialize, Serialize};

use super::{CertificateKind, CertificateReport, EvidenceRow, Relation, Verdict, GRID_CAVEAT};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::rates::{pathological_slot, PathologicalSlot, RateSequence, DEFAULT_MAX_INDEX};

/// Declared analytic minorant used to bound the unseen tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailBound {
    /// `λ_i >= c i^p` for every `i`, with `p > 1`.
    PowerMinorant { c: f64, p: f64 },
}

const MINORANT_TOL: f64 = 1e-12;

pub(crate) fn validate_grid(grid: &[u64]) -> Result<()> {
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::InvalidParameter("grid must be non-empty with indices >= 1".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Partial sums `S_n` and doubling increments `S_n - S_{n/2}` on `grid`;
/// certifies explosion only under a declared [`TailBound`] that is verified
/// termwise on the whole prefix.
pub fn check_condition_i(seq: &RateSequence, grid: &[u64], tail: Option<TailBound>) -> Result<CertificateReport> {
    validate_grid(grid)?;
    seq.validate()?;
    let last = *grid.last().unwrap();
    if last > DEFAULT_MAX_INDEX {
        return Err(Error::IndexCap { index: last, max: DEFAULT_MAX_INDEX });
    }
    let mut report = CertificateReport::new(CertificateKind::ReciprocalSeries);
    report.param("n_max", last as f64);

    // S at every grid point and at every grid point halved.
    let mut probes: alloc::vec::Vec<u64> = grid.iter().flat_map(|&n| [n, n / 2]).filter(|&n| n > 0).collect();
    probes.sort_unstable();
    probes.dedup();

    let mut minorant = match tail {
        Some(TailBound::PowerMinorant { c, p }) => {
            if !(c > 0.0 && c.is_finite() && p > 1.0 && p.is_finite()) {
                return Err(Error::InvalidParameter("power minorant needs c > 0 and p > 1".into()));
            }
            report.param("minorant_c", c);
            report.param("minorant_p", p);
            Some((libm::log2(c), p, f64::INFINITY, 0u64))
        }
        None => None,
    };

    let mut sums = alloc::vec::Vec::with_capacity(probes.len());
    let mut s = CompensatedSum::new();
    let mut boundaries = 0u64;
    let mut next = 0;
    for i in 1..=last {
        let l = seq.rate_log2(i)?;
        s.add(l.reciprocal());
        if let Some((lc, p, ref mut min, ref mut at)) = minorant {
            let margin = l.get() - (lc + p * libm::log2(i as f64));
            if margin < *min {
                *min = margin;
                *at = i;
            }
        }
        if matches!(seq, RateSequence::Pathological) {
            if let PathologicalSlot::Boundary(_) = pathological_slot(i)? {
                boundaries += 1;
            }
        }
        if probes[next] == i {
            sums.push((i, s.value(), boundaries));
            next += 1;
            if next == probes.len() {
                break;
            }
        }
    }
    let at = |n: u64| sums.iter().find(|x| x.0 == n).copied();

    let mut prev_inc = None;
    let mut growing = false;
    for &n in grid {
        let (_, sn, b) = at(n).unwrap();
        report.evidence.push(EvidenceRow::info("partial_sum", Some(n), sn));
        if n >= 2 {
            let inc = sn - at(n / 2).unwrap().1;
            report.evidence.push(EvidenceRow::info("doubling_increment", Some(n), inc));
            if let Some(p) = prev_inc {
                growing = inc >= p;
            }
            prev_inc = Some(inc);
        }
        if matches!(seq, RateSequence::Pathological) {
            report.evidence.push(EvidenceRow::check("partial_sum_vs_boundaries", Some(n), sn, Relation::Ge, b as f64));
        }
    }
    let s_last = at(last).unwrap().1;

    if matches!(seq, RateSequence::Pathological) {
        report.notes.push("divergent: every boundary index contributes 1 to the partial sum".into());
    } else if growing {
        report.notes.push("divergent: doubling increments do not shrink".into());
    } else {
        report.notes.push("doubling increments shrink on the grid".into());
    }

    match minorant {
        Some((lc, p, min, at_i)) => {
            report.evidence.push(EvidenceRow::check("minorant_margin_log2", Some(at_i), min, Relation::Ge, -MINORANT_TOL));
            let tail_log2 = (1.0 - p) * libm::log2(last as f64) - lc - libm::log2(p - 1.0);
            let tail_bound = libm::exp2(tail_log2);
            report.evidence.push(EvidenceRow::info("tail_bound", Some(last), tail_bound));
            report.evidence.push(EvidenceRow::check("series_upper_bound", Some(last), s_last + tail_bound, Relation::Lt, f64::INFINITY));
            report.notes.push(format!("minorant verified on 1..={last} and assumed beyond"));
            report.notes.push(GRID_CAVEAT.into());
            if min < -MINORANT_TOL {
                report.fail("tail_bound_prefix", Some(at_i));
            }
        }
        None => report.fail("no_tail_bound", Some(last)),
    }
    if let Some(bad) = report.evidence.iter().find(|r| !r.holds) {
        let (name, index) = (bad.name.clone(), bad.index);
        report.fail(&name, index);
    }
    report.verdict =
        if report.failed_stage.is_none() { Verdict::ExplosionCertified } else { Verdict::Inconclusive };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::log_grid;

    #[test]
    fn inverse_squares_certified() {
        let grid = log_grid(10, 100_000, 4);
        let r = check_condition_i(&RateSequence::Power { p: 2.0 }, &grid, Some(TailBound::PowerMinorant { c: 1.0, p: 2.0 }))
            .unwrap();
        assert_eq!(r.verdict, Verdict::ExplosionCertified);
        let s = r.rows("partial_sum").last().unwrap().value;
        assert!((s - (core::f64::consts::PI.powi(2) / 6.0 - 1.0 / 100_000.0)).abs() < 1e-9);
        let incs: alloc::vec::Vec<f64> = r.rows("doubling_increment").map(|x| x.value).collect();
        assert!(incs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constant_is_divergent() {
        let r = check_condition_i(&RateSequence::Constant { c: 1.0 }, &[10, 100, 1000], None).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.rows("partial_sum").last().unwrap().value, 1000.0);
        assert!(r.notes[0].starts_with("divergent"));
    }

    #[test]
    fn wrong_minorant_fails() {
        let r = check_condition_i(&RateSequence::Power { p: 1.5 }, &[10, 100], Some(TailBound::PowerMinorant { c: 1.0, p: 2.0 }))
            .unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.failed_stage.unwrap().stage, "tail_bound_prefix");
    }

    #[test]
    fn pathological_counts_boundaries() {
        let r = check_condition_i(&RateSequence::Pathological, &[10, 1000, 300_000], None).unwrap();
        assert!(r.rows("partial_sum_vs_boundaries").all(|x| x.holds));
        assert!(r.notes[0].starts_with("divergent"));
        let s = r.rows("partial_sum").last().unwrap().value;
        assert!((5.0..5.001).contains(&s), "{s}");
    }
}
