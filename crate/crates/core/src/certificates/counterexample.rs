//! Bound chain showing that the pathological rates explode although their
//! reciprocal series diverges.
//!
//! Per evidence index `i` the chain uses `t_i = 2^{-i}`,
//! `M_i = i + Σ_{k<=i} d_k`, splits the arrivals up to `M_{i+1}` into the
//! unit-rate singles `S_0 ~ Γ(i+2, 1)` and the block sums
//! `S_k ~ Γ(d_k, α_k)`, and lower-bounds each factor in log2.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::LOG2_E;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{CertificateKind, CertificateReport, EvidenceRow, Relation, Verdict, GRID_CAVEAT};
use crate::error::{Error, Result};
use crate::purebirth::{gamma_lower_bound_log2, markov_bound_all_log2, GammaParams, MarkovBound};
use crate::rates::{alpha_log2, MAX_REPRESENTABLE_BLOCK};

/// Largest `i_max` accepted; `M_i` carries `2 i^2` bits.
pub const I_MAX_BUDGET: u64 = 1024;

const IDENTITY_TOL: f64 = 1e-9;

/// `2^{k^3}` is compared exactly while `k^3 < 60`; beyond that it exceeds
/// `2k^2 + k + i + 2` for every `i < 2^59`.
const SHORT_CIRCUIT_CUBE: u64 = 60;

fn cube(k: u64) -> u64 {
    k * k * k
}

/// `2^{k^3} >= 2k^2 + k + i + 2`.
fn in_a(k: u64, i: u64) -> bool {
    if cube(k) >= SHORT_CIRCUIT_CUBE {
        return true;
    }
    (1u128 << cube(k)) >= 2 * (k as u128).pow(2) + k as u128 + i as u128 + 2
}

/// `2^{k^3} <= 2k^2 + k + i + 1`.
fn in_b(k: u64, i: u64) -> bool {
    if cube(k) >= SHORT_CIRCUIT_CUBE {
        return false;
    }
    (1u128 << cube(k)) <= 2 * (k as u128).pow(2) + k as u128 + i as u128 + 1
}

/// Split of `{2, ..., i+1}` into the Markov-bounded blocks `A` and the
/// gamma-bounded blocks `B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionAB {
    pub i: u64,
    pub a_len: u64,
    pub b: Vec<u64>,
    /// `Σ_{k ∈ B} d_k`.
    pub d: u64,
}

impl PartitionAB {
    pub fn contains_a(&self, k: u64) -> bool {
        (2..=self.i + 1).contains(&k) && in_a(k, self.i)
    }

    pub fn contains_b(&self, k: u64) -> bool {
        (2..=self.i + 1).contains(&k) && in_b(k, self.i)
    }
}

/// Only `k <= 3` can satisfy the `B` inequality below `i = 2^59`, so the
/// partition is assembled from at most two exact comparisons.
pub fn partition_ab(i: u64) -> PartitionAB {
    let small_max = (i + 1).min(3);
    let b: Vec<u64> = (2..=small_max).filter(|&k| in_b(k, i)).collect();
    let small_a = (2..=small_max).filter(|&k| in_a(k, i)).count() as u64;
    let a_len = small_a + (i + 1).saturating_sub(small_max);
    let d = b.iter().map(|&k| 1u64 << (2 * k * k)).sum();
    PartitionAB { i, a_len, b, d }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub i: u64,
    /// `M_i` in decimal while it has at most 128 bits.
    pub m_exact: Option<String>,
    pub m_log2: f64,
    pub m_exceeds_4_pow_i_sq: bool,
    pub a_len: u64,
    pub b: Vec<u64>,
    pub d: u64,
    /// Gamma bound on `P{S_0 <= 2^{-i-1}}`.
    pub s0_bound_log2: f64,
    /// `log2(i 3^{-i^2})`.
    pub s0_reference_log2: f64,
    /// Gamma bound on the `k = 1` factor.
    pub s1_gamma_log2: f64,
    /// Stated bound `-log2 e - 4i - 8` on the `k = 1` factor.
    pub first_block_log2: f64,
    /// Sum of the stated per-factor bounds over `k = 1..=i+1`.
    pub factor_sum_log2: f64,
    /// Closed form `-|A| - iD - 4i - 8 - (D+1) log2 e`.
    pub product_bound_log2: f64,
    /// `-iD - 5i - 8 - (D+1) log2 e`.
    pub product_bound_coarse_log2: f64,
    /// Sum of the sharper Markov and gamma bounds actually available.
    pub sharp_factor_sum_log2: f64,
    /// `i^2 log2(4/3) + factor_sum_log2`.
    pub mainprod_log2: f64,
    /// `log2(M_i / i) + s0_bound_log2 + factor_sum_log2`.
    pub main_log2: f64,
    /// `log2(d_{m+1} |B|)` with `m = ⌊(log2 i)^{1/3}⌋`, when `B` is non-empty.
    pub d_block_bound_log2: Option<f64>,
    /// `log2(4^{(c+1)^2} c)` with `c = (log2 i)^{1/3}`, when `B` is non-empty.
    pub d_outer_bound_log2: Option<f64>,
    /// `m + 2`, the block the argument expects outside `B`.
    pub k_star: u64,
    pub k_star_in_b: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub report: CertificateReport,
    pub rows: Vec<CounterexampleRow>,
}

fn biguint_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return libm::log2(x.iter_u64_digits().next().unwrap_or(0) as f64);
    }
    let top = x >> (bits - 64) as usize;
    (bits - 64) as f64 + libm::log2(top.iter_u64_digits().next().unwrap_or(0) as f64)
}

/// `m = max{m : m^3 <= log2 i}`, exact.
fn cube_root_floor_log2(i: u64) -> u64 {
    let fl = 63 - i.leading_zeros() as u64;
    let mut m = 0;
    while cube(m + 1) <= fl {
        m += 1;
    }
    m
}

/// `log2 α_k`, `+inf` past the representable blocks.
fn alpha_log2_or_inf(k: u64) -> f64 {
    if k > MAX_REPRESENTABLE_BLOCK {
        f64::INFINITY
    } else {
        alpha_log2(k).unwrap_or(f64::INFINITY)
    }
}

fn row_for(i: u64, m: &BigUint, report: &mut CertificateReport) -> CounterexampleRow {
    let ii = Some(i);
    let fi = i as f64;
    let four_pow = BigUint::from(1u32) << (2 * i * i) as usize;
    let exceeds = *m > four_pow;
    let excess_log2 = if exceeds { biguint_log2(&(m - &four_pow)) } else { f64::NEG_INFINITY };
    let m_log2 = biguint_log2(m);
    report.evidence.push(EvidenceRow {
        name: "m_minus_4_pow_i_sq_log2".into(),
        index: ii,
        value: excess_log2,
        relation: Relation::Gt,
        threshold: Some(f64::NEG_INFINITY),
        holds: exceeds,
    });

    let part = partition_ab(i);
    let overlap = (2..=(i + 1).min(4)).filter(|&k| part.contains_a(k) && part.contains_b(k)).count();
    report.evidence.push(EvidenceRow::check(
        "partition_size",
        ii,
        (part.a_len + part.b.len() as u64) as f64,
        Relation::Ge,
        fi,
    ));
    report.evidence.push(EvidenceRow::check("partition_overlap", ii, overlap as f64, Relation::Le, 0.0));

    let s0 = gamma_lower_bound_log2(&GammaParams { shape: i + 2, rate_log2: 0.0, threshold_log2: -fi - 1.0 });
    let s0_ref = libm::log2(fi) - fi * fi * libm::log2(3.0);
    report.evidence.push(EvidenceRow::info("s0_gamma_bound_log2", ii, s0));
    report.evidence.push(EvidenceRow::info("s0_dominance_margin_log2", ii, s0 - s0_ref));

    // k = 1: d = α = 4, threshold 2^{-i-2}, so y = 2^{-i}.
    let s1 = gamma_lower_bound_log2(&GammaParams { shape: 4, rate_log2: 2.0, threshold_log2: -fi - 2.0 });
    let p1 = -LOG2_E - 4.0 * fi - 8.0;
    report.evidence.push(EvidenceRow::check("first_block_y_log2", ii, -fi, Relation::Le, 0.0));
    report.evidence.push(EvidenceRow::check("first_block_gamma_log2", ii, s1, Relation::Ge, p1));

    let mut factors = Vec::with_capacity(4);
    let mut sharp = Vec::with_capacity(4);
    factors.push(p1);
    sharp.push(s1);

    // A: each stated bound is 1/2. The sharp Markov bound is 0 in f64 once
    // α_k overflows, so only k <= 10 needs evaluating.
    let mut markov_min = 0.0f64;
    for k in 2..=(i + 1).min(MAX_REPRESENTABLE_BLOCK + 1) {
        if !part.contains_a(k) {
            continue;
        }
        let kk = k as f64;
        let b = markov_bound_all_log2(2.0 * kk * kk, alpha_log2_or_inf(k), -kk - fi - 1.0);
        let v = match b {
            MarkovBound::Log2(v) => v,
            MarkovBound::Vacuous => f64::NEG_INFINITY,
        };
        markov_min = markov_min.min(v);
        sharp.push(v);
    }
    if part.a_len > 0 {
        report.evidence.push(EvidenceRow::check("markov_factor_min_log2", ii, markov_min, Relation::Ge, -1.0));
    }
    factors.push(-(part.a_len as f64));

    for &k in &part.b {
        let kk = k as f64;
        let dk = 1u64 << (2 * k * k);
        let d_log2 = 2.0 * kk * kk;
        let y_log2 = alpha_log2_or_inf(k) - kk - fi - 1.0;
        let ratio = y_log2 - d_log2;
        report.evidence.push(EvidenceRow::check(&alloc::format!("gamma_block_{k}_ratio_log2"), ii, ratio, Relation::Le, 0.0));
        report.evidence.push(EvidenceRow::check(&alloc::format!("gamma_block_{k}_ratio_log2"), ii, ratio, Relation::Ge, -fi));
        let stated = -(dk as f64) * LOG2_E - fi * dk as f64;
        let g = gamma_lower_bound_log2(&GammaParams {
            shape: dk,
            rate_log2: alpha_log2_or_inf(k),
            threshold_log2: -kk - fi - 1.0,
        });
        report.evidence.push(EvidenceRow::check(&alloc::format!("gamma_block_{k}_bound_log2"), ii, g, Relation::Ge, stated));
        factors.push(stated);
        sharp.push(g);
    }

    let factor_sum: f64 = factors.iter().sum();
    let sharp_sum: f64 = sharp.iter().sum();
    let dd = part.d as f64;
    let closed = -(part.a_len as f64) - fi * dd - 4.0 * fi - 8.0 - (dd + 1.0) * LOG2_E;
    let coarse = -fi * dd - 5.0 * fi - 8.0 - (dd + 1.0) * LOG2_E;
    report.evidence.push(EvidenceRow::check(
        "factor_product_identity",
        ii,
        libm::fabs(factor_sum - closed),
        Relation::Le,
        IDENTITY_TOL * (1.0 + libm::fabs(closed)),
    ));
    report.evidence.push(EvidenceRow::check("product_bound_coarse_log2", ii, closed, Relation::Ge, coarse));
    report.evidence.push(EvidenceRow::check("sharp_factors_log2", ii, sharp_sum, Relation::Ge, factor_sum));

    let mainprod = fi * fi * libm::log2(4.0 / 3.0) + factor_sum;
    let main = m_log2 - libm::log2(fi) + s0 + factor_sum;
    report.evidence.push(EvidenceRow::info("mainprod_log2", ii, mainprod));
    report.evidence.push(EvidenceRow::info("main_log2", ii, main));

    let mfl = cube_root_floor_log2(i);
    let k_star = mfl + 2;
    let k_star_in_b = in_b(k_star, i) && k_star <= i + 1;
    let (block_bound, outer) = if part.b.is_empty() {
        (None, None)
    } else {
        let blk = 2.0 * ((mfl + 1) * (mfl + 1)) as f64 + libm::log2(part.b.len() as f64);
        let c = libm::cbrt(libm::log2(fi));
        let outer = 2.0 * (c + 1.0) * (c + 1.0) + libm::log2(c);
        let d_log2 = libm::log2(dd);
        report.evidence.push(EvidenceRow::check("d_block_bound_log2", ii, d_log2, Relation::Le, blk));
        report.evidence.push(EvidenceRow::check("d_outer_bound_log2", ii, d_log2, Relation::Lt, outer));
        (Some(blk), Some(outer))
    };

    CounterexampleRow {
        i,
        m_exact: (m.bits() <= 128).then(|| m.to_string()),
        m_log2,
        m_exceeds_4_pow_i_sq: exceeds,
        a_len: part.a_len,
        b: part.b,
        d: part.d,
        s0_bound_log2: s0,
        s0_reference_log2: s0_ref,
        s1_gamma_log2: s1,
        first_block_log2: p1,
        factor_sum_log2: factor_sum,
        product_bound_log2: closed,
        product_bound_coarse_log2: coarse,
        sharp_factor_sum_log2: sharp_sum,
        mainprod_log2: mainprod,
        main_log2: main,
        d_block_bound_log2: block_bound,
        d_outer_bound_log2: outer,
        k_star,
        k_star_in_b,
    }
}

/// First index from which `values` (indexed from `i = 1`) stay positive and
/// strictly increasing through the end; `None` if the last value fails.
fn positive_increasing_from(values: &[f64]) -> Option<u64> {
    let n = values.len();
    if n == 0 || !(values[n - 1] > 0.0) {
        return None;
    }
    let mut start = n - 1;
    while start > 0 && values[start - 1] > 0.0 && values[start - 1] < values[start] {
        start -= 1;
    }
    Some(start as u64 + 1)
}

pub fn counterexample_certificate(i_max: u64) -> Result<Counterexample> {
    if i_max == 0 {
        return Err(Error::InvalidParameter("i_max must be at least 1".into()));
    }
    if i_max > I_MAX_BUDGET {
        return Err(Error::ExactBudget { i_max, budget: I_MAX_BUDGET });
    }
    let mut report = CertificateReport::new(CertificateKind::Counterexample);
    report.param("i_max", i_max as f64);
    report.notes.push("t_i = 2^-i, M_i = i + sum_{k<=i} d_k".into());
    report.notes.push(GRID_CAVEAT.into());

    let mut rows = Vec::with_capacity(i_max as usize);
    let mut m = BigUint::from(0u32);
    for i in 1..=i_max {
        m += BigUint::from(1u32) << (2 * i * i) as usize;
        m += 1u32;
        rows.push(row_for(i, &m, &mut report));
    }

    let k_star_violation = rows.iter().rev().find(|r| r.k_star_in_b).map(|r| r.i);
    report.param("k_star_outside_b_from", k_star_violation.map_or(1, |i| i + 1) as f64);
    if let Some(r) = rows.iter().find(|r| !r.b.is_empty()) {
        report.param("first_nonempty_b", r.i as f64);
    }

    let tail_start = i_max - i_max / 4;
    report.param("tail_start", tail_start as f64);

    let mainprod: Vec<f64> = rows.iter().map(|r| r.mainprod_log2).collect();
    let s0_margin: Vec<f64> = rows.iter().map(|r| r.s0_bound_log2 - r.s0_reference_log2).collect();
    let from = positive_increasing_from(&mainprod);
    let s0_from = positive_increasing_from(&s0_margin);

    for (label, series, idx) in [("mainprod", &mainprod, from), ("s0_dominance", &s0_margin, s0_from)] {
        match idx {
            Some(i0) => {
                report.param(&alloc::format!("{label}_positive_increasing_from"), i0 as f64);
                for i in i0..=i_max {
                    let v = series[(i - 1) as usize];
                    report.evidence.push(EvidenceRow::check(
                        &alloc::format!("{label}_positive"),
                        Some(i),
                        v,
                        Relation::Gt,
                        0.0,
                    ));
                    if i > i0 {
                        let prev = series[(i - 2) as usize];
                        report.evidence.push(EvidenceRow::check(
                            &alloc::format!("{label}_increment"),
                            Some(i),
                            v - prev,
                            Relation::Gt,
                            0.0,
                        ));
                    }
                }
                if i0 > tail_start {
                    report.fail(label, Some(i0 - 1));
                }
            }
            None => report.fail(label, Some(i_max)),
        }
    }

    if let Some(bad) = report.evidence.iter().find(|r| !r.holds) {
        let (name, index) = (bad.name.clone(), bad.index);
        report.fail(&name, index);
    }
    report.verdict =
        if report.failed_stage.is_none() { Verdict::ExplosionCertified } else { Verdict::Inconclusive };
    Ok(Counterexample { report, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn partition_is_exact_complement() {
        let mut grid: Vec<u64> = (1..=3000).collect();
        let mut x = 3000f64;
        while x < 1e6 {
            x *= 1.25;
            grid.push(x as u64);
        }
        grid.push(1_000_000);
        for &i in &grid {
            let p = partition_ab(i);
            let mut a = 0;
            let mut b = Vec::new();
            for k in 2..=i + 1 {
                match (in_a(k, i), in_b(k, i)) {
                    (true, false) => a += 1,
                    (false, true) => b.push(k),
                    other => panic!("k={k} i={i}: {other:?}"),
                }
            }
            assert_eq!(p.a_len, a, "i={i}");
            assert_eq!(p.b, b, "i={i}");
        }
    }

    #[test]
    fn second_block_joins_b_at_245() {
        assert!(partition_ab(244).b.is_empty());
        assert_eq!(partition_ab(245).b, vec![2]);
        assert_eq!(partition_ab(245).d, 256);
        assert_eq!(partition_ab(1_000_000).b, vec![2]);
        let first3 = (1u64 << 27) - 22;
        assert_eq!(partition_ab(first3 - 1).b, vec![2]);
        assert_eq!(partition_ab(first3).b, vec![2, 3]);
    }

    #[test]
    fn small_m_values() {
        let c = counterexample_certificate(3).unwrap();
        assert_eq!(c.rows[0].m_exact.as_deref(), Some("5"));
        assert_eq!(c.rows[1].m_exact.as_deref(), Some("262"));
        assert!(c.rows.iter().all(|r| r.m_exceeds_4_pow_i_sq));
    }

    #[test]
    fn factor_product_matches_closed_form() {
        let c = counterexample_certificate(300).unwrap();
        for r in &c.rows {
            assert!((r.factor_sum_log2 - r.product_bound_log2).abs() <= 1e-9 * (1.0 + r.product_bound_log2.abs()));
            if r.i <= 244 {
                let expect = -(r.i as f64) - 4.0 * r.i as f64 - 8.0 - LOG2_E;
                assert!((r.product_bound_log2 - expect).abs() < 1e-9);
            }
        }
        for r in c.rows.iter().filter(|r| r.i >= 245) {
            assert!(r.d as f64 <= libm::exp2(r.d_block_bound_log2.unwrap()));
        }
    }

    #[test]
    fn s0_dominance_eventually_positive_and_increasing() {
        let c = counterexample_certificate(50).unwrap();
        let margin: Vec<f64> = c.rows.iter().map(|r| r.s0_bound_log2 - r.s0_reference_log2).collect();
        assert!(margin[4] < 0.0);
        assert_eq!(positive_increasing_from(&margin), Some(14));
        assert_eq!(c.report.parameter("s0_dominance_positive_increasing_from"), Some(14.0));
    }

    #[test]
    fn verdicts() {
        let c = counterexample_certificate(40).unwrap();
        assert_eq!(c.report.verdict, Verdict::ExplosionCertified);
        assert_eq!(c.report.parameter("mainprod_positive_increasing_from"), Some(14.0));
        let c = counterexample_certificate(300).unwrap();
        assert_eq!(c.report.verdict, Verdict::Inconclusive);
        assert_eq!(c.report.failed_stage.as_ref().unwrap().stage, "mainprod");
        assert!(matches!(counterexample_certificate(2000), Err(Error::ExactBudget { .. })));
    }

    #[test]
    fn deterministic() {
        assert_eq!(counterexample_certificate(60).unwrap(), counterexample_certificate(60).unwrap());
    }

    #[test]
    fn cube_root_floor() {
        assert_eq!(cube_root_floor_log2(1), 0);
        assert_eq!(cube_root_floor_log2(2), 1);
        assert_eq!(cube_root_floor_log2(255), 1);
        assert_eq!(cube_root_floor_log2(256), 2);
    }
}
