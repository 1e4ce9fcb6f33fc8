//! Birth-rate sequences `λ_i`, `i >= 1`, stored and queried as `log2(λ_i)`.
//!
//! The pathological family reaches `λ = 2^(2^(k^3))`, far past `f64::MAX`,
//! so every consumer works with the binary logarithm and only exponentiates
//! when the result is known to be representable (or when flushing to zero is
//! the intended semantics).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Default upper limit for indices visited by brute-force sums.
pub const DEFAULT_MAX_INDEX: u64 = 1 << 32;

/// Last pathological block whose log2 rate `2^{k^3}` fits in an f64.
pub const MAX_REPRESENTABLE_BLOCK: u64 = 10;

/// `log2(λ_i)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Log2Rate(f64);

impl Log2Rate {
    pub fn new(v: f64) -> Self {
        Self(v)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `λ_i` itself; `+inf` when it overflows.
    pub fn rate(self) -> f64 {
        numeric::exp2(self.0)
    }

    /// `1/λ_i`, flushed to zero below the subnormal range.
    pub fn reciprocal(self) -> f64 {
        numeric::exp2(-self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RateSequence {
    /// `λ_i = c`.
    Constant { c: f64 },
    /// `λ_i = a i + b`.
    Affine { a: f64, b: f64 },
    /// `λ_i = i^p`.
    Power { p: f64 },
    /// `λ_i = c i log i ... log^{(k)} i` once every iterated log exceeds 1,
    /// and `λ_i = c` before that.
    IteratedLog { c: f64, k: u32 },
    /// `1, α_1 (d_1 times), 1, α_2 (d_2 times), 1, ...` with
    /// `d_k = 4^{k^2}` and `α_k = 2^{2^{k^3}}`.
    Pathological,
    /// Explicit `log2(λ_i)` values for `i = 1..=len`.
    Table { log2: Vec<f64> },
}

/// Where an index falls in the pathological sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathologicalSlot {
    /// The `m`-th rate-1 entry (`m >= 1`).
    Boundary(u64),
    /// Inside block `k`, whose rate is `α_k`.
    Block(u64),
}

/// `log2 d_k = 2 k^2`.
pub fn block_length_log2(k: u64) -> u64 {
    2 * k * k
}

/// `log2 α_k = 2^{k^3}`; exact while it fits in an f64.
pub fn alpha_log2(k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("pathological blocks start at k = 1".into()));
    }
    if k > MAX_REPRESENTABLE_BLOCK {
        return Err(Error::BlockOutOfRange { block: k });
    }
    Ok(libm::ldexp(1.0, (k * k * k) as i32))
}

/// Locate index `i` in the pathological layout. Index 1 is the first
/// boundary; block `k` occupies the `d_k` indices right after boundary `k`.
pub fn pathological_slot(i: u64) -> Result<PathologicalSlot> {
    if i == 0 {
        return Err(Error::IndexOutOfDomain(0));
    }
    let i = i as u128;
    let mut boundary: u128 = 1;
    let mut k: u64 = 1;
    loop {
        if i == boundary {
            return Ok(PathologicalSlot::Boundary(k));
        }
        let shift = block_length_log2(k);
        // any u64 index lies before the end of a block longer than 2^64
        if shift >= 64 || i <= boundary + (1u128 << shift) {
            return Ok(PathologicalSlot::Block(k));
        }
        boundary += (1u128 << shift) + 1;
        k += 1;
    }
}

/// Index of the `m`-th boundary, `1 + Σ_{k<m} (d_k + 1)`, when it fits in u64.
pub fn pathological_boundary(m: u64) -> Option<u64> {
    if m == 0 {
        return None;
    }
    let mut b: u128 = 1;
    for k in 1..m {
        let shift = block_length_log2(k);
        if shift >= 64 {
            return None;
        }
        b += (1u128 << shift) + 1;
    }
    u64::try_from(b).ok()
}

fn iterated_log_threshold(k: u32) -> u64 {
    if k == 0 {
        return 1;
    }
    let x = numeric::iterated_exp(1.0, k);
    if !x.is_finite() || x >= u64::MAX as f64 {
        u64::MAX
    } else {
        libm::floor(x) as u64 + 1
    }
}

impl RateSequence {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match *self {
            RateSequence::Constant { c } if !(c > 0.0 && c.is_finite()) => {
                bad("constant rate must be finite and positive")
            }
            RateSequence::Affine { a, b }
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && a + b > 0.0) =>
            {
                bad("affine rate a*i + b needs a >= 0 and a + b > 0")
            }
            RateSequence::Power { p } if !p.is_finite() => bad("power exponent must be finite"),
            RateSequence::IteratedLog { c, .. } if !(c > 0.0 && c.is_finite()) => {
                bad("iterated-log scale must be finite and positive")
            }
            RateSequence::Table { ref log2 } => {
                if log2.is_empty() {
                    return bad("rate table is empty");
                }
                if log2.iter().any(|v| !v.is_finite()) {
                    return bad("rate table entries must be finite log2 values");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Smallest index from which the iterated-log product formula applies;
    /// 1 for every other family.
    pub fn formula_threshold(&self) -> u64 {
        match *self {
            RateSequence::IteratedLog { k, .. } => iterated_log_threshold(k),
            _ => 1,
        }
    }

    pub fn rate_log2(&self, i: u64) -> Result<Log2Rate> {
        if i == 0 {
            return Err(Error::IndexOutOfDomain(0));
        }
        let x = i as f64;
        let v = match *self {
            RateSequence::Constant { c } => libm::log2(c),
            RateSequence::Affine { a, b } => libm::log2(a * x + b),
            RateSequence::Power { p } => p * libm::log2(x),
            RateSequence::IteratedLog { c, k } => {
                if i < iterated_log_threshold(k) {
                    libm::log2(c)
                } else {
                    let mut acc = libm::log2(c) + libm::log2(x);
                    let mut l = x;
                    for _ in 0..k {
                        l = libm::log(l);
                        acc += libm::log2(l);
                    }
                    acc
                }
            }
            RateSequence::Pathological => match pathological_slot(i)? {
                PathologicalSlot::Boundary(_) => 0.0,
                PathologicalSlot::Block(k) => alpha_log2(k)?,
            },
            RateSequence::Table { ref log2 } => *log2
                .get((i - 1) as usize)
                .ok_or(Error::BeyondTable { len: log2.len(), index: i })?,
        };
        Ok(Log2Rate(v))
    }

    /// `log2 λ_i` for `i = 1..=n`, indexed from zero.
    pub fn log2_prefix(&self, n: u64) -> Result<Vec<f64>> {
        (1..=n).map(|i| self.rate_log2(i).map(Log2Rate::get)).collect()
    }

    /// `Σ_{i=a}^{b} 1/λ_i` with compensated summation. Reciprocals below the
    /// smallest subnormal contribute exactly zero.
    pub fn reciprocal_partial_sum(&self, a: u64, b: u64) -> Result<f64> {
        self.reciprocal_partial_sum_capped(a, b, DEFAULT_MAX_INDEX)
    }

    pub fn reciprocal_partial_sum_capped(&self, a: u64, b: u64, max_index: u64) -> Result<f64> {
        if a == 0 {
            return Err(Error::IndexOutOfDomain(0));
        }
        if a > b {
            return Err(Error::EmptyRange { a, b });
        }
        if b > max_index {
            return Err(Error::IndexCap { index: b, max: max_index });
        }
        let mut s = CompensatedSum::new();
        for i in a..=b {
            s.add(self.rate_log2(i)?.reciprocal());
        }
        Ok(s.value())
    }

    /// Termwise comparison `λ_i <= μ_i` over `i = 1..=prefix`.
    pub fn is_dominated_by(&self, majorant: &RateSequence, prefix: u64) -> Result<Domination> {
        let mut d = Domination { prefix, violations: 0, first_violation: None, last_violation: None };
        for i in 1..=prefix {
            if self.rate_log2(i)?.get() > majorant.rate_log2(i)?.get() {
                d.violations += 1;
                d.first_violation.get_or_insert(i);
                d.last_violation = Some(i);
            }
        }
        Ok(d)
    }
}

/// Finite-prefix evidence for `λ_i <= μ_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domination {
    pub prefix: u64,
    pub violations: u64,
    pub first_violation: Option<u64>,
    pub last_violation: Option<u64>,
}

impl Domination {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    /// First index from which domination holds through the checked prefix.
    pub fn holds_from(&self) -> u64 {
        self.last_violation.map_or(1, |i| i + 1)
    }
}
