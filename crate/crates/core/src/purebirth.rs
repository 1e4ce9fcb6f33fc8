//! The reproduction point process of a single individual, `T_i = E_1 + ... + E_i`
//! with independent `E_j ~ Exp(λ_j)`, and the analytic bounds built on it:
//! the Gamma small-ball bound, the Markov bound and the Chernoff bound on the
//! intensity `E ξ([0, t])`.

use alloc::vec::Vec;
use core::f64::consts::LOG2_E;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};
use crate::rates::RateSequence;
use crate::rng::CounterRng;

/// Default truncation for a single line of arrivals.
pub const DEFAULT_ARRIVAL_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    Count(u64),
    Horizon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSample {
    pub times: Vec<f64>,
    pub truncated_at: Stop,
    /// Holding times that flushed to exactly zero ("instantaneous" births).
    pub underflows: u64,
    /// The arrival cap was reached before the stop rule fired.
    pub cap_hit: bool,
}

/// `E = e1 / λ` for a standard exponential `e1`, computed from `log2 λ`.
/// Returns exactly 0 when the true value lies below the subnormal range.
#[inline]
pub fn holding_time(log2_rate: f64, e1: f64) -> f64 {
    if log2_rate.abs() < 1000.0 {
        e1 * numeric::exp2(-log2_rate)
    } else {
        numeric::exp2(libm::log2(e1) - log2_rate)
    }
}

/// Arrivals of the process on lane 0 of `rng`, with the default cap.
pub fn sample_arrivals(seq: &RateSequence, stop: Stop, rng: &CounterRng) -> Result<ArrivalSample> {
    sample_arrivals_on(seq, stop, DEFAULT_ARRIVAL_CAP, rng, 0)
}

/// Arrivals drawn from `(lane, counter = j - 1)` for the `j`-th holding time.
/// The CMJ simulator draws individual `lane`'s births from the same cells.
pub fn sample_arrivals_on(
    seq: &RateSequence,
    stop: Stop,
    cap: u64,
    rng: &CounterRng,
    lane: u64,
) -> Result<ArrivalSample> {
    let mut out = ArrivalSample { times: Vec::new(), truncated_at: stop, underflows: 0, cap_hit: false };
    let (limit, horizon) = match stop {
        Stop::Count(n) => (n, f64::INFINITY),
        Stop::Horizon(t) if t <= 0.0 => return Ok(out),
        Stop::Horizon(t) => (u64::MAX, t),
    };
    let mut now = 0.0f64;
    let mut j = 0u64;
    while j < limit {
        if j >= cap {
            out.cap_hit = true;
            break;
        }
        let e = holding_time(seq.rate_log2(j + 1)?.get(), rng.exp1(lane, j));
        if e == 0.0 {
            out.underflows += 1;
        }
        now += e;
        if now > horizon {
            break;
        }
        out.times.push(now);
        j += 1;
    }
    Ok(out)
}

/// `X ~ Γ(d, α)` evaluated at threshold `t`; everything in log2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: u64,
    pub rate_log2: f64,
    pub threshold_log2: f64,
}

impl GammaParams {
    pub fn new(shape: u64, rate_log2: f64, t: f64) -> Self {
        Self { shape, rate_log2, threshold_log2: libm::log2(t) }
    }

    /// `log2 y` with `y = α t`.
    pub fn y_log2(&self) -> f64 {
        self.rate_log2 + self.threshold_log2
    }
}

/// `log2[e^{-y} (y/d)^d]`, a lower bound on `P{X <= t}`.
///
/// Saturates to `-inf` once `y` itself overflows.
pub fn gamma_lower_bound_log2(p: &GammaParams) -> f64 {
    debug_assert!(p.shape >= 1);
    let ly = p.y_log2();
    let y = numeric::exp2(ly);
    if y.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let d = p.shape as f64;
    -y * LOG2_E + d * (ly - libm::log2(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkovBound {
    /// `log2(1 - E S / t)`.
    Log2(f64),
    /// `E S >= t`: the bound carries no information.
    Vacuous,
}

impl MarkovBound {
    pub fn log2(self) -> Option<f64> {
        match self {
            MarkovBound::Log2(v) => Some(v),
            MarkovBound::Vacuous => None,
        }
    }
}

/// `P{S <= t} >= 1 - E S / t` for `S ~ Γ(d, α)`, `E S = d/α`.
pub fn markov_upper_tail_complement_log2(d: u64, rate_log2: f64, t: f64) -> MarkovBound {
    markov_bound_log2_t(d, rate_log2, libm::log2(t))
}

/// As [`markov_upper_tail_complement_log2`] with the threshold given as
/// `log2 t`. `rate_log2 = +inf` yields exactly 0.
pub fn markov_bound_log2_t(d: u64, rate_log2: f64, t_log2: f64) -> MarkovBound {
    markov_bound_all_log2(libm::log2(d as f64), rate_log2, t_log2)
}

/// Markov bound with the shape also given as `log2 d`.
pub fn markov_bound_all_log2(d_log2: f64, rate_log2: f64, t_log2: f64) -> MarkovBound {
    let ratio_log2 = d_log2 - rate_log2 - t_log2;
    if !(ratio_log2 < 0.0) {
        return MarkovBound::Vacuous;
    }
    MarkovBound::Log2(numeric::log2_one_minus_exp2(ratio_log2))
}

/// `Σ_{i=1}^{n} 1/(λ_i + shift)` over a precomputed `log2 λ` prefix.
pub fn shifted_reciprocal_sum(log2_rates: &[f64], shift: f64) -> f64 {
    log2_rates
        .iter()
        .map(|&l| if l > 1023.0 { 0.0 } else { 1.0 / (numeric::exp2(l) + shift) })
        .collect::<CompensatedSum>()
        .value()
}

/// `log2` of the `n`-th Chernoff term `exp{β log n (t - Σ_{i<=n} 1/(λ_i + β log n))}`.
pub fn chernoff_intensity_term_log2(seq: &RateSequence, t: f64, beta: f64, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("the Chernoff term needs n >= 2".into()));
    }
    if !(t > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter("t and beta must be positive".into()));
    }
    let rates = seq.log2_prefix(n)?;
    Ok(chernoff_term_log2_from(&rates, t, beta))
}

/// Same as [`chernoff_intensity_term_log2`] with `n = log2_rates.len()`.
pub fn chernoff_term_log2_from(log2_rates: &[f64], t: f64, beta: f64) -> f64 {
    let shift = beta * libm::log(log2_rates.len() as f64);
    shift * (t - shifted_reciprocal_sum(log2_rates, shift)) * LOG2_E
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityEstimate {
    pub t: f64,
    pub replicates: u64,
    pub mean: f64,
    pub std_error: f64,
    /// Replicates whose count was truncated at the cap.
    pub cap_hits: u64,
}

/// `ξ([0, t])` for one replicate: `(count, cap_hit)`.
pub fn intensity_replicate(seq: &RateSequence, t: f64, cap: u64, stream: &CounterRng) -> Result<(u64, bool)> {
    let s = sample_arrivals_on(seq, Stop::Horizon(t), cap, stream, 0)?;
    Ok((s.times.len() as u64, s.cap_hit))
}

impl IntensityEstimate {
    pub fn from_counts(t: f64, counts: &[(u64, bool)]) -> Self {
        let n = counts.len() as f64;
        let mean = counts.iter().map(|c| c.0 as f64).collect::<CompensatedSum>().value() / n;
        let var = if counts.len() > 1 {
            counts.iter().map(|c| (c.0 as f64 - mean) * (c.0 as f64 - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            t,
            replicates: counts.len() as u64,
            mean,
            std_error: libm::sqrt(var / n),
            cap_hits: counts.iter().filter(|c| c.1).count() as u64,
        }
    }

    pub fn cap_hit(&self) -> bool {
        self.cap_hits > 0
    }
}

/// Monte Carlo mean of `ξ([0, t])`; replicate `r` uses `rng.stream(r)`.
pub fn estimate_intensity(
    seq: &RateSequence,
    t: f64,
    reps: u64,
    cap: u64,
    rng: &CounterRng,
) -> Result<IntensityEstimate> {
    if reps == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let counts = (0..reps)
        .map(|r| intensity_replicate(seq, t, cap, &rng.stream(r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntensityEstimate::from_counts(t, &counts))
}
