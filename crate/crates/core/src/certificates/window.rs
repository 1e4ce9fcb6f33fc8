//! Window sums `Σ_{i=⌈log n⌉}^{n} 1/λ_i` for the iterated-log boundary
//! family against `c^{-1}(log^{(k+1)} n - log^{(k+2)} n)`.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::explosion::validate_grid;
use super::window_start;
use crate::error::{Error, Result};
use crate::numeric::{iterated_exp, iterated_ln, CompensatedSum};
use crate::rates::{RateSequence, DEFAULT_MAX_INDEX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub n: u64,
    /// `⌈log n⌉`.
    pub lower: u64,
    pub exact: f64,
    pub asymptotic: f64,
    pub ratio: f64,
}

/// Smallest `n` with `log^{(k+2)} n > 1`, if it fits in a `u64`.
pub fn min_window_index(k: u32) -> Option<u64> {
    let x = iterated_exp(1.0, k + 2);
    (x.is_finite() && x < u64::MAX as f64).then(|| libm::floor(x) as u64 + 1)
}

/// Exact window sums are streamed once up to the largest grid point.
pub fn iterated_log_window(c: f64, k: u32, grid: &[u64]) -> Result<Vec<WindowRow>> {
    validate_grid(grid)?;
    let seq = RateSequence::IteratedLog { c, k };
    seq.validate()?;
    let min = min_window_index(k);
    match min {
        Some(m) if grid[0] >= m => {}
        _ => {
            return Err(Error::WindowDomain {
                n: grid[0],
                k,
                min: min.map_or_else(|| format!("floor(exp^({})(1)) + 1", k + 2), |m| format!("{m}")),
            })
        }
    }
    let last = *grid.last().unwrap();
    if last > DEFAULT_MAX_INDEX {
        return Err(Error::IndexCap { index: last, max: DEFAULT_MAX_INDEX });
    }

    // Prefix sums are needed at each n and just below each window start.
    let mut marks: Vec<u64> = grid.iter().flat_map(|&n| [n, window_start(1.0, n) - 1]).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut at = Vec::with_capacity(marks.len());
    let mut s = CompensatedSum::new();
    let mut m = marks.iter().peekable();
    while m.peek() == Some(&&0) {
        at.push((0u64, 0.0));
        m.next();
    }
    for i in 1..=last {
        s.add(seq.rate_log2(i)?.reciprocal());
        if m.peek() == Some(&&i) {
            at.push((i, s.value()));
            m.next();
        }
    }
    let prefix = |i: u64| at[at.binary_search_by_key(&i, |x| x.0).unwrap()].1;

    Ok(grid
        .iter()
        .map(|&n| {
            let a = window_start(1.0, n);
            let exact = prefix(n) - prefix(a - 1);
            let x = n as f64;
            let asymptotic = (iterated_ln(x, k + 1) - iterated_ln(x, k + 2)) / c;
            WindowRow { n, lower: a, exact, asymptotic, ratio: exact / asymptotic }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_window() {
        let rows = iterated_log_window(1.0, 0, &[1000, 1_000_000]).unwrap();
        let r = &rows[1];
        assert_eq!(r.lower, 14);
        let oracle: f64 = (14..=1_000_000u64).map(|i| 1.0 / i as f64).sum();
        assert!((r.exact - oracle).abs() < 1e-9);
        assert!((r.ratio - 1.0).abs() < 0.05);
        let half = iterated_log_window(2.0, 0, &[1_000_000]).unwrap();
        assert!((half[0].exact - 5.59).abs() < 0.05, "{}", half[0].exact);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(min_window_index(0), Some(16));
        assert_eq!(min_window_index(1), Some(3_814_280));
        assert!(matches!(iterated_log_window(1.0, 0, &[15]), Err(Error::WindowDomain { .. })));
        assert!(iterated_log_window(1.0, 0, &[16]).is_ok());
        let e = iterated_log_window(1.0, 2, &[1 << 40]).unwrap_err();
        assert!(format!("{e}").contains("exp^(4)"));
    }
}
