//! Four-stage evidence for non-explosion under super-linear rates with a
//! non-vanishing window sum `W(n) = Σ_{i=⌈ε log n⌉}^{n} 1/λ_i`.
//!
//! 1. `log2(λ_n / n)` grows on the top half of the grid.
//! 2. `W` stays bounded away from zero there and does not decay.
//! 3. Some `(t, β, r)` satisfies `min W > (t + 2/β)(1 + β/(rε))` with
//!    `λ_i >= r i` on every window from the top half on.
//! 4. The shifted sums exceed `t + 2/β` and the Chernoff term is at most
//!    `n^{-2}` at every grid point past a reported index.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::explosion::validate_grid;
use super::{window_start, CertificateKind, CertificateReport, EvidenceRow, Relation, Verdict, GRID_CAVEAT};
use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};
use crate::purebirth::chernoff_term_log2_from;
use crate::rates::RateSequence;

/// Largest grid index accepted; the prefix is held in memory.
pub const MAX_WINDOW_INDEX: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamTriple {
    pub t: f64,
    pub beta: f64,
    pub r: f64,
}

impl ParamTriple {
    pub fn new(t: f64, beta: f64, r: f64) -> Result<Self> {
        if [t, beta, r].iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(Self { t, beta, r })
        } else {
            Err(Error::InvalidParameter("t, beta and r must be finite and positive".into()))
        }
    }

    /// `(t + 2/β)(1 + β/(rε))`.
    pub fn window_target(&self, eps: f64) -> f64 {
        (self.t + 2.0 / self.beta) * (1.0 + self.beta / (self.r * eps))
    }

    /// `t + 2/β`.
    pub fn shifted_target(&self) -> f64 {
        self.t + 2.0 / self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Candidates passed on to the stage-4 check.
    pub max_attempts: usize,
    /// Points per decade of the coarse `(t, β, r)` grid.
    pub per_decade: u32,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_attempts: 32, per_decade: 4 }
    }
}

const T_RANGE: (f64, f64) = (-4.0, 0.0);
const BETA_RANGE: (f64, f64) = (0.0, 4.0);
const R_RANGE: (f64, f64) = (0.0, 6.0);

fn log_space((lo, hi): (f64, f64), per_decade: u32) -> Vec<f64> {
    let steps = libm::round((hi - lo) * per_decade as f64) as u32;
    (0..=steps).map(|s| libm::pow(10.0, lo + s as f64 / per_decade as f64)).collect()
}

/// Rates and the derived prefix tables, indexed from 1.
struct Prefix {
    log2: Vec<f64>,
    lam: Vec<f64>,
    /// `P[n] = Σ_{i<=n} 1/λ_i`, `P[0] = 0`.
    recip: Vec<f64>,
    /// `SM[i] = min_{i<=j<=N} log2(λ_j / j)`, `SM[N+1] = +inf`.
    suffix_min: Vec<f64>,
}

impl Prefix {
    fn new(log2: Vec<f64>) -> Self {
        let n = log2.len();
        let lam: Vec<f64> = log2.iter().map(|&l| numeric::exp2(l)).collect();
        let mut recip = Vec::with_capacity(n + 1);
        recip.push(0.0);
        let mut s = CompensatedSum::new();
        for &l in &log2 {
            s.add(numeric::exp2(-l));
            recip.push(s.value());
        }
        let mut suffix_min = alloc::vec![f64::INFINITY; n + 2];
        for i in (1..=n).rev() {
            let q = log2[i - 1] - libm::log2(i as f64);
            suffix_min[i] = suffix_min[i + 1].min(q);
        }
        Self { log2, lam, recip, suffix_min }
    }

    fn q(&self, i: u64) -> f64 {
        self.log2[(i - 1) as usize] - libm::log2(i as f64)
    }

    /// `Σ_{i=a}^{n} 1/λ_i`, zero for an empty window.
    fn window(&self, a: u64, n: u64) -> f64 {
        if a > n {
            0.0
        } else {
            self.recip[n as usize] - self.recip[(a - 1) as usize]
        }
    }

    /// `(Σ_{i<a}, Σ_{a<=i<=n})` of `1/(λ_i + shift)`.
    fn shifted(&self, a: u64, n: u64, shift: f64) -> (f64, f64) {
        let (mut head, mut win) = (CompensatedSum::new(), CompensatedSum::new());
        for (idx, &l) in self.lam[..n as usize].iter().enumerate() {
            let v = 1.0 / (l + shift);
            if (idx as u64) + 1 < a {
                head.add(v);
            } else {
                win.add(v);
            }
        }
        (head.value(), win.value())
    }
}

struct Candidate {
    triple: ParamTriple,
    margin: f64,
    /// Grid position from which `λ_i >= r i` holds on every window.
    r_from: Option<usize>,
}

struct Ctx<'a> {
    pre: &'a Prefix,
    grid: &'a [u64],
    eps: f64,
    top: usize,
    proxy: f64,
    windows: Vec<f64>,
}

impl Ctx<'_> {
    fn candidate(&self, triple: ParamTriple) -> Candidate {
        let lr = libm::log2(triple.r);
        let r_from = self
            .grid
            .iter()
            .position(|&n| self.pre.suffix_min[window_start(self.eps, n).min(n) as usize] >= lr);
        Candidate { triple, margin: self.proxy - triple.window_target(self.eps), r_from }
    }

    fn admissible(&self, c: &Candidate) -> bool {
        c.margin > 0.0 && c.r_from.is_some_and(|j| j <= self.top)
    }

    /// Per grid point: `(full, window, scaled, chernoff, passes)`.
    fn stage4(&self, p: ParamTriple) -> Vec<(f64, f64, f64, f64, bool)> {
        let scale = 1.0 + p.beta / (p.r * self.eps);
        self.grid
            .iter()
            .zip(&self.windows)
            .map(|(&n, &w)| {
                let shift = p.beta * libm::log(n as f64);
                let (head, win) = self.pre.shifted(window_start(self.eps, n), n, shift);
                let full = head + win;
                let scaled = w / scale;
                let chern = chernoff_term_log2_from(&self.pre.log2[..n as usize], p.t, p.beta);
                let ok = full >= win
                    && win >= scaled
                    && scaled > p.shifted_target()
                    && chern <= -2.0 * libm::log2(n as f64);
                (full, win, scaled, chern, ok)
            })
            .collect()
    }
}

fn first_tail_pass(rows: &[(f64, f64, f64, f64, bool)]) -> usize {
    rows.iter().rposition(|r| !r.4).map_or(0, |j| j + 1)
}

pub fn check_condition_ii(
    seq: &RateSequence,
    eps: f64,
    grid: &[u64],
    budget: SearchBudget,
) -> Result<CertificateReport> {
    let n = prepare(seq, eps, grid)?;
    run(Prefix::new(seq.log2_prefix(n)?), eps, grid, budget, CertificateKind::WindowCondition)
}

/// Runs the check on the envelope `max(λ_i, μ_i)`. It dominates `λ` termwise
/// and agrees with the majorant `μ` from the last prefix violation on.
pub fn check_condition_ii_dominated(
    seq: &RateSequence,
    majorant: &RateSequence,
    eps: f64,
    grid: &[u64],
    budget: SearchBudget,
) -> Result<CertificateReport> {
    let n = prepare(seq, eps, grid)?;
    majorant.validate()?;
    let own = seq.log2_prefix(n)?;
    let major = majorant.log2_prefix(n)?;
    let dom = seq.is_dominated_by(majorant, n)?;
    let envelope: Vec<f64> = own.iter().zip(&major).map(|(a, b)| a.max(*b)).collect();
    let mut report = run(Prefix::new(envelope), eps, grid, budget, CertificateKind::WindowConditionDominated)?;
    let top_start = grid[grid.len() / 2];
    report.evidence.push(EvidenceRow::info("domination_violations", Some(n), dom.violations as f64));
    report.evidence.push(EvidenceRow::check(
        "domination_holds_from",
        dom.last_violation,
        dom.holds_from() as f64,
        Relation::Le,
        top_start as f64,
    ));
    report.notes.push(format!(
        "checked on max(rate, majorant); the two differ at {} prefix indices",
        dom.violations
    ));
    if dom.holds_from() > top_start {
        report.fail("domination", dom.last_violation);
        report.verdict = Verdict::Inconclusive;
    }
    Ok(report)
}

fn prepare(seq: &RateSequence, eps: f64, grid: &[u64]) -> Result<u64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter("eps must be finite and positive".into()));
    }
    validate_grid(grid)?;
    if grid.len() < 4 || grid[0] < 2 {
        return Err(Error::InvalidParameter("window check needs at least 4 grid points, all >= 2".into()));
    }
    seq.validate()?;
    let n = *grid.last().unwrap();
    if n > MAX_WINDOW_INDEX {
        return Err(Error::IndexCap { index: n, max: MAX_WINDOW_INDEX });
    }
    Ok(n)
}

fn run(pre: Prefix, eps: f64, grid: &[u64], budget: SearchBudget, kind: CertificateKind) -> Result<CertificateReport> {
    if budget.per_decade == 0 || budget.max_attempts == 0 {
        return Err(Error::InvalidParameter("search budget must be positive".into()));
    }
    let mut report = CertificateReport::new(kind);
    report.param("eps", eps);
    report.notes.push(GRID_CAVEAT.into());
    let top = grid.len() / 2;
    let top_n = grid[top];
    report.param("top_half_start", top_n as f64);

    // Stage 1.
    for (j, &n) in grid.iter().enumerate() {
        let q = pre.q(n);
        report.evidence.push(EvidenceRow::info("rate_over_index_log2", Some(n), q));
        if j > top {
            let d = q - pre.q(grid[j - 1]);
            report.evidence.push(EvidenceRow::check("rate_over_index_increment", Some(n), d, Relation::Ge, 0.0));
        }
    }
    let last_n = *grid.last().unwrap();
    let growth = pre.q(last_n) - pre.q(top_n);
    report.evidence.push(EvidenceRow::check("rate_over_index_growth", Some(last_n), growth, Relation::Gt, 0.0));
    if let Some(bad) = report.evidence.iter().find(|r| !r.holds) {
        let index = bad.index;
        report.fail("rate_over_index", index);
        return Ok(report);
    }

    // Stage 2.
    let windows: Vec<f64> = grid.iter().map(|&n| pre.window(window_start(eps, n), n)).collect();
    let mut running = f64::INFINITY;
    for (&n, &w) in grid.iter().zip(&windows) {
        running = running.min(w);
        report.evidence.push(EvidenceRow::info("window_sum", Some(n), w));
        report.evidence.push(EvidenceRow::info("window_sum_running_min", Some(n), running));
    }
    let (arg, proxy) = windows[top..]
        .iter()
        .enumerate()
        .fold((top, f64::INFINITY), |acc, (j, &w)| if w < acc.1 { (top + j, w) } else { acc });
    report.param("liminf_proxy", proxy);
    let proxy_row = EvidenceRow::check("window_sum_liminf_proxy", Some(grid[arg]), proxy, Relation::Gt, 0.0);
    let trend = windows[grid.len() - 1] - windows[top];
    let trend_row = EvidenceRow::check("window_sum_trend", Some(last_n), trend, Relation::Ge, 0.0);
    let stage2_ok = proxy_row.holds && trend_row.holds;
    let witness = if proxy_row.holds { last_n } else { grid[arg] };
    report.evidence.push(proxy_row);
    report.evidence.push(trend_row);
    if !stage2_ok {
        report.fail("window_sum", Some(witness));
        return Ok(report);
    }

    // Stage 3.
    let ctx = Ctx { pre: &pre, grid, eps, top, proxy, windows };
    let coarse = |pd| -> Vec<Candidate> {
        let mut out = Vec::new();
        for &t in &log_space(T_RANGE, pd) {
            for &beta in &log_space(BETA_RANGE, pd) {
                for &r in &log_space(R_RANGE, pd) {
                    out.push(ctx.candidate(ParamTriple { t, beta, r }));
                }
            }
        }
        out
    };
    let mut cands = coarse(budget.per_decade);
    let mut refined = false;
    if !cands.iter().any(|c| ctx.admissible(c)) {
        let best = cands
            .iter()
            .filter(|c| c.r_from.is_some_and(|j| j <= top))
            .chain(cands.iter())
            .fold(None::<&Candidate>, |b, c| match b {
                Some(b) if b.margin >= c.margin => Some(b),
                _ => Some(c),
            })
            .map(|c| c.triple)
            .unwrap();
        let step = 1.0 / budget.per_decade as f64;
        let around = |x: f64, (lo, hi): (f64, f64)| -> Vec<f64> {
            (-4..=4)
                .map(|s| libm::pow(10.0, (libm::log10(x) + s as f64 * step / 4.0).clamp(lo, hi)))
                .collect()
        };
        let mut fine = Vec::new();
        for t in around(best.t, T_RANGE) {
            for beta in around(best.beta, BETA_RANGE) {
                for r in around(best.r, R_RANGE) {
                    fine.push(ctx.candidate(ParamTriple { t, beta, r }));
                }
            }
        }
        cands = fine;
        refined = true;
    }
    report.param("refined", if refined { 1.0 } else { 0.0 });
    let mut admissible: Vec<Candidate> = cands.into_iter().filter(|c| ctx.admissible(c)).collect();
    if admissible.is_empty() {
        report.fail("parameter_search", Some(top_n));
        return Ok(report);
    }
    admissible.sort_by(|a, b| b.margin.total_cmp(&a.margin));

    // Stage 4.
    let mut witness = None;
    let mut chosen = None;
    for (attempt, c) in admissible.iter().take(budget.max_attempts).enumerate() {
        let rows = ctx.stage4(c.triple);
        let from = first_tail_pass(&rows);
        if from <= top {
            chosen = Some((attempt + 1, c, rows, from));
            break;
        }
        witness = witness.or(Some(grid[from - 1]));
    }
    let Some((attempts, c, rows, from)) = chosen else {
        report.fail("shifted_sum_chernoff", witness);
        return Ok(report);
    };

    let p = c.triple;
    report.param("t", p.t);
    report.param("beta", p.beta);
    report.param("r", p.r);
    report.param("window_target", p.window_target(eps));
    report.param("margin", c.margin);
    report.param("candidates_tried", attempts as f64);
    let r_from = c.r_from.unwrap();
    report.param("rate_threshold", grid[r_from] as f64);
    report.param("chernoff_from", grid[from] as f64);
    report.evidence.push(EvidenceRow::check("window_sum_vs_target", Some(grid[arg]), proxy, Relation::Gt, p.window_target(eps)));
    let a_r = window_start(eps, grid[r_from]).min(grid[r_from]);
    report.evidence.push(EvidenceRow::check(
        "rate_over_index_min_log2",
        Some(a_r),
        pre.suffix_min[a_r as usize],
        Relation::Ge,
        libm::log2(p.r),
    ));
    for (j, (&n, &(full, win, scaled, chern, _))) in grid.iter().zip(&rows).enumerate() {
        let bound = -2.0 * libm::log2(n as f64);
        if j < from {
            report.evidence.push(EvidenceRow::info("shifted_sum", Some(n), full));
            report.evidence.push(EvidenceRow::info("chernoff_term_log2", Some(n), chern));
            continue;
        }
        report.evidence.push(EvidenceRow::check("shifted_sum_vs_window", Some(n), full, Relation::Ge, win));
        report.evidence.push(EvidenceRow::check("shifted_window_vs_scaled", Some(n), win, Relation::Ge, scaled));
        report.evidence.push(EvidenceRow::check("scaled_window_vs_target", Some(n), scaled, Relation::Gt, p.shifted_target()));
        report.evidence.push(EvidenceRow::check("shifted_sum", Some(n), full, Relation::Gt, p.shifted_target()));
        report.evidence.push(EvidenceRow::check("chernoff_term_log2", Some(n), chern, Relation::Le, bound));
    }

    if let Some(bad) = report.evidence.iter().find(|r| !r.holds) {
        let (name, index) = (bad.name.clone(), bad.index);
        report.fail(&name, index);
    } else {
        report.verdict = Verdict::NonExplosionCertified;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::log_grid;

    fn grid() -> Vec<u64> {
        log_grid(10, 100_000, 6)
    }

    #[test]
    fn n_log_n_passes() {
        let r = check_condition_ii(&RateSequence::IteratedLog { c: 1.0, k: 1 }, 1.0, &grid(), SearchBudget::default())
            .unwrap();
        assert_eq!(r.verdict, Verdict::NonExplosionCertified, "{:?}", r.failed_stage);
        assert!(r.evidence.iter().all(|e| e.holds));
        assert!(r.parameter("chernoff_from").unwrap() <= r.parameter("top_half_start").unwrap());
    }

    #[test]
    fn inverse_squares_fail_window_stage() {
        let r = check_condition_ii(&RateSequence::Power { p: 2.0 }, 1.0, &grid(), SearchBudget::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.failed_stage.unwrap().stage, "window_sum");
    }

    #[test]
    fn linear_needs_domination() {
        let lin = RateSequence::Affine { a: 1.0, b: 0.0 };
        let r = check_condition_ii(&lin, 1.0, &grid(), SearchBudget::default()).unwrap();
        assert_eq!(r.failed_stage.unwrap().stage, "rate_over_index");
        let maj = RateSequence::IteratedLog { c: 1.0, k: 1 };
        let r = check_condition_ii_dominated(&lin, &maj, 1.0, &grid(), SearchBudget::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NonExplosionCertified, "{:?}", r.failed_stage);
        assert_eq!(r.certificate, CertificateKind::WindowConditionDominated);
        assert_eq!(r.rows("domination_holds_from").next().unwrap().value, 3.0);
    }

    #[test]
    fn in2_holds_against_raw_rates() {
        let seq = RateSequence::IteratedLog { c: 1.0, k: 1 };
        let r = check_condition_ii(&seq, 1.0, &grid(), SearchBudget::default()).unwrap();
        let (t, beta) = (r.parameter("t").unwrap(), r.parameter("beta").unwrap());
        for row in r.rows("shifted_sum").filter(|x| x.relation == Relation::Gt) {
            let n = row.index.unwrap();
            let shift = beta * libm::log(n as f64);
            let s: f64 = (1..=n).map(|i| 1.0 / (seq.rate_log2(i).unwrap().rate() + shift)).sum();
            assert!(s > t + 2.0 / beta, "n={n}");
        }
    }

    #[test]
    fn deterministic() {
        let seq = RateSequence::IteratedLog { c: 1.0, k: 1 };
        let a = check_condition_ii(&seq, 1.0, &grid(), SearchBudget::default()).unwrap();
        let b = check_condition_ii(&seq, 1.0, &grid(), SearchBudget::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_inputs() {
        let seq = RateSequence::Constant { c: 1.0 };
        assert!(check_condition_ii(&seq, 0.0, &grid(), SearchBudget::default()).is_err());
        assert!(check_condition_ii(&seq, 1.0, &[2, 3], SearchBudget::default()).is_err());
        assert!(ParamTriple::new(0.0, 1.0, 1.0).is_err());
    }
}
