//! Command execution: every command reads a [`RunConfig`], writes its
//! artifacts into the output directory and returns their paths.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cmj_core::certificates::{
    certificate_vs_simulation, check_condition_i, check_condition_ii, check_condition_ii_dominated,
    counterexample_certificate, iterated_log_window, log_grid, min_window_index, CertificateReport,
    ConsistencySummary, CounterexampleRow, EvidenceRow, SearchBudget, TailBound, WindowRow,
};
use cmj_core::cmj::{
    probe_replicate, simulate, validate_probe, Genealogy, Outcome, ProbeTable, SimOptions, DEFAULT_POPULATION_CAP,
    ROOT,
};
use cmj_core::patree::{coupling_replicate, validate_coupling, CouplingReport, WeightFunction};
use cmj_core::numeric::CompensatedSum;
use cmj_core::purebirth::Stop;
use cmj_core::{CounterRng, RateSequence};
use serde::Serialize;

use crate::config::{missing, CertKind, CommandKind, RunConfig};
use crate::descriptor::{parse_rates, parse_stop, parse_weight};
use crate::error::{CliError, CliResult};
use crate::harness::{replicates, resolve_workers};
use crate::output::{ensure_dir, write_csv, write_json, write_text};

pub const DEFAULT_PROBE_HORIZONS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

pub fn execute(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let cmd = cfg.command()?;
    let out = cfg.out_dir();
    let label = match cmd {
        CommandKind::Simulate => "simulate",
        CommandKind::Certify => "certify",
        CommandKind::Couple => "couple",
        CommandKind::Probe => "probe",
        CommandKind::Report => "report",
    };
    let run = || -> CliResult<Vec<PathBuf>> {
        match cmd {
            CommandKind::Simulate => run_simulate(cfg, &out),
            CommandKind::Certify => run_certify(cfg, &out),
            CommandKind::Couple => run_couple(cfg, &out),
            CommandKind::Probe => run_probe(cfg, &out),
            CommandKind::Report => run_report(cfg, &out),
        }
    };
    run().map_err(|e| e.context(label))
}

#[derive(Serialize)]
struct ReplicateSummary {
    replicate: u64,
    size: usize,
    outcome: Outcome,
    underflows: u64,
    last_birth: f64,
}

#[derive(Serialize)]
struct SimulateArtifact<'a> {
    command: &'static str,
    rates: &'a RateSequence,
    stop: Stop,
    seed: u64,
    replicates: Vec<ReplicateSummary>,
}

#[derive(Serialize)]
struct GenealogyRow {
    replicate: u64,
    id: u32,
    parent: Option<u32>,
    birth_time: f64,
    out_degree: u32,
}

#[derive(Serialize)]
struct TrajectoryRow {
    replicate: u64,
    n: u64,
    tau: f64,
}

fn trajectory_rows(runs: &[Genealogy]) -> impl Iterator<Item = TrajectoryRow> + '_ {
    runs.iter().enumerate().flat_map(|(r, g)| {
        g.birth_time.iter().enumerate().map(move |(n, &tau)| TrajectoryRow { replicate: r as u64, n: n as u64 + 1, tau })
    })
}

fn run_genealogies(seq: &RateSequence, stop: Stop, cfg: &RunConfig, reps: u64, seed: u64) -> CliResult<Vec<Genealogy>> {
    let opts = SimOptions { cap: cfg.cap.unwrap_or(DEFAULT_POPULATION_CAP), time_limit: None };
    let rng = CounterRng::new(seed);
    replicates(reps, resolve_workers(cfg.workers)?, |r| {
        let g = simulate(seq, stop, &opts, &rng.stream(r))?;
        g.check_invariants().map_err(|m| CliError::Inconsistency(format!("replicate {r}: {m}")))?;
        Ok(g)
    })
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let seq = parse_rates(cfg.rates()?)?;
    let stop = parse_stop(cfg.count, cfg.horizon)?.ok_or_else(|| missing("count or horizon"))?;
    let seed = cfg.seed()?;
    let reps = cfg.reps.unwrap_or(1);
    if reps == 0 {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    let runs = run_genealogies(&seq, stop, cfg, reps, seed)?;
    ensure_dir(out)?;
    let summary = SimulateArtifact {
        command: "simulate",
        rates: &seq,
        stop,
        seed,
        replicates: runs
            .iter()
            .enumerate()
            .map(|(r, g)| ReplicateSummary {
                replicate: r as u64,
                size: g.len(),
                outcome: g.outcome,
                underflows: g.underflows,
                last_birth: g.birth_time.last().copied().unwrap_or(0.0),
            })
            .collect(),
    };
    let rows = runs.iter().enumerate().flat_map(|(r, g)| {
        (0..g.len()).map(move |i| GenealogyRow {
            replicate: r as u64,
            id: i as u32,
            parent: (g.parent[i] != ROOT).then_some(g.parent[i]),
            birth_time: g.birth_time[i],
            out_degree: g.out_degree[i],
        })
    });
    Ok(vec![
        write_csv(out, "genealogy.csv", rows)?,
        write_csv(out, "trajectory.csv", trajectory_rows(&runs))?,
        write_json(out, "simulate.json", &summary)?,
    ])
}

#[derive(Serialize)]
struct CertifyArtifact<'a> {
    command: &'static str,
    cert: CertKind,
    rates: &'a RateSequence,
    majorant: Option<&'a RateSequence>,
    report: &'a CertificateReport,
}

#[derive(Serialize)]
struct CounterexampleCsvRow<'a> {
    i: u64,
    m_exact: Option<&'a str>,
    m_log2: f64,
    a_len: u64,
    b: String,
    d: u64,
    s0_bound_log2: f64,
    s0_reference_log2: f64,
    first_block_log2: f64,
    factor_sum_log2: f64,
    product_bound_log2: f64,
    product_bound_coarse_log2: f64,
    sharp_factor_sum_log2: f64,
    mainprod_log2: f64,
    main_log2: f64,
    d_block_bound_log2: Option<f64>,
    d_outer_bound_log2: Option<f64>,
    k_star: u64,
    k_star_in_b: bool,
}

impl<'a> From<&'a CounterexampleRow> for CounterexampleCsvRow<'a> {
    fn from(r: &'a CounterexampleRow) -> Self {
        Self {
            i: r.i,
            m_exact: r.m_exact.as_deref(),
            m_log2: r.m_log2,
            a_len: r.a_len,
            b: r.b.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            d: r.d,
            s0_bound_log2: r.s0_bound_log2,
            s0_reference_log2: r.s0_reference_log2,
            first_block_log2: r.first_block_log2,
            factor_sum_log2: r.factor_sum_log2,
            product_bound_log2: r.product_bound_log2,
            product_bound_coarse_log2: r.product_bound_coarse_log2,
            sharp_factor_sum_log2: r.sharp_factor_sum_log2,
            mainprod_log2: r.mainprod_log2,
            main_log2: r.main_log2,
            d_block_bound_log2: r.d_block_bound_log2,
            d_outer_bound_log2: r.d_outer_bound_log2,
            k_star: r.k_star,
            k_star_in_b: r.k_star_in_b,
        }
    }
}

#[derive(Serialize)]
struct WindowArtifact<'a> {
    command: &'static str,
    cert: CertKind,
    c: f64,
    k: u32,
    rows: &'a [WindowRow],
}

fn parse_minorant(s: &str) -> CliResult<TailBound> {
    let v = crate::descriptor::parse_list(s)?;
    match v[..] {
        [c, p] => Ok(TailBound::PowerMinorant { c, p }),
        _ => Err(CliError::Config(format!("minorant takes 'c,p', got '{s}'"))),
    }
}

fn grid(cfg: &RunConfig, lo_default: u64, hi_default: u64) -> CliResult<Vec<u64>> {
    let lo = cfg.grid_min.unwrap_or(lo_default);
    let hi = cfg.grid_max.unwrap_or(hi_default.max(lo));
    let pd = cfg.per_decade.unwrap_or(10);
    if lo == 0 || lo > hi || pd == 0 {
        return Err(CliError::Config(format!("grid needs 1 <= grid_min <= grid_max and per_decade >= 1, got {lo}..{hi}/{pd}")));
    }
    Ok(log_grid(lo, hi, pd))
}

/// Runs the selected certificate; returns the report and the artifacts.
fn certify_into(cfg: &RunConfig, seq: &RateSequence, out: &Path) -> CliResult<(Option<CertificateReport>, Vec<PathBuf>)> {
    let cert = cfg.cert.unwrap_or(if *seq == RateSequence::Pathological { CertKind::Iii } else { CertKind::Ii });
    let mut files = Vec::new();
    let mut majorant = None;
    let report = match cert {
        CertKind::I => {
            let tail = cfg.minorant.as_deref().map(parse_minorant).transpose()?;
            check_condition_i(seq, &grid(cfg, 10, 1_000_000)?, tail)?
        }
        CertKind::Ii => {
            let eps = cfg.eps.unwrap_or(1.0);
            let mut budget = SearchBudget::default();
            if let Some(a) = cfg.attempts {
                budget.max_attempts = a;
            }
            let g = grid(cfg, 10, 1_000_000)?;
            match cfg.majorant.as_deref() {
                Some(m) => {
                    let m = parse_rates(m)?;
                    let r = check_condition_ii_dominated(seq, &m, eps, &g, budget)?;
                    majorant = Some(m);
                    r
                }
                None => check_condition_ii(seq, eps, &g, budget)?,
            }
        }
        CertKind::Iii => {
            if *seq != RateSequence::Pathological {
                return Err(CliError::Config("certificate iii applies to the pathological rates only".into()));
            }
            let c = counterexample_certificate(cfg.imax.unwrap_or(40))?;
            let rows: Vec<CounterexampleCsvRow> = c.rows.iter().map(Into::into).collect();
            files.push(write_csv(out, "counterexample.csv", rows)?);
            c.report
        }
        CertKind::Window => {
            let RateSequence::IteratedLog { c, k } = *seq else {
                return Err(CliError::Config("window sums need iterlog:c,k rates".into()));
            };
            let lo = min_window_index(k).unwrap_or(u64::MAX).max(10);
            let rows = iterated_log_window(c, k, &grid(cfg, lo, 1_000_000)?)?;
            files.push(write_csv(out, "window.csv", &rows)?);
            files.push(write_json(out, "window.json", &WindowArtifact { command: "certify", cert, c, k, rows: &rows })?);
            return Ok((None, files));
        }
    };
    if report.evidence.iter().any(|r| r.holds && r.relation != cmj_core::certificates::Relation::Info && r.value.is_nan()) {
        return Err(CliError::Inconsistency("evidence row with NaN value marked as holding".into()));
    }
    files.push(write_csv(out, "evidence.csv", &report.evidence)?);
    files.push(write_json(
        out,
        "certificate.json",
        &CertifyArtifact { command: "certify", cert, rates: seq, majorant: majorant.as_ref(), report: &report },
    )?);
    Ok((Some(report), files))
}

fn run_certify(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let seq = match (&cfg.rates, cfg.cert) {
        (None, Some(CertKind::Iii)) => RateSequence::Pathological,
        _ => parse_rates(cfg.rates()?)?,
    };
    ensure_dir(out)?;
    Ok(certify_into(cfg, &seq, out)?.1)
}

#[derive(Serialize)]
struct CoupleArtifact<'a> {
    command: &'static str,
    seed: u64,
    report: &'a CouplingReport,
}

#[derive(Serialize)]
struct CoupleCsvRow {
    step: u32,
    chi_square: f64,
    df: u32,
    p_value: f64,
    groups: u32,
    groups_used: u32,
    samples_dropped: u64,
    underpowered: bool,
}

pub fn coupling(f: &WeightFunction, n: u32, reps: u64, seed: u64, workers: usize) -> CliResult<CouplingReport> {
    validate_coupling(n, reps)?;
    let rates = f.to_rates();
    let rng = CounterRng::new(seed);
    let trees = replicates(reps, workers, |r| Ok(coupling_replicate(&rates, n, &rng.stream(r))?))?;
    let report = CouplingReport::from_trees(f, n, &trees)?;
    if report.steps.iter().any(|s| !(0.0..=1.0).contains(&s.p_value)) {
        return Err(CliError::Inconsistency("p-value outside [0, 1]".into()));
    }
    Ok(report)
}

fn run_couple(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let f = parse_weight(cfg.weight.as_deref().ok_or_else(|| missing("f"))?)?;
    let seed = cfg.seed()?;
    let report = coupling(&f, cfg.n.unwrap_or(4), cfg.reps.unwrap_or(100_000), seed, resolve_workers(cfg.workers)?)?;
    ensure_dir(out)?;
    let rows = report.steps.iter().map(|s| CoupleCsvRow {
        step: s.step,
        chi_square: s.chi_square,
        df: s.df,
        p_value: s.p_value,
        groups: s.groups,
        groups_used: s.groups_used,
        samples_dropped: s.samples_dropped,
        underpowered: s.underpowered,
    });
    Ok(vec![
        write_csv(out, "coupling.csv", rows)?,
        write_json(out, "coupling.json", &CoupleArtifact { command: "couple", seed, report: &report })?,
    ])
}

#[derive(Serialize)]
struct ProbeArtifact<'a> {
    command: &'static str,
    rates: &'a RateSequence,
    seed: u64,
    table: &'a ProbeTable,
}

pub fn probe(seq: &RateSequence, n: u64, horizons: &[f64], reps: u64, seed: u64, workers: usize) -> CliResult<ProbeTable> {
    validate_probe(n, horizons, reps)?;
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let rng = CounterRng::new(seed);
    let taus = replicates(reps, workers, |r| Ok(probe_replicate(seq, n, t_max, &rng.stream(r))?))?;
    Ok(ProbeTable::from_taus(n, horizons, &taus))
}

fn probe_into(cfg: &RunConfig, seq: &RateSequence, out: &Path, reps_default: u64, n_default: u64) -> CliResult<(ProbeTable, Vec<PathBuf>)> {
    let seed = cfg.seed()?;
    let horizons = cfg.horizons.clone().unwrap_or_else(|| DEFAULT_PROBE_HORIZONS.to_vec());
    let n = cfg.count.unwrap_or(n_default);
    let table = probe(seq, n, &horizons, cfg.reps.unwrap_or(reps_default), seed, resolve_workers(cfg.workers)?)?;
    let files = vec![
        write_csv(out, "probe.csv", &table.rows)?,
        write_json(out, "probe.json", &ProbeArtifact { command: "probe", rates: seq, seed, table: &table })?,
    ];
    Ok((table, files))
}

fn run_probe(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let seq = parse_rates(cfg.rates()?)?;
    if cfg.horizon.is_some() {
        return Err(CliError::Config("probe takes --horizons, not --horizon".into()));
    }
    ensure_dir(out)?;
    Ok(probe_into(cfg, &seq, out, 1000, 10_000)?.1)
}

#[derive(Serialize)]
struct WindowSumRow {
    n: u64,
    lower: u64,
    window_sum: f64,
}

/// `W(n) = Σ_{⌈ε log n⌉}^{n} 1/λ_i` on `grid`, streamed once.
fn window_sums(seq: &RateSequence, eps: f64, grid: &[u64]) -> CliResult<Vec<WindowSumRow>> {
    let start = |n: u64| ((eps * (n as f64).ln()).ceil() as u64).max(1);
    let mut marks: Vec<u64> = grid.iter().flat_map(|&n| [n, start(n).min(n + 1) - 1]).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut prefix = vec![(0u64, 0.0)];
    let mut s = CompensatedSum::new();
    let mut next = marks.iter().copied().filter(|&m| m > 0).peekable();
    let last = *grid.last().unwrap_or(&0);
    for i in 1..=last {
        s.add(seq.rate_log2(i)?.reciprocal());
        if next.peek() == Some(&i) {
            prefix.push((i, s.value()));
            next.next();
        }
    }
    let at = |i: u64| prefix.iter().find(|p| p.0 == i).map_or(0.0, |p| p.1);
    Ok(grid
        .iter()
        .map(|&n| {
            let a = start(n);
            WindowSumRow { n, lower: a, window_sum: if a > n { 0.0 } else { at(n) - at(a - 1) } }
        })
        .collect())
}

fn evidence_table(rows: &[EvidenceRow], name: &str) -> String {
    let mut s = String::new();
    for r in rows.iter().filter(|r| r.name == name) {
        let _ = writeln!(s, "| {} | {} | {} |", r.index.map_or("".into(), |i| i.to_string()), r.value, r.holds);
    }
    s
}

fn run_report(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let spec = cfg.rates()?;
    let seq = parse_rates(spec)?;
    let seed = cfg.seed()?;
    ensure_dir(out)?;
    let mut files = Vec::new();

    let (report, cert_files) = certify_into(cfg, &seq, out)?;
    files.extend(cert_files);
    let (table, probe_files) = probe_into(cfg, &seq, out, 200, 1000)?;
    files.extend(probe_files);

    let n = cfg.count.unwrap_or(1000);
    let reps = cfg.reps.unwrap_or(200).min(5);
    let runs = run_genealogies(&seq, Stop::Count(n), cfg, reps, seed)?;
    files.push(write_csv(out, "tau_trajectories.csv", trajectory_rows(&runs))?);

    let eps = cfg.eps.unwrap_or(1.0);
    let g = grid(cfg, 10, 1_000_000)?;
    let windows = window_sums(&seq, eps, &g)?;
    files.push(write_csv(out, "window_sums.csv", &windows)?);

    let summary: Option<ConsistencySummary> = report.as_ref().map(|r| certificate_vs_simulation(r, Some(&table)));
    if let Some(s) = &summary {
        files.push(write_json(out, "consistency.json", s)?);
    }

    let mut md = String::new();
    let _ = writeln!(md, "# Run report\n");
    let _ = writeln!(md, "- rates: `{spec}`");
    let _ = writeln!(md, "- seed: {seed}\n");
    if let Some(r) = &report {
        let _ = writeln!(md, "## Certificate\n");
        let _ = writeln!(md, "- kind: {:?}", r.certificate);
        let _ = writeln!(md, "- verdict: {:?}", r.verdict);
        if let Some(f) = &r.failed_stage {
            match f.witness_index {
                Some(i) => writeln!(md, "- blocked at: {} (index {i})", f.stage),
                None => writeln!(md, "- blocked at: {}", f.stage),
            }
            .ok();
        }
        for p in &r.parameters {
            let _ = writeln!(md, "- {} = {}", p.name, p.value);
        }
        for note in &r.notes {
            let _ = writeln!(md, "- note: {note}");
        }
        let mainprod = evidence_table(&r.evidence, "mainprod_log2");
        if !mainprod.is_empty() {
            let _ = writeln!(md, "\n| i | mainprod log2 | recorded |\n|---|---|---|\n{mainprod}");
        }
    }
    let _ = writeln!(md, "\n## Explosion probe (N = {}, {} replicates)\n", table.population, table.replicates);
    let _ = writeln!(md, "| horizon | P(tau_N <= horizon) | std error |\n|---|---|---|");
    for row in &table.rows {
        let _ = writeln!(md, "| {} | {} | {} |", row.horizon, row.probability, row.std_error);
    }
    if let Some(s) = &summary {
        let _ = writeln!(md, "\n## Cross-check\n\n{:?}: {}", s.consistency, s.message);
    }
    let _ = writeln!(md, "\n## Plot-ready files\n");
    let _ = writeln!(md, "- `tau_trajectories.csv`: replicate, n, tau (birth time of the n-th individual)");
    let _ = writeln!(md, "- `window_sums.csv`: n, lower = ceil(eps log n), window_sum");
    let _ = writeln!(md, "- `evidence.csv`: name, index, value, relation, threshold, holds");
    let _ = writeln!(md, "- `probe.csv`: horizon, probability, std_error");
    files.push(write_text(out, "report.md", &md)?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_sums_match_direct() {
        let seq = RateSequence::Affine { a: 1.0, b: 0.0 };
        let rows = window_sums(&seq, 1.0, &[10, 100, 1000]).unwrap();
        for r in &rows {
            let direct: f64 = (r.lower..=r.n).map(|i| 1.0 / i as f64).sum();
            assert!((r.window_sum - direct).abs() < 1e-12);
        }
    }
}
