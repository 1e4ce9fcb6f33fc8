//! Command line: each subcommand fills a [`RunConfig`] and hands it to
//! [`execute`]. `cmj run --config file.json` reads the same fields from a file.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::execute;
use crate::config::{CertKind, CommandKind, RunConfig};
use crate::descriptor::parse_list;
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "cmj", version, about = "Pure-birth CMJ processes, preferential attachment trees and explosion certificates")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; `CMJ_WORKERS` takes precedence when set.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate genealogies up to a population size or a time horizon.
    Simulate {
        /// Rate descriptor, e.g. `affine:1,0`, `power:2`, `pathological`.
        #[arg(long)]
        rates: String,
        #[arg(long, conflicts_with = "horizon")]
        count: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Population cap for horizon runs.
        #[arg(long)]
        cap: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a numeric certificate.
    Certify {
        #[arg(long)]
        rates: Option<String>,
        #[arg(long, value_enum)]
        cert: Option<CertKind>,
        /// Majorant rates for the dominated window condition.
        #[arg(long)]
        majorant: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        imax: Option<u64>,
        #[arg(long)]
        grid_min: Option<u64>,
        #[arg(long)]
        grid_max: Option<u64>,
        #[arg(long)]
        per_decade: Option<u32>,
        /// `c,p` with `λ_i >= c i^p` for all i.
        #[arg(long)]
        minorant: Option<String>,
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the CMJ skeleton with directly grown attachment trees.
    Couple {
        /// Weight descriptor, e.g. `affine:1`, `power:2`, `table:1,2,3`.
        #[arg(long = "f")]
        weight: String,
        #[arg(long)]
        n: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate `P{τ_N <= T}` over horizons.
    Probe {
        #[arg(long)]
        rates: String,
        /// Population N.
        #[arg(long)]
        count: Option<u64>,
        /// Comma separated horizons.
        #[arg(long)]
        horizons: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Certificate, probe and plot-ready tables in one directory.
    Report {
        #[arg(long)]
        rates: String,
        #[arg(long, value_enum)]
        cert: Option<CertKind>,
        #[arg(long)]
        majorant: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        imax: Option<u64>,
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        horizons: Option<String>,
        #[arg(long)]
        grid_max: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn with_common(mut c: RunConfig, common: Common) -> RunConfig {
    c.out = common.out;
    c.workers = common.workers;
    c.seed = common.seed;
    c.reps = common.reps;
    c
}

fn horizons(s: Option<String>) -> CliResult<Option<Vec<f64>>> {
    s.as_deref().map(parse_list).transpose()
}

fn to_config(cmd: Cmd) -> CliResult<RunConfig> {
    Ok(match cmd {
        Cmd::Simulate { rates, count, horizon, cap, common } => with_common(
            RunConfig { command: Some(CommandKind::Simulate), rates: Some(rates), count, horizon, cap, ..Default::default() },
            common,
        ),
        Cmd::Certify { rates, cert, majorant, eps, imax, grid_min, grid_max, per_decade, minorant, attempts, out } => {
            RunConfig {
                command: Some(CommandKind::Certify),
                rates,
                cert,
                majorant,
                eps,
                imax,
                grid_min,
                grid_max,
                per_decade,
                minorant,
                attempts,
                out,
                ..Default::default()
            }
        }
        Cmd::Couple { weight, n, common } => with_common(
            RunConfig { command: Some(CommandKind::Couple), weight: Some(weight), n, ..Default::default() },
            common,
        ),
        Cmd::Probe { rates, count, horizons: h, common } => with_common(
            RunConfig {
                command: Some(CommandKind::Probe),
                rates: Some(rates),
                count,
                horizons: horizons(h)?,
                ..Default::default()
            },
            common,
        ),
        Cmd::Report { rates, cert, majorant, eps, imax, count, horizons: h, grid_max, common } => with_common(
            RunConfig {
                command: Some(CommandKind::Report),
                rates: Some(rates),
                cert,
                majorant,
                eps,
                imax,
                count,
                grid_max,
                horizons: horizons(h)?,
                ..Default::default()
            },
            common,
        ),
        Cmd::Run { config } => RunConfig::from_file(&config)?,
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 success, 2 configuration, 3 range, 4 internal
/// inconsistency. Written artifact paths go to stdout.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout())
}

/// [`main_with_args`] with the artifact listing sent to `listing`.
pub fn run_with_output<I, T>(args: I, listing: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match to_config(cli.command).and_then(|c| execute(&c)) {
        Ok(files) => {
            for f in files {
                let _ = writeln!(listing, "{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("cmj: {e}");
            e.exit_code()
        }
    }
}



#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::fs;
    use std::path::Path;

    use super::*;

    fn run(args: &[&str]) -> i32 {
        run_with_output(std::iter::once("cmj").chain(args.iter().copied()), &mut std::io::sink())
    }

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let out = dir.to_str().unwrap();
        let mut v = args.to_vec();
        v.extend(["--out", out]);
        run(&v)
    }

    fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect()
    }

    fn schema_check(schema: &str, file: &Path) {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
        let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join(schema)).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
        let validator = jsonschema::validator_for(&s).unwrap();
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{} against {schema}: {errors:?}", file.display());
    }

    #[test]
    fn exit_codes() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(run(&["--help"]), 0);
        assert_eq!(run(&["--version"]), 0);
        assert_eq!(run(&["frobnicate"]), 2);
        assert_eq!(run_in(d.path(), &["simulate", "--rates", "nope", "--count", "3", "--seed", "1"]), 2);
        assert_eq!(run_in(d.path(), &["simulate", "--rates", "constant:1", "--count", "3"]), 2);
        assert_eq!(run_in(d.path(), &["simulate", "--rates", "constant:1", "--count", "3", "--horizon", "1", "--seed", "1"]), 2);
        assert_eq!(run_in(d.path(), &["probe", "--rates", "power:2", "--seed", "1", "--reps", "5"]), 2);
        assert_eq!(run_in(d.path(), &["certify", "--rates", "affine:1,0", "--cert", "iii"]), 2);
        // Beyond the exact-arithmetic budget.
        assert_eq!(run_in(d.path(), &["certify", "--cert", "iii", "--imax", "5000"]), 3);
        // Below the first index where the iterated-log window is defined: bad input, not a range error.
        assert_eq!(run_in(d.path(), &["certify", "--rates", "iterlog:1,0", "--cert", "window", "--grid-min", "10"]), 2);
        // Past the streaming index cap.
        assert_eq!(
            run_in(d.path(), &["certify", "--rates", "pathological", "--cert", "i", "--grid-max", "100000000000000000"]),
            3
        );
        assert_eq!(run_in(d.path(), &["certify", "--cert", "iii", "--imax", "20"]), 0);
        // Table weights must cover f(0..=n): the next birth of each parent is scheduled eagerly.
        assert_eq!(run_in(d.path(), &["couple", "--f", "table:1,2", "--n", "4", "--seed", "1", "--reps", "10000"]), 3);
    }

    #[test]
    fn config_file_diagnostics() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("run.json");
        fs::write(&p, "{\n  \"command\": \"probe\",\n  \"ratez\": \"power:2\"\n}\n").unwrap();
        assert_eq!(run(&["run", "--config", p.to_str().unwrap()]), 2);
        let out = d.path().join("o");
        let cfg = format!(r#"{{"command":"certify","cert":"iii","imax":30,"out":{:?}}}"#, out.to_str().unwrap());
        fs::write(&p, cfg).unwrap();
        assert_eq!(run(&["run", "--config", p.to_str().unwrap()]), 0);
        assert!(out.join("counterexample.csv").exists());
        schema_check("certificate.schema.json", &out.join("certificate.json"));
    }

    #[test]
    fn shipped_configs_match_schema() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        for e in fs::read_dir(root).unwrap() {
            let p = e.unwrap().path();
            schema_check("run_config.schema.json", &p);
            RunConfig::from_file(&p).unwrap();
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cases: [&[&str]; 4] = [
            &["simulate", "--rates", "affine:1,0", "--count", "200", "--seed", "5", "--reps", "3"],
            &["probe", "--rates", "power:2", "--count", "500", "--seed", "5", "--reps", "100"],
            &["couple", "--f", "power:2", "--n", "4", "--seed", "5", "--reps", "10000"],
            &["report", "--rates", "iterlog:1,1", "--seed", "5", "--reps", "100", "--count", "200", "--grid-max", "10000"],
        ];
        for args in cases {
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            assert_eq!(run_in(a.path(), args), 0, "{args:?}");
            assert_eq!(run_in(b.path(), args), 0, "{args:?}");
            let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
            assert!(!sa.is_empty());
            assert_eq!(sa, sb, "{args:?}");
        }
    }

    #[test]
    fn one_and_eight_workers_agree() {
        let cases: [&[&str]; 3] = [
            &["simulate", "--rates", "power:1.5", "--count", "300", "--seed", "11", "--reps", "16"],
            &["probe", "--rates", "pathological", "--count", "1000", "--seed", "11", "--reps", "200"],
            &["couple", "--f", "affine:1", "--n", "5", "--seed", "11", "--reps", "10000"],
        ];
        for args in cases {
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            let mut one = args.to_vec();
            one.extend(["--workers", "1"]);
            let mut eight = args.to_vec();
            eight.extend(["--workers", "8"]);
            assert_eq!(run_in(a.path(), &one), 0);
            assert_eq!(run_in(b.path(), &eight), 0);
            assert_eq!(snapshot(a.path()), snapshot(b.path()), "{args:?}");
        }
    }

    #[test]
    fn artifacts_match_schemas() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path();
        let sub = |s: &str| p.join(s);
        let go = |dir: &str, args: &[&str]| assert_eq!(run_in(&sub(dir), args), 0, "{args:?}");
        go("s", &["simulate", "--rates", "constant:1", "--horizon", "2", "--seed", "1", "--reps", "2"]);
        go("c", &["couple", "--f", "table:1,2,4,8,16", "--n", "4", "--seed", "1", "--reps", "10000"]);
        go("p", &["probe", "--rates", "affine:1,1", "--count", "50", "--seed", "1", "--reps", "100"]);
        go("w", &["certify", "--rates", "iterlog:2,0", "--cert", "window", "--grid-max", "100000"]);
        go("i", &["certify", "--rates", "power:2", "--cert", "i", "--minorant", "1,2", "--grid-max", "100000"]);
        go("d", &["certify", "--rates", "affine:1,0", "--majorant", "iterlog:1,1", "--grid-max", "100000"]);
        go("r", &["report", "--rates", "pathological", "--seed", "1", "--reps", "100", "--count", "200", "--grid-max", "10000"]);
        schema_check("simulate.schema.json", &sub("s/simulate.json"));
        schema_check("coupling.schema.json", &sub("c/coupling.json"));
        schema_check("probe.schema.json", &sub("p/probe.json"));
        schema_check("window.schema.json", &sub("w/window.json"));
        for c in ["i", "d", "r"] {
            schema_check("certificate.schema.json", &sub(&format!("{c}/certificate.json")));
        }
        schema_check("probe.schema.json", &sub("r/probe.json"));
        schema_check("consistency.schema.json", &sub("r/consistency.json"));
        let md = fs::read_to_string(sub("r/report.md")).unwrap();
        assert!(md.contains("explosion_certified") || md.contains("ExplosionCertified"), "{md}");
        let genealogy = fs::read_to_string(sub("s/genealogy.csv")).unwrap();
        assert!(genealogy.starts_with("replicate,id,parent,birth_time,out_degree\n0,0,,0.0,"));
    }

    #[test]
    fn horizon_simulation_reports_cap() {
        let d = tempfile::tempdir().unwrap();
        let args = ["simulate", "--rates", "power:2", "--horizon", "50", "--cap", "1000", "--seed", "2"];
        assert_eq!(run_in(d.path(), &args), 0);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("simulate.json")).unwrap()).unwrap();
        assert_eq!(v["replicates"][0]["outcome"], "cap_exceeded");
    }
}
