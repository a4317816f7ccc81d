//! `qset`: command-line front-end for the CHSH quantum-set toolkit.

use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chsh_core::extremality::classify;
use chsh_core::oracles::{bell_max_q2, decomposition_search, local_membership_lp};
use chsh_core::realization::{born_point, canonicalize_to};
use chsh_core::scan::{run_scan, Axis, ScanRow, ScanSpec, PARAM_NAMES};
use chsh_core::selftest::selftest_certificate;
use chsh_core::steering::{steered_correlators, steered_realization};
use chsh_core::witness::{find_witness, orthocomplement, tangent_basis};
use chsh_core::{BellFunctional, Behavior, CanonTarget, Error, QubitRealization};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "qset", version, about = "Extremality, self-testing and flat witnesses in the CHSH quantum set")]
struct Cli {
    /// Emit JSON instead of a plain table.
    #[arg(long, global = true)]
    json: bool,
    /// Write output to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Interpret angle flags in degrees.
    #[arg(long, global = true)]
    degrees: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Behavior of a pure two-qubit realization.
    Eval(RealArgs),
    /// Verdict and diagnostics for a behavior.
    Classify(InputArgs),
    /// Reconstruct the self-tested realization of an extremal behavior.
    Selftest(InputArgs),
    /// Modified angles and steered correlators.
    Steer(SteerArgs),
    /// Flat direction certifying that a point is not exposed.
    Witness(RealArgs),
    /// Classify a grid of realizations and emit CSV.
    Scan(ScanArgs),
    /// Brute-force cross-checks.
    #[command(subcommand)]
    Oracle(OracleCmd),
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Maximize a Bell functional over pure two-qubit realizations.
    BellMax(BellMaxArgs),
    /// Local-polytope membership by linear programming.
    Local(InputArgs),
    /// Search for a proper convex decomposition into qubit points.
    Decompose(DecomposeArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Behavior JSON file; `-` or absent reads stdin.
    #[arg(long, short)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct RealArgs {
    /// Realization JSON file, used when no angle flags are given.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b1: Option<f64>,
}

#[derive(Args)]
struct SteerArgs {
    #[command(flatten)]
    real: RealArgs,
    /// Read a behavior instead of a realization.
    #[arg(long)]
    behavior: bool,
}

#[derive(Args)]
struct ScanArgs {
    /// Value or `min:max:steps`.
    #[arg(long, allow_hyphen_values = true)]
    theta: String,
    #[arg(long, allow_hyphen_values = true)]
    a0: String,
    #[arg(long, allow_hyphen_values = true)]
    a1: String,
    #[arg(long, allow_hyphen_values = true)]
    b0: String,
    #[arg(long, allow_hyphen_values = true)]
    b1: String,
    /// Comma-separated subset of the CSV columns, in output order.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
}

#[derive(Args)]
struct BellMaxArgs {
    /// Bell functional JSON `{"coeffs": [8 reals], "offset": r}`; CHSH if absent.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    resolution: usize,
    #[arg(long, default_value_t = 40)]
    refinements: usize,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Validation(String),
    Precondition(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Precondition(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Precondition(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else if matches!(e, Error::InvalidArgument(_)) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Precondition(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_input(path: &Option<PathBuf>) -> CliResult<String> {
    let mut s = String::new();
    match path {
        Some(p) if p.as_os_str() != "-" => {
            s = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        }
        _ => {
            io::stdin().read_to_string(&mut s).map_err(|e| Failure::Usage(format!("stdin: {e}")))?;
        }
    }
    Ok(s)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| Failure::Validation(format!("malformed {what} JSON: {e}")))
}

fn read_behavior(path: &Option<PathBuf>) -> CliResult<Behavior> {
    let p: Behavior = parse_json(&read_input(path)?, "behavior")?;
    p.ensure_valid()?;
    Ok(p)
}

fn angle_factor(degrees: bool) -> f64 {
    if degrees {
        std::f64::consts::PI / 180.0
    } else {
        1.0
    }
}

fn read_realization(args: &RealArgs, degrees: bool) -> CliResult<QubitRealization> {
    let flags = [args.theta, args.a0, args.a1, args.b0, args.b1];
    if flags.iter().all(Option::is_none) {
        let mut r: QubitRealization = parse_json(&read_input(&args.input)?, "realization")?;
        if degrees {
            r = QubitRealization::from_params(&r.params().map(|v| v * angle_factor(true)));
        }
        return check_finite(r);
    }
    let mut p = [0.0; 5];
    for (k, (v, name)) in flags.iter().zip(PARAM_NAMES).enumerate() {
        p[k] = v.ok_or_else(|| Failure::Usage(format!("missing --{name}")))? * angle_factor(degrees);
    }
    check_finite(QubitRealization::from_params(&p))
}

fn check_finite(r: QubitRealization) -> CliResult<QubitRealization> {
    if r.params().iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(Failure::Validation("realization parameters must be finite".into()))
    }
}

fn parse_axis(s: &str, name: &str, degrees: bool) -> CliResult<Axis> {
    let bad = || Failure::Usage(format!("--{name}: expected a number or min:max:steps, got {s:?}"));
    let f = angle_factor(degrees);
    let parts: Vec<&str> = s.split(':').collect();
    let axis = match parts[..] {
        [v] => Axis::fixed(v.trim().parse::<f64>().map_err(|_| bad())? * f),
        [lo, hi, n] => Axis {
            min: lo.trim().parse::<f64>().map_err(|_| bad())? * f,
            max: hi.trim().parse::<f64>().map_err(|_| bad())? * f,
            steps: n.trim().parse().map_err(|_| bad())?,
        },
        _ => return Err(bad()),
    };
    Ok(axis)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn behavior_table(p: &Behavior) -> String {
    let mut s = String::new();
    writeln!(s, "margA  {:>23.16e} {:>23.16e}", p.marg_a[0], p.marg_a[1]).unwrap();
    writeln!(s, "margB  {:>23.16e} {:>23.16e}", p.marg_b[0], p.marg_b[1]).unwrap();
    for x in 0..2 {
        writeln!(s, "corr{x}  {:>23.16e} {:>23.16e}", p.corr[x][0], p.corr[x][1]).unwrap();
    }
    s
}

fn realization_table(r: &QubitRealization) -> String {
    let mut s = String::new();
    for (name, v) in PARAM_NAMES.iter().zip(r.params()) {
        writeln!(s, "{name:<6} {v:.16e}").unwrap();
    }
    s
}

fn table3(label: &str, t: &[[[f64; 2]; 2]; 2]) -> String {
    let mut s = String::new();
    for (a, sign) in ["+", "-"].iter().enumerate() {
        for x in 0..2 {
            writeln!(s, "{label}[{sign}][{x}]  {:>23.16e} {:>23.16e}", t[a][x][0], t[a][x][1]).unwrap();
        }
    }
    s
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

const SCAN_COLUMNS: [&str; 19] = [
    "theta", "a0", "a1", "b0", "b1", "verdict", "error", "m0", "m1", "m2", "m3", "m4", "m5", "m6", "m7", "r0", "r1",
    "r2", "r3",
];

fn scan_fields(row: &ScanRow) -> Vec<String> {
    let mut out: Vec<String> = row.realization.params().iter().map(|&v| fmt_num(v)).collect();
    out.push(row.verdict.map(|v| format!("{v:?}")).unwrap_or_default());
    out.push(row.error.as_deref().map(|e| e.replace([',', '\n'], ";")).unwrap_or_default());
    for k in 0..8 {
        out.push(row.margins.map(|m| fmt_num(m[k])).unwrap_or_default());
    }
    for k in 0..4 {
        out.push(row.lemma1_residuals.map(|m| fmt_num(m[k])).unwrap_or_default());
    }
    out
}

fn scan_csv(rows: &[ScanRow], columns: &Option<Vec<String>>) -> CliResult<String> {
    let idx: Vec<usize> = match columns {
        None => (0..SCAN_COLUMNS.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                SCAN_COLUMNS
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| Failure::Usage(format!("unknown column {c:?}")))
            })
            .collect::<CliResult<_>>()?,
    };
    let mut s = String::new();
    s.push_str(&idx.iter().map(|&i| SCAN_COLUMNS[i]).collect::<Vec<_>>().join(","));
    s.push('\n');
    for row in rows {
        let f = scan_fields(row);
        s.push_str(&idx.iter().map(|&i| f[i].as_str()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    Ok(s)
}

fn run(cli: &Cli) -> CliResult<String> {
    let json = cli.json;
    match &cli.cmd {
        Cmd::Eval(args) => {
            let p = born_point(&read_realization(args, cli.degrees)?);
            Ok(if json { to_json(&p) } else { behavior_table(&p) })
        }
        Cmd::Classify(args) => {
            let c = classify(&read_behavior(&args.input)?)?;
            Ok(if json {
                to_json(&c)
            } else {
                format!("verdict  {:?}\nbranch   {}\n", c.verdict, c.details.fired)
            })
        }
        Cmd::Selftest(args) => {
            let cert = selftest_certificate(&read_behavior(&args.input)?)?;
            Ok(if json {
                to_json(&json!({ "realization": cert.realization, "certificate": cert }))
            } else {
                format!(
                    "{}max_residual     {:e}\nroundtrip_error  {:e}\n",
                    realization_table(&cert.realization),
                    cert.max_residual,
                    cert.roundtrip_error
                )
            })
        }
        Cmd::Steer(args) => {
            let sc = if args.behavior {
                steered_correlators(&read_behavior(&args.real.input)?)?
            } else {
                steered_realization(&read_realization(&args.real, cli.degrees)?)?
            };
            Ok(if json {
                to_json(&sc)
            } else {
                let mut s = String::new();
                if let Some(at) = sc.atilde {
                    for (a, sign) in ["+", "-"].iter().enumerate() {
                        writeln!(s, "atilde[{sign}]  {:>23.16e} {:>23.16e}", at[a][0], at[a][1]).unwrap();
                    }
                }
                s + &table3("c", &sc.c)
            })
        }
        Cmd::Witness(args) => {
            let r = read_realization(args, cli.degrees)?;
            let (canon, g) = canonicalize_to(&r, CanonTarget::Sector);
            let w = find_witness(&canon)?;
            let status = match &w {
                Some(_) => "witness",
                None if born_point(&canon).is_local()? => "none",
                None => "exposed",
            };
            let complement = match &w {
                Some(_) => Some(orthocomplement(&tangent_basis(&canon)?)),
                None => None,
            };
            Ok(if json {
                to_json(&json!({
                    "status": status,
                    "realization": canon,
                    "relabeling": g,
                    "witness": w,
                    "orthocomplement": complement,
                }))
            } else {
                match w {
                    Some(w) => format!(
                        "sector  [{:+}, {:+}]\nalphas  {:.16e} {:.16e}\ndeltas  {:e} {:e}\n{}",
                        w.sector.0,
                        w.sector.1,
                        w.alphas[0],
                        w.alphas[1],
                        w.deltas[0],
                        w.deltas[1],
                        behavior_table(&w.l)
                    ),
                    None => format!("{status}\n"),
                }
            })
        }
        Cmd::Scan(args) => {
            let axes = [&args.theta, &args.a0, &args.a1, &args.b0, &args.b1];
            let mut spec = ScanSpec { axes: [Axis::fixed(0.0); 5] };
            for (k, (s, name)) in axes.iter().zip(PARAM_NAMES).enumerate() {
                spec.axes[k] = parse_axis(s, name, cli.degrees)?;
            }
            let rows = run_scan(&spec)?;
            if json {
                Ok(to_json(&rows))
            } else {
                scan_csv(&rows, &args.columns)
            }
        }
        Cmd::Oracle(OracleCmd::BellMax(args)) => {
            let beta = match &args.input {
                Some(_) => parse_json::<BellFunctional>(&read_input(&args.input)?, "functional")?,
                None => BellFunctional::chsh(),
            };
            if !beta.is_finite() {
                return Err(Failure::Validation("functional coefficients must be finite".into()));
            }
            let m = bell_max_q2(&beta, args.resolution, args.refinements)?;
            Ok(if json {
                to_json(&m)
            } else {
                format!("value  {:.16e}\n{}", m.value, realization_table(&m.argmax))
            })
        }
        Cmd::Oracle(OracleCmd::Local(args)) => {
            let m = local_membership_lp(&read_behavior(&args.input)?)?;
            Ok(if json { to_json(&m) } else { format!("local  {}\n", m.is_local()) })
        }
        Cmd::Oracle(OracleCmd::Decompose(args)) => {
            let d = decomposition_search(&read_behavior(&args.input)?, args.trials, args.seed)?;
            Ok(if json {
                to_json(&d)
            } else {
                format!(
                    "found       {}\nlambda      {:.16e}\nresidual    {:e}\nseparation  {:e}\n",
                    d.found, d.lambda, d.residual, d.separation
                )
            })
        }
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("QSET_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Usage(format!("QSET_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(&cli)).and_then(|out| {
        let res = match &cli.output {
            Some(path) => std::fs::write(path, out.as_bytes()),
            None => io::stdout().lock().write_all(out.as_bytes()),
        };
        res.map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
