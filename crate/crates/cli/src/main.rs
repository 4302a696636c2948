//! `syrlab` — reproducible Syracuse-dynamics analyses as subcommands.
//!
//! Every run prints a manifest (JSON, final stdout line) describing the
//! parameters and output digests.  Data goes to `--out` when given,
//! otherwise to stdout ahead of the manifest.

mod manifest;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::{BigInt, BigUint};
use serde::Serialize;

use manifest::{emit, Output, RunManifest, SCHEMA_VERSION};
use syrlab_core::dist::{
    char_osc_inequality_check_with_ceiling, char_probe_table_with_ceiling,
    syracuse_dist_exact_with_ceiling, syracuse_dist_float_with_ceiling,
};
use syrlab_core::dynamics::{collatz_step, syr_iterate, OddNatural};
use syrlab_core::geometry::{
    decompose_black, estimate_q, renewal_stats, white_hit_bound, FreqContext, Window,
};
use syrlab_core::passage::{passage_experiment, passage_support_check, ExperimentConfig};
use syrlab_core::stochastic::{tv_valuation_vs_geom_with_budget, Seed};
use syrlab_core::{Error, Rational, Scalar};

#[derive(Parser)]
#[command(name = "syrlab", version, about)]
struct Cli {
    /// Seed for every randomized analysis (decimal).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = library default).  Results never depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write the primary artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Memory budget for large float tables, in MiB.
    #[arg(long, global = true, default_value_t = 2048)]
    budget_mb: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Exact,
    Float,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MapKind {
    Syracuse,
    Collatz,
}

#[derive(Subcommand)]
enum Command {
    /// Print an orbit segment.
    Orbit(OrbitArgs),
    /// Distribution table of the level-n Syracuse random variable.
    Dist(DistArgs),
    /// Project a level-n table down to level k.
    Project(ProjectArgs),
    /// Oscillation of the exact level-n table at 3-adic scale m.
    Osc(OscArgs),
    /// Character-sum probe table over levels and frequencies.
    Charfn(CharfnArgs),
    /// Exhaustive |char| <= Osc_{n-1,n} inequality check at level n.
    Charosc(CharoscArgs),
    /// Exact TV between the enumerated valuation law and Geom(2)^n.
    ValuationTv(ValuationTvArgs),
    /// Two-threshold first-passage stabilisation experiment.
    Firstpass(FirstpassArgs),
    /// Triangle decomposition of the black set in a window.
    Triangles(WindowArgs),
    /// Plot-ready grid of colors and theta numerators in a window.
    Gridmap(WindowArgs),
    /// Renewal first-passage statistics through row s.
    Renewal(RenewalArgs),
    /// Monte-Carlo estimate of the white-hit functional Q(j, l).
    Qest(QestArgs),
    /// Monte-Carlo white-hit upper bound for |char_sum(n, xi)|.
    Whitebound(WhiteboundArgs),
    /// Run the exact-equality check suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Serialize)]
struct OrbitArgs {
    /// Starting value (decimal; odd for the Syracuse map).
    #[arg(long)]
    n_start: String,
    #[arg(long)]
    steps: u64,
    #[arg(long, value_enum, default_value_t = MapKind::Syracuse)]
    map: MapKind,
}

#[derive(Args, Serialize)]
struct DistArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, value_enum, default_value_t = Kind::Exact)]
    kind: Kind,
    #[arg(long, default_value_t = 8)]
    exact_ceiling: u32,
    #[arg(long, default_value_t = 15)]
    float_ceiling: u32,
}

#[derive(Args, Serialize)]
struct ProjectArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, value_enum, default_value_t = Kind::Exact)]
    kind: Kind,
    #[arg(long, default_value_t = 8)]
    exact_ceiling: u32,
    #[arg(long, default_value_t = 15)]
    float_ceiling: u32,
}

#[derive(Args, Serialize)]
struct OscArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 8)]
    exact_ceiling: u32,
}

#[derive(Args, Serialize)]
struct CharfnArgs {
    /// Levels to probe (repeatable).
    #[arg(long = "n", required = true)]
    levels: Vec<u32>,
    #[arg(long, default_value_t = 4)]
    random_probes: usize,
    #[arg(long, default_value_t = 15)]
    float_ceiling: u32,
}

#[derive(Args, Serialize)]
struct CharoscArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 8)]
    exact_ceiling: u32,
}

#[derive(Args, Serialize)]
struct ValuationTvArgs {
    #[arg(long)]
    n: u32,
    /// Modulus exponents (repeatable).
    #[arg(long = "m", required = true)]
    ms: Vec<u32>,
    #[arg(long, default_value_t = 24)]
    enum_budget: u32,
}

#[derive(Args, Serialize)]
struct FirstpassArgs {
    #[arg(long)]
    x: u64,
    #[arg(long, default_value_t = 1.25)]
    alpha: f64,
    #[arg(long)]
    samples: u64,
    /// Iteration cap per sample (default: 10 ln N / ln(4/3)).
    #[arg(long)]
    cap: Option<u64>,
    /// Also write per-sample records as CSV here.
    #[arg(long)]
    emit_locations: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct WindowArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    xi: u64,
    /// Blackness threshold, exact: "1/100" or "0.01".
    #[arg(long, default_value = "1/100")]
    eps: String,
    #[arg(long)]
    jmin: u64,
    #[arg(long)]
    jmax: u64,
    #[arg(long)]
    lmin: i64,
    #[arg(long)]
    lmax: i64,
}

#[derive(Args, Serialize)]
struct RenewalArgs {
    #[arg(long)]
    s: u64,
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 20)]
    overshoot_threshold: u64,
}

#[derive(Args, Serialize)]
struct QestArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    xi: u64,
    #[arg(long, default_value = "1/100")]
    eps: String,
    #[arg(long)]
    j: u64,
    #[arg(long)]
    l: i64,
    #[arg(long)]
    samples: u64,
}

#[derive(Args, Serialize)]
struct WhiteboundArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    xi: u64,
    #[arg(long, default_value = "1/100")]
    eps: String,
    #[arg(long)]
    samples: u64,
}

#[derive(Args, Serialize)]
struct SelftestArgs {
    /// Corrupt a table before checking (exercises the failure path).
    #[arg(long, hide = true, default_value_t = false)]
    corrupt: bool,
}

enum CliError {
    Core(Error),
    Invariant(String),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Core(
            Error::LevelTooLarge { .. } | Error::BudgetExceeded { .. } | Error::WindowTooLarge(_),
        ) => 3,
        CliError::Core(_) => 2,
        CliError::Invariant(_) => 1,
        CliError::Io(_) => 1,
    }
}

fn parse_eps(s: &str) -> Result<Rational, CliError> {
    let bad = |m: &str| CliError::Core(Error::BadParameter(format!("eps '{s}': {m}")));
    if let Some((p, q)) = s.split_once('/') {
        let num = BigInt::from_str(p.trim()).map_err(|_| bad("bad numerator"))?;
        let den = BigInt::from_str(q.trim()).map_err(|_| bad("bad denominator"))?;
        if den == BigInt::from(0) {
            return Err(bad("zero denominator"));
        }
        Ok(Rational::new(num, den))
    } else if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{int}{frac}");
        let num = BigInt::from_str(&digits).map_err(|_| bad("bad decimal"))?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        Ok(Rational::new(num, den))
    } else {
        let num = BigInt::from_str(s.trim()).map_err(|_| bad("bad integer"))?;
        Ok(Rational::from_integer(num))
    }
}

fn parse_biguint(s: &str) -> Result<BigUint, CliError> {
    BigUint::from_str(s.trim())
        .map_err(|_| CliError::Core(Error::BadParameter(format!("bad integer '{s}'"))))
}

/// Largest float level whose table fits the memory budget.
fn float_budget_ceiling(budget_mb: u64) -> u32 {
    let budget = budget_mb
        .saturating_mul(1 << 20)
        .min(u64::MAX / 8);
    let mut n = 0u32;
    let mut size = 8u64;
    while n < 39 && size.saturating_mul(3) <= budget {
        size = size.saturating_mul(3);
        n += 1;
    }
    n
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn exact_table_output(d: &syrlab_core::Dist3Adic, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut s = String::from("residue,prob_num,prob_den\n");
            for (y, p) in d.probs().iter().enumerate() {
                writeln!(s, "{y},{},{}", p.numer(), p.denom()).unwrap();
            }
            s.into_bytes()
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Table {
                schema_version: u32,
                n: u32,
                kind: &'static str,
                probs: Vec<String>,
            }
            let t = Table {
                schema_version: SCHEMA_VERSION,
                n: d.level(),
                kind: "exact",
                probs: d.probs().iter().map(|p| format!("{}/{}", p.numer(), p.denom())).collect(),
            };
            serde_json::to_vec_pretty(&t).unwrap()
        }
    }
}

fn float_table_output(d: &syrlab_core::Dist3AdicFloat, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut s = String::from("residue,prob\n");
            for (y, p) in d.probs().iter().enumerate() {
                writeln!(s, "{y},{}", fmt_f64(*p)).unwrap();
            }
            s.into_bytes()
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Table {
                schema_version: u32,
                n: u32,
                kind: &'static str,
                probs: Vec<f64>,
            }
            let t = Table {
                schema_version: SCHEMA_VERSION,
                n: d.level(),
                kind: "float",
                probs: d.probs().to_vec(),
            };
            serde_json::to_vec_pretty(&t).unwrap()
        }
    }
}

struct Ctx {
    seed: u64,
    format: Format,
    out: Option<PathBuf>,
    budget_mb: u64,
}

fn run_command(cli_ctx: &Ctx, command: &Command) -> Result<Vec<Output>, CliError> {
    let format = cli_ctx.format;
    let out = cli_ctx.out.clone();
    match command {
        Command::Orbit(a) => {
            let mut values = Vec::with_capacity(a.steps as usize + 1);
            match a.map {
                MapKind::Syracuse => {
                    let start = OddNatural::new(parse_biguint(&a.n_start)?)?;
                    for t in 0..=a.steps {
                        values.push(syr_iterate(&start, t).value().to_string());
                    }
                }
                MapKind::Collatz => {
                    let mut cur = parse_biguint(&a.n_start)?;
                    if cur == BigUint::from(0u32) {
                        return Err(Error::BadParameter("orbit start must be >= 1".into()).into());
                    }
                    values.push(cur.to_string());
                    for _ in 0..a.steps {
                        cur = collatz_step(&cur);
                        values.push(cur.to_string());
                    }
                }
            }
            let mut line = values.join(" ");
            line.push('\n');
            Ok(vec![Output { dest: out, bytes: line.into_bytes() }])
        }

        Command::Dist(a) => {
            let bytes = match a.kind {
                Kind::Exact => {
                    let d = syracuse_dist_exact_with_ceiling(a.n, a.exact_ceiling)?;
                    exact_table_output(&d, format)
                }
                Kind::Float => {
                    let ceiling = a.float_ceiling.min(float_budget_ceiling(cli_ctx.budget_mb));
                    let d = syracuse_dist_float_with_ceiling(a.n, ceiling)?;
                    float_table_output(&d, format)
                }
            };
            Ok(vec![Output { dest: out, bytes }])
        }

        Command::Project(a) => {
            let bytes = match a.kind {
                Kind::Exact => {
                    let d = syracuse_dist_exact_with_ceiling(a.n, a.exact_ceiling)?;
                    exact_table_output(&d.project(a.k)?, format)
                }
                Kind::Float => {
                    let ceiling = a.float_ceiling.min(float_budget_ceiling(cli_ctx.budget_mb));
                    let d = syracuse_dist_float_with_ceiling(a.n, ceiling)?;
                    float_table_output(&d.project(a.k)?, format)
                }
            };
            Ok(vec![Output { dest: out, bytes }])
        }

        Command::Osc(a) => {
            let d = syracuse_dist_exact_with_ceiling(a.n, a.exact_ceiling)?;
            let osc = d.oscillation(a.m)?;
            let bytes = match format {
                Format::Csv => format!(
                    "n,m,osc_num,osc_den,osc\n{},{},{},{},{}\n",
                    a.n,
                    a.m,
                    osc.numer(),
                    osc.denom(),
                    fmt_f64(osc.to_f64())
                )
                .into_bytes(),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Osc {
                        schema_version: u32,
                        n: u32,
                        m: u32,
                        osc: String,
                        osc_float: f64,
                    }
                    serde_json::to_vec_pretty(&Osc {
                        schema_version: SCHEMA_VERSION,
                        n: a.n,
                        m: a.m,
                        osc: format!("{}/{}", osc.numer(), osc.denom()),
                        osc_float: osc.to_f64(),
                    })
                    .unwrap()
                }
            };
            Ok(vec![Output { dest: out, bytes }])
        }

        Command::Charfn(a) => {
            let ceiling = a.float_ceiling.min(float_budget_ceiling(cli_ctx.budget_mb));
            let rows =
                char_probe_table_with_ceiling(&a.levels, a.random_probes, cli_ctx.seed, ceiling)?;
            let bytes = match format {
                Format::Csv => {
                    let mut s = String::from("n,xi,re,im,abs\n");
                    for r in &rows {
                        writeln!(
                            s,
                            "{},{},{},{},{}",
                            r.n,
                            r.xi,
                            fmt_f64(r.re),
                            fmt_f64(r.im),
                            fmt_f64(r.abs)
                        )
                        .unwrap();
                    }
                    s.into_bytes()
                }
                Format::Json => serde_json::to_vec_pretty(&rows).unwrap(),
            };
            Ok(vec![Output { dest: out, bytes }])
        }

        Command::Charosc(a) => {
            let report = char_osc_inequality_check_with_ceiling(a.n, a.exact_ceiling)?;
            let bytes = match format {
                Format::Csv => format!(
                    "n,oscillation,max_abs_char,max_slack,holds,frequencies_checked\n{},{},{},{},{},{}\n",
                    report.n,
                    fmt_f64(report.oscillation),
                    fmt_f64(report.max_abs_char),
                    fmt_f64(report.max_slack),
                    report.holds,
                    report.frequencies_checked
                )
                .into_bytes(),
                Format::Json => serde_json::to_vec_pretty(&report).unwrap(),
            };
            Ok(vec![Output { dest: out, bytes }])
        }

        Command::ValuationTv(a) => {
            let mut reports = Vec::new();
            for &m in &a.ms {
                reports.push(tv_valuation_vs_geom_with_budget(a.n, m, a.enum_budget)?);
            }
            let bytes = match format {
                Format::Csv => {
                    let mut s = String::from("n,m,tv,escaped_mass_model,escaped_mass_geom\n");
                    for r in &reports {
                        writeln!(
                            s,
                            "{},{},{},{},{}",
                            r.n,
                            r.m,
                            fmt_f64(r.tv.to_f64()),
                            fmt_f64(r.escaped_mass_model.to_f64()),
                            fmt_f64(r.escaped_mass_geom.to_f64())
                        )
                        .unwrap();
                    }
                    s.into_bytes()
                }
                Format::Json => serde_json::to_vec_pretty(&reports).unwrap(),
            };
            Ok(vec![Output { dest: out, bytes }])
        }

        Command::Firstpass(a) => {
            let config = ExperimentConfig {
                x: a.x,
                alpha: a.alpha,
                samples: a.samples,
                seed: Seed(cli_ctx.seed),
                cap: a.cap,
            };
            let report = passage_experiment(&config)?;
            if !passage_support_check(&report) {
                return Err(CliError::Invariant(
                    "first-passage support check failed".into(),
                ));
            }
            #[derive(Serialize)]
            struct Summary {
                schema_version: u32,
                x: u64,
                alpha: f64,
                samples: u64,
                seed: u64,
                n0: u64,
                m0: u64,
                tv: f64,
                exhaustion_rate_y1: f64,
                exhaustion_rate_y2: f64,
                median_time_ratio_y1: f64,
                median_time_ratio_y2: f64,
            }
            let summary = Summary {
                schema_version: SCHEMA_VERSION,
                x: a.x,
                alpha: a.alpha,
                samples: a.samples,
                seed: cli_ctx.seed,
                n0: config.n0(),
                m0: config.m0(),
                tv: report.tv,
                exhaustion_rate_y1: report.arms[0].exhaustion_rate(),
                exhaustion_rate_y2: report.arms[1].exhaustion_rate(),
                median_time_ratio_y1: report.arms[0].median_time_ratio,
                median_time_ratio_y2: report.arms[1].median_time_ratio,
            };
            let mut outputs =
                vec![Output { dest: out, bytes: serde_json::to_vec_pretty(&summary).unwrap() }];
            if let Some(path) = &a.emit_locations {
                let mut s = String::from("y_tag,n,time,location,predicted_time\n");
                for arm in &report.arms {
                    for r in &arm.records {
                        let time = r.time.map_or_else(|| "inf".into(), |t| t.to_string());
                        writeln!(
                            s,
                            "{},{},{},{},{}",
                            arm.label,
                            r.n,
                            time,
                            r.location,
                            fmt_f64(r.predicted_time)
                        )
                        .unwrap();
                    }
                }
                outputs.push(Output { dest: Some(path.clone()), bytes: s.into_bytes() });
            }
            Ok(outputs)
        }

        Command::Triangles(a) => {
            let ctx = FreqContext::new(a.n, a.xi, parse_eps(&a.eps)?)?;
            let window = Window { j_min: a.jmin, j_max: a.jmax, l_min: a.lmin, l_max: a.lmax };
            let d = decompose_black(&ctx, window)?;
            if !d.partition_ok || !d.triangles_black_ok {
                return Err(CliError::Invariant(
                    "triangle decomposition failed its partition invariants".into(),
                ));
            }
            Ok(vec![Output {
                dest: out,
                bytes: serde_json::to_vec_pretty(&d.triangles).unwrap(),
            }])
        }

        Command::Gridmap(a) => {
            let ctx = FreqContext::new(a.n, a.xi, parse_eps(&a.eps)?)?;
            if a.jmin < 1 || a.jmax > ctx.strip_max() || a.jmin > a.jmax || a.lmin > a.lmax {
                return Err(Error::BadParameter("window outside the strip".into()).into());
            }
            let mut s = String::from("j,l,color,theta_num\n");
            for j in a.jmin..=a.jmax {
                for l in a.lmin..=a.lmax {
                    let theta = ctx.theta(j, l);
                    let color =
                        if ctx.is_black_theta(&theta) { "black" } else { "white" };
                    writeln!(s, "{j},{l},{color},{}", theta.numerator()).unwrap();
                }
            }
            Ok(vec![Output { dest: out, bytes: s.into_bytes() }])
        }

        Command::Renewal(a) => {
            let stats = renewal_stats(a.s, a.samples, a.overshoot_threshold, Seed(cli_ctx.seed));
            Ok(vec![Output { dest: out, bytes: serde_json::to_vec_pretty(&stats).unwrap() }])
        }

        Command::Qest(a) => {
            let ctx = FreqContext::new(a.n, a.xi, parse_eps(&a.eps)?)?;
            let est = estimate_q(&ctx, a.j, a.l, a.samples, Seed(cli_ctx.seed))?;
            #[derive(Serialize)]
            struct Est {
                schema_version: u32,
                estimate: f64,
                stderr: f64,
                samples: u64,
                seed: u64,
            }
            let e = Est {
                schema_version: SCHEMA_VERSION,
                estimate: est.estimate,
                stderr: est.stderr,
                samples: est.samples,
                seed: cli_ctx.seed,
            };
            Ok(vec![Output { dest: out, bytes: serde_json::to_vec_pretty(&e).unwrap() }])
        }

        Command::Whitebound(a) => {
            let ctx = FreqContext::new(a.n, a.xi, parse_eps(&a.eps)?)?;
            let est = white_hit_bound(&ctx, a.samples, Seed(cli_ctx.seed))?;
            #[derive(Serialize)]
            struct Est {
                schema_version: u32,
                estimate: f64,
                stderr: f64,
                samples: u64,
                seed: u64,
            }
            let e = Est {
                schema_version: SCHEMA_VERSION,
                estimate: est.estimate,
                stderr: est.stderr,
                samples: est.samples,
                seed: cli_ctx.seed,
            };
            Ok(vec![Output { dest: out, bytes: serde_json::to_vec_pretty(&e).unwrap() }])
        }

        Command::Selftest(a) => {
            let results = syrlab_core::selftest::run(a.corrupt);
            let mut s = String::new();
            let mut failed = 0;
            for r in &results {
                if r.passed {
                    writeln!(s, "{}: ok", r.name).unwrap();
                } else {
                    failed += 1;
                    writeln!(s, "{}: FAIL ({})", r.name, r.detail).unwrap();
                }
            }
            writeln!(s, "{} checks, {} failed", results.len(), failed).unwrap();
            let output = Output { dest: out, bytes: s.into_bytes() };
            if failed > 0 {
                // Still print the report before signalling failure.
                let record = emit(&output)?;
                let _ = record;
                return Err(CliError::Invariant(format!("{failed} selftest checks failed")));
            }
            Ok(vec![output])
        }
    }
}

fn command_meta(command: &Command) -> (&'static str, serde_json::Value) {
    match command {
        Command::Orbit(a) => ("orbit", serde_json::to_value(a).unwrap()),
        Command::Dist(a) => ("dist", serde_json::to_value(a).unwrap()),
        Command::Project(a) => ("project", serde_json::to_value(a).unwrap()),
        Command::Osc(a) => ("osc", serde_json::to_value(a).unwrap()),
        Command::Charfn(a) => ("charfn", serde_json::to_value(a).unwrap()),
        Command::Charosc(a) => ("charosc", serde_json::to_value(a).unwrap()),
        Command::ValuationTv(a) => ("valuation-tv", serde_json::to_value(a).unwrap()),
        Command::Firstpass(a) => ("firstpass", serde_json::to_value(a).unwrap()),
        Command::Triangles(a) => ("triangles", serde_json::to_value(a).unwrap()),
        Command::Gridmap(a) => ("gridmap", serde_json::to_value(a).unwrap()),
        Command::Renewal(a) => ("renewal", serde_json::to_value(a).unwrap()),
        Command::Qest(a) => ("qest", serde_json::to_value(a).unwrap()),
        Command::Whitebound(a) => ("whitebound", serde_json::to_value(a).unwrap()),
        Command::Selftest(a) => ("selftest", serde_json::to_value(a).unwrap()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()
        {
            eprintln!("syrlab: failed to configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }

    let ctx = Ctx {
        seed: cli.seed,
        format: cli.format,
        out: cli.out.clone(),
        budget_mb: cli.budget_mb,
    };
    let (name, mut params) = command_meta(&cli.command);
    if let serde_json::Value::Object(map) = &mut params {
        map.insert("format".into(), serde_json::to_value(cli.format).unwrap());
        map.insert("budget_mb".into(), serde_json::json!(cli.budget_mb));
    }

    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        run_command(&ctx, &cli.command)
    }))
    .unwrap_or_else(|_| Err(CliError::Invariant("panic in analysis".into())));
    match result {
        Ok(outputs) => {
            let mut records = Vec::new();
            for o in &outputs {
                match emit(o) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        eprintln!("syrlab: write failed: {e}");
                        return ExitCode::from(1);
                    }
                }
            }
            let manifest = RunManifest {
                schema_version: SCHEMA_VERSION,
                tool: "syrlab",
                version: env!("CARGO_PKG_VERSION"),
                subcommand: name.to_string(),
                params,
                seed: cli.seed,
                outputs: records,
            };
            println!("{}", serde_json::to_string(&manifest).unwrap());
            ExitCode::SUCCESS
        }
        Err(err) => {
            match &err {
                CliError::Core(e) => eprintln!("syrlab {name}: {e}"),
                CliError::Invariant(m) => eprintln!("syrlab {name}: invariant violation: {m}"),
                CliError::Io(e) => eprintln!("syrlab {name}: io error: {e}"),
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
