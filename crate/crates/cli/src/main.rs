use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use admd::{
    build_example, load_problem, run, run_bench, verify_run, BenchCell, PaperExample, Point, Policy, ProblemInstance,
    ProxStructure, PublishedCell, Regime, RunConfig, SolverReport, StopReason, VerificationResult,
    DEFAULT_MAX_ITERATIONS,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "admd",
    version,
    about = "Adaptive mirror descent for convex programs with functional constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and print the report.
    Run(RunArgs),
    /// Run the four aggregate/first-violated configurations on built-in examples.
    Bench(BenchArgs),
    /// Solve one problem and check the convergence certificates.
    Verify(RunArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in example (1..=6).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    example: Option<u8>,
    /// TOML problem file.
    #[arg(long)]
    problem_file: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value_t = RegimeArg::Lipschitz)]
    regime: RegimeArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::FirstViolated)]
    policy: PolicyArg,
    /// Target accuracy; defaults to the problem's own.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Radius bound with d(x*) <= theta0²; defaults to the problem's own.
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iter: u64,
    #[command(flatten)]
    out: OutputArgs,
    /// Record every step (needed for the v_f certificate).
    #[arg(long)]
    history: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated example ids; an empty string gives an empty table.
    #[arg(long, default_value = DEFAULT_BENCH_IDS)]
    examples: String,
    #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iter: u64,
    #[command(flatten)]
    out: OutputArgs,
    /// Record step history so verification includes the v_f certificate.
    #[arg(long)]
    history: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Lipschitz,
    Nonstandard,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    AggregateMax,
    FirstViolated,
    MaxViolation,
    MinDualNorm,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Lipschitz => Regime::LipschitzObjective,
            RegimeArg::Nonstandard => Regime::NonstandardGrowth,
        }
    }
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::AggregateMax => Policy::AggregateMax,
            PolicyArg::FirstViolated => Policy::FirstViolated,
            PolicyArg::MaxViolation => Policy::MaxViolation,
            PolicyArg::MinDualNorm => Policy::MinDualNormViolated,
        }
    }
}

const DEFAULT_BENCH_IDS: &str = "1,2,3,4,5,6";

const CSV_COLUMNS: [&str; 9] = [
    "example",
    "regime",
    "policy",
    "iterations",
    "productive",
    "time_s",
    "objective_gap",
    "max_violation",
    "stop_reason",
];

/// A loaded problem with everything a run needs.
struct Problem {
    label: String,
    instance: ProblemInstance,
    prox: ProxStructure,
    epsilon: f64,
    /// `(x*, f*)` or a feasible reference point, for gaps and certificates.
    comparator: Option<(Point, f64)>,
}

impl Problem {
    fn load(args: &RunArgs) -> Result<Self> {
        let mut p = match (&args.source.example, &args.source.problem_file) {
            (Some(id), _) => {
                let ex = build_example(*id)?;
                Self {
                    label: id.to_string(),
                    prox: ex.prox()?,
                    epsilon: ex.settings.epsilon,
                    comparator: Some(ex.comparator().clone()),
                    instance: ex.instance,
                }
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let loaded = load_problem(&text).with_context(|| format!("loading {}", path.display()))?;
                Self {
                    label: path.display().to_string(),
                    comparator: loaded.instance.known_optimum().cloned(),
                    instance: loaded.instance,
                    prox: loaded.prox,
                    epsilon: loaded.epsilon,
                }
            }
            (None, None) => bail!("one of --example or --problem-file is required"),
        };
        if let Some(t) = args.theta0 {
            p.prox = p.prox.with_theta0(t)?;
        }
        if let Some(e) = args.epsilon {
            p.epsilon = e;
        }
        Ok(p)
    }

    fn solve(&self, args: &RunArgs) -> Result<SolverReport> {
        let cfg = RunConfig::new(self.epsilon, args.regime.into(), args.policy.into())?
            .with_max_iterations(args.max_iter)?
            .with_history(args.history);
        Ok(run(&self.instance, &self.prox, &cfg)?)
    }

    fn gap(&self, r: &SolverReport) -> Option<f64> {
        self.comparator.as_ref().map(|c| r.output_objective - c.1)
    }
}

/// Serialized (kebab-case) name of an enum value.
fn name<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn iterations(r: &SolverReport) -> String {
    match r.stop_reason {
        StopReason::IterationCap => format!(">{}", r.total_steps),
        _ => r.total_steps.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

fn csv_row(label: &str, r: &SolverReport, gap: Option<f64>) -> [String; 9] {
    [
        label.to_string(),
        name(&r.regime),
        name(&r.policy),
        r.total_steps.to_string(),
        r.productive_count.to_string(),
        format!("{:.3}", r.wall_time.as_secs_f64()),
        gap.map(|g| g.to_string()).unwrap_or_default(),
        r.output_max_violation.to_string(),
        name(&r.stop_reason),
    ]
}

fn write_csv(rows: &[[String; 9]]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn emit(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn report_text(p: &Problem, r: &SolverReport) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<16}{v}\n"));
    line("problem", p.label.clone());
    line("regime", name(&r.regime));
    line("policy", name(&r.policy));
    line("epsilon", r.epsilon.to_string());
    line("stop reason", name(&r.stop_reason));
    line(
        "iterations",
        format!(
            "{} (productive {}, non-productive {})",
            iterations(r),
            r.productive_count,
            r.nonproductive_count
        ),
    );
    line("objective", format!("{:.6e}", r.output_objective));
    line("objective gap", opt(p.gap(r)));
    line("max violation", format!("{:.6e}", r.output_max_violation));
    line(
        "a-priori bound",
        r.a_priori_bound.map_or_else(|| "-".into(), |b| b.to_string()),
    );
    line("wall time", format!("{:.3} s", r.wall_time.as_secs_f64()));
    let coords: Vec<String> = r.output_point.iter().map(|v| format!("{v:.6}")).collect();
    line("output point", format!("[{}]", coords.join(", ")));
    s.push_str("constraints\n");
    for (m, v) in r.constraint_values.iter().enumerate() {
        s.push_str(&format!("  g_{:<4}{v:.6e}\n", m + 1));
    }
    s
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let p = Problem::load(args)?;
    let r = p.solve(args)?;
    let text = match args.out.format {
        Format::Text => report_text(&p, &r),
        Format::Json => serde_json::to_string_pretty(&r)? + "\n",
        Format::Csv => write_csv(&[csv_row(&p.label, &r, p.gap(&r))])?,
    };
    emit(&args.out, &text)?;
    Ok(if r.converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify(args: &RunArgs) -> Result<ExitCode> {
    let p = Problem::load(args)?;
    let r = p.solve(args)?;
    let v = verify_run(&r, &p.instance, &p.prox, p.comparator.as_ref())?;
    let text = match args.out.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "problem": p.label,
                "regime": r.regime,
                "policy": r.policy,
                "iterations": r.total_steps,
                "stop_reason": r.stop_reason,
                "passed": v.passed(),
                "verification": v,
            }))? + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["check", "passed", "detail"])?;
            for c in &v.checks {
                w.write_record([c.name.as_str(), &c.passed.to_string(), &c.detail])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => verify_text(&p, &r, &v),
    };
    emit(&args.out, &text)?;
    Ok(if v.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn verify_text(p: &Problem, r: &SolverReport, v: &VerificationResult) -> String {
    let mut s = format!(
        "verify {} ({}, {}): N = {}, {}\n",
        p.label,
        name(&r.regime),
        name(&r.policy),
        iterations(r),
        name(&r.stop_reason)
    );
    for c in &v.checks {
        s.push_str(&format!(
            "  {} {:<18}{}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let failed = v.failures().count();
    if v.passed() {
        s.push_str("all checks passed\n");
    } else {
        s.push_str(&format!("{failed} check(s) failed\n"));
    }
    s
}

fn parse_ids(list: &str) -> Result<Vec<u8>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let id: u8 = s.parse().with_context(|| format!("invalid example id {s:?}"))?;
            if !(1..=6).contains(&id) {
                bail!("example id must be in 1..=6, got {id}");
            }
            Ok(id)
        })
        .collect()
}

fn published_text(c: &PublishedCell) -> String {
    match c {
        PublishedCell::Completed { iterations, .. } => iterations.to_string(),
        PublishedCell::Exceeded { cap, .. } => format!(">{cap}"),
        PublishedCell::NotReported => "-".into(),
    }
}

fn bench_text(table: &[(PaperExample, Vec<BenchCell>)]) -> String {
    let mut s = format!(
        "{:<8}{:<22}{:<16}{:>12}{:>12}{:>10}{:>14}{:>14}  {}\n",
        "example", "regime", "policy", "iterations", "published", "time_s", "gap", "max_viol", "verified"
    );
    for (ex, cells) in table {
        for c in cells {
            let head = format!("{:<8}{:<22}{:<16}", ex.id, name(&c.regime), name(&c.policy));
            match &c.outcome {
                Ok((r, v)) => s.push_str(&format!(
                    "{head}{:>12}{:>12}{:>10.3}{:>14}{:>14.6e}  {}\n",
                    iterations(r),
                    published_text(&c.published),
                    r.wall_time.as_secs_f64(),
                    opt(c.objective_gap(ex)),
                    r.output_max_violation,
                    if v.passed() {
                        "pass".to_string()
                    } else if !v.criterion_met {
                        "not certified".to_string()
                    } else {
                        format!(
                            "FAIL ({})",
                            v.failures().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", ")
                        )
                    }
                )),
                Err(e) => s.push_str(&format!("{head}error: {e}\n")),
            }
        }
    }
    s
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let ids = parse_ids(&args.examples)?;
    let table = run_bench(&ids, args.max_iter, args.history)?;
    let text = match args.out.format {
        Format::Text => bench_text(&table),
        Format::Csv => {
            let rows: Vec<[String; 9]> = table
                .iter()
                .flat_map(|(ex, cells)| {
                    cells.iter().filter_map(move |c| {
                        c.outcome
                            .as_ref()
                            .ok()
                            .map(|(r, _)| csv_row(&ex.id.to_string(), r, c.objective_gap(ex)))
                    })
                })
                .collect();
            write_csv(&rows)?
        }
        Format::Json => {
            let rows: Vec<_> = table
                .iter()
                .flat_map(|(ex, cells)| {
                    cells.iter().map(move |c| match &c.outcome {
                        Ok((r, v)) => json!({
                            "example": ex.id,
                            "regime": c.regime,
                            "policy": c.policy,
                            "iterations": r.total_steps,
                            "productive": r.productive_count,
                            "time_s": r.wall_time.as_secs_f64(),
                            "objective_gap": c.objective_gap(ex),
                            "max_violation": r.output_max_violation,
                            "stop_reason": r.stop_reason,
                            "verified": v.passed(),
                            "published": c.published,
                        }),
                        Err(e) => json!({
                            "example": ex.id,
                            "regime": c.regime,
                            "policy": c.policy,
                            "error": e.to_string(),
                        }),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&rows)? + "\n"
        }
    };
    emit(&args.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
