//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on configuration or validation errors, 3 on
//! I/O errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wegsim::analysis::{self, RegimeSpec};
use wegsim::config::{parse_policy_override, RunConfig};
use wegsim::error::Error;
use wegsim::sim::{
    metrics_csv_row, run_simulation, write_metrics_csv, write_step_log, METRICS_CSV_HEADER,
};
use wegsim::stream::load_trace;
use wegsim::sweep::{parse_value, sweep};

#[derive(Parser)]
#[command(name = "wegsim", version, about = "Windowed ε-greedy specialization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy over a stream and report metrics.
    Simulate(SimulateArgs),
    /// Closed-form analysis utilities.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Rerun a config with one parameter set to each of several values.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the policy: weg | oracle | fixed-window=<w> | variable-skew | simple-exit.
    #[arg(long)]
    policy: Option<String>,
    /// Write per-repetition metrics CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-step JSONL log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Detection probabilities p_in/p_out per regime (built-ins by default).
    WindowSupport(WindowSupportArgs),
    /// Cumulative skew curves of a recorded trace.
    Skew(SkewArgs),
}

#[derive(Args)]
struct WindowSupportArgs {
    /// CSV of regimes: index,N,a,n,p,w,c (p empty or N/A when n = 0).
    #[arg(long)]
    regimes: Option<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SkewArgs {
    /// Label trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Items per segment.
    #[arg(long)]
    segment_items: usize,
    /// Comma-separated skew percentages.
    #[arg(long, default_value = "60,70,80,90")]
    skews: String,
    /// Write the curves here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Dotted path of the swept field, e.g. weg.epsilon or
    /// stream.segments.*.length.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long)]
    values: String,
    /// Write the metrics CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(AnalyzeCommand::WindowSupport(args)) => cmd_window_support(args),
        Command::Analyze(AnalyzeCommand::Skew(args)) => cmd_skew(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

/// Open a sink: the given file, or stdout.
fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(policy) = &args.policy {
        let (policy, variant) = parse_policy_override(policy)?;
        config.run.policy = policy;
        if let Some(v) = variant {
            let mut weg = config.weg_config();
            weg.variant = v;
            config.weg = Some(weg);
        }
    }
    config.validate()?;
    let report = run_simulation(&config)?;

    if let Some(out) = &args.out {
        let rows: Vec<_> = report.repetitions.iter().map(|r| &r.metrics).collect();
        write_metrics_csv(BufWriter::new(File::create(out)?), &rows)?;
    }
    if let Some(log) = &args.log {
        write_step_log(BufWriter::new(File::create(log)?), &report)?;
    }

    println!(
        "policy={} repetitions={} items={}",
        report.repetitions[0].metrics.policy,
        report.repetitions.len(),
        report.repetitions[0].metrics.items
    );
    println!(
        "mean: accuracy={:.4} cost={:.3} ms/item speedup={:.2}x retargets={:.1}",
        report.mean_accuracy(),
        report.mean_cost_ms(),
        report.mean_speedup(),
        report.mean_retargets()
    );
    if args.out.is_none() {
        println!("{METRICS_CSV_HEADER}");
        for rep in &report.repetitions {
            println!("{}", metrics_csv_row(&rep.metrics));
        }
    }
    Ok(())
}

/// Format a probability the way the reference tables print: three decimals
/// at or above 1e-2, scientific with three significant figures below.
fn format_probability(p: f64) -> String {
    if p >= 1e-2 {
        format!("{p:.3}")
    } else {
        format!("{p:.2E}")
    }
}

fn parse_regimes_csv(path: &PathBuf) -> Result<Vec<RegimeSpec>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut regimes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_number = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("index") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::config(format!(
                "regimes line {line_number}: expected 7 fields index,N,a,n,p,w,c"
            )));
        }
        let parse_u32 = |s: &str, name: &str| -> Result<u32, Error> {
            s.parse()
                .map_err(|_| Error::config(format!("regimes line {line_number}: bad {name} {s:?}")))
        };
        let parse_f64 = |s: &str, name: &str| -> Result<f64, Error> {
            s.parse()
                .map_err(|_| Error::config(format!("regimes line {line_number}: bad {name} {s:?}")))
        };
        let n_dominant = parse_u32(fields[3], "n")?;
        let skew = match fields[4] {
            "" | "N/A" | "NA" | "n/a" => None,
            other => Some(parse_f64(other, "p")?),
        };
        regimes.push(RegimeSpec {
            num_classes: parse_u32(fields[1], "N")?,
            oracle_accuracy: parse_f64(fields[2], "a")?,
            n_dominant,
            skew,
            window: parse_u32(fields[5], "w")?,
            support: parse_u32(fields[6], "c")?,
        });
    }
    if regimes.is_empty() {
        return Err(Error::config("regimes file has no data rows"));
    }
    Ok(regimes)
}

fn cmd_window_support(args: WindowSupportArgs) -> Result<(), Error> {
    let regimes = match &args.regimes {
        Some(path) => parse_regimes_csv(path)?,
        None => analysis::builtin_regimes(),
    };
    let rows = analysis::window_support_table(&regimes)?;
    let mut out = sink(&args.out)?;
    writeln!(out, "index,N,a,n,p,w,c,p_in,p_out")?;
    for row in rows {
        let r = row.regime;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.index,
            r.num_classes,
            r.oracle_accuracy,
            r.n_dominant,
            r.skew.map(|p| p.to_string()).unwrap_or_else(|| "N/A".to_string()),
            r.window,
            r.support,
            row.p_in.map(format_probability).unwrap_or_else(|| "N/A".to_string()),
            format_probability(row.p_out),
        )?;
    }
    Ok(())
}

fn cmd_skew(args: SkewArgs) -> Result<(), Error> {
    let trace = load_trace(&args.trace)?;
    let labels: Vec<u32> = trace.items.iter().map(|it| it.true_label.0).collect();
    let skews: Vec<f64> = args
        .skews
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::config(format!("bad skew percentage {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let curves = analysis::skew_cdf(&labels, args.segment_items, &skews)?;
    let mut out = sink(&args.out)?;
    writeln!(out, "skew,n,fraction")?;
    for curve in curves {
        for (i, fraction) in curve.fractions.iter().enumerate() {
            writeln!(out, "{},{},{}", curve.skew_percent, i + 1, fraction)?;
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let config = RunConfig::from_file(&args.config)?;
    config.validate()?;
    let values: Vec<serde_json::Value> =
        args.values.split(',').map(|v| parse_value(v.trim())).collect();
    let points = sweep(&config, &args.param, &values)?;
    let mut out = sink(&args.out)?;
    writeln!(out, "param,value,{METRICS_CSV_HEADER}")?;
    for point in points {
        for rep in &point.report.repetitions {
            writeln!(out, "{},{},{}", args.param, point.value, metrics_csv_row(&rep.metrics))?;
        }
    }
    Ok(())
}
