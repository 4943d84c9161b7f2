//! `bhz`: bounded-horizon checking of inductive invariants.
//!
//! Exit codes: 0 proved, 1 unknown, 2 ill-formed input or usage error,
//! 3 resource limit.

use bhz::checker::{self, CheckOptions, CheckReport, CheckVerdict};
use bhz::frontend::{parse, print_model, ProgramModel};
use bhz::horizon::Encoding;
use bhz::instrument;
use bhz::models::render_text;
use bhz::tiling::{generate_source, TileSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "bhz", version, about = "Bounded-horizon checker for inductive invariants")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check initiation, safety and consecution at one bound.
    Check(CheckArgs),
    /// Check at every bound of a range.
    Sweep(CheckArgs),
    /// Generate a tiling system from a JSON tile spec.
    GenTiling {
        spec: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Program transformations.
    #[command(subcommand)]
    Instrument(InstrumentCmd),
    /// Write the bounded ground instances as SMT-LIB.
    ExportGround {
        #[command(flatten)]
        check: CheckArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum InstrumentCmd {
    /// Insert a local instantiation of a derived relation into an action.
    LocalInst {
        file: PathBuf,
        #[arg(long)]
        derived: String,
        #[arg(long)]
        action: String,
        /// Comma-separated argument variables.
        #[arg(long, default_value = "")]
        args: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Replace every invariant by its expansion I_r (or I* with `--star`).
    Expand {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long)]
        star: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Enumerate,
    Guard,
    Approx,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Encoding {
        match e {
            EncodingArg::Enumerate => Encoding::Enumerate,
            EncodingArg::Guard => Encoding::Guard,
            EncodingArg::Approx => Encoding::Approx,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 1)]
    bound: usize,
    #[arg(long, value_enum, default_value = "enumerate")]
    encoding: EncodingArg,
    /// Inclusive range `a..b`.
    #[arg(long)]
    sweep_bounds: Option<String>,
    #[arg(long)]
    action: Option<String>,
    /// Seconds per VC.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    #[arg(long, default_value_t = 1_000_000)]
    instance_limit: usize,
    /// Write the ground instances of every VC as SMT-LIB to this file.
    #[arg(long)]
    dump_ground: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Accepted for reproducible runs; checking is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// One consecution VC for the whole transition relation.
    #[arg(long)]
    whole_delta: bool,
    /// Use the plain consecution VC even for actions with `sk_` names.
    #[arg(long)]
    no_skolem_aware: bool,
    /// Build the full instantiation set up front instead of lazily.
    #[arg(long)]
    eager: bool,
}

impl CheckArgs {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            bound: self.bound,
            encoding: self.encoding.into(),
            timeout: Some(Duration::from_secs(self.timeout)),
            instance_limit: self.instance_limit,
            action: self.action.clone(),
            whole_delta: self.whole_delta,
            skolem_aware: !self.no_skolem_aware,
            jobs: self.jobs,
            eager: self.eager,
        }
    }
}

struct Fail(u8, String);

fn usage(msg: impl Into<String>) -> Fail {
    Fail(2, msg.into())
}

fn load(path: &Path) -> Result<ProgramModel, Fail> {
    let src = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse(&src).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            emit(text);
            Ok(())
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn parse_range(s: &str) -> Result<(usize, usize), Fail> {
    let bad = || usage(format!("bad bound range `{s}`, expected a..b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn color_enabled() -> bool {
    match std::env::var("BHZ_COLOR").as_deref() {
        Ok("1") | Ok("always") | Ok("true") => true,
        Ok("auto") => std::io::stdout().is_terminal(),
        _ => false,
    }
}

fn paint(v: CheckVerdict, color: bool) -> String {
    if !color {
        return v.to_string();
    }
    let code = match v {
        CheckVerdict::Proved => "32",
        CheckVerdict::Unknown => "33",
        CheckVerdict::IllFormed | CheckVerdict::Resource => "31",
    };
    format!("\x1b[{code}m{v}\x1b[0m")
}

fn render_report(r: &CheckReport, color: bool) -> String {
    let mut s = format!("bound {} ({})\n", r.bound, r.encoding);
    for d in &r.diagnostics {
        s.push_str(&format!("  error: {d}\n"));
    }
    for v in &r.vcs {
        let mut line = format!("  {:<40} {}", v.name(), paint(v.verdict, color));
        if v.complete {
            line.push_str("  complete");
        }
        line.push_str(&format!("  {} instances, {} terms, {} ms", v.instances, v.terms, v.millis));
        if let Some(why) = &v.reason {
            line.push_str(&format!("  ({why})"));
        }
        s.push_str(&line);
        s.push('\n');
    }
    for v in &r.vcs {
        if let Some(pm) = &v.partial_model {
            s.push_str(&format!("\n{}:\n", v.name()));
            s.push_str(&render_text(pm, v.boundary.as_ref()));
        }
    }
    s.push_str(&format!("verdict: {}\n", paint(r.verdict, color)));
    s
}

fn code(v: CheckVerdict) -> u8 {
    v.exit_code() as u8
}

fn run_check(a: &CheckArgs, force_sweep: bool) -> Result<u8, Fail> {
    let m = load(&a.file)?;
    let opts = a.options();
    if let Some(p) = &a.dump_ground {
        let text = checker::export_ground(&m, &opts).map_err(|e| usage(e.to_string()))?;
        std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    }
    let range = match (&a.sweep_bounds, force_sweep) {
        (Some(s), _) => Some(parse_range(s)?),
        (None, true) => Some((0, a.bound)),
        (None, false) => None,
    };
    let color = color_enabled() && a.format == Format::Text;
    match range {
        None => {
            let r = checker::check(&m, &opts).map_err(|e| usage(e.to_string()))?;
            match a.format {
                Format::Json => emit(&(serde_json::to_string_pretty(&r).expect("serializable") + "\n")),
                Format::Text => emit(&render_report(&r, color)),
            }
            Ok(code(r.verdict))
        }
        Some((lo, hi)) => {
            let rs = checker::sweep(&m, lo, hi, &opts).map_err(|e| usage(e.to_string()))?;
            let minimal = checker::minimal_proved_bounds(&rs);
            match a.format {
                Format::Json => {
                    let doc = serde_json::json!({
                        "schema": bhz::models::MODEL_SCHEMA,
                        "sweep": rs,
                        "minimalProvedBound": minimal,
                    });
                    emit(&(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"));
                }
                Format::Text => {
                    let mut s: String = rs.iter().map(|r| render_report(r, color)).collect();
                    s.push_str("minimal proved bounds:\n");
                    for (vc, b) in &minimal {
                        match b {
                            Some(b) => s.push_str(&format!("  {vc:<40} {b}\n")),
                            None => s.push_str(&format!("  {vc:<40} none\n")),
                        }
                    }
                    emit(&s);
                }
            }
            let last = rs.last().map(|r| r.verdict).unwrap_or(CheckVerdict::IllFormed);
            let proved = rs.iter().any(|r| r.verdict == CheckVerdict::Proved);
            Ok(if proved { 0 } else { code(last) })
        }
    }
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match cli.cmd {
        Cmd::Check(a) => run_check(&a, false),
        Cmd::Sweep(a) => run_check(&a, true),
        Cmd::GenTiling { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
            let spec = TileSpec::from_json(&text).map_err(|e| usage(e.to_string()))?;
            let src = generate_source(&spec).map_err(|e| usage(e.to_string()))?;
            write_out(&out, &src)?;
            Ok(0)
        }
        Cmd::Instrument(InstrumentCmd::LocalInst { file, derived, action, args, out }) => {
            let m = load(&file)?;
            let (m2, fresh) = instrument::local_instantiate(&m, &derived, &action, &instrument::parse_args(&args))
                .map_err(|e| usage(e.to_string()))?;
            let names: Vec<String> = fresh.iter().map(|n| n.to_string()).collect();
            eprintln!("new locals: {}", names.join(", "));
            write_out(&out, &print_model(&m2))?;
            Ok(0)
        }
        Cmd::Instrument(InstrumentCmd::Expand { file, depth, star, out }) => {
            let m = load(&file)?;
            let m2 = instrument::expand_model(&m, depth, star).map_err(|e| usage(e.to_string()))?;
            write_out(&out, &print_model(&m2))?;
            Ok(0)
        }
        Cmd::ExportGround { check, out } => {
            let m = load(&check.file)?;
            let text = checker::export_ground(&m, &check.options()).map_err(|e| usage(e.to_string()))?;
            write_out(&out, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(c) => ExitCode::from(c),
        Err(Fail(c, msg)) => {
            eprintln!("bhz: {msg}");
            ExitCode::from(c)
        }
    }
}
