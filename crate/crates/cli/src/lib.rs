//! Batch front-end: loads components and finite models, generates and
//! discharges proof obligations, and renders a report.
//!
//! Exit codes: 0 all discharged, 1 something refuted or ill-defined,
//! 2 usage, parse or structural error, 3 deadline exceeded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bifc_core::ast::MachineDef;
use bifc_core::eval::{Env, FiniteModel};
use bifc_core::parser::{parse_machine_file, parse_model_file, pretty_print, ModelSpec};
use bifc_core::pattern::{
    compile_machine, context_pos, interface_pos, internal_inconsistency, prefixed, synthesize_adapter, ConversionNames,
};
use bifc_core::po::{
    consistency_pos, discharge, refinement_pos, retrenchment_pos, CheckResult, DischargeOptions, ProofObligation, Status,
};
use bifc_core::search::render_env;
use bifc_core::soundness::soundness_check;
use bifc_core::value::Value;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("{0}")]
    Input(String),
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

// ---- arguments ----------------------------------------------------------

#[derive(Parser, Debug)]
#[command(name = "bifc", version, about = "Finite checking of B consistency, refinement and retrenchment obligations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Abort enumeration after this many seconds (exit code 3).
    #[arg(long, value_name = "SECONDS")]
    timeout: Option<f64>,
    /// Include per-obligation timings in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Consistency obligations of a machine.
    Check {
        machine: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Refinement obligations between a machine and its refinement.
    Refine {
        #[arg(value_name = "ABSTRACT")]
        abstract_: PathBuf,
        refinement: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Local and joint obligations of a retrenchment.
    Retrench {
        #[arg(value_name = "ABSTRACT")]
        abstract_: PathBuf,
        retrenchment: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// The signature-change refinement pattern.
    Pattern {
        #[command(subcommand)]
        command: PatternCommand,
    },
    /// Randomised soundness check of the pattern.
    Soundness {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest carrier size.
        #[arg(long, default_value_t = 6)]
        max_size: usize,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args, Debug, Clone)]
struct PatternArgs {
    #[arg(long = "abstract")]
    abstract_: PathBuf,
    #[arg(long)]
    concrete: PathBuf,
    /// Conversion function names, `AofC,CofA`.
    #[arg(long, value_name = "AOFC,COFA")]
    conv: String,
    /// Component declaring the conversions, added to SEES.
    #[arg(long)]
    context: Option<String>,
    /// Operation correspondence `abs=conc,...`; by position when omitted.
    #[arg(long, value_name = "MAP")]
    map: Option<String>,
}

#[derive(Subcommand, Debug)]
enum PatternCommand {
    /// Context properties of both components and the interface properties, per operation pair.
    Check {
        #[command(flatten)]
        args: PatternArgs,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Write the adapter refinement.
    Instantiate {
        #[command(flatten)]
        args: PatternArgs,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

// ---- reports ------------------------------------------------------------

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PoReport {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, serde_json::Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    #[serde(skip)]
    witness_text: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct Summary {
    pub total: usize,
    pub discharged: usize,
    pub refuted: usize,
    pub ill_defined: usize,
    pub timeout: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub results: Vec<PoReport>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn value_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(i) => (*i).into(),
        Value::Pair(p) => serde_json::Value::Array(vec![value_json(&p.0), value_json(&p.1)]),
        Value::Set(s) => serde_json::Value::Array(s.iter().map(value_json).collect()),
    }
}

fn witness_json(env: &Env) -> BTreeMap<String, serde_json::Value> {
    env.iter().map(|(k, v)| (k.clone(), value_json(v))).collect()
}

impl Report {
    pub fn new(command: Vec<String>) -> Self {
        Report {
            tool: "bifc".into(),
            version: VERSION.into(),
            command,
            results: Vec::new(),
            summary: Summary::default(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, r: &CheckResult, timings: bool) {
        self.push_raw(r.name.clone(), r.status, r.witness.as_ref(), r.message.clone(), timings.then_some(r.elapsed));
    }

    fn push_raw(&mut self, name: String, status: Status, witness: Option<&Env>, message: Option<String>, elapsed: Option<Duration>) {
        let s = &mut self.summary;
        s.total += 1;
        match status {
            Status::Discharged => s.discharged += 1,
            Status::Refuted => s.refuted += 1,
            Status::IllDefined => s.ill_defined += 1,
            Status::Timeout => s.timeout += 1,
        }
        self.results.push(PoReport {
            name,
            status: status.as_str().into(),
            witness: witness.map(witness_json),
            witness_text: witness.map(render_env),
            message,
            elapsed_ms: elapsed.map(|d| d.as_secs_f64() * 1e3),
        });
    }

    /// 0 when everything is discharged, 3 on any timeout, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        let s = &self.summary;
        if s.timeout > 0 {
            3
        } else if s.refuted + s.ill_defined > 0 {
            1
        } else {
            0
        }
    }
}

pub fn render_report(r: &Report, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(r).expect("report serializes") + "\n",
        Format::Text => {
            let mut out = String::new();
            let width = r.results.iter().map(|p| p.name.len()).max().unwrap_or(0);
            for p in &r.results {
                out.push_str(&format!("{:width$}  {}", p.name, p.status));
                if let Some(w) = &p.witness_text {
                    out.push_str(&format!("  {w}"));
                }
                if let Some(m) = &p.message {
                    out.push_str(&format!("  ({m})"));
                }
                if let Some(ms) = p.elapsed_ms {
                    out.push_str(&format!("  [{ms:.1} ms]"));
                }
                out.push('\n');
            }
            for n in &r.notes {
                out.push_str(&format!("note: {n}\n"));
            }
            let s = &r.summary;
            let mut line = format!("{} POs: ", s.total);
            if s.ill_defined > 0 {
                line.push_str(&format!("{} ill-defined, ", s.ill_defined));
            }
            if s.timeout > 0 {
                line.push_str(&format!("{} timed out, ", s.timeout));
            }
            line.push_str(&format!("{} discharged, {} refuted\n", s.discharged, s.refuted));
            out.push_str(&line);
            out
        }
    }
}

// ---- loading ------------------------------------------------------------

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|error| CliError::Io { path: path.display().to_string(), error })
}

pub fn load_machine(path: &Path) -> Result<MachineDef, CliError> {
    parse_machine_file(&read(path)?, path.to_str()).map_err(input)
}

pub fn load_model(path: &Path) -> Result<FiniteModel, CliError> {
    let spec = parse_model_file(&read(path)?, path.to_str()).map_err(input)?;
    FiniteModel::from_spec(&spec).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

const COMPONENT_EXTENSIONS: [&str; 3] = ["mch", "ref", "rtr"];

/// Machines named in INCLUDES (transitively), read from files with the same
/// stem in the first of `dirs` that has one.
pub fn load_included(m: &MachineDef, dirs: &[&Path]) -> Result<Vec<MachineDef>, CliError> {
    let mut out: Vec<MachineDef> = Vec::new();
    let mut todo: Vec<String> = m.includes.clone();
    while let Some(name) = todo.pop() {
        if out.iter().any(|c| c.name == name) {
            continue;
        }
        let file = dirs
            .iter()
            .flat_map(|d| COMPONENT_EXTENSIONS.iter().map(|e| d.join(format!("{name}.{e}"))))
            .find(|p| p.exists())
            .ok_or_else(|| CliError::Input(format!("included machine {name} not found in {}", show_dirs(dirs))))?;
        let c = load_machine(&file)?;
        todo.extend(c.includes.iter().cloned());
        out.push(c);
    }
    Ok(out)
}

fn show_dirs(dirs: &[&Path]) -> String {
    dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>().join(" or ")
}

fn dir_of(p: &Path) -> &Path {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}

#[derive(Clone, Debug)]
pub enum CorpusItem {
    Component(MachineDef),
    Model(ModelSpec),
}

/// Component and model files under `dir`, recursively, ordered by relative
/// path. Other files are ignored.
pub fn load_corpus(dir: &Path) -> Result<Vec<(PathBuf, CorpusItem)>, CliError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
        let entries = std::fs::read_dir(dir).map_err(|error| CliError::Io { path: dir.display().to_string(), error })?;
        for e in entries {
            let p = e.map_err(|error| CliError::Io { path: dir.display().to_string(), error })?.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for p in files {
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
        let item = if COMPONENT_EXTENSIONS.contains(&ext) {
            CorpusItem::Component(load_machine(&p)?)
        } else if ext == "fmod" {
            CorpusItem::Model(parse_model_file(&read(&p)?, p.to_str()).map_err(input)?)
        } else {
            continue;
        };
        out.push((p, item));
    }
    Ok(out)
}

// ---- commands -----------------------------------------------------------

/// What a command produced: an exit code, standard output and error text,
/// and the report when one was built.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<Report>,
}

fn opts(out: &Output) -> DischargeOptions {
    DischargeOptions {
        deadline: out.timeout.map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0))),
        sequential: false,
    }
}

fn discharge_into(report: &mut Report, pos: &[ProofObligation], m: &FiniteModel, out: &Output) -> Result<Vec<CheckResult>, CliError> {
    let res = discharge(pos, m, &opts(out)).map_err(input)?;
    for r in &res {
        report.push(r, out.timings);
    }
    Ok(res)
}

fn parse_conv(args: &PatternArgs) -> Result<ConversionNames, CliError> {
    let (aofc, cofa) = args
        .conv
        .split_once(',')
        .ok_or_else(|| CliError::Input(format!("--conv expects AOFC,COFA, got {}", args.conv)))?;
    Ok(ConversionNames { aofc: aofc.trim().into(), cofa: cofa.trim().into(), context: args.context.clone() })
}

fn parse_map(args: &PatternArgs, abs: &MachineDef, conc: &MachineDef) -> Result<BTreeMap<String, String>, CliError> {
    match &args.map {
        None => Ok(abs.operations.iter().zip(&conc.operations).map(|(a, c)| (a.name.clone(), c.name.clone())).collect()),
        Some(text) => text
            .split(',')
            .map(|pair| {
                pair.split_once('=')
                    .map(|(a, c)| (a.trim().to_string(), c.trim().to_string()))
                    .ok_or_else(|| CliError::Input(format!("--map entry {pair} is not abs=conc")))
            })
            .collect(),
    }
}

enum Done {
    Report(Report, Format),
    Text(String),
}

fn execute(command: Command, argv: Vec<String>) -> Result<Done, CliError> {
    let mut report = Report::new(argv);
    match command {
        Command::Check { machine, model, out } => {
            let m = load_machine(&machine)?;
            let inc = load_included(&m, &[dir_of(&machine)])?;
            let model = load_model(&model)?;
            let pos = consistency_pos(&m, &inc).map_err(input)?;
            discharge_into(&mut report, &pos, &model, &out)?;
            Ok(Done::Report(report, out.format))
        }
        Command::Refine { abstract_, refinement, model, out } => {
            let a = load_machine(&abstract_)?;
            let r = load_machine(&refinement)?;
            let inc = load_included(&r, &[dir_of(&refinement), dir_of(&abstract_)])?;
            let model = load_model(&model)?;
            let pos = refinement_pos(&a, &r, &inc).map_err(input)?;
            discharge_into(&mut report, &pos, &model, &out)?;
            Ok(Done::Report(report, out.format))
        }
        Command::Retrench { abstract_, retrenchment, model, out } => {
            let a = load_machine(&abstract_)?;
            let r = load_machine(&retrenchment)?;
            let inc = load_included(&r, &[dir_of(&retrenchment), dir_of(&abstract_)])?;
            let model = load_model(&model)?;
            let pos = retrenchment_pos(&a, &r, &inc).map_err(input)?;
            discharge_into(&mut report, &pos, &model, &out)?;
            Ok(Done::Report(report, out.format))
        }
        Command::Pattern { command: PatternCommand::Check { args, model, out } } => {
            let a = load_machine(&args.abstract_)?;
            let c = load_machine(&args.concrete)?;
            let conv = parse_conv(&args)?;
            let map = parse_map(&args, &a, &c)?;
            let mut model = load_model(&model)?;
            let ca = compile_machine(&a, &model, "A", None).map_err(input)?;
            let cc = compile_machine(&c, &model, "C", None).map_err(input)?;
            for (aop, actx) in &ca {
                let cname = map.get(aop).ok_or_else(|| CliError::Input(format!("no concrete operation for {aop}")))?;
                let (_, cctx) = cc
                    .iter()
                    .find(|(n, _)| n == cname)
                    .ok_or_else(|| CliError::Input(format!("unknown concrete operation {cname}")))?;
                actx.install(&mut model);
                cctx.install(&mut model);
                let mut pos = prefixed(context_pos(actx), &format!("{}.{aop}", a.name));
                pos.extend(prefixed(context_pos(cctx), &format!("{}.{cname}", c.name)));
                pos.extend(prefixed(interface_pos(actx, cctx, &conv), aop));
                let res = discharge_into(&mut report, &pos, &model, &out)?;
                report.notes.extend(internal_inconsistency(&res).map(|n| format!("{aop}: {n}")));
            }
            Ok(Done::Report(report, out.format))
        }
        Command::Pattern { command: PatternCommand::Instantiate { args, output } } => {
            let a = load_machine(&args.abstract_)?;
            let c = load_machine(&args.concrete)?;
            let conv = parse_conv(&args)?;
            let map = parse_map(&args, &a, &c)?;
            let r = synthesize_adapter(&a, &c, &conv, &map).map_err(input)?;
            let text = pretty_print(&r);
            std::fs::write(&output, &text).map_err(|error| CliError::Io { path: output.display().to_string(), error })?;
            Ok(Done::Text(format!("wrote {} to {}\n", r.name, output.display())))
        }
        Command::Soundness { instances, seed, max_size, out } => {
            if max_size == 0 {
                return Err(CliError::Input("--max-size must be at least 1".into()));
            }
            let start = Instant::now();
            let s = soundness_check(seed, instances, max_size).map_err(input)?;
            let elapsed = out.timings.then(|| start.elapsed());
            let violations: BTreeMap<usize, &Vec<String>> = s.violations.iter().map(|(i, v)| (*i, v)).collect();
            let exceptions: BTreeMap<usize, &Vec<String>> = s.assertion_exceptions.iter().map(|(i, v)| (*i, v)).collect();
            for i in 0..instances {
                let mut failed: Vec<String> = Vec::new();
                failed.extend(violations.get(&i).into_iter().flat_map(|v| v.iter().cloned()));
                failed.extend(exceptions.get(&i).into_iter().flat_map(|v| v.iter().cloned()));
                let (status, message) =
                    if failed.is_empty() { (Status::Discharged, None) } else { (Status::Refuted, Some(failed.join(", "))) };
                report.push_raw(format!("soundness.instance{i}"), status, None, message, elapsed);
            }
            report.notes.push(format!(
                "seed {seed}: {}/{} instances satisfied the pattern premises",
                s.premises_held, s.instances
            ));
            Ok(Done::Report(report, out.format))
        }
    }
}

/// Runs one command line (`argv[0]` is the program name).
pub fn run(argv: &[String]) -> Outcome {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if code == 0 { (text, String::new()) } else { (String::new(), text) };
            return Outcome { code, stdout, stderr, report: None };
        }
    };
    let jobs = std::env::var("BIFC_JOBS").ok().and_then(|j| j.parse::<usize>().ok()).filter(|&j| j > 0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build();
    let argv_echo = argv.iter().skip(1).cloned().collect();
    let result = match &pool {
        Ok(pool) => pool.install(|| execute(cli.command, argv_echo)),
        Err(_) => execute(cli.command, argv_echo),
    };
    match result {
        Ok(Done::Report(r, format)) => Outcome { code: r.exit_code(), stdout: render_report(&r, format), stderr: String::new(), report: Some(r) },
        Ok(Done::Text(t)) => Outcome { code: 0, stdout: t, stderr: String::new(), report: None },
        Err(e) => Outcome { code: 2, stdout: String::new(), stderr: format!("error: {e}\n"), report: None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(name: &str, status: Status, witness: Option<Env>) -> CheckResult {
        CheckResult { name: name.into(), status, witness, message: None, elapsed: Duration::from_millis(3) }
    }

    #[test]
    fn text_summary() {
        let mut r = Report::new(vec![]);
        assert!(render_report(&r, Format::Text).starts_with("0 POs"));
        for i in 0..4 {
            r.push(&result(&format!("M.op{i}"), Status::Discharged, None), false);
        }
        assert!(render_report(&r, Format::Text).trim_end().ends_with("4 discharged, 0 refuted"));
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn witnesses_render_as_maps() {
        let mut r = Report::new(vec![]);
        let w = Env::from([
            ("vv".to_string(), Value::Int(7)),
            ("cvv".to_string(), Value::pair(Value::Int(0), Value::Int(2))),
        ]);
        r.push(&result("M.op", Status::Refuted, Some(w)), false);
        let text = render_report(&r, Format::Text);
        assert!(text.contains("{cvv: (0,2), vv: 7}"), "{text}");
        let json: serde_json::Value = serde_json::from_str(&render_report(&r, Format::Json)).unwrap();
        assert_eq!(json["results"][0]["witness"]["cvv"], serde_json::json!([0, 2]));
        assert_eq!(json["summary"]["refuted"], 1);
        assert!(json["results"][0].get("elapsed_ms").is_none());
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn exit_code_follows_worst_status() {
        let mut r = Report::new(vec![]);
        r.push(&result("a", Status::IllDefined, Some(Env::new())), true);
        assert_eq!(r.exit_code(), 1);
        r.push(&result("b", Status::Timeout, None), true);
        assert_eq!(r.exit_code(), 3);
        assert!(render_report(&r, Format::Text).contains("ms]"));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let o = run(&["bifc".into(), "check".into(), "--bogus".into()]);
        assert_eq!(o.code, 2);
        assert!(o.stderr.contains("Usage"), "{}", o.stderr);
    }
}
