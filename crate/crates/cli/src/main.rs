use std::fs;
use std::io::Read;
use std::process::ExitCode;

use aspfun_cli::corpus;
use aspfun_cli::output::{
    config_type_json, config_type_text, emit, type_error_json, verdict_json,
    Format,
};
use aspfun_core::parser::{parse_configuration, parse_term};
use aspfun_core::printer::{print_configuration, print_term};
use aspfun_core::properties::{
    check_confinement, check_multilateral, check_noninterference, PropError,
    Verdict,
};
use aspfun_core::secmodel::{visibility_range, SecAssignment};
use aspfun_core::semantics::{enumerate_config_steps, run_config, Policy};
use aspfun_core::typecheck::check_configuration;
use aspfun_core::Configuration;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;

#[derive(Parser)]
#[command(
    name = "aspfun",
    version,
    about = "Functional active objects with a security type system"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// File path, corpus entry name, or - for stdin
    input: String,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum PolicyArg {
    First,
    RoundRobin,
    Seeded,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a term or configuration and print its canonical form
    Parse {
        #[command(flatten)]
        common: Common,
    },
    /// Reduce a configuration until quiescence or fuel exhaustion
    Run {
        #[command(flatten)]
        common: Common,
        /// Maximum number of steps
        #[arg(long, default_value_t = 1000)]
        fuel: u32,
        /// Scheduling policy
        #[arg(long, value_enum, default_value_t = PolicyArg::First)]
        policy: PolicyArg,
        /// Seed for the seeded policy
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the transitions enabled in a configuration
    Step {
        #[command(flatten)]
        common: Common,
    },
    /// Check a configuration against its security assignment
    Typecheck {
        #[command(flatten)]
        common: Common,
    },
    /// Show each activity's visibility range
    Visibility {
        #[command(flatten)]
        common: Common,
    },
    /// Explore reductions and check request confinement
    Confine {
        #[command(flatten)]
        common: Common,
        /// Exploration budget in steps
        #[arg(long, default_value_t = 64)]
        fuel: u32,
    },
    /// Check bounded noninterference from one observer's viewpoint
    Ni {
        #[command(flatten)]
        common: Common,
        /// Observing activity
        #[arg(long)]
        alpha: String,
        /// Bisimulation depth
        #[arg(long, default_value_t = 8)]
        fuel: u32,
        /// Number of H-variants to try
        #[arg(long, default_value_t = 4)]
        variants: u32,
    },
    /// Check bounded noninterference for every observer
    Multilateral {
        #[command(flatten)]
        common: Common,
        /// Bisimulation depth
        #[arg(long, default_value_t = 8)]
        fuel: u32,
        /// Number of H-variants to try
        #[arg(long, default_value_t = 4)]
        variants: u32,
    },
    /// List corpus entries, or show one entry's source
    Example {
        /// Entry name; omit to list all entries
        name: Option<String>,
        /// Output format
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: String) -> Self {
        Failure { code, msg }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let usage_ok =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EX_USAGE)
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("aspfun: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.cmd {
        Cmd::Parse { common } => cmd_parse(&common),
        Cmd::Run { common, fuel, policy, seed } => {
            cmd_run(&common, fuel, policy, seed)
        }
        Cmd::Step { common } => cmd_step(&common),
        Cmd::Typecheck { common } => cmd_typecheck(&common),
        Cmd::Visibility { common } => cmd_visibility(&common),
        Cmd::Confine { common, fuel } => cmd_confine(&common, fuel),
        Cmd::Ni { common, alpha, fuel, variants } => {
            cmd_ni(&common, &alpha, fuel, variants)
        }
        Cmd::Multilateral { common, fuel, variants } => {
            cmd_multilateral(&common, fuel, variants)
        }
        Cmd::Example { name, format } => cmd_example(name.as_deref(), format),
    }
}

fn read_input(input: &str) -> Result<String, Failure> {
    if input == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::new(EX_NOINPUT, format!("stdin: {e}")))?;
        return Ok(buf);
    }
    let path = std::path::Path::new(input);
    if path.exists() {
        return fs::read_to_string(path)
            .map_err(|e| Failure::new(EX_NOINPUT, format!("{input}: {e}")));
    }
    if let Some(src) = corpus::source(input) {
        return Ok(src.to_string());
    }
    Err(Failure::new(
        EX_NOINPUT,
        format!("{input}: no such file or corpus entry"),
    ))
}

fn load_config(input: &str) -> Result<(Configuration, SecAssignment), Failure> {
    let text = read_input(input)?;
    parse_configuration(&text)
        .map_err(|e| Failure::new(EX_DATAERR, format!("{input}: {e}")))
}

/// A configuration opens with `name [` or `activity name [`; anything else is
/// presumed to be a term for error-reporting purposes.
fn looks_like_config(text: &str) -> bool {
    for raw in text.lines() {
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let line = line.strip_prefix("activity ").unwrap_or(line).trim_start();
        let ident_len = line
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(line.len());
        if ident_len == 0 {
            return false;
        }
        return line[ident_len..].trim_start().starts_with('[');
    }
    false
}

fn cmd_parse(common: &Common) -> Result<ExitCode, Failure> {
    let text = read_input(&common.input)?;
    match parse_configuration(&text) {
        Ok((config, sec)) => {
            let pretty = print_configuration(&config, &sec);
            let names: Vec<String> =
                config.activities.keys().map(|a| a.to_string()).collect();
            let requests: usize =
                config.activities.values().map(|a| a.queue.len()).sum();
            emit(
                common.format,
                &pretty,
                &json!({
                    "command": "parse",
                    "kind": "configuration",
                    "activities": names,
                    "requests": requests,
                    "pretty": pretty,
                }),
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(config_err) => match parse_term(&text) {
            Ok(term) => {
                let pretty = print_term(&term);
                emit(
                    common.format,
                    &pretty,
                    &json!({
                        "command": "parse",
                        "kind": "term",
                        "pretty": pretty,
                    }),
                );
                Ok(ExitCode::SUCCESS)
            }
            Err(term_err) => {
                let err = if looks_like_config(&text) {
                    config_err.to_string()
                } else {
                    term_err.to_string()
                };
                Err(Failure::new(EX_DATAERR, format!("{}: {err}", common.input)))
            }
        },
    }
}

fn cmd_run(
    common: &Common,
    fuel: u32,
    policy: PolicyArg,
    seed: Option<u64>,
) -> Result<ExitCode, Failure> {
    let (config, sec) = load_config(&common.input)?;
    let policy = match policy {
        PolicyArg::First => Policy::First,
        PolicyArg::RoundRobin => Policy::RoundRobin,
        PolicyArg::Seeded => Policy::Seeded(seed.unwrap_or(0)),
    };
    let (fin, trace) = run_config(&config, policy, fuel);
    let quiescent = enumerate_config_steps(&fin).is_empty();
    let pretty = print_configuration(&fin, &sec);
    let status = if quiescent {
        format!("quiescent after {} steps", trace.len())
    } else {
        format!("fuel exhausted after {} steps", trace.len())
    };
    let labels: Vec<String> = trace.iter().map(|l| l.to_string()).collect();
    emit(
        common.format,
        &format!("{pretty}\n{status}"),
        &json!({
            "command": "run",
            "steps": trace.len(),
            "quiescent": quiescent,
            "trace": labels,
            "final": pretty,
        }),
    );
    if quiescent {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

fn cmd_step(common: &Common) -> Result<ExitCode, Failure> {
    let (config, _) = load_config(&common.input)?;
    let steps = enumerate_config_steps(&config);
    let labels: Vec<String> =
        steps.iter().map(|(l, _)| l.to_string()).collect();
    let text = if labels.is_empty() {
        String::from("(quiescent)")
    } else {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{i}: {l}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    emit(
        common.format,
        &text,
        &json!({
            "command": "step",
            "count": labels.len(),
            "steps": labels,
        }),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_typecheck(common: &Common) -> Result<ExitCode, Failure> {
    let (config, sec) = load_config(&common.input)?;
    match check_configuration(&config, &sec) {
        Ok(ct) => {
            emit(
                common.format,
                &format!("accepted\n{}", config_type_text(&ct)),
                &json!({
                    "command": "typecheck",
                    "status": "accepted",
                    "context": config_type_json(&ct),
                }),
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            emit(
                common.format,
                &format!("rejected: {e}"),
                &json!({
                    "command": "typecheck",
                    "status": "rejected",
                    "error": type_error_json(&e),
                }),
            );
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_visibility(common: &Common) -> Result<ExitCode, Failure> {
    let (config, sec) = load_config(&common.input)?;
    let mut lines = Vec::new();
    let mut ranges = Map::new();
    for alpha in config.activities.keys() {
        let range = visibility_range(alpha, &config, &sec)
            .map_err(|e| Failure::new(EX_DATAERR, e.to_string()))?;
        let names: Vec<String> = range.iter().map(|a| a.to_string()).collect();
        lines.push(format!("{alpha}: {{{}}}", names.join(", ")));
        ranges.insert(alpha.to_string(), json!(names));
    }
    emit(
        common.format,
        &lines.join("\n"),
        &json!({ "command": "visibility", "ranges": ranges }),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_confine(common: &Common, fuel: u32) -> Result<ExitCode, Failure> {
    let (config, sec) = load_config(&common.input)?;
    match check_confinement(&config, &sec, fuel) {
        Ok(report) => {
            let text = if report.entries.is_empty() {
                String::from("confinement holds (no crossing requests reached)")
            } else {
                format!(
                    "confinement holds over {} checked steps\n{report}",
                    report.entries.len()
                )
            };
            emit(
                common.format,
                &text,
                &json!({
                    "command": "confine",
                    "status": "holds",
                    "checked": report.entries.len(),
                }),
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(PropError::Inconclusive(why)) => {
            emit(
                common.format,
                &format!("inconclusive: {why}"),
                &json!({
                    "command": "confine",
                    "status": "inconclusive",
                    "why": why,
                }),
            );
            Ok(ExitCode::from(2))
        }
        Err(e) => {
            emit(
                common.format,
                &format!("confinement fails: {e}"),
                &json!({
                    "command": "confine",
                    "status": "fails",
                    "detail": e.to_string(),
                }),
            );
            Ok(ExitCode::from(1))
        }
    }
}

fn verdict_exit(v: &Verdict) -> ExitCode {
    match v {
        Verdict::Holds => ExitCode::SUCCESS,
        Verdict::FailsWith(_) => ExitCode::from(1),
        Verdict::Inconclusive(_) => ExitCode::from(2),
    }
}

fn cmd_ni(
    common: &Common,
    alpha: &str,
    fuel: u32,
    variants: u32,
) -> Result<ExitCode, Failure> {
    let (config, sec) = load_config(&common.input)?;
    let alpha_id = config
        .activities
        .keys()
        .find(|a| a.name == alpha)
        .cloned()
        .ok_or_else(|| {
            Failure::new(EX_USAGE, format!("no activity named {alpha}"))
        })?;
    let v = check_noninterference(&config, &alpha_id, &sec, fuel, variants);
    let mut doc = verdict_json(&v);
    doc["command"] = Value::String(String::from("ni"));
    doc["alpha"] = Value::String(alpha.to_string());
    emit(common.format, &format!("noninterference at {alpha}: {v}"), &doc);
    Ok(verdict_exit(&v))
}

fn cmd_multilateral(
    common: &Common,
    fuel: u32,
    variants: u32,
) -> Result<ExitCode, Failure> {
    let (config, sec) = load_config(&common.input)?;
    let v = check_multilateral(&config, &sec, fuel, variants);
    let mut doc = verdict_json(&v);
    doc["command"] = Value::String(String::from("multilateral"));
    emit(common.format, &format!("multilateral security: {v}"), &doc);
    Ok(verdict_exit(&v))
}

fn cmd_example(name: Option<&str>, format: Format) -> Result<ExitCode, Failure> {
    let m = corpus::manifest();
    match name {
        None => {
            let mut lines = Vec::new();
            for e in &m.entries {
                lines.push(format!(
                    "{}: typecheck {} [{}]",
                    e.name, e.expected.typecheck, e.expected.tag
                ));
                lines.push(format!(
                    "    {} [{}]",
                    e.evaluation.note, e.evaluation.tag
                ));
            }
            let doc = serde_json::to_value(&m)
                .map_err(|e| Failure::new(EX_DATAERR, e.to_string()))?;
            emit(format, &lines.join("\n"), &doc);
            Ok(ExitCode::SUCCESS)
        }
        Some(n) => {
            let src = corpus::source(n).ok_or_else(|| {
                Failure::new(
                    EX_NOINPUT,
                    corpus::UnknownExample(n.to_string()).to_string(),
                )
            })?;
            let entry = m.entries.iter().find(|e| {
                e.name == n.strip_suffix(".aspfun").unwrap_or(n)
            });
            let manifest_doc = entry
                .map(|e| serde_json::to_value(e).unwrap_or(Value::Null))
                .unwrap_or(Value::Null);
            emit(
                format,
                src.trim_end(),
                &json!({
                    "command": "example",
                    "name": n,
                    "source": src,
                    "manifest": manifest_doc,
                }),
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
