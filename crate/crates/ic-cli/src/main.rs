//! `ic` — check, trace, compose, verify and generate code for asserted
//! protocols.
//!
//! Protocols are addressed as `FILE:NAME`, where FILE is a `.proto-ic`
//! file of `protocol NAME = S` blocks. Exit status: 0 on success, 1 when
//! a check/verification fails or a composition is empty (without
//! `--allow-empty`), 2 on any `error:<category>:` condition. Set
//! `IC_COLOR=0` to disable styling.

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ic_core::artifacts;
use ic_core::assertions::{env_to_string, well_asserted, Env};
use ic_core::compose::{compose_with_budget, ComposeError, Mode, DEFAULT_BUDGET};
use ic_core::proto::Protocol;
use ic_core::semantics::{
    explore_config, has_progress, trace_lines, Config, EnsembleConfig, ProgressResult, DEFAULT_CAP,
};
use ic_core::syntax::{parse_file, print, SourceText};
use ic_core::verify::{check_fair, check_strong_fair, simulates, FairVerdict, DEFAULT_DEPTH};

#[derive(Parser)]
#[command(name = "ic", version, about = "Asserted-protocol toolbox", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strong,
    Weak,
    Corr,
    All,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Strong => Mode::Strong,
            ModeArg::Weak => Mode::Weak,
            ModeArg::Corr => Mode::Correlating,
            ModeArg::All => Mode::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Fsm,
    Stub,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and check well-assertedness against --env
    Check {
        /// Assertion environment: comma-separated names, empty for ∅
        #[arg(long, default_value = "")]
        env: String,
        /// Protocols to check, as FILE:NAME
        #[arg(required = true)]
        protocols: Vec<String>,
    },
    /// Explore the transition system and print one line per edge
    Trace {
        #[arg(long, default_value = "")]
        env: String,
        /// Maximum number of configurations to explore
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        protocol: String,
    },
    /// Compute all interleaving compositions of two protocols
    Compose {
        #[arg(long, value_enum, default_value = "strong")]
        mode: ModeArg,
        #[arg(long, default_value = "")]
        env: String,
        /// Search-node budget
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Exit 0 even when no composition exists
        #[arg(long)]
        allow_empty: bool,
        /// Also list structurally distinct results before alpha-dedup
        #[arg(long)]
        raw_counts: bool,
        left: String,
        right: String,
    },
    /// Check progress, simulation and fairness for a composition
    Verify {
        /// Checks to run: progress, simulation, fairness, strong-fairness
        #[arg(long, default_value = "progress,simulation,fairness,strong-fairness")]
        props: String,
        #[arg(long, default_value = "")]
        env: String,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// Coinductive depth for the fairness checks
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// An explicit composed protocol (FILE:NAME) to verify
        #[arg(long, conflicts_with = "from_compose")]
        composed: Option<String>,
        /// Verify every composition produced under --mode instead
        #[arg(long)]
        from_compose: bool,
        #[arg(long, value_enum, default_value = "strong")]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        left: String,
        right: String,
    },
    /// Generate a state-machine artifact from a protocol
    Gen {
        #[arg(long, value_enum, default_value = "fsm")]
        format: FormatArg,
        /// Output file (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
        protocol: String,
    },
    /// Rebuild a protocol from a .fsm.json machine
    Extract { file: PathBuf },
}

struct Failure {
    category: &'static str,
    message: String,
}

impl Failure {
    fn new(category: &'static str, message: impl Into<String>) -> Self {
        Failure { category, message: message.into() }
    }
}

fn style_on() -> bool {
    std::env::var("IC_COLOR").map(|v| v != "0").unwrap_or(true) && std::io::stdout().is_terminal()
}

fn bold(text: &str) -> String {
    if style_on() {
        format!("\x1b[1m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn parse_env(spec: &str) -> Env {
    spec.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Resolve a FILE:NAME protocol address.
fn load(address: &str) -> Result<(String, Protocol), Failure> {
    let (file, name) = address
        .rsplit_once(':')
        .ok_or_else(|| Failure::new("args", format!("expected FILE:NAME, got {address:?}")))?;
    let text = std::fs::read_to_string(file)
        .map_err(|e| Failure::new("io", format!("cannot read {file}: {e}")))?;
    let protos = parse_file(&SourceText::with_origin(text, file)).map_err(|e| match e {
        ic_core::syntax::SyntaxError::Validation(_) => Failure::new("validate", e.to_string()),
        other => Failure::new("parse", other.to_string()),
    })?;
    protos
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(n, p)| (n, p))
        .ok_or_else(|| Failure::new("name", format!("no protocol named {name} in {file}")))
}

fn compose_err(e: ComposeError) -> Failure {
    match e {
        ComposeError::InvalidInput { .. } => Failure::new("validate", e.to_string()),
        ComposeError::BudgetExceeded { .. } => Failure::new("budget", e.to_string()),
        ComposeError::InternalInvariant(_) => Failure::new("internal", e.to_string()),
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Check { env, protocols } => {
            let a = parse_env(&env);
            let mut all_ok = true;
            for address in &protocols {
                let (name, proto) = load(address)?;
                match well_asserted(&a, &proto) {
                    Ok(post) => {
                        println!("{name}: ok post={}", env_to_string(&post));
                    }
                    Err(failure) => {
                        println!("{name}: not well-asserted wrt {}: {failure}", env_to_string(&a));
                        all_ok = false;
                    }
                }
            }
            Ok(all_ok)
        }
        Command::Trace { env, cap, protocol } => {
            let a = parse_env(&env);
            let (_, proto) = load(&protocol)?;
            let graph = explore_config(Config::new(a, proto), cap);
            for line in trace_lines(&graph) {
                println!("{line}");
            }
            if graph.truncated {
                println!("# truncated at cap={cap}");
            }
            println!(
                "# nodes={} edges={} complete={}",
                graph.node_count(),
                graph.edge_count(),
                !graph.truncated
            );
            Ok(true)
        }
        Command::Compose { mode, env, budget, allow_empty, raw_counts, left, right } => {
            let a = parse_env(&env);
            let mode: Mode = mode.into();
            let (_, s1) = load(&left)?;
            let (_, s2) = load(&right)?;
            let out = compose_with_budget(&s1, &s2, &a, mode, budget).map_err(compose_err)?;
            for (i, p) in out.results.iter().enumerate() {
                println!("protocol c{} = {}", i + 1, print(p));
            }
            if raw_counts {
                for (i, p) in out.raw_results.iter().enumerate() {
                    println!("protocol r{} = {}", i + 1, print(p));
                }
            }
            if let Some(diags) = &out.diagnostics {
                for d in diags {
                    println!("// {d}");
                }
            }
            println!(
                "{}",
                bold(&format!(
                    "mode={} raw={} canonical={}",
                    mode, out.raw_count, out.canonical_count
                ))
            );
            Ok(out.canonical_count > 0 || allow_empty)
        }
        Command::Verify {
            props,
            env,
            cap,
            depth,
            composed,
            from_compose,
            mode,
            budget,
            left,
            right,
        } => {
            let a = parse_env(&env);
            let (_, s0) = load(&left)?;
            let (_, s1) = load(&right)?;
            let targets: Vec<(String, Protocol)> = if from_compose {
                let out = compose_with_budget(&s0, &s1, &a, mode.into(), budget)
                    .map_err(compose_err)?;
                out.results
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (format!("[{}]", i + 1), p.clone()))
                    .collect()
            } else {
                let address = composed.ok_or_else(|| {
                    Failure::new("args", "verify needs --composed FILE:NAME or --from-compose")
                })?;
                let (_, p) = load(&address)?;
                vec![(String::new(), p)]
            };
            let props: Vec<&str> = props.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
            for p in &props {
                if !["progress", "simulation", "fairness", "strong-fairness"].contains(p) {
                    return Err(Failure::new("args", format!("unknown property {p:?}")));
                }
            }
            let mut all_hold = true;
            let mut emit = |name: String, holds: bool, detail: String| {
                let verdict = if holds { "holds" } else { "fails" };
                let line = format!("CHECK {name} {verdict}{detail}");
                println!("{}", if holds { line } else { bold(&line) });
                all_hold &= holds;
            };
            for (suffix, s) in &targets {
                for prop in &props {
                    match *prop {
                        "progress" => match has_progress(s, cap) {
                            ProgressResult::Holds => emit(format!("progress{suffix}"), true, String::new()),
                            ProgressResult::Fails { witness, stuck } => {
                                let w: Vec<String> = witness.iter().map(|l| l.to_string()).collect();
                                emit(
                                    format!("progress{suffix}"),
                                    false,
                                    format!(" [stuck {} after {}]", stuck, w.join(", ")),
                                );
                            }
                            ProgressResult::Inconclusive => {
                                return Err(Failure::new("cap", "progress exploration hit the cap"))
                            }
                        },
                        "simulation" => {
                            let lhs = Config::new(a.clone(), s.clone());
                            let rhs = EnsembleConfig::pair(a.clone(), s0.clone(), s1.clone());
                            let w = simulates(&lhs, &rhs, cap)
                                .map_err(|e| Failure::new("cap", e.to_string()))?;
                            let detail = match &w.counterexample {
                                Some(cex) => format!(" [{cex}]"),
                                None => String::new(),
                            };
                            emit(format!("simulation{suffix}"), w.verdict, detail);
                        }
                        "fairness" => {
                            let r = check_fair(s, &s0, &s1, &a, depth);
                            match r.verdict {
                                FairVerdict::HoldsToDepth(k) => {
                                    emit(format!("fairness{suffix}"), true, format!("-to-depth({k})"))
                                }
                                FairVerdict::Fails(w) => {
                                    emit(format!("fairness{suffix}"), false, format!(" [{w}]"))
                                }
                            }
                        }
                        "strong-fairness" => {
                            let r = check_strong_fair(s, &s0, &s1, &a, depth);
                            match r.verdict {
                                FairVerdict::HoldsToDepth(k) => emit(
                                    format!("strong-fairness{suffix}"),
                                    true,
                                    format!("-to-depth({k})"),
                                ),
                                FairVerdict::Fails(w) => {
                                    emit(format!("strong-fairness{suffix}"), false, format!(" [{w}]"))
                                }
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            }
            Ok(all_hold)
        }
        Command::Gen { format, output, protocol } => {
            let (name, proto) = load(&protocol)?;
            let fsm = artifacts::to_fsm(&name, &proto)
                .map_err(|e| Failure::new("validate", e.to_string()))?;
            let bytes = match format {
                FormatArg::Dot => artifacts::emit_dot(&fsm)
                    .map_err(|e| Failure::new("validate", e.to_string()))?
                    .into_bytes(),
                FormatArg::Fsm => artifacts::emit_fsm_json(&fsm),
                FormatArg::Stub => artifacts::emit_stub(&fsm).into_bytes(),
            };
            match output {
                Some(path) => std::fs::write(&path, bytes)
                    .map_err(|e| Failure::new("io", format!("cannot write {}: {e}", path.display())))?,
                None => {
                    use std::io::Write;
                    std::io::stdout()
                        .write_all(&bytes)
                        .map_err(|e| Failure::new("io", e.to_string()))?;
                }
            }
            Ok(true)
        }
        Command::Extract { file } => {
            let bytes = std::fs::read(&file)
                .map_err(|e| Failure::new("io", format!("cannot read {}: {e}", file.display())))?;
            let schema_err = |e: artifacts::ArtifactError| match e {
                artifacts::ArtifactError::Schema(_) => Failure::new("schema", e.to_string()),
                artifacts::ArtifactError::UnguardedCycle(_) => {
                    Failure::new("unguarded-cycle", e.to_string())
                }
                other => Failure::new("extract", other.to_string()),
            };
            let fsm = artifacts::parse_fsm(&bytes).map_err(schema_err)?;
            let out = artifacts::extract_fsm(&fsm).map_err(schema_err)?;
            for w in &out.warnings {
                eprintln!("// warning: {w}");
            }
            println!("protocol {} = {}", fsm.name, print(&out.proto));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error:{}: {}", f.category, f.message);
            ExitCode::from(2)
        }
    }
}
