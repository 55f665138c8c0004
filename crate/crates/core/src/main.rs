use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use vasr_core::frontend::{self, program_vocab, Program, Verdict};
use vasr_core::logic::{formula_to_smt, parse_formula, transition_script, Formula, Solver, SolverConfig};
use vasr_core::vasrs::Method;
use vasr_core::{Error, Limits};

#[derive(Parser)]
#[command(name = "vasr", version, about = "Loop summarization with rational VASR abstractions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Vasr,
    Vasrs,
    #[value(name = "vasrs-prec")]
    VasrsPrec,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Vasr => Method::Vasr,
            MethodArg::Vasrs => Method::Vasrs,
            MethodArg::VasrsPrec => Method::VasrsPrecise,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Program file (.imp)
    file: PathBuf,
    /// Loop closure operator
    #[arg(long, value_enum, default_value = "vasrs")]
    method: MethodArg,
    /// Per-query solver timeout in milliseconds
    #[arg(long)]
    timeout_ms: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every assertion of a program
    Verify {
        #[command(flatten)]
        common: Common,
        /// Entry precondition as an SMT-LIB2 term over the program variables
        #[arg(long)]
        pre: Option<String>,
        /// Print the simulation matrix and transformers of each loop
        #[arg(long)]
        dump_abstraction: bool,
        /// Print control states and edges of each loop's abstraction
        #[arg(long)]
        dump_vasrs: bool,
        /// Print the reachability formula of each loop's abstraction
        #[arg(long)]
        dump_reach: bool,
        /// Print each loop summary as SMT-LIB2
        #[arg(long)]
        dump_summary: bool,
    },
    /// Print per-loop summaries as SMT-LIB2
    Summarize {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load(common: &Common) -> Result<(Program, Solver), Error> {
    let src = std::fs::read_to_string(&common.file)
        .map_err(|e| Error::Invalid(format!("{}: {e}", common.file.display())))?;
    let program = frontend::parse(&src).map_err(|e| match e {
        Error::Parse { line, col, msg } => Error::Parse {
            line,
            col,
            msg: format!("{}: {msg}", common.file.display()),
        },
        other => other,
    })?;
    let cfg = SolverConfig::from_env().with_timeout(common.timeout_ms);
    let solver = Solver::with_config(&cfg)?;
    Ok((program, solver))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Verify { common, pre, dump_abstraction, dump_vasrs, dump_reach, dump_summary } => {
            let (program, mut h) = load(&common)?;
            let vocab = program_vocab(&program);
            let pre = match pre {
                Some(text) => parse_formula(&text, &|n| vocab.iter().find(|v| v.name() == n).cloned())?,
                None => Formula::tt(),
            };
            let result = frontend::verify(&mut h, &program, &pre, common.method.into(), Limits::default());
            for l in &result.loops {
                if !(dump_abstraction || dump_vasrs || dump_reach || dump_summary) {
                    break;
                }
                println!("loop {} at {} ({:.2?})", l.id, l.pos, l.elapsed);
                if let Some(e) = &l.error {
                    println!("  closure failed: {e}");
                }
                let abs = l.report.as_ref().and_then(|r| r.abstraction.as_ref());
                if dump_abstraction {
                    if let Some(a) = abs {
                        println!("  S ({}x{}):", a.sim.rows(), a.sim.cols());
                        for row in a.sim.row_iter() {
                            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                            println!("    [{}]", cells.join(" "));
                        }
                        let mut ts: Vec<String> =
                            a.vasrs.machine.edges.iter().map(|e| e.transformer.to_string()).collect();
                        ts.sort();
                        ts.dedup();
                        for t in ts {
                            println!("    {t}");
                        }
                    }
                }
                if dump_vasrs {
                    if let Some(a) = abs {
                        for line in a.to_string().lines() {
                            println!("  {line}");
                        }
                    }
                }
                if dump_reach {
                    if let Some(r) = l.report.as_ref().and_then(|r| r.reach.as_ref()) {
                        println!("  reach: {}", formula_to_smt(&r.formula));
                    }
                }
                if dump_summary {
                    println!("  summary: {}", formula_to_smt(&l.summary.formula));
                }
            }
            let mut code = 0u8;
            for a in &result.asserts {
                println!("{}:{}: assert({}): {}", common.file.display(), a.pos, a.text, a.verdict);
                code = code.max(match &a.verdict {
                    Verdict::Proved => 0,
                    Verdict::Unknown => 1,
                    Verdict::Error { solver: true, .. } => 3,
                    Verdict::Error { .. } => 1,
                });
            }
            println!(
                "{} of {} assertions proved in {:.2?} (method {})",
                result.asserts.iter().filter(|a| a.verdict == Verdict::Proved).count(),
                result.asserts.len(),
                result.elapsed,
                Method::from(common.method),
            );
            Ok(ExitCode::from(code))
        }
        Command::Summarize { common } => {
            let (program, mut h) = load(&common)?;
            let loops = frontend::summarize(&mut h, &program, common.method.into(), Limits::default())?;
            for l in loops {
                println!("; loop {} at {}", l.id, l.pos);
                if let Some(e) = &l.error {
                    println!("; closure failed: {e}");
                }
                print!("{}", transition_script(&l.summary));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
