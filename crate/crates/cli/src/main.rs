use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use ald_core::exercise::{self, CheckDeps, Outcome};
use ald_core::filters::{FilterRegistry, FilterSpec};
use ald_core::site::{self, Sidecar, SiteConfig};
use ald_core::tools::ToolRunner;
use ald_engine::Budget;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ald", version, about = "Build and serve active logic documents", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a site from the .md sources in a directory
    Build {
        source_dir: PathBuf,
        #[arg(short = 'o', long = "out")]
        output_dir: PathBuf,
        /// Tool manifest (JSON)
        #[arg(long)]
        tools: Option<PathBuf>,
        #[arg(long)]
        no_cache: bool,
        #[arg(long)]
        default_tool: Option<String>,
        #[arg(long, value_enum)]
        report: Option<ReportFormat>,
    },
    /// Serve a built site with the /eval and /check endpoints
    Serve {
        output_dir: PathBuf,
        #[arg(long, default_value_t = 8000)]
        port: u16,
    },
    /// Run a query against a program file
    Eval {
        file: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 1)]
        answers: usize,
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Filter a transcript read from stdin
    Filter { name: String, params: Vec<String> },
    /// Grade a submission against an exercise of a built site
    Check { exercises: PathBuf, cell_id: String, submission: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Build { source_dir, output_dir, tools, no_cache, default_tool, report } => {
            let config = SiteConfig {
                source_dir,
                output_dir,
                manifest_path: tools,
                default_tool_id: default_tool,
                cache_enabled: !no_cache,
                engine_budget: Budget::default(),
            };
            let result = site::build(&config)?;
            match report {
                Some(ReportFormat::Json) => println!("{}", serde_json::to_string_pretty(&result)?),
                None => println!(
                    "built {} page(s): {} tool request(s), {} run, {} from cache",
                    result.pages_built, result.tool_requests, result.tool_invocations, result.cache_hits
                ),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { output_dir, port } => {
            eprintln!("serving {} on http://127.0.0.1:{port}/", output_dir.display());
            ald_core::server::serve(output_dir, port)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { file, query, answers, depth } => {
            let program = read(&file)?;
            let mut budget = Budget::default().with_answers(answers);
            if let Some(d) = depth {
                budget = budget.with_depth(d);
            }
            let out = ald_engine::transcript::run(&program, &query, &budget);
            if out.exit_code != 0 {
                let message = out.stderr.trim().trim_start_matches("error: ");
                bail!("{}: {message}", file.display());
            }
            print!("{}", out.stdout);
            Ok(ExitCode::SUCCESS)
        }
        Command::Filter { name, params } => {
            let prefix = format!("{name}:");
            let params = params.into_iter().map(|p| p.strip_prefix(&prefix).map(str::to_string).unwrap_or(p)).collect();
            let mut input = String::new();
            std::io::stdin().read_to_string(&mut input).context("cannot read stdin")?;
            let output = FilterRegistry::with_builtins().apply(&FilterSpec::with_params(name, params), &input)?;
            if !output.is_empty() {
                println!("{output}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { exercises, cell_id, submission } => {
            let sidecar = Sidecar::load(&exercises).map_err(|e| anyhow!(e))?;
            let spec = sidecar.find(None, &cell_id).ok_or_else(|| anyhow!("no exercise `{cell_id}` in {}", exercises.display()))?;
            let text = read(&submission)?;
            let runner = ToolRunner::new(sidecar.tools.clone(), None).with_budget(sidecar.budget);
            let filters = FilterRegistry::with_builtins();
            let deps = CheckDeps {
                runner: &runner,
                filters: &filters,
                budget: sidecar.budget,
                default_tool: sidecar.default_tool.as_deref(),
            };
            let verdict = exercise::check(spec, &text, &deps);
            println!("{}", verdict.outcome.as_str());
            println!("{}", verdict.feedback());
            Ok(if verdict.outcome == Outcome::Pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
