//! `codegraph` command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain error (missing store, bad
//! query, unknown symbol), 2 on a usage error.

mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use codegraph::bench::{run_bench, BenchCase, BenchSuite, SyntheticRepoSpec};
use codegraph::lang::LanguageFilter;
use codegraph::mcp::{self, Server, ServerConfig};
use codegraph::pipeline::{index_repository, PipelineConfig};
use codegraph::query::{self, TraceDirection};
use codegraph::store::{self, OpenMode, Store};
use codegraph::Error;
use serde_json::{json, Value};

use output::Format;

#[derive(Parser)]
#[command(name = "codegraph", version, about = "Code knowledge-graph indexer and query tool")]
struct Cli {
    /// Output encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Store file; defaults to a per-repository file under the data
    /// directory (or $CODEGRAPH_DB).
    #[arg(long, global = true)]
    db: Option<PathBuf>,
    /// Repository the query commands read.
    #[arg(long, global = true, default_value = ".")]
    repo: PathBuf,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Inbound,
    Outbound,
}

#[derive(Subcommand)]
enum Command {
    /// Index a repository and print the summary.
    Index {
        path: PathBuf,
        #[arg(long)]
        project: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated language allow-list.
        #[arg(long, value_delimiter = ',')]
        languages: Option<Vec<String>>,
        /// Glob of repository-relative paths to skip; repeatable.
        #[arg(long)]
        ignore: Vec<String>,
        /// Skip version-control co-change analysis.
        #[arg(long)]
        no_cochange: bool,
        /// Louvain resolution.
        #[arg(long, default_value_t = codegraph::community::DEFAULT_GAMMA)]
        gamma: f64,
    },
    /// Run the MCP tool server on stdin/stdout.
    Serve {
        /// Default repository for tool calls; falls back to --repo.
        path: Option<PathBuf>,
        /// Keep the graph in sync with the working tree.
        #[arg(long)]
        watch: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a Cypher-like query; rows print as JSON lines.
    Query { cypher: String },
    /// Breadth-first call trace from a function.
    Trace {
        qname: String,
        #[arg(long, value_enum, default_value_t = Direction::Outbound)]
        direction: Direction,
        #[arg(long, default_value_t = 3)]
        depth: u32,
    },
    /// Store location, size and resolution statistics.
    Status,
    /// List indexed projects.
    List,
    /// Delete the repository's store.
    Delete,
    /// Functions and methods nothing refers to.
    DeadCode,
    /// Transitive callers of changed files or symbols.
    Impact {
        #[arg(required = true)]
        changed: Vec<String>,
        #[arg(long, default_value_t = 3)]
        depth: u32,
    },
    /// Communities, hubs and inter-community links.
    Architecture {
        #[arg(long, default_value_t = query::DEFAULT_HUBS)]
        hubs: usize,
    },
    /// Time the standard cases on a generated repository.
    Bench {
        /// Generate the large desk-scale repository.
        #[arg(long)]
        desk_scale: bool,
        #[arg(long)]
        files: Option<usize>,
        #[arg(long)]
        functions_per_file: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        workers: Option<usize>,
        /// Cases to run (comma-separated); all by default.
        #[arg(long, value_delimiter = ',')]
        cases: Option<Vec<String>>,
    },
}

fn store_path(db: &Option<PathBuf>, repo: &Path) -> PathBuf {
    db.clone().unwrap_or_else(|| store::default_store_path(repo))
}

fn open_read(cli: &Cli) -> Result<Store, Error> {
    Store::open(store_path(&cli.db, &cli.repo), OpenMode::ReadOnly)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Error> {
    Ok(serde_json::to_value(v)?)
}

fn parse_case(name: &str) -> Result<BenchCase, Error> {
    serde_json::from_value(json!(name)).map_err(|_| {
        let known: Vec<String> = BenchCase::ALL
            .iter()
            .filter_map(|c| serde_json::to_value(c).ok())
            .filter_map(|v| v.as_str().map(str::to_string))
            .collect();
        Error::validation(format!("unknown bench case {name:?}; known: {}", known.join(", ")))
    })
}

fn run(cli: &Cli) -> Result<(), Error> {
    let out = output::Printer::new(cli.format);
    match &cli.command {
        Command::Index {
            path,
            project,
            workers,
            languages,
            ignore,
            no_cochange,
            gamma,
        } => {
            let mut config = PipelineConfig::new(path);
            config.project = project.clone();
            if let Some(w) = workers {
                config.workers = (*w).max(1);
            }
            if let Some(l) = languages {
                config.languages = LanguageFilter(Some(l.clone()));
            }
            config.ignore = ignore.clone();
            config.cochange = !no_cochange;
            config.gamma = *gamma;
            let summary = index_repository(&config, Some(&store_path(&cli.db, path)))?;
            out.value(&to_value(&summary)?)
        }
        Command::Serve { path, watch, workers } => {
            let root = path.clone().unwrap_or_else(|| cli.repo.clone());
            let mut config = ServerConfig::from_env(&root);
            config.db = cli.db.clone();
            config.watch = *watch;
            if let Some(w) = workers {
                config.workers = (*w).max(1);
            }
            let mut server = Server::new(config);
            if *watch && !server.start_watch()? {
                eprintln!("note: {} is not indexed yet; watching starts after index_repository", root.display());
            }
            mcp::serve_stdio(server)?;
            Ok(())
        }
        Command::Query { cypher } => {
            let store = open_read(cli)?;
            let result = query::execute_query(store.conn(), cypher)?;
            if result.truncated {
                eprintln!("warning: result truncated at {} rows", query::ROW_CEILING);
            }
            out.rows(&result.columns, &result.rows)
        }
        Command::Trace { qname, direction, depth } => {
            let store = open_read(cli)?;
            let direction = match direction {
                Direction::Inbound => TraceDirection::Inbound,
                Direction::Outbound => TraceDirection::Outbound,
            };
            out.value(&to_value(&query::trace_call_path(store.conn(), qname, direction, *depth)?)?)
        }
        Command::Status => {
            let store = open_read(cli)?;
            let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
            let mut strategies: BTreeMap<String, u64> = BTreeMap::new();
            let diagnostics = store.diagnostics()?;
            for d in diagnostics.values() {
                *totals.entry("call_sites").or_default() += d.call_sites;
                *totals.entry("resolved_calls").or_default() += d.resolved_calls;
                *totals.entry("unresolved_calls").or_default() += d.unresolved_calls;
                for (k, v) in &d.by_strategy {
                    *strategies.entry(k.clone()).or_default() += v;
                }
            }
            let mut v = to_value(&store::project_info(&store)?)?;
            v["generation"] = json!(store.generation()?);
            v["files"] = json!(store.file_hashes()?.len());
            v["calls"] = to_value(&totals)?;
            v["calls_by_strategy"] = to_value(&strategies)?;
            out.value(&v)
        }
        Command::List => {
            let mut projects = store::list_projects(&store::data_dir())?;
            if let Some(db) = cli.db.as_ref().filter(|p| p.exists()) {
                let info = store::project_info(&Store::open(db, OpenMode::ReadOnly)?)?;
                if !projects.iter().any(|p| p.store_path == info.store_path) {
                    projects.push(info);
                }
            }
            out.value(&to_value(&projects)?)
        }
        Command::Delete => {
            let path = store_path(&cli.db, &cli.repo);
            let deleted = store::delete_store(&path)?;
            out.value(&json!({"deleted": deleted, "store_path": path}))
        }
        Command::DeadCode => {
            let store = open_read(cli)?;
            out.value(&to_value(&query::detect_dead_code(store.conn())?)?)
        }
        Command::Impact { changed, depth } => {
            let store = open_read(cli)?;
            let report = query::impact_analysis(store.conn(), changed, *depth)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            out.value(&to_value(&report)?)
        }
        Command::Architecture { hubs } => {
            let store = open_read(cli)?;
            let mut v = to_value(&query::architecture_summary(store.conn(), *hubs)?)?;
            v["hubs"] = to_value(&query::top_hubs(store.conn(), *hubs)?)?;
            out.value(&v)
        }
        Command::Bench {
            desk_scale,
            files,
            functions_per_file,
            seed,
            runs,
            workers,
            cases,
        } => {
            let mut spec = if *desk_scale { SyntheticRepoSpec::desk_scale() } else { SyntheticRepoSpec::default() };
            if let Some(f) = files {
                spec.file_count = *f;
            }
            if let Some(f) = functions_per_file {
                spec.functions_per_file = *f;
            }
            if let Some(s) = seed {
                spec.seed = *s;
            }
            let cases = match cases {
                Some(names) => names.iter().map(|n| parse_case(n)).collect::<Result<Vec<_>, _>>()?,
                None => BenchCase::ALL.to_vec(),
            };
            let suite = BenchSuite {
                spec,
                cases,
                runs: (*runs).max(1),
                workers: workers.unwrap_or_else(codegraph::par::default_workers).max(1),
            };
            out.value(&to_value(&run_bench(&suite)?)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            output::error(cli.format, &e);
            ExitCode::from(1)
        }
    }
}
