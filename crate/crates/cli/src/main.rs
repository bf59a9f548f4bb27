//! `semcom`: build probability graphs, compress and restore knowledge graphs,
//! and run the energy allocation.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 infeasible
//! allocation, 4 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semcom::config::Config;
use semcom::experiments::{emit_csv, emit_plotdata, run_sweep, Algorithm, SweepSpec, SweepVariable};
use semcom::kg::{load_graph, write_graph};
use semcom::optimizer::SolveOptions;
use semcom::{
    compress_with_vocab, decode_message, decompress, encode_message, estimate_q, load_corpus,
    message_vocabulary, optimizer, Error, OmissionProfile, ProbabilityGraph,
};

#[derive(Parser)]
#[command(name = "semcom", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the shared probability graph from a corpus.
    BuildGraph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress one knowledge graph against a probability graph.
    Compress {
        #[arg(long)]
        graph: PathBuf,
        /// Knowledge graph as a JSON object or three-column TSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = semcom::compressor::DEFAULT_MAX_ROUND)]
        max_round: u8,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-stage compression report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Restore a knowledge graph from a compressed message.
    Decompress {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate per-stage omission ratios from a corpus.
    EstimateQ {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = semcom::compressor::DEFAULT_MAX_ROUND)]
        max_round: u8,
    },
    /// Solve the allocation for every algorithm and print the results as JSON.
    Optimize {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Include the per-omission-count trace for the searching algorithms.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep one parameter and write the energy curves.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// m_total, bandwidth_mhz or latency_budget_ms
        #[arg(long)]
        var: SweepVariable,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        plotdata: Option<PathBuf>,
    },
}

enum Failure {
    Core(Error),
    Infeasible(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

fn config(path: Option<&Path>) -> Result<Config, Error> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

/// The configured ratios, or ratios estimated from the configured corpus.
fn profile(cfg: &Config) -> Result<OmissionProfile, Error> {
    match &cfg.corpus {
        None => cfg.profile(),
        Some(path) => {
            let corpus = load_corpus(path)?;
            let g = ProbabilityGraph::build(&corpus)?;
            estimate_q(&g, &corpus, cfg.max_round()?)?.with_m_total(cfg.m_total()?)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("results serialize to JSON")
}

fn run(command: Command) -> Outcome {
    match command {
        Command::BuildGraph { corpus, out } => {
            let corpus = load_corpus(corpus)?;
            let g = ProbabilityGraph::build(&corpus)?;
            g.save(&out)?;
            eprintln!(
                "{} samples, {} pairs, hash {}",
                g.n_samples(),
                g.len(),
                g.hash()
            );
        }
        Command::Compress {
            graph,
            input,
            max_round,
            out,
            report,
        } => {
            let g = ProbabilityGraph::load(graph)?;
            let mut vocab = g.vocab().clone();
            let kg = load_graph(input, &mut vocab)?;
            let (msg, rep) = compress_with_vocab(&g, &vocab, &kg, max_round)?;
            let bytes = encode_message(&msg);
            fs::write(&out, &bytes)?;
            if let Some(path) = report {
                fs::write(path, to_json(&rep) + "\n")?;
            }
            eprintln!(
                "{} triples, {} relations omitted, {} bytes",
                msg.triple_count(),
                msg.omitted(),
                bytes.len()
            );
        }
        Command::Decompress { graph, input, out } => {
            let g = ProbabilityGraph::load(graph)?;
            let msg = decode_message(&fs::read(input)?)?;
            let kg = decompress(&g, &msg)?;
            let vocab = message_vocabulary(&g, &msg)?;
            let mut buf = Vec::new();
            write_graph(&vocab, &kg, &mut buf)?;
            fs::write(out, buf)?;
        }
        Command::EstimateQ {
            graph,
            corpus,
            max_round,
        } => {
            let g = ProbabilityGraph::load(graph)?;
            let corpus = load_corpus(corpus)?;
            let profile = estimate_q(&g, &corpus, max_round)?;
            let out = serde_json::json!({ "m_total": profile.m_total, "q": profile.q });
            println!("{}", to_json(&out));
        }
        Command::Optimize { config: path, trace } => {
            let cfg = config(path.as_deref())?;
            let link = cfg.link()?;
            let profile = profile(&cfg)?;
            let m = profile.m_total;
            let opts = SolveOptions { trace };
            let jccpg = optimizer::solve_with(&link, &profile, m, opts)?;
            let simplified = optimizer::solve_simplified_with(&link, &profile, m, opts)?;
            let traditional = Algorithm::Traditional.run(&link, &profile, m)?;
            let out = serde_json::json!({
                "m_total": m,
                "q": profile.q,
                "jccpg": jccpg,
                "simplified": simplified,
                "traditional": traditional,
            });
            println!("{}", to_json(&out));
            if !jccpg.feasible {
                return Err(Failure::Infeasible(
                    "no power within p_max meets the latency budget".into(),
                ));
            }
        }
        Command::Sweep {
            config: path,
            var,
            grid,
            csv,
            plotdata,
        } => {
            let cfg = config(path.as_deref())?;
            let spec = SweepSpec::from_config(&cfg, var, grid)?;
            let rows = run_sweep(&spec)?;
            emit_csv(&rows, &csv)?;
            if let Some(path) = plotdata {
                emit_plotdata(&rows, var, spec.seed, path)?;
            }
            let infeasible = rows.iter().filter(|r| !r.result.feasible).count();
            eprintln!("{} rows, {infeasible} infeasible", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(why)) => {
            eprintln!("infeasible: {why}");
            ExitCode::from(3)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => 4,
                _ => 2,
            })
        }
    }
}
