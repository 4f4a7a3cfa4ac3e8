use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use specrag_core::config::EngineConfig;
use specrag_core::corpus::{ClauseId, SpecId};
use specrag_core::crossref::resolve_references;
use specrag_core::eval::{run_microbenchmark, GoldReferenceSet, MicrobenchConfig};
use specrag_core::pipeline::{ContextSection, Pipeline, QueryResult};
use specrag_core::spec_db::VersionPolicy;
use specrag_core::store::{build_databases, Databases};

#[derive(Debug, Parser)]
#[command(name = "specrag", version, about = "Clause, change and CR retrieval over versioned specifications")]
struct Cli {
    /// Engine configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a corpus and CR directory and write the three stores.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        tdocs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a question.
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        question: String,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        k3: Option<usize>,
        #[arg(long)]
        no_hyde: bool,
        /// Print the full result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Show the citation closure of a clause or of a question's top hits.
    Trace {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, conflicts_with = "question", required_unless_present = "question")]
        uid: Option<String>,
        #[arg(long)]
        question: Option<String>,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        json: bool,
    },
    /// Print the change history of one clause.
    Diff {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        spec: String,
        #[arg(long)]
        clause: String,
        #[arg(long)]
        json: bool,
    },
    /// Score cross-reference retrieval against a gold CSV.
    Eval {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        budget: Budget,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Budget {
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// latest, at_or_before:YYYY-MM-DD or exact:M.m.p
    #[arg(long)]
    policy: Option<VersionPolicy>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    match cli.command {
        Command::Build { corpus, tdocs, out } => build(&config, &corpus, tdocs.as_deref(), &out),
        Command::Query { db, question, budget, k3, no_hyde, json } => {
            let mut rc = config.retrieval;
            rc.k1 = budget.k1.unwrap_or(rc.k1);
            rc.k2 = budget.k2.unwrap_or(rc.k2);
            rc.k3 = k3.unwrap_or(rc.k3);
            rc.max_depth = budget.depth.unwrap_or(rc.max_depth);
            rc.version_policy = budget.policy.unwrap_or(rc.version_policy);
            rc.hyde_enabled &= !no_hyde;

            let (dbs, embed) = open(&db)?;
            let generator = config.providers.generate.generator()?;
            let pipeline = Pipeline::new(&dbs.spec, &dbs.change, &dbs.tdoc, embed.as_ref(), generator.as_ref())
                .with_template(config.prompt_template()?);
            let result = pipeline.answer_query(&question, &rc)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&result)?);
            } else {
                print_result(&result);
            }
            Ok(if result.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Trace { db, uid, question, budget, json } => {
            let (dbs, embed) = open(&db)?;
            let policy = budget.policy.unwrap_or(config.retrieval.version_policy);
            let depth = budget.depth.unwrap_or(config.retrieval.max_depth);
            let seeds = match (uid, question) {
                (Some(uid), _) => {
                    vec![dbs.spec.chunk(&uid).with_context(|| format!("no chunk {uid}"))?]
                }
                (None, Some(q)) => {
                    let k1 = budget.k1.unwrap_or(config.retrieval.k1);
                    let hits = dbs.spec.semantic_search(embed.as_ref(), &q, k1, policy)?;
                    hits.iter().filter_map(|h| dbs.spec.chunk(&h.item_uid)).collect()
                }
                (None, None) => bail!("one of --uid or --question is required"),
            };
            let trace = resolve_references(&dbs.spec, &seeds, depth, policy);
            if json {
                println!("{}", serde_json::to_string_pretty(&trace)?);
            } else {
                for n in &trace.nodes {
                    let parent = n.parent_chunk_uid.as_deref().unwrap_or("-");
                    println!("{}{}  (depth {}, from {parent})", "  ".repeat(n.depth), n.chunk_uid, n.depth);
                }
                for w in &trace.warnings {
                    println!("warning: {w}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Diff { db, spec, clause, json } => {
            let (dbs, _) = open(&db)?;
            let spec = SpecId::parse(&spec)?;
            let clause = ClauseId::parse(&clause)?;
            let chain = dbs.change.chain(&spec, &clause);
            if chain.is_empty() {
                bail!("no change history for clause {clause} of TS {spec}");
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&chain)?);
            } else {
                for e in chain {
                    println!("{}", e.embedding_text(usize::MAX));
                    println!();
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { db, gold, budget, out } => {
            let (dbs, _) = open(&db)?;
            let gold = GoldReferenceSet::read_csv(&gold)?;
            let defaults = MicrobenchConfig::default();
            let mc = MicrobenchConfig {
                k1: budget.k1.unwrap_or(defaults.k1),
                k2: budget.k2.unwrap_or(defaults.k2),
                max_depth: budget.depth.unwrap_or(defaults.max_depth),
                policy: budget.policy.unwrap_or(defaults.policy),
            };
            let report = run_microbenchmark(&dbs.spec, &gold, &mc)?;
            print!("{}", report.to_table());
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build(config: &EngineConfig, corpus: &Path, tdocs: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let embed = config.providers.embed.embedder()?;
    let (dbs, report) = build_databases(corpus, tdocs, embed.as_ref(), config)?;
    dbs.save(out, &config.providers.embed)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} documents, {} clause chunks, {} change entries, {} CRs ({} CR chunks) in {:.2?}",
        report.documents,
        dbs.spec.len(),
        dbs.change.len(),
        report.crs,
        dbs.tdoc.len(),
        report.elapsed
    );
    Ok(ExitCode::SUCCESS)
}

/// Loads the stores; the embedder is the one they were built with.
fn open(dir: &Path) -> Result<(Databases, std::sync::Arc<dyn specrag_core::embedding::Embedder>)> {
    let (dbs, meta) = Databases::load(dir).with_context(|| format!("opening {}", dir.display()))?;
    let embed = meta.embed.embedder()?;
    Ok((dbs, embed))
}

fn print_result(r: &QueryResult) {
    match &r.answer {
        Some(a) => println!("{a}\n"),
        None => println!("(no answer)\n"),
    }
    for (section, title) in [
        (ContextSection::Initial, "retrieved"),
        (ContextSection::Referenced, "referenced"),
        (ContextSection::Evolution, "change requests"),
    ] {
        println!("{title}:");
        for c in r.section(section) {
            println!("  {:.4}  {}", c.score, c.chunk_uid);
        }
    }
    if !r.change_hits.is_empty() {
        println!("changes:");
        for h in &r.change_hits {
            println!("  {:.4}  {}", h.score, h.item_uid);
        }
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    for f in &r.failures {
        eprintln!("failed at {}: {}", f.stage, f.message);
    }
}
