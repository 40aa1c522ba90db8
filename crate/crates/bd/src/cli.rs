use std::io::Write;
use std::path::{Path, PathBuf};

use bd_core::clock::Clock;
use bd_core::curation::{self, CuratedTerm};
use bd_core::index::Leader;
use bd_core::{Community, TermStats};
use clap::{ArgAction, Parser, Subcommand};

use crate::app::{self, AppError};
use crate::config::{self, AppConfig, DEFAULT_CONFIG_FILE};
use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "bd",
    version,
    about = "Build and serve a two-community bridging dictionary",
    after_help = "Any config value can be overridden with a flag of the same dotted name, \
                  e.g. --curation.freq_z_threshold 2.5 or --rag.seed=7."
)]
pub struct Cli {
    /// Config file (TOML). Defaults to ./bd.toml when present.
    #[arg(long, global = true, env = "BD_CONFIG")]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read the corpus, build the index and write the snapshot.
    Ingest,
    /// Select divergent terms and write the curated-terms file.
    Curate,
    /// Generate the printable dictionary (Markdown and HTML).
    Paper,
    /// Serve the JSON API.
    Serve,
    /// Print usage statistics for one term.
    Query {
        #[arg(required = true, num_args = 1..)]
        term: Vec<String>,
    },
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let (rest, overrides) = match config::split_overrides(args) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match execute(&cli, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli, overrides: &[(String, String)]) -> Result<AppConfig, AppError> {
    let cwd = std::env::current_dir().map_err(|e| AppError::Other(format!("current directory: {e}")))?;
    let path = cli.config.clone().or_else(|| {
        let default = Path::new(DEFAULT_CONFIG_FILE);
        default.exists().then(|| default.to_path_buf())
    });
    if let Some(p) = &path {
        if !p.exists() {
            return Err(AppError::MissingInput(format!("config file not found: {}", p.display())));
        }
    }
    Ok(AppConfig::load(path.as_deref(), overrides, &cwd)?)
}

fn execute(cli: &Cli, overrides: &[(String, String)]) -> Result<(), AppError> {
    let config = load_config(cli, overrides)?;
    let clock = Clock::from_env();
    match &cli.command {
        Command::Ingest => ingest(&config),
        Command::Curate => curate(&config),
        Command::Paper => paper(&config, clock),
        Command::Serve => serve(config, clock),
        Command::Query { term } => query(&config, &term.join(" ")),
    }
}

fn ingest(config: &AppConfig) -> Result<(), AppError> {
    let (_, summary) = app::ingest(config)?;
    let report = &summary.report;
    println!(
        "ingested {} documents from {} ({} skipped)",
        report.accepted,
        config.corpus_path.display(),
        report.skipped
    );
    for (c, count) in summary.docs.iter() {
        println!("  {} {} ({}): {count}", c.position(), config.display_names[c.index()], summary.labels[c]);
    }
    for (reason, n) in &report.skipped_by_reason {
        println!("  skipped, {reason}: {n}");
    }
    println!("distinct terms: {}", summary.terms);
    println!("snapshot: {} (sha256 {})", summary.snapshot.display(), summary.snapshot_sha256);
    Ok(())
}

fn curate(config: &AppConfig) -> Result<(), AppError> {
    let index = app::open_index(config)?;
    let terms = app::curate(config, &index)?;
    if terms.is_empty() {
        eprintln!("warning: no term met the curation thresholds; wrote an empty {}", config.paths.curated.display());
        return Ok(());
    }
    println!("curated {} terms -> {}", terms.len(), config.paths.curated.display());
    print!("{}", preview(&terms, 10));
    Ok(())
}

fn preview(terms: &[CuratedTerm], limit: usize) -> String {
    let width = terms.iter().take(limit).map(|t| t.term.chars().count()).max().unwrap_or(0).max(4);
    let mut out = format!("{:>4}  {:<width$}  {:<9}  {:>7}  {:>6}\n", "rank", "term", "trigger", "z", "gap");
    for (i, t) in terms.iter().take(limit).enumerate() {
        let trigger = serde_json::to_value(t.score.trigger).ok().and_then(|v| v.as_str().map(String::from));
        let gap = t.score.sent_gap.map_or_else(|| "-".to_string(), |g| format!("{g:.2}"));
        out.push_str(&format!(
            "{:>4}  {:<width$}  {:<9}  {:>7.2}  {:>6}\n",
            i + 1,
            t.term,
            trigger.unwrap_or_default(),
            t.score.freq_z,
            gap
        ));
    }
    out
}

fn paper(config: &AppConfig, clock: Clock) -> Result<(), AppError> {
    let curated = app::read_curated(config)?;
    let index = app::open_index(config)?;
    let generator = app::build_generator(config, &index, app::backend_from_env(config)?, clock)?;
    let edition = app::assemble_edition(config, &index, &curated, &generator, clock)?;
    for erratum in &edition.errata {
        eprintln!("warning: {}: {}", erratum.term, erratum.reason);
    }
    let paths = app::write_edition(config, &edition)?;
    println!("wrote {} entries ({} errata)", edition.entries.len(), edition.errata.len());
    for p in paths {
        println!("  {}", p.display());
    }
    Ok(())
}

fn serve(config: AppConfig, clock: Clock) -> Result<(), AppError> {
    let index = app::open_index(&config)?;
    let curated = match app::read_curated(&config) {
        Ok(terms) => terms,
        Err(AppError::MissingInput(_)) => {
            tracing::warn!("no curated-terms file; curating in memory");
            curation::curate(&index, &config.curation).map_err(|e| AppError::Other(e.to_string()))?
        }
        Err(e) => return Err(e),
    };
    let generator = app::build_generator(&config, &index, app::backend_from_env(&config)?, clock)?;
    let state = AppState::new(config, index, generator, curated, clock);
    server::serve_blocking(state, |addr| {
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
    })
}

fn query(config: &AppConfig, term: &str) -> Result<(), AppError> {
    let index = app::open_index(config)?;
    let stats = index.term_stats(term).map_err(|e| AppError::Other(e.to_string()))?;
    print!("{}", render_stats(&stats, &config.display_names));
    Ok(())
}

fn leader_name(leader: Leader, names: &[String; 2]) -> String {
    match leader {
        Leader::Community(c) => names[c.index()].clone(),
        Leader::Tie => "tie".to_string(),
    }
}

/// TermStats and ComparativeView as an aligned table.
pub fn render_stats(stats: &TermStats, names: &[String; 2]) -> String {
    let cmp = stats.compare();
    let col = names.iter().map(|n| n.chars().count()).max().unwrap_or(0).max(8);
    let row = |label: &str, a: String, b: String| format!("{label:<18}{a:>col$}  {b:>col$}\n");
    let per = |f: &dyn Fn(Community) -> String| (f(Community::A), f(Community::B));
    let mut out = format!("term: {}\n", stats.term);
    out.push_str(&row("", names[0].clone(), names[1].clone()));
    let (a, b) = per(&|c| stats.doc_count[c].to_string());
    out.push_str(&row("documents", a, b));
    let (a, b) = per(&|c| format!("{:.1}", stats.rate_per_k[c]));
    out.push_str(&row("per 1k documents", a, b));
    let (a, b) = per(&|c| stats.share.as_ref().map_or_else(|| "-".to_string(), |s| format!("{:.3}", s[c])));
    out.push_str(&row("share", a, b));
    let (a, b) = per(&|c| stats.sentiment_mean[c].map_or_else(|| "-".to_string(), |s| format!("{s:+.2}")));
    out.push_str(&row("sentiment", a, b));
    out.push_str(&format!(
        "{:<18}{} ({:+.1} per 1k)\n",
        "higher rate",
        leader_name(cmp.higher_rate, names),
        cmp.rate_delta
    ));
    let sentiment = match (cmp.higher_sentiment, cmp.sentiment_delta) {
        (Some(l), Some(d)) => format!("{} ({d:+.2})", leader_name(l, names)),
        _ => "undefined".to_string(),
    };
    out.push_str(&format!("{:<18}{sentiment}\n", "higher sentiment"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use bd_core::PerCommunity;

    #[test]
    fn stats_table() {
        let stats = TermStats::from_parts(
            "zephyr".into(),
            PerCommunity::new(3, 0),
            PerCommunity::new(2000, 2000),
            PerCommunity::new(0.0, 0.0),
        );
        let text = render_stats(&stats, &["Left".into(), "Right".into()]);
        assert!(text.contains("per 1k documents       1.5       0.0"), "{text}");
        assert!(text.contains("higher rate       Left (+1.5 per 1k)"), "{text}");
        assert!(text.contains("higher sentiment  undefined"), "{text}");
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["bd", "query", "gun", "control"]).unwrap();
        assert!(matches!(cli.command, Command::Query { ref term } if term.join(" ") == "gun control"));
        assert!(Cli::try_parse_from(["bd", "query"]).is_err());
    }
}
