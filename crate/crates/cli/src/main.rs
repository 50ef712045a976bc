mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "autopatch", version, about = "Match code against known CVEs, verify and patch it")]
pub struct Cli {
    /// Serve every provider call from this replay archive; never touches the network.
    #[arg(long, global = true, value_name = "ARCHIVE", env = "AUTOPATCH_REPLAY", conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Call the live provider and record every exchange into this archive.
    #[arg(long, global = true, value_name = "ARCHIVE", env = "AUTOPATCH_RECORD")]
    pub record: Option<PathBuf>,
    /// TOML configuration file (schema = 1).
    #[arg(long, global = true, value_name = "FILE", env = "AUTOPATCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "AUTOPATCH_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct KbArgs {
    /// Knowledge base directory.
    #[arg(long, env = "AUTOPATCH_KB")]
    pub kb: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TargetArgs {
    /// C source of the target.
    pub code: PathBuf,
    /// File holding the developer's description of what the code should do.
    #[arg(long)]
    pub intent: Option<PathBuf>,
    /// Supplementary code shown to the agents alongside the target.
    #[arg(long)]
    pub supplementary: Option<PathBuf>,
    /// Use this data-flow graph instead of extracting one.
    #[arg(long, value_name = "DFG_JSON")]
    pub dfg: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate and add CVE entry documents to a knowledge base.
    Ingest {
        /// A JSON document or a directory of them.
        path: PathBuf,
        #[command(flatten)]
        kb: KbArgs,
        /// Tag vocabulary file (default: bundled).
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        /// CWE-to-category map (default: bundled).
        #[arg(long)]
        categories: Option<PathBuf>,
    },
    /// Score every KB entry against a target and report the ranking.
    Analyze {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long, env = "AUTOPATCH_MODEL_FILE")]
        model_file: Option<PathBuf>,
    },
    /// Extract, emit or import a data-flow graph.
    Dfg {
        code: PathBuf,
        /// Write the extracted graph as JSON to this file instead of stdout.
        #[arg(long, value_name = "FILE", conflicts_with = "import")]
        emit: Option<PathBuf>,
        /// Validate a graph document and print it in flow notation.
        #[arg(long, value_name = "FILE")]
        import: Option<PathBuf>,
    },
    /// One verification step against a named KB entry.
    Verify {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        cve: String,
        /// Symbol mapping JSON; computed from entity descriptions when absent.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// One patch step against a named KB entry.
    Patch {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        cve: String,
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Root cause text, or `@FILE` to read it from a file.
        #[arg(long)]
        root_cause: String,
    },
    /// Full pipeline: match, verify, then patch until clean or capped.
    Run {
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long, env = "AUTOPATCH_MODEL_FILE")]
        model_file: Option<PathBuf>,
        #[arg(long, env = "AUTOPATCH_MAX_LOOPS")]
        max_loops: Option<usize>,
        /// Sampling profile for agent calls: agent, generation or provider-default.
        #[arg(long, env = "AUTOPATCH_PROVIDER_PROFILE")]
        provider_profile: Option<String>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the ranking weights with the pairwise margin loss.
    Train {
        /// JSON array (or JSON lines) of training samples.
        #[arg(long, required_unless_present = "synthetic")]
        dataset: Option<PathBuf>,
        /// Generate a synthetic dataset instead: `separable` or `informative:<k>`.
        #[arg(long, conflicts_with = "dataset")]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long, default_value_t = 9)]
        negatives: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
        /// Train:validation:test percentages.
        #[arg(long, default_value = "70:15:15")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply augmentation transforms to a C file or a corpus.
    Augment {
        /// A C file, or a JSON array of {cve_id, vulnerable_code, patched_code}.
        input: PathBuf,
        /// Comma-separated transforms (T1..T5, NT1..NT4); a list is applied as a chain.
        /// With a corpus, the list is the pool each output draws from (default: all).
        #[arg(long)]
        transform: Option<String>,
        /// Variants per CVE for a corpus, as `vulnerable:patched`.
        #[arg(long, default_value = "1:1")]
        per_cve: String,
        /// Replacement-name and comment lexicon (default: bundled).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confusion metrics and patch accuracy of predictions against labels.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// vuln-only or joint.
        #[arg(long, default_value = "vuln-only")]
        mode: String,
        /// Subsample exactly `vulnerable:clean` samples per CVE first.
        #[arg(long)]
        ratio: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Cumulative cost projection of maintenance plans.
    Cost {
        /// pipeline, incremental:<epochs> or non-incremental:<interval>; repeatable.
        #[arg(long, required = true)]
        plan: Vec<String>,
        #[arg(long)]
        n: usize,
        /// TOML file overriding cost parameters.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { autopatch_core::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
