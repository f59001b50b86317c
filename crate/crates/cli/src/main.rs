use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "spigot",
    version,
    about = "Structured argmax layers with gradient proxies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecodeFormat {
    /// Projective trees from dense arc score matrices, written as TSV.
    Conll,
    /// Semantic graphs from unlabeled and labeled score matrices, written
    /// as JSON-lines.
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolytopeArg {
    Dep,
    Sdp,
}

#[derive(Subcommand)]
enum Command {
    /// Decode the highest-scoring structure for each sentence.
    Decode {
        #[arg(long, value_enum, default_value = "conll")]
        format: DecodeFormat,
        /// JSON-lines file with one score object per sentence.
        #[arg(long)]
        scores: PathBuf,
    },
    /// Project a vector onto a relaxed structure polytope.
    Project {
        #[arg(long, value_enum)]
        polytope: PolytopeArg,
        /// JSON object with `n`, `values` and (for sdp) `labels`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Arc marginals and log-partition of a tree distribution.
    Marginals {
        #[arg(long)]
        input: PathBuf,
    },
    /// Finite-difference checks of the backward passes.
    Gradcheck {
        /// all, encoder, scorer, head_features, head_features_h,
        /// head_features_z, classifier, sa or log_loss_tree.
        #[arg(long, default_value = "all")]
        module: String,
        #[arg(long, default_value_t = spigot::learn::DEFAULT_INSTANCES)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train a pipeline and print per-epoch metrics as JSON-lines.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        proxy: String,
        #[arg(long)]
        seed: u64,
        /// Where to save the trained model as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two trained models on an evaluation file.
    Analyze {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every configured proxy over every seed and write result tables.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decode { format, scores } => commands::decode(format, &scores),
        Command::Project { polytope, input } => commands::project(polytope, &input),
        Command::Marginals { input } => commands::marginals(&input),
        Command::Gradcheck {
            module,
            instances,
            seed,
        } => commands::gradcheck(&module, instances, seed),
        Command::Train {
            config,
            proxy,
            seed,
            out,
        } => commands::train(&config, &proxy, seed, out.as_deref()),
        Command::Analyze { a, b, data } => commands::analyze(&a, &b, &data),
        Command::Gen { spec, out } => commands::generate(&spec, &out),
        Command::Experiment { config, out } => commands::experiment(&config, &out),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let validation = err.chain().any(|e| {
                e.downcast_ref::<spigot::Error>()
                    .is_some_and(|e| e.is_validation())
            });
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
