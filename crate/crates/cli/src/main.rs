//! `glotforge`: corpus curation and language-divergence toolkit.
//!
//! Logs go to standard error; artifacts go to the paths given on the command
//! line. Exit codes: 0 ok, 1 usage, 2 io, 3 data, 4 internal.

mod commands;
mod corpusio;
mod error;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::{internal, Result};
use glotforge_core::filters::FilterConfig;

#[derive(Parser)]
#[command(name = "glotforge", version, about = "Corpus curation and language divergence toolkit")]
struct Cli {
    /// Worker threads for within-stage parallelism (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct FilterArgs {
    /// SF1: maximum repeated-character-trigram ratio.
    #[arg(long, default_value_t = FilterConfig::default().max_char_rep)]
    max_char_rep: f64,
    /// SF2: maximum repeated-word ratio.
    #[arg(long, default_value_t = FilterConfig::default().max_word_rep)]
    max_word_rep: f64,
    /// SF3: maximum special-character ratio.
    #[arg(long, default_value_t = FilterConfig::default().max_special)]
    max_special: f64,
    /// SF4: minimum number of words.
    #[arg(long, default_value_t = FilterConfig::default().min_words)]
    min_words: usize,
}

impl FilterArgs {
    fn config(&self) -> FilterConfig {
        FilterConfig {
            max_char_rep: self.max_char_rep,
            max_word_rep: self.max_word_rep,
            max_special: self.max_special,
            min_words: self.min_words,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the synthetic ten-language fixture corpus tree.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        /// Sentences per language.
        #[arg(long, default_value_t = 2000)]
        chunks: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write a positionally parallel bible.txt with this many verses.
        #[arg(long, default_value_t = 0)]
        bible_verses: usize,
    },
    /// Separate one corpus file into per-script corpora.
    SplitScripts {
        #[arg(long)]
        input: PathBuf,
        /// Language-script tag of the input, e.g. tgk_Cyrl.
        #[arg(long)]
        tag: String,
        /// Output directory for <tag>.txt files and discards.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        mixed_threshold: f64,
    },
    /// Apply the sentence-level cleaning filters to one corpus file.
    Clean {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tag: String,
        /// Kept sentences, one per line.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-filter rejection report.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        filters: FilterArgs,
    },
    /// Train a character n-gram model and write it in ARPA format.
    TrainLm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Maximum number of training sentences.
        #[arg(long, default_value_t = 100_000)]
        cap: usize,
    },
    /// Compute the pairwise divergence matrix from models and test corpora.
    Divergence {
        /// Directory of <tag>.arpa model files.
        #[arg(long)]
        models: PathBuf,
        /// Directory of <tag>.txt test corpora.
        #[arg(long)]
        tests: PathBuf,
        /// Output TSV matrix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Flag languages whose nearest neighbor is in another family.
    Flags {
        /// Divergence matrix TSV.
        #[arg(long)]
        matrix: PathBuf,
        /// Family tree file (tag<TAB>group/group/...).
        #[arg(long)]
        families: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Family level for the same-family check (depth or "max").
        #[arg(long, default_value = "1")]
        level: String,
    },
    /// Apply the corpus-size inclusion gate to a directory of corpora.
    Gate {
        /// Directory of <tag>.txt corpora.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30_000)]
        threshold: usize,
    },
    /// Build the train/dev/test split manifest for one corpus.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        seed: u64,
        /// Output JSON manifest.
        #[arg(long)]
        out: PathBuf,
        /// Positionally parallel Bible corpus.
        #[arg(long)]
        bible: Option<PathBuf>,
    },
    /// Compute alpha-multinomial sampling weights over a corpus directory.
    Weights {
        /// Directory of <tag>.txt corpora.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        /// Head language-scripts clamped to the smallest tail size.
        #[arg(long, value_delimiter = ',')]
        head: Vec<String>,
    },
    /// Train a unigram-LM vocabulary on a directory of corpora.
    VocabTrain {
        /// Directory of <tag>.txt corpora.
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary size.
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output TSV vocabulary.
        #[arg(long)]
        out: PathBuf,
        /// Optional tag<TAB>weight TSV of corpus weights.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Merge a newly trained vocabulary into a base vocabulary.
    VocabMerge {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        new: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k sentence retrieval accuracy against a source language.
    EvalRetrieval {
        /// Directory of <tag>/ embedding dumps (manifest.txt + files).
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roundtrip word-alignment accuracy through language chains.
    EvalRoundtrip {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long, default_value_t = 5)]
        chains: usize,
        #[arg(long, default_value_t = 3)]
        intermediates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudoperplexity from a masked-LM score dump.
    EvalPppl {
        /// Score file: tag<TAB>word_count<TAB>space-separated log-probs.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "word")]
        norm: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// kNN family-classification accuracy table over a divergence matrix.
    FamilyEval {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        families: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,3,7")]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,max")]
        levels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full curation pipeline with resumable stage outputs.
    Run {
        /// JSON pipeline config.
        #[arg(long)]
        config: PathBuf,
        /// Artifact directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Fixture { out, chunks, seed, bible_verses } => {
            commands::fixture(&out, chunks, seed, bible_verses)
        }
        Cmd::SplitScripts { input, tag, out, mixed_threshold } => {
            commands::split_scripts(&input, &tag, &out, mixed_threshold)
        }
        Cmd::Clean { input, tag, out, report, filters } => {
            commands::clean(&input, &tag, &out, report.as_deref(), &filters.config())
        }
        Cmd::TrainLm { input, tag, out, order, cap } => {
            commands::train_lm(&input, &tag, &out, order, cap)
        }
        Cmd::Divergence { models, tests, out } => commands::divergence(&models, &tests, &out),
        Cmd::Flags { matrix, families, out, level } => {
            commands::flags(&matrix, &families, &out, &level)
        }
        Cmd::Gate { corpus, out, threshold } => commands::gate(&corpus, &out, threshold),
        Cmd::Split { input, tag, seed, out, bible } => {
            commands::split(&input, &tag, seed, &out, bible.as_deref())
        }
        Cmd::Weights { corpus, out, alpha, head } => {
            commands::weights(&corpus, &out, alpha, &head)
        }
        Cmd::VocabTrain { corpus, target, seed, out, weights } => {
            commands::vocab_train(&corpus, target, seed, &out, weights.as_deref())
        }
        Cmd::VocabMerge { base, new, out } => commands::vocab_merge(&base, &new, &out),
        Cmd::EvalRetrieval { root, source, k, out } => {
            commands::eval_retrieval(&root, &source, k, &out)
        }
        Cmd::EvalRoundtrip { root, source, chains, intermediates, seed, out } => {
            commands::eval_roundtrip(&root, &source, chains, intermediates, seed, &out)
        }
        Cmd::EvalPppl { scores, norm, out } => commands::eval_pppl(&scores, &norm, &out),
        Cmd::FamilyEval { matrix, families, k, levels, out } => {
            commands::family_eval(&matrix, &families, &k, &levels, &out)
        }
        Cmd::Run { config, out } => pipeline::run(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(workers) = cli.workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(internal);
        if let Err(e) = pool {
            eprintln!("error: {}", e.msg);
            return ExitCode::from(e.kind.code());
        }
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.kind.code())
        }
    }
}
