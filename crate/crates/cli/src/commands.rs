//! Implementations of the standalone subcommands. Each takes plain values
//! (already parsed by clap), reads its inputs, and writes its artifact;
//! progress notes go to standard error.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use glotforge_core::charlm::train_char_lm;
use glotforge_core::curation::{make_splits, sampling_weights};
use glotforge_core::divergence::{cf2_flags, divergence_matrix, DivergenceMatrix};
use glotforge_core::embed::{
    load_embedding_dir, pppl, retrieval_topk_accuracy, roundtrip_accuracy, PpplNorm, ScoreStream,
};
use glotforge_core::family::{knn_family_accuracy, FamilyError, FamilyLevel, FamilyTreeSet};
use glotforge_core::filters::{clean_corpus, FilterConfig};
use glotforge_core::fixture::{fixture_tags, generate_bible, write_fixture_tree};
use glotforge_core::model::{load_corpus, CorpusHandle, LanguageScript};
use glotforge_core::script::split_by_script;
use glotforge_core::vocab::{merge_vocab, train_unigram_vocab, UnigramTrainConfig, VocabModel};
use glotforge_core::{arpa, curation};

use crate::corpusio::{
    arg_tag, data_tag, load_tag_dir, tag_dir, tsv_lines, write_atomic, write_corpus_txt,
};
use crate::error::{data_err, io_err, usage, Result};

pub fn fixture(out: &Path, chunks: usize, seed: u64, bible_verses: usize) -> Result<()> {
    write_fixture_tree(out, chunks, seed)?;
    if bible_verses > 0 {
        for ls in fixture_tags() {
            let bible = generate_bible(&ls, bible_verses, seed);
            write_corpus_txt(&out.join(ls.to_string()).join("bible.txt"), &bible)?;
        }
    }
    eprintln!("fixture: wrote {} languages to {}", fixture_tags().len(), out.display());
    Ok(())
}

pub fn split_scripts(input: &Path, tag: &str, out: &Path, mixed_threshold: f64) -> Result<()> {
    if !(mixed_threshold > 0.5 && mixed_threshold <= 1.0) {
        return Err(usage("--mixed-threshold must be in (0.5, 1.0]"));
    }
    let ls = arg_tag(tag)?;
    let corpus = load_corpus(input, ls)?;
    let (parts, report) = split_by_script(&corpus, mixed_threshold);
    for (ls, part) in &parts {
        write_corpus_txt(&out.join(format!("{ls}.txt")), part)?;
    }
    write_atomic(&out.join("discards.tsv"), report.to_text().as_bytes())?;
    eprintln!(
        "split-scripts: {} scripts, {} chunks discarded",
        parts.len(),
        report.total()
    );
    Ok(())
}

pub fn clean(
    input: &Path,
    tag: &str,
    out: &Path,
    report_path: Option<&Path>,
    cfg: &FilterConfig,
) -> Result<()> {
    let ls = arg_tag(tag)?;
    let corpus = load_corpus(input, ls)?;
    let (kept, report) = clean_corpus(&corpus, cfg);
    write_corpus_txt(out, &kept)?;
    if let Some(p) = report_path {
        write_atomic(p, report.to_text().as_bytes())?;
    }
    eprintln!(
        "clean: kept {} of {} chunks ({} rejected)",
        kept.n_chunks(),
        corpus.n_chunks(),
        report.total_rejected()
    );
    Ok(())
}

pub fn train_lm(input: &Path, tag: &str, out: &Path, order: usize, cap: usize) -> Result<()> {
    let ls = arg_tag(tag)?;
    let corpus = load_corpus(input, ls)?;
    let model = train_char_lm(&corpus, order, cap)?;
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    arpa::write_model(&model, out)?;
    eprintln!(
        "train-lm: order-{order} model over {} characters written to {}",
        model.alphabet().len(),
        out.display()
    );
    Ok(())
}

pub fn divergence(models_dir: &Path, tests_dir: &Path, out: &Path) -> Result<()> {
    let models: Vec<_> = tag_dir(models_dir, "arpa")?
        .into_iter()
        .map(|(_, path)| arpa::read_model(&path).map_err(Into::into))
        .collect::<Result<_>>()?;
    let model_tags: BTreeSet<&LanguageScript> = models.iter().map(|m| &m.ls).collect();
    let tests: Vec<CorpusHandle> = load_tag_dir(tests_dir)?
        .into_iter()
        .filter(|t| model_tags.contains(&t.ls))
        .collect();
    let matrix = divergence_matrix(&models, &tests)?;
    write_atomic(out, matrix.to_tsv().as_bytes())?;
    eprintln!("divergence: {0}x{0} matrix written to {1}", matrix.n(), out.display());
    Ok(())
}

pub fn flags(matrix_path: &Path, families_path: &Path, out: &Path, level: &str) -> Result<()> {
    let matrix = read_matrix(matrix_path)?;
    let families = read_families(families_path)?;
    let level: FamilyLevel = level.parse().map_err(usage)?;
    let flags = cf2_flags(&matrix, &families, level);
    let mut text = String::new();
    for flag in &flags {
        text.push_str(&flag.to_line());
        text.push('\n');
    }
    write_atomic(out, text.as_bytes())?;
    let cross = flags.iter().filter(|f| !f.same_family).count();
    eprintln!("flags: {} languages, {cross} with a cross-family nearest neighbor", flags.len());
    Ok(())
}

pub fn gate(corpus_dir: &Path, out: &Path, threshold: usize) -> Result<()> {
    let mut text = String::new();
    let mut included = 0usize;
    for corpus in load_tag_dir(corpus_dir)? {
        let include = curation::include_gate(&corpus, threshold);
        included += include as usize;
        let verdict = if include { "include" } else { "exclude" };
        text.push_str(&format!("{}\t{}\t{verdict}\n", corpus.ls, corpus.n_chunks()));
    }
    write_atomic(out, text.as_bytes())?;
    eprintln!("gate: {included} language-scripts pass the {threshold}-chunk threshold");
    Ok(())
}

pub fn split(
    input: &Path,
    tag: &str,
    seed: u64,
    out: &Path,
    bible: Option<&Path>,
) -> Result<()> {
    let ls = arg_tag(tag)?;
    let corpus = load_corpus(input, ls.clone())?;
    let bible = bible.map(|p| load_corpus(p, ls)).transpose()?;
    let manifest = make_splits(&corpus, bible.as_ref(), seed)?;
    write_atomic(out, manifest_json(&manifest)?.as_bytes())?;
    eprintln!(
        "split: train {} / dev {} / test {}",
        manifest.train.len(),
        manifest.dev.len(),
        manifest.test.len()
    );
    Ok(())
}

pub fn manifest_json(manifest: &curation::SplitManifest) -> Result<String> {
    let mut s = serde_json::to_string_pretty(manifest)
        .map_err(|e| data_err(format!("manifest serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn weights(corpus_dir: &Path, out: &Path, alpha: f64, head: &[String]) -> Result<()> {
    if alpha <= 0.0 {
        return Err(usage("--alpha must be positive"));
    }
    let sizes: BTreeMap<LanguageScript, usize> = load_tag_dir(corpus_dir)?
        .into_iter()
        .map(|c| (c.ls.clone(), c.n_chunks()))
        .collect();
    let head: BTreeSet<LanguageScript> =
        head.iter().map(|t| arg_tag(t)).collect::<Result<_>>()?;
    let weights = sampling_weights(&sizes, alpha, &head)?;
    write_atomic(out, tsv_lines(&weights).as_bytes())?;
    eprintln!("weights: {} language-scripts, alpha {alpha}", weights.len());
    Ok(())
}

pub fn vocab_train(
    corpus_dir: &Path,
    target: usize,
    seed: u64,
    out: &Path,
    weights_path: Option<&Path>,
) -> Result<()> {
    let corpora = load_tag_dir(corpus_dir)?;
    let weight_map: BTreeMap<LanguageScript, f64> = match weights_path {
        Some(p) => read_weight_tsv(p)?,
        None => corpora.iter().map(|c| (c.ls.clone(), 1.0)).collect(),
    };
    let weighted: Vec<(&CorpusHandle, f64)> = corpora
        .iter()
        .map(|c| {
            let w = weight_map
                .get(&c.ls)
                .copied()
                .ok_or_else(|| data_err(format!("no weight for {}", c.ls)))?;
            Ok((c, w))
        })
        .collect::<Result<_>>()?;
    let vocab = train_unigram_vocab(&weighted, target, seed, &UnigramTrainConfig::default())?;
    write_atomic(out, vocab.to_tsv().as_bytes())?;
    eprintln!("vocab-train: {} tokens written to {}", vocab.len(), out.display());
    Ok(())
}

pub fn vocab_merge(base: &Path, new: &Path, out: &Path) -> Result<()> {
    let base = read_vocab(base)?;
    let new = read_vocab(new)?;
    let (merged, stats) = merge_vocab(&base, &new);
    write_atomic(out, merged.to_tsv().as_bytes())?;
    eprintln!(
        "vocab-merge: {} base + {} genuinely new ({} overlapping) = {} tokens",
        base.len(),
        stats.genuinely_new,
        stats.overlap,
        merged.len()
    );
    Ok(())
}

/// Loads `<root>/<tag>/` embedding directories into a tag map.
fn embedding_root(
    root: &Path,
) -> Result<BTreeMap<LanguageScript, Vec<glotforge_core::embed::SentenceEmbeddings>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(root).map_err(|e| io_err(format!("{}: {e}", root.display())))? {
        let dir = entry?.path();
        if !dir.is_dir() {
            continue;
        }
        let name = dir
            .file_name()
            .and_then(|s| s.to_str())
            .ok_or_else(|| data_err(format!("non-UTF-8 directory name in {}", root.display())))?
            .to_string();
        out.insert(data_tag(&name)?, load_embedding_dir(&dir)?);
    }
    Ok(out)
}

pub fn eval_retrieval(root: &Path, source: &str, k: usize, out: &Path) -> Result<()> {
    let source = arg_tag(source)?;
    let all = embedding_root(root)?;
    let src = all
        .get(&source)
        .ok_or_else(|| data_err(format!("source {source} not found under {}", root.display())))?;
    let mut report = BTreeMap::new();
    for (ls, tgt) in &all {
        if *ls == source {
            continue;
        }
        report.insert(ls.clone(), retrieval_topk_accuracy(src, tgt, k)?);
    }
    write_atomic(out, tsv_lines(&report).as_bytes())?;
    eprintln!("eval-retrieval: top-{k} accuracy for {} target languages", report.len());
    Ok(())
}

pub fn eval_roundtrip(
    root: &Path,
    source: &str,
    chains: usize,
    intermediates: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let source = arg_tag(source)?;
    let all = embedding_root(root)?;
    let acc = roundtrip_accuracy(&all, &source, chains, intermediates, seed)?;
    write_atomic(out, format!("{source}\t{acc}\n").as_bytes())?;
    eprintln!("eval-roundtrip: {acc:.4} over {chains} chains of {intermediates} intermediates");
    Ok(())
}

/// Score dumps: one stream per line, `tag<TAB>word_count<TAB>s1 s2 ...`.
/// Streams sharing a tag are concatenated before normalization.
pub fn eval_pppl(scores_path: &Path, norm: &str, out: &Path) -> Result<()> {
    let norm: PpplNorm = norm.parse().map_err(usage)?;
    let text = fs::read_to_string(scores_path)
        .map_err(|e| io_err(format!("{}: {e}", scores_path.display())))?;
    let mut streams: BTreeMap<LanguageScript, ScoreStream> = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (tag, wc, scores) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(w), Some(s)) => (t, w, s),
            _ => return Err(data_err(format!("line {}: expected 3 tab-separated fields", no + 1))),
        };
        let ls = data_tag(tag)?;
        let wc: usize = wc
            .parse()
            .map_err(|e| data_err(format!("line {}: bad word count: {e}", no + 1)))?;
        let parsed: Vec<f64> = scores
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| data_err(format!("line {}: bad score: {e}", no + 1)))?;
        let entry = streams.entry(ls).or_insert_with(|| ScoreStream {
            scores: Vec::new(),
            word_count: 0,
        });
        entry.scores.extend(parsed);
        entry.word_count += wc;
    }
    let mut report = BTreeMap::new();
    for (ls, stream) in &streams {
        report.insert(ls.clone(), pppl(stream, norm)?);
    }
    write_atomic(out, tsv_lines(&report).as_bytes())?;
    eprintln!("eval-pppl: {} language-scripts", report.len());
    Ok(())
}

pub fn family_eval(
    matrix_path: &Path,
    families_path: &Path,
    ks: &[usize],
    levels: &[String],
    out: &Path,
) -> Result<()> {
    let matrix = read_matrix(matrix_path)?;
    let families = read_families(families_path)?;
    let levels: Vec<FamilyLevel> = levels
        .iter()
        .map(|l| l.parse().map_err(usage))
        .collect::<Result<_>>()?;
    let mut text = String::from("k");
    for l in &levels {
        text.push_str(&format!("\tl={l}"));
    }
    text.push('\n');
    for &k in ks {
        text.push_str(&format!("k={k}"));
        for &level in &levels {
            match knn_family_accuracy(&matrix, &families, k, level) {
                Ok(acc) => text.push_str(&format!("\t{:.2}", 100.0 * acc)),
                Err(FamilyError::NoEligibleLanguages) => text.push_str("\t-"),
                Err(e) => return Err(e.into()),
            }
        }
        text.push('\n');
    }
    write_atomic(out, text.as_bytes())?;
    eprintln!("family-eval: {} x {} accuracy table", ks.len(), levels.len());
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DivergenceMatrix> {
    let text =
        fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    DivergenceMatrix::from_tsv(&text).map_err(data_err)
}

pub fn read_families(path: &Path) -> Result<FamilyTreeSet> {
    let text =
        fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    FamilyTreeSet::parse(&text).map_err(Into::into)
}

pub fn read_vocab(path: &Path) -> Result<VocabModel> {
    let text =
        fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    VocabModel::from_tsv(&text).map_err(Into::into)
}

pub fn read_weight_tsv(path: &Path) -> Result<BTreeMap<LanguageScript, f64>> {
    let text =
        fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (tag, w) = line
            .split_once('\t')
            .ok_or_else(|| data_err(format!("line {}: expected tag<TAB>weight", no + 1)))?;
        let w: f64 = w
            .parse()
            .map_err(|e| data_err(format!("line {}: bad weight: {e}", no + 1)))?;
        out.insert(data_tag(tag)?, w);
    }
    Ok(out)
}
