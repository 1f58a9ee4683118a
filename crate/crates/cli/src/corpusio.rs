//! Filesystem layouts shared by the subcommands.
//!
//! Two layouts appear throughout: a *corpus tree* `<root>/<tag>/<source>.txt`
//! with one directory per language, and a flat *tag directory* holding one
//! `<tag>.txt` (or `<tag>.arpa`) file per language-script.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use glotforge_core::model::{load_corpus, parse_language_script, CorpusHandle, LanguageScript};

use crate::error::{data_err, io_err, usage, Result};

/// Parses a tag given on the command line (bad values are usage errors).
pub fn arg_tag(tag: &str) -> Result<LanguageScript> {
    parse_language_script(tag).map_err(|e| usage(e.to_string()))
}

/// Parses a tag found in input data (bad values are data errors).
pub fn data_tag(tag: &str) -> Result<LanguageScript> {
    parse_language_script(tag).map_err(|e| data_err(e.to_string()))
}

/// Sorted entries of a flat tag directory, filtered by extension.
pub fn tag_dir(dir: &Path, ext: &str) -> Result<Vec<(LanguageScript, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| data_err(format!("non-UTF-8 file name in {}", dir.display())))?;
        out.push((data_tag(stem)?, path));
    }
    out.sort();
    Ok(out)
}

/// One language of a corpus tree: its general sources plus an optional
/// parallel Bible (`bible.txt`, kept out of the general list).
pub struct TreeLanguage {
    pub ls: LanguageScript,
    pub sources: Vec<PathBuf>,
    pub bible: Option<PathBuf>,
}

/// Sorted languages of a corpus tree `<root>/<tag>/<source>.txt`.
pub fn corpus_tree(root: &Path) -> Result<Vec<TreeLanguage>> {
    let mut out = Vec::new();
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
        let ls = data_tag(&name)?;
        let mut sources = Vec::new();
        let mut bible = None;
        for f in fs::read_dir(&dir)? {
            let path = f?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            if path.file_name().and_then(|s| s.to_str()) == Some("bible.txt") {
                bible = Some(path);
            } else {
                sources.push(path);
            }
        }
        sources.sort();
        out.push(TreeLanguage { ls, sources, bible });
    }
    out.sort_by(|a, b| a.ls.cmp(&b.ls));
    Ok(out)
}

/// Loads and concatenates the general sources of one tree language.
pub fn load_tree_language(lang: &TreeLanguage) -> Result<CorpusHandle> {
    let mut merged = CorpusHandle::empty(lang.ls.clone());
    for path in &lang.sources {
        merged
            .chunks
            .extend(load_corpus(path, lang.ls.clone())?.chunks);
    }
    Ok(merged)
}

/// Writes a corpus back out as one sentence per line.
pub fn write_corpus_txt(path: &Path, corpus: &CorpusHandle) -> Result<()> {
    let mut text = String::new();
    for chunk in &corpus.chunks {
        text.push_str(&chunk.text);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Loads every `<tag>.txt` of a flat tag directory.
pub fn load_tag_dir(dir: &Path) -> Result<Vec<CorpusHandle>> {
    tag_dir(dir, "txt")?
        .into_iter()
        .map(|(ls, path)| load_corpus(&path, ls).map_err(Into::into))
        .collect()
}

/// Creates parent directories and writes the file in one go.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

/// Renders `tag<TAB>value` lines from any ordered map.
pub fn tsv_lines<V: std::fmt::Display>(map: &BTreeMap<LanguageScript, V>) -> String {
    let mut out = String::new();
    for (ls, v) in map {
        out.push_str(&format!("{ls}\t{v}\n"));
    }
    out
}
