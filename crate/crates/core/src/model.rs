//! Shared domain types: language-script identities, chunks, and corpus handles.
//!
//! A corpus is identified by a [`LanguageScript`] (ISO 639-3 language code plus
//! ISO 15924 script code) and holds an ordered sequence of [`Chunk`]s, one per
//! non-blank line of the source file. Text is NFC-normalized at load time so
//! that dedup keys and script detection are stable.
//!
//! Corpora are fully materialized in memory; corpora larger than available
//! memory are not supported.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Identity of a corpus: ISO 639-3 language code + ISO 15924 script code.
///
/// Canonical string form is `lang_Script`, e.g. `tat_Cyrl`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageScript {
    lang: String,
    script: String,
}

impl LanguageScript {
    /// Builds a language-script pair, case-normalizing both parts.
    pub fn new(lang: &str, script: &str) -> Result<Self, ModelError> {
        let lang = lang.to_lowercase();
        let script = titlecase(script);
        if lang.len() != 3 || !lang.chars().all(|c| c.is_ascii_lowercase()) {
            return Err(ModelError::MalformedTag(format!("{lang}_{script}")));
        }
        if script.len() != 4 || !script.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(ModelError::MalformedTag(format!("{lang}_{script}")));
        }
        Ok(Self { lang, script })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn script(&self) -> &str {
        &self.script
    }
}

fn titlecase(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, c) in s.chars().enumerate() {
        if i == 0 {
            out.extend(c.to_uppercase());
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Parses a candidate `lang_Script` tag, e.g. `tat_Cyrl`.
///
/// Parsing is case-normalizing: `ENG_latn` parses to `eng_Latn`.
pub fn parse_language_script(tag: &str) -> Result<LanguageScript, ModelError> {
    let (lang, script) = tag
        .split_once('_')
        .ok_or_else(|| ModelError::MalformedTag(tag.to_string()))?;
    if lang.len() != 3 || script.len() != 4 {
        return Err(ModelError::MalformedTag(tag.to_string()));
    }
    LanguageScript::new(lang, script).map_err(|_| ModelError::MalformedTag(tag.to_string()))
}

impl FromStr for LanguageScript {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_language_script(s)
    }
}

impl TryFrom<String> for LanguageScript {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_language_script(&s)
    }
}

impl From<LanguageScript> for String {
    fn from(ls: LanguageScript) -> String {
        ls.to_string()
    }
}

impl fmt::Display for LanguageScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.lang, self.script)
    }
}

/// One sentence' (segment, sentence, or paragraph) with source metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    pub source_id: String,
    pub line_no: usize,
}

impl Chunk {
    pub fn new(text: impl Into<String>, source_id: impl Into<String>, line_no: usize) -> Self {
        Self {
            text: text.into(),
            source_id: source_id.into(),
            line_no,
        }
    }
}

/// An in-memory corpus for one language-script, chunks in source line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusHandle {
    pub ls: LanguageScript,
    pub chunks: Vec<Chunk>,
}

impl CorpusHandle {
    pub fn new(ls: LanguageScript, chunks: Vec<Chunk>) -> Self {
        Self { ls, chunks }
    }

    pub fn empty(ls: LanguageScript) -> Self {
        Self { ls, chunks: Vec::new() }
    }

    pub fn n_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("malformed language-script tag `{0}` (expected `lll_Ssss`)")]
    MalformedTag(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid UTF-8 in {path} at byte offset {offset}")]
    Encoding { path: String, offset: usize },
}

/// Loads a corpus from a UTF-8, LF-delimited file, one sentence' per line.
///
/// Blank lines are skipped; every other line becomes a [`Chunk`] carrying its
/// 0-based line number. Trailing `\r` (CRLF input) is stripped and text is
/// NFC-normalized. The chunk `source_id` is the file stem.
pub fn load_corpus(path: &Path, ls: LanguageScript) -> Result<CorpusHandle, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        Err(e) => {
            return Err(ModelError::Encoding {
                path: path.display().to_string(),
                offset: e.valid_up_to(),
            })
        }
    };
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(corpus_from_str(text, ls, &source_id))
}

/// Builds a corpus from in-memory text, same line handling as [`load_corpus`].
pub fn corpus_from_str(text: &str, ls: LanguageScript, source_id: &str) -> CorpusHandle {
    let mut chunks = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        chunks.push(Chunk::new(
            line.nfc().collect::<String>(),
            source_id,
            line_no,
        ));
    }
    CorpusHandle::new(ls, chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_canonical_tag() {
        let ls = parse_language_script("tat_Cyrl").unwrap();
        assert_eq!(ls.lang(), "tat");
        assert_eq!(ls.script(), "Cyrl");
        assert_eq!(ls.to_string(), "tat_Cyrl");
    }

    #[test]
    fn parsing_normalizes_case() {
        let ls = parse_language_script("ENG_latn").unwrap();
        assert_eq!(ls.lang(), "eng");
        assert_eq!(ls.script(), "Latn");
    }

    #[test]
    fn rejects_bad_shapes() {
        for tag in ["abcd_Latn", "en_Latn", "eng_Lat", "eng-Latn", "englatn", "e1g_Latn"] {
            assert!(parse_language_script(tag).is_err(), "{tag} should fail");
        }
    }

    #[test]
    fn blank_lines_skipped() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let c = corpus_from_str("first\n\nthird\n", ls, "src");
        assert_eq!(c.n_chunks(), 2);
        assert_eq!(c.chunks[0].line_no, 0);
        assert_eq!(c.chunks[1].line_no, 2);
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let ls = parse_language_script("eng_Latn").unwrap();
        assert_eq!(corpus_from_str("", ls, "src").n_chunks(), 0);
    }

    #[test]
    fn crlf_stripped() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let raw = "one\r\ntwo\r\n";
        let c = corpus_from_str(raw, ls, "src");
        // Byte-level oracle: strip each line independently.
        let expected: Vec<&str> = raw
            .split('\n')
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        let got: Vec<&str> = c.chunks.iter().map(|ch| ch.text.as_str()).collect();
        assert_eq!(got, expected);
        assert!(c.chunks.iter().all(|ch| !ch.text.contains('\r')));
    }

    #[test]
    fn load_reports_encoding_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, b"ok\n\xff\xfe").unwrap();
        let ls = parse_language_script("eng_Latn").unwrap();
        match load_corpus(&path, ls) {
            Err(ModelError::Encoding { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected encoding error, got {other:?}"),
        }
    }

    #[test]
    fn text_is_nfc_normalized() {
        let ls = parse_language_script("fra_Latn").unwrap();
        // e + combining acute composes to é.
        let c = corpus_from_str("e\u{301}\n", ls, "src");
        assert_eq!(c.chunks[0].text, "\u{e9}");
    }

    proptest! {
        #[test]
        fn tag_round_trip(lang in "[a-z]{3}", script in "[A-Z][a-z]{3}") {
            let ls = LanguageScript::new(&lang, &script).unwrap();
            prop_assert_eq!(parse_language_script(&ls.to_string()).unwrap(), ls);
        }

        #[test]
        fn line_numbers_strictly_increase(lines in proptest::collection::vec("[a-z ]{0,12}", 0..30)) {
            let text = lines.join("\n");
            let ls = parse_language_script("eng_Latn").unwrap();
            let c = corpus_from_str(&text, ls, "src");
            for w in c.chunks.windows(2) {
                prop_assert!(w[0].line_no < w[1].line_no);
            }
        }
    }
}
