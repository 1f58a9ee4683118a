//! Per-chunk script detection and separation of a language's corpus into
//! language-scripts.
//!
//! Characters are bucketed by their Unicode script property. Common and
//! Inherited characters (digits, punctuation, combining marks) do not count
//! toward any script. A chunk is assigned the majority script when its share
//! of script-bearing characters reaches the mixed threshold, otherwise it is
//! MIXED; chunks with no script-bearing characters at all are UNKNOWN.

use std::collections::BTreeMap;

use unicode_script::{Script, UnicodeScript};

use crate::model::{CorpusHandle, LanguageScript};

/// Outcome of script detection for one chunk.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScriptTag {
    /// ISO 15924 code, e.g. `Cyrl`.
    Known(String),
    /// Script-bearing characters present but no script reaches the threshold.
    Mixed,
    /// No script-bearing characters at all.
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptAssignment {
    pub script: ScriptTag,
    /// Fraction of script-bearing characters belonging to the majority script.
    pub dominant_ratio: f64,
}

/// Detects the script of a chunk of text.
///
/// `mixed_threshold` must lie in (0.5, 1.0]. Hiragana and Katakana merge with
/// Han into `Jpan` when they co-occur with Han in the same chunk, matching the
/// usual labeling of Japanese corpora.
pub fn detect_script(text: &str, mixed_threshold: f64) -> ScriptAssignment {
    assert!(
        mixed_threshold > 0.5 && mixed_threshold <= 1.0,
        "mixed_threshold must be in (0.5, 1.0]"
    );
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for c in text.chars() {
        let s = c.script();
        if matches!(s, Script::Common | Script::Inherited | Script::Unknown) {
            continue;
        }
        *counts.entry(s.short_name()).or_insert(0) += 1;
    }

    // Kana mixed with Han is Japanese text.
    let kana = counts.remove(Script::Hiragana.short_name()).unwrap_or(0)
        + counts.remove(Script::Katakana.short_name()).unwrap_or(0);
    let mut merged: BTreeMap<String, usize> = counts
        .into_iter()
        .map(|(s, n)| (s.to_string(), n))
        .collect();
    if kana > 0 {
        if let Some(han) = merged.remove("Hani") {
            *merged.entry("Jpan".to_string()).or_insert(0) += han + kana;
        } else {
            // Kana alone: still Japanese.
            *merged.entry("Jpan".to_string()).or_insert(0) += kana;
        }
    }

    let total: usize = merged.values().sum();
    if total == 0 {
        return ScriptAssignment {
            script: ScriptTag::Unknown,
            dominant_ratio: 0.0,
        };
    }
    let (best_script, best_count) = merged
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(s, n)| (s.clone(), *n))
        .expect("non-empty counts");
    let ratio = best_count as f64 / total as f64;
    if ratio >= mixed_threshold {
        ScriptAssignment {
            script: ScriptTag::Known(best_script),
            dominant_ratio: ratio,
        }
    } else {
        ScriptAssignment {
            script: ScriptTag::Mixed,
            dominant_ratio: ratio,
        }
    }
}

/// Why a chunk was discarded during script splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiscardReason {
    Mixed,
    Unknown,
}

impl std::fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiscardReason::Mixed => write!(f, "MIXED"),
            DiscardReason::Unknown => write!(f, "UNKNOWN"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscardReport {
    pub counts: BTreeMap<DiscardReason, usize>,
}

impl DiscardReport {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Structured text form: one `reason<TAB>count` line per reason.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (reason, count) in &self.counts {
            out.push_str(&format!("{reason}\t{count}\n"));
        }
        out
    }
}

/// Splits a corpus into per-script corpora keyed by language-script.
///
/// The language code of the input is trusted; only the script varies. MIXED
/// and UNKNOWN chunks land in the discard report.
pub fn split_by_script(
    corpus: &CorpusHandle,
    mixed_threshold: f64,
) -> (BTreeMap<LanguageScript, CorpusHandle>, DiscardReport) {
    let mut out: BTreeMap<LanguageScript, CorpusHandle> = BTreeMap::new();
    let mut report = DiscardReport::default();
    for chunk in &corpus.chunks {
        match detect_script(&chunk.text, mixed_threshold).script {
            ScriptTag::Known(code) => {
                let ls = LanguageScript::new(corpus.ls.lang(), &code)
                    .expect("script short names are valid ISO 15924 codes");
                out.entry(ls.clone())
                    .or_insert_with(|| CorpusHandle::empty(ls))
                    .chunks
                    .push(chunk.clone());
            }
            ScriptTag::Mixed => *report.counts.entry(DiscardReason::Mixed).or_insert(0) += 1,
            ScriptTag::Unknown => *report.counts.entry(DiscardReason::Unknown).or_insert(0) += 1,
        }
    }
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{corpus_from_str, parse_language_script};
    use unicode_normalization::UnicodeNormalization;

    #[test]
    fn single_script_input() {
        let a = detect_script("привет", 0.8);
        assert_eq!(a.script, ScriptTag::Known("Cyrl".into()));
        assert_eq!(a.dominant_ratio, 1.0);
    }

    #[test]
    fn mixed_below_threshold() {
        // 5 Latin letters, 3 Cyrillic letters; space is Common.
        let a = detect_script("hello мир", 0.9);
        assert_eq!(a.script, ScriptTag::Mixed);
        assert!((a.dominant_ratio - 5.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn common_only_is_unknown() {
        let a = detect_script("12345 !!", 0.8);
        assert_eq!(a.script, ScriptTag::Unknown);
        assert_eq!(a.dominant_ratio, 0.0);
    }

    #[test]
    fn kana_plus_han_is_jpan() {
        let a = detect_script("日本語のテキスト", 0.8);
        assert_eq!(a.script, ScriptTag::Known("Jpan".into()));
    }

    #[test]
    fn han_alone_stays_hani() {
        let a = detect_script("中文文本", 0.8);
        assert_eq!(a.script, ScriptTag::Known("Hani".into()));
    }

    #[test]
    fn tajik_splits_into_two_scripts() {
        let ls = parse_language_script("tgk_Latn").unwrap();
        let corpus = corpus_from_str("забони тоҷикӣ\nزبان تاجیکی\n", ls, "src");
        let (parts, report) = split_by_script(&corpus, 0.8);
        let tags: Vec<String> = parts.keys().map(|k| k.to_string()).collect();
        assert_eq!(tags, vec!["tgk_Arab", "tgk_Cyrl"]);
        assert_eq!(report.total(), 0);
    }

    #[test]
    fn all_latin_is_identity() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let corpus = corpus_from_str("one line\nanother line\n", ls.clone(), "src");
        let (parts, report) = split_by_script(&corpus, 0.8);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[&ls], corpus);
        assert_eq!(report.total(), 0);
    }

    #[test]
    fn partition_with_discards() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("plain line {i}\n"));
        }
        text.push_str("half латиница mixed кирилица here\n");
        text.push_str("буквы and letters евенли split\n");
        let corpus = corpus_from_str(&text, ls, "src");
        assert_eq!(corpus.n_chunks(), 10);
        let (parts, report) = split_by_script(&corpus, 0.9);
        // Oracle: re-count buckets independently.
        let kept: usize = parts.values().map(|c| c.n_chunks()).sum();
        assert_eq!(kept + report.total(), corpus.n_chunks());
        assert_eq!(report.counts[&DiscardReason::Mixed], 2);
    }

    #[test]
    fn detection_invariant_under_nfc() {
        let samples = ["e\u{301}l\u{e8}ve", "привет мир", "דוגמה", "मिश्रित abc"];
        for s in samples {
            let renorm: String = s.nfc().collect();
            assert_eq!(detect_script(s, 0.8), detect_script(&renorm, 0.8));
        }
    }
}
