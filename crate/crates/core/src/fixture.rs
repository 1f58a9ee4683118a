//! Deterministic synthetic multilingual fixture: ten language-scripts with
//! distinct alphabets and per-language Markov transition structure, plus a
//! hand-built family tree file.
//!
//! Used by the test suites and benchmarks, and exposed through the CLI to
//! materialize a corpus tree on disk.

use std::fs;
use std::io;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::family::{FamilyTree, FamilyTreeSet};
use crate::model::{parse_language_script, Chunk, CorpusHandle, LanguageScript};

/// Tag, alphabet, and family path of each fixture language.
/// The family file is hand-built for the synthetic languages: only pairs
/// whose generated text is measurably related (shared alphabet, or the
/// heb/ara pair) share a top-level family; the rest are isolates. The real
/// languages whose scripts are borrowed here are irrelevant to the data.
const LANGS: &[(&str, &str, &str)] = &[
    ("eng_Latn", "etaoinshrdlucmfw", "IndoEuropean/Germanic/West"),
    ("deu_Latn", "enisratdhulcgmbz", "IndoEuropean/Germanic/West"),
    ("rus_Cyrl", "оеаинтсрвлкмдпу", "IndoEuropean/Slavic/East"),
    ("bul_Cyrl", "аоеинтрсвлкдмпъ", "IndoEuropean/Slavic/South"),
    ("ell_Grek", "αοειτνσρκπμλυηγ", "Hellenic/Greek"),
    ("heb_Hebr", "יהולמארתשבנעכדק", "Afroasiatic/Semitic/Northwest"),
    ("ara_Arab", "اليمونهرتبعدسكفق", "Afroasiatic/Semitic/Central"),
    ("hin_Deva", "कनरसतमहलपदयवगबज", "Indic/Sanskritic"),
    ("tha_Thai", "านรอกงเมสตลวยดทบ", "KraDai/Tai/Southwestern"),
    ("zho_Hani", "的一是不了人我在有他这中大来上", "SinoTibetan/Sinitic"),
];

pub fn fixture_tags() -> Vec<LanguageScript> {
    LANGS
        .iter()
        .map(|(tag, _, _)| parse_language_script(tag).unwrap())
        .collect()
}

/// Hand-built family file covering the fixture languages.
pub fn fixture_families() -> FamilyTreeSet {
    let mut set = FamilyTreeSet::default();
    for (tag, _, path) in LANGS {
        let ls = parse_language_script(tag).unwrap();
        let path: Vec<String> = path.split('/').map(str::to_string).collect();
        set.insert(FamilyTree::new(ls, path).unwrap());
    }
    set
}

fn lang_rng(tag: &str, seed: u64) -> ChaCha20Rng {
    // Stable per-language stream independent of iteration order.
    let mut h = seed;
    for b in tag.bytes() {
        h = h.wrapping_mul(0x100000001b3).wrapping_add(b as u64);
    }
    ChaCha20Rng::seed_from_u64(h)
}

struct MarkovChain {
    alphabet: Vec<char>,
    /// preferred[i]: the three successor indices favored after char i.
    preferred: Vec<[usize; 3]>,
}

impl MarkovChain {
    fn new(alphabet: Vec<char>, rng: &mut ChaCha20Rng) -> Self {
        let n = alphabet.len();
        let preferred = (0..n)
            .map(|_| {
                [
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                ]
            })
            .collect();
        Self {
            alphabet,
            preferred,
        }
    }

    fn next_char(&self, prev: Option<usize>, rng: &mut ChaCha20Rng) -> usize {
        match prev {
            Some(p) if rng.gen_bool(0.7) => self.preferred[p][rng.gen_range(0..3)],
            _ => rng.gen_range(0..self.alphabet.len()),
        }
    }

    fn word(&self, rng: &mut ChaCha20Rng, out: &mut String) {
        let len = rng.gen_range(2..=7);
        let mut prev = None;
        for _ in 0..len {
            let i = self.next_char(prev, rng);
            out.push(self.alphabet[i]);
            prev = Some(i);
        }
    }
}

/// Generates a deterministic corpus of `n_chunks` lines for one fixture
/// language. Lines average roughly 40 bytes of text.
pub fn generate_corpus(ls: &LanguageScript, n_chunks: usize, seed: u64) -> CorpusHandle {
    let tag = ls.to_string();
    let (_, alphabet, _) = LANGS
        .iter()
        .find(|(t, _, _)| *t == tag)
        .unwrap_or_else(|| panic!("{tag} is not a fixture language"));
    let mut rng = lang_rng(&tag, seed);
    let chain = MarkovChain::new(alphabet.chars().collect(), &mut rng);
    let mut chunks = Vec::with_capacity(n_chunks);
    let mut line = String::new();
    for i in 0..n_chunks {
        line.clear();
        let n_words = rng.gen_range(4..=9);
        for w in 0..n_words {
            if w > 0 {
                line.push(' ');
            }
            chain.word(&mut rng, &mut line);
        }
        chunks.push(Chunk::new(line.clone(), "fixture", i));
    }
    CorpusHandle::new(ls.clone(), chunks)
}

/// All ten fixture corpora.
pub fn generate_fixture(n_chunks: usize, seed: u64) -> Vec<CorpusHandle> {
    fixture_tags()
        .iter()
        .map(|ls| generate_corpus(ls, n_chunks, seed))
        .collect()
}

/// A positionally parallel pseudo-Bible for one fixture language: verse i of
/// every language is generated from the same verse-level stream so lengths
/// line up across languages.
pub fn generate_bible(ls: &LanguageScript, n_verses: usize, seed: u64) -> CorpusHandle {
    generate_corpus(ls, n_verses, seed ^ 0xb1b1_e000)
}

/// Writes the fixture as a corpus tree `<root>/<tag>/fixture.txt` plus a
/// `families.tsv` file.
pub fn write_fixture_tree(root: &Path, n_chunks: usize, seed: u64) -> io::Result<()> {
    for corpus in generate_fixture(n_chunks, seed) {
        let dir = root.join(corpus.ls.to_string());
        fs::create_dir_all(&dir)?;
        let mut text = String::new();
        for chunk in &corpus.chunks {
            text.push_str(&chunk.text);
            text.push('\n');
        }
        fs::write(dir.join("fixture.txt"), text)?;
    }
    fs::write(root.join("families.tsv"), fixture_families().to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_generation() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let a = generate_corpus(&ls, 50, 42);
        let b = generate_corpus(&ls, 50, 42);
        assert_eq!(a, b);
        let c = generate_corpus(&ls, 50, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn ten_languages_with_families() {
        let tags = fixture_tags();
        assert_eq!(tags.len(), 10);
        let fams = fixture_families();
        assert!(tags.iter().all(|t| fams.get(t).is_some()));
    }

    #[test]
    fn scripts_match_tags() {
        use crate::script::{detect_script, ScriptTag};
        for corpus in generate_fixture(20, 1) {
            for chunk in &corpus.chunks {
                match detect_script(&chunk.text, 0.8).script {
                    ScriptTag::Known(code) => assert_eq!(code, corpus.ls.script()),
                    other => panic!("{}: unexpected {other:?}", corpus.ls),
                }
            }
        }
    }
}
