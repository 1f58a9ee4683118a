//! Corpus-curation and language-divergence toolkit for massively
//! multilingual corpora: cleaning filters, character n-gram language models
//! with modified Kneser-Ney smoothing, perplexity-based language divergence,
//! typological family evaluation, vocabulary extension, and embedding-based
//! evaluation harnesses.

pub mod arpa;
pub mod charlm;
pub mod curation;
pub mod divergence;
pub mod embed;
pub mod family;
pub mod filters;
pub mod fixture;
pub mod model;
pub mod script;
pub mod vocab;

pub use charlm::{perplexity, train_char_lm, CharNgramModel, Perplexity};
pub use divergence::{divergence_matrix, nearest_neighbors, DivergenceMatrix};
pub use family::{FamilyLevel, FamilyTree, FamilyTreeSet};
pub use filters::FilterConfig;
pub use model::{load_corpus, parse_language_script, Chunk, CorpusHandle, LanguageScript};
pub use vocab::VocabModel;
