//! ARPA-style text serialization for character n-gram models.
//!
//! The file carries a small metadata header (`language_script`, `order`,
//! `trained_on`), then the usual `\data\` / `\k-grams:` / `\end\` sections.
//! Each n-gram line is `log10prob<TAB>symbols<TAB>log10backoff`, symbols
//! separated by single spaces. The backoff field is present only for grams
//! that act as contexts. Contexts that are never predicted themselves (those
//! ending in BOS) are written with the conventional `-99` placeholder
//! probability.
//!
//! Escape rules: `<s>`, `</s>`, `<unk>` are the markers; any whitespace or
//! control character, and a literal `<`, is written as `<U+XXXX>` (hex scalar
//! value). All other characters stand for themselves.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::charlm::{
    encode_char_direct, model_from_tables, remap_to_direct_ids, CharNgramModel, BOS, EOS,
    FIRST_CHAR_ID, UNK,
};
use crate::model::{parse_language_script, LanguageScript};

const PLACEHOLDER_LOG10: f64 = -99.0;
const LN_10: f64 = std::f64::consts::LN_10;

#[derive(Debug, thiserror::Error)]
pub enum ArpaError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

fn format_err(line: usize, msg: impl Into<String>) -> ArpaError {
    ArpaError::Format {
        line,
        msg: msg.into(),
    }
}

fn render_symbol(id: u32, alphabet_char: impl Fn(u32) -> char) -> String {
    match id {
        BOS => "<s>".to_string(),
        EOS => "</s>".to_string(),
        UNK => "<unk>".to_string(),
        _ => {
            let c = alphabet_char(id);
            if c.is_whitespace() || c.is_control() || c == '<' {
                format!("<U+{:04X}>", c as u32)
            } else {
                c.to_string()
            }
        }
    }
}

fn parse_symbol(tok: &str, line: usize) -> Result<u32, ArpaError> {
    match tok {
        "<s>" => return Ok(BOS),
        "</s>" => return Ok(EOS),
        "<unk>" => return Ok(UNK),
        _ => {}
    }
    if let Some(hex) = tok.strip_prefix("<U+").and_then(|t| t.strip_suffix('>')) {
        let v = u32::from_str_radix(hex, 16)
            .map_err(|_| format_err(line, format!("bad escape `{tok}`")))?;
        let c = char::from_u32(v).ok_or_else(|| format_err(line, format!("bad escape `{tok}`")))?;
        return Ok(encode_char_direct(c));
    }
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(encode_char_direct(c)),
        _ => Err(format_err(line, format!("unrecognized symbol `{tok}`"))),
    }
}

/// Writes a model to an ARPA-style text file.
pub fn write_model(model: &CharNgramModel, path: &Path) -> Result<(), ArpaError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model_to(model, &mut w)
}

pub fn write_model_to<W: Write>(model: &CharNgramModel, w: &mut W) -> Result<(), ArpaError> {
    // On disk, character ids are self-describing (marker offset + scalar
    // value), independent of the training alphabet order.
    let (probs, backoffs) = remap_to_direct_ids(model);
    let order = model.order();
    let alphabet_char = |id: u32| {
        char::from_u32(id - FIRST_CHAR_ID).expect("direct ids encode scalar values")
    };

    // Per order: sorted union of predicted grams and backoff contexts.
    let mut blocks: Vec<Vec<(Box<[u32]>, Option<f64>, Option<f64>)>> = Vec::new();
    for k in 1..=order {
        let mut grams: Vec<Box<[u32]>> = probs[k - 1].keys().cloned().collect();
        if k < order {
            for ctx in backoffs[k - 1].keys() {
                if !probs[k - 1].contains_key(ctx) {
                    grams.push(ctx.clone());
                }
            }
        }
        grams.sort();
        let entries = grams
            .into_iter()
            .map(|g| {
                let p = probs[k - 1].get(&g).copied();
                let b = if k < order {
                    backoffs[k - 1].get(&g).copied()
                } else {
                    None
                };
                (g, p, b)
            })
            .collect();
        blocks.push(entries);
    }

    writeln!(w, "language_script: {}", model.ls)?;
    writeln!(w, "order: {order}")?;
    writeln!(w, "trained_on: {}", model.trained_on)?;
    writeln!(w)?;
    writeln!(w, "\\data\\")?;
    for (k, block) in blocks.iter().enumerate() {
        writeln!(w, "ngram {}={}", k + 1, block.len())?;
    }
    for (k, block) in blocks.iter().enumerate() {
        writeln!(w)?;
        writeln!(w, "\\{}-grams:", k + 1)?;
        for (gram, p, b) in block {
            let log10p = p.map(|ln| ln / LN_10).unwrap_or(PLACEHOLDER_LOG10);
            let symbols: Vec<String> = gram
                .iter()
                .map(|&id| render_symbol(id, alphabet_char))
                .collect();
            write!(w, "{}\t{}", log10p, symbols.join(" "))?;
            if let Some(ln_bo) = b {
                write!(w, "\t{}", ln_bo / LN_10)?;
            }
            writeln!(w)?;
        }
    }
    writeln!(w)?;
    writeln!(w, "\\end\\")?;
    Ok(())
}

/// Reads a model back from an ARPA-style text file.
pub fn read_model(path: &Path) -> Result<CharNgramModel, ArpaError> {
    read_model_from(BufReader::new(File::open(path)?))
}

pub fn read_model_from<R: Read>(r: R) -> Result<CharNgramModel, ArpaError> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let mut ls: Option<LanguageScript> = None;
    let mut order: Option<usize> = None;
    let mut trained_on: usize = 0;

    // Header up to \data\.
    let mut lineno = 0;
    loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| format_err(lineno, "missing \\data\\ section"))?;
        lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "\\data\\" {
            break;
        }
        if let Some(v) = line.strip_prefix("language_script:") {
            ls = Some(
                parse_language_script(v.trim())
                    .map_err(|e| format_err(lineno, e.to_string()))?,
            );
        } else if let Some(v) = line.strip_prefix("order:") {
            order = Some(
                v.trim()
                    .parse()
                    .map_err(|_| format_err(lineno, "bad order"))?,
            );
        } else if let Some(v) = line.strip_prefix("trained_on:") {
            trained_on = v
                .trim()
                .parse()
                .map_err(|_| format_err(lineno, "bad trained_on"))?;
        } else {
            return Err(format_err(lineno, format!("unexpected header line `{line}`")));
        }
    }
    let ls = ls.ok_or_else(|| format_err(lineno, "missing language_script header"))?;
    let order = order.ok_or_else(|| format_err(lineno, "missing order header"))?;
    if order == 0 {
        return Err(format_err(lineno, "order must be positive"));
    }

    // ngram K=N declarations.
    let mut declared: Vec<usize> = Vec::new();
    loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| format_err(lineno, "truncated file in \\data\\ section"))?;
        lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            if declared.len() == order {
                break;
            }
            continue;
        }
        let rest = line
            .strip_prefix("ngram ")
            .ok_or_else(|| format_err(lineno, format!("expected ngram declaration, got `{line}`")))?;
        let (k, n) = rest
            .split_once('=')
            .ok_or_else(|| format_err(lineno, "malformed ngram declaration"))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| format_err(lineno, "bad ngram order"))?;
        if k != declared.len() + 1 {
            return Err(format_err(lineno, "ngram declarations out of order"));
        }
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| format_err(lineno, "bad ngram count"))?;
        declared.push(n);
    }
    if declared.len() != order {
        return Err(format_err(
            lineno,
            format!("expected {order} ngram declarations, found {}", declared.len()),
        ));
    }

    let mut probs: Vec<HashMap<Box<[u32]>, f64>> = vec![HashMap::new(); order];
    let mut backoffs: Vec<HashMap<Box<[u32]>, f64>> = vec![HashMap::new(); order - 1];

    for k in 1..=order {
        // Section marker.
        loop {
            let (i, line) = lines
                .next()
                .ok_or_else(|| format_err(lineno, format!("truncated file before \\{k}-grams:")))?;
            lineno = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == format!("\\{k}-grams:") {
                break;
            }
            return Err(format_err(lineno, format!("expected \\{k}-grams:, got `{line}`")));
        }
        for _ in 0..declared[k - 1] {
            let (i, line) = lines
                .next()
                .ok_or_else(|| format_err(lineno, format!("truncated \\{k}-grams: section")))?;
            lineno = i + 1;
            let line = line?;
            let mut fields = line.split('\t');
            let log10p: f64 = fields
                .next()
                .ok_or_else(|| format_err(lineno, "missing probability field"))?
                .parse()
                .map_err(|_| format_err(lineno, "bad probability"))?;
            let symbols = fields
                .next()
                .ok_or_else(|| format_err(lineno, "missing n-gram field"))?;
            let gram: Box<[u32]> = symbols
                .split(' ')
                .map(|t| parse_symbol(t, lineno))
                .collect::<Result<_, _>>()?;
            if gram.len() != k {
                return Err(format_err(
                    lineno,
                    format!("expected {k} symbols, found {}", gram.len()),
                ));
            }
            if log10p != PLACEHOLDER_LOG10 {
                probs[k - 1].insert(gram.clone(), log10p * LN_10);
            }
            if let Some(bo) = fields.next() {
                if k >= order {
                    return Err(format_err(lineno, "backoff on highest-order n-gram"));
                }
                let log10b: f64 = bo
                    .parse()
                    .map_err(|_| format_err(lineno, "bad backoff"))?;
                backoffs[k - 1].insert(gram, log10b * LN_10);
            }
        }
    }

    // Trailing \end\.
    loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| format_err(lineno, "truncated file: missing \\end\\"))?;
        lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "\\end\\" {
            break;
        }
        return Err(format_err(lineno, format!("expected \\end\\, got `{line}`")));
    }

    Ok(model_from_tables(ls, order, trained_on, probs, backoffs))
}
