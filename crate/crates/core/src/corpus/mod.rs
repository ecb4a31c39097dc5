//! Text ingestion: tokenization, segmentation, support sets, reduced
//! documents and segment-by-term frequency matrices.

mod matrix;
mod support;

pub use matrix::{build_frequency_matrix, FrequencyMatrix, MatrixMode};
pub use support::{build_support, SupportSet, SupportSource};

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lowercased word token with its byte offset and 0-based line number in
/// the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub offset: usize,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub name: String,
    pub raw_text: String,
    pub tokens: Vec<Token>,
}

/// An ordered collection of tokenized documents.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Splits text into maximal alphabetic runs, keeping hyphens and apostrophes
/// that sit between two letters. Digits and all other characters separate
/// tokens. No stemming is applied.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        if c == '\n' {
            line += 1;
            continue;
        }
        if !c.is_alphabetic() {
            continue;
        }
        let mut word: String = c.to_lowercase().collect();
        while let Some(&(_, next)) = chars.peek() {
            if next.is_alphabetic() {
                word.extend(next.to_lowercase());
                chars.next();
            } else if is_joiner(next) {
                let mut ahead = chars.clone();
                ahead.next();
                match ahead.peek() {
                    Some(&(_, after)) if after.is_alphabetic() => {
                        word.push(next);
                        chars.next();
                    }
                    _ => break,
                }
            } else {
                break;
            }
        }
        tokens.push(Token {
            text: word,
            offset: start,
            line,
        });
    }
    tokens
}

impl Corpus {
    /// Builds a corpus from `(id, name, text)` triples, tokenizing each
    /// document. Ids must be unique and at least one token must be present.
    pub fn from_texts<I, S1, S2, S3>(texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S1, S2, S3)>,
        S1: Into<String>,
        S2: Into<String>,
        S3: Into<String>,
    {
        let raw: Vec<(String, String, String)> = texts
            .into_iter()
            .map(|(a, b, c)| (a.into(), b.into(), c.into()))
            .collect();
        let mut seen = HashSet::new();
        for (id, _, _) in &raw {
            if !seen.insert(id.as_str()) {
                return Err(Error::domain(format!("duplicate document id `{id}`")));
            }
        }
        let documents: Vec<Document> = raw
            .into_par_iter()
            .map(|(id, name, raw_text)| {
                let tokens = tokenize(&raw_text);
                Document {
                    id,
                    name,
                    raw_text,
                    tokens,
                }
            })
            .collect();
        if documents.iter().all(|d| d.tokens.is_empty()) {
            return Err(Error::domain("corpus contains no word tokens"));
        }
        Ok(Corpus { documents })
    }

    /// Reads UTF-8 text files. Directories contribute their `*.txt` entries
    /// in lexicographic order; the file stem becomes the document id.
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        let mut files: Vec<PathBuf> = Vec::new();
        for p in paths {
            let p = p.as_ref();
            if p.is_dir() {
                let entries = fs::read_dir(p).map_err(|e| Error::io(p, e))?;
                let mut inner = Vec::new();
                for entry in entries {
                    let path = entry.map_err(|e| Error::io(p, e))?.path();
                    if path.extension().is_some_and(|x| x == "txt") {
                        inner.push(path);
                    }
                }
                inner.sort();
                files.extend(inner);
            } else {
                files.push(p.to_path_buf());
            }
        }
        if files.is_empty() {
            return Err(Error::domain("no input files"));
        }
        let mut texts = Vec::with_capacity(files.len());
        for path in files {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let name = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            texts.push((id, name, text));
        }
        Corpus::from_texts(texts)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// All tokens in reading order, across documents.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.documents.iter().flat_map(|d| d.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "words")]
pub enum Segmentation {
    ByDocument,
    FixedWordCount(usize),
    ByLine,
}

impl std::str::FromStr for Segmentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by-document" => Ok(Segmentation::ByDocument),
            "by-line" => Ok(Segmentation::ByLine),
            other => {
                let k = other
                    .strip_prefix("fixed:")
                    .or_else(|| other.strip_prefix("fixed-word-count:"))
                    .ok_or_else(|| Error::domain(format!("unknown segmentation `{other}`")))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::domain(format!("bad word count in `{other}`")))?;
                if k == 0 {
                    return Err(Error::domain("fixed word count must be at least 1"));
                }
                Ok(Segmentation::FixedWordCount(k))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub id: String,
    pub document: String,
    /// 0-based, contiguous within the document.
    pub ordinal: usize,
    pub tokens: Vec<String>,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct SegmentSet {
    pub segments: Vec<Segment>,
    pub strategy: Segmentation,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.id.clone()).collect()
    }
}

fn text_span(doc: &Document, tokens: &[Token]) -> String {
    match (tokens.first(), tokens.last()) {
        (Some(first), Some(last)) => {
            doc.raw_text[first.offset..last.offset + last_len(doc, last)].to_string()
        }
        _ => String::new(),
    }
}

// Byte length of the token as written (tokens are lowercased, which can
// change byte length, so measure in the source).
fn last_len(doc: &Document, tok: &Token) -> usize {
    let rest = &doc.raw_text[tok.offset..];
    let mut end = 0;
    let mut chars = rest.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let keep = c.is_alphabetic()
            || (is_joiner(c) && chars.peek().is_some_and(|&(_, n)| n.is_alphabetic()));
        if !keep {
            break;
        }
        end = i + c.len_utf8();
    }
    end
}

/// Splits every document of the corpus into segments.
pub fn segment(corpus: &Corpus, strategy: Segmentation) -> Result<SegmentSet> {
    let mut segments = Vec::new();
    for doc in corpus.documents() {
        match strategy {
            Segmentation::ByDocument => segments.push(Segment {
                id: doc.id.clone(),
                document: doc.id.clone(),
                ordinal: 0,
                tokens: doc.tokens.iter().map(|t| t.text.clone()).collect(),
                text: doc.raw_text.clone(),
            }),
            Segmentation::FixedWordCount(k) => {
                if k == 0 {
                    return Err(Error::domain("fixed word count must be at least 1"));
                }
                for (ordinal, chunk) in doc.tokens.chunks(k).enumerate() {
                    segments.push(Segment {
                        id: format!("{}:{}", doc.id, ordinal),
                        document: doc.id.clone(),
                        ordinal,
                        tokens: chunk.iter().map(|t| t.text.clone()).collect(),
                        text: text_span(doc, chunk),
                    });
                }
            }
            Segmentation::ByLine => {
                let mut ordinal = 0;
                let mut cursor = 0;
                for (line_no, line) in doc.raw_text.split('\n').enumerate() {
                    let line = line.strip_suffix('\r').unwrap_or(line);
                    if line.trim().is_empty() {
                        continue;
                    }
                    let start = cursor;
                    while cursor < doc.tokens.len() && doc.tokens[cursor].line == line_no {
                        cursor += 1;
                    }
                    segments.push(Segment {
                        id: format!("{}:L{}", doc.id, line_no + 1),
                        document: doc.id.clone(),
                        ordinal,
                        tokens: doc.tokens[start..cursor]
                            .iter()
                            .map(|t| t.text.clone())
                            .collect(),
                        text: line.to_string(),
                    });
                    ordinal += 1;
                }
            }
        }
    }
    Ok(SegmentSet { segments, strategy })
}

/// Loads the given files and segments them.
pub fn load_and_segment<P: AsRef<Path>>(
    paths: &[P],
    strategy: Segmentation,
) -> Result<(Corpus, SegmentSet)> {
    if let Segmentation::FixedWordCount(0) = strategy {
        return Err(Error::domain("fixed word count must be at least 1"));
    }
    let corpus = Corpus::load(paths)?;
    let segments = segment(&corpus, strategy)?;
    Ok((corpus, segments))
}

/// The in-order sequence of support-term occurrences in a text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedDocument {
    /// `(position, term)` where position indexes the corpus token stream.
    pub entries: Vec<(usize, String)>,
}

impl ReducedDocument {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, t)| t.as_str())
    }
}

/// Keeps the tokens that belong to the support, in reading order.
/// Documents are concatenated in corpus order.
pub fn reduce_document(corpus: &Corpus, support: &SupportSet) -> ReducedDocument {
    let entries = corpus
        .tokens()
        .enumerate()
        .filter(|(_, t)| support.contains(&t.text))
        .map(|(pos, t)| (pos, t.text.clone()))
        .collect();
    ReducedDocument { entries }
}
