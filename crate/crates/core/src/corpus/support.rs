use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// The ordered, deduplicated vocabulary a document is reduced onto.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl SupportSet {
    /// Lowercases and deduplicates, keeping first-seen order.
    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        for t in terms {
            let t = t.as_ref().trim().to_lowercase();
            if t.is_empty() || index.contains_key(&t) {
                continue;
            }
            index.insert(t.clone(), out.len());
            out.push(t);
        }
        if out.is_empty() {
            return Err(Error::domain("support set is empty"));
        }
        Ok(SupportSet { terms: out, index })
    }

    /// Parses a term list: one term per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_terms(text.lines().map(|l| match l.find('#') {
            Some(i) => &l[..i],
            None => l,
        }))
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

#[derive(Debug, Clone)]
pub enum SupportSource {
    /// A term-list file.
    File(PathBuf),
    /// Crude noun guess from the corpus itself: tokens with a typical noun
    /// suffix, or frequent non-stopword tokens. Approximate only.
    Heuristic { min_frequency: usize },
}

const NOUN_SUFFIXES: &[&str] = &[
    "tion", "sion", "ment", "ness", "ity", "ism", "ist", "ance", "ence", "ship", "hood", "ology",
    "ure", "ogy", "ics",
];

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "even",
    "every", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "him", "his", "how", "however", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "least", "less", "like", "made", "make", "many", "may", "me", "might", "more", "most",
    "much", "must", "my", "never", "new", "no", "nor", "not", "now", "of", "off", "on", "once",
    "one", "only", "or", "other", "our", "out", "over", "own", "same", "she", "should", "so",
    "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "two", "under", "until", "up", "upon", "us", "used",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "within", "without", "would", "yet", "you", "your",
];

fn heuristic_terms(corpus: &Corpus, min_frequency: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for tok in corpus.tokens() {
        let e = counts.entry(tok.text.as_str()).or_insert_with(|| {
            order.push(tok.text.as_str());
            0
        });
        *e += 1;
    }
    order
        .into_iter()
        .filter(|w| w.chars().count() >= 3 && !STOPWORDS.contains(w))
        .filter(|w| {
            NOUN_SUFFIXES.iter().any(|s| w.ends_with(s)) || counts[w] >= min_frequency.max(1)
        })
        .map(str::to_string)
        .collect()
}

pub fn build_support(source: &SupportSource, corpus: &Corpus) -> Result<SupportSet> {
    match source {
        SupportSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SupportSet::parse(&text)
                .map_err(|_| Error::domain(format!("support list {} has no terms", path.display())))
        }
        SupportSource::Heuristic { min_frequency } => {
            SupportSet::from_terms(heuristic_terms(corpus, *min_frequency))
        }
    }
}
