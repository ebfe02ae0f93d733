use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};

/// Stop-word list shipped with the crate (version 1).
pub const DEFAULT_STOP_WORDS: &str = include_str!("../../data/stopwords_en_v1.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    /// Parse a one-word-per-line list. `#` starts a comment. Entries are
    /// normalized the same way as text so that `don't` matches `dont`.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or_default().trim())
            .filter(|l| !l.is_empty())
            .map(|w| {
                w.to_lowercase()
                    .chars()
                    .filter(|c| !is_apostrophe(*c))
                    .collect()
            })
            .collect();
        Self { words }
    }

    pub fn from_path(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOP_WORDS)
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}')
}

/// Lowercases, strips punctuation, removes stop words and stems with the
/// Snowball English (Porter2) stemmer.
pub struct Tokenizer {
    stop_words: StopWords,
    stemmer: Stemmer,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokenizer")
            .field("stop_words", &self.stop_words.len())
            .finish()
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::new(StopWords::default())
    }
}

impl Clone for Tokenizer {
    fn clone(&self) -> Self {
        Self::new(self.stop_words.clone())
    }
}

impl Tokenizer {
    pub fn new(stop_words: StopWords) -> Self {
        Self {
            stop_words,
            stemmer: Stemmer::create(Algorithm::English),
        }
    }

    pub fn stop_words(&self) -> &StopWords {
        &self.stop_words
    }

    pub fn stem(&self, word: &str) -> String {
        self.stemmer.stem(word).into_owned()
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        self.for_each_token(text, |t| out.push(t));
        out
    }

    /// Streaming form of [`Tokenizer::tokenize`].
    pub fn for_each_token(&self, text: &str, mut f: impl FnMut(String)) {
        let mut word = String::new();
        let flush = |word: &mut String, f: &mut dyn FnMut(String)| {
            if !word.is_empty() {
                if !self.stop_words.contains(word) {
                    f(self.stem(word));
                }
                word.clear();
            }
        };
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
            } else if is_apostrophe(c) {
                continue;
            } else {
                flush(&mut word, &mut f);
            }
        }
        flush(&mut word, &mut f);
    }
}
