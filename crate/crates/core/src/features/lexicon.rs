//! Category lexicons for language-style features.
//!
//! File format: blocks separated by blank lines. The first line of a block
//! is the category name; every following line is one word. A trailing `*`
//! makes the entry a prefix match. Lines starting with `#` are comments. A
//! single-category file is just one block, so per-category dictionary files
//! can be concatenated or loaded one by one.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::corpus::Tokenizer;

/// Small open lexicon shipped for demonstration (version 1).
pub const DEMO_LEXICON: &str = include_str!("../../data/lexicon_demo_v1.txt");
/// Word list backing the default toxicity scorer (version 1).
pub const TOXIC_LEXICON: &str = include_str!("../../data/toxic_demo_v1.txt");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    /// Stemmed exact-match entries.
    pub stems: BTreeSet<String>,
    /// Lowercased prefixes (entries written with a trailing `*`).
    pub prefixes: BTreeSet<String>,
}

impl Category {
    pub fn matches(&self, token: &str) -> bool {
        self.stems.contains(token) || self.prefixes.iter().any(|p| token.starts_with(p.as_str()))
    }

    fn is_empty(&self) -> bool {
        self.stems.is_empty() && self.prefixes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    pub categories: BTreeMap<String, Category>,
}

impl Lexicon {
    pub fn parse(name: &str, text: &str, tokenizer: &Tokenizer) -> Result<Self, FeatureError> {
        let mut categories = BTreeMap::new();
        let mut current: Option<(String, Category)> = None;
        let mut finish = |cur: Option<(String, Category)>| -> Result<(), FeatureError> {
            if let Some((cat, entries)) = cur {
                if entries.is_empty() {
                    return Err(FeatureError::Lexicon(format!(
                        "category {cat:?} has no entries"
                    )));
                }
                if categories.insert(cat.clone(), entries).is_some() {
                    return Err(FeatureError::Lexicon(format!("duplicate category {cat:?}")));
                }
            }
            Ok(())
        };
        for raw in text.lines() {
            let line = raw.trim();
            if line.starts_with('#') {
                continue;
            }
            if line.is_empty() {
                finish(current.take())?;
                continue;
            }
            match current.as_mut() {
                None => current = Some((normalize_name(line), Category::default())),
                Some((_, cat)) => {
                    let word = line.to_lowercase();
                    if let Some(prefix) = word.strip_suffix('*') {
                        cat.prefixes.insert(prefix.to_string());
                    } else {
                        cat.stems.insert(tokenizer.stem(&word));
                    }
                }
            }
        }
        finish(current.take())?;
        if categories.is_empty() {
            return Err(FeatureError::Lexicon(format!(
                "lexicon {name:?} has no categories"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            categories,
        })
    }

    pub fn from_path(path: &Path, tokenizer: &Tokenizer) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FeatureError::Lexicon(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("lexicon");
        Self::parse(name, &text, tokenizer)
    }

    pub fn demo(tokenizer: &Tokenizer) -> Self {
        Self::parse("demo_v1", DEMO_LEXICON, tokenizer).expect("shipped lexicon parses")
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    /// Token total and per-category hit counts. A token may hit several categories.
    pub fn count<'a>(
        &self,
        tokens: impl IntoIterator<Item = &'a str>,
    ) -> (u64, BTreeMap<String, u64>) {
        let mut counts: BTreeMap<String, u64> =
            self.categories.keys().map(|c| (c.clone(), 0)).collect();
        let mut total = 0;
        for t in tokens {
            total += 1;
            for (name, cat) in &self.categories {
                if cat.matches(t) {
                    *counts.get_mut(name).expect("category present") += 1;
                }
            }
        }
        (total, counts)
    }
}

fn normalize_name(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

/// Proportion of a document's tokens falling in each category; all zeros for
/// an empty document.
pub fn lexicon_scores(
    document: &str,
    lexicon: &Lexicon,
    tokenizer: &Tokenizer,
) -> BTreeMap<String, f64> {
    let tokens = tokenizer.tokenize(document);
    let (total, counts) = lexicon.count(tokens.iter().map(String::as_str));
    counts
        .into_iter()
        .map(|(c, n)| {
            (
                c,
                if total == 0 {
                    0.0
                } else {
                    n as f64 / total as f64
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mood() -> (Lexicon, Tokenizer) {
        let tk = Tokenizer::default();
        let lex = Lexicon::parse("mood", "pos\nhappy\n\nneg\nsad\n", &tk).unwrap();
        (lex, tk)
    }

    #[test]
    fn empty_document_is_all_zero() {
        let (lex, tk) = mood();
        let s = lexicon_scores("", &lex, &tk);
        assert_eq!(s.len(), 2);
        assert!(s.values().all(|&v| v == 0.0));
    }

    #[test]
    fn single_category_document() {
        let (lex, tk) = mood();
        let s = lexicon_scores("happy happy", &lex, &tk);
        assert_eq!(s["pos"], 1.0);
        assert_eq!(s["neg"], 0.0);
    }

    #[test]
    fn mixed_document_proportions() {
        let (lex, tk) = mood();
        let s = lexicon_scores("happy happy sad", &lex, &tk);
        assert!((s["pos"] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s["neg"] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn prefix_entries_and_comments() {
        let tk = Tokenizer::default();
        let lex = Lexicon::parse("x", "# comment\nwork\njob*\noffice\n", &tk).unwrap();
        assert!(lex.categories["work"].matches("jobless"));
        assert!(lex.categories["work"].matches(&tk.stem("offices")));
    }

    #[test]
    fn malformed_lexicons_are_rejected() {
        let tk = Tokenizer::default();
        assert!(Lexicon::parse("x", "", &tk).is_err());
        assert!(Lexicon::parse("x", "lonely\n\nother\nword", &tk).is_err());
        assert!(Lexicon::parse("x", "a\nw\n\na\nv", &tk).is_err());
    }

    #[test]
    fn shipped_lexicons_parse() {
        let tk = Tokenizer::default();
        assert!(Lexicon::demo(&tk).categories.len() >= 5);
        assert_eq!(
            Lexicon::parse("toxic", TOXIC_LEXICON, &tk)
                .unwrap()
                .categories
                .len(),
            1
        );
    }
}
