use super::lexicon::{Lexicon, TOXIC_LEXICON};
use crate::corpus::Tokenizer;

pub const DEFAULT_TOXICITY_THRESHOLD: f64 = 0.5;

/// Per-comment scorer, e.g. a toxicity model. Implementations must be
/// deterministic and return a value in `[0, 1]` for every input.
pub trait ScorerPlugin: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, text: &str) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconScoreMode {
    /// 1 when any token is in the word list, else 0.
    Indicator,
    /// Fraction of tokens in the word list.
    HitRate,
}

/// Word-list scorer; the default toxicity scorer.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    name: String,
    words: Lexicon,
    tokenizer: Tokenizer,
    mode: LexiconScoreMode,
}

impl LexiconScorer {
    /// All categories of `words` are merged into one list.
    pub fn new(name: &str, words: Lexicon, tokenizer: Tokenizer, mode: LexiconScoreMode) -> Self {
        Self {
            name: name.to_string(),
            words,
            tokenizer,
            mode,
        }
    }

    /// Indicator scorer over the shipped toxic word list.
    pub fn default_toxic() -> Self {
        let tk = Tokenizer::default();
        let words =
            Lexicon::parse("toxic_demo_v1", TOXIC_LEXICON, &tk).expect("shipped word list parses");
        Self::new(
            "toxic_demo_v1_indicator",
            words,
            tk,
            LexiconScoreMode::Indicator,
        )
    }

    pub fn with_mode(mut self, mode: LexiconScoreMode) -> Self {
        self.mode = mode;
        self
    }

    fn hit(&self, token: &str) -> bool {
        self.words.categories.values().any(|c| c.matches(token))
    }
}

impl ScorerPlugin for LexiconScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, text: &str) -> f64 {
        let mut total = 0usize;
        let mut hits = 0usize;
        let mut any = false;
        self.tokenizer.for_each_token(text, |t| {
            total += 1;
            if self.hit(&t) {
                hits += 1;
                any = true;
            }
        });
        match self.mode {
            LexiconScoreMode::Indicator => f64::from(u8::from(any)),
            LexiconScoreMode::HitRate if total == 0 => 0.0,
            LexiconScoreMode::HitRate => hits as f64 / total as f64,
        }
    }
}

/// Scores every text with the same value. Used in tests and as a null model.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl ScorerPlugin for ConstantScorer {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _text: &str) -> f64 {
        self.0
    }
}

/// Fraction of texts whose score is at least `threshold`; 0 when empty.
pub fn toxicity_rate<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    scorer: &dyn ScorerPlugin,
    threshold: f64,
) -> f64 {
    let (mut n, mut toxic) = (0usize, 0usize);
    for t in texts {
        n += 1;
        if scorer.score(t) >= threshold {
            toxic += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        toxic as f64 / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXTS: [&str; 10] = [
        "you are an idiot",
        "nice weather today",
        "what a moron",
        "I like turtles",
        "good game everyone",
        "thanks for sharing",
        "such a loser",
        "see you tomorrow",
        "great post",
        "agreed",
    ];

    #[test]
    fn constant_scorers() {
        assert_eq!(toxicity_rate(TEXTS, &ConstantScorer(0.0), 0.5), 0.0);
        assert_eq!(toxicity_rate(TEXTS, &ConstantScorer(1.0), 0.5), 1.0);
        assert_eq!(toxicity_rate([], &ConstantScorer(1.0), 0.5), 0.0);
    }

    #[test]
    fn planted_three_of_ten() {
        let scorer = LexiconScorer::default_toxic();
        assert_eq!(
            toxicity_rate(TEXTS, &scorer, DEFAULT_TOXICITY_THRESHOLD),
            0.3
        );
    }

    #[test]
    fn hit_rate_mode() {
        let scorer = LexiconScorer::default_toxic().with_mode(LexiconScoreMode::HitRate);
        // tokens after stop words: [idiot]
        assert_eq!(scorer.score("you are an idiot"), 1.0);
        assert!((scorer.score("idiot weather today") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(scorer.score(""), 0.0);
    }

    #[test]
    fn scores_are_in_unit_interval_and_deterministic() {
        let scorer = LexiconScorer::default_toxic().with_mode(LexiconScoreMode::HitRate);
        for t in TEXTS {
            let s = scorer.score(t);
            assert!((0.0..=1.0).contains(&s));
            assert_eq!(s, scorer.score(t));
        }
    }
}
