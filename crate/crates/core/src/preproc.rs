//! Question text normalization.
//!
//! The only transformation applied to raw questions is isolating punctuation
//! marks from the surrounding letters, so that `"مرحبا، كيف الحال؟"` becomes
//! `"مرحبا ، كيف الحال ؟"`. Text is handled as a sequence of Unicode scalar
//! values; no normalization form is applied.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::{Error, Result};

/// Default punctuation: Latin sentence punctuation, quotes and brackets, plus
/// the Arabic comma, semicolon and question mark.
pub const DEFAULT_PUNCTUATION: &str = ".,!?:;\"'()[]{}«»،؛؟";

/// A question as it appears in the source data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawQuestion(String);

impl RawQuestion {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("question text is empty".into()));
        }
        Ok(RawQuestion(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for RawQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whitespace-free tokens of a preprocessed question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedQuestion {
    tokens: Vec<String>,
}

impl TokenizedQuestion {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The set of characters that get isolated as standalone tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctuationSet {
    chars: BTreeSet<char>,
}

impl PunctuationSet {
    /// Builds a set from the given characters; duplicates and whitespace are
    /// rejected.
    pub fn new(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for c in chars {
            if c.is_whitespace() {
                return Err(Error::InvalidInput(format!(
                    "punctuation set cannot contain whitespace ({c:?})"
                )));
            }
            if !set.insert(c) {
                return Err(Error::InvalidInput(format!(
                    "punctuation character {c:?} listed twice"
                )));
            }
        }
        if set.is_empty() {
            return Err(Error::InvalidInput("punctuation set is empty".into()));
        }
        Ok(PunctuationSet { chars: set })
    }

    /// Parses a punctuation file: every non-whitespace character is a member.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.chars().filter(|c| !c.is_whitespace()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn contains(&self, c: char) -> bool {
        self.chars.contains(&c)
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.chars.iter().copied()
    }
}

impl Default for PunctuationSet {
    fn default() -> Self {
        Self::parse(DEFAULT_PUNCTUATION).expect("default punctuation set is valid")
    }
}

/// Surrounds every punctuation character with single spaces and collapses
/// whitespace runs. The result is trimmed and never contains two consecutive
/// spaces.
pub fn separate_punctuation(text: &RawQuestion, punct: &PunctuationSet) -> RawQuestion {
    let mut spaced = String::with_capacity(text.0.len() + 8);
    for c in text.0.chars() {
        if punct.contains(c) {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    // A valid RawQuestion always has at least one non-whitespace char.
    RawQuestion(spaced.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Convenience wrapper over [`separate_punctuation`] for plain strings.
pub fn preprocess(text: &str, punct: &PunctuationSet) -> Result<String> {
    Ok(separate_punctuation(&RawQuestion::new(text)?, punct).into_string())
}

/// Splits a question into maximal whitespace-delimited tokens.
pub fn tokenize(text: &RawQuestion) -> Result<TokenizedQuestion> {
    let tokens: Vec<String> = text.0.split_whitespace().map(str::to_owned).collect();
    if tokens.is_empty() {
        return Err(Error::InvalidInput("question has no tokens".into()));
    }
    Ok(TokenizedQuestion { tokens })
}
