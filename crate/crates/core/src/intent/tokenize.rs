//! Utterance tokenizer.

use serde::{Deserialize, Serialize};

use super::vocabulary::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Token {
    Word(String),
    Number(f64),
    /// Text between double quotes, kept verbatim apart from trimming.
    Quoted(String),
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Word(w) => Some(w),
            _ => None,
        }
    }
}

/// A token before vocabulary normalization: `raw` is the lowercase surface form.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Lexeme {
    pub raw: String,
    pub token: Token,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_open_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201c}' | '\u{201d}')
}

/// Splits on whitespace and punctuation. A run of digits with one `.` or `,`
/// between digits becomes a number ("0,95" is 0.95).
pub(crate) fn lex(utterance: &str) -> Vec<Lexeme> {
    let chars: Vec<char> = utterance.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_open_quote(c) {
            if let Some(len) = chars[i + 1..].iter().position(|&q| is_open_quote(q)) {
                let inner: String = chars[i + 1..i + 1 + len].iter().collect();
                let inner = inner.trim().to_string();
                if !inner.is_empty() {
                    out.push(Lexeme {
                        raw: inner.to_lowercase(),
                        token: Token::Quoted(inner),
                    });
                }
                i += len + 2;
                continue;
            }
            i += 1;
            continue;
        }
        if !is_word_char(c) {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            let ch = chars[i];
            let separator = (ch == '.' || ch == ',')
                && i > start
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if is_word_char(ch) || separator {
                i += 1;
            } else {
                break;
            }
        }
        let word: String = chars[start..i].iter().collect::<String>().to_lowercase();
        let token = number_value(&word)
            .map(Token::Number)
            .unwrap_or_else(|| Token::Word(word.clone()));
        out.push(Lexeme { raw: word, token });
    }
    out
}

fn number_value(word: &str) -> Option<f64> {
    let mut seen_sep = false;
    for (i, c) in word.chars().enumerate() {
        if c == '.' || c == ',' {
            if seen_sep || i == 0 {
                return None;
            }
            seen_sep = true;
        } else if !c.is_ascii_digit() {
            return None;
        }
    }
    word.replace(',', ".").parse().ok()
}

/// Strips a plural `s` when the word is unknown but its stem is known.
pub(crate) fn normalize(word: &str, vocabulary: &Vocabulary) -> String {
    if vocabulary.knows(word) {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix('s') {
        if !stem.is_empty() && vocabulary.knows(stem) {
            return stem.to_string();
        }
    }
    word.to_string()
}

/// Lowercases and splits an utterance into word, number and quoted tokens.
pub fn tokenize(utterance: &str, vocabulary: &Vocabulary) -> Vec<Token> {
    lex(utterance)
        .into_iter()
        .map(|l| match l.token {
            Token::Word(w) => Token::Word(normalize(&w, vocabulary)),
            other => other,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ts: &[Token]) -> Vec<String> {
        ts.iter()
            .map(|t| match t {
                Token::Word(w) => w.clone(),
                Token::Number(n) => format!("#{n}"),
                Token::Quoted(q) => format!("'{q}'"),
            })
            .collect()
    }

    #[test]
    fn handshake_utterance() {
        let v = Vocabulary::default_shipped();
        assert_eq!(
            words(&tokenize("Help me to analyse my data", &v)),
            ["help", "me", "to", "analyse", "my", "data"]
        );
    }

    #[test]
    fn comma_decimal() {
        let v = Vocabulary::default_shipped();
        let t = tokenize("eliminate variables with a coefficient greater than 0,95", &v);
        assert!(t.contains(&Token::Number(0.95)));
        assert!(t.contains(&Token::Word("variable".into())));
        let t = tokenize("use k=4, then 3.5 or 1,2,3", &v);
        assert_eq!(words(&t), ["use", "k", "#4", "then", "#3.5", "or", "1,2,3"]);
    }

    #[test]
    fn empty_and_punctuation() {
        let v = Vocabulary::default_shipped();
        assert!(tokenize("", &v).is_empty());
        assert!(tokenize("?!... ,", &v).is_empty());
        assert_eq!(words(&tokenize("Ok.", &v)), ["ok"]);
    }

    #[test]
    fn plural_stripping_only_for_known_stems() {
        let v = Vocabulary::default_shipped();
        assert_eq!(
            words(&tokenize("Clusters, sheets and statistics of glass", &v)),
            ["cluster", "sheet", "and", "statistics", "of", "glass"]
        );
    }

    #[test]
    fn quoted_strings_and_identifiers() {
        let v = Vocabulary::default_shipped();
        let t = tokenize("exclude \"Life Expectancy\" and gdp_per_capita, 1st", &v);
        assert_eq!(
            words(&t),
            ["exclude", "'Life Expectancy'", "and", "gdp_per_capita", "1st"]
        );
        // an unterminated quote is just punctuation
        assert_eq!(words(&tokenize("say \"hi", &v)), ["say", "hi"]);
    }
}
