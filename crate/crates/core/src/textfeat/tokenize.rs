//! Whitespace/punctuation tokenizer with a fixed contraction rule table.

use std::collections::BTreeSet;

use super::lexicon::{lemma, Lexicon, PosTag};

/// One token of an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Original text of the token (never empty, never contains whitespace).
    pub surface: String,
    /// Normalized form; a deterministic function of `surface`.
    pub lemma: String,
    /// Coarse part-of-speech labels from the lexicon; empty when unknown.
    pub pos_tags: BTreeSet<PosTag>,
}

impl Token {
    fn new(surface: String, lexicon: &Lexicon) -> Token {
        let lemma = lemma(&surface);
        let pos_tags = lexicon.pos_tags(&lemma).cloned().unwrap_or_default();
        Token {
            surface,
            lemma,
            pos_tags,
        }
    }

    /// True when the token carries at least one alphanumeric character
    /// (i.e. it is a word, not punctuation).
    pub fn is_content(&self) -> bool {
        self.surface.chars().any(|c| c.is_alphanumeric())
    }
}

/// Counters for input bytes the tokenizer had to discard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenizeDiagnostics {
    /// Control characters dropped from the input.
    pub dropped_chars: usize,
}

/// Contraction suffixes split off the end of a word, longest first.
/// "don't" becomes ["do", "n't"], "it's" becomes ["it", "'s"].
const CONTRACTION_SUFFIXES: [&str; 7] = ["n't", "'re", "'ve", "'ll", "'s", "'d", "'m"];

/// Splits text on whitespace and punctuation boundaries. Punctuation
/// characters become single-character tokens; apostrophes stay inside a
/// word only between alphanumeric characters; the contraction table splits
/// known clitics into their own tokens.
pub fn tokenize(text: &str, lexicon: &Lexicon) -> Vec<Token> {
    tokenize_with_diagnostics(text, lexicon).0
}

pub fn tokenize_with_diagnostics(
    text: &str,
    lexicon: &Lexicon,
) -> (Vec<Token>, TokenizeDiagnostics) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut diag = TokenizeDiagnostics::default();
    let mut word = String::new();

    let flush = |word: &mut String, tokens: &mut Vec<Token>| {
        if word.is_empty() {
            return;
        }
        for part in split_contraction(word) {
            tokens.push(Token::new(part, lexicon));
        }
        word.clear();
    };

    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c.is_control() {
            diag.dropped_chars += 1;
        } else if c.is_alphanumeric() {
            word.push(c);
        } else if c == '\''
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            // Word-internal apostrophe: keep it for the contraction table.
            word.push(c);
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(Token::new(c.to_string(), lexicon));
        }
    }
    flush(&mut word, &mut tokens);
    (tokens, diag)
}

fn split_contraction(word: &str) -> Vec<String> {
    let lower = word.to_lowercase();
    for suffix in CONTRACTION_SUFFIXES {
        if lower.ends_with(suffix) && lower.len() > suffix.len() {
            let split = word.len() - suffix.len();
            if word.is_char_boundary(split) {
                return vec![word[..split].to_string(), word[split..].to_string()];
            }
        }
    }
    vec![word.to_string()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textfeat::Lexicon;

    fn surfaces(text: &str) -> Vec<String> {
        let lex = Lexicon::builtin();
        tokenize(text, &lex).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn splits_on_whitespace_and_punct() {
        assert_eq!(
            surfaces("Rice flies like sand."),
            vec!["Rice", "flies", "like", "sand", "."]
        );
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert_eq!(surfaces(""), Vec::<String>::new());
        assert_eq!(surfaces("   \t\n "), Vec::<String>::new());
    }

    #[test]
    fn contraction_table_applies() {
        assert_eq!(surfaces("don't stop"), vec!["do", "n't", "stop"]);
        assert_eq!(surfaces("What's up?"), vec!["What", "'s", "up", "?"]);
        assert_eq!(surfaces("they're"), vec!["they", "'re"]);
        // Unknown internal apostrophes stay in the word.
        assert_eq!(surfaces("o'clock"), vec!["o'clock"]);
    }

    #[test]
    fn quote_apostrophes_are_punctuation() {
        assert_eq!(surfaces("'hello'"), vec!["'", "hello", "'"]);
    }

    #[test]
    fn control_chars_are_dropped_and_counted() {
        let lex = Lexicon::builtin();
        let (tokens, diag) = tokenize_with_diagnostics("a\u{0}b\u{7}", &lex);
        assert_eq!(tokens.len(), 1);
        assert_eq!(tokens[0].surface, "ab");
        assert_eq!(diag.dropped_chars, 2);
    }

    #[test]
    fn pos_tags_come_from_lexicon() {
        let lex = Lexicon::builtin();
        let tokens = tokenize("Rice flies like sand.", &lex);
        assert_eq!(tokens[1].pos_tags.len(), 2); // flies: NOUN,VERB
        assert_eq!(tokens[2].pos_tags.len(), 2); // like: VERB,ADP
        assert!(tokens[4].pos_tags.is_empty()); // "."
    }
}
