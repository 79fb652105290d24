//! The six rule scorers. Each returns `weight * count(pattern hits)` and is
//! therefore non-negative, zero on empty input, linear in the weight, and
//! monotone under insertions of matching tokens.

use super::lexicon::{Lexicon, PosTag, WhPattern};
use super::tokenize::Token;

fn is_sentence_end(token: &Token) -> bool {
    matches!(token.surface.as_str(), "." | "?" | "!")
}

/// Splits a token slice into sentences; each sentence keeps its terminator.
fn sentences(tokens: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if is_sentence_end(t) {
            out.push(&tokens[start..=i]);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out
}

/// Vague expressions: occurrences of lexicon vague words, duplicates
/// counted.
pub fn vague_expression_score(tokens: &[Token], lexicon: &Lexicon, weight: f64) -> f64 {
    debug_assert!(weight >= 0.0);
    let count = tokens.iter().filter(|t| lexicon.is_vague(&t.lemma)).count();
    weight * count as f64
}

/// Structural ambiguity: prepositional-phrase attachment sites. A
/// preposition counts when at least two distinct noun-tagged lemmas occur
/// earlier in the same sentence, since each prior noun is a candidate
/// attachment point.
pub fn structural_ambiguity_score(tokens: &[Token], lexicon: &Lexicon, weight: f64) -> f64 {
    debug_assert!(weight >= 0.0);
    let mut count = 0usize;
    for sentence in sentences(tokens) {
        let mut nouns_seen = std::collections::BTreeSet::new();
        for token in sentence {
            if lexicon.is_preposition(&token.lemma) && nouns_seen.len() >= 2 {
                count += 1;
            }
            if token.pos_tags.contains(&PosTag::Noun) {
                nouns_seen.insert(token.lemma.as_str());
            }
        }
    }
    weight * count as f64
}

/// Syntactic ambiguity: tokens the lexicon tags with two or more
/// parts of speech.
pub fn syntactic_ambiguity_score(tokens: &[Token], _lexicon: &Lexicon, weight: f64) -> f64 {
    debug_assert!(weight >= 0.0);
    let count = tokens.iter().filter(|t| t.pos_tags.len() >= 2).count();
    weight * count as f64
}

/// Semantic ambiguity: surplus senses of polysemous words, summed over
/// tokens (a word with n senses contributes n - 1 per occurrence).
pub fn semantic_ambiguity_score(tokens: &[Token], lexicon: &Lexicon, weight: f64) -> f64 {
    debug_assert!(weight >= 0.0);
    let surplus: u32 = tokens
        .iter()
        .filter_map(|t| lexicon.sense_count(&t.lemma))
        .map(|senses| senses.saturating_sub(1))
        .sum();
    weight * surplus as f64
}

/// Open-endedness: sentence-initial opener phrases plus interrogative
/// sentences ending in a broad-scope noun, counted per sentence.
pub fn open_endedness_score(tokens: &[Token], lexicon: &Lexicon, weight: f64) -> f64 {
    debug_assert!(weight >= 0.0);
    let mut count = 0usize;
    for sentence in sentences(tokens) {
        let words: Vec<&Token> = sentence.iter().filter(|t| t.is_content()).collect();
        if words.is_empty() {
            continue;
        }
        let interrogative = sentence.iter().any(|t| t.surface == "?");
        for pattern in lexicon.wh_patterns() {
            match pattern {
                WhPattern::Opener(phrase) => {
                    if phrase.len() <= words.len()
                        && phrase
                            .iter()
                            .zip(words.iter())
                            .all(|(p, w)| p == &w.lemma)
                    {
                        count += 1;
                    }
                }
                WhPattern::BroadTail(tail) => {
                    if interrogative && words.last().map(|w| w.lemma.as_str()) == Some(tail) {
                        count += 1;
                    }
                }
            }
        }
    }
    weight * count as f64
}

/// Multi-partness: extra question marks, coordinators joining content
/// spans, and comma-separated lists of three or more items (each list
/// counted once).
pub fn multi_partness_score(tokens: &[Token], lexicon: &Lexicon, weight: f64) -> f64 {
    debug_assert!(weight >= 0.0);
    let question_marks = tokens.iter().filter(|t| t.surface == "?").count();
    let extra_questions = question_marks.saturating_sub(1);

    let mut coordinators = 0usize;
    for (i, token) in tokens.iter().enumerate() {
        if lexicon.is_coordinator(&token.lemma)
            && tokens[..i].iter().any(Token::is_content)
            && tokens[i + 1..].iter().any(Token::is_content)
        {
            coordinators += 1;
        }
    }

    // Lists: items are runs of content tokens separated by commas; a run of
    // three or more items makes one list. Sentence-level punctuation ends
    // the current list; other punctuation is transparent.
    let mut lists = 0usize;
    let mut items = 0usize;
    let mut item_open = false;
    let close_segment = |items: &mut usize, item_open: &mut bool, lists: &mut usize| {
        if *item_open {
            *items += 1;
        }
        if *items >= 3 {
            *lists += 1;
        }
        *items = 0;
        *item_open = false;
    };
    for token in tokens {
        if token.surface == "," {
            if item_open {
                items += 1;
                item_open = false;
            }
        } else if matches!(token.surface.as_str(), "." | "?" | "!" | ";" | ":") {
            close_segment(&mut items, &mut item_open, &mut lists);
        } else if token.is_content() {
            item_open = true;
        }
    }
    close_segment(&mut items, &mut item_open, &mut lists);

    weight * (extra_questions + coordinators + lists) as f64
}
