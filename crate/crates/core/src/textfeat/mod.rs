//! Deterministic text features: tokenization and the six rule-based
//! linguistic-uncertainty scorers.
//!
//! The scorers measure, per input text, the intensity of six uncertainty
//! sources: structural ambiguity, syntactic ambiguity, semantic ambiguity,
//! vague expressions, open-endedness, and multi-partness. Everything is
//! driven by an embedded lexicon so the same input always produces the same
//! feature vector on every platform.

mod lexicon;
mod scores;
mod tokenize;

pub use lexicon::{Lexicon, LexiconError, PosTag, WhPattern};
pub use tokenize::{tokenize, tokenize_with_diagnostics, Token, TokenizeDiagnostics};

use serde::{Deserialize, Serialize};

/// Number of rule scorers / feature-vector entries.
pub const FEATURE_COUNT: usize = 6;

/// Fixed feature order. Serialized vectors always use this index order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "structural",
    "syntactic",
    "semantic",
    "vague",
    "open_ended",
    "multi_part",
];

/// The six rule-based uncertainty intensities for one input, in the fixed
/// order of [`FEATURE_NAMES`]. All entries are >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector([0.0; FEATURE_COUNT])
    }

    pub fn scores(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn max_score(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&s| s == 0.0)
    }
}

/// The rule generator: tokenizes an utterance and evaluates all six
/// scorers with their configured weights.
///
/// Weights default to 1.0 each; a fitted weighted rule can substitute its
/// own coefficients. The generator is pure: byte-identical inputs yield
/// identical feature vectors across runs and platforms.
#[derive(Debug, Clone)]
pub struct RuleGen {
    lexicon: std::sync::Arc<Lexicon>,
    weights: [f64; FEATURE_COUNT],
}

impl RuleGen {
    pub fn new(lexicon: std::sync::Arc<Lexicon>) -> Self {
        RuleGen {
            lexicon,
            weights: [1.0; FEATURE_COUNT],
        }
    }

    /// Uses the embedded lexicon with unit weights.
    pub fn builtin() -> Self {
        RuleGen::new(Lexicon::builtin())
    }

    pub fn with_weights(mut self, weights: [f64; FEATURE_COUNT]) -> Self {
        assert!(
            weights.iter().all(|w| *w >= 0.0 && w.is_finite()),
            "scorer weights must be finite and non-negative"
        );
        self.weights = weights;
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn weights(&self) -> &[f64; FEATURE_COUNT] {
        &self.weights
    }

    /// Evaluates all six scorers on the given text, in fixed index order.
    pub fn feature_vector(&self, text: &str) -> FeatureVector {
        let tokens = tokenize(text, &self.lexicon);
        self.feature_vector_of_tokens(&tokens)
    }

    pub fn feature_vector_of_tokens(&self, tokens: &[Token]) -> FeatureVector {
        let lex = &*self.lexicon;
        FeatureVector([
            scores::structural_ambiguity_score(tokens, lex, self.weights[0]),
            scores::syntactic_ambiguity_score(tokens, lex, self.weights[1]),
            scores::semantic_ambiguity_score(tokens, lex, self.weights[2]),
            scores::vague_expression_score(tokens, lex, self.weights[3]),
            scores::open_endedness_score(tokens, lex, self.weights[4]),
            scores::multi_partness_score(tokens, lex, self.weights[5]),
        ])
    }

    /// Single-rule score: the dominant rule intensity, falling back to the
    /// input token count when no rule fires at all.
    pub fn single_rule_score(&self, text: &str) -> f64 {
        let tokens = tokenize(text, &self.lexicon);
        let features = self.feature_vector_of_tokens(&tokens);
        if features.is_all_zero() {
            tokens.len() as f64
        } else {
            features.max_score()
        }
    }
}

pub use scores::{
    multi_partness_score, open_endedness_score, semantic_ambiguity_score,
    structural_ambiguity_score, syntactic_ambiguity_score, vague_expression_score,
};
