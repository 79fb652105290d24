//! Lexicon data: vague words, polysemy counts, a coarse part-of-speech
//! table, open-ended question patterns, coordinators, and prepositions.
//!
//! File format (line-oriented, UTF-8): section header lines `vague:`,
//! `polysemy:`, `pos:`, `wh:`, `coord:`, `prep:` introduce each section;
//! `#` starts a comment; blank lines are skipped. `polysemy` lines are
//! `lemma<TAB>count` with count >= 2, `pos` lines are
//! `lemma<TAB>TAG[,TAG...]`. In the `wh` section a plain line is a
//! sentence-initial opener phrase and a line starting with `...` matches an
//! interrogative sentence ending with the given lemma. All keys are passed
//! through [`lemma`] when loaded, so entries may be written inflected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::util::fingerprint;

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon_v1.txt");

/// Coarse part-of-speech labels used by the embedded lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Adp,
    Conj,
    Det,
    Num,
    Intj,
}

impl PosTag {
    fn parse(s: &str) -> Option<PosTag> {
        Some(match s {
            "NOUN" => PosTag::Noun,
            "VERB" => PosTag::Verb,
            "ADJ" => PosTag::Adj,
            "ADV" => PosTag::Adv,
            "PRON" => PosTag::Pron,
            "ADP" => PosTag::Adp,
            "CONJ" => PosTag::Conj,
            "DET" => PosTag::Det,
            "NUM" => PosTag::Num,
            "INTJ" => PosTag::Intj,
            _ => return None,
        })
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Adp => "ADP",
            PosTag::Conj => "CONJ",
            PosTag::Det => "DET",
            PosTag::Num => "NUM",
            PosTag::Intj => "INTJ",
        };
        f.write_str(s)
    }
}

/// One entry of the `wh` section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WhPattern {
    /// Lemma phrase matched at the start of a sentence.
    Opener(Vec<String>),
    /// Lemma matched as the last word of an interrogative sentence.
    BroadTail(String),
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read lexicon file: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable lexicon bundle. All lookups go through normalized lemmas, so
/// matching is case-insensitive and inflection-tolerant to the extent of
/// the suffix-strip table in [`lemma`].
#[derive(Debug, Clone)]
pub struct Lexicon {
    vague_words: BTreeSet<String>,
    polysemous_words: BTreeMap<String, u32>,
    pos_table: BTreeMap<String, BTreeSet<PosTag>>,
    wh_openers: Vec<WhPattern>,
    coordinators: BTreeSet<String>,
    prepositions: BTreeSet<String>,
    version: String,
}

impl Lexicon {
    /// The embedded default lexicon (shared, parsed once).
    pub fn builtin() -> Arc<Lexicon> {
        static BUILTIN: OnceLock<Arc<Lexicon>> = OnceLock::new();
        BUILTIN
            .get_or_init(|| {
                Arc::new(
                    Lexicon::parse(BUILTIN_LEXICON)
                        .expect("embedded lexicon must parse"),
                )
            })
            .clone()
    }

    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        Lexicon::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon {
            vague_words: BTreeSet::new(),
            polysemous_words: BTreeMap::new(),
            pos_table: BTreeMap::new(),
            wh_openers: Vec::new(),
            coordinators: BTreeSet::new(),
            prepositions: BTreeSet::new(),
            version: fingerprint(text.as_bytes()),
        };
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_suffix(':') {
                match name {
                    "vague" | "polysemy" | "pos" | "wh" | "coord" | "prep" => {
                        section = Some(match name {
                            "vague" => "vague",
                            "polysemy" => "polysemy",
                            "pos" => "pos",
                            "wh" => "wh",
                            "coord" => "coord",
                            _ => "prep",
                        });
                        continue;
                    }
                    other => {
                        return Err(LexiconError::Parse {
                            line: lineno,
                            msg: format!("unknown section `{other}`"),
                        })
                    }
                }
            }
            let section = section.ok_or_else(|| LexiconError::Parse {
                line: lineno,
                msg: "entry before any section header".into(),
            })?;
            match section {
                "vague" => {
                    lex.vague_words.insert(lemma(line));
                }
                "polysemy" => {
                    let (word, count) =
                        line.split_once('\t').ok_or_else(|| LexiconError::Parse {
                            line: lineno,
                            msg: "polysemy line must be `lemma<TAB>count`".into(),
                        })?;
                    let count: u32 =
                        count.trim().parse().map_err(|_| LexiconError::Parse {
                            line: lineno,
                            msg: format!("invalid sense count `{}`", count.trim()),
                        })?;
                    if count < 2 {
                        return Err(LexiconError::Parse {
                            line: lineno,
                            msg: format!("sense count must be >= 2, got {count}"),
                        });
                    }
                    lex.polysemous_words.insert(lemma(word.trim()), count);
                }
                "pos" => {
                    let (word, tags) =
                        line.split_once('\t').ok_or_else(|| LexiconError::Parse {
                            line: lineno,
                            msg: "pos line must be `lemma<TAB>TAG[,TAG...]`".into(),
                        })?;
                    let mut set = BTreeSet::new();
                    for tag in tags.split(',') {
                        let tag = tag.trim();
                        let parsed =
                            PosTag::parse(tag).ok_or_else(|| LexiconError::Parse {
                                line: lineno,
                                msg: format!("unknown pos tag `{tag}`"),
                            })?;
                        set.insert(parsed);
                    }
                    lex.pos_table.entry(lemma(word.trim())).or_default().extend(set);
                }
                "wh" => {
                    if let Some(tail) = line.strip_prefix("...") {
                        lex.wh_openers.push(WhPattern::BroadTail(lemma(tail.trim())));
                    } else {
                        let phrase: Vec<String> =
                            line.split_whitespace().map(lemma).collect();
                        if phrase.is_empty() {
                            return Err(LexiconError::Parse {
                                line: lineno,
                                msg: "empty wh pattern".into(),
                            });
                        }
                        lex.wh_openers.push(WhPattern::Opener(phrase));
                    }
                }
                "coord" => {
                    lex.coordinators.insert(lemma(line));
                }
                _ => {
                    lex.prepositions.insert(lemma(line));
                }
            }
        }
        Ok(lex)
    }

    /// Content fingerprint of the source file; recorded in every profile
    /// and report so scores can be traced to the lexicon that produced them.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn is_vague(&self, lemma: &str) -> bool {
        self.vague_words.contains(lemma)
    }

    pub fn sense_count(&self, lemma: &str) -> Option<u32> {
        self.polysemous_words.get(lemma).copied()
    }

    pub fn pos_tags(&self, lemma: &str) -> Option<&BTreeSet<PosTag>> {
        self.pos_table.get(lemma)
    }

    pub fn is_coordinator(&self, lemma: &str) -> bool {
        self.coordinators.contains(lemma)
    }

    pub fn is_preposition(&self, lemma: &str) -> bool {
        self.prepositions.contains(lemma)
    }

    pub fn wh_patterns(&self) -> &[WhPattern] {
        &self.wh_openers
    }
}

/// Deterministic lemmatization: lowercase plus a fixed suffix-strip table.
///
/// Exactly one suffix is stripped, trying `ing`, `ed`, `es`, `s` in that
/// order, and only when the remaining stem keeps at least three characters.
/// A bare `s` is kept when the word ends in `ss` (glass, process). This is
/// not English morphology; it is a stable convention shared by tokens and
/// lexicon keys.
pub fn lemma(surface: &str) -> String {
    let lower = surface.to_lowercase();
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if stem.chars().count() >= 3 && !(suffix == "s" && stem.ends_with('s')) {
                return stem.to_string();
            }
        }
    }
    lower
}
