//! Synthetic trace generation: templated sentences per uncertainty
//! category with output lengths drawn from per-category distributions.
//! Lexical ambiguities produce the shortest outputs, vague expressions
//! sit in the middle, open-ended and multi-part questions the longest.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::TraceRecord;
use crate::util::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Extra probability mass forced onto the longest open-ended and
    /// multi-part templates. Zero gives the everyday mixture; calibration
    /// traces use a positive boost so the offload threshold is fitted
    /// against the heavy end of the input spectrum.
    pub tail_boost: f64,
}

impl SynthConfig {
    pub fn new(n: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            n,
            seed,
            tail_boost: 0.0,
        }
    }
}

#[derive(Clone, Copy)]
enum Category {
    Neutral,
    Structural,
    Syntactic,
    Semantic,
    Vague,
    OpenEnded,
    MultiPart,
}

/// Everyday mixture: short mundane turns dominate, comprehensive
/// open-ended and multi-part questions are the long tail. Weights are in
/// hundredths.
const CATEGORY_WEIGHTS: [(Category, u32); 7] = [
    (Category::Neutral, 28),
    (Category::Structural, 11),
    (Category::Syntactic, 11),
    (Category::Semantic, 11),
    (Category::Vague, 14),
    (Category::OpenEnded, 13),
    (Category::MultiPart, 12),
];

fn draw_category(rng: &mut ChaCha12Rng) -> Category {
    let total: u32 = CATEGORY_WEIGHTS.iter().map(|(_, w)| w).sum();
    let mut roll = rng.gen_range(0..total);
    for (category, weight) in CATEGORY_WEIGHTS {
        if roll < weight {
            return category;
        }
        roll -= weight;
    }
    unreachable!("weights cover the range")
}

const NEUTRAL_VERBS: [&str; 5] = ["walked", "drove", "cycled", "hurried", "returned"];
const NEUTRAL_PLACES: [&str; 5] = ["store", "office", "market", "library", "kitchen"];
const NEUTRAL_TIMES: [&str; 4] = ["yesterday", "today", "earlier", "recently"];
const TAGGED_NOUNS: [&str; 8] = [
    "john", "boy", "man", "woman", "girl", "park", "street", "garden",
];
const PREPS: [&str; 4] = ["in", "with", "near", "under"];
const MULTITAG: [&str; 5] = ["duck", "watch", "train", "play", "run"];
const POLY: [&str; 8] = [
    "bats", "banks", "trunks", "monitors", "springs", "seals", "bolts", "waves",
];
const VAGUE: [&str; 8] = [
    "history", "art", "nature", "life", "culture", "future", "society", "music",
];
const TOPICS: [&str; 6] = [
    "poverty", "pollution", "migration", "inflation", "automation", "urbanization",
];
const LIST_ITEMS: [&str; 6] = ["behavior", "diet", "size", "habitat", "color", "speed"];
const ANIMALS: [&str; 5] = ["cats", "dogs", "birds", "fish", "mice"];

fn pick<'a>(rng: &mut ChaCha12Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// Box-Muller standard normal draw.
fn normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn out_len(rng: &mut ChaCha12Rng, mean: f64, sd: f64) -> u32 {
    (mean + sd * normal(rng)).round().max(1.0) as u32
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Generates `n` records with ids 0..n. Category, phrasing, and output
/// length all come from sub-streams of the seed, so the trace is fully
/// reproducible.
pub fn synth_trace(cfg: &SynthConfig) -> Vec<TraceRecord> {
    assert!((0.0..=1.0).contains(&cfg.tail_boost));
    let mut rng = substream(cfg.seed, "synth");
    (0..cfg.n)
        .map(|id| {
            let boosted = cfg.tail_boost > 0.0 && rng.gen_bool(cfg.tail_boost);
            let (category, level) = if boosted {
                let cat = if rng.gen_bool(0.5) {
                    Category::OpenEnded
                } else {
                    Category::MultiPart
                };
                (cat, 3)
            } else {
                (draw_category(&mut rng), rng.gen_range(1..=3u32))
            };
            let (text, mean, sd) = sentence(&mut rng, category, level);
            TraceRecord {
                id: id as u64,
                text,
                out_len: out_len(&mut rng, mean, sd),
                deadline: None,
                malicious: false,
            }
        })
        .collect()
}

fn sentence(rng: &mut ChaCha12Rng, category: Category, level: u32) -> (String, f64, f64) {
    match category {
        Category::Neutral => {
            let text = format!(
                "I {} to the {} {}.",
                pick(rng, &NEUTRAL_VERBS),
                pick(rng, &NEUTRAL_PLACES),
                pick(rng, &NEUTRAL_TIMES),
            );
            (text, 18.0, 5.0)
        }
        Category::Structural => {
            let n1 = capitalize(pick(rng, &TAGGED_NOUNS));
            let n2 = pick(rng, &TAGGED_NOUNS);
            let n3 = pick(rng, &TAGGED_NOUNS);
            let text = if level <= 1 {
                format!("{} saw the {} {} the {}.", n1, n2, pick(rng, &PREPS), n3)
            } else {
                format!(
                    "{} saw the {} {} the {} {} the telescope.",
                    n1,
                    n2,
                    pick(rng, &PREPS),
                    n3,
                    pick(rng, &PREPS),
                )
            };
            (text, 22.0 + 5.0 * level as f64, 8.0)
        }
        Category::Syntactic => {
            let text = match level {
                1 => format!("Her {} was loud.", pick(rng, &MULTITAG)),
                2 => format!("Rice flies like {}.", pick(rng, &NEUTRAL_PLACES)),
                _ => format!(
                    "I saw her {} fly near the {}.",
                    pick(rng, &MULTITAG),
                    pick(rng, &MULTITAG),
                ),
            };
            (text, 20.0 + 6.0 * level as f64, 8.0)
        }
        Category::Semantic => {
            let text = if level <= 2 {
                format!("What's the best way to deal with {}?", pick(rng, &POLY))
            } else {
                format!(
                    "What's the best way to deal with {} near the {}?",
                    pick(rng, &POLY),
                    pick(rng, &POLY),
                )
            };
            (text, 26.0 + 7.0 * level as f64, 10.0)
        }
        Category::Vague => {
            let v1 = pick(rng, &VAGUE);
            let text = match level {
                1 => format!("Tell me about the {v1}."),
                2 => format!("Tell me about the {} of {}.", v1, pick(rng, &VAGUE)),
                _ => format!(
                    "Tell me everything about the {} of {}.",
                    v1,
                    pick(rng, &VAGUE),
                ),
            };
            (text, 34.0 + 10.0 * level as f64, 14.0)
        }
        Category::OpenEnded => {
            let text = match level {
                1 => format!("Why do {} {}?", pick(rng, &ANIMALS), pick(rng, &LIST_ITEMS)),
                2 => format!(
                    "What are the causes of {} in {}?",
                    pick(rng, &TOPICS),
                    pick(rng, &TOPICS),
                ),
                _ => format!(
                    "What are the causes and consequences of {} in developing countries?",
                    pick(rng, &TOPICS),
                ),
            };
            (text, 60.0 + 18.0 * level as f64, 34.0)
        }
        Category::MultiPart => {
            let a = pick(rng, &ANIMALS);
            let b = pick(rng, &ANIMALS);
            let text = match level {
                1 => format!(
                    "Do {} {}? Do {} {}?",
                    a,
                    pick(rng, &LIST_ITEMS),
                    b,
                    pick(rng, &LIST_ITEMS),
                ),
                _ => format!(
                    "How do {} and {} differ in {}, {}, and {}?",
                    a,
                    b,
                    pick(rng, &LIST_ITEMS),
                    pick(rng, &LIST_ITEMS),
                    pick(rng, &LIST_ITEMS),
                ),
            };
            (text, 60.0 + 18.0 * level as f64, 34.0)
        }
    }
}
