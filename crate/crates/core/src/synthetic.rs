//! Seeded synthetic corpora for tests, benches and demos.

use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Record, Task};
use crate::layout::Scheme;

const SUBREDDITS: [&str; 2] = ["cancer", "breastcancer"];
const WORDS: [&str; 24] = [
    "i", "my", "the", "was", "feel", "so", "today", "mom", "chemo", "scan", "doctor", "help",
    "thank", "you", "hope", "scared", "news", "surgery", "week", "family", "love", "we", "it's",
    "ok",
];

fn sentence(rng: &mut impl Rng, tokens: usize) -> String {
    (0..tokens)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// One record with `tokens` words and plausible attribute values.
pub fn record(rng: &mut impl Rng, id: usize, tokens: usize) -> Record {
    let mut r = Record::from_text(format!("s{id:05}"), sentence(rng, tokens));
    r.author = format!("user{}", rng.random_range(0..500));
    r.created_utc = rng.random_range(1_483_228_800..1_546_300_800);
    r.score = rng.random_range(-5..200);
    r.subreddit = SUBREDDITS.choose(rng).expect("non-empty").to_string();
    r.label = ["Emotional", "Informational", "None"].choose(rng).expect("non-empty").to_string();
    r.id = format!("t3_{id:x}");
    r
}

/// Records with token counts drawn uniformly from `tokens` and random labels
/// on all six tasks.
pub fn random_corpus(n: usize, tokens: RangeInclusive<usize>, seed: u64) -> Vec<Record> {
    assert!(*tokens.start() >= 1, "records need at least one token");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(tokens.clone());
            let mut r = record(&mut rng, i, len);
            r.task_labels = Some(std::array::from_fn(|_| rng.random_range(0..=1)));
            r
        })
        .collect()
}

/// Token counts for the two classes of the planted signal: short sentences
/// occupy the top rows only, long ones fill most of the grid.
pub const SHORT_TOKENS: RangeInclusive<usize> = 3..=12;
pub const LONG_TOKENS: RangeInclusive<usize> = 30..=42;

/// Balanced corpus where `task` is 1 exactly for long sentences. The other
/// tasks carry random labels.
pub fn planted_corpus(n: usize, task: Task, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let range = if label == 1 { LONG_TOKENS } else { SHORT_TOKENS };
            let len = rng.random_range(range);
            let mut r = record(&mut rng, i, len);
            let mut labels: [u8; 6] = std::array::from_fn(|_| rng.random_range(0..=1));
            labels[task.index()] = label;
            r.task_labels = Some(labels);
            r
        })
        .collect()
}

/// `per_class` short and `per_class` long sentences, labeled on every task.
pub fn separable_fixture(per_class: usize, seed: u64) -> Vec<Record> {
    let mut recs = planted_corpus(2 * per_class, Task::EmotionDisclosure, seed);
    for r in &mut recs {
        let l = r.task_label(Task::EmotionDisclosure).expect("labeled");
        r.task_labels = Some([l; 6]);
    }
    recs
}

/// The three worked examples from the design-option illustrations, paired
/// with the scheme each one demonstrates.
pub fn figure_examples() -> [(Scheme, Record); 3] {
    let one = Record::from_text(
        "fig_one",
        "If it were me, and I cared about a person, I would absolutely read their book to show \
         support, but I can also understand struggling to get stalted on/through something I \
         have absolutely no interest in.",
    );
    let mut two = Record::from_text(
        "fig_two",
        "I think it's safe to say that we've all been there - that realization that this isn't \
         what we signed up for - and that life will never be the same again",
    );
    two.author = "Laseyguy".into();
    two.wordcount = 32;
    two.created_utc = 1_532_634_562; // 2018-07-26 19:49:22
    two.subreddit = "offmychest".into();
    two.score = 2426;
    // the caption gives 102 although the text is 152 characters long
    two.nchar = 102;
    two.label = "husband".into();
    let mut three = Record::from_text(
        "fig_three",
        "The best thing that you can do is keep at it don't give up hope, and try not to lose \
         sight of what is important - you health and the health of your loved ones (and kity)!",
    );
    three.subreddit = "CasualConversation".into();
    three.wordcount = 37;
    three.score = 2;
    three.label = "girlfriend".into();
    [(Scheme::One, one), (Scheme::Two, two), (Scheme::Three, three)]
}
