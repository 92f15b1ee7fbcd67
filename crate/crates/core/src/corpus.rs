//! Deterministic message corpora and their rendering to audio datasets.
//!
//! A corpus mixes four categories at 60/20/10/10: command templates
//! (`<VERB> arguments`), English phrases from a bigram sampler, bare command
//! sequences and random printable characters. Every message is 3-40 tokens,
//! with the target length drawn uniformly. Category counts and the 80/10/10
//! split sizes use largest-remainder apportionment, so both are within one
//! message of exact for any corpus size.
//!
//! Generation order, all from one [`RngState`] seeded with the corpus seed:
//! shuffle the category list, then per message draw the length and the text,
//! then shuffle message indices to assign splits.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::DEFAULT_SAMPLE_RATE;
use crate::channel::{apply_channel_traced, ChannelConfig, ChannelDraw};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngState};
use crate::synth::synth_message;
use crate::vocab::{build_vocab, TokenClass, TokenId, Vocab};

pub const GENERATOR_VERSION: &str = "acoustok-corpus/1";
pub const MIN_TOKENS: usize = 3;
pub const MAX_TOKENS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    CommandTemplate,
    English,
    CommandSeq,
    RandomChars,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::CommandTemplate,
        Category::English,
        Category::CommandSeq,
        Category::RandomChars,
    ];
    pub const WEIGHTS: [f64; 4] = [0.6, 0.2, 0.1, 0.1];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    pub text: String,
    pub category: Category,
    pub token_len: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub generator: String,
    pub messages: Vec<Message>,
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    seed: u64,
    generator: String,
    #[serde(flatten)]
    message: Message,
}

/// Splits `n` into integer parts proportional to `weights`
/// (largest remainder; ties go to the earlier weight).
pub fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

const PHRASES: &str = "\
the robot moves to the left side of the room. \
please bring the red box to the table. \
turn around and wait near the door. \
the battery is low so return to the dock. \
can you check the status of the arm. \
move slowly past the people in the hall. \
pick up the small tool from the shelf. \
the path ahead is clear and safe. \
stop at the next corner and look around. \
open the gate and follow the blue line. \
we need two more boxes in the lab. \
the sensor on the front is not working. \
go back to the start and try again. \
put the cup down on the white table. \
keep the speed low near the stairs. \
find the door to the kitchen and wait there. \
the floor is wet so drive with care. \
report when you reach the charging station. \
lift the arm and hold it still. \
a person is walking in front of you. \
send me a map of the area. \
i can see the target on the right. \
the light is green so you can go. \
clean the desk and then go home.";

const ARGUMENTS: &[&str] = &[
    "to", "dock", "base", "door", "lab", "hall", "left", "right", "zone", "room", "arm", "box", "gate",
    "bay", "north", "south", "east", "west", "slow", "now", "home", "a", "b", "c", "x", "y", "z",
];

/// Bigram model over the shipped phrase list.
struct Bigrams {
    starts: Vec<&'static str>,
    next: HashMap<&'static str, Vec<&'static str>>,
    by_len: HashMap<usize, Vec<&'static str>>,
}

impl Bigrams {
    fn new() -> Self {
        let mut starts = Vec::new();
        let mut next: HashMap<&str, Vec<&str>> = HashMap::new();
        let mut by_len: HashMap<usize, Vec<&str>> = HashMap::new();
        for sentence in PHRASES.split('.').map(str::trim).filter(|s| !s.is_empty()) {
            let words: Vec<&str> = sentence.split_whitespace().collect();
            starts.push(words[0]);
            for pair in words.windows(2) {
                next.entry(pair[0]).or_default().push(pair[1]);
            }
            for w in &words {
                let bucket = by_len.entry(w.len()).or_default();
                if !bucket.contains(w) {
                    bucket.push(w);
                }
            }
        }
        Self {
            starts,
            next,
            by_len,
        }
    }
}

/// Appends words until exactly `target` tokens, using `finish` for a final
/// fragment too short for another word.
struct Builder<'v> {
    vocab: &'v Vocab,
    tokens: Vec<TokenId>,
    target: usize,
}

impl<'v> Builder<'v> {
    fn room(&self) -> usize {
        self.target - self.tokens.len()
    }

    fn push_text(&mut self, s: &str) {
        self.tokens.extend(self.vocab.tokenize(s));
    }

    fn ends_with_space(&self) -> bool {
        self.tokens.last() == Some(&TokenId::SPACE)
    }

    /// Tries to add `word` with a separating space; false if it does not fit.
    fn try_word(&mut self, word: &str) -> bool {
        let sep = usize::from(!self.tokens.is_empty() && !self.ends_with_space());
        let n = self.vocab.tokenize(word).len();
        if sep + n > self.room() {
            return false;
        }
        if sep == 1 {
            self.tokens.push(TokenId::SPACE);
        }
        self.push_text(word);
        true
    }

    fn digits(&mut self, n: usize, rng: &mut RngState) {
        for _ in 0..n {
            let d = rng.below(10);
            self.push_text(&d.to_string());
        }
    }
}

fn fill_words(
    b: &mut Builder<'_>,
    rng: &mut RngState,
    words_by_len: &HashMap<usize, Vec<&'static str>>,
    tail: &str,
    mut next_word: impl FnMut(&mut RngState) -> &'static str,
) {
    while b.room() > 0 {
        let word = next_word(rng);
        if b.try_word(word) {
            continue;
        }
        let room = b.room();
        if room == 1 {
            b.push_text(tail);
        } else {
            b.tokens.push(TokenId::SPACE);
            match words_by_len.get(&(room - 1)) {
                Some(fit) => {
                    let w = *rng.choose(fit);
                    b.push_text(w);
                }
                None => b.digits(room - 1, rng),
            }
        }
    }
}

fn generate_text(category: Category, len: usize, vocab: &Vocab, bigrams: &Bigrams, rng: &mut RngState) -> String {
    let commands = vocab.ids_of_class(TokenClass::Command);
    let mut b = Builder {
        vocab,
        tokens: Vec::with_capacity(len),
        target: len,
    };
    match category {
        Category::CommandTemplate => {
            b.tokens.push(*rng.choose(&commands));
            let mut arg_len: HashMap<usize, Vec<&'static str>> = HashMap::new();
            for a in ARGUMENTS {
                arg_len.entry(a.len()).or_default().push(a);
            }
            fill_words(&mut b, rng, &arg_len, "0", |r| {
                if r.below(4) == 0 {
                    ["1", "2", "5", "10", "25", "90"][r.below(6)]
                } else {
                    *r.choose(ARGUMENTS)
                }
            });
        }
        Category::English => {
            let mut prev: Option<&'static str> = None;
            fill_words(&mut b, rng, &bigrams.by_len, ".", |r| {
                let w = match prev.and_then(|p| bigrams.next.get(p)) {
                    Some(succ) => *r.choose(succ),
                    None => *r.choose(&bigrams.starts),
                };
                prev = Some(w);
                w
            });
        }
        Category::CommandSeq => {
            for _ in 0..len {
                b.tokens.push(*rng.choose(&commands));
            }
        }
        Category::RandomChars => {
            let mut pool = vocab.ids_of_class(TokenClass::Letter);
            pool.extend(vocab.ids_of_class(TokenClass::Digit));
            pool.extend(vocab.ids_of_class(TokenClass::Punct));
            let solid = pool.len();
            pool.push(TokenId::SPACE);
            for i in 0..len {
                let edge = i == 0 || i + 1 == len;
                let k = rng.below(if edge { solid } else { pool.len() });
                b.tokens.push(pool[k]);
            }
        }
    }
    debug_assert_eq!(b.tokens.len(), len);
    vocab.detokenize(&b.tokens)
}

pub fn generate_corpus(n: usize, seed: u64) -> Result<Manifest> {
    if n < 10 {
        return Err(Error::InvalidConfig(format!("corpus needs at least 10 messages, got {n}")));
    }
    let vocab = build_vocab();
    let bigrams = Bigrams::new();
    let mut rng = RngState::new(seed);

    let mut categories = Vec::with_capacity(n);
    for (c, k) in Category::ALL.iter().zip(apportion(n, &Category::WEIGHTS)) {
        categories.extend(std::iter::repeat(*c).take(k));
    }
    rng.shuffle(&mut categories);

    let mut messages: Vec<Message> = categories
        .iter()
        .enumerate()
        .map(|(id, &category)| {
            let len = rng.range_inclusive(MIN_TOKENS as i64, MAX_TOKENS as i64) as usize;
            let text = generate_text(category, len, &vocab, &bigrams, &mut rng);
            Message {
                id: id as u64,
                token_len: vocab.tokenize(&text).len(),
                text,
                category,
                split: Split::Train,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let sizes = apportion(n, &[0.8, 0.1, 0.1]);
    for (rank, &i) in order.iter().enumerate() {
        messages[i].split = if rank < sizes[0] {
            Split::Train
        } else if rank < sizes[0] + sizes[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(Manifest {
        seed,
        generator: GENERATOR_VERSION.to_string(),
        messages,
    })
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.split == split)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.messages {
            let line = ManifestLine {
                seed: self.seed,
                generator: self.generator.clone(),
                message: m.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut seed = None;
        let mut generator = String::new();
        let mut messages = Vec::new();
        for line in f.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ManifestLine = serde_json::from_str(&line)?;
            seed.get_or_insert(parsed.seed);
            generator = parsed.generator;
            messages.push(parsed.message);
        }
        Ok(Self {
            seed: seed.unwrap_or(0),
            generator,
            messages,
        })
    }
}

/// One line of a rendered dataset's `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: u64,
    /// WAV path relative to the dataset directory.
    pub path: String,
    pub text: String,
    pub split: Split,
    pub token_ids: Vec<TokenId>,
    pub channel: ChannelDraw,
}

#[derive(Debug, Default)]
pub struct RenderSummary {
    pub written: usize,
    pub failures: Vec<(u64, String)>,
    pub index_path: PathBuf,
}

/// Renders every message to `out_dir/wav/<id>.wav` through the channel (seed
/// derived from the manifest seed and message id) and writes
/// `out_dir/index.jsonl`. Per-file failures are collected, not fatal.
pub fn render_corpus(m: &Manifest, channel: &ChannelConfig, out_dir: impl AsRef<Path>) -> Result<RenderSummary> {
    channel.validate()?;
    let out_dir = out_dir.as_ref();
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir)?;
    let vocab = build_vocab();

    let results: Vec<(u64, Result<IndexEntry>)> = m
        .messages
        .par_iter()
        .map(|msg| {
            let render = || -> Result<IndexEntry> {
                let ids = vocab.tokenize(&msg.text);
                let clean = synth_message(&ids, DEFAULT_SAMPLE_RATE)?;
                let mut rng = RngState::new(derive_seed(m.seed, msg.id));
                let (wave, draw) = apply_channel_traced(&clean, channel, &mut rng)?;
                let rel = format!("wav/{:06}.wav", msg.id);
                wave.write_wav(out_dir.join(&rel))?;
                Ok(IndexEntry {
                    id: msg.id,
                    path: rel,
                    text: msg.text.clone(),
                    split: msg.split,
                    token_ids: ids,
                    channel: draw,
                })
            };
            (msg.id, render())
        })
        .collect();

    let index_path = out_dir.join("index.jsonl");
    let mut index = std::io::BufWriter::new(std::fs::File::create(&index_path)?);
    let mut summary = RenderSummary {
        index_path: index_path.clone(),
        ..Default::default()
    };
    for (id, r) in results {
        match r {
            Ok(entry) => {
                serde_json::to_writer(&mut index, &entry)?;
                index.write_all(b"\n")?;
                summary.written += 1;
            }
            Err(e) => summary.failures.push((id, e.to_string())),
        }
    }
    index.flush()?;
    Ok(summary)
}
