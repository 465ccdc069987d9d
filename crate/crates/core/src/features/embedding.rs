//! Product embeddings from user interaction sequences.
//!
//! Each user's interactions, ordered by time, form a sentence of product
//! tokens; a skip-gram model with negative sampling is trained on them.
//! Consecutive interactions with the same product collapse into one token
//! whose implicit score is the sum of the event scores, and each
//! (center, context) update is scaled by `sqrt(score_c * score_o) / 5`, capped at 1.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClickstreamEvent, ProductId};

const MAX_SCORE: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dimension: 16,
            epochs: 5,
            window: 3,
            negatives: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub vectors: BTreeMap<ProductId, Vec<f64>>,
    pub training_meta: TrainingMeta,
}

impl EmbeddingTable {
    pub fn get(&self, id: &ProductId) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    /// Cosine similarity of two products, `None` if either is missing.
    pub fn cosine(&self, a: &ProductId, b: &ProductId) -> Option<f64> {
        Some(cosine(self.get(a)?, self.get(b)?))
    }

    /// Writes one line per product: the id followed by its `dimension` reals.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for (id, v) in &self.vectors {
            write!(w, "{id}").map_err(io)?;
            for x in v {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads the format written by [`EmbeddingTable::write_text`]. Training
    /// metadata is not stored in the text file and comes back zeroed.
    pub fn read_text(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = BTreeMap::new();
        let mut dimension = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(id) = parts.next() else { continue };
            let v: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::domain(format!("{}:{}: {e}", path.display(), n + 1)))?;
            if *dimension.get_or_insert(v.len()) != v.len() {
                return Err(Error::domain(format!(
                    "{}:{}: inconsistent embedding dimension",
                    path.display(),
                    n + 1
                )));
            }
            vectors.insert(ProductId::new(id), v);
        }
        Ok(EmbeddingTable {
            dimension: dimension.unwrap_or(0),
            vectors,
            training_meta: TrainingMeta {
                epochs: 0,
                window: 0,
                negatives: 0,
                seed: 0,
            },
        })
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

struct Token {
    product: usize,
    score: f64,
}

fn sentences(clickstream: &[ClickstreamEvent]) -> (Vec<ProductId>, Vec<Vec<Token>>) {
    let mut events: Vec<&ClickstreamEvent> = clickstream
        .iter()
        .filter(|e| e.event_type.implicit_score() > 0.0)
        .collect();
    events.sort_by(|a, b| {
        (&a.user_id, a.timestamp, &a.product_id, a.event_type).cmp(&(
            &b.user_id,
            b.timestamp,
            &b.product_id,
            b.event_type,
        ))
    });

    let mut raw: Vec<Vec<(&ProductId, f64)>> = Vec::new();
    let mut current_user: Option<&str> = None;
    for e in events {
        if current_user != Some(e.user_id.as_str()) {
            raw.push(Vec::new());
            current_user = Some(&e.user_id);
        }
        let sentence = raw.last_mut().expect("sentence pushed above");
        let score = e.event_type.implicit_score();
        match sentence.last_mut() {
            Some((p, s)) if *p == &e.product_id => *s += score,
            _ => sentence.push((&e.product_id, score)),
        }
    }
    raw.retain(|s| s.len() >= 2);

    let vocab: Vec<ProductId> = raw
        .iter()
        .flatten()
        .map(|(p, _)| (*p).clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let sentences = raw
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(p, score)| Token {
                    product: vocab.binary_search(p).expect("product in vocab"),
                    score,
                })
                .collect()
        })
        .collect();
    (vocab, sentences)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram embeddings with negative sampling. Deterministic for a fixed seed.
pub fn train_product_embeddings(
    clickstream: &[ClickstreamEvent],
    config: &EmbeddingConfig,
) -> Result<EmbeddingTable> {
    if config.dimension == 0 {
        return Err(Error::domain("embedding dimension must be positive"));
    }
    let (vocab, sentences) = sentences(clickstream);
    if sentences.is_empty() {
        return Err(Error::domain(
            "degenerate corpus: no user has two or more interactions",
        ));
    }
    if vocab.len() < 2 {
        return Err(Error::domain("degenerate corpus: fewer than two products"));
    }

    let dim = config.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..vocab.len() * dim)
        .map(|_| rng.random_range(-half..half))
        .collect();
    let mut output = vec![0.0; vocab.len() * dim];

    // unigram^0.75 cumulative table for negative sampling
    let mut counts = vec![0.0f64; vocab.len()];
    for s in &sentences {
        for t in s {
            counts[t.product] += 1.0;
        }
    }
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for c in &counts {
        acc += c.powf(0.75);
        cumulative.push(acc);
    }
    let total_mass = acc;

    let total_tokens: usize = sentences.iter().map(Vec::len).sum();
    let total_steps = (config.epochs * total_tokens).max(1) as f64;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut grad = vec![0.0; dim];

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let sentence = &sentences[si];
            for (pos, center) in sentence.iter().enumerate() {
                let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(sentence.len());
                for (cpos, context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    let weight = ((center.score * context.score).sqrt() / MAX_SCORE).min(1.0);
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let ci = center.product * dim;
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context.product, 1.0)
                        } else {
                            let u = rng.random_range(0.0..total_mass);
                            let t = cumulative.partition_point(|&c| c <= u).min(vocab.len() - 1);
                            if t == context.product {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let ti = target * dim;
                        let dot: f64 = (0..dim).map(|j| input[ci + j] * output[ti + j]).sum();
                        let g = (label - sigmoid(dot)) * lr * weight;
                        for j in 0..dim {
                            grad[j] += g * output[ti + j];
                            output[ti + j] += g * input[ci + j];
                        }
                    }
                    for j in 0..dim {
                        input[ci + j] += grad[j];
                    }
                }
            }
        }
    }

    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::Internal("embedding training diverged".into()));
    }
    let vectors = vocab
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    Ok(EmbeddingTable {
        dimension: dim,
        vectors,
        training_meta: TrainingMeta {
            epochs: config.epochs,
            window: config.window,
            negatives: config.negatives,
            seed: config.seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventType;
    use chrono::NaiveDate;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn ev(user: &str, product: &str, t: u32, kind: EventType) -> ClickstreamEvent {
        ClickstreamEvent {
            user_id: user.into(),
            product_id: product.into(),
            event_type: kind,
            timestamp: NaiveDate::from_ymd_opt(2024, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap()
                + chrono::Duration::seconds(i64::from(t)),
        }
    }

    /// Every user touches A and B; the other products come from a wide pool.
    fn co_interaction_corpus(seed: u64) -> Vec<ClickstreamEvent> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for u in 0..50 {
            let user = format!("u{u}");
            let mut items = vec!["A".to_string(), "B".to_string()];
            for _ in 0..3 {
                items.push(format!("X{}", rng.random_range(0..200)));
            }
            items.shuffle(&mut rng);
            for (t, p) in items.iter().enumerate() {
                out.push(ev(&user, p, t as u32, EventType::Click));
            }
        }
        out
    }

    #[test]
    fn co_interacted_products_are_closer() {
        let corpus = co_interaction_corpus(11);
        let cfg = EmbeddingConfig {
            epochs: 30,
            seed: 3,
            ..Default::default()
        };
        let table = train_product_embeddings(&corpus, &cfg).unwrap();
        let random = table
            .vectors
            .keys()
            .find(|k| k.as_str().starts_with('X'))
            .unwrap()
            .clone();
        let ab = table.cosine(&"A".into(), &"B".into()).unwrap();
        let ar = table.cosine(&"A".into(), &random).unwrap();
        assert!(ab > ar, "cos(A,B)={ab} cos(A,R)={ar}");
    }

    #[test]
    fn deterministic_under_seed() {
        let corpus = co_interaction_corpus(5);
        let cfg = EmbeddingConfig {
            epochs: 1,
            seed: 9,
            ..Default::default()
        };
        let a = train_product_embeddings(&corpus, &cfg).unwrap();
        let b = train_product_embeddings(&corpus, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn requested_dimension() {
        let corpus = co_interaction_corpus(5);
        let table = train_product_embeddings(&corpus, &EmbeddingConfig::default()).unwrap();
        assert_eq!(table.dimension, 16);
        assert!(table.vectors.values().all(|v| v.len() == 16));
    }

    #[test]
    fn degenerate_corpus_rejected() {
        // one interaction per user, and list impressions do not count
        let corpus = vec![
            ev("u1", "A", 0, EventType::Click),
            ev("u2", "B", 0, EventType::Order),
            ev("u2", "C", 1, EventType::List),
        ];
        let err = train_product_embeddings(&corpus, &EmbeddingConfig::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate"));
        // repeated events on one product collapse into a single token
        let corpus = vec![
            ev("u1", "A", 0, EventType::Click),
            ev("u1", "A", 1, EventType::Cart),
        ];
        assert!(train_product_embeddings(&corpus, &EmbeddingConfig::default()).is_err());
    }

    #[test]
    fn text_round_trip() {
        let corpus = co_interaction_corpus(1);
        let table = train_product_embeddings(&corpus, &EmbeddingConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        table.write_text(&path).unwrap();
        let back = EmbeddingTable::read_text(&path).unwrap();
        assert_eq!(back.vectors, table.vectors);
        assert_eq!(back.dimension, 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn norms_stay_bounded(seed in 0u64..1000, users in 5usize..30, products in 3usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kinds = [EventType::Click, EventType::Pdp, EventType::Cart, EventType::Order];
            let mut corpus = Vec::new();
            for u in 0..users {
                for t in 0..rng.random_range(2..12u32) {
                    let p = format!("P{}", rng.random_range(0..products));
                    corpus.push(ev(&format!("u{u}"), &p, t, kinds[rng.random_range(0..4)]));
                }
            }
            let cfg = EmbeddingConfig { epochs: 20, seed, ..Default::default() };
            if let Ok(table) = train_product_embeddings(&corpus, &cfg) {
                for v in table.vectors.values() {
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    prop_assert!(norm.is_finite() && norm < 10.0, "norm {norm}");
                }
            }
        }
    }
}
