//! Deterministic synthetic test collections.
//!
//! Each topic owns a disjoint pool of 20 terms and a 2-term query drawn from
//! it. Every relevant document covers one facet of its topic: a random
//! 8-term subset of the pool. Its tokens come from that facet with
//! probability `relevance_signal` and otherwise from a Zipf-like background
//! distribution over the whole vocabulary; background documents draw every
//! token from the background distribution. Pool terms sit in the
//! mid-frequency Zipf range, so a slice of background documents shares a
//! query term by chance and populates the candidate list below the relevant
//! documents.
//!
//! The facet structure is what separates the two feedback mechanisms: query
//! expansion from the top hits only covers the facets it saw there, while a
//! classifier trained on wider label windows accumulates evidence across the
//! whole pool and can also use negative evidence against common background
//! terms.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::Document;

/// Generator parameters. All counts are at least 1;
/// `relevance_signal` is the probability that a relevant document's token
/// comes from its topic pool, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_topics: usize,
    pub docs_per_topic: usize,
    pub n_background_docs: usize,
    pub vocab_size: usize,
    pub relevance_signal: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            n_topics: 50,
            docs_per_topic: 20,
            n_background_docs: 5000,
            vocab_size: 5000,
            relevance_signal: 0.7,
        }
    }
}

const POOL_SIZE: usize = 20;
const FACET_SIZE: usize = 8;
const QUERY_TERMS: usize = 2;
const DOC_LEN_MIN: usize = 50;
const DOC_LEN_MAX: usize = 70;
const ZIPF_EXPONENT: f64 = 1.0;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics < 1
            || self.docs_per_topic < 1
            || self.n_background_docs < 1
            || self.vocab_size < 1
        {
            return Err(Error::InvalidParam("all synthetic counts must be >= 1".into()));
        }
        if !(self.relevance_signal > 0.0 && self.relevance_signal <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "relevance_signal must be in (0,1], got {}",
                self.relevance_signal
            )));
        }
        if self.vocab_size > 1_000_000 {
            return Err(Error::InvalidParam("vocab_size above 1e6 is unsupported".into()));
        }
        if self.pool_start() + POOL_SIZE * self.n_topics > self.vocab_size {
            return Err(Error::InvalidParam(format!(
                "vocab too small for {} disjoint topic pools of {POOL_SIZE} terms",
                self.n_topics
            )));
        }
        Ok(())
    }

    /// Pools occupy the mid-frequency band starting here.
    fn pool_start(&self) -> usize {
        self.vocab_size / 15
    }
}

/// A generated collection: corpus, `(qid, query text)` topics, and qrels.
#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub documents: Vec<Document>,
    pub topics: Vec<(String, String)>,
    pub qrels: Qrels,
}

fn term_name(i: usize) -> String {
    format!("w{i:06}")
}

fn next_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

fn next_below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// Zipf-like sampler over 0..n via inversion of the cumulative weights.
struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    fn new(n: usize, exponent: f64) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for rank in 1..=n {
            total += 1.0 / (rank as f64).powf(exponent);
            cumulative.push(total);
        }
        for c in &mut cumulative {
            *c /= total;
        }
        ZipfTable { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = next_f64(rng);
        self.cumulative.partition_point(|&c| c < u)
    }
}

/// Generate a collection. Byte-identical output for identical specs.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticCollection> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = ZipfTable::new(spec.vocab_size, ZIPF_EXPONENT);
    let pool_start = spec.pool_start();

    let mut documents = Vec::new();
    let mut topics = Vec::new();
    let mut qrels = Qrels::new();

    let doc_len = |rng: &mut ChaCha8Rng| {
        DOC_LEN_MIN + next_below(rng, DOC_LEN_MAX - DOC_LEN_MIN + 1)
    };

    for t in 0..spec.n_topics {
        let qid = format!("q{t:03}");
        let pool: Vec<usize> = (0..POOL_SIZE).map(|j| pool_start + t * POOL_SIZE + j).collect();

        // 2 distinct query terms from the pool.
        let first = next_below(&mut rng, POOL_SIZE);
        let mut second = next_below(&mut rng, POOL_SIZE - 1);
        if second >= first {
            second += 1;
        }
        let query_terms: [usize; QUERY_TERMS] = [pool[first], pool[second]];
        let query_text = query_terms
            .iter()
            .map(|&i| term_name(i))
            .collect::<Vec<_>>()
            .join(" ");
        topics.push((qid.clone(), query_text));

        for j in 0..spec.docs_per_topic {
            let docid = format!("{qid}-r{j:04}");
            // The document's facet: a random subset of the pool.
            let mut deck: Vec<usize> = pool.clone();
            for i in 0..FACET_SIZE {
                let pick = i + next_below(&mut rng, POOL_SIZE - i);
                deck.swap(i, pick);
            }
            let facet = &deck[..FACET_SIZE];
            let len = doc_len(&mut rng);
            let mut tokens = Vec::with_capacity(len);
            for _ in 0..len {
                if next_f64(&mut rng) < spec.relevance_signal {
                    tokens.push(term_name(facet[next_below(&mut rng, FACET_SIZE)]));
                } else {
                    tokens.push(term_name(zipf.sample(&mut rng)));
                }
            }
            qrels.insert(&qid, &docid, 1);
            documents.push(Document {
                docid,
                text: tokens.join(" "),
            });
        }
    }

    for i in 0..spec.n_background_docs {
        let docid = format!("bg-{i:06}");
        let len = doc_len(&mut rng);
        let tokens: Vec<String> = (0..len).map(|_| term_name(zipf.sample(&mut rng))).collect();
        documents.push(Document {
            docid,
            text: tokens.join(" "),
        });
    }

    Ok(SyntheticCollection {
        documents,
        topics,
        qrels,
    })
}
