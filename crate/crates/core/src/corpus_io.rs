//! Corpus loading, tokenisation, vocabulary, splitting and the JSON
//! snapshot format.
//!
//! Text input is UTF-8 with one document per line. Tokens are lowercased
//! runs of alphanumeric characters; the vocabulary is ordered by first
//! occurrence. Empty lines are kept as empty documents.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prior_process::Partition;
use crate::rng::RandomStream;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    /// Tokens with fewer corpus occurrences are dropped.
    pub min_count: usize,
    /// Drop a built-in list of English function words.
    pub stopwords: bool,
    /// Apply the English Snowball stemmer.
    pub stem: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            min_count: 1,
            stopwords: false,
            stem: false,
        }
    }
}

impl TokenizerConfig {
    pub fn tokenize(&self, line: &str) -> Vec<String> {
        let stemmer = self
            .stem
            .then(|| rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English));
        line.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| !(self.stopwords && STOPWORDS.contains(&t.as_str())))
            .map(|t| match &stemmer {
                Some(s) => s.stem(&t).into_owned(),
                None => t,
            })
            .collect()
    }
}

/// Bidirectional word <-> id map with contiguous ids `0..W`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if ids.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary word `{w}`")));
            }
        }
        Ok(Self { words, ids })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }
}

/// Ordered documents of token ids over a fixed vocabulary. Document order
/// is significant: the uniform-process model conditions on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Vec<u32>>,
    vocabulary: Vocabulary,
}

/// JSON form of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub vocabulary: Vec<String>,
    pub documents: Vec<Vec<u32>>,
    /// SHA-256 of the source text when loaded from a file, otherwise of the
    /// snapshot content.
    pub sha256: String,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Corpus {
    pub fn new(documents: Vec<Vec<u32>>, vocabulary: Vocabulary) -> Result<Self> {
        let w = vocabulary.len();
        if let Some(&bad) = documents.iter().flatten().find(|&&t| t as usize >= w) {
            return Err(Error::UnknownWord {
                word: bad,
                vocab_size: w,
            });
        }
        Ok(Self {
            documents,
            vocabulary,
        })
    }

    /// Tokenises in-memory text, one document per line.
    pub fn from_text(text: &str, config: &TokenizerConfig) -> Self {
        Self::from_lines(text.lines(), config)
    }

    fn from_lines<'a>(lines: impl Iterator<Item = &'a str>, config: &TokenizerConfig) -> Self {
        let tokenized: Vec<Vec<String>> = lines.map(|l| config.tokenize(l)).collect();
        let mut freq: HashMap<&str, usize> = HashMap::new();
        if config.min_count > 1 {
            for t in tokenized.iter().flatten() {
                *freq.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let keep = |t: &str| config.min_count <= 1 || freq[t] >= config.min_count;
        let mut vocabulary = Vocabulary::default();
        let documents = tokenized
            .iter()
            .map(|doc| {
                doc.iter()
                    .filter(|t| keep(t))
                    .map(|t| vocabulary.intern(t))
                    .collect()
            })
            .collect();
        Self {
            documents,
            vocabulary,
        }
    }

    pub fn documents(&self) -> &[Vec<u32>] {
        &self.documents
    }

    pub fn document(&self, d: usize) -> &[u32] {
        &self.documents[d]
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    /// Documents at `indices`, in that order, over the same vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            vocabulary: self.vocabulary.clone(),
        }
    }

    /// Content hash over vocabulary and documents; identifies the corpus in
    /// checkpoints.
    pub fn content_hash(&self) -> String {
        let body = serde_json::to_vec(&(&self.vocabulary.words, &self.documents))
            .expect("corpus serialises");
        hex_digest(&body)
    }

    /// One line per document, words separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let words: Vec<&str> = doc
                .iter()
                .map(|&t| self.vocabulary.word(t).expect("ids validated"))
                .collect();
            out.push_str(&words.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_snapshot(&self) -> CorpusSnapshot {
        CorpusSnapshot {
            vocabulary: self.vocabulary.words.clone(),
            documents: self.documents.clone(),
            sha256: self.content_hash(),
        }
    }

    pub fn from_snapshot(snapshot: CorpusSnapshot) -> Result<Self> {
        Self::new(snapshot.documents, Vocabulary::from_words(snapshot.vocabulary)?)
    }

    /// Maps extra text (one document per line) onto this corpus's
    /// vocabulary, appending unseen words. Returns this corpus over the
    /// extended vocabulary (existing ids unchanged) and the new documents.
    /// `min_count` is not applied to the extra text.
    pub fn extend_with_text(&self, text: &str, config: &TokenizerConfig) -> (Corpus, Corpus) {
        let mut vocabulary = self.vocabulary.clone();
        let extra: Vec<Vec<u32>> = text
            .lines()
            .map(|l| {
                config
                    .tokenize(l)
                    .iter()
                    .map(|t| vocabulary.intern(t))
                    .collect()
            })
            .collect();
        (
            Corpus {
                documents: self.documents.clone(),
                vocabulary: vocabulary.clone(),
            },
            Corpus {
                documents: extra,
                vocabulary,
            },
        )
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn split_utf8_lines<'a>(path: &Path, bytes: &'a [u8]) -> Result<Vec<&'a str>> {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.strip_suffix(b"\r").unwrap_or(line);
            std::str::from_utf8(line).map_err(|_| Error::InvalidUtf8 {
                path: path.to_path_buf(),
                line: i + 1,
            })
        })
        .collect()
}

/// Loads a plain-text corpus and returns it with the SHA-256 of the file.
pub fn load_corpus_with_hash(path: &Path, config: &TokenizerConfig) -> Result<(Corpus, String)> {
    let bytes = read_file(path)?;
    let lines = split_utf8_lines(path, &bytes)?;
    if lines.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    Ok((Corpus::from_lines(lines.into_iter(), config), hex_digest(&bytes)))
}

/// SHA-256 of a file's bytes, as lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    read_file(path).map(|bytes| hex_digest(&bytes))
}

pub fn load_corpus(path: &Path, config: &TokenizerConfig) -> Result<Corpus> {
    load_corpus_with_hash(path, config).map(|(c, _)| c)
}

pub fn load_snapshot(path: &Path) -> Result<Corpus> {
    let bytes = read_file(path)?;
    let corpus = Corpus::from_snapshot(serde_json::from_slice(&bytes)?)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    Ok(corpus)
}

pub fn save_snapshot(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(&corpus.to_snapshot())?;
    json.push('\n');
    fs::write(path, json).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a `.json` snapshot or, for any other extension, a text corpus.
pub fn load_any(path: &Path, config: &TokenizerConfig) -> Result<Corpus> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => load_snapshot(path),
        _ => load_corpus(path, config),
    }
}

/// Seeded shuffle, then the first `round(train_fraction * D)` shuffled
/// documents form the training side. Both sides keep the original relative
/// order of their documents and share the full vocabulary.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let d = corpus.num_documents();
    let n_train = (train_fraction * d as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit { side: "train" });
    }
    if n_train >= d {
        return Err(Error::EmptySplit { side: "test" });
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut RandomStream::from_seed(seed));
    let (mut train, mut test) = (order[..n_train].to_vec(), order[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((corpus.subset(&train), corpus.subset(&test)))
}

/// Parameters of the synthetic clustered corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_clusters: usize,
    pub docs_per_cluster: usize,
    pub vocab_per_cluster: usize,
    pub doc_length: usize,
    /// Share of each cluster's word distribution spread uniformly over the
    /// whole vocabulary.
    pub overlap: f64,
    pub seed: u64,
}

/// Generates a corpus whose clusters own disjoint vocabulary blocks.
///
/// Cluster `c` owns word ids `c * V .. (c + 1) * V`; its word distribution
/// is `(1 - overlap)` times Dirichlet(1) weights on that block plus
/// `overlap / W` on every word. Documents are shuffled, and the returned
/// partition gives each document's generating cluster in corpus order.
pub fn synth_corpus(config: &SynthConfig) -> Result<(Corpus, Partition)> {
    let SynthConfig {
        num_clusters,
        docs_per_cluster,
        vocab_per_cluster,
        doc_length,
        overlap,
        seed,
    } = *config;
    if num_clusters == 0 || docs_per_cluster == 0 || vocab_per_cluster == 0 || doc_length == 0 {
        return Err(Error::InvalidArgument("synthetic corpus sizes must be positive".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidArgument(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    let mut rng = RandomStream::from_seed(seed);
    let w = num_clusters * vocab_per_cluster;
    let samplers: Vec<WeightedIndex<f64>> = (0..num_clusters)
        .map(|c| {
            let raw: Vec<f64> = (0..vocab_per_cluster).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = raw.iter().sum();
            let mut weights = vec![overlap / w as f64; w];
            for (i, r) in raw.iter().enumerate() {
                weights[c * vocab_per_cluster + i] += (1.0 - overlap) * r / total;
            }
            WeightedIndex::new(&weights).expect("positive weights")
        })
        .collect();
    let mut labels: Vec<usize> = (0..num_clusters)
        .flat_map(|c| std::iter::repeat_n(c, docs_per_cluster))
        .collect();
    labels.shuffle(&mut rng);
    let documents = labels
        .iter()
        .map(|&c| {
            (0..doc_length)
                .map(|_| samplers[c].sample(&mut rng) as u32)
                .collect()
        })
        .collect();
    let words = (0..w).map(|i| format!("w{i}")).collect();
    let corpus = Corpus::new(documents, Vocabulary::from_words(words)?)?;
    Ok((corpus, Partition::from_labels(&labels)))
}
