//! Sentence embedders: TF-IDF over a capped vocabulary, a token table with
//! mean pooling (randomly initialized and trainable, or loaded from a
//! word-vector file and frozen), and a precomputed per-sentence lookup that
//! stands in for frozen transformer encoders.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::dataset::{LabeledDataset, Record};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

pub const UNK_TOKEN: &str = "<unk>";

/// Token -> dense index map with document frequencies, built from the
/// training split only. The UNK pseudo-token always occupies the last index.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    doc_freq: Vec<usize>,
    num_docs: usize,
}

impl Vocabulary {
    /// Top `max_size` tokens by document frequency; ties broken by total
    /// frequency, then lexicographically. Deterministic for a given corpus.
    pub fn build(corpus: &[&[String]], max_size: usize) -> Result<Vocabulary> {
        if corpus.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot build a vocabulary from an empty corpus".into(),
            ));
        }
        if max_size == 0 {
            return Err(Error::InvalidArgument(
                "vocabulary max_size must be at least 1".into(),
            ));
        }
        let mut doc_freq: HashMap<&str, usize> = HashMap::new();
        let mut total_freq: HashMap<&str, usize> = HashMap::new();
        for sentence in corpus {
            let mut seen: HashSet<&str> = HashSet::new();
            for token in sentence.iter() {
                *total_freq.entry(token).or_insert(0) += 1;
                if seen.insert(token) {
                    *doc_freq.entry(token).or_insert(0) += 1;
                }
            }
        }
        let mut entries: Vec<(&str, usize, usize)> = doc_freq
            .iter()
            .map(|(&tok, &df)| (tok, df, total_freq[tok]))
            .collect();
        entries.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| b.2.cmp(&a.2))
                .then_with(|| a.0.cmp(b.0))
        });
        entries.truncate(max_size);

        let mut tokens: Vec<String> = entries.iter().map(|e| e.0.to_string()).collect();
        let mut freqs: Vec<usize> = entries.iter().map(|e| e.1).collect();
        tokens.push(UNK_TOKEN.to_string());
        freqs.push(0);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            index,
            tokens,
            doc_freq: freqs,
            num_docs: corpus.len(),
        })
    }

    pub fn from_dataset(ds: &LabeledDataset, max_size: usize) -> Result<Vocabulary> {
        let corpus: Vec<&[String]> = ds.records.iter().map(|r| r.tokens.as_slice()).collect();
        Vocabulary::build(&corpus, max_size)
    }

    /// Total entries including the UNK slot.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index
            .get(token)
            .copied()
            .filter(|&i| i != self.unk_index())
    }

    pub fn unk_index(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn index_or_unk(&self, token: &str) -> usize {
        self.lookup(token).unwrap_or_else(|| self.unk_index())
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }
}

/// TF-IDF with smoothed idf = ln((1+N)/(1+df)) + 1, raw term counts, and L2
/// normalization. Out-of-vocabulary tokens contribute nothing.
#[derive(Debug, Clone)]
pub struct TfIdfEmbedder {
    vocab: Vocabulary,
    idf: Vec<f64>,
}

impl TfIdfEmbedder {
    pub fn fit(vocab: Vocabulary) -> TfIdfEmbedder {
        let n = vocab.num_docs() as f64;
        let idf = (0..vocab.len())
            .map(|i| ((1.0 + n) / (1.0 + vocab.doc_freq(i) as f64)).ln() + 1.0)
            .collect();
        TfIdfEmbedder { vocab, idf }
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn embed(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for token in tokens {
            if let Some(idx) = self.vocab.lookup(token) {
                v[idx] += 1.0;
            }
        }
        for (x, &idf) in v.iter_mut().zip(&self.idf) {
            *x *= idf;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

/// Token embedding table with mean pooling. Unknown tokens map to the UNK
/// row; an empty sentence pools to the zero vector.
#[derive(Debug, Clone)]
pub struct TableEmbedder {
    vocab: Vocabulary,
    table: Matrix,
    grad: Matrix,
    trainable: bool,
    cached_rows: Option<Vec<Vec<usize>>>,
}

impl TableEmbedder {
    /// Random table on [-1, 1], trainable.
    pub fn random(vocab: Vocabulary, dim: usize, rng: &mut Rng) -> TableEmbedder {
        let mut table = Matrix::zeros(vocab.len(), dim);
        for v in table.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let grad = Matrix::zeros(vocab.len(), dim);
        TableEmbedder {
            vocab,
            table,
            grad,
            trainable: true,
            cached_rows: None,
        }
    }

    /// Load the standard text word-vector format: an optional `V d` header
    /// line, then one line per word (token followed by d reals). Rows for
    /// tokens outside the vocabulary are skipped; vocabulary tokens missing
    /// from the file get random rows. Loaded tables are frozen.
    pub fn from_word_vectors(
        path: &Path,
        vocab: Vocabulary,
        rng: &mut Rng,
    ) -> Result<TableEmbedder> {
        let text = fs::read_to_string(path)?;
        let path_str = path.display().to_string();
        let mut lines = text.lines().enumerate().peekable();

        // header detection: exactly two integer fields
        let mut dim: Option<usize> = None;
        if let Some((_, first)) = lines.peek() {
            let fields: Vec<&str> = first.split_whitespace().collect();
            if fields.len() == 2 {
                if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    dim = Some(d);
                    lines.next();
                }
            }
        }

        let mut loaded: HashMap<usize, Vec<f64>> = HashMap::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().ok_or_else(|| Error::Parse {
                path: path_str.clone(),
                line: lineno + 1,
                message: "empty line".into(),
            })?;
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        path: path_str.clone(),
                        line: lineno + 1,
                        message: format!("'{f}' is not a number"),
                    })
                })
                .collect::<Result<_>>()?;
            let d = *dim.get_or_insert(values.len());
            if values.len() != d {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: format!("expected {d} values, got {}", values.len()),
                });
            }
            if let Some(idx) = vocab.lookup(token) {
                loaded.insert(idx, values);
            }
        }
        let d = dim.ok_or_else(|| Error::Parse {
            path: path_str,
            line: 1,
            message: "file contains no vectors".into(),
        })?;
        if d == 0 {
            return Err(Error::Data("word vectors have dimension 0".into()));
        }

        let mut table = Matrix::zeros(vocab.len(), d);
        // iterate rows in index order so random fills are deterministic
        for row in 0..vocab.len() {
            match loaded.get(&row) {
                Some(values) => table.row_mut(row).copy_from_slice(values),
                None => {
                    for v in table.row_mut(row) {
                        *v = rng.uniform(-1.0, 1.0);
                    }
                }
            }
        }
        let grad = Matrix::zeros(vocab.len(), d);
        Ok(TableEmbedder {
            vocab,
            table,
            grad,
            trainable: false,
            cached_rows: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    fn rows_for(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.index_or_unk(t)).collect()
    }

    /// Mean of the token rows.
    pub fn embed(&self, tokens: &[String]) -> Vec<f64> {
        let rows = self.rows_for(tokens);
        self.pool(&rows)
    }

    fn pool(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if rows.is_empty() {
            return out;
        }
        for &r in rows {
            for (o, &v) in out.iter_mut().zip(self.table.row(r)) {
                *o += v;
            }
        }
        let scale = 1.0 / rows.len() as f64;
        for o in &mut out {
            *o *= scale;
        }
        out
    }

    /// Batch embed, remembering which rows contributed so `backward` can
    /// scatter gradients.
    pub fn embed_batch_cached(&mut self, batch: &[&Record]) -> Matrix {
        let mut out = Matrix::zeros(batch.len(), self.dim());
        let mut cached = Vec::with_capacity(batch.len());
        for (b, rec) in batch.iter().enumerate() {
            let rows = self.rows_for(&rec.tokens);
            let pooled = self.pool(&rows);
            out.row_mut(b).copy_from_slice(&pooled);
            cached.push(rows);
        }
        self.cached_rows = Some(cached);
        out
    }

    /// Scatter grad/n into each contributing row of the last cached batch.
    pub fn backward(&mut self, grad: &Matrix) -> Result<()> {
        let cached = self
            .cached_rows
            .take()
            .ok_or_else(|| Error::State("table backward called before embed".into()))?;
        if grad.rows() != cached.len() || grad.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "table grad must be {}x{}, got {}x{}",
                cached.len(),
                self.dim(),
                grad.rows(),
                grad.cols()
            )));
        }
        if !self.trainable {
            return Ok(());
        }
        for (b, rows) in cached.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let scale = 1.0 / rows.len() as f64;
            for &r in rows {
                let start = r * self.dim();
                for (c, &g) in grad.row(b).iter().enumerate() {
                    self.grad.data_mut()[start + c] += g * scale;
                }
            }
        }
        Ok(())
    }

    pub fn table_param(&mut self) -> (&mut Matrix, &mut Matrix, bool) {
        (&mut self.table, &mut self.grad, self.trainable)
    }

    pub fn zero_grads(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Per-sentence vectors loaded from file, keyed by sentence id.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl PrecomputedEmbedder {
    /// Tab-separated: sentence-id, then d reals. Duplicate ids and
    /// inconsistent dimensions are format errors.
    pub fn load(path: &Path) -> Result<PrecomputedEmbedder> {
        let text = fs::read_to_string(path)?;
        let path_str = path.display().to_string();
        let mut vectors = HashMap::new();
        let mut dim: Option<usize> = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or("").trim();
            if id.is_empty() {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: "missing sentence id".into(),
                });
            }
            let values: Vec<f64> = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path_str.clone(),
                        line: lineno + 1,
                        message: format!("'{}' is not a number", f.trim()),
                    })
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: "sentence id without vector values".into(),
                });
            }
            let d = *dim.get_or_insert(values.len());
            if values.len() != d {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: format!("expected {d} values, got {}", values.len()),
                });
            }
            if vectors.insert(id.to_string(), values).is_some() {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    line: lineno + 1,
                    message: format!("duplicate sentence id '{id}'"),
                });
            }
        }
        let dim = dim.ok_or_else(|| Error::Data("precomputed embedding file is empty".into()))?;
        Ok(PrecomputedEmbedder { vectors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lookup(&self, id: &str) -> Result<&[f64]> {
        self.vectors
            .get(id)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Data(format!("no precomputed vector for sentence id '{id}'")))
    }

    /// Fail fast: verify every record of the dataset has a vector.
    pub fn bind(&self, ds: &LabeledDataset) -> Result<()> {
        for rec in &ds.records {
            self.lookup(&rec.id)?;
        }
        Ok(())
    }
}

/// Uniform interface over the three embedder kinds.
#[derive(Debug, Clone)]
pub enum Embedder {
    TfIdf(TfIdfEmbedder),
    Table(TableEmbedder),
    Precomputed(PrecomputedEmbedder),
}

impl Embedder {
    pub fn dim(&self) -> usize {
        match self {
            Embedder::TfIdf(e) => e.dim(),
            Embedder::Table(e) => e.dim(),
            Embedder::Precomputed(e) => e.dim(),
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, Embedder::Table(e) if e.is_trainable())
    }

    /// (total, trainable) parameter counts of the embedder itself.
    pub fn count_params(&self) -> (usize, usize) {
        match self {
            Embedder::Table(e) => {
                let n = e.table().len();
                (n, if e.is_trainable() { n } else { 0 })
            }
            _ => (0, 0),
        }
    }

    pub fn embed_record(&self, rec: &Record) -> Result<Vec<f64>> {
        match self {
            Embedder::TfIdf(e) => Ok(e.embed(&rec.tokens)),
            Embedder::Table(e) => Ok(e.embed(&rec.tokens)),
            Embedder::Precomputed(e) => e.lookup(&rec.id).map(|v| v.to_vec()),
        }
    }

    /// Pure batch embedding (no gradient caching).
    pub fn embed_batch(&self, batch: &[&Record]) -> Result<Matrix> {
        let mut out = Matrix::zeros(batch.len(), self.dim());
        for (b, rec) in batch.iter().enumerate() {
            let v = self.embed_record(rec)?;
            out.row_mut(b).copy_from_slice(&v);
        }
        Ok(out)
    }

    /// Batch embedding for training; the table variant caches scatter rows.
    pub fn embed_batch_train(&mut self, batch: &[&Record]) -> Result<Matrix> {
        match self {
            Embedder::Table(e) => Ok(e.embed_batch_cached(batch)),
            other => other.embed_batch(batch),
        }
    }

    pub fn backward(&mut self, grad: &Matrix) -> Result<()> {
        match self {
            Embedder::Table(e) => e.backward(grad),
            _ => Ok(()),
        }
    }

    pub fn zero_grads(&mut self) {
        if let Embedder::Table(e) = self {
            e.zero_grads();
        }
    }

    /// Fail-fast dataset binding for the precomputed variant.
    pub fn bind(&self, ds: &LabeledDataset) -> Result<()> {
        match self {
            Embedder::Precomputed(e) => e.bind(ds),
            _ => Ok(()),
        }
    }
}
