//! Pre-trained word vectors and mean-vector document embeddings.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Word vectors in the whitespace-separated GloVe text layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    vectors: Vec<f64>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vocab: HashMap::new(),
            words: Vec::new(),
            vectors: Vec::new(),
            duplicates: 0,
        }
    }

    /// Adds a word; returns `false` (and keeps the existing vector) if the
    /// word is already present.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::dim(format!(
                "vector for `{word}` has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!("vector for `{word}` is not finite")));
        }
        if self.vocab.contains_key(word) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.vocab.insert(word.to_owned(), self.words.len());
        self.words.push(word.to_owned());
        self.vectors.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of repeated words skipped during loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    #[inline]
    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vector(i))
    }

    /// Multiplies every vector by `s`.
    pub fn scaled(&self, s: f64) -> EmbeddingTable {
        let mut out = self.clone();
        out.vectors.iter_mut().for_each(|v| *v *= s);
        out
    }
}

/// Parses `word v₁ … v_dim` lines. Blank lines are skipped.
pub fn load_glove<R: BufRead>(reader: R, expected_dim: usize) -> Result<EmbeddingTable> {
    load_glove_filtered(reader, expected_dim, None)
}

/// Like [`load_glove`] but only stores words in `keep`. Every line is still
/// checked for the right number of fields.
pub fn load_glove_filtered<R: BufRead>(
    reader: R,
    expected_dim: usize,
    keep: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    if expected_dim == 0 {
        return Err(Error::config("embedding dimension must be positive"));
    }
    let mut table = EmbeddingTable::new(expected_dim);
    let mut buf = Vec::with_capacity(expected_dim);
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut fields = line.split_ascii_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        if keep.is_some_and(|k| !k.contains(word)) {
            let count = fields.count();
            if count != expected_dim {
                return Err(Error::parse(
                    lineno,
                    format!("`{word}` has {count} values, expected {expected_dim}"),
                ));
            }
            continue;
        }
        buf.clear();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(lineno, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value `{f}`")));
            }
            buf.push(v);
        }
        if buf.len() != expected_dim {
            return Err(Error::parse(
                lineno,
                format!(
                    "`{word}` has {} values, expected {expected_dim}",
                    buf.len()
                ),
            ));
        }
        table.insert(word, &buf)?;
    }
    if table.duplicates > 0 {
        log::warn!("{} duplicate words ignored (first kept)", table.duplicates);
    }
    Ok(table)
}

/// Writes the table back in GloVe text layout, shortest round-trip floats.
pub fn write_glove<W: Write>(mut w: W, table: &EmbeddingTable) -> Result<()> {
    for i in 0..table.len() {
        write!(w, "{}", table.word(i))?;
        for v in table.vector(i) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Mean of the document's in-vocabulary token vectors, with multiplicity.
/// `None` when no token is in the vocabulary.
pub fn doc_vector(doc: &Document, table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut count = 0usize;
    for tok in &doc.tokens {
        if let Some(v) = table.get(tok) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    let n = count as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Some(sum)
}

/// Row `i` is the mean vector of the `i`-th retained document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVectorMatrix {
    pub ids: Vec<String>,
    pub features: Matrix,
    /// Ids of documents with no in-vocabulary token.
    pub dropped: Vec<String>,
}

pub fn doc_vectors(docs: &[Document], table: &EmbeddingTable) -> DocVectorMatrix {
    let mut ids = Vec::with_capacity(docs.len());
    let mut data = Vec::with_capacity(docs.len() * table.dim());
    let mut dropped = Vec::new();
    for d in docs {
        match doc_vector(d, table) {
            Some(v) => {
                ids.push(d.id.clone());
                data.extend(v);
            }
            None => dropped.push(d.id.clone()),
        }
    }
    let features = Matrix::from_vec(ids.len(), table.dim(), data).expect("row-major fill");
    DocVectorMatrix {
        ids,
        features,
        dropped,
    }
}

pub const DOC_VECTOR_MAGIC: &[u8; 4] = b"DVEC";

/// `magic | N u64 LE | dim u64 LE | N·dim f64 LE`.
pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    w.write_all(DOC_VECTOR_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Matrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DOC_VECTOR_MAGIC {
        return Err(Error::parse(0, "not a document-vector file"));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Matrix::from_vec(rows, cols, data)
}

/// Symmetric window co-occurrence counts over the distinct tokens of a
/// sentence, rows in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    pub tokens: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub window: usize,
}

impl CooccurrenceMatrix {
    pub fn get(&self, a: &str, b: &str) -> u64 {
        let pos = |t: &str| self.tokens.iter().position(|x| x == t);
        match (pos(a), pos(b)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }
}

/// Each unordered position pair within `window` adds one count to both
/// `[a][b]` and `[b][a]`. Pairs of the same token are not counted.
pub fn cooccurrence<S: AsRef<str>>(tokens: &[S], window: usize) -> Result<CooccurrenceMatrix> {
    if window == 0 {
        return Err(Error::config("co-occurrence window must be at least 1"));
    }
    let mut vocab: Vec<String> = Vec::new();
    let mut index = HashMap::new();
    let ids: Vec<usize> = tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            *index.entry(t.to_owned()).or_insert_with(|| {
                vocab.push(t.to_owned());
                vocab.len() - 1
            })
        })
        .collect();
    let v = vocab.len();
    let mut counts = vec![vec![0u64; v]; v];
    for i in 0..ids.len() {
        for j in i + 1..ids.len().min(i + window + 1) {
            let (a, b) = (ids[i], ids[j]);
            if a != b {
                counts[a][b] += 1;
                counts[b][a] += 1;
            }
        }
    }
    Ok(CooccurrenceMatrix {
        tokens: vocab,
        counts,
        window,
    })
}
