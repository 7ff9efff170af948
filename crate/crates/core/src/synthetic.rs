//! Self-contained two-cluster fixture: one-word documents whose word vectors
//! come from two isotropic Gaussians, labelled by cluster.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{DatasetSchema, Label};

pub const SYNTHETIC_DOCS: usize = 200;
pub const SYNTHETIC_DIM: usize = 8;
/// Distance between the two cluster centres in units of the per-axis σ.
pub const SYNTHETIC_SEPARATION: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFixture {
    /// Headed CSV with `id,title,body,label`.
    pub csv: String,
    /// GloVe-format text, one word per document.
    pub glove: String,
    pub schema: DatasetSchema,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

pub fn schema() -> DatasetSchema {
    DatasetSchema {
        id_column: "id".into(),
        title_column: "title".into(),
        body_column: "body".into(),
        label_column: "label".into(),
        label_map: BTreeMap::from([("FAKE".into(), Label::Fake), ("REAL".into(), Label::Real)]),
    }
}

/// Token for document `i`; letters only so tokenizing and stemming keep it.
pub fn word(i: usize) -> String {
    let mut s = String::from("syn");
    let mut x = i;
    for _ in 0..4 {
        s.push((b'a' + (x % 26) as u8) as char);
        x /= 26;
    }
    s.push('q');
    s
}

/// `n` documents alternating Real/Fake, σ = 1, centres at `∓separation/2`
/// on the first axis.
pub fn generate(n: usize, dim: usize, separation: f64, seed: u64) -> SyntheticFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("id,title,body,label\n");
    let mut glove = String::new();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Real } else { Label::Fake };
        let offset = if label == Label::Real { -0.5 } else { 0.5 } * separation;
        let p: Vec<f64> = (0..dim)
            .map(|d| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if d == 0 {
                    z + offset
                } else {
                    z
                }
            })
            .collect();
        let w = word(i);
        let raw = if label == Label::Fake { "FAKE" } else { "REAL" };
        csv.push_str(&format!("doc{i:04},{w},{w},{raw}\n"));
        glove.push_str(&w);
        for v in &p {
            glove.push_str(&format!(" {v}"));
        }
        glove.push('\n');
        points.push(p);
        labels.push(label);
    }
    SyntheticFixture {
        csv,
        glove,
        schema: schema(),
        points,
        labels,
    }
}

pub fn default_fixture(seed: u64) -> SyntheticFixture {
    generate(SYNTHETIC_DOCS, SYNTHETIC_DIM, SYNTHETIC_SEPARATION, seed)
}
