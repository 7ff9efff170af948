use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Document, Label};
use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "val")]
    Validation,
    #[serde(rename = "test")]
    Test,
}

/// Role of every document, aligned with the input document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    ids: Vec<String>,
    roles: Vec<Role>,
    seed: u64,
}

impl SplitAssignment {
    pub fn from_parts(ids: Vec<String>, roles: Vec<Role>, seed: u64) -> Result<Self> {
        if ids.len() != roles.len() {
            return Err(Error::dim("split ids and roles differ in length"));
        }
        Ok(SplitAssignment { ids, roles, seed })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    pub fn ids_with(&self, role: Role) -> impl Iterator<Item = &str> {
        self.ids
            .iter()
            .zip(&self.roles)
            .filter(move |(_, &r)| r == role)
            .map(|(id, _)| id.as_str())
    }
}

fn bucket_sizes(n: usize, ratios: (f64, f64, f64)) -> (usize, usize, usize) {
    let train = ((ratios.0 * n as f64).round() as usize).clamp(1, n - 2);
    let val = ((ratios.1 * n as f64).round() as usize).clamp(1, n - 1 - train);
    (train, val, n - train - val)
}

/// Seeded uniform shuffle followed by a contiguous partition into
/// `round(r₀N)` / `round(r₁N)` / remainder. Every bucket gets at least one
/// document.
pub fn split(docs: &[Document], ratios: (f64, f64, f64), seed: u64) -> Result<SplitAssignment> {
    let n = docs.len();
    if n < 3 {
        return Err(Error::data(format!(
            "need at least 3 documents to fill train/validation/test, got {n}"
        )));
    }
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split ratios must be in [0,1] and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let (n_train, n_val, _) = bucket_sizes(n, ratios);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut roles = vec![Role::Test; n];
    for (pos, &doc) in order.iter().enumerate() {
        roles[doc] = if pos < n_train {
            Role::Train
        } else if pos < n_train + n_val {
            Role::Validation
        } else {
            Role::Test
        };
    }
    Ok(SplitAssignment {
        ids: docs.iter().map(|d| d.id.clone()).collect(),
        roles,
        seed,
    })
}

/// The set of training documents whose labels the loss may see.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    visible: BTreeSet<String>,
    fraction: f64,
    seed: u64,
}

impl LabelMask {
    pub fn new(visible: BTreeSet<String>, fraction: f64, seed: u64) -> Self {
        LabelMask {
            visible,
            fraction,
            seed,
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.visible.contains(id)
    }

    pub fn ids(&self) -> &BTreeSet<String> {
        &self.visible
    }

    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Apportions `total` across `counts` proportionally, largest remainder first
/// (ties to the lower index).
fn apportion(total: usize, counts: &[usize]) -> Vec<usize> {
    let sum: usize = counts.iter().sum();
    if sum == 0 {
        return vec![0; counts.len()];
    }
    let exact: Vec<f64> = counts
        .iter()
        .map(|&c| total as f64 * c as f64 / sum as f64)
        .collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for i in order {
        if left == 0 {
            break;
        }
        if out[i] < counts[i] {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

/// Draws `round(fraction · N)` visible labels (N = whole corpus) from the
/// Train bucket, stratified by class.
pub fn make_label_mask(
    split: &SplitAssignment,
    labels: &HashMap<String, Label>,
    fraction: f64,
    seed: u64,
) -> Result<LabelMask> {
    if !(0.0..=0.8).contains(&fraction) {
        return Err(Error::config(format!(
            "label fraction must lie in [0, 0.8], got {fraction}"
        )));
    }
    let mut by_class: Vec<Vec<&str>> = vec![Vec::new(); Label::ALL.len()];
    for id in split.ids_with(Role::Train) {
        if let Some(l) = labels.get(id) {
            by_class[l.index()].push(id);
        }
    }
    let available: usize = by_class.iter().map(Vec::len).sum();
    let target = ((fraction * split.len() as f64).round() as usize).min(available);
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = apportion(target, &counts);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visible = BTreeSet::new();
    for (ids, quota) in by_class.iter_mut().zip(quotas) {
        ids.shuffle(&mut rng);
        visible.extend(ids.iter().take(quota).map(|s| s.to_string()));
    }
    Ok(LabelMask {
        visible,
        fraction,
        seed,
    })
}
