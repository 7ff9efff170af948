//! Strict upper triangle of the pairwise WMD matrix. Pairs never evaluated
//! exactly (pruned by a lower bound) hold `+∞`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const DISTANCE_CACHE_MAGIC: &[u8; 4] = b"WMDC";

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCache {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceCache {
    pub fn new(n: usize) -> Self {
        DistanceCache {
            n,
            upper: vec![f64::INFINITY; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(i != j && j < self.n);
        // Rows 0..i contribute (n-1) + (n-2) + ... + (n-i) entries.
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(0.0);
        }
        let v = self.upper[self.offset(i, j)];
        v.is_finite().then_some(v)
    }

    pub fn set(&mut self, i: usize, j: usize, d: f64) {
        let k = self.offset(i, j);
        self.upper[k] = d;
    }

    pub fn computed(&self) -> usize {
        self.upper.iter().filter(|v| v.is_finite()).count()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DISTANCE_CACHE_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.upper {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DISTANCE_CACHE_MAGIC {
            return Err(Error::parse(0, "not a distance cache file"));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let mut cache = DistanceCache::new(u64::from_le_bytes(word) as usize);
        for v in cache.upper.iter_mut() {
            r.read_exact(&mut word)?;
            *v = f64::from_le_bytes(word);
        }
        Ok(cache)
    }
}
