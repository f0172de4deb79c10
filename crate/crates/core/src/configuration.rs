//! Fixed-size vertex subsets: the state space of the dynamics.

use crate::error::{CavityError, Result};
use rand::Rng;
use std::collections::BTreeSet;
use std::fmt;

/// A k-subset of the vertex set in canonical form: strictly increasing
/// 0-based indices. Two configurations are equal iff their supports are.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    vertices: Vec<usize>,
}

impl Configuration {
    /// Build from any vertex list; sorts and rejects duplicates / out-of-range.
    pub fn new(mut vertices: Vec<usize>, n: usize) -> Result<Self> {
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(CavityError::invalid("duplicate vertex in configuration"));
        }
        if vertices.last().is_some_and(|&v| v >= n) {
            return Err(CavityError::invalid(format!(
                "vertex out of range for n = {n}"
            )));
        }
        Ok(Configuration { vertices })
    }

    /// Caller guarantees sortedness and range; used on hot paths.
    pub(crate) fn from_sorted_unchecked(vertices: Vec<usize>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Configuration { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// |self ∩ other| by merging the sorted supports.
    pub fn overlap(&self, other: &Configuration) -> usize {
        let (mut i, mut j, mut q) = (0, 0, 0);
        while i < self.vertices.len() && j < other.vertices.len() {
            match self.vertices[i].cmp(&other.vertices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    q += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        q
    }

    /// Membership bitmask, one u64 word per 64 vertices.
    pub fn bitmask(&self, n: usize) -> Vec<u64> {
        let mut mask = vec![0u64; n.div_ceil(64)];
        for &v in &self.vertices {
            mask[v / 64] |= 1 << (v % 64);
        }
        mask
    }

    /// Uniform random k-subset of {0..n-1} (Floyd's algorithm).
    pub fn random<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k > n {
            return Err(CavityError::invalid(format!("k = {k} exceeds n = {n}")));
        }
        let mut chosen = BTreeSet::new();
        for j in n - k..n {
            let t = rng.random_range(0..=j);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        Ok(Configuration {
            vertices: chosen.into_iter().collect(),
        })
    }

    /// One-line wire form: space-separated, sorted, 1-based.
    pub fn serialize(&self) -> String {
        self.vertices
            .iter()
            .map(|v| (v + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse the wire form back (1-based on disk, 0-based in memory).
    pub fn parse(line: &str, n: usize) -> Result<Self> {
        let mut vertices = Vec::new();
        for tok in line.split_whitespace() {
            let v: usize = tok
                .parse()
                .map_err(|_| CavityError::Parse(format!("bad vertex token {tok:?}")))?;
            if v == 0 {
                return Err(CavityError::Parse("vertex indices are 1-based".into()));
            }
            vertices.push(v - 1);
        }
        Configuration::new(vertices, n)
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.serialize())
    }
}

/// Lexicographic enumeration of all k-subsets of {0..n-1}.
pub struct SubsetIter {
    n: usize,
    k: usize,
    current: Option<Vec<usize>>,
}

impl SubsetIter {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        SubsetIter { n, k, current }
    }
}

impl Iterator for SubsetIter {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        let cur = self.current.as_mut()?;
        let out = Configuration::from_sorted_unchecked(cur.clone());
        // Advance to the lexicographic successor.
        let mut i = self.k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] != i + self.n - self.k {
                cur[i] += 1;
                for j in i + 1..self.k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Number of k-subsets, guarded: errors out when it exceeds `cap`.
pub fn subset_count_guarded(n: usize, k: usize, cap: u128) -> Result<u128> {
    let count = crate::numeric::choose_exact(n as u64, k as u64);
    if count > cap {
        return Err(CavityError::BudgetExceeded {
            what: "configuration-space enumeration",
            needed: count,
            cap,
        });
    }
    Ok(count)
}
