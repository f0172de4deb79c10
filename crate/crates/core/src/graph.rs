//! Random graph instances, stored as packed missing-link rows.
//!
//! The generation convention: each unordered pair carries an edge with
//! probability `p`, independently; the bit we store is the *missing-link*
//! indicator (1 = no edge), which is what every energy in this crate sums.

use crate::configuration::Configuration;
use crate::error::{CavityError, Result};
use crate::numeric::ln_binomial;
use crate::scalar::{from_count, Scalar};
use crate::seeding;
use rand::Rng;
use std::io::{BufRead, Write};

#[derive(Clone)]
pub struct Graph {
    n: usize,
    /// Row i: bit j set iff the pair {i,j} is a missing link. Symmetric,
    /// diagonal kept zero.
    missing: Vec<Vec<u64>>,
    p: f64,
    seed: u64,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Graph(n={}, p={}, seed={}, missing={})",
            self.n,
            self.p,
            self.seed,
            self.missing_count()
        )
    }
}

impl Graph {
    /// Erdős–Rényi instance: every unordered pair gets an edge with
    /// probability `p`. Deterministic in `seed`. Accepts the degenerate
    /// `p = 1` (complete graph); rejects `p <= 0` and `p > 1`.
    pub fn generate(n: usize, p: f64, seed: u64) -> Result<Graph> {
        if n < 2 {
            return Err(CavityError::invalid(format!("need n >= 2, got {n}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(CavityError::invalid(format!("need p in (0, 1], got {p}")));
        }
        let mut g = Graph::empty(n, p, seed);
        let mut rng = seeding::stream_rng(seed, 0);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() >= p {
                    g.set_missing(i, j);
                }
            }
        }
        Ok(g)
    }

    fn empty(n: usize, p: f64, seed: u64) -> Graph {
        let words = n.div_ceil(64);
        Graph {
            n,
            missing: vec![vec![0u64; words]; n],
            p,
            seed,
        }
    }

    fn set_missing(&mut self, i: usize, j: usize) {
        debug_assert_ne!(i, j);
        self.missing[i][j / 64] |= 1 << (j % 64);
        self.missing[j][i / 64] |= 1 << (i % 64);
    }

    /// Two internally edgeless k-blocks joined completely, remaining
    /// vertices isolated. Under the pair dynamics at low temperature and
    /// small field this instance locks into the two-block alternation, which
    /// is what the oscillation tests drive.
    pub fn planted_oscillator(n: usize, k: usize) -> Result<Graph> {
        if 2 * k > n {
            return Err(CavityError::invalid(format!(
                "need 2k <= n, got k = {k}, n = {n}"
            )));
        }
        let mut g = Graph::empty(n, 0.5, 0);
        let block = |v: usize| -> usize {
            if v < k {
                0
            } else if v < 2 * k {
                1
            } else {
                2
            }
        };
        for i in 0..n {
            for j in i + 1..n {
                let (bi, bj) = (block(i), block(j));
                // Edge present only between the two blocks.
                let edge = bi != bj && bi < 2 && bj < 2;
                if !edge {
                    g.set_missing(i, j);
                }
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Missing-link indicator for an unordered pair.
    #[inline]
    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        debug_assert_ne!(i, j);
        self.missing[i][j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        !self.is_missing(i, j)
    }

    /// Packed missing row for vertex i.
    #[inline]
    pub fn missing_row(&self, i: usize) -> &[u64] {
        &self.missing[i]
    }

    /// Number of missing links between vertex i and the masked set
    /// (bit i of `mask` is ignored because the diagonal is never set).
    #[inline]
    pub fn missing_to_mask(&self, i: usize, mask: &[u64]) -> usize {
        self.missing[i]
            .iter()
            .zip(mask)
            .map(|(&r, &m)| (r & m).count_ones() as usize)
            .sum()
    }

    /// Adjacency mask of vertex i over the first n bits: complement of the
    /// missing row minus the diagonal.
    pub fn adjacency_row(&self, i: usize) -> Vec<u64> {
        let words = self.n.div_ceil(64);
        let mut row = vec![0u64; words];
        for (w, slot) in row.iter_mut().enumerate() {
            *slot = !self.missing[i][w];
        }
        // Clear the diagonal and the tail past n.
        row[i / 64] &= !(1u64 << (i % 64));
        let tail = self.n % 64;
        if tail != 0 {
            row[words - 1] &= (1u64 << tail) - 1;
        }
        row
    }

    /// Total number of missing links (unordered).
    pub fn missing_count(&self) -> usize {
        let total: usize = self
            .missing
            .iter()
            .map(|row| row.iter().map(|w| w.count_ones() as usize).sum::<usize>())
            .sum();
        total / 2
    }

    /// Does the subset induce a complete subgraph?
    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        for (a, &i) in vertices.iter().enumerate() {
            for &j in &vertices[a + 1..] {
                if self.is_missing(i, j) {
                    return false;
                }
            }
        }
        true
    }

    /// Missing links inside a subset (unordered count).
    pub fn missing_within(&self, vertices: &[usize]) -> usize {
        let mut m = 0;
        for (a, &i) in vertices.iter().enumerate() {
            for &j in &vertices[a + 1..] {
                m += self.is_missing(i, j) as usize;
            }
        }
        m
    }

    /// Text format: line 1 `n p seed`, then n-1 rows of missing bits
    /// J_{i,j} for j > i. Round-trips bit-exactly.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {} {}", self.n, self.p, self.seed)?;
        for i in 0..self.n - 1 {
            let mut line = String::with_capacity(self.n - i - 1);
            for j in i + 1..self.n {
                line.push(if self.is_missing(i, j) { '1' } else { '0' });
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Graph> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CavityError::Parse("graph header: missing n".into()))?;
        let p: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CavityError::Parse("graph header: missing p".into()))?;
        let seed: u64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CavityError::Parse("graph header: missing seed".into()))?;
        if n < 2 {
            return Err(CavityError::Parse(format!("graph header: bad n = {n}")));
        }
        let mut g = Graph::empty(n, p, seed);
        let mut line = String::new();
        for i in 0..n - 1 {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(CavityError::Parse(format!("graph row {i}: missing")));
            }
            let bits = line.trim_end();
            if bits.len() != n - i - 1 {
                return Err(CavityError::Parse(format!(
                    "graph row {i}: expected {} bits, got {}",
                    n - i - 1,
                    bits.len()
                )));
            }
            for (off, ch) in bits.chars().enumerate() {
                match ch {
                    '1' => g.set_missing(i, i + 1 + off),
                    '0' => {}
                    _ => return Err(CavityError::Parse(format!("graph row {i}: bad bit {ch:?}"))),
                }
            }
        }
        Ok(g)
    }

    /// Lattice-gas energy of a subset: each missing pair inside counts twice
    /// (the ordered double-sum convention), minus the chemical term.
    pub fn grand_hamiltonian<T: Scalar>(&self, subset: &Configuration, h: T) -> T {
        let pairs = from_count::<T>(2 * self.missing_within(subset.vertices()));
        pairs - h * from_count::<T>(subset.len())
    }
}

/// The classical location of the clique number: `center` +- 3/2 traps it
/// asymptotically; `lower`/`upper` widen that by nothing (upper-lower = 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CliqueWindow<T> {
    pub center: T,
    pub lower: T,
    pub upper: T,
    pub base: T,
}

/// Mean r-clique count (in logs) and the clique-number window.
///
/// `log_expected_count = ln C(n,r) + C(r,2) ln p`; the window center is
/// `2 log_b n - 2 log_b log_b n + 2 log_b(e/2) + 1` with `b = 1/p`.
pub fn clique_statistics<T: Scalar>(n: usize, p: T, r: usize) -> Result<(T, CliqueWindow<T>)> {
    if r < 1 || r > n {
        return Err(CavityError::invalid(format!(
            "need 1 <= r <= n, got r = {r}, n = {n}"
        )));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(CavityError::invalid(
            "clique statistics need p strictly inside (0, 1)".to_string(),
        ));
    }
    let two = T::one() + T::one();
    let log_expected =
        ln_binomial(from_count::<T>(n), r) + from_count::<T>(r * (r - 1) / 2) * p.ln();
    let ln_b = -p.ln();
    let log_b = |x: T| x.ln() / ln_b;
    let nf = from_count::<T>(n);
    let center = two * log_b(nf) - two * log_b(log_b(nf)) + two * log_b(T::E() / two) + T::one();
    let half_width = (two + T::one()) / two;
    let window = CliqueWindow {
        center,
        lower: center - half_width,
        upper: center + half_width,
        base: ln_b.exp(),
    };
    Ok((log_expected, window))
}
