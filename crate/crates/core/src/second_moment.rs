//! Second moment of the partition function over the disorder.
//!
//! Two independent routes are kept side by side: a brute-force sum over
//! configuration quadruples with per-pair disorder expectations, and the
//! overlap-cell decomposition whose exponent splits into the two annealed
//! energy terms plus a coupling correction. The two must agree exactly;
//! everything downstream (the coupling bound, the entropy bound, the
//! polyhedron maximization, the variance-ratio experiment) builds on the
//! decomposition.

use crate::error::{CavityError, Result};
use crate::numeric::{choose_exact, ln_factorial, ln_factorial_ext, log_add, log_sum};
use crate::scalar::{from_count, from_int, Scalar};
use crate::seeding;
use crate::thermo::{overlap_energy, pair_exponent, Deriv, ModelParams};
use rand::Rng;
use rayon::prelude::*;

/// Membership class of a vertex relative to one configuration pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRegion {
    /// In the first configuration only.
    S,
    /// In both.
    I,
    /// In the second only.
    T,
    /// In neither.
    C,
}

pub const PAIR_REGIONS: [PairRegion; 4] =
    [PairRegion::S, PairRegion::I, PairRegion::T, PairRegion::C];

impl PairRegion {
    #[inline]
    fn first(self) -> u8 {
        matches!(self, PairRegion::S | PairRegion::I) as u8
    }

    #[inline]
    fn second(self) -> u8 {
        matches!(self, PairRegion::I | PairRegion::T) as u8
    }
}

/// Disorder multiplicity of an unordered pair with one vertex in each
/// region: the ordered incidence count of the missing link.
#[inline]
pub fn pair_multiplicity(a: PairRegion, b: PairRegion) -> u8 {
    a.first() * b.second() + b.first() * a.second()
}

/// Multiplicity for two configuration pairs: each coordinate contributes
/// its own incidence count.
#[inline]
pub fn quad_multiplicity(a: (PairRegion, PairRegion), b: (PairRegion, PairRegion)) -> u8 {
    pair_multiplicity(a.0, b.0) + pair_multiplicity(a.1, b.1)
}

/// The nine double-support classes, row-major over (unprimed, primed)
/// in (S, I, T) order.
pub fn class_regions(r: usize) -> (PairRegion, PairRegion) {
    const ROWS: [PairRegion; 3] = [PairRegion::S, PairRegion::I, PairRegion::T];
    (ROWS[r / 3], ROWS[r % 3])
}

/// Intersection sizes of the double-support classes, with both overlaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapCell {
    pub k: usize,
    pub q: usize,
    pub q_prime: usize,
    /// Row-major class sizes g_1..g_9.
    pub g: [usize; 9],
}

impl OverlapCell {
    pub fn new(k: usize, q: usize, q_prime: usize, g: [usize; 9]) -> Result<Self> {
        let cell = OverlapCell { k, q, q_prime, g };
        cell.validate()?;
        Ok(cell)
    }

    fn validate(&self) -> Result<()> {
        let (k, q, qp) = (self.k, self.q, self.q_prime);
        if q > k || qp > k {
            return Err(CavityError::invalid("overlap exceeds k".to_string()));
        }
        let row = |r: usize| self.g[3 * r] + self.g[3 * r + 1] + self.g[3 * r + 2];
        let col = |c: usize| self.g[c] + self.g[c + 3] + self.g[c + 6];
        let row_caps = [k - q, q, k - q];
        let col_caps = [k - qp, qp, k - qp];
        for (r, &cap) in row_caps.iter().enumerate() {
            if row(r) > cap {
                return Err(CavityError::invalid(format!(
                    "row {r} sum {} exceeds {cap}",
                    row(r)
                )));
            }
        }
        for (c, &cap) in col_caps.iter().enumerate() {
            if col(c) > cap {
                return Err(CavityError::invalid(format!(
                    "column {c} sum {} exceeds {cap}",
                    col(c)
                )));
            }
        }
        Ok(())
    }

    pub fn g_total(&self) -> usize {
        self.g.iter().sum()
    }

    /// Complement class sizes: parts of each support block outside the other
    /// pair's support, in (S, I, T, S', I', T') order.
    pub fn complements(&self) -> [usize; 6] {
        let row = |r: usize| self.g[3 * r] + self.g[3 * r + 1] + self.g[3 * r + 2];
        let col = |c: usize| self.g[c] + self.g[c + 3] + self.g[c + 6];
        [
            self.k - self.q - row(0),
            self.q - row(1),
            self.k - self.q - row(2),
            self.k - self.q_prime - col(0),
            self.q_prime - col(1),
            self.k - self.q_prime - col(2),
        ]
    }
}

/// Coupling correction of a cell, straight from the indicator definitions:
/// for every vertex pair inside the double-support classes, the gap between
/// the factorized and the joint pair exponents.
pub fn psi<T: Scalar>(cell: &OverlapCell, beta: T, p: T) -> T {
    let d = |m1: u8, m2: u8| -> T {
        pair_exponent(from_count::<T>(m1 as usize) * beta, p, Deriv::Value)
            + pair_exponent(from_count::<T>(m2 as usize) * beta, p, Deriv::Value)
            - pair_exponent(from_count::<T>((m1 + m2) as usize) * beta, p, Deriv::Value)
    };
    let two = T::one() + T::one();
    let mut acc = T::zero();
    for r in 0..9 {
        let (ar, br) = class_regions(r);
        for s in 0..9 {
            let (as_, bs) = class_regions(s);
            let m1 = pair_multiplicity(ar, as_);
            let m2 = pair_multiplicity(br, bs);
            if m1 == 0 || m2 == 0 {
                continue;
            }
            let ordered_pairs = if r == s {
                from_count::<T>(cell.g[r]) * from_count::<T>(cell.g[r].saturating_sub(1))
            } else {
                from_count::<T>(cell.g[r]) * from_count::<T>(cell.g[s])
            };
            acc += ordered_pairs * d(m1, m2);
        }
    }
    acc / two
}

/// Closed upper bound on the coupling correction in terms of (g, g_5) only.
pub fn psi_bar<T: Scalar>(k: usize, g: usize, g5: usize, beta: T, p: T) -> T {
    let two = T::one() + T::one();
    let four = two + two;
    let f2 = pair_exponent(two * beta, p, Deriv::Value);
    let f4 = pair_exponent(four * beta, p, Deriv::Value);
    let b = pair_exponent(beta, p, Deriv::Value) + f2
        - pair_exponent(two * beta + beta, p, Deriv::Value);
    let g5f = from_count::<T>(g5);
    let lead = g5f * (g5f - T::one()) / two * (two * f2 - f4);
    let kg = from_count::<T>(k.min(g));
    lead + b * (kg + g5f) * (from_count::<T>(g) - g5f) / two
}

/// Coupling correction and its bound for one cell.
pub fn psi_and_bound<T: Scalar>(cell: &OverlapCell, beta: T, p: T) -> (T, T) {
    let value = psi(cell, beta, p);
    let bound = psi_bar(cell.k, cell.g_total(), cell.g[4], beta, p);
    (value, bound)
}

/// Entropy bound of the collapsed decomposition:
/// `(4k-q-q'-g) ln n - ln((q-g)!(q'-g)!) - 2 ln((k-q-g)!(k-q'-g)!) + 8`,
/// factorials under the m! = 1 for m <= 1 convention.
pub fn theta2_bar<T: Scalar>(q: usize, q_prime: usize, g: usize, n: T, k: usize) -> T {
    theta2_bar_ln(q, q_prime, g, n.ln(), k)
}

pub fn theta2_bar_ln<T: Scalar>(q: usize, q_prime: usize, g: usize, ln_n: T, k: usize) -> T {
    let (qi, qpi, gi, ki) = (q as i64, q_prime as i64, g as i64, k as i64);
    from_int::<T>(4 * ki - qi - qpi - gi) * ln_n
        - ln_factorial_ext::<T>(qi - gi)
        - ln_factorial_ext::<T>(qpi - gi)
        - (ln_factorial_ext::<T>(ki - qi - gi) + ln_factorial_ext::<T>(ki - qpi - gi))
            * (T::one() + T::one())
        + from_count::<T>(8)
}

/// How to evaluate ln E[Z^2].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondMomentMode {
    /// Quadruple sum with per-pair disorder expectations.
    Brute,
    /// Overlap-cell decomposition with exact multinomials.
    Decomposition,
}

/// ln E[Z^2] by either route; the two agree to rounding and serve as each
/// other's oracle.
pub fn second_moment<T: Scalar>(
    params: &ModelParams<T>,
    mode: SecondMomentMode,
    budget: u128,
) -> Result<T> {
    match mode {
        SecondMomentMode::Brute => second_moment_brute(params, budget),
        SecondMomentMode::Decomposition => second_moment_decomposition(params, budget),
    }
}

fn second_moment_brute<T: Scalar>(params: &ModelParams<T>, budget: u128) -> Result<T> {
    let (n, k) = (params.n, params.k);
    if n > 64 {
        return Err(CavityError::invalid(
            "brute quadruple sum is limited to n <= 64".to_string(),
        ));
    }
    let count = choose_exact(n as u64, k as u64);
    let quads = count
        .saturating_mul(count)
        .saturating_mul(count)
        .saturating_mul(count);
    if quads > budget {
        return Err(CavityError::BudgetExceeded {
            what: "configuration quadruples",
            needed: quads,
            cap: budget,
        });
    }
    // Pair exponents for multiplicities 0..4; f(0) = 0.
    let f: Vec<T> = (0..=4)
        .map(|m| pair_exponent(from_count::<T>(m) * params.beta, params.p, Deriv::Value))
        .collect();
    let masks: Vec<u64> = crate::configuration::SubsetIter::new(n, k)
        .map(|c| c.vertices().iter().fold(0u64, |acc, &v| acc | 1 << v))
        .collect();
    let beta_h = params.beta * params.h();
    let terms: Vec<T> = masks
        .par_iter()
        .map(|&sig| {
            let mut local = Vec::with_capacity(masks.len() * masks.len());
            for &tau in &masks {
                let q = (sig & tau).count_ones() as usize;
                for &sig_p in &masks {
                    for &tau_p in &masks {
                        let qp = (sig_p & tau_p).count_ones() as usize;
                        let mut exponent = -beta_h * from_count::<T>(2 * k - q - qp);
                        for i in 0..n {
                            let si = (sig >> i & 1) as u8;
                            let ti = (tau >> i & 1) as u8;
                            let spi = (sig_p >> i & 1) as u8;
                            let tpi = (tau_p >> i & 1) as u8;
                            for j in i + 1..n {
                                let m = si * (tau >> j & 1) as u8
                                    + (sig >> j & 1) as u8 * ti
                                    + spi * (tau_p >> j & 1) as u8
                                    + (sig_p >> j & 1) as u8 * tpi;
                                exponent -= f[m as usize];
                            }
                        }
                        local.push(exponent);
                    }
                }
            }
            log_sum(&local)
        })
        .collect();
    Ok(log_sum(&terms))
}

fn second_moment_decomposition<T: Scalar>(params: &ModelParams<T>, budget: u128) -> Result<T> {
    let (n, k) = (params.n, params.k);
    let cells = ((k + 1) as u128).pow(11);
    if cells > budget {
        return Err(CavityError::BudgetExceeded {
            what: "overlap-cell enumeration",
            needed: cells,
            cap: budget,
        });
    }
    let ln_n_fact = ln_factorial::<T>(n);
    let mut acc = T::neg_infinity();
    for q in 0..=k {
        for qp in 0..=k {
            let phi2 = overlap_energy(params, q) + overlap_energy(params, qp);
            // Row slacks (S, I, T) and column slacks (S', I', T').
            let rows = [k - q, q, k - q];
            let cols = [k - qp, qp, k - qp];
            let mut g = [0usize; 9];
            enumerate_cells(&mut g, 0, rows, cols, &mut |g| {
                let cell = OverlapCell {
                    k,
                    q,
                    q_prime: qp,
                    g: *g,
                };
                let total = cell.g_total();
                let outside = 4 * k - q - qp - total;
                if outside > n {
                    return;
                }
                let comp = cell.complements();
                let mut ln_m = ln_n_fact - ln_factorial::<T>(n - outside);
                for &x in g.iter().chain(comp.iter()) {
                    ln_m -= ln_factorial::<T>(x);
                }
                let term = ln_m + phi2 + psi(&cell, params.beta, params.p);
                acc = log_add(acc, term);
            });
        }
    }
    Ok(acc)
}

/// Visit every class-size vector satisfying the row/column constraints.
fn enumerate_cells(
    g: &mut [usize; 9],
    r: usize,
    rows: [usize; 3],
    cols: [usize; 3],
    visit: &mut impl FnMut(&[usize; 9]),
) {
    if r == 9 {
        visit(g);
        return;
    }
    let row_used: usize = (0..r).filter(|&s| s / 3 == r / 3).map(|s| g[s]).sum();
    let col_used: usize = (0..r).filter(|&s| s % 3 == r % 3).map(|s| g[s]).sum();
    let cap = (rows[r / 3] - row_used).min(cols[r % 3] - col_used);
    for v in 0..=cap {
        g[r] = v;
        enumerate_cells(g, r + 1, rows, cols, visit);
    }
    g[r] = 0;
}

/// Uniform-slack sampler of feasible cells: q and q' uniform, then each
/// class filled uniformly within its remaining row/column slack.
pub fn sample_feasible_cell<R: Rng>(k: usize, rng: &mut R) -> OverlapCell {
    let q = rng.random_range(0..=k);
    let qp = rng.random_range(0..=k);
    let rows = [k - q, q, k - q];
    let cols = [k - qp, qp, k - qp];
    let mut row_used = [0usize; 3];
    let mut col_used = [0usize; 3];
    let mut g = [0usize; 9];
    for r in 0..9 {
        let cap = (rows[r / 3] - row_used[r / 3]).min(cols[r % 3] - col_used[r % 3]);
        let v = rng.random_range(0..=cap);
        g[r] = v;
        row_used[r / 3] += v;
        col_used[r % 3] += v;
    }
    OverlapCell {
        k,
        q,
        q_prime: qp,
        g,
    }
}

/// Result of the polyhedron maximization at q = q'.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyhedronMax<T> {
    pub q: usize,
    pub g: usize,
    pub g5: usize,
    pub value: T,
}

/// Maximize the bound exponent `theta2_bar + 2 phi + psi_bar` over the
/// integer polyhedron {0 <= q <= k, g5 <= g <= 2k - q, 0 <= g5 <= q}, with
/// an optional floor on g (the variance route needs g >= 2).
pub fn polyhedron_max<T: Scalar>(
    params: &ModelParams<T>,
    ln_n: T,
    g_min: usize,
) -> PolyhedronMax<T> {
    let k = params.k;
    let mut best = PolyhedronMax {
        q: 0,
        g: 0,
        g5: 0,
        value: T::neg_infinity(),
    };
    for q in 0..=k {
        let phi2 = overlap_energy(params, q) * (T::one() + T::one());
        for g in g_min..=(2 * k - q) {
            let entropy = theta2_bar_ln(q, q, g, ln_n, k) + phi2;
            for g5 in 0..=q.min(g) {
                let value = entropy + psi_bar(k, g, g5, params.beta, params.p);
                if value > best.value {
                    best = PolyhedronMax { q, g, g5, value };
                }
            }
        }
    }
    best
}

/// One row of the variance-ratio experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfAveragingRow<T> {
    pub k: usize,
    pub n: usize,
    pub replicas: usize,
    pub log_mean_z: T,
    pub variance_ratio: T,
    /// The target scale n^{-2} the ratio is measured against.
    pub n_ref: T,
}

/// Sample the partition function over fresh disorder at sizes n(k) chosen so
/// that k ln(1/p)/ln n stays at `c_bar`, and report var Z / (mean Z)^2.
/// Exact Z per graph: a normalizer per configuration, summed in logs
/// (at infinite beta: the count of zero-energy pairs).
#[allow(clippy::too_many_arguments)]
pub fn self_averaging_experiment<T: Scalar>(
    p: T,
    c_bar: T,
    beta: T,
    htilde: T,
    ks: &[usize],
    replicas: usize,
    seed: u64,
    enumeration_budget: u128,
) -> Result<Vec<SelfAveragingRow<T>>> {
    if replicas < 2 {
        return Err(CavityError::invalid("need at least 2 replicas".to_string()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let n = ModelParams::<T>::n_for(k, p, c_bar);
        crate::configuration::subset_count_guarded(n, k, enumeration_budget)?;
        let params = ModelParams::new(n, k, p, beta, htilde)?;
        let log_zs: Vec<T> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let graph_seed = seeding::mix(seed, ((ki as u64) << 32) | r as u64);
                let graph = crate::graph::Graph::generate(n, p.as_f64(), graph_seed)
                    .expect("validated parameters");
                log_partition(&graph, &params).expect("validated parameters")
            })
            .collect();
        let shift = log_zs
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b));
        let zs: Vec<T> = log_zs.iter().map(|&lz| (lz - shift).exp()).collect();
        let rf = from_count::<T>(replicas);
        let mean = zs.iter().copied().fold(T::zero(), |a, b| a + b) / rf;
        let var = zs
            .iter()
            .map(|&z| (z - mean) * (z - mean))
            .fold(T::zero(), |a, b| a + b)
            / (rf - T::one());
        let nf = from_count::<T>(n);
        rows.push(SelfAveragingRow {
            k,
            n,
            replicas,
            log_mean_z: shift + mean.ln(),
            variance_ratio: var / (mean * mean),
            n_ref: (nf * nf).recip(),
        });
    }
    Ok(rows)
}

/// ln Z of one instance: sum of step normalizers over all configurations.
/// At infinite beta this degenerates to the log count of zero-energy pairs.
pub fn log_partition<T: Scalar>(graph: &crate::graph::Graph, params: &ModelParams<T>) -> Result<T> {
    let h = params.h();
    let zero_temp = params.beta == T::infinity();
    let mut acc = T::neg_infinity();
    for sigma in crate::configuration::SubsetIter::new(graph.n(), params.k) {
        let table = crate::hamiltonian::cavity_fields(graph, &sigma, h);
        let contribution = if zero_temp {
            let zt = crate::sampler::ZeroTemperatureStep::new(&table);
            if zt.min_energy == T::zero() {
                zt.log_count
            } else {
                T::neg_infinity()
            }
        } else {
            crate::sampler::log_z_sigma(&table, params.beta)?
        };
        acc = log_add(acc, contribution);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Upper triangle of the published multiplicity table over the sixteen
    /// composite classes, row-major in (SS', SI', ST', SC', IS', II', IT',
    /// IC', TS', TI', TT', TC', CS', CI', CT', CC') order.
    const QUAD_TABLE: [[u8; 16]; 16] = [
        [0, 1, 1, 0, 1, 2, 2, 1, 1, 2, 2, 1, 0, 1, 1, 0],
        [1, 2, 1, 0, 2, 3, 2, 1, 2, 3, 2, 1, 1, 2, 1, 0],
        [1, 1, 0, 0, 2, 2, 1, 1, 2, 2, 1, 1, 1, 1, 0, 0],
        [0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0],
        [1, 2, 2, 1, 2, 3, 3, 2, 1, 2, 2, 1, 0, 1, 1, 0],
        [2, 3, 2, 1, 3, 4, 3, 2, 2, 3, 2, 1, 1, 2, 1, 0],
        [2, 2, 1, 1, 3, 3, 2, 2, 2, 2, 1, 1, 1, 1, 0, 0],
        [1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 0, 0, 0, 0],
        [1, 2, 2, 1, 1, 2, 2, 1, 0, 1, 1, 0, 0, 1, 1, 0],
        [2, 3, 2, 1, 2, 3, 2, 1, 1, 2, 1, 0, 1, 2, 1, 0],
        [2, 2, 1, 1, 2, 2, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0],
        [1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
        [0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0],
        [1, 2, 1, 0, 1, 2, 1, 0, 1, 2, 1, 0, 1, 2, 1, 0],
        [1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    ];

    fn all_composite() -> Vec<(PairRegion, PairRegion)> {
        let mut out = Vec::new();
        for a in PAIR_REGIONS {
            for b in PAIR_REGIONS {
                out.push((a, b));
            }
        }
        out
    }

    #[test]
    fn pair_multiplicity_matches_published_table() {
        // (S I T C) x (S I T C) single-pair incidences.
        let expect = [[0, 1, 1, 0], [1, 2, 1, 0], [1, 1, 0, 0], [0, 0, 0, 0]];
        for (i, &a) in PAIR_REGIONS.iter().enumerate() {
            for (j, &b) in PAIR_REGIONS.iter().enumerate() {
                assert_eq!(pair_multiplicity(a, b), expect[i][j], "({a:?},{b:?})");
            }
        }
    }

    #[test]
    fn quad_multiplicity_matches_published_table() {
        let classes = all_composite();
        for (i, &a) in classes.iter().enumerate() {
            for (j, &b) in classes.iter().enumerate() {
                assert_eq!(quad_multiplicity(a, b), QUAD_TABLE[i][j], "classes {i},{j}");
            }
        }
        // Symmetry of the published table itself.
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(QUAD_TABLE[i][j], QUAD_TABLE[j][i]);
            }
        }
    }

    /// The explicit per-class coefficient transcription; used purely as an
    /// oracle against the indicator-driven `psi`.
    fn psi_coefficient_form(cell: &OverlapCell, beta: f64, p: f64) -> f64 {
        let f = |m: f64| pair_exponent(m * beta, p, Deriv::Value);
        let a = 2.0 * f(1.0) - f(2.0);
        let b = f(1.0) + f(2.0) - f(3.0);
        let g = cell.g.map(|x| x as f64);
        let c = [
            a * (g[4] + g[5] + g[7] + g[8]),
            a * (g[3] + g[5] + g[6] + g[8]) + b * (g[4] + g[7]),
            a * (g[3] + g[4] + g[6] + g[7]),
            a * (g[1] + g[2] + g[7] + g[8]) + b * (g[4] + g[5]),
            a * (g[0] + g[2] + g[6] + g[8]) + b * (g[1] + g[3] + g[5] + g[7]),
            a * (g[0] + g[1] + g[6] + g[7]) + b * (g[3] + g[4]),
            a * (g[1] + g[2] + g[4] + g[5]),
            a * (g[0] + g[2] + g[3] + g[5]) + b * (g[1] + g[4]),
            a * (g[0] + g[1] + g[3] + g[4]),
        ];
        let lead = g[4] * (g[4] - 1.0) / 2.0 * (2.0 * f(2.0) - f(4.0));
        lead + 0.5 * (0..9).map(|r| g[r] * c[r]).sum::<f64>()
    }

    #[test]
    fn psi_matches_coefficient_transcription() {
        let mut rng = seeding::stream_rng(31, 0);
        for _ in 0..500 {
            let k = rng.random_range(1..12usize);
            let cell = sample_feasible_cell(k, &mut rng);
            let beta = rng.random_range(0.05..6.0);
            let p = [0.2, 0.5, 0.8][rng.random_range(0..3usize)];
            let from_indicators = psi(&cell, beta, p);
            let from_coefficients = psi_coefficient_form(&cell, beta, p);
            assert!(
                (from_indicators - from_coefficients).abs()
                    < 1e-10 * from_coefficients.abs().max(1.0),
                "cell {cell:?}"
            );
        }
    }

    #[test]
    fn psi_trivial_and_equality_cases() {
        // Empty intersection: no coupling.
        let cell = OverlapCell::new(3, 1, 1, [0; 9]).unwrap();
        let (v, b) = psi_and_bound(&cell, 1.0f64, 0.5);
        assert_eq!(v, 0.0);
        assert_eq!(b, 0.0);
        // Only the center class occupied: bound is attained exactly.
        let mut g = [0usize; 9];
        g[4] = 2;
        let cell = OverlapCell::new(4, 2, 2, g).unwrap();
        let (v, b) = psi_and_bound(&cell, 0.9f64, 0.5);
        assert!((v - b).abs() < 1e-14);
        let f = |m: f64| pair_exponent(m * 0.9, 0.5, Deriv::Value);
        let expect = 2.0 * (f(2.0) - f(4.0) / 2.0);
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn psi_bounded_on_random_cells() {
        let mut rng = seeding::stream_rng(77, 0);
        for _ in 0..20_000 {
            let k = rng.random_range(1..=50usize);
            let cell = sample_feasible_cell(k, &mut rng);
            let beta = rng.random_range(0.05..10.0);
            let p = [0.2, 0.5, 0.8][rng.random_range(0..3usize)];
            let (v, b) = psi_and_bound(&cell, beta, p);
            assert!(v <= b + 1e-9, "psi {v} > bound {b} for {cell:?}");
        }
    }

    #[test]
    fn cell_constraints_enforced() {
        assert!(OverlapCell::new(3, 1, 1, [3, 0, 0, 0, 0, 0, 0, 0, 0]).is_err());
        assert!(OverlapCell::new(3, 1, 1, [2, 0, 0, 1, 0, 0, 0, 0, 0]).is_err());
        assert!(OverlapCell::new(3, 1, 1, [2, 0, 0, 0, 1, 0, 0, 0, 0]).is_ok());
    }

    #[test]
    fn theta2_bar_reference_points() {
        // q = q' = k, g = 0: the factorial terms reduce to -2 ln k!.
        let (n, k) = (1e6f64, 6usize);
        let got = theta2_bar(6, 6, 0, n, k);
        let expect = 12.0 * n.ln() - 2.0 * ln_factorial::<f64>(6) + 8.0;
        assert!((got - expect).abs() < 1e-9);
        // Spot value against direct factorial arithmetic at k = 6.
        let got = theta2_bar(4, 3, 2, n, k);
        let expect = (24 - 4 - 3 - 2) as f64 * n.ln()
            - ln_factorial::<f64>(2)
            - ln_factorial::<f64>(1)
            - 2.0 * (ln_factorial::<f64>(0) + ln_factorial::<f64>(1))
            + 8.0;
        assert!((got - expect).abs() < 1e-9);
        // Negative factorial arguments fall back to the convention.
        let v = theta2_bar(2, 2, 6, n, 3);
        assert!(v.is_finite());
    }

    #[test]
    fn theta2_bar_collapses_to_twice_theta() {
        // g = 0, q = q': up to the constant 8 and O(k^2/n) corrections the
        // bound reproduces twice the single-pair entropy.
        let n = 1_000_000usize;
        let k = 8;
        let nf = n as f64;
        for q in 0..=k {
            let theta =
                crate::thermo::overlap_entropy(|m| crate::numeric::ln_binomial(nf, m), k, q);
            let bound = theta2_bar(q, q, 0, nf, k);
            assert!(
                (bound - 2.0 * theta - 8.0).abs() < 0.01,
                "q = {q}: {} vs {}",
                bound,
                2.0 * theta + 8.0
            );
        }
    }

    #[test]
    fn brute_beta_zero_counts_quadruples() {
        let params = ModelParams::new(6, 2, 0.5, 0.0, 0.3).unwrap();
        let brute = second_moment(&params, SecondMomentMode::Brute, 10_000_000).unwrap();
        let expect = 4.0 * crate::numeric::ln_choose::<f64>(6, 2);
        assert!((brute - expect).abs() < 1e-10);
        let decomp = second_moment(&params, SecondMomentMode::Decomposition, 10_000_000).unwrap();
        assert!((decomp - expect).abs() < 1e-10);
    }

    #[test]
    fn brute_equals_decomposition() {
        for &(beta, htilde, p) in &[(1.0f64, 0.3f64, 0.5f64), (0.5, 0.1, 0.2), (2.0, 0.6, 0.8)] {
            let params = ModelParams::new(6, 2, p, beta, htilde).unwrap();
            let brute = second_moment(&params, SecondMomentMode::Brute, 10_000_000).unwrap();
            let decomp =
                second_moment(&params, SecondMomentMode::Decomposition, 10_000_000).unwrap();
            assert!(
                (brute - decomp).abs() < 1e-8 * brute.abs().max(1.0),
                "beta={beta} htilde={htilde} p={p}: {brute} vs {decomp}"
            );
        }
    }

    #[test]
    fn jensen_gap_nonnegative() {
        let params = ModelParams::new(6, 2, 0.5, 1.3, 0.4).unwrap();
        let m2 = second_moment(&params, SecondMomentMode::Decomposition, 10_000_000).unwrap();
        let m1 =
            crate::thermo::annealed_log_z(&params, crate::thermo::AnnealedMode::ExactSum).unwrap();
        assert!(m2 - 2.0 * m1 >= -1e-10);
    }

    #[test]
    fn budget_guards_trip() {
        let params = ModelParams::new(20, 5, 0.5, 1.0, 0.3).unwrap();
        assert!(matches!(
            second_moment(&params, SecondMomentMode::Brute, 1000),
            Err(CavityError::BudgetExceeded { .. })
        ));
        assert!(matches!(
            second_moment(&params, SecondMomentMode::Decomposition, 1000),
            Err(CavityError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn polyhedron_argmax_tracks_the_critical_line() {
        // The argmax claim is asymptotic. Below the line the g-slope at the
        // origin is 4 ln k - ln n, positive whenever k ln(1/p)/c < 4 ln k,
        // so the claim needs k past that onset; above the line the k^2
        // energy-entropy gap must beat 2 ln k!. beta = 0.75 keeps the
        // above-line comparison decisive at both c.
        let p = 0.5f64;
        let beta = 0.75;
        let run = |k: usize, c: f64, offset: f64| {
            let ln_n = ModelParams::ln_n_for(k, p, c);
            let hc = crate::thermo::htilde_critical(beta, p, c).unwrap();
            let params = ModelParams {
                n: usize::MAX,
                k,
                p,
                beta,
                htilde: hc + offset,
            };
            let m = polyhedron_max(&params, ln_n, 0);
            (m.q, m.g, m.g5)
        };
        for &c in &[1.5, 2.0] {
            assert_eq!(run(40, c, 0.3), (40, 0, 0), "c = {c} above");
        }
        assert_eq!(run(40, 1.5, -0.3), (0, 0, 0), "c = 1.5 below");
        // c = 2, k = 40 sits below the onset (ln n = 13.86 < 4 ln 40): the
        // origin is provably not the maximizer there, at any beta.
        let (q, g, _) = run(40, 2.0, -0.3);
        assert_eq!(q, 0);
        assert!(g > 0, "expected off-origin maximizer below the onset");
        // Past the onset (ln n = 22.2 > 4 ln 64) the claim holds.
        assert_eq!(run(64, 2.0, -0.3), (0, 0, 0), "c = 2 below, k = 64");
    }

    #[test]
    fn self_averaging_beta_zero_is_deterministic() {
        let rows =
            self_averaging_experiment(0.3f64, 1.5, 0.0, 0.2, &[2, 3], 8, 5, 1_000_000).unwrap();
        for row in rows {
            assert!(
                row.variance_ratio.abs() < 1e-20,
                "ratio {}",
                row.variance_ratio
            );
            let expect = 2.0 * crate::numeric::ln_choose::<f64>(row.n, row.k);
            assert!((row.log_mean_z - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn target_sizes_match_recipe() {
        // p = 0.2, c_bar = 1.9 puts k = 2,3,4 at n = 5, 13, 30.
        assert_eq!(ModelParams::<f64>::n_for(2, 0.2, 1.9), 5);
        assert_eq!(ModelParams::<f64>::n_for(3, 0.2, 1.9), 13);
        assert_eq!(ModelParams::<f64>::n_for(4, 0.2, 1.9), 30);
    }
}
