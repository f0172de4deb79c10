//! Exact single-step sampling of the update kernel.
//!
//! Given the cavity fields of the current configuration, the next
//! configuration is a k-subset drawn with probability proportional to the
//! product of per-site weights e^{-beta h_i}. The normalizer is the k-th
//! elementary symmetric function of the weights, built here in the log
//! domain two ways: grouped by degeneracy levels (the fast path) and site by
//! site (the oracle path). Backward traversal of either table yields an
//! exact draw, no rejection and no Metropolis correction.

use crate::configuration::Configuration;
use crate::error::{CavityError, Result};
use crate::graph::Graph;
use crate::hamiltonian::{cavity_fields, FieldTable};
use crate::numeric::{ln_binomial, log_add, log_sum};
use crate::scalar::{from_count, Scalar};
use crate::seeding;
use crate::thermo::ModelParams;
use rand::Rng;

/// Log-domain weight tables for one step of the dynamics at finite beta.
pub struct StepWeights<T> {
    pub k: usize,
    n: usize,
    /// Per-site log weight, -beta h_i.
    pub log_w: Vec<T>,
    /// (log weight, sites) per occupied level, in fixed (l, r) order.
    levels: Vec<(T, Vec<usize>)>,
    /// Level-grouped symmetric-sum table: entry [t][j] is the log sum over
    /// ways to place j particles in the first t levels.
    level_esp: Vec<Vec<T>>,
}

impl<T: Scalar> StepWeights<T> {
    pub fn new(table: &FieldTable<T>, beta: T) -> Result<Self> {
        if !(beta >= T::zero()) || beta == T::infinity() {
            return Err(CavityError::invalid(
                "step weights need finite beta >= 0 (use the zero-temperature mode for beta = inf)"
                    .to_string(),
            ));
        }
        let n = table.fields.len();
        let k = table.k;
        let log_w: Vec<T> = table.fields.iter().map(|&h| -beta * h).collect();
        let levels: Vec<(T, Vec<usize>)> = table
            .levels
            .iter()
            .map(|lev| (-beta * table.level_value(lev), lev.sites.clone()))
            .collect();
        let mut level_esp = Vec::with_capacity(levels.len() + 1);
        let mut row = vec![T::neg_infinity(); k + 1];
        row[0] = T::zero();
        level_esp.push(row);
        for (lw, sites) in &levels {
            let g = sites.len();
            let prev = level_esp.last().unwrap();
            let mut next = vec![T::neg_infinity(); k + 1];
            for j in 0..=k {
                let mut acc = T::neg_infinity();
                for m in 0..=j.min(g) {
                    let prev_val = prev[j - m];
                    if prev_val == T::neg_infinity() {
                        continue;
                    }
                    acc = log_add(
                        acc,
                        ln_binomial(from_count::<T>(g), m) + from_count::<T>(m) * *lw + prev_val,
                    );
                }
                next[j] = acc;
            }
            level_esp.push(next);
        }
        Ok(StepWeights {
            k,
            n,
            log_w,
            levels,
            level_esp,
        })
    }

    /// ln Z_sigma from the level-grouped table.
    pub fn log_z(&self) -> T {
        self.level_esp[self.levels.len()][self.k]
    }

    /// ln Z_sigma by the site-by-site recursion; independent of the level
    /// grouping and kept as an oracle.
    pub fn log_z_sitewise(&self) -> T {
        self.sitewise_table()[self.n][self.k]
    }

    fn sitewise_table(&self) -> Vec<Vec<T>> {
        let mut table = Vec::with_capacity(self.n + 1);
        let mut row = vec![T::neg_infinity(); self.k + 1];
        row[0] = T::zero();
        table.push(row);
        for m in 1..=self.n {
            let prev = &table[m - 1];
            let mut next = prev.clone();
            for j in 1..=self.k.min(m) {
                next[j] = log_add(prev[j], self.log_w[m - 1] + prev[j - 1]);
            }
            table.push(next);
        }
        table
    }

    /// Exact draw from the kernel row via the level-grouped table.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Configuration {
        let mut picked: Vec<usize> = Vec::with_capacity(self.k);
        let mut j = self.k;
        for t in (1..=self.levels.len()).rev() {
            if j == 0 {
                break;
            }
            let (lw, sites) = &self.levels[t - 1];
            let g = sites.len();
            let denom = self.level_esp[t][j];
            // Occupation of this level: m with prob C(g,m) w^m esp[t-1][j-m] / esp[t][j].
            let mut u = rng.random::<f64>();
            let mut m_chosen = None;
            for m in 0..=j.min(g) {
                let prev_val = self.level_esp[t - 1][j - m];
                if prev_val == T::neg_infinity() {
                    continue;
                }
                let lp = ln_binomial(from_count::<T>(g), m) + from_count::<T>(m) * *lw + prev_val
                    - denom;
                let prob = lp.exp().as_f64();
                // Rounding can leave a sliver of u after the last feasible
                // occupation; it then falls through to that occupation.
                m_chosen = Some(m);
                if u < prob {
                    break;
                }
                u -= prob;
            }
            let m_chosen = m_chosen.expect("feasible occupation exists");
            // Uniform m-subset of the level's sites.
            if m_chosen > 0 {
                let mut scratch: Vec<usize> = sites.clone();
                for slot in 0..m_chosen {
                    let pick = rng.random_range(slot..scratch.len());
                    scratch.swap(slot, pick);
                    picked.push(scratch[slot]);
                }
            }
            j -= m_chosen;
        }
        debug_assert_eq!(j, 0);
        picked.sort_unstable();
        Configuration::from_sorted_unchecked(picked)
    }

    /// Exact draw via the site-by-site table; oracle counterpart of
    /// [`Self::sample`].
    pub fn sample_sitewise<R: Rng>(&self, rng: &mut R) -> Configuration {
        let table = self.sitewise_table();
        let mut picked = Vec::with_capacity(self.k);
        let mut j = self.k;
        for m in (1..=self.n).rev() {
            if j == 0 {
                break;
            }
            let include = self.log_w[m - 1] + table[m - 1][j - 1] - table[m][j];
            if rng.random::<f64>() < include.exp().as_f64() {
                picked.push(m - 1);
                j -= 1;
            }
        }
        debug_assert_eq!(j, 0);
        picked.sort_unstable();
        Configuration::from_sorted_unchecked(picked)
    }
}

/// ln Z_sigma at finite beta (level-grouped recursion).
pub fn log_z_sigma<T: Scalar>(table: &FieldTable<T>, beta: T) -> Result<T> {
    Ok(StepWeights::new(table, beta)?.log_z())
}

/// Zero-temperature step: the kernel concentrates uniformly on the
/// minimal-energy k-subsets. Sites are grouped by exact field value; the
/// threshold group is filled by uniform choice.
pub struct ZeroTemperatureStep<T> {
    pub min_energy: T,
    /// ln of the number of minimal-energy subsets.
    pub log_count: T,
    forced: Vec<usize>,
    threshold: Vec<usize>,
    slots: usize,
}

impl<T: Scalar> ZeroTemperatureStep<T> {
    pub fn new(table: &FieldTable<T>) -> Self {
        let k = table.k;
        let mut order: Vec<(T, usize)> = table
            .fields
            .iter()
            .enumerate()
            .map(|(i, &f)| (f, i))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let threshold_value = order[k - 1].0;
        let forced: Vec<usize> = order
            .iter()
            .filter(|&&(f, _)| f < threshold_value)
            .map(|&(_, i)| i)
            .collect();
        let threshold: Vec<usize> = order
            .iter()
            .filter(|&&(f, _)| f == threshold_value)
            .map(|&(_, i)| i)
            .collect();
        let slots = k - forced.len();
        let min_energy = order[..k]
            .iter()
            .map(|&(f, _)| f)
            .fold(T::zero(), |a, b| a + b);
        let log_count = ln_binomial(from_count::<T>(threshold.len()), slots);
        ZeroTemperatureStep {
            min_energy,
            log_count,
            forced,
            threshold,
            slots,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Configuration {
        let mut picked = self.forced.clone();
        let mut scratch = self.threshold.clone();
        for slot in 0..self.slots {
            let pick = rng.random_range(slot..scratch.len());
            scratch.swap(slot, pick);
            picked.push(scratch[slot]);
        }
        picked.sort_unstable();
        Configuration::from_sorted_unchecked(picked)
    }
}

/// One exact kernel draw at the given temperature (beta = inf allowed).
pub fn sample_step<T: Scalar, R: Rng>(
    table: &FieldTable<T>,
    beta: T,
    rng: &mut R,
) -> Result<Configuration> {
    if beta == T::infinity() {
        Ok(ZeroTemperatureStep::new(table).sample(rng))
    } else {
        Ok(StepWeights::new(table, beta)?.sample(rng))
    }
}

/// A realized run of the dynamics. `energies[t]` is the energy of the move
/// from `states[t]` to `states[t+1]`; `log_z[t]` is the log normalizer of
/// the step (at infinite beta: the log count of minimal-energy subsets).
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub states: Vec<Configuration>,
    pub energies: Vec<T>,
    pub overlaps: Vec<usize>,
    pub log_z: Vec<T>,
}

impl<T> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.energies.len()
    }
}

/// Run the chain for `steps` moves. Deterministic in `seed`; the start is a
/// uniform random k-subset unless `init` pins it.
pub fn run_chain<T: Scalar>(
    graph: &Graph,
    params: &ModelParams<T>,
    steps: usize,
    seed: u64,
    init: Option<Configuration>,
) -> Result<Trajectory<T>> {
    if steps < 1 {
        return Err(CavityError::invalid("need steps >= 1".to_string()));
    }
    let mut rng = seeding::stream_rng(seed, 0);
    let mut current = match init {
        Some(c) => {
            if c.len() != params.k {
                return Err(CavityError::SizeMismatch(format!(
                    "init has {} vertices, expected k = {}",
                    c.len(),
                    params.k
                )));
            }
            c
        }
        None => Configuration::random(graph.n(), params.k, &mut rng)?,
    };
    let h = params.h();
    let zero_temp = params.beta == T::infinity();
    let mut traj = Trajectory {
        states: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps),
        overlaps: Vec::with_capacity(steps),
        log_z: Vec::with_capacity(steps),
    };
    traj.states.push(current.clone());
    for _ in 0..steps {
        let table = cavity_fields(graph, &current, h);
        let next = if zero_temp {
            let zt = ZeroTemperatureStep::new(&table);
            traj.log_z.push(zt.log_count);
            zt.sample(&mut rng)
        } else {
            let weights = StepWeights::new(&table, params.beta)?;
            traj.log_z.push(weights.log_z());
            weights.sample(&mut rng)
        };
        let energy = next
            .vertices()
            .iter()
            .map(|&i| table.fields[i])
            .fold(T::zero(), |a, b| a + b);
        traj.energies.push(energy);
        traj.overlaps.push(current.overlap(&next));
        traj.states.push(next.clone());
        current = next;
    }
    Ok(traj)
}

/// Trailing-window cycle detection: `fixed` when the last `window`
/// transitions are identities, `period2` when states alternate between two
/// distinct configurations throughout.
pub fn detect_oscillation<T>(traj: &Trajectory<T>, window: usize) -> Result<(bool, bool)> {
    if window > traj.steps() {
        return Err(CavityError::invalid(format!(
            "window {window} exceeds trajectory length {}",
            traj.steps()
        )));
    }
    let m = traj.states.len();
    let tail = &traj.states[m - 1 - window..];
    Ok(classify_window(tail))
}

fn classify_window(states: &[Configuration]) -> (bool, bool) {
    let fixed = states.windows(2).all(|w| w[0] == w[1]);
    let period2 = states.len() >= 3
        && states.windows(2).all(|w| w[0] != w[1])
        && states.windows(3).all(|w| w[0] == w[2]);
    (period2, fixed)
}

/// First step index at which a clean two-state alternation of length
/// `window` transitions begins, if any.
pub fn first_lock_time<T>(traj: &Trajectory<T>, window: usize) -> Option<usize> {
    let states = &traj.states;
    if states.len() < window + 1 || window < 2 {
        return None;
    }
    // Hash-free scan: compare configurations directly, two lags.
    let mut run = 0usize; // consecutive positions with s[i+2] == s[i] != s[i+1]
    for i in 0..states.len() - 2 {
        if states[i + 2] == states[i] && states[i] != states[i + 1] {
            run += 1;
            // window transitions need window - 1 consecutive satisfied
            // triples; the alternation then starts at i + 1 - run.
            if run >= window - 1 {
                return Some(i + 1 - run);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Exact invariance and reversibility residuals of the full kernel.
pub struct StationaryReport<T> {
    pub state_count: usize,
    pub l1_residual: T,
    pub detailed_balance_max: T,
}

/// Materialize the full kernel (guarded by `cap` on the state count) and
/// measure `||mu P - mu||_1` plus the worst detailed-balance residual, with
/// `mu(sigma) = Z_sigma / Z`.
pub fn stationary_check<T: Scalar>(
    graph: &Graph,
    params: &ModelParams<T>,
    cap: u128,
) -> Result<StationaryReport<T>> {
    crate::configuration::subset_count_guarded(graph.n(), params.k, cap)?;
    let states: Vec<Configuration> =
        crate::configuration::SubsetIter::new(graph.n(), params.k).collect();
    let m = states.len();
    let h = params.h();
    let tables: Vec<FieldTable<T>> = states.iter().map(|s| cavity_fields(graph, s, h)).collect();
    let log_zs: Vec<T> = tables
        .iter()
        .map(|t| log_z_sigma(t, params.beta))
        .collect::<Result<_>>()?;
    let log_z_total = log_sum(&log_zs);
    let mu: Vec<T> = log_zs.iter().map(|&lz| (lz - log_z_total).exp()).collect();
    // Row-stochastic kernel in linear space.
    let mut kernel = vec![vec![T::zero(); m]; m];
    for (a, table) in tables.iter().enumerate() {
        for (b, tau) in states.iter().enumerate() {
            let energy = tau
                .vertices()
                .iter()
                .map(|&i| table.fields[i])
                .fold(T::zero(), |acc, x| acc + x);
            kernel[a][b] = (-params.beta * energy - log_zs[a]).exp();
        }
    }
    let mut l1 = T::zero();
    for b in 0..m {
        let mut acc = T::zero();
        for a in 0..m {
            acc += mu[a] * kernel[a][b];
        }
        l1 += (acc - mu[b]).abs();
    }
    let mut db = T::zero();
    for a in 0..m {
        for b in 0..m {
            db = db.max((mu[a] * kernel[a][b] - mu[b] * kernel[b][a]).abs());
        }
    }
    Ok(StationaryReport {
        state_count: m,
        l1_residual: l1,
        detailed_balance_max: db,
    })
}
