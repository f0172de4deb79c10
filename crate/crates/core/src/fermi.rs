//! Level-occupation machinery: the positive-entropy density window, the
//! empirical level statistics, the two-multiplier occupation solver, and the
//! configurational entropy estimate built on it.

use crate::configuration::Configuration;
use crate::error::{CavityError, Result};
use crate::graph::Graph;
use crate::hamiltonian::cavity_fields;
use crate::numeric::bisect;
use crate::scalar::{from_count, Scalar};
use crate::thermo::{rate_function, Deriv, ModelParams};

/// Mixing entropy of a filling fraction, with the x ln x -> 0 limits.
#[inline]
pub fn mixing_entropy<T: Scalar>(x: T) -> T {
    let a = if x == T::zero() {
        T::zero()
    } else {
        x * x.ln()
    };
    let y = T::one() - x;
    let b = if y == T::zero() {
        T::zero()
    } else {
        y * y.ln()
    };
    a + b
}

/// Densities with positive configurational entropy:
/// `{x : I_p(x) < ln(1/p)/c}`, returned as the open interval around 1-p.
/// For c <= 1 the interval reaches x = 0.
pub fn xc_set<T: Scalar>(c: T, p: T) -> Result<(T, T)> {
    if !(c > T::zero()) {
        return Err(CavityError::invalid(format!("need c > 0, got {c}")));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(CavityError::invalid("need p in (0, 1)".to_string()));
    }
    let level = -p.ln() / c;
    let tol = T::from_f64(1e-13).unwrap();
    let rate = |x: T| rate_function(x, p, Deriv::Value).unwrap();
    let lo = if level >= rate(T::zero()) {
        T::zero()
    } else {
        bisect(|x| rate(x) - level, T::zero(), T::one() - p, tol, 200)?
    };
    let hi = if level >= rate(T::one()) {
        T::one()
    } else {
        bisect(|x| level - rate(x), T::one() - p, T::one(), tol, 200)?
    };
    Ok((lo, hi))
}

/// A degeneracy spectrum over levels j = 0..=k. Real-valued degeneracies are
/// allowed so expected spectra can be solved directly.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpectrum<T> {
    pub degeneracy: Vec<T>,
    /// Constant level offset (levels sit at j + offset); it shifts energies
    /// by N * offset and does not enter the solver.
    pub offset: T,
}

impl<T: Scalar> LevelSpectrum<T> {
    pub fn new(degeneracy: Vec<T>) -> Self {
        LevelSpectrum {
            degeneracy,
            offset: T::zero(),
        }
    }

    pub fn total(&self) -> T {
        self.degeneracy.iter().fold(T::zero(), |a, &b| a + b)
    }

    fn active(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.degeneracy
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > T::zero())
            .map(|(j, &g)| (j, g))
    }

    /// Attainable (min, max) of the level-weighted sum at particle number n.
    pub fn energy_range(&self, n_particles: T) -> Result<(T, T)> {
        if !(n_particles > T::zero() && n_particles < self.total()) {
            return Err(CavityError::Infeasible(format!(
                "particle number {n_particles} outside (0, {})",
                self.total()
            )));
        }
        let fill = |ascending: bool| {
            let mut levels: Vec<(usize, T)> = self.active().collect();
            if !ascending {
                levels.reverse();
            }
            let mut left = n_particles;
            let mut e = T::zero();
            for (j, g) in levels {
                let take = left.min(g);
                e += take * from_count::<T>(j);
                left -= take;
                if left <= T::zero() {
                    break;
                }
            }
            e
        };
        Ok((fill(true), fill(false)))
    }
}

/// Output of the two-multiplier solve: `x_j = 1 / (1 + e^{lambda + mu j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSolution<T> {
    pub lambda: T,
    pub mu: T,
    pub occupations: Vec<T>,
    pub entropy: T,
    pub residual_particles: T,
    pub residual_energy: T,
}

#[inline]
fn filling<T: Scalar>(t: T) -> T {
    // 1 / (1 + e^t), stable on both tails.
    if t > T::zero() {
        let e = (-t).exp();
        e / (T::one() + e)
    } else {
        (T::one() + t.exp()).recip()
    }
}

/// Solve `sum_j g_j x_j = N`, `sum_j g_j j x_j = E` for the multipliers by
/// nested bisection: the particle count is strictly decreasing in lambda and,
/// with lambda re-solved, the energy is strictly decreasing in mu.
pub fn occupation_solve<T: Scalar>(
    spectrum: &LevelSpectrum<T>,
    n_particles: T,
    energy: T,
    tol: T,
) -> Result<OccupationSolution<T>> {
    let levels: Vec<(T, T)> = spectrum
        .active()
        .map(|(j, g)| (from_count::<T>(j), g))
        .collect();
    if levels.is_empty() {
        return Err(CavityError::Infeasible("empty spectrum".into()));
    }
    let total = spectrum.total();
    if !(n_particles > T::zero() && n_particles < total) {
        return Err(CavityError::Infeasible(format!(
            "need 0 < N < {total}, got N = {n_particles}"
        )));
    }

    let count_at = |lambda: T, mu: T| -> T {
        levels
            .iter()
            .map(|&(j, g)| g * filling(lambda + mu * j))
            .fold(T::zero(), |a, b| a + b)
    };
    let solve_lambda = |mu: T| -> Result<T> {
        let mut lo = -T::one();
        let mut hi = T::one();
        let mut guard = 0;
        while count_at(lo, mu) < n_particles {
            lo = lo + lo;
            guard += 1;
            if guard > 200 {
                return Err(CavityError::NonConvergence("lambda bracket (low)".into()));
            }
        }
        while count_at(hi, mu) > n_particles {
            hi = hi + hi;
            guard += 1;
            if guard > 400 {
                return Err(CavityError::NonConvergence("lambda bracket (high)".into()));
            }
        }
        let scale = T::one().max(n_particles);
        bisect(
            |l| count_at(l, mu) - n_particles,
            lo,
            hi,
            T::epsilon() * (T::one() + lo.abs().max(hi.abs())),
            200,
        )
        .and_then(|l| {
            if (count_at(l, mu) - n_particles).abs() <= tol * scale {
                Ok(l)
            } else {
                Err(CavityError::NonConvergence(format!(
                    "inner particle residual at mu = {mu}"
                )))
            }
        })
    };
    let energy_at = |lambda: T, mu: T| -> T {
        levels
            .iter()
            .map(|&(j, g)| g * j * filling(lambda + mu * j))
            .fold(T::zero(), |a, b| a + b)
    };

    // Single distinct level: energy is pinned to N * j, mu is free.
    let single_level = levels.len() == 1;
    let (lambda, mu) = if single_level {
        let j = levels[0].0;
        if (energy - n_particles * j).abs() > tol * T::one().max(energy.abs()) {
            return Err(CavityError::Infeasible(format!(
                "single-level spectrum forces E = N*j = {}",
                n_particles * j
            )));
        }
        (solve_lambda(T::zero())?, T::zero())
    } else {
        let (e_min, e_max) = spectrum.energy_range(n_particles)?;
        if !(energy > e_min && energy < e_max) {
            return Err(CavityError::Infeasible(format!(
                "energy {energy} outside attainable open interval ({e_min}, {e_max})"
            )));
        }
        // Energy decreases in mu: bracket so that E(lo) > target > E(hi).
        let mut lo = -T::one();
        let mut hi = T::one();
        let mut guard = 0;
        while energy_at(solve_lambda(lo)?, lo) < energy {
            lo = lo + lo;
            guard += 1;
            if guard > 200 {
                return Err(CavityError::NonConvergence("mu bracket (low)".into()));
            }
        }
        while energy_at(solve_lambda(hi)?, hi) > energy {
            hi = hi + hi;
            guard += 1;
            if guard > 400 {
                return Err(CavityError::NonConvergence("mu bracket (high)".into()));
            }
        }
        let mu = bisect(
            |m| energy_at(solve_lambda(m).unwrap_or(T::zero()), m) - energy,
            lo,
            hi,
            T::epsilon() * (T::one() + lo.abs().max(hi.abs())),
            200,
        )?;
        (solve_lambda(mu)?, mu)
    };

    let occupations: Vec<T> = spectrum
        .degeneracy
        .iter()
        .enumerate()
        .map(|(j, &g)| {
            if g > T::zero() {
                filling(lambda + mu * from_count::<T>(j))
            } else {
                T::zero()
            }
        })
        .collect();
    let entropy = -spectrum
        .degeneracy
        .iter()
        .zip(&occupations)
        .map(|(&g, &x)| g * mixing_entropy(x))
        .fold(T::zero(), |a, b| a + b);
    let got_n = count_at(lambda, mu);
    let got_e = energy_at(lambda, mu);
    let sol = OccupationSolution {
        lambda,
        mu,
        occupations,
        entropy,
        residual_particles: got_n - n_particles,
        residual_energy: got_e - energy,
    };
    let n_scale = T::one().max(n_particles);
    let e_scale = T::one().max(energy.abs());
    if sol.residual_particles.abs() > tol * n_scale || sol.residual_energy.abs() > tol * e_scale {
        return Err(CavityError::NonConvergence(format!(
            "residuals {} / {} above tolerance",
            sol.residual_particles, sol.residual_energy
        )));
    }
    Ok(sol)
}

/// Empirical versus expected degeneracy of one outside level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport<T> {
    pub level: usize,
    pub observed: usize,
    pub expected: T,
    pub sd: T,
    /// |observed - expected| within five binomial standard deviations.
    pub within_bands: bool,
    /// Level density j/k falls in the positive-entropy window.
    pub positive_entropy: bool,
    /// Count obeys the exponential window for its class.
    pub within_window: bool,
}

/// Per-level statistics of the outside-site spectrum of `sigma`.
pub fn degeneracy_stats<T: Scalar>(
    graph: &Graph,
    sigma: &Configuration,
    params: &ModelParams<T>,
    delta: T,
) -> Result<Vec<LevelReport<T>>> {
    let k = sigma.len();
    let table = cavity_fields(graph, sigma, params.h());
    let mut observed = vec![0usize; k + 1];
    for lev in &table.levels {
        if lev.outside {
            observed[lev.l] = lev.sites.len();
        }
    }
    let (x_lo, x_hi) = xc_set(params.c(), params.p)?;
    let trials = from_count::<T>(graph.n() - k);
    let kf = from_count::<T>(k);
    let level_rate = -params.p.ln() / params.c();
    let mut out = Vec::with_capacity(k + 1);
    for (j, &obs) in observed.iter().enumerate() {
        let jf = from_count::<T>(j);
        let prob = crate::numeric::ln_binomial(kf, j).exp()
            * (T::one() - params.p).powi(j as i32)
            * params.p.powi((k - j) as i32);
        let expected = trials * prob;
        let sd = (trials * prob * (T::one() - prob)).sqrt();
        let within_bands = (from_count::<T>(obs) - expected).abs()
            <= T::from_f64(5.0).unwrap() * sd + T::epsilon();
        let density = jf / kf;
        let positive_entropy = density > x_lo && density < x_hi;
        let obs_f = from_count::<T>(obs);
        let within_window = if positive_entropy {
            let gap = level_rate - rate_function(density, params.p, Deriv::Value)?;
            let lower = (kf * (gap - delta)).exp();
            let upper = (kf * (gap + delta)).exp();
            obs_f >= lower && obs_f <= upper
        } else {
            obs_f <= (kf * delta).exp()
        };
        out.push(LevelReport {
            level: j,
            observed: obs,
            expected,
            sd,
            within_bands,
            positive_entropy,
            within_window,
        });
    }
    Ok(out)
}

/// Upper estimate of the per-site-pair log count of configurations at
/// overlap fraction `alpha` and cross energy density `rho`, built from the
/// empirical outside-level spectrum: the inside-choice factor is bounded by
/// 2^k, the outside factor by the occupation solve maximized over the
/// energy-split window `[rho - delta, rho + 2 delta]`.
pub fn entropy_estimate<T: Scalar>(
    graph: &Graph,
    sigma: &Configuration,
    params: &ModelParams<T>,
    alpha: T,
    rho: T,
    delta: T,
) -> Result<T> {
    if !(alpha >= T::zero() && alpha <= T::one()) || !(rho >= T::zero() && rho <= T::one()) {
        return Err(CavityError::invalid(
            "need alpha, rho in [0, 1]".to_string(),
        ));
    }
    let k = sigma.len();
    let kf = from_count::<T>(k);
    let table = cavity_fields(graph, sigma, params.h());
    let mut degeneracy = vec![T::zero(); k + 1];
    for lev in &table.levels {
        if lev.outside {
            degeneracy[lev.l] = from_count(lev.sites.len());
        }
    }
    let spectrum = LevelSpectrum::new(degeneracy);
    let inside_bits = kf * T::LN_2();
    let n_out = (T::one() - alpha) * kf;
    if n_out <= T::zero() {
        // alpha = 1: only the inside choice remains.
        return Ok(inside_bits / (kf * kf));
    }
    let steps = 8;
    let mut best = T::neg_infinity();
    for s in 0..=steps {
        let rho_prime =
            rho - delta + (delta + delta + delta) * from_count::<T>(s) / from_count::<T>(steps);
        let target_e = n_out * kf * rho_prime;
        let Ok((e_min, e_max)) = spectrum.energy_range(n_out) else {
            continue;
        };
        if !(target_e > e_min && target_e < e_max) {
            continue;
        }
        if let Ok(sol) = occupation_solve(&spectrum, n_out, target_e, T::from_f64(1e-9).unwrap()) {
            best = best.max(sol.entropy);
        }
    }
    if best == T::neg_infinity() {
        return Ok(T::neg_infinity()); // empty constraint set
    }
    Ok((inside_bits + best) / (kf * kf))
}
