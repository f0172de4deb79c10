//! Closed-form thermodynamics of the pair measure: the per-pair weight
//! exponent and its Legendre-dual rate function, the two critical lines, the
//! annealed partition function (exact overlap sum and large-k asymptotics),
//! and the phase classification with its observable densities.

use crate::error::{CavityError, Result};
use crate::numeric::{bisect, ln_binomial, log_add, minimize_convex};
use crate::scalar::{from_count, Scalar};

/// Which derivative of a special function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    Value,
    First,
    Second,
}

/// Model parameters. `htilde` is the field per occupied vertex
/// (`h = htilde * k`); `c = k ln(1/p) / ln n` locates the size regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub n: usize,
    pub k: usize,
    pub p: T,
    pub beta: T,
    pub htilde: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(n: usize, k: usize, p: T, beta: T, htilde: T) -> Result<Self> {
        if n < 2 || k < 1 || k > n {
            return Err(CavityError::invalid(format!(
                "need 1 <= k <= n and n >= 2, got n = {n}, k = {k}"
            )));
        }
        if !(p > T::zero() && p < T::one()) {
            return Err(CavityError::invalid("need p in (0, 1)".to_string()));
        }
        if !(beta >= T::zero()) {
            return Err(CavityError::invalid("need beta >= 0".to_string()));
        }
        if !(htilde >= T::zero()) {
            return Err(CavityError::invalid("need htilde >= 0".to_string()));
        }
        Ok(ModelParams {
            n,
            k,
            p,
            beta,
            htilde,
        })
    }

    /// Total field h = htilde * k.
    pub fn h(&self) -> T {
        self.htilde * from_count::<T>(self.k)
    }

    /// Size-regime parameter c = k ln(1/p) / ln n.
    pub fn c(&self) -> T {
        from_count::<T>(self.k) * -self.p.ln() / from_count::<T>(self.n).ln()
    }

    /// ln n implied by (k, p, c); inverse of [`Self::c`].
    pub fn ln_n_for(k: usize, p: T, c: T) -> T {
        from_count::<T>(k) * -p.ln() / c
    }

    /// The integer n nearest to exp(k ln(1/p) / c).
    pub fn n_for(k: usize, p: T, c: T) -> usize {
        Self::ln_n_for(k, p, c).exp().round().as_f64() as usize
    }
}

/// Per-pair annealed weight exponent `-ln[p + (1-p) e^{-beta}]` and its first
/// two derivatives. Concave, zero at zero, saturating at ln(1/p).
pub fn pair_exponent<T: Scalar>(beta: T, p: T, order: Deriv) -> T {
    let u = (T::one() - p) * (-beta).exp(); // 0 at beta = inf
    let d = p + u;
    match order {
        Deriv::Value => -d.ln(),
        Deriv::First => u / d,
        Deriv::Second => -p * u / (d * d),
    }
}

/// Binomial large-deviation rate of the missing-link density:
/// `I(x) = x ln(x/(1-p)) + (1-x) ln((1-x)/p)`, endpoints by continuity.
pub fn rate_function<T: Scalar>(x: T, p: T, order: Deriv) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(CavityError::invalid(format!("need x in [0,1], got {x}")));
    }
    let q = T::one() - p;
    Ok(match order {
        Deriv::Value => {
            let a = if x == T::zero() {
                T::zero()
            } else {
                x * (x / q).ln()
            };
            let b = if x == T::one() {
                T::zero()
            } else {
                (T::one() - x) * ((T::one() - x) / p).ln()
            };
            a + b
        }
        Deriv::First => (x * p / (q * (T::one() - x))).ln(),
        Deriv::Second => (x * (T::one() - x)).recip(),
    })
}

/// Legendre duality: the minimizer of `I(x) + beta x` sits at `x = f'(beta)`
/// and the minimum equals `f(beta)`. Returned closed-form; the independent
/// check by numeric minimization lives in the tests.
pub fn legendre_minimizer<T: Scalar>(beta: T, p: T) -> (T, T) {
    let x_star = pair_exponent(beta, p, Deriv::First);
    (x_star, pair_exponent(beta, p, Deriv::Value))
}

/// Numeric counterpart of [`legendre_minimizer`]: golden-section over (0,1).
pub fn legendre_minimizer_numeric<T: Scalar>(beta: T, p: T, tol: T) -> (T, T) {
    let eps = T::from_f64(1e-12).unwrap();
    minimize_convex(
        |x| rate_function(x, p, Deriv::Value).unwrap() + beta * x,
        eps,
        T::one() - eps,
        tol,
    )
}

/// The two critical lines and, for c > 2, the annealed-validity markers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValues<T> {
    /// First-order line: overlap-1 pairs above, disjoint pairs below.
    pub htilde_c: T,
    /// Low-temperature line inside the disjoint phase.
    pub beta_c: T,
    /// For c > 2 only: variance control holds below this temperature.
    pub bar_beta_c: Option<T>,
    /// For c > 2 only: annealed entropy goes negative above this.
    pub hat_beta_c: Option<T>,
}

const ROOT_TOL: f64 = 1e-13;
const ROOT_ITER: usize = 200;

/// Zero of `C(beta) = ln(1/p)/c - f(beta) + beta f'(beta)`, which is strictly
/// decreasing with a guaranteed sign change when c > 1.
pub fn beta_critical<T: Scalar>(p: T, c: T) -> Result<T> {
    if !(c > T::one()) {
        return Err(CavityError::invalid(format!("need c > 1, got c = {c}")));
    }
    let target = -p.ln() / c;
    let func =
        |b: T| target - pair_exponent(b, p, Deriv::Value) + b * pair_exponent(b, p, Deriv::First);
    // C(0) = ln(1/p)/c > 0; C(inf) = ln(1/p)(1/c - 1) < 0. Expand to bracket.
    let mut hi = T::one();
    while func(hi) > T::zero() {
        hi = hi + hi;
        if hi > T::from_f64(1e6).unwrap() {
            return Err(CavityError::NonConvergence(
                "beta_c bracket expansion failed".into(),
            ));
        }
    }
    bisect(
        func,
        T::zero(),
        hi,
        T::from_f64(ROOT_TOL).unwrap(),
        ROOT_ITER,
    )
}

/// First-order line at inverse temperature beta (beta > 0 required; the line
/// diverges like ln(1/p)/(c beta) as beta -> 0).
pub fn htilde_critical<T: Scalar>(beta: T, p: T, c: T) -> Result<T> {
    if !(beta > T::zero()) {
        return Err(CavityError::invalid(
            "htilde_c needs beta > 0 (1/beta prefactor)".to_string(),
        ));
    }
    if !(c > T::one()) {
        return Err(CavityError::invalid(format!("need c > 1, got c = {c}")));
    }
    let two = T::one() + T::one();
    Ok((pair_exponent(two * beta, p, Deriv::Value) / two
        - pair_exponent(beta, p, Deriv::Value)
        - p.ln() / c)
        / beta)
}

/// All critical values for given (p, c, beta).
pub fn critical_lines<T: Scalar>(beta: T, p: T, c: T) -> Result<CriticalValues<T>> {
    let htilde_c = htilde_critical(beta, p, c)?;
    let beta_c = beta_critical(p, c)?;
    let two = T::one() + T::one();
    let four = two + two;
    let target = -p.ln() / c;
    let (bar_beta_c, hat_beta_c) = if c > two {
        // f(2b) - f(4b)/2 increases 0 -> ln(1/p)/2, so a root needs c > 2.
        let bar = {
            let func = |b: T| {
                pair_exponent(two * b, p, Deriv::Value)
                    - pair_exponent(four * b, p, Deriv::Value) / two
                    - target
            };
            let mut hi = T::one();
            while func(hi) < T::zero() {
                hi = hi + hi;
            }
            bisect(
                |b| -func(b),
                T::zero(),
                hi,
                T::from_f64(ROOT_TOL).unwrap(),
                ROOT_ITER,
            )?
        };
        let hat = {
            let func = |b: T| {
                pair_exponent(two * b, p, Deriv::Value)
                    - two * b * pair_exponent(four * b, p, Deriv::First)
                    - target
            };
            let mut hi = T::one();
            while func(hi) < T::zero() {
                hi = hi + hi;
            }
            bisect(
                |b| -func(b),
                T::zero(),
                hi,
                T::from_f64(ROOT_TOL).unwrap(),
                ROOT_ITER,
            )?
        };
        (Some(bar), Some(hat))
    } else {
        (None, None)
    };
    Ok(CriticalValues {
        htilde_c,
        beta_c,
        bar_beta_c,
        hat_beta_c,
    })
}

/// Entropic overlap term: ln[ C(n, 2k-q) C(2k-q, q) C(2(k-q), k-q) ].
pub fn overlap_entropy<T: Scalar>(ln_choose_n: impl Fn(usize) -> T, k: usize, q: usize) -> T {
    let u = 2 * k - q;
    ln_choose_n(u)
        + ln_binomial(from_count::<T>(u), q)
        + ln_binomial(from_count::<T>(2 * (k - q)), k - q)
}

/// Energy overlap term: `-beta h (k-q) - f(beta)(k^2-q^2) - f(2beta) q(q-1)/2`.
pub fn overlap_energy<T: Scalar>(params: &ModelParams<T>, q: usize) -> T {
    let two = T::one() + T::one();
    let k = from_count::<T>(params.k);
    let qf = from_count::<T>(q);
    let f1 = pair_exponent(params.beta, params.p, Deriv::Value);
    let f2 = pair_exponent(two * params.beta, params.p, Deriv::Value);
    let field = if params.beta == T::infinity() {
        // beta h (k-q): zero when q = k even at infinite beta.
        if q == params.k || params.htilde == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        params.beta * params.h() * (k - qf)
    };
    -field - f1 * (k * k - qf * qf) - f2 * qf * (qf - T::one()) / two
}

/// How to evaluate the annealed partition function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnealedMode {
    /// Stable log-sum of the full overlap decomposition (needs 2k <= n).
    ExactSum,
    /// The leading-terms asymptotic of the dominant phase (needs c > 1,
    /// away from the critical line).
    Asymptotic,
}

/// ln E[Z]: annealed partition function of the pair measure.
pub fn annealed_log_z<T: Scalar>(params: &ModelParams<T>, mode: AnnealedMode) -> Result<T> {
    match mode {
        AnnealedMode::ExactSum => {
            if 2 * params.k > params.n {
                return Err(CavityError::invalid(format!(
                    "exact overlap sum needs 2k <= n, got k = {}, n = {}",
                    params.k, params.n
                )));
            }
            let nf = from_count::<T>(params.n);
            let mut acc = T::neg_infinity();
            for q in 0..=params.k {
                let theta = overlap_entropy(|m| ln_binomial(nf, m), params.k, q);
                let term = theta + overlap_energy(params, q);
                acc = log_add(acc, term);
            }
            Ok(acc)
        }
        AnnealedMode::Asymptotic => {
            let c = params.c();
            if !(c > T::one()) {
                return Err(CavityError::invalid(format!(
                    "asymptotic form needs c > 1, got c = {c}"
                )));
            }
            let hc = htilde_critical(params.beta, params.p, c)?;
            if params.htilde == hc {
                return Err(CavityError::invalid(
                    "htilde sits exactly on the critical line; no single-phase asymptotic"
                        .to_string(),
                ));
            }
            Ok(asymptotic_log_z(params, params.htilde > hc))
        }
    }
}

/// The explicit leading terms (through k ln k) of ln E[Z] in each phase; the
/// dropped remainder is o(k).
pub fn asymptotic_log_z<T: Scalar>(params: &ModelParams<T>, overlap_phase: bool) -> T {
    let two = T::one() + T::one();
    let k = from_count::<T>(params.k);
    let ln_n = from_count::<T>(params.n).ln();
    if overlap_phase {
        let f2 = pair_exponent(two * params.beta, params.p, Deriv::Value);
        k * ln_n + k - f2 * k * (k - T::one()) / two - k * k.ln()
    } else {
        let f1 = pair_exponent(params.beta, params.p, Deriv::Value);
        two * k * ln_n + two * k
            - params.beta * params.htilde * k * k
            - f1 * k * k
            - two * k * k.ln()
    }
}

/// Exact integer argmax of the overlap decomposition's exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapArgmax<T> {
    pub q_star: usize,
    pub value: T,
    /// Overlaps whose exponent ties the max within 1e-12 of its scale.
    pub ties: Vec<usize>,
}

pub fn argmax_overlap<T: Scalar>(params: &ModelParams<T>) -> Result<OverlapArgmax<T>> {
    argmax_overlap_with_ln_n(params, from_count::<T>(params.n).ln())
}

/// Same scan with ln n supplied directly, for size regimes where n itself
/// overflows the scalar.
pub fn argmax_overlap_with_ln_n<T: Scalar>(
    params: &ModelParams<T>,
    ln_n: T,
) -> Result<OverlapArgmax<T>> {
    let ln_choose_n = |m: usize| {
        // ln C(n, m) for huge n: m ln n - ln m! plus vanishing corrections.
        let mut acc = T::zero();
        for i in 0..m {
            acc += ln_n + (-from_count::<T>(i) * (-ln_n).exp()).ln_1p();
        }
        acc - crate::numeric::ln_factorial::<T>(m)
    };
    let mut best_q = 0usize;
    let mut best = T::neg_infinity();
    let mut values = Vec::with_capacity(params.k + 1);
    for q in 0..=params.k {
        let v = overlap_entropy(ln_choose_n, params.k, q) + overlap_energy(params, q);
        values.push(v);
        if v > best {
            best = v;
            best_q = q;
        }
    }
    let tol = T::from_f64(1e-12).unwrap() * (T::one() + best.abs());
    let ties: Vec<usize> = (0..=params.k)
        .filter(|&q| q != best_q && (values[q] - best).abs() <= tol)
        .collect();
    Ok(OverlapArgmax {
        q_star: best_q,
        value: best,
        ties,
    })
}

/// Phase labels of the (beta, htilde) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// htilde above the first-order line: identical pairs dominate.
    A,
    /// Below the line, low temperature: locked disjoint pairs.
    B,
    /// Below the line, high temperature: free disjoint pairs.
    C,
    /// Exactly on the first-order line.
    OnHtildeBoundary,
    /// Below the line, exactly at the low-temperature transition.
    OnBetaBoundary,
}

/// Asymptotic densities (per k^2, overlap per k) of one phase branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableDensities<T> {
    pub energy: T,
    pub energy_variance: T,
    pub overlap: T,
    pub entropy: T,
}

/// Classification plus the densities of every branch touching the point
/// (one branch off the boundaries, two on them).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport<T> {
    pub region: Region,
    pub critical: CriticalValues<T>,
    pub branches: Vec<(Region, ObservableDensities<T>)>,
}

fn branch_densities<T: Scalar>(
    params: &ModelParams<T>,
    c: T,
    region: Region,
) -> ObservableDensities<T> {
    let two = T::one() + T::one();
    let b = params.beta;
    let p = params.p;
    let ln_inv_p = -p.ln();
    match region {
        Region::A => ObservableDensities {
            energy: pair_exponent(two * b, p, Deriv::First),
            energy_variance: -pair_exponent(two * b, p, Deriv::Second),
            overlap: T::one(),
            entropy: ln_inv_p / c - pair_exponent(two * b, p, Deriv::Value) / two
                + b * pair_exponent(two * b, p, Deriv::First),
        },
        Region::B => ObservableDensities {
            energy: pair_exponent(b, p, Deriv::First) + params.htilde,
            energy_variance: -pair_exponent(b, p, Deriv::Second),
            overlap: T::zero(),
            entropy: two * ln_inv_p / c - pair_exponent(b, p, Deriv::Value)
                + b * pair_exponent(b, p, Deriv::First),
        },
        Region::C => ObservableDensities {
            energy: pair_exponent(b, p, Deriv::First) + params.htilde,
            energy_variance: -pair_exponent(b, p, Deriv::Second),
            overlap: T::zero(),
            entropy: ln_inv_p / c,
        },
        _ => unreachable!("boundary regions report their adjacent branches"),
    }
}

/// Classify (beta, htilde) and fill the asymptotic observable densities.
/// Exactly on a boundary both adjacent branches are reported and the region
/// is the boundary marker, never a silently chosen side.
pub fn phase_classify<T: Scalar>(params: &ModelParams<T>) -> Result<PhaseReport<T>> {
    let c = params.c();
    let critical = critical_lines(params.beta, params.p, c)?;
    let (region, branch_regions): (Region, Vec<Region>) = if params.htilde == critical.htilde_c {
        (
            Region::OnHtildeBoundary,
            vec![Region::A, side_of_beta(params.beta, critical.beta_c)],
        )
    } else if params.htilde > critical.htilde_c {
        (Region::A, vec![Region::A])
    } else if params.beta == critical.beta_c {
        (Region::OnBetaBoundary, vec![Region::B, Region::C])
    } else if params.beta > critical.beta_c {
        (Region::B, vec![Region::B])
    } else {
        (Region::C, vec![Region::C])
    };
    let branches = branch_regions
        .into_iter()
        .map(|r| (r, branch_densities(params, c, r)))
        .collect();
    Ok(PhaseReport {
        region,
        critical,
        branches,
    })
}

fn side_of_beta<T: Scalar>(beta: T, beta_c: T) -> Region {
    if beta > beta_c {
        Region::B
    } else {
        Region::C
    }
}
