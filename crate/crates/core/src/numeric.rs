//! Log-domain primitives: stable log-add, log-binomials, bisection.
//!
//! Everything that touches binomial coefficients goes through log-gamma or an
//! explicit product of logs; no factorial is ever formed in linear space.

use crate::error::{CavityError, Result};
use crate::scalar::{from_count, Scalar};

/// ln(e^a + e^b), tolerating -inf on either side.
#[inline]
pub fn log_add<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln Σ e^{x_i} over a slice, folded left to right (fixed accumulation order
/// keeps reruns bit-identical).
pub fn log_sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::neg_infinity(), |acc, &x| log_add(acc, x))
}

/// ln n! for a non-negative count.
#[inline]
pub fn ln_factorial<T: Scalar>(n: usize) -> T {
    from_count::<T>(n + 1).ln_gamma()
}

/// ln m! under the convention m! = 1 whenever m <= 1 (negative m included).
/// The second-moment entropy bound is stated with this convention so that it
/// stays finite on the whole maximization polyhedron.
#[inline]
pub fn ln_factorial_ext<T: Scalar>(m: i64) -> T {
    if m <= 1 {
        T::zero()
    } else {
        ln_factorial(m as usize)
    }
}

/// ln C(n, m) for real n >= 0 and integer m.
///
/// Uses the explicit product Σ_i ln(n-i) - ln m! whenever m is moderate: the
/// asymptotic scans feed n of order e^90 here, where a difference of two
/// log-gammas would lose every significant digit.
pub fn ln_binomial<T: Scalar>(n: T, m: usize) -> T {
    if m == 0 {
        return T::zero();
    }
    let mf = from_count::<T>(m);
    if n < mf {
        // No m-subset of an n-set.
        return T::neg_infinity();
    }
    if m <= 4096 {
        let mut acc = T::zero();
        for i in 0..m {
            acc += (n - from_count::<T>(i)).ln();
        }
        acc - ln_factorial::<T>(m)
    } else {
        (n + T::one()).ln_gamma() - ln_factorial::<T>(m) - (n - mf + T::one()).ln_gamma()
    }
}

/// ln C(n, m) with integer n.
#[inline]
pub fn ln_choose<T: Scalar>(n: usize, m: usize) -> T {
    if m > n {
        return T::neg_infinity();
    }
    // Symmetry keeps the product short.
    let m = m.min(n - m);
    ln_binomial(from_count::<T>(n), m)
}

/// Exact C(n, m) as u128; panics on overflow (callers stay tiny).
pub fn choose_exact(n: u64, m: u64) -> u128 {
    if m > n {
        return 0;
    }
    let m = m.min(n - m);
    let mut num: u128 = 1;
    for i in 0..m {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    num
}

/// Bisection for a strictly monotone function with a sign change on [lo, hi].
///
/// `decreasing` states the monotonicity; the bracket is validated first.
/// Converges to `tol` on the abscissa or errors out after `max_iter`.
pub fn bisect<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    tol: T,
    max_iter: usize,
) -> Result<T> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if (flo > T::zero()) == (fhi > T::zero()) {
        return Err(CavityError::NonConvergence(format!(
            "no sign change on bracket [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    let lo_positive = flo > T::zero();
    for _ in 0..max_iter {
        let mid = (lo + hi) / (T::one() + T::one());
        let fm = f(mid);
        if fm == T::zero() || hi - lo <= tol {
            return Ok(mid);
        }
        if (fm > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / (T::one() + T::one()))
}

/// Minimize a strictly convex function on [lo, hi] by golden-section search.
pub fn minimize_convex<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> (T, T) {
    let phi = (T::one() + from_count::<T>(5).sqrt()) / (T::one() + T::one());
    let inv_phi = T::one() / phi;
    let mut a = hi - (hi - lo) * inv_phi;
    let mut b = lo + (hi - lo) * inv_phi;
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - (hi - lo) * inv_phi;
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + (hi - lo) * inv_phi;
            fb = f(b);
        }
    }
    let x = (lo + hi) / (T::one() + T::one());
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_handles_spread() {
        let a = 1234.0f64;
        let b = 1232.0f64;
        let expect = 1232.0 + (2f64.exp() + 1.0).ln();
        assert!((log_add(a, b) - expect).abs() < 1e-12);
        assert_eq!(log_add(f64::NEG_INFINITY, 3.0), 3.0);
        assert_eq!(
            log_add(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn ln_choose_matches_exact() {
        for n in 0..25u64 {
            for m in 0..=n {
                let exact = choose_exact(n, m) as f64;
                let vialn: f64 = ln_choose(n as usize, m as usize);
                assert!(
                    (vialn - exact.ln()).abs() < 1e-10 * exact.ln().abs().max(1.0),
                    "C({n},{m})"
                );
            }
        }
    }

    #[test]
    fn ln_binomial_huge_population() {
        // C(n, 2) = n(n-1)/2 for n = 1e30, checked in logs.
        let n = 1e30f64;
        let got = ln_binomial(n, 2);
        let expect = n.ln() + (n - 1.0).ln() - 2f64.ln();
        assert!((got - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn ln_factorial_ext_convention() {
        assert_eq!(ln_factorial_ext::<f64>(-7), 0.0);
        assert_eq!(ln_factorial_ext::<f64>(0), 0.0);
        assert_eq!(ln_factorial_ext::<f64>(1), 0.0);
        assert!((ln_factorial_ext::<f64>(4) - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x: f64| x + 10.0, 0.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn golden_section_minimum() {
        let (x, v) = minimize_convex(|x: f64| (x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-12);
        // Comparisons near the minimum are noise-limited at sqrt(eps).
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-15);
    }
}
