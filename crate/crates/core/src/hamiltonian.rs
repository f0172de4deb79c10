//! Cavity fields, the pair energy, and the typical-pair diagnostics.
//!
//! The ordered-sum convention is used throughout: the cross term between two
//! configurations counts ordered incidences, so a missing pair inside the
//! intersection contributes twice. A unit test pins the convention through
//! the identity `H(sigma, tau) = sum_i h_i(sigma) tau_i`.

use crate::configuration::Configuration;
use crate::error::{CavityError, Result};
use crate::fermi::xc_set;
use crate::graph::Graph;
use crate::scalar::{from_count, Scalar};
use crate::thermo::{htilde_critical, pair_exponent, Deriv, ModelParams};

/// One degeneracy level of the single-step weight spectrum: all sites whose
/// cavity field equals `l + r h` (r = 1 iff the site is outside sigma).
#[derive(Debug, Clone)]
pub struct Level {
    pub l: usize,
    pub outside: bool,
    pub sites: Vec<usize>,
}

/// Cavity fields of a configuration plus their level decomposition.
#[derive(Debug, Clone)]
pub struct FieldTable<T> {
    pub fields: Vec<T>,
    pub k: usize,
    pub h: T,
    /// Levels in increasing (l, r) order; empty levels omitted.
    pub levels: Vec<Level>,
}

impl<T: Scalar> FieldTable<T> {
    /// Energy value of a level.
    pub fn level_value(&self, level: &Level) -> T {
        from_count::<T>(level.l) + if level.outside { self.h } else { T::zero() }
    }

    /// Degeneracy table g[r][l] for l = 0..=k.
    pub fn degeneracies(&self) -> [Vec<usize>; 2] {
        let mut g = [vec![0usize; self.k + 1], vec![0usize; self.k + 1]];
        for lev in &self.levels {
            g[lev.outside as usize][lev.l] = lev.sites.len();
        }
        g
    }

    /// Occupation of each level by the sites of `tau` (aligned with
    /// `self.levels`).
    pub fn occupations(&self, tau: &Configuration) -> Vec<usize> {
        self.levels
            .iter()
            .map(|lev| lev.sites.iter().filter(|&&i| tau.contains(i)).count())
            .collect()
    }

    /// Level-decomposed energy: sum of level values times occupations.
    pub fn occupation_energy(&self, tau: &Configuration) -> T {
        self.levels
            .iter()
            .map(|lev| {
                self.level_value(lev)
                    * from_count::<T>(lev.sites.iter().filter(|&&i| tau.contains(i)).count())
            })
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Cavity field of every site: missing links into `sigma` plus the chemical
/// penalty `h` for sites outside.
pub fn cavity_fields<T: Scalar>(graph: &Graph, sigma: &Configuration, h: T) -> FieldTable<T> {
    let n = graph.n();
    let k = sigma.len();
    let mask = sigma.bitmask(n);
    let mut fields = vec![T::zero(); n];
    // sites_by[r][l]
    let mut sites_by = vec![vec![Vec::<usize>::new(); k + 1]; 2];
    for i in 0..n {
        let missing = graph.missing_to_mask(i, &mask);
        let inside = mask[i / 64] >> (i % 64) & 1 == 1;
        debug_assert!(missing <= if inside { k - 1 } else { k });
        fields[i] = from_count::<T>(missing) + if inside { T::zero() } else { h };
        sites_by[!inside as usize][missing].push(i);
    }
    let mut levels = Vec::new();
    for (r, by_l) in sites_by.into_iter().enumerate() {
        for (l, sites) in by_l.into_iter().enumerate() {
            if !sites.is_empty() {
                levels.push(Level {
                    l,
                    outside: r == 1,
                    sites,
                });
            }
        }
    }
    FieldTable {
        fields,
        k,
        h,
        levels,
    }
}

/// Pair observables. `pair_energy` fills the first three; `typicality`
/// fills the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDiagnostics<T> {
    /// Overlap |sigma ∩ tau|.
    pub q: usize,
    /// Ordered missing-link count between the supports.
    pub h0: usize,
    /// Total pair energy h0 + h (k - q).
    pub h: T,
    /// Sites of the symmetric difference whose missing-link density to the
    /// other side falls outside the positive-entropy window.
    pub qbar: Option<usize>,
    /// Membership in the typical-pair set; `None` exactly on the first-order
    /// line, where the set is not defined.
    pub in_typical_set: Option<bool>,
}

/// Ordered missing-link count and total energy of a configuration pair.
pub fn pair_energy<T: Scalar>(
    graph: &Graph,
    sigma: &Configuration,
    tau: &Configuration,
    h: T,
) -> Result<PairDiagnostics<T>> {
    if sigma.len() != tau.len() {
        return Err(CavityError::SizeMismatch(format!(
            "|sigma| = {}, |tau| = {}",
            sigma.len(),
            tau.len()
        )));
    }
    let mask = sigma.bitmask(graph.n());
    let q = sigma.overlap(tau);
    let h0: usize = tau
        .vertices()
        .iter()
        .map(|&j| graph.missing_to_mask(j, &mask))
        .sum();
    let energy = from_count::<T>(h0) + h * from_count::<T>(sigma.len() - q);
    Ok(PairDiagnostics {
        q,
        h0,
        h: energy,
        qbar: None,
        in_typical_set: None,
    })
}

/// The three parameter windows defining the typical-pair set at (beta,
/// htilde): overlap ratio, energy density, and atypical-site ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalWindows<T> {
    pub overlap: (T, T),
    pub energy_density: (T, T),
    pub atypical_ratio: (T, T),
    /// Set when htilde sits exactly on the first-order line.
    pub on_boundary: bool,
}

/// Interval family for the typical-pair membership test.
pub fn typical_windows<T: Scalar>(params: &ModelParams<T>, delta: T) -> Result<TypicalWindows<T>> {
    let c = params.c();
    let hc = htilde_critical(params.beta, params.p, c)?;
    let two = T::one() + T::one();
    if params.htilde == hc {
        return Ok(TypicalWindows {
            overlap: (T::zero(), T::one()),
            energy_density: (T::zero(), T::one()),
            atypical_ratio: (T::zero(), T::one()),
            on_boundary: true,
        });
    }
    let overlap_phase = params.htilde > hc;
    let overlap = if overlap_phase {
        (T::one() - delta, T::one())
    } else {
        (T::zero(), delta)
    };
    let center = if overlap_phase {
        pair_exponent(two * params.beta, params.p, Deriv::First)
    } else {
        pair_exponent(params.beta, params.p, Deriv::First)
    };
    let energy_density = (center - delta, center + delta);
    let beta_c = crate::thermo::beta_critical(params.p, c)?;
    let atypical_ratio = if !overlap_phase && params.beta > beta_c {
        (T::one() - two * delta, T::one())
    } else {
        (T::zero(), T::one())
    };
    Ok(TypicalWindows {
        overlap,
        energy_density,
        atypical_ratio,
        on_boundary: false,
    })
}

/// Full typical-pair diagnostics for (sigma, tau) at the given parameters.
///
/// The atypical-site count scans the symmetric difference: a site of
/// `tau \ sigma` is atypical when its missing-link density toward
/// `sigma \ tau` (count / |sigma \ tau|, chemical offset excluded) falls
/// outside the positive-entropy window, and symmetrically.
pub fn typicality<T: Scalar>(
    graph: &Graph,
    sigma: &Configuration,
    tau: &Configuration,
    params: &ModelParams<T>,
    delta: T,
) -> Result<PairDiagnostics<T>> {
    if !(delta > T::zero() && delta < T::from_f64(0.5).unwrap()) {
        return Err(CavityError::invalid("need delta in (0, 1/2)".to_string()));
    }
    let mut diag = pair_energy(graph, sigma, tau, params.h())?;
    let k = params.k;
    let q = diag.q;

    let (x_lo, x_hi) = xc_set(params.c(), params.p)?;
    let only_sigma: Vec<usize> = sigma
        .vertices()
        .iter()
        .copied()
        .filter(|&v| !tau.contains(v))
        .collect();
    let only_tau: Vec<usize> = tau
        .vertices()
        .iter()
        .copied()
        .filter(|&v| !sigma.contains(v))
        .collect();
    let count_atypical = |from: &[usize], into: &[usize]| -> usize {
        if into.is_empty() {
            return 0;
        }
        let mut mask = vec![0u64; graph.n().div_ceil(64)];
        for &v in into {
            mask[v / 64] |= 1 << (v % 64);
        }
        let denom = from_count::<T>(into.len());
        from.iter()
            .filter(|&&i| {
                let density = from_count::<T>(graph.missing_to_mask(i, &mask)) / denom;
                !(density > x_lo && density < x_hi)
            })
            .count()
    };
    let qbar = count_atypical(&only_tau, &only_sigma) + count_atypical(&only_sigma, &only_tau);
    diag.qbar = Some(qbar);

    let windows = typical_windows(params, delta)?;
    if windows.on_boundary {
        diag.in_typical_set = None;
        return Ok(diag);
    }
    let kf = from_count::<T>(k);
    let q_ratio = from_count::<T>(q) / kf;
    let h0_density = from_count::<T>(diag.h0) / (kf * kf);
    let qbar_ratio = if q == k {
        T::zero() // convention: ratio vanishes for identical supports
    } else {
        from_count::<T>(qbar) / (from_count::<T>(2 * (k - q)))
    };
    let inside = |x: T, (lo, hi): (T, T)| x >= lo && x <= hi;
    diag.in_typical_set = Some(
        inside(q_ratio, windows.overlap)
            && inside(h0_density, windows.energy_density)
            && inside(qbar_ratio, windows.atypical_ratio),
    );
    Ok(diag)
}
