//! Independent oracles shared by the integration suites. Everything here
//! recomputes quantities by direct enumeration, never through the code paths
//! under test.
#![allow(dead_code)]

use cavity_core::configuration::{Configuration, SubsetIter};
use cavity_core::graph::Graph;
use cavity_core::thermo::ModelParams;
use std::collections::HashMap;

/// Maximum clique size by dynamic programming over all vertex subsets.
pub fn max_clique_exhaustive(graph: &Graph) -> usize {
    let n = graph.n();
    assert!(n <= 20, "exhaustive scan limited to tiny graphs");
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && graph.has_edge(i, j) {
                adj[i] |= 1 << j;
            }
        }
    }
    let mut best = 0usize;
    // is_clique[s] via lowest-bit recursion.
    let mut is_clique = vec![false; 1 << n];
    is_clique[0] = true;
    for s in 1usize..1 << n {
        let v = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        is_clique[s] = is_clique[rest] && (rest as u32 & !adj[v]) == 0;
        if is_clique[s] {
            best = best.max(s.count_ones() as usize);
        }
    }
    best
}

/// All global minimizers of the subset energy, by exhaustive scan.
pub fn grand_minimizers_exhaustive(graph: &Graph, h: f64) -> (f64, Vec<usize>) {
    let n = graph.n();
    assert!(n <= 16);
    let mut best = f64::INFINITY;
    let mut arg = Vec::new();
    for s in 0usize..1 << n {
        let verts: Vec<usize> = (0..n).filter(|&v| s >> v & 1 == 1).collect();
        let mut missing = 0usize;
        for (a, &i) in verts.iter().enumerate() {
            for &j in &verts[a + 1..] {
                missing += graph.is_missing(i, j) as usize;
            }
        }
        let energy = 2.0 * missing as f64 - h * verts.len() as f64;
        if energy < best - 1e-12 {
            best = energy;
            arg = vec![s];
        } else if (energy - best).abs() <= 1e-12 {
            arg.push(s);
        }
    }
    (best, arg)
}

/// Direct pair energy: ordered double sum over the supports plus the
/// chemical term. Independent of the bitset code paths.
pub fn pair_energy_naive(graph: &Graph, sigma: &Configuration, tau: &Configuration, h: f64) -> f64 {
    let mut h0 = 0usize;
    for &i in sigma.vertices() {
        for &j in tau.vertices() {
            if i != j && graph.is_missing(i, j) {
                h0 += 1;
            }
        }
    }
    h0 as f64 + h * (sigma.len() - sigma.overlap(tau)) as f64
}

/// Enumerated one-step distribution from sigma, normalized.
pub fn kernel_row_enumerated(
    graph: &Graph,
    sigma: &Configuration,
    beta: f64,
    h: f64,
) -> Vec<(Configuration, f64)> {
    let k = sigma.len();
    let mut weights: Vec<(Configuration, f64)> = SubsetIter::new(graph.n(), k)
        .map(|tau| {
            let e = pair_energy_naive(graph, sigma, &tau, h);
            (tau, (-beta * e).exp())
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut weights {
        *w /= total;
    }
    weights
}

/// ln Z by direct enumeration of all configuration pairs.
pub fn ln_z_pair_enumeration(graph: &Graph, params: &ModelParams<f64>) -> f64 {
    let h = params.htilde * params.k as f64;
    let mut acc = f64::NEG_INFINITY;
    for sigma in SubsetIter::new(graph.n(), params.k) {
        for tau in SubsetIter::new(graph.n(), params.k) {
            let e = pair_energy_naive(graph, &sigma, &tau, h);
            acc = logadd(acc, -params.beta * e);
        }
    }
    acc
}

pub fn logadd(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Empirical total-variation distance between draw counts and a reference
/// distribution over the same support.
pub fn tv_distance(
    counts: &HashMap<Configuration, usize>,
    reference: &[(Configuration, f64)],
    draws: usize,
) -> f64 {
    let mut tv = 0.0;
    for (state, prob) in reference {
        let emp = *counts.get(state).unwrap_or(&0) as f64 / draws as f64;
        tv += (emp - prob).abs();
    }
    tv / 2.0
}

/// Exact count of level-occupation tuples with given totals, the number of
/// feasible tuples, and the best integer relaxation exponent
/// max Σ -g ε(n/g) over those tuples.
pub fn occupation_count_exact(degeneracy: &[u64], particles: u64, energy: u64) -> (u128, u64, f64) {
    fn entropy_term(g: u64, n: u64) -> f64 {
        if n == 0 || n == g {
            return 0.0;
        }
        let x = n as f64 / g as f64;
        -(g as f64) * (x * x.ln() + (1.0 - x) * (1.0 - x).ln())
    }
    fn choose(g: u64, n: u64) -> u128 {
        cavity_core::numeric::choose_exact(g, n)
    }
    fn recurse(
        degeneracy: &[u64],
        level: usize,
        particles_left: u64,
        energy_left: u64,
        product: u128,
        exponent: f64,
        out: &mut (u128, u64, f64),
    ) {
        if level == degeneracy.len() {
            if particles_left == 0 && energy_left == 0 && product > 0 {
                out.0 += product;
                out.1 += 1;
                out.2 = out.2.max(exponent);
            }
            return;
        }
        let g = degeneracy[level];
        for take in 0..=g.min(particles_left) {
            let e_used = take * level as u64;
            if e_used > energy_left {
                break;
            }
            recurse(
                degeneracy,
                level + 1,
                particles_left - take,
                energy_left - e_used,
                product * choose(g, take),
                exponent + entropy_term(g, take),
                out,
            );
        }
    }
    let mut out = (0u128, 0u64, f64::NEG_INFINITY);
    recurse(degeneracy, 0, particles, energy, 1, 0.0, &mut out);
    out
}
