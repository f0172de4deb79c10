//! Exact maximum clique by branch and bound with a greedy-coloring bound.
//!
//! The search is always exact: blowing the node budget is a hard error,
//! never a silent heuristic answer.

use crate::configuration::Configuration;
use crate::error::{CavityError, Result};
use crate::graph::Graph;

pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

/// Size and witness of a maximum clique.
pub fn max_clique(graph: &Graph) -> Result<(usize, Configuration)> {
    max_clique_with_budget(graph, DEFAULT_NODE_BUDGET)
}

pub fn max_clique_with_budget(graph: &Graph, budget: u64) -> Result<(usize, Configuration)> {
    let mut search = Search::new(graph, budget);
    // Root candidate order: degree descending helps the coloring bound.
    let mut order: Vec<usize> = (0..graph.n()).collect();
    let degree: Vec<usize> = (0..graph.n()).map(|v| popcount(&search.adj[v])).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));
    let mut current = Vec::new();
    search.expand(&mut current, order)?;
    let size = search.best.len();
    let witness = Configuration::new(search.best, graph.n())?;
    debug_assert!(graph.is_clique(witness.vertices()));
    Ok((size, witness))
}

struct Search<'a> {
    adj: Vec<Vec<u64>>,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
    _graph: &'a Graph,
}

impl<'a> Search<'a> {
    fn new(graph: &'a Graph, budget: u64) -> Self {
        let adj = (0..graph.n()).map(|v| graph.adjacency_row(v)).collect();
        Search {
            adj,
            best: vec![0], // any vertex is a 1-clique
            nodes: 0,
            budget,
            _graph: graph,
        }
    }

    /// Greedy coloring of the candidate list; returns (vertex, color)
    /// sorted by ascending color. `color` bounds the clique size inside
    /// the class prefix up to that vertex.
    fn color_sort(&self, candidates: &[usize]) -> Vec<(usize, usize)> {
        let words = self.adj.first().map_or(0, |r| r.len());
        let mut class_masks: Vec<Vec<u64>> = Vec::new();
        let mut class_members: Vec<Vec<usize>> = Vec::new();
        for &v in candidates {
            let row = &self.adj[v];
            let slot = class_masks
                .iter()
                .position(|cm| cm.iter().zip(row).all(|(&c, &a)| c & a == 0));
            match slot {
                Some(ci) => {
                    class_masks[ci][v / 64] |= 1 << (v % 64);
                    class_members[ci].push(v);
                }
                None => {
                    let mut cm = vec![0u64; words];
                    cm[v / 64] |= 1 << (v % 64);
                    class_masks.push(cm);
                    class_members.push(vec![v]);
                }
            }
        }
        let mut out = Vec::with_capacity(candidates.len());
        for (ci, members) in class_members.iter().enumerate() {
            for &v in members {
                out.push((v, ci + 1));
            }
        }
        out
    }

    fn expand(&mut self, current: &mut Vec<usize>, candidates: Vec<usize>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(CavityError::BudgetExceeded {
                what: "clique branch-and-bound nodes",
                needed: self.nodes as u128,
                cap: self.budget as u128,
            });
        }
        if candidates.is_empty() {
            if current.len() > self.best.len() {
                self.best = current.clone();
            }
            return Ok(());
        }
        let mut colored = self.color_sort(&candidates);
        while let Some((v, color)) = colored.pop() {
            if current.len() + color <= self.best.len() {
                // Every remaining candidate has an equal or smaller color.
                return Ok(());
            }
            current.push(v);
            let next: Vec<usize> = colored
                .iter()
                .map(|&(u, _)| u)
                .filter(|&u| bit(&self.adj[v], u))
                .collect();
            if next.is_empty() {
                if current.len() > self.best.len() {
                    self.best = current.clone();
                }
            } else {
                self.expand(current, next)?;
            }
            current.pop();
        }
        Ok(())
    }
}

#[inline]
fn bit(mask: &[u64], v: usize) -> bool {
    mask[v / 64] >> (v % 64) & 1 == 1
}

#[inline]
fn popcount(mask: &[u64]) -> usize {
    mask.iter().map(|w| w.count_ones() as usize).sum()
}
