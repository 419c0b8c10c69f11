//! Hashtag co-occurrence graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::Corpus;

/// Undirected weighted graph; edge keys are ordered `(a, b)` with `a < b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoocGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

type EdgeCounts = BTreeMap<(String, String), u64>;

fn merge(mut a: EdgeCounts, b: EdgeCounts) -> EdgeCounts {
    for (k, w) in b {
        *a.entry(k).or_default() += w;
    }
    a
}

impl CoocGraph {
    pub fn weighted_degrees(&self) -> BTreeMap<&str, u64> {
        let mut deg: BTreeMap<&str, u64> = self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for ((a, b), w) in &self.edges {
            *deg.get_mut(a.as_str()).unwrap() += w;
            *deg.get_mut(b.as_str()).unwrap() += w;
        }
        deg
    }

    pub fn weight(&self, a: &str, b: &str) -> u64 {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges
            .get(&(key.0.to_string(), key.1.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Nodes ordered by weighted degree descending, then tag.
    pub fn ranking(&self) -> Vec<(&str, u64)> {
        let mut r: Vec<(&str, u64)> = self.weighted_degrees().into_iter().collect();
        r.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        r
    }

    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tag_a,tag_b,weight")?;
        for ((a, b), n) in &self.edges {
            writeln!(w, "{a},{b},{n}")?;
        }
        Ok(())
    }

    pub fn write_nodes_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tag,weighted_degree")?;
        for (tag, d) in self.ranking() {
            writeln!(w, "{tag},{d}")?;
        }
        Ok(())
    }
}

/// Every tweet by a cohort member with `h >= 2` distinct hashtags adds 1 to
/// each of its `h choose 2` pairs. Nodes are all hashtags the cohort used.
pub fn cooccurrence_graph(c: &Corpus, cohort: &BTreeSet<String>) -> CoocGraph {
    let tweets: Vec<&Vec<String>> = cohort
        .iter()
        .flat_map(|u| c.timeline(u))
        .map(|t| &t.hashtags)
        .collect();
    let edges = tweets
        .par_iter()
        .fold(EdgeCounts::new, |mut acc, tags| {
            let uniq: BTreeSet<&String> = tags.iter().collect();
            let uniq: Vec<&String> = uniq.into_iter().collect();
            for i in 0..uniq.len() {
                for j in i + 1..uniq.len() {
                    *acc.entry((uniq[i].clone(), uniq[j].clone())).or_default() += 1;
                }
            }
            acc
        })
        .reduce(EdgeCounts::new, merge);
    let nodes = tweets.iter().flat_map(|t| t.iter().cloned()).collect();
    CoocGraph { nodes, edges }
}

/// Induced subgraph on the `k` highest weighted-degree nodes.
pub fn top_k_subgraph(g: &CoocGraph, k: usize) -> CoocGraph {
    let keep: BTreeSet<String> = g
        .ranking()
        .into_iter()
        .take(k)
        .map(|(n, _)| n.to_string())
        .collect();
    let edges = g
        .edges
        .iter()
        .filter(|((a, b), _)| keep.contains(a) && keep.contains(b))
        .map(|(k, w)| (k.clone(), *w))
        .collect();
    CoocGraph { nodes: keep, edges }
}
