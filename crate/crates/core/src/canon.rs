//! Canonical forms of small vertex- and edge-labelled graphs.
//!
//! Colour refinement followed by individualization of the first smallest
//! non-singleton cell; the certificate is the lexicographically smallest
//! encoding over all leaves of the search tree. The search is bounded by a
//! leaf budget, and `None` is returned when it is exhausted so callers can
//! fall back to treating graphs as distinct.

use std::collections::BTreeMap;

pub const DEFAULT_BUDGET: usize = 50_000;

struct Graph<'a> {
    labels: &'a [u64],
    adj: Vec<Vec<(usize, u64)>>,
}

/// Canonical certificate of the graph, or `None` if the leaf budget runs out.
/// Two graphs get equal certificates iff they are isomorphic (labels respected).
pub fn certificate(labels: &[u64], edges: &[(usize, usize, u64)], budget: usize) -> Option<Vec<u64>> {
    let n = labels.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b, l) in edges {
        adj[a].push((b, l));
        adj[b].push((a, l));
    }
    let g = Graph { labels, adj };
    let colors = refine(&g, rank(labels.iter().map(|&l| vec![l])));
    let mut best: Option<Vec<u64>> = None;
    let mut leaves = 0usize;
    if search(&g, colors, &mut best, &mut leaves, budget) {
        best
    } else {
        None
    }
}

/// Dense ranks of the keys, ordered by key value.
fn rank<I: Iterator<Item = Vec<u64>>>(keys: I) -> Vec<u64> {
    let keys: Vec<Vec<u64>> = keys.collect();
    let ordered: BTreeMap<&Vec<u64>, u64> = {
        let mut m = BTreeMap::new();
        for k in &keys {
            m.insert(k, 0);
        }
        for (i, v) in m.values_mut().enumerate() {
            *v = i as u64;
        }
        m
    };
    keys.iter().map(|k| ordered[k]).collect()
}

fn class_count(colors: &[u64]) -> usize {
    let mut c: Vec<u64> = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn refine(g: &Graph<'_>, mut colors: Vec<u64>) -> Vec<u64> {
    let mut classes = class_count(&colors);
    loop {
        let next = rank((0..colors.len()).map(|v| {
            let mut sig: Vec<(u64, u64)> = g.adj[v].iter().map(|&(u, l)| (colors[u], l)).collect();
            sig.sort_unstable();
            let mut key = vec![colors[v]];
            for (c, l) in sig {
                key.push(c);
                key.push(l);
            }
            key
        }));
        let now = class_count(&next);
        colors = next;
        if now == classes {
            return colors;
        }
        classes = now;
    }
}

fn encode(g: &Graph<'_>, colors: &[u64]) -> Vec<u64> {
    // colors form a discrete partition here: colors[v] is v's canonical position
    let n = colors.len();
    let mut order = vec![0usize; n];
    for (v, &c) in colors.iter().enumerate() {
        order[c as usize] = v;
    }
    let mut out = Vec::with_capacity(n * 4);
    out.push(n as u64);
    for &v in &order {
        out.push(g.labels[v]);
    }
    let mut edges: Vec<(u64, u64, u64)> = Vec::new();
    for v in 0..n {
        for &(u, l) in &g.adj[v] {
            let (a, b) = (colors[v], colors[u]);
            if a < b {
                edges.push((a, b, l));
            }
        }
    }
    edges.sort_unstable();
    for (a, b, l) in edges {
        out.extend([a, b, l]);
    }
    out
}

fn search(
    g: &Graph<'_>,
    colors: Vec<u64>,
    best: &mut Option<Vec<u64>>,
    leaves: &mut usize,
    budget: usize,
) -> bool {
    let n = colors.len();
    let mut sizes: BTreeMap<u64, usize> = BTreeMap::new();
    for &c in &colors {
        *sizes.entry(c).or_default() += 1;
    }
    if sizes.len() == n {
        *leaves += 1;
        if *leaves > budget {
            return false;
        }
        let cert = encode(g, &colors);
        if best.as_ref().is_none_or(|b| cert < *b) {
            *best = Some(cert);
        }
        return true;
    }
    // first cell of minimum size > 1
    let (&cell, _) = sizes
        .iter()
        .filter(|(_, &s)| s > 1)
        .min_by_key(|(&c, &s)| (s, c))
        .expect("non-discrete partition has a non-singleton cell");
    for v in (0..n).filter(|&v| colors[v] == cell) {
        let split = rank((0..n).map(|u| vec![colors[u], u64::from(u != v)]));
        if !search(g, refine(g, split), best, leaves, budget) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relabel(labels: &[u64], edges: &[(usize, usize, u64)], perm: &[usize]) -> (Vec<u64>, Vec<(usize, usize, u64)>) {
        let mut l2 = vec![0; labels.len()];
        for (v, &l) in labels.iter().enumerate() {
            l2[perm[v]] = l;
        }
        let e2 = edges.iter().map(|&(a, b, l)| (perm[a], perm[b], l)).collect();
        (l2, e2)
    }

    #[test]
    fn isomorphic_graphs_share_certificate() {
        // hexagon with a pendant: highly symmetric core
        let labels = vec![1, 1, 1, 1, 1, 1, 2];
        let edges = vec![(0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 4, 0), (4, 5, 0), (5, 0, 0), (0, 6, 1)];
        let a = certificate(&labels, &edges, DEFAULT_BUDGET).unwrap();
        let (l2, e2) = relabel(&labels, &edges, &[3, 6, 0, 5, 1, 2, 4]);
        assert_eq!(a, certificate(&l2, &e2, DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn regular_non_isomorphic_graphs_differ() {
        // two triangles vs a hexagon: colour refinement alone cannot tell them apart
        let labels = vec![0; 6];
        let tri = vec![(0, 1, 0), (1, 2, 0), (2, 0, 0), (3, 4, 0), (4, 5, 0), (5, 3, 0)];
        let hex = vec![(0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 4, 0), (4, 5, 0), (5, 0, 0)];
        assert_ne!(
            certificate(&labels, &tri, DEFAULT_BUDGET),
            certificate(&labels, &hex, DEFAULT_BUDGET)
        );
    }

    #[test]
    fn budget_exhaustion_reports_none() {
        let labels = vec![0; 8];
        assert!(certificate(&labels, &[], 3).is_none());
    }
}
