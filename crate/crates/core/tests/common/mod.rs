#![allow(dead_code)]

use std::collections::VecDeque;

/// Carry-less product of `a` and `b` reduced modulo `poly` of degree `p`.
pub fn poly_mul(a: u32, b: u32, p: u32, poly: u32) -> u32 {
    let mut acc = 0u32;
    for t in 0..p {
        if (b >> t) & 1 == 1 {
            acc ^= a << t;
        }
    }
    for t in (p..2 * p).rev() {
        if (acc >> t) & 1 == 1 {
            acc ^= poly << (t - p);
        }
    }
    acc
}

/// Reference primitive polynomials for degrees 1..=8.
pub fn reference_poly(p: u32) -> u32 {
    [0, 0b11, 0b111, 0b1011, 0b10011, 0b100101, 0b1000011, 0b10001001, 0b100011101][p as usize]
}

/// Shortest cycle length of an undirected multigraph given as an edge list,
/// `None` for a forest. Parallel edges count as 2-cycles.
pub fn girth_oracle(nodes: usize, edges: &[(usize, usize)]) -> Option<usize> {
    let mut adj = vec![Vec::new(); nodes];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, id));
        adj[b].push((a, id));
    }
    let mut best: Option<usize> = None;
    for src in 0..nodes {
        let mut dist = vec![usize::MAX; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &(v, id) in &adj[u] {
                if id == via[u] {
                    continue;
                }
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    via[v] = id;
                    queue.push_back(v);
                } else {
                    let len = dist[u] + dist[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}

/// Edge list of a Tanner graph: symbols `0..n`, checks `n..n+m`.
pub fn tanner_edges(g: &nbldpc::TannerGraph) -> Vec<(usize, usize)> {
    let n = g.n_symbols();
    g.edges().iter().map(|e| (e.symbol, n + e.check)).collect()
}

/// Tanner edges plus one link per distinct (modulation symbol, coded symbol)
/// pair; modulation nodes follow the checks.
pub fn global_edges(g: &nbldpc::TannerGraph, perm: &[usize], p: usize, m: usize) -> (usize, Vec<(usize, usize)>) {
    let n = g.n_symbols();
    let base = n + g.n_checks();
    let n_mod = perm.len() / m;
    let mut edges = tanner_edges(g);
    let mut links: Vec<(usize, usize)> = perm.iter().enumerate().map(|(b, &d)| (d / m, b / p)).collect();
    links.sort_unstable();
    links.dedup();
    edges.extend(links.into_iter().map(|(k, i)| (base + k, i)));
    (base + n_mod, edges)
}

pub fn median(v: &mut [usize]) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}
