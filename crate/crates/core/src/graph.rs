//! Undirected multigraph helpers shared by the Tanner graph and the global
//! (Tanner + interleaving) graph: BFS distances and shortest-cycle search.

use std::collections::VecDeque;
use std::fmt;

/// Length of the shortest cycle, or `Infinite` for a forest.
///
/// Ordered so that `Infinite` compares greater than any finite girth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Girth {
    Finite(usize),
    Infinite,
}

impl Girth {
    pub fn is_at_least(self, g: usize) -> bool {
        match self {
            Girth::Finite(x) => x >= g,
            Girth::Infinite => true,
        }
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Girth {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            Ok(Girth::Infinite)
        } else {
            s.parse().map(Girth::Finite)
        }
    }
}

/// Adjacency lists where every entry also carries an edge id, so that
/// parallel edges are distinguishable.
#[derive(Debug, Clone, Default)]
pub struct MultiGraph {
    adj: Vec<Vec<(usize, usize)>>,
    edges: usize,
}

impl MultiGraph {
    pub fn new(nodes: usize) -> Self {
        MultiGraph {
            adj: vec![Vec::new(); nodes],
            edges: 0,
        }
    }

    /// Appends an isolated node and returns its index.
    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        let id = self.edges;
        self.adj[a].push((b, id));
        self.adj[b].push((a, id));
        self.edges += 1;
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&(w, _)| w)
    }

    /// Hop distance from `src` to every node, `usize::MAX` if unreachable.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.adj.len()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &(w, _) in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest cycle through `src`-rooted BFS; the minimum over all roots is the girth.
    fn shortest_cycle_from(&self, src: usize, dist: &mut [usize], via: &mut [usize]) -> Option<usize> {
        dist.fill(usize::MAX);
        dist[src] = 0;
        via[src] = usize::MAX;
        let mut queue = VecDeque::new();
        queue.push_back(src);
        let mut best: Option<usize> = None;
        while let Some(u) = queue.pop_front() {
            if let Some(b) = best {
                // no shorter cycle can close beyond this level
                if 2 * dist[u] >= b {
                    break;
                }
            }
            for &(w, id) in &self.adj[u] {
                if id == via[u] {
                    continue;
                }
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    via[w] = id;
                    queue.push_back(w);
                } else {
                    let len = dist[u] + dist[w] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
        best
    }

    /// Length of the shortest cycle; a pair of parallel edges counts as a 2-cycle.
    pub fn girth(&self) -> Girth {
        let n = self.adj.len();
        let mut dist = vec![usize::MAX; n];
        let mut via = vec![usize::MAX; n];
        let mut best: Option<usize> = None;
        for v in 0..n {
            if let Some(c) = self.shortest_cycle_from(v, &mut dist, &mut via) {
                best = Some(best.map_or(c, |b| b.min(c)));
                if c == 2 {
                    break;
                }
            }
        }
        best.map_or(Girth::Infinite, Girth::Finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_has_infinite_girth() {
        let mut g = MultiGraph::new(4);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(1, 3);
        assert_eq!(g.girth(), Girth::Infinite);
    }

    #[test]
    fn parallel_edges_form_two_cycle() {
        let mut g = MultiGraph::new(2);
        g.add_edge(0, 1);
        g.add_edge(0, 1);
        assert_eq!(g.girth(), Girth::Finite(2));
    }

    #[test]
    fn ring_lengths() {
        for len in 3..10 {
            let mut g = MultiGraph::new(len + 2);
            for v in 0..len {
                g.add_edge(v, (v + 1) % len);
            }
            g.add_edge(0, len);
            g.add_edge(len, len + 1);
            assert_eq!(g.girth(), Girth::Finite(len));
        }
    }

    #[test]
    fn girth_ordering_and_text() {
        assert!(Girth::Infinite > Girth::Finite(1000));
        assert!(Girth::Finite(4) < Girth::Finite(6));
        assert_eq!("inf".parse::<Girth>().unwrap(), Girth::Infinite);
        assert_eq!("8".parse::<Girth>().unwrap(), Girth::Finite(8));
        assert_eq!(Girth::Infinite.to_string(), "inf");
    }
}
