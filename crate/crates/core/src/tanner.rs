//! Non-binary Tanner graphs: storage, progressive-edge-growth construction,
//! girth, syndrome computation and systematic encoding.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::gf::{Field, GfError, Symbol};
use crate::graph::{Girth, MultiGraph};

/// Coefficient re-draws allowed before a construction is declared rank deficient.
pub const MAX_COEFFICIENT_REDRAWS: usize = 32;

/// Full restarts of the edge placement, used when the greedy fill paints
/// itself into a corner (only parallel edges left) or ends with 4-cycles.
const MAX_PLACEMENT_RESTARTS: usize = 32;

/// Placement girth at which restarts stop.
const TARGET_GIRTH: usize = 6;

#[derive(Debug, Error)]
pub enum TannerError {
    #[error("infeasible degrees: {n} symbols x dv={dv} is not divisible by dc={dc}")]
    NotDivisible { n: usize, dv: usize, dc: usize },
    #[error("infeasible construction: {0}")]
    Infeasible(String),
    #[error("parity-check matrix has rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("edge ({check}, {symbol}) out of range")]
    EdgeOutOfRange { check: usize, symbol: usize },
    #[error("edge ({check}, {symbol}) has a zero coefficient")]
    ZeroCoefficient { check: usize, symbol: usize },
    #[error("parallel edge between check {check} and symbol {symbol}")]
    ParallelEdge { check: usize, symbol: usize },
    #[error("coefficient {0} is not a field element")]
    NotInField(usize),
    #[error("expected {expected} symbols, got {got}")]
    Length { expected: usize, got: usize },
    #[error("malformed code file: {0}")]
    Format(String),
    #[error(transparent)]
    Field(#[from] GfError),
}

/// One nonzero entry `h_{j,i}` of the parity-check matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub check: usize,
    pub symbol: usize,
    pub coef: Symbol,
}

/// Sparse parity-check matrix over GF(q) seen as a labeled bipartite graph.
///
/// Edges are kept sorted by `(check, symbol)`; edge indices into
/// [`TannerGraph::edges`] are the message slots used by the decoder.
#[derive(Debug, Clone)]
pub struct TannerGraph {
    field: Arc<Field>,
    n_symbols: usize,
    n_checks: usize,
    edges: Vec<Edge>,
    symbol_edges: Vec<Vec<usize>>,
    check_edges: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn from_edges(
        field: Arc<Field>,
        n_symbols: usize,
        n_checks: usize,
        mut edges: Vec<Edge>,
    ) -> Result<Self, TannerError> {
        edges.sort();
        for w in edges.windows(2) {
            if w[0].check == w[1].check && w[0].symbol == w[1].symbol {
                return Err(TannerError::ParallelEdge {
                    check: w[0].check,
                    symbol: w[0].symbol,
                });
            }
        }
        let mut symbol_edges = vec![Vec::new(); n_symbols];
        let mut check_edges = vec![Vec::new(); n_checks];
        for (k, e) in edges.iter().enumerate() {
            if e.check >= n_checks || e.symbol >= n_symbols {
                return Err(TannerError::EdgeOutOfRange {
                    check: e.check,
                    symbol: e.symbol,
                });
            }
            if e.coef == 0 {
                return Err(TannerError::ZeroCoefficient {
                    check: e.check,
                    symbol: e.symbol,
                });
            }
            if e.coef as usize >= field.q() {
                return Err(TannerError::NotInField(e.coef as usize));
            }
            symbol_edges[e.symbol].push(k);
            check_edges[e.check].push(k);
        }
        Ok(TannerGraph {
            field,
            n_symbols,
            n_checks,
            edges,
            symbol_edges,
            check_edges,
        })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    /// Number of symbol-nodes `N`.
    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    /// Number of constraint-nodes `M`.
    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices incident to symbol-node `i`.
    pub fn symbol_edges(&self, i: usize) -> &[usize] {
        &self.symbol_edges[i]
    }

    /// Edge indices incident to constraint-node `j`.
    pub fn check_edges(&self, j: usize) -> &[usize] {
        &self.check_edges[j]
    }

    /// Design rate `1 - M/N`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.n_checks as f64 / self.n_symbols as f64
    }

    /// `Some((dv, dc))` when every symbol-node has degree `dv` and every
    /// constraint-node degree `dc`.
    pub fn regular_degrees(&self) -> Option<(usize, usize)> {
        let dv = self.symbol_edges.first()?.len();
        let dc = self.check_edges.first()?.len();
        let reg = self.symbol_edges.iter().all(|e| e.len() == dv)
            && self.check_edges.iter().all(|e| e.len() == dc);
        reg.then_some((dv, dc))
    }

    /// Bipartite graph with symbol-nodes `0..N` and constraint-nodes `N..N+M`.
    pub fn to_multigraph(&self) -> MultiGraph {
        let mut g = MultiGraph::new(self.n_symbols + self.n_checks);
        for e in &self.edges {
            g.add_edge(e.symbol, self.n_symbols + e.check);
        }
        g
    }

    pub fn girth(&self) -> Girth {
        self.to_multigraph().girth()
    }

    /// `H s^T` over GF(q).
    pub fn syndrome(&self, s: &[Symbol]) -> Vec<Symbol> {
        assert_eq!(s.len(), self.n_symbols, "syndrome: length mismatch");
        self.check_edges
            .iter()
            .map(|ids| {
                ids.iter().fold(0, |acc, &k| {
                    let e = &self.edges[k];
                    acc ^ self.field.mul(e.coef, s[e.symbol])
                })
            })
            .collect()
    }

    pub fn is_codeword(&self, s: &[Symbol]) -> bool {
        s.len() == self.n_symbols
            && self.check_edges.iter().all(|ids| {
                ids.iter().fold(0, |acc, &k| {
                    let e = &self.edges[k];
                    acc ^ self.field.mul(e.coef, s[e.symbol])
                }) == 0
            })
    }

    /// Dense row-major copy of `H`.
    pub fn dense(&self) -> Vec<Vec<Symbol>> {
        let mut h = vec![vec![0; self.n_symbols]; self.n_checks];
        for e in &self.edges {
            h[e.check][e.symbol] = e.coef;
        }
        h
    }

    pub fn rank(&self) -> usize {
        GaussJordan::reduce(&self.field, self.dense()).pivots.len()
    }

    /// Progressive-edge-growth construction of a `(dv, dc)`-regular graph
    /// with `n_symbols` symbol-nodes and i.i.d. uniform nonzero coefficients.
    ///
    /// Each new edge of a symbol-node goes to a constraint-node with spare
    /// capacity that is farthest from it in the current graph (unreachable
    /// counts as farthest), preferring the lowest current degree and then a
    /// uniform draw. The greedy fill is restarted (bounded) while the result
    /// still has 4-cycles, keeping the best placement seen. Coefficients are
    /// re-drawn until `H` has full row rank.
    pub fn peg_construct<R: Rng + ?Sized>(
        n_symbols: usize,
        dv: usize,
        dc: usize,
        field: Arc<Field>,
        rng: &mut R,
    ) -> Result<Self, TannerError> {
        if dv == 0 || dc == 0 || n_symbols == 0 || !(n_symbols * dv).is_multiple_of(dc) {
            return Err(TannerError::NotDivisible { n: n_symbols, dv, dc });
        }
        let n_checks = n_symbols * dv / dc;
        if dv > n_checks {
            return Err(TannerError::Infeasible(format!(
                "dv={dv} exceeds the {n_checks} available constraint-nodes"
            )));
        }

        // Keep the placement with the largest girth; stop at the first one
        // free of 4-cycles.
        let mut placement: Option<(Girth, Vec<(usize, usize)>)> = None;
        for _ in 0..MAX_PLACEMENT_RESTARTS {
            let Some(p) = peg_place_edges(n_symbols, n_checks, dv, dc, rng) else {
                continue;
            };
            let mut mg = MultiGraph::new(n_symbols + n_checks);
            for &(j, i) in &p {
                mg.add_edge(i, n_symbols + j);
            }
            let girth = mg.girth();
            if placement.as_ref().is_none_or(|(best, _)| girth > *best) {
                placement = Some((girth, p));
            }
            if girth.is_at_least(TARGET_GIRTH) {
                break;
            }
        }
        let (_, mut pairs) = placement.ok_or_else(|| {
            TannerError::Infeasible(format!(
                "PEG placement failed after {MAX_PLACEMENT_RESTARTS} restarts"
            ))
        })?;
        pairs.sort();

        let q = field.q();
        let mut last_rank = 0;
        for _ in 0..MAX_COEFFICIENT_REDRAWS {
            let edges = pairs
                .iter()
                .map(|&(check, symbol)| Edge {
                    check,
                    symbol,
                    coef: rng.random_range(1..q) as Symbol,
                })
                .collect();
            let g = TannerGraph::from_edges(field.clone(), n_symbols, n_checks, edges)?;
            last_rank = g.rank();
            if last_rank == n_checks {
                return Ok(g);
            }
        }
        Err(TannerError::RankDeficient {
            rank: last_rank,
            rows: n_checks,
        })
    }
}

/// Edge placement half of PEG. Returns `(check, symbol)` pairs, or `None`
/// when some symbol-node cannot get a further distinct neighbor.
fn peg_place_edges<R: Rng + ?Sized>(
    n_symbols: usize,
    n_checks: usize,
    dv: usize,
    dc: usize,
    rng: &mut R,
) -> Option<Vec<(usize, usize)>> {
    let mut g = MultiGraph::new(n_symbols + n_checks);
    let mut check_deg = vec![0usize; n_checks];
    let mut pairs = Vec::with_capacity(n_symbols * dv);
    let mut candidates = Vec::with_capacity(n_checks);

    for i in 0..n_symbols {
        for k in 0..dv {
            let dist = if k == 0 {
                None
            } else {
                Some(g.distances_from(i))
            };
            // (distance, degree) key: larger distance first, then lower degree
            let mut best: Option<(usize, usize)> = None;
            candidates.clear();
            for j in 0..n_checks {
                if check_deg[j] >= dc {
                    continue;
                }
                let d = match &dist {
                    Some(d) => d[n_symbols + j],
                    None => usize::MAX,
                };
                if d == 1 {
                    continue;
                }
                let key = (d, check_deg[j]);
                let better = match best {
                    None => true,
                    Some((bd, bdeg)) => key.0 > bd || (key.0 == bd && key.1 < bdeg),
                };
                if better {
                    best = Some(key);
                    candidates.clear();
                }
                if Some(key) == best {
                    candidates.push(j);
                }
            }
            let &j = candidates.choose(rng)?;
            g.add_edge(i, n_symbols + j);
            check_deg[j] += 1;
            pairs.push((j, i));
        }
    }
    Some(pairs)
}

/// Reduced row-echelon form of a dense GF(q) matrix.
struct GaussJordan {
    rows: Vec<Vec<Symbol>>,
    /// `pivots[r]` is the pivot column of reduced row `r`.
    pivots: Vec<usize>,
}

impl GaussJordan {
    fn reduce(field: &Field, mut rows: Vec<Vec<Symbol>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..n_cols {
            if r == n_rows {
                break;
            }
            let Some(pr) = (r..n_rows).find(|&k| rows[k][c] != 0) else {
                continue;
            };
            rows.swap(r, pr);
            let scale = field.inv(rows[r][c]).expect("pivot is nonzero");
            for x in rows[r].iter_mut() {
                *x = field.mul(*x, scale);
            }
            let pivot_row = rows[r].clone();
            for (k, row) in rows.iter_mut().enumerate() {
                if k == r || row[c] == 0 {
                    continue;
                }
                let f = row[c];
                let fr = field.mul_row(f);
                for (x, &y) in row.iter_mut().zip(&pivot_row) {
                    *x ^= fr[y as usize];
                }
            }
            pivots.push(c);
            r += 1;
        }
        GaussJordan { rows, pivots }
    }
}

/// Systematic encoder obtained from one Gauss-Jordan reduction of `H`.
///
/// The `K = N - M` non-pivot columns carry the message; every pivot column
/// is a parity symbol equal to a fixed linear combination of them.
#[derive(Debug, Clone)]
pub struct Encoder {
    field: Arc<Field>,
    n_symbols: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// `parity[r][k]` multiplies message symbol `k` in parity symbol `r`.
    parity: Vec<Vec<Symbol>>,
}

impl Encoder {
    pub fn new(graph: &TannerGraph) -> Result<Self, TannerError> {
        let field = graph.field().clone();
        let n = graph.n_symbols();
        let gj = GaussJordan::reduce(&field, graph.dense());
        if gj.pivots.len() < graph.n_checks() {
            return Err(TannerError::RankDeficient {
                rank: gj.pivots.len(),
                rows: graph.n_checks(),
            });
        }
        let mut is_pivot = vec![false; n];
        for &c in &gj.pivots {
            is_pivot[c] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        // Row r reads s[pivot_r] + sum_c A[r][c] s[c] = 0; in characteristic 2
        // the parity symbol is the same sum.
        let parity = gj
            .rows
            .iter()
            .take(gj.pivots.len())
            .map(|row| info_positions.iter().map(|&c| row[c]).collect())
            .collect();
        Ok(Encoder {
            field,
            n_symbols: n,
            info_positions,
            parity_positions: gj.pivots,
            parity,
        })
    }

    /// Message length `K`.
    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn n(&self) -> usize {
        self.n_symbols
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.parity_positions
    }

    pub fn encode(&self, message: &[Symbol]) -> Result<Vec<Symbol>, TannerError> {
        if message.len() != self.k() {
            return Err(TannerError::Length {
                expected: self.k(),
                got: message.len(),
            });
        }
        let mut cw = vec![0; self.n_symbols];
        self.encode_into(message, &mut cw);
        Ok(cw)
    }

    /// Allocation-free variant of [`Encoder::encode`] for the simulation loop.
    pub fn encode_into(&self, message: &[Symbol], cw: &mut [Symbol]) {
        debug_assert_eq!(message.len(), self.k());
        for (&pos, &m) in self.info_positions.iter().zip(message) {
            cw[pos] = m;
        }
        for (row, &pos) in self.parity.iter().zip(&self.parity_positions) {
            cw[pos] = row
                .iter()
                .zip(message)
                .fold(0, |acc, (&a, &m)| acc ^ self.field.mul(a, m));
        }
    }

    /// Message symbols read back from a codeword.
    pub fn extract_message(&self, cw: &[Symbol]) -> Vec<Symbol> {
        self.info_positions.iter().map(|&p| cw[p]).collect()
    }
}

/// A code as persisted on disk: the graph plus its construction metadata.
///
/// Text layout: a header `q N M dv dc primitive_poly seed girth`, then one
/// `j i h_ji` line per edge, all decimal, edges sorted by `(j, i)`.
#[derive(Debug, Clone)]
pub struct CodeFile {
    pub graph: TannerGraph,
    pub dv: usize,
    pub dc: usize,
    pub seed: u64,
    pub girth: Girth,
}

impl CodeFile {
    pub fn new(graph: TannerGraph, seed: u64) -> Self {
        let (dv, dc) = graph.regular_degrees().unwrap_or_else(|| {
            let max = |v: &Vec<Vec<usize>>| v.iter().map(Vec::len).max().unwrap_or(0);
            (max(&graph.symbol_edges), max(&graph.check_edges))
        });
        let girth = graph.girth();
        CodeFile {
            graph,
            dv,
            dc,
            seed,
            girth,
        }
    }

    pub fn to_text(&self) -> String {
        let g = &self.graph;
        let mut out = String::with_capacity(16 * g.edges.len());
        writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            g.field.q(),
            g.n_symbols,
            g.n_checks,
            self.dv,
            self.dc,
            g.field.primitive_poly(),
            self.seed,
            self.girth
        )
        .unwrap();
        for e in &g.edges {
            writeln!(out, "{} {} {}", e.check, e.symbol, e.coef).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TannerError> {
        let bad = |msg: &str| TannerError::Format(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .split_whitespace()
            .collect();
        if header.len() != 8 {
            return Err(bad("header must have 8 fields"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let q = num(header[0])? as usize;
        let n = num(header[1])? as usize;
        let m = num(header[2])? as usize;
        let dv = num(header[3])? as usize;
        let dc = num(header[4])? as usize;
        let poly = num(header[5])? as u32;
        let seed = num(header[6])?;
        let girth: Girth = header[7].parse().map_err(|_| bad("bad girth"))?;
        if !q.is_power_of_two() || !(2..=256).contains(&q) {
            return Err(bad("q must be a power of two in 2..=256"));
        }
        let field = Arc::new(Field::with_poly(q.trailing_zeros(), poly)?);

        let mut edges = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(&format!("edge line `{line}` must have 3 fields")));
            }
            let coef = num(f[2])? as usize;
            if coef >= q {
                return Err(TannerError::NotInField(coef));
            }
            edges.push(Edge {
                check: num(f[0])? as usize,
                symbol: num(f[1])? as usize,
                coef: coef as Symbol,
            });
        }
        let graph = TannerGraph::from_edges(field, n, m, edges)?;
        Ok(CodeFile {
            graph,
            dv,
            dc,
            seed,
            girth,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(p: u32) -> Arc<Field> {
        Arc::new(Field::new(p).unwrap())
    }

    #[test]
    fn rates_of_reference_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = TannerGraph::peg_construct(102, 2, 6, gf(6), &mut rng).unwrap();
        assert_eq!(g.n_checks(), 34);
        assert!((g.design_rate() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(g.regular_degrees(), Some((2, 6)));
        assert!(g.girth().is_at_least(6));

        let g = TannerGraph::peg_construct(102, 2, 12, gf(6), &mut rng).unwrap();
        assert_eq!(g.n_checks(), 17);
        assert!((g.design_rate() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(g.regular_degrees(), Some((2, 12)));
    }

    #[test]
    fn star_graph_is_a_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = TannerGraph::peg_construct(5, 1, 5, gf(2), &mut rng).unwrap();
        assert_eq!(g.n_checks(), 1);
        assert_eq!(g.girth(), Girth::Infinite);
    }

    #[test]
    fn rejects_indivisible_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = TannerGraph::peg_construct(102, 2, 5, gf(6), &mut rng).unwrap_err();
        assert!(matches!(err, TannerError::NotDivisible { .. }));
    }

    #[test]
    fn smallest_cycle() {
        let e = |check, symbol| Edge {
            check,
            symbol,
            coef: 1,
        };
        let g = TannerGraph::from_edges(gf(2), 2, 2, vec![e(0, 0), e(1, 0), e(0, 1), e(1, 1)])
            .unwrap();
        assert_eq!(g.girth(), Girth::Finite(4));
    }

    #[test]
    fn from_edges_validation() {
        let f = gf(2);
        let zero = vec![Edge { check: 0, symbol: 0, coef: 0 }];
        assert!(matches!(
            TannerGraph::from_edges(f.clone(), 1, 1, zero),
            Err(TannerError::ZeroCoefficient { .. })
        ));
        let dup = vec![
            Edge { check: 0, symbol: 0, coef: 1 },
            Edge { check: 0, symbol: 0, coef: 2 },
        ];
        assert!(matches!(
            TannerGraph::from_edges(f.clone(), 1, 1, dup),
            Err(TannerError::ParallelEdge { .. })
        ));
        let big = vec![Edge { check: 0, symbol: 0, coef: 4 }];
        assert!(TannerGraph::from_edges(f, 1, 1, big).is_err());
    }

    #[test]
    fn single_edge_syndrome() {
        let g = TannerGraph::from_edges(gf(2), 1, 1, vec![Edge { check: 0, symbol: 0, coef: 3 }])
            .unwrap();
        // 3 * 2 = x^2 + x = 1 in GF(4) mod x^2 + x + 1
        assert_eq!(g.syndrome(&[2]), vec![1]);
        assert_eq!(g.syndrome(&[0]), vec![0]);
    }

    #[test]
    fn rank_deficient_encoder_is_reported() {
        let e = |check, symbol| Edge {
            check,
            symbol,
            coef: 1,
        };
        // two identical rows
        let g = TannerGraph::from_edges(gf(2), 2, 2, vec![e(0, 0), e(0, 1), e(1, 0), e(1, 1)])
            .unwrap();
        assert!(matches!(
            Encoder::new(&g),
            Err(TannerError::RankDeficient { rank: 1, rows: 2 })
        ));
    }

    #[test]
    fn encoder_output_is_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = TannerGraph::peg_construct(102, 2, 6, gf(6), &mut rng).unwrap();
        let enc = Encoder::new(&g).unwrap();
        assert_eq!(enc.k(), 68);
        assert_eq!(enc.encode(&[0; 68]).unwrap(), vec![0; 102]);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..68).map(|_| rng.random_range(0..64)).collect();
            let cw = enc.encode(&msg).unwrap();
            assert!(g.is_codeword(&cw));
            assert_eq!(enc.extract_message(&cw), msg);
        }
        assert!(enc.encode(&[1, 2]).is_err());
    }

    #[test]
    fn code_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = TannerGraph::peg_construct(24, 2, 6, gf(4), &mut rng).unwrap();
        let cf = CodeFile::new(g, 5);
        let text = cf.to_text();
        assert!(text.starts_with("16 24 8 2 6 19 5 "));
        let back = CodeFile::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.graph.edges(), cf.graph.edges());
    }

    #[test]
    fn code_file_rejects_garbage() {
        assert!(CodeFile::from_text("").is_err());
        assert!(CodeFile::from_text("4 1 1 1 1 7 0 inf\n0 0\n").is_err());
        assert!(CodeFile::from_text("4 1 1 1 1 5 0 inf\n0 0 1\n").is_err());
        assert!(CodeFile::from_text("4 1 1 1 1 7 0 inf\n0 0 9\n").is_err());
        assert!(CodeFile::from_text("4 1 1 1 1 7 0 inf\n0 0 1\n").is_ok());
    }
}
