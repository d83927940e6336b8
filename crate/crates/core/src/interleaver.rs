//! Bit interleavers between coded symbols and modulation symbols.
//!
//! Coded bit `i * p + t` is bit `t` (LSB-first) of coded symbol `s_i`;
//! modulation bit `k * m + u` is label bit `u` of modulated symbol `x_k`.
//! A pattern maps the former onto the latter. Viewed as a graph it connects
//! every modulation-node to `m` symbol-nodes and every symbol-node to `p`
//! modulation-nodes; superimposed on the Tanner graph this is the global
//! graph whose girth the PEG interleaver tries to maximize.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::graph::{Girth, MultiGraph};
use crate::tanner::TannerGraph;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterleaverError {
    #[error("identity interleaver needs p == m (got p={p}, m={m})")]
    WidthMismatch { p: usize, m: usize },
    #[error("{n} bits cannot be split into {what} of {width} bits")]
    NotDivisible {
        n: usize,
        width: usize,
        what: &'static str,
    },
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
    #[error("permutation is not a bijection on 0..{0}")]
    NotBijection(usize),
    #[error("pattern has {pattern} coded symbols but the code has {code}")]
    CodeMismatch { pattern: usize, code: usize },
    #[error("unknown interleaver kind `{0}`")]
    UnknownKind(String),
    #[error("malformed interleaver file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterleaverKind {
    Identity,
    Random,
    Peg,
}

impl InterleaverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterleaverKind::Identity => "identity",
            InterleaverKind::Random => "random",
            InterleaverKind::Peg => "peg",
        }
    }
}

impl std::fmt::Display for InterleaverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterleaverKind {
    type Err = InterleaverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(InterleaverKind::Identity),
            "random" => Ok(InterleaverKind::Random),
            "peg" => Ok(InterleaverKind::Peg),
            other => Err(InterleaverError::UnknownKind(other.to_string())),
        }
    }
}

/// Bijection from coded-bit positions to modulation-bit positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleaverPattern {
    p: usize,
    m: usize,
    perm: Vec<usize>,
    kind: InterleaverKind,
    seed: u64,
}

/// Options for [`InterleaverPattern::peg`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PegOptions {
    /// Visit modulation-nodes in a seeded random order instead of `x_0, x_1, ...`.
    pub shuffle_order: bool,
    /// Apply a seeded permutation of bit slots inside each coded symbol.
    pub local_scramble: bool,
}

/// One greedy decision of the PEG interleaver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PegStep {
    pub modulation: usize,
    pub symbol: usize,
    /// Every symbol-node that tied for the choice.
    pub candidates: Vec<usize>,
}

fn check_split(n: usize, width: usize, what: &'static str) -> Result<usize, InterleaverError> {
    if width == 0 || !n.is_multiple_of(width) {
        Err(InterleaverError::NotDivisible { n, width, what })
    } else {
        Ok(n / width)
    }
}

impl InterleaverPattern {
    /// Validated constructor from an explicit permutation.
    pub fn from_perm(
        perm: Vec<usize>,
        p: usize,
        m: usize,
        kind: InterleaverKind,
        seed: u64,
    ) -> Result<Self, InterleaverError> {
        let n = perm.len();
        check_split(n, p, "coded symbols")?;
        check_split(n, m, "modulation symbols")?;
        let mut seen = vec![false; n];
        for &x in &perm {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(InterleaverError::NotBijection(n));
            }
        }
        Ok(InterleaverPattern {
            p,
            m,
            perm,
            kind,
            seed,
        })
    }

    /// No interleaving: modulation symbol `k` carries coded symbol `k`.
    pub fn identity(n_symbols: usize, p: usize, m: usize) -> Result<Self, InterleaverError> {
        if p != m {
            return Err(InterleaverError::WidthMismatch { p, m });
        }
        Self::from_perm(
            (0..n_symbols * p).collect(),
            p,
            m,
            InterleaverKind::Identity,
            0,
        )
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        p: usize,
        m: usize,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self, InterleaverError> {
        check_split(n, p, "coded symbols")?;
        check_split(n, m, "modulation symbols")?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Self::from_perm(perm, p, m, InterleaverKind::Random, seed)
    }

    /// PEG-optimized interleaver matched to `graph`, with `p` taken from the
    /// graph's field and `m` bits per modulation symbol.
    pub fn peg<R: Rng + ?Sized>(
        graph: &TannerGraph,
        m: usize,
        opts: PegOptions,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self, InterleaverError> {
        Self::peg_traced(graph, m, opts, seed, rng).map(|(pat, _)| pat)
    }

    /// [`InterleaverPattern::peg`] that also returns every greedy decision.
    pub fn peg_traced<R: Rng + ?Sized>(
        graph: &TannerGraph,
        m: usize,
        opts: PegOptions,
        seed: u64,
        rng: &mut R,
    ) -> Result<(Self, Vec<PegStep>), InterleaverError> {
        let p = graph.field().p() as usize;
        let n_sym = graph.n_symbols();
        let n = n_sym * p;
        let n_mod = check_split(n, m, "modulation symbols")?;
        let mod_base = n_sym + graph.n_checks();

        let mut global = graph.to_multigraph();
        for _ in 0..n_mod {
            global.add_node();
        }
        let mut order: Vec<usize> = (0..n_mod).collect();
        if opts.shuffle_order {
            order.shuffle(rng);
        }

        let mut fill = vec![0usize; n_sym];
        let mut perm = vec![usize::MAX; n];
        let mut trace = Vec::with_capacity(n);
        let mut candidates = Vec::with_capacity(n_sym);

        for &k in &order {
            let xk = mod_base + k;
            for u in 0..m {
                let dist = (u > 0).then(|| global.distances_from(xk));
                let mut best: Option<(usize, usize)> = None;
                candidates.clear();
                for i in 0..n_sym {
                    if fill[i] >= p {
                        continue;
                    }
                    let d = dist.as_ref().map_or(usize::MAX, |d| d[i]);
                    let better = match best {
                        None => true,
                        Some((bd, bf)) => d > bd || (d == bd && fill[i] < bf),
                    };
                    if better {
                        best = Some((d, fill[i]));
                        candidates.clear();
                    }
                    if best == Some((d, fill[i])) {
                        candidates.push(i);
                    }
                }
                let &i = candidates
                    .choose(rng)
                    .expect("residual symbol capacity equals remaining modulation slots");
                global.add_edge(xk, i);
                perm[i * p + fill[i]] = k * m + u;
                fill[i] += 1;
                trace.push(PegStep {
                    modulation: k,
                    symbol: i,
                    candidates: candidates.clone(),
                });
            }
        }

        if opts.local_scramble {
            let mut slots: Vec<usize> = (0..p).collect();
            for i in 0..n_sym {
                slots.shuffle(rng);
                let old: Vec<usize> = perm[i * p..(i + 1) * p].to_vec();
                for (t, &slot) in slots.iter().enumerate() {
                    perm[i * p + slot] = old[t];
                }
            }
        }

        let pat = Self::from_perm(perm, p, m, InterleaverKind::Peg, seed)?;
        Ok((pat, trace))
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Bits per coded symbol.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Bits per modulation symbol.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of coded symbols `N`.
    pub fn n_symbols(&self) -> usize {
        self.perm.len() / self.p
    }

    /// Number of modulation symbols `N_m`.
    pub fn n_modulation(&self) -> usize {
        self.perm.len() / self.m
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn kind(&self) -> InterleaverKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_identity(&self) -> bool {
        self.p == self.m && self.perm.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// Coded order -> modulation order: `out[perm[i]] = bits[i]`.
    pub fn apply<T: Copy>(&self, bits: &[T]) -> Result<Vec<T>, InterleaverError> {
        self.check_len(bits.len())?;
        let mut out = bits.to_vec();
        for (i, &b) in bits.iter().enumerate() {
            out[self.perm[i]] = b;
        }
        Ok(out)
    }

    /// Modulation order -> coded order: `out[i] = bits[perm[i]]`.
    pub fn deapply<T: Copy>(&self, bits: &[T]) -> Result<Vec<T>, InterleaverError> {
        self.check_len(bits.len())?;
        Ok(self.perm.iter().map(|&x| bits[x]).collect())
    }

    fn check_len(&self, got: usize) -> Result<(), InterleaverError> {
        if got != self.perm.len() {
            Err(InterleaverError::Length {
                expected: self.perm.len(),
                got,
            })
        } else {
            Ok(())
        }
    }

    /// Modulation-node of every coded bit, in coded order.
    pub fn bit_owners(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.perm
            .iter()
            .enumerate()
            .map(|(i, &x)| (i / self.p, x / self.m))
    }

    /// Interleaving degrees counted per bit: `(d_k for each x_k, d_i for each s_i)`.
    pub fn degree_profile(&self) -> (Vec<usize>, Vec<usize>) {
        let mut dk = vec![0; self.n_modulation()];
        let mut di = vec![0; self.n_symbols()];
        for (s, x) in self.bit_owners() {
            dk[x] += 1;
            di[s] += 1;
        }
        (dk, di)
    }

    /// Number of bits that share a modulation symbol with an earlier bit of
    /// the same coded symbol. Zero means the interleaving graph is simple.
    pub fn repeated_connections(&self) -> usize {
        let mut pairs: Vec<(usize, usize)> = self.bit_owners().collect();
        pairs.sort_unstable();
        pairs.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Distinct `(symbol, modulation)` adjacencies.
    fn connections(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self.bit_owners().collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Header `n p m kind seed`, then one `perm[i]` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(6 * self.perm.len());
        writeln!(
            out,
            "{} {} {} {} {}",
            self.perm.len(),
            self.p,
            self.m,
            self.kind,
            self.seed
        )
        .unwrap();
        for x in &self.perm {
            writeln!(out, "{x}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, InterleaverError> {
        let bad = |msg: String| InterleaverError::Format(msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .split_whitespace()
            .collect();
        if header.len() != 5 {
            return Err(bad("header must have 5 fields".into()));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| bad(format!("bad number `{s}`")))
        };
        let n = num(header[0])? as usize;
        let p = num(header[1])? as usize;
        let m = num(header[2])? as usize;
        let kind: InterleaverKind = header[3].parse()?;
        let seed = num(header[4])?;
        let perm = lines
            .map(|l| num(l).map(|x| x as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if perm.len() != n {
            return Err(bad(format!("header says {n} entries, found {}", perm.len())));
        }
        Self::from_perm(perm, p, m, kind, seed)
    }
}

/// Node layout of the global graph: symbol-nodes `0..N`, constraint-nodes
/// `N..N+M`, modulation-nodes after that. Interleaving connections are
/// node adjacencies (several bits of one coded symbol landing in the same
/// modulation symbol give a single connection; see
/// [`InterleaverPattern::repeated_connections`]).
pub fn global_graph(graph: &TannerGraph, pat: &InterleaverPattern) -> Result<MultiGraph, InterleaverError> {
    if pat.n_symbols() != graph.n_symbols() {
        return Err(InterleaverError::CodeMismatch {
            pattern: pat.n_symbols(),
            code: graph.n_symbols(),
        });
    }
    let base = graph.n_symbols() + graph.n_checks();
    let mut g = graph.to_multigraph();
    for _ in 0..pat.n_modulation() {
        g.add_node();
    }
    for (s, x) in pat.connections() {
        g.add_edge(s, base + x);
    }
    Ok(g)
}

/// Girth of the three-layer global graph.
pub fn global_girth(graph: &TannerGraph, pat: &InterleaverPattern) -> Result<Girth, InterleaverError> {
    Ok(global_graph(graph, pat)?.girth())
}
