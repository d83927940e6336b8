//! q-ary belief propagation in the probability domain with a flooding
//! schedule.
//!
//! Check-node updates run in the Walsh-Hadamard domain: for messages over
//! GF(2^p) the distribution of a sum of independent symbols is the XOR
//! convolution of their distributions, which the WHT turns into pointwise
//! products.

use log::debug;
use thiserror::Error;

use crate::gf::{Field, Symbol};
use crate::modem::LikelihoodBlock;
use crate::tanner::TannerGraph;

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecoderError {
    #[error("edge coefficient must be nonzero")]
    ZeroCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeStatus {
    /// Every symbol decided and the syndrome of the decision is zero.
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub decision: Vec<Symbol>,
    pub status: DecodeStatus,
    pub iterations: usize,
}

/// Direction of [`permute_by_coefficient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Entry `a` moves to `h * a` (symbol frame -> check frame).
    Forward,
    /// Entry `a` moves to `h^-1 * a` (check frame -> symbol frame).
    Backward,
}

/// In-place unnormalized Walsh-Hadamard transform; applying it twice scales by `len`.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Scales `v` to sum 1. Returns `false` (and leaves `v` uniform) if the mass vanished.
#[inline]
fn normalize(v: &mut [f64]) -> bool {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = sum.recip();
        v.iter_mut().for_each(|x| *x *= inv);
        true
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
        false
    }
}

/// Symbol-to-check message: `gamma ⊙ prod(incoming)`, normalized.
///
/// `incoming` are the check-to-symbol messages of every other edge of the
/// symbol-node. An all-zero product falls back to the uniform vector.
pub fn variable_update(gamma: &[f64], incoming: &[&[f64]], out: &mut [f64]) {
    out.copy_from_slice(gamma);
    for msg in incoming {
        out.iter_mut().zip(msg.iter()).for_each(|(o, &m)| *o *= m);
    }
    if !normalize(out) {
        debug!("variable update lost all probability mass; using uniform message");
    }
}

/// Reindexes a message through multiplication by the edge label `h`.
pub fn permute_by_coefficient(
    msg: &[f64],
    h: Symbol,
    field: &Field,
    direction: Direction,
    out: &mut [f64],
) -> Result<(), DecoderError> {
    if h == 0 {
        return Err(DecoderError::ZeroCoefficient);
    }
    let row = field.mul_row(h);
    match direction {
        Direction::Forward => {
            for (a, &x) in msg.iter().enumerate() {
                out[row[a] as usize] = x;
            }
        }
        Direction::Backward => {
            for (a, o) in out.iter_mut().enumerate() {
                *o = msg[row[a] as usize];
            }
        }
    }
    Ok(())
}

/// Check-to-symbol message for the edge labeled `target_coef`.
///
/// `incoming` holds the other edges' messages already moved into the check
/// frame (`u = h * s`). Their XOR convolution is the distribution of the
/// target's `u`, which is then moved back to the symbol frame and normalized.
pub fn check_update(
    incoming: &[&[f64]],
    target_coef: Symbol,
    field: &Field,
    out: &mut [f64],
) -> Result<(), DecoderError> {
    let q = out.len();
    let mut acc = vec![1.0; q];
    let mut buf = vec![0.0; q];
    for msg in incoming {
        buf.copy_from_slice(msg);
        fwht(&mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, &b)| *a *= b);
    }
    fwht(&mut acc);
    acc.iter_mut().for_each(|x| *x = x.max(0.0));
    permute_by_coefficient(&acc, target_coef, field, Direction::Backward, out)?;
    normalize(out);
    Ok(())
}

/// Index of the largest entry (lowest index on ties) and whether the maximum is unique.
#[inline]
fn argmax(v: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut unique = true;
    for (a, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = a;
            unique = true;
        } else if x == v[best] {
            unique = false;
        }
    }
    (best, unique)
}

/// Reusable decoder state for one Tanner graph; one per worker thread.
pub struct Decoder<'g> {
    graph: &'g TannerGraph,
    q: usize,
    /// Symbol-to-check messages, one `q`-slot per edge.
    v2c: Vec<f64>,
    /// Check-to-symbol messages, one `q`-slot per edge.
    c2v: Vec<f64>,
    post: Vec<f64>,
    /// Per-edge inverse-coefficient row, used for the forward gather.
    inv_rows: Vec<Symbol>,
    spectra: Vec<f64>,
    suffix: Vec<f64>,
    prefix: Vec<f64>,
    work: Vec<f64>,
    decision: Vec<Symbol>,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g TannerGraph) -> Self {
        let q = graph.field().q();
        let n_edges = graph.edges().len();
        let max_dc = (0..graph.n_checks())
            .map(|j| graph.check_edges(j).len())
            .max()
            .unwrap_or(0);
        let field = graph.field();
        let mut inv_rows = Vec::with_capacity(n_edges * q);
        for e in graph.edges() {
            let inv = field.inv(e.coef).expect("edge labels are nonzero");
            inv_rows.extend_from_slice(field.mul_row(inv));
        }
        Decoder {
            graph,
            q,
            v2c: vec![0.0; n_edges * q],
            c2v: vec![0.0; n_edges * q],
            post: vec![0.0; graph.n_symbols() * q],
            inv_rows,
            spectra: vec![0.0; max_dc * q],
            suffix: vec![0.0; (max_dc + 1) * q],
            prefix: vec![0.0; q],
            work: vec![0.0; q],
            decision: vec![0; graph.n_symbols()],
        }
    }

    pub fn graph(&self) -> &TannerGraph {
        self.graph
    }

    /// Decodes with syndrome-based early stopping.
    pub fn decode(&mut self, gammas: &LikelihoodBlock, max_iter: usize) -> DecodeOutcome {
        self.decode_with(gammas, max_iter, true)
    }

    /// Runs up to `max_iter` flooding iterations. With `early_stop` the
    /// decoder returns as soon as the decision is a fully decided codeword.
    pub fn decode_with(&mut self, gammas: &LikelihoodBlock, max_iter: usize, early_stop: bool) -> DecodeOutcome {
        assert_eq!(gammas.len(), self.graph.n_symbols(), "likelihood count");
        assert_eq!(gammas.q(), self.q, "likelihood alphabet");
        assert!(max_iter >= 1, "max_iter must be at least 1");

        self.c2v.fill(1.0 / self.q as f64);
        let mut status = DecodeStatus::MaxIterations;
        let mut iterations = 0;
        for it in 1..=max_iter {
            iterations = it;
            self.variable_half(gammas);
            self.check_half();
            let decided = self.decide(gammas);
            if decided && self.graph.is_codeword(&self.decision) {
                status = DecodeStatus::Converged;
                if early_stop {
                    break;
                }
            } else {
                status = DecodeStatus::MaxIterations;
            }
        }
        DecodeOutcome {
            decision: self.decision.clone(),
            status,
            iterations,
        }
    }

    /// A-posteriori vectors of the last iteration, `N x q` row-major.
    pub fn posteriors(&self) -> &[f64] {
        &self.post
    }

    pub fn posterior(&self, i: usize) -> &[f64] {
        &self.post[i * self.q..(i + 1) * self.q]
    }

    fn variable_half(&mut self, gammas: &LikelihoodBlock) {
        let q = self.q;
        for i in 0..self.graph.n_symbols() {
            let edges = self.graph.symbol_edges(i);
            let gamma = gammas.gamma(i);
            for &e in edges {
                let out = &mut self.v2c[e * q..(e + 1) * q];
                out.copy_from_slice(gamma);
                for &other in edges {
                    if other != e {
                        let msg = &self.c2v[other * q..(other + 1) * q];
                        out.iter_mut().zip(msg).for_each(|(o, &m)| *o *= m);
                    }
                }
                if !normalize(out) {
                    debug!("symbol {i}: variable update lost all probability mass; using uniform message");
                }
            }
        }
    }

    fn check_half(&mut self) {
        let q = self.q;
        let field = self.graph.field().clone();
        for j in 0..self.graph.n_checks() {
            let edges = self.graph.check_edges(j);
            let dc = edges.len();
            // spectra of the incoming messages in the check frame
            for (k, &e) in edges.iter().enumerate() {
                let spec = &mut self.spectra[k * q..(k + 1) * q];
                let msg = &self.v2c[e * q..(e + 1) * q];
                let inv_row = &self.inv_rows[e * q..(e + 1) * q];
                // u[b] = alpha[h^-1 b]
                for (s, &src) in spec.iter_mut().zip(inv_row) {
                    *s = msg[src as usize];
                }
                fwht(spec);
            }
            // suffix[k] = prod_{l >= k} spectra[l]
            self.suffix[dc * q..(dc + 1) * q].fill(1.0);
            for k in (0..dc).rev() {
                let (head, tail) = self.suffix.split_at_mut((k + 1) * q);
                let cur = &mut head[k * q..];
                let spec = &self.spectra[k * q..(k + 1) * q];
                for ((c, &s), &t) in cur.iter_mut().zip(spec).zip(&tail[..q]) {
                    *c = s * t;
                }
            }
            self.prefix.fill(1.0);
            for (k, &e) in edges.iter().enumerate() {
                // spectrum of the sum of all other incoming symbols
                let rest = &self.suffix[(k + 1) * q..(k + 2) * q];
                for ((w, &p), &s) in self.work.iter_mut().zip(&self.prefix).zip(rest) {
                    *w = p * s;
                }
                let spec = &self.spectra[k * q..(k + 1) * q];
                self.prefix.iter_mut().zip(spec).for_each(|(p, &s)| *p *= s);
                fwht(&mut self.work);
                // beta[a] = w[h a]
                let row = field.mul_row(self.graph.edges()[e].coef);
                let out = &mut self.c2v[e * q..(e + 1) * q];
                for (o, &src) in out.iter_mut().zip(row) {
                    *o = self.work[src as usize].max(0.0);
                }
                normalize(out);
            }
        }
    }

    /// Computes a-posteriori vectors and hard decisions. Returns `false` if
    /// any symbol's maximum is tied.
    fn decide(&mut self, gammas: &LikelihoodBlock) -> bool {
        let q = self.q;
        let mut all_decided = true;
        for i in 0..self.graph.n_symbols() {
            let post = &mut self.post[i * q..(i + 1) * q];
            post.copy_from_slice(gammas.gamma(i));
            for &e in self.graph.symbol_edges(i) {
                let msg = &self.c2v[e * q..(e + 1) * q];
                post.iter_mut().zip(msg).for_each(|(o, &m)| *o *= m);
            }
            normalize(post);
            let (a, unique) = argmax(post);
            self.decision[i] = a as Symbol;
            all_decided &= unique;
        }
        all_decided
    }
}

/// One-shot convenience wrapper around [`Decoder`].
pub fn decode(graph: &TannerGraph, gammas: &LikelihoodBlock, max_iter: usize) -> DecodeOutcome {
    Decoder::new(graph).decode(gammas, max_iter)
}
