//! Gray-mapped square M-QAM, Rayleigh fading with AWGN, and the two ways of
//! turning received samples into decoder likelihoods:
//!
//! * direct: one received sample per coded symbol, `m == p`, no interleaver;
//! * bitwise: per-bit marginals at the demapper, de-interleaved and regrouped
//!   into symbol likelihoods as products of bit probabilities.

use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::interleaver::InterleaverPattern;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModemError {
    #[error("square QAM needs an even number of bits per point in 2..=8, got {0}")]
    UnsupportedOrder(usize),
    #[error("unknown modulation `{0}` (expected qam4, qam16, qam64 or qam256)")]
    UnknownModulation(String),
    #[error("{got} bits is not a multiple of {m} bits per point")]
    BitCount { got: usize, m: usize },
    #[error("constellation has {points} points but the field has {q} symbols")]
    OrderMismatch { points: usize, q: usize },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

/// Modulations exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qam4,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    /// Bits per point.
    pub fn bits(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    pub fn from_bits(m: usize) -> Option<Self> {
        match m {
            2 => Some(Modulation::Qam4),
            4 => Some(Modulation::Qam16),
            6 => Some(Modulation::Qam64),
            8 => Some(Modulation::Qam256),
            _ => None,
        }
    }

    pub fn constellation(self) -> Constellation {
        Constellation::qam(self.bits()).expect("all variants are square")
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "qam{}", 1usize << self.bits())
    }
}

impl FromStr for Modulation {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qam4" => Ok(Modulation::Qam4),
            "qam16" => Ok(Modulation::Qam16),
            "qam64" => Ok(Modulation::Qam64),
            "qam256" => Ok(Modulation::Qam256),
            _ => Err(ModemError::UnknownModulation(s.to_string())),
        }
    }
}

#[inline]
fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Square QAM with unit average energy.
///
/// Label `a` (an `m`-bit integer, bit `t` = `t`-th bit, LSB-first) is split
/// into a low half driving the in-phase axis and a high half driving the
/// quadrature axis. Each half is a Gray code of the PAM level, and level `l`
/// sits at amplitude `(L - 1) - 2l`, so the all-zero label is `(1 + j)/sqrt(2)`
/// for 4-QAM.
#[derive(Debug, Clone)]
pub struct Constellation {
    m: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn qam(m: usize) -> Result<Self, ModemError> {
        if m == 0 || !m.is_multiple_of(2) || m > 8 {
            return Err(ModemError::UnsupportedOrder(m));
        }
        let half = m / 2;
        let side = 1usize << half;
        let mask = side - 1;
        let energy = 2.0 * ((side * side - 1) as f64) / 3.0;
        let scale = energy.sqrt().recip();
        let amp = |g: usize| ((side - 1) as f64 - 2.0 * gray_decode(g) as f64) * scale;
        let points = (0..1usize << m)
            .map(|a| Complex64::new(amp(a & mask), amp(a >> half)))
            .collect();
        Ok(Constellation { m, points })
    }

    /// Bits per point.
    pub fn bits(&self) -> usize {
        self.m
    }

    /// Number of points `M = 2^m`.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Maps consecutive groups of `m` bits (LSB-first) to points.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>, ModemError> {
        if !bits.len().is_multiple_of(self.m) {
            return Err(ModemError::BitCount {
                got: bits.len(),
                m: self.m,
            });
        }
        let mut out = Vec::with_capacity(bits.len() / self.m);
        self.modulate_into(bits, &mut out);
        Ok(out)
    }

    pub(crate) fn modulate_into(&self, bits: &[u8], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(bits.chunks_exact(self.m).map(|chunk| {
            let label = chunk
                .iter()
                .enumerate()
                .fold(0usize, |acc, (t, &b)| acc | ((b as usize & 1) << t));
            self.points[label]
        }));
    }
}

/// One received sample with the fading amplitude known to the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub rho: Complex64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// i.i.d. Rayleigh amplitude per symbol with `E[h^2] = 1`.
    Rayleigh,
    /// Deterministic amplitude (`1.0` gives plain AWGN, `0.0` a total fade).
    Fixed(f64),
}

/// Flat fading followed by complex AWGN of variance `sigma2` per real dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub sigma2: f64,
    pub fading: Fading,
}

impl Channel {
    pub fn rayleigh(sigma2: f64) -> Self {
        Channel {
            sigma2,
            fading: Fading::Rayleigh,
        }
    }

    pub fn transmit<R: Rng + ?Sized>(&self, x: &[Complex64], rng: &mut R) -> Vec<ChannelSample> {
        let mut out = Vec::with_capacity(x.len());
        self.transmit_into(x, rng, &mut out);
        out
    }

    pub fn transmit_into<R: Rng + ?Sized>(
        &self,
        x: &[Complex64],
        rng: &mut R,
        out: &mut Vec<ChannelSample>,
    ) {
        let sd = self.sigma2.sqrt();
        out.clear();
        out.extend(x.iter().map(|&xk| {
            let h = match self.fading {
                Fading::Rayleigh => sample_rayleigh(rng),
                Fading::Fixed(h) => h,
            };
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            ChannelSample {
                rho: xk * h + Complex64::new(re * sd, im * sd),
                h,
            }
        }));
    }
}

/// Rayleigh amplitude with unit mean power, by inversion of `1 - exp(-h^2)`.
pub fn sample_rayleigh<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite
    let u: f64 = rng.random();
    (-(1.0 - u).ln()).sqrt()
}

/// `rho_k = h_k x_k + z_k` with Rayleigh `h_k` and noise variance `sigma2` per dimension.
pub fn rayleigh_awgn<R: Rng + ?Sized>(x: &[Complex64], sigma2: f64, rng: &mut R) -> Vec<ChannelSample> {
    Channel::rayleigh(sigma2).transmit(x, rng)
}

/// Noise variance per real dimension for a given Eb/N0, code rate and bits
/// per point, assuming unit-energy points and `E[h^2] = 1`:
/// `sigma2 = 1 / (2 R m 10^(EbN0/10))`.
pub fn ebn0_to_sigma2(ebn0_db: f64, rate: f64, m: usize) -> f64 {
    1.0 / (2.0 * rate * m as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// Es/N0 in dB corresponding to an Eb/N0.
pub fn ebn0_to_esn0_db(ebn0_db: f64, rate: f64, m: usize) -> f64 {
    ebn0_db + 10.0 * (rate * m as f64).log10()
}

/// `N` probability vectors of length `q`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodBlock {
    q: usize,
    data: Vec<f64>,
}

impl LikelihoodBlock {
    pub fn new(q: usize, data: Vec<f64>) -> Result<Self, ModemError> {
        if !data.len().is_multiple_of(q) {
            return Err(ModemError::Length {
                expected: q * (data.len() / q + 1),
                got: data.len(),
            });
        }
        Ok(LikelihoodBlock { q, data })
    }

    pub fn uniform(n: usize, q: usize) -> Self {
        LikelihoodBlock {
            q,
            data: vec![1.0 / q as f64; n * q],
        }
    }

    /// One-hot vectors at the given symbols.
    pub fn indicator(symbols: &[u8], q: usize) -> Self {
        let mut data = vec![0.0; symbols.len() * q];
        for (i, &a) in symbols.iter().enumerate() {
            data[i * q + a as usize] = 1.0;
        }
        LikelihoodBlock { q, data }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn gamma(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn gamma_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn resize(&mut self, n: usize, q: usize) {
        self.q = q;
        self.data.resize(n * q, 0.0);
    }
}

/// Gaussian kernel `exp(-|rho - h x|^2 / (2 sigma2))` for every point,
/// scaled so that the largest entry is 1.
fn point_weights(s: &ChannelSample, sigma2: f64, c: &Constellation, out: &mut [f64]) {
    let inv = 0.5 / sigma2;
    let mut dmin = f64::INFINITY;
    for (o, x) in out.iter_mut().zip(&c.points) {
        let d = (s.rho - x * s.h).norm_sqr();
        dmin = dmin.min(d);
        *o = d;
    }
    for o in out.iter_mut() {
        *o = (-(*o - dmin) * inv).exp();
    }
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = sum.recip();
        v.iter_mut().for_each(|x| *x *= inv);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Direct symbol likelihoods: `gamma_i(a) ∝ exp(-|rho_i - h_i x(a)|^2 / (2 sigma2))`
/// where `x(a)` is the point labeled by the binary image of `a`.
pub fn symbol_likelihoods(
    samples: &[ChannelSample],
    sigma2: f64,
    c: &Constellation,
    q: usize,
) -> Result<LikelihoodBlock, ModemError> {
    let mut block = LikelihoodBlock::uniform(0, q);
    symbol_likelihoods_into(samples, sigma2, c, q, &mut block)?;
    Ok(block)
}

pub fn symbol_likelihoods_into(
    samples: &[ChannelSample],
    sigma2: f64,
    c: &Constellation,
    q: usize,
    block: &mut LikelihoodBlock,
) -> Result<(), ModemError> {
    if c.size() != q {
        return Err(ModemError::OrderMismatch {
            points: c.size(),
            q,
        });
    }
    block.resize(samples.len(), q);
    for (s, gamma) in samples.iter().zip(block.data.chunks_exact_mut(q)) {
        point_weights(s, sigma2, c, gamma);
        normalize(gamma);
    }
    Ok(())
}

/// Per-bit posteriors `[P(b = 0), P(b = 1)]` for every label bit of every
/// sample, in modulation-bit order (`k * m + u`).
pub fn bitwise_marginalize(samples: &[ChannelSample], sigma2: f64, c: &Constellation) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(samples.len() * c.bits());
    let mut scratch = vec![0.0; c.size()];
    bitwise_marginalize_into(samples, sigma2, c, &mut scratch, &mut out);
    out
}

pub(crate) fn bitwise_marginalize_into(
    samples: &[ChannelSample],
    sigma2: f64,
    c: &Constellation,
    scratch: &mut [f64],
    out: &mut Vec<[f64; 2]>,
) {
    let m = c.bits();
    out.clear();
    for s in samples {
        point_weights(s, sigma2, c, scratch);
        let base = out.len();
        out.resize(base + m, [0.0; 2]);
        let bits = &mut out[base..];
        for (label, &w) in scratch.iter().enumerate() {
            for (u, b) in bits.iter_mut().enumerate() {
                b[(label >> u) & 1] += w;
            }
        }
        for b in bits.iter_mut() {
            normalize(b);
        }
    }
}

/// De-interleaves per-bit posteriors and forms symbol likelihoods
/// `gamma_i(a) = prod_t P(bit_{i,t} = a_t)`.
pub fn regroup_bits_to_symbols(
    bit_probs: &[[f64; 2]],
    pat: &InterleaverPattern,
) -> Result<LikelihoodBlock, ModemError> {
    let mut block = LikelihoodBlock::uniform(0, 1 << pat.p());
    regroup_bits_to_symbols_into(bit_probs, pat, &mut block)?;
    Ok(block)
}

pub fn regroup_bits_to_symbols_into(
    bit_probs: &[[f64; 2]],
    pat: &InterleaverPattern,
    block: &mut LikelihoodBlock,
) -> Result<(), ModemError> {
    if bit_probs.len() != pat.n() {
        return Err(ModemError::Length {
            expected: pat.n(),
            got: bit_probs.len(),
        });
    }
    let p = pat.p();
    let q = 1usize << p;
    let n_sym = pat.n_symbols();
    block.resize(n_sym, q);
    let perm = pat.perm();
    for (i, gamma) in block.data.chunks_exact_mut(q).enumerate() {
        gamma[0] = 1.0;
        // after bit t, entries 0..2^(t+1) hold products over bits 0..=t
        for t in 0..p {
            let pb = bit_probs[perm[i * p + t]];
            let half = 1usize << t;
            for a in 0..half {
                let v = gamma[a];
                gamma[a] = v * pb[0];
                gamma[a + half] = v * pb[1];
            }
        }
        normalize(gamma);
    }
    Ok(())
}
