//! Monte-Carlo frame-error-rate harness.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `(master_seed, point_index)` with stream id `trial_index`, so results do
//! not depend on how trials are scheduled over workers. Trials run in
//! batches; batch results are folded strictly in trial order and the fold
//! stops at the exact trial where the stopping rule fires, which makes every
//! record identical to a single-threaded run.

use std::io;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decoder::{DecodeOutcome, DecodeStatus, Decoder, DEFAULT_MAX_ITER};
use crate::gf::Symbol;
use crate::interleaver::InterleaverPattern;
use crate::modem::{
    self, Channel, ChannelSample, Constellation, LikelihoodBlock, ModemError, Modulation,
};
use crate::tanner::{Encoder, TannerError, TannerGraph};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Column order of the results file.
pub const CSV_HEADER: &str =
    "ebn0_db,frames,frame_errors,detected,undetected,bit_errors,fer,detected_pct,mean_iters,ci_lo,ci_hi";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("constellation carries {m} bits per point but the code has {p} bits per symbol")]
    WidthMismatch { p: usize, m: usize },
    #[error("interleaver covers {pattern} bits with p={pat_p}, m={pat_m}; the system needs {n} bits with p={p}, m={m}")]
    PatternMismatch {
        pattern: usize,
        pat_p: usize,
        pat_m: usize,
        n: usize,
        p: usize,
        m: usize,
    },
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Code(#[from] TannerError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error("writing results: {0}")]
    Io(#[from] io::Error),
}

/// Everything fixed across trials: code, encoder, interleaver, constellation.
#[derive(Debug, Clone)]
pub struct System {
    graph: TannerGraph,
    encoder: Encoder,
    pattern: InterleaverPattern,
    constellation: Constellation,
}

impl System {
    pub fn new(graph: TannerGraph, pattern: InterleaverPattern, modulation: Modulation) -> Result<Self, SimError> {
        let p = graph.field().p() as usize;
        let m = modulation.bits();
        if p != m {
            return Err(SimError::WidthMismatch { p, m });
        }
        let n = graph.n_symbols() * p;
        if pattern.n() != n || pattern.p() != p || pattern.m() != m {
            return Err(SimError::PatternMismatch {
                pattern: pattern.n(),
                pat_p: pattern.p(),
                pat_m: pattern.m(),
                n,
                p,
                m,
            });
        }
        let encoder = Encoder::new(&graph)?;
        Ok(System {
            graph,
            encoder,
            pattern,
            constellation: modulation.constellation(),
        })
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn pattern(&self) -> &InterleaverPattern {
        &self.pattern
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Information rate `K / N`.
    pub fn rate(&self) -> f64 {
        self.encoder.k() as f64 / self.graph.n_symbols() as f64
    }

    pub fn sigma2(&self, ebn0_db: f64) -> f64 {
        modem::ebn0_to_sigma2(ebn0_db, self.rate(), self.constellation.bits())
    }

    pub fn esn0_db(&self, ebn0_db: f64) -> f64 {
        modem::ebn0_to_esn0_db(ebn0_db, self.rate(), self.constellation.bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialOutcome {
    Success,
    /// Decoder stopped without identifying a codeword.
    DetectedError,
    /// Decoder converged to a codeword other than the transmitted one.
    UndetectedError,
}

/// Classifies a decoding result against the transmitted codeword.
pub fn classify(outcome: &DecodeOutcome, transmitted: &[Symbol]) -> TrialOutcome {
    if outcome.decision == transmitted {
        TrialOutcome::Success
    } else if outcome.status == DecodeStatus::Converged {
        TrialOutcome::UndetectedError
    } else {
        TrialOutcome::DetectedError
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    /// Errors among the information bits.
    pub bit_errors: u64,
    pub iterations: usize,
}

/// Per-worker buffers for [`run_trial_with`].
pub struct TrialWorkspace<'s> {
    decoder: Decoder<'s>,
    message: Vec<Symbol>,
    codeword: Vec<Symbol>,
    coded_bits: Vec<u8>,
    mod_bits: Vec<u8>,
    tx: Vec<num_complex::Complex64>,
    rx: Vec<ChannelSample>,
    bit_probs: Vec<[f64; 2]>,
    point_scratch: Vec<f64>,
    gammas: LikelihoodBlock,
}

impl<'s> TrialWorkspace<'s> {
    pub fn new(system: &'s System) -> Self {
        let n_sym = system.graph.n_symbols();
        let n = system.pattern.n();
        TrialWorkspace {
            decoder: Decoder::new(&system.graph),
            message: vec![0; system.encoder.k()],
            codeword: vec![0; n_sym],
            coded_bits: vec![0; n],
            mod_bits: vec![0; n],
            tx: Vec::with_capacity(system.pattern.n_modulation()),
            rx: Vec::with_capacity(system.pattern.n_modulation()),
            bit_probs: Vec::with_capacity(n),
            point_scratch: vec![0.0; system.constellation.size()],
            gammas: LikelihoodBlock::uniform(n_sym, system.graph.field().q()),
        }
    }

    /// Likelihoods formed by the last trial.
    pub fn likelihoods(&self) -> &LikelihoodBlock {
        &self.gammas
    }

    /// Codeword sent in the last trial.
    pub fn transmitted(&self) -> &[Symbol] {
        &self.codeword
    }
}

/// Decoder input from received samples: direct symbol likelihoods when there
/// is no interleaver, otherwise bit marginals regrouped after de-interleaving.
pub fn form_likelihoods(
    system: &System,
    samples: &[ChannelSample],
    sigma2: f64,
    ws_bits: &mut Vec<[f64; 2]>,
    scratch: &mut [f64],
    out: &mut LikelihoodBlock,
) -> Result<(), ModemError> {
    let q = system.graph.field().q();
    if system.pattern.is_identity() {
        modem::symbol_likelihoods_into(samples, sigma2, &system.constellation, q, out)
    } else {
        modem::bitwise_marginalize_into(samples, sigma2, &system.constellation, scratch, ws_bits);
        modem::regroup_bits_to_symbols_into(ws_bits, &system.pattern, out)
    }
}

/// One pass through the chain: message, encoder, bit serialization,
/// interleaver, mapper, channel, likelihoods, decoder, classification.
pub fn run_trial_with<R: Rng + ?Sized>(
    system: &System,
    channel: &Channel,
    max_iter: usize,
    rng: &mut R,
    ws: &mut TrialWorkspace<'_>,
) -> TrialResult {
    let q = system.graph.field().q();
    let p = system.pattern.p();
    for m in ws.message.iter_mut() {
        *m = rng.random_range(0..q) as Symbol;
    }
    system.encoder.encode_into(&ws.message, &mut ws.codeword);
    for (i, &s) in ws.codeword.iter().enumerate() {
        for t in 0..p {
            ws.coded_bits[i * p + t] = (s >> t) & 1;
        }
    }
    for (&dst, &b) in system.pattern.perm().iter().zip(&ws.coded_bits) {
        ws.mod_bits[dst] = b;
    }
    system.constellation.modulate_into(&ws.mod_bits, &mut ws.tx);
    channel.transmit_into(&ws.tx, rng, &mut ws.rx);
    form_likelihoods(
        system,
        &ws.rx,
        channel.sigma2,
        &mut ws.bit_probs,
        &mut ws.point_scratch,
        &mut ws.gammas,
    )
    .expect("system dimensions were validated");

    let outcome = ws.decoder.decode(&ws.gammas, max_iter);
    let bit_errors = system
        .encoder
        .info_positions()
        .iter()
        .map(|&pos| (outcome.decision[pos] ^ ws.codeword[pos]).count_ones() as u64)
        .sum();
    TrialResult {
        outcome: classify(&outcome, &ws.codeword),
        bit_errors,
        iterations: outcome.iterations,
    }
}

/// Allocating convenience form of [`run_trial_with`] over a Rayleigh channel.
pub fn run_trial<R: Rng + ?Sized>(system: &System, sigma2: f64, max_iter: usize, rng: &mut R) -> TrialResult {
    let mut ws = TrialWorkspace::new(system);
    run_trial_with(system, &Channel::rayleigh(sigma2), max_iter, rng, &mut ws)
}

/// Random stream of one trial. The key packs `(master_seed, point_index)`
/// and the ChaCha stream id is the trial index, so distinct triples never
/// share a keystream.
pub fn trial_rng(master_seed: u64, point_index: u64, trial_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&point_index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial_index);
    rng
}

/// Eb/N0 grid `start, start + step, ...` up to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn single(ebn0_db: f64) -> Self {
        Sweep {
            start: ebn0_db,
            stop: ebn0_db,
            step: 1.0,
        }
    }

    pub fn points(&self) -> Result<Vec<f64>, SimError> {
        if self.step.is_nan() || self.step <= 0.0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(SimError::Sweep(format!("{self:?}")));
        }
        if self.stop < self.start {
            return Err(SimError::Sweep("stop is below start".into()));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.start + k as f64 * self.step).collect())
    }
}

impl std::str::FromStr for Sweep {
    type Err = SimError;

    /// `START:STOP:STEP` in dB.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(SimError::Sweep(format!("`{s}` is not START:STOP:STEP")));
        }
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| SimError::Sweep(format!("bad number `{x}`")))
        };
        let sweep = Sweep {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        sweep.points()?;
        Ok(sweep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub sweep: Sweep,
    pub max_frames: u64,
    pub min_frame_errors: u64,
    pub max_iter: usize,
    pub master_seed: u64,
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sweep: Sweep::single(10.0),
            max_frames: 10_000_000,
            min_frame_errors: 100,
            max_iter: DEFAULT_MAX_ITER,
            master_seed: 0,
            workers: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.sweep.points()?;
        if self.max_frames == 0 {
            return Err(SimError::Config("max_frames must be at least 1".into()));
        }
        if self.min_frame_errors == 0 {
            return Err(SimError::Config("min_frame_errors must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(SimError::Config("max_iter must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(SimError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Aggregated statistics of one Eb/N0 point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FerRecord {
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub detected_errors: u64,
    pub undetected_errors: u64,
    pub bit_errors: u64,
    pub mean_iterations: f64,
    pub fer: f64,
    /// Percentage (0-100) of frame errors that were detected; NaN without errors.
    pub detected_pct: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counters {
    frames: u64,
    detected: u64,
    undetected: u64,
    bit_errors: u64,
    iterations: u64,
}

impl Counters {
    fn add(&mut self, r: &TrialResult) {
        self.frames += 1;
        match r.outcome {
            TrialOutcome::Success => {}
            TrialOutcome::DetectedError => self.detected += 1,
            TrialOutcome::UndetectedError => self.undetected += 1,
        }
        self.bit_errors += r.bit_errors;
        self.iterations += r.iterations as u64;
    }

    fn frame_errors(&self) -> u64 {
        self.detected + self.undetected
    }

    fn record(&self, ebn0_db: f64) -> FerRecord {
        let frame_errors = self.frame_errors();
        let frames = self.frames.max(1) as f64;
        let (ci_lo, ci_hi) = wilson_interval(frame_errors, self.frames, Z_95);
        FerRecord {
            ebn0_db,
            frames: self.frames,
            frame_errors,
            detected_errors: self.detected,
            undetected_errors: self.undetected,
            bit_errors: self.bit_errors,
            mean_iterations: self.iterations as f64 / frames,
            fer: frame_errors as f64 / frames,
            detected_pct: if frame_errors > 0 {
                100.0 * self.detected as f64 / frame_errors as f64
            } else {
                f64::NAN
            },
            ci_lo,
            ci_hi,
        }
    }
}

impl FerRecord {
    /// One results-file row in [`CSV_HEADER`] order, without newline.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.ebn0_db,
            self.frames,
            self.frame_errors,
            self.detected_errors,
            self.undetected_errors,
            self.bit_errors,
            self.fer,
            self.detected_pct,
            self.mean_iterations,
            self.ci_lo,
            self.ci_hi
        )
    }
}

/// Runs trials of one Eb/N0 point until `min_frame_errors` errors or
/// `max_frames` frames, whichever comes first.
pub fn run_point(system: &System, cfg: &SimConfig, point_index: u64, ebn0_db: f64) -> FerRecord {
    run_point_on(system, cfg, point_index, ebn0_db, &Channel::rayleigh(system.sigma2(ebn0_db)))
}

/// [`run_point`] over an explicit channel model.
pub fn run_point_on(
    system: &System,
    cfg: &SimConfig,
    point_index: u64,
    ebn0_db: f64,
    channel: &Channel,
) -> FerRecord {
    let workers = cfg.workers.max(1);
    let batch = (32 * workers) as u64;
    let mut workspaces: Vec<TrialWorkspace<'_>> = (0..workers).map(|_| TrialWorkspace::new(system)).collect();
    let mut counters = Counters::default();
    let mut next = 0u64;
    let mut results: Vec<Option<TrialResult>> = Vec::new();

    'outer: while next < cfg.max_frames {
        let len = batch.min(cfg.max_frames - next);
        results.clear();
        results.resize(len as usize, None);
        let run = |ws: &mut TrialWorkspace<'_>, t: u64| {
            let mut rng = trial_rng(cfg.master_seed, point_index, t);
            run_trial_with(system, channel, cfg.max_iter, &mut rng, ws)
        };
        if workers == 1 {
            for (off, slot) in results.iter_mut().enumerate() {
                *slot = Some(run(&mut workspaces[0], next + off as u64));
            }
        } else {
            // worker w takes batch offsets w, w + workers, ...
            let mut lanes: Vec<Vec<(usize, TrialResult)>> = vec![Vec::new(); workers];
            thread::scope(|s| {
                for (w, (ws, lane)) in workspaces.iter_mut().zip(lanes.iter_mut()).enumerate() {
                    let run = &run;
                    s.spawn(move || {
                        for off in (w..len as usize).step_by(workers) {
                            lane.push((off, run(ws, next + off as u64)));
                        }
                    });
                }
            });
            for (off, r) in lanes.into_iter().flatten() {
                results[off] = Some(r);
            }
        }
        for r in results.iter().flatten() {
            counters.add(r);
            if counters.frame_errors() >= cfg.min_frame_errors || counters.frames >= cfg.max_frames {
                break 'outer;
            }
        }
        next += len;
    }
    counters.record(ebn0_db)
}

/// Runs every point of the sweep in increasing Eb/N0 order, handing each
/// record to `sink` as soon as it is complete.
pub fn run_sweep<F>(system: &System, cfg: &SimConfig, mut sink: F) -> Result<Vec<FerRecord>, SimError>
where
    F: FnMut(&FerRecord) -> io::Result<()>,
{
    cfg.validate()?;
    let mut records = Vec::new();
    for (k, ebn0) in cfg.sweep.points()?.into_iter().enumerate() {
        let rec = run_point(system, cfg, k as u64, ebn0);
        log::info!(
            "Eb/N0 {ebn0} dB: {} errors / {} frames (FER {:.3e})",
            rec.frame_errors,
            rec.frames,
            rec.fer
        );
        sink(&rec)?;
        records.push(rec);
    }
    Ok(records)
}

/// Writes a complete results file (header plus one row per record).
pub fn write_csv<W: io::Write>(mut w: W, records: &[FerRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}
