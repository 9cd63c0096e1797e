//! Piecewise-affine intermittent interval map realizing the renewal chain.
//!
//! The partition `A_i = [d_i, d_{i-1})` (with `A_1 = [d_1, 1]`) codes the map
//! onto the chain: branch `1` stretches `A_1` onto `[0,1]`, branch `i ≥ 2`
//! maps `A_i` affinely onto `A_{i-1}`. Lebesgue-uniform points in `A_1` land
//! in `A_j` with probability `p_j`, so the coded orbit is the chain.
//!
//! Breakpoints cluster at 0 and stop being separable in double precision;
//! the map only resolves symbols up to `symbol_cap`, and float orbits that
//! fall below it are censored. The chain-sampled orbit (return lengths drawn
//! directly from `p`) is the exact reference for every statistic.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chain::RenewalChain;
use crate::error::{Error, Result};
use crate::evolve::{Observable, RateCurve};
use crate::numeric::CompensatedSum;

/// Smallest branch width (`p_i = d_{i-1} - d_i`) the map resolves.
pub const MIN_BRANCH_WIDTH: f64 = 1e-14;

/// Relative amplitude of the multiplicative dither on branch-1 images.
const DITHER: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone)]
pub struct IntermittentMap<'c> {
    chain: &'c RenewalChain,
    /// `d_0 = 1, d_1, ..., d_K`.
    d: Vec<f64>,
    /// `alpha[i] = p_i / p_{i-1}` for `1 ≤ i ≤ K` (`p_0 = 1`); `alpha[0]` unused.
    alpha: Vec<f64>,
    cap: usize,
    /// Cumulative `π_1..π_K`; empty for a null-recurrent chain.
    pi_cdf: Vec<f64>,
}

impl<'c> IntermittentMap<'c> {
    pub fn build(chain: &'c RenewalChain) -> Result<Self> {
        let n = chain.truncation();
        let mut cap = 0;
        for i in 1..=n {
            let p = chain.p(i);
            if p == 0.0 {
                if chain.d(i) > 0.0 {
                    return Err(Error::ZeroProbabilityBranch(i));
                }
                break;
            }
            if p < MIN_BRANCH_WIDTH {
                break;
            }
            cap = i;
        }
        if cap == 0 {
            return Err(Error::ZeroProbabilityBranch(1));
        }
        let d: Vec<f64> = (0..=cap).map(|i| chain.d(i)).collect();
        let mut alpha = vec![1.0; cap + 1];
        alpha[1] = chain.p(1);
        for i in 2..=cap {
            alpha[i] = chain.p(i) / chain.p(i - 1);
        }
        for i in 1..=cap {
            if d[i] >= d[i - 1] {
                return Err(Error::ZeroProbabilityBranch(i));
            }
        }
        let pi_cdf = if chain.is_positive_recurrent() {
            let mut acc = CompensatedSum::default();
            (1..=cap)
                .map(|i| {
                    acc += chain.pi(i);
                    acc.value()
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            chain,
            d,
            alpha,
            cap,
            pi_cdf,
        })
    }

    pub fn chain(&self) -> &'c RenewalChain {
        self.chain
    }

    /// Largest resolvable partition index.
    pub fn symbol_cap(&self) -> usize {
        self.cap
    }

    /// Breakpoints `d_0..=d_K`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.d
    }

    /// Slope parameter `α_i = p_i / p_{i-1}` for `1 ≤ i ≤ K`.
    pub fn alpha(&self, i: usize) -> f64 {
        assert!((1..=self.cap).contains(&i), "branch index out of range");
        self.alpha[i]
    }

    /// Whether `[0, d_K)` is empty, i.e. every point has a symbol.
    pub fn fully_resolved(&self) -> bool {
        self.d[self.cap] == 0.0
    }

    /// Partition index of `x`; `x = d_i` belongs to `A_i`.
    pub fn encode(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("point {x} outside [0,1]")));
        }
        let above = self.d[1..].partition_point(|&b| b > x);
        if above == self.cap {
            return Err(Error::SymbolCapExceeded { cap: self.cap });
        }
        Ok(above + 1)
    }

    /// Affine formula of branch `i`, evaluated without locating `x`.
    pub fn branch_image(&self, i: usize, x: f64) -> f64 {
        if i == 1 {
            (x - self.d[1]) / self.alpha[1]
        } else {
            self.d[i - 1] + (x - self.d[i]) / self.alpha[i]
        }
    }

    pub fn apply(&self, x: f64) -> Result<f64> {
        let i = self.encode(x)?;
        Ok(self.branch_image(i, x).clamp(0.0, 1.0))
    }

    /// Closure of `A_i` in floating point: `[d_i, d_{i-1})`, or `[d_1, 1]`.
    fn cell(&self, i: usize) -> (f64, f64) {
        if i == 1 {
            (self.d[1], 1.0)
        } else {
            (self.d[i], self.d[i - 1].next_down())
        }
    }

    /// One step of the coded orbit. Descending branches keep the symbol law
    /// exact by clamping into the target cell; the branch-1 image is
    /// re-encoded after `perturb`.
    fn advance(&self, x: f64, s: usize, perturb: impl FnOnce(f64) -> f64) -> Result<(f64, usize)> {
        if s >= 2 {
            let (lo, hi) = self.cell(s - 1);
            Ok((self.branch_image(s, x).clamp(lo, hi), s - 1))
        } else {
            let y = perturb(self.branch_image(1, x)).clamp(0.0, 1.0);
            let s = self.encode(y)?;
            Ok((y, s))
        }
    }

    /// Symbols of `x0, f(x0), ..., f^n(x0)`, iterated without dither.
    pub fn orbit_symbols(&self, x0: f64, n: usize) -> Result<Vec<usize>> {
        if !(x0 > 0.0 && x0 <= 1.0) {
            return Err(Error::InvalidArgument(format!("orbit start {x0} outside (0,1]")));
        }
        let mut s = self.encode(x0)?;
        let mut x = x0;
        let mut out = Vec::with_capacity(n + 1);
        out.push(s);
        for _ in 0..n {
            (x, s) = self.advance(x, s, |y| y)?;
            out.push(s);
        }
        Ok(out)
    }

    /// Draw a symbol from `π` restricted to `1..=K`.
    fn sample_stationary_symbol(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = self.pi_cdf[self.cap - 1];
        let u = rng.random::<f64>() * total;
        (self.pi_cdf.partition_point(|&c| c <= u) + 1).min(self.cap)
    }

    /// Point from `ρ`: a stationary symbol, or `None` when the draw falls
    /// below the symbol cap.
    fn sample_rho(&self, rng: &mut ChaCha8Rng) -> Option<(f64, usize)> {
        let u: f64 = rng.random();
        if u >= self.pi_cdf[self.cap - 1] {
            return None;
        }
        let s = (self.pi_cdf.partition_point(|&c| c <= u) + 1).min(self.cap);
        let (lo, hi) = self.cell(s);
        let x = (self.d[s] + rng.random::<f64>() * self.chain.p(s)).clamp(lo, hi);
        Some((x, s))
    }

    fn require_stationary(&self) -> Result<()> {
        if self.pi_cdf.is_empty() {
            return Err(Error::PreconditionViolated(
                "Monte Carlo estimators need a positive-recurrent chain".into(),
            ));
        }
        Ok(())
    }
}

/// How a symbolic orbit is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// Float iteration of the map with a `2^-40` relative dither on branch-1
    /// images; orbits falling below the symbol cap restart from `ρ`.
    FloatOrbit,
    /// Return lengths drawn directly from `p` (exact chain law).
    ChainSampled,
}

/// Parameters shared by the orbit-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Recorded steps summed over all streams.
    pub orbit_length: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Independent streams; stream `k` is seeded with `seed + k`.
    pub streams: usize,
    /// Batches for the batch-means standard error; split evenly over streams.
    pub batches: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            orbit_length: 1_000_000,
            burn_in: 10_000,
            seed: 0,
            streams: 4,
            batches: 100,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.streams == 0 || self.batches < 2 || !self.batches.is_multiple_of(self.streams) {
            return Err(Error::InvalidArgument(format!(
                "{} batches cannot be split over {} streams",
                self.batches, self.streams
            )));
        }
        if self.orbit_length < self.batches as u64 {
            return Err(Error::InvalidArgument("orbit shorter than the batch count".into()));
        }
        Ok(())
    }

    fn stream_length(&self, k: usize) -> u64 {
        let s = self.streams as u64;
        self.orbit_length / s + u64::from((k as u64) < self.orbit_length % s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Samples lost to (or resolved through) the symbol cap.
    pub censored: u64,
}

impl McEstimate {
    /// `|mean - target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Estimates on an integer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct McCurve {
    pub n: Vec<u64>,
    pub estimates: Vec<McEstimate>,
}

impl McCurve {
    pub fn at(&self, n: u64) -> Option<&McEstimate> {
        self.n.iter().position(|&m| m == n).map(|k| &self.estimates[k])
    }

    /// Means as a rate curve (zero truncation bound) for the fitting routines.
    pub fn to_rate_curve(&self) -> Result<RateCurve> {
        RateCurve::new(
            self.n.clone(),
            self.estimates.iter().map(|e| e.mean).collect(),
            vec![0.0; self.n.len()],
        )
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "mean", "stderr", "censored"])?;
        for (n, e) in self.n.iter().zip(&self.estimates) {
            w.write_record([
                n.to_string(),
                format!("{:e}", e.mean),
                format!("{:e}", e.stderr),
                e.censored.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct FloatOrbit<'m, 'c> {
    map: &'m IntermittentMap<'c>,
    x: f64,
    s: usize,
    rng: ChaCha8Rng,
    censored: u64,
}

impl<'m, 'c> FloatOrbit<'m, 'c> {
    fn new(map: &'m IntermittentMap<'c>, rng: ChaCha8Rng) -> Self {
        let mut orbit = Self {
            map,
            x: 1.0,
            s: 1,
            rng,
            censored: 0,
        };
        orbit.restart();
        orbit
    }

    fn restart(&mut self) {
        loop {
            if let Some((x, s)) = self.map.sample_rho(&mut self.rng) {
                self.x = x;
                self.s = s;
                return;
            }
        }
    }

    fn next(&mut self) -> (u64, bool) {
        let rng = &mut self.rng;
        match self.map.advance(self.x, self.s, |y| {
            y * (1.0 + (rng.random::<f64>() - 0.5) * 2.0 * DITHER)
        }) {
            Ok((x, s)) => {
                self.x = x;
                self.s = s;
                (s as u64, false)
            }
            Err(_) => {
                self.censored += 1;
                self.restart();
                (self.s as u64, true)
            }
        }
    }
}

struct ChainOrbit<'c> {
    chain: &'c RenewalChain,
    s: u64,
    rng: ChaCha8Rng,
}

impl ChainOrbit<'_> {
    fn next(&mut self) -> (u64, bool) {
        self.s = if self.s >= 2 {
            self.s - 1
        } else {
            self.chain.return_time_quantile(1.0 - self.rng.random::<f64>())
        };
        (self.s, false)
    }
}

enum Orbit<'m, 'c> {
    Float(FloatOrbit<'m, 'c>),
    Chain(ChainOrbit<'c>),
}

impl<'m, 'c> Orbit<'m, 'c> {
    /// Stream `k`, started from `ρ` restricted to resolvable symbols.
    fn start(map: &'m IntermittentMap<'c>, sampler: Sampler, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match sampler {
            Sampler::FloatOrbit => Orbit::Float(FloatOrbit::new(map, rng)),
            Sampler::ChainSampled => {
                let s = map.sample_stationary_symbol(&mut rng) as u64;
                Orbit::Chain(ChainOrbit {
                    chain: map.chain,
                    s,
                    rng,
                })
            }
        }
    }

    fn current(&self) -> u64 {
        match self {
            Orbit::Float(o) => o.s as u64,
            Orbit::Chain(o) => o.s,
        }
    }

    /// Next symbol and whether continuity with the previous one was broken.
    #[inline]
    fn next(&mut self) -> (u64, bool) {
        match self {
            Orbit::Float(o) => o.next(),
            Orbit::Chain(o) => o.next(),
        }
    }

    fn censored(&self) -> u64 {
        match self {
            Orbit::Float(o) => o.censored,
            Orbit::Chain(_) => 0,
        }
    }

    fn burn(&mut self, steps: u64) {
        for _ in 0..steps {
            self.next();
        }
    }
}

/// Observable values indexed by symbol, with the limit value beyond.
struct SymbolTable {
    values: Vec<f64>,
    inf: f64,
}

impl SymbolTable {
    fn new(u: &Observable) -> Self {
        let mut values = vec![u.u_inf];
        values.extend_from_slice(&u.values);
        Self { values, inf: u.u_inf }
    }

    #[inline]
    fn get(&self, s: u64) -> f64 {
        self.values.get(s as usize).copied().unwrap_or(self.inf)
    }
}

fn batch_stats(sums: &[f64], counts: &[u64]) -> (f64, f64, u64) {
    let total: f64 = sums.iter().sum();
    let count: u64 = counts.iter().sum();
    let means: Vec<f64> = sums
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mean = if count > 0 { total / count as f64 } else { f64::NAN };
    let b = means.len() as f64;
    let stderr = if means.len() > 1 {
        let m = means.iter().sum::<f64>() / b;
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0) / b).sqrt()
    } else {
        f64::INFINITY
    };
    (mean, stderr, count)
}

struct CorrelationStream {
    sums: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
    censored: u64,
}

/// `ρ(u∘f^n · v) - ρ(u)ρ(v)` for each `n` in `lags`, by time averages along
/// the orbit with exact `ρ(u)`, `ρ(v)` from `π`.
pub fn mc_correlation(
    map: &IntermittentMap,
    u: &Observable,
    v: &Observable,
    lags: &[u64],
    cfg: &McConfig,
    sampler: Sampler,
) -> Result<McCurve> {
    map.require_stationary()?;
    cfg.validate()?;
    if lags.is_empty() {
        return Err(Error::InvalidArgument("empty lag list".into()));
    }
    let max_lag = *lags.iter().max().unwrap() as usize;
    let mask = (max_lag + 1).next_power_of_two() - 1;
    let ut = SymbolTable::new(u);
    let vt = SymbolTable::new(v);
    let centering = u.pair_with_pi(map.chain) * v.pair_with_pi(map.chain);
    let per_stream = cfg.batches / cfg.streams;

    let streams: Vec<CorrelationStream> = (0..cfg.streams)
        .into_par_iter()
        .map(|k| {
            let mut orbit = Orbit::start(map, sampler, cfg.seed.wrapping_add(k as u64));
            let mut ring = vec![0.0; mask + 1];
            let mut pos = 0usize;
            let mut run = 0u64;
            ring[0] = vt.get(orbit.current());
            for _ in 0..cfg.burn_in {
                let (s, fresh) = orbit.next();
                run = if fresh { 0 } else { run + 1 };
                pos = (pos + 1) & mask;
                ring[pos] = vt.get(s);
            }
            let len = cfg.stream_length(k);
            let batch_len = len / per_stream as u64;
            let mut sums = vec![vec![0.0; lags.len()]; per_stream];
            let mut counts = vec![vec![0u64; lags.len()]; per_stream];
            let mut acc = vec![0.0; lags.len()];
            let mut cnt = vec![0u64; lags.len()];
            let mut b = 0usize;
            let mut in_batch = 0u64;
            for _ in 0..len {
                let (s, fresh) = orbit.next();
                run = if fresh { 0 } else { run + 1 };
                pos = (pos + 1) & mask;
                ring[pos] = vt.get(s);
                let us = ut.get(s);
                for (li, &lag) in lags.iter().enumerate() {
                    if run >= lag {
                        acc[li] += us * ring[pos.wrapping_sub(lag as usize) & mask];
                        cnt[li] += 1;
                    }
                }
                in_batch += 1;
                if in_batch == batch_len && b + 1 < per_stream {
                    sums[b].copy_from_slice(&acc);
                    counts[b].copy_from_slice(&cnt);
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    cnt.iter_mut().for_each(|c| *c = 0);
                    b += 1;
                    in_batch = 0;
                }
            }
            sums[b].copy_from_slice(&acc);
            counts[b].copy_from_slice(&cnt);
            CorrelationStream {
                sums,
                counts,
                censored: orbit.censored(),
            }
        })
        .collect();

    let censored = streams.iter().map(|s| s.censored).sum();
    let estimates = (0..lags.len())
        .map(|li| {
            let sums: Vec<f64> = streams.iter().flat_map(|s| s.sums.iter().map(|b| b[li])).collect();
            let counts: Vec<u64> = streams.iter().flat_map(|s| s.counts.iter().map(|b| b[li])).collect();
            let (mean, stderr, n_samples) = batch_stats(&sums, &counts);
            McEstimate {
                mean: mean - centering,
                stderr,
                n_samples,
                seed: cfg.seed,
                censored,
            }
        })
        .collect();
    Ok(McCurve {
        n: lags.to_vec(),
        estimates,
    })
}

/// Return-time histogram bins `1..=KAC_BINS` plus an overflow bin.
pub const KAC_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KacResult {
    /// Fraction of time spent in `E = A_1`.
    pub rho_e: McEstimate,
    /// Mean length of completed excursions from `E` back to `E`.
    pub mean_return: McEstimate,
    pub product: f64,
    /// Counts of return times `1..=10`, then `> 10`.
    pub histogram: Vec<u64>,
    /// `p_1..p_10, d_10`.
    pub expected: Vec<f64>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// 0.999 quantile of the chi-square law.
    pub chi_square_quantile: f64,
}

impl KacResult {
    pub fn histogram_consistent(&self) -> bool {
        self.chi_square < self.chi_square_quantile
    }
}

struct KacStream {
    visit_batches: Vec<f64>,
    batch_sizes: Vec<u64>,
    histogram: Vec<u64>,
    returns: u64,
    return_sum: f64,
    return_sq: f64,
    censored: u64,
}

/// Kac's formula `ρ(E) · E[return time] = 1` for `E = A_1`, with the
/// empirical return-time histogram checked against `p`.
pub fn kac_check(map: &IntermittentMap, cfg: &McConfig, sampler: Sampler) -> Result<KacResult> {
    map.require_stationary()?;
    cfg.validate()?;
    let per_stream = cfg.batches / cfg.streams;
    let streams: Vec<KacStream> = (0..cfg.streams)
        .into_par_iter()
        .map(|k| {
            let mut orbit = Orbit::start(map, sampler, cfg.seed.wrapping_add(k as u64));
            orbit.burn(cfg.burn_in);
            let len = cfg.stream_length(k);
            let batch_len = len / per_stream as u64;
            let mut visit_batches = vec![0.0; per_stream];
            let mut batch_sizes = vec![0u64; per_stream];
            let mut histogram = vec![0u64; KAC_BINS + 1];
            let (mut returns, mut return_sum, mut return_sq) = (0u64, 0.0, 0.0);
            let mut last_visit: Option<u64> = None;
            for t in 0..len {
                let (s, fresh) = orbit.next();
                if fresh {
                    last_visit = None;
                }
                let b = ((t / batch_len.max(1)) as usize).min(per_stream - 1);
                batch_sizes[b] += 1;
                if s == 1 {
                    visit_batches[b] += 1.0;
                    if let Some(t0) = last_visit {
                        let r = t - t0;
                        histogram[(r as usize).min(KAC_BINS + 1) - 1] += 1;
                        returns += 1;
                        return_sum += r as f64;
                        return_sq += (r as f64).powi(2);
                    }
                    last_visit = Some(t);
                }
            }
            KacStream {
                visit_batches,
                batch_sizes,
                histogram,
                returns,
                return_sum,
                return_sq,
                censored: orbit.censored(),
            }
        })
        .collect();

    let censored = streams.iter().map(|s| s.censored).sum();
    let visits: Vec<f64> = streams.iter().flat_map(|s| s.visit_batches.clone()).collect();
    let sizes: Vec<u64> = streams.iter().flat_map(|s| s.batch_sizes.clone()).collect();
    let (rho, rho_err, steps) = batch_stats(&visits, &sizes);
    let returns: u64 = streams.iter().map(|s| s.returns).sum();
    let return_sum: f64 = streams.iter().map(|s| s.return_sum).sum();
    let return_sq: f64 = streams.iter().map(|s| s.return_sq).sum();
    let mean_r = return_sum / returns as f64;
    let var_r = (return_sq / returns as f64 - mean_r * mean_r).max(0.0);
    let mut histogram = vec![0u64; KAC_BINS + 1];
    for s in &streams {
        for (h, c) in histogram.iter_mut().zip(&s.histogram) {
            *h += c;
        }
    }

    let chain = map.chain;
    let mut expected: Vec<f64> = (1..=KAC_BINS).map(|r| chain.p(r)).collect();
    expected.push(chain.d(KAC_BINS));
    let mut chi_square = 0.0;
    let mut cells = 0usize;
    for (&o, &q) in histogram.iter().zip(&expected) {
        let e = q * returns as f64;
        if e > 0.0 {
            chi_square += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            chi_square = f64::INFINITY;
        }
    }
    let degrees_of_freedom = cells.saturating_sub(1).max(1);
    let chi_square_quantile = ChiSquared::new(degrees_of_freedom as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.999);

    Ok(KacResult {
        rho_e: McEstimate {
            mean: rho,
            stderr: rho_err,
            n_samples: steps,
            seed: cfg.seed,
            censored,
        },
        mean_return: McEstimate {
            mean: mean_r,
            stderr: (var_r / returns as f64).sqrt(),
            n_samples: returns,
            seed: cfg.seed,
            censored,
        },
        product: rho * mean_r,
        histogram,
        expected,
        chi_square,
        degrees_of_freedom,
        chi_square_quantile,
    })
}

/// Empirical `p_{1j}` against the exact return law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCell {
    pub j: usize,
    pub count: u64,
    pub frequency: f64,
    /// Binomial standard error `sqrt(p_j (1 - p_j) / n_1)` at the exact `p_j`.
    pub stderr: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    /// Occupation frequency of `A_i`, `i = 1..=i_max`.
    pub occupation: Vec<McEstimate>,
    pub exact_pi: Vec<f64>,
    /// Row 1, `j = 1..=i_max`.
    pub row1: Vec<TransitionCell>,
    /// Frequency of `i → i-1` among departures from `i`, `i = 2..=i_max`.
    pub descent: Vec<f64>,
    /// Departures from state 1.
    pub departures_from_1: u64,
}

impl FrequencyTable {
    pub fn row1_within(&self, k: f64) -> bool {
        self.row1.iter().all(|c| (c.frequency - c.exact).abs() <= k * c.stderr)
    }

    pub fn occupation_within(&self, k: f64) -> bool {
        self.occupation.iter().zip(&self.exact_pi).all(|(e, &pi)| e.within(pi, k))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "count", "frequency", "stderr", "exact"])?;
        for c in &self.row1 {
            w.write_record([
                c.j.to_string(),
                c.count.to_string(),
                format!("{:e}", c.frequency),
                format!("{:e}", c.stderr),
                format!("{:e}", c.exact),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct FrequencyStream {
    occupancy: Vec<Vec<f64>>,
    batch_sizes: Vec<u64>,
    row1: Vec<u64>,
    departures: Vec<u64>,
    descents: Vec<u64>,
    censored: u64,
}

/// Transition frequencies and occupation of the coded orbit against `P`, `π`.
pub fn markov_frequency_check(
    map: &IntermittentMap,
    cfg: &McConfig,
    sampler: Sampler,
    i_max: usize,
) -> Result<FrequencyTable> {
    map.require_stationary()?;
    cfg.validate()?;
    if i_max == 0 {
        return Err(Error::InvalidArgument("i_max must be at least 1".into()));
    }
    let per_stream = cfg.batches / cfg.streams;
    let streams: Vec<FrequencyStream> = (0..cfg.streams)
        .into_par_iter()
        .map(|k| {
            let mut orbit = Orbit::start(map, sampler, cfg.seed.wrapping_add(k as u64));
            orbit.burn(cfg.burn_in);
            let len = cfg.stream_length(k);
            let batch_len = len / per_stream as u64;
            let mut occupancy = vec![vec![0.0; i_max]; per_stream];
            let mut batch_sizes = vec![0u64; per_stream];
            let mut row1 = vec![0u64; i_max + 1];
            let mut departures = vec![0u64; i_max + 1];
            let mut descents = vec![0u64; i_max + 1];
            let mut prev = orbit.current();
            for t in 0..len {
                let (s, fresh) = orbit.next();
                let b = ((t / batch_len.max(1)) as usize).min(per_stream - 1);
                batch_sizes[b] += 1;
                if (s as usize) <= i_max {
                    occupancy[b][s as usize - 1] += 1.0;
                }
                if !fresh && (prev as usize) <= i_max {
                    departures[prev as usize] += 1;
                    if prev == 1 {
                        if (s as usize) <= i_max {
                            row1[s as usize] += 1;
                        }
                    } else if s + 1 == prev {
                        descents[prev as usize] += 1;
                    }
                }
                prev = s;
            }
            FrequencyStream {
                occupancy,
                batch_sizes,
                row1,
                departures,
                descents,
                censored: orbit.censored(),
            }
        })
        .collect();

    let censored = streams.iter().map(|s| s.censored).sum();
    let sizes: Vec<u64> = streams.iter().flat_map(|s| s.batch_sizes.clone()).collect();
    let occupation = (0..i_max)
        .map(|i| {
            let sums: Vec<f64> = streams.iter().flat_map(|s| s.occupancy.iter().map(|b| b[i])).collect();
            let (mean, stderr, n_samples) = batch_stats(&sums, &sizes);
            McEstimate {
                mean,
                stderr,
                n_samples,
                seed: cfg.seed,
                censored,
            }
        })
        .collect();
    let sum_over = |f: fn(&FrequencyStream) -> &Vec<u64>, i: usize| -> u64 { streams.iter().map(|s| f(s)[i]).sum() };
    let n1 = sum_over(|s| &s.departures, 1);
    let chain = map.chain;
    let row1 = (1..=i_max)
        .map(|j| {
            let count = sum_over(|s| &s.row1, j);
            let exact = chain.p(j);
            TransitionCell {
                j,
                count,
                frequency: count as f64 / n1 as f64,
                stderr: (exact * (1.0 - exact) / n1 as f64).sqrt(),
                exact,
            }
        })
        .collect();
    let descent = (2..=i_max)
        .map(|i| sum_over(|s| &s.descents, i) as f64 / sum_over(|s| &s.departures, i) as f64)
        .collect();
    Ok(FrequencyTable {
        occupation,
        exact_pi: (1..=i_max).map(|i| chain.pi(i)).collect(),
        row1,
        descent,
        departures_from_1: n1,
    })
}

/// Survival `ρ{t_a > n}`, `n = 1..=n_max`, of the first entrance time
/// `t_a = inf{n ≥ 1 : f^n(x) ∈ [a, 1]}` from `ρ`-distributed starts.
///
/// Starts and orbits that go below the symbol cap need at least
/// `K - symbol(a)` more steps to reach `[a,1]`; this is required to exceed
/// `n_max`, so such samples are exact survivors and are reported as censored.
pub fn entrance_tail(map: &IntermittentMap, a: f64, n_max: u64, samples: u64, seed: u64) -> Result<McCurve> {
    map.require_stationary()?;
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("entrance level {a} outside [0,1)")));
    }
    if n_max == 0 || samples == 0 {
        return Err(Error::InvalidArgument("n_max and samples must be positive".into()));
    }
    if a == 0.0 {
        // every image lies in [0,1]: t_0 = 1 for all starts
        let zero = McEstimate {
            mean: 0.0,
            stderr: 0.0,
            n_samples: samples,
            seed,
            censored: 0,
        };
        return Ok(McCurve {
            n: (1..=n_max).collect(),
            estimates: vec![zero; n_max as usize],
        });
    }
    if !map.fully_resolved() {
        let depth = match map.encode(a) {
            Ok(k) => (map.cap - k) as u64,
            Err(_) => 0,
        };
        if depth < n_max {
            return Err(Error::SymbolCapExceeded { cap: map.cap });
        }
    }
    const STREAMS: u64 = 4;
    let per = |k: u64| samples / STREAMS + u64::from(k < samples % STREAMS);
    let horizon = n_max as usize + 1;
    let parts: Vec<(Vec<u64>, u64)> = (0..STREAMS)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k));
            // hits[t] counts entrance at time t; index `horizon` collects survivors
            let mut hits = vec![0u64; horizon + 1];
            let mut censored = 0u64;
            for _ in 0..per(k) {
                let Some((mut x, mut s)) = map.sample_rho(&mut rng) else {
                    censored += 1;
                    hits[horizon] += 1;
                    continue;
                };
                let mut t = 1usize;
                loop {
                    match map.advance(x, s, |y| y * (1.0 + (rng.random::<f64>() - 0.5) * 2.0 * DITHER)) {
                        Ok((y, r)) => {
                            x = y;
                            s = r;
                        }
                        Err(_) => {
                            censored += 1;
                            hits[horizon] += 1;
                            break;
                        }
                    }
                    if x >= a {
                        hits[t] += 1;
                        break;
                    }
                    if t == horizon - 1 {
                        hits[horizon] += 1;
                        break;
                    }
                    t += 1;
                }
            }
            (hits, censored)
        })
        .collect();

    let mut hits = vec![0u64; horizon + 1];
    let mut censored = 0;
    for (h, c) in parts {
        for (acc, x) in hits.iter_mut().zip(h) {
            *acc += x;
        }
        censored += c;
    }
    let m = samples as f64;
    let mut alive = samples;
    let mut n = Vec::with_capacity(n_max as usize);
    let mut estimates = Vec::with_capacity(n_max as usize);
    for t in 1..=n_max as usize {
        alive -= hits[t];
        let s = alive as f64 / m;
        n.push(t as u64);
        estimates.push(McEstimate {
            mean: s,
            stderr: (s * (1.0 - s) / m).sqrt(),
            n_samples: samples,
            seed,
            censored,
        });
    }
    Ok(McCurve { n, estimates })
}

/// Exact `ρ{t_{d_1} > n} = Σ_{i ≥ n+2} π_i + π_1 d_n`.
pub fn entrance_tail_exact(chain: &RenewalChain, n: u64) -> f64 {
    let n = n as usize;
    chain.pi_tail_from(n + 2) + chain.pi1() * chain.d(n)
}

/// Density of the invariant measure on each cell: `h_i = π_1 d_{i-1} / p_i`.
pub fn invariant_density(chain: &RenewalChain, n: usize) -> Result<Vec<f64>> {
    if !chain.is_positive_recurrent() {
        return Err(Error::PreconditionViolated(
            "invariant density needs a positive-recurrent chain".into(),
        ));
    }
    (1..=n)
        .map(|i| {
            let p = chain.p(i);
            if p > 0.0 {
                Ok(chain.pi(i) / p)
            } else {
                Err(Error::ZeroProbabilityBranch(i))
            }
        })
        .collect()
}

/// Residuals of the Perron–Frobenius matrix `M(i,j) = (p_i/p_j) P(i,j)` on
/// `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfResiduals {
    /// `max_j |(hM)_j - h_j|` over `j < N`.
    pub density: f64,
    /// `max_i |(Mp)_i - p_i|`, with row 1 completed by `p_1 d_N`.
    pub adjoint: f64,
}

pub fn pf_check(chain: &RenewalChain, n: usize) -> Result<PfResiduals> {
    if n < 2 {
        return Err(Error::TruncationTooSmall("Perron–Frobenius check needs N ≥ 2".into()));
    }
    let h = invariant_density(chain, n)?;
    let p: Vec<f64> = (0..=n).map(|i| chain.p(i)).collect();
    // M(1,j) = p_1 / p_j · p_j = p_1; M(i, i-1) = p_i / p_{i-1}
    let mut density = 0.0f64;
    for j in 1..n {
        let mut acc = CompensatedSum::default();
        acc += h[0] * p[1];
        acc += h[j] * p[j + 1] / p[j];
        density = density.max((acc.value() - h[j - 1]).abs());
    }
    let mut row1: CompensatedSum = (1..=n).map(|j| p[1] / p[j] * p[j] * p[j]).collect();
    row1 += p[1] * chain.d(n);
    let mut adjoint = (row1.value() - p[1]).abs();
    for i in 2..=n {
        adjoint = adjoint.max((p[i] / p[i - 1] * p[i - 1] - p[i]).abs());
    }
    Ok(PfResiduals { density, adjoint })
}
