//! Exact evolution of signed distributions under the renewal chain.
//!
//! One step acts as `(νP)_j = ν_1 p_j + ν_{j+1}`. A [`SignedDistribution`]
//! is stored as `c·π + ν'` where the stationary part is carried implicitly
//! (it is invariant) and only the excess `ν'` on states `1..=N` is evolved.
//! Mass of `ν'` that jumps beyond `N` is moved into `tail_mass`; its absolute
//! value accumulates in `tail_abs`, which bounds the ℓ₁ error of every
//! reported quantity.

use std::io::Write;

use crate::chain::RenewalChain;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Tolerance on `Σ ν = 1` at construction.
pub const TOTAL_MASS_TOL: f64 = 1e-10;

/// Declared decay of `|ν_l|` beyond the stored prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDecay {
    FiniteSupport,
    Geometric,
    /// `|ν_l| ~ l^{-exponent} (ln l)^log_power`.
    Power { exponent: f64, log_power: f64 },
    /// Same decay as the stationary law, `l^{-(d+1)}`.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistribution {
    stationary_coeff: f64,
    excess: Vec<f64>,
    tail_mass: f64,
    tail_abs: f64,
    /// Lowest state the tail mass can currently occupy.
    tail_floor: usize,
    decay: TailDecay,
}

impl SignedDistribution {
    /// `ν = π`.
    pub fn stationary(chain: &RenewalChain) -> Self {
        Self {
            stationary_coeff: 1.0,
            excess: vec![0.0; chain.truncation()],
            tail_mass: 0.0,
            tail_abs: 0.0,
            tail_floor: chain.truncation() + 1,
            decay: TailDecay::Stationary,
        }
    }

    /// `ν = δ_i`.
    pub fn point_mass(chain: &RenewalChain, i: usize) -> Result<Self> {
        if i == 0 {
            return Err(Error::InvalidArgument("states are 1-based".into()));
        }
        let mut w = vec![0.0; i];
        w[i - 1] = 1.0;
        Self::from_prefix(chain, w, TailDecay::FiniteSupport)
    }

    /// `ν_l = weights[l-1]` on the prefix. For declared infinite tails the
    /// mass `1 - Σ weights` is placed beyond the prefix, position unknown,
    /// and counted in the tail bound.
    pub fn from_prefix(chain: &RenewalChain, weights: Vec<f64>, decay: TailDecay) -> Result<Self> {
        Self::mixture(chain, 0.0, weights, decay)
    }

    /// `ν = c·π + ν'` with `ν'_l = excess[l-1]`.
    pub fn mixture(chain: &RenewalChain, c: f64, excess: Vec<f64>, decay: TailDecay) -> Result<Self> {
        let n = chain.truncation();
        if excess.len() > n {
            return Err(Error::TruncationTooSmall(format!(
                "initial distribution has {} entries but the chain keeps {n} states",
                excess.len()
            )));
        }
        if let Some(index) = excess.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index: index + 1 });
        }
        if c != 0.0 && !chain.is_positive_recurrent() {
            return Err(Error::PreconditionViolated(
                "a null-recurrent chain has no stationary distribution to mix in".into(),
            ));
        }
        let total = c + excess.iter().copied().collect::<CompensatedSum>().value();
        let missing = 1.0 - total;
        let tail_mass = if decay == TailDecay::FiniteSupport {
            if missing.abs() > TOTAL_MASS_TOL {
                return Err(Error::NotNormalized(total));
            }
            0.0
        } else {
            missing
        };
        let tail_floor = if tail_mass == 0.0 { n + 1 } else { excess.len() + 1 };
        let mut excess = excess;
        excess.resize(n, 0.0);
        Ok(Self {
            stationary_coeff: c,
            excess,
            tail_mass,
            tail_abs: tail_mass.abs(),
            tail_floor,
            decay,
        })
    }

    /// The size-biased law `ν = π(v + (1 - π·v))`, which turns the
    /// covariance `ρ(u∘fⁿ v) - ρ(u)ρ(v)` into `(νPⁿ - π)·u`.
    pub fn tilted_by(chain: &RenewalChain, v: &Observable) -> Result<Self> {
        if !chain.is_positive_recurrent() {
            return Err(Error::PreconditionViolated("tilting needs a stationary law".into()));
        }
        let pi_v = v.pair_with_pi(chain);
        let c = v.u_inf + 1.0 - pi_v;
        let excess: Vec<f64> = v
            .values
            .iter()
            .enumerate()
            .map(|(k, &x)| chain.pi(k + 1) * (x - v.u_inf))
            .collect();
        let n = chain.truncation();
        if excess.len() > n {
            return Err(Error::TruncationTooSmall("observable longer than the chain prefix".into()));
        }
        let mut excess = excess;
        excess.resize(n, 0.0);
        let nu = Self {
            stationary_coeff: c,
            excess,
            tail_mass: 0.0,
            tail_abs: 0.0,
            tail_floor: n + 1,
            decay: TailDecay::FiniteSupport,
        };
        let total = nu.total();
        if (total - 1.0).abs() > TOTAL_MASS_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(nu)
    }

    pub fn stationary_coeff(&self) -> f64 {
        self.stationary_coeff
    }

    pub fn excess(&self) -> &[f64] {
        &self.excess
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Accumulated `|mass|` that left the prefix; an ℓ₁ error bound.
    pub fn tail_abs(&self) -> f64 {
        self.tail_abs
    }

    pub fn decay(&self) -> TailDecay {
        self.decay
    }

    /// `Σ ν` including the stationary part and the tail.
    pub fn total(&self) -> f64 {
        let mut acc: CompensatedSum = self.excess.iter().copied().collect();
        acc += self.stationary_coeff;
        acc += self.tail_mass;
        acc.value()
    }

    /// `ν_l` on the prefix.
    pub fn weight(&self, chain: &RenewalChain, l: usize) -> f64 {
        let ex = self.excess.get(l - 1).copied().unwrap_or(0.0);
        if self.stationary_coeff == 0.0 {
            ex
        } else {
            self.stationary_coeff * chain.pi(l) + ex
        }
    }

    /// Largest state carrying excess mass.
    pub fn support(&self) -> usize {
        self.excess.iter().rposition(|&x| x != 0.0).map_or(0, |k| k + 1)
    }

    /// Exponent `κ` with `|ν_l| ≲ l^{-κ}`; infinite for light tails.
    pub fn decay_exponent(&self, chain: &RenewalChain) -> f64 {
        let stationary = chain.ergodic_degree() + 1.0;
        let own = match self.decay {
            TailDecay::FiniteSupport | TailDecay::Geometric => f64::INFINITY,
            TailDecay::Power { exponent, .. } => exponent,
            TailDecay::Stationary => stationary,
        };
        if self.stationary_coeff != 0.0 {
            own.min(stationary)
        } else {
            own
        }
    }

    /// Whether `ν_l = o(π_l)` follows from the declaration.
    pub fn is_little_o_of_pi(&self, chain: &RenewalChain) -> bool {
        self.stationary_coeff == 0.0 && self.decay_exponent(chain) > chain.ergodic_degree() + 1.0
    }

    /// One step `ν ↦ νP` in place.
    pub fn advance(&mut self, chain: &RenewalChain) {
        let p = chain.p_series().coeffs();
        let n = self.excess.len();
        let a = self.excess[0];
        let w = &mut self.excess;
        for j in 0..n - 1 {
            w[j] = w[j + 1] + a * p[j + 1];
        }
        w[n - 1] = a * p[n];
        let escaped = a * chain.d(n);
        self.tail_mass += escaped;
        self.tail_abs += escaped.abs();
        self.tail_floor = (self.tail_floor.saturating_sub(1)).clamp(1, n + 1);
    }

    /// `‖ν - π‖₁` and its truncation bound.
    pub fn distance_to_stationary(&self, chain: &RenewalChain) -> (f64, f64) {
        let off = 1.0 - self.stationary_coeff;
        let pi = chain.pi_prefix();
        let mut acc: CompensatedSum = self
            .excess
            .iter()
            .zip(pi)
            .map(|(&w, &p)| (w - off * p).abs())
            .collect();
        if off != 0.0 {
            acc += off.abs() * chain.pi_tail_from(self.excess.len() + 1);
        }
        (acc.value(), self.tail_abs)
    }

    /// `(ν - π)·u` and its truncation bound.
    ///
    /// The tail mass sits somewhere at or above `tail_floor`; it is charged
    /// at `u_inf`, with error at most `tail_abs · sup_{j ≥ floor} |u_j - u_inf|`.
    pub fn correlation(&self, chain: &RenewalChain, u: &Observable) -> (f64, f64) {
        let off = 1.0 - self.stationary_coeff;
        let pi = chain.pi_prefix();
        let mut acc: CompensatedSum = self
            .excess
            .iter()
            .zip(pi)
            .enumerate()
            .map(|(k, (&w, &p))| (w - off * p) * u.value(k + 1))
            .collect();
        if off != 0.0 && u.u_inf != 0.0 {
            acc += -off * u.u_inf * chain.pi_tail_from(self.excess.len() + 1);
        }
        acc += self.tail_mass * u.u_inf;
        let spread = u
            .values
            .iter()
            .skip(self.tail_floor - 1)
            .fold(0.0f64, |m, x| m.max((x - u.u_inf).abs()));
        (acc.value(), spread * self.tail_abs)
    }
}

/// `νP` as a new value.
pub fn step(chain: &RenewalChain, nu: &SignedDistribution) -> SignedDistribution {
    let mut next = nu.clone();
    next.advance(chain);
    next
}

/// Bounded column vector `u`; entries past the stored values equal `u_inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub values: Vec<f64>,
    pub u_inf: f64,
}

impl Observable {
    pub fn new(values: Vec<f64>, u_inf: f64) -> Result<Self> {
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index: index + 1 });
        }
        if !u_inf.is_finite() {
            return Err(Error::InvalidArgument("u_inf must be finite".into()));
        }
        Ok(Self { values, u_inf })
    }

    pub fn indicator(i: usize) -> Self {
        let mut values = vec![0.0; i];
        values[i - 1] = 1.0;
        Self { values, u_inf: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            values: Vec::new(),
            u_inf: c,
        }
    }

    /// `1_{i} - π_i`.
    pub fn centered_indicator(chain: &RenewalChain, i: usize) -> Self {
        let pi = chain.pi(i);
        let mut values = vec![-pi; i];
        values[i - 1] = 1.0 - pi;
        Self { values, u_inf: -pi }
    }

    /// `u_j` for a 1-based state.
    pub fn value(&self, j: usize) -> f64 {
        self.values.get(j - 1).copied().unwrap_or(self.u_inf)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(self.u_inf.abs(), |m, x| m.max(x.abs()))
    }

    /// `π·u`.
    pub fn pair_with_pi(&self, chain: &RenewalChain) -> f64 {
        let mut acc: CompensatedSum = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &x)| chain.pi(k + 1) * x)
            .collect();
        if self.u_inf != 0.0 {
            acc += self.u_inf * chain.pi_tail_from(self.values.len() + 1);
        }
        acc.value()
    }
}

/// Values `a_n` on an increasing integer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub n: Vec<u64>,
    pub values: Vec<f64>,
    /// Absolute truncation bound on each value (zero when exact).
    pub tail_bound: Vec<f64>,
}

impl RateCurve {
    pub fn new(n: Vec<u64>, values: Vec<f64>, tail_bound: Vec<f64>) -> Result<Self> {
        if n.len() != values.len() || n.len() != tail_bound.len() {
            return Err(Error::InvalidArgument("curve columns differ in length".into()));
        }
        if n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("curve grid must be strictly increasing".into()));
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index: k });
        }
        Ok(Self { n, values, tail_bound })
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Value at grid point `n`, if present.
    pub fn at(&self, n: u64) -> Option<f64> {
        self.n.binary_search(&n).ok().map(|k| self.values[k])
    }

    /// Write as CSV with header `n,value,tail_bound`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "value", "tail_bound"])?;
        for k in 0..self.n.len() {
            w.write_record([
                self.n[k].to_string(),
                self.values[k].to_string(),
                self.tail_bound[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Roughly `per_decade` log-spaced integers in `[lo, hi]`, deduplicated.
pub fn log_grid(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo, "log_grid needs 1 <= lo <= hi");
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let steps = (((b - a) * per_decade as f64).ceil() as usize).max(1);
    let mut g: Vec<u64> = (0..=steps)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / steps as f64).round() as u64)
        .map(|x| x.clamp(lo, hi))
        .collect();
    g.dedup();
    g
}

fn check_truncation(chain: &RenewalChain, nu: &SignedDistribution, n_max: u64) -> Result<()> {
    let need = 2 * n_max as usize + nu.support();
    if chain.truncation() < need {
        return Err(Error::TruncationTooSmall(format!(
            "evolving to n = {n_max} needs N >= {need}, chain keeps {}",
            chain.truncation()
        )));
    }
    Ok(())
}

fn evolve_on_grid(
    chain: &RenewalChain,
    nu: &SignedDistribution,
    n_grid: &[u64],
    mut record: impl FnMut(&SignedDistribution) -> (f64, f64),
) -> Result<RateCurve> {
    check_grid(n_grid)?;
    check_truncation(chain, nu, *n_grid.last().unwrap())?;
    let mut cur = nu.clone();
    let mut t = 0u64;
    let (mut values, mut bounds) = (Vec::new(), Vec::new());
    for &n in n_grid {
        while t < n {
            cur.advance(chain);
            t += 1;
        }
        let (v, b) = record(&cur);
        values.push(v);
        bounds.push(b);
    }
    RateCurve::new(n_grid.to_vec(), values, bounds)
}

/// `‖νPⁿ - π‖₁` on the grid, with the truncation bound in `tail_bound`.
pub fn distance_curve(chain: &RenewalChain, nu: &SignedDistribution, n_grid: &[u64]) -> Result<RateCurve> {
    evolve_on_grid(chain, nu, n_grid, |cur| cur.distance_to_stationary(chain))
}

/// `(νPⁿ - π)·u` on the grid.
pub fn correlation_curve(
    chain: &RenewalChain,
    nu: &SignedDistribution,
    u: &Observable,
    n_grid: &[u64],
) -> Result<RateCurve> {
    evolve_on_grid(chain, nu, n_grid, |cur| cur.correlation(chain, u))
}

/// `e_n = p^n_{11}` for `n = 0..=n_max` from `e_n = Σ_{k=1}^{n} p_k e_{n-k}`.
pub fn renewal_values(chain: &RenewalChain, n_max: usize) -> Vec<f64> {
    let p: Vec<f64> = (0..=n_max).map(|k| chain.p(k)).collect();
    let mut e = Vec::with_capacity(n_max + 1);
    e.push(1.0);
    for n in 1..=n_max {
        let mut acc = CompensatedSum::new();
        for k in 1..=n {
            acc += p[k] * e[n - k];
        }
        e.push(acc.value());
    }
    e
}

/// The renewal sequence as a curve on `0..=n_max`.
pub fn renewal_sequence(chain: &RenewalChain, n_max: usize) -> Result<RateCurve> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("renewal_sequence needs n_max >= 1".into()));
    }
    let e = renewal_values(chain, n_max);
    RateCurve::new((0..=n_max as u64).collect(), e, vec![0.0; n_max + 1])
}

fn require_finite_positive_degree(chain: &RenewalChain) -> Result<f64> {
    let d = chain.ergodic_degree();
    if d.is_infinite() {
        return Err(Error::InfiniteDegree);
    }
    if !chain.is_positive_recurrent() {
        return Err(Error::PreconditionViolated(format!(
            "ergodic degree {d} is not positive; the chain is null recurrent"
        )));
    }
    Ok(d)
}

/// `m_1² (p^n_{11} - π_1) / Σ_{ℓ>n} d_ℓ`, which tends to 1.
pub fn renewal_excess_ratio(chain: &RenewalChain, n_grid: &[u64]) -> Result<RateCurve> {
    require_finite_positive_degree(chain)?;
    check_grid(n_grid)?;
    let e = renewal_values(chain, *n_grid.last().unwrap() as usize);
    let m1 = chain.m1();
    let values = n_grid
        .iter()
        .map(|&n| m1 * m1 * (e[n as usize] - chain.pi1()) / chain.d_tail_sum(n as usize))
        .collect();
    RateCurve::new(n_grid.to_vec(), values, vec![0.0; n_grid.len()])
}

/// Least-squares fit of `ln|a_n| = exponent · ln n + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub window: (u64, u64),
    pub rms_residual: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Log-log fit over grid points with `lo ≤ n ≤ hi`.
pub fn rate_fit(curve: &RateCurve, window: (u64, u64)) -> Result<RateFit> {
    let (xs, ys) = window_points(curve, window, |n| (n as f64).ln())?;
    let (exponent, intercept, rms_residual) = least_squares(&xs, &ys);
    Ok(RateFit {
        exponent,
        intercept,
        window,
        rms_residual,
    })
}

/// Semilog fit `ln|a_n| = rate · n + intercept`; `exponent` holds the rate.
pub fn semilog_fit(curve: &RateCurve, window: (u64, u64)) -> Result<RateFit> {
    let (xs, ys) = window_points(curve, window, |n| n as f64)?;
    let (exponent, intercept, rms_residual) = least_squares(&xs, &ys);
    Ok(RateFit {
        exponent,
        intercept,
        window,
        rms_residual,
    })
}

fn window_points(curve: &RateCurve, window: (u64, u64), x: impl Fn(u64) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&n, &a) in curve.n.iter().zip(&curve.values) {
        if n < window.0 || n > window.1 {
            continue;
        }
        if a == 0.0 {
            return Err(Error::ZeroValueInWindow(n));
        }
        xs.push(x(n));
        ys.push(a.abs().ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "window [{}, {}] holds {} grid points; need at least 2",
            window.0,
            window.1,
            xs.len()
        )));
    }
    Ok((xs, ys))
}

/// Scaled correlations `C_n = (νPⁿ - π)·u · n^d / L(n)` and the predicted
/// limit `C = (π·u)(ν·1) / (d(d+1) m_1)`.
#[derive(Debug, Clone)]
pub struct ConstantCheck {
    pub curve: RateCurve,
    pub predicted: f64,
}

pub fn correlation_constant(
    chain: &RenewalChain,
    nu: &SignedDistribution,
    u: &Observable,
    n_grid: &[u64],
) -> Result<ConstantCheck> {
    if u.u_inf != 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "u must vanish at infinity (u_inf = {})",
            u.u_inf
        )));
    }
    if !nu.is_little_o_of_pi(chain) {
        return Err(Error::PreconditionViolated(
            "ν must be o(π); cancellations can otherwise speed up the decay".into(),
        ));
    }
    let d = require_finite_positive_degree(chain)?;
    let raw = correlation_curve(chain, nu, u, n_grid)?;
    let predicted = u.pair_with_pi(chain) * nu.total() / (d * (d + 1.0) * chain.m1());
    let mut values = Vec::with_capacity(raw.len());
    let mut bounds = Vec::with_capacity(raw.len());
    for k in 0..raw.len() {
        let n = raw.n[k] as f64;
        let scale = n.powf(d) / chain.slowly_varying(n).expect("finite degree implies a power tail");
        values.push(raw.values[k] * scale);
        bounds.push(raw.tail_bound[k] * scale);
    }
    Ok(ConstantCheck {
        curve: RateCurve::new(raw.n, values, bounds)?,
        predicted,
    })
}

/// `νPⁿ·u / ((ν·1)(u·v) p^n_{11})` with `v_n = d_{n-1}` for null-recurrent
/// chains; tends to 1.
///
/// Both `ν` and `u` must have finite support. Transition probabilities come
/// from the renewal sequence: `p^n_{ij} = δ_{j,i-n}` for `n < i` and
/// `p^{n-i+1}_{1j}` otherwise, with `p^m_{1j} = Σ_{k<m} e_k p_{j+m-1-k}` for
/// `j ≥ 2` and `p^m_{11} = e_m`.
pub fn null_recurrent_ratio(
    chain: &RenewalChain,
    nu: &SignedDistribution,
    u: &Observable,
    n_grid: &[u64],
) -> Result<RateCurve> {
    if chain.is_positive_recurrent() {
        return Err(Error::NotNullRecurrent);
    }
    if u.u_inf != 0.0 {
        return Err(Error::DivergentPairing);
    }
    if nu.decay() != TailDecay::FiniteSupport || nu.stationary_coeff() != 0.0 {
        return Err(Error::PreconditionViolated("ν must have finite support".into()));
    }
    check_grid(n_grid)?;
    let n_max = *n_grid.last().unwrap() as usize;
    let e = renewal_values(chain, n_max);
    let u_dot_v: f64 = u
        .values
        .iter()
        .enumerate()
        .map(|(k, &x)| x * chain.d(k))
        .collect::<CompensatedSum>()
        .value();
    let nu_total = nu.total();
    let p_1j = |m: usize, j: usize| -> f64 {
        if j == 1 {
            return e[m];
        }
        (0..m)
            .map(|k| e[k] * chain.p(j + m - 1 - k))
            .collect::<CompensatedSum>()
            .value()
    };
    let support = nu.support();
    let values = n_grid
        .iter()
        .map(|&n| {
            let n = n as usize;
            let mut acc = CompensatedSum::new();
            for i in 1..=support {
                let w = nu.excess()[i - 1];
                if w == 0.0 {
                    continue;
                }
                for (k, &uj) in u.values.iter().enumerate() {
                    let j = k + 1;
                    if uj == 0.0 {
                        continue;
                    }
                    let pij = if n < i {
                        if j == i - n { 1.0 } else { 0.0 }
                    } else {
                        p_1j(n - i + 1, j)
                    };
                    acc += w * pij * uj;
                }
            }
            acc.value() / (nu_total * u_dot_v * e[n])
        })
        .collect();
    RateCurve::new(n_grid.to_vec(), values, vec![0.0; n_grid.len()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonUniformityRow {
    pub i: usize,
    pub distance: f64,
    pub tail_bound: f64,
}

/// `‖δ_i Pⁿ - π‖₁` for each `i`: a point mass at `i - n` when `i > n`,
/// otherwise `δ_1 P^{n-i+1}`.
pub fn nonuniformity_probe(chain: &RenewalChain, i_list: &[usize], n: u64) -> Result<Vec<NonUniformityRow>> {
    if i_list.contains(&0) {
        return Err(Error::InvalidArgument("states are 1-based".into()));
    }
    let n = n as usize;
    let mut times: Vec<u64> = i_list
        .iter()
        .filter(|&&i| i <= n)
        .map(|&i| (n - i + 1) as u64)
        .collect();
    times.sort_unstable();
    times.dedup();
    let curve = if times.is_empty() {
        None
    } else {
        let delta1 = SignedDistribution::point_mass(chain, 1)?;
        Some(distance_curve(chain, &delta1, &times)?)
    };
    Ok(i_list
        .iter()
        .map(|&i| {
            if i > n {
                NonUniformityRow {
                    i,
                    distance: 2.0 * (1.0 - chain.pi(i - n)),
                    tail_bound: 0.0,
                }
            } else {
                let c = curve.as_ref().unwrap();
                let k = c.n.binary_search(&((n - i + 1) as u64)).unwrap();
                NonUniformityRow {
                    i,
                    distance: c.values[k],
                    tail_bound: c.tail_bound[k],
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ReturnLaw;
    use proptest::prelude::*;

    fn chain(law: ReturnLaw, n: usize) -> RenewalChain {
        RenewalChain::build(law, n).unwrap()
    }

    #[test]
    fn step_examples() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 50);
        let pi = SignedDistribution::stationary(&c);
        let next = step(&c, &pi);
        assert_eq!(next.distance_to_stationary(&c).0, 0.0);
        let d2 = SignedDistribution::point_mass(&c, 2).unwrap();
        assert_eq!(step(&c, &d2).excess()[..3], [1.0, 0.0, 0.0]);
        let d1 = SignedDistribution::point_mass(&c, 1).unwrap();
        let s = step(&c, &d1);
        for j in 1..=50 {
            assert_eq!(s.excess()[j - 1], c.p(j));
        }
        assert_eq!(s.tail_mass(), c.d(50));
        assert!((s.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_prefix_is_a_fixed_point_of_the_row_action() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 3000);
        let pi = c.pi_prefix().to_vec();
        let nu = SignedDistribution::from_prefix(&c, pi.clone(), TailDecay::Stationary).unwrap();
        let next = step(&c, &nu);
        // the last entry misses π_{N+1}, which sits in the tail
        for j in 0..pi.len() - 1 {
            assert!((next.excess()[j] - pi[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_is_conserved_over_many_steps() {
        let c = chain(ReturnLaw::zeta(0.5, 0.0), 3000);
        let mut nu = SignedDistribution::point_mass(&c, 3).unwrap();
        for _ in 0..10_000 {
            nu.advance(&c);
        }
        assert!((nu.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn renewal_sequence_examples() {
        let one = chain(ReturnLaw::finite(vec![1.0]), 5);
        assert!(renewal_sequence(&one, 20).unwrap().values.iter().all(|&x| x == 1.0));
        let g = chain(ReturnLaw::geometric(0.5), 50);
        let e = renewal_sequence(&g, 200).unwrap();
        assert!(e.values[1..].iter().all(|&x| (x - 0.5).abs() < 1e-15));
        let h = chain(ReturnLaw::finite(vec![0.5, 0.5]), 5);
        let e = renewal_sequence(&h, 60).unwrap();
        assert_eq!(e.values[..5], [1.0, 0.5, 0.75, 0.625, 0.6875]);
        assert!((e.values[60] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn renewal_routes_agree() {
        for law in [ReturnLaw::geometric(0.5), ReturnLaw::finite(vec![0.5, 0.5]), ReturnLaw::zeta(1.0, 0.0)] {
            let c = chain(law, 1000);
            let e = renewal_values(&c, 1000);
            let alt = c.d_series().reciprocal().unwrap().partial_sums();
            for n in 0..=1000 {
                assert!((e[n] - alt.coeff(n)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 200);
        let pi = SignedDistribution::stationary(&c);
        let grid = [0, 1, 5, 50];
        assert!(distance_curve(&c, &pi, &grid).unwrap().values.iter().all(|&x| x == 0.0));
        let h = chain(ReturnLaw::finite(vec![0.5, 0.5]), 10);
        let d1 = SignedDistribution::point_mass(&h, 1).unwrap();
        let curve = distance_curve(&h, &d1, &[1, 2]).unwrap();
        assert!((curve.values[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            distance_curve(&h, &d1, &[10]),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn correlation_examples() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 400);
        let d1 = SignedDistribution::point_mass(&c, 1).unwrap();
        let ones = Observable::constant(1.0);
        let grid = [0, 3, 10, 100];
        assert!(correlation_curve(&c, &d1, &ones, &grid)
            .unwrap()
            .values
            .iter()
            .all(|&x| x.abs() < 1e-12));
        let pi = SignedDistribution::stationary(&c);
        let u = Observable::indicator(1);
        assert!(correlation_curve(&c, &pi, &u, &grid).unwrap().values.iter().all(|&x| x == 0.0));
        // δ₁ against 1_{1}: e_n - π_1.
        let e = renewal_values(&c, 100);
        let curve = correlation_curve(&c, &d1, &u, &grid).unwrap();
        for (k, &n) in grid.iter().enumerate() {
            assert!((curve.values[k] - (e[n as usize] - c.pi1())).abs() < 1e-13);
        }
    }

    #[test]
    fn tilted_distribution_is_normalized() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 400);
        let v = Observable::centered_indicator(&c, 1);
        let nu = SignedDistribution::tilted_by(&c, &v).unwrap();
        assert!((nu.total() - 1.0).abs() < 1e-14);
        // (ν - π)·u at n = 0 is the covariance ρ(uv) - ρ(u)ρ(v) = π_1(1 - π_1).
        let (v0, _) = nu.correlation(&c, &v);
        assert!((v0 - c.pi1() * (1.0 - c.pi1())).abs() < 1e-14);
    }

    #[test]
    fn renewal_excess_ratio_examples() {
        let g = chain(ReturnLaw::geometric(0.5), 10);
        assert!(matches!(renewal_excess_ratio(&g, &[10]), Err(Error::InfiniteDegree)));
        let z2 = chain(ReturnLaw::zeta(2.0, 0.0), 10);
        let r = renewal_excess_ratio(&z2, &[1000, 10_000]).unwrap();
        assert!((0.85..=1.15).contains(&r.values[1]), "{:?}", r.values);
    }

    #[test]
    fn rate_fit_examples() {
        let grid = log_grid(10, 10_000, 20);
        let mk = |f: &dyn Fn(f64) -> f64| {
            let v = grid.iter().map(|&n| f(n as f64)).collect();
            RateCurve::new(grid.clone(), v, vec![0.0; grid.len()]).unwrap()
        };
        let fit = rate_fit(&mk(&|n| n.powi(-2)), (10, 10_000)).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-9 && fit.rms_residual < 1e-9);
        let fit = rate_fit(&mk(&|_| 3.0), (10, 10_000)).unwrap();
        assert!(fit.exponent.abs() < 1e-9);
        let fit = rate_fit(&mk(&|n| n.ln() / n), (1000, 10_000)).unwrap();
        assert!((-1.05..=-0.85).contains(&fit.exponent));
        let mut zero = mk(&|n| n.powi(-2));
        zero.values[3] = 0.0;
        assert!(matches!(rate_fit(&zero, (10, 10_000)), Err(Error::ZeroValueInWindow(_))));
    }

    #[test]
    fn log_grid_density() {
        let g = log_grid(1000, 10_000, 20);
        assert_eq!((g[0], *g.last().unwrap()), (1000, 10_000));
        assert!(g.len() >= 21);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn correlation_constant_guards() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 200);
        let d1 = SignedDistribution::point_mass(&c, 1).unwrap();
        assert!(matches!(
            correlation_constant(&c, &d1, &Observable::constant(1.0), &[10]),
            Err(Error::PreconditionViolated(_))
        ));
        let pi = SignedDistribution::stationary(&c);
        assert!(matches!(
            correlation_constant(&c, &pi, &Observable::indicator(1), &[10]),
            Err(Error::PreconditionViolated(_))
        ));
        let check = correlation_constant(&c, &d1, &Observable::indicator(1), &[10]).unwrap();
        assert!((check.predicted - c.pi1() * c.pi1() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn null_recurrent_examples() {
        let c = chain(ReturnLaw::zeta(-0.5, 0.0), 100);
        let u = Observable::indicator(1);
        let d1 = SignedDistribution::point_mass(&c, 1).unwrap();
        let grid = [1, 10, 100, 1000];
        assert!(null_recurrent_ratio(&c, &d1, &u, &grid).unwrap().values.iter().all(|&x| x == 1.0));
        let d2 = SignedDistribution::point_mass(&c, 2).unwrap();
        let e = renewal_values(&c, 1000);
        let r = null_recurrent_ratio(&c, &d2, &u, &grid).unwrap();
        for (k, &n) in grid.iter().enumerate() {
            assert_eq!(r.values[k], e[n as usize - 1] / e[n as usize]);
        }
        let pr = chain(ReturnLaw::zeta(1.0, 0.0), 10);
        let d1 = SignedDistribution::point_mass(&pr, 1).unwrap();
        assert!(matches!(
            null_recurrent_ratio(&pr, &d1, &u, &grid),
            Err(Error::NotNullRecurrent)
        ));
        let d1 = SignedDistribution::point_mass(&c, 1).unwrap();
        assert!(matches!(
            null_recurrent_ratio(&c, &d1, &Observable::constant(1.0), &grid),
            Err(Error::DivergentPairing)
        ));
    }

    #[test]
    fn null_recurrent_matrix_entries_match_evolution() {
        // p^n_{1j} from the renewal formula against direct evolution.
        let c = chain(ReturnLaw::zeta(-0.5, 0.0), 400);
        let u = Observable::new(vec![0.0, 1.0, 0.0, 2.0], 0.0).unwrap();
        let d3 = SignedDistribution::point_mass(&c, 3).unwrap();
        let grid = [1, 2, 7, 50, 150];
        let ratio = null_recurrent_ratio(&c, &d3, &u, &grid).unwrap();
        let e = renewal_values(&c, 150);
        let u_dot_v = c.d(1) + 2.0 * c.d(3);
        let mut cur = d3.clone();
        let mut t = 0;
        for (k, &n) in grid.iter().enumerate() {
            while t < n {
                cur.advance(&c);
                t += 1;
            }
            let direct: f64 = (1..=4).map(|j| cur.excess()[j - 1] * u.value(j)).sum();
            let expect = direct / (u_dot_v * e[n as usize]);
            assert!((ratio.values[k] - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn nonuniformity_examples() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 2500);
        let rows = nonuniformity_probe(&c, &[1, 2000], 1000).unwrap();
        assert!((rows[1].distance - 2.0 * (1.0 - c.pi(1000))).abs() < 1e-15);
        assert!(rows[1].distance > rows[0].distance);
        let rows = nonuniformity_probe(&c, &[3], 0).unwrap();
        assert!((rows[0].distance - 2.0 * (1.0 - c.pi(3))).abs() < 1e-15);
    }

    #[test]
    fn distances_stay_below_two() {
        let c = chain(ReturnLaw::zeta(1.0, 0.0), 1000);
        for i in [1, 2, 7, 30] {
            let nu = SignedDistribution::point_mass(&c, i).unwrap();
            let curve = distance_curve(&c, &nu, &log_grid(1, 400, 10)).unwrap();
            assert!(curve.values.iter().all(|&x| x <= 2.0 + 1e-12));
        }
    }

    #[test]
    fn curve_csv_header() {
        let curve = RateCurve::new(vec![1, 2], vec![0.5, 0.25], vec![0.0, 1e-9]).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,value,tail_bound\n1,0.5,0\n2,0.25,0.000000001\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn correlation_is_bilinear(
            a in proptest::collection::vec(-1.0f64..1.0, 6),
            b in proptest::collection::vec(-1.0f64..1.0, 6),
            u1 in proptest::collection::vec(-1.0f64..1.0, 5),
            u2 in proptest::collection::vec(-1.0f64..1.0, 5),
            s in -2.0f64..2.0,
            n in 0u64..40,
        ) {
            let c = RenewalChain::build(ReturnLaw::zeta(1.0, 0.0), 120).unwrap();
            // ν = π + x with Σx = 0, so (νPⁿ - π) = x Pⁿ is linear in x.
            let centre = |v: &[f64]| { let m = v.iter().sum::<f64>() / v.len() as f64; v.iter().map(|x| x - m).collect::<Vec<_>>() };
            let (xa, xb) = (centre(&a), centre(&b));
            let xab: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| p + s * q).collect();
            let nu = |x: Vec<f64>| SignedDistribution::mixture(&c, 1.0, x, TailDecay::FiniteSupport).unwrap();
            let ua = Observable::new(u1.clone(), 0.3).unwrap();
            let ub = Observable::new(u2.clone(), -0.1).unwrap();
            let uab = Observable::new(u1.iter().zip(&u2).map(|(p, q)| p + s * q).collect(), 0.3 - 0.1 * s).unwrap();
            let g = [n];
            let val = |x: &[f64], u: &Observable| correlation_curve(&c, &nu(x.to_vec()), u, &g).unwrap().values[0];
            let lin_nu = val(&xab, &ua) - val(&xa, &ua) - s * val(&xb, &ua);
            let lin_u = val(&xa, &uab) - val(&xa, &ua) - s * val(&xa, &ub);
            prop_assert!(lin_nu.abs() < 1e-10);
            prop_assert!(lin_u.abs() < 1e-10);
        }
    }
}
