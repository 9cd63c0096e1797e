//! The renewal chain on the positive integers.
//!
//! Row 1 of the transition matrix is the return law `p`; every row `i ≥ 2`
//! has a single 1 in column `i - 1`. Consequently `f^n_{11} = p_n`, the tail
//! sums `d_n = Σ_{i>n} p_i` give the stationary law `π_n = π_1 d_{n-1}`, and
//! the chain is positive recurrent iff `m_1 = Σ_n d_n < ∞`.
//!
//! States are 1-based throughout the public API.

use crate::error::{Error, Result};
use crate::evolve::SignedDistribution;
use crate::numeric::{zeta_tail, zeta_term, CompensatedSum};
use crate::series::TruncatedSeries;

/// Tolerance on `Σ p_n = 1` for explicit laws.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Probability vector `p = (p_1, p_2, ...)` of the first row.
#[derive(Debug, Clone, PartialEq)]
pub enum ReturnLaw {
    /// `p_n = (1-q) q^{n-1}`.
    Geometric { q: f64 },
    /// `p_n ∝ n^{-(d+2)} (ln(n+1))^beta`, normalized over all `n ≥ 1`.
    Zeta { degree: f64, log_power: f64 },
    /// `probs[k] = p_{k+1}`; zero beyond the listed entries.
    Finite { probs: Vec<f64> },
    /// `probs[k] = p_{k+1}` for the listed prefix; the remaining mass is
    /// spread over later states as `c n^{-tail_exponent}`.
    Custom { probs: Vec<f64>, tail_exponent: f64 },
}

impl ReturnLaw {
    pub fn geometric(q: f64) -> Self {
        ReturnLaw::Geometric { q }
    }

    pub fn zeta(degree: f64, log_power: f64) -> Self {
        ReturnLaw::Zeta { degree, log_power }
    }

    pub fn finite(probs: Vec<f64>) -> Self {
        ReturnLaw::Finite { probs }
    }

    pub fn custom(probs: Vec<f64>, tail_exponent: f64) -> Self {
        ReturnLaw::Custom {
            probs,
            tail_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    PositiveRecurrent,
    NullRecurrent,
}

/// `c n^{-s} (ln(n+1))^beta` for `n ≥ start`.
#[derive(Debug, Clone, Copy)]
struct PowerTail {
    start: u64,
    c: f64,
    s: f64,
    beta: f64,
}

impl PowerTail {
    fn p(&self, n: u64) -> f64 {
        if n < self.start {
            0.0
        } else {
            self.c * zeta_term(n as f64, self.s, self.beta)
        }
    }

    /// `Σ_{k ≥ from} k^gamma p_k` over the tail's range.
    fn moment_from(&self, from: u64, gamma: f64) -> f64 {
        self.c * zeta_tail(self.s - gamma, self.beta, from.max(self.start))
    }
}

#[derive(Debug, Clone)]
enum Resolved {
    Geometric { q: f64 },
    Explicit { prefix: Vec<f64>, tail: Option<PowerTail> },
}

impl Resolved {
    fn p(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            Resolved::Geometric { q } => (1.0 - q) * q.powf((n - 1) as f64),
            Resolved::Explicit { prefix, tail } => {
                if (n as usize) <= prefix.len() {
                    prefix[n as usize - 1]
                } else {
                    tail.map_or(0.0, |t| t.p(n))
                }
            }
        }
    }

    /// `Σ_{k ≥ from} k^gamma p_k`, possibly `+∞`.
    fn moment_from(&self, from: u64, gamma: f64) -> f64 {
        let from = from.max(1);
        match self {
            Resolved::Geometric { q } => {
                // Terms peak near k = gamma / ln(1/q); stop well past it.
                let peak = (gamma / -q.ln()).ceil() as u64;
                let mut acc = CompensatedSum::new();
                let mut k = from;
                loop {
                    let term = (k as f64).powf(gamma) * self.p(k);
                    acc += term;
                    if (k > peak && term <= 1e-18 * acc.value().abs()) || term == 0.0 {
                        break;
                    }
                    k += 1;
                }
                acc.value()
            }
            Resolved::Explicit { prefix, tail } => {
                let mut acc = CompensatedSum::new();
                for k in (from as usize)..=prefix.len() {
                    acc += (k as f64).powf(gamma) * prefix[k - 1];
                }
                let head = acc.value();
                match tail {
                    Some(t) => head + t.moment_from(from, gamma),
                    None => head,
                }
            }
        }
    }

    fn tail_from(&self, from: u64) -> f64 {
        match self {
            Resolved::Geometric { q } => q.powf(from.max(1) as f64 - 1.0),
            _ => self.moment_from(from, 0.0),
        }
    }

    /// `Σ_{ℓ > n} d_ℓ = Σ_{k ≥ n+2} (k - n - 1) p_k`.
    fn d_tail_sum(&self, n: u64) -> f64 {
        match self {
            Resolved::Geometric { q } => q.powf((n + 1) as f64) / (1.0 - q),
            _ => {
                let m1 = self.moment_from(n + 2, 1.0);
                if m1.is_infinite() {
                    return f64::INFINITY;
                }
                m1 - (n + 1) as f64 * self.moment_from(n + 2, 0.0)
            }
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_probs(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("return law has no probabilities".into()));
    }
    for (k, &x) in probs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteCoefficient { index: k + 1 });
        }
        if x < 0.0 {
            return Err(Error::NegativeCoefficient { index: k + 1, value: x });
        }
    }
    Ok(probs.iter().copied().collect::<CompensatedSum>().value())
}

fn support_gcd(probs: &[f64]) -> u64 {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .fold(0, |g, (k, _)| gcd(g, k as u64 + 1))
}

/// `(degree, log_power)` of `p_n ~ n^{-(degree+2)} (ln n)^log_power`; an
/// infinite degree for light tails.
fn resolve(law: &ReturnLaw) -> Result<(Resolved, f64, f64)> {
    match *law {
        ReturnLaw::Geometric { q } => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidArgument(format!("geometric q = {q} must lie in (0,1)")));
            }
            Ok((Resolved::Geometric { q }, f64::INFINITY, 0.0))
        }
        ReturnLaw::Zeta { degree, log_power } => {
            if !(degree.is_finite() && degree > -1.0) {
                return Err(Error::InvalidArgument(format!("zeta degree {degree} must exceed -1")));
            }
            if !(log_power.is_finite() && log_power >= 0.0) {
                return Err(Error::InvalidArgument(format!("log power {log_power} must be >= 0")));
            }
            let s = degree + 2.0;
            let z = zeta_tail(s, log_power, 1);
            let tail = PowerTail {
                start: 1,
                c: 1.0 / z,
                s,
                beta: log_power,
            };
            Ok((
                Resolved::Explicit {
                    prefix: Vec::new(),
                    tail: Some(tail),
                },
                degree,
                log_power,
            ))
        }
        ReturnLaw::Finite { ref probs } => {
            let total = check_probs(probs)?;
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized(total));
            }
            let g = support_gcd(probs);
            if g > 1 {
                return Err(Error::PeriodicSupport(g));
            }
            Ok((
                Resolved::Explicit {
                    prefix: probs.clone(),
                    tail: None,
                },
                f64::INFINITY,
                0.0,
            ))
        }
        ReturnLaw::Custom {
            ref probs,
            tail_exponent,
        } => {
            if !(tail_exponent.is_finite() && tail_exponent > 1.0) {
                return Err(Error::BadExponent(tail_exponent));
            }
            let total = check_probs(probs)?;
            let remaining = 1.0 - total;
            if remaining < -NORMALIZATION_TOL {
                return Err(Error::NotNormalized(total));
            }
            let start = probs.len() as u64 + 1;
            let tail = (remaining > 0.0).then(|| PowerTail {
                start,
                c: remaining / zeta_tail(tail_exponent, 0.0, start),
                s: tail_exponent,
                beta: 0.0,
            });
            if tail.is_none() {
                let g = support_gcd(probs);
                if g > 1 {
                    return Err(Error::PeriodicSupport(g));
                }
            }
            Ok((
                Resolved::Explicit {
                    prefix: probs.clone(),
                    tail,
                },
                tail_exponent - 2.0,
                0.0,
            ))
        }
    }
}

/// Renewal chain truncated to the states `1..=N` for tabulated quantities.
/// Scalar accessors fall back on the analytic law beyond `N`.
#[derive(Debug, Clone)]
pub struct RenewalChain {
    law: ReturnLaw,
    resolved: Resolved,
    truncation: usize,
    p: TruncatedSeries,
    d: TruncatedSeries,
    m1: f64,
    pi1: f64,
    pi: Vec<f64>,
    classification: Classification,
    degree: f64,
    log_power: f64,
}

impl RenewalChain {
    pub fn build(law: ReturnLaw, truncation: usize) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::TruncationTooSmall("truncation must be at least 1".into()));
        }
        let (resolved, degree, log_power) = resolve(&law)?;
        let p = TruncatedSeries::from_fn(truncation, |n| resolved.p(n as u64))?;
        let d_beyond = resolved.tail_from(truncation as u64 + 1);
        let mut d = p.tail_transform(Some(d_beyond))?.into_coeffs();
        if (d[0] - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(d[0]));
        }
        d[0] = 1.0;
        let d = TruncatedSeries::new(d)?;
        let m1 = resolved.moment_from(1, 1.0);
        let (classification, pi1) = if m1.is_finite() {
            (Classification::PositiveRecurrent, 1.0 / m1)
        } else {
            (Classification::NullRecurrent, 0.0)
        };
        let pi = d.coeffs()[..truncation].iter().map(|&x| pi1 * x).collect();
        Ok(Self {
            law,
            resolved,
            truncation,
            p,
            d,
            m1,
            pi1,
            pi,
            classification,
            degree,
            log_power,
        })
    }

    pub fn law(&self) -> &ReturnLaw {
        &self.law
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `(0, p_1, ..., p_N)`.
    pub fn p_series(&self) -> &TruncatedSeries {
        &self.p
    }

    /// `(d_0, ..., d_N)` with `d_0 = 1`.
    pub fn d_series(&self) -> &TruncatedSeries {
        &self.d
    }

    /// `p_n` for any `n ≥ 1` (0 for `n = 0`).
    pub fn p(&self, n: usize) -> f64 {
        if n <= self.truncation {
            self.p.coeff(n)
        } else {
            self.resolved.p(n as u64)
        }
    }

    /// `d_n = Σ_{i>n} p_i` for any `n ≥ 0`.
    pub fn d(&self, n: usize) -> f64 {
        if n <= self.truncation {
            self.d.coeff(n)
        } else {
            self.resolved.tail_from(n as u64 + 1)
        }
    }

    /// `Σ_{ℓ>n} d_ℓ`; infinite for null-recurrent chains.
    pub fn d_tail_sum(&self, n: usize) -> f64 {
        self.resolved.d_tail_sum(n as u64)
    }

    /// `Σ_{k ≥ from} k^gamma p_k`.
    pub fn p_moment_from(&self, from: usize, gamma: f64) -> f64 {
        self.resolved.moment_from(from as u64, gamma)
    }

    /// Mean return time to state 1; `+∞` when null recurrent.
    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    /// `π_1..π_N` (all zero for a null-recurrent chain).
    pub fn pi_prefix(&self) -> &[f64] {
        &self.pi
    }

    /// `π_n` for any `n ≥ 1`.
    pub fn pi(&self, n: usize) -> f64 {
        assert!(n >= 1, "states are 1-based");
        if n <= self.truncation {
            self.pi[n - 1]
        } else {
            self.pi1 * self.d(n - 1)
        }
    }

    /// `Σ_{k ≥ n} π_k = π_1 (d_{n-1} + Σ_{ℓ ≥ n} d_ℓ)`.
    pub fn pi_tail_from(&self, n: usize) -> f64 {
        assert!(n >= 1, "states are 1-based");
        if self.pi1 == 0.0 {
            return 0.0;
        }
        self.pi1 * (self.d(n - 1) + self.d_tail_sum(n - 1))
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    pub fn is_positive_recurrent(&self) -> bool {
        self.classification == Classification::PositiveRecurrent
    }

    /// Sup of `gamma` with a finite `(gamma+1)`-th return-time moment.
    pub fn ergodic_degree(&self) -> f64 {
        self.degree
    }

    /// Exponent `beta` of the `(ln(n+1))^beta` factor in the return law.
    pub fn log_power(&self) -> f64 {
        self.log_power
    }

    /// Slowly varying factor `L(n)` in `p_n = n^{-(d+2)} L(n)`; `None` for
    /// light-tailed laws.
    pub fn slowly_varying(&self, n: f64) -> Option<f64> {
        match &self.resolved {
            Resolved::Explicit { tail: Some(t), .. } => {
                let log = if t.beta == 0.0 { 1.0 } else { (n + 1.0).ln().powf(t.beta) };
                Some(t.c * log)
            }
            _ => None,
        }
    }

    /// Whether `Σ_n n^gamma p_n` is finite, decided from the declared tail.
    pub fn return_moment_finite(&self, gamma: f64) -> bool {
        gamma < self.degree + 1.0
    }

    /// Smallest `n ≥ 1` with `d_n ≤ u`, i.e. a return time drawn from `p`
    /// when `u` is uniform on `(0,1)`.
    pub fn return_time_quantile(&self, u: f64) -> u64 {
        let d = self.d.coeffs();
        if u >= d[self.truncation] {
            // d is nonincreasing on the prefix
            let idx = d[1..].partition_point(|&x| x > u);
            return idx as u64 + 1;
        }
        if let Resolved::Geometric { q } = self.resolved {
            // d_n = q^n
            let mut n = (u.ln() / q.ln()).ceil().max(1.0) as u64;
            while n > 1 && q.powf((n - 1) as f64) <= u {
                n -= 1;
            }
            while q.powf(n as f64) > u {
                n += 1;
            }
            return n;
        }
        let mut lo = self.truncation as u64;
        let mut hi = lo.saturating_mul(2);
        while self.resolved.tail_from(hi + 1) > u {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi == u64::MAX {
                return hi;
            }
        }
        // d_lo > u ≥ d_hi
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.resolved.tail_from(mid + 1) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// First-passage law `f^n_{ij}`, `n = 0..=n_max`.
    ///
    /// For `i > j` the passage is the deterministic descent in `i - j`
    /// steps. For `j ≥ i` the generating function is
    /// `z^i G_j(z) / (1 - Σ_{0<n<j} p_n z^n)` with `G_j(z) = Σ_{n≥j} p_n z^{n-j}`.
    /// Fails with `TruncationTooSmall` when more than `tol` of the mass lies
    /// beyond `n_max`.
    pub fn first_passage(&self, i: usize, j: usize, n_max: usize, tol: f64) -> Result<FirstPassageLaw> {
        if i == 0 || j == 0 {
            return Err(Error::InvalidArgument("states are 1-based".into()));
        }
        let series = if i > j {
            let mut c = vec![0.0; n_max + 1];
            if i - j <= n_max {
                c[i - j] = 1.0;
            }
            TruncatedSeries::new(c)?
        } else {
            let num = TruncatedSeries::from_fn(n_max, |m| if m >= i { self.p(m - i + j) } else { 0.0 })?;
            let den = TruncatedSeries::from_fn(n_max.min(j - 1), |n| if n == 0 { 1.0 } else { -self.p(n) })?;
            let den = pad(&den, n_max);
            num.divide(&den)?
        };
        let total = series.coeffs().iter().copied().collect::<CompensatedSum>().value();
        let missing = 1.0 - total;
        if missing > tol {
            return Err(Error::TruncationTooSmall(format!(
                "f_{{{i},{j}}} retains mass {missing:e} beyond n = {n_max}"
            )));
        }
        Ok(FirstPassageLaw {
            source: i,
            target: j,
            series,
            missing_mass: missing,
        })
    }

    /// `M^{(gamma)}_{ij} = Σ_{n ≤ n_max} n^gamma f^n_{ij}` with a tail estimate.
    pub fn moment(&self, i: usize, j: usize, gamma: f64, n_max: usize, tol: f64) -> Result<MomentValue> {
        let law = self.first_passage(i, j, n_max, tol)?;
        Ok(self.moment_of(&law, gamma))
    }

    pub fn moment_of(&self, law: &FirstPassageLaw, gamma: f64) -> MomentValue {
        let value = law
            .series
            .coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, &f)| (n as f64).powf(gamma) * f)
            .collect::<CompensatedSum>()
            .value();
        let n_max = law.series.truncation_order();
        let (finite, tail_estimate) = if law.source > law.target {
            (true, 0.0)
        } else {
            let finite = self.return_moment_finite(gamma);
            let tail = if finite {
                self.first_passage_tail(law.source, law.target, n_max, gamma)
            } else {
                f64::INFINITY
            };
            (finite, tail)
        };
        MomentValue {
            value,
            gamma,
            tail_estimate,
            finite,
        }
    }

    /// `Σ_{n>N} n^gamma f^n_{ij}` for `j ≥ i`.
    ///
    /// With `c = 1/(1 - Σ_{0<n<j} p_n z^n)` and numerator `a_r = p_{r-i+j}`
    /// (`r ≥ i`), the tail is `Σ_k c_k Σ_{n>N} n^gamma a_{n-k}`; the inner sum
    /// is a tail moment of `p` with `n^gamma` replaced by its shifted index,
    /// which is exact for `gamma = 0`.
    fn first_passage_tail(&self, i: usize, j: usize, n_max: usize, gamma: f64) -> f64 {
        let den = TruncatedSeries::from_fn(n_max.min(j - 1), |n| if n == 0 { 1.0 } else { -self.p(n) })
            .expect("finite probabilities");
        let c = pad(&den, n_max).reciprocal().expect("unit leading coefficient");
        let top = n_max + j + 1;
        let mut m_tail = vec![0.0; top + 2];
        let mut acc = CompensatedSum::new();
        acc += self.p_moment_from(top + 1, gamma);
        m_tail[top + 1] = acc.value();
        for m in (1..=top).rev() {
            acc += (m as f64).powf(gamma) * self.p(m);
            m_tail[m] = acc.value();
        }
        let mut tail = CompensatedSum::new();
        for (k, &ck) in c.coeffs().iter().enumerate() {
            let r_min = (n_max + 1 - k).max(i);
            tail += ck * m_tail[r_min - i + j];
        }
        let rest = 1.0 / self.d(j - 1) - c.coeffs().iter().copied().collect::<CompensatedSum>().value();
        tail += rest.max(0.0) * ((n_max + 1) as f64).powf(gamma) * self.d(j - 1);
        tail.value()
    }

    /// Both sides of
    /// `M^{(2)}_{ii} = (π_1/π_i)(M^{(2)}_{11} + 2 Σ_{n<i} n p_n / π_i)`.
    ///
    /// The left side is the direct second moment of `f_{ii}` plus its
    /// analytic tail; the right side uses the exact `M^{(2)}_{11} = Σ n^2 p_n`.
    pub fn moment_identity_check(&self, i: usize, n_max: usize) -> Result<MomentIdentity> {
        if !(self.degree > 1.0) {
            return Err(Error::DegreeTooSmall(self.degree));
        }
        let law = self.first_passage(i, i, n_max, 1.0)?;
        let m = self.moment_of(&law, 2.0);
        let lhs = m.value + m.tail_estimate;
        let m2_11 = self.p_moment_from(1, 2.0);
        let pi_i = self.pi(i);
        let s: f64 = (1..i).map(|n| n as f64 * self.p(n)).collect::<CompensatedSum>().value();
        let rhs = self.pi1 / pi_i * (m2_11 + 2.0 * s / pi_i);
        Ok(MomentIdentity {
            lhs,
            rhs,
            gap: (lhs - rhs).abs() / rhs.abs(),
        })
    }

    /// P-order of `nu` from declared tails.
    ///
    /// From `l > i` the passage to `i` is deterministic with `M_{li} =
    /// (l-i)^gamma`; from `l < i` it runs through state 1 and inherits the
    /// tail of `p`. Hence `value = min(d + 1, κ - 1)` when `ν_l ~ l^{-κ}`.
    /// `at_i` is the same supremum restricted to the given `i`, which can be
    /// larger when `nu` has no mass below `i`.
    pub fn p_order(&self, nu: &SignedDistribution, i: usize) -> POrder {
        let kappa = nu.decay_exponent(self);
        let through_one = self.degree + 1.0;
        let descent = kappa - 1.0;
        let value = through_one.min(descent);
        let mass_below = (1..i).any(|l| nu.weight(self, l) != 0.0);
        let infinite_support = kappa.is_finite();
        let mut at_i = f64::INFINITY;
        if mass_below {
            at_i = at_i.min(through_one);
        }
        if infinite_support {
            at_i = at_i.min(descent);
        }
        POrder { value, at_i }
    }

    /// Partial sums `A_n = Σ_{m≤n} m^{gamma+1} f^m_{ii}` and
    /// `B_n = Σ_{l≤n, l≠i} π_l M^{(gamma)}_{li}` for `n = 1..=n_max`, where
    /// each `M_{li}` is itself truncated at `n_max`.
    pub fn moment_codivergence_probe(&self, gamma: f64, i: usize, n_max: usize) -> Result<CodivergenceProbe> {
        if !self.is_positive_recurrent() {
            return Err(Error::PreconditionViolated(
                "the stationary-start moment needs a positive-recurrent chain".into(),
            ));
        }
        let f_ii = self.first_passage(i, i, n_max, 1.0)?;
        let mut a = Vec::with_capacity(n_max);
        let mut acc = CompensatedSum::new();
        for m in 1..=n_max {
            acc += (m as f64).powf(gamma + 1.0) * f_ii.series.coeff(m);
            a.push(acc.value());
        }
        let below: Vec<f64> = (1..i)
            .map(|l| {
                self.first_passage(l, i, n_max, 1.0)
                    .map(|law| self.moment_of(&law, gamma).value)
            })
            .collect::<Result<_>>()?;
        let mut b = Vec::with_capacity(n_max);
        let mut acc = CompensatedSum::new();
        for l in 1..=n_max {
            let m_li = match l.cmp(&i) {
                std::cmp::Ordering::Less => below[l - 1],
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => ((l - i) as f64).powf(gamma),
            };
            acc += self.pi(l) * m_li;
            b.push(acc.value());
        }
        // Both converge iff gamma < d (A: (gamma+1) < d+1; B: Σ l^{-(d+1)} l^gamma).
        let a_converges = gamma + 1.0 < self.degree + 1.0;
        let b_converges = gamma < self.degree;
        Ok(CodivergenceProbe {
            partial_sums_a: a,
            partial_sums_b: b,
            codivergent: a_converges == b_converges,
        })
    }
}

fn pad(s: &TruncatedSeries, order: usize) -> TruncatedSeries {
    let mut c = s.coeffs().to_vec();
    c.resize(order + 1, 0.0);
    TruncatedSeries::new(c).expect("padding keeps coefficients finite")
}

/// `f^n_{ij}` for `n = 0..=N` together with the mass missing beyond `N`.
#[derive(Debug, Clone)]
pub struct FirstPassageLaw {
    pub source: usize,
    pub target: usize,
    pub series: TruncatedSeries,
    pub missing_mass: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentValue {
    pub value: f64,
    pub gamma: f64,
    /// Estimated contribution of `n > N`; infinite when the moment diverges.
    pub tail_estimate: f64,
    /// Finiteness decided from the declared tail of the return law.
    pub finite: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / |rhs|`.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct POrder {
    /// Supremum valid for every reference state.
    pub value: f64,
    /// Supremum for the requested reference state alone.
    pub at_i: f64,
}

#[derive(Debug, Clone)]
pub struct CodivergenceProbe {
    pub partial_sums_a: Vec<f64>,
    pub partial_sums_b: Vec<f64>,
    /// Declared tails give both series the same convergence behavior.
    pub codivergent: bool,
}
