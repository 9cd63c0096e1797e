//! Small numerical kernels shared across modules: compensated summation and
//! Euler–Maclaurin tails of `n^{-s} (ln(n+1))^beta`.

use std::ops::AddAssign;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for CompensatedSum {
    #[inline]
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Where direct summation hands over to the Euler–Maclaurin remainder.
const EM_CUTOFF: u64 = 10_000;

/// `f(x) = x^{-s} (ln(x+1))^beta`.
#[inline]
pub fn zeta_term(x: f64, s: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        x.powf(-s)
    } else {
        x.powf(-s) * x.ln_1p().powf(beta)
    }
}

fn zeta_term_derivative(x: f64, s: f64, beta: f64) -> f64 {
    let f = zeta_term(x, s, beta);
    if beta == 0.0 {
        -s * f / x
    } else {
        let l = x.ln_1p();
        f * (-s / x + beta / ((x + 1.0) * l))
    }
}

/// `∫_m^∞ x^{-s} (ln(x+1))^beta dx` for `s > 1`.
fn zeta_tail_integral(m: f64, s: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return m.powf(1.0 - s) / (s - 1.0);
    }
    // x = m e^{tau/(s-1)} turns the integral into
    // m^{1-s}/(s-1) ∫_0^∞ e^{-tau} (ln(x+1))^beta dtau.
    let k = s - 1.0;
    let ln_m = m.ln();
    let g = |tau: f64| {
        let ln_x = ln_m + tau / k;
        let ln_x1 = ln_x + (-ln_x).exp().ln_1p();
        (-tau).exp() * ln_x1.powf(beta)
    };
    let upper = 60.0 + 4.0 * beta;
    let simpson = |panels: usize| {
        let h = upper / panels as f64;
        let mut acc = CompensatedSum::new();
        acc += g(0.0) + g(upper);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(i as f64 * h);
        }
        acc.value() * h / 3.0
    };
    let coarse = simpson(8_000);
    let fine = simpson(16_000);
    let integral = (16.0 * fine - coarse) / 15.0;
    m.powf(1.0 - s) / k * integral
}

/// `Σ_{n ≥ from} n^{-s} (ln(n+1))^beta`, or `+∞` when `s ≤ 1`.
///
/// Terms below [`EM_CUTOFF`] are summed directly; the remainder uses the
/// Euler–Maclaurin formula through the first-derivative correction, whose
/// neglected term is `O(M^{-s-3})`.
pub fn zeta_tail(s: f64, beta: f64, from: u64) -> f64 {
    if s <= 1.0 {
        return f64::INFINITY;
    }
    let from = from.max(1);
    let cutoff = from.max(EM_CUTOFF);
    let mut acc = CompensatedSum::new();
    // Sum small terms first for accuracy.
    for n in (from..cutoff).rev() {
        acc += zeta_term(n as f64, s, beta);
    }
    let m = cutoff as f64;
    acc += zeta_tail_integral(m, s, beta);
    acc += 0.5 * zeta_term(m, s, beta);
    acc += -zeta_term_derivative(m, s, beta) / 12.0;
    acc.value()
}
