//! Truncated power-series algebra.
//!
//! A [`TruncatedSeries`] stores the coefficients `c_0..c_N` of a real power
//! series. Every binary operation truncates to the shorter operand: nothing
//! is ever zero-extended past the stored prefix.
//!
//! Return laws are stored with `c_0 = 0` and `c_n = p_n`, i.e. as the
//! coefficients of `F(z) = Σ_{n≥1} p_n z^n`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Default floor under which a leading coefficient counts as zero.
pub const DEFAULT_LEADING_FLOOR: f64 = 1e-300;

/// Slack on the unit-disk domain check of [`TruncatedSeries::evaluate`].
pub const DISK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
    tail_hint: Option<f64>,
}

impl TruncatedSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "a truncated series needs at least one coefficient".into(),
            ));
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index });
        }
        Ok(Self {
            coeffs,
            tail_hint: None,
        })
    }

    /// Attach a declared asymptotic exponent of `|c_n|`; diagnostics only.
    pub fn with_tail_hint(mut self, exponent: f64) -> Self {
        self.tail_hint = Some(exponent);
        self
    }

    /// `(1, 0, ..., 0)` of order `n`.
    pub fn unit(order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = 1.0;
        Self {
            coeffs,
            tail_hint: None,
        }
    }

    pub fn from_fn(order: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((0..=order).map(f).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs[n]
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn tail_hint(&self) -> Option<f64> {
        self.tail_hint
    }

    /// Restrict to the prefix `c_0..c_order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.truncation_order());
        Self {
            coeffs: self.coeffs[..=order].to_vec(),
            tail_hint: self.tail_hint,
        }
    }

    /// Cauchy product on the shared prefix.
    pub fn convolve(&self, other: &Self) -> Self {
        let order = self.truncation_order().min(other.truncation_order());
        let (a, b) = (&self.coeffs, &other.coeffs);
        let coeffs = (0..=order)
            .map(|n| {
                let mut acc = CompensatedSum::new();
                for k in 0..=n {
                    acc += a[k] * b[n - k];
                }
                acc.value()
            })
            .collect();
        Self {
            coeffs,
            tail_hint: None,
        }
    }

    /// `1 / D(z)` with the default leading-coefficient floor.
    pub fn reciprocal(&self) -> Result<Self> {
        self.reciprocal_with_floor(DEFAULT_LEADING_FLOOR)
    }

    /// `c_0 = 1/d_0`, `c_n = -(1/d_0) Σ_{k=1}^{n} d_k c_{n-k}`.
    pub fn reciprocal_with_floor(&self, floor: f64) -> Result<Self> {
        Self::unit(self.truncation_order()).divide_with_floor(self, floor)
    }

    /// `E(z) / D(z)` with the default leading-coefficient floor.
    pub fn divide(&self, denominator: &Self) -> Result<Self> {
        self.divide_with_floor(denominator, DEFAULT_LEADING_FLOOR)
    }

    /// Long division `h_n = (e_n - Σ_{k=1}^{n} d_k h_{n-k}) / d_0`.
    ///
    /// Only the nonzero prefix of `d` enters the inner sum, so dividing by a
    /// polynomial of degree `m` costs `O(N m)`.
    pub fn divide_with_floor(&self, denominator: &Self, floor: f64) -> Result<Self> {
        let d = &denominator.coeffs;
        let d0 = d[0];
        if !(d0.abs() >= floor) {
            return Err(Error::ZeroLeadingCoefficient { value: d0, floor });
        }
        let order = self.truncation_order().min(denominator.truncation_order());
        let degree = d[..=order].iter().rposition(|&x| x != 0.0).unwrap_or(0);
        let e = &self.coeffs;
        let mut h = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let mut acc = CompensatedSum::new();
            acc += e[n];
            for k in 1..=n.min(degree) {
                acc += -d[k] * h[n - k];
            }
            h.push(acc.value() / d0);
        }
        Ok(Self {
            coeffs: h,
            tail_hint: None,
        })
    }

    /// `r_n = Σ_{n<k≤N} a_k + analytic_tail`, where `analytic_tail` is the
    /// caller's value of `Σ_{k>N} a_k`.
    ///
    /// Applied to a return law stored as `(0, p_1, .., p_N)` this yields the
    /// tail sums `d_n = Σ_{i>n} p_i`; applied to `d` it yields `e_n`.
    pub fn tail_transform(&self, analytic_tail: Option<f64>) -> Result<Self> {
        if let Some((index, &value)) = self.coeffs.iter().enumerate().find(|(_, c)| **c < 0.0) {
            return Err(Error::NegativeCoefficient { index, value });
        }
        let order = self.truncation_order();
        let mut out = vec![0.0; order + 1];
        let mut acc = CompensatedSum::new();
        acc += analytic_tail.unwrap_or(0.0);
        for n in (0..=order).rev() {
            out[n] = acc.value();
            acc += self.coeffs[n];
        }
        Ok(Self {
            coeffs: out,
            tail_hint: self.tail_hint.map(|g| g + 1.0),
        })
    }

    /// Running sums `s_n = Σ_{k≤n} c_k`.
    pub fn partial_sums(&self) -> Self {
        let mut acc = CompensatedSum::new();
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| {
                acc += c;
                acc.value()
            })
            .collect();
        Self {
            coeffs,
            tail_hint: None,
        }
    }

    /// Horner evaluation of the stored prefix on the closed unit disk.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let modulus = z.norm();
        if modulus > 1.0 + DISK_SLACK {
            return Err(Error::OutOfDomain { modulus });
        }
        Ok(horner(&self.coeffs, z))
    }

    /// Kaluza test on a return law stored as `(·, p_1, .., p_N)`; the entry
    /// at index 0 is ignored.
    ///
    /// True iff `p` is strictly decreasing and strictly log-convex,
    /// `p_n^2 < p_{n+1} p_{n-1}`, at every interior index `2 ≤ n < N`.
    /// Geometric laws sit on the boundary (equality) and fail.
    pub fn kaluza_check(&self) -> Result<bool> {
        let c = &self.coeffs;
        if let Some((index, &value)) = c.iter().enumerate().skip(1).find(|(_, x)| **x <= 0.0) {
            return Err(Error::NonPositiveCoefficient { index, value });
        }
        let n_max = self.truncation_order();
        let decreasing = (1..n_max).all(|n| c[n] > c[n + 1]);
        let log_convex = (2..n_max).all(|n| c[n] * c[n] < c[n + 1] * c[n - 1]);
        Ok(decreasing && log_convex)
    }

    /// Smallest `|D(z)|` over a polar grid of the closed unit disk.
    ///
    /// A finite prefix cannot certify `D(z) ≠ 0` on the disk; this is a
    /// heuristic scan only.
    pub fn min_modulus_scan(&self, radial: usize, angular: usize) -> (f64, Complex64) {
        let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
        for r in 0..=radial {
            let rho = r as f64 / radial.max(1) as f64;
            let steps = if r == 0 { 1 } else { angular };
            for a in 0..steps {
                let theta = std::f64::consts::TAU * a as f64 / angular as f64;
                let z = Complex64::from_polar(rho, theta);
                let v = horner(&self.coeffs, z).norm();
                if v < best.0 {
                    best = (v, z);
                }
            }
        }
        best
    }

    /// Write as CSV with header `n,coeff`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "coeff"])?;
        for (n, c) in self.coeffs.iter().enumerate() {
            w.write_record([n.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["n", "coeff"] {
            return Err(Error::InvalidArgument(format!(
                "expected header n,coeff, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut coeffs = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let n: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad index on row {row}")))?;
            if n != row {
                return Err(Error::InvalidArgument(format!(
                    "row {row} carries index {n}; indices must be 0,1,2,..."
                )));
            }
            let c: f64 = record[1]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad coefficient on row {row}")))?;
            coeffs.push(c);
        }
        Self::new(coeffs)
    }
}

pub(crate) fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Growth regime of `Σ_{k=1}^{n-1} k^{1-γ} (n-k)^{1-γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvPowerRegime {
    /// `1 < γ < 2`: `O(n^{3-2γ})`.
    Subcritical,
    /// `γ = 2`: `O(log n / n)`.
    Critical,
    /// `γ > 2`: `O(n^{1-γ})`.
    Supercritical,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvPowerProbe {
    pub value: f64,
    pub regime: ConvPowerRegime,
    /// `value` divided by the regime's growth profile; stays bounded in `n`.
    pub normalized: f64,
}

/// Direct evaluation of the self-convolution of `k^{1-γ}` at index `n`.
pub fn convpower_probe(gamma: f64, n: u64) -> Result<ConvPowerProbe> {
    if gamma <= 1.0 {
        return Err(Error::BadExponent(gamma));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("convpower_probe needs n >= 2".into()));
    }
    let e = 1.0 - gamma;
    let mut acc = CompensatedSum::new();
    for k in 1..n {
        acc += (k as f64).powf(e) * ((n - k) as f64).powf(e);
    }
    let value = acc.value();
    let x = n as f64;
    let (regime, profile) = if gamma < 2.0 {
        (ConvPowerRegime::Subcritical, x.powf(3.0 - 2.0 * gamma))
    } else if gamma == 2.0 {
        (ConvPowerRegime::Critical, x.ln() / x)
    } else {
        (ConvPowerRegime::Supercritical, x.powf(1.0 - gamma))
    };
    Ok(ConvPowerProbe {
        value,
        regime,
        normalized: value / profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> TruncatedSeries {
        TruncatedSeries::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            TruncatedSeries::new(vec![1.0, f64::NAN]),
            Err(Error::NonFiniteCoefficient { index: 1 })
        ));
        assert!(TruncatedSeries::new(vec![]).is_err());
    }

    #[test]
    fn convolve_examples() {
        assert_eq!(
            s(&[1.0, 0.0, 0.0]).convolve(&s(&[3.0, 2.0, 1.0])).coeffs(),
            &[3.0, 2.0, 1.0]
        );
        assert_eq!(s(&[1.0, 1.0]).convolve(&s(&[1.0, 1.0])).coeffs(), &[1.0, 2.0]);
        // f11 * p11 for p = (1/2, 1/2): p11 = (1, 1/2, 3/4); coefficient 2 of
        // the product is p11^2 - delta = 3/4 by the renewal recursion.
        let f11 = s(&[0.0, 0.5, 0.5]);
        let p11 = s(&[1.0, 0.5, 0.75]);
        assert_eq!(f11.convolve(&p11).coeff(2), 0.75);
        // Truncation is the shorter operand.
        assert_eq!(s(&[1.0, 2.0, 3.0]).convolve(&s(&[1.0])).truncation_order(), 0);
    }

    #[test]
    fn reciprocal_examples() {
        let c = TruncatedSeries::from_fn(30, |n| if n == 0 { 1.0 } else if n == 1 { -0.5 } else { 0.0 })
            .unwrap()
            .reciprocal()
            .unwrap();
        for (n, &cn) in c.coeffs().iter().enumerate() {
            assert_eq!(cn, 0.5f64.powi(n as i32));
        }
        let c = s(&[1.0, 1.0, 0.0, 0.0, 0.0]).reciprocal().unwrap();
        assert_eq!(c.coeffs(), &[1.0, -1.0, 1.0, -1.0, 1.0]);
        // D = (1, 1/2) from p = (1/2, 1/2): c_n = (-1/2)^n, partial sums -> 2/3.
        let mut d = vec![0.0; 61];
        d[0] = 1.0;
        d[1] = 0.5;
        let c = s(&d).reciprocal().unwrap();
        for (n, &cn) in c.coeffs().iter().enumerate() {
            assert_eq!(cn, (-0.5f64).powi(n as i32));
        }
        let last = *c.partial_sums().coeffs().last().unwrap();
        assert!((last - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reciprocal_floor() {
        assert!(matches!(
            s(&[0.0, 1.0]).reciprocal(),
            Err(Error::ZeroLeadingCoefficient { .. })
        ));
        assert!(matches!(
            s(&[1e-10, 1.0]).reciprocal_with_floor(1e-6),
            Err(Error::ZeroLeadingCoefficient { .. })
        ));
        assert!(s(&[1e-10, 1.0]).reciprocal().is_ok());
    }

    #[test]
    fn divide_examples() {
        let d = s(&[1.0, 0.3, -0.2, 0.1]);
        assert!(close(d.divide(&d).unwrap().coeffs(), &[1.0, 0.0, 0.0, 0.0], 1e-15));
        // e_n = d_n = 2^{-n}: E/D = 1.
        let g = TruncatedSeries::from_fn(40, |n| 0.5f64.powi(n as i32)).unwrap();
        let h = g.divide(&g).unwrap();
        assert_eq!(h.coeff(0), 1.0);
        assert!(h.coeffs()[1..].iter().all(|&x| x.abs() < 1e-15));
        // (1 + z) / (1 - z/2): h_0 = 1, h_n = 3 * 2^{-n}.
        let mut e = vec![0.0; 20];
        e[0] = 1.0;
        e[1] = 1.0;
        let mut dd = vec![0.0; 20];
        dd[0] = 1.0;
        dd[1] = -0.5;
        let h = s(&e).divide(&s(&dd)).unwrap();
        assert_eq!(h.coeff(0), 1.0);
        for n in 1..20 {
            assert_eq!(h.coeff(n), 3.0 * 0.5f64.powi(n as i32));
        }
    }

    #[test]
    fn tail_transform_examples() {
        // Return laws are stored with a zero constant term.
        assert_eq!(s(&[0.0, 1.0, 0.0]).tail_transform(None).unwrap().coeffs(), &[1.0, 0.0, 0.0]);
        let d = s(&[0.0, 0.5, 0.3, 0.2]).tail_transform(None).unwrap();
        assert!(close(d.coeffs(), &[1.0, 0.5, 0.2, 0.0], 1e-15));
        // p_n = 2^{-n} with analytic remainder 2^{-N}: d_n = 2^{-n}.
        let n_max = 50;
        let p = TruncatedSeries::from_fn(n_max, |n| if n == 0 { 0.0 } else { 0.5f64.powi(n as i32) }).unwrap();
        let d = p.tail_transform(Some(0.5f64.powi(n_max as i32))).unwrap();
        for n in 0..=n_max {
            assert_eq!(d.coeff(n), 0.5f64.powi(n as i32));
        }
        assert!(matches!(
            s(&[0.0, -0.1]).tail_transform(None),
            Err(Error::NegativeCoefficient { index: 1, .. })
        ));
    }

    #[test]
    fn partial_sum_examples() {
        assert_eq!(s(&[1.0, 0.0, 0.0]).partial_sums().coeffs(), &[1.0, 1.0, 1.0]);
        // Geometric chain: D = (1, 1/2, 1/4, ...), 1/D = (1, -1/2, 0, 0, ...),
        // partial sums (1, 1/2, 1/2, ...).
        let d = TruncatedSeries::from_fn(20, |n| 0.5f64.powi(n as i32)).unwrap();
        let ps = d.reciprocal().unwrap().partial_sums();
        assert_eq!(ps.coeff(0), 1.0);
        assert!(ps.coeffs()[1..].iter().all(|&x| (x - 0.5).abs() < 1e-15));
        let alt = TruncatedSeries::from_fn(80, |n| (-0.5f64).powi(n as i32)).unwrap();
        assert!((alt.partial_sums().coeff(80) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_examples() {
        let a = s(&[0.7, 0.2, 0.1]);
        assert_eq!(a.evaluate(Complex64::new(0.0, 0.0)).unwrap().re, 0.7);
        // D(1) for p = (1/2, 1/2) is 1.5.
        assert_eq!(s(&[1.0, 0.5]).evaluate(Complex64::new(1.0, 0.0)).unwrap().re, 1.5);
        // Geometric D(z) = 1/(1 - z/2); 1/D(0.99) = 0.505.
        let d = TruncatedSeries::from_fn(200, |n| 0.5f64.powi(n as i32)).unwrap();
        let v = d.evaluate(Complex64::new(0.99, 0.0)).unwrap();
        assert!((1.0 / v.re - 0.505).abs() < 1e-14);
        assert!(matches!(
            a.evaluate(Complex64::new(0.9, 0.9)),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn kaluza_examples() {
        let geo = TruncatedSeries::from_fn(30, |n| 0.5f64.powi(n as i32)).unwrap();
        assert!(!geo.kaluza_check().unwrap());
        let cube = TruncatedSeries::from_fn(200, |n| if n == 0 { 0.0 } else { (n as f64).powi(-3) / 1.202_056_903_159_594 })
            .unwrap();
        assert!(cube.kaluza_check().unwrap());
        assert!(!s(&[0.0, 0.5, 0.5]).kaluza_check().unwrap());
        assert!(matches!(
            s(&[0.0, 0.5, 0.0]).kaluza_check(),
            Err(Error::NonPositiveCoefficient { index: 2, .. })
        ));
    }

    #[test]
    fn convpower_regimes_stay_bounded() {
        for (gamma, regime) in [
            (1.5, ConvPowerRegime::Subcritical),
            (2.0, ConvPowerRegime::Critical),
            (3.0, ConvPowerRegime::Supercritical),
        ] {
            let vals: Vec<f64> = (10..=14)
                .map(|k| convpower_probe(gamma, 1u64 << k).unwrap())
                .inspect(|p| assert_eq!(p.regime, regime))
                .map(|p| p.normalized)
                .collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            assert!(lo > 0.0 && hi / lo < 1.5, "gamma {gamma}: {vals:?}");
        }
        assert!(matches!(convpower_probe(1.0, 10), Err(Error::BadExponent(_))));
    }

    #[test]
    fn convpower_gamma_three_limit() {
        // For gamma > 2 the normalized sum tends to 2 * zeta(gamma - 1).
        let p = convpower_probe(3.0, 1 << 14).unwrap();
        let target = 2.0 * std::f64::consts::PI.powi(2) / 6.0;
        assert!((p.normalized - target).abs() < 0.01);
    }

    #[test]
    fn csv_round_trip() {
        let a = s(&[1.0, -0.1, 1.0 / 3.0, 2.5e-300]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("n,coeff\n"));
        assert_eq!(TruncatedSeries::read_csv(&buf[..]).unwrap(), a);
        assert!(TruncatedSeries::read_csv("a,b\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn min_modulus_scan_finds_root() {
        // 1 - z/0.8 has its root inside the disk at z = 0.8.
        let d = s(&[1.0, -1.25]);
        let (v, _) = d.min_modulus_scan(40, 64);
        assert!(v < 0.05);
        let (v, _) = s(&[1.0, 0.5]).min_modulus_scan(40, 64);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn convolution_preserves_power_decay() {
        // d_n = n^{-gamma} with d_0 large enough that D has no zeros in the
        // closed disk; |c_n| should inherit the n^{-gamma} decay.
        for gamma in [2.0f64, 3.0] {
            let n_max = 10_000;
            let d = TruncatedSeries::from_fn(n_max, |n| if n == 0 { 2.0 } else { (n as f64).powf(-gamma) }).unwrap();
            let c = d.reciprocal().unwrap();
            let (xs, ys): (Vec<f64>, Vec<f64>) = (0..=40)
                .map(|k| {
                    let n = (1000.0 * 10f64.powf(k as f64 / 40.0)).round() as usize;
                    ((n as f64).ln(), c.coeff(n.min(n_max)).abs().ln())
                })
                .unzip();
            let slope = ls_slope(&xs, &ys);
            assert!((slope + gamma).abs() < 0.3, "gamma {gamma}: slope {slope}");
        }
    }

    fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    fn arb_series(len: usize) -> impl Strategy<Value = TruncatedSeries> {
        proptest::collection::vec(-1.0f64..1.0, len).prop_map(|v| TruncatedSeries::new(v).unwrap())
    }

    fn arb_invertible(len: usize) -> impl Strategy<Value = TruncatedSeries> {
        (0.5f64..2.0, proptest::collection::vec(-0.2f64..0.2, len - 1)).prop_map(|(d0, rest)| {
            let mut v = vec![d0];
            // geometric-or-slower coefficient profile
            v.extend(rest.iter().enumerate().map(|(k, x)| x * 0.7f64.powi(k as i32)));
            TruncatedSeries::new(v).unwrap()
        })
    }

    fn max_rel(a: &TruncatedSeries, b: &TruncatedSeries) -> f64 {
        let scale = a.coeffs().iter().chain(b.coeffs()).fold(1.0f64, |m, x| m.max(x.abs()));
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    proptest! {
        #[test]
        fn convolve_commutes_and_associates(a in arb_series(24), b in arb_series(24), c in arb_series(24)) {
            prop_assert!(max_rel(&a.convolve(&b), &b.convolve(&a)) < 1e-12);
            prop_assert!(max_rel(&a.convolve(&b).convolve(&c), &a.convolve(&b.convolve(&c))) < 1e-12);
        }

        #[test]
        fn reciprocal_is_an_involution(d in arb_invertible(40)) {
            let back = d.reciprocal().unwrap().reciprocal().unwrap();
            prop_assert!(max_rel(&back, &d) < 1e-10);
            let one = d.convolve(&d.reciprocal().unwrap());
            prop_assert!(max_rel(&one, &TruncatedSeries::unit(39)) < 1e-12);
        }

        #[test]
        fn divide_matches_convolution_with_reciprocal(e in arb_series(40), d in arb_invertible(40)) {
            let h = e.divide(&d).unwrap();
            prop_assert!(max_rel(&h, &e.convolve(&d.reciprocal().unwrap())) < 1e-12);
            prop_assert!(max_rel(&d.convolve(&h), &e) < 1e-12);
        }

        #[test]
        fn tail_transform_is_nonincreasing(v in proptest::collection::vec(0.0f64..1.0, 1..60), tail in 0.0f64..1.0) {
            let d = TruncatedSeries::new(v).unwrap().tail_transform(Some(tail)).unwrap();
            let c = d.coeffs();
            prop_assert!(c.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(c.iter().all(|&x| x <= c[0]));
        }

        #[test]
        fn partial_sums_difference(v in proptest::collection::vec(-1.0f64..1.0, 1..60)) {
            let a = TruncatedSeries::new(v).unwrap();
            let s = a.partial_sums();
            for n in 1..s.coeffs().len() {
                prop_assert!((s.coeff(n) - s.coeff(n - 1) - a.coeff(n)).abs() < 1e-14);
            }
        }
    }
}
