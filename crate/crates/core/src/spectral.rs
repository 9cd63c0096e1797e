//! Truncated transition operators, the factorization
//! `(I - zQ)(I - L_z) = I - zP`, eigenvector probes and generating functions.
//!
//! Matrices act on row vectors from the right: `(xT)_j = Σ_i x_i t_{ij}`.
//! `Q` is the strictly descending part of `P` (row 1 zero) and
//! `L_z(i,j) = p_j z^i`. Truncation at `N` breaks the shift in the last
//! row and column, so residuals are taken on the interior block `1..N-1`.
//!
//! Evidence about the continuous spectrum (non-ℓ₁ growth of candidate
//! eigenvectors on the unit circle) is a diagnostic, not a proof.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::RenewalChain;
use crate::error::{Error, Result};
use crate::series::{horner, DISK_SLACK};

/// Largest dimension materialized as a dense matrix.
pub const DENSE_LIMIT: usize = 1000;

/// Distance from 1 below which `z` is treated as the singular point.
pub const SINGULAR_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    P,
    Q,
    L(Complex64),
}

/// `N × N` truncation of `P`, `Q` or `L_z`.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    kind: OperatorKind,
    p: Vec<f64>,
}

impl TruncatedOperator {
    pub fn new(chain: &RenewalChain, kind: OperatorKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::TruncationTooSmall("operators need dimension >= 2".into()));
        }
        let p = (0..=dim).map(|n| chain.p(n)).collect();
        Ok(Self { kind, p })
    }

    pub fn dim(&self) -> usize {
        self.p.len() - 1
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// Entry `(i, j)`, 1-based.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self.kind {
            OperatorKind::P => {
                if i == 1 {
                    self.p[j].into()
                } else if j + 1 == i {
                    one
                } else {
                    zero
                }
            }
            OperatorKind::Q => {
                if i >= 2 && j + 1 == i {
                    one
                } else {
                    zero
                }
            }
            OperatorKind::L(z) => z.powu(i as u32) * self.p[j],
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense matrices are limited to N <= {DENSE_LIMIT}"
            )));
        }
        Ok(DMatrix::from_fn(n, n, |r, c| self.entry(r + 1, c + 1)))
    }

    /// Row action `xT` on the truncated space.
    pub fn row_action(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length must match the operator");
        match self.kind {
            OperatorKind::P => (1..=n)
                .map(|j| x[0] * self.p[j] + if j < n { x[j] } else { Complex64::new(0.0, 0.0) })
                .collect(),
            OperatorKind::Q => (1..=n)
                .map(|j| if j < n { x[j] } else { Complex64::new(0.0, 0.0) })
                .collect(),
            OperatorKind::L(z) => {
                // (x L_z)_j = p_j Σ_i x_i z^i
                let s = horner_shifted(x, z);
                (1..=n).map(|j| s * self.p[j]).collect()
            }
        }
    }

    pub fn row_sums(&self) -> Vec<Complex64> {
        (1..=self.dim())
            .map(|i| (1..=self.dim()).map(|j| self.entry(i, j)).sum())
            .collect()
    }
}

/// `Σ_{i≥1} x_i z^i`.
fn horner_shifted(x: &[Complex64], z: Complex64) -> Complex64 {
    x.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| (acc + c) * z)
}

/// `λ_z = Σ_j p_j z^j` over the stored prefix.
pub fn lambda_z(chain: &RenewalChain, z: Complex64) -> Complex64 {
    horner(chain.p_series().coeffs(), z)
}

fn check_disk(z: Complex64) -> Result<()> {
    let modulus = z.norm();
    if modulus > 1.0 + DISK_SLACK {
        return Err(Error::OutOfDomain { modulus });
    }
    Ok(())
}

/// Entries of `(I - zQ)(I - L_z)` on `1..=n`. Dense multiplication up to
/// [`DENSE_LIMIT`], structured rows beyond.
pub fn factorized_product(chain: &RenewalChain, z: Complex64, n: usize) -> Result<DMatrix<Complex64>> {
    check_disk(z)?;
    let q = TruncatedOperator::new(chain, OperatorKind::Q, n)?;
    let l = TruncatedOperator::new(chain, OperatorKind::L(z), n)?;
    if n <= DENSE_LIMIT {
        let id = DMatrix::<Complex64>::identity(n, n);
        let a = &id - q.to_dense()? * z;
        let b = &id - l.to_dense()?;
        return Ok(a * b);
    }
    // Row i of (I - zQ) is e_i - z e_{i-1}, so row i of the product is
    // row i of (I - L_z) minus z times row i-1.
    let b = |i: usize, j: usize| {
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - l.entry(i, j)
    };
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if i == 1 {
            b(1, j)
        } else {
            b(i, j) - z * b(i - 1, j)
        }
    }))
}

/// Max entry of `|(I - zQ)(I - L_z) - (I - zP)|` over rows and columns
/// `1..=n-1`; the last row and column are excluded.
pub fn factorization_residual(chain: &RenewalChain, z: Complex64, n: usize) -> Result<f64> {
    let lhs = factorized_product(chain, z, n)?;
    let p = TruncatedOperator::new(chain, OperatorKind::P, n)?;
    let mut worst = 0.0f64;
    for i in 1..n {
        for j in 1..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let rhs = Complex64::new(delta, 0.0) - z * p.entry(i, j);
            worst = worst.max((lhs[(i - 1, j - 1)] - rhs).norm());
        }
    }
    Ok(worst)
}

/// Candidate left eigenvector of `P` for eigenvalue `lambda`.
#[derive(Debug, Clone)]
pub struct SpectralProbe {
    pub lambda: Complex64,
    /// `x_1..x_N` with `x_1 = 1`.
    pub vector: Vec<Complex64>,
    /// `Σ_{j<N} |λ x_j - (xP)_j|` over the interior block.
    pub residual: f64,
    /// `|x_{N+1}|`, the defect in column `N` caused by truncation.
    pub edge_residual: f64,
    /// `Σ_{n≤N} |x_n|`.
    pub l1_partial_norm: f64,
}

/// `x_n = λ^{n-1} - Σ_{k=1}^{n-1} p_k λ^{n-1-k}`, generated by
/// `x_{n+1} = λ x_n - p_n`; for `λ = 1` this is `x_n = d_{n-1}`.
pub fn eigen_from_gf(chain: &RenewalChain, lambda: Complex64, n: usize) -> Result<SpectralProbe> {
    check_disk(lambda)?;
    if n < 2 {
        return Err(Error::TruncationTooSmall("eigen probes need N >= 2".into()));
    }
    let mut x = Vec::with_capacity(n + 1);
    x.push(Complex64::new(1.0, 0.0));
    for k in 1..=n {
        let next = lambda * x[k - 1] - chain.p(k);
        x.push(next);
    }
    let edge_residual = x[n].norm();
    x.truncate(n);
    let op = TruncatedOperator::new(chain, OperatorKind::P, n)?;
    let xp = op.row_action(&x);
    let residual = (0..n - 1).map(|j| (lambda * x[j] - xp[j]).norm()).sum();
    let l1_partial_norm = x.iter().map(|c| c.norm()).sum();
    Ok(SpectralProbe {
        lambda,
        vector: x,
        residual,
        edge_residual,
        l1_partial_norm,
    })
}

/// Partial ℓ₁ norms of the candidate eigenvector for each truncation.
pub fn partial_norm_scan(chain: &RenewalChain, lambda: Complex64, dims: &[usize]) -> Result<Vec<(usize, f64)>> {
    dims.iter()
        .map(|&n| eigen_from_gf(chain, lambda, n).map(|probe| (n, probe.l1_partial_norm)))
        .collect()
}

/// Writes `re_lambda,im_lambda,residual,l1_partial_norm` rows.
pub fn write_disk_scan_csv<W: Write>(probes: &[SpectralProbe], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["re_lambda", "im_lambda", "residual", "l1_partial_norm"])?;
    for probe in probes {
        w.write_record([
            probe.lambda.re.to_string(),
            probe.lambda.im.to_string(),
            (probe.residual + probe.edge_residual).to_string(),
            probe.l1_partial_norm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `P_ij(z)`, `F_ij(z)` and the gap in `P_ij = F_ij P_jj + δ_ij`.
#[derive(Debug, Clone, Copy)]
pub struct GfValue {
    pub p_ij: Complex64,
    pub f_ij: Complex64,
    pub identity_gap: f64,
    /// Bound on the contribution of `p_n`, `n > N`, to the power series.
    pub tail_bound: f64,
}

/// Closed forms with `F(z) = Σ p_n z^n`, `G_j(z) = Σ_{n≥j} p_n z^{n-j}`:
/// `P_11 = 1/(1 - F)`, `P_ij = [j≤i] z^{i-j} + z^i G_j P_11`, and
/// `F_ij = z^{i-j}` for `i > j`, `z^i G_j / (1 - Σ_{0<n<j} p_n z^n)` otherwise.
pub fn gf_evaluate(chain: &RenewalChain, i: usize, j: usize, z: Complex64) -> Result<GfValue> {
    if i == 0 || j == 0 {
        return Err(Error::InvalidArgument("states are 1-based".into()));
    }
    check_disk(z)?;
    if (z - 1.0).norm() < SINGULAR_RADIUS {
        return Err(Error::SingularPoint);
    }
    let n = chain.truncation();
    if j > n || i > n {
        return Err(Error::TruncationTooSmall(format!("states up to {} need N >= that", i.max(j))));
    }
    let p = chain.p_series().coeffs();
    let one = Complex64::new(1.0, 0.0);
    let f = horner(p, z);
    let g = |j: usize| horner(&p[j..], z);
    let partial = |j: usize| horner(&p[..j], z);
    let p11 = one / (one - f);
    let p_of = |i: usize, j: usize| {
        let direct = if j <= i { z.powu((i - j) as u32) } else { Complex64::new(0.0, 0.0) };
        direct + z.powu(i as u32) * g(j) * p11
    };
    let f_ij = if i > j {
        z.powu((i - j) as u32)
    } else {
        z.powu(i as u32) * g(j) / (one - partial(j))
    };
    let p_ij = p_of(i, j);
    let p_jj = p_of(j, j);
    let delta = if i == j { one } else { Complex64::new(0.0, 0.0) };
    let identity_gap = (p_ij - (f_ij * p_jj + delta)).norm();
    Ok(GfValue {
        p_ij,
        f_ij,
        identity_gap,
        tail_bound: chain.d(n) * z.norm().powi(n as i32 + 1),
    })
}

/// `(1 - r) P_11(r)` for real `r` in `[0, 1)`; tends to `π_1` as `r ↑ 1`.
pub fn radial_limit(chain: &RenewalChain, r: f64) -> Result<f64> {
    let v = gf_evaluate(chain, 1, 1, Complex64::new(r, 0.0))?;
    Ok((1.0 - r) * v.p_ij.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ReturnLaw;

    fn chain(law: ReturnLaw, n: usize) -> RenewalChain {
        RenewalChain::build(law, n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn operator_structure() {
        let ch = chain(ReturnLaw::zeta(1.0, 0.0), 50);
        let p = TruncatedOperator::new(&ch, OperatorKind::P, 50).unwrap();
        let sums = p.row_sums();
        assert!((sums[0].re - (1.0 - ch.d(50))).abs() < 1e-15);
        assert!(sums[1..].iter().all(|s| *s == c(1.0, 0.0)));
        let q = TruncatedOperator::new(&ch, OperatorKind::Q, 50).unwrap();
        assert_eq!(q.entry(1, 1), c(0.0, 0.0));
        assert_eq!(q.entry(3, 2), c(1.0, 0.0));
        let z = c(0.3, -0.2);
        let l = TruncatedOperator::new(&ch, OperatorKind::L(z), 50).unwrap();
        assert!((l.entry(3, 4) - z.powu(3) * ch.p(4)).norm() < 1e-16);
        // Dense and structured row actions agree.
        let x: Vec<Complex64> = (0..50).map(|k| c((k as f64).sin(), 0.1 * k as f64)).collect();
        for op in [&p, &q, &l] {
            let dense = op.to_dense().unwrap();
            let via = dense.transpose() * nalgebra::DVector::from_vec(x.clone());
            let fast = op.row_action(&x);
            for k in 0..50 {
                assert!((via[k] - fast[k]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn stationary_vector_is_fixed_on_interior() {
        let ch = chain(ReturnLaw::zeta(1.0, 0.0), 400);
        let p = TruncatedOperator::new(&ch, OperatorKind::P, 400).unwrap();
        let x: Vec<Complex64> = ch.pi_prefix().iter().map(|&v| c(v, 0.0)).collect();
        let y = p.row_action(&x);
        for j in 0..399 {
            assert!((y[j] - x[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn factorization_examples() {
        let g = chain(ReturnLaw::geometric(0.5), 200);
        assert_eq!(factorization_residual(&g, c(0.0, 0.0), 200).unwrap(), 0.0);
        assert!(factorization_residual(&g, c(0.5, 0.0), 200).unwrap() < 1e-12);
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 200);
        assert!(factorization_residual(&z, c(-0.3, 0.4), 200).unwrap() < 1e-12);
        assert!(matches!(
            factorization_residual(&z, c(1.0, 1.0), 10),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn factorization_is_stable_under_truncation() {
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 200);
        let w = c(-0.3, 0.4);
        let small = factorized_product(&z, w, 100).unwrap();
        let big = factorized_product(&z, w, 200).unwrap();
        for r in 0..99 {
            for col in 0..99 {
                assert!((small[(r, col)] - big[(r, col)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn structured_product_matches_dense() {
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 1200);
        let w = c(0.2, 0.7);
        let big = factorized_product(&z, w, 1100).unwrap();
        let dense = factorized_product(&z, w, 1000).unwrap();
        for r in 0..999 {
            for col in (0..999).step_by(37) {
                assert!((big[(r, col)] - dense[(r, col)]).norm() < 1e-14);
            }
        }
        assert!(factorization_residual(&z, w, 1100).unwrap() < 1e-12);
    }

    #[test]
    fn eigen_examples() {
        let g = chain(ReturnLaw::geometric(0.5), 400);
        let probe = eigen_from_gf(&g, c(0.5, 0.0), 400).unwrap();
        assert!(probe.residual < 1e-10);
        assert!(probe.vector[1].norm() < 1e-14);
        assert!((probe.vector[2] - c(-0.25, 0.0)).norm() < 1e-14);
        for n in 1..=60 {
            let expect = (2.0 - n as f64) * 0.5f64.powi(n as i32 - 1);
            assert!((probe.vector[n - 1].re - expect).abs() < 1e-15);
        }
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 400);
        let one = eigen_from_gf(&z, c(1.0, 0.0), 400).unwrap();
        assert!(one.residual < 1e-10);
        for n in 1..=400 {
            assert!((one.vector[n - 1].re - z.d(n - 1)).abs() < 1e-13);
        }
        assert!(eigen_from_gf(&z, c(0.0, 0.0), 10).unwrap().residual < 1e-15);
    }

    #[test]
    fn eigen_residual_shrinks_with_truncation_inside_the_disk() {
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 400);
        for lam in [c(0.9, 0.0), c(-0.5, 0.5), c(0.1, -0.8)] {
            let r: Vec<f64> = [100, 200, 400]
                .iter()
                .map(|&n| {
                    let probe = eigen_from_gf(&z, lam, n).unwrap();
                    probe.residual + probe.edge_residual
                })
                .collect();
            assert!(r[1] < r[0] && r[2] < r[1], "{lam}: {r:?}");
        }
    }

    #[test]
    fn unit_circle_candidates_are_not_summable() {
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 800);
        let scan = partial_norm_scan(&z, c(0.0, 1.0), &[100, 200, 400, 800]).unwrap();
        for w in scan.windows(2) {
            // roughly linear growth: the norm at least 1.8x per doubling
            assert!(w[1].1 > 1.8 * w[0].1, "{scan:?}");
        }
        let inside = partial_norm_scan(&z, c(0.0, 0.9), &[100, 200, 400, 800]).unwrap();
        assert!((inside[3].1 - inside[2].1) < 0.01 * inside[3].1);
    }

    #[test]
    fn gf_examples() {
        let g = chain(ReturnLaw::geometric(0.5), 200);
        assert_eq!(gf_evaluate(&g, 1, 1, c(0.0, 0.0)).unwrap().p_ij, c(1.0, 0.0));
        assert!((gf_evaluate(&g, 1, 1, c(0.5, 0.0)).unwrap().p_ij - c(1.5, 0.0)).norm() < 1e-14);
        assert!((radial_limit(&g, 0.99).unwrap() - 0.505).abs() < 1e-12);
        let probes: Vec<f64> = [0.9, 0.99, 0.999].iter().map(|&r| radial_limit(&g, r).unwrap()).collect();
        assert!(probes.windows(2).all(|w| (w[1] - 0.5).abs() < (w[0] - 0.5).abs()));
        assert!(matches!(gf_evaluate(&g, 1, 1, c(1.0, 0.0)), Err(Error::SingularPoint)));
    }

    #[test]
    fn gf_identity_holds_across_states() {
        let z = chain(ReturnLaw::zeta(1.0, 0.0), 2000);
        for &w in &[c(0.5, 0.0), c(-0.3, 0.4), c(0.0, 1.0), c(-1.0, 0.0)] {
            for i in 1..=6 {
                for j in 1..=6 {
                    let v = gf_evaluate(&z, i, j, w).unwrap();
                    assert!(v.identity_gap < 1e-12, "{i} {j} {w}: {}", v.identity_gap);
                }
            }
        }
        // F_11 = F(z) and F_ij from the first-passage series agree.
        let w = c(0.3, 0.5);
        for (i, j) in [(1, 1), (2, 2), (1, 4), (5, 2)] {
            let law = z.first_passage(i, j, 2000, 1.0).unwrap();
            let series = law.series.evaluate(w).unwrap();
            assert!((series - gf_evaluate(&z, i, j, w).unwrap().f_ij).norm() < 1e-12);
        }
    }

    #[test]
    fn disk_scan_csv_header() {
        let g = chain(ReturnLaw::geometric(0.5), 50);
        let probe = eigen_from_gf(&g, c(0.5, 0.0), 50).unwrap();
        let mut buf = Vec::new();
        write_disk_scan_csv(&[probe], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("re_lambda,im_lambda,residual,l1_partial_norm\n0.5,0,"));
    }
}
