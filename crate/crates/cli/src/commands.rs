//! Subcommand runners. Each writes its CSV files and returns the `results`
//! object for `summary.json`.

use anyhow::Context;
use renewal_core::chain::RenewalChain;
use renewal_core::dynsys::{
    entrance_tail, invariant_density, kac_check, markov_frequency_check, mc_correlation, pf_check, IntermittentMap,
    McCurve, KAC_BINS,
};
use renewal_core::evolve::{
    correlation_curve, distance_curve, renewal_excess_ratio, null_recurrent_ratio, rate_fit, semilog_fit, correlation_constant,
    RateCurve, RateFit,
};
use renewal_core::series::convpower_probe;
use renewal_core::spectral::{eigen_from_gf, factorization_residual, gf_evaluate, partial_norm_scan};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FitKind};
use crate::output::{num, write_rows, OutputDir};

/// A computed quantity missed its tolerance (exit code 4).
#[derive(Debug)]
pub struct ToleranceError(pub String);

impl std::fmt::Display for ToleranceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tolerance not met: {}", self.0)
    }
}

impl std::error::Error for ToleranceError {}

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub chain: &'a RenewalChain,
    pub out: &'a OutputDir,
}

fn fit_json(fit: &RateFit) -> Value {
    json!({
        "exponent": num(fit.exponent),
        "intercept": num(fit.intercept),
        "window": [fit.window.0, fit.window.1],
        "rms_residual": num(fit.rms_residual),
    })
}

fn maybe_fit(cfg: &ExperimentConfig, curve: &RateCurve) -> anyhow::Result<Value> {
    let Some([lo, hi]) = cfg.window else {
        return Ok(Value::Null);
    };
    let fit = match cfg.fit.unwrap_or(FitKind::Power) {
        FitKind::Power => rate_fit(curve, (lo, hi))?,
        FitKind::Semilog => semilog_fit(curve, (lo, hi))?,
    };
    Ok(fit_json(&fit))
}

fn check_tolerance(what: &str, value: f64, tolerance: Option<f64>) -> anyhow::Result<bool> {
    match tolerance {
        Some(t) if !(value <= t) => Err(ToleranceError(format!("{what} = {value:e} exceeds {t:e}")).into()),
        _ => Ok(true),
    }
}

fn write_curve(ctx: &Ctx, name: &str, curve: &RateCurve) -> anyhow::Result<()> {
    ctx.out.csv(name, |buf| curve.write_csv(buf))?;
    Ok(())
}

fn write_mc_curve(ctx: &Ctx, name: &str, curve: &McCurve) -> anyhow::Result<()> {
    ctx.out.csv(name, |buf| curve.write_csv(buf))?;
    Ok(())
}

/// Finishes a rate command: CSV, optional fit, tail-bound tolerance.
fn finish_rate(ctx: &Ctx, name: &str, curve: &RateCurve, mut extra: Value) -> anyhow::Result<Value> {
    write_curve(ctx, name, curve)?;
    let max_bound = curve.tail_bound.iter().cloned().fold(0.0, f64::max);
    extra["points"] = json!(curve.len());
    extra["fit"] = maybe_fit(ctx.cfg, curve)?;
    extra["max_tail_bound"] = num(max_bound);
    ctx.out.summary(extra.clone())?;
    check_tolerance("tail bound", max_bound, ctx.cfg.tolerance)?;
    Ok(extra)
}

pub fn chain_info(ctx: &Ctx) -> anyhow::Result<Value> {
    let c = ctx.chain;
    let n = c.truncation();
    ctx.out.csv("chain", |buf| {
        write_rows(
            buf,
            &["n", "p", "d", "pi"],
            (1..=n).map(|k| {
                vec![
                    k.to_string(),
                    format!("{:e}", c.p(k)),
                    format!("{:e}", c.d(k)),
                    format!("{:e}", c.pi(k)),
                ]
            }),
        );
        Ok(())
    })?;
    let degree = c.ergodic_degree();
    let predicted = if c.is_positive_recurrent() && degree.is_finite() && degree > 0.0 {
        num(c.pi1() * c.pi1() / (degree * (degree + 1.0)))
    } else {
        Value::Null
    };
    let results = json!({
        "classification": format!("{:?}", c.classification()),
        "truncation": n,
        "m1": num(c.m1()),
        "pi1": num(c.pi1()),
        "ergodic_degree": num(degree),
        "log_power": num(c.log_power()),
        "tail_constant": c.slowly_varying(std::f64::consts::E - 1.0).map(num),
        "correlation_constant_delta1_indicator1": predicted,
    });
    ctx.out.summary(results.clone())?;
    Ok(results)
}

pub fn rates_distance(ctx: &Ctx) -> anyhow::Result<Value> {
    let nu = ctx.cfg.initial(ctx.chain)?;
    let grid = ctx.cfg.n_grid(Some((1, 1000)))?;
    let curve = distance_curve(ctx.chain, &nu, &grid)?;
    finish_rate(ctx, "distance", &curve, json!({}))
}

pub fn rates_correlation(ctx: &Ctx) -> anyhow::Result<Value> {
    let nu = ctx.cfg.initial(ctx.chain)?;
    let u = ctx.cfg.observable(ctx.chain, false)?;
    let grid = ctx.cfg.n_grid(Some((1, 1000)))?;
    let curve = correlation_curve(ctx.chain, &nu, &u, &grid)?;
    finish_rate(ctx, "correlation", &curve, json!({}))
}

pub fn rates_renewal_excess(ctx: &Ctx) -> anyhow::Result<Value> {
    let grid = ctx.cfg.n_grid(Some((10, ctx.chain.truncation() as u64)))?;
    let curve = renewal_excess_ratio(ctx.chain, &grid)?;
    let last = curve.values.last().copied().unwrap_or(f64::NAN);
    finish_rate(ctx, "renewal_excess_ratio", &curve, json!({ "last_ratio": num(last) }))
}

pub fn rates_constant(ctx: &Ctx) -> anyhow::Result<Value> {
    let nu = ctx.cfg.initial(ctx.chain)?;
    let u = ctx.cfg.observable(ctx.chain, false)?;
    let grid = ctx.cfg.n_grid(Some((10, 1000)))?;
    let check = correlation_constant(ctx.chain, &nu, &u, &grid)?;
    let last = check.curve.values.last().copied().unwrap_or(f64::NAN);
    finish_rate(
        ctx,
        "constant",
        &check.curve,
        json!({
            "predicted": num(check.predicted),
            "last_scaled": num(last),
            "relative_gap": num(last / check.predicted - 1.0),
        }),
    )
}

pub fn rates_null(ctx: &Ctx) -> anyhow::Result<Value> {
    let nu = ctx.cfg.initial(ctx.chain)?;
    let u = ctx.cfg.observable(ctx.chain, false)?;
    let grid = ctx.cfg.n_grid(Some((1, 1000)))?;
    let curve = null_recurrent_ratio(ctx.chain, &nu, &u, &grid)?;
    let last = curve.values.last().copied().unwrap_or(f64::NAN);
    finish_rate(ctx, "null_ratio", &curve, json!({ "last_ratio": num(last) }))
}

pub fn spectral_factorize(ctx: &Ctx) -> anyhow::Result<Value> {
    let dim = ctx.cfg.dim.unwrap_or(200);
    let zs = ctx.cfg.z_points()?;
    let residuals = zs
        .iter()
        .map(|&z| factorization_residual(ctx.chain, z, dim))
        .collect::<renewal_core::Result<Vec<f64>>>()?;
    ctx.out.csv("factorization", |buf| {
        write_rows(
            buf,
            &["re_z", "im_z", "residual"],
            zs.iter()
                .zip(&residuals)
                .map(|(z, r)| vec![format!("{:e}", z.re), format!("{:e}", z.im), format!("{r:e}")]),
        );
        Ok(())
    })?;
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let tol = ctx.cfg.tolerance.unwrap_or(1e-12);
    let results = json!({ "dim": dim, "max_residual": num(worst), "tolerance": tol, "pass": worst <= tol });
    ctx.out.summary(results.clone())?;
    check_tolerance("factorization residual", worst, Some(tol))?;
    Ok(results)
}

pub fn spectral_eigen(ctx: &Ctx) -> anyhow::Result<Value> {
    let [re, im] = ctx.cfg.require(ctx.cfg.lambda, "lambda")?;
    let lambda = num_complex::Complex64::new(re, im);
    let dim = ctx.cfg.dim.unwrap_or(400);
    let probe = eigen_from_gf(ctx.chain, lambda, dim)?;
    ctx.out.csv("eigenvector", |buf| {
        write_rows(
            buf,
            &["n", "re_x", "im_x"],
            probe
                .vector
                .iter()
                .enumerate()
                .map(|(k, x)| vec![(k + 1).to_string(), format!("{:e}", x.re), format!("{:e}", x.im)]),
        );
        Ok(())
    })?;
    let scan = match &ctx.cfg.dims {
        Some(dims) => {
            let rows = partial_norm_scan(ctx.chain, lambda, dims)?;
            ctx.out.csv("partial_norms", |buf| {
                write_rows(
                    buf,
                    &["dim", "l1_partial_norm"],
                    rows.iter().map(|(d, v)| vec![d.to_string(), format!("{v:e}")]),
                );
                Ok(())
            })?;
            json!(rows.iter().map(|(d, v)| json!([d, num(*v)])).collect::<Vec<_>>())
        }
        None => Value::Null,
    };
    let tol = ctx.cfg.tolerance.unwrap_or(1e-10);
    let results = json!({
        "lambda": [re, im],
        "dim": dim,
        "residual": num(probe.residual),
        "edge_residual": num(probe.edge_residual),
        "l1_partial_norm": num(probe.l1_partial_norm),
        "partial_norms": scan,
        "tolerance": tol,
        "pass": probe.residual <= tol,
    });
    ctx.out.summary(results.clone())?;
    check_tolerance("eigenvector residual", probe.residual, Some(tol))?;
    Ok(results)
}

pub fn spectral_gf(ctx: &Ctx) -> anyhow::Result<Value> {
    let i = ctx.cfg.i.unwrap_or(1);
    let j = ctx.cfg.j.unwrap_or(1);
    let zs = ctx.cfg.z_points()?;
    let values = zs
        .iter()
        .map(|&z| gf_evaluate(ctx.chain, i, j, z))
        .collect::<renewal_core::Result<Vec<_>>>()?;
    ctx.out.csv("gf", |buf| {
        write_rows(
            buf,
            &["re_z", "im_z", "re_p", "im_p", "re_f", "im_f", "identity_gap", "tail_bound"],
            zs.iter().zip(&values).map(|(z, v)| {
                [z.re, z.im, v.p_ij.re, v.p_ij.im, v.f_ij.re, v.f_ij.im, v.identity_gap, v.tail_bound]
                    .iter()
                    .map(|x| format!("{x:e}"))
                    .collect()
            }),
        );
        Ok(())
    })?;
    let worst = values.iter().map(|v| v.identity_gap).fold(0.0, f64::max);
    let results = json!({ "i": i, "j": j, "points": zs.len(), "max_identity_gap": num(worst) });
    ctx.out.summary(results.clone())?;
    check_tolerance("identity gap", worst, ctx.cfg.tolerance)?;
    Ok(results)
}

fn map_of<'c>(chain: &'c RenewalChain) -> anyhow::Result<IntermittentMap<'c>> {
    IntermittentMap::build(chain).context("building the interval map")
}

pub fn map_simulate(ctx: &Ctx) -> anyhow::Result<Value> {
    let map = map_of(ctx.chain)?;
    let x0 = ctx.cfg.require(ctx.cfg.x0, "x0")?;
    let steps = ctx.cfg.steps.unwrap_or(100);
    let symbols = map.orbit_symbols(x0, steps)?;
    ctx.out.csv("orbit", |buf| {
        write_rows(
            buf,
            &["t", "symbol"],
            symbols.iter().enumerate().map(|(t, s)| vec![t.to_string(), s.to_string()]),
        );
        Ok(())
    })?;
    let results = json!({
        "x0": x0,
        "steps": steps,
        "symbol_cap": map.symbol_cap(),
        "max_symbol": symbols.iter().max(),
    });
    ctx.out.summary(results.clone())?;
    Ok(results)
}

pub fn map_correlate(ctx: &Ctx) -> anyhow::Result<Value> {
    let map = map_of(ctx.chain)?;
    let u = ctx.cfg.observable(ctx.chain, true)?;
    let v = ctx.cfg.observable_v(ctx.chain)?;
    let lags = ctx.cfg.n_grid(Some((1, 100)))?;
    let mc = ctx.cfg.mc();
    let curve = mc_correlation(&map, &u, &v, &lags, &mc, ctx.cfg.sampler())?;
    write_mc_curve(ctx, "mc_correlation", &curve)?;
    let fit = maybe_fit(ctx.cfg, &curve.to_rate_curve()?)?;
    let results = json!({
        "sampler": format!("{:?}", ctx.cfg.sampler()),
        "orbit_length": mc.orbit_length,
        "burn_in": mc.burn_in,
        "streams": mc.streams,
        "censored": curve.estimates.first().map(|e| e.censored),
        "fit": fit,
    });
    ctx.out.summary(results.clone())?;
    Ok(results)
}

pub fn map_entrance(ctx: &Ctx) -> anyhow::Result<Value> {
    let map = map_of(ctx.chain)?;
    let a = ctx.cfg.a.unwrap_or(map.breakpoints()[1]);
    let n_max = ctx.cfg.n_max.unwrap_or(1000);
    let samples = ctx.cfg.samples.unwrap_or(1_000_000);
    let seed = ctx.cfg.seed.unwrap_or(0);
    let curve = entrance_tail(&map, a, n_max, samples, seed)?;
    write_mc_curve(ctx, "entrance_tail", &curve)?;
    let fit = maybe_fit(ctx.cfg, &curve.to_rate_curve()?)?;
    let results = json!({
        "a": a,
        "n_max": n_max,
        "samples": samples,
        "censored": curve.estimates.first().map(|e| e.censored),
        "fit": fit,
    });
    ctx.out.summary(results.clone())?;
    Ok(results)
}

pub fn map_kac(ctx: &Ctx) -> anyhow::Result<Value> {
    let map = map_of(ctx.chain)?;
    let mc = ctx.cfg.mc();
    let kac = kac_check(&map, &mc, ctx.cfg.sampler())?;
    ctx.out.csv("return_histogram", |buf| {
        write_rows(
            buf,
            &["r", "count", "expected_probability"],
            kac.histogram.iter().zip(&kac.expected).enumerate().map(|(k, (c, p))| {
                let label = if k < KAC_BINS { (k + 1).to_string() } else { format!(">{KAC_BINS}") };
                vec![label, c.to_string(), format!("{p:e}")]
            }),
        );
        Ok(())
    })?;
    let results = json!({
        "rho_e": num(kac.rho_e.mean),
        "rho_e_stderr": num(kac.rho_e.stderr),
        "mean_return": num(kac.mean_return.mean),
        "mean_return_stderr": num(kac.mean_return.stderr),
        "product": num(kac.product),
        "exact_pi1": num(ctx.chain.pi1()),
        "chi_square": num(kac.chi_square),
        "degrees_of_freedom": kac.degrees_of_freedom,
        "chi_square_quantile_0999": num(kac.chi_square_quantile),
        "histogram_consistent": kac.histogram_consistent(),
        "censored": kac.rho_e.censored,
    });
    ctx.out.summary(results.clone())?;
    if let Some(t) = ctx.cfg.tolerance {
        check_tolerance("|product - 1|", (kac.product - 1.0).abs(), Some(t))?;
    }
    Ok(results)
}

pub fn map_frequency(ctx: &Ctx) -> anyhow::Result<Value> {
    let map = map_of(ctx.chain)?;
    let mc = ctx.cfg.mc();
    let i_max = ctx.cfg.i_max.unwrap_or(10);
    let table = markov_frequency_check(&map, &mc, ctx.cfg.sampler(), i_max)?;
    ctx.out.csv("row1_frequencies", |buf| table.write_csv(buf))?;
    ctx.out.csv("occupation", |buf| {
        write_rows(
            buf,
            &["i", "mean", "stderr", "exact"],
            table
                .occupation
                .iter()
                .zip(&table.exact_pi)
                .enumerate()
                .map(|(k, (e, pi))| {
                    vec![(k + 1).to_string(), format!("{:e}", e.mean), format!("{:e}", e.stderr), format!("{pi:e}")]
                }),
        );
        Ok(())
    })?;
    let density = invariant_density(ctx.chain, i_max)?;
    let pf = pf_check(ctx.chain, ctx.chain.truncation().min(500))?;
    let results = json!({
        "departures_from_1": table.departures_from_1,
        "row1_within_3_stderr": table.row1_within(3.0),
        "occupation_within_3_stderr": table.occupation_within(3.0),
        "descent_frequencies": table.descent,
        "invariant_density": density.iter().map(|&h| num(h)).collect::<Vec<_>>(),
        "pf_density_residual": num(pf.density),
        "pf_adjoint_residual": num(pf.adjoint),
    });
    ctx.out.summary(results.clone())?;
    Ok(results)
}

pub fn series_probe(ctx: &Ctx) -> anyhow::Result<Value> {
    let p = ctx.chain.p_series();
    ctx.out.csv("return_law", |buf| p.write_csv(buf))?;
    let kaluza = p.kaluza_check()?;
    let (min_mod, at) = ctx.chain.d_series().min_modulus_scan(64, 256);
    let conv = match ctx.cfg.gamma {
        Some(gamma) => {
            let probe = convpower_probe(gamma, ctx.cfg.n.unwrap_or(1000))?;
            json!({
                "gamma": gamma,
                "value": num(probe.value),
                "regime": format!("{:?}", probe.regime),
                "normalized": num(probe.normalized),
            })
        }
        None => Value::Null,
    };
    let results = json!({
        "kaluza": kaluza,
        "tail_series_min_modulus": num(min_mod),
        "tail_series_min_modulus_at": [at.re, at.im],
        "convolution_power": conv,
    });
    ctx.out.summary(results.clone())?;
    Ok(results)
}
