use renewal_core::chain::{RenewalChain, ReturnLaw};
use renewal_core::dynsys::{entrance_tail, entrance_tail_exact, mc_correlation, IntermittentMap, McConfig, Sampler};
use renewal_core::evolve::{correlation_curve, renewal_values, Observable, SignedDistribution};
use renewal_core::spectral::radial_limit;

#[test]
fn sampled_correlations_track_exact_evolution() {
    let chain = RenewalChain::build(ReturnLaw::zeta(1.0, 0.0), 100_000).unwrap();
    let map = IntermittentMap::build(&chain).unwrap();
    let u = Observable::centered_indicator(&chain, 1);
    let lags = [1u64, 5, 20];
    let nu = SignedDistribution::tilted_by(&chain, &u).unwrap();
    let exact = correlation_curve(&chain, &nu, &u, &lags).unwrap();
    let centering = u.pair_with_pi(&chain).powi(2);
    let cfg = McConfig {
        orbit_length: 2_000_000,
        seed: 41,
        ..McConfig::default()
    };
    for sampler in [Sampler::FloatOrbit, Sampler::ChainSampled] {
        let mc = mc_correlation(&map, &u, &u, &lags, &cfg, sampler).unwrap();
        for (k, e) in mc.estimates.iter().enumerate() {
            let want = exact.values[k] - centering;
            assert!(e.within(want, 4.0), "{sampler:?} n = {}: {e:?} vs {want}", lags[k]);
        }
    }
}

#[test]
fn covariance_of_first_state_is_renewal_excess() {
    // Cov(1_{A1}∘fⁿ, 1_{A1}) = π_1 (e_n - π_1)
    let chain = RenewalChain::build(ReturnLaw::zeta(1.0, 0.0), 4000).unwrap();
    let u = Observable::centered_indicator(&chain, 1);
    let nu = SignedDistribution::tilted_by(&chain, &u).unwrap();
    let lags = [1u64, 10, 100, 1000];
    let exact = correlation_curve(&chain, &nu, &u, &lags).unwrap();
    let e = renewal_values(&chain, 1000);
    let pi1 = chain.pi1();
    for (k, &n) in lags.iter().enumerate() {
        let cov = exact.values[k] - u.pair_with_pi(&chain).powi(2);
        let want = pi1 * (e[n as usize] - pi1);
        assert!((cov - want).abs() < 1e-12, "n = {n}: {cov} vs {want}");
    }
}

#[test]
fn entrance_survival_agrees_with_chain_formula() {
    let chain = RenewalChain::build(ReturnLaw::finite(vec![0.2, 0.3, 0.5]), 10).unwrap();
    let map = IntermittentMap::build(&chain).unwrap();
    let curve = entrance_tail(&map, map.breakpoints()[1], 6, 200_000, 9).unwrap();
    for n in 1..=6u64 {
        let e = curve.at(n).unwrap();
        let want = entrance_tail_exact(&chain, n);
        assert!(e.within(want, 4.0) || (want == 0.0 && e.mean == 0.0), "n = {n}: {e:?} vs {want}");
    }
}

#[test]
fn abel_limit_of_renewal_function_is_pi1() {
    let chain = RenewalChain::build(ReturnLaw::zeta(2.0, 0.0), 100_000).unwrap();
    let r = radial_limit(&chain, 0.9999).unwrap();
    assert!((r - chain.pi1()).abs() < 1e-3, "{r} vs {}", chain.pi1());
}
