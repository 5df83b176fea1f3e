use mfc_core::control::{ControllerConfig, IpGains, PpiGains};
use mfc_core::plant::WearParams;
use mfc_core::sim::{run, Scenario};
use mfc_core::tuning::{
    minimize_bounded, monte_carlo, sample_params, tune, Comparison, FreeParam, MonteCarloSpec, SimplexOptions,
    TuneSpec,
};
use proptest::prelude::*;

fn short_scenario(controller: ControllerConfig) -> Scenario {
    let mut sc = Scenario { controller, t_end: 2.0, ..Scenario::default() };
    sc.plant.wear = WearParams::SIGMA_1;
    sc
}

#[test]
fn sampled_moments_match_the_distribution() {
    let spec = MonteCarloSpec { n_draws: 10_000, seed: 20_241, ..MonteCarloSpec::default() };
    let draws = sample_params(&spec).unwrap();
    let n = draws.len() as f64;
    let f1_mean = draws.iter().map(|w| w.f1).sum::<f64>() / n;
    let d1_mean = draws.iter().map(|w| w.d1).sum::<f64>() / n;
    let d1_std = (draws.iter().map(|w| (w.d1 - d1_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // Three standard errors of the mean: 3 * 4 / sqrt(10000).
    assert!((f1_mean - 55.0).abs() < 0.12, "{f1_mean}");
    assert!((d1_std / 0.01 - 1.0).abs() < 0.15, "{d1_std}");
}

#[test]
fn swapping_the_pair_negates_every_delta() {
    let spec = MonteCarloSpec { n_draws: 6, seed: 9, ..MonteCarloSpec::default() };
    let a = ControllerConfig::ppi(PpiGains::default());
    let b = ControllerConfig::ipip(IpGains::default());
    let template = short_scenario(a);
    let forward = monte_carlo(&spec, &Comparison { template: template.clone(), a, b }).unwrap();
    let backward = monte_carlo(&spec, &Comparison { template, a: b, b: a }).unwrap();
    let negatives = forward.draws.iter().filter(|d| d.delta < 0.0).count();
    for (f, r) in forward.draws.iter().zip(&backward.draws) {
        assert_eq!(f.wear, r.wear);
        assert_eq!(f.delta.to_bits(), (-r.delta).to_bits());
    }
    assert_eq!(backward.fraction_positive, negatives as f64 / spec.n_draws as f64);
}

#[test]
fn identical_pair_gives_zero_delta() {
    let spec = MonteCarloSpec { n_draws: 1, seed: 3, ..MonteCarloSpec::default() };
    let a = ControllerConfig::ipip(IpGains::default());
    let res = monte_carlo(&spec, &Comparison { template: short_scenario(a), a, b: a }).unwrap();
    assert_eq!(res.draws[0].delta, 0.0);
    assert_eq!(res.fraction_positive, 0.0);
}

#[test]
fn runs_are_bit_reproducible() {
    let sc = short_scenario(ControllerConfig::ipip(IpGains::default()));
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.j.to_bits(), (a.itae + sc.w_u * a.iau).to_bits());
}

#[test]
fn tuning_stays_in_box_and_never_loses_to_the_start() {
    for controller in [ControllerConfig::ppi(PpiGains::default()), ControllerConfig::ipip(IpGains::default())] {
        let mut spec = TuneSpec::for_scenario(short_scenario(controller));
        spec.options.max_evals = 40;
        let res = tune(&spec).unwrap();
        assert!(res.best_j <= res.initial_j);
        assert!(res.log.len() <= spec.options.max_evals);
        let min_logged = res.log.iter().map(|r| r.j).fold(f64::INFINITY, f64::min);
        assert_eq!(res.best_j, min_logged);
        for rec in &res.log {
            for (x, p) in rec.params.iter().zip(&spec.free_params) {
                assert!(*x > p.lower && *x < p.upper, "{} = {x}", p.name);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simplex_respects_box_and_start(
        center in prop::collection::vec(-20.0f64..20.0, 1..5),
        start_frac in prop::collection::vec(0.05f64..0.95, 5),
        weight in 0.1f64..10.0,
    ) {
        let dim = center.len();
        let params: Vec<FreeParam> = (0..dim).map(|i| FreeParam::new(&format!("x{i}"), -10.0, 10.0)).collect();
        let x0: Vec<f64> = (0..dim).map(|i| -10.0 + 20.0 * start_frac[i]).collect();
        let f = |x: &[f64]| x.iter().zip(&center).map(|(a, c)| weight * (a - c).powi(2)).sum::<f64>();
        let f0 = f(&x0);
        let opts = SimplexOptions { max_evals: 150, ..SimplexOptions::default() };
        let m = minimize_bounded(f, &params, &x0, &opts).unwrap();
        prop_assert!(m.value <= f0);
        prop_assert!(m.log.len() <= 150);
        for e in &m.log {
            prop_assert!(e.x.iter().all(|v| *v > -10.0 && *v < 10.0));
        }
        let best = m.log.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(m.value, best);
    }

    #[test]
    fn draws_do_not_depend_on_sweep_length(seed in 0u64..1000, n in 1usize..40) {
        let short = sample_params(&MonteCarloSpec { n_draws: n, seed, ..MonteCarloSpec::default() }).unwrap();
        let long = sample_params(&MonteCarloSpec { n_draws: n + 7, seed, ..MonteCarloSpec::default() }).unwrap();
        prop_assert_eq!(&short[..], &long[..n]);
    }
}
