//! Statistical checks against closed-form oracles.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use sumcal::dfi::draw_synthetic;
use sumcal::gsa::{mc_sobol_total, total_sobol};
use sumcal::likelihood::FnDensity;
use sumcal::mcmc::{postprocess, run_chain, warm_start, McmcSettings};
use sumcal::pce::{fit_surrogate, FitOptions};
use sumcal::*;

fn ishigami(x: &[f64]) -> f64 {
    let (a, b) = (7.0, 0.1);
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

/// Analytic total-effect indices of the Ishigami function on [-pi, pi]^3.
fn ishigami_totals() -> [f64; 3] {
    let (a, b) = (7.0, 0.1);
    let v1 = 0.5 * (1.0 + b * PI.powi(4) / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = b * b * PI.powi(8) * (1.0 / 18.0 - 1.0 / 50.0);
    let total = v1 + v2 + v13;
    [(v1 + v13) / total, v2 / total, v13 / total]
}

#[test]
fn jansen_estimator_matches_ishigami_totals() {
    let mc = mc_sobol_total(|xi: &[f64]| ishigami(&[PI * xi[0], PI * xi[1], PI * xi[2]]), 3, 100_000, 3).unwrap();
    for (m, e) in mc.iter().zip(ishigami_totals()) {
        assert!((m - e).abs() <= 0.03, "mc {mc:?} vs exact {:?}", ishigami_totals());
    }
}

#[test]
fn jansen_estimator_on_additive_models() {
    let single = mc_sobol_total(|x: &[f64]| x[0], 2, 100_000, 1).unwrap();
    assert!((single[0] - 1.0).abs() <= 0.02 && single[1].abs() <= 0.02, "{single:?}");
    let sym = mc_sobol_total(|x: &[f64]| x[0] + x[1], 2, 100_000, 2).unwrap();
    assert!(sym.iter().all(|s| (s - 0.5).abs() <= 0.02), "{sym:?}");
}

#[test]
fn pce_of_ishigami_recovers_total_indices() {
    let space = Arc::new(ParameterSpace::from_bounds(&["x1", "x2", "x3"], &[(-PI, PI); 3]).unwrap());
    let inputs = sumcal::testmodels::uniform_design(&space, 1500, 12);
    let outputs: Vec<f64> = inputs.iter_rows().map(ishigami).collect();
    let fit = fit_surrogate(space, &inputs, &outputs, &FitOptions::order(12)).unwrap();
    let s = total_sobol(&fit.surrogate).unwrap();
    for (a, e) in s.iter().zip(ishigami_totals()) {
        assert!((a - e).abs() <= 0.02, "pce {s:?} vs exact {:?}", ishigami_totals());
    }
}

fn standard_normal() -> FnDensity<impl Fn(&[f64]) -> f64 + Send + Sync> {
    FnDensity::new(1, |x: &[f64]| -0.5 * x[0] * x[0])
}

#[test]
fn retained_samples_match_target_cdf() {
    let settings = McmcSettings {
        steps: 1_010_000,
        ..McmcSettings::default()
    };
    let chain = run_chain(&standard_normal(), &[0.0], &[1.0], &settings, 77).unwrap();
    let mut x = postprocess(&chain, 10_000, 10).unwrap().into_vec();
    assert_eq!(x.len(), 100_000);
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let cdf = Normal::new(0.0, 1.0).unwrap();
    let ks = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf.cdf(v);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    assert!(ks <= 0.01, "KS statistic {ks}");
}

#[test]
fn adaptive_acceptance_rate_in_range() {
    for dim in [2usize, 10, 30] {
        // correlated Gaussian with anisotropic scales
        let scales: Vec<f64> = (0..dim).map(|j| 0.1 + j as f64 / dim as f64).collect();
        let sc = scales.clone();
        let target = FnDensity::new(dim, move |x: &[f64]| {
            let mut acc = 0.0;
            for j in 0..x.len() {
                let r = (x[j] - if j > 0 { 0.6 * x[j - 1] } else { 0.0 }) / sc[j];
                acc -= 0.5 * r * r;
            }
            acc
        });
        let settings = McmcSettings {
            steps: 30_000,
            ..McmcSettings::default()
        };
        let chain = run_chain(&target, &vec![0.0; dim], &vec![1.0; dim], &settings, dim as u64).unwrap();
        let rate = chain.adaptive_acceptance_rate().unwrap();
        assert!((0.1..=0.5).contains(&rate), "dim {dim}: adaptive acceptance {rate}");
    }
}

#[test]
fn synthetic_replicates_follow_requested_moments() {
    let y = vec![1.0, -2.0, 30.0];
    let s = vec![0.5, 1.0, 4.0];
    let set = DataSummarySet::new(1, "moments", vec!["a".into(), "b".into(), "c".into()], vec![vec![1.0], vec![2.0], vec![3.0]], y.clone(), s.clone()).unwrap();
    let k = 100_000;
    let z = draw_synthetic(&set, 1.0, k, 5).unwrap();
    for n in 0..3 {
        let col = z.draws().column(n);
        let mean = col.iter().sum::<f64>() / k as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        assert!((mean - y[n]).abs() <= 3.0 * s[n] / (k as f64).sqrt(), "station {n}: mean {mean}");
        assert!((var / (s[n] * s[n]) - 1.0).abs() <= 0.05, "station {n}: variance {var}");
    }
}

#[test]
fn maximum_likelihood_recovers_noisy_linear_model() {
    let temps: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
    let truth = [1.5, -0.7];
    let sigma = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let q: Vec<f64> = temps
        .iter()
        .map(|t| truth[0] + truth[1] * t + sigma * { let e: f64 = StandardNormal.sample(&mut rng); e })
        .collect();
    let t2 = temps.clone();
    let target = FnDensity::new(2, move |nu: &[f64]| {
        let f: Vec<f64> = t2.iter().map(|t| nu[0] + nu[1] * t).collect();
        gaussian_loglik(&q, &f, &vec![sigma; f.len()]).unwrap()
    });
    let ws = warm_start(&target, &[0.0, 0.0], &[1.0, 1.0], 500).unwrap();
    // standard errors of the intercept and slope for 40 evenly spaced points
    let se = [0.0155, 0.0267];
    for j in 0..2 {
        assert!((ws.point[j] - truth[j]).abs() <= 3.0 * se[j], "{:?}", ws.point);
    }
}
