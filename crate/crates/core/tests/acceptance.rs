//! Acceptance criteria, one check per criterion. Runs without the test
//! harness so every PASS/FAIL line is printed; exits non-zero if any
//! criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumcal::dfi::{run_pipeline, Binding, Experiment, PipelineOutcome, SurrogatePredictor};
use sumcal::gsa::{mc_sobol_total, total_sobol};
use sumcal::likelihood::{CombinedLikelihood, FnPredictor, LogDensity};
use sumcal::mcmc::{postprocess, run_chain, McmcSettings};
use sumcal::pce::{
    fit_surrogate, gauss_legendre, legendre_normalized, relative_l2_error, total_order_index_set, FitOptions,
    MultiIndex,
};
use sumcal::testmodels::DemoSpec;
use sumcal::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sd_of(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn legendre_orthonormality() -> Outcome {
    let (x, w) = gauss_legendre(16);
    let mut worst: f64 = 0.0;
    for m in 0..=10 {
        for n in 0..=10 {
            let integral: f64 = x
                .iter()
                .zip(&w)
                .map(|(&x, &w)| 0.5 * w * legendre_normalized(m, x).unwrap() * legendre_normalized(n, x).unwrap())
                .sum();
            let target = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((integral - target).abs());
        }
    }
    check(worst <= 1e-10, format!("max |<phi_m, phi_n> - delta_mn| = {worst:.2e}"))
}

fn pce_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let names = ["a", "b", "c", "d", "e"];
    let bounds: Vec<(f64, f64)> = (0..5)
        .map(|_| {
            let lo = rng.random_range(-5.0..5.0);
            (lo, lo + rng.random_range(0.5..4.0))
        })
        .collect();
    let space = Arc::new(ParameterSpace::from_bounds(&names, &bounds).unwrap());
    let indices = total_order_index_set(5, 2).unwrap();
    let coefs: Vec<f64> = indices.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let truth = PceSurrogate::new(space.clone(), indices.clone(), coefs.clone()).unwrap();
    let mut data = Vec::new();
    for _ in 0..200 {
        for &(lo, hi) in &bounds {
            data.push(rng.random_range(lo..hi));
        }
    }
    let inputs = Matrix::from_vec(200, 5, data).unwrap();
    let outputs = truth.eval_rows(&inputs).unwrap();
    let fit = fit_surrogate(space, &inputs, &outputs, &FitOptions::order(2)).unwrap().surrogate;
    let coef_err = indices
        .iter()
        .zip(&coefs)
        .map(|(u, &c)| (fit.coefficient(u).unwrap_or(0.0) - c).abs())
        .fold(0.0, f64::max);
    let rel = relative_l2_error(&outputs, &fit.eval_rows(&inputs).unwrap()).unwrap();
    check(
        coef_err <= 1e-8 && rel <= 1e-8,
        format!("max coefficient error {coef_err:.2e}, relative l2 {rel:.2e}"),
    )
}

fn sobol_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let space = Arc::new(ParameterSpace::from_bounds(&["x", "y", "z"], &[(0.0, 1.0), (-2.0, 2.0), (10.0, 20.0)]).unwrap());
    let indices = total_order_index_set(3, 2).unwrap();
    let coefs: Vec<f64> = indices.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let surr = PceSurrogate::new(space.clone(), indices, coefs).unwrap();
    let exact = total_sobol(&surr).unwrap();
    let mc = mc_sobol_total(|xi: &[f64]| surr.eval(&space.from_reference(xi)).unwrap(), 3, 100_000, 99).unwrap();
    let worst = exact.iter().zip(&mc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let pair = Arc::new(ParameterSpace::from_bounds(&["p", "q"], &[(0.0, 1.0), (0.0, 1.0)]).unwrap());
    let interaction = PceSurrogate::new(pair, vec![MultiIndex::new(vec![1, 1])], vec![0.8]).unwrap();
    let sum: f64 = total_sobol(&interaction).unwrap().iter().sum();
    check(
        worst <= 0.03 && sum == 2.0,
        format!("max |PCE - MC| = {worst:.4}, interaction-only sum = {sum}"),
    )
}

fn conjugate_recovery() -> Outcome {
    let z = SyntheticDataCollection::from_draws(1, 1.0, 0, Matrix::from_rows(&[[1.0]]).unwrap(), vec![1.0]).unwrap();
    let identity: Arc<dyn Predictor<f64>> = Arc::new(FnPredictor::new(1, 1, |nu: &[f64], o: &mut [f64]| o[0] = nu[0]));
    let lik = CombinedLikelihood::new(vec![z], vec![identity], None).unwrap();
    let post = log_posterior(GaussianPrior::new(vec![0.0], vec![1.0]).unwrap(), lik).unwrap();
    let settings = McmcSettings {
        steps: 200_000,
        ..McmcSettings::default()
    };
    let chain = run_chain(&post, &[0.0], &[1.0], &settings, 4).unwrap();
    let x = postprocess(&chain, 20_000, 5).unwrap().into_vec();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = sd_of(&x).powi(2);
    check(
        (mean - 0.5).abs() <= 0.02 && (var - 0.5).abs() <= 0.05,
        format!("mean {mean:.4}, variance {var:.4}, {} samples", x.len()),
    )
}

fn weights_equivalence() -> Outcome {
    let w: Vec<f64> = default_weights(&[10, 8, 16, 32, 104]).unwrap();
    let sum_err = (w.iter().sum::<f64>() - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let counts = [10usize, 8, 16, 32, 104];
    let mut collections = Vec::new();
    let mut predictors: Vec<Arc<dyn Predictor<f64>>> = Vec::new();
    for (d, &n) in counts.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        collections.push(
            SyntheticDataCollection::from_draws(d as u32 + 1, 0.5, 0, Matrix::from_rows(&rows).unwrap(), s).unwrap(),
        );
        let slope = d as f64 * 0.1;
        predictors.push(Arc::new(FnPredictor::new(2, n, move |nu: &[f64], o: &mut [f64]| {
            for (i, v) in o.iter_mut().enumerate() {
                *v = nu[0] + slope * nu[1] * i as f64 / 100.0;
            }
        })));
    }
    let plain = CombinedLikelihood::new(collections.clone(), predictors.clone(), None).unwrap();
    let uniform = CombinedLikelihood::new(collections, predictors, Some(vec![0.2; 5])).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let nu = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let a = plain.log_density(&nu).unwrap();
        let b = uniform.log_density(&nu).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    check(
        sum_err <= 1e-12 && worst <= 1e-12,
        format!("|sum alpha - 1| = {sum_err:.1e}, weighted vs unweighted {worst:.1e}, alpha = {w:.4?}"),
    )
}

fn interpolation_linearity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let space = Arc::new(ParameterSpace::from_bounds(&["u", "v", "w"], &[(0.0, 1.0), (1.0, 3.0), (-1.0, 0.0)]).unwrap());
    let all = total_order_index_set(3, 3).unwrap();
    let coords: Vec<Vec<f64>> = (0..6).map(|i| vec![1000.0 + 150.0 * i as f64]).collect();
    let surrogates: Vec<PceSurrogate<f64>> = (0..6)
        .map(|_| {
            // random sparsity so neighbouring index sets differ
            let idx: Vec<MultiIndex> = all
                .iter()
                .filter(|u| u.is_constant() || rng.random_bool(0.6))
                .cloned()
                .collect();
            let c: Vec<f64> = idx.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            PceSurrogate::new(space.clone(), idx, c).unwrap()
        })
        .collect();
    let family = SurrogateFamily::new(coords, surrogates).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random_range(1000.0..1750.0);
        let nu = [rng.random_range(0.0..1.0), rng.random_range(1.0..3.0), rng.random_range(-1.0..0.0)];
        let via_coefficients = family.interpolate(t).unwrap().eval(&nu).unwrap();
        let direct = family.eval_interpolated(t, &nu).unwrap();
        worst = worst.max((via_coefficients - direct).abs() / direct.abs().max(1.0));
    }
    check(worst <= 1e-13, format!("max relative difference {worst:.1e} over 100 draws"))
}

fn demo_pipeline(spec: &DemoSpec) -> (DataSummarySet<f64>, PipelineOutcome<f64>) {
    let (family, _) = spec.fit().unwrap();
    let set = spec.problem().unwrap().sets.remove(0);
    let predictor = SurrogatePredictor::for_set(&family, &set, Binding::identity(2)).unwrap();
    let experiment = Experiment::new(set.clone(), Arc::new(predictor), spec.config.data_space).unwrap();
    let prior = default_prior(&spec.space());
    (set, run_pipeline(&[experiment], &prior, &spec.config).unwrap())
}

fn ground_truth_recovery() -> Outcome {
    let spec = DemoSpec::default();
    assert_eq!(spec.temperatures.len(), 8);
    assert_eq!(spec.noise_fraction, 0.05);
    assert_eq!(spec.config.synthetic_count, 20);
    assert_eq!(spec.config.mcmc_steps, 50_000);
    assert_eq!(spec.config.beta_grid.len(), 10);
    let (set, out) = demo_pipeline(&spec);
    let rho = out.reports[0].selected_rho();
    let band = consistency_distance(set.uncertainties(), &out.joint.summaries[0].three_sigma, DistanceKind::RelativeL2)
        .unwrap();
    let z: Vec<f64> = (0..2)
        .map(|j| (out.joint.map[j] - spec.truth[j]) / sd_of(&out.joint.samples.column(j)))
        .collect();
    check(
        rho <= 0.2 && band <= 0.25 && z.iter().all(|z| z.abs() <= 3.0),
        format!(
            "beta {:.3}, rho {rho:.4}, 3-sigma band vs s {band:.4}, MAP offsets {:.2?} posterior sd",
            out.reports[0].selected_beta(),
            z
        ),
    )
}

fn production_settings_dry_run() -> Outcome {
    let full = CalibrationConfig::production();
    let documented = full.mcmc_steps == 1_000_000
        && full.synthetic_count == 100
        && full.jump_size == 0.5
        && full.burn_in == 100_000
        && full.subsample == 5
        && full.beta_grid.len() == 20;
    let reloaded = CalibrationConfig::from_toml_str(&full.to_toml_string()).unwrap();
    let valid = full.validate().is_ok() && reloaded == full;
    // 30 calibrated parameters at full length stay under the chain cap
    let fits_cap = full.mcmc_steps * 30 <= full.max_chain_entries;

    let spec = DemoSpec::default();
    let smoke = DemoSpec {
        config: CalibrationConfig {
            seed: spec.config.seed,
            pce_order: spec.config.pce_order,
            ..full.scaled_steps(1000)
        },
        ..spec
    };
    let (_, out) = demo_pipeline(&smoke);
    let launched = out.joint.chain.len() == 1000 && out.joint.samples.rows() == 180;
    check(
        documented && valid && fits_cap && launched,
        format!(
            "production config valid, smoke run: {} steps, {} retained, {} beta candidates",
            out.joint.chain.len(),
            out.joint.samples.rows(),
            out.reports[0].candidates.len()
        ),
    )
}

fn artifacts(set: &DataSummarySet<f64>, out: &PipelineOutcome<f64>) -> Vec<Vec<u8>> {
    let mut files = Vec::new();
    let mut chain = Vec::new();
    out.joint.chain.write_csv(&["Q", "log10w"], &mut chain).unwrap();
    files.push(chain);
    files.push(format!("{:e},{:e},{:e}", out.joint.map[0], out.joint.map[1], out.joint.map_logpost).into_bytes());
    for r in &out.reports {
        let mut b = Vec::new();
        r.write_csv(&mut b).unwrap();
        r.write_station_csv(set, &mut b).unwrap();
        files.push(b);
    }
    files
}

fn determinism() -> Outcome {
    let spec = DemoSpec::default();
    let (set_a, a) = demo_pipeline(&spec);
    let (set_b, b) = demo_pipeline(&spec);
    let fa = artifacts(&set_a, &a);
    let fb = artifacts(&set_b, &b);
    let identical = fa == fb;
    check(identical, format!("{} artifacts compared, identical = {identical}", fa.len()))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("Legendre orthonormality", Duration::from_secs(1), legendre_orthonormality),
        ("PCE exactness", Duration::from_secs(5), pce_exactness),
        ("Sobol oracle equivalence", Duration::from_secs(30), sobol_oracle),
        ("conjugate posterior recovery", Duration::from_secs(10), conjugate_recovery),
        ("weight normalization and equivalence", Duration::from_secs(1), weights_equivalence),
        ("coefficient-interpolation linearity", Duration::from_secs(1), interpolation_linearity),
        ("end-to-end ground-truth recovery", Duration::from_secs(300), ground_truth_recovery),
        ("production-settings dry run", Duration::from_secs(60), production_settings_dry_run),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= *budget;
        println!(
            "criterion {} ({name}): {} | {} | {:.2}s (budget {}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
