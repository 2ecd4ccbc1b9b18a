//! Analytic forward models with known ground truth, used by the demo,
//! tutorials and end-to-end tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::config::{log_spaced, CalibrationConfig};
use crate::data::{DataSummarySet, TrainingSet};
use crate::error::{Error, Result};
use crate::likelihood::Predictor;
use crate::linalg::Matrix;
use crate::pce::{fit_family, FitOptions, FitReport, SurrogateFamily};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::space::{ParameterEntry, ParameterSpace};

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV: f64 = 8.617333262e-5;

/// `10^log10w * exp(-q / (k_B t))`.
pub fn arrhenius_eval<T: Scalar>(q: T, log10w: T, t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::invalid(format!("temperature must be positive, got {t}")));
    }
    Ok(T::lit(10.0).powf(log10w) * (-q / (T::lit(BOLTZMANN_EV) * t)).exp())
}

/// Partial derivatives `(d/dq, d/dlog10w)` of [`arrhenius_eval`].
pub fn arrhenius_gradient<T: Scalar>(q: T, log10w: T, t: T) -> Result<(T, T)> {
    let d = arrhenius_eval(q, log10w, t)?;
    Ok((-d / (T::lit(BOLTZMANN_EV) * t), d * T::LN_10()))
}

/// Arrhenius law reading its activation energy and log attempt frequency
/// from given coordinates of a parameter vector. An optional offset
/// coordinate is added to `log10w`, standing in for an experiment-specific
/// operating condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrheniusModel {
    pub q: usize,
    pub log10w: usize,
    pub offset: Option<usize>,
}

impl Default for ArrheniusModel {
    fn default() -> Self {
        Self {
            q: 0,
            log10w: 1,
            offset: None,
        }
    }
}

impl ArrheniusModel {
    pub fn eval<T: Scalar>(&self, nu: &[T], t: T) -> Result<T> {
        let need = self.q.max(self.log10w).max(self.offset.unwrap_or(0)) + 1;
        if nu.len() < need {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: nu.len(),
            });
        }
        let shift = self.offset.map_or(T::zero(), |i| nu[i]);
        arrhenius_eval(nu[self.q], nu[self.log10w] + shift, t)
    }

    pub fn eval_stations<T: Scalar>(&self, nu: &[T], temperatures: &[T]) -> Result<Vec<T>> {
        temperatures.iter().map(|&t| self.eval(nu, t)).collect()
    }

    /// `L x N` outputs for every training row and station.
    pub fn outputs<T: Scalar>(&self, inputs: &Matrix<T>, temperatures: &[T]) -> Result<Matrix<T>> {
        let mut data = Vec::with_capacity(inputs.rows() * temperatures.len());
        for row in inputs.iter_rows() {
            data.extend(self.eval_stations(row, temperatures)?);
        }
        Matrix::from_vec(inputs.rows(), temperatures.len(), data)
    }
}

/// The exact model as a [`Predictor`] over `dim` parameters.
pub struct ArrheniusPredictor<T> {
    pub model: ArrheniusModel,
    pub temperatures: Vec<T>,
    pub dim: usize,
}

impl<T: Scalar> Predictor<T> for ArrheniusPredictor<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.temperatures.len()
    }

    fn predict(&self, nu: &[T], out: &mut [T]) -> Result<()> {
        if nu.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: nu.len(),
            });
        }
        for (o, &t) in out.iter_mut().zip(&self.temperatures) {
            *o = self.model.eval(nu, t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem<T> {
    pub sets: Vec<DataSummarySet<T>>,
    pub truth: Vec<T>,
    pub temperatures: Vec<T>,
    pub noise_fraction: T,
}

/// Noisy summaries of `model` at `truth`: `y_n = f_n (1 + noise * eta)` with
/// `eta` standard normal, redrawn until `y_n > 0`, and `s_n = noise * y_n`.
/// Experiment `d` (1-based id) uses its own stream derived from `seed`.
pub fn make_synthetic_problem<T: Scalar>(
    model: &ArrheniusModel,
    truth: &[T],
    temperatures: &[T],
    noise_fraction: T,
    experiments: usize,
    seed: u64,
) -> Result<SyntheticProblem<T>> {
    if temperatures.is_empty() {
        return Err(Error::invalid("at least one station temperature is required"));
    }
    if !(noise_fraction > T::zero()) {
        return Err(Error::invalid(format!("noise fraction must be positive, got {noise_fraction}")));
    }
    if experiments == 0 {
        return Err(Error::invalid("at least one experiment is required"));
    }
    let exact = model.eval_stations(truth, temperatures)?;
    let mut sets = Vec::with_capacity(experiments);
    for d in 1..=experiments {
        let id = d as u32;
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, "synthetic-problem", d as u64));
        let values: Vec<T> = exact
            .iter()
            .map(|&f| loop {
                let eta: f64 = rng.sample(StandardNormal);
                let y = f * (T::one() + noise_fraction * T::lit(eta));
                if y > T::zero() {
                    break y;
                }
            })
            .collect();
        let s = values.iter().map(|&y| noise_fraction * y).collect();
        sets.push(DataSummarySet::new(
            id,
            format!("arrhenius-{id}"),
            temperatures.iter().map(|t| format!("T{}", t.as_f64())).collect(),
            temperatures.iter().map(|&t| vec![t]).collect(),
            values,
            s,
        )?);
    }
    Ok(SyntheticProblem {
        sets,
        truth: truth.to_vec(),
        temperatures: temperatures.to_vec(),
        noise_fraction,
    })
}

/// `n` points drawn uniformly inside the bounds.
pub fn uniform_design<T: Scalar>(space: &ParameterSpace<T>, n: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * space.len());
    for _ in 0..n {
        for e in space.entries() {
            let u: f64 = rng.random();
            data.push(e.lower + (e.upper - e.lower) * T::lit(u));
        }
    }
    Matrix::from_vec(n, space.len(), data).expect("shape fixed by construction")
}

/// Settings of the bundled two-parameter ground-truth problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSpec {
    pub truth: [f64; 2],
    pub bounds: [(f64, f64); 2],
    pub temperatures: Vec<f64>,
    pub noise_fraction: f64,
    pub training_samples: usize,
    pub seed: u64,
    pub config: CalibrationConfig,
}

impl Default for DemoSpec {
    fn default() -> Self {
        let config = CalibrationConfig {
            pce_order: 6,
            synthetic_count: 20,
            mcmc_steps: 50_000,
            burn_in: 5_000,
            subsample: 5,
            beta_grid: log_spaced(0.05, 2.0, 10),
            seed: 2023,
            ..CalibrationConfig::default()
        };
        Self {
            truth: [3.03, 12.9],
            bounds: [(2.8, 3.2), (12.5, 13.5)],
            temperatures: (0..8).map(|i| 1200.0 + 800.0 * f64::from(i) / 7.0).collect(),
            noise_fraction: 0.05,
            training_samples: 400,
            seed: 2023,
            config,
        }
    }
}

impl DemoSpec {
    pub fn space(&self) -> ParameterSpace<f64> {
        let entry = |name: &str, (lower, upper): (f64, f64), unit: &str| ParameterEntry {
            name: name.into(),
            nominal: 0.5 * (lower + upper),
            lower,
            upper,
            unit: unit.into(),
        };
        ParameterSpace::new(vec![
            entry("Q", self.bounds[0], "eV"),
            entry("log10w", self.bounds[1], "log10 Hz"),
        ])
        .expect("demo bounds are valid")
    }

    pub fn problem(&self) -> Result<SyntheticProblem<f64>> {
        make_synthetic_problem(
            &ArrheniusModel::default(),
            &self.truth,
            &self.temperatures,
            self.noise_fraction,
            1,
            derive_seed(self.seed, "demo-data", 0),
        )
    }

    pub fn training_inputs(&self) -> Matrix<f64> {
        uniform_design(&self.space(), self.training_samples, derive_seed(self.seed, "demo-training", 0))
    }

    pub fn test_inputs(&self) -> Matrix<f64> {
        uniform_design(&self.space(), self.training_samples / 2, derive_seed(self.seed, "demo-test", 0))
    }

    /// Training rows in the CSV layout read by [`TrainingSet::read_csv`].
    pub fn training_set(&self, inputs: Matrix<f64>) -> Result<TrainingSet<f64>> {
        let problem_stations = self.station_names();
        let outputs = ArrheniusModel::default().outputs(&inputs, &self.temperatures)?;
        TrainingSet::new(vec!["Q".into(), "log10w".into()], problem_stations, inputs, outputs)
    }

    pub fn station_names(&self) -> Vec<String> {
        self.temperatures.iter().map(|t| format!("T{t}")).collect()
    }

    /// Fits the station family at the demo order.
    pub fn fit(&self) -> Result<(SurrogateFamily<f64>, Vec<FitReport<f64>>)> {
        let space = Arc::new(self.space());
        let inputs = self.training_inputs();
        let outputs = ArrheniusModel::default().outputs(&inputs, &self.temperatures)?;
        let coords: Vec<Vec<f64>> = self.temperatures.iter().map(|&t| vec![t]).collect();
        let opts = FitOptions {
            prune_threshold: self.config.prune_threshold,
            max_passes: self.config.prune_passes,
            ..FitOptions::order(self.config.pce_order)
        };
        fit_family(space, &coords, &inputs, &outputs, &opts)
    }
}
