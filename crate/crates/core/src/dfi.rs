//! Data-free inference: synthetic data sets consistent with reported
//! summaries, the grid search for the variance scale `beta`, and the joint
//! calibration with pushforward reporting.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{CalibrationConfig, DataSpace, DistanceKind, StatisticKind, WeightMode};
use crate::data::{DataSummarySet, SyntheticDataCollection};
use crate::error::{Error, Result};
use crate::likelihood::{default_weights, log_posterior, CombinedLikelihood, LogDensity, Predictor};
use crate::linalg::{norm2, Matrix};
use crate::mcmc::{map_estimate, postprocess, run_chain, warm_start, Chain, McmcSettings, WarmStart};
use crate::pce::{PceSurrogate, SurrogateFamily};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::space::{GaussianPrior, ParameterEntry, ParameterSpace};

/// `K` replicates `z_nk = y_n + sqrt(beta) s_n eta_nk` with standard normal
/// `eta` drawn row by row from a ChaCha stream seeded with `seed`.
///
/// The `eta` stream depends only on the seed, so collections for different
/// `beta` share their random numbers.
pub fn draw_synthetic<T: Scalar>(
    set: &DataSummarySet<T>,
    beta: T,
    replicates: usize,
    seed: u64,
) -> Result<SyntheticDataCollection<T>> {
    if !(beta > T::zero()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if replicates == 0 {
        return Err(Error::invalid("at least one synthetic replicate is required"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let root = beta.sqrt();
    let n = set.len();
    let mut draws = Vec::with_capacity(replicates * n);
    for _ in 0..replicates {
        for (&y, &s) in set.values().iter().zip(set.uncertainties()) {
            let eta: f64 = rng.sample(StandardNormal);
            draws.push(y + root * s * T::lit(eta));
        }
    }
    SyntheticDataCollection::from_draws(
        set.id(),
        beta,
        seed,
        Matrix::from_vec(replicates, n, draws)?,
        set.uncertainties().to_vec(),
    )
}

/// Predictions at every station for every posterior sample, one row per
/// sample.
pub fn pushforward<T: Scalar>(samples: &Matrix<T>, predictor: &dyn Predictor<T>) -> Result<Matrix<T>> {
    if samples.cols() != predictor.dim() {
        return Err(Error::DimensionMismatch {
            expected: predictor.dim(),
            got: samples.cols(),
        });
    }
    let n = predictor.len();
    let mut out = Matrix::zeros(samples.rows(), n);
    let data: Vec<T> = (0..samples.rows())
        .into_par_iter()
        .map(|i| predictor.predict_vec(samples.row(i)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if n > 0 {
        out = Matrix::from_vec(samples.rows(), n, data)?;
    }
    Ok(out)
}

fn column_moments<T: Scalar>(pf: &Matrix<T>) -> (Vec<T>, Vec<T>) {
    let m = pf.rows();
    let count = T::from_usize_lossy(m);
    let mut mean = vec![T::zero(); pf.cols()];
    for row in pf.iter_rows() {
        for (a, &x) in mean.iter_mut().zip(row) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= count);
    let mut ss = vec![T::zero(); pf.cols()];
    for row in pf.iter_rows() {
        for ((a, &x), &mu) in ss.iter_mut().zip(row).zip(&mean) {
            *a += (x - mu) * (x - mu);
        }
    }
    let denom = T::from_usize_lossy(m.saturating_sub(1).max(1));
    let sd = ss.into_iter().map(|v| (v / denom).sqrt()).collect();
    (mean, sd)
}

/// Per-station statistic of a pushforward sample; `ThreeSigma` is three times
/// the unbiased sample standard deviation.
pub fn pushforward_stat<T: Scalar>(pf: &Matrix<T>, kind: StatisticKind) -> Result<Vec<T>> {
    if pf.rows() < 2 {
        return Err(Error::invalid(format!(
            "at least 2 pushforward samples required, got {}",
            pf.rows()
        )));
    }
    match kind {
        StatisticKind::ThreeSigma => {
            let (_, sd) = column_moments(pf);
            Ok(sd.into_iter().map(|s| T::lit(3.0) * s).collect())
        }
    }
}

/// `||s - s~|| / ||s||`.
pub fn consistency_distance<T: Scalar>(reported: &[T], computed: &[T], kind: DistanceKind) -> Result<T> {
    if reported.len() != computed.len() {
        return Err(Error::DimensionMismatch {
            expected: reported.len(),
            got: computed.len(),
        });
    }
    match kind {
        DistanceKind::RelativeL2 => {
            let denom = norm2(reported);
            if !(denom > T::zero()) {
                return Err(Error::invalid("reported uncertainties have zero norm"));
            }
            let diff: Vec<T> = reported.iter().zip(computed).map(|(&a, &b)| a - b).collect();
            Ok(norm2(&diff) / denom)
        }
    }
}

/// Source of one surrogate input: a calibrated coordinate or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot<T> {
    Free(usize),
    Fixed(T),
}

/// Maps a calibrated parameter vector onto a surrogate's input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding<T> {
    slots: Vec<Slot<T>>,
    global_dim: usize,
}

impl<T: Scalar> Binding<T> {
    pub fn new(slots: Vec<Slot<T>>, global_dim: usize) -> Result<Self> {
        if let Some(Slot::Free(i)) = slots.iter().find(|s| matches!(s, Slot::Free(i) if *i >= global_dim)) {
            return Err(Error::invalid(format!("slot refers to coordinate {i} of {global_dim}")));
        }
        Ok(Self { slots, global_dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            slots: (0..dim).map(Slot::Free).collect(),
            global_dim: dim,
        }
    }

    /// Matches surrogate parameters to calibrated ones by name, preferring an
    /// experiment copy `name@id`. Parameters absent from `global` are held at
    /// their nominal value.
    pub fn by_names(local: &ParameterSpace<T>, global: &ParameterSpace<T>, experiment: Option<u32>) -> Self {
        let slots = local
            .entries()
            .iter()
            .map(|e| {
                experiment
                    .and_then(|id| global.index_of(&copy_name(&e.name, id)))
                    .or_else(|| global.index_of(&e.name))
                    .map_or(Slot::Fixed(e.nominal), Slot::Free)
            })
            .collect();
        Self {
            slots,
            global_dim: global.len(),
        }
    }

    pub fn slots(&self) -> &[Slot<T>] {
        &self.slots
    }

    pub fn local_dim(&self) -> usize {
        self.slots.len()
    }

    pub fn global_dim(&self) -> usize {
        self.global_dim
    }

    pub fn apply(&self, nu: &[T], out: &mut [T]) {
        for (o, s) in out.iter_mut().zip(&self.slots) {
            *o = match *s {
                Slot::Free(i) => nu[i],
                Slot::Fixed(v) => v,
            };
        }
    }
}

/// Name of the copy of `name` owned by experiment `id`.
pub fn copy_name(name: &str, id: u32) -> String {
    format!("{name}@{id}")
}

/// Per-station surrogates of one experiment behind a [`Binding`].
///
/// Evaluation extrapolates outside the bounds, since posterior samples from
/// the Gaussian prior may leave the box.
#[derive(Debug, Clone)]
pub struct SurrogatePredictor<T> {
    surrogates: Vec<PceSurrogate<T>>,
    binding: Binding<T>,
}

impl<T: Scalar> SurrogatePredictor<T> {
    pub fn new(surrogates: Vec<PceSurrogate<T>>, binding: Binding<T>) -> Result<Self> {
        if let Some(s) = surrogates.iter().find(|s| s.dim() != binding.local_dim()) {
            return Err(Error::DimensionMismatch {
                expected: binding.local_dim(),
                got: s.dim(),
            });
        }
        Ok(Self { surrogates, binding })
    }

    /// Surrogates at each of `set`'s stations, interpolated where needed.
    pub fn for_set(family: &SurrogateFamily<T>, set: &DataSummarySet<T>, binding: Binding<T>) -> Result<Self> {
        let surrogates = set
            .coords()
            .iter()
            .map(|c| family.surrogate_at(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(surrogates, binding)
    }

    pub fn surrogates(&self) -> &[PceSurrogate<T>] {
        &self.surrogates
    }

    pub fn binding(&self) -> &Binding<T> {
        &self.binding
    }
}

impl<T: Scalar> Predictor<T> for SurrogatePredictor<T> {
    fn dim(&self) -> usize {
        self.binding.global_dim()
    }

    fn len(&self) -> usize {
        self.surrogates.len()
    }

    fn predict(&self, nu: &[T], out: &mut [T]) -> Result<()> {
        if nu.len() != self.dim() || out.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: nu.len(),
            });
        }
        let mut local = vec![T::zero(); self.binding.local_dim()];
        self.binding.apply(nu, &mut local);
        for (o, s) in out.iter_mut().zip(&self.surrogates) {
            *o = s.eval_unchecked(&local);
        }
        Ok(())
    }
}

/// Reports `log10` of another predictor; non-positive outputs become NaN and
/// are rejected by the sampler.
pub struct Log10Predictor<T> {
    inner: Arc<dyn Predictor<T>>,
}

impl<T: Scalar> Log10Predictor<T> {
    pub fn new(inner: Arc<dyn Predictor<T>>) -> Self {
        Self { inner }
    }
}

impl<T: Scalar> Predictor<T> for Log10Predictor<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn len(&self) -> usize {
        self.inner.len()
    }

    fn predict(&self, nu: &[T], out: &mut [T]) -> Result<()> {
        self.inner.predict(nu, out)?;
        for o in out.iter_mut() {
            *o = if *o > T::zero() { o.log10() } else { T::nan() };
        }
        Ok(())
    }
}

/// A parameter space in which some parameters are replicated per experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificCopies<T> {
    pub space: ParameterSpace<T>,
    /// `(original name, experiment id, index in the new space)` per copy.
    pub copies: Vec<(String, u32, usize)>,
}

/// Replaces each parameter in `shared` by one copy per experiment id, named
/// `name@id` and inserted where the original stood.
pub fn experiment_specific_copies<T: Scalar>(
    space: &ParameterSpace<T>,
    shared: &[&str],
    ids: &[u32],
) -> Result<SpecificCopies<T>> {
    if let Some(name) = shared.iter().find(|n| space.index_of(n).is_none()) {
        return Err(Error::invalid(format!("unknown parameter '{name}'")));
    }
    let mut entries = Vec::new();
    let mut copies = Vec::new();
    for e in space.entries() {
        if shared.contains(&e.name.as_str()) {
            for &id in ids {
                copies.push((e.name.clone(), id, entries.len()));
                entries.push(ParameterEntry {
                    name: copy_name(&e.name, id),
                    ..e.clone()
                });
            }
        } else {
            entries.push(e.clone());
        }
    }
    Ok(SpecificCopies {
        space: ParameterSpace::new(entries)?,
        copies,
    })
}

/// Sampler and pipeline settings derived from a [`CalibrationConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceSettings {
    pub mcmc: McmcSettings,
    pub burn_in: usize,
    pub subsample: usize,
    pub warm_start_iterations: usize,
    pub synthetic_count: usize,
    pub tolerance: f64,
    pub statistic: StatisticKind,
    pub distance: DistanceKind,
}

impl InferenceSettings {
    pub fn from_config(cfg: &CalibrationConfig) -> Self {
        Self {
            mcmc: McmcSettings {
                steps: cfg.mcmc_steps,
                jump_size: cfg.jump_size,
                adapt: true,
                adapt_start: cfg.adapt_start,
                max_entries: cfg.max_chain_entries,
                ..McmcSettings::default()
            },
            burn_in: cfg.burn_in,
            subsample: cfg.subsample,
            warm_start_iterations: cfg.warm_start_iterations,
            synthetic_count: cfg.synthetic_count,
            tolerance: cfg.tolerance,
            statistic: cfg.statistic,
            distance: cfg.distance,
        }
    }
}

/// Warm start from the prior mean, chain, burn-in and thinning.
fn infer<T: Scalar>(
    target: &dyn LogDensity<T>,
    prior: &GaussianPrior<T>,
    settings: &InferenceSettings,
    seed: u64,
) -> Result<(WarmStart<T>, Chain<T>, Matrix<T>)> {
    let start = warm_start(target, prior.means(), prior.sds(), settings.warm_start_iterations)?;
    let chain = run_chain(target, &start.point, prior.sds(), &settings.mcmc, seed)?;
    let samples = postprocess(&chain, settings.burn_in, settings.subsample)?;
    Ok((start, chain, samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaCandidate<T> {
    pub beta: T,
    pub rho: Option<T>,
    pub retained: usize,
    pub chain_seed: u64,
    pub s_tilde: Vec<T>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport<T> {
    pub set_id: u32,
    pub synthetic_seed: u64,
    pub candidates: Vec<BetaCandidate<T>>,
    pub selected: usize,
    pub reported_s: Vec<T>,
    pub tolerance: T,
    /// The selected candidate satisfies `rho <= tolerance`.
    pub consistent: bool,
}

impl<T: Scalar> ConsistencyReport<T> {
    pub fn selected_candidate(&self) -> &BetaCandidate<T> {
        &self.candidates[self.selected]
    }

    pub fn selected_beta(&self) -> T {
        self.selected_candidate().beta
    }

    pub fn selected_rho(&self) -> T {
        self.selected_candidate().rho.unwrap_or_else(T::nan)
    }

    /// `beta,rho,accepted_flag`; failed candidates have an empty `rho`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["beta", "rho", "accepted_flag"])?;
        for c in &self.candidates {
            let rho = c.rho.map(|r| format!("{:e}", r.as_f64())).unwrap_or_default();
            let ok = c.rho.is_some_and(|r| r <= self.tolerance);
            w.write_record([format!("{:e}", c.beta.as_f64()), rho, u8::from(ok).to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<consistency>", e))?;
        Ok(())
    }

    /// `station,s,s_tilde` for the selected candidate.
    pub fn write_station_csv<W: Write>(&self, set: &DataSummarySet<T>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["station", "s", "s_tilde"])?;
        for ((name, s), st) in set
            .stations()
            .iter()
            .zip(&self.reported_s)
            .zip(&self.selected_candidate().s_tilde)
        {
            w.write_record([name.clone(), format!("{:e}", s.as_f64()), format!("{:e}", st.as_f64())])?;
        }
        w.flush().map_err(|e| Error::io("<consistency>", e))?;
        Ok(())
    }
}

fn evaluate_candidate<T: Scalar>(
    set: &DataSummarySet<T>,
    beta: T,
    prior: &GaussianPrior<T>,
    predictor: &Arc<dyn Predictor<T>>,
    settings: &InferenceSettings,
    synthetic_seed: u64,
    chain_seed: u64,
) -> Result<(T, usize, Vec<T>)> {
    let z = draw_synthetic(set, beta, settings.synthetic_count, synthetic_seed)?;
    let lik = CombinedLikelihood::new(vec![z], vec![predictor.clone()], None)?;
    let post = log_posterior(prior.clone(), lik)?;
    let (_, _, samples) = infer(&post, prior, settings, chain_seed)?;
    let pf = pushforward(&samples, predictor.as_ref())?;
    let st = pushforward_stat(&pf, settings.statistic)?;
    let rho = consistency_distance(set.uncertainties(), &st, settings.distance)?;
    if !rho.is_finite() {
        return Err(Error::Numerical(format!("distance is not finite ({rho})")));
    }
    Ok((rho, samples.rows(), st))
}

/// Grid search for the variance scale: every candidate uses the same
/// synthetic random numbers, candidates run in parallel with their own chain
/// seeds, and the first candidate with the smallest distance wins. Failed
/// candidates are recorded and skipped.
pub fn calibrate_beta<T: Scalar>(
    set: &DataSummarySet<T>,
    grid: &[T],
    prior: &GaussianPrior<T>,
    predictor: Arc<dyn Predictor<T>>,
    settings: &InferenceSettings,
    seed: u64,
) -> Result<(ConsistencyReport<T>, SyntheticDataCollection<T>)> {
    if grid.is_empty() {
        return Err(Error::invalid("beta grid is empty"));
    }
    if predictor.len() != set.len() {
        return Err(Error::invalid(format!(
            "experiment {}: predictor covers {} stations, data has {}",
            set.id(),
            predictor.len(),
            set.len()
        )));
    }
    let synthetic_seed = derive_seed(seed, "synthetic", u64::from(set.id()));
    let candidates: Vec<BetaCandidate<T>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            let chain_seed = derive_seed(seed, "beta-chain", i as u64);
            match evaluate_candidate(set, beta, prior, &predictor, settings, synthetic_seed, chain_seed) {
                Ok((rho, retained, s_tilde)) => BetaCandidate {
                    beta,
                    rho: Some(rho),
                    retained,
                    chain_seed,
                    s_tilde,
                    failure: None,
                },
                Err(e) => BetaCandidate {
                    beta,
                    rho: None,
                    retained: 0,
                    chain_seed,
                    s_tilde: Vec::new(),
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut selected: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some(r) = c.rho {
            if selected.is_none_or(|s| r < candidates[s].rho.unwrap_or_else(T::infinity)) {
                selected = Some(i);
            }
        }
    }
    let Some(selected) = selected else {
        let reasons: Vec<String> = candidates.iter().filter_map(|c| c.failure.clone()).collect();
        return Err(Error::Numerical(format!(
            "experiment {}: every beta candidate failed ({})",
            set.id(),
            reasons.join("; ")
        )));
    };
    let tolerance = T::lit(settings.tolerance);
    let consistent = candidates[selected].rho.is_some_and(|r| r <= tolerance);
    let z = draw_synthetic(set, candidates[selected].beta, settings.synthetic_count, synthetic_seed)?;
    Ok((
        ConsistencyReport {
            set_id: set.id(),
            synthetic_seed,
            candidates,
            selected,
            reported_s: set.uncertainties().to_vec(),
            tolerance,
            consistent,
        },
        z,
    ))
}

/// Per-station pushforward statistics for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardSummary<T> {
    pub set_id: u32,
    pub mean: Vec<T>,
    pub sd: Vec<T>,
    pub three_sigma: Vec<T>,
    pub map_pred: Vec<T>,
    pub samples: usize,
}

impl<T: Scalar> PushforwardSummary<T> {
    pub fn from_samples(set_id: u32, pf: &Matrix<T>, map_pred: Vec<T>) -> Result<Self> {
        if pf.rows() == 0 {
            return Err(Error::invalid("no pushforward samples"));
        }
        if map_pred.len() != pf.cols() {
            return Err(Error::DimensionMismatch {
                expected: pf.cols(),
                got: map_pred.len(),
            });
        }
        let (mean, sd) = column_moments(pf);
        let three_sigma = sd.iter().map(|&s| T::lit(3.0) * s).collect();
        Ok(Self {
            set_id,
            mean,
            sd,
            three_sigma,
            map_pred,
            samples: pf.rows(),
        })
    }

    /// `station,coord1[,coord2],mean,sd,three_sigma,map_pred,y,s`.
    pub fn write_csv<W: Write>(&self, set: &DataSummarySet<T>, out: W) -> Result<()> {
        if set.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: set.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["station".to_string()];
        header.extend((1..=set.coord_dim()).map(|i| format!("coord{i}")));
        header.extend(["mean", "sd", "three_sigma", "map_pred", "y", "s"].map(String::from));
        w.write_record(&header)?;
        let e = |x: T| format!("{:e}", x.as_f64());
        for n in 0..set.len() {
            let mut rec = vec![set.stations()[n].clone()];
            rec.extend(set.coords()[n].iter().map(|&c| e(c)));
            rec.extend([
                e(self.mean[n]),
                e(self.sd[n]),
                e(self.three_sigma[n]),
                e(self.map_pred[n]),
                e(set.values()[n]),
                e(set.uncertainties()[n]),
            ]);
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<pushforward>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct JointResult<T> {
    pub warm_start: WarmStart<T>,
    pub chain: Chain<T>,
    pub samples: Matrix<T>,
    pub map: Vec<T>,
    pub map_logpost: T,
    pub summaries: Vec<PushforwardSummary<T>>,
}

/// Samples the combined posterior of all experiments and summarises each
/// experiment's pushforward.
pub fn joint_calibrate<T: Scalar>(
    collections: Vec<SyntheticDataCollection<T>>,
    prior: &GaussianPrior<T>,
    predictors: Vec<Arc<dyn Predictor<T>>>,
    weights: Option<Vec<T>>,
    settings: &InferenceSettings,
    seed: u64,
) -> Result<JointResult<T>> {
    let ids: Vec<u32> = collections.iter().map(|c| c.set_id()).collect();
    let lik = CombinedLikelihood::new(collections, predictors.clone(), weights)?;
    let post = log_posterior(prior.clone(), lik)?;
    let (warm, chain, samples) = infer(&post, prior, settings, seed)?;
    let (map, map_logpost) = map_estimate(&chain)?;
    let summaries = ids
        .iter()
        .zip(&predictors)
        .map(|(&id, p)| {
            let pf = pushforward(&samples, p.as_ref())?;
            PushforwardSummary::from_samples(id, &pf, p.predict_vec(&map)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointResult {
        warm_start: warm,
        chain,
        samples,
        map,
        map_logpost,
        summaries,
    })
}

/// One experiment ready for calibration: data in the working space and a
/// predictor producing the same observable.
#[derive(Clone)]
pub struct Experiment<T: Scalar> {
    pub set: DataSummarySet<T>,
    pub predictor: Arc<dyn Predictor<T>>,
}

impl<T: Scalar> Experiment<T> {
    /// Converts data and predictor to `log10` when `space` asks for it.
    pub fn new(set: DataSummarySet<T>, predictor: Arc<dyn Predictor<T>>, space: DataSpace) -> Result<Self> {
        if predictor.len() != set.len() {
            return Err(Error::invalid(format!(
                "experiment {}: predictor covers {} stations, data has {}",
                set.id(),
                predictor.len(),
                set.len()
            )));
        }
        Ok(match space {
            DataSpace::Linear => Self { set, predictor },
            DataSpace::Log10 => Self {
                set: set.to_log10()?,
                predictor: Arc::new(Log10Predictor::new(predictor)),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome<T> {
    pub reports: Vec<ConsistencyReport<T>>,
    pub collections: Vec<SyntheticDataCollection<T>>,
    pub weights: Option<Vec<T>>,
    pub joint: JointResult<T>,
    pub joint_seed: u64,
}

impl<T: Scalar> PipelineOutcome<T> {
    /// Ids of experiments whose best distance exceeds the tolerance.
    pub fn inconsistent(&self) -> Vec<u32> {
        self.reports.iter().filter(|r| !r.consistent).map(|r| r.set_id).collect()
    }
}

/// Seed of experiment `id`'s beta search under `master`.
pub fn consistency_seed(master: u64, id: u32) -> u64 {
    derive_seed(master, "consistency", u64::from(id))
}

pub fn joint_seed(master: u64) -> u64 {
    derive_seed(master, "joint", 0)
}

/// Beta search per experiment followed by the joint calibration, reusing the
/// selected collections unchanged. Inconsistent experiments are kept with
/// their best candidate and listed by [`PipelineOutcome::inconsistent`].
pub fn run_pipeline<T: Scalar>(
    experiments: &[Experiment<T>],
    prior: &GaussianPrior<T>,
    config: &CalibrationConfig,
) -> Result<PipelineOutcome<T>> {
    config.validate()?;
    if experiments.is_empty() {
        return Err(Error::invalid("no experiments to calibrate"));
    }
    let settings = InferenceSettings::from_config(config);
    let grid: Vec<T> = config.beta_grid.iter().map(|&b| T::lit(b)).collect();
    let mut reports = Vec::new();
    let mut collections = Vec::new();
    for e in experiments {
        let (report, z) = calibrate_beta(
            &e.set,
            &grid,
            prior,
            e.predictor.clone(),
            &settings,
            consistency_seed(config.seed, e.set.id()),
        )?;
        reports.push(report);
        collections.push(z);
    }
    let weights = match config.weights {
        WeightMode::Uniform => None,
        WeightMode::InverseCount => {
            Some(default_weights(&experiments.iter().map(|e| e.set.len()).collect::<Vec<_>>())?)
        }
    };
    let seed = joint_seed(config.seed);
    let joint = joint_calibrate(
        collections.clone(),
        prior,
        experiments.iter().map(|e| e.predictor.clone()).collect(),
        weights.clone(),
        &settings,
        seed,
    )?;
    Ok(PipelineOutcome {
        reports,
        collections,
        weights,
        joint,
        joint_seed: seed,
    })
}
