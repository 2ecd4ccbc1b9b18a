//! Adaptive Metropolis sampling, chain post-processing, MAP extraction and a
//! deterministic warm-start optimiser.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::likelihood::LogDensity;
use crate::linalg::{cholesky, lower_mul, norm2, Matrix};
use crate::scalar::Scalar;
use crate::space::ParameterSpace;

/// Scaling of the adapted covariance, `2.38^2 / s`.
const AM_SCALE: f64 = 2.38 * 2.38;
const AM_JITTER: f64 = 1e-10;
const TUNE_BATCH: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSettings {
    pub steps: usize,
    /// Pre-adaptation proposal sd as a multiple of the per-coordinate scale.
    pub jump_size: f64,
    pub adapt: bool,
    /// Defaults to `max(1000, 2s)`.
    pub adapt_start: Option<usize>,
    /// Steps between refreshes of the proposal Cholesky factor.
    pub adapt_interval: usize,
    /// Halve or double the pre-adaptation jump every 100 steps while the
    /// batch acceptance rate sits outside `[0.1, 0.5]`.
    pub tune_initial_scale: bool,
    /// Cap on `steps * dim` stored values.
    pub max_entries: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            steps: 10_000,
            jump_size: 0.5,
            adapt: true,
            adapt_start: None,
            adapt_interval: 10,
            tune_initial_scale: true,
            max_entries: 50_000_000,
        }
    }
}

impl McmcSettings {
    pub fn adapt_start_for(&self, dim: usize) -> usize {
        self.adapt_start.unwrap_or_else(|| 1000.max(2 * dim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationSummary<T> {
    /// First step using the adapted covariance, if adaptation ran.
    pub start: Option<usize>,
    /// Final pre-adaptation jump multiplier after tuning.
    pub tuned_jump: T,
    /// Proposal sd per coordinate at the end of the run.
    pub final_proposal_sd: Vec<T>,
    pub adaptive_steps: usize,
    pub adaptive_accepted: usize,
}

/// States after each of `M` steps together with their log-posterior values.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    pub states: Matrix<T>,
    pub logpost: Vec<T>,
    pub accepted: usize,
    pub seed: u64,
    pub adaptation: AdaptationSummary<T>,
}

impl<T: Scalar> Chain<T> {
    pub fn len(&self) -> usize {
        self.logpost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logpost.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.cols()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.len().max(1) as f64
    }

    /// Acceptance rate over the adapted part of the chain.
    pub fn adaptive_acceptance_rate(&self) -> Option<f64> {
        let a = &self.adaptation;
        (a.adaptive_steps > 0).then(|| a.adaptive_accepted as f64 / a.adaptive_steps as f64)
    }

    /// Writes `iter,logpost,<names>` with 1-based iterations.
    pub fn write_csv<W: Write>(&self, names: &[&str], out: W) -> Result<()> {
        if names.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: names.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "logpost".to_string()];
        header.extend(names.iter().map(|n| n.to_string()));
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for (m, (row, lp)) in self.states.iter_rows().zip(&self.logpost).enumerate() {
            rec.clear();
            rec.push((m + 1).to_string());
            rec.push(format!("{:e}", lp.as_f64()));
            rec.extend(row.iter().map(|x| format!("{:e}", x.as_f64())));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<chain>", e))?;
        Ok(())
    }

    pub fn save(&self, names: &[&str], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(names, std::io::BufWriter::new(file))
    }

    /// Writes `iter,scaled` for parameter `j`, the state mapped to `[-1, 1]`.
    pub fn write_trace_csv<W: Write>(&self, space: &ParameterSpace<T>, j: usize, out: W) -> Result<()> {
        if j >= self.dim() || space.len() != self.dim() {
            return Err(Error::invalid(format!("no parameter {j} in a {}-dimensional chain", self.dim())));
        }
        let e = space.entry(j);
        let two = T::lit(2.0);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "scaled"])?;
        for (m, row) in self.states.iter_rows().enumerate() {
            let xi = two * (row[j] - e.lower) / (e.upper - e.lower) - T::one();
            w.write_record([(m + 1).to_string(), format!("{:e}", xi.as_f64())])?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }
}

/// Chain states read back from a chain CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainArchive<T> {
    pub names: Vec<String>,
    pub logpost: Vec<T>,
    pub states: Matrix<T>,
}

impl<T: Scalar> ChainArchive<T> {
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "iter" || &header[1] != "logpost" {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                row: 1,
                message: "expected header iter,logpost,<parameters>".into(),
            });
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut logpost = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| -> Result<T> {
                s.parse::<f64>().map(T::lit).map_err(|e| Error::Parse {
                    path: origin.to_path_buf(),
                    row: i + 2,
                    message: format!("bad number {s:?}: {e}"),
                })
            };
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    row: i + 2,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            logpost.push(parse(&rec[1])?);
            for f in rec.iter().skip(2) {
                data.push(parse(f)?);
            }
        }
        let states = Matrix::from_vec(logpost.len(), names.len(), data)?;
        Ok(Self { names, logpost, states })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, path)
    }
}

/// Incremental mean and covariance of the chain history.
struct RunningCov<T> {
    n: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Scalar> RunningCov<T> {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![T::zero(); dim],
            m2: vec![T::zero(); dim * dim],
        }
    }

    fn push(&mut self, x: &[T]) {
        let d = x.len();
        self.n += 1;
        let n = T::from_usize_lossy(self.n);
        let delta: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        for (m, &dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for ((row, &xi), &mi) in self.m2.chunks_exact_mut(d).zip(x).zip(&self.mean) {
            let after = xi - mi;
            for (v, &dl) in row.iter_mut().zip(&delta) {
                *v += after * dl;
            }
        }
    }

    fn covariance(&self) -> Vec<T> {
        let denom = T::from_usize_lossy(self.n.saturating_sub(1).max(1));
        self.m2.iter().map(|&v| v / denom).collect()
    }
}

/// Random-walk Metropolis with Haario-style covariance adaptation.
///
/// Before adaptation the proposal sd of coordinate `j` is
/// `jump_size * scales[j]`; afterwards the proposal covariance is
/// `(2.38^2 / s) C + 1e-10 I` with `C` the covariance of the chain so far.
/// Targets returning a non-finite value reject the proposal; a target error
/// aborts the run.
pub fn run_chain<T, D>(
    target: &D,
    start: &[T],
    scales: &[T],
    settings: &McmcSettings,
    seed: u64,
) -> Result<Chain<T>>
where
    T: Scalar,
    D: LogDensity<T> + ?Sized,
{
    let dim = target.dim();
    if start.len() != dim || scales.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if start.len() != dim { start.len() } else { scales.len() },
        });
    }
    if settings.steps == 0 {
        return Err(Error::invalid("chain length must be at least 1"));
    }
    if !(settings.jump_size >= 0.0) || !settings.jump_size.is_finite() {
        return Err(Error::invalid(format!("jump size must be non-negative, got {}", settings.jump_size)));
    }
    if settings.steps.checked_mul(dim).is_none_or(|n| n > settings.max_entries) {
        return Err(Error::ChainTooLarge {
            steps: settings.steps,
            dim,
            cap: settings.max_entries,
        });
    }
    let mut current = start.to_vec();
    let mut lp = target.log_density(&current)?;
    if !lp.is_finite() {
        return Err(Error::Numerical(format!("target is not finite at the starting point ({lp})")));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let adapt_start = settings.adapt.then(|| settings.adapt_start_for(dim));
    let interval = settings.adapt_interval.max(1);
    let am_scale = T::lit(AM_SCALE) / T::from_usize_lossy(dim);
    let jitter = T::lit(AM_JITTER);

    let mut tuned = T::lit(settings.jump_size);
    let mut history = RunningCov::new(dim);
    let mut factor: Option<Vec<T>> = None;
    let mut states = Vec::with_capacity(settings.steps * dim);
    let mut logpost = Vec::with_capacity(settings.steps);
    let mut accepted = 0usize;
    let mut batch_accepted = 0usize;
    let (mut adaptive_steps, mut adaptive_accepted) = (0usize, 0usize);
    let mut z = vec![T::zero(); dim];
    let mut step = vec![T::zero(); dim];
    let mut proposal = vec![T::zero(); dim];

    for m in 0..settings.steps {
        let adaptive = adapt_start.is_some_and(|a| m >= a);
        if adaptive && (factor.is_none() || (m - adapt_start.unwrap_or(0)) % interval == 0) {
            let mut cov = history.covariance();
            cov.iter_mut().for_each(|c| *c *= am_scale);
            for i in 0..dim {
                cov[i * dim + i] += jitter;
            }
            if let Some(l) = cholesky(&cov, dim) {
                factor = Some(l);
            } else if factor.is_none() {
                // fall back to the diagonal
                let mut l = vec![T::zero(); dim * dim];
                for i in 0..dim {
                    l[i * dim + i] = cov[i * dim + i].max(jitter).sqrt();
                }
                factor = Some(l);
            }
        }
        for zi in z.iter_mut() {
            *zi = T::lit(rng.sample::<f64, _>(StandardNormal));
        }
        match (&factor, adaptive) {
            (Some(l), true) => lower_mul(l, &z, &mut step),
            _ => {
                for ((s, &zi), &sc) in step.iter_mut().zip(&z).zip(scales) {
                    *s = tuned * sc * zi;
                }
            }
        }
        for ((p, &c), &s) in proposal.iter_mut().zip(&current).zip(&step) {
            *p = c + s;
        }
        let u: f64 = rng.random();
        let candidate = target.log_density(&proposal)?;
        let delta = candidate - lp;
        let accept = candidate.is_finite() && (delta >= T::zero() || u.ln() < delta.as_f64());
        if accept {
            current.copy_from_slice(&proposal);
            lp = candidate;
            accepted += 1;
            batch_accepted += 1;
        }
        if adaptive {
            adaptive_steps += 1;
            adaptive_accepted += usize::from(accept);
        }
        states.extend_from_slice(&current);
        logpost.push(lp);
        history.push(&current);

        if settings.tune_initial_scale && !adaptive && (m + 1) % TUNE_BATCH == 0 {
            let rate = batch_accepted as f64 / TUNE_BATCH as f64;
            if rate < 0.1 {
                tuned *= T::lit(0.5);
            } else if rate > 0.5 {
                tuned *= T::lit(2.0);
            }
            batch_accepted = 0;
        }
    }

    let final_proposal_sd = match (&factor, adapt_start) {
        (Some(l), Some(_)) => (0..dim)
            .map(|i| norm2(&l[i * dim..i * dim + i + 1]))
            .collect(),
        _ => scales.iter().map(|&s| tuned * s).collect(),
    };
    Ok(Chain {
        states: Matrix::from_vec(settings.steps, dim, states)?,
        logpost,
        accepted,
        seed,
        adaptation: AdaptationSummary {
            start: adapt_start.filter(|&a| a < settings.steps),
            tuned_jump: tuned,
            final_proposal_sd,
            adaptive_steps,
            adaptive_accepted,
        },
    })
}

/// Keeps the states with 1-based index `m > burn_in` and
/// `(m - burn_in) % subsample == 0`.
pub fn postprocess<T: Scalar>(chain: &Chain<T>, burn_in: usize, subsample: usize) -> Result<Matrix<T>> {
    thin(&chain.states, burn_in, subsample)
}

pub fn thin<T: Scalar>(states: &Matrix<T>, burn_in: usize, subsample: usize) -> Result<Matrix<T>> {
    if burn_in >= states.rows() {
        return Err(Error::invalid(format!(
            "burn-in {burn_in} leaves nothing of a {}-state chain",
            states.rows()
        )));
    }
    if subsample == 0 {
        return Err(Error::invalid("subsample rate must be at least 1"));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for m in (burn_in + subsample..=states.rows()).step_by(subsample) {
        data.extend_from_slice(states.row(m - 1));
        rows += 1;
    }
    Matrix::from_vec(rows, states.cols(), data)
}

/// The state with the largest recorded log-posterior; earliest on ties.
pub fn map_estimate<T: Scalar>(chain: &Chain<T>) -> Result<(Vec<T>, T)> {
    let mut best: Option<usize> = None;
    for (i, &lp) in chain.logpost.iter().enumerate() {
        if best.is_none_or(|b| lp > chain.logpost[b]) {
            best = Some(i);
        }
    }
    let i = best.ok_or_else(|| Error::invalid("empty chain"))?;
    Ok((chain.states.row(i).to_vec(), chain.logpost[i]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart<T> {
    pub point: Vec<T>,
    pub value: T,
    pub iterations: usize,
    /// No improving step was found from the starting point.
    pub stalled: bool,
}

/// Deterministic ascent with central finite-difference gradients.
///
/// Works in coordinates divided by `scales`, takes Barzilai-Borwein step
/// lengths and backtracks until the target increases. Only improvements are
/// accepted, so the result is never worse than `start`.
pub fn warm_start<T, D>(target: &D, start: &[T], scales: &[T], iterations: usize) -> Result<WarmStart<T>>
where
    T: Scalar,
    D: LogDensity<T> + ?Sized,
{
    let dim = target.dim();
    if start.len() != dim || scales.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: start.len(),
        });
    }
    let mut x = start.to_vec();
    let mut fx = target.log_density(&x)?;
    if !fx.is_finite() {
        return Err(Error::Numerical(format!("target is not finite at the starting point ({fx})")));
    }
    let h = T::lit(1e-5);
    let gradient = |x: &[T]| -> Result<Vec<T>> {
        let mut g = vec![T::zero(); dim];
        let mut probe = x.to_vec();
        for j in 0..dim {
            let step = h * scales[j];
            probe[j] = x[j] + step;
            let up = target.log_density(&probe)?;
            probe[j] = x[j] - step;
            let down = target.log_density(&probe)?;
            probe[j] = x[j];
            // derivative with respect to x_j / scale_j
            g[j] = (up - down) / (h + h);
        }
        Ok(g)
    };
    let mut g = gradient(&x)?;
    let mut alpha = T::one();
    let mut improved = false;
    let mut done = 0;
    let tiny = T::lit(1e-12);
    for it in 0..iterations {
        done = it;
        let gnorm = norm2(&g);
        if !gnorm.is_finite() || gnorm <= tiny {
            break;
        }
        let mut trial_alpha = alpha;
        let mut next = None;
        for _ in 0..60 {
            let cand: Vec<T> = x
                .iter()
                .zip(&g)
                .zip(scales)
                .map(|((&xi, &gi), &s)| xi + trial_alpha * gi * s)
                .collect();
            let fc = target.log_density(&cand)?;
            if fc.is_finite() && fc > fx {
                next = Some((cand, fc));
                break;
            }
            trial_alpha *= T::lit(0.5);
        }
        let Some((cand, fc)) = next else { break };
        let gc = gradient(&cand)?;
        // BB1 step in scaled coordinates
        let mut ss = T::zero();
        let mut sy = T::zero();
        for j in 0..dim {
            let sj = (cand[j] - x[j]) / scales[j];
            ss += sj * sj;
            sy += sj * (g[j] - gc[j]);
        }
        alpha = if sy > T::zero() && (ss / sy).is_finite() { ss / sy } else { trial_alpha * T::lit(2.0) };
        x = cand;
        fx = fc;
        g = gc;
        improved = true;
        done = it + 1;
    }
    let at_stationary = norm2(&g) <= tiny;
    Ok(WarmStart {
        point: x,
        value: fx,
        iterations: done,
        stalled: !improved && !at_stationary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::FnDensity;
    use approx::assert_abs_diff_eq;

    fn std_normal() -> FnDensity<impl Fn(&[f64]) -> f64 + Send + Sync> {
        FnDensity::new(1, |x: &[f64]| -0.5 * x[0] * x[0])
    }

    #[test]
    fn thinning_arithmetic() {
        let states = Matrix::from_vec(10, 1, (1..=10).map(f64::from).collect()).unwrap();
        assert_eq!(thin(&states, 4, 2).unwrap().into_vec(), vec![6.0, 8.0, 10.0]);
        assert_eq!(thin(&states, 0, 1).unwrap().rows(), 10);
        assert!(thin(&states, 10, 1).is_err());
        let big = Matrix::<f64>::zeros(1_000_000, 1);
        assert_eq!(thin(&big, 100_000, 5).unwrap().rows(), 180_000);
    }

    #[test]
    fn zero_jump_accepts_everything() {
        let s = McmcSettings {
            steps: 50,
            jump_size: 0.0,
            adapt: false,
            tune_initial_scale: false,
            ..Default::default()
        };
        let c = run_chain(&std_normal(), &[0.7], &[1.0], &s, 3).unwrap();
        assert_eq!(c.accepted, 50);
        assert!(c.states.as_slice().iter().all(|&x| x == 0.7));
    }

    #[test]
    fn standard_normal_moments() {
        let s = McmcSettings {
            steps: 200_000,
            ..Default::default()
        };
        let c = run_chain(&std_normal(), &[0.0], &[1.0], &s, 11).unwrap();
        let x = postprocess(&c, 1000, 1).unwrap().into_vec();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.05, "sd {sd}");
        let rate = c.adaptive_acceptance_rate().unwrap();
        assert!((0.1..=0.5).contains(&rate), "acceptance {rate}");
    }

    #[test]
    fn same_seed_same_chain() {
        let s = McmcSettings {
            steps: 3000,
            ..Default::default()
        };
        let a = run_chain(&std_normal(), &[0.3], &[1.0], &s, 5).unwrap();
        let b = run_chain(&std_normal(), &[0.3], &[1.0], &s, 5).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&std_normal(), &[0.3], &[1.0], &s, 6).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn states_change_only_on_acceptance() {
        let s = McmcSettings {
            steps: 2000,
            ..Default::default()
        };
        let c = run_chain(&std_normal(), &[0.3], &[1.0], &s, 9).unwrap();
        let moves = c.states.as_slice().windows(2).filter(|w| w[0] != w[1]).count()
            + usize::from(c.states.row(0)[0] != 0.3);
        assert_eq!(moves, c.accepted);
        for (row, lp) in c.states.iter_rows().zip(&c.logpost) {
            assert_eq!(-0.5 * row[0] * row[0], *lp);
        }
    }

    #[test]
    fn chain_size_cap() {
        let s = McmcSettings {
            steps: 1000,
            max_entries: 999,
            ..Default::default()
        };
        assert!(matches!(
            run_chain(&std_normal(), &[0.0], &[1.0], &s, 0),
            Err(Error::ChainTooLarge { .. })
        ));
    }

    #[test]
    fn non_finite_start_rejected() {
        let t = FnDensity::new(1, |_: &[f64]| f64::NEG_INFINITY);
        assert!(run_chain(&t, &[0.0], &[1.0], &McmcSettings::default(), 0).is_err());
    }

    #[test]
    fn map_prefers_earliest_maximum() {
        let c = Chain {
            states: Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            logpost: vec![-1.0, 0.0, 0.0, -2.0],
            accepted: 3,
            seed: 0,
            adaptation: AdaptationSummary {
                start: None,
                tuned_jump: 1.0,
                final_proposal_sd: vec![1.0],
                adaptive_steps: 0,
                adaptive_accepted: 0,
            },
        };
        assert_eq!(map_estimate(&c).unwrap(), (vec![2.0], 0.0));
    }

    #[test]
    fn warm_start_finds_quadratic_mode() {
        let t = FnDensity::new(2, |x: &[f64]| {
            -((x[0] - 1.5).powi(2) / 0.01 + (x[1] + 20.0).powi(2) / 4.0 + 0.3 * (x[0] - 1.5) * (x[1] + 20.0))
        });
        let w = warm_start(&t, &[0.0, 0.0], &[0.1, 2.0], 200).unwrap();
        assert_abs_diff_eq!(w.point[0], 1.5, epsilon = 1e-4);
        assert_abs_diff_eq!(w.point[1], -20.0, epsilon = 1e-4);
        assert!(!w.stalled);

        let at_mode = warm_start(&t, &w.point, &[0.1, 2.0], 10).unwrap();
        assert!(at_mode.value >= w.value);
    }

    #[test]
    fn warm_start_at_mode_returns_start() {
        let w = warm_start(&std_normal(), &[0.0], &[1.0], 20).unwrap();
        assert_eq!(w.point, vec![0.0]);
        assert!(!w.stalled);
    }

    #[test]
    fn chain_csv_round_trip() {
        let s = McmcSettings {
            steps: 20,
            ..Default::default()
        };
        let c = run_chain(&std_normal(), &[0.1], &[1.0], &s, 2).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&["x"], &mut buf).unwrap();
        let back = ChainArchive::<f64>::read_csv(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.states, c.states);
        assert_eq!(back.logpost, c.logpost);
        assert_eq!(back.names, vec!["x"]);
    }
}
