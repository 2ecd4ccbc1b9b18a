//! Log-density assembly: Gaussian and log-pooled likelihoods, weighted
//! combination across experiments, the Gaussian prior and the posterior.
//!
//! Everything is computed in log space.

use std::sync::Arc;

use crate::data::SyntheticDataCollection;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::GaussianPrior;

/// A (possibly unnormalised) log density over parameter vectors.
///
/// Implementations must be pure so chains can share them across threads.
pub trait LogDensity<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, nu: &[T]) -> Result<T>;

    fn labels(&self) -> Vec<String> {
        Vec::new()
    }
}

impl<T: Scalar, D: LogDensity<T> + ?Sized> LogDensity<T> for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, nu: &[T]) -> Result<T> {
        (**self).log_density(nu)
    }
    fn labels(&self) -> Vec<String> {
        (**self).labels()
    }
}

impl<T: Scalar, D: LogDensity<T> + ?Sized> LogDensity<T> for Arc<D> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, nu: &[T]) -> Result<T> {
        (**self).log_density(nu)
    }
    fn labels(&self) -> Vec<String> {
        (**self).labels()
    }
}

/// Wraps a closure as a [`LogDensity`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> T + Send + Sync> LogDensity<T> for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, nu: &[T]) -> Result<T> {
        check_dim(self.dim, nu.len())?;
        Ok((self.f)(nu))
    }
}

/// Maps a parameter vector to model predictions at one experiment's stations.
pub trait Predictor<T: Scalar>: Send + Sync {
    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// Number of stations predicted.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn predict(&self, nu: &[T], out: &mut [T]) -> Result<()>;

    fn predict_vec(&self, nu: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.len()];
        self.predict(nu, &mut out)?;
        Ok(out)
    }
}

/// Predictor backed by a closure `(nu, out)`.
pub struct FnPredictor<F> {
    dim: usize,
    len: usize,
    f: F,
}

impl<F> FnPredictor<F> {
    pub fn new(dim: usize, len: usize, f: F) -> Self {
        Self { dim, len, f }
    }
}

impl<T: Scalar, F: Fn(&[T], &mut [T]) + Send + Sync> Predictor<T> for FnPredictor<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.len
    }
    fn predict(&self, nu: &[T], out: &mut [T]) -> Result<()> {
        check_dim(self.dim, nu.len())?;
        check_dim(self.len, out.len())?;
        (self.f)(nu, out);
        Ok(())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn ln_two_pi<T: Scalar>() -> T {
    (T::PI() + T::PI()).ln()
}

/// `-1/2 sum_n [ln(2 pi sigma_n^2) + (q_n - f_n)^2 / sigma_n^2]`.
pub fn gaussian_loglik<T: Scalar>(q: &[T], f: &[T], sigma: &[T]) -> Result<T> {
    check_dim(q.len(), f.len())?;
    check_dim(q.len(), sigma.len())?;
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for ((&q, &f), &s) in q.iter().zip(f).zip(sigma) {
        if !(s > T::zero()) {
            return Err(Error::invalid(format!("noise sd must be positive, got {s}")));
        }
        let r = (q - f) / s;
        acc += ln_two_pi::<T>() + (s * s).ln() + r * r;
    }
    Ok(-half * acc)
}

/// Log-pooled likelihood of `K` synthetic replicates with variance `beta s^2`:
/// `-1/2 sum_n [ln(2 pi beta s_n^2) + (1/(K beta s_n^2)) sum_k (z_nk - f_n)^2]`.
///
/// Uses `sum_k (z - f)^2 = K (zbar - f)^2 + SS`, so the cost is O(N).
pub fn pooled_loglik<T: Scalar>(z: &SyntheticDataCollection<T>, f: &[T]) -> Result<T> {
    check_dim(z.stations(), f.len())?;
    let beta = z.beta();
    let k = T::from_usize_lossy(z.replicates());
    let mut acc = T::zero();
    for (((&f, &s), &m), &ss) in f
        .iter()
        .zip(z.reported_s())
        .zip(z.station_mean())
        .zip(z.station_ss())
    {
        let var = beta * s * s;
        let d = m - f;
        acc += ln_two_pi::<T>() + var.ln() + (k * d * d + ss) / (k * var);
    }
    Ok(-T::lit(0.5) * acc)
}

/// `alpha_d = N_d^-1 / sum_e N_e^-1`.
pub fn default_weights<T: Scalar>(counts: &[usize]) -> Result<Vec<T>> {
    if counts.is_empty() {
        return Err(Error::invalid("no station counts given"));
    }
    if counts.contains(&0) {
        return Err(Error::invalid("station counts must be at least 1"));
    }
    let inv: Vec<T> = counts
        .iter()
        .map(|&n| T::one() / T::from_usize_lossy(n))
        .collect();
    let total: T = inv.iter().copied().sum();
    Ok(inv.into_iter().map(|x| x / total).collect())
}

struct Term<T: Scalar> {
    data: SyntheticDataCollection<T>,
    predictor: Arc<dyn Predictor<T>>,
    factor: T,
}

/// Sum of per-experiment pooled likelihoods, optionally weighted as
/// `D * sum_d alpha_d l_d`.
pub struct CombinedLikelihood<T: Scalar> {
    terms: Vec<Term<T>>,
    dim: usize,
    weighted: bool,
}

impl<T: Scalar> CombinedLikelihood<T> {
    pub fn new(
        collections: Vec<SyntheticDataCollection<T>>,
        predictors: Vec<Arc<dyn Predictor<T>>>,
        weights: Option<Vec<T>>,
    ) -> Result<Self> {
        if collections.is_empty() {
            return Err(Error::invalid("at least one experiment is required"));
        }
        check_dim(collections.len(), predictors.len())?;
        let dim = predictors[0].dim();
        for (c, p) in collections.iter().zip(&predictors) {
            check_dim(dim, p.dim())?;
            if p.len() != c.stations() {
                return Err(Error::invalid(format!(
                    "experiment {}: predictor covers {} stations, data has {}",
                    c.set_id(),
                    p.len(),
                    c.stations()
                )));
            }
        }
        let d = T::from_usize_lossy(collections.len());
        let factors = match &weights {
            None => vec![T::one(); collections.len()],
            Some(w) => {
                check_dim(collections.len(), w.len())?;
                if w.iter().any(|&a| !(a > T::zero())) {
                    return Err(Error::invalid("weights must be positive"));
                }
                let sum: T = w.iter().copied().sum();
                if (sum - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
                    return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
                }
                w.iter().map(|&a| d * a).collect()
            }
        };
        let terms = collections
            .into_iter()
            .zip(predictors)
            .zip(factors)
            .map(|((data, predictor), factor)| Term {
                data,
                predictor,
                factor,
            })
            .collect();
        Ok(Self {
            terms,
            dim,
            weighted: weights.is_some(),
        })
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn experiments(&self) -> usize {
        self.terms.len()
    }

    /// Per-experiment pooled log-likelihoods before weighting.
    pub fn components(&self, nu: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, nu.len())?;
        self.terms
            .iter()
            .map(|t| {
                let f = t.predictor.predict_vec(nu)?;
                pooled_loglik(&t.data, &f)
            })
            .collect()
    }
}

impl<T: Scalar> LogDensity<T> for CombinedLikelihood<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, nu: &[T]) -> Result<T> {
        check_dim(self.dim, nu.len())?;
        let mut acc = T::zero();
        for t in &self.terms {
            let f = t.predictor.predict_vec(nu)?;
            let l = pooled_loglik(&t.data, &f)?;
            acc += if self.weighted { t.factor * l } else { l };
        }
        Ok(acc)
    }

    fn labels(&self) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| format!("experiment {}", t.data.set_id()))
            .collect()
    }
}

/// `sum_j ln N(nu_j; mu_j, sigma_j^2)`.
pub fn log_prior<T: Scalar>(prior: &GaussianPrior<T>, nu: &[T]) -> Result<T> {
    check_dim(prior.dim(), nu.len())?;
    let mut acc = T::zero();
    for ((&x, &m), &s) in nu.iter().zip(prior.means()).zip(prior.sds()) {
        let r = (x - m) / s;
        acc += ln_two_pi::<T>() + (s * s).ln() + r * r;
    }
    Ok(-T::lit(0.5) * acc)
}

/// Prior plus likelihood, normalising constant dropped.
pub struct Posterior<T: Scalar, L> {
    prior: GaussianPrior<T>,
    likelihood: L,
}

impl<T: Scalar, L: LogDensity<T>> Posterior<T, L> {
    pub fn prior(&self) -> &GaussianPrior<T> {
        &self.prior
    }

    pub fn likelihood(&self) -> &L {
        &self.likelihood
    }
}

pub fn log_posterior<T: Scalar, L: LogDensity<T>>(
    prior: GaussianPrior<T>,
    likelihood: L,
) -> Result<Posterior<T, L>> {
    check_dim(prior.dim(), likelihood.dim())?;
    Ok(Posterior { prior, likelihood })
}

impl<T: Scalar, L: LogDensity<T>> LogDensity<T> for Posterior<T, L> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, nu: &[T]) -> Result<T> {
        Ok(log_prior(&self.prior, nu)? + self.likelihood.log_density(nu)?)
    }

    fn labels(&self) -> Vec<String> {
        let mut l = vec!["prior".to_string()];
        l.extend(self.likelihood.labels());
        l
    }
}
