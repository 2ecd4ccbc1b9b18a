use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::pce::legendre::fill_normalized;
use crate::pce::multi_index::{total_order_index_set_capped, MultiIndex, DEFAULT_TERM_CAP};
use crate::scalar::Scalar;
use crate::space::ParameterSpace;

/// Sparse expansion `sum_u c_u prod_j phi_{u_j}(xi_j)` over the reference
/// coordinates of a parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct PceSurrogate<T> {
    space: Arc<ParameterSpace<T>>,
    indices: Vec<MultiIndex>,
    coefficients: Vec<T>,
    max_degree: Vec<usize>,
}

impl<T: Scalar> PceSurrogate<T> {
    /// Terms are stored in graded order. A missing constant term is added
    /// with a zero coefficient.
    pub fn new(
        space: Arc<ParameterSpace<T>>,
        indices: Vec<MultiIndex>,
        coefficients: Vec<T>,
    ) -> Result<Self> {
        if indices.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: coefficients.len(),
            });
        }
        let s = space.len();
        if let Some(u) = indices.iter().find(|u| u.dim() != s) {
            return Err(Error::DimensionMismatch {
                expected: s,
                got: u.dim(),
            });
        }
        let mut terms: Vec<(MultiIndex, T)> = indices.into_iter().zip(coefficients).collect();
        if !terms.iter().any(|(u, _)| u.is_constant()) {
            terms.push((MultiIndex::zero(s), T::zero()));
        }
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = terms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!(
                "duplicate multi-index {:?}",
                w[0].0.degrees()
            )));
        }
        let mut max_degree = vec![0usize; s];
        for (u, _) in &terms {
            for (m, &d) in max_degree.iter_mut().zip(u.degrees()) {
                *m = (*m).max(d as usize);
            }
        }
        let (indices, coefficients) = terms.into_iter().unzip();
        Ok(Self {
            space,
            indices,
            coefficients,
            max_degree,
        })
    }

    pub fn constant(space: Arc<ParameterSpace<T>>, value: T) -> Self {
        let s = space.len();
        Self::new(space, vec![MultiIndex::zero(s)], vec![value]).expect("constant surrogate")
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn space(&self) -> &Arc<ParameterSpace<T>> {
        &self.space
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn coefficient(&self, u: &MultiIndex) -> Option<T> {
        self.indices
            .binary_search(u)
            .ok()
            .map(|i| self.coefficients[i])
    }

    pub fn mean(&self) -> T {
        self.coefficient(&MultiIndex::zero(self.dim()))
            .unwrap_or_else(T::zero)
    }

    /// Output variance under uniform inputs: the sum of squared
    /// non-constant coefficients.
    pub fn variance(&self) -> T {
        self.indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(u, _)| !u.is_constant())
            .map(|(_, &c)| c * c)
            .sum()
    }

    pub fn eval(&self, nu: &[T]) -> Result<T> {
        if nu.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: nu.len(),
            });
        }
        Ok(self.eval_unchecked(nu))
    }

    /// Evaluation without the dimension check. Points outside the bounds
    /// extrapolate the polynomial.
    pub fn eval_unchecked(&self, nu: &[T]) -> T {
        let tables = basis_tables(&self.space, &self.max_degree, nu);
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(u, &c)| c * product(&tables, u))
            .sum()
    }

    pub fn eval_rows(&self, inputs: &Matrix<T>) -> Result<Vec<T>> {
        inputs.iter_rows().map(|r| self.eval(r)).collect()
    }
}

struct Tables<T> {
    offsets: Vec<usize>,
    values: Vec<T>,
}

fn basis_tables<T: Scalar>(space: &ParameterSpace<T>, max_degree: &[usize], nu: &[T]) -> Tables<T> {
    let xi = space.to_reference(nu);
    let mut offsets = Vec::with_capacity(max_degree.len());
    let mut total = 0;
    for &m in max_degree {
        offsets.push(total);
        total += m + 1;
    }
    let mut values = vec![T::zero(); total];
    for (j, &m) in max_degree.iter().enumerate() {
        fill_normalized(xi[j], &mut values[offsets[j]..offsets[j] + m + 1]);
    }
    Tables { offsets, values }
}

#[inline]
fn product<T: Scalar>(t: &Tables<T>, u: &MultiIndex) -> T {
    let mut p = T::one();
    for (j, &d) in u.degrees().iter().enumerate() {
        if d > 0 {
            p *= t.values[t.offsets[j] + d as usize];
        }
    }
    p
}

/// Design matrix `Psi[l, i] = Phi_{u_i}(xi(nu_l))`.
pub fn design_matrix<T: Scalar>(
    space: &ParameterSpace<T>,
    indices: &[MultiIndex],
    inputs: &Matrix<T>,
) -> Matrix<T> {
    let mut max_degree = vec![0usize; space.len()];
    for u in indices {
        for (m, &d) in max_degree.iter_mut().zip(u.degrees()) {
            *m = (*m).max(d as usize);
        }
    }
    let mut psi = Matrix::zeros(inputs.rows(), indices.len());
    for (l, nu) in inputs.iter_rows().enumerate() {
        let tables = basis_tables(space, &max_degree, nu);
        for (i, u) in indices.iter().enumerate() {
            psi[(l, i)] = product(&tables, u);
        }
    }
    psi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Total order of the starting index set.
    pub order: usize,
    /// Relative magnitude below which non-constant terms are pruned.
    pub prune_threshold: T,
    /// Maximum number of prune-and-refit passes; 0 disables pruning.
    pub max_passes: usize,
    pub term_cap: usize,
}

impl<T: Scalar> FitOptions<T> {
    pub fn order(order: usize) -> Self {
        Self {
            order,
            prune_threshold: T::lit(1e-4),
            max_passes: 5,
            term_cap: DEFAULT_TERM_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport<T> {
    pub surrogate: PceSurrogate<T>,
    /// Training rows dropped because the model output was not finite.
    pub dropped_failures: usize,
    pub rows_used: usize,
    pub prune_passes: usize,
    /// Relative l2 error on the retained training rows.
    pub train_error: T,
}

/// Least-squares fit of a total-order expansion followed by iterative
/// magnitude pruning.
///
/// Each pass drops non-constant terms with `|c_u| < tau * max_{u != 0} |c_u|`
/// (and terms at round-off level relative to the largest coefficient), then
/// refits on the surviving basis.
pub fn fit_surrogate<T: Scalar>(
    space: Arc<ParameterSpace<T>>,
    inputs: &Matrix<T>,
    outputs: &[T],
    opts: &FitOptions<T>,
) -> Result<FitReport<T>> {
    let s = space.len();
    if inputs.cols() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            got: inputs.cols(),
        });
    }
    if inputs.rows() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.rows(),
            got: outputs.len(),
        });
    }
    let slack = T::one() + T::lit(1e-9);
    for (l, row) in inputs.iter_rows().enumerate() {
        if space.to_reference(row).iter().any(|x| !(x.abs() <= slack)) {
            return Err(Error::invalid(format!(
                "training sample {} lies outside the parameter bounds",
                l + 1
            )));
        }
    }

    let keep: Vec<usize> = (0..outputs.len()).filter(|&l| outputs[l].is_finite()).collect();
    let dropped = outputs.len() - keep.len();
    if keep.is_empty() {
        return Err(Error::AllOutputsNonFinite(outputs.len()));
    }
    let rows: Vec<&[T]> = keep.iter().map(|&l| inputs.row(l)).collect();
    let x = Matrix::from_rows(&rows)?;
    let y: Vec<T> = keep.iter().map(|&l| outputs[l]).collect();

    let mut indices = total_order_index_set_capped(s, opts.order, opts.term_cap)?;
    if y.len() < indices.len() {
        return Err(Error::InsufficientSamples {
            required: indices.len(),
            terms: indices.len(),
            got: y.len(),
        });
    }
    let mut coefficients = least_squares(&design_matrix(&space, &indices, &x), &y)?;
    let noise_floor = T::epsilon() * T::lit(1e3);
    let mut passes = 0;
    while passes < opts.max_passes {
        let largest = coefficients.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        let largest_varying = indices
            .iter()
            .zip(&coefficients)
            .filter(|(u, _)| !u.is_constant())
            .fold(T::zero(), |m, (_, c)| m.max(c.abs()));
        let cut = (opts.prune_threshold * largest_varying).max(noise_floor * largest);
        let survivors: Vec<usize> = (0..indices.len())
            .filter(|&i| indices[i].is_constant() || coefficients[i].abs() >= cut)
            .collect();
        if survivors.len() == indices.len() {
            break;
        }
        passes += 1;
        indices = survivors.iter().map(|&i| indices[i].clone()).collect();
        coefficients = least_squares(&design_matrix(&space, &indices, &x), &y)?;
    }

    let surrogate = PceSurrogate::new(space, indices, coefficients)?;
    let fitted = surrogate.eval_rows(&x)?;
    let train_error = relative_l2_error(&y, &fitted)?;
    Ok(FitReport {
        surrogate,
        dropped_failures: dropped,
        rows_used: y.len(),
        prune_passes: passes,
        train_error,
    })
}

/// `sqrt(sum (f - g)^2 / sum f^2)` over all entries of two equally shaped
/// (flattened) output matrices.
pub fn relative_l2_error<T: Scalar>(reference: &[T], approx: &[T]) -> Result<T> {
    if reference.len() != approx.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: approx.len(),
        });
    }
    let den: T = reference.iter().map(|&f| f * f).sum();
    if den == T::zero() {
        return Err(Error::invalid("relative error undefined for all-zero reference outputs"));
    }
    let num: T = reference
        .iter()
        .zip(approx)
        .map(|(&f, &g)| (f - g) * (f - g))
        .sum();
    Ok((num / den).sqrt())
}
