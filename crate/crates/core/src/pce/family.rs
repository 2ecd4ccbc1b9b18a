use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pce::multi_index::MultiIndex;
use crate::pce::surrogate::{fit_surrogate, FitOptions, FitReport, PceSurrogate};
use crate::scalar::Scalar;
use crate::space::ParameterSpace;

/// Station surrogates for one observable, keyed by station coordinate.
///
/// Scalar-coordinate families (e.g. temperature) support linear
/// interpolation of coefficients between stations; two-dimensional families
/// only answer exact station lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFamily<T> {
    space: Arc<ParameterSpace<T>>,
    coord_dim: usize,
    coords: Vec<Vec<T>>,
    surrogates: Vec<PceSurrogate<T>>,
}

impl<T: Scalar> SurrogateFamily<T> {
    pub fn new(coords: Vec<Vec<T>>, surrogates: Vec<PceSurrogate<T>>) -> Result<Self> {
        if coords.is_empty() || coords.len() != surrogates.len() {
            return Err(Error::invalid(format!(
                "family needs one surrogate per station ({} coordinates, {} surrogates)",
                coords.len(),
                surrogates.len()
            )));
        }
        let coord_dim = coords[0].len();
        if !(1..=2).contains(&coord_dim) || coords.iter().any(|c| c.len() != coord_dim) {
            return Err(Error::invalid("station coordinates must all have dimension 1 or 2"));
        }
        let space = surrogates[0].space().clone();
        if surrogates.iter().any(|s| s.space().as_ref() != space.as_ref()) {
            return Err(Error::invalid("family surrogates must share one parameter space"));
        }
        if coord_dim == 1 {
            if coords.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                return Err(Error::invalid("station coordinates must be strictly increasing"));
            }
        } else {
            for (i, a) in coords.iter().enumerate() {
                if coords[..i].contains(a) {
                    return Err(Error::invalid(format!("duplicate station coordinate {a:?}")));
                }
            }
        }
        Ok(Self {
            space,
            coord_dim,
            coords,
            surrogates,
        })
    }

    pub fn space(&self) -> &Arc<ParameterSpace<T>> {
        &self.space
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    pub fn coords(&self) -> &[Vec<T>] {
        &self.coords
    }

    pub fn surrogates(&self) -> &[PceSurrogate<T>] {
        &self.surrogates
    }

    pub fn len(&self) -> usize {
        self.surrogates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surrogates.is_empty()
    }

    fn bracket(&self, t: T) -> Result<(usize, T)> {
        if self.coord_dim != 1 {
            return Err(Error::invalid("interpolation needs scalar station coordinates"));
        }
        let (lo, hi) = (self.coords[0][0], self.coords[self.len() - 1][0]);
        if !(t >= lo && t <= hi) {
            return Err(Error::Extrapolation {
                t: t.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        // first station with coordinate >= t
        let i = self.coords.partition_point(|c| c[0] < t);
        if self.coords[i][0] == t || i == 0 {
            return Ok((i, T::zero()));
        }
        let (t0, t1) = (self.coords[i - 1][0], self.coords[i][0]);
        Ok((i - 1, (t - t0) / (t1 - t0)))
    }

    /// Surrogate at scalar coordinate `t`, interpolating coefficients linearly
    /// over the union of the bracketing index sets. At a station coordinate
    /// the station's own surrogate is returned.
    pub fn interpolate(&self, t: T) -> Result<PceSurrogate<T>> {
        let (i, w) = self.bracket(t)?;
        if w == T::zero() {
            return Ok(self.surrogates[i].clone());
        }
        let (a, b) = (&self.surrogates[i], &self.surrogates[i + 1]);
        let mut merged: BTreeMap<MultiIndex, T> = BTreeMap::new();
        for (u, &c) in a.indices().iter().zip(a.coefficients()) {
            *merged.entry(u.clone()).or_insert_with(T::zero) += (T::one() - w) * c;
        }
        for (u, &c) in b.indices().iter().zip(b.coefficients()) {
            *merged.entry(u.clone()).or_insert_with(T::zero) += w * c;
        }
        let (indices, coefficients) = merged.into_iter().unzip();
        PceSurrogate::new(self.space.clone(), indices, coefficients)
    }

    /// Linear interpolation of the two bracketing station evaluations.
    pub fn eval_interpolated(&self, t: T, nu: &[T]) -> Result<T> {
        let (i, w) = self.bracket(t)?;
        let f0 = self.surrogates[i].eval(nu)?;
        if w == T::zero() {
            return Ok(f0);
        }
        let f1 = self.surrogates[i + 1].eval(nu)?;
        Ok((T::one() - w) * f0 + w * f1)
    }

    /// Surrogate for a data station: interpolated for scalar families,
    /// matched within a relative 1e-9 for two-dimensional ones.
    pub fn surrogate_at(&self, coord: &[T]) -> Result<PceSurrogate<T>> {
        if coord.len() != self.coord_dim {
            return Err(Error::DimensionMismatch {
                expected: self.coord_dim,
                got: coord.len(),
            });
        }
        if self.coord_dim == 1 {
            return self.interpolate(coord[0]);
        }
        let tol = T::lit(1e-9);
        self.coords
            .iter()
            .position(|c| {
                c.iter()
                    .zip(coord)
                    .all(|(&a, &b)| (a - b).abs() <= tol * T::one().max(a.abs()))
            })
            .map(|i| self.surrogates[i].clone())
            .ok_or_else(|| Error::StationNotFound(coord.iter().map(|c| c.as_f64()).collect()))
    }
}

/// Fits one surrogate per station from a shared training design.
///
/// `outputs` holds one column per station. Scalar coordinates are sorted
/// first; the returned reports follow the family's station order. Stations are
/// fitted in parallel.
pub fn fit_family<T: Scalar>(
    space: Arc<ParameterSpace<T>>,
    coords: &[Vec<T>],
    inputs: &Matrix<T>,
    outputs: &Matrix<T>,
    opts: &FitOptions<T>,
) -> Result<(SurrogateFamily<T>, Vec<FitReport<T>>)> {
    if outputs.cols() != coords.len() {
        return Err(Error::DimensionMismatch {
            expected: coords.len(),
            got: outputs.cols(),
        });
    }
    let mut order: Vec<usize> = (0..coords.len()).collect();
    if coords.first().is_some_and(|c| c.len() == 1) {
        order.sort_by(|&a, &b| {
            coords[a][0]
                .partial_cmp(&coords[b][0])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }
    let reports = order
        .par_iter()
        .map(|&n| fit_surrogate(space.clone(), inputs, &outputs.column(n), opts))
        .collect::<Result<Vec<_>>>()?;
    let family = SurrogateFamily::new(
        order.iter().map(|&n| coords[n].clone()).collect(),
        reports.iter().map(|r| r.surrogate.clone()).collect(),
    )?;
    Ok((family, reports))
}
