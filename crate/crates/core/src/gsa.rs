//! Variance-based global sensitivity analysis: total-effect Sobol indices
//! read off PCE coefficients, parameter ranking with variance-threshold
//! truncation, and a sampling-based Jansen estimator used as an oracle.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::pce::{PceSurrogate, SurrogateFamily};
use crate::scalar::Scalar;

/// Total-effect indices `S_j = sum_{u_j > 0} c_u^2 / sum_{u != 0} c_u^2`.
///
/// Interactions are counted once per participating parameter, so the
/// indices sum to at least one.
pub fn total_sobol<T: Scalar>(surrogate: &PceSurrogate<T>) -> Result<Vec<T>> {
    let variance = surrogate.variance();
    if !(variance > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let mut totals = vec![T::zero(); surrogate.dim()];
    for (u, &c) in surrogate.indices().iter().zip(surrogate.coefficients()) {
        for (t, &d) in totals.iter_mut().zip(u.degrees()) {
            if d > 0 {
                *t += c * c;
            }
        }
    }
    totals.iter_mut().for_each(|t| *t /= variance);
    Ok(totals)
}

/// Indices at one station; `None` marks a constant (zero-variance) surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct StationIndices<T> {
    pub station: String,
    pub indices: Option<Vec<T>>,
}

/// Total-effect indices for every station of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable<T> {
    pub experiment: u32,
    pub parameters: Vec<String>,
    pub stations: Vec<StationIndices<T>>,
}

impl<T: Scalar> SensitivityTable<T> {
    /// Indices of every station surrogate in `family`. Parameters with
    /// `active[j] == false` are reported as zero for this experiment.
    pub fn from_family(
        experiment: u32,
        family: &SurrogateFamily<T>,
        active: Option<&[bool]>,
    ) -> Result<Self> {
        let s = family.space().len();
        if let Some(mask) = active {
            if mask.len() != s {
                return Err(Error::DimensionMismatch {
                    expected: s,
                    got: mask.len(),
                });
            }
        }
        let stations = family
            .coords()
            .iter()
            .zip(family.surrogates())
            .map(|(coord, surr)| {
                let label = coord
                    .iter()
                    .map(|c| format!("{}", c.as_f64()))
                    .collect::<Vec<_>>()
                    .join(";");
                let indices = match total_sobol(surr) {
                    Ok(mut v) => {
                        if let Some(mask) = active {
                            for (x, &on) in v.iter_mut().zip(mask) {
                                if !on {
                                    *x = T::zero();
                                }
                            }
                        }
                        Some(v)
                    }
                    Err(Error::ZeroVariance) => None,
                    Err(e) => return Err(e),
                };
                Ok(StationIndices {
                    station: label,
                    indices,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            experiment,
            parameters: family.space().names().iter().map(|n| n.to_string()).collect(),
            stations,
        })
    }

    /// Per-parameter maximum over stations.
    pub fn max_indices(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.parameters.len()];
        for st in &self.stations {
            if let Some(v) = &st.indices {
                for (m, &x) in out.iter_mut().zip(v) {
                    *m = (*m).max(x);
                }
            }
        }
        out
    }

    pub fn zero_variance_stations(&self) -> Vec<&str> {
        self.stations
            .iter()
            .filter(|s| s.indices.is_none())
            .map(|s| s.station.as_str())
            .collect()
    }

    /// Appends `experiment,station,parameter,total_index` rows.
    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for st in &self.stations {
            if let Some(v) = &st.indices {
                for (name, x) in self.parameters.iter().zip(v) {
                    w.write_record([
                        self.experiment.to_string(),
                        st.station.clone(),
                        name.clone(),
                        format!("{:e}", x.as_f64()),
                    ])?;
                }
            }
        }
        Ok(())
    }
}

/// Writes a full sensitivity CSV for several tables.
pub fn write_sensitivity_csv<T: Scalar, W: Write>(tables: &[SensitivityTable<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment", "station", "parameter", "total_index"])?;
    for t in tables {
        t.write_rows(&mut w)?;
    }
    w.flush().map_err(|e| Error::io("<sensitivity>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry<T> {
    pub rank: usize,
    pub parameter: usize,
    pub name: String,
    pub max_index: T,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truncation<T> {
    /// All parameters, most important first.
    pub ranking: Vec<RankEntry<T>>,
    /// Retained parameter indices in rank order.
    pub retained: Vec<usize>,
    /// Variance fraction explained per table by the retained set.
    pub coverage: Vec<T>,
    /// Set when the threshold could not be met and every parameter was kept.
    pub warning: bool,
}

impl<T: Scalar> Truncation<T> {
    pub fn retained_names(&self) -> Vec<&str> {
        self.retained
            .iter()
            .map(|&j| {
                self.ranking
                    .iter()
                    .find(|r| r.parameter == j)
                    .map(|r| r.name.as_str())
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "parameter", "max_index", "retained"])?;
        for r in &self.ranking {
            w.write_record([
                r.rank.to_string(),
                r.name.clone(),
                format!("{:e}", r.max_index.as_f64()),
                r.retained.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<ranking>", e))?;
        Ok(())
    }
}

/// Ranks parameters by their largest total index over all experiments and
/// stations, then keeps the shortest prefix for which every experiment's
/// summed per-parameter maxima reach `threshold`.
///
/// With `clamp`, each experiment's sum is capped at one before comparison.
/// Experiments without variance count as covered. A threshold of one or more,
/// or one no prefix reaches, keeps every parameter and sets `warning`.
pub fn rank_and_truncate<T: Scalar>(
    tables: &[SensitivityTable<T>],
    threshold: T,
    clamp: bool,
) -> Result<Truncation<T>> {
    let first = tables
        .first()
        .ok_or_else(|| Error::invalid("no sensitivity tables given"))?;
    if !(threshold > T::zero()) {
        return Err(Error::invalid(format!("threshold must be positive, got {threshold}")));
    }
    let names = &first.parameters;
    if let Some(t) = tables.iter().find(|t| &t.parameters != names) {
        return Err(Error::invalid(format!(
            "experiment {} uses a different parameter list",
            t.experiment
        )));
    }
    let per_table: Vec<Vec<T>> = tables.iter().map(|t| t.max_indices()).collect();
    let score: Vec<T> = (0..names.len())
        .map(|j| per_table.iter().fold(T::zero(), |m, v| m.max(v[j])))
        .collect();
    let mut order: Vec<usize> = (0..names.len()).collect();
    // stable sort keeps parameter order on ties
    order.sort_by(|&a, &b| score[b].partial_cmp(&score[a]).unwrap_or(std::cmp::Ordering::Equal));

    let coverage_of = |count: usize| -> Vec<T> {
        per_table
            .iter()
            .map(|v| {
                let sum: T = order[..count].iter().map(|&j| v[j]).sum();
                if clamp {
                    sum.min(T::one())
                } else {
                    sum
                }
            })
            .collect()
    };
    let has_variance: Vec<bool> = per_table.iter().map(|v| v.iter().any(|&x| x > T::zero())).collect();
    let satisfied = |cov: &[T]| {
        cov.iter()
            .zip(&has_variance)
            .all(|(&c, &var)| !var || c >= threshold)
    };

    let mut count = names.len();
    let mut warning = true;
    if threshold < T::one() {
        if let Some(k) = (1..=names.len()).find(|&k| satisfied(&coverage_of(k))) {
            count = k;
            warning = false;
        }
    }
    let retained: Vec<usize> = order[..count].to_vec();
    let ranking = order
        .iter()
        .enumerate()
        .map(|(r, &j)| RankEntry {
            rank: r + 1,
            parameter: j,
            name: names[j].clone(),
            max_index: score[j],
            retained: r < count,
        })
        .collect();
    Ok(Truncation {
        ranking,
        retained,
        coverage: coverage_of(count),
        warning,
    })
}

/// Jansen total-effect estimator on the reference cube `[-1, 1]^s` with
/// uniform inputs.
///
/// For each of `n` base rows `a`, `b` and each `j`, the model is evaluated at
/// `a` with coordinate `j` taken from `b`; `S_j` is
/// `mean((f(a) - f(a_b^j))^2) / (2 Var f)`. Rows with any non-finite output
/// are discarded; more than 1% discarded is an error.
pub fn mc_sobol_total<T, F>(model: F, dim: usize, n: usize, seed: u64) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    if n < 1000 {
        return Err(Error::invalid(format!("at least 1000 base samples required, got {n}")));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut a = vec![T::zero(); dim];
    let mut b = vec![T::zero(); dim];
    let mut ab = vec![T::zero(); dim];
    let mut fab = vec![T::zero(); dim];
    // f64 accumulators regardless of T
    let mut sq = vec![0.0f64; dim];
    let (mut sum, mut sum2, mut used, mut failed) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..n {
        for x in a.iter_mut().chain(b.iter_mut()) {
            *x = T::lit(rng.random_range(-1.0..=1.0));
        }
        let fa = model(&a);
        let fb = model(&b);
        let mut ok = fa.is_finite() && fb.is_finite();
        for j in 0..dim {
            ab.copy_from_slice(&a);
            ab[j] = b[j];
            fab[j] = model(&ab);
            ok &= fab[j].is_finite();
        }
        if !ok {
            failed += 1;
            continue;
        }
        let (fa, fb) = (fa.as_f64(), fb.as_f64());
        for j in 0..dim {
            let d = fa - fab[j].as_f64();
            sq[j] += d * d;
        }
        sum += fa + fb;
        sum2 += fa * fa + fb * fb;
        used += 1;
    }
    if failed * 100 > n {
        return Err(Error::Numerical(format!(
            "{failed} of {n} sample rows produced non-finite outputs"
        )));
    }
    let m = 2.0 * used as f64;
    let mean = sum / m;
    let var = sum2 / m - mean * mean;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(sq.iter().map(|&s| T::lit(s / (2.0 * used as f64) / var)).collect())
}
