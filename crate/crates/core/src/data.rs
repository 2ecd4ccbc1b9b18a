//! Experimental data summaries, experiment manifests and synthetic replicate
//! collections.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One experiment's reported means `y` and error bars `s` at its stations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSummarySet<T> {
    id: u32,
    label: String,
    coord_dim: usize,
    stations: Vec<String>,
    coords: Vec<Vec<T>>,
    values: Vec<T>,
    uncertainties: Vec<T>,
}

impl<T: Scalar> DataSummarySet<T> {
    pub fn new(
        id: u32,
        label: impl Into<String>,
        stations: Vec<String>,
        coords: Vec<Vec<T>>,
        values: Vec<T>,
        uncertainties: Vec<T>,
    ) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::invalid(format!("data set {id} has no stations")));
        }
        for len in [stations.len(), coords.len(), uncertainties.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let coord_dim = coords[0].len();
        if !(1..=2).contains(&coord_dim) {
            return Err(Error::invalid(format!(
                "data set {id}: coordinate dimension must be 1 or 2, got {coord_dim}"
            )));
        }
        if let Some(i) = coords.iter().position(|c| c.len() != coord_dim) {
            return Err(Error::invalid(format!(
                "data set {id}: station {} has coordinate dimension {}, expected {coord_dim}",
                i + 1,
                coords[i].len()
            )));
        }
        if let Some(i) = uncertainties.iter().position(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(Error::invalid(format!(
                "data set {id}: station {} has non-positive uncertainty",
                i + 1
            )));
        }
        if let Some(i) = values.iter().position(|y| !y.is_finite()) {
            return Err(Error::invalid(format!(
                "data set {id}: station {} has non-finite value",
                i + 1
            )));
        }
        Ok(Self {
            id,
            label: label.into(),
            coord_dim,
            stations,
            coords,
            values,
            uncertainties,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn coords(&self) -> &[Vec<T>] {
        &self.coords
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn uncertainties(&self) -> &[T] {
        &self.uncertainties
    }

    /// Re-expresses the summaries for a `log10` observable: `y' = log10 y`
    /// and `s' = s / (y ln 10)` (first-order propagation).
    pub fn to_log10(&self) -> Result<Self> {
        if let Some(i) = self.values.iter().position(|y| !(*y > T::zero())) {
            return Err(Error::invalid(format!(
                "data set {}: station {} has non-positive value, log10 space unavailable",
                self.id,
                i + 1
            )));
        }
        let ln10 = T::LN_10();
        Ok(Self {
            values: self.values.iter().map(|y| y.log10()).collect(),
            uncertainties: self
                .values
                .iter()
                .zip(&self.uncertainties)
                .map(|(&y, &s)| s / (y * ln10))
                .collect(),
            ..self.clone()
        })
    }

    pub fn read_csv<R: Read>(
        reader: R,
        origin: &Path,
        id: u32,
        label: &str,
        coord_dim: usize,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let expected: Vec<&str> = match coord_dim {
            1 => vec!["station", "coord1", "y", "s"],
            2 => vec!["station", "coord1", "coord2", "y", "s"],
            d => {
                return Err(Error::invalid(format!(
                    "coordinate dimension must be 1 or 2, got {d}"
                )))
            }
        };
        if headers != expected {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                row: 1,
                message: format!("expected header '{}'", expected.join(",")),
            });
        }
        let (mut stations, mut coords, mut values, mut sds) = (vec![], vec![], vec![], vec![]);
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse {
                        path: origin.to_path_buf(),
                        row,
                        message: "missing field".into(),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        path: origin.to_path_buf(),
                        row,
                        message: format!("field {}: {e}", k + 1),
                    })
            };
            stations.push(rec.get(0).unwrap_or_default().to_string());
            coords.push((1..=coord_dim).map(|k| field(k).map(T::lit)).collect::<Result<Vec<_>>>()?);
            values.push(T::lit(field(coord_dim + 1)?));
            let s = field(coord_dim + 2)?;
            if !(s > 0.0) {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    row,
                    message: format!("uncertainty must be positive, got {s}"),
                });
            }
            sds.push(T::lit(s));
        }
        Self::new(id, label, stations, coords, values, sds)
    }

    pub fn load(path: impl AsRef<Path>, id: u32, label: &str, coord_dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, path, id, label, coord_dim)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["station".to_string()];
        header.extend((1..=self.coord_dim).map(|k| format!("coord{k}")));
        header.extend(["y".to_string(), "s".to_string()]);
        w.write_record(&header)?;
        for n in 0..self.len() {
            let mut rec = vec![self.stations[n].clone()];
            rec.extend(self.coords[n].iter().map(|c| format!("{}", c.as_f64())));
            rec.push(format!("{:e}", self.values[n].as_f64()));
            rec.push(format!("{:e}", self.uncertainties[n].as_f64()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<data>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// One row of an experiment manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u32,
    pub label: String,
    pub path: PathBuf,
    pub dim: usize,
    /// Surrogate archive predicting this experiment; falls back to the
    /// archive given on the command line when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archive: Option<PathBuf>,
}

/// CSV listing `id,label,path,dim[,archive]`; relative paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub entries: Vec<ManifestEntry>,
}

impl ExperimentManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(file);
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (i, rec) in rdr.deserialize::<ManifestEntry>().enumerate() {
            let mut e = rec.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                message: e.to_string(),
            })?;
            if entries.iter().any(|o| o.id == e.id) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 2,
                    message: format!("duplicate experiment id {}", e.id),
                });
            }
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
            if let Some(a) = e.archive.as_mut() {
                if a.as_os_str().is_empty() {
                    e.archive = None;
                } else if a.is_relative() {
                    *a = base.join(&*a);
                }
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(Error::invalid(format!("{}: manifest lists no experiments", path.display())));
        }
        Ok(Self { entries })
    }

    /// Writes the manifest with paths relative to `dir` where possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new().from_writer(file);
        w.write_record(["id", "label", "path", "dim", "archive"])?;
        let rel = |p: &Path| -> String {
            p.strip_prefix(&base).unwrap_or(p).display().to_string()
        };
        for e in &self.entries {
            w.write_record([
                e.id.to_string(),
                e.label.clone(),
                rel(&e.path),
                e.dim.to_string(),
                e.archive.as_deref().map(rel).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_sets<T: Scalar>(&self) -> Result<Vec<DataSummarySet<T>>> {
        self.entries
            .iter()
            .map(|e| DataSummarySet::load(&e.path, e.id, &e.label, e.dim))
            .collect()
    }
}

/// `K x N` synthetic replicates `z ~ N(y, beta s^2)` for one experiment.
///
/// Per-station replicate means and centred sums of squares are cached so the
/// pooled likelihood costs O(N) per evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataCollection<T> {
    set_id: u32,
    beta: T,
    seed: u64,
    draws: Matrix<T>,
    reported_s: Vec<T>,
    station_mean: Vec<T>,
    station_ss: Vec<T>,
}

impl<T: Scalar> SyntheticDataCollection<T> {
    pub fn from_draws(
        set_id: u32,
        beta: T,
        seed: u64,
        draws: Matrix<T>,
        reported_s: Vec<T>,
    ) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if draws.rows() == 0 {
            return Err(Error::invalid("at least one synthetic replicate is required"));
        }
        if draws.cols() != reported_s.len() {
            return Err(Error::DimensionMismatch {
                expected: reported_s.len(),
                got: draws.cols(),
            });
        }
        if reported_s.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::invalid("reported uncertainties must be positive"));
        }
        let k = T::from_usize_lossy(draws.rows());
        let n = draws.cols();
        let mut station_mean = vec![T::zero(); n];
        for row in draws.iter_rows() {
            for (m, &z) in station_mean.iter_mut().zip(row) {
                *m += z;
            }
        }
        station_mean.iter_mut().for_each(|m| *m /= k);
        let mut station_ss = vec![T::zero(); n];
        for row in draws.iter_rows() {
            for ((ss, &z), &m) in station_ss.iter_mut().zip(row).zip(&station_mean) {
                *ss += (z - m) * (z - m);
            }
        }
        Ok(Self {
            set_id,
            beta,
            seed,
            draws,
            reported_s,
            station_mean,
            station_ss,
        })
    }

    pub fn set_id(&self) -> u32 {
        self.set_id
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of replicates `K`.
    pub fn replicates(&self) -> usize {
        self.draws.rows()
    }

    /// Number of stations `N`.
    pub fn stations(&self) -> usize {
        self.draws.cols()
    }

    pub fn draws(&self) -> &Matrix<T> {
        &self.draws
    }

    pub fn reported_s(&self) -> &[T] {
        &self.reported_s
    }

    pub(crate) fn station_mean(&self) -> &[T] {
        &self.station_mean
    }

    pub(crate) fn station_ss(&self) -> &[T] {
        &self.station_ss
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["set", "beta", "seed", "replicate", "station", "s", "z"])?;
        for k in 0..self.replicates() {
            for n in 0..self.stations() {
                w.write_record([
                    self.set_id.to_string(),
                    format!("{:e}", self.beta.as_f64()),
                    self.seed.to_string(),
                    (k + 1).to_string(),
                    (n + 1).to_string(),
                    format!("{:e}", self.reported_s[n].as_f64()),
                    format!("{:e}", self.draws[(k, n)].as_f64()),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<synthetic>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            set: u32,
            beta: f64,
            seed: u64,
            replicate: usize,
            station: usize,
            s: f64,
            z: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (i, r) in rdr.deserialize::<Row>().enumerate() {
            rows.push(r.map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                row: i + 2,
                message: e.to_string(),
            })?);
        }
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid(format!("{}: empty synthetic data file", origin.display())))?;
        let (set, beta, seed) = (first.set, first.beta, first.seed);
        let k = rows.iter().map(|r| r.replicate).max().unwrap_or(0);
        let n = rows.iter().map(|r| r.station).max().unwrap_or(0);
        if rows.len() != k * n {
            return Err(Error::invalid(format!(
                "{}: expected {} rows for {k} replicates x {n} stations, got {}",
                origin.display(),
                k * n,
                rows.len()
            )));
        }
        let mut draws = Matrix::zeros(k, n);
        let mut s = vec![T::zero(); n];
        for r in &rows {
            if r.replicate == 0 || r.station == 0 {
                return Err(Error::invalid("replicate and station indices are 1-based"));
            }
            draws[(r.replicate - 1, r.station - 1)] = T::lit(r.z);
            s[r.station - 1] = T::lit(r.s);
        }
        Self::from_draws(set, T::lit(beta), seed, draws, s)
    }
}


/// Training design and model outputs for one experiment.
///
/// CSV header: every parameter name in bounds order, then one column per
/// station named as in the data-summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    pub parameters: Vec<String>,
    pub stations: Vec<String>,
    /// `L x s` parameter samples.
    pub inputs: Matrix<T>,
    /// `L x N` outputs; non-finite entries mark failed model runs.
    pub outputs: Matrix<T>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(parameters: Vec<String>, stations: Vec<String>, inputs: Matrix<T>, outputs: Matrix<T>) -> Result<Self> {
        if inputs.cols() != parameters.len() || outputs.cols() != stations.len() || inputs.rows() != outputs.rows() {
            return Err(Error::invalid(format!(
                "training set shape mismatch: {} parameters, {} stations, inputs {}x{}, outputs {}x{}",
                parameters.len(),
                stations.len(),
                inputs.rows(),
                inputs.cols(),
                outputs.rows(),
                outputs.cols()
            )));
        }
        Ok(Self {
            parameters,
            stations,
            inputs,
            outputs,
        })
    }

    /// Reads a training CSV whose leading columns must equal `parameters`.
    /// Output cells may be `nan` or empty for failed runs.
    pub fn read_csv<R: Read>(reader: R, parameters: &[&str], origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let s = parameters.len();
        let lead: Vec<&str> = header.iter().take(s).collect();
        if lead != parameters || header.len() <= s {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                row: 1,
                message: format!(
                    "expected parameter columns {} followed by station columns",
                    parameters.join(",")
                ),
            });
        }
        let stations: Vec<String> = header.iter().skip(s).map(str::to_string).collect();
        let (mut xs, mut ys, mut rows) = (Vec::new(), Vec::new(), 0);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            for (j, field) in rec.iter().enumerate() {
                let v = if j >= s && (field.is_empty() || field.eq_ignore_ascii_case("nan")) {
                    T::nan()
                } else {
                    field.parse::<f64>().map(T::lit).map_err(|e| Error::Parse {
                        path: origin.to_path_buf(),
                        row,
                        message: format!("column {}: {e}", j + 1),
                    })?
                };
                if j < s {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
            rows += 1;
        }
        Self::new(
            parameters.iter().map(|p| p.to_string()).collect(),
            stations.clone(),
            Matrix::from_vec(rows, s, xs)?,
            Matrix::from_vec(rows, stations.len(), ys)?,
        )
    }

    pub fn load(path: impl AsRef<Path>, parameters: &[&str]) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, parameters, path)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.parameters.iter().chain(&self.stations))?;
        for (x, y) in self.inputs.iter_rows().zip(self.outputs.iter_rows()) {
            w.write_record(x.iter().chain(y).map(|v| format!("{:e}", v.as_f64())))?;
        }
        w.flush().map_err(|e| Error::io("<training>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Output columns reordered to match `stations`.
    pub fn outputs_for(&self, stations: &[String]) -> Result<Matrix<T>> {
        let idx = stations
            .iter()
            .map(|name| {
                self.stations
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| Error::invalid(format!("training set has no column for station '{name}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.outputs.rows() * idx.len());
        for row in self.outputs.iter_rows() {
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Matrix::from_vec(self.outputs.rows(), idx.len(), data)
    }
}
