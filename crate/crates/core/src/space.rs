//! Named parameter spaces with box bounds, the physical-to-reference
//! coordinate map, and the Gaussian prior derived from the bounds.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEntry<T> {
    pub name: String,
    pub nominal: T,
    pub lower: T,
    pub upper: T,
    pub unit: String,
}

/// Ordered list of bounded parameters. The order defines the coordinate
/// index used by every sample matrix in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace<T> {
    entries: Vec<ParameterEntry<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundsRow {
    name: String,
    nominal: f64,
    lower: f64,
    upper: f64,
    unit: String,
}

impl<T: Scalar> ParameterSpace<T> {
    pub fn new(entries: Vec<ParameterEntry<T>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            let row = i + 1;
            if e.name.trim().is_empty() {
                return Err(Error::invalid(format!("row {row}: empty parameter name")));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(Error::DuplicateName {
                    row,
                    name: e.name.clone(),
                });
            }
            if !(e.lower.is_finite() && e.upper.is_finite() && e.nominal.is_finite()) {
                return Err(Error::invalid(format!(
                    "row {row}: non-finite value for '{}'",
                    e.name
                )));
            }
            if e.lower >= e.upper {
                return Err(Error::DegenerateBounds {
                    row,
                    name: e.name.clone(),
                    lower: e.lower.as_f64(),
                    upper: e.upper.as_f64(),
                });
            }
            if e.nominal < e.lower || e.nominal > e.upper {
                return Err(Error::invalid(format!(
                    "row {row}: nominal {} of '{}' outside [{}, {}]",
                    e.nominal, e.name, e.lower, e.upper
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Convenience constructor for unit-less spaces with midpoint nominals.
    pub fn from_bounds(names: &[&str], bounds: &[(T, T)]) -> Result<Self> {
        if names.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: bounds.len(),
            });
        }
        let two = T::lit(2.0);
        Self::new(
            names
                .iter()
                .zip(bounds)
                .map(|(n, &(lower, upper))| ParameterEntry {
                    name: (*n).to_string(),
                    nominal: (lower + upper) / two,
                    lower,
                    upper,
                    unit: String::new(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParameterEntry<T>] {
        &self.entries
    }

    pub fn entry(&self, j: usize) -> &ParameterEntry<T> {
        &self.entries[j]
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn nominal(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.nominal).collect()
    }

    pub fn midpoint(&self) -> Vec<T> {
        let two = T::lit(2.0);
        self.entries.iter().map(|e| (e.lower + e.upper) / two).collect()
    }

    /// `(b_j - a_j) / 6`, the prior standard deviation per coordinate.
    pub fn sixth_widths(&self) -> Vec<T> {
        let six = T::lit(6.0);
        self.entries.iter().map(|e| (e.upper - e.lower) / six).collect()
    }

    /// Maps physical values to `[-1, 1]`. Values outside the box map outside
    /// the interval; no clamping is applied.
    pub fn to_reference(&self, nu: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        self.entries
            .iter()
            .zip(nu)
            .map(|(e, &v)| two * (v - e.lower) / (e.upper - e.lower) - T::one())
            .collect()
    }

    pub fn from_reference(&self, xi: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        self.entries
            .iter()
            .zip(xi)
            .map(|(e, &x)| e.lower + (x + T::one()) * (e.upper - e.lower) / two)
            .collect()
    }

    /// New space holding the selected coordinates in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut entries = Vec::with_capacity(indices.len());
        for &j in indices {
            let e = self.entries.get(j).ok_or_else(|| {
                Error::invalid(format!("parameter index {j} out of range {}", self.len()))
            })?;
            entries.push(e.clone());
        }
        Self::new(entries)
    }

    /// Short digest of names and bounds, recorded in surrogate archives.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(format!("{},{:e},{:e}\n", e.name, e.lower.as_f64(), e.upper.as_f64()));
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["name", "nominal", "lower", "upper", "unit"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                row: 1,
                message: format!("expected header '{}'", expected.join(",")),
            });
        }
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in rdr.deserialize::<BoundsRow>().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                row,
                message: format!("malformed row: {e}"),
            })?;
            if !seen.insert(rec.name.clone()) {
                return Err(Error::DuplicateName { row, name: rec.name });
            }
            if rec.lower >= rec.upper {
                return Err(Error::DegenerateBounds {
                    row,
                    name: rec.name,
                    lower: rec.lower,
                    upper: rec.upper,
                });
            }
            if rec.nominal < rec.lower || rec.nominal > rec.upper {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    row,
                    message: format!("nominal {} outside [{}, {}]", rec.nominal, rec.lower, rec.upper),
                });
            }
            entries.push(ParameterEntry {
                name: rec.name,
                nominal: T::lit(rec.nominal),
                lower: T::lit(rec.lower),
                upper: T::lit(rec.upper),
                unit: rec.unit,
            });
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, path)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(BoundsRow {
                name: e.name.clone(),
                nominal: e.nominal.as_f64(),
                lower: e.lower.as_f64(),
                upper: e.upper.as_f64(),
                unit: e.unit.clone(),
            })?;
        }
        w.flush().map_err(|e| Error::io("<bounds>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Independent Gaussian prior, one factor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior<T> {
    means: Vec<T>,
    sds: Vec<T>,
}

impl<T: Scalar> GaussianPrior<T> {
    pub fn new(means: Vec<T>, sds: Vec<T>) -> Result<Self> {
        if means.len() != sds.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: sds.len(),
            });
        }
        if sds.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(Error::invalid("prior standard deviations must be positive"));
        }
        Ok(Self { means, sds })
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn sds(&self) -> &[T] {
        &self.sds
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

/// Prior centred on the box with the bounds at plus/minus three standard
/// deviations: `mu = (a + b) / 2`, `sigma = (b - a) / 6`.
pub fn default_prior<T: Scalar>(space: &ParameterSpace<T>) -> GaussianPrior<T> {
    GaussianPrior {
        means: space.midpoint(),
        sds: space.sixth_widths(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParameterSpace<f64>> {
        ParameterSpace::read_csv(text.as_bytes(), Path::new("bounds.csv"))
    }

    #[test]
    fn parses_row() {
        let s = parse("name,nominal,lower,upper,unit\nQ_vU01_vO00, 4.8, 4.2, 5.4, eV\n").unwrap();
        assert_eq!(s.len(), 1);
        let e = s.entry(0);
        assert_eq!(e.name, "Q_vU01_vO00");
        assert_eq!(e.nominal, 4.8);
        assert_eq!((e.lower, e.upper), (4.2, 5.4));
        assert_eq!(e.unit, "eV");
    }

    #[test]
    fn degenerate_bounds_reported_with_row() {
        let err = parse("name,nominal,lower,upper,unit\na,1,0,2,\nb,1,1,1,eV\n").unwrap_err();
        match err {
            Error::DegenerateBounds { row, ref name, .. } => {
                assert_eq!(row, 3);
                assert_eq!(name, "b");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err.to_string().contains("degenerate bounds"));
    }

    #[test]
    fn duplicate_and_malformed_rows() {
        let dup = parse("name,nominal,lower,upper,unit\na,1,0,2,\na,1,0,2,\n").unwrap_err();
        assert!(matches!(dup, Error::DuplicateName { row: 3, .. }));
        let bad = parse("name,nominal,lower,upper,unit\na,x,0,2,\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { row: 2, .. }));
        let hdr = parse("n,nominal,lower,upper,unit\n").unwrap_err();
        assert!(matches!(hdr, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn thirty_row_file() {
        let mut text = String::from("name,nominal,lower,upper,unit\n");
        for j in 0..30 {
            text.push_str(&format!("p{j},0.5,0,1,eV\n"));
        }
        assert_eq!(parse(&text).unwrap().len(), 30);
    }

    #[test]
    fn prior_from_bounds() {
        let s = ParameterSpace::from_bounds(&["a", "b"], &[(-3.0, 3.0), (0.0, 6.0)]).unwrap();
        let p = default_prior(&s);
        assert_eq!(p.means(), &[0.0, 3.0]);
        assert_eq!(p.sds(), &[1.0, 1.0]);
    }

    #[test]
    fn reference_map_roundtrip() {
        let s = ParameterSpace::from_bounds(&["a"], &[(2.0, 6.0)]).unwrap();
        assert_eq!(s.to_reference(&[2.0]), vec![-1.0]);
        assert_eq!(s.to_reference(&[4.0]), vec![0.0]);
        assert_eq!(s.to_reference(&[6.0]), vec![1.0]);
        assert_eq!(s.from_reference(&[0.5]), vec![5.0]);
    }
}
