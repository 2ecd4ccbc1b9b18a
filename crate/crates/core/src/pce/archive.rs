//! Plain-text surrogate archive, one block per station:
//!
//! ```text
//! # sumcal surrogate archive
//! version 1
//! dimension 2
//! order 2
//! coord_dim 1
//! bounds 3f2a9c0d1b7e4a55
//! stations 2
//! station 1.2e3 terms 3
//! 0 0 1.5e0
//! 1 0 -2.5e-1
//! ...
//! ```
//!
//! Coefficients are written in graded index order with shortest round-trip
//! formatting, so identical fits produce identical bytes.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pce::family::SurrogateFamily;
use crate::pce::multi_index::MultiIndex;
use crate::pce::surrogate::PceSurrogate;
use crate::scalar::Scalar;
use crate::space::ParameterSpace;

const MAGIC: &str = "# sumcal surrogate archive";

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateArchive<T> {
    pub order: usize,
    pub family: SurrogateFamily<T>,
}

impl<T: Scalar> SurrogateArchive<T> {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let fam = &self.family;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "version 1")?;
        writeln!(w, "dimension {}", fam.space().len())?;
        writeln!(w, "order {}", self.order)?;
        writeln!(w, "coord_dim {}", fam.coord_dim())?;
        writeln!(w, "bounds {}", fam.space().checksum())?;
        writeln!(w, "stations {}", fam.len())?;
        for (coord, s) in fam.coords().iter().zip(fam.surrogates()) {
            let c: Vec<String> = coord.iter().map(|x| format!("{:e}", x.as_f64())).collect();
            writeln!(w, "station {} terms {}", c.join(" "), s.len())?;
            for (u, c) in s.indices().iter().zip(s.coefficients()) {
                for d in u.degrees() {
                    write!(w, "{d} ")?;
                }
                writeln!(w, "{:e}", c.as_f64())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Reads an archive fitted over `space`; the bounds checksum must match.
    pub fn read<R: Read>(reader: R, space: Arc<ParameterSpace<T>>, origin: &Path) -> Result<Self> {
        let mut lines = BufReader::new(reader)
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let perr = |row: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            row,
            message,
        };
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((row, Ok(l))) => Ok((row, l.trim().to_string())),
                Some((row, Err(e))) => Err(perr(row, e.to_string())),
                None => Err(perr(0, format!("unexpected end of archive, expected {what}"))),
            }
        };
        let (row, magic) = next("header")?;
        if magic != MAGIC {
            return Err(perr(row, "not a surrogate archive".into()));
        }
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (row, line) = next(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((row, v.trim().to_string())),
                _ => Err(perr(row, format!("expected '{key} <value>'"))),
            }
        };
        let num = |(row, v): (usize, String)| -> Result<usize> {
            v.parse::<usize>().map_err(|e| perr(row, e.to_string()))
        };
        let (row, version) = header("version")?;
        if version != "1" {
            return Err(perr(row, format!("unsupported archive version {version}")));
        }
        let hd = header("dimension")?;
        let dim_row = hd.0;
        let dimension = num(hd)?;
        if dimension != space.len() {
            return Err(perr(
                dim_row,
                format!("archive dimension {dimension} does not match {} bounds entries", space.len()),
            ));
        }
        let order = num(header("order")?)?;
        let coord_dim = num(header("coord_dim")?)?;
        let (row, checksum) = header("bounds")?;
        if checksum != space.checksum() {
            return Err(perr(
                row,
                format!("bounds checksum {checksum} does not match bounds file ({})", space.checksum()),
            ));
        }
        let stations = num(header("stations")?)?;
        let mut coords = Vec::with_capacity(stations);
        let mut surrogates = Vec::with_capacity(stations);
        for _ in 0..stations {
            let (row, line) = next("station")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != coord_dim + 3 || parts[0] != "station" || parts[coord_dim + 1] != "terms" {
                return Err(perr(row, "expected 'station <coord..> terms <n>'".into()));
            }
            let coord = parts[1..=coord_dim]
                .iter()
                .map(|p| p.parse::<f64>().map(T::lit).map_err(|e| perr(row, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let terms: usize = parts[coord_dim + 2].parse().map_err(|e: std::num::ParseIntError| perr(row, e.to_string()))?;
            let mut indices = Vec::with_capacity(terms);
            let mut coefficients = Vec::with_capacity(terms);
            for _ in 0..terms {
                let (row, line) = next("term")?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != dimension + 1 {
                    return Err(perr(row, format!("expected {} degrees and a coefficient", dimension)));
                }
                let degrees = parts[..dimension]
                    .iter()
                    .map(|p| p.parse::<u32>().map_err(|e| perr(row, e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                let c: f64 = parts[dimension].parse().map_err(|e: std::num::ParseFloatError| perr(row, e.to_string()))?;
                indices.push(MultiIndex::new(degrees));
                coefficients.push(T::lit(c));
            }
            coords.push(coord);
            surrogates.push(PceSurrogate::new(space.clone(), indices, coefficients)?);
        }
        Ok(Self {
            order,
            family: SurrogateFamily::new(coords, surrogates)?,
        })
    }

    pub fn load(path: impl AsRef<Path>, space: Arc<ParameterSpace<T>>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file, space, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn archive() -> SurrogateArchive<f64> {
        let space = Arc::new(ParameterSpace::from_bounds(&["a", "b"], &[(0.0, 1.0), (2.0, 5.0)]).unwrap());
        let s0 = PceSurrogate::new(
            space.clone(),
            vec![MultiIndex::new(vec![1, 1]), MultiIndex::new(vec![0, 0])],
            vec![0.1, 1.0 / 3.0],
        )
        .unwrap();
        let s1 = PceSurrogate::constant(space, -2.5e-17);
        SurrogateArchive {
            order: 2,
            family: SurrogateFamily::new(vec![vec![1200.0], vec![1250.5]], vec![s0, s1]).unwrap(),
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let a = archive();
        let mut buf = Vec::new();
        a.write(&mut buf).unwrap();
        let back =
            SurrogateArchive::read(buf.as_slice(), a.family.space().clone(), Path::new("a.pce")).unwrap();
        assert_eq!(back, a);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn checksum_mismatch_rejected() {
        let a = archive();
        let mut buf = Vec::new();
        a.write(&mut buf).unwrap();
        let other = Arc::new(ParameterSpace::from_bounds(&["a", "b"], &[(0.0, 1.0), (2.0, 6.0)]).unwrap());
        let err = SurrogateArchive::read(buf.as_slice(), other, Path::new("a.pce")).unwrap_err();
        assert!(err.to_string().contains("checksum"));
    }
}
