//! Dataset files, prediction grids, ternary coordinates and residual outlier flags.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::bandwidth::median;
use crate::kernel::Dataset;
use crate::simplex::{inv_ilr, IlrVector, SimplexPoint};

/// Problems with an input file. Line numbers are 1-based and count comment lines.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: part x{part} is not strictly positive ({value})")]
    NonPositivePart { line: u64, part: usize, value: f64 },
    #[error("header must list at least two composition columns and the response, found {0} columns")]
    Header(usize),
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Model(#[from] crate::error::Error),
}

/// A dataset together with the file line of each row.
#[derive(Debug, Clone)]
pub struct DataFile {
    pub dataset: Dataset,
    pub header: Vec<String>,
    pub lines: Vec<u64>,
}

pub fn read_dataset(path: &Path) -> Result<DataFile, DataError> {
    let file = File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_dataset_from(file)
}

/// CSV with a header row, composition columns then the response as the last column.
/// Lines starting with `#` are comments. Rows are re-closed to unit sum.
pub fn read_dataset_from<R: Read>(reader: R) -> Result<DataFile, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: e.position().map_or(1, |p| p.line()),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 {
        return Err(DataError::Header(header.len()));
    }
    let parts = header.len() - 1;
    let mut covariates = Vec::new();
    let mut responses = Vec::new();
    let mut lines = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| DataError::Parse {
                    line,
                    message: format!("column {:?}: cannot parse {field:?} as a number", header[j]),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Parse {
                line,
                message: format!("column {:?} is not finite", header[j]),
            });
        }
        if let Some(j) = values[..parts].iter().position(|v| *v <= 0.0) {
            return Err(DataError::NonPositivePart {
                line,
                part: j + 1,
                value: values[j],
            });
        }
        covariates.push(SimplexPoint::new(&values[..parts])?);
        responses.push(values[parts]);
        lines.push(line);
    }
    if covariates.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(DataFile {
        dataset: Dataset::new(covariates, responses)?,
        header,
        lines,
    })
}

/// Rounds to 10 significant digits and prints the shortest string that reads back to the rounded value.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Writes each line of `text` as a `# ` comment.
pub fn write_comment_block<W: Write>(out: &mut W, text: &str) -> std::io::Result<()> {
    for line in text.lines() {
        if line.is_empty() {
            writeln!(out, "#")?;
        } else {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

/// Header `x1..xD,y`, one row per observation.
pub fn write_dataset<W: Write>(out: &mut W, data: &Dataset) -> std::io::Result<()> {
    let header: Vec<String> = (1..=data.parts())
        .map(|j| format!("x{j}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (x, y) in data.covariates().iter().zip(data.responses()) {
        let row: Vec<String> = x
            .parts()
            .iter()
            .chain(std::iter::once(y))
            .map(|v| format_number(*v))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn invalid(message: String) -> crate::error::Error {
    crate::error::Error::InvalidParameter(message)
}

/// Equally spaced axes in ilr coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    step: Vec<f64>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, step: Vec<f64>) -> crate::error::Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != step.len() {
            return Err(invalid("grid bounds and steps must have one entry per ilr coordinate".into()));
        }
        for j in 0..lower.len() {
            let (lo, hi, st) = (lower[j], upper[j], step[j]);
            if !(lo.is_finite() && hi.is_finite() && st.is_finite()) {
                return Err(invalid(format!("axis {}: non-finite bound or step", j + 1)));
            }
            if lo >= hi {
                return Err(invalid(format!("axis {}: lower bound {lo} must be below upper {hi}", j + 1)));
            }
            if !(st > 0.0 && st <= hi - lo) {
                return Err(invalid(format!("axis {}: step {st} must lie in (0, {}]", j + 1, hi - lo)));
            }
        }
        Ok(Self { lower, upper, step })
    }

    /// `lo1,hi1,lo2,hi2,...,step`, one shared step for every axis.
    pub fn parse(text: &str) -> crate::error::Result<Self> {
        let values = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("grid: cannot parse {t:?} as a number")))
            })
            .collect::<crate::error::Result<Vec<f64>>>()?;
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(invalid(format!(
                "grid needs lo,hi pairs followed by one step, got {} numbers",
                values.len()
            )));
        }
        let step = values[values.len() - 1];
        let axes = (values.len() - 1) / 2;
        Self::new(
            (0..axes).map(|j| values[2 * j]).collect(),
            (0..axes).map(|j| values[2 * j + 1]).collect(),
            vec![step; axes],
        )
    }

    pub fn coord_dim(&self) -> usize {
        self.lower.len()
    }

    /// Values along axis `j`: `lo + i * step` up to `hi` (inclusive, up to rounding).
    pub fn axis(&self, j: usize) -> Vec<f64> {
        let (lo, hi, st) = (self.lower[j], self.upper[j], self.step[j]);
        let count = ((hi - lo) / st + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + i as f64 * st).collect()
    }
}

/// Cartesian product of the axes (last coordinate varying fastest), in ilr and on the simplex.
pub fn make_grid(gs: &GridSpec) -> (Vec<IlrVector>, Vec<SimplexPoint>) {
    let axes: Vec<Vec<f64>> = (0..gs.coord_dim()).map(|j| gs.axis(j)).collect();
    let mut coords: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        coords = coords
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(*v);
                    c
                })
            })
            .collect();
    }
    let ilr_points: Vec<IlrVector> = coords
        .into_iter()
        .map(|c| IlrVector::new(c).expect("finite grid values"))
        .collect();
    let simplex_points = ilr_points
        .iter()
        .map(|v| inv_ilr(v).expect("ilr coordinates map onto the simplex"))
        .collect();
    (ilr_points, simplex_points)
}

/// Cartesian position in the ternary diagram with vertices `(0, 0)`, `(1, 0)`, `(1/2, sqrt(3)/2)`.
pub fn ternary(x: &SimplexPoint) -> Option<(f64, f64)> {
    match x.parts() {
        [_, b, c] => Some((b + 0.5 * c, 0.5 * 3f64.sqrt() * c)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    /// Indices of residuals outside the fences, ascending.
    pub flagged: Vec<usize>,
    pub residuals: Vec<f64>,
    pub q1: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

/// Boxplot rule: flag residuals outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`.
///
/// Quartiles are Tukey's hinges, the medians of the lower and upper halves of
/// the sorted residuals, each half including the median when `n` is odd.
pub fn flag_outliers(residuals: &[f64]) -> OutlierReport {
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let half = n.div_ceil(2);
    let q1 = median(&sorted[..half]);
    let q3 = median(&sorted[n - half..]);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let flagged = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < lower_fence || **r > upper_fence)
        .map(|(i, _)| i)
        .collect();
    OutlierReport {
        flagged,
        residuals: residuals.to_vec(),
        q1,
        q3,
        lower_fence,
        upper_fence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ilr;

    #[test]
    fn reads_and_closes_rows() {
        let text = "# comment\nx1,x2,x3,y\n0.2,0.3,0.5,1.7\n0.2,0.3,0.6,1.7\n";
        let file = read_dataset_from(text.as_bytes()).unwrap();
        assert_eq!(file.dataset.len(), 2);
        assert_eq!(file.lines, vec![3, 4]);
        let second = file.dataset.covariates()[1].parts();
        for (got, want) in second.iter().zip([2.0 / 11.0, 3.0 / 11.0, 6.0 / 11.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn reports_bad_lines() {
        let zero = "x1,x2,x3,y\n0.2,0.3,0.5,1\n0.2,0,0.8,1\n";
        match read_dataset_from(zero.as_bytes()) {
            Err(DataError::NonPositivePart { line: 3, part: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let ragged = "x1,x2,x3,y\n0.2,0.3,0.5\n";
        assert!(matches!(
            read_dataset_from(ragged.as_bytes()),
            Err(DataError::RaggedRow { line: 2, expected: 4, found: 3 })
        ));
        let junk = "x1,x2,y\n0.5,abc,1\n";
        assert!(matches!(
            read_dataset_from(junk.as_bytes()),
            Err(DataError::Parse { line: 2, .. })
        ));
        assert!(matches!(read_dataset_from("x1,y\n1,2\n".as_bytes()), Err(DataError::Header(2))));
        assert!(matches!(read_dataset_from("x1,x2,y\n".as_bytes()), Err(DataError::Empty)));
    }

    #[test]
    fn number_format_is_a_fixpoint() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 123456789012.0, 0.0, 7.0] {
            let once = format_number(x);
            let again = format_number(once.parse().unwrap());
            assert_eq!(once, again);
        }
        assert_eq!(format_number(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_number(2.0), "2");
    }

    #[test]
    fn dataset_round_trip() {
        let text = "x1,x2,x3,y\n0.2,0.3,0.5,1.7\n0.1,0.6,0.3,-2.25\n";
        let data = read_dataset_from(text.as_bytes()).unwrap().dataset;
        let mut first = Vec::new();
        write_dataset(&mut first, &data).unwrap();
        let reread = read_dataset_from(first.as_slice()).unwrap().dataset;
        let mut second = Vec::new();
        write_dataset(&mut second, &reread).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn grid_examples() {
        let gs = GridSpec::parse("0,1,0,1,0.5").unwrap();
        let (coords, points) = make_grid(&gs);
        assert_eq!(coords.len(), 9);
        assert_eq!(coords[0].coords(), &[0.0, 0.0]);
        for p in points[0].parts() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        for (c, p) in coords.iter().zip(&points) {
            assert!(c.distance(&ilr(p)) < 1e-12);
        }
        let wide = GridSpec::parse("0,1,-0.3,1,0.05").unwrap();
        assert_eq!(wide.axis(0).len(), 21);
        assert_eq!(wide.axis(1).len(), 27);
        assert!(GridSpec::parse("1,0,0,1,0.5").is_err());
        assert!(GridSpec::parse("0,1,0,1").is_err());
        assert!(GridSpec::parse("0,1,0,1,2").is_err());
    }

    #[test]
    fn ternary_vertices() {
        let e = SimplexPoint::neutral(3).unwrap();
        let (x, y) = ternary(&e).unwrap();
        assert!((x - 0.5).abs() < 1e-15 && (y - 3f64.sqrt() / 6.0).abs() < 1e-15);
        assert!(ternary(&SimplexPoint::neutral(4).unwrap()).is_none());
    }

    #[test]
    fn boxplot_examples() {
        assert!(flag_outliers(&[-1.0, 0.0, 1.0]).flagged.is_empty());
        let r = flag_outliers(&[0.0, 0.0, 0.0, 0.0, 100.0]);
        assert_eq!((r.lower_fence, r.upper_fence), (0.0, 0.0));
        assert_eq!(r.flagged, vec![4]);
        let shuffled = flag_outliers(&[100.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(shuffled.flagged, vec![0]);
    }
}
