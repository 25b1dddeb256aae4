//! Comma-separated input files for the estimation path.

use std::fs::File;
use std::path::Path;

use crate::data::{CohortSample, DesignInfo, DesignKind, SurveySample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Columns pulled from one delimited file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// One vector per requested numeric column, in request order.
    pub numeric: Vec<Vec<f64>>,
    /// One vector per requested label column, in request order.
    pub labels: Vec<Vec<String>>,
    /// Header names of the file.
    pub header: Vec<String>,
    pub rows: usize,
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<f64> {
    let t = raw.trim();
    if t.is_empty() {
        return Err(Error::MissingValue {
            line,
            column: column.to_string(),
        });
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            column: column.to_string(),
            value: t.to_string(),
        }),
    }
}

/// Reads the named numeric and label columns of a headed CSV file.
pub fn ingest_delimited(path: &Path, numeric: &[&str], labels: &[&str]) -> Result<Table> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Io(format!("{shown}: {e}")))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io(format!("{shown}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                path: shown.clone(),
            })
    };
    let num_idx = numeric.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
    let lab_idx = labels.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;

    let mut table = Table {
        numeric: vec![Vec::new(); numeric.len()],
        labels: vec![Vec::new(); labels.len()],
        header: header.clone(),
        rows: 0,
    };
    for record in reader.records() {
        let record = record.map_err(|e| Error::Io(format!("{shown}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        for ((k, &j), name) in num_idx.iter().enumerate().zip(numeric) {
            table.numeric[k].push(parse_cell(record.get(j).unwrap_or(""), line, name)?);
        }
        for ((k, &j), name) in lab_idx.iter().enumerate().zip(labels) {
            let v = record.get(j).unwrap_or("").trim();
            if v.is_empty() {
                return Err(Error::MissingValue {
                    line,
                    column: name.to_string(),
                });
            }
            table.labels[k].push(v.to_string());
        }
        table.rows += 1;
    }
    if table.rows == 0 {
        return Err(Error::EmptyFile(shown));
    }
    Ok(table)
}

/// Design matrix with a leading intercept column.
fn design_matrix(columns: &[Vec<f64>], rows: usize) -> Result<Matrix<f64>> {
    let p = columns.len() + 1;
    let mut data = Vec::with_capacity(rows * p);
    for i in 0..rows {
        data.push(1.0);
        data.extend(columns.iter().map(|c| c[i]));
    }
    Matrix::new(rows, p, data)
}

pub fn ingest_cohort(path: &Path, outcome: &str, covariates: &[&str]) -> Result<CohortSample<f64>> {
    let mut cols = vec![outcome];
    cols.extend_from_slice(covariates);
    let mut t = ingest_delimited(path, &cols, &[])?;
    let y = t.numeric.remove(0);
    CohortSample::new(y, design_matrix(&t.numeric, t.rows)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyColumns<'a> {
    pub covariates: &'a [&'a str],
    pub weight: &'a str,
    pub design: DesignKind,
    pub strata: Option<&'a str>,
    pub psu: Option<&'a str>,
    /// Read when present in the file; used as the reference estimate.
    pub outcome: Option<&'a str>,
}

pub fn ingest_survey(path: &Path, spec: &SurveyColumns<'_>) -> Result<SurveySample<f64>> {
    let labels: Vec<&str> = match spec.design {
        DesignKind::StratifiedClusterWR => {
            let strata = spec
                .strata
                .ok_or_else(|| Error::Config("stratified design needs --strata".into()))?;
            let psu = spec
                .psu
                .ok_or_else(|| Error::Config("stratified design needs --psu".into()))?;
            vec![strata, psu]
        }
        _ => Vec::new(),
    };
    // outcome is optional: peek at the header before requesting it
    let header_has_outcome = match spec.outcome {
        Some(o) => {
            let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut r = csv::Reader::from_reader(file);
            let h = r.headers().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            h.iter().any(|c| c.trim() == o)
        }
        None => false,
    };
    let mut cols = vec![spec.weight];
    cols.extend_from_slice(spec.covariates);
    if header_has_outcome {
        cols.push(spec.outcome.expect("checked above"));
    }
    let mut t = ingest_delimited(path, &cols, &labels)?;
    let y = header_has_outcome.then(|| t.numeric.pop().expect("outcome column"));
    let d = t.numeric.remove(0);
    let design = match spec.design {
        DesignKind::StratifiedClusterWR => {
            let psu = t.labels.pop().expect("psu labels");
            let strata = t.labels.pop().expect("stratum labels");
            DesignInfo::stratified(strata, psu)
        }
        DesignKind::PoissonSampling => DesignInfo::poisson(),
        DesignKind::IidApprox => DesignInfo::iid(),
    };
    let s = SurveySample::new(design_matrix(&t.numeric, t.rows)?, d, design)?;
    match y {
        Some(y) => s.with_outcome(y),
        None => Ok(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn cohort_gets_intercept() {
        let f = file("y,x1\n1,0.5\n2,1.5\n3,2.5\n");
        let c = ingest_cohort(f.path(), "y", &["x1"]).unwrap();
        assert_eq!((c.x().rows(), c.x().cols()), (3, 2));
        assert_eq!(c.x().row(1), &[1.0, 1.5]);
        assert_eq!(c.y(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn na_cell_is_named() {
        let f = file("y,x1\n1,0.5\n2,NA\n");
        let err = ingest_cohort(f.path(), "y", &["x1"]).unwrap_err();
        match err {
            Error::Parse { line, column, value } => {
                assert_eq!((line, column.as_str(), value.as_str()), (3, "x1", "NA"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_cell_is_missing_value() {
        let f = file("y,x1\n1,\n");
        assert!(matches!(
            ingest_cohort(f.path(), "y", &["x1"]),
            Err(Error::MissingValue { line: 2, .. })
        ));
    }

    #[test]
    fn missing_column_and_empty_file() {
        let f = file("y,x1\n1,2\n");
        assert!(matches!(
            ingest_cohort(f.path(), "y", &["x2"]),
            Err(Error::MissingColumn { .. })
        ));
        let f = file("y,x1\n");
        assert!(matches!(
            ingest_cohort(f.path(), "y", &["x1"]),
            Err(Error::EmptyFile(_))
        ));
    }

    #[test]
    fn survey_weights_and_optional_outcome() {
        let f = file("x1,w\n0.1,2.0\n0.3,2.0\n");
        let spec = SurveyColumns {
            covariates: &["x1"],
            weight: "w",
            design: DesignKind::PoissonSampling,
            strata: None,
            psu: None,
            outcome: Some("y"),
        };
        let s = ingest_survey(f.path(), &spec).unwrap();
        assert_eq!(s.weight_total(), 4.0);
        assert!(s.y().is_none());
        let f = file("x1,w,y\n0.1,2.0,5\n0.3,2.0,7\n");
        let s = ingest_survey(f.path(), &spec).unwrap();
        assert_eq!(s.reference_mean(), Some(6.0));
    }

    #[test]
    fn stratified_labels() {
        let f = file("x1,w,h,l\n0.1,2,a,1\n0.3,2,a,2\n");
        let spec = SurveyColumns {
            covariates: &["x1"],
            weight: "w",
            design: DesignKind::StratifiedClusterWR,
            strata: Some("h"),
            psu: Some("l"),
            outcome: None,
        };
        let s = ingest_survey(f.path(), &spec).unwrap();
        assert_eq!(
            s.design().stratum.as_deref(),
            Some(&["a".to_string(), "a".to_string()][..])
        );
        let no_psu = SurveyColumns { psu: None, ..spec };
        assert!(ingest_survey(f.path(), &no_psu).is_err());
    }
}
