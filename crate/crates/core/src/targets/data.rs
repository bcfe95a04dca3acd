use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Immutable regression dataset: `n` rows of covariates `x_i ∈ R^d` and
/// responses `y_i`. Covariates are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    covariates: Vec<f64>,
    responses: Vec<f64>,
}

impl Dataset {
    pub fn new(covariates: DMatrix<f64>, responses: DVector<f64>) -> Result<Self> {
        let (n, d) = covariates.shape();
        let mut rows = Vec::with_capacity(n * d);
        for i in 0..n {
            rows.extend(covariates.row(i).iter().copied());
        }
        Self::from_rows(n, d, rows, responses.iter().copied().collect())
    }

    pub fn from_rows(n: usize, d: usize, covariates: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dataset needs at least one covariate".into()));
        }
        if covariates.len() != n * d {
            return Err(Error::InvalidInput(format!("expected {} covariate entries, got {}", n * d, covariates.len())));
        }
        if responses.len() != n {
            return Err(Error::InvalidInput(format!("{} covariate rows but {} responses", n, responses.len())));
        }
        if covariates.iter().chain(responses.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset contains NaN or infinite entries".into()));
        }
        Ok(Self { n, d, covariates, responses })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d..(i + 1) * self.d]
    }

    pub fn response(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.covariates.chunks_exact(self.d).zip(self.responses.iter().copied())
    }

    pub fn covariate_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.covariates)
    }

    /// `n^{-1} Σ x_i x_i^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        let x = self.covariate_matrix();
        (x.transpose() * &x) / self.n as f64
    }

    /// Parses CSV with header `y,x1,...,xd`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(Error::Parse("empty dataset file".into())),
            }
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "y" {
            return Err(Error::Parse(format!("expected header `y,x1,...,xd`, got `{header}`")));
        }
        for (j, c) in cols[1..].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::Parse(format!("header column {} should be x{}, got `{c}`", j + 2, j + 1)));
            }
        }
        let d = cols.len() - 1;
        let mut covariates = Vec::new();
        let mut responses = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    d + 1,
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| Error::Parse(format!("line {}: cannot parse `{f}`", lineno + 2)))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("line {}: value `{f}`", lineno + 2)));
                }
                if j == 0 {
                    responses.push(v);
                } else {
                    covariates.push(v);
                }
            }
        }
        Self::from_rows(responses.len(), d, covariates, responses)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> =
            std::iter::once("y".to_string()).chain((1..=self.d).map(|j| format!("x{j}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (x, y) in self.rows() {
            let mut line = y.to_string();
            for v in x {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
