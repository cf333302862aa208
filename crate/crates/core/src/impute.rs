//! Chained-equations imputation of node covariates on the pooled table.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{maximize, FitOptions, PseudoLikelihood};
use crate::linalg::SquareMatrix;
use crate::network::{Attribute, AttributeTable};
use crate::num::logistic;
use crate::rng::stream_rng;

pub const DEFAULT_IMPUTATION_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Linear regression plus a normal residual draw, clamped to the bounds.
    Continuous { lower: Option<f64>, upper: Option<f64> },
    /// Logistic regression plus a Bernoulli draw.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind, values: Vec<Option<f64>>) -> Self {
        Self { name: name.into(), kind, values }
    }

    fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeOptions {
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        Self { iterations: DEFAULT_IMPUTATION_ITERATIONS, seed: 0 }
    }
}

fn clamp(kind: ColumnKind, v: f64) -> f64 {
    match kind {
        ColumnKind::Continuous { lower, upper } => {
            let v = lower.map_or(v, |l| v.max(l));
            upper.map_or(v, |u| v.min(u))
        }
        ColumnKind::Binary => v,
    }
}

/// Least squares with an intercept; returns (coefficients, residual sd).
fn ols(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let p = x[0].len();
    let mut xtx = SquareMatrix::zeros(p);
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        xtx.add_outer(row, 1.0);
        for (t, &xk) in xty.iter_mut().zip(row) {
            *t += xk * yi;
        }
    }
    let chol = match xtx.cholesky() {
        Some(c) => c,
        None => {
            // collinear predictors: a tiny ridge picks the minimum-norm fit
            let mut ridged = xtx.clone();
            ridged.add_diagonal(1e-8 * (1.0 + (0..p).map(|i| xtx[(i, i)]).fold(0.0, f64::max)));
            ridged.cholesky().expect("ridged Gram matrix is positive definite")
        }
    };
    let beta = chol.solve(&xty);
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let dof = y.len().saturating_sub(p).max(1) as f64;
    (beta, (rss / dof).sqrt())
}

fn logistic_fit(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let rows = x.iter().zip(y).map(|(r, &v)| (r.clone(), v >= 0.5)).collect();
    let objective = PseudoLikelihood::from_rows(p, rows);
    match maximize(&objective, &FitOptions::default()) {
        Ok(opt) => opt.theta,
        Err(_) => {
            // non-identified design: intercept-only model
            let rate = y.iter().sum::<f64>() / y.len() as f64;
            let rate = rate.clamp(1e-6, 1.0 - 1e-6);
            let mut beta = vec![0.0; p];
            beta[0] = (rate / (1.0 - rate)).ln();
            beta
        }
    }
}

/// Completes every column; observed entries are returned unchanged.
pub fn impute_chained(columns: &[Column], options: &ImputeOptions) -> Result<Vec<Vec<f64>>> {
    let Some(first) = columns.first() else {
        return Ok(Vec::new());
    };
    let rows = first.values.len();
    for c in columns {
        if c.values.len() != rows {
            return Err(Error::InvalidConfig(format!("column `{}` has {} rows, expected {rows}", c.name, c.values.len())));
        }
        if c.observed().next().is_none() {
            return Err(Error::UnimputableColumn(c.name.clone()));
        }
    }
    let mut rng = stream_rng(options.seed, 0);

    // start from the observed mean (binary: the majority value)
    let mut data: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let obs: Vec<f64> = c.observed().collect();
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            let fill = match c.kind {
                ColumnKind::Binary => (mean >= 0.5) as u8 as f64,
                kind => clamp(kind, mean),
            };
            c.values.iter().map(|v| v.unwrap_or(fill)).collect()
        })
        .collect();

    let incomplete: Vec<usize> = (0..columns.len()).filter(|&j| columns[j].values.iter().any(Option::is_none)).collect();
    if incomplete.is_empty() {
        return Ok(data);
    }
    for _ in 0..options.iterations {
        for &j in &incomplete {
            let design = |i: usize| -> Vec<f64> {
                std::iter::once(1.0).chain((0..columns.len()).filter(|&k| k != j).map(|k| data[k][i])).collect()
            };
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for (i, v) in columns[j].values.iter().enumerate() {
                if let Some(v) = v {
                    x.push(design(i));
                    y.push(*v);
                }
            }
            let missing: Vec<usize> = (0..rows).filter(|&i| columns[j].values[i].is_none()).collect();
            let draws: Vec<f64> = match columns[j].kind {
                kind @ ColumnKind::Continuous { .. } => {
                    let (beta, sd) = ols(&x, &y);
                    missing
                        .iter()
                        .map(|&i| {
                            let pred: f64 = design(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
                            let z: f64 = StandardNormal.sample(&mut rng);
                            clamp(kind, pred + sd * z)
                        })
                        .collect()
                }
                ColumnKind::Binary => {
                    let beta = logistic_fit(&x, &y);
                    missing
                        .iter()
                        .map(|&i| {
                            let eta: f64 = design(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
                            (rng.random::<f64>() < logistic(eta)) as u8 as f64
                        })
                        .collect()
                }
            };
            for (&i, v) in missing.iter().zip(draws) {
                data[j][i] = v;
            }
        }
    }
    Ok(data)
}

fn column_kind(attr: Attribute) -> ColumnKind {
    if attr.is_categorical() {
        ColumnKind::Binary
    } else {
        ColumnKind::Continuous { lower: Some(0.0), upper: Some(1.0) }
    }
}

/// Imputes the listed attributes over the row-concatenation of all tables,
/// writing completed values back in place.
pub fn impute_attributes(tables: &mut [AttributeTable], attrs: &[Attribute], options: &ImputeOptions) -> Result<()> {
    let columns: Vec<Column> = attrs
        .iter()
        .map(|&a| Column::new(a.name(), column_kind(a), tables.iter().flat_map(|t| t.column(a)).collect()))
        .collect();
    let completed = impute_chained(&columns, options)?;
    for (&attr, values) in attrs.iter().zip(completed) {
        let mut it = values.into_iter();
        for table in tables.iter_mut() {
            for node in 0..table.len() {
                table.set_value(node, attr, it.next());
            }
        }
    }
    Ok(())
}
