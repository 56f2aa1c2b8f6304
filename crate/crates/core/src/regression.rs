//! Per-bar reference selection and closed-form affine fit.

use crate::error::{NocsError, Result};
use crate::image_model::Coord;

/// Centered sums of squares at or below this share of the raw sum of squares
/// are treated as zero variance.
const DEGENERATE_RATIO: f64 = 1e-20;

/// Values gathered at the `K` matched locations of one target pixel.
///
/// Slot 0 always belongs to the target itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    target: Coord,
    values: Vec<f64>,
    valid: Vec<bool>,
    references: Vec<Vec<f64>>,
}

impl Bar {
    /// `references` holds one row per reference channel, each as long as `values`.
    pub fn new(target: Coord, values: Vec<f64>, valid: Vec<bool>, references: Vec<Vec<f64>>) -> Result<Self> {
        let k = values.len();
        if k == 0 {
            return Err(NocsError::EmptyBar);
        }
        if references.is_empty() {
            return Err(NocsError::NoReferences);
        }
        if valid.len() != k {
            return Err(NocsError::SampleCount {
                expected: k,
                actual: valid.len(),
            });
        }
        if let Some(row) = references.iter().find(|r| r.len() != k) {
            return Err(NocsError::SampleCount {
                expected: k,
                actual: row.len(),
            });
        }
        Ok(Self {
            target,
            values,
            valid,
            references,
        })
    }

    pub fn target(&self) -> Coord {
        self.target
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn references(&self) -> &[Vec<f64>] {
        &self.references
    }

    pub fn reference_count(&self) -> usize {
        self.references.len()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid entries of the distorted bar.
    fn valid_values(&self) -> Vec<f64> {
        self.masked_select(&self.values)
    }

    fn masked_select(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|(&x, _)| x)
            .collect()
    }
}

/// Affine model `m ≈ a·R_z + b` for one bar. `z` is a 0-based reference index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    pub z: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and centered deviations; `None` deviations when the vector is constant.
fn centered(v: &[f64]) -> (f64, Option<Vec<f64>>) {
    let mu = mean(v);
    let dev: Vec<f64> = v.iter().map(|x| x - mu).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    let raw: f64 = v.iter().map(|x| x * x).sum();
    if ss <= DEGENERATE_RATIO * raw || ss == 0.0 {
        (mu, None)
    } else {
        (mu, Some(dev))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson correlation; 0 when either side has zero variance.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    match (centered(a).1, centered(b).1) {
        (Some(da), Some(db)) => dot(&da, &db) / (dot(&da, &da).sqrt() * dot(&db, &db).sqrt()),
        _ => 0.0,
    }
}

/// Index of the reference bar best correlated with the valid distorted entries.
///
/// With a single reference the answer is 0 without looking at the data. Ties
/// keep the smallest index.
pub fn select_reference(bar: &Bar) -> Result<usize> {
    if bar.reference_count() == 1 {
        return Ok(0);
    }
    let valid = bar.valid_count();
    if valid < 2 {
        return Err(NocsError::Underdetermined { valid });
    }
    let m = bar.valid_values();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, row) in bar.references.iter().enumerate() {
        let score = correlation(&m, &bar.masked_select(row));
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

/// Least-squares fit of the valid distorted entries against reference row `z`.
///
/// A constant reference row (or a single valid entry) yields the constant model
/// `a = 0, b = mean(m)`.
pub fn fit_affine(bar: &Bar, z: usize) -> Result<AffineFit> {
    if z >= bar.reference_count() {
        return Err(NocsError::BadReferenceIndex {
            index: z,
            count: bar.reference_count(),
        });
    }
    if bar.valid_count() == 0 {
        return Err(NocsError::EmptyBar);
    }
    let m = bar.valid_values();
    let r = bar.masked_select(&bar.references[z]);
    let m_mean = mean(&m);
    let fit = match centered(&r) {
        (r_mean, Some(dr)) => {
            let dm: Vec<f64> = m.iter().map(|x| x - m_mean).collect();
            let a = dot(&dr, &dm) / dot(&dr, &dr);
            AffineFit {
                a,
                b: m_mean - a * r_mean,
                z,
            }
        }
        (_, None) => AffineFit { a: 0.0, b: m_mean, z },
    };
    Ok(fit)
}

/// Applies the fit to the target's own reference value (slot 0 of row `z`).
pub fn predict_pixel(bar: &Bar, fit: &AffineFit) -> f64 {
    fit.a * bar.references[fit.z][0] + fit.b
}

/// Select, fit and predict in one go, using the constant model for bars with a
/// single valid entry.
pub(crate) fn reconstruct_bar(bar: &Bar) -> Result<f64> {
    let z = if bar.valid_count() < 2 { 0 } else { select_reference(bar)? };
    let fit = fit_affine(bar, z)?;
    Ok(predict_pixel(bar, &fit))
}
