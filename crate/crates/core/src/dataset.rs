use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictor matrix (samples by channels) with its response vector.
///
/// Construction only checks shapes; operations that need at least two
/// samples (centering, fitting) check that themselves, so an empty dataset
/// can still be used as a stacking identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    centered: bool,
    x_means: Option<Array1<f64>>,
    y_mean: Option<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Shape("X must have at least one column".into()));
        }
        Ok(Self {
            x,
            y,
            centered: false,
            x_means: None,
            y_mean: None,
        })
    }

    pub fn empty(channels: usize) -> Self {
        Self {
            x: Array2::zeros((0, channels)),
            y: Array1::zeros(0),
            centered: false,
            x_means: None,
            y_mean: None,
        }
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn x_means(&self) -> Option<&Array1<f64>> {
        self.x_means.as_ref()
    }

    pub fn y_mean(&self) -> Option<f64> {
        self.y_mean
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.x, self.y)
    }

    /// Rows selected by index, in the given order. The result is uncentered.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            centered: false,
            x_means: None,
            y_mean: None,
        }
    }

    /// Same responses, replaced predictors (e.g. after preprocessing).
    pub fn with_x(&self, x: Array2<f64>) -> Result<Dataset> {
        Dataset::new(x, self.y.clone())
    }

    /// Subtract column means of X and the mean of y.
    ///
    /// A dataset already flagged as centered is returned unchanged.
    pub fn mean_center(&self) -> Result<Dataset> {
        if self.centered {
            return Ok(self.clone());
        }
        if self.n_samples() < 2 {
            return Err(Error::Degenerate(format!(
                "centering needs at least 2 samples, got {}",
                self.n_samples()
            )));
        }
        let x_means = column_means(&self.x);
        let y_mean = self.y.mean().unwrap_or(0.0);
        let x = &self.x - &x_means;
        let y = self.y.mapv(|v| v - y_mean);
        Ok(Dataset {
            x,
            y,
            centered: true,
            x_means: Some(x_means),
            y_mean: Some(y_mean),
        })
    }

    /// Undo [`Dataset::mean_center`].
    pub fn uncenter(&self) -> Dataset {
        match (self.centered, &self.x_means, self.y_mean) {
            (true, Some(xm), Some(ym)) => Dataset {
                x: &self.x + xm,
                y: self.y.mapv(|v| v + ym),
                centered: false,
                x_means: None,
                y_mean: None,
            },
            _ => self.clone(),
        }
    }
}

/// Column means computed by straightforward summation.
pub fn column_means(x: &Array2<f64>) -> Array1<f64> {
    let n = x.nrows().max(1) as f64;
    x.sum_axis(Axis(0)) / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::array;

    #[test]
    fn two_point_centering() {
        let d = Dataset::new(array![[1.0], [3.0]], array![2.0, 4.0]).unwrap();
        let c = d.mean_center().unwrap();
        assert_eq!(c.x(), &array![[-1.0], [1.0]]);
        assert_eq!(c.y(), &array![-1.0, 1.0]);
        assert_eq!(c.x_means().unwrap(), &array![2.0]);
        assert_eq!(c.y_mean(), Some(3.0));
        assert!(c.is_centered());
    }

    #[test]
    fn numerically_centered_data_is_unchanged() {
        let d = Dataset::new(array![[-1.0, 2.0], [1.0, -2.0]], array![0.5, -0.5]).unwrap();
        let c = d.mean_center().unwrap();
        assert_eq!(c.x(), d.x());
        assert_eq!(c.y(), d.y());
        assert!(c.x_means().unwrap().iter().all(|m| m.abs() < 1e-15));
        assert!(c.y_mean().unwrap().abs() < 1e-15);
    }

    #[test]
    fn random_matrix_column_means_vanish() {
        let mut rng = RngStream::new(20, 5);
        let x = Array2::from_shape_fn((20, 5), |_| rng.uniform_range(-3.0, 7.0));
        let y = Array1::from_shape_fn(20, |_| rng.standard_normal());
        let c = Dataset::new(x, y).unwrap().mean_center().unwrap();
        for col in c.x().columns() {
            let mean = col.iter().sum::<f64>() / 20.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_recovers_original() {
        let mut rng = RngStream::new(1, 2);
        let x = Array2::from_shape_fn((9, 4), |_| rng.uniform_range(-50.0, 50.0));
        let y = Array1::from_shape_fn(9, |_| rng.uniform_range(0.0, 10.0));
        let d = Dataset::new(x, y).unwrap();
        let back = d.mean_center().unwrap().uncenter();
        for (a, b) in back.x().iter().zip(d.x().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.y().iter().zip(d.y().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_cannot_be_centered() {
        let d = Dataset::new(array![[1.0, 2.0]], array![1.0]).unwrap();
        assert!(matches!(d.mean_center(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn shape_checks() {
        assert!(Dataset::new(array![[1.0], [2.0]], array![1.0]).is_err());
        assert!(Dataset::new(Array2::zeros((2, 0)), array![1.0, 2.0]).is_err());
    }
}
