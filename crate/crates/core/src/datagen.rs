//! Simulated two-holder spectra.
//!
//! Four Gaussian bands play the roles of an analyte and three interferents.
//! Holder 1 mixes bands 1, 2, 3 and holder 2 mixes bands 1, 2, 4, so band 3
//! is unique to holder 1 and band 4 unique to holder 2. The response is the
//! analyte concentration. No measurement noise is added.
//!
//! Holders are combined by stacking samples (rows); in federated-learning
//! terms this is "horizontal" partitioning even though the matrices are
//! stacked vertically.

use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// Band center in channel-index units.
    pub mu: f64,
    /// Band width in channels.
    pub sigma: f64,
    /// Peak height.
    pub h: f64,
}

impl SignalSpec {
    pub fn new(mu: f64, sigma: f64, h: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(h > 0.0) {
            return Err(Error::Argument(format!(
                "signal width and height must be positive, got sigma={sigma}, h={h}"
            )));
        }
        Ok(Self { mu, sigma, h })
    }
}

/// Band parameters (center, width, height): analyte, then interferents 1-3.
pub const DEFAULT_SIGNALS: [SignalSpec; 4] = [
    SignalSpec { mu: 50.0, sigma: 15.0, h: 8.0 },
    SignalSpec { mu: 70.0, sigma: 10.0, h: 10.0 },
    SignalSpec { mu: 40.0, sigma: 1.0, h: 0.5 },
    SignalSpec { mu: 30.0, sigma: 1.0, h: 0.5 },
];

pub const CONCENTRATION_MAX: f64 = 10.0;

/// `h * exp(-(i - mu)^2 / (2 sigma^2))` for channels `i = 0..m`.
pub fn gaussian_signal(m: usize, spec: &SignalSpec) -> Array1<f64> {
    let two_var = 2.0 * spec.sigma * spec.sigma;
    Array1::from_shape_fn(m, |i| {
        let d = i as f64 - spec.mu;
        spec.h * (-(d * d) / two_var).exp()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoHolderData {
    pub holder1: Dataset,
    pub holder2: Dataset,
    /// Pure band shapes `s1..s4`.
    pub signals: [Array1<f64>; 4],
    pub specs: [SignalSpec; 4],
}

impl TwoHolderData {
    /// Both holders stacked, holder 1 first.
    pub fn combined(&self) -> Dataset {
        concat_rows(&self.holder1, &self.holder2).expect("holders share channel count")
    }
}

/// Generate both holders with `n` samples each and `m` channels.
///
/// Concentrations are drawn uniform on `[0, 10)`: holder 1 draws `c1`, `c2`,
/// `c3` (each a full column of `n` values, in that order), then holder 2
/// draws its own `c1`, `c2`, `c4`.
pub fn simulate_two_holders(n: usize, m: usize, rng: &mut RngStream) -> Result<TwoHolderData> {
    simulate_with_specs(n, m, DEFAULT_SIGNALS, rng)
}

pub fn simulate_with_specs(
    n: usize,
    m: usize,
    specs: [SignalSpec; 4],
    rng: &mut RngStream,
) -> Result<TwoHolderData> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "each holder needs at least 2 samples, got {n}"
        )));
    }
    if m == 0 {
        return Err(Error::Argument("at least one channel is required".into()));
    }
    let signals = specs.map(|s| gaussian_signal(m, &s));
    let holder1 = holder(n, [&signals[0], &signals[1], &signals[2]], rng)?;
    let holder2 = holder(n, [&signals[0], &signals[1], &signals[3]], rng)?;
    Ok(TwoHolderData {
        holder1,
        holder2,
        signals,
        specs,
    })
}

fn holder(n: usize, bands: [&Array1<f64>; 3], rng: &mut RngStream) -> Result<Dataset> {
    let m = bands[0].len();
    let mut conc = Array2::zeros((n, 3));
    for mut col in conc.columns_mut() {
        for v in col.iter_mut() {
            *v = rng.uniform_range(0.0, CONCENTRATION_MAX);
        }
    }
    let mut s = Array2::zeros((m, 3));
    for (j, b) in bands.iter().enumerate() {
        s.column_mut(j).assign(b);
    }
    let x = conc.dot(&s.t());
    let y = conc.column(0).to_owned();
    Dataset::new(x, y)
}

/// Stack the samples of `d1` on top of those of `d2`. The result is uncentered.
pub fn concat_rows(d1: &Dataset, d2: &Dataset) -> Result<Dataset> {
    if d1.n_channels() != d2.n_channels() {
        return Err(Error::Shape(format!(
            "cannot stack datasets with {} and {} channels",
            d1.n_channels(),
            d2.n_channels()
        )));
    }
    let a = d1.uncenter();
    let b = d2.uncenter();
    let x = concatenate(Axis(0), &[a.x().view(), b.x().view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let y = concatenate(Axis(0), &[a.y().view(), b.y().view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::residual_direction;

    #[test]
    fn analyte_band_shape() {
        let s = gaussian_signal(100, &DEFAULT_SIGNALS[0]);
        assert_eq!(s[50], 8.0);
        for d in 1..50 {
            assert!((s[50 - d] - s[50 + d]).abs() < 1e-15);
        }
        let e = 8.0 * (-0.5f64).exp();
        assert!((s[35] - e).abs() < 1e-12);
        assert!((s[65] - e).abs() < 1e-12);
    }

    #[test]
    fn wide_band_tends_to_constant() {
        let s = gaussian_signal(20, &SignalSpec::new(5.0, 1e9, 2.0).unwrap());
        assert!(s.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(SignalSpec::new(0.0, 1.0, 0.0).is_err());
        assert!(SignalSpec::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn default_shapes_and_ranges() {
        let data = simulate_two_holders(100, 100, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(data.holder1.x().dim(), (100, 100));
        assert_eq!(data.holder1.y().len(), 100);
        assert_eq!(data.holder2.x().dim(), (100, 100));
        for y in data.holder1.y().iter().chain(data.holder2.y().iter()) {
            assert!((0.0..CONCENTRATION_MAX).contains(y));
        }
    }

    #[test]
    fn unique_bands_stay_with_their_holder() {
        let data = simulate_two_holders(100, 100, &mut RngStream::new(2, 0)).unwrap();
        let s = &data.signals;
        let basis1 = ndarray::stack(Axis(1), &[s[0].view(), s[1].view(), s[2].view()]).unwrap();
        let basis2 = ndarray::stack(Axis(1), &[s[0].view(), s[1].view(), s[3].view()]).unwrap();
        let s4_res = residual_direction(s[3].view(), basis1.view()).unwrap();
        let s3_res = residual_direction(s[2].view(), basis2.view()).unwrap();
        let max1 = data.holder1.x().dot(&s4_res).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let max2 = data.holder2.x().dot(&s3_res).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max1 < 1e-10, "holder 1 energy along s4 residual {max1}");
        assert!(max2 < 1e-10, "holder 2 energy along s3 residual {max2}");
        // and the residual direction itself is far from zero
        assert!(s4_res.dot(&s4_res).sqrt() > 0.1);
    }

    #[test]
    fn holder_matrix_has_rank_three() {
        let data = simulate_two_holders(50, 100, &mut RngStream::new(3, 0)).unwrap();
        let x = data.holder1.x();
        // Gram-Schmidt on the columns of X^T with relative tolerance
        let mut basis: Vec<Array1<f64>> = Vec::new();
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for row in x.rows() {
            let mut r = row.to_owned();
            for b in &basis {
                let c = b.dot(&r);
                r.scaled_add(-c, b);
            }
            let nrm = r.dot(&r).sqrt();
            if nrm > 1e-8 * scale {
                basis.push(r / nrm);
            }
        }
        assert_eq!(basis.len(), 3);
    }

    #[test]
    fn same_seed_same_data() {
        let a = simulate_two_holders(10, 30, &mut RngStream::new(9, 1)).unwrap();
        let b = simulate_two_holders(10, 30, &mut RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
        let c = simulate_two_holders(10, 30, &mut RngStream::new(10, 1)).unwrap();
        assert_ne!(a.holder1, c.holder1);
    }

    #[test]
    fn concat_shapes_and_order() {
        let data = simulate_two_holders(100, 100, &mut RngStream::new(4, 0)).unwrap();
        let all = data.combined();
        assert_eq!(all.x().dim(), (200, 100));
        for i in 0..100 {
            assert_eq!(all.x().row(i), data.holder1.x().row(i));
            assert_eq!(all.x().row(100 + i), data.holder2.x().row(i));
        }
        let same = concat_rows(&data.holder1, &Dataset::empty(100)).unwrap();
        assert_eq!(same, data.holder1);
        assert!(matches!(
            concat_rows(&data.holder1, &Dataset::empty(99)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tiny_holders_rejected() {
        assert!(simulate_two_holders(1, 10, &mut RngStream::new(0, 0)).is_err());
    }
}
