//! One-sided amplitude spectra of signals sampled on a uniform half-open grid.
//!
//! Normalization: `A_0 = |X_0|/N`, `A_k = 2|X_k|/N` for `0 < k < N/2`, and
//! `A_{N/2} = |X_{N/2}|/N` for even `N`, so a unit sinusoid that completes
//! an integer number of periods over the grid reads exactly 1 in its bin.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::ResidualEnsemble;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 2.0,
            n_points: 2000,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::Spec(format!("grid needs at least 2 points, got {}", self.n_points)));
        }
        if !self.x_min.is_finite() || !self.x_max.is_finite() || self.x_min >= self.x_max {
            return Err(Error::Spec(format!(
                "grid domain [{}, {}) is empty",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Bin spacing in Hz.
    pub fn resolution(&self) -> f64 {
        1.0 / self.length()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.n_points as f64 / self.length()
    }
}

/// `x_i = x_min + i·(x_max − x_min)/N` for `i < N`; the right endpoint is excluded.
pub fn dense_grid(spec: &GridSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let step = spec.length() / spec.n_points as f64;
    Ok((0..spec.n_points).map(|i| spec.x_min + i as f64 * step).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Bin frequencies in Hz, `k / (x_max − x_min)` for `k = 0..=N/2`.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Unnormalized DFT `X_k = Σ_n x_n e^{−2πikn/N}`.
pub fn dft(values: &[f64]) -> Vec<Complex64> {
    let mut buffer: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    if buffer.is_empty() {
        return buffer;
    }
    FftPlanner::new().plan_fft_forward(buffer.len()).process(&mut buffer);
    buffer
}

pub fn amplitude_spectrum(values: &[f64], grid: &GridSpec) -> Result<SpectrumReport> {
    grid.validate()?;
    if values.len() != grid.n_points {
        return Err(Error::Input(format!(
            "{} samples for a {}-point grid",
            values.len(),
            grid.n_points
        )));
    }
    let n = values.len();
    let spectrum = dft(values);
    let half = n / 2;
    let amplitudes = (0..=half)
        .map(|k| {
            let a = spectrum[k].norm() / n as f64;
            if k == 0 || (n.is_multiple_of(2) && k == half) {
                a
            } else {
                2.0 * a
            }
        })
        .collect();
    let frequencies = (0..=half).map(|k| k as f64 * grid.resolution()).collect();
    Ok(SpectrumReport {
        frequencies,
        amplitudes,
    })
}

impl SpectrumReport {
    /// Bin index nearest to `freq`.
    pub fn bin_of(&self, freq: f64) -> Result<usize> {
        let nyquist = *self.frequencies.last().unwrap_or(&0.0);
        let spacing = self.frequencies.get(1).copied().unwrap_or(f64::INFINITY);
        if freq.is_nan() || freq < 0.0 || freq > nyquist + 0.5 * spacing {
            return Err(Error::Input(format!(
                "frequency {freq} Hz outside [0, {nyquist}] Hz"
            )));
        }
        let k = (freq / spacing).round() as usize;
        Ok(k.min(self.frequencies.len() - 1))
    }

    /// Amplitude of the bin nearest to `freq`.
    pub fn amplitude_at(&self, freq: f64) -> Result<f64> {
        Ok(self.amplitudes[self.bin_of(freq)?])
    }
}

pub fn amplitude_at(report: &SpectrumReport, target_freq: f64) -> Result<f64> {
    report.amplitude_at(target_freq)
}

/// Spectra of the cumulative prediction `F_s` and the residual `y − F_s`
/// for one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSpectrum {
    pub stage: usize,
    /// Grid predictions of `F_s`.
    pub predictions: Vec<f64>,
    /// `(target frequency, amplitude of F_s)` pairs.
    pub target_amplitudes: Vec<(f64, f64)>,
    pub prediction: SpectrumReport,
    pub residual: SpectrumReport,
}

/// Spectral records for every cumulative prediction in `cumulative`
/// (`cumulative[s]` holds `F_{s+1}` on the grid).
pub fn spectra_from_predictions(
    cumulative: &[Vec<f64>],
    y_true: &[f64],
    grid: &GridSpec,
    target_freqs: &[f64],
) -> Result<Vec<StageSpectrum>> {
    if y_true.len() != grid.n_points {
        return Err(Error::Input(format!(
            "{} clean targets for a {}-point grid",
            y_true.len(),
            grid.n_points
        )));
    }
    cumulative
        .iter()
        .enumerate()
        .map(|(s, pred)| {
            let prediction = amplitude_spectrum(pred, grid)?;
            let residual_values: Vec<f64> = y_true.iter().zip(pred).map(|(y, p)| y - p).collect();
            let residual = amplitude_spectrum(&residual_values, grid)?;
            let target_amplitudes = target_freqs
                .iter()
                .map(|f| Ok((*f, prediction.amplitude_at(*f)?)))
                .collect::<Result<_>>()?;
            Ok(StageSpectrum {
                stage: s + 1,
                predictions: pred.clone(),
                target_amplitudes,
                prediction,
                residual,
            })
        })
        .collect()
}

/// Evaluates each cumulative `F_s` of `ensemble` on the grid and analyses it.
pub fn stage_spectra(
    ensemble: &ResidualEnsemble,
    y_true: &[f64],
    grid: &GridSpec,
    target_freqs: &[f64],
) -> Result<Vec<StageSpectrum>> {
    let xs = dense_grid(grid)?;
    let cumulative = ensemble.cumulative_predictions(&xs)?;
    spectra_from_predictions(&cumulative, y_true, grid, target_freqs)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn grid_examples() {
        let g = GridSpec {
            x_min: 0.0,
            x_max: 2.0,
            n_points: 4,
        };
        assert_eq!(dense_grid(&g).unwrap(), vec![0.0, 0.5, 1.0, 1.5]);
        let xs = dense_grid(&GridSpec::default()).unwrap();
        assert_eq!(xs.len(), 2000);
        assert!((xs[1] - xs[0] - 2.0 / 2000.0).abs() < 1e-15);
        assert!(xs.iter().all(|x| *x < 2.0));
        assert!(dense_grid(&GridSpec { n_points: 1, ..g }).is_err());
        assert!(dense_grid(&GridSpec { x_max: 0.0, ..g }).is_err());
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let g = GridSpec {
            n_points: 64,
            ..Default::default()
        };
        let r = amplitude_spectrum(&[-1.5; 64], &g).unwrap();
        assert!((r.amplitudes[0] - 1.5).abs() < 1e-12);
        assert!(r.amplitudes[1..].iter().all(|a| *a < 1e-12));
        assert_eq!(r.frequencies.len(), 33);
        assert_eq!(r.frequencies[1], 0.5);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            amplitude_spectrum(&[0.0; 3], &GridSpec::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn nearest_bin_lookup() {
        let g = GridSpec::default();
        let r = amplitude_spectrum(&vec![0.0; 2000], &g).unwrap();
        assert_eq!(r.amplitude_at(0.0).unwrap(), 0.0);
        assert_eq!(r.bin_of(0.5).unwrap(), 1);
        assert_eq!(r.bin_of(3.0).unwrap(), 6);
        assert_eq!(r.bin_of(0.74).unwrap(), 1);
        assert_eq!(r.bin_of(500.0).unwrap(), 1000);
        assert!(r.bin_of(600.0).is_err());
        assert!(r.bin_of(-1.0).is_err());
    }

    #[test]
    fn odd_length_has_no_nyquist_bin() {
        let g = GridSpec {
            x_min: 0.0,
            x_max: 1.0,
            n_points: 9,
        };
        let xs = dense_grid(&g).unwrap();
        let v: Vec<f64> = xs.iter().map(|x| (2.0 * PI * 4.0 * x).cos()).collect();
        let r = amplitude_spectrum(&v, &g).unwrap();
        assert_eq!(r.amplitudes.len(), 5);
        assert!((r.amplitudes[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_null_predictions() {
        let g = GridSpec {
            n_points: 200,
            ..Default::default()
        };
        let xs = dense_grid(&g).unwrap();
        let y: Vec<f64> = xs.iter().map(|x| (2.0 * PI * 3.0 * x).sin() + 0.2).collect();
        let out = spectra_from_predictions(&[y.clone(), vec![0.0; 200]], &y, &g, &[3.0]).unwrap();
        assert!(out[0].residual.amplitudes.iter().all(|a| *a == 0.0));
        let truth = amplitude_spectrum(&y, &g).unwrap();
        assert_eq!(out[1].target_amplitudes, vec![(3.0, 0.0)]);
        assert_eq!(out[1].residual, truth);
        assert_eq!(out[1].stage, 2);
    }
}
