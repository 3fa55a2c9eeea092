use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::EvalError;

/// Magnitudes `|X_k|`, `k = 0..=N/2`, of the unnormalized forward DFT
/// `X_k = sum_t (x_t - mean) * exp(-2 pi i k t / N)` of a de-meaned series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDensity {
    /// Length of the input series.
    pub n: usize,
    pub magnitudes: Vec<f64>,
}

impl SpectralDensity {
    /// Frequency of bin `k` in cycles per sample.
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// Energy of the de-meaned series recovered from the one-sided spectrum:
    /// interior bins count twice (for their negative-frequency mirror), the DC
    /// bin and, for even `N`, the Nyquist bin once, all divided by `N`.
    pub fn energy(&self) -> f64 {
        let last = self.magnitudes.len() - 1;
        let sum: f64 = self
            .magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let once = k == 0 || (self.n.is_multiple_of(2) && k == last);
                if once {
                    m * m
                } else {
                    2.0 * m * m
                }
            })
            .sum();
        sum / self.n as f64
    }
}

pub fn spectral_density(series: &[f64]) -> Result<SpectralDensity, EvalError> {
    let n = series.len();
    if n < 2 {
        return Err(EvalError::SeriesTooShort(n));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(SpectralDensity {
        n,
        magnitudes: buf[..n / 2 + 1].iter().map(|c| c.norm()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_no_energy() {
        let s = spectral_density(&[4.0; 17]).unwrap();
        assert_eq!(s.magnitudes.len(), 9);
        assert!(s.magnitudes.iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn length_is_half_plus_one() {
        for n in 2..40 {
            let x: Vec<f64> = (0..n).map(|i| (i * i % 7) as f64).collect();
            assert_eq!(spectral_density(&x).unwrap().magnitudes.len(), n / 2 + 1);
        }
    }

    #[test]
    fn short_series_is_an_error() {
        assert!(matches!(spectral_density(&[1.0]), Err(EvalError::SeriesTooShort(1))));
    }

    #[test]
    fn cosine_lands_in_one_bin() {
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 5.0 * t as f64 / n as f64).cos())
            .collect();
        let s = spectral_density(&x).unwrap();
        // a unit cosine at bin j has |X_j| = N / 2
        assert!((s.magnitudes[5] - 32.0).abs() < 1e-9);
        let var: f64 = x.iter().map(|v| v * v).sum();
        assert!((s.energy() - var).abs() < 1e-9);
    }
}
