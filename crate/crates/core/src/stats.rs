//! Small statistics helpers shared by calibration and the LSM simulator.

use serde::{Deserialize, Serialize};

/// Ordinary least squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination. Zero when `y` has no variance.
    pub r_squared: f64,
    /// Set when `y` had zero variance and `r_squared` was defined as 0.
    pub zero_variance: bool,
}

impl LinearFit {
    /// Fits a line through `(x, y)` pairs. Returns `None` for fewer than two
    /// points or when every `x` is identical.
    pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
        assert_eq!(xs.len(), ys.len(), "x/y length mismatch");
        let n = xs.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let x_mean = xs.iter().sum::<f64>() / nf;
        let y_mean = ys.iter().sum::<f64>() / nf;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut syy = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            let dx = x - x_mean;
            let dy = y - y_mean;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        let (r_squared, zero_variance) = if syy == 0.0 {
            (0.0, true)
        } else {
            (r_squared(xs, ys, slope, intercept, syy), false)
        };
        Some(LinearFit {
            slope,
            intercept,
            r_squared,
            zero_variance,
        })
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

fn r_squared(xs: &[f64], ys: &[f64], slope: f64, intercept: f64, ss_tot: f64) -> f64 {
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    1.0 - ss_res / ss_tot
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_fit_exactly() {
        let fit = LinearFit::ols(&[0.0, 10.0, 20.0], &[100.0, 200.0, 300.0]).unwrap();
        assert!((fit.slope - 10.0).abs() < 1e-12);
        assert!((fit.intercept - 100.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_data_has_zero_r_squared() {
        let fit = LinearFit::ols(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 0.0);
        assert!(fit.zero_variance);
    }

    #[test]
    fn single_x_is_rejected() {
        assert!(LinearFit::ols(&[2.0, 2.0], &[1.0, 3.0]).is_none());
        assert!(LinearFit::ols(&[2.0], &[1.0]).is_none());
    }
}
