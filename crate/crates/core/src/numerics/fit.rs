//! Least-squares straight line through (x_i, y_i).

use super::sum;

#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("mismatched input lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate abscissas: all x equal")]
    DegenerateAbscissas,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(FitError::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = sum::kbn(xs.iter().copied()) / n;
    let mean_y = sum::kbn(ys.iter().copied()) / n;
    let sxx = sum::kbn(xs.iter().map(|x| (x - mean_x) * (x - mean_x)));
    if sxx <= 0.0 {
        return Err(FitError::DegenerateAbscissas);
    }
    let sxy = sum::kbn(
        xs.iter()
            .zip(ys.iter())
            .map(|(x, y)| (x - mean_x) * (y - mean_y)),
    );
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = sum::kbn(xs.iter().zip(ys.iter()).map(|(x, y)| {
        let r = y - (slope * x + intercept);
        r * r
    }));
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss_res / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let xs: Vec<f64> = (0..20).map(|i| 0.3 * i as f64 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -1.7 * x + 0.25).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 1.7).abs() < 1e-14);
        assert!((f.intercept - 0.25).abs() < 1e-14);
        assert!(f.rms_residual < 1e-14);
    }

    #[test]
    fn small_noise_small_slope_shift() {
        // deterministic pseudo-noise at the 1e-6 scale
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| -x + 1e-6 * ((i as f64 * 12.9898).sin()))
            .collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejections() {
        assert_eq!(
            fit_line(&[0.0, 1.0], &[0.0, 1.0]).unwrap_err(),
            FitError::TooFewPoints(2)
        );
        assert_eq!(
            fit_line(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap_err(),
            FitError::DegenerateAbscissas
        );
        assert_eq!(
            fit_line(&[0.0, 1.0, 2.0], &[0.0, 1.0]).unwrap_err(),
            FitError::LengthMismatch(3, 2)
        );
    }

    #[test]
    fn residual_reported() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 0.0, 1.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!(f.rms_residual > 0.1);
    }
}
