//! Least-squares rate fits on log-log data.

use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Fits `y ≈ C x^e` by unweighted least squares on `(ln x, ln |y|)`.
/// Returns `None` with fewer than two usable points.
pub fn power_fit(xs: &[f64], ys: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let e = sxy / sxx;
    let b = my - e * mx;
    let res = (pts.iter().map(|p| (p.1 - b - e * p.0).powi(2)).sum::<f64>() / m).sqrt();
    Some(PowerFit {
        exponent: e,
        log_prefactor: b,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        let f = power_fit(&xs, &ys).unwrap();
        assert!((f.exponent + 1.5).abs() < 1e-12);
        assert!((f.log_prefactor - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(power_fit(&[1.0], &[2.0]).is_none());
    }
}
