//! Composite Gauss–Legendre quadrature on intervals and rectangles.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

const NODES: usize = 16;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(NODES).expect("non-zero")))
}

/// `∫_a^b f` over `panels` equal panels.
pub fn integrate(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + h * i as f64;
            rule().integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// `∫ f` over consecutive panels `[breaks[i], breaks[i+1]]`; unsorted or
/// repeated breakpoints are tolerated.
pub fn integrate_breaks(breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut b = breaks.to_vec();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b.windows(2).map(|w| rule().integrate(w[0], w[1], &mut f)).sum()
}

/// `∫∫ f` over `[lo₀,hi₀]×[lo₁,hi₁]` with `panels × panels` tensor panels.
pub fn integrate_2d(lo: [f64; 2], hi: [f64; 2], panels: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    integrate(lo[0], hi[0], panels, |x| integrate(lo[1], hi[1], panels, |y| f(x, y)))
}

/// Breakpoints `0, 2^{-depth}, …, 1/4, 1/2, 1` for integrands that vary on
/// a logarithmic scale near zero.
pub fn dyadic_breaks(depth: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=depth).map(|i| 0.5f64.powi(i as i32)).collect();
    b.push(0.0);
    b.reverse();
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(0.0, 2.0, 3, |x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn log_singularity_with_dyadic_panels() {
        let v = integrate_breaks(&dyadic_breaks(60), |x| x.ln());
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle() {
        let v = integrate_2d([0.0, 0.0], [1.0, 2.0], 2, |x, y| x * y);
        assert!((v - 1.0).abs() < 1e-13);
    }
}
