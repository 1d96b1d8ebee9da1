//! Frequency-wise Helmholtz–Hodge splitting `v = Bu + A*w`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::field::{apply_symbol, fft, ifft, GridField, Spectrum};
use crate::norms::{neg_sobolev_norm, norm, NormTag};
use crate::symbol::{constant_rank_check, OperatorSymbol, SamplingPlan, DEFAULT_TOL_SV};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    /// `‖b + a − v‖ / ‖v‖`.
    pub reconstruction: f64,
    /// `‖A b‖ / ‖ |A(ξ)| |v̂| ‖`, both in discrete L².
    pub constraint: f64,
    /// `‖A*w − a‖ / ‖v‖`.
    pub a_star: f64,
    /// `|⟨b, a⟩| / ‖v‖²`.
    pub orthogonality: f64,
    /// `‖a-part of the splitting of b‖ / ‖v‖`.
    pub idempotence: f64,
}

#[derive(Debug, Clone)]
pub struct HelmholtzResult {
    pub b_part: GridField,
    pub a_star_part: GridField,
    pub w: GridField,
    pub residuals: Residuals,
}

impl HelmholtzResult {
    pub fn reconstruction_error(&self) -> f64 {
        self.residuals.reconstruction
    }

    pub fn constraint_residual(&self) -> f64 {
        self.residuals.constraint
    }
}

struct Split {
    b: Spectrum,
    a: Spectrum,
    w: Spectrum,
    /// `Σ ‖A(ξ)‖² |v̂(ξ)|²`.
    weighted_energy: f64,
}

fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.pseudo_inverse(DEFAULT_TOL_SV * smax.max(f64::MIN_POSITIVE))
        .expect("both factors computed")
}

fn split(v: &Spectrum, sym: &OperatorSymbol) -> Result<Split> {
    let npts = v.npoints();
    let (dv, dw) = (sym.dim_v, sym.dim_w);
    let mut b = vec![vec![Complex64::zero(); npts]; dv];
    let mut a = vec![vec![Complex64::zero(); npts]; dv];
    let mut w = vec![vec![Complex64::zero(); npts]; dw];
    let mut weighted_energy = 0.0;
    let il = crate::symbol::i_pow(sym.l);
    for p in 0..npts {
        let vhat: Vec<Complex64> = v.comps.iter().map(|c| c[p]).collect();
        let xi = v.xi(p);
        if xi.iter().all(|x| *x == 0.0) {
            for c in 0..dv {
                b[c][p] = vhat[c];
            }
            continue;
        }
        let am = sym.evaluate(&xi)?;
        let proj = sym.kernel_projection(&xi)?;
        let op2 = am.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
        weighted_energy += op2 * op2 * vhat.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for r in 0..dv {
            let pv: Complex64 = (0..dv).map(|c| vhat[c] * proj[(r, c)]).sum();
            b[r][p] = pv;
            a[r][p] = vhat[r] - pv;
        }
        let g = pinv_sym(&(&am * am.transpose()));
        let av: Vec<Complex64> = (0..dw)
            .map(|r| (0..dv).map(|c| vhat[c] * am[(r, c)]).sum::<Complex64>() * il)
            .collect();
        for r in 0..dw {
            w[r][p] = (0..dw).map(|c| av[c] * g[(r, c)]).sum();
        }
    }
    let wrap = |comps| Spectrum {
        shape: v.shape.clone(),
        period: v.period.clone(),
        comps,
    };
    Ok(Split {
        b: wrap(b),
        a: wrap(a),
        w: wrap(w),
        weighted_energy,
    })
}

fn check_rank(sym: &OperatorSymbol) -> Result<()> {
    let rep = constant_rank_check(sym, SamplingPlan::default(), DEFAULT_TOL_SV);
    if !rep.constant {
        return Err(Error::NonConstantRank {
            rank_a: rep.rank.unwrap_or(0),
            rank_b: rep.witness_rank.unwrap_or(0),
            witness: rep.witness.unwrap_or_default(),
        });
    }
    Ok(())
}

/// Splits `v` into `b̂ = P(ξ)v̂` and `â = (I−P(ξ))v̂`, with the minimal-norm
/// potential `ŵ = (AAᵀ)† i^l A(ξ) v̂` so that `A*w = a`. The zero mode goes
/// to `b`.
pub fn helmholtz(v: &GridField, sym: &OperatorSymbol) -> Result<HelmholtzResult> {
    if v.dim_v != sym.dim_v || v.n() != sym.n {
        return Err(Error::Dimension(format!(
            "field (n={}, dimV={}) vs operator (n={}, dimV={})",
            v.n(),
            v.dim_v,
            sym.n,
            sym.dim_v
        )));
    }
    check_rank(sym)?;
    let vhat = fft(v);
    let s = split(&vhat, sym)?;
    let b_part = ifft(&s.b);
    let a_star_part = ifft(&s.a);
    let w = ifft(&s.w);

    let vn = v.l2();
    let safe = |x: f64| if x > 0.0 { x } else { 1.0 };
    let recon = b_part.add(&a_star_part)?.sub(v)?.l2() / safe(vn);
    let ab = apply_symbol(sym, &b_part)?.l2();
    let constraint = ab / safe((s.weighted_energy * v.volume()).sqrt());
    let astar_w = apply_symbol(&sym.adjoint(), &w)?;
    let a_star = astar_w.sub(&a_star_part)?.l2() / safe(vn);
    let orthogonality = b_part.dot(&a_star_part).abs() / safe(vn * vn);
    let again = split(&fft(&b_part), sym)?;
    let idempotence = ifft(&again.a).l2() / safe(vn);

    Ok(HelmholtzResult {
        b_part,
        a_star_part,
        w,
        residuals: Residuals {
            reconstruction: recon,
            constraint,
            a_star,
            orthogonality,
            idempotence,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// `‖b‖_{innerB} / ‖v‖_{innerB}`; `None` when both vanish.
    pub b_ratio: Option<f64>,
    /// `‖a‖_{innerW} / ‖|ξ|^{-l} Av‖_{innerW}`; `None` when `Av` vanishes.
    pub w_ratio: Option<f64>,
    pub b_norm: f64,
    pub v_norm: f64,
    pub a_star_norm: f64,
    pub av_neg_norm: f64,
}

fn guarded_ratio(num: f64, den: f64, scale: f64) -> Option<f64> {
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if den <= floor {
        None
    } else {
        Some(num / den)
    }
}

/// Measured constants of the two splitting estimates for one field.
pub fn helmholtz_estimates(
    v: &GridField,
    sym: &OperatorSymbol,
    inner_b: &NormTag,
    inner_w: &NormTag,
) -> Result<EstimateReport> {
    let h = helmholtz(v, sym)?;
    let v_norm = norm(v, inner_b)?;
    let b_norm = norm(&h.b_part, inner_b)?;
    let a_star_norm = norm(&h.a_star_part, inner_w)?;
    let av = apply_symbol(sym, v)?;
    let av_neg_norm = neg_sobolev_norm(&av, sym.l as f64, inner_w, false)?.value;
    let scale = norm(v, inner_w)?;
    Ok(EstimateReport {
        b_ratio: guarded_ratio(b_norm, v_norm, v_norm),
        w_ratio: guarded_ratio(a_star_norm, av_neg_norm, scale),
        b_norm,
        v_norm,
        a_star_norm,
        av_neg_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol;
    use std::f64::consts::PI;

    fn grid(n: usize) -> (Vec<usize>, Vec<f64>) {
        (vec![n, n], vec![2.0 * PI, 2.0 * PI])
    }

    #[test]
    fn gradient_field_is_pure_range_of_div_adjoint() {
        // div* = −∇, so ∇φ lies in the A* range of div.
        let (s, p) = grid(32);
        let v = GridField::from_fn(&s, &p, 2, |x, o| {
            o[0] = (2.0 * x[0] + x[1]).cos() * 2.0;
            o[1] = (2.0 * x[0] + x[1]).cos();
        });
        let h = helmholtz(&v, &symbol::div2()).unwrap();
        assert!(h.b_part.l2() < 1e-10 * v.l2());
        assert!(h.residuals.a_star < 1e-12);
    }

    #[test]
    fn div_free_field_is_kernel() {
        let (s, p) = grid(32);
        let v = GridField::from_fn(&s, &p, 2, |x, o| {
            o[0] = (3.0 * x[1]).sin();
            o[1] = x[0].cos() + 0.5;
        });
        let h = helmholtz(&v, &symbol::div2()).unwrap();
        assert!(h.a_star_part.l2() < 1e-10 * v.l2());
        let r = &h.residuals;
        assert!(r.reconstruction < 1e-12 && r.constraint < 1e-12 && r.idempotence < 1e-12);
    }

    #[test]
    fn one_dimensional_ratio_is_one() {
        let v = GridField::scalar_fn(&[64], &[2.0 * PI], |x| (3.0 * x[0]).sin());
        let rep = helmholtz_estimates(
            &v,
            &symbol::grad(1),
            &NormTag::Lebesgue { p: 2.0 },
            &NormTag::Lebesgue { p: 2.0 },
        )
        .unwrap();
        assert!(rep.b_ratio.unwrap() < 1e-12);
        assert!((rep.w_ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn a_free_field_guards_ratio() {
        let (s, p) = grid(16);
        let v = GridField::from_fn(&s, &p, 2, |x, o| {
            o[0] = x[1].sin();
            o[1] = 0.0;
        });
        let l2 = NormTag::Lebesgue { p: 2.0 };
        let rep = helmholtz_estimates(&v, &symbol::div2(), &l2, &l2).unwrap();
        assert!(rep.w_ratio.is_none());
    }
}
