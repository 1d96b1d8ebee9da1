//! Orlicz pair `φ = t² log^a(1+t)`, `ψ = t² log^b(1+t)` with `b < 2 − a`:
//! `|v| ∈ L^ψ`, `ṽ = g(|v|)v` with `g(t)t = φ⁻¹(ψ(t))`, and `v·ṽ log(v·ṽ)`
//! not integrable.

use serde::Serialize;

use crate::field::GridField;
use crate::norms::{dominates, DominanceMode, DominanceReport, YoungFunction};
use crate::quad::integrate_breaks;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct AppendixOrlicz {
    pub a: f64,
    pub b: f64,
    /// Decay margin of the profile.
    pub gamma: f64,
}

impl Default for AppendixOrlicz {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 1.0,
            gamma: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrliczHypotheses {
    /// `t² ⪯ φ`.
    pub power_below_phi: DominanceReport,
    /// `t² log(1+t) ⪯ φ`; expected to fail.
    pub power_log_below_phi: DominanceReport,
    /// `φ ⪯ ψ`.
    pub phi_below_psi: DominanceReport,
    /// `ψ ⪯ φ(t log(1+t))`.
    pub psi_below_composite: DominanceReport,
    /// `φ(t log(1+t)) ⪯ ψ`; expected to fail.
    pub composite_below_psi: DominanceReport,
    pub all_as_expected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrliczReport {
    pub params: AppendixOrlicz,
    /// `max |φ(g(t)t) − ψ(t)| / ψ(t)` over sample points.
    pub inverse_residual: f64,
    pub hypotheses: OrliczHypotheses,
    /// `∫ψ(f)` over the unit interval with a power-law tail; finite.
    pub psi_mass: f64,
    /// `∫ f f̃`; finite.
    pub product_mass: f64,
    pub caps: Vec<f64>,
    /// `∫ min(F, M) log(1 + min(F, M))` with `F = f f̃`.
    pub truncated_masses: Vec<f64>,
    pub strictly_increasing: bool,
}

const U_CUT: f64 = 60.0;

impl AppendixOrlicz {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.b >= self.a && self.b < 2.0 - self.a) {
            return Err(Error::InvalidInput(format!(
                "needs 0 ≤ a ≤ b < 2 − a, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidInput(format!("γ must lie in (0, 1), got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn phi(&self) -> YoungFunction {
        YoungFunction::zygmund(2.0, self.a)
    }

    pub fn psi(&self) -> YoungFunction {
        YoungFunction::zygmund(2.0, self.b)
    }

    /// `f(t) = 1 + t^{-1/2} log(1+1/t)^{-(b+1+γ)/2}` on `(0, 1)`.
    pub fn profile(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        1.0 + t.powf(-0.5) * (1.0 / t).ln_1p().powf(-(self.b + 1.0 + self.gamma) / 2.0)
    }

    /// `g(s)s = φ⁻¹(ψ(s))`.
    pub fn partner(&self, s: f64) -> f64 {
        self.phi().inverse(self.psi().eval(s))
    }

    /// `g(s)`.
    pub fn gain(&self, s: f64) -> f64 {
        if s > 0.0 {
            self.partner(s) / s
        } else {
            0.0
        }
    }

    /// `v = (f(x₁), 0)` and `ṽ = g(|v|)v` on `(0,1) × [0,1)`, zero elsewhere.
    pub fn fields(&self, shape: &[usize], period: &[f64]) -> Result<(GridField, GridField)> {
        if shape.len() != 2 {
            return Err(Error::Dimension("planar example".into()));
        }
        let inside = |x: &[f64]| x[1] < 1.0;
        let v = GridField::from_fn(shape, period, 2, |x, o| {
            o[0] = if inside(x) { self.profile(x[0]) } else { 0.0 };
        });
        let vt = GridField::from_fn(shape, period, 2, |x, o| {
            o[0] = if inside(x) { self.partner(self.profile(x[0])) } else { 0.0 };
        });
        Ok((v, vt))
    }

    fn product_at_u(&self, u: f64) -> f64 {
        let f = self.profile((-u).exp());
        f * self.partner(f)
    }

    /// `∫₀¹ h(t) dt` in the variable `u = ln(1/t)` over `[0, top]`.
    fn integrate_u(&self, top: f64, h: impl Fn(f64) -> f64) -> f64 {
        let breaks: Vec<f64> = (0..=(top * 2.0).ceil() as usize)
            .map(|i| (i as f64 * 0.5).min(top))
            .collect();
        integrate_breaks(&breaks, |u| h(u) * (-u).exp())
    }

    pub fn truncated_mass(&self, cap: f64) -> f64 {
        // F exceeds every cap of interest well before U_CUT; find the last
        // crossing of F = cap by a scan plus bisection.
        let step = 0.125;
        let mut u_hi = U_CUT;
        let mut u = U_CUT;
        while u > 0.0 {
            if self.product_at_u(u) < cap {
                u_hi = u + step;
                break;
            }
            u -= step;
        }
        if u <= 0.0 {
            return cap * cap.ln_1p();
        }
        let (mut lo, mut hi) = (u_hi - step, u_hi);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.product_at_u(mid) < cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let um = 0.5 * (lo + hi);
        let body = self.integrate_u(um, |u| {
            let f = self.product_at_u(u).min(cap);
            f * f.ln_1p()
        });
        body + cap * cap.ln_1p() * (-um).exp()
    }

    pub fn hypotheses(&self) -> Result<OrliczHypotheses> {
        let phi = self.phi();
        let psi = self.psi();
        let t2 = YoungFunction::power(2.0);
        let t2log = YoungFunction::zygmund(2.0, 1.0);
        let ts: Vec<f64> = (0..=2560).map(|i| 10f64.powf(-8.0 + i as f64 / 20.0)).collect();
        let vals: Vec<f64> = ts
            .iter()
            .map(|t| phi.log_eval(t * t.ln_1p()).exp())
            .collect();
        let comp = YoungFunction::tabulated(ts, vals)?;
        let mode = DominanceMode::NearInfinity;
        let h = OrliczHypotheses {
            power_below_phi: dominates(&t2, &phi, mode),
            power_log_below_phi: dominates(&t2log, &phi, mode),
            phi_below_psi: dominates(&phi, &psi, mode),
            psi_below_composite: dominates(&psi, &comp, mode),
            composite_below_psi: dominates(&comp, &psi, mode),
            all_as_expected: false,
        };
        let ok = h.power_below_phi.holds
            && (self.a >= 1.0 || !h.power_log_below_phi.holds)
            && h.phi_below_psi.holds
            && h.psi_below_composite.holds
            && !h.composite_below_psi.holds;
        Ok(OrliczHypotheses {
            all_as_expected: ok,
            ..h
        })
    }

    pub fn run(&self) -> Result<OrliczReport> {
        self.validate()?;
        let phi = self.phi();
        let psi = self.psi();
        let inverse_residual = (0..=60)
            .map(|i| 10f64.powf(-3.0 + i as f64 * 0.25))
            .map(|t| {
                let y = psi.eval(t);
                (phi.eval(self.partner(t)) - y).abs() / y
            })
            .fold(0.0, f64::max);
        let caps: Vec<f64> = (1..=6).map(|i| 10f64.powi(i)).collect();
        let truncated_masses: Vec<f64> = caps.iter().map(|m| self.truncated_mass(*m)).collect();
        let strictly_increasing = truncated_masses.windows(2).all(|w| w[1] > w[0]);
        // Both integrands decay like u^{-1-δ} in u; the tail past the cut is
        // closed with that power law.
        let psi_u = |u: f64| psi.eval(self.profile((-u).exp())) * (-u).exp();
        let prod_u = |u: f64| self.product_at_u(u) * (-u).exp();
        let d_psi = self.gamma;
        let d_prod = self.gamma + 0.5 * (self.a + self.b);
        let psi_mass = self.integrate_u(U_CUT, |u| psi.eval(self.profile((-u).exp())))
            + psi_u(U_CUT) * U_CUT / d_psi;
        let product_mass = self.integrate_u(U_CUT, |u| self.product_at_u(u)) + prod_u(U_CUT) * U_CUT / d_prod;
        Ok(OrliczReport {
            params: self.clone(),
            inverse_residual,
            hypotheses: self.hypotheses()?,
            psi_mass,
            product_mass,
            caps,
            truncated_masses,
            strictly_increasing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partner_inverts() {
        let o = AppendixOrlicz::default();
        let r = o.run().unwrap();
        assert!(r.inverse_residual < 1e-10, "{}", r.inverse_residual);
        assert!(r.hypotheses.all_as_expected, "{:?}", r.hypotheses);
        assert!(r.strictly_increasing, "{:?}", r.truncated_masses);
        assert!(r.psi_mass.is_finite() && r.product_mass.is_finite());
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(AppendixOrlicz { a: 1.0, b: 1.5, gamma: 0.1 }.validate().is_err());
    }
}
