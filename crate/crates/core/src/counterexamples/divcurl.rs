//! Div-curl families: a concentrating square, a harmonic concentration on
//! a circle, and a one-dimensional profile whose energy misses L log L.

use std::f64::consts::PI;

use serde::Serialize;

use crate::field::GridField;
use crate::norms::{dominates, local_hardy_norm, DominanceMode, MaximalConfig, YoungFunction};
use crate::quad::{dyadic_breaks, integrate, integrate_2d, integrate_breaks};
use crate::quasiaffine::{PairingFamily, TestFunction};
use crate::{Error, Result};

/// Bounding box of a test function's support in the plane.
pub(crate) fn support_box(test: &TestFunction) -> Option<([f64; 2], [f64; 2])> {
    match test {
        TestFunction::SmoothBump { center, radius }
        | TestFunction::IndicatorBall { center, radius }
        | TestFunction::HolderCusp { center, radius, .. } => Some((
            [center[0] - radius, center[1] - radius],
            [center[0] + radius, center[1] + radius],
        )),
        TestFunction::IndicatorBox { lo, hi } => Some(([lo[0], lo[1]], [hi[0], hi[1]])),
        TestFunction::Constant { .. } => None,
    }
}

fn planar(test: &TestFunction) -> Result<()> {
    let ok = match test {
        TestFunction::SmoothBump { center, .. }
        | TestFunction::IndicatorBall { center, .. }
        | TestFunction::HolderCusp { center, .. } => center.len() == 2,
        TestFunction::IndicatorBox { lo, hi } => lo.len() == 2 && hi.len() == 2,
        TestFunction::Constant { .. } => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(format!("test {} is not planar", test.id())))
    }
}

// ---------------------------------------------------------------------------
// Concentrating square

/// `v_j = ṽ_j = j·e·1_{[0,1/j)²}`; `F = v·ṽ = j²` on the square.
#[derive(Debug, Clone, Serialize)]
pub struct Ex61 {
    pub direction: [f64; 2],
    /// Grid points per axis on the period-2 grid used for fields and Hardy norms.
    pub grid: usize,
}

impl Default for Ex61 {
    fn default() -> Self {
        Self {
            direction: [1.0, 0.0],
            grid: 256,
        }
    }
}

impl Ex61 {
    pub const PERIOD: f64 = 2.0;

    pub fn fields(&self, j: usize) -> (GridField, GridField) {
        let n = self.grid;
        let side = 1.0 / j as f64;
        let [e0, e1] = self.direction;
        let jf = j as f64;
        let v = GridField::from_fn(&[n, n], &[Self::PERIOD; 2], 2, |x, o| {
            let inside = x[0] < side && x[1] < side;
            let h = if inside { jf } else { 0.0 };
            o[0] = h * e0;
            o[1] = h * e1;
        });
        (v.clone(), v)
    }

    pub fn energy_grid(&self, j: usize) -> GridField {
        let (v, w) = self.fields(j);
        let mut f = GridField::zeros(&v.shape, &v.period, 1);
        for p in 0..v.npoints() {
            f.values[p] = v.at(p).iter().zip(w.at(p)).map(|(a, b)| a * b).sum();
        }
        f
    }

    /// Local Hardy norm of `F(v_j)` on the ball of radius 3/4 about the corner.
    pub fn hardy(&self, j: usize) -> Result<f64> {
        local_hardy_norm(&self.energy_grid(j), 0.75, &[0.0, 0.0], &MaximalConfig::default())
    }

    fn square_pairing(&self, j: usize, test: &TestFunction, abs: bool) -> f64 {
        let jf = j as f64;
        let side = 1.0 / jf;
        let [e0, e1] = self.direction;
        let e2 = jf * jf * (e0 * e0 + e1 * e1);
        if let TestFunction::IndicatorBox { lo, hi } = test {
            let ov = |a: f64, b: f64| (b.min(side) - a.max(0.0)).max(0.0);
            return e2 * ov(lo[0], hi[0]) * ov(lo[1], hi[1]);
        }
        let f = |x: f64, y: f64| {
            let v = test.eval(&[x, y]);
            if abs {
                v.abs()
            } else {
                v
            }
        };
        e2 * integrate_2d([0.0, 0.0], [side, side], 4, f)
    }
}

impl PairingFamily for Ex61 {
    fn name(&self) -> String {
        "ex61".into()
    }

    fn pair(&self, j: usize, test: &TestFunction) -> Result<(f64, f64)> {
        planar(test)?;
        if j == 0 {
            return Err(Error::InvalidInput("index must be ≥ 1".into()));
        }
        if let TestFunction::Constant { value } = test {
            let [e0, e1] = self.direction;
            let m = e0 * e0 + e1 * e1;
            return Ok((m * value, m * value.abs()));
        }
        Ok((self.square_pairing(j, test, false), self.square_pairing(j, test, true)))
    }

    fn limit(&self, _test: &TestFunction) -> Result<f64> {
        Ok(0.0)
    }
}

// ---------------------------------------------------------------------------
// Harmonic concentration on the circle |x| = 1/2

/// With `h_j = c_j Im z^j` inside `B_{1/2}` and `c_j 4^{-j} Im z̄^{-j}`
/// outside, `ṽ_j = ∇h_j` is curl-free and `v_j = ∇^⊥k_j` (same with `Re`) is
/// divergence-free. `v_j = ṽ_j` inside and `v_j = −ṽ_j` outside, so
/// `F = ±|∇h_j|²` with total mass `π` on each side of the circle.
#[derive(Debug, Clone, Serialize)]
pub struct Ex62 {
    /// Grid points per axis for the Hardy norm (period 4, centred).
    pub grid: usize,
    /// Angular samples of the polar quadrature for continuous tests.
    pub angles: usize,
}

impl Default for Ex62 {
    fn default() -> Self {
        Self {
            grid: 1024,
            angles: 256,
        }
    }
}

impl Ex62 {
    pub const PERIOD: f64 = 4.0;

    fn amplitude(j: usize) -> f64 {
        (j as f64).powf(-0.5) * 2f64.powi(j as i32)
    }

    /// `F(v_j, ṽ_j)` at `x` measured from the centre.
    pub fn energy(j: usize, x: f64, y: f64) -> f64 {
        let r2 = 4.0 * (x * x + y * y);
        let jf = j as f64;
        if r2 <= 1.0 {
            4.0 * jf * r2.powf(jf - 1.0)
        } else {
            -4.0 * jf * r2.powf(-jf - 1.0)
        }
    }

    /// `(v_j, ṽ_j)` at `x` measured from the centre.
    pub fn vectors(j: usize, x: f64, y: f64) -> ([f64; 2], [f64; 2]) {
        let c = Self::amplitude(j);
        let jf = j as f64;
        let r2 = x * x + y * y;
        if 4.0 * r2 <= 1.0 {
            // c j (Im z^{j-1}, Re z^{j-1})
            let (re, im) = zpow(x, y, j as i32 - 1);
            let g = [c * jf * im, c * jf * re];
            (g, g)
        } else {
            // f(z̄) = C z̄^{-j}, f' = −C j z̄^{-j-1}; ∇h = (Im f', −Re f').
            let cc = c * 4f64.powi(-(j as i32));
            let (re, im) = zpow(x, -y, -(j as i32) - 1);
            let (fre, fim) = (-cc * jf * re, -cc * jf * im);
            let g = [fim, -fre];
            ([-g[0], -g[1]], g)
        }
    }

    pub fn fields(&self, j: usize) -> (GridField, GridField) {
        let n = self.grid;
        let c = Self::PERIOD / 2.0;
        let v = GridField::from_fn(&[n, n], &[Self::PERIOD; 2], 2, |x, o| {
            let (a, _) = Self::vectors(j, x[0] - c, x[1] - c);
            o.copy_from_slice(&a);
        });
        let w = GridField::from_fn(&[n, n], &[Self::PERIOD; 2], 2, |x, o| {
            let (_, b) = Self::vectors(j, x[0] - c, x[1] - c);
            o.copy_from_slice(&b);
        });
        (v, w)
    }

    pub fn energy_grid(&self, j: usize) -> GridField {
        let c = Self::PERIOD / 2.0;
        GridField::scalar_fn(&[self.grid; 2], &[Self::PERIOD; 2], |x| Self::energy(j, x[0] - c, x[1] - c))
    }

    /// Local Hardy norm of `F(v_j)` on the unit ball about the centre.
    pub fn hardy(&self, j: usize) -> Result<f64> {
        let c = Self::PERIOD / 2.0;
        local_hardy_norm(&self.energy_grid(j), 1.0, &[c, c], &MaximalConfig::default())
    }

    fn angular_mean(&self, test: &TestFunction, r: f64, abs: bool) -> f64 {
        let m = if test.is_continuous() { self.angles } else { 16 * self.angles };
        let s: f64 = (0..m)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                let v = test.eval(&[r * t.cos(), r * t.sin()]);
                if abs {
                    v.abs()
                } else {
                    v
                }
            })
            .sum();
        s / m as f64
    }

    /// `(∫F φ, ∫|F||φ|)` by polar quadrature. Substituting `s = (2r)^{±2j}`
    /// turns each side into `½∫₀¹ φ̄(r(s)) ds` with `φ̄` the angular mean.
    fn polar(&self, j: usize, test: &TestFunction) -> (f64, f64) {
        let e = 1.0 / (2.0 * j as f64);
        let breaks = dyadic_breaks(60);
        let side = |sign: f64, abs: bool| {
            integrate_breaks(&breaks, |s| self.angular_mean(test, 0.5 * s.powf(sign * e), abs))
        };
        let (pi, po) = (side(1.0, false), side(-1.0, false));
        let (ai, ao) = (side(1.0, true), side(-1.0, true));
        (PI * (pi - po), PI * (ai + ao))
    }
}

fn zpow(x: f64, y: f64, k: i32) -> (f64, f64) {
    let r = (x * x + y * y).sqrt();
    let t = y.atan2(x);
    let rk = r.powi(k);
    let kt = k as f64 * t;
    (rk * kt.cos(), rk * kt.sin())
}

impl PairingFamily for Ex62 {
    fn name(&self) -> String {
        "ex62".into()
    }

    fn pair(&self, j: usize, test: &TestFunction) -> Result<(f64, f64)> {
        planar(test)?;
        if j == 0 {
            return Err(Error::InvalidInput("index must be ≥ 1".into()));
        }
        Ok(self.polar(j, test))
    }

    fn limit(&self, _test: &TestFunction) -> Result<f64> {
        Ok(0.0)
    }
}

// ---------------------------------------------------------------------------
// Profile outside L log L

/// `v = (w(x₁ − a), 0)`, `ṽ = g(|v|²)v` with `g(s²) = √(ψ(s)/s²)` and
/// `ψ(s) = s^r log^β(1+s)`, so `F = v·ṽ = |v|√ψ(|v|)`. The profile is
/// `w(t) = t^{-1/r} log(1+1/t)^{-(β+1+γ)/r}` on `(0,1)`.
#[derive(Debug, Clone, Serialize)]
pub struct Ex63 {
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Shift `a` of the profile along `x₁`.
    pub offset: f64,
}

impl Default for Ex63 {
    fn default() -> Self {
        Self {
            r: 2.0,
            beta: 0.0,
            gamma: 0.25,
            offset: 0.0,
        }
    }
}

/// Cut-off in the variable `u = ln(1/t)`; the rest is integrated in closed form.
const U_MAX: f64 = 700.0;

#[derive(Debug, Clone, Serialize)]
pub struct Ex63Hypotheses {
    /// `L^r log^β L ⊄ L² log² L`, by the domination test.
    pub outside_l2log2: bool,
    /// `L^r log^β L ⊆ L¹`.
    pub inside_l1: bool,
}

impl Ex63 {
    pub fn validate(&self) -> Result<()> {
        if self.r != 2.0 {
            return Err(Error::InvalidInput(format!(
                "the profile needs r = 2 (v ∈ L² forces r ≥ 2, and r > 2 embeds in L² log² L); got r = {}",
                self.r
            )));
        }
        if !(0.0..2.0).contains(&self.beta) {
            return Err(Error::InvalidInput(format!("β must lie in [0, 2), got {}", self.beta)));
        }
        let top = 1.0 - self.beta / 2.0;
        if !(self.gamma > 0.0 && self.gamma < top) {
            return Err(Error::InvalidInput(format!(
                "γ must lie in (0, {top}) for F log F ∉ L¹, got {}",
                self.gamma
            )));
        }
        let h = self.hypotheses();
        if !(h.outside_l2log2 && h.inside_l1) {
            return Err(Error::InvalidInput(format!("(r, β) fails the containment hypotheses: {h:?}")));
        }
        Ok(())
    }

    pub fn psi(&self) -> YoungFunction {
        YoungFunction::zygmund(self.r, self.beta)
    }

    pub fn hypotheses(&self) -> Ex63Hypotheses {
        let psi = self.psi();
        let l2log2 = YoungFunction::zygmund(2.0, 2.0);
        Ex63Hypotheses {
            outside_l2log2: !dominates(&l2log2, &psi, DominanceMode::NearInfinity).holds,
            inside_l1: dominates(&YoungFunction::power(1.0), &psi, DominanceMode::NearInfinity).holds,
        }
    }

    fn ln_w_at_u(&self, u: f64) -> f64 {
        let big_l = u + (-u).exp().ln_1p();
        u / self.r - (self.beta + 1.0 + self.gamma) / self.r * big_l.ln()
    }

    pub fn profile(&self, t: f64) -> f64 {
        if t > 0.0 && t < 1.0 {
            self.ln_w_at_u(-t.ln()).exp()
        } else {
            0.0
        }
    }

    /// `ln F` as a function of `ln w`.
    fn ln_energy(&self, lw: f64) -> f64 {
        let mut l = (1.0 + self.r / 2.0) * lw;
        if self.beta != 0.0 {
            l += self.beta / 2.0 * ln1p_exp(lw).ln();
        }
        l
    }

    /// `F(v, ṽ)` at `t = x₁ − a`.
    pub fn energy(&self, t: f64) -> f64 {
        if t > 0.0 && t < 1.0 {
            self.ln_energy(self.ln_w_at_u(-t.ln())).exp()
        } else {
            0.0
        }
    }

    /// `F(e^{-u}) e^{-u}`, the integrand after `t = e^{-u}`.
    fn energy_dt(&self, u: f64) -> f64 {
        (self.ln_energy(self.ln_w_at_u(u)) - u).exp()
    }

    /// `∫_U^∞ F e^{-u} du` from the large-`u` asymptotics.
    fn energy_tail(&self, u: f64) -> f64 {
        let e = self.gamma + self.beta / 2.0;
        2f64.powf(-self.beta / 2.0) * u.powf(-e) / e
    }

    pub fn fields(&self, shape: &[usize], period: &[f64]) -> Result<(GridField, GridField)> {
        if shape.len() != 2 {
            return Err(Error::Dimension("the profile fields are planar".into()));
        }
        let v = GridField::from_fn(shape, period, 2, |x, o| {
            o[0] = self.profile(x[0] - self.offset);
            o[1] = 0.0;
        });
        let psi = self.psi();
        let w = GridField::from_fn(shape, period, 2, |x, o| {
            o[0] = psi.eval(self.profile(x[0] - self.offset)).sqrt();
            o[1] = 0.0;
        });
        Ok((v, w))
    }

    /// `∫∫ F(x₁ − a) φ(x) dx` and the same with `|φ|`.
    pub fn pairing(&self, test: &TestFunction) -> Result<(f64, f64)> {
        planar(test)?;
        let Some((lo, hi)) = support_box(test) else {
            return Err(Error::InvalidInput("the profile is not integrable against a constant".into()));
        };
        let strip = |x1: f64, abs: bool| {
            integrate(lo[1], hi[1], 8, |x2| {
                let v = test.eval(&[x1, x2]);
                if abs {
                    v.abs()
                } else {
                    v
                }
            })
        };
        let mut breaks: Vec<f64> = (0..=60).map(|i| i as f64).collect();
        breaks.extend((1..=32).map(|i| 60.0 + (U_MAX - 60.0) * i as f64 / 32.0));
        for edge in [lo[0], hi[0]] {
            let t = edge - self.offset;
            if t > 0.0 && t < 1.0 {
                breaks.push(-t.ln());
            }
        }
        let a = self.offset;
        let mut out = [0.0; 2];
        for (k, abs) in [false, true].into_iter().enumerate() {
            let body = integrate_breaks(&breaks, |u| self.energy_dt(u) * strip(a + (-u).exp(), abs));
            let tail = self.energy_tail(U_MAX) * strip(a, abs);
            out[k] = body + tail;
        }
        Ok((out[0], out[1]))
    }

    /// `∫₀¹ G(min(F, M)) dt` with `G(s) = s log(1+s)`.
    pub fn truncated_llogl(&self, cap: f64) -> f64 {
        let g = |s: f64| s * s.ln_1p();
        // F is increasing in u; u_M solves F(e^{-u}) = M.
        let lf = |u: f64| self.ln_energy(self.ln_w_at_u(u));
        let lm = cap.ln();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if lf(lo) >= lm {
            return g(cap);
        }
        while lf(hi) < lm {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lf(mid) < lm {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let um = 0.5 * (lo + hi);
        let panels = (um / 0.25).ceil() as usize;
        let body = integrate(0.0, um, panels, |u| {
            let f = lf(u).exp().min(cap);
            g(f) * (-u).exp()
        });
        body + g(cap) * (-um).exp()
    }

    /// Luxemburg norm of `w` in `L^ψ(0,1)`; it bounds the constraint
    /// `div v = ∂₁w` in `W^{-1}L^ψ`.
    pub fn constraint_norm(&self) -> f64 {
        let psi = self.psi();
        let modular = |lam: f64| {
            let body = integrate(0.0, U_MAX, 700, |u| {
                let lw = self.ln_w_at_u(u) - lam.ln();
                let val = psi.log_eval(lw.exp()) - u;
                val.exp()
            });
            let e = self.gamma;
            body + 2f64.powf(-self.beta) * U_MAX.powf(-e) / e / (lam * lam)
        };
        let (mut lo, mut hi) = (1e-6f64, 1.0f64);
        while modular(hi) > 1.0 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = (lo * hi).sqrt();
            if modular(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-12 {
                break;
            }
        }
        hi
    }
}

fn ln1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// The profile as a constant sequence.
impl PairingFamily for Ex63 {
    fn name(&self) -> String {
        "ex63".into()
    }

    fn pair(&self, _j: usize, test: &TestFunction) -> Result<(f64, f64)> {
        self.pairing(test)
    }

    fn limit(&self, test: &TestFunction) -> Result<f64> {
        Ok(self.pairing(test)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_indicator_pairing_is_one() {
        let f = Ex61::default();
        let b = TestFunction::IndicatorBox {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        for j in [2, 4, 8, 16, 32, 64] {
            assert_eq!(f.pair(j, &b).unwrap().0, 1.0);
            let g = f.energy_grid(j);
            assert_eq!(crate::quasiaffine::grid_pairing(&g, &b).0, 1.0);
        }
    }

    #[test]
    fn square_smooth_pairing_tends_to_point_value() {
        let f = Ex61::default();
        let b = TestFunction::SmoothBump {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let p = f.pair(64, &b).unwrap().0;
        assert!((p - (-1f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn circle_indicator_pairing_is_pi() {
        let f = Ex62::default();
        let b = TestFunction::IndicatorBall {
            center: vec![0.0, 0.0],
            radius: 0.5,
        };
        for j in [4, 16] {
            let (p, a) = f.pair(j, &b).unwrap();
            assert!((p - PI).abs() < 1e-12, "{p}");
            assert!((a - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_total_mass_cancels() {
        let f = Ex62::default();
        let c = TestFunction::Constant { value: 1.0 };
        let (p, a) = f.pair(8, &c).unwrap();
        assert!(p.abs() < 1e-12 && (a - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn circle_fields_match_energy() {
        for (x, y) in [(0.2, 0.1), (0.1, -0.3), (0.7, 0.2), (-0.4, -0.5)] {
            let (v, w) = Ex62::vectors(6, x, y);
            let f = v[0] * w[0] + v[1] * w[1];
            let e = Ex62::energy(6, x, y);
            assert!((f - e).abs() <= 1e-12 * e.abs().max(1e-300), "{f} vs {e}");
        }
    }

    #[test]
    fn circle_fields_are_continuous_potentials() {
        // Tangential ṽ and normal v components match across |x| = 1/2.
        let t: f64 = 0.7;
        let (ri, ro) = (0.5 - 1e-9, 0.5 + 1e-9);
        let (vi, wi) = Ex62::vectors(5, ri * t.cos(), ri * t.sin());
        let (vo, wo) = Ex62::vectors(5, ro * t.cos(), ro * t.sin());
        let tang = |a: [f64; 2]| -a[0] * t.sin() + a[1] * t.cos();
        let norm = |a: [f64; 2]| a[0] * t.cos() + a[1] * t.sin();
        assert!((tang(wi) - tang(wo)).abs() < 1e-6);
        assert!((norm(vi) - norm(vo)).abs() < 1e-6);
    }

    #[test]
    fn profile_masses_increase() {
        let e = Ex63::default();
        e.validate().unwrap();
        let m: Vec<f64> = (1..=6).map(|i| e.truncated_llogl(10f64.powi(i))).collect();
        for w in m.windows(2) {
            assert!(w[1] > 1.1 * w[0], "{m:?}");
        }
    }

    #[test]
    fn profile_constraint_norm_is_l2_norm() {
        let e = Ex63::default();
        let lam = e.constraint_norm();
        // ∫w² = ∫₀^∞ L(u)^{-(1+γ)} du.
        let body = integrate(0.0, U_MAX, 700, |u| (u + (-u).exp().ln_1p()).powf(-1.25));
        let l2 = (body + U_MAX.powf(-0.25) / 0.25).sqrt();
        assert!((lam - l2).abs() < 1e-8 * l2, "{lam} {l2}");
        let b = TestFunction::IndicatorBox {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let p = e.pairing(&b).unwrap().0;
        assert!((p - l2 * l2).abs() < 1e-8 * p);
    }

    #[test]
    fn profile_hypotheses() {
        assert!(Ex63 { r: 3.0, ..Default::default() }.validate().is_err());
        assert!(Ex63 { gamma: 1.5, ..Default::default() }.validate().is_err());
        let h = Ex63::default().hypotheses();
        assert!(h.outside_l2log2 && h.inside_l1);
    }
}
