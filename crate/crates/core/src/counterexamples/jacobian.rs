//! Jacobian families: maps bounded in a fractional Sobolev space and Hölder
//! test functions whose determinant pairings grow without bound.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Pow, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::field::{GridField, TrigPoly};
use crate::fit::{power_fit, PowerFit};
use crate::norms::{besov_block_norm, gagliardo_seminorm, holder_besov};
use crate::quad::integrate;
use crate::quasiaffine::{evaluate_trig, Integrand};
use crate::{Error, Result};

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// `e^{-1/t}` glued smoothly to 1: `S(t) = 0` for `t ≤ 0`, `1` for `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b))
    }
}

/// Radial cutoff: 1 for `r ≤ inner`, 0 for `r ≥ outer`, smooth between.
pub fn plateau_cutoff(r: f64, inner: f64, outer: f64) -> f64 {
    smooth_step((outer - r) / (outer - inner))
}

/// `Σ det(Du) φ dV` on a grid; `du` holds the row-major Jacobian.
fn grid_det_pairing(du: &GridField, phi: &GridField) -> f64 {
    let n = phi.n();
    let det = crate::quasiaffine::evaluate_grid(&Integrand::det(n), du).expect("Jacobian has n² components");
    det.values.iter().zip(&phi.values).map(|(a, b)| a * b).sum::<f64>() * phi.cell_volume()
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub case: String,
    pub indices: Vec<usize>,
    pub pairings: Vec<f64>,
    /// Closed form per index when one exists.
    pub closed_form: Option<Vec<f64>>,
    /// `max |pairing − closed| / |closed|`.
    pub closed_form_error: Option<f64>,
    pub fit: Option<PowerFit>,
    pub predicted_exponent: f64,
    /// `|fit − predicted| / |predicted|`.
    pub exponent_error: Option<f64>,
}

impl RateReport {
    fn new(case: &str, ks: &[usize], pairings: Vec<f64>, closed: Option<Vec<f64>>, predicted: f64) -> Self {
        let xs: Vec<f64> = ks.iter().map(|k| *k as f64).collect();
        let fit = power_fit(&xs, &pairings);
        let closed_form_error = closed.as_ref().map(|c| {
            c.iter()
                .zip(&pairings)
                .map(|(c, p)| (p - c).abs() / c.abs())
                .fold(0.0, f64::max)
        });
        let exponent_error = fit
            .as_ref()
            .map(|f| (f.exponent - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE));
        Self {
            case: case.into(),
            indices: ks.to_vec(),
            pairings,
            closed_form: closed,
            closed_form_error,
            fit,
            predicted_exponent: predicted,
            exponent_error,
        }
    }
}

// ---------------------------------------------------------------------------
// Case 1: p ≤ n, concentrating bump

/// `u^{(k)} = k^{(α−1)/2+γ} g_{1/k}` with `g_ε(x) = ε^{-1/2} g(x/ε)` and
/// `g(y) = b(y)(y₂, 1)`, `b` the standard bump of `B_{1/2}`; `det Dg = −b∂₁b`
/// and `∫det Dg φ = a₁∂₁φ(0)` with `a₁ = ½∫b²`. The test functions
/// `φ^{(k)}` mollify `(x₁)₊^α φ̃(x₂)` at scale `1/k` with a product kernel.
/// Planar only.
#[derive(Debug, Clone, Serialize)]
pub struct Case1 {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub gamma: Option<f64>,
}

impl Default for Case1 {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.25,
            p: 2.0,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    /// `½∫b²`.
    pub a1: f64,
    pub epsilons: Vec<f64>,
    /// `ε⁻¹∫det Dg(y) φ(εy) dy` for `φ = sin x₁ + |x|²`.
    pub moments_x1: Vec<f64>,
    /// The same for `φ = sin x₂ + x₁x₂`.
    pub moments_x2: Vec<f64>,
    /// Richardson limits (first-order error) at the two smallest `ε`.
    pub a1_extrapolated: f64,
    pub a2_extrapolated: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingCheck {
    pub epsilons: Vec<f64>,
    /// `[g_ε]^p_{W^{β,p}}` on the grid.
    pub seminorms_p: Vec<f64>,
    pub fit: Option<PowerFit>,
    /// `n − βp − p/n`.
    pub predicted_exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Case1Report {
    pub gamma: f64,
    /// `∫det Dg(y) (η ∗ (·)₊^α)(y₁) dy`; `pairing_k = k^{2γ} J` for `k ≥ 3`.
    pub j_integral: f64,
    pub rate: RateReport,
    pub moments: MomentCheck,
    pub scaling: ScalingCheck,
    /// Exponent of `‖u^{(k)}‖_{W^{β,p}}` in `k`; negative means it tends to zero.
    pub sobolev_exponent: f64,
}

impl Case1 {
    const N: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        check_open_unit("α", self.alpha)?;
        check_open_unit("β", self.beta)?;
        if !(self.p > 1.0 && self.p <= Self::N) {
            return Err(Error::InvalidInput(format!("this case needs 1 < p ≤ n = 2, got p = {}", self.p)));
        }
        let top = Self::N / self.p - self.beta - self.alpha / Self::N;
        if top <= 0.0 {
            return Err(Error::InvalidInput(format!("needs β + α/n < n/p; margin is {top}")));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < top) {
                return Err(Error::InvalidInput(format!("γ must lie in (0, {top}), got {g}")));
            }
        }
        Ok(())
    }

    /// Midpoint of `(0, n/p − β − α/n)` unless set.
    pub fn gamma(&self) -> f64 {
        self.gamma
            .unwrap_or(0.5 * (Self::N / self.p - self.beta - self.alpha / Self::N))
    }

    fn bump(y1: f64, y2: f64) -> f64 {
        let q = 1.0 - 4.0 * (y1 * y1 + y2 * y2);
        if q > 0.0 {
            (-1.0 / q).exp()
        } else {
            0.0
        }
    }

    /// `(b, ∂₁b, ∂₂b)`.
    fn bump_grad(y1: f64, y2: f64) -> (f64, f64, f64) {
        let q = 1.0 - 4.0 * (y1 * y1 + y2 * y2);
        if q <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let b = (-1.0 / q).exp();
        let s = -8.0 * b / (q * q);
        (b, s * y1, s * y2)
    }

    /// `g(y) = b(y)(y₂, 1)` and its row-major Jacobian.
    pub fn profile(y1: f64, y2: f64) -> ([f64; 2], [f64; 4]) {
        let (b, b1, b2) = Self::bump_grad(y1, y2);
        ([b * y2, b], [b1 * y2, b2 * y2 + b, b1, b2])
    }

    pub fn det_profile(y1: f64, y2: f64) -> f64 {
        let (b, b1, _) = Self::bump_grad(y1, y2);
        -b * b1
    }

    /// Normalised 1D bump on `(−1, 1)`.
    fn kernel(z: f64) -> f64 {
        static NORM: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
        let c = *NORM.get_or_init(|| 1.0 / integrate(-1.0, 1.0, 16, raw_bump));
        c * raw_bump(z)
    }

    /// `ψ(s) = ∫η(z)(s − z)₊^α dz`.
    pub fn smoothed_power(&self, s: f64) -> f64 {
        let top = s.min(1.0);
        if top <= -1.0 {
            return 0.0;
        }
        let a = self.alpha;
        integrate(-1.0, top, 8, |z| Self::kernel(z) * (s - z).powf(a))
    }

    /// Plateau cutoff: 1 on `|t| ≤ 1/2`, 0 on `|t| ≥ 1`.
    fn plateau(t: f64) -> f64 {
        smooth_step(2.0 * (1.0 - t.abs()))
    }

    fn smoothed_plateau(k: f64, x2: f64) -> f64 {
        integrate(-1.0, 1.0, 8, |z| Self::kernel(z) * Self::plateau(x2 - z / k))
    }

    pub fn a1() -> f64 {
        // ½ ∫ b² = π ∫₀^{1/2} b(r)² r dr.
        PI * integrate(0.0, 0.5, 32, |r| Self::bump(r, 0.0).powi(2) * r)
    }

    pub fn j_integral(&self) -> f64 {
        integrate(-0.5, 0.5, 16, |y1| {
            let d = integrate(-0.5, 0.5, 16, |y2| Self::det_profile(y1, y2));
            d * self.smoothed_power(y1)
        })
    }

    pub fn pairing(&self, k: usize, j_integral: f64) -> f64 {
        (k as f64).powf(Self::N * self.gamma()) * j_integral
    }

    fn moment(eps: f64, phi: impl Fn(f64, f64) -> f64) -> f64 {
        integrate(-0.5, 0.5, 16, |y1| {
            integrate(-0.5, 0.5, 16, |y2| Self::det_profile(y1, y2) * phi(eps * y1, eps * y2))
        }) / eps
    }

    pub fn moment_check() -> MomentCheck {
        let epsilons = vec![0.25, 0.125, 0.0625, 0.03125];
        let f1 = |x: f64, y: f64| x.sin() + x * x + y * y;
        let f2 = |x: f64, y: f64| y.sin() + x * y;
        let m1: Vec<f64> = epsilons.iter().map(|e| Self::moment(*e, f1)).collect();
        let m2: Vec<f64> = epsilons.iter().map(|e| Self::moment(*e, f2)).collect();
        let rich = |m: &[f64]| 2.0 * m[m.len() - 1] - m[m.len() - 2];
        MomentCheck {
            a1: Self::a1(),
            a1_extrapolated: rich(&m1),
            a2_extrapolated: rich(&m2),
            epsilons,
            moments_x1: m1,
            moments_x2: m2,
        }
    }

    /// `g_ε` on the period-2 grid centred at `(1, 1)`.
    pub fn scaled_profile_grid(eps: f64, grid: usize) -> GridField {
        let s = eps.powf(-0.5);
        GridField::from_fn(&[grid, grid], &[2.0, 2.0], 2, |x, o| {
            let (g, _) = Self::profile((x[0] - 1.0) / eps, (x[1] - 1.0) / eps);
            o[0] = s * g[0];
            o[1] = s * g[1];
        })
    }

    pub fn scaling_check(&self, grid: usize) -> Result<ScalingCheck> {
        let epsilons = vec![1.0, 0.5, 0.25];
        let seminorms_p = epsilons
            .iter()
            .map(|e| Ok(gagliardo_seminorm(&Self::scaled_profile_grid(*e, grid), self.beta, self.p)?.powf(self.p)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ScalingCheck {
            fit: power_fit(&epsilons, &seminorms_p),
            epsilons,
            seminorms_p,
            predicted_exponent: Self::N - self.beta * self.p - self.p / Self::N,
        })
    }

    /// `(u, Du, φ)` for index `k` on a period-2 grid centred at `(1, 1)`.
    pub fn grid_fields(&self, k: usize, grid: usize) -> (GridField, GridField, GridField) {
        let kf = k as f64;
        let amp = kf.powf((self.alpha - 1.0) / Self::N + self.gamma()) * kf.sqrt();
        let shape = [grid, grid];
        let period = [2.0, 2.0];
        let u = GridField::from_fn(&shape, &period, 2, |x, o| {
            let (g, _) = Self::profile(kf * (x[0] - 1.0), kf * (x[1] - 1.0));
            o[0] = amp * g[0];
            o[1] = amp * g[1];
        });
        let du = GridField::from_fn(&shape, &period, 4, |x, o| {
            let (_, d) = Self::profile(kf * (x[0] - 1.0), kf * (x[1] - 1.0));
            for (oi, di) in o.iter_mut().zip(d) {
                *oi = amp * kf * di;
            }
        });
        let scale = kf.powf(-self.alpha);
        let phi = GridField::scalar_fn(&shape, &period, |x| {
            scale * self.smoothed_power(kf * (x[0] - 1.0)) * Self::smoothed_plateau(kf, x[1] - 1.0)
        });
        (u, du, phi)
    }

    pub fn grid_pairing(&self, k: usize, grid: usize) -> f64 {
        let (_, du, phi) = self.grid_fields(k, grid);
        grid_det_pairing(&du, &phi)
    }

    pub fn run(&self, ks: &[usize]) -> Result<Case1Report> {
        self.validate()?;
        if ks.iter().any(|k| *k < 3) {
            return Err(Error::InvalidInput("indices must be ≥ 3 so the cutoff is flat on the kernel support".into()));
        }
        let j = self.j_integral();
        let pairings: Vec<f64> = ks.iter().map(|k| self.pairing(*k, j)).collect();
        let g = self.gamma();
        let n = Self::N;
        Ok(Case1Report {
            gamma: g,
            j_integral: j,
            rate: RateReport::new("jac_case1", ks, pairings, None, n * g),
            moments: Self::moment_check(),
            scaling: self.scaling_check(128)?,
            sobolev_exponent: (self.alpha - 1.0) / n + g - (n - self.beta * self.p - self.p / n) / self.p,
        })
    }
}

fn raw_bump(z: f64) -> f64 {
    if z.abs() < 1.0 {
        (-1.0 / (1.0 - z * z)).exp()
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Case 2: p > n, single oscillation

/// `u_i = k^{-β₁} sin(kx_i)` for `i < n`, `u_n = −k^{-β₁} cos(kx_n)·χ`,
/// `φ = k^{-α} sin(kx_n) Π cos(kx_i)`. On the torus `χ ≡ 1`; on the grid
/// `χ` is a radial cutoff, 1 on `B₁` and 0 off `B₂`, about the box centre.
#[derive(Debug, Clone, Serialize)]
pub struct Case2 {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub beta1: Option<f64>,
}

impl Default for Case2 {
    fn default() -> Self {
        Self {
            n: 2,
            alpha: 0.5,
            beta: 0.25,
            p: 3.0,
            beta1: None,
        }
    }
}

impl Case2 {
    pub fn validate(&self) -> Result<()> {
        let n = self.n as f64;
        if self.n < 2 {
            return Err(Error::InvalidInput("needs n ≥ 2".into()));
        }
        check_open_unit("α", self.alpha)?;
        check_open_unit("β", self.beta)?;
        if !(self.p > n) {
            return Err(Error::InvalidInput(format!("this case needs p > n, got p = {}", self.p)));
        }
        if self.beta + self.alpha / n >= 1.0 {
            return Err(Error::InvalidInput("this case needs β + α/n < 1".into()));
        }
        let b1 = self.beta1();
        if !(b1 > self.beta && b1 < (n - self.alpha) / n) {
            return Err(Error::InvalidInput(format!(
                "β₁ must lie in ({}, {}), got {b1}",
                self.beta,
                (n - self.alpha) / n
            )));
        }
        Ok(())
    }

    /// Midpoint of `(β, (n−α)/n)` unless set.
    pub fn beta1(&self) -> f64 {
        self.beta1
            .unwrap_or(self.beta + 0.5 * (1.0 - self.alpha / self.n as f64 - self.beta))
    }

    pub fn exponent(&self) -> f64 {
        let n = self.n as f64;
        n - self.alpha - n * self.beta1()
    }

    pub fn closed_form(&self, k: usize) -> f64 {
        (k as f64).powf(self.exponent()) * PI.powi(self.n as i32)
    }

    fn unit(&self, i: usize, k: usize) -> Vec<BigInt> {
        let mut m = vec![BigInt::zero(); self.n];
        m[i] = BigInt::from(k);
        m
    }

    /// `(u, φ)` on the `2π`-torus.
    pub fn torus(&self, k: usize) -> Result<(TrigPoly, TrigPoly)> {
        let n = self.n;
        let kf = k as f64;
        let a = kf.powf(-self.beta1());
        let mut comps: Vec<TrigPoly> = (0..n - 1).map(|i| TrigPoly::sin(n, self.unit(i, k), a)).collect();
        comps.push(TrigPoly::cos(n, self.unit(n - 1, k), -a));
        let u = TrigPoly::stack(&comps)?;
        let mut phi = TrigPoly::sin(n, self.unit(n - 1, k), kf.powf(-self.alpha));
        for i in 0..n - 1 {
            phi = phi.mul(&TrigPoly::cos(n, self.unit(i, k), 1.0), usize::MAX)?;
        }
        Ok((u, phi))
    }

    pub fn torus_pairing(&self, k: usize) -> Result<f64> {
        let (u, phi) = self.torus(k)?;
        let det = trig_jacobian_det(&u, crate::field::DEFAULT_TERM_CAP)?;
        det.integral_of_product(&phi)
    }

    fn cutoff(r: f64) -> (f64, f64) {
        (smooth_step(2.0 - r), -smooth_step_deriv(2.0 - r))
    }

    /// `(u, Du, φ)` on the `2π`-periodic planar grid with the cutoff about `(π, π)`.
    pub fn grid_fields(&self, k: usize, grid: usize) -> Result<(GridField, GridField, GridField)> {
        if self.n != 2 {
            return Err(Error::NotApplicable("the grid variant is planar only".into()));
        }
        let kf = k as f64;
        let a = kf.powf(-self.beta1());
        let shape = [grid, grid];
        let period = [2.0 * PI, 2.0 * PI];
        let local = |x: &[f64]| (x[0] - PI, x[1] - PI);
        let u = GridField::from_fn(&shape, &period, 2, |x, o| {
            let (y1, y2) = local(x);
            let (c, _) = Self::cutoff(y1.hypot(y2));
            o[0] = a * (kf * y1).sin();
            o[1] = -a * (kf * y2).cos() * c;
        });
        let du = GridField::from_fn(&shape, &period, 4, |x, o| {
            let (y1, y2) = local(x);
            let r = y1.hypot(y2);
            let (c, dc) = Self::cutoff(r);
            let (g1, g2) = if r > 0.0 { (dc * y1 / r, dc * y2 / r) } else { (0.0, 0.0) };
            let cs = (kf * y2).cos();
            o[0] = a * kf * (kf * y1).cos();
            o[1] = 0.0;
            o[2] = -a * cs * g1;
            o[3] = a * kf * (kf * y2).sin() * c - a * cs * g2;
        });
        let b = kf.powf(-self.alpha);
        let phi = GridField::scalar_fn(&shape, &period, |x| {
            let (y1, y2) = local(x);
            b * (kf * y2).sin() * (kf * y1).cos()
        });
        Ok((u, du, phi))
    }

    pub fn grid_pairing(&self, k: usize, grid: usize) -> Result<f64> {
        let (_, du, phi) = self.grid_fields(k, grid)?;
        Ok(grid_det_pairing(&du, &phi))
    }

    pub fn run_torus(&self, ks: &[usize]) -> Result<RateReport> {
        self.validate()?;
        let pairings = ks.par_iter().map(|k| self.torus_pairing(*k)).collect::<Result<Vec<_>>>()?;
        let closed = ks.iter().map(|k| self.closed_form(*k)).collect();
        Ok(RateReport::new("jac_case2", ks, pairings, Some(closed), self.exponent()))
    }

    pub fn run_grid(&self, ks: &[usize], grid: usize) -> Result<RateReport> {
        self.validate()?;
        if let Some(k) = ks.iter().find(|k| 4 * **k >= grid) {
            return Err(Error::InvalidInput(format!("k = {k} is not resolved on {grid} points (needs 4k < N)")));
        }
        let pairings = ks.par_iter().map(|k| self.grid_pairing(*k, grid)).collect::<Result<Vec<_>>>()?;
        Ok(RateReport::new("jac_case2", ks, pairings, None, self.exponent()))
    }
}

/// `det(Du)` of an `n`-component polynomial map, exactly.
pub fn trig_jacobian_det(u: &TrigPoly, cap: usize) -> Result<TrigPoly> {
    let n = u.n;
    if u.dim_v != n {
        return Err(Error::Dimension(format!("map has {} components in {} variables", u.dim_v, n)));
    }
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        let ui = u.component(i);
        for j in 0..n {
            rows.push(ui.derivative(j));
        }
    }
    evaluate_trig(&Integrand::det(n), &TrigPoly::stack(&rows)?, cap)
}

// ---------------------------------------------------------------------------
// Case 3: p > n, β = 1 − α/n, lacunary sums

/// `n_ℓ = k^{n²/α} 8^ℓ` (`ℓ = 1..k`), `a_ℓ = n_ℓ^{-(n−α)/n}(ℓ+1)^{-1/n}`,
/// `u_i = Σ a_ℓ sin(n_ℓx_i)` for `i < n`, `u_n = −Σ a_ℓ cos(n_ℓx_n)`,
/// `φ = Σ n_ℓ^{-α} sin(n_ℓx_n) Π cos(n_ℓx_i)`, all on the `2π`-torus.
#[derive(Debug, Clone, Serialize)]
pub struct Case3 {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
}

impl Default for Case3 {
    fn default() -> Self {
        Self {
            n: 2,
            alpha: 0.5,
            p: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Case3Pairing {
    pub k: usize,
    /// `∫det(Du)φ` from the exact polynomial product.
    pub direct: f64,
    /// `−∫ I·u_n`, the diagonal part of the cofactor expansion.
    pub main_term: f64,
    /// `−∫ II·u_n`, the off-diagonal part.
    pub cross_term: f64,
    /// Off-diagonal index tuples whose orthogonality integral is non-zero.
    pub nonvanishing_cross_tuples: usize,
    /// `πⁿ Σ_{ℓ=1}^k 1/(ℓ+1)`.
    pub closed_form: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapAudit {
    pub k: usize,
    /// Decimal `k^{n²/α}` (rounded up when not an integer).
    pub base: String,
    pub min_gap: String,
    pub gap_ok: bool,
    /// `n_{ℓ+1} ≥ 4 n_ℓ` for every `ℓ`.
    pub ratio_ok: bool,
    pub base_exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormAudit {
    pub indices: Vec<usize>,
    /// `sup_j 2^{αj}‖P_jφ^{(k)}‖_∞`.
    pub holder: Vec<f64>,
    /// Block `ℓ^p` norm of `u^{(k)}` with weights `2^{βj}` at the case's `p`.
    pub besov: Vec<f64>,
    /// The same at `p = n`.
    pub besov_at_n: Vec<f64>,
    pub holder_spread: f64,
    pub besov_spread: f64,
    pub besov_at_n_spread: f64,
}

fn spread(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mn = v.iter().cloned().fold(f64::INFINITY, f64::min);
    mx / mn
}

fn big_ln(x: &BigInt) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v.ln(),
        _ => {
            let shift = x.bits().saturating_sub(60);
            let top: BigInt = x >> shift;
            top.to_f64().expect("60-bit value").ln() + shift as f64 * 2f64.ln()
        }
    }
}

impl Case3 {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput("needs n ≥ 2".into()));
        }
        check_open_unit("α", self.alpha)?;
        if !(self.p > self.n as f64) {
            return Err(Error::InvalidInput(format!("this case needs p > n, got p = {}", self.p)));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.alpha / self.n as f64
    }

    /// `(k^{n²/α}, exact)`: exact integer power when `n²/α` is an integer,
    /// otherwise the ceiling of the floating-point value.
    pub fn base(&self, k: usize) -> (BigInt, bool) {
        let e = (self.n * self.n) as f64 / self.alpha;
        let er = e.round();
        if (e - er).abs() < 1e-9 {
            (Pow::pow(BigInt::from(k), er as u32), true)
        } else {
            let v = (k as f64).powf(e).ceil();
            (num_bigint::BigInt::from(v as u128).max(BigInt::one()), false)
        }
    }

    pub fn frequencies(&self, k: usize) -> Vec<BigInt> {
        let (base, _) = self.base(k);
        (1..=k).map(|l| &base * Pow::pow(BigInt::from(8), l as u32)).collect()
    }

    fn ln_amplitude(&self, ln_nl: f64, l: usize) -> f64 {
        let n = self.n as f64;
        -(n - self.alpha) / n * ln_nl - ((l + 1) as f64).ln() / n
    }

    fn axis_freq(&self, i: usize, m: &BigInt) -> Vec<BigInt> {
        let mut f = vec![BigInt::zero(); self.n];
        f[i] = m.clone();
        f
    }

    pub fn polys(&self, k: usize) -> Result<(TrigPoly, TrigPoly)> {
        let n = self.n;
        let freqs = self.frequencies(k);
        let mut comps = vec![TrigPoly::zero(n, 1); n];
        let mut phi = TrigPoly::zero(n, 1);
        for (idx, m) in freqs.iter().enumerate() {
            let l = idx + 1;
            let lm = big_ln(m);
            let a = self.ln_amplitude(lm, l).exp();
            for (i, c) in comps.iter_mut().enumerate() {
                let t = if i + 1 < n {
                    TrigPoly::sin(n, self.axis_freq(i, m), a)
                } else {
                    TrigPoly::cos(n, self.axis_freq(i, m), -a)
                };
                *c = c.add(&t)?;
            }
            let mut term = TrigPoly::sin(n, self.axis_freq(n - 1, m), (-self.alpha * lm).exp());
            for i in 0..n - 1 {
                term = term.mul(&TrigPoly::cos(n, self.axis_freq(i, m), 1.0), usize::MAX)?;
            }
            phi = phi.add(&term)?;
        }
        Ok((TrigPoly::stack(&comps)?, phi))
    }

    pub fn closed_form(&self, k: usize) -> f64 {
        PI.powi(self.n as i32) * (1..=k).map(|l| 1.0 / (l + 1) as f64).sum::<f64>()
    }

    /// Estimated size of the determinant product, checked against `cap`.
    pub fn check_term_count(&self, k: usize, cap: usize) -> Result<()> {
        let count = (2 * k).checked_pow(self.n as u32).unwrap_or(usize::MAX);
        if count > cap {
            return Err(Error::TermOverflow { count, cap });
        }
        Ok(())
    }

    pub fn torus_pairing(&self, k: usize, cap: usize) -> Result<Case3Pairing> {
        self.check_term_count(k, cap)?;
        let (u, phi) = self.polys(k)?;
        let det = trig_jacobian_det(&u, cap)?;
        let direct = det.integral_of_product(&phi)?;

        // Cofactor expansion in the last row: det(Du₁,…,Du_{n−1},Dφ) is
        // Σ over tuples (ℓ₁,…,ℓ_{n−1},ℓ') of
        // n_{ℓ'}^{1−α} Π c_{ℓ_i} cos(n_{ℓ'}x_n) Π cos(n_{ℓ_i}x_i)cos(n_{ℓ'}x_i),
        // c_ℓ = n_ℓ a_ℓ; each tuple integrates against u_n coordinate-wise.
        let n = self.n;
        let freqs = self.frequencies(k);
        let lns: Vec<f64> = freqs.iter().map(big_ln).collect();
        let ln_c: Vec<f64> = (0..k).map(|i| lns[i] + self.ln_amplitude(lns[i], i + 1)).collect();
        let ln_a: Vec<f64> = (0..k).map(|i| self.ln_amplitude(lns[i], i + 1)).collect();
        let total = k.pow(n as u32);
        let (main, cross, nonzero) = (0..total)
            .into_par_iter()
            .map(|mut t| {
                let mut idx = Vec::with_capacity(n);
                for _ in 0..n {
                    idx.push(t % k);
                    t /= k;
                }
                let last = idx[n - 1];
                let diagonal = idx[..n - 1].iter().all(|i| *i == last);
                // ∫₀^{2π} cos(ax)cos(bx) = π iff a = b (both non-zero).
                let orth = idx[..n - 1].iter().all(|i| freqs[*i] == freqs[last]);
                if !orth {
                    return (0.0, 0.0, 0usize);
                }
                let ln_coef = (1.0 - self.alpha) * lns[last] + idx[..n - 1].iter().map(|i| ln_c[*i]).sum::<f64>();
                // −u_n = Σ a_ℓ cos(n_ℓ x_n).
                let v = (ln_coef + ln_a[last]).exp() * PI.powi(n as i32);
                if diagonal {
                    (v, 0.0, 0)
                } else {
                    (0.0, v, 1)
                }
            })
            .reduce(|| (0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        Ok(Case3Pairing {
            k,
            direct,
            main_term: main,
            cross_term: cross,
            nonvanishing_cross_tuples: nonzero,
            closed_form: self.closed_form(k),
        })
    }

    pub fn gap_audit(&self, k: usize) -> GapAudit {
        let (base, exact) = self.base(k);
        let freqs = self.frequencies(k);
        // Sorted increasing, so the minimum gap is between neighbours.
        let min_gap = freqs.windows(2).map(|w| &w[1] - &w[0]).min();
        let ratio_ok = freqs.windows(2).all(|w| w[1] >= BigInt::from(4) * &w[0]);
        GapAudit {
            k,
            base: base.to_string(),
            gap_ok: min_gap.as_ref().is_none_or(|g| *g >= base),
            min_gap: min_gap.map(|g| g.to_string()).unwrap_or_else(|| "none".into()),
            ratio_ok,
            base_exact: exact,
        }
    }

    pub fn norm_audit(&self, ks: &[usize]) -> Result<NormAudit> {
        let beta = self.beta();
        let rows = ks
            .par_iter()
            .map(|k| {
                let (u, phi) = self.polys(*k)?;
                Ok((
                    holder_besov(&phi, self.alpha)?,
                    besov_block_norm(&u, beta, self.p),
                    besov_block_norm(&u, beta, self.n as f64),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let holder: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let besov: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let besov_at_n: Vec<f64> = rows.iter().map(|r| r.2).collect();
        Ok(NormAudit {
            indices: ks.to_vec(),
            holder_spread: spread(&holder),
            besov_spread: spread(&besov),
            besov_at_n_spread: spread(&besov_at_n),
            holder,
            besov,
            besov_at_n,
        })
    }

    pub fn run(&self, ks: &[usize], cap: usize) -> Result<(RateReport, Vec<Case3Pairing>)> {
        self.validate()?;
        let rows = ks
            .par_iter()
            .map(|k| self.torus_pairing(*k, cap))
            .collect::<Result<Vec<_>>>()?;
        let pairings = rows.iter().map(|r| r.direct).collect();
        let closed = ks.iter().map(|k| self.closed_form(*k)).collect();
        // Growth is logarithmic; the power fit is a diagnostic only.
        Ok((RateReport::new("jac_case3", ks, pairings, Some(closed), 0.0), rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case1_moment_property() {
        let m = Case1::moment_check();
        assert!(m.a1 > 0.0);
        assert!((m.a1_extrapolated - m.a1).abs() < 1e-3 * m.a1, "{m:?}");
        assert!(m.a2_extrapolated.abs() < 1e-3 * m.a1);
    }

    #[test]
    fn case1_grid_matches_scaling_identity() {
        let c = Case1::default();
        let j = c.j_integral();
        assert!(j > 0.0);
        let g = c.grid_pairing(4, 512);
        let s = c.pairing(4, j);
        assert!((g - s).abs() < 2e-3 * s, "{g} vs {s}");
    }

    #[test]
    fn case1_rejects_out_of_range() {
        assert!(Case1 { p: 3.0, ..Default::default() }.validate().is_err());
        assert!(Case1 { gamma: Some(0.9), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn case2_torus_closed_form() {
        let c = Case2::default();
        for k in [8, 16] {
            let p = c.torus_pairing(k).unwrap();
            let e = c.closed_form(k);
            assert!((p - e).abs() < 1e-12 * e, "{p} vs {e}");
        }
        let c3 = Case2 { n: 3, p: 4.0, ..Default::default() };
        let p = c3.torus_pairing(4).unwrap();
        assert!((p - c3.closed_form(4)).abs() < 1e-12 * p);
    }

    #[test]
    fn case2_grid_close_to_cutoff_integral() {
        let c = Case2::default();
        let g = c.grid_pairing(32, 512).unwrap();
        assert!(g > 0.0);
    }

    #[test]
    fn case3_exact_sum_and_audits() {
        let c = Case3::default();
        for k in [4, 8] {
            let r = c.torus_pairing(k, crate::field::DEFAULT_TERM_CAP).unwrap();
            assert!((r.direct - r.closed_form).abs() < 1e-12 * r.closed_form, "{r:?}");
            assert!((r.main_term - r.closed_form).abs() < 1e-12 * r.closed_form);
            assert_eq!(r.cross_term, 0.0);
            let g = c.gap_audit(k);
            assert!(g.gap_ok && g.ratio_ok && g.base_exact);
        }
    }

    #[test]
    fn case3_cap_overflow() {
        let c = Case3::default();
        assert!(matches!(c.torus_pairing(64, 100), Err(Error::TermOverflow { .. })));
    }

    #[test]
    fn case3_non_integer_exponent_rounds_up() {
        let c = Case3 { n: 2, alpha: 0.3, p: 3.0 };
        let (b, exact) = c.base(2);
        assert!(!exact);
        assert!(b.to_f64().unwrap() >= 2f64.powf(4.0 / 0.3));
    }
}
