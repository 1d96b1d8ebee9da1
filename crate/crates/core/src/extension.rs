//! Half-space extensions on a periodic base: Poisson and ball-average
//! extensions, the determinant pairing identity in `n + 1` variables, the
//! weighted trace estimates and the Hölder-pairing ratio experiments.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{derivative, fft, ifft, jacobian, GridField, Spectrum, TrigPoly};
use crate::norms::{gagliardo_seminorm, holder_besov, holder_seminorm, lebesgue_norm, neg_fractional_seminorm, HolderMethod};
use crate::quasiaffine::{evaluate_grid, Integrand};
use crate::rng::keyed_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionKind {
    Poisson,
    Average,
}

#[derive(Debug, Clone)]
pub struct HalfSpaceField {
    pub kind: ExtensionKind,
    pub t_grid: Vec<f64>,
    pub slabs: Vec<GridField>,
}

/// `n` heights from `t_min` to `t_max`, evenly spaced in `ln t`.
pub fn geometric_grid(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && n >= 2) {
        return Err(Error::InvalidInput(format!(
            "height grid needs 0 < t_min < t_max and ≥ 2 levels (got {t_min}, {t_max}, {n})"
        )));
    }
    let r = (t_max / t_min).ln();
    Ok((0..n).map(|i| t_min * (r * i as f64 / (n - 1) as f64).exp()).collect())
}

fn poisson_slab(s: &Spectrum, t: f64) -> Spectrum {
    let mut out = s.clone();
    for p in 0..s.npoints() {
        let k = s.xi(p).iter().map(|x| x * x).sum::<f64>().sqrt();
        let f = (-t * k).exp();
        for c in out.comps.iter_mut() {
            c[p] *= f;
        }
    }
    out
}

/// Slabs `e^{-t|ξ|} f̂`; the mean is carried as a constant.
pub fn poisson_extend(f: &GridField, t_grid: &[f64]) -> HalfSpaceField {
    let s = fft(f);
    HalfSpaceField {
        kind: ExtensionKind::Poisson,
        t_grid: t_grid.to_vec(),
        slabs: t_grid.par_iter().map(|t| ifft(&poisson_slab(&s, *t))).collect(),
    }
}

/// Exact Poisson extension of a polynomial at height `t`.
pub fn poisson_extend_trig(f: &TrigPoly, t: f64) -> TrigPoly {
    let mut out = f.clone();
    for (m, a) in out.terms.iter_mut() {
        let k = f.xi(m).iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = (-t * k).exp();
        a.iter_mut().for_each(|z| *z *= s);
    }
    out
}

fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Averages over periodic balls `B_t(x)` of grid points; a radius below one
/// cell returns the field itself.
pub fn average_extend(u: &GridField, t_grid: &[f64]) -> HalfSpaceField {
    let s = fft(u);
    let npts = u.npoints();
    let slabs = t_grid
        .par_iter()
        .map(|&t| {
            let mut x = vec![0.0; u.n()];
            let mut kernel = GridField::zeros(&u.shape, &u.period, 1);
            let mut count = 0usize;
            for p in 0..npts {
                u.coords_into(p, &mut x);
                let d2: f64 = x.iter().zip(&u.period).map(|(a, l)| min_image(*a, *l).powi(2)).sum();
                if d2 <= t * t {
                    kernel.values[p] = 1.0;
                    count += 1;
                }
            }
            let k = fft(&kernel);
            let mut out = s.clone();
            for c in out.comps.iter_mut() {
                for (z, w) in c.iter_mut().zip(&k.comps[0]) {
                    *z *= w * (npts as f64 / count as f64);
                }
            }
            ifft(&out)
        })
        .collect();
    HalfSpaceField {
        kind: ExtensionKind::Average,
        t_grid: t_grid.to_vec(),
        slabs,
    }
}

/// `[∂_t, ∂_1, …, ∂_n]` of the Poisson slab at height `t`, one field each.
fn slab_gradient(s: &Spectrum, t: f64) -> Vec<GridField> {
    let n = s.shape.len();
    let base = poisson_slab(s, t);
    let mut out = Vec::with_capacity(n + 1);
    for axis in 0..=n {
        let mut d = base.clone();
        for p in 0..d.npoints() {
            let xi = d.xi(p);
            let f = if axis == 0 {
                Complex64::new(-xi.iter().map(|x| x * x).sum::<f64>().sqrt(), 0.0)
            } else {
                Complex64::new(0.0, xi[axis - 1])
            };
            for c in d.comps.iter_mut() {
                c[p] *= f;
            }
        }
        out.push(ifft(&d));
    }
    out
}

fn smallest_frequency(f: &GridField) -> f64 {
    f.period
        .iter()
        .map(|l| 2.0 * std::f64::consts::PI / l)
        .fold(f64::INFINITY, f64::min)
}

/// Trapezoid weights in `ln t` on a geometric grid: `∫ g dt ≈ Σ w_i g(t_i)`
/// over `[t_0, t_max]`.
fn log_trapezoid_weights(t: &[f64]) -> Vec<f64> {
    let h = (t[t.len() - 1] / t[0]).ln() / (t.len() - 1) as f64;
    t.iter()
        .enumerate()
        .map(|(i, ti)| {
            let w = if i == 0 || i == t.len() - 1 { 0.5 } else { 1.0 };
            w * h * ti
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pairing identity

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub grid: Vec<usize>,
    pub t_levels: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// `∫ det(Du) φ dx` on the base grid.
    pub lhs: f64,
    /// `−∫∫ det_{n+1}(DΦ, DU₁, …, DU_n) dx dt`; the sign is the boundary
    /// orientation of `{t = 0}`.
    pub rhs: f64,
    /// `∫|det Du||φ|`, the floor of the relative error.
    pub scale: f64,
    pub rel_error: f64,
    /// Bound on the neglected part above `t_max`.
    pub tail_factor: f64,
    /// Estimate used for `[0, t_min]` (linear extrapolation of the slab integral).
    pub near_zero_correction: f64,
}

/// Compares the base pairing with the half-space determinant integral of the
/// Poisson extensions. `t_min` defaults to an eighth of a grid cell.
pub fn pairing_identity(u: &GridField, phi: &GridField, t_max: f64, t_levels: usize, t_min: Option<f64>) -> Result<IdentityReport> {
    let n = u.n();
    if u.dim_v != n || phi.dim_v != 1 || !u.same_grid(phi) {
        return Err(Error::Dimension("needs u: ℝⁿ → ℝⁿ and scalar φ on one grid".into()));
    }
    let tail_factor = (-((n + 1) as f64) * t_max * smallest_frequency(u)).exp();
    if tail_factor > 1e-6 {
        return Err(Error::TailBound(tail_factor));
    }
    let du = jacobian(u);
    let det = evaluate_grid(&Integrand::det(n), &du)?;
    let dv = u.cell_volume();
    let lhs = det.values.iter().zip(&phi.values).map(|(a, b)| a * b).sum::<f64>() * dv;
    let scale = det.values.iter().zip(&phi.values).map(|(a, b)| (a * b).abs()).sum::<f64>() * dv;

    let h = u.spacing().into_iter().fold(f64::INFINITY, f64::min);
    let t_min = t_min.unwrap_or(h / 8.0);
    let ts = geometric_grid(t_min, t_max, t_levels)?;
    let su = fft(u);
    let sp = fft(phi);
    let big = Integrand::det(n + 1);
    let g: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let gp = slab_gradient(&sp, t);
            let gu = slab_gradient(&su, t);
            let mut row = vec![0.0; (n + 1) * (n + 1)];
            let mut acc = 0.0;
            for p in 0..u.npoints() {
                for (j, d) in gp.iter().enumerate() {
                    row[j] = d.values[p];
                }
                for i in 0..n {
                    for (j, d) in gu.iter().enumerate() {
                        row[(i + 1) * (n + 1) + j] = d.values[p * n + i];
                    }
                }
                acc += big.eval(&row);
            }
            acc * dv
        })
        .collect();
    let w = log_trapezoid_weights(&ts);
    // ∫₀^{t₀} g with g extended linearly through the first two levels.
    let slope = (g[1] - g[0]) / (ts[1] - ts[0]);
    let near_zero_correction = t_min * (g[0] - 0.5 * t_min * slope);
    let body: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
    let rhs = -(body + near_zero_correction);
    Ok(IdentityReport {
        grid: u.shape.clone(),
        t_levels,
        t_min,
        t_max,
        lhs,
        rhs,
        scale,
        rel_error: (lhs - rhs).abs() / lhs.abs().max(scale).max(f64::MIN_POSITIVE),
        tail_factor,
        near_zero_correction,
    })
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Random smooth compactly supported `(u, φ)` in the plane on a period-4
/// grid, supports inside `[1, 3]²`.
pub fn random_identity_case(seed: u64, index: u64, grid: usize) -> (GridField, GridField) {
    let mut rng = keyed_rng(seed, "extension-identity", index);
    let mut blobs = Vec::new();
    for _ in 0..3 {
        let c = [rng.random_range(1.6..2.4), rng.random_range(1.6..2.4)];
        let r: f64 = rng.random_range(0.35..0.6);
        let a = [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)];
        blobs.push((c, r, a));
    }
    let pc = [rng.random_range(1.9..2.1), rng.random_range(1.9..2.1)];
    let pr: f64 = rng.random_range(0.6..0.9);
    let shape = [grid, grid];
    let period = [4.0, 4.0];
    let u = GridField::from_fn(&shape, &period, 2, |x, o| {
        o[0] = 0.0;
        o[1] = 0.0;
        for (c, r, a) in &blobs {
            let b = bump(((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (r * r));
            o[0] += a[0] * b;
            o[1] += a[1] * b;
        }
    });
    let phi = GridField::scalar_fn(&shape, &period, |x| {
        bump(((x[0] - pc[0]).powi(2) + (x[1] - pc[1]).powi(2)) / (pr * pr))
    });
    (u, phi)
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub index: u64,
    pub levels: Vec<IdentityReport>,
    pub monotone: bool,
}

/// `(grid, t-levels)` pairs for the refinement study.
pub const REFINEMENT_LEVELS: [(usize, usize); 3] = [(64, 16), (128, 32), (256, 64)];

pub fn identity_refinement(seed: u64, index: u64, t_max: f64) -> Result<RefinementReport> {
    let levels = REFINEMENT_LEVELS
        .iter()
        .map(|(g, l)| {
            let (u, phi) = random_identity_case(seed, index, *g);
            pairing_identity(&u, &phi, t_max, *l, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = levels.windows(2).all(|w| w[1].rel_error < w[0].rel_error);
    Ok(RefinementReport { index, levels, monotone })
}

// ---------------------------------------------------------------------------
// Weighted trace estimates

#[derive(Debug, Clone, Serialize)]
pub struct FracTraceReport {
    pub beta: f64,
    pub p: f64,
    /// `(∫∫ |t^{1−1/p−β} D_{t,x}F|^p)^{1/p}`.
    pub weighted: f64,
    /// `[f]_{W^{β,p}}`, or `‖f‖_p` at `β = 0`.
    pub reference: f64,
    pub ratio: f64,
    /// Share of the weighted integral coming from `[0, t_min]`.
    pub near_zero_share: f64,
}

/// The weighted Poisson-extension integral against the fractional seminorm
/// of the trace.
pub fn frac_trace_check(f: &GridField, beta: f64, p: f64, t_grid: &[f64]) -> Result<FracTraceReport> {
    if !(0.0..1.0).contains(&beta) || !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("needs 0 ≤ β < 1 and 1 < p < ∞, got β = {beta}, p = {p}")));
    }
    if f.dim_v != 1 {
        return Err(Error::Dimension("scalar trace expected".into()));
    }
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
        return Err(Error::InvalidInput("height grid must be positive and increasing".into()));
    }
    let a = (1.0 - 1.0 / p - beta) * p;
    let s = fft(f);
    let dv = f.cell_volume();
    let g: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| {
            let d = slab_gradient(&s, t);
            let mut acc = 0.0;
            for q in 0..f.npoints() {
                let m2: f64 = d.iter().map(|c| c.values[q] * c.values[q]).sum();
                acc += m2.powf(p / 2.0);
            }
            acc * dv * t.powf(a)
        })
        .collect();
    let w = log_trapezoid_weights(t_grid);
    let body: f64 = g.iter().zip(&w).map(|(x, y)| x * y).sum();
    // g ≈ C t^a near zero.
    let near = g[0] * t_grid[0] / (a + 1.0);
    let total = body + near;
    let reference = if beta == 0.0 {
        lebesgue_norm(f, p)?
    } else {
        gagliardo_seminorm(f, beta, p)?
    };
    let weighted = total.powf(1.0 / p);
    Ok(FracTraceReport {
        beta,
        p,
        weighted,
        reference,
        ratio: if reference > 0.0 { weighted / reference } else { 0.0 },
        near_zero_share: if total > 0.0 { near / total } else { 0.0 },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderWeightReport {
    pub alpha: f64,
    /// `sup_t t^{1−α} ‖D_{t,x}Φ(t)‖_∞` over the height grid.
    pub weighted_sup: f64,
    pub holder: f64,
    pub ratio: f64,
}

pub fn holder_weight_check(phi: &GridField, alpha: f64, t_grid: &[f64], method: HolderMethod) -> Result<HolderWeightReport> {
    if phi.dim_v != 1 {
        return Err(Error::Dimension("scalar test function expected".into()));
    }
    let s = fft(phi);
    let weighted_sup = t_grid
        .par_iter()
        .map(|&t| {
            let d = slab_gradient(&s, t);
            let m = (0..phi.npoints())
                .map(|q| d.iter().map(|c| c.values[q].powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            t.powf(1.0 - alpha) * m
        })
        .reduce(|| 0.0, f64::max);
    let holder = holder_seminorm(phi, alpha, method)?;
    Ok(HolderWeightReport {
        alpha,
        weighted_sup,
        holder,
        ratio: if holder > 0.0 { weighted_sup / holder } else { 0.0 },
    })
}

// ---------------------------------------------------------------------------
// Hölder pairing ratios

#[derive(Debug, Clone, Serialize)]
pub struct PairingRatio {
    /// `|∫(det Du − det Dv)φ|`.
    pub lhs: f64,
    pub holder: f64,
    /// `[u − v]_{W^{−1+β,s}}` of the gradients.
    pub diff_norm: f64,
    /// `[Du]_{W^{−1+β,s}} + [Dv]_{W^{−1+β,s}}`.
    pub sum_norm: f64,
    pub ratio: f64,
}

/// `|∫(det Du − det Dv)φ| / ([φ]_α [Du − Dv]_{W^{−1+β,s}} ([Du] + [Dv])^{s−1})`
/// for planar maps `u`, `v` given on one grid and `φ` as a polynomial.
/// `u = v` gives ratio 0; `u = v` with constant `φ` is not applicable.
pub fn theorem_d_ratio(u: &GridField, v: &GridField, phi: &TrigPoly, alpha: f64, s: f64) -> Result<PairingRatio> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("α must lie in (0, 1), got {alpha}")));
    }
    if s != 2.0 {
        return Err(Error::NotApplicable("the seminorm route is spectral and needs s = 2".into()));
    }
    let n = u.n();
    if u.dim_v != n || !u.same_grid(v) || v.dim_v != n || phi.n != n || phi.dim_v != 1 {
        return Err(Error::Dimension("needs maps ℝⁿ → ℝⁿ on one grid and a scalar φ".into()));
    }
    let beta = 1.0 - alpha / s;
    let phi_g = phi.render(&u.shape)?;
    let du = jacobian(u);
    let dv = jacobian(v);
    let det = Integrand::det(n);
    let du_det = evaluate_grid(&det, &du)?;
    let dv_det = evaluate_grid(&det, &dv)?;
    let lhs = (0..u.npoints())
        .map(|q| (du_det.values[q] - dv_det.values[q]) * phi_g.values[q])
        .sum::<f64>()
        .abs()
        * u.cell_volume();
    let holder = holder_besov(phi, alpha)?;
    let diff_norm = neg_fractional_seminorm(&du.sub(&dv)?, beta, s)?;
    let sum_norm = neg_fractional_seminorm(&du, beta, s)? + neg_fractional_seminorm(&dv, beta, s)?;
    let den = holder * diff_norm * sum_norm.powf(s - 1.0);
    let ratio = if den > 0.0 {
        lhs / den
    } else if holder > 0.0 {
        0.0
    } else {
        return Err(Error::NotApplicable("u = v with constant φ".into()));
    };
    Ok(PairingRatio {
        lhs,
        holder,
        diff_norm,
        sum_norm,
        ratio,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThmDConfig {
    pub alpha: f64,
    pub s: f64,
    pub frequencies: Vec<usize>,
    pub scalings: Vec<f64>,
    /// Extra items with random frequency in `[4, 64]` and log-uniform scaling in `[1/2, 2]`.
    pub random_items: usize,
    pub seed: u64,
    /// Grid points per oscillation period.
    pub points_per_period: usize,
    /// Integrability exponent of `Du` for the interpolation ratio.
    pub p: f64,
}

impl Default for ThmDConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            s: 2.0,
            frequencies: vec![4, 8, 16, 32, 64],
            scalings: vec![0.5, 1.0, 2.0],
            random_items: 0,
            seed: 0,
            points_per_period: 16,
            p: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThmDItem {
    pub m: usize,
    pub scaling: f64,
    pub pairing: PairingRatio,
    /// `|∫det(Du)φ| / ([φ]_α ‖u‖^α_{L^q} ‖Du‖^{n−α}_{L^p})`.
    pub interpolation_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThmDReport {
    pub config: ThmDConfig,
    /// `q` from `α/q + (n − α)/p = 1`.
    pub q: f64,
    pub items: Vec<ThmDItem>,
    pub ratio_max: f64,
    pub ratio_spread: f64,
    pub interpolation_max: f64,
    pub interpolation_spread: f64,
}

/// Oscillating gradient maps `u = c m^{-β}(sin m x₁, −cos m x₂)`, `v = u/2`,
/// against `φ = m^{-α} cos(m x₁) sin(m x₂)` on the `2π`-torus.
pub fn theorem_d_ensemble(cfg: &ThmDConfig) -> Result<ThmDReport> {
    let n = 2.0;
    let (alpha, s, p) = (cfg.alpha, cfg.s, cfg.p);
    if !(p > n - alpha) {
        return Err(Error::InvalidInput(format!("interpolation needs p > n − α, got {p}")));
    }
    let q = alpha / (1.0 - (n - alpha) / p);
    let beta = 1.0 - alpha / s;
    let mut jobs: Vec<(usize, f64)> = cfg
        .frequencies
        .iter()
        .flat_map(|m| cfg.scalings.iter().map(move |c| (*m, *c)))
        .collect();
    let mut rng = keyed_rng(cfg.seed, "thmD", 0);
    for _ in 0..cfg.random_items {
        let m = rng.random_range(4..=64usize);
        let c = (rng.random_range(-1.0..1.0) * 2f64.ln()).exp();
        jobs.push((m, c));
    }
    if jobs.is_empty() || jobs.iter().any(|(m, c)| *m == 0 || !(*c > 0.0)) {
        return Err(Error::InvalidInput("ensemble needs positive frequencies and scalings".into()));
    }
    let items = jobs
        .par_iter()
        .map(|&(m, c)| {
            let grid = cfg.points_per_period * m;
            let shape = [grid, grid];
            let period = [2.0 * std::f64::consts::PI; 2];
            let mf = m as f64;
            let amp = c * mf.powf(-beta);
            let u = GridField::from_fn(&shape, &period, 2, |x, o| {
                o[0] = amp * (mf * x[0]).sin();
                o[1] = -amp * (mf * x[1]).cos();
            });
            let v = u.scale(0.5);
            let mut freq0 = vec![num_bigint::BigInt::from(m), num_bigint::BigInt::from(0)];
            let cosx = TrigPoly::cos(2, freq0.clone(), mf.powf(-alpha));
            freq0.swap(0, 1);
            let phi = cosx.mul(&TrigPoly::sin(2, freq0, 1.0), usize::MAX)?;
            let pairing = theorem_d_ratio(&u, &v, &phi, alpha, s)?;
            let du = jacobian(&u);
            let det = evaluate_grid(&Integrand::det(2), &du)?;
            let phi_g = phi.render(&shape)?;
            let lhs = det.values.iter().zip(&phi_g.values).map(|(a, b)| a * b).sum::<f64>().abs() * u.cell_volume();
            let den = pairing.holder * lebesgue_norm(&u, q)?.powf(alpha) * lebesgue_norm(&du, p)?.powf(n - alpha);
            Ok(ThmDItem {
                m,
                scaling: c,
                pairing,
                interpolation_ratio: lhs / den,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = |v: Vec<f64>| {
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mn = v.iter().cloned().fold(f64::INFINITY, f64::min);
        (mx, mx / mn)
    };
    let (ratio_max, ratio_spread) = stats(items.iter().map(|i| i.pairing.ratio).collect());
    let (interpolation_max, interpolation_spread) = stats(items.iter().map(|i| i.interpolation_ratio).collect());
    Ok(ThmDReport {
        config: cfg.clone(),
        q,
        items,
        ratio_max,
        ratio_spread,
        interpolation_max,
        interpolation_spread,
    })
}

// ---------------------------------------------------------------------------
// Padded minors

#[derive(Debug, Clone, Serialize)]
pub struct PaddedMinorReport {
    /// `∫ det(∂_a w_b)_{a,b ≤ 2} φ`.
    pub minor: f64,
    /// `∫ det₃(Dw₁, Dw₂, D(ρ x₃)) φ`.
    pub padded: f64,
    pub rel_error: f64,
}

/// A planar minor of a map on the 3-torus against the full determinant with
/// the third row padded by `ρ(x) x₃`, `ρ ≡ 1` on the support of `φ`.
/// `w` has two components; `φ` must vanish where `ρ < 1`.
pub fn padded_minor_identity(w: &GridField, phi: &GridField, rho: &GridField) -> Result<PaddedMinorReport> {
    if w.n() != 3 || w.dim_v != 2 || phi.dim_v != 1 || rho.dim_v != 1 || !w.same_grid(phi) || !w.same_grid(rho) {
        return Err(Error::Dimension("needs a two-component map, φ and ρ on one 3-D grid".into()));
    }
    let dw = jacobian(w);
    // ρ x₃ measured from the box centre so it is periodic when ρ is.
    let c3 = w.period[2] / 2.0;
    let mut pad = rho.clone();
    let mut x = vec![0.0; 3];
    for q in 0..pad.npoints() {
        pad.coords_into(q, &mut x);
        pad.values[q] *= x[2] - c3;
    }
    let dpad: Vec<GridField> = (0..3).map(|a| derivative(&pad, a)).collect();
    let det3 = Integrand::det(3);
    let dvol = w.cell_volume();
    let mut minor = 0.0;
    let mut padded = 0.0;
    let mut row = [0.0; 9];
    for q in 0..w.npoints() {
        let j = &dw.values[q * 6..q * 6 + 6];
        minor += (j[0] * j[4] - j[1] * j[3]) * phi.values[q];
        row[..6].copy_from_slice(j);
        for (a, d) in dpad.iter().enumerate() {
            row[6 + a] = d.values[q];
        }
        padded += det3.eval(&row) * phi.values[q];
    }
    minor *= dvol;
    padded *= dvol;
    Ok(PaddedMinorReport {
        minor,
        padded,
        rel_error: (minor - padded).abs() / minor.abs().max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_field(m: f64, grid: usize) -> GridField {
        GridField::scalar_fn(&[grid, grid], &[2.0 * PI; 2], |x| (m * x[0]).cos())
    }

    #[test]
    fn poisson_eigenfunction_and_semigroup() {
        let f = cos_field(3.0, 32);
        let e = poisson_extend(&f, &[0.2, 0.5, 0.7]);
        for (q, v) in e.slabs[0].values.iter().enumerate() {
            assert!((v - (-0.6f64).exp() * f.values[q]).abs() < 1e-13);
        }
        let two = poisson_extend(&e.slabs[0], &[0.5]);
        for (a, b) in two.slabs[0].values.iter().zip(&e.slabs[2].values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_maximum_principle() {
        let (u, _) = random_identity_case(3, 0, 32);
        let top = u.max_abs();
        for s in poisson_extend(&u, &[0.01, 0.1, 1.0]).slabs {
            assert!(s.max_abs() <= top * (1.0 + 1e-9));
        }
    }

    #[test]
    fn average_extension_constant_and_lipschitz() {
        let c = GridField::scalar_fn(&[32, 32], &[1.0, 1.0], |_| 2.5);
        for s in average_extend(&c, &[0.05, 0.2]).slabs {
            assert!(s.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
        }
        // sin(2πx) has Lipschitz constant 2π.
        let f = GridField::scalar_fn(&[64, 64], &[1.0, 1.0], |x| (2.0 * PI * x[0]).sin());
        let ts = [0.03, 0.1];
        for (t, s) in ts.iter().zip(average_extend(&f, &ts).slabs) {
            let d = s.sub(&f).unwrap().max_abs();
            assert!(d <= 2.0 * PI * t, "{d} > {}", 2.0 * PI * t);
        }
    }

    #[test]
    fn identity_with_linear_plateau() {
        // u = A x on the plateau of a cutoff; φ supported inside it.
        let a = [[1.5, 0.3], [-0.2, 0.8]];
        let grid = 128;
        let cut = |x: &[f64]| {
            let r = ((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2)).sqrt();
            crate::counterexamples::jacobian::plateau_cutoff(r, 0.9, 1.6)
        };
        let u = GridField::from_fn(&[grid, grid], &[4.0, 4.0], 2, |x, o| {
            let (y0, y1) = (x[0] - 2.0, x[1] - 2.0);
            let c = cut(x);
            o[0] = c * (a[0][0] * y0 + a[0][1] * y1);
            o[1] = c * (a[1][0] * y0 + a[1][1] * y1);
        });
        let phi = GridField::scalar_fn(&[grid, grid], &[4.0, 4.0], |x| {
            bump(((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2)) / 0.64)
        });
        let det_a = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let r = pairing_identity(&u, &phi, 8.0, 48, None).unwrap();
        let int_phi = phi.integral()[0];
        assert!((r.lhs - det_a * int_phi).abs() < 1e-7 * int_phi, "{} vs {}", r.lhs, det_a * int_phi);
        assert!(r.rel_error < 1e-3, "{r:?}");
        // Swapping components flips both sides.
        let sw = GridField::from_fn(&[grid, grid], &[4.0, 4.0], 2, |x, o| {
            let p = u.ravel(&[
                (x[0] / 4.0 * grid as f64).round() as usize % grid,
                (x[1] / 4.0 * grid as f64).round() as usize % grid,
            ]);
            o[0] = u.values[2 * p + 1];
            o[1] = u.values[2 * p];
        });
        let s = pairing_identity(&sw, &phi, 8.0, 48, None).unwrap();
        assert!((s.lhs + r.lhs).abs() < 1e-12 * r.lhs.abs());
        assert!((s.rhs + r.rhs).abs() < 1e-12 * r.rhs.abs());
    }

    #[test]
    fn tail_bound_enforced() {
        let (u, phi) = random_identity_case(1, 0, 32);
        assert!(matches!(pairing_identity(&u, &phi, 0.5, 8, None), Err(Error::TailBound(_))));
    }

    #[test]
    fn single_mode_trace_ratio_is_frequency_independent() {
        let ts = geometric_grid(1e-4, 12.0, 200).unwrap();
        let ratios: Vec<f64> = [2.0, 4.0, 8.0]
            .iter()
            .map(|m| frac_trace_check(&cos_field(*m, 64), 0.5, 2.0, &ts).unwrap().ratio)
            .collect();
        let mx = ratios.iter().cloned().fold(0.0, f64::max);
        let mn = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(mx / mn < 1.1, "{ratios:?}");
    }

    #[test]
    fn equal_maps_give_zero_ratio() {
        let u = GridField::from_fn(&[32, 32], &[2.0 * PI; 2], 2, |x, o| {
            o[0] = (2.0 * x[0]).sin();
            o[1] = (2.0 * x[1]).cos();
        });
        let phi = TrigPoly::cos(2, crate::field::freq_from(&[1, 1]), 1.0);
        assert_eq!(theorem_d_ratio(&u, &u, &phi, 0.5, 2.0).unwrap().ratio, 0.0);
        let flat = TrigPoly::constant(2, &[1.0]);
        assert!(matches!(theorem_d_ratio(&u, &u, &flat, 0.5, 2.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn padded_minor_matches() {
        let g = 32;
        let per = [4.0; 3];
        let w = GridField::from_fn(&[g; 3], &per, 2, |x, o| {
            let b = bump(((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2) + (x[2] - 2.0).powi(2)) / 1.44);
            o[0] = b * (x[0] - 2.0) * (x[2] - 1.5);
            o[1] = b * (x[1] - 2.0 + (x[0] - 2.0).powi(2));
        });
        let phi = GridField::scalar_fn(&[g; 3], &per, |x| {
            bump(((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2) + (x[2] - 2.0).powi(2)) / 0.49)
        });
        let rho = GridField::scalar_fn(&[g; 3], &per, |x| {
            let r = ((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2) + (x[2] - 2.0).powi(2)).sqrt();
            crate::counterexamples::jacobian::plateau_cutoff(r, 0.9, 1.8)
        });
        let r = padded_minor_identity(&w, &phi, &rho).unwrap();
        assert!(r.rel_error < 1e-3, "{r:?}");
    }
}
