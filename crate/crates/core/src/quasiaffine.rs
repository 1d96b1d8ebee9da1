//! Polynomial integrands, the exact quasiaffinity mean test, weak-limit
//! pairing experiments and the cofactor structure of Jacobian minors.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{derivative, freq_from, jacobian, GridField, TrigPoly, DEFAULT_TERM_CAP};
use crate::fit::{power_fit, PowerFit};
use crate::rng::keyed_rng;
use crate::symbol::OperatorSymbol;
use crate::{Error, Result};

/// `coef · Π v[i]` over the listed components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub coef: f64,
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Integrand {
    /// Determinant of a row-major 2×2 matrix `(v₀ v₁; v₂ v₃)`.
    Det2,
    /// `v·ṽ` for `(v, ṽ) ∈ ℝ^half × ℝ^half`.
    DivcurlDot { half: usize },
    /// Minor of an `m×n` row-major matrix.
    Minor { m: usize, n: usize, rows: Vec<usize>, cols: Vec<usize> },
    /// `|v|²`.
    SquareNorm { dim: usize },
    /// `vᵀ Q v` with `Q` row-major `dim×dim`.
    Quadratic { dim: usize, q: Vec<f64> },
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 1 {
        return vec![(vec![0], 1.0)];
    }
    let mut out = Vec::new();
    for (p, sign) in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            // Inserting k−1 at `pos` performs k−1−pos transpositions.
            let s = if (k - 1 - pos) % 2 == 0 { sign } else { -sign };
            out.push((q, s));
        }
    }
    out
}

pub const INTEGRAND_NAMES: &[&str] = &["det2", "divcurl_dot", "sqnorm", "det", "minor"];

impl Integrand {
    pub fn dim(&self) -> usize {
        match self {
            Integrand::Det2 => 4,
            Integrand::DivcurlDot { half } => 2 * half,
            Integrand::Minor { m, n, .. } => m * n,
            Integrand::SquareNorm { dim } | Integrand::Quadratic { dim, .. } => *dim,
        }
    }

    /// Homogeneity degree.
    pub fn arity(&self) -> usize {
        match self {
            Integrand::Minor { rows, .. } => rows.len(),
            _ => 2,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Integrand::Det2 => "det2".into(),
            Integrand::DivcurlDot { half } if *half == 2 => "divcurl_dot".into(),
            Integrand::DivcurlDot { half } => format!("divcurl_dot:d={half}"),
            Integrand::Minor { m, n, rows, cols } => format!("minor({m}x{n};rows={rows:?};cols={cols:?})"),
            Integrand::SquareNorm { dim } => format!("sqnorm:d={dim}"),
            Integrand::Quadratic { dim, .. } => format!("quadratic:d={dim}"),
        }
    }

    /// Full determinant of an `n×n` matrix.
    pub fn det(n: usize) -> Integrand {
        Integrand::Minor {
            m: n,
            n,
            rows: (0..n).collect(),
            cols: (0..n).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Integrand::Minor { m, n, rows, cols } => {
                if rows.is_empty() || rows.len() != cols.len() {
                    return Err(Error::InvalidInput("minor needs equally many rows and columns".into()));
                }
                if rows.iter().any(|r| r >= m) || cols.iter().any(|c| c >= n) {
                    return Err(Error::InvalidInput("minor index out of range".into()));
                }
                Ok(())
            }
            Integrand::Quadratic { dim, q } if q.len() != dim * dim => {
                Err(Error::Dimension("quadratic form size".into()))
            }
            Integrand::DivcurlDot { half: 0 } | Integrand::SquareNorm { dim: 0 } => {
                Err(Error::InvalidInput("empty integrand".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        let mono = |coef: f64, factors: Vec<usize>| Monomial { coef, factors };
        match self {
            Integrand::Det2 => vec![mono(1.0, vec![0, 3]), mono(-1.0, vec![1, 2])],
            Integrand::DivcurlDot { half } => (0..*half).map(|i| mono(1.0, vec![i, half + i])).collect(),
            Integrand::SquareNorm { dim } => (0..*dim).map(|i| mono(1.0, vec![i, i])).collect(),
            Integrand::Quadratic { dim, q } => {
                let mut out = Vec::new();
                for i in 0..*dim {
                    for j in 0..*dim {
                        if q[i * dim + j] != 0.0 {
                            out.push(mono(q[i * dim + j], vec![i, j]));
                        }
                    }
                }
                out
            }
            Integrand::Minor { n, rows, cols, .. } => permutations(rows.len())
                .into_iter()
                .map(|(perm, sign)| {
                    mono(sign, rows.iter().zip(&perm).map(|(r, p)| r * n + cols[*p]).collect())
                })
                .collect(),
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.monomials()
            .iter()
            .map(|m| m.coef * m.factors.iter().map(|i| v[*i]).product::<f64>())
            .sum()
    }

    /// `F′(v)` by differentiating each monomial.
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for m in self.monomials() {
            for k in 0..m.factors.len() {
                let rest: f64 = m
                    .factors
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .map(|(_, f)| v[*f])
                    .product();
                g[m.factors[k]] += m.coef * rest;
            }
        }
        g
    }
}

impl FromStr for Integrand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let param = |key: &str| -> Result<Option<usize>> {
            for kv in rest.split(',').filter(|x| !x.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got '{kv}'")))?;
                if k == key {
                    return v.parse().map(Some).map_err(|_| Error::Parse(format!("bad integer '{v}'")));
                }
            }
            Ok(None)
        };
        let digits = |key: &str| -> Result<Option<Vec<usize>>> {
            for kv in rest.split(',').filter(|x| !x.is_empty()) {
                if let Some((k, v)) = kv.split_once('=') {
                    if k == key {
                        return v
                            .chars()
                            .map(|c| c.to_digit(10).map(|d| d as usize))
                            .collect::<Option<Vec<_>>>()
                            .map(Some)
                            .ok_or_else(|| Error::Parse(format!("bad index list '{v}'")));
                    }
                }
            }
            Ok(None)
        };
        let f = match head {
            "det2" => Integrand::Det2,
            "divcurl_dot" => Integrand::DivcurlDot {
                half: param("d")?.unwrap_or(2),
            },
            "sqnorm" => Integrand::SquareNorm {
                dim: param("d")?.unwrap_or(2),
            },
            "det" => Integrand::det(param("n")?.unwrap_or(2)),
            "minor" => {
                let n = param("n")?.ok_or_else(|| Error::Parse("minor needs n".into()))?;
                Integrand::Minor {
                    m: param("m")?.unwrap_or(n),
                    n,
                    rows: digits("rows")?.ok_or_else(|| Error::Parse("minor needs rows".into()))?,
                    cols: digits("cols")?.ok_or_else(|| Error::Parse("minor needs cols".into()))?,
                }
            }
            other => {
                return Err(Error::Unknown {
                    name: other.into(),
                    suggestion: None,
                })
            }
        };
        f.validate()?;
        Ok(f)
    }
}

pub fn evaluate_grid(f: &Integrand, v: &GridField) -> Result<GridField> {
    if v.dim_v != f.dim() {
        return Err(Error::Dimension(format!("integrand needs {} components, field has {}", f.dim(), v.dim_v)));
    }
    let monos = f.monomials();
    let mut out = GridField::zeros(&v.shape, &v.period, 1);
    for p in 0..v.npoints() {
        let x = v.at(p);
        out.values[p] = monos
            .iter()
            .map(|m| m.coef * m.factors.iter().map(|i| x[*i]).product::<f64>())
            .sum();
    }
    Ok(out)
}

/// Exact sparse evaluation.
pub fn evaluate_trig(f: &Integrand, v: &TrigPoly, cap: usize) -> Result<TrigPoly> {
    if v.dim_v != f.dim() {
        return Err(Error::Dimension(format!("integrand needs {} components, polynomial has {}", f.dim(), v.dim_v)));
    }
    let comps: Vec<TrigPoly> = (0..v.dim_v).map(|c| v.component(c)).collect();
    let mut out = TrigPoly::zero_with_period(v.n, 1, v.period.clone());
    for m in f.monomials() {
        let mut term = comps[m.factors[0]].scale(m.coef);
        for &i in &m.factors[1..] {
            term = term.mul(&comps[i], cap)?;
        }
        out = out.add(&term)?;
    }
    out.terms.retain(|_, a| a[0] != Complex64::new(0.0, 0.0));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Mean test

#[derive(Debug, Clone, Serialize)]
pub struct MeanTestReport {
    pub integrand: String,
    pub trials: usize,
    pub bandlimit: i64,
    /// `|⨍F(v₀+v) − F(v₀)|` per trial.
    pub deviations: Vec<f64>,
    /// Per-trial comparison scale `max(1, |F(v₀)|, (|v₀|² + ⨍|v|²)^{s/2})`.
    pub scales: Vec<f64>,
    /// `‖v‖²_{L²}/vol` per trial.
    pub energies: Vec<f64>,
    pub worst_deviation: f64,
    pub worst_scaled: f64,
    pub quasiaffine_consistent: bool,
}

/// Random mean-zero `A`-free trigonometric polynomial: standard normal
/// amplitudes on `[−B, B]ⁿ ∖ {0}` projected by `P(ξ)`.
pub fn random_a_free(sym: &OperatorSymbol, bandlimit: i64, rng: &mut impl Rng) -> Result<TrigPoly> {
    let n = sym.n;
    let mut v = TrigPoly::zero(n, sym.dim_v);
    let side = (2 * bandlimit + 1) as usize;
    let total = side.pow(n as u32);
    for idx in 0..total {
        let mut r = idx;
        let m: Vec<i64> = (0..n)
            .map(|_| {
                let c = (r % side) as i64 - bandlimit;
                r /= side;
                c
            })
            .collect();
        // One representative of each ±m pair.
        match m.iter().find(|x| **x != 0) {
            Some(first) if *first > 0 => {}
            _ => continue,
        }
        let xi: Vec<f64> = m.iter().map(|x| *x as f64).collect();
        let p = sym.kernel_projection(&xi)?;
        let c: Vec<Complex64> = (0..sym.dim_v)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let pc: Vec<Complex64> = (0..sym.dim_v)
            .map(|r| (0..sym.dim_v).map(|k| c[k] * p[(r, k)]).sum())
            .collect();
        v.add_mode(freq_from(&m), &pc);
    }
    Ok(v)
}

/// Checks `⨍F(v₀ + v) = F(v₀)` for random `A`-free `v` in exact
/// trigonometric arithmetic; consistent iff every deviation is ≤ 1e−8·scale.
pub fn quasiaffine_mean_test(
    f: &Integrand,
    sym: &OperatorSymbol,
    trials: usize,
    bandlimit: i64,
    seed: u64,
) -> Result<MeanTestReport> {
    if f.dim() != sym.dim_v {
        return Err(Error::Dimension("integrand and operator dimensions differ".into()));
    }
    let rows: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = keyed_rng(seed, "quasiaffine_mean_test", t as u64);
            let v = random_a_free(sym, bandlimit, &mut rng)?;
            let v0: Vec<f64> = (0..sym.dim_v).map(|_| StandardNormal.sample(&mut rng)).collect();
            let shifted = TrigPoly::constant(sym.n, &v0).add(&v)?;
            let fv = evaluate_trig(f, &shifted, DEFAULT_TERM_CAP)?;
            let vol = v.volume();
            let mean = fv.integral()[0] / vol;
            let f0 = f.eval(&v0);
            let energy: f64 = v
                .terms
                .values()
                .flat_map(|a| a.iter().map(|z| z.norm_sqr()))
                .sum();
            let v0sq: f64 = v0.iter().map(|x| x * x).sum();
            let scale = 1f64.max(f0.abs()).max((v0sq + energy).powf(f.arity() as f64 / 2.0));
            Ok(((mean - f0).abs(), scale, energy))
        })
        .collect::<Result<_>>()?;
    let deviations: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let scales: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let worst_scaled = rows.iter().map(|r| r.0 / r.1).fold(0.0, f64::max);
    Ok(MeanTestReport {
        integrand: f.name(),
        trials,
        bandlimit,
        worst_deviation: deviations.iter().cloned().fold(0.0, f64::max),
        worst_scaled,
        quasiaffine_consistent: worst_scaled <= 1e-8,
        energies: rows.iter().map(|r| r.2).collect(),
        deviations,
        scales,
    })
}

// ---------------------------------------------------------------------------
// Test functions and pairings

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `exp(−1/(1−|x−c|²/r²))` inside the ball.
    SmoothBump { center: Vec<f64>, radius: f64 },
    /// Indicator of the half-open box `[lo, hi)`.
    IndicatorBox { lo: Vec<f64>, hi: Vec<f64> },
    IndicatorBall { center: Vec<f64>, radius: f64 },
    /// `(1 − |x−c|/r)_+^α`, Hölder continuous of order α at the centre's rim.
    HolderCusp { center: Vec<f64>, radius: f64, alpha: f64 },
    Constant { value: f64 },
}

impl TestFunction {
    pub fn id(&self) -> String {
        match self {
            TestFunction::SmoothBump { center, radius } => format!("bump(c={center:?},r={radius})"),
            TestFunction::IndicatorBox { lo, hi } => format!("box({lo:?},{hi:?})"),
            TestFunction::IndicatorBall { center, radius } => format!("ball(c={center:?},r={radius})"),
            TestFunction::HolderCusp { center, radius, alpha } => {
                format!("cusp(c={center:?},r={radius},a={alpha})")
            }
            TestFunction::Constant { value } => format!("const({value})"),
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, TestFunction::IndicatorBox { .. } | TestFunction::IndicatorBall { .. })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist2 = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        match self {
            TestFunction::SmoothBump { center, radius } => {
                let r2 = dist2(center) / (radius * radius);
                if r2 < 1.0 {
                    (-1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            TestFunction::IndicatorBox { lo, hi } => {
                let inside = x.iter().zip(lo).zip(hi).all(|((v, l), h)| *v >= *l && *v < *h);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::IndicatorBall { center, radius } => {
                if dist2(center) <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::HolderCusp { center, radius, alpha } => {
                let d = dist2(center).sqrt() / radius;
                if d < 1.0 {
                    (1.0 - d).powf(*alpha)
                } else {
                    0.0
                }
            }
            TestFunction::Constant { value } => *value,
        }
    }

    /// Profile in the radial variable for radially symmetric tests
    /// centred at `center`.
    pub fn radial_profile(&self, r: f64) -> Option<f64> {
        match self {
            TestFunction::SmoothBump { radius, .. } => {
                let r2 = (r / radius).powi(2);
                Some(if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 })
            }
            TestFunction::IndicatorBall { radius, .. } => Some(if r <= *radius { 1.0 } else { 0.0 }),
            TestFunction::HolderCusp { radius, alpha, .. } => {
                Some(if r < *radius { (1.0 - r / radius).powf(*alpha) } else { 0.0 })
            }
            TestFunction::Constant { value } => Some(*value),
            TestFunction::IndicatorBox { .. } => None,
        }
    }

    pub fn center(&self) -> Option<&[f64]> {
        match self {
            TestFunction::SmoothBump { center, .. }
            | TestFunction::IndicatorBall { center, .. }
            | TestFunction::HolderCusp { center, .. } => Some(center),
            _ => None,
        }
    }

    pub fn render(&self, shape: &[usize], period: &[f64]) -> GridField {
        GridField::scalar_fn(shape, period, |x| self.eval(x))
    }
}

/// `(∫ g φ, ∫ |g| |φ|)` by grid quadrature.
pub fn grid_pairing(g: &GridField, test: &TestFunction) -> (f64, f64) {
    let mut x = vec![0.0; g.n()];
    let (mut s, mut a) = (0.0, 0.0);
    for p in 0..g.npoints() {
        g.coords_into(p, &mut x);
        let phi = test.eval(&x);
        if phi != 0.0 {
            s += g.values[p] * phi;
            a += (g.values[p] * phi).abs();
        }
    }
    let dv = g.cell_volume();
    (s * dv, a * dv)
}

/// A sequence `F(v_j)` that can be tested against functions of the bank.
pub trait PairingFamily: Sync {
    fn name(&self) -> String;
    /// `(∫F(v_j)φ, ∫|F(v_j)||φ|)`.
    fn pair(&self, j: usize, test: &TestFunction) -> Result<(f64, f64)>;
    /// `∫F(v)φ` for the analytic limit `v`.
    fn limit(&self, test: &TestFunction) -> Result<f64>;
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub family: String,
    pub test: String,
    pub indices: Vec<usize>,
    pub pairings: Vec<f64>,
    pub abs_pairings: Vec<f64>,
    pub limit: f64,
    pub fit: Option<PowerFit>,
    /// Index range `[start, end)` used by the fit.
    pub fit_window: (usize, usize),
}

/// Longest trailing run on which `|pairing − limit|` is strictly
/// decreasing, when it holds at least three points; otherwise everything.
fn trailing_monotone_window(errs: &[f64]) -> (usize, usize) {
    let end = errs.len();
    let mut start = end.saturating_sub(1);
    while start > 0 && errs[start - 1] > errs[start] {
        start -= 1;
    }
    if end - start >= 3 {
        (start, end)
    } else {
        (0, end)
    }
}

pub fn pairing_experiment(family: &dyn PairingFamily, test: &TestFunction, js: &[usize]) -> Result<PairingReport> {
    let vals: Vec<(f64, f64)> = js.par_iter().map(|&j| family.pair(j, test)).collect::<Result<_>>()?;
    let limit = family.limit(test)?;
    let errs: Vec<f64> = vals.iter().map(|v| (v.0 - limit).abs()).collect();
    let window = trailing_monotone_window(&errs);
    let xs: Vec<f64> = js[window.0..window.1].iter().map(|j| *j as f64).collect();
    Ok(PairingReport {
        family: family.name(),
        test: test.id(),
        indices: js.to_vec(),
        pairings: vals.iter().map(|v| v.0).collect(),
        abs_pairings: vals.iter().map(|v| v.1).collect(),
        limit,
        fit: power_fit(&xs, &errs[window.0..window.1]),
        fit_window: window,
    })
}

/// `v_j = (sin jx₁, 0)` (curl-free), `ṽ_j = (sin jx₂, 0)` (div-free) on the
/// `2π`-torus with `F = v·ṽ`; both tend weakly to zero.
#[derive(Debug, Clone)]
pub struct OscillationFamily {
    /// Grid points per axis; `None` picks `max(256, 8j)`.
    pub grid: Option<usize>,
}

impl OscillationFamily {
    pub fn fields(&self, j: usize) -> (GridField, GridField) {
        let n = self.grid.unwrap_or((8 * j).max(256));
        let shape = [n, n];
        let period = [2.0 * PI, 2.0 * PI];
        let jf = j as f64;
        let v = GridField::from_fn(&shape, &period, 2, |x, o| {
            o[0] = (jf * x[0]).sin();
            o[1] = 0.0;
        });
        let w = GridField::from_fn(&shape, &period, 2, |x, o| {
            o[0] = (jf * x[1]).sin();
            o[1] = 0.0;
        });
        (v, w)
    }
}

impl PairingFamily for OscillationFamily {
    fn name(&self) -> String {
        "oscillation".into()
    }

    fn pair(&self, j: usize, test: &TestFunction) -> Result<(f64, f64)> {
        let (v, w) = self.fields(j);
        let both = GridField::from_components(&[v, w])?;
        let fv = evaluate_grid(&Integrand::DivcurlDot { half: 2 }, &both)?;
        Ok(grid_pairing(&fv, test))
    }

    fn limit(&self, _test: &TestFunction) -> Result<f64> {
        Ok(0.0)
    }
}

// ---------------------------------------------------------------------------
// Cofactor structure

#[derive(Debug, Clone, Serialize)]
pub struct CofactorReport {
    /// `‖Σ_j ∂_j Σ_j‖₂ / Σ_j ‖∂_j Σ_j‖₂`.
    pub div_residual: f64,
    /// `max |⟨D_{x′}U₁, Σ⟩ − det D_{x′}U′|`.
    pub det_route_diff: f64,
    /// `max |Σ| / ((s−1)! Π_{i≥2} |D_{x′}U_i|)` (≤ 1 when the bound holds).
    pub hadamard_worst_ratio: f64,
    pub hadamard_holds: bool,
}

/// Cofactor field `Σ_j = cof_{1j}(D_{x′}U′)` of the leading `s×s` block,
/// where `x′` are the first `s` coordinates and `U′ = (U₁, …, U_s)`.
pub fn cofactor_field(u: &GridField, s: usize) -> Result<(GridField, CofactorReport)> {
    let n = u.n();
    if s < 2 || s > n || u.dim_v < s {
        return Err(Error::InvalidInput(format!("cofactor split needs 2 ≤ s ≤ n and s components (s={s})")));
    }
    let du = jacobian(u);
    let npts = u.npoints();
    let d = |p: usize, i: usize, j: usize| du.values[p * u.dim_v * n + i * n + j];
    let mut sigma = GridField::zeros(&u.shape, &u.period, s);
    let mut det_diff: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let fact: f64 = (1..s).map(|k| k as f64).product();
    for p in 0..npts {
        let m = DMatrix::from_fn(s, s, |i, j| d(p, i, j));
        for j in 0..s {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sigma.values[p * s + j] = sign * minor.determinant();
        }
        let sig = &sigma.values[p * s..(p + 1) * s];
        let via: f64 = (0..s).map(|j| m[(0, j)] * sig[j]).sum();
        det_diff = det_diff.max((via - m.determinant()).abs());
        let norm_sig = sig.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bound: f64 = fact * (1..s).map(|i| m.row(i).norm()).product::<f64>();
        if norm_sig > 0.0 {
            worst = worst.max(norm_sig / bound.max(f64::MIN_POSITIVE));
        }
    }
    let parts: Vec<GridField> = (0..s).map(|j| derivative(&sigma.component(j), j)).collect();
    let mut div = parts[0].clone();
    for part in &parts[1..] {
        div = div.add(part)?;
    }
    let scale: f64 = parts.iter().map(|q| q.l2()).sum();
    let report = CofactorReport {
        div_residual: if scale > 0.0 { div.l2() / scale } else { 0.0 },
        det_route_diff: det_diff,
        hadamard_worst_ratio: worst,
        hadamard_holds: worst <= 1.0 + 1e-12,
    };
    Ok((sigma, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol;

    #[test]
    fn det3_monomials_match_nalgebra() {
        let f = Integrand::det(3);
        let v = [1.0, 2.0, 0.5, -1.0, 3.0, 2.0, 0.25, -2.0, 1.5];
        let m = DMatrix::from_row_slice(3, 3, &v);
        assert!((f.eval(&v) - m.determinant()).abs() < 1e-12);
        assert_eq!(f.monomials().len(), 6);
    }

    #[test]
    fn dot_with_rotated_is_zero() {
        let s = [16, 16];
        let p = [2.0 * PI, 2.0 * PI];
        let both = GridField::from_fn(&s, &p, 4, |x, o| {
            o[0] = x[0].sin();
            o[1] = x[1].cos() + 2.0;
            o[2] = -o[1];
            o[3] = o[0];
        });
        let g = evaluate_grid(&Integrand::DivcurlDot { half: 2 }, &both).unwrap();
        assert!(g.max_abs() < 1e-15);
    }

    #[test]
    fn det2_trig_matches_grid() {
        let mut h = TrigPoly::zero(2, 1);
        h.add_mode(freq_from(&[1, 2]), &[Complex64::new(0.3, -0.2)]);
        h.add_mode(freq_from(&[-2, 1]), &[Complex64::new(0.1, 0.4)]);
        let mut k = TrigPoly::zero(2, 1);
        k.add_mode(freq_from(&[3, 0]), &[Complex64::new(0.5, 0.0)]);
        k.add_mode(freq_from(&[1, 1]), &[Complex64::new(0.0, 0.7)]);
        let du = TrigPoly::stack(&[h.derivative(0), h.derivative(1), k.derivative(0), k.derivative(1)]).unwrap();
        let exact = evaluate_trig(&Integrand::Det2, &du, DEFAULT_TERM_CAP).unwrap();
        let grid = evaluate_grid(&Integrand::Det2, &du.render(&[32, 32]).unwrap()).unwrap();
        assert!(exact.render(&[32, 32]).unwrap().sub(&grid).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn mean_test_separates_null_lagrangian_from_energy() {
        let rep = quasiaffine_mean_test(&Integrand::Det2, &symbol::curl_matrix_n(2), 10, 2, 1).unwrap();
        assert!(rep.quasiaffine_consistent, "{}", rep.worst_scaled);
        let rep = quasiaffine_mean_test(&Integrand::SquareNorm { dim: 4 }, &symbol::curl_matrix_n(2), 5, 2, 1).unwrap();
        assert!(!rep.quasiaffine_consistent);
        for (d, e) in rep.deviations.iter().zip(&rep.energies) {
            // Deviation equals ⨍|v|² exactly.
            assert!((d - e).abs() < 1e-10 * e.max(1.0));
        }
    }

    #[test]
    fn cofactor_of_identity_map() {
        let s = [32, 32];
        let p = [2.0 * PI, 2.0 * PI];
        let u = GridField::from_fn(&s, &p, 2, |x, o| {
            o[0] = x[0].sin() + 0.3 * (x[1]).cos();
            o[1] = (x[0] + x[1]).sin() * 0.5 + x[1].sin();
        });
        let (sigma, rep) = cofactor_field(&u, 2).unwrap();
        assert!(rep.div_residual < 1e-8, "{}", rep.div_residual);
        assert!(rep.det_route_diff < 1e-12);
        assert!(rep.hadamard_holds && (rep.hadamard_worst_ratio - 1.0).abs() < 1e-12);
        // Σ = (∂₂U₂, −∂₁U₂).
        let d2 = derivative(&u.component(1), 1);
        assert!(sigma.component(0).sub(&d2).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn integrand_names_parse() {
        assert_eq!("det2".parse::<Integrand>().unwrap(), Integrand::Det2);
        assert_eq!("det:n=3".parse::<Integrand>().unwrap(), Integrand::det(3));
        let m: Integrand = "minor:n=3,rows=01,cols=12".parse().unwrap();
        assert_eq!(m.arity(), 2);
        assert!("minor:n=3,rows=01,cols=19".parse::<Integrand>().is_err());
    }
}
