//! Periodic grid fields and sparse trigonometric polynomials.
//!
//! Conventions shared by every module:
//! * a grid axis of length `N` and period `L` samples `x_k = k·L/N`;
//! * spectral coefficients are normalised as `f̂(m) = N⁻¹ Σ f(x) e^{-iξ·x}`
//!   with `ξ = 2πm/L`, so `cos(x)` has amplitude `1/2` at `m = ±1`;
//! * grid values are stored row-major with the component index innermost.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::symbol::OperatorSymbol;
use crate::{Error, Result};

pub const DEFAULT_TERM_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub shape: Vec<usize>,
    pub period: Vec<f64>,
    pub dim_v: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(shape: Vec<usize>, period: Vec<f64>, dim_v: usize, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::InvalidInput(format!("dimension {} outside 1..=4", shape.len())));
        }
        if shape.len() != period.len() {
            return Err(Error::Dimension("shape and period lengths differ".into()));
        }
        if shape.iter().any(|&s| s < 2) {
            return Err(Error::InvalidInput("grid sizes must be at least 2".into()));
        }
        if period.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidInput("periods must be positive".into()));
        }
        if dim_v == 0 {
            return Err(Error::InvalidInput("dimV must be positive".into()));
        }
        let npts: usize = shape.iter().product();
        if values.len() != npts * dim_v {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                npts * dim_v,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field has non-finite values".into()));
        }
        Ok(Self {
            shape,
            period,
            dim_v,
            values,
        })
    }

    pub fn zeros(shape: &[usize], period: &[f64], dim_v: usize) -> Self {
        let npts: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            period: period.to_vec(),
            dim_v,
            values: vec![0.0; npts * dim_v],
        }
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(
        shape: &[usize],
        period: &[f64],
        dim_v: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Self {
        let mut g = Self::zeros(shape, period, dim_v);
        let mut x = vec![0.0; shape.len()];
        for p in 0..g.npoints() {
            g.coords_into(p, &mut x);
            f(&x, &mut g.values[p * dim_v..(p + 1) * dim_v]);
        }
        g
    }

    pub fn scalar_fn(shape: &[usize], period: &[f64], f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(shape, period, 1, |x, o| o[0] = f(x))
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn npoints(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.period.iter().zip(&self.shape).map(|(p, s)| p / *s as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.period.iter().product()
    }

    pub fn unravel(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n()];
        for a in (0..self.n()).rev() {
            idx[a] = p % self.shape[a];
            p /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn coords_into(&self, p: usize, x: &mut [f64]) {
        let mut p = p;
        for a in (0..self.n()).rev() {
            let k = p % self.shape[a];
            p /= self.shape[a];
            x[a] = k as f64 * self.period[a] / self.shape[a] as f64;
        }
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        self.coords_into(p, &mut x);
        x
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim_v..(p + 1) * self.dim_v]
    }

    pub fn component(&self, c: usize) -> GridField {
        GridField {
            shape: self.shape.clone(),
            period: self.period.clone(),
            dim_v: 1,
            values: (0..self.npoints()).map(|p| self.values[p * self.dim_v + c]).collect(),
        }
    }

    pub fn from_components(comps: &[GridField]) -> Result<GridField> {
        let first = comps
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?;
        let dim_v: usize = comps.iter().map(|c| c.dim_v).sum();
        let mut out = GridField::zeros(&first.shape, &first.period, dim_v);
        for p in 0..first.npoints() {
            let mut o = 0;
            for c in comps {
                if c.shape != first.shape {
                    return Err(Error::Dimension("component grids differ".into()));
                }
                for d in 0..c.dim_v {
                    out.values[p * dim_v + o] = c.values[p * c.dim_v + d];
                    o += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.shape == other.shape && self.period == other.period
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            values: self.values.iter().map(|v| f(*v)).collect(),
            ..self.clone()
        }
    }

    pub fn scale(&self, s: f64) -> GridField {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        if !self.same_grid(other) || self.dim_v != other.dim_v {
            return Err(Error::Dimension("fields live on different grids".into()));
        }
        Ok(GridField {
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            ..self.clone()
        })
    }

    /// Pointwise Euclidean magnitude as a scalar field.
    pub fn magnitude(&self) -> GridField {
        GridField {
            shape: self.shape.clone(),
            period: self.period.clone(),
            dim_v: 1,
            values: self
                .values
                .chunks(self.dim_v)
                .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect(),
        }
    }

    /// Integral of each component (uniform weights times cell volume).
    pub fn integral(&self) -> Vec<f64> {
        let dv = self.cell_volume();
        let mut out = vec![0.0; self.dim_v];
        for ch in self.values.chunks(self.dim_v) {
            for (o, v) in out.iter_mut().zip(ch) {
                *o += v;
            }
        }
        out.iter().map(|s| s * dv).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let vol = self.volume();
        self.integral().into_iter().map(|s| s / vol).collect()
    }

    /// Discrete L² norm (all components).
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn dot(&self, other: &GridField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Writes the raw little-endian doubles to `path` and the sidecar
    /// `{"n","shape","period","dimV"}` to `path.json`.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let side = DumpSidecar {
            n: self.n(),
            shape: self.shape.clone(),
            period: self.period.clone(),
            dim_v: self.dim_v,
        };
        std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_dump(path: &Path) -> Result<GridField> {
        let side: DumpSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        if side.n != side.shape.len() {
            return Err(Error::Parse("sidecar n does not match shape".into()));
        }
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Parse("dump length is not a multiple of 8".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        GridField::new(side.shape, side.period, side.dim_v, values)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpSidecar {
    n: usize,
    shape: Vec<usize>,
    period: Vec<f64>,
    #[serde(rename = "dimV")]
    dim_v: usize,
}

/// Signed frequency of FFT bin `k` on an axis of length `n`
/// (the Nyquist bin maps to `-n/2`).
pub fn signed_freq(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Spectral coefficients of a grid field, one complex array per component.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub shape: Vec<usize>,
    pub period: Vec<f64>,
    pub comps: Vec<Vec<Complex64>>,
}

impl Spectrum {
    pub fn npoints(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn freq(&self, mut p: usize) -> Vec<i64> {
        let n = self.shape.len();
        let mut m = vec![0; n];
        for a in (0..n).rev() {
            m[a] = signed_freq(p % self.shape[a], self.shape[a]);
            p /= self.shape[a];
        }
        m
    }

    /// Physical frequency `ξ = 2πm/L` of bin `p`.
    pub fn xi(&self, p: usize) -> Vec<f64> {
        self.freq(p)
            .iter()
            .zip(&self.period)
            .map(|(m, l)| 2.0 * PI * *m as f64 / l)
            .collect()
    }

    /// `Σ|f̂|²` over all components; equals the mean of `|f|²` (Parseval).
    pub fn energy(&self) -> f64 {
        self.comps.iter().flatten().map(|c| c.norm_sqr()).sum()
    }
}

pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    for (a, &len) in shape.iter().enumerate() {
        let plan = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let stride: usize = shape[a + 1..].iter().product();
        if stride == 1 {
            plan.process(data);
            continue;
        }
        let block = len * stride;
        let mut buf = vec![Complex64::zero(); len];
        let mut scratch = vec![Complex64::zero(); plan.get_inplace_scratch_len()];
        for outer in 0..total / block {
            let base = outer * block;
            for inner in 0..stride {
                for k in 0..len {
                    buf[k] = data[base + k * stride + inner];
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for k in 0..len {
                    data[base + k * stride + inner] = buf[k];
                }
            }
        }
    }
}

pub fn fft(f: &GridField) -> Spectrum {
    let npts = f.npoints();
    let norm = 1.0 / npts as f64;
    let comps = (0..f.dim_v)
        .map(|c| {
            let mut d: Vec<Complex64> = (0..npts)
                .map(|p| Complex64::new(f.values[p * f.dim_v + c], 0.0))
                .collect();
            fft_nd(&mut d, &f.shape, false);
            d.iter_mut().for_each(|z| *z *= norm);
            d
        })
        .collect();
    Spectrum {
        shape: f.shape.clone(),
        period: f.period.clone(),
        comps,
    }
}

/// Inverse transform, keeping the real part.
pub fn ifft(s: &Spectrum) -> GridField {
    let npts = s.npoints();
    let dim_v = s.comps.len();
    let mut out = GridField::zeros(&s.shape, &s.period, dim_v);
    for (c, comp) in s.comps.iter().enumerate() {
        let mut d = comp.clone();
        fft_nd(&mut d, &s.shape, true);
        for p in 0..npts {
            out.values[p * dim_v + c] = d[p].re;
        }
    }
    out
}

/// Applies `A` spectrally: `(Af)^(m) = i^l A(2πm/L) f̂(m)`.
pub fn apply_symbol(sym: &OperatorSymbol, f: &GridField) -> Result<GridField> {
    if f.dim_v != sym.dim_v || f.n() != sym.n {
        return Err(Error::Dimension(format!(
            "field (n={}, dimV={}) vs operator (n={}, dimV={})",
            f.n(),
            f.dim_v,
            sym.n,
            sym.dim_v
        )));
    }
    let s = fft(f);
    let npts = s.npoints();
    let mut out = vec![vec![Complex64::zero(); npts]; sym.dim_w];
    for p in 0..npts {
        let m = sym.freq_eval(&s.xi(p))?;
        for w in 0..sym.dim_w {
            let mut acc = Complex64::zero();
            for v in 0..sym.dim_v {
                acc += m[(w, v)] * s.comps[v][p];
            }
            out[w][p] = acc;
        }
    }
    Ok(ifft(&Spectrum {
        shape: s.shape,
        period: s.period,
        comps: out,
    }))
}

type MultiplierFn<'a> = Box<dyn Fn(&[f64]) -> DMatrix<Complex64> + Sync + 'a>;

/// Frequency-wise matrix multiplier with an explicit zero-frequency value.
pub struct MultiplierSpec<'a> {
    pub dim_in: usize,
    pub dim_out: usize,
    pub func: MultiplierFn<'a>,
    pub zero: DMatrix<Complex64>,
    /// Homogeneity degree (metadata only).
    pub degree: f64,
}

impl<'a> MultiplierSpec<'a> {
    pub fn scalar(dim: usize, degree: f64, zero: f64, f: impl Fn(&[f64]) -> f64 + Sync + 'a) -> Self {
        Self {
            dim_in: dim,
            dim_out: dim,
            func: Box::new(move |xi| DMatrix::identity(dim, dim).map(|x: f64| Complex64::new(x * f(xi), 0.0))),
            zero: DMatrix::identity(dim, dim).map(|x: f64| Complex64::new(x * zero, 0.0)),
            degree,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 0.0, 1.0, |_| 1.0)
    }

    /// Riesz potential `|ξ|^{-s}` on every component, zero at `ξ = 0`.
    pub fn riesz_potential(dim: usize, s: f64) -> Self {
        Self::scalar(dim, -s, 0.0, move |xi| xi.iter().map(|x| x * x).sum::<f64>().powf(-s / 2.0))
    }

    /// Kernel projection `P(ξ)` of an operator, identity at zero.
    pub fn kernel_projection(sym: &'a OperatorSymbol) -> Self {
        let d = sym.dim_v;
        Self {
            dim_in: d,
            dim_out: d,
            func: Box::new(move |xi| {
                sym.kernel_projection(xi)
                    .expect("nonzero frequency")
                    .map(|x| Complex64::new(x, 0.0))
            }),
            zero: DMatrix::identity(d, d).map(|x: f64| Complex64::new(x, 0.0)),
            degree: 0.0,
        }
    }
}

pub fn apply_multiplier(mult: &MultiplierSpec, f: &GridField) -> Result<GridField> {
    if f.dim_v != mult.dim_in {
        return Err(Error::Dimension(format!(
            "multiplier expects {} components, field has {}",
            mult.dim_in, f.dim_v
        )));
    }
    let s = fft(f);
    let npts = s.npoints();
    let mut out = vec![vec![Complex64::zero(); npts]; mult.dim_out];
    for p in 0..npts {
        let m = s.freq(p);
        let mat = if m.iter().all(|x| *x == 0) {
            mult.zero.clone()
        } else {
            (mult.func)(&s.xi(p))
        };
        if mat.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteMultiplier(m));
        }
        for o in 0..mult.dim_out {
            let mut acc = Complex64::zero();
            for i in 0..mult.dim_in {
                acc += mat[(o, i)] * s.comps[i][p];
            }
            out[o][p] = acc;
        }
    }
    Ok(ifft(&Spectrum {
        shape: s.shape,
        period: s.period,
        comps: out,
    }))
}

/// Spectral partial derivative along `axis`, every component.
pub fn derivative(f: &GridField, axis: usize) -> GridField {
    let mut s = fft(f);
    for p in 0..s.npoints() {
        let xi = s.xi(p)[axis];
        for c in s.comps.iter_mut() {
            c[p] *= Complex64::new(0.0, xi);
        }
    }
    ifft(&s)
}

/// Spectral gradient of a scalar field (`n` components).
pub fn gradient(f: &GridField) -> Result<GridField> {
    if f.dim_v != 1 {
        return Err(Error::Dimension("gradient expects a scalar field".into()));
    }
    let parts: Vec<GridField> = (0..f.n()).map(|a| derivative(f, a)).collect();
    GridField::from_components(&parts)
}

/// Jacobian matrix `∂_j f_i`, row-major `(i, j)` per point.
pub fn jacobian(f: &GridField) -> GridField {
    let n = f.n();
    let d = f.dim_v;
    let parts: Vec<GridField> = (0..n).map(|a| derivative(f, a)).collect();
    let mut out = GridField::zeros(&f.shape, &f.period, d * n);
    for p in 0..f.npoints() {
        for i in 0..d {
            for (j, pj) in parts.iter().enumerate() {
                out.values[p * d * n + i * n + j] = pj.values[p * d + i];
            }
        }
    }
    out
}

/// Smooth kernels with unit integral supported in the closed unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    /// `exp(-1/(1-|z|²))` on `|z| < 1`.
    Bump,
    /// Normalised indicator of the unit ball.
    BallAverage,
}

impl Kernel {
    pub fn profile(&self, r2: f64) -> f64 {
        match self {
            Kernel::Bump => {
                if r2 < 1.0 {
                    (-1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            Kernel::BallAverage => {
                if r2 <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Spectrum of the periodised kernel `t^{-n} K(x/t)` sampled on the grid of
/// `f` and normalised to unit discrete mass, so convolution preserves
/// integrals exactly. Scales below one cell degenerate to the identity.
fn kernel_spectrum(shape: &[usize], period: &[f64], t: f64, kernel: Kernel) -> Vec<Complex64> {
    let g = GridField::zeros(shape, period, 1);
    let npts = g.npoints();
    let mut k = vec![Complex64::zero(); npts];
    let mut x = vec![0.0; shape.len()];
    let mut sum = 0.0;
    for (p, kp) in k.iter_mut().enumerate() {
        g.coords_into(p, &mut x);
        let r2: f64 = x
            .iter()
            .zip(period)
            .map(|(xi, l)| (min_image(*xi, *l) / t).powi(2))
            .sum();
        let v = kernel.profile(r2);
        *kp = Complex64::new(v, 0.0);
        sum += v;
    }
    if sum == 0.0 {
        k[0] = Complex64::new(1.0, 0.0);
        sum = 1.0;
    }
    // ĉ = N·dV·K̂·f̂ with Σ K dV = 1: dividing by the raw sum does both.
    for kp in k.iter_mut() {
        *kp /= sum;
    }
    fft_nd(&mut k, shape, false);
    k
}

fn check_scale(f: &GridField, t: f64) -> Result<()> {
    let half = f.period.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    if !(t > 0.0 && t <= half) {
        return Err(Error::InvalidInput(format!("mollification scale {t} outside (0, {half}]")));
    }
    Ok(())
}

/// Periodic convolution with `t^{-n} K(x/t)`.
pub fn mollify(f: &GridField, t: f64, kernel: Kernel) -> Result<GridField> {
    Ok(mollify_many(f, &[t], kernel)?.pop().expect("one scale"))
}

/// [`mollify`] at several scales sharing one forward transform of `f`.
pub fn mollify_many(f: &GridField, ts: &[f64], kernel: Kernel) -> Result<Vec<GridField>> {
    for &t in ts {
        check_scale(f, t)?;
    }
    let s = fft(f);
    ts.iter()
        .map(|&t| {
            let k = kernel_spectrum(&f.shape, &f.period, t, kernel);
            let comps = s
                .comps
                .iter()
                .map(|c| c.iter().zip(&k).map(|(a, b)| a * b).collect())
                .collect();
            Ok(ifft(&Spectrum {
                shape: s.shape.clone(),
                period: s.period.clone(),
                comps,
            }))
        })
        .collect()
}

/// Integer frequency vector with arbitrary-size entries.
pub type Freq = Vec<BigInt>;

/// Sparse real trigonometric polynomial `Σ_m c_m e^{iξ_m·x}` with
/// `c_{-m} = conj(c_m)`, vector valued.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub n: usize,
    pub dim_v: usize,
    pub period: Vec<f64>,
    pub terms: BTreeMap<Freq, Vec<Complex64>>,
}

fn neg_freq(m: &Freq) -> Freq {
    m.iter().map(|x| -x).collect()
}

fn is_zero_freq(m: &Freq) -> bool {
    m.iter().all(|x| x.is_zero())
}

pub fn freq_from(m: &[i64]) -> Freq {
    m.iter().map(|&x| BigInt::from(x)).collect()
}

impl TrigPoly {
    pub fn zero(n: usize, dim_v: usize) -> Self {
        Self::zero_with_period(n, dim_v, vec![2.0 * PI; n])
    }

    pub fn zero_with_period(n: usize, dim_v: usize, period: Vec<f64>) -> Self {
        Self {
            n,
            dim_v,
            period,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: &[f64]) -> Self {
        let mut t = Self::zero(n, c.len());
        t.terms
            .insert(vec![BigInt::zero(); n], c.iter().map(|x| Complex64::new(*x, 0.0)).collect());
        t
    }

    pub fn volume(&self) -> f64 {
        self.period.iter().product()
    }

    pub fn xi(&self, m: &Freq) -> Vec<f64> {
        m.iter()
            .zip(&self.period)
            .map(|(mi, l)| 2.0 * PI * mi.to_f64().expect("frequency fits f64") / l)
            .collect()
    }

    fn add_at(&mut self, m: Freq, amp: &[Complex64]) {
        let e = self
            .terms
            .entry(m)
            .or_insert_with(|| vec![Complex64::zero(); amp.len()]);
        for (a, b) in e.iter_mut().zip(amp) {
            *a += b;
        }
    }

    /// Adds `c e^{iξ_m x} + conj(c) e^{-iξ_m x}` (just `Re c` at `m = 0`).
    /// Real polynomial with standard normal amplitudes on every mode of
    /// `[−B, B]ⁿ ∖ {0}`.
    pub fn random_bandlimited(n: usize, dim_v: usize, band: i64, rng: &mut impl rand::Rng) -> TrigPoly {
        use rand_distr::{Distribution, StandardNormal};
        let mut v = TrigPoly::zero(n, dim_v);
        let side = (2 * band + 1) as usize;
        for idx in 0..side.pow(n as u32) {
            let mut r = idx;
            let m: Vec<i64> = (0..n)
                .map(|_| {
                    let c = (r % side) as i64 - band;
                    r /= side;
                    c
                })
                .collect();
            match m.iter().find(|x| **x != 0) {
                Some(first) if *first > 0 => {}
                _ => continue,
            }
            let c: Vec<Complex64> = (0..dim_v)
                .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                .collect();
            v.add_mode(freq_from(&m), &c);
        }
        v
    }

    pub fn add_mode(&mut self, m: Freq, c: &[Complex64]) {
        assert_eq!(c.len(), self.dim_v, "amplitude length");
        if is_zero_freq(&m) {
            let re: Vec<Complex64> = c.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
            self.add_at(m, &re);
        } else {
            let conj: Vec<Complex64> = c.iter().map(|z| z.conj()).collect();
            self.add_at(neg_freq(&m), &conj);
            self.add_at(m, c);
        }
    }

    /// Scalar `amp · cos(ξ_m · x)`.
    pub fn cos(n: usize, m: Freq, amp: f64) -> Self {
        let mut t = Self::zero(n, 1);
        if is_zero_freq(&m) {
            t.add_mode(m, &[Complex64::new(amp, 0.0)]);
        } else {
            t.add_mode(m, &[Complex64::new(amp / 2.0, 0.0)]);
        }
        t
    }

    /// Scalar `amp · sin(ξ_m · x)`.
    pub fn sin(n: usize, m: Freq, amp: f64) -> Self {
        let mut t = Self::zero(n, 1);
        if !is_zero_freq(&m) {
            t.add_mode(m, &[Complex64::new(0.0, -amp / 2.0)]);
        }
        t
    }

    pub fn with_period(mut self, period: Vec<f64>) -> Self {
        self.period = period;
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|a| a.iter_mut().for_each(|z| *z *= s));
        out
    }

    pub fn add(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_compatible(other)?;
        if self.dim_v != other.dim_v {
            return Err(Error::Dimension("component counts differ".into()));
        }
        let mut out = self.clone();
        for (m, a) in &other.terms {
            out.add_at(m.clone(), a);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.add(&other.scale(-1.0))
    }

    fn check_compatible(&self, other: &TrigPoly) -> Result<()> {
        if self.n != other.n || self.period != other.period {
            return Err(Error::Dimension("trigonometric polynomials on different tori".into()));
        }
        Ok(())
    }

    pub fn component(&self, c: usize) -> TrigPoly {
        let mut out = TrigPoly::zero_with_period(self.n, 1, self.period.clone());
        for (m, a) in &self.terms {
            if a[c] != Complex64::zero() {
                out.terms.insert(m.clone(), vec![a[c]]);
            }
        }
        out
    }

    pub fn stack(comps: &[TrigPoly]) -> Result<TrigPoly> {
        let first = comps
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?;
        let dim_v: usize = comps.iter().map(|c| c.dim_v).sum();
        let mut out = TrigPoly::zero_with_period(first.n, dim_v, first.period.clone());
        let mut off = 0;
        for c in comps {
            first.check_compatible(c)?;
            for (m, a) in &c.terms {
                let e = out
                    .terms
                    .entry(m.clone())
                    .or_insert_with(|| vec![Complex64::zero(); dim_v]);
                for (d, z) in a.iter().enumerate() {
                    e[off + d] += z;
                }
            }
            off += c.dim_v;
        }
        Ok(out)
    }

    /// Exact product. The right factor must be scalar; every component of
    /// `self` is multiplied by it.
    pub fn mul(&self, other: &TrigPoly, cap: usize) -> Result<TrigPoly> {
        self.check_compatible(other)?;
        if other.dim_v != 1 {
            return Err(Error::Dimension("right factor of a product must be scalar".into()));
        }
        let bound = self.terms.len().saturating_mul(other.terms.len());
        if bound > cap {
            return Err(Error::TermOverflow { count: bound, cap });
        }
        let mut out = TrigPoly::zero_with_period(self.n, self.dim_v, self.period.clone());
        for (ma, a) in &self.terms {
            for (mb, b) in &other.terms {
                let m: Freq = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                let prod: Vec<Complex64> = a.iter().map(|z| z * b[0]).collect();
                out.add_at(m, &prod);
            }
        }
        out.terms.retain(|_, a| a.iter().any(|z| *z != Complex64::zero()));
        Ok(out)
    }

    /// `∫ a·b dx` for scalar `a`, `b`, using `vol · Σ_m a_m b_{-m}` without
    /// forming the product.
    pub fn integral_of_product(&self, other: &TrigPoly) -> Result<f64> {
        self.check_compatible(other)?;
        if self.dim_v != 1 || other.dim_v != 1 {
            return Err(Error::Dimension("integral_of_product expects scalars".into()));
        }
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = Complex64::zero();
        for (m, a) in &small.terms {
            if let Some(b) = large.terms.get(&neg_freq(m)) {
                acc += a[0] * b[0];
            }
        }
        Ok(acc.re * self.volume())
    }

    /// Exact partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> TrigPoly {
        let mut out = TrigPoly::zero_with_period(self.n, self.dim_v, self.period.clone());
        for (m, a) in &self.terms {
            let xi = 2.0 * PI * m[axis].to_f64().expect("frequency fits f64") / self.period[axis];
            if xi != 0.0 {
                let f = Complex64::new(0.0, xi);
                out.terms.insert(m.clone(), a.iter().map(|z| z * f).collect());
            }
        }
        out
    }

    /// Exact `A v` on the frequency side.
    pub fn apply_symbol(&self, sym: &OperatorSymbol) -> Result<TrigPoly> {
        if self.dim_v != sym.dim_v || self.n != sym.n {
            return Err(Error::Dimension("operator and polynomial dimensions differ".into()));
        }
        let mut out = TrigPoly::zero_with_period(self.n, sym.dim_w, self.period.clone());
        for (m, a) in &self.terms {
            let mat = sym.freq_eval(&self.xi(m))?;
            let r: Vec<Complex64> = (0..sym.dim_w)
                .map(|w| (0..sym.dim_v).map(|v| mat[(w, v)] * a[v]).sum())
                .collect();
            if r.iter().any(|z| *z != Complex64::zero()) {
                out.terms.insert(m.clone(), r);
            }
        }
        Ok(out)
    }

    /// `(box volume) × (zero-frequency amplitude)`, per component.
    pub fn integral(&self) -> Vec<f64> {
        let zero = vec![BigInt::zero(); self.n];
        let vol = self.volume();
        match self.terms.get(&zero) {
            Some(a) => a.iter().map(|z| z.re * vol).collect(),
            None => vec![0.0; self.dim_v],
        }
    }

    /// Largest deviation from Hermitian symmetry `c_{-m} = conj(c_m)`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, a) in &self.terms {
            let zero = vec![Complex64::zero(); self.dim_v];
            let b = self.terms.get(&neg_freq(m)).unwrap_or(&zero);
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y.conj()).norm());
            }
        }
        worst
    }

    /// Largest `|m_i|` over all terms.
    pub fn max_abs_freq(&self) -> BigInt {
        self.terms
            .keys()
            .flat_map(|m| m.iter().map(|x| x.abs()))
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    /// Renders on a grid; every frequency must satisfy `|m_i| < N_i/2`.
    pub fn render(&self, shape: &[usize]) -> Result<GridField> {
        if shape.len() != self.n {
            return Err(Error::Dimension("grid dimension".into()));
        }
        let g = GridField::zeros(shape, &self.period, self.dim_v);
        let npts = g.npoints();
        let mut comps = vec![vec![Complex64::zero(); npts]; self.dim_v];
        for (m, a) in &self.terms {
            let mut idx = Vec::with_capacity(self.n);
            for (mi, &s) in m.iter().zip(shape) {
                let v = mi.to_i64().filter(|v| 2 * v.unsigned_abs() < s as u64).ok_or_else(|| {
                    Error::InvalidInput(format!("frequency {mi} not resolvable on {s} points"))
                })?;
                idx.push(v.rem_euclid(s as i64) as usize);
            }
            let p = g.ravel(&idx);
            for (c, z) in a.iter().enumerate() {
                comps[c][p] += z;
            }
        }
        Ok(ifft(&Spectrum {
            shape: shape.to_vec(),
            period: self.period.clone(),
            comps,
        }))
    }

    /// Pointwise evaluation at `x`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_v];
        for (m, a) in &self.terms {
            let ph: f64 = self.xi(m).iter().zip(x).map(|(k, xx)| k * xx).sum();
            let e = Complex64::from_polar(1.0, ph);
            for (o, z) in out.iter_mut().zip(a) {
                *o += (z * e).re;
            }
        }
        out
    }

    /// Terms with `|c| > tol` from a grid spectrum.
    pub fn from_spectrum(s: &Spectrum, tol: f64) -> TrigPoly {
        let n = s.shape.len();
        let mut out = TrigPoly::zero_with_period(n, s.comps.len(), s.period.clone());
        for p in 0..s.npoints() {
            let a: Vec<Complex64> = s.comps.iter().map(|c| c[p]).collect();
            if a.iter().any(|z| z.norm() > tol) {
                out.terms.insert(freq_from(&s.freq(p)), a);
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(m, a)| {
                let ms: Vec<serde_json::Value> = m
                    .iter()
                    .map(|x| match x.to_i64() {
                        Some(v) => serde_json::Value::from(v),
                        None => serde_json::Value::from(x.to_string()),
                    })
                    .collect();
                serde_json::json!({
                    "m": ms,
                    "re": a.iter().map(|z| z.re).collect::<Vec<_>>(),
                    "im": a.iter().map(|z| z.im).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::Value::Array(items)
    }

    pub fn from_json(v: &serde_json::Value, n: usize, period: Vec<f64>) -> Result<TrigPoly> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Term {
            m: Vec<serde_json::Value>,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let terms: Vec<Term> = serde_json::from_value(v.clone())?;
        let dim_v = terms.first().map_or(1, |t| t.re.len());
        let mut out = TrigPoly::zero_with_period(n, dim_v, period);
        for t in terms {
            if t.m.len() != n || t.re.len() != dim_v || t.im.len() != dim_v {
                return Err(Error::Parse("term has inconsistent lengths".into()));
            }
            let m: Freq = t
                .m
                .iter()
                .map(|x| match x {
                    serde_json::Value::Number(k) => k
                        .as_i64()
                        .map(BigInt::from)
                        .ok_or_else(|| Error::Parse("frequency must be an integer".into())),
                    serde_json::Value::String(s) => {
                        s.parse::<BigInt>().map_err(|_| Error::Parse(format!("bad frequency '{s}'")))
                    }
                    _ => Err(Error::Parse("frequency must be an integer".into())),
                })
                .collect::<Result<_>>()?;
            let amp: Vec<Complex64> = t.re.iter().zip(&t.im).map(|(r, i)| Complex64::new(*r, *i)).collect();
            out.add_at(m, &amp);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol;

    fn grid2(n: usize) -> (Vec<usize>, Vec<f64>) {
        (vec![n, n], vec![2.0 * PI, 2.0 * PI])
    }

    #[test]
    fn cos_has_two_half_modes() {
        let (s, p) = grid2(64);
        let f = GridField::scalar_fn(&s, &p, |x| x[0].cos());
        let sp = fft(&f);
        for q in 0..sp.npoints() {
            let m = sp.freq(q);
            let expect = if m == vec![1, 0] || m == vec![-1, 0] { 0.5 } else { 0.0 };
            assert!((sp.comps[0][q] - Complex64::new(expect, 0.0)).norm() < 1e-14, "{m:?}");
        }
    }

    #[test]
    fn divergence_and_curl() {
        let (s, p) = grid2(32);
        let v = GridField::from_fn(&s, &p, 2, |x, o| {
            o[0] = x[0].sin();
            o[1] = 0.0;
        });
        let d = apply_symbol(&symbol::div2(), &v).unwrap();
        for q in 0..d.npoints() {
            assert!((d.values[q] - d.coords(q)[0].cos()).abs() < 1e-13);
        }
        let h = GridField::scalar_fn(&s, &p, |x| (2.0 * x[0] + x[1]).sin() + (3.0 * x[1]).cos());
        let c = apply_symbol(&symbol::curl2(), &gradient(&h).unwrap()).unwrap();
        assert!(c.max_abs() < 1e-12);
    }

    #[test]
    fn riesz_potential_single_mode() {
        let (s, p) = grid2(32);
        let f = GridField::scalar_fn(&s, &p, |x| (3.0 * x[0]).cos());
        let g = apply_multiplier(&MultiplierSpec::riesz_potential(1, 1.0), &f).unwrap();
        assert!(g.sub(&f.scale(1.0 / 3.0)).unwrap().max_abs() < 1e-14);
        let id = apply_multiplier(&MultiplierSpec::identity(1), &f).unwrap();
        assert!(id.sub(&f).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn non_finite_multiplier_errors() {
        let (s, p) = grid2(8);
        let f = GridField::scalar_fn(&s, &p, |x| x[0].cos());
        let m = MultiplierSpec::scalar(1, -1.0, 0.0, |xi| if xi[0] == 1.0 { f64::NAN } else { 1.0 });
        assert!(matches!(apply_multiplier(&m, &f), Err(Error::NonFiniteMultiplier(_))));
    }

    #[test]
    fn product_to_sum() {
        let c = TrigPoly::cos(1, freq_from(&[5]), 1.0);
        let sq = c.mul(&c, DEFAULT_TERM_CAP).unwrap();
        assert_eq!(sq.len(), 3);
        assert!((sq.integral()[0] - PI).abs() < 1e-14);
        let expect = TrigPoly::constant(1, &[0.5]).add(&TrigPoly::cos(1, freq_from(&[10]), 0.5)).unwrap();
        assert_eq!(sq, expect);
        let d = TrigPoly::cos(1, freq_from(&[3]), 1.0);
        assert_eq!(c.mul(&d, DEFAULT_TERM_CAP).unwrap().integral()[0], 0.0);
    }

    #[test]
    fn cos_squared_integral_two_axes() {
        let big: BigInt = BigInt::from(8).pow(40u32);
        let c1 = TrigPoly::cos(2, vec![big.clone(), BigInt::zero()], 1.0);
        let c2 = TrigPoly::cos(2, vec![BigInt::zero(), big], 1.0);
        let f = c1.mul(&c1, 100).unwrap().mul(&c2, 100).unwrap().mul(&c2, 100).unwrap();
        assert!((f.integral()[0] - PI * PI).abs() < 1e-12);
        assert!(f.hermitian_defect() == 0.0);
    }

    #[test]
    fn term_cap_guard() {
        let c = TrigPoly::cos(1, freq_from(&[5]), 1.0);
        assert!(matches!(c.mul(&c, 3), Err(Error::TermOverflow { .. })));
    }

    #[test]
    fn render_matches_eval_and_sparse_symbol() {
        let mut v = TrigPoly::zero(2, 2);
        v.add_mode(freq_from(&[2, -1]), &[Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)]);
        v.add_mode(freq_from(&[0, 3]), &[Complex64::new(0.0, 0.7), Complex64::new(0.4, 0.0)]);
        let g = v.render(&[16, 16]).unwrap();
        for q in [0, 17, 100, 255] {
            let e = v.eval(&g.coords(q));
            assert!((e[0] - g.values[2 * q]).abs() < 1e-13);
        }
        let sym = symbol::div2();
        let exact = v.apply_symbol(&sym).unwrap().render(&[16, 16]).unwrap();
        let grid = apply_symbol(&sym, &g).unwrap();
        assert!(exact.sub(&grid).unwrap().max_abs() < 1e-12);
        assert!(v.render(&[4, 4]).is_err());
    }

    #[test]
    fn mollify_constant_and_mass() {
        let (s, p) = grid2(64);
        let c = GridField::scalar_fn(&s, &p, |_| 2.5);
        let m = mollify(&c, 0.5, Kernel::Bump).unwrap();
        assert!(m.sub(&c).unwrap().max_abs() < 1e-13);
        let f = GridField::scalar_fn(&s, &p, |x| (x[0] - 1.0).abs().min(1.0) + x[1].sin());
        let m = mollify(&f, 0.7, Kernel::Bump).unwrap();
        assert!((m.integral()[0] - f.integral()[0]).abs() < 1e-10);
        assert!(mollify(&f, 4.0, Kernel::Bump).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let dir = std::env::temp_dir().join(format!("cclab-dump-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.field");
        let (s, p) = grid2(8);
        let f = GridField::from_fn(&s, &p, 2, |x, o| {
            o[0] = x[0];
            o[1] = -x[1];
        });
        f.write_dump(&path).unwrap();
        assert_eq!(GridField::read_dump(&path).unwrap(), f);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn trig_json_round_trip() {
        let big: BigInt = BigInt::from(8).pow(30u32);
        let v = TrigPoly::sin(2, vec![big, BigInt::from(3)], 0.25);
        let back = TrigPoly::from_json(&v.to_json(), 2, vec![2.0 * PI; 2]).unwrap();
        assert_eq!(v, back);
    }
}
