//! Homogeneous constant-coefficient operator symbols.
//!
//! An operator `A = Σ_{|α|=l} A_α ∂^α` acting on `V`-valued fields is stored
//! through its coefficient matrices. The real polynomial `A(ξ) = Σ A_α ξ^α` is
//! what [`OperatorSymbol::evaluate`] returns; the frequency-side multiplier of
//! the differential operator is `i^l A(ξ)` ([`OperatorSymbol::freq_eval`]).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_TOL_SV: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub alpha: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSymbol {
    pub n: usize,
    pub l: usize,
    pub dim_v: usize,
    pub dim_w: usize,
    pub coeffs: Vec<Coefficient>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffJson {
    alpha: Vec<usize>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolJson {
    n: usize,
    l: usize,
    #[serde(rename = "dimV")]
    dim_v: usize,
    #[serde(rename = "dimW")]
    dim_w: usize,
    coeffs: Vec<CoeffJson>,
}

impl OperatorSymbol {
    pub fn new(
        n: usize,
        l: usize,
        dim_v: usize,
        dim_w: usize,
        coeffs: Vec<Coefficient>,
    ) -> Result<Self> {
        if n == 0 || dim_v == 0 || dim_w == 0 {
            return Err(Error::InvalidInput("n, dimV and dimW must be positive".into()));
        }
        let mut any_nonzero = false;
        for c in &coeffs {
            if c.alpha.len() != n {
                return Err(Error::Dimension(format!(
                    "multi-index {:?} has length {}, expected {n}",
                    c.alpha,
                    c.alpha.len()
                )));
            }
            if c.alpha.iter().sum::<usize>() != l {
                return Err(Error::InvalidInput(format!(
                    "multi-index {:?} has order {}, expected {l}",
                    c.alpha,
                    c.alpha.iter().sum::<usize>()
                )));
            }
            if c.matrix.nrows() != dim_w || c.matrix.ncols() != dim_v {
                return Err(Error::Dimension(format!(
                    "coefficient matrix is {}x{}, expected {dim_w}x{dim_v}",
                    c.matrix.nrows(),
                    c.matrix.ncols()
                )));
            }
            any_nonzero |= c.matrix.iter().any(|x| *x != 0.0);
        }
        if !any_nonzero {
            return Err(Error::InvalidInput("all coefficient matrices vanish".into()));
        }
        Ok(Self {
            n,
            l,
            dim_v,
            dim_w,
            coeffs,
        })
    }

    /// Real symbol `A(ξ) = Σ A_α ξ^α`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        if xi.len() != self.n {
            return Err(Error::Dimension(format!(
                "frequency has length {}, operator dimension is {}",
                xi.len(),
                self.n
            )));
        }
        let mut out = DMatrix::zeros(self.dim_w, self.dim_v);
        for c in &self.coeffs {
            let mono: f64 = c
                .alpha
                .iter()
                .zip(xi)
                .map(|(&a, &x)| x.powi(a as i32))
                .product();
            if mono != 0.0 {
                out += &c.matrix * mono;
            }
        }
        Ok(out)
    }

    /// Frequency-side multiplier `i^l A(ξ)` of the differential operator.
    pub fn freq_eval(&self, xi: &[f64]) -> Result<DMatrix<Complex64>> {
        let a = self.evaluate(xi)?;
        let f = i_pow(self.l);
        Ok(a.map(|x| f * x))
    }

    /// Formal adjoint `A* = (-1)^l Σ A_αᵀ ∂^α`, so that on the frequency side
    /// `A*` acts by the conjugate transpose of `i^l A(ξ)`.
    pub fn adjoint(&self) -> OperatorSymbol {
        let sign = if self.l % 2 == 0 { 1.0 } else { -1.0 };
        OperatorSymbol {
            n: self.n,
            l: self.l,
            dim_v: self.dim_w,
            dim_w: self.dim_v,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| Coefficient {
                    alpha: c.alpha.clone(),
                    matrix: c.matrix.transpose() * sign,
                })
                .collect(),
        }
    }

    /// Projection `P(ξ) = I − A†(ξ)A(ξ)` onto `ker A(ξ)`. Errors at `ξ = 0`.
    pub fn kernel_projection(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        self.kernel_projection_tol(xi, DEFAULT_TOL_SV)
    }

    pub fn kernel_projection_tol(&self, xi: &[f64], tol_sv: f64) -> Result<DMatrix<f64>> {
        let unit = normalize(xi)?;
        let basis = self.kernel_basis(&unit, tol_sv)?;
        let mut p = DMatrix::zeros(self.dim_v, self.dim_v);
        for v in &basis {
            let col = nalgebra::DVector::from_column_slice(v);
            p += &col * col.transpose();
        }
        Ok((&p + p.transpose()) * 0.5)
    }

    /// `P(ξ)` with the convention `P(0) = I`.
    pub fn projection_or_identity(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        if xi.iter().all(|x| *x == 0.0) {
            if xi.len() != self.n {
                return Err(Error::Dimension("frequency length".into()));
            }
            Ok(DMatrix::identity(self.dim_v, self.dim_v))
        } else {
            self.kernel_projection(xi)
        }
    }

    /// Orthonormal basis of `ker A(ξ)` (vectors of length `dimV`).
    pub fn kernel_basis(&self, xi: &[f64], tol_sv: f64) -> Result<Vec<Vec<f64>>> {
        let a = self.evaluate(xi)?;
        Ok(kernel_basis_of(&a, tol_sv))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let js = SymbolJson {
            n: self.n,
            l: self.l,
            dim_v: self.dim_v,
            dim_w: self.dim_w,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| CoeffJson {
                    alpha: c.alpha.clone(),
                    matrix: (0..c.matrix.nrows())
                        .map(|i| (0..c.matrix.ncols()).map(|j| c.matrix[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(js).expect("symbol serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let js: SymbolJson = serde_json::from_value(v.clone())?;
        let mut coeffs = Vec::with_capacity(js.coeffs.len());
        for c in js.coeffs {
            let rows = c.matrix.len();
            let cols = c.matrix.first().map_or(0, |r| r.len());
            if c.matrix.iter().any(|r| r.len() != cols) {
                return Err(Error::Parse("ragged coefficient matrix".into()));
            }
            let flat: Vec<f64> = c.matrix.into_iter().flatten().collect();
            coeffs.push(Coefficient {
                alpha: c.alpha,
                matrix: DMatrix::from_row_slice(rows, cols, &flat),
            });
        }
        Self::new(js.n, js.l, js.dim_v, js.dim_w, coeffs)
    }
}

pub(crate) fn i_pow(l: usize) -> Complex64 {
    match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn normalize(xi: &[f64]) -> Result<Vec<f64>> {
    let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    Ok(xi.iter().map(|x| x / r).collect())
}

/// Numerical rank: singular values above `tol_sv · σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol_sv: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol_sv * smax).count()
}

fn kernel_basis_of(a: &DMatrix<f64>, tol_sv: f64) -> Vec<Vec<f64>> {
    let dv = a.ncols();
    let rows = a.nrows().max(dv);
    let mut sq = DMatrix::zeros(rows, dv);
    sq.view_mut((0, 0), (a.nrows(), dv)).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || *s <= tol_sv * smax {
            out.push(vt.row(i).iter().cloned().collect());
        }
    }
    out
}

/// Deterministic sphere sampling plan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub count: usize,
    /// Append the coordinate directions `±e_i`, where rank drops of
    /// axis-aligned symbols live.
    pub include_axes: bool,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            count: 1000,
            include_axes: true,
        }
    }
}

/// Unit vectors: Fibonacci lattice for n = 2, 3; tensorized hyperspherical
/// angles for n ≥ 4.
pub fn sphere_samples(n: usize, plan: SamplingPlan) -> Vec<Vec<f64>> {
    let count = plan.count.max(1);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    match n {
        0 => {}
        1 => {
            out.push(vec![1.0]);
            out.push(vec![-1.0]);
        }
        2 => {
            let off = 1.0 / golden;
            for i in 0..count {
                let th = 2.0 * std::f64::consts::PI * ((i as f64 + off) / count as f64);
                out.push(vec![th.cos(), th.sin()]);
            }
        }
        3 => {
            for i in 0..count {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let ph = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
                out.push(vec![r * ph.cos(), r * ph.sin(), z]);
            }
        }
        _ => {
            let per = ((count as f64).powf(1.0 / (n as f64 - 1.0)).ceil() as usize).max(2);
            let total = per.pow(n as u32 - 1);
            for idx in 0..total {
                let mut rem = idx;
                let mut angles = Vec::with_capacity(n - 1);
                for d in 0..n - 1 {
                    let k = rem % per;
                    rem /= per;
                    let span = if d == n - 2 {
                        2.0 * std::f64::consts::PI
                    } else {
                        std::f64::consts::PI
                    };
                    angles.push(span * (k as f64 + 0.5) / per as f64);
                }
                let mut x = vec![0.0; n];
                let mut s = 1.0;
                for d in 0..n - 1 {
                    x[d] = s * angles[d].cos();
                    s *= angles[d].sin();
                }
                x[n - 1] = s;
                out.push(x);
            }
        }
    }
    if plan.include_axes && n >= 2 {
        for i in 0..n {
            for sgn in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = sgn;
                out.push(e);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    /// Common rank when every sample agrees.
    pub rank: Option<usize>,
    pub constant: bool,
    /// First sampled unit frequency whose rank differs from the first sample.
    pub witness: Option<Vec<f64>>,
    pub witness_rank: Option<usize>,
    pub samples: usize,
    pub tol_sv: f64,
    pub note: &'static str,
}

pub fn constant_rank_check(sym: &OperatorSymbol, plan: SamplingPlan, tol_sv: f64) -> RankReport {
    let pts = sphere_samples(sym.n, plan);
    let mut first: Option<usize> = None;
    for p in &pts {
        let a = sym.evaluate(p).expect("sample has operator dimension");
        let r = numerical_rank(&a, tol_sv);
        match first {
            None => first = Some(r),
            Some(r0) if r0 != r => {
                return RankReport {
                    rank: None,
                    constant: false,
                    witness: Some(p.clone()),
                    witness_rank: Some(r),
                    samples: pts.len(),
                    tol_sv,
                    note: "constant rank is certified only on the sampled frequencies",
                };
            }
            _ => {}
        }
    }
    RankReport {
        rank: first,
        constant: true,
        witness: None,
        witness_rank: None,
        samples: pts.len(),
        tol_sv,
        note: "constant rank is certified only on the sampled frequencies",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveConeSample {
    pub directions: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    pub span_rank: usize,
    pub spanning: bool,
}

pub fn wave_cone_span(
    sym: &OperatorSymbol,
    plan: SamplingPlan,
    tol_sv: f64,
) -> Result<WaveConeSample> {
    let rep = constant_rank_check(sym, plan, tol_sv);
    if !rep.constant {
        return Err(Error::NonConstantRank {
            rank_a: rep.rank.unwrap_or(0),
            rank_b: rep.witness_rank.unwrap_or(0),
            witness: rep.witness.unwrap_or_default(),
        });
    }
    let mut directions = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut nrows = 0;
    for p in sphere_samples(sym.n, plan) {
        let basis = sym.kernel_basis(&p, tol_sv)?;
        for b in &basis {
            rows.extend_from_slice(b);
            nrows += 1;
        }
        directions.push((p, basis));
    }
    let span_rank = if nrows == 0 {
        0
    } else {
        numerical_rank(&DMatrix::from_row_slice(nrows, sym.dim_v, &rows), tol_sv)
    };
    Ok(WaveConeSample {
        directions,
        span_rank,
        spanning: span_rank == sym.dim_v,
    })
}

fn coeff(alpha: &[usize], rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Coefficient {
    let mut m = DMatrix::zeros(rows, cols);
    for &(i, j, v) in entries {
        m[(i, j)] += v;
    }
    Coefficient {
        alpha: alpha.to_vec(),
        matrix: m,
    }
}

fn unit_alpha(n: usize, i: usize) -> Vec<usize> {
    let mut a = vec![0; n];
    a[i] = 1;
    a
}

/// Divergence of a planar vector field.
pub fn div2() -> OperatorSymbol {
    OperatorSymbol::new(
        2,
        1,
        2,
        1,
        vec![
            coeff(&[1, 0], 1, 2, &[(0, 0, 1.0)]),
            coeff(&[0, 1], 1, 2, &[(0, 1, 1.0)]),
        ],
    )
    .expect("valid builtin")
}

/// Planar curl `∂₁v₂ − ∂₂v₁`.
pub fn curl2() -> OperatorSymbol {
    OperatorSymbol::new(
        2,
        1,
        2,
        1,
        vec![
            coeff(&[1, 0], 1, 2, &[(0, 1, 1.0)]),
            coeff(&[0, 1], 1, 2, &[(0, 0, -1.0)]),
        ],
    )
    .expect("valid builtin")
}

/// The pair `(v, ṽ) ↦ (div v, curl ṽ)` on `V = ℝ⁴` ordered `(v₁, v₂, ṽ₁, ṽ₂)`.
pub fn divcurl2() -> OperatorSymbol {
    OperatorSymbol::new(
        2,
        1,
        4,
        2,
        vec![
            coeff(&[1, 0], 2, 4, &[(0, 0, 1.0), (1, 3, 1.0)]),
            coeff(&[0, 1], 2, 4, &[(0, 1, 1.0), (1, 2, -1.0)]),
        ],
    )
    .expect("valid builtin")
}

/// Gradient of a scalar in `ℝⁿ`.
pub fn grad(n: usize) -> OperatorSymbol {
    let coeffs = (0..n)
        .map(|i| coeff(&unit_alpha(n, i), n, 1, &[(i, 0, 1.0)]))
        .collect();
    OperatorSymbol::new(n, 1, 1, n, coeffs).expect("valid builtin")
}

/// Row-wise curl of an `n×n` matrix field (row-major storage); its kernel at
/// `ξ` is the rank-one matrices `a ⊗ ξ`, so A-free fields are gradients.
pub fn curl_matrix_n(n: usize) -> OperatorSymbol {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .collect();
    let dim_w = n * pairs.len();
    let mut coeffs = Vec::new();
    for d in 0..n {
        let mut entries = Vec::new();
        for i in 0..n {
            for (p, &(j, k)) in pairs.iter().enumerate() {
                let row = i * pairs.len() + p;
                // ∂_j U_ik − ∂_k U_ij
                if d == j {
                    entries.push((row, i * n + k, 1.0));
                }
                if d == k {
                    entries.push((row, i * n + j, -1.0));
                }
            }
        }
        coeffs.push(coeff(&unit_alpha(n, d), dim_w, n * n, &entries));
    }
    OperatorSymbol::new(n, 1, n * n, dim_w, coeffs).expect("valid builtin")
}

/// Scalar Laplacian.
pub fn laplacian(n: usize) -> OperatorSymbol {
    let coeffs = (0..n)
        .map(|i| {
            let mut a = vec![0; n];
            a[i] = 2;
            coeff(&a, 1, 1, &[(0, 0, 1.0)])
        })
        .collect();
    OperatorSymbol::new(n, 2, 1, 1, coeffs).expect("valid builtin")
}

pub const BUILTIN_NAMES: &[&str] = &["div2", "curl2", "divcurl2", "grad", "curl_matrix_n", "laplacian"];

/// Builds a named operator. Names accept an optional dimension suffix,
/// e.g. `grad:n=3` or `curl_matrix_n:n=2`; the default dimension is 2.
pub fn builtin(spec: &str) -> Result<OperatorSymbol> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut n = 2usize;
    for kv in params.split(',').filter(|s| !s.is_empty()) {
        match kv.split_once('=') {
            Some(("n", v)) => {
                n = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad dimension '{v}'")))?
            }
            _ => return Err(Error::Parse(format!("unknown operator parameter '{kv}'"))),
        }
    }
    if n == 0 || n > 4 {
        return Err(Error::InvalidInput(format!("dimension {n} outside 1..=4")));
    }
    let fixed2 = |s: OperatorSymbol| {
        if n == 2 {
            Ok(s)
        } else {
            Err(Error::InvalidInput(format!("operator '{name}' is planar only")))
        }
    };
    match name {
        "div2" => fixed2(div2()),
        "curl2" => fixed2(curl2()),
        "divcurl2" => fixed2(divcurl2()),
        "grad" => Ok(grad(n)),
        "curl_matrix_n" => Ok(curl_matrix_n(n)),
        "laplacian" => Ok(laplacian(n)),
        _ => Err(Error::Unknown {
            name: name.to_string(),
            suggestion: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(div2().evaluate(&[1.0, 0.0]).unwrap(), DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        assert_eq!(curl2().evaluate(&[0.0, 1.0]).unwrap(), DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]));
        assert_eq!(laplacian(2).evaluate(&[3.0, 4.0]).unwrap()[(0, 0)], 25.0);
        assert!(matches!(div2().evaluate(&[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn rank_examples() {
        let r = constant_rank_check(&divcurl2(), SamplingPlan::default(), DEFAULT_TOL_SV);
        assert!(r.constant);
        assert_eq!(r.rank, Some(2));
        for n in 1..=4 {
            let r = constant_rank_check(&grad(n), SamplingPlan { count: 200, include_axes: true }, DEFAULT_TOL_SV);
            assert_eq!(r.rank, Some(1), "n = {n}");
        }
        let x1 = OperatorSymbol::new(2, 1, 1, 1, vec![coeff(&[1, 0], 1, 1, &[(0, 0, 1.0)])]).unwrap();
        let r = constant_rank_check(&x1, SamplingPlan::default(), DEFAULT_TOL_SV);
        assert!(!r.constant);
        let w = r.witness.unwrap();
        assert!(w[0].abs() < 1e-12 && (w[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wave_cone_examples() {
        let plan = SamplingPlan { count: 100, include_axes: false };
        assert_eq!(wave_cone_span(&curl_matrix_n(2), plan, DEFAULT_TOL_SV).unwrap().span_rank, 4);
        assert_eq!(wave_cone_span(&div2(), plan, DEFAULT_TOL_SV).unwrap().span_rank, 2);
        let d1 = wave_cone_span(&grad(1), plan, DEFAULT_TOL_SV).unwrap();
        assert_eq!(d1.span_rank, 0);
        assert!(!d1.spanning);
    }

    #[test]
    fn projection_examples() {
        let p = div2().kernel_projection(&[1.0, 0.0]).unwrap();
        assert!(max_abs(&(p - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))) < 1e-14);
        let p = curl2().kernel_projection(&[1.0, 0.0]).unwrap();
        assert!(max_abs(&(p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-14);
        assert!(matches!(div2().kernel_projection(&[0.0, 0.0]), Err(Error::ZeroFrequency)));
        assert_eq!(div2().projection_or_identity(&[0.0, 0.0]).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn adjoint_examples() {
        for s in [div2(), curl2()] {
            let a = s.freq_eval(&[0.6, -1.3]).unwrap();
            let b = s.adjoint().freq_eval(&[0.6, -1.3]).unwrap();
            let prod = &a * &b;
            assert!((prod[(0, 0)].re - (0.36 + 1.69)).abs() < 1e-14);
            assert!(prod[(0, 0)].im.abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip() {
        let s = divcurl2();
        let back = OperatorSymbol::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        let bad = serde_json::json!({"n":2,"l":1,"dimV":1,"dimW":1,"coeffs":[{"alpha":[1,1],"matrix":[[1.0]]}]});
        assert!(OperatorSymbol::from_json(&bad).is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(builtin("grad:n=3").unwrap().n, 3);
        assert_eq!(builtin("curl_matrix_n").unwrap().dim_v, 4);
        assert!(builtin("nope").is_err());
        assert!(builtin("div2:n=3").is_err());
    }
}
