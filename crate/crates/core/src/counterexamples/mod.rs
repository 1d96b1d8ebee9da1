//! Explicit sharpness constructions: div-curl families for the Table 1
//! matrix, the Jacobian families with unbounded pairings, and the Orlicz
//! pair example.

pub mod divcurl;
pub mod jacobian;
pub mod orlicz;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::field::{GridField, TrigPoly, DEFAULT_TERM_CAP};
use crate::quasiaffine::{pairing_experiment, PairingFamily, PairingReport, TestFunction};
use crate::{Error, Result};

pub use divcurl::{Ex61, Ex62, Ex63};
pub use jacobian::{Case1, Case1Report, Case2, Case3, Case3Pairing, GapAudit, NormAudit, RateReport};
pub use orlicz::{AppendixOrlicz, OrliczReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "ex61")]
    Ex61,
    #[serde(rename = "ex62")]
    Ex62,
    #[serde(rename = "ex63")]
    Ex63,
    #[serde(rename = "jac_case1")]
    JacCase1,
    #[serde(rename = "jac_case2")]
    JacCase2,
    #[serde(rename = "jac_case3")]
    JacCase3,
    #[serde(rename = "appendixOrlicz")]
    AppendixOrlicz,
}

impl CaseId {
    pub fn all() -> [CaseId; 7] {
        use CaseId::*;
        [Ex61, Ex62, Ex63, JacCase1, JacCase2, JacCase3, AppendixOrlicz]
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Ex61 => "ex61",
            CaseId::Ex62 => "ex62",
            CaseId::Ex63 => "ex63",
            CaseId::JacCase1 => "jac_case1",
            CaseId::JacCase2 => "jac_case2",
            CaseId::JacCase3 => "jac_case3",
            CaseId::AppendixOrlicz => "appendixOrlicz",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            CaseId::Ex61 => {
                "v_j = ṽ_j = j e 1_{(0,1/j)²}: F(v_j) = j² on a shrinking square with unit mass. \
                 Parameters: direction e. Index j."
            }
            CaseId::Ex62 => {
                "Harmonic fields concentrating on the circle |x| = 1/2: F(v_j) = +|∇h_j|² inside and −|∇h_j|² \
                 outside, mass π on each side, bounded in local H¹. Index j."
            }
            CaseId::Ex63 => {
                "v = (w(x₁), 0), ṽ = g(|v|²)v with g(s²) = √(ψ(s)/s²), ψ = t^r log^β(1+t), \
                 w(t) = t^{-1/r} log(1+1/t)^{-(β+1+γ)/r}: F log F is not integrable. Parameters r = 2, β, γ."
            }
            CaseId::JacCase1 => {
                "p ≤ n: u^{(k)} = k^{(α−1)/n+γ} g_{1/k} with g_ε(x) = ε^{-1/n} g(x/ε), tested against mollified \
                 (x₁)₊^α; pairing ∝ k^{nγ}. Parameters α, β, p, γ (planar). Index k ≥ 3."
            }
            CaseId::JacCase2 => {
                "p > n: u_i = k^{-β₁} sin(k x_i), u_n = −k^{-β₁} cos(k x_n), φ = k^{-α} sin(k x_n) Π cos(k x_i); \
                 pairing = πⁿ k^{n−α−nβ₁}. Parameters n, α, β, β₁, p; torus or grid mode. Index k."
            }
            CaseId::JacCase3 => {
                "β = 1 − α/n: lacunary sums with n_ℓ = k^{n²/α} 8^ℓ, ℓ = 1..k, a_ℓ = n_ℓ^{-(n−α)/n}(ℓ+1)^{-1/n}; \
                 pairing = πⁿ Σ 1/(ℓ+1) ~ πⁿ log k while the norms stay bounded. Parameters n, α, p; torus mode. Index k."
            }
            CaseId::AppendixOrlicz => {
                "φ = t² log^a(1+t), ψ = t² log^b(1+t), b < 2 − a: |v| ∈ L^ψ, ṽ = g(|v|)v with g(t)t = φ⁻¹(ψ(t)), \
                 and v·ṽ log(v·ṽ) is not integrable. Parameters a, b, γ."
            }
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::all()
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Unknown {
                name: s.into(),
                suggestion: closest(s, CaseId::all().iter().map(|c| c.name())),
            })
    }
}

/// Closest candidate by normalised Levenshtein similarity, if any is close.
pub fn closest<'a>(s: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    candidates
        .map(|c| (strsim::normalized_levenshtein(&s.to_lowercase(), &c.to_lowercase()), c))
        .filter(|(d, _)| *d >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Torus,
    Grid,
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" | "trig" => Ok(Representation::Torus),
            "grid" => Ok(Representation::Grid),
            _ => Err(Error::Unknown {
                name: s.into(),
                suggestion: closest(s, ["torus", "grid"].into_iter()),
            }),
        }
    }
}

/// A case plus its parameters; unset parameters take the case defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub case: CaseId,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
    #[serde(default)]
    pub mode: Representation,
    #[serde(default)]
    pub grid: Option<usize>,
}

impl SequenceSpec {
    pub fn new(case: CaseId) -> Self {
        Self {
            case,
            n: None,
            alpha: None,
            beta: None,
            beta1: None,
            r: None,
            p: None,
            gamma: None,
            direction: None,
            mode: Representation::Torus,
            grid: None,
        }
    }

    fn reject(&self, names: &[(&str, bool)]) -> Result<()> {
        for (name, set) in names {
            if *set {
                return Err(Error::InvalidInput(format!("parameter {name} does not apply to {}", self.case)));
            }
        }
        Ok(())
    }

    fn planar(&self) -> Result<()> {
        match self.n {
            None | Some(2) => Ok(()),
            Some(n) => Err(Error::InvalidInput(format!("{} is planar; got n = {n}", self.case))),
        }
    }

    pub fn ex61(&self) -> Result<Ex61> {
        self.planar()?;
        let d = Ex61::default();
        let e = Ex61 {
            direction: self.direction.unwrap_or(d.direction),
            grid: self.grid.unwrap_or(d.grid),
        };
        if e.direction[0] == 0.0 && e.direction[1] == 0.0 {
            return Err(Error::InvalidInput("direction must be non-zero".into()));
        }
        Ok(e)
    }

    pub fn ex62(&self) -> Result<Ex62> {
        self.planar()?;
        Ok(Ex62 {
            grid: self.grid.unwrap_or(Ex62::default().grid),
            ..Default::default()
        })
    }

    pub fn ex63(&self) -> Result<Ex63> {
        self.planar()?;
        let d = Ex63::default();
        let e = Ex63 {
            r: self.r.unwrap_or(d.r),
            beta: self.beta.unwrap_or(d.beta),
            gamma: self.gamma.unwrap_or(d.gamma),
            offset: 0.0,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn case1(&self) -> Result<Case1> {
        self.planar()?;
        let d = Case1::default();
        let c = Case1 {
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            p: self.p.unwrap_or(d.p),
            gamma: self.gamma,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn case2(&self) -> Result<Case2> {
        let d = Case2::default();
        let c = Case2 {
            n: self.n.unwrap_or(d.n),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            p: self.p.unwrap_or(d.p.max(self.n.unwrap_or(d.n) as f64 + 1.0)),
            beta1: self.beta1,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn case3(&self) -> Result<Case3> {
        let d = Case3::default();
        let n = self.n.unwrap_or(d.n);
        let c = Case3 {
            n,
            alpha: self.alpha.unwrap_or(d.alpha),
            p: self.p.unwrap_or(d.p.max(n as f64 + 1.0)),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn orlicz(&self) -> Result<AppendixOrlicz> {
        let d = AppendixOrlicz::default();
        let o = AppendixOrlicz {
            a: self.alpha.unwrap_or(d.a),
            b: self.beta.unwrap_or(d.b),
            gamma: self.gamma.unwrap_or(d.gamma),
        };
        o.validate()?;
        Ok(o)
    }

    /// Checks the parameters against the case's hypothesis ranges.
    pub fn validate(&self) -> Result<()> {
        let grid_only = self.mode == Representation::Grid;
        match self.case {
            CaseId::Ex61 => {
                self.reject(&[
                    ("alpha", self.alpha.is_some()),
                    ("beta1", self.beta1.is_some()),
                    ("p", self.p.is_some()),
                    ("gamma", self.gamma.is_some()),
                ])?;
                self.ex61().map(|_| ())
            }
            CaseId::Ex62 => {
                self.reject(&[
                    ("alpha", self.alpha.is_some()),
                    ("beta", self.beta.is_some()),
                    ("beta1", self.beta1.is_some()),
                    ("r", self.r.is_some()),
                    ("p", self.p.is_some()),
                    ("gamma", self.gamma.is_some()),
                    ("direction", self.direction.is_some()),
                ])?;
                self.ex62().map(|_| ())
            }
            CaseId::Ex63 => {
                self.reject(&[("alpha", self.alpha.is_some()), ("beta1", self.beta1.is_some()), ("p", self.p.is_some())])?;
                self.ex63().map(|_| ())
            }
            CaseId::JacCase1 => {
                self.reject(&[("beta1", self.beta1.is_some()), ("r", self.r.is_some())])?;
                self.case1().map(|_| ())
            }
            CaseId::JacCase2 => {
                self.reject(&[("r", self.r.is_some()), ("gamma", self.gamma.is_some())])?;
                self.case2().map(|_| ())
            }
            CaseId::JacCase3 => {
                self.reject(&[
                    ("beta", self.beta.is_some()),
                    ("beta1", self.beta1.is_some()),
                    ("r", self.r.is_some()),
                    ("gamma", self.gamma.is_some()),
                ])?;
                if grid_only {
                    return Err(Error::NotApplicable(
                        "jac_case3 frequencies are not grid-resolvable; use torus mode".into(),
                    ));
                }
                self.case3().map(|_| ())
            }
            CaseId::AppendixOrlicz => {
                self.reject(&[("beta1", self.beta1.is_some()), ("p", self.p.is_some()), ("r", self.r.is_some())])?;
                self.orlicz().map(|_| ())
            }
        }
    }

    fn grid_or(&self, d: usize) -> usize {
        self.grid.unwrap_or(d)
    }
}

/// One member of a sequence.
#[derive(Debug, Clone)]
pub enum SequenceTerm {
    DivCurl { v: GridField, v_tilde: GridField },
    JacobianTrig { u: TrigPoly, phi: TrigPoly },
    /// `du` is the exact row-major Jacobian of `u` sampled on the grid.
    JacobianGrid { u: GridField, du: GridField, phi: GridField },
}

pub fn make_sequence(spec: &SequenceSpec, index: usize) -> Result<SequenceTerm> {
    spec.validate()?;
    if index == 0 {
        return Err(Error::InvalidInput("index must be ≥ 1".into()));
    }
    Ok(match spec.case {
        CaseId::Ex61 => {
            let (v, v_tilde) = spec.ex61()?.fields(index);
            SequenceTerm::DivCurl { v, v_tilde }
        }
        CaseId::Ex62 => {
            let (v, v_tilde) = spec.ex62()?.fields(index);
            SequenceTerm::DivCurl { v, v_tilde }
        }
        CaseId::Ex63 => {
            let n = spec.grid_or(256);
            let (v, v_tilde) = spec.ex63()?.fields(&[n, n], &[2.0, 2.0])?;
            SequenceTerm::DivCurl { v, v_tilde }
        }
        CaseId::AppendixOrlicz => {
            let n = spec.grid_or(256);
            let (v, v_tilde) = spec.orlicz()?.fields(&[n, n], &[2.0, 2.0])?;
            SequenceTerm::DivCurl { v, v_tilde }
        }
        CaseId::JacCase1 => {
            let (u, du, phi) = spec.case1()?.grid_fields(index, spec.grid_or(256));
            SequenceTerm::JacobianGrid { u, du, phi }
        }
        CaseId::JacCase2 => {
            let c = spec.case2()?;
            match spec.mode {
                Representation::Torus => {
                    let (u, phi) = c.torus(index)?;
                    SequenceTerm::JacobianTrig { u, phi }
                }
                Representation::Grid => {
                    let (u, du, phi) = c.grid_fields(index, spec.grid_or(1024))?;
                    SequenceTerm::JacobianGrid { u, du, phi }
                }
            }
        }
        CaseId::JacCase3 => {
            let c = spec.case3()?;
            c.check_term_count(index, DEFAULT_TERM_CAP)?;
            let (u, phi) = c.polys(index)?;
            SequenceTerm::JacobianTrig { u, phi }
        }
    })
}

// ---------------------------------------------------------------------------
// Verdicts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Declared margins for finite-index verdicts, as fractions of the
/// sequence scale `max_j ∫|F_j||φ|`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictCriteria {
    /// Top-half Cauchy variation and distance to the limit at most this: converges.
    pub converge_tol: f64,
    /// Either quantity at least this: fails.
    pub fail_tol: f64,
    /// `|values|` strictly increasing with `last/first` at least this: escape.
    pub escape_ratio: f64,
    /// Bounded means `max ≤ factor × median` and no escape.
    pub bounded_factor: f64,
}

impl Default for VerdictCriteria {
    fn default() -> Self {
        Self {
            converge_tol: 0.05,
            fail_tol: 0.5,
            escape_ratio: 1.5,
            bounded_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingVerdict {
    pub verdict: Verdict,
    pub scale: f64,
    /// `max − min` over the top half of the indices, relative to the scale.
    pub variation: f64,
    /// `|last − limit|` relative to the scale.
    pub deviation: f64,
    pub escapes: bool,
}

fn escapes(values: &[f64], ratio: f64) -> bool {
    let a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    a.len() >= 2 && a.windows(2).all(|w| w[1] > w[0]) && a[a.len() - 1] >= ratio * a[0]
}

pub fn pairing_verdict(values: &[f64], limit: f64, scale: f64, c: &VerdictCriteria) -> PairingVerdict {
    let scale = scale.max(f64::MIN_POSITIVE);
    let top = &values[values.len() / 2..];
    let mx = top.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mn = top.iter().cloned().fold(f64::INFINITY, f64::min);
    let variation = (mx - mn) / scale;
    let deviation = (values[values.len() - 1] - limit).abs() / scale;
    let esc = escapes(values, c.escape_ratio);
    let verdict = if variation >= c.fail_tol || deviation >= c.fail_tol || esc {
        Verdict::Fails
    } else if variation <= c.converge_tol && deviation <= c.converge_tol {
        Verdict::Converges
    } else {
        Verdict::Inconclusive
    };
    PairingVerdict {
        verdict,
        scale,
        variation,
        deviation,
        escapes: esc,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundedVerdict {
    pub bounded: bool,
    pub max: f64,
    pub median: f64,
    pub escapes: bool,
}

pub fn bounded_verdict(values: &[f64], c: &VerdictCriteria) -> BoundedVerdict {
    let mut s: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    let median = if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) };
    let max = s[m - 1];
    let esc = escapes(values, c.escape_ratio);
    BoundedVerdict {
        bounded: max <= c.bounded_factor * median && !esc,
        max,
        median,
        escapes: esc,
    }
}

// ---------------------------------------------------------------------------
// Table 1

/// Sum of families, paired test by test.
struct SumFamily<'a> {
    parts: Vec<&'a dyn PairingFamily>,
}

impl PairingFamily for SumFamily<'_> {
    fn name(&self) -> String {
        self.parts.iter().map(|p| p.name()).collect::<Vec<_>>().join("+")
    }

    fn pair(&self, j: usize, test: &TestFunction) -> Result<(f64, f64)> {
        let mut acc = (0.0, 0.0);
        for p in &self.parts {
            let (a, b) = p.pair(j, test)?;
            acc.0 += a;
            acc.1 += b;
        }
        Ok(acc)
    }

    fn limit(&self, test: &TestFunction) -> Result<f64> {
        self.parts.iter().map(|p| p.limit(test)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeResult {
    pub verdict: Verdict,
    pub tests: Vec<PairingReport>,
    pub diagnostics: Vec<PairingVerdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyResult {
    pub verdict: Verdict,
    /// One sequence per component: local Hardy norms along the indices, or
    /// truncated `L log L` masses along the caps for a fixed profile.
    pub components: Vec<HardySequence>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HardySequence {
    pub label: String,
    pub indices: Vec<f64>,
    pub values: Vec<f64>,
    pub bounded: BoundedVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub scenario: String,
    pub description: String,
    pub verdict_m: ModeResult,
    pub verdict_l1: ModeResult,
    pub verdict_h1: HardyResult,
    /// `[M, L¹, H¹]` pattern expected for the scenario.
    pub expected: [Verdict; 3],
    pub matches_expected: bool,
}

impl Table1Row {
    pub fn verdicts(&self) -> [Verdict; 3] {
        [self.verdict_m.verdict, self.verdict_l1.verdict, self.verdict_h1.verdict]
    }
}

fn combine(vs: impl Iterator<Item = Verdict>) -> Verdict {
    let vs: Vec<Verdict> = vs.collect();
    if vs.contains(&Verdict::Fails) {
        Verdict::Fails
    } else if vs.iter().all(|v| *v == Verdict::Converges) {
        Verdict::Converges
    } else {
        Verdict::Inconclusive
    }
}

fn run_mode(family: &dyn PairingFamily, tests: &[TestFunction], js: &[usize], c: &VerdictCriteria) -> Result<ModeResult> {
    let mut reports = Vec::new();
    let mut diags = Vec::new();
    for t in tests {
        let r = pairing_experiment(family, t, js)?;
        let scale = r.abs_pairings.iter().cloned().fold(0.0, f64::max);
        diags.push(pairing_verdict(&r.pairings, r.limit, scale, c));
        reports.push(r);
    }
    Ok(ModeResult {
        verdict: combine(diags.iter().map(|d| d.verdict)),
        tests: reports,
        diagnostics: diags,
    })
}

fn hardy_sequence(label: &str, xs: Vec<f64>, values: Vec<f64>, c: &VerdictCriteria) -> HardySequence {
    HardySequence {
        label: label.into(),
        bounded: bounded_verdict(&values, c),
        indices: xs,
        values,
    }
}

fn hardy_result(m: Verdict, comps: Vec<HardySequence>) -> HardyResult {
    let verdict = if comps.iter().all(|s| s.bounded.bounded) { m } else { Verdict::Fails };
    HardyResult {
        verdict,
        components: comps,
    }
}

fn bump(center: [f64; 2], radius: f64) -> TestFunction {
    TestFunction::SmoothBump {
        center: center.to_vec(),
        radius,
    }
}

fn ball(center: [f64; 2], radius: f64) -> TestFunction {
    TestFunction::IndicatorBall {
        center: center.to_vec(),
        radius,
    }
}

fn rect(lo: [f64; 2], hi: [f64; 2]) -> TestFunction {
    TestFunction::IndicatorBox {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    }
}

fn ex63_masses(e: &Ex63, c: &VerdictCriteria) -> HardySequence {
    let caps: Vec<f64> = (1..=6).map(|i| 10f64.powi(i)).collect();
    let masses = caps.iter().map(|m| e.truncated_llogl(*m)).collect();
    hardy_sequence("ex63 truncated L log L mass", caps, masses, c)
}

fn ex62_hardy(e: &Ex62, js: &[usize], c: &VerdictCriteria) -> Result<HardySequence> {
    let vals = js.iter().map(|j| e.hardy(*j)).collect::<Result<Vec<_>>>()?;
    Ok(hardy_sequence(
        "ex62 local Hardy norm",
        js.iter().map(|j| *j as f64).collect(),
        vals,
        c,
    ))
}

pub const SCENARIOS: [&str; 4] = ["i", "ii", "iii", "iv"];

/// Runs one scenario of the verdict matrix.
pub fn table1_row(scenario: &str, c: &VerdictCriteria) -> Result<Table1Row> {
    use Verdict::{Converges as P, Fails as F};
    let (desc, m, l1, h1, expected) = match scenario {
        "i" => {
            let e = Ex61::default();
            let js: Vec<usize> = vec![2, 4, 8, 16, 32, 64];
            let m = run_mode(&e, &[bump([0.0, 0.0], 1.0)], &js, c)?;
            let l1 = run_mode(&e, &[rect([0.0, 0.0], [1.0, 1.0])], &js, c)?;
            let hv = js.iter().map(|j| e.hardy(*j)).collect::<Result<Vec<_>>>()?;
            let h = hardy_sequence("ex61 local Hardy norm", js.iter().map(|j| *j as f64).collect(), hv, c);
            ("ex61: concentrating square", m, l1, vec![h], [F, F, F])
        }
        "ii" => {
            let e62 = Ex62::default();
            let e63 = Ex63 {
                offset: 2.0,
                ..Default::default()
            };
            let fam = SumFamily {
                parts: vec![&e62, &e63],
            };
            let js: Vec<usize> = vec![4, 8, 16, 32];
            let m = run_mode(&fam, &[bump([0.0, 0.0], 1.5), bump([2.5, 0.0], 1.0)], &js, c)?;
            let l1 = run_mode(&fam, &[ball([0.0, 0.0], 0.5), rect([2.0, -1.0], [3.0, 1.0])], &js, c)?;
            let h = vec![ex62_hardy(&e62, &js, c)?, ex63_masses(&e63, c)];
            ("ex62 plus ex63 on disjoint supports", m, l1, h, [P, F, F])
        }
        "iii" => {
            let e = Ex62::default();
            let js: Vec<usize> = vec![4, 8, 16, 32];
            let m = run_mode(&e, &[bump([0.0, 0.0], 1.5), bump([0.3, 0.1], 1.2)], &js, c)?;
            let l1 = run_mode(&e, &[ball([0.0, 0.0], 0.5)], &js, c)?;
            let h = vec![ex62_hardy(&e, &js, c)?];
            ("ex62: circle concentration", m, l1, h, [P, F, P])
        }
        "iv" => {
            let e = Ex63::default();
            let js: Vec<usize> = vec![1, 2, 3, 4];
            let m = run_mode(&e, &[bump([0.5, 0.0], 1.0)], &js, c)?;
            let l1 = run_mode(&e, &[rect([0.0, -1.0], [1.0, 1.0])], &js, c)?;
            let h = vec![ex63_masses(&e, c)];
            ("ex63: fixed profile outside L log L", m, l1, h, [P, P, F])
        }
        _ => {
            return Err(Error::Unknown {
                name: scenario.into(),
                suggestion: closest(scenario, SCENARIOS.into_iter()),
            })
        }
    };
    let h1 = hardy_result(m.verdict, h1);
    let verdicts = [m.verdict, l1.verdict, h1.verdict];
    Ok(Table1Row {
        scenario: format!("({scenario})"),
        description: desc.into(),
        verdict_m: m,
        verdict_l1: l1,
        verdict_h1: h1,
        matches_expected: verdicts == expected,
        expected,
    })
}

pub fn table1(c: &VerdictCriteria) -> Result<Vec<Table1Row>> {
    SCENARIOS.iter().map(|s| table1_row(s, c)).collect()
}

// ---------------------------------------------------------------------------
// Case runs

#[derive(Debug, Clone, Serialize)]
pub struct Case3Report {
    pub rate: RateReport,
    pub pairings: Vec<Case3Pairing>,
    /// `pairing_k / ln k`.
    pub log_ratios: Vec<f64>,
    pub gaps: Vec<GapAudit>,
    pub norms: NormAudit,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivCurlReport {
    pub tests: Vec<PairingReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ex63Report {
    pub hypotheses: divcurl::Ex63Hypotheses,
    pub constraint_norm: f64,
    pub caps: Vec<f64>,
    pub truncated_masses: Vec<f64>,
    pub tests: Vec<PairingReport>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseReport {
    DivCurl(DivCurlReport),
    Ex63(Ex63Report),
    Case1(Case1Report),
    Rate(RateReport),
    Case3(Case3Report),
    Orlicz(OrliczReport),
}

fn default_tests(case: CaseId) -> Vec<TestFunction> {
    match case {
        CaseId::Ex61 => vec![bump([0.0, 0.0], 1.0), rect([0.0, 0.0], [1.0, 1.0])],
        CaseId::Ex62 => vec![bump([0.0, 0.0], 1.5), ball([0.0, 0.0], 0.5)],
        _ => vec![bump([0.5, 0.0], 1.0), rect([0.0, -1.0], [1.0, 1.0])],
    }
}

/// Runs a case over `indices`; `tests` overrides the default test bank for
/// the div-curl cases.
pub fn run_case(spec: &SequenceSpec, indices: &[usize], tests: Option<&[TestFunction]>) -> Result<CaseReport> {
    spec.validate()?;
    if indices.is_empty() || indices.contains(&0) {
        return Err(Error::InvalidInput("indices must be non-empty and ≥ 1".into()));
    }
    let bank = tests.map(|t| t.to_vec()).unwrap_or_else(|| default_tests(spec.case));
    let run_tests = |f: &dyn PairingFamily| -> Result<Vec<PairingReport>> {
        bank.iter().map(|t| pairing_experiment(f, t, indices)).collect()
    };
    Ok(match spec.case {
        CaseId::Ex61 => CaseReport::DivCurl(DivCurlReport {
            tests: run_tests(&spec.ex61()?)?,
        }),
        CaseId::Ex62 => CaseReport::DivCurl(DivCurlReport {
            tests: run_tests(&spec.ex62()?)?,
        }),
        CaseId::Ex63 => {
            let e = spec.ex63()?;
            let caps: Vec<f64> = (1..=6).map(|i| 10f64.powi(i)).collect();
            CaseReport::Ex63(Ex63Report {
                hypotheses: e.hypotheses(),
                constraint_norm: e.constraint_norm(),
                truncated_masses: caps.iter().map(|m| e.truncated_llogl(*m)).collect(),
                caps,
                tests: run_tests(&e)?,
            })
        }
        CaseId::JacCase1 => CaseReport::Case1(spec.case1()?.run(indices)?),
        CaseId::JacCase2 => {
            let c = spec.case2()?;
            CaseReport::Rate(match spec.mode {
                Representation::Torus => c.run_torus(indices)?,
                Representation::Grid => c.run_grid(indices, spec.grid_or(1024))?,
            })
        }
        CaseId::JacCase3 => {
            let c = spec.case3()?;
            let (rate, pairings) = c.run(indices, DEFAULT_TERM_CAP)?;
            let log_ratios = pairings
                .iter()
                .map(|r| if r.k > 1 { r.direct / (r.k as f64).ln() } else { f64::NAN })
                .collect();
            CaseReport::Case3(Case3Report {
                rate,
                log_ratios,
                gaps: indices.iter().map(|k| c.gap_audit(*k)).collect(),
                norms: c.norm_audit(indices)?,
                pairings,
            })
        }
        CaseId::AppendixOrlicz => CaseReport::Orlicz(spec.orlicz()?.run()?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_names_round_trip() {
        for c in CaseId::all() {
            assert_eq!(c.name().parse::<CaseId>().unwrap(), c);
            let j = serde_json::to_string(&c).unwrap();
            assert_eq!(j, format!("\"{}\"", c.name()));
        }
        match "jac_case4".parse::<CaseId>() {
            Err(Error::Unknown { suggestion, .. }) => assert!(suggestion.is_some()),
            other => panic!("{other:?}"),
        }
        assert!(CaseId::JacCase3.describe().contains("n_ℓ = k^{n²/α} 8^ℓ"));
    }

    #[test]
    fn spec_rejects_inapplicable_and_out_of_range() {
        let mut s = SequenceSpec::new(CaseId::JacCase2);
        s.p = Some(1.5);
        assert!(s.validate().is_err());
        let mut s = SequenceSpec::new(CaseId::JacCase3);
        s.mode = Representation::Grid;
        assert!(matches!(s.validate(), Err(Error::NotApplicable(_))));
        let mut s = SequenceSpec::new(CaseId::Ex61);
        s.alpha = Some(0.5);
        assert!(s.validate().is_err());
        let bad = r#"{"case":"ex61","colour":1}"#;
        assert!(serde_json::from_str::<SequenceSpec>(bad).is_err());
    }

    #[test]
    fn verdict_rules() {
        let c = VerdictCriteria::default();
        assert_eq!(pairing_verdict(&[1.0, 0.3, 0.03, 0.01], 0.0, 1.0, &c).verdict, Verdict::Converges);
        assert_eq!(pairing_verdict(&[1.0, 1.0, 1.0, 1.0], 0.0, 1.0, &c).verdict, Verdict::Fails);
        assert_eq!(pairing_verdict(&[1.0, 0.5, 0.2, 0.1], 0.0, 1.0, &c).verdict, Verdict::Inconclusive);
        assert!(bounded_verdict(&[1.0, 1.1, 0.9, 1.05], &c).bounded);
        assert!(!bounded_verdict(&[1.0, 1.3, 1.7, 2.2], &c).bounded);
    }

    #[test]
    fn ex61_sequence_term() {
        let mut s = SequenceSpec::new(CaseId::Ex61);
        s.grid = Some(64);
        match make_sequence(&s, 4).unwrap() {
            SequenceTerm::DivCurl { v, v_tilde } => {
                let m: f64 = (0..v.npoints())
                    .map(|p| v.at(p)[0] * v_tilde.at(p)[0])
                    .sum::<f64>()
                    * v.cell_volume();
                assert_eq!(m, 1.0);
            }
            _ => panic!("wrong term kind"),
        }
    }
}
