//! Names that `list` and `describe` know about.

use serde::Serialize;

use cclab::counterexamples::CaseId;

use crate::report::CliError;

pub const EXPERIMENTS: &[(&str, &str)] = &[
    (
        "check-rank",
        "Samples the unit sphere and reports whether the symbol A(ξ) has the same numerical rank everywhere.",
    ),
    (
        "decompose",
        "Splits random band-limited fields as v = Bu + A*w and reports reconstruction, constraint, \
         orthogonality and idempotence residuals.",
    ),
    (
        "pairing",
        "Pairs F(v_j) against test functions along a sequence and fits the decay of |pairing − limit|.",
    ),
    (
        "counterexample",
        "Runs a registered sharpness family over an index list: div-curl pairings, truncated L log L \
         masses, or Jacobian rates with closed forms and norm audits.",
    ),
    (
        "table1",
        "Verdict matrix of four scenarios against measure, L¹ and local Hardy convergence, with \
         declared 5%/50% margins.",
    ),
    (
        "truncate",
        "Lipschitz truncation of a spike ensemble over a range of λ: good-set identity, derivative \
         bound and bad-set volume ratio.",
    ),
    ("hardy", "Local Hardy norms of F(v_j) along a sequence, or of a dumped field."),
    (
        "extension-identity",
        "Checks ∫det(Du)φ against the half-space integral of det_{n+1}(DΦ, DU) for harmonic extensions \
         of random compactly supported data.",
    ),
    (
        "thmD",
        "Ratio of the determinant pairing difference to [φ]_α [u−v]_{W^{−1+β,s}} ([u]+[v])^{s−1} over an \
         oscillation and scaling ensemble, with an interpolation variant.",
    ),
    (
        "orlicz",
        "Orlicz pair φ = t² log^a(1+t), ψ = t² log^b(1+t): partner inversion, dominance checks and \
         divergence of the truncated product masses.",
    ),
];

pub const OPERATORS: &[(&str, &str)] = &[
    ("div2", "Divergence of a planar vector field."),
    ("curl2", "Scalar curl of a planar vector field."),
    ("divcurl2", "(v, ṽ) ↦ (div v, curl ṽ) on ℝ⁴ ordered (v₁, v₂, ṽ₁, ṽ₂)."),
    ("grad", "Gradient of a scalar; takes :n=<dim>."),
    ("curl_matrix_n", "Row-wise curl of an n×n matrix field; kernel fields are gradients. Takes :n=<dim>."),
    ("laplacian", "Scalar Laplacian; takes :n=<dim>."),
];

pub const INTEGRANDS: &[(&str, &str)] = &[
    ("det2", "Determinant of a row-major 2×2 matrix."),
    ("divcurl_dot", "v·ṽ for (v, ṽ) stacked."),
    ("sqnorm", "|v|², the non-quasiaffine control."),
    ("det", "n×n determinant."),
    ("minor", "Minor of an m×n matrix."),
];

pub const NORM_TAGS: &[(&str, &str)] = &[
    ("Lebesgue", "‖f‖_{L^p}."),
    ("Zygmund", "Luxemburg norm for t^p log^α(e+t)."),
    ("Orlicz", "Luxemburg norm for a Young function."),
    ("NegSobolev", "‖|ξ|^{-l} f̂‖ in an inner norm."),
    ("Gagliardo", "W^{β,p} seminorm."),
    ("Holder", "C^{0,α} seminorm by grid maximum or dyadic blocks."),
    ("LocalHardy", "∫_{B_R} sup_t |f ∗ φ_t|."),
];

pub const TEST_FUNCTIONS: &[(&str, &str)] = &[
    ("bump", "Smooth bump of radius r. Syntax bump:cx,cy,r."),
    ("box", "Indicator of [x0,x1)×[y0,y1). Syntax box:x0,y0,x1,y1."),
    ("ball", "Indicator of a ball. Syntax ball:cx,cy,r."),
    ("cusp", "(1 − |x−c|/r)₊^a. Syntax cusp:cx,cy,r,a."),
    ("const", "Constant. Syntax const:v."),
];

#[derive(Debug, Serialize)]
pub struct Entry {
    pub id: String,
    pub kind: &'static str,
    pub description: String,
}

fn entries(kind: &'static str, items: &[(&str, &str)]) -> Vec<Entry> {
    items
        .iter()
        .map(|(id, d)| Entry {
            id: (*id).into(),
            kind,
            description: (*d).into(),
        })
        .collect()
}

pub fn all() -> Vec<Entry> {
    let mut out = entries("experiment", EXPERIMENTS);
    out.extend(CaseId::all().into_iter().map(|c| Entry {
        id: c.name().into(),
        kind: "sequence",
        description: c.describe().into(),
    }));
    out.push(Entry {
        id: "oscillation".into(),
        kind: "sequence",
        description: "v_j = (sin jx₁, 0), ṽ_j = (sin jx₂, 0) on the 2π-torus; both tend weakly to zero.".into(),
    });
    out.extend(entries("operator", OPERATORS));
    out.extend(entries("integrand", INTEGRANDS));
    out.extend(entries("norm_tag", NORM_TAGS));
    out.extend(entries("test_function", TEST_FUNCTIONS));
    out
}

pub fn describe(id: &str) -> Result<Entry, CliError> {
    let all = all();
    let names: Vec<String> = all.iter().map(|e| e.id.clone()).collect();
    all.into_iter().find(|e| e.id == id).ok_or_else(|| {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        CliError::unknown(id, &refs)
    })
}
