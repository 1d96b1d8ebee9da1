//! Lipschitz truncation by maximal-function thresholding and Whitney
//! extension, on a non-periodic box.
//!
//! The grid of a [`GridField`] is read as the box `[0, L)ⁿ` sampled at
//! `x_k = k·L/N`; data are extended by zero outside the box when forming
//! cube averages. Supported: `n ∈ {1, 2}`, `k ∈ {1, 2}`, square grids whose
//! side is a power of two.

use std::collections::VecDeque;

use serde::Serialize;

use crate::field::GridField;
use crate::{Error, Result};

pub const DEFAULT_DERIV_CONSTANT: f64 = 64.0;
const DILATION: f64 = 9.0 / 8.0;

fn check_domain(v: &GridField, k: usize) -> Result<usize> {
    let n = v.n();
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidInput(format!("truncation supports n ∈ {{1,2}}, got {n}")));
    }
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidInput(format!("truncation supports k ∈ {{1,2}}, got {k}")));
    }
    let side = v.shape[0];
    if !side.is_power_of_two() || side < 8 || v.shape.iter().any(|s| *s != side) {
        return Err(Error::InvalidInput("truncation needs a square power-of-two grid (side ≥ 8)".into()));
    }
    if v.period.iter().any(|p| (p - v.period[0]).abs() > 1e-12 * p) {
        return Err(Error::InvalidInput("truncation needs equal box sides".into()));
    }
    Ok(side)
}

/// First derivative along an axis: central differences inside, second-order
/// one-sided stencils at the two ends.
fn diff1(line: &[f64], h: f64, out: &mut [f64]) {
    let m = line.len();
    for i in 1..m - 1 {
        out[i] = (line[i + 1] - line[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * line[0] + 4.0 * line[1] - line[2]) / (2.0 * h);
    out[m - 1] = (3.0 * line[m - 1] - 4.0 * line[m - 2] + line[m - 3]) / (2.0 * h);
}

/// Applies a 1D stencil routine along `axis` to every component.
fn along_axis(v: &GridField, axis: usize, op: impl Fn(&[f64], &mut [f64])) -> GridField {
    let n = v.n();
    let side = v.shape[0];
    let d = v.dim_v;
    let stride = if n == 2 && axis == 0 { side } else { 1 };
    let lines = v.npoints() / side;
    let mut out = GridField::zeros(&v.shape, &v.period, d);
    let mut buf = vec![0.0; side];
    let mut res = vec![0.0; side];
    for l in 0..lines {
        let base = if stride == 1 { l * side } else { l };
        for c in 0..d {
            for i in 0..side {
                buf[i] = v.values[(base + i * stride) * d + c];
            }
            op(&buf, &mut res);
            for i in 0..side {
                out.values[(base + i * stride) * d + c] = res[i];
            }
        }
    }
    out
}

/// All partial derivatives up to order `k`. Entry `[0]` is `v` itself,
/// `[1]` holds `∂_a v` for each axis, `[2]` holds `∂_a∂_b v` for `a ≤ b`.
pub struct Derivatives {
    pub orders: Vec<Vec<GridField>>,
}

pub fn finite_differences(v: &GridField, k: usize) -> Derivatives {
    let h = v.spacing()[0];
    let n = v.n();
    let first: Vec<GridField> = (0..n).map(|a| along_axis(v, a, |l, o| diff1(l, h, o))).collect();
    let mut orders = vec![vec![v.clone()], first.clone()];
    if k >= 2 {
        let mut second = Vec::new();
        for a in 0..n {
            for b in a..n {
                second.push(along_axis(&first[a], b, |l, o| diff1(l, h, o)));
            }
        }
        orders.push(second);
    }
    Derivatives { orders }
}

impl Derivatives {
    /// `Σ_i |Dⁱv|` pointwise, Euclidean norms over components and indices;
    /// mixed second derivatives are counted twice (`∂₁∂₂ = ∂₂∂₁`).
    pub fn magnitude_sum(&self, n: usize) -> Vec<f64> {
        let npts = self.orders[0][0].npoints();
        (0..npts)
            .map(|p| (0..self.orders.len()).map(|o| self.order_magnitude(o, n, p)).sum())
            .collect()
    }

    fn order_magnitude(&self, ord: usize, n: usize, p: usize) -> f64 {
        let d = self.orders[0][0].dim_v;
        let mut s = 0.0;
        let mut idx = 0;
        for a in 0..if ord == 0 { 1 } else { n } {
            let bs: Vec<usize> = if ord == 2 { (a..n).collect() } else { vec![0] };
            for b in bs {
                let w = if ord == 2 && a != b { 2.0 } else { 1.0 };
                s += w * (0..d).map(|c| self.orders[ord][idx].values[p * d + c].powi(2)).sum::<f64>();
                idx += 1;
            }
        }
        s.sqrt()
    }
}

/// Discrete maximal function: the largest average of `f` over the cubes
/// `[x − r, x + r]ⁿ` with radii `r = 0, h, 2h, 4h, …` up to the box side,
/// `f` extended by zero outside the box (averages divide by the full cube
/// volume).
pub fn cube_maximal(f: &[f64], side: usize, n: usize) -> Vec<f64> {
    let mut radii = vec![0usize];
    let mut r = 1;
    while r <= side {
        radii.push(r);
        r *= 2;
    }
    let mut out = f.to_vec();
    if n == 1 {
        let mut pre = vec![0.0; side + 1];
        for i in 0..side {
            pre[i + 1] = pre[i] + f[i];
        }
        for &r in &radii[1..] {
            let w = (2 * r + 1) as f64;
            for i in 0..side {
                let lo = i.saturating_sub(r);
                let hi = (i + r + 1).min(side);
                out[i] = out[i].max((pre[hi] - pre[lo]) / w);
            }
        }
    } else {
        let s1 = side + 1;
        let mut sat = vec![0.0; s1 * s1];
        for i in 0..side {
            for j in 0..side {
                sat[(i + 1) * s1 + j + 1] = f[i * side + j] + sat[i * s1 + j + 1] + sat[(i + 1) * s1 + j] - sat[i * s1 + j];
            }
        }
        for &r in &radii[1..] {
            let w = ((2 * r + 1) * (2 * r + 1)) as f64;
            for i in 0..side {
                let (i0, i1) = (i.saturating_sub(r), (i + r + 1).min(side));
                for j in 0..side {
                    let (j0, j1) = (j.saturating_sub(r), (j + r + 1).min(side));
                    let s = sat[i1 * s1 + j1] - sat[i0 * s1 + j1] - sat[i1 * s1 + j0] + sat[i0 * s1 + j0];
                    let p = i * side + j;
                    out[p] = out[p].max(s / w);
                }
            }
        }
    }
    out
}

fn neighbours(p: usize, side: usize, n: usize, radius: usize) -> Vec<usize> {
    let r = radius as isize;
    let s = side as isize;
    let mut out = Vec::new();
    if n == 1 {
        let i = p as isize;
        for di in -r..=r {
            if (0..s).contains(&(i + di)) {
                out.push((i + di) as usize);
            }
        }
    } else {
        let (i, j) = ((p / side) as isize, (p % side) as isize);
        for di in -r..=r {
            for dj in -r..=r {
                let (a, b) = (i + di, j + dj);
                if (0..s).contains(&a) && (0..s).contains(&b) {
                    out.push((a * s + b) as usize);
                }
            }
        }
    }
    out
}

/// Adds every cell within Chebyshev distance `radius` of the mask.
pub fn dilate(mask: &[bool], side: usize, n: usize, radius: usize) -> Vec<bool> {
    let mut out = mask.to_vec();
    for (p, m) in mask.iter().enumerate() {
        if *m {
            for q in neighbours(p, side, n, radius) {
                out[q] = true;
            }
        }
    }
    out
}

/// Chebyshev distance (in cells) to the nearest good cell, and that cell.
fn distance_to_good(bad: &[bool], side: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let npts = bad.len();
    let mut dist = vec![usize::MAX; npts];
    let mut src = vec![usize::MAX; npts];
    let mut queue = VecDeque::new();
    for p in 0..npts {
        if !bad[p] {
            dist[p] = 0;
            src[p] = p;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        for q in neighbours(p, side, n, 1) {
            if dist[q] == usize::MAX {
                dist[q] = dist[p] + 1;
                src[q] = src[p];
                queue.push_back(q);
            }
        }
    }
    (dist, src)
}

#[derive(Debug, Clone, Serialize)]
pub struct WhitneyCube {
    /// Lower corner in cell indices.
    pub origin: Vec<usize>,
    /// Side in cells.
    pub side: usize,
    /// Chebyshev cell distance from the cube to the good set.
    pub dist: usize,
    /// Good cell whose Taylor polynomial the cube carries.
    pub anchor: usize,
}

fn cube_cells(origin: &[usize], s: usize, side: usize) -> Vec<usize> {
    if origin.len() == 1 {
        (origin[0]..origin[0] + s).collect()
    } else {
        let mut out = Vec::with_capacity(s * s);
        for i in origin[0]..origin[0] + s {
            for j in origin[1]..origin[1] + s {
                out.push(i * side + j);
            }
        }
        out
    }
}

/// Dyadic decomposition of the bad set: a cube is kept when all its cells
/// are bad and its side does not exceed its distance to the good set.
pub fn whitney_cubes(bad: &[bool], side: usize, n: usize) -> Vec<WhitneyCube> {
    let (dist, src) = distance_to_good(bad, side, n);
    let mut out = Vec::new();
    let mut stack = vec![(vec![0usize; n], side)];
    while let Some((origin, s)) = stack.pop() {
        let cells = cube_cells(&origin, s, side);
        if cells.iter().all(|c| !bad[*c]) {
            continue;
        }
        let all_bad = cells.iter().all(|c| bad[*c]);
        let (dmin, closest) = cells
            .iter()
            .map(|c| (dist[*c], *c))
            .min()
            .expect("non-empty cube");
        if all_bad && s <= dmin {
            out.push(WhitneyCube {
                origin,
                side: s,
                dist: dmin,
                anchor: src[closest],
            });
            continue;
        }
        let h = s / 2;
        if n == 1 {
            stack.push((vec![origin[0]], h));
            stack.push((vec![origin[0] + h], h));
        } else {
            for (a, b) in [(0, 0), (0, h), (h, 0), (h, h)] {
                stack.push((vec![origin[0] + a, origin[1] + b], h));
            }
        }
    }
    out
}

fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Three random smooth spikes of height 1–10 and width 0.02–0.08, keyed by
/// `(seed, index)`. In 1D the box is `[0, 16)` on 8192 points so that
/// box-sized averages stay small far from the spikes; in 2D it is the unit
/// square on 64².
pub fn random_spikes(seed: u64, index: u64, n: usize) -> Result<GridField> {
    use rand::Rng;
    let (side, len) = match n {
        1 => (8192, 16.0),
        2 => (64, 1.0),
        _ => return Err(Error::InvalidInput(format!("truncation supports n ∈ {{1,2}}, got {n}"))),
    };
    let mut rng = crate::rng::keyed_rng(seed, "random_spikes", index * 2 + n as u64);
    let spikes: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let c: Vec<f64> = (0..n).map(|_| len * rng.random_range(0.4..0.6)).collect();
            (c, rng.random_range(1.0..10.0), rng.random_range(0.02..0.08))
        })
        .collect();
    Ok(GridField::scalar_fn(&vec![side; n], &vec![len; n], |x| {
        spikes
            .iter()
            .map(|(c, h, w)| {
                let r2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                h * bump(r2.sqrt() / w) * 1f64.exp()
            })
            .sum()
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct WhitneyInfo {
    pub cube_count: usize,
    /// Extremes of `dist / side` over cubes.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max |Σ ψ_Q − 1|` over bad cells after normalisation.
    pub partition_defect: f64,
}

/// Rebuilds `v` on the bad cells from degree-`k` Taylor polynomials of the
/// nearest good points, glued by a normalised partition of unity of
/// product bumps on the 9/8-dilated Whitney cubes. Good cells are copied.
pub fn whitney_extend(v: &GridField, bad: &[bool], k: usize) -> Result<(GridField, Vec<WhitneyCube>, WhitneyInfo)> {
    let side = check_domain(v, k)?;
    if bad.len() != v.npoints() {
        return Err(Error::Dimension("mask size".into()));
    }
    if bad.iter().all(|b| *b) {
        return Err(Error::TrivialTruncation);
    }
    let n = v.n();
    let d = v.dim_v;
    let h = v.spacing()[0];
    let derivs = finite_differences(v, k);
    let cubes = whitney_cubes(bad, side, n);
    let npts = v.npoints();
    let mut contrib: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    let idx = |p: usize| -> Vec<usize> {
        if n == 1 {
            vec![p]
        } else {
            vec![p / side, p % side]
        }
    };
    for q in &cubes {
        let centre: Vec<f64> = q.origin.iter().map(|o| *o as f64 + (q.side as f64 - 1.0) / 2.0).collect();
        let half = DILATION * q.side as f64 / 2.0;
        let reach = half.ceil() as isize;
        let a = idx(q.anchor);
        let lo: Vec<isize> = centre.iter().map(|c| (c.floor() as isize - reach).max(0)).collect();
        let hi: Vec<isize> = centre.iter().map(|c| (c.ceil() as isize + reach).min(side as isize - 1)).collect();
        let mut visit = |cell: &[isize]| {
            let p = if n == 1 { cell[0] as usize } else { cell[0] as usize * side + cell[1] as usize };
            if !bad[p] {
                return;
            }
            let w: f64 = cell.iter().zip(&centre).map(|(c, m)| bump((*c as f64 - m) / half)).product();
            if w == 0.0 {
                return;
            }
            let dx: Vec<f64> = cell.iter().zip(&a).map(|(c, an)| (*c - *an as isize) as f64 * h).collect();
            let mut vals = vec![0.0; d];
            for (c, out) in vals.iter_mut().enumerate() {
                let mut val = derivs.orders[0][0].values[q.anchor * d + c];
                for (ax, dxa) in dx.iter().enumerate() {
                    val += derivs.orders[1][ax].values[q.anchor * d + c] * dxa;
                }
                if k >= 2 {
                    let mut i2 = 0;
                    for ax in 0..n {
                        for bx in ax..n {
                            let hess = derivs.orders[2][i2].values[q.anchor * d + c];
                            let sym = if ax == bx { 0.5 } else { 1.0 };
                            val += sym * hess * dx[ax] * dx[bx];
                            i2 += 1;
                        }
                    }
                }
                *out = val;
            }
            contrib.push((p, w, vals));
        };
        if n == 1 {
            for i in lo[0]..=hi[0] {
                visit(&[i]);
            }
        } else {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    visit(&[i, j]);
                }
            }
        }
    }
    let mut den = vec![0.0; npts];
    for (p, w, _) in &contrib {
        den[*p] += w;
    }
    if (0..npts).any(|p| bad[p] && den[p] <= 0.0) {
        return Err(Error::InvalidInput("bad cell not covered by any Whitney cube".into()));
    }
    let mut u = v.clone();
    let mut unity = vec![0.0; npts];
    for p in (0..npts).filter(|p| bad[*p]) {
        u.values[p * d..(p + 1) * d].iter_mut().for_each(|x| *x = 0.0);
    }
    for (p, w, vals) in &contrib {
        let psi = w / den[*p];
        unity[*p] += psi;
        for (c, val) in vals.iter().enumerate() {
            u.values[p * d + c] += psi * val;
        }
    }
    let defect = (0..npts)
        .filter(|p| bad[*p])
        .map(|p| (unity[p] - 1.0).abs())
        .fold(0.0, f64::max);
    let ratios: Vec<f64> = cubes.iter().map(|q| q.dist as f64 / q.side as f64).collect();
    let info = WhitneyInfo {
        cube_count: cubes.len(),
        min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        partition_defect: defect,
    };
    Ok((u, cubes, info))
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationResult {
    #[serde(skip)]
    pub truncated: GridField,
    #[serde(skip)]
    pub bad_set: Vec<bool>,
    pub lambda: f64,
    pub k: usize,
    pub p: f64,
    /// `‖D^k u‖_∞ / λ`.
    pub measured_deriv_bound: f64,
    /// `|bad| λ^p / ∫_{f>λ} Σ_i |Dⁱv|^p`.
    pub measured_volume_constant: f64,
    pub bad_measure: f64,
    /// `max |u − v|` over good cells (0 by construction).
    pub good_set_max_diff: f64,
    /// `{Dⁱu ≠ Dⁱv} ⊆ bad set dilated by the difference stencil`.
    pub chain_inclusion: bool,
    /// `Σ_i ‖Dⁱ(v − u)‖_p^p`.
    pub wkp_difference: f64,
    pub whitney: Option<WhitneyInfo>,
    pub deriv_constant: f64,
    pub deriv_bound_ok: bool,
}

/// Lipschitz truncation at level `λ`.
pub fn lipschitz_truncate(v: &GridField, lambda: f64, k: usize, p: f64) -> Result<TruncationResult> {
    let side = check_domain(v, k)?;
    if !(lambda > 0.0 && lambda.is_finite()) || !(p >= 1.0) {
        return Err(Error::InvalidInput("need λ > 0 and p ≥ 1".into()));
    }
    let n = v.n();
    let dv = v.cell_volume();
    let dv_derivs = finite_differences(v, k);
    let f = dv_derivs.magnitude_sum(n);
    let m = cube_maximal(&f, side, n);
    let raw: Vec<bool> = m.iter().map(|x| *x > 2.0 * lambda).collect();
    let bad = if raw.iter().any(|b| *b) { dilate(&raw, side, n, 1) } else { raw };
    let (u, whitney) = if bad.iter().any(|b| *b) {
        let (u, _, info) = whitney_extend(v, &bad, k)?;
        (u, Some(info))
    } else {
        (v.clone(), None)
    };

    let du = finite_differences(&u, k);
    let npts = v.npoints();
    let top = (0..npts).map(|q| du.order_magnitude(k, n, q)).fold(0.0, f64::max);
    let bad_measure = bad.iter().filter(|b| **b).count() as f64 * dv;
    let denom: f64 = (0..npts)
        .filter(|q| f[*q] > lambda)
        .map(|q| (0..=k).map(|o| dv_derivs.order_magnitude(o, n, q).powf(p)).sum::<f64>())
        .sum::<f64>()
        * dv;
    let good_diff = (0..npts)
        .filter(|q| !bad[*q])
        .flat_map(|q| (0..v.dim_v).map(move |c| q * v.dim_v + c))
        .map(|i| (u.values[i] - v.values[i]).abs())
        .fold(0.0, f64::max);
    let stencil = dilate(&bad, side, n, 2 * k);
    let diff = u.sub(v)?;
    let dd = finite_differences(&diff, k);
    let mut chain = true;
    let mut wkp = 0.0;
    for q in 0..npts {
        for o in 0..=k {
            let mag = dd.order_magnitude(o, n, q);
            wkp += mag.powf(p) * dv;
            if mag > 0.0 && !stencil[q] {
                chain = false;
            }
        }
    }
    let measured_deriv_bound = top / lambda;
    Ok(TruncationResult {
        truncated: u,
        bad_set: bad,
        lambda,
        k,
        p,
        measured_deriv_bound,
        measured_volume_constant: if denom > 0.0 {
            bad_measure * lambda.powf(p) / denom
        } else if bad_measure == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
        bad_measure,
        good_set_max_diff: good_diff,
        chain_inclusion: chain,
        wkp_difference: wkp,
        whitney,
        deriv_constant: DEFAULT_DERIV_CONSTANT,
        deriv_bound_ok: measured_deriv_bound <= DEFAULT_DERIV_CONSTANT,
    })
}

/// Largest value of `f = Σ_i |Dⁱv|` (used to pick λ ranges).
pub fn data_sup(v: &GridField, k: usize) -> Result<f64> {
    check_domain(v, k)?;
    Ok(finite_differences(v, k).magnitude_sum(v.n()).into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spike(side: usize, height: f64, width: f64) -> GridField {
        GridField::scalar_fn(&[side], &[1.0], |x| {
            let t = (x[0] - 0.5) / width;
            0.1 + height * bump(t)
        })
    }

    #[test]
    fn threshold_above_data_is_identity() {
        let v = spike(256, 2.0, 0.1);
        let fmax = data_sup(&v, 1).unwrap();
        let r = lipschitz_truncate(&v, fmax, 1, 2.0).unwrap();
        assert!(r.bad_set.iter().all(|b| !b));
        assert_eq!(r.truncated, v);
    }

    #[test]
    fn spike_truncation_invariants() {
        let v = spike(1024, 10.0, 1.0 / 64.0);
        let fmax = data_sup(&v, 1).unwrap();
        let r = lipschitz_truncate(&v, fmax / 50.0, 1, 2.0).unwrap();
        assert!(r.bad_measure > 0.0);
        assert_eq!(r.good_set_max_diff, 0.0);
        assert!(r.chain_inclusion);
        assert!(r.deriv_bound_ok, "{}", r.measured_deriv_bound);
        let w = r.whitney.unwrap();
        assert!(w.min_ratio >= 1.0 && w.max_ratio <= 4.0, "{w:?}");
    }

    #[test]
    fn linear_is_fixed_point() {
        let v = GridField::scalar_fn(&[64, 64], &[1.0, 1.0], |x| 1.0 + 3.0 * x[0] - 2.0 * x[1]);
        let bad: Vec<bool> = (0..v.npoints())
            .map(|p| {
                let (i, j) = (p / 64, p % 64);
                (20..40).contains(&i) && (10..50).contains(&j)
            })
            .collect();
        let (u, _, info) = whitney_extend(&v, &bad, 1).unwrap();
        assert!(u.sub(&v).unwrap().max_abs() < 1e-10);
        assert!(info.partition_defect < 1e-12);
    }

    #[test]
    fn quadratic_is_fixed_point_for_k2() {
        let v = GridField::scalar_fn(&[128], &[2.0], |x| 1.0 - x[0] + 0.5 * x[0] * x[0]);
        let bad: Vec<bool> = (0..128).map(|i| (40..90).contains(&i)).collect();
        let (u, _, _) = whitney_extend(&v, &bad, 2).unwrap();
        assert!(u.sub(&v).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn everything_bad_errors() {
        let v = GridField::scalar_fn(&[32], &[1.0], |_| 5.0);
        assert!(matches!(lipschitz_truncate(&v, 1e-3, 1, 2.0), Err(Error::TrivialTruncation)));
    }
}
