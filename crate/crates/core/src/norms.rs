//! Norms and seminorms of the discrepancy function
//! `D(x) = #{z in P : z < x}/N - x_1 ... x_d`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::Scalar;
use crate::error::{invalid, Error, Result};
use crate::haar::{volume_tail_sums, volume_tail_sums_exact, HaarLevel, HaarTable, TailWeight};
use crate::points::DyadicPointSet;

/// Largest point count for which `Arithmetic::Auto` picks rationals.
pub const EXACT_AUTO_LIMIT: u64 = 256;

/// Grid cells `lp_grid` may visit.
pub const LP_CELL_CAP: u64 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Lp,
    LinfStar,
    BmoDyadic,
    D0Projection,
    Besov,
    TriebelBracket,
    OrliczExp,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::Lp => "lp",
            NormKind::LinfStar => "linf_star",
            NormKind::BmoDyadic => "bmo_dyadic",
            NormKind::D0Projection => "d0_projection",
            NormKind::Besov => "besov",
            NormKind::TriebelBracket => "triebel_bracket",
            NormKind::OrliczExp => "orlicz_exp",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "l2" => NormKind::L2,
            "lp" => NormKind::Lp,
            "linf_star" | "star" | "linf" => NormKind::LinfStar,
            "bmo_dyadic" | "bmo" => NormKind::BmoDyadic,
            "d0_projection" | "d0" => NormKind::D0Projection,
            "besov" => NormKind::Besov,
            "triebel_bracket" | "triebel" => NormKind::TriebelBracket,
            "orlicz_exp" | "orlicz" => NormKind::OrliczExp,
            other => return Err(invalid(format!("unknown norm kind {other:?}"))),
        })
    }
}

/// How a reported value relates to the quantity it stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Exact,
    /// Numerically approximated (quadrature, rounding).
    Approximate,
    /// A lower estimate of the full supremum.
    Lower,
    /// Lower end of an embedding bracket.
    BracketLower,
    /// Upper end of an embedding bracket.
    BracketUpper,
    /// Representative of a norm defined only up to equivalence.
    Equivalent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NormParams {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Truncation {
    pub box_limit: u32,
    /// Closed-form contribution of the levels outside the stored box (in the
    /// summed, pre-root quantity).
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub params: NormParams,
    pub value: f64,
    /// Exact square of `value` as `num/den`, when computed in rationals.
    pub exact_squared: Option<String>,
    pub method: String,
    pub truncation: Option<Truncation>,
    pub bound: Bound,
    pub error_proxy: Option<f64>,
    pub n_points: u64,
    pub dim: usize,
}

impl NormReport {
    fn new(kind: NormKind, method: &str, value: f64, n_points: u64, dim: usize) -> Self {
        Self {
            kind,
            params: NormParams::default(),
            value,
            exact_squared: None,
            method: method.to_string(),
            truncation: None,
            bound: Bound::Exact,
            error_proxy: None,
            n_points,
            dim,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Rationals up to `EXACT_AUTO_LIMIT` points, floats beyond.
    #[default]
    Auto,
    Exact,
    Float,
}

impl Arithmetic {
    fn exact_for(self, n: u64) -> bool {
        match self {
            Arithmetic::Auto => n <= EXACT_AUTO_LIMIT,
            Arithmetic::Exact => true,
            Arithmetic::Float => false,
        }
    }
}

fn nonempty(p: &DyadicPointSet) -> Result<()> {
    if p.is_empty() {
        Err(invalid("point set is empty"))
    } else {
        Ok(())
    }
}

fn require_support(t: &HaarTable) -> Result<()> {
    if !t.covers_counting_support() {
        return Err(invalid(format!(
            "box limit {} is below the point precision {}",
            t.box_limit(),
            t.precision_bits()
        )));
    }
    Ok(())
}

fn rational_sqrt_report(mut r: NormReport, sq: &BigRational) -> NormReport {
    r.value = Scalar::to_f64(sq).max(0.0).sqrt();
    r.exact_squared = Some(sq.to_string());
    r
}

/// Squared L2 norm by the closed form over point pairs.
pub fn l2_warnock_squared_exact(p: &DyadicPointSet) -> Result<BigRational> {
    nonempty(p)?;
    let d = p.dim();
    let b = p.precision_bits();
    let n = p.len();
    let one = BigInt::one() << b;
    let one_sq = BigInt::one() << (2 * b);
    // sum_k prod_i (1 - z^2) at scale 2^(2bd)
    let s1: BigInt = p
        .iter()
        .map(|x| {
            x.iter().fold(BigInt::one(), |acc, &z| {
                let z = BigInt::from(z);
                acc * (&one_sq - &z * &z)
            })
        })
        .sum();
    // sum_{k,l} prod_i (1 - max) at scale 2^(bd)
    let s2: BigInt = (0..n)
        .into_par_iter()
        .map(|k| {
            let xk = p.point(k);
            let mut row = BigInt::zero();
            for l in 0..n {
                let xl = p.point(l);
                let mut prod = BigInt::one();
                for i in 0..d {
                    prod *= &one - BigInt::from(xk[i].max(xl[i]));
                }
                row += prod;
            }
            row
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let nb = BigInt::from(n as u64);
    let third = BigRational::new(BigInt::one(), BigInt::from(3u32).pow(d as u32));
    let t1 = BigRational::new(s1, &nb << (2 * b as usize * d + d - 1));
    let t2 = BigRational::new(s2, (&nb * &nb) << (b as usize * d));
    Ok(third - t1 + t2)
}

pub fn l2_warnock_squared_f64(p: &DyadicPointSet) -> Result<f64> {
    nonempty(p)?;
    let d = p.dim();
    let n = p.len();
    let z: Vec<f64> = (0..n * d).map(|i| p.coordinate_f64(i / d, i % d)).collect();
    let s1: f64 = (0..n)
        .map(|k| z[k * d..(k + 1) * d].iter().map(|&x| (1.0 - x * x) / 2.0).product::<f64>())
        .sum();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let xk = &z[k * d..(k + 1) * d];
            (0..n)
                .map(|l| {
                    let xl = &z[l * d..(l + 1) * d];
                    xk.iter().zip(xl).map(|(a, b)| 1.0 - a.max(*b)).product::<f64>()
                })
                .sum()
        })
        .collect();
    let s2: f64 = rows.iter().sum();
    let nf = n as f64;
    Ok((3f64).powi(-(d as i32)) - 2.0 / nf * s1 + s2 / (nf * nf))
}

/// L2 norm of `D` from pairwise point interactions.
pub fn l2_warnock(p: &DyadicPointSet, arith: Arithmetic) -> Result<NormReport> {
    let n = p.len() as u64;
    let r = NormReport::new(NormKind::L2, "warnock", 0.0, n, p.dim());
    if arith.exact_for(n) {
        Ok(rational_sqrt_report(r, &l2_warnock_squared_exact(p)?))
    } else {
        let sq = l2_warnock_squared_f64(p)?;
        Ok(NormReport {
            value: sq.max(0.0).sqrt(),
            bound: Bound::Approximate,
            ..r
        })
    }
}

/// Exact Parseval sum over the stored levels (all, or only `j >= 0`) plus the
/// closed-form tail.
fn parseval_squared_exact(t: &HaarTable, positive_only: bool) -> (BigRational, BigRational) {
    let stored: BigRational = t
        .levels()
        .par_iter()
        .filter(|l| !positive_only || l.is_positive())
        .map(|l| t.level_energy::<BigRational>(l))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(<BigRational as Zero>::zero(), |a, b| a + b);
    let tail = volume_tail_sums_exact(t.box_limit(), t.dim(), positive_only);
    (stored + tail.clone(), tail)
}

/// L2 norm by Parseval over the Haar table.
pub fn l2_parseval(t: &HaarTable, arith: Arithmetic) -> Result<NormReport> {
    require_support(t)?;
    if arith.exact_for(t.n_points()) {
        let (sq, tail) = parseval_squared_exact(t, false);
        let mut r = NormReport::new(NormKind::L2, "parseval", 0.0, t.n_points(), t.dim());
        r.truncation = Some(Truncation {
            box_limit: t.box_limit(),
            tail: Scalar::to_f64(&tail),
        });
        Ok(rational_sqrt_report(r, &sq))
    } else {
        let (value, tail) = besov_core(t, 2.0, 2.0, 0.0)?;
        let mut r = NormReport::new(NormKind::L2, "parseval", value, t.n_points(), t.dim());
        r.truncation = Some(Truncation {
            box_limit: t.box_limit(),
            tail,
        });
        r.bound = Bound::Approximate;
        Ok(r)
    }
}

/// Norm of the projection of `D` onto the Haar functions with all levels `>= 0`.
pub fn d0_projection_norm(t: &HaarTable, arith: Arithmetic) -> Result<NormReport> {
    require_support(t)?;
    let mut r = NormReport::new(NormKind::D0Projection, "parseval", 0.0, t.n_points(), t.dim());
    if arith.exact_for(t.n_points()) {
        let (sq, tail) = parseval_squared_exact(t, true);
        r.truncation = Some(Truncation {
            box_limit: t.box_limit(),
            tail: Scalar::to_f64(&tail),
        });
        Ok(rational_sqrt_report(r, &sq))
    } else {
        let stored: Vec<f64> = t
            .levels()
            .par_iter()
            .filter(|l| l.is_positive())
            .map(|l| t.level_energy::<f64>(l))
            .collect();
        let tail = volume_tail_sums(t.box_limit(), t.dim(), TailWeight::L2Positive)?;
        r.value = (stored.iter().sum::<f64>() + tail).max(0.0).sqrt();
        r.truncation = Some(Truncation {
            box_limit: t.box_limit(),
            tail,
        });
        r.bound = Bound::Approximate;
        Ok(r)
    }
}

pub fn d0_projection_squared_exact(t: &HaarTable) -> Result<BigRational> {
    require_support(t)?;
    Ok(parseval_squared_exact(t, true).0)
}

/// All level vectors `a` in `N_0^d` with `|a| <= depth`.
fn test_levels(d: usize, depth: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, depth, &mut cur, &mut out);
    out
}

/// Per-entry BMO corrections `2^|j| (c^2 - v^2)` relative to an empty box.
fn bmo_deltas<S: Scalar>(t: &HaarTable, level: &HaarLevel) -> Vec<S> {
    let v = level.volume::<S>();
    let vv = v.clone() * v;
    let w = S::pow2(level.order as i32);
    level
        .entries
        .iter()
        .map(|e| {
            let c = t.coefficient_scalar::<S>(level, e.counting);
            w.clone() * (c.clone() * c - vv.clone())
        })
        .collect()
}

/// Best BMO test value among the dyadic boxes on test level `a`.
fn bmo_level_max<S: Scalar>(t: &HaarTable, deltas: &[Option<Vec<S>>], a: &[u32]) -> S {
    let abs_a: u32 = a.iter().sum();
    // every box at level j >= a treated as empty: prod_i 2^{-2 a_i}/12
    let mut baseline = S::from_u64(1);
    for &ai in a {
        baseline = baseline * S::pow2(-2 * ai as i32) * S::from_scaled(1, 2, 3);
    }
    let mut acc: Vec<S> = vec![S::zero(); 1usize << abs_a];
    for (level, delta) in t.levels().iter().zip(deltas) {
        let Some(delta) = delta else { continue };
        if level.j.iter().zip(a).any(|(&j, &ai)| (j as u32) < ai) {
            continue;
        }
        for (e, dv) in level.entries.iter().zip(delta) {
            let key = parent_key(level, e.m, a);
            acc[key] = acc[key].clone() + dv.clone();
        }
    }
    let scale = S::pow2(abs_a as i32);
    let mut best = baseline.clone();
    for (k, x) in acc.into_iter().enumerate() {
        let val = baseline.clone() + scale.clone() * x;
        if k == 0 || val > best {
            best = val;
        }
    }
    best
}

fn bmo_max<S: Scalar + Send + Sync>(t: &HaarTable, tests: &[Vec<u32>]) -> S {
    let deltas: Vec<Option<Vec<S>>> = t
        .levels()
        .par_iter()
        .map(|l| l.is_positive().then(|| bmo_deltas::<S>(t, l)))
        .collect();
    let per_level: Vec<S> = tests.par_iter().map(|a| bmo_level_max(t, &deltas, a)).collect();
    per_level
        .into_iter()
        .reduce(|x, y| if y > x { y } else { x })
        .unwrap_or_else(S::zero)
}

/// Packed position of the level-`a` box containing box `packed` of `level`.
fn parent_key(level: &HaarLevel, packed: u64, a: &[u32]) -> usize {
    let mut rest = packed;
    let mut key = 0usize;
    let mut shift = 0u32;
    for (i, &ai) in a.iter().enumerate().rev() {
        let w = level.j[i].max(0) as u32;
        let mi = if w == 0 { 0 } else { rest & ((1u64 << w) - 1) };
        rest = if w >= 64 { 0 } else { rest >> w };
        key |= ((mi >> (w - ai)) as usize) << shift;
        shift += ai;
    }
    key
}

/// Lower estimate of the dyadic BMO seminorm: the supremum over the unit cube
/// and all dyadic boxes `U` with `|a| <= depth` of
/// `lambda(U)^-1 sum_{j in N_0^d} 2^|j| sum_{I_{j,m} in U} <D,h_{j,m}>^2`.
/// Boxes beyond the stored levels are volume-only and folded in exactly.
pub fn bmo_dyadic(t: &HaarTable, depth: u32, arith: Arithmetic) -> Result<NormReport> {
    require_support(t)?;
    let d = t.dim();
    if depth > t.box_limit().max(1) * d as u32 || depth > 26 {
        return Err(invalid(format!(
            "depth {depth} exceeds the box limit {} or the dense test-box cap",
            t.box_limit()
        )));
    }
    let tests = test_levels(d, depth);
    let mut r = NormReport::new(NormKind::BmoDyadic, "dyadic_boxes", 0.0, t.n_points(), d);
    r.truncation = Some(Truncation {
        box_limit: t.box_limit(),
        tail: 0.0,
    });
    r.bound = Bound::Lower;
    r.params = NormParams::default();
    if arith.exact_for(t.n_points()) {
        let best = bmo_max::<BigRational>(t, &tests);
        Ok(rational_sqrt_report(r, &best))
    } else {
        r.value = bmo_max::<f64>(t, &tests).max(0.0).sqrt();
        Ok(r)
    }
}

/// Checks `1/p - 1 < s < min(1/p, 1)` and positivity.
pub fn check_besov_params(p: f64, q: f64, s: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite() && q > 0.0 && q.is_finite()) {
        return Err(invalid(format!("need 0 < p, q < inf (p={p}, q={q})")));
    }
    if !(1.0 / p - 1.0 < s && s < (1.0 / p).min(1.0)) {
        return Err(invalid(format!(
            "s={s} outside the Haar-characterization range ({}, {})",
            1.0 / p - 1.0,
            (1.0 / p).min(1.0)
        )));
    }
    Ok(())
}

/// Shared Besov sum; returns `(value, tail)`.
fn besov_core(t: &HaarTable, p: f64, q: f64, s: f64) -> Result<(f64, f64)> {
    check_besov_params(p, q, s)?;
    require_support(t)?;
    let exponent = (s - 1.0 / p + 1.0) * q;
    let terms: Vec<f64> = t
        .levels()
        .par_iter()
        .map(|l| {
            let inner = t.level_p_sum(l, p);
            (l.order as f64 * exponent).exp2() * inner.powf(q / p)
        })
        .collect();
    let tail = volume_tail_sums(t.box_limit(), t.dim(), TailWeight::Besov { p, q, s })?;
    let total: f64 = terms.iter().sum::<f64>() + tail;
    Ok((total.max(0.0).powf(1.0 / q), tail))
}

/// Haar-characterization quasi-norm in `S^s_{p,q}B`.
pub fn besov_quasinorm(t: &HaarTable, p: f64, q: f64, s: f64) -> Result<NormReport> {
    let (value, tail) = besov_core(t, p, q, s)?;
    let mut r = NormReport::new(NormKind::Besov, "haar", value, t.n_points(), t.dim());
    r.params = NormParams {
        p: Some(p),
        q: Some(q),
        s: Some(s),
        beta: None,
    };
    r.truncation = Some(Truncation {
        box_limit: t.box_limit(),
        tail,
    });
    r.bound = Bound::Equivalent;
    Ok(r)
}

/// Besov values with `min(p,q)` and `max(p,q)`, which bracket the
/// Triebel-Lizorkin quasi-norm `S^s_{p,q}F` up to embedding constants.
pub fn triebel_bracket(t: &HaarTable, p: f64, q: f64, s: f64) -> Result<(NormReport, NormReport)> {
    let lo_p = p.min(q);
    let hi_p = p.max(q);
    check_besov_params(lo_p, q, s)?;
    check_besov_params(hi_p, q, s)?;
    let wrap = |pp: f64, bound: Bound| -> Result<NormReport> {
        let mut r = besov_quasinorm(t, pp, q, s)?;
        r.kind = NormKind::TriebelBracket;
        r.method = format!("besov_p{pp}");
        r.params.p = Some(p);
        r.bound = bound;
        Ok(r)
    };
    Ok((wrap(lo_p, Bound::BracketLower)?, wrap(hi_p, Bound::BracketUpper)?))
}

/// One `L_p` estimate together with the quadrature disagreement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpEstimate {
    pub p: f64,
    pub value: f64,
    pub error_proxy: f64,
}

/// `L_p` norms of `D` for several `p` at once.
///
/// The mesh on each axis is `{k/R}` refined by all point coordinates, so the
/// counting term is constant on every open cell and `D` is a polynomial there.
/// Each cell is integrated by the two-point Gauss-Legendre tensor rule; the
/// midpoint rule runs alongside and `|GL - midpoint|` is the error proxy.
pub fn lp_grid_multi(p: &DyadicPointSet, ps: &[f64], resolution: u32) -> Result<Vec<LpEstimate>> {
    nonempty(p)?;
    if resolution < 2 {
        return Err(invalid("resolution must be at least 2"));
    }
    if ps.is_empty() {
        return Err(invalid("no exponents given"));
    }
    if let Some(&bad) = ps.iter().find(|&&x| !(x >= 1.0 && x.is_finite())) {
        return Err(invalid(format!("p={bad} outside [1, inf)")));
    }
    let d = p.dim();
    let n = p.len();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut v: Vec<f64> = (0..=resolution).map(|k| k as f64 / resolution as f64).collect();
        v.extend((0..n).map(|k| p.coordinate_f64(k, i)));
        v.sort_by(f64::total_cmp);
        v.dedup();
        axes.push(v);
    }
    let cells: u64 = axes.iter().map(|a| a.len() as u64 - 1).product();
    if cells > LP_CELL_CAP {
        return Err(Error::Limit(format!("{cells} grid cells exceed cap {LP_CELL_CAP}")));
    }
    // cumulative histogram: H[c] = #{z : idx(z_i) <= c_i for all i}
    let lens: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let total: usize = lens.iter().product();
    let mut strides = vec![1usize; d];
    for i in (0..d.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * lens[i + 1];
    }
    let mut hist = vec![0u32; total];
    for k in 0..n {
        let mut off = 0;
        for i in 0..d {
            let z = p.coordinate_f64(k, i);
            let idx = axes[i].partition_point(|&x| x < z);
            off += idx * strides[i];
        }
        hist[off] += 1;
    }
    for i in 0..d {
        for flat in 0..total {
            if (flat / strides[i]) % lens[i] > 0 {
                hist[flat] += hist[flat - strides[i]];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    let g = 0.5 / 3f64.sqrt();
    let inner_lens: Vec<usize> = lens[1..].iter().map(|l| l - 1).collect();
    let inner_count: usize = inner_lens.iter().product();
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..lens[0] - 1)
        .into_par_iter()
        .map(|c0| {
            let mut gl = vec![0.0; ps.len()];
            let mut mid = vec![0.0; ps.len()];
            let mut idx = vec![0usize; d];
            idx[0] = c0;
            let mut nodes: Vec<[f64; 3]> = vec![[0.0; 3]; d];
            for flat in 0..inner_count {
                let mut rest = flat;
                for i in (1..d).rev() {
                    idx[i] = rest % inner_lens[i - 1];
                    rest /= inner_lens[i - 1];
                }
                let mut vol = 1.0;
                let mut off = 0;
                for i in 0..d {
                    let (lo, hi) = (axes[i][idx[i]], axes[i][idx[i] + 1]);
                    let h = hi - lo;
                    let m = 0.5 * (lo + hi);
                    nodes[i] = [m - g * h, m + g * h, m];
                    vol *= h;
                    off += idx[i] * strides[i];
                }
                let count = hist[off] as f64 * inv_n;
                let dm = (count - nodes.iter().map(|x| x[2]).product::<f64>()).abs();
                let mut vals = [0.0f64; 64];
                let corners = 1usize << d;
                let many = corners > vals.len();
                let mut heap = Vec::new();
                if many {
                    heap.resize(corners, 0.0);
                }
                let buf: &mut [f64] = if many { &mut heap } else { &mut vals[..corners] };
                for (mask, slot) in buf.iter_mut().enumerate() {
                    let mut prod = 1.0;
                    for (i, nd) in nodes.iter().enumerate() {
                        prod *= nd[mask >> i & 1];
                    }
                    *slot = (count - prod).abs();
                }
                let w = vol / corners as f64;
                for (k, &pp) in ps.iter().enumerate() {
                    let s: f64 = buf.iter().map(|&x| x.powf(pp)).sum();
                    gl[k] += w * s;
                    mid[k] += vol * dm.powf(pp);
                }
            }
            (gl, mid)
        })
        .collect();
    Ok(ps
        .iter()
        .enumerate()
        .map(|(k, &pp)| {
            let gl: f64 = partial.iter().map(|x| x.0[k]).sum();
            let mid: f64 = partial.iter().map(|x| x.1[k]).sum();
            let value = gl.max(0.0).powf(1.0 / pp);
            let alt = mid.max(0.0).powf(1.0 / pp);
            LpEstimate {
                p: pp,
                value,
                error_proxy: (value - alt).abs(),
            }
        })
        .collect())
}

pub fn lp_grid(p: &DyadicPointSet, exponent: f64, resolution: u32) -> Result<NormReport> {
    let est = lp_grid_multi(p, &[exponent], resolution)?[0];
    let mut r = NormReport::new(NormKind::Lp, &format!("grid_gl2_r{resolution}"), est.value, p.len() as u64, p.dim());
    r.params.p = Some(exponent);
    r.bound = Bound::Approximate;
    r.error_proxy = Some(est.error_proxy);
    Ok(r)
}

/// `sup |D|` over `[0,1]^d` for `d <= 2`, by enumerating corners taken from
/// point coordinates and 1 and using both closed and open counts.
pub fn star_discrepancy_exact(p: &DyadicPointSet) -> Result<NormReport> {
    nonempty(p)?;
    let d = p.dim();
    if d > 2 {
        return Err(invalid(format!(
            "exact star discrepancy supports d <= 2 (got {d}); use lp_grid with large p instead"
        )));
    }
    let n = p.len();
    let nf = n as f64;
    let b = p.precision_bits();
    let unit = 1u64 << b;
    let grid = |i: usize| -> Vec<u64> {
        let mut g: Vec<u64> = (0..n).map(|k| p.point(k)[i]).collect();
        g.push(unit);
        g.sort_unstable();
        g.dedup();
        g
    };
    let scale = (b as f64).exp2();
    let value = if d == 1 {
        let g = grid(0);
        let mut z: Vec<u64> = (0..n).map(|k| p.point(k)[0]).collect();
        z.sort_unstable();
        let mut best = 0.0f64;
        for &x in &g {
            let closed = z.partition_point(|&v| v <= x) as f64;
            let open = z.partition_point(|&v| v < x) as f64;
            let xf = x as f64 / scale;
            best = best.max(closed / nf - xf).max(xf - open / nf);
        }
        best
    } else {
        let g0 = grid(0);
        let g1 = grid(1);
        let mut pts: Vec<(u64, usize)> = (0..n)
            .map(|k| {
                let x = p.point(k);
                (x[0], g1.partition_point(|&v| v < x[1]))
            })
            .collect();
        pts.sort_unstable();
        let rows: Vec<f64> = g0
            .par_iter()
            .map(|&x0| {
                let mut closed_hist = vec![0u32; g1.len()];
                let mut open_hist = vec![0u32; g1.len()];
                for &(z0, i1) in &pts {
                    if z0 > x0 {
                        break;
                    }
                    closed_hist[i1] += 1;
                    if z0 < x0 {
                        open_hist[i1] += 1;
                    }
                }
                let x0f = x0 as f64 / scale;
                let mut best = 0.0f64;
                let (mut c_cum, mut o_cum) = (0u32, 0u32);
                for (i1, &x1) in g1.iter().enumerate() {
                    // closed count: z1 <= x1; open count: z1 < x1
                    let open_here = o_cum;
                    c_cum += closed_hist[i1];
                    o_cum += open_hist[i1];
                    let vol = x0f * (x1 as f64 / scale);
                    best = best.max(c_cum as f64 / nf - vol).max(vol - open_here as f64 / nf);
                }
                best
            })
            .collect();
        rows.into_iter().fold(0.0, f64::max)
    };
    Ok(NormReport::new(NormKind::LinfStar, "critical_boxes", value, n as u64, d))
}

/// Default exponent grid `{2, 4, ..., 4 * 2^ceil(ld ld N)}`.
pub fn default_orlicz_grid(n: u64) -> Vec<f64> {
    let ld = (n.max(2) as f64).log2().max(1.0);
    let top = 4.0 * ld.log2().ceil().max(0.0).exp2();
    let mut grid = Vec::new();
    let mut p = 2.0;
    while p <= top {
        grid.push(p);
        p *= 2.0;
    }
    grid
}

/// `max_p p^{-1/beta} ||D||_p` over the exponent grid; a lower estimate of the
/// `exp(L^beta)` norm up to equivalence constants.
pub fn orlicz_exp_estimate(
    p: &DyadicPointSet,
    beta: f64,
    p_grid: Option<&[f64]>,
    resolution: u32,
) -> Result<NormReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive (got {beta})")));
    }
    let grid: Vec<f64> = match p_grid {
        Some(g) => g.to_vec(),
        None => default_orlicz_grid(p.len() as u64),
    };
    if grid.is_empty() {
        return Err(invalid("empty exponent grid"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] <= 1.0 {
        return Err(invalid("exponent grid must be ascending with entries > 1"));
    }
    let est = lp_grid_multi(p, &grid, resolution)?;
    let (value, proxy) = est
        .iter()
        .map(|e| {
            let f = e.p.powf(-1.0 / beta);
            (f * e.value, f * e.error_proxy)
        })
        .fold((0.0f64, 0.0f64), |acc, x| if x.0 > acc.0 { x } else { acc });
    let mut r = NormReport::new(
        NormKind::OrliczExp,
        &format!("sup_p_grid_r{resolution}_p{}", grid.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":")),
        value,
        p.len() as u64,
        p.dim(),
    );
    r.params.beta = Some(beta);
    r.bound = Bound::Lower;
    r.error_proxy = Some(proxy);
    Ok(r)
}
