//! Coefficient bounds, the lifting of a sequence prefix to a net, and
//! scaling tables of normalized norms.

use std::fmt;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::Scalar;
use crate::error::{invalid, Result};
use crate::genmat::GeneratingMatrixSet;
use crate::haar::{build_table, HaarTable};
use crate::norms::{self, Arithmetic};
use crate::points::{prefix, DyadicPointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `|j| + t/2 >= ld N`, box contains points.
    SmallOccupied,
    /// `|j| + t/2 >= ld N`, box is empty.
    SmallEmpty,
    /// `n_mu <= |j| + t/2 < n_{mu+1}`.
    Large,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SmallOccupied => "small_occupied",
            Regime::SmallEmpty => "small_empty",
            Regime::Large => "large",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCase {
    pub regime: Regime,
    pub t: u32,
    pub n_points: u64,
    pub dim: usize,
    /// Exponents of the binary expansion of `N`, decreasing.
    pub decomposition: Vec<u32>,
}

pub fn binary_decomposition(n: u64) -> Vec<u32> {
    (0..64).rev().filter(|&i| n >> i & 1 == 1).collect()
}

impl BoundCase {
    pub fn new(regime: Regime, t: u32, n_points: u64, dim: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(invalid("N must be positive"));
        }
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(Self {
            regime,
            t,
            n_points,
            dim,
            decomposition: binary_decomposition(n_points),
        })
    }

    /// Regime of a box on a level with `|j| = order`.
    pub fn classify(order: u32, t: u32, n_points: u64, dim: usize, occupied: bool) -> Result<Self> {
        let small = is_small(order, t, n_points);
        let regime = match (small, occupied) {
            (true, true) => Regime::SmallOccupied,
            (true, false) => Regime::SmallEmpty,
            (false, _) => Regime::Large,
        };
        Self::new(regime, t, n_points, dim)
    }

    /// `n_{mu+1}` with `n_0 = 0`, `n_{r+1} = ld N` (real) and
    /// `n_mu <= x < n_{mu+1}`.
    fn upper_exponent(&self, x: f64) -> f64 {
        let mut seq: Vec<f64> = vec![0.0];
        seq.extend(self.decomposition.iter().rev().map(|&e| e as f64));
        seq.push((self.n_points as f64).log2());
        let mu = seq.iter().rposition(|&n| n <= x).unwrap_or(0);
        seq[(mu + 1).min(seq.len() - 1)]
    }
}

fn is_small(order: u32, t: u32, n_points: u64) -> bool {
    order as f64 + t as f64 / 2.0 >= (n_points as f64).log2()
}

/// Right-hand side of the coefficient bound for a box with `|j| = order`,
/// without the implied constant.
pub fn coefficient_bound(order: u32, case: &BoundCase) -> Result<f64> {
    let n = case.n_points as f64;
    let t = case.t as f64;
    let j = order as f64;
    let small = is_small(order, case.t, case.n_points);
    match case.regime {
        Regime::SmallOccupied | Regime::SmallEmpty if !small => Err(invalid(format!(
            "|j|={order} with t={} is in the large-box regime for N={}",
            case.t, case.n_points
        ))),
        Regime::Large if small => Err(invalid(format!(
            "|j|={order} with t={} is in the small-box regime for N={}",
            case.t, case.n_points
        ))),
        Regime::SmallOccupied => Ok((t / 2.0).exp2() / (n * j.exp2())),
        Regime::SmallEmpty => Ok((-2.0 * j).exp2()),
        Regime::Large => {
            let top = case.upper_exponent(j + t / 2.0);
            let poly = (2.0 * top - t - 2.0 * j).powi(case.dim as i32 - 1);
            Ok(t.exp2() / n * ((-j).exp2() + poly * (-top).exp2()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRatio {
    pub regime: Regime,
    pub boxes: u64,
    pub max_ratio: f64,
    /// Level and packed position of the maximizer.
    pub argmax_j: Vec<i32>,
    pub argmax_m: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundAudit {
    pub n_points: u64,
    pub t: u32,
    pub ratios: Vec<RegimeRatio>,
}

impl BoundAudit {
    pub fn max_ratio(&self, regime: Regime) -> Option<f64> {
        self.ratios.iter().find(|r| r.regime == regime).map(|r| r.max_ratio)
    }
}

/// Max of `|<D,h>| / bound` per regime over every box of every stored level.
/// The table must come from a prefix of an order-2 sequence built with
/// `source`.
pub fn bound_ratio_audit(table: &HaarTable, source: &GeneratingMatrixSet, t: u32) -> Result<BoundAudit> {
    if source.row_bound_factor() != 2 {
        return Err(invalid(format!(
            "coefficient bounds need an order-2 generating set (row bound factor {})",
            source.row_bound_factor()
        )));
    }
    if let Some((j, row, col)) = source.sparsity_violation() {
        return Err(invalid(format!("matrix {j} violates row sparsity at ({row}, {col})")));
    }
    if source.dim() != table.dim() {
        return Err(invalid("table and generating set differ in dimension"));
    }
    let n = table.n_points();
    let d = table.dim();
    let mut best: Vec<RegimeRatio> = Vec::new();
    let mut note = |regime: Regime, ratio: f64, count: u64, j: &[i32], m: Vec<u64>| {
        match best.iter_mut().find(|r| r.regime == regime) {
            Some(r) => {
                r.boxes += count;
                if ratio > r.max_ratio {
                    r.max_ratio = ratio;
                    r.argmax_j = j.to_vec();
                    r.argmax_m = m;
                }
            }
            None => best.push(RegimeRatio {
                regime,
                boxes: count,
                max_ratio: ratio,
                argmax_j: j.to_vec(),
                argmax_m: m,
            }),
        }
    };
    for level in table.levels() {
        let occupied_case = BoundCase::classify(level.order, t, n, d, true)?;
        let bound_occ = coefficient_bound(level.order, &occupied_case)?;
        for e in &level.entries {
            let c = table.coefficient_f64(level, e.counting).abs();
            note(occupied_case.regime, c / bound_occ, 1, &level.j, level.unpack_m(e.m));
        }
        let empty = level.box_count() - level.entries.len() as u64;
        if empty > 0 {
            let case = BoundCase::classify(level.order, t, n, d, false)?;
            let bound = coefficient_bound(level.order, &case)?;
            let ratio = level.volume_f64().abs() / bound;
            let m = first_empty_box(level);
            note(case.regime, ratio, empty, &level.j, m);
        }
    }
    best.sort_by_key(|r| r.regime);
    Ok(BoundAudit {
        n_points: n,
        t,
        ratios: best,
    })
}

fn first_empty_box(level: &crate::haar::HaarLevel) -> Vec<u64> {
    let packed = level
        .entries
        .iter()
        .enumerate()
        .find(|(i, e)| e.m != *i as u64)
        .map_or(level.entries.len() as u64, |(i, _)| i as u64);
    level.unpack_m(packed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedSet {
    pub points: DyadicPointSet,
    /// False when `k/N` had to be rounded.
    pub exact: bool,
}

/// Appends the coordinate `k/N` to point `k` of a sequence prefix.
pub fn lift_sequence(seq_prefix: &DyadicPointSet) -> Result<LiftedSet> {
    let n = seq_prefix.len() as u64;
    if n == 0 {
        return Err(invalid("cannot lift an empty prefix"));
    }
    let d = seq_prefix.dim();
    let b = seq_prefix.precision_bits();
    let (bits, exact) = if n.is_power_of_two() {
        (b.max(n.trailing_zeros()), true)
    } else {
        (b.max(52), false)
    };
    let src = seq_prefix.with_precision(bits)?;
    let mut coords = Vec::with_capacity(n as usize * (d + 1));
    for k in 0..n {
        coords.extend_from_slice(src.point(k as usize));
        let num = if exact {
            k << (bits - n.trailing_zeros())
        } else {
            // round(k 2^bits / N)
            ((((k as u128) << bits) + n as u128 / 2) / n as u128) as u64
        };
        coords.push(num);
    }
    Ok(LiftedSet {
        points: DyadicPointSet::new(d + 1, bits, coords)?,
        exact,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftCheck {
    pub n_points: u64,
    /// Prefix length attaining `max n' ||D^{n'}|D_0||`.
    pub best_prefix: u64,
    /// `max n'^2 ||D^{n'}|D_0||^2`, exact.
    pub lhs_squared: String,
    /// `N^2 ||D_lift|D_0||^2`, exact.
    pub rhs_squared: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Exact check of `max_{n' <= N} n' ||D^{n'}|D_0|| + 1 >= N ||D_lift|D_0||`
/// for the first `N = 2^k` points of the sequence.
pub fn lift_inequality_check(g: &GeneratingMatrixSet, n_points: u64) -> Result<LiftCheck> {
    if !n_points.is_power_of_two() {
        return Err(invalid("the exact lifting check needs N = 2^n"));
    }
    let seq = prefix(g, n_points)?;
    let prefix_terms: Vec<BigRational> = (1..=n_points)
        .into_par_iter()
        .map(|k| -> Result<BigRational> {
            let t = build_table(&seq.truncated(k as usize), None)?;
            let sq = norms::d0_projection_squared_exact(&t)?;
            Ok(sq * BigRational::from_integer((k * k).into()))
        })
        .collect::<Result<_>>()?;
    let (best_idx, a) = prefix_terms
        .iter()
        .enumerate()
        .fold((0usize, <BigRational as Zero>::zero()), |acc, (i, v)| {
            if *v > acc.1 {
                (i, v.clone())
            } else {
                acc
            }
        });
    let lifted = lift_sequence(&seq)?;
    let t = build_table(&lifted.points, None)?;
    let b = norms::d0_projection_squared_exact(&t)? * BigRational::from_integer((n_points * n_points).into());
    let holds = sqrt_plus_one_dominates(&a, &b);
    Ok(LiftCheck {
        n_points,
        best_prefix: best_idx as u64 + 1,
        lhs_squared: a.to_string(),
        rhs_squared: b.to_string(),
        lhs: Scalar::to_f64(&a).sqrt() + 1.0,
        rhs: Scalar::to_f64(&b).sqrt(),
        holds,
    })
}

/// `sqrt(a) + 1 >= sqrt(b)` for nonnegative rationals, without roots.
pub fn sqrt_plus_one_dominates(a: &BigRational, b: &BigRational) -> bool {
    let one = BigRational::one();
    let gap = b - a - &one;
    if gap <= <BigRational as Zero>::zero() {
        return true;
    }
    // 2 sqrt(a) >= gap > 0
    &gap * &gap <= a * BigRational::from_integer(4.into())
}

/// Norm evaluated in a scaling study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StudyNorm {
    L2,
    Lp { p: f64, resolution: u32 },
    Star,
    /// `depth = None` picks `ceil(ld N)`.
    BmoDyadic { depth: Option<u32> },
    D0Projection,
    Besov { p: f64, q: f64, s: f64 },
    Orlicz { beta: f64, resolution: u32 },
}

impl StudyNorm {
    /// `(s, e, rate)`: rows are normalized by `N^{1-s} / (ld N)^e`.
    pub fn rate(&self, d: usize) -> (f64, f64, String) {
        let d_f = d as f64;
        match *self {
            StudyNorm::L2 | StudyNorm::Lp { .. } | StudyNorm::BmoDyadic { .. } | StudyNorm::D0Projection => {
                (0.0, d_f / 2.0, "N^-1 (log N)^(d/2)".into())
            }
            StudyNorm::Star => (0.0, d_f, "N^-1 (log N)^d".into()),
            StudyNorm::Besov { q, s, .. } if s == 0.0 => (0.0, d_f / q, "N^-1 (log N)^(d/q)".into()),
            StudyNorm::Besov { q, s, .. } => (s, (d_f - 1.0) / q, "N^(s-1) (log N)^((d-1)/q)".into()),
            StudyNorm::Orlicz { beta, .. } => (0.0, d_f - 1.0 / beta, "N^-1 (log N)^(d-1/beta)".into()),
        }
    }

    pub fn evaluate(&self, p: &DyadicPointSet) -> Result<f64> {
        let n = p.len() as u64;
        let table = || build_table(p, None);
        Ok(match *self {
            StudyNorm::L2 => norms::l2_parseval(&table()?, Arithmetic::Float)?.value,
            StudyNorm::Lp { p: e, resolution } => norms::lp_grid(p, e, resolution)?.value,
            StudyNorm::Star => norms::star_discrepancy_exact(p)?.value,
            StudyNorm::BmoDyadic { depth } => {
                let depth = depth.unwrap_or_else(|| (n as f64).log2().ceil() as u32);
                norms::bmo_dyadic(&table()?, depth, Arithmetic::Float)?.value
            }
            StudyNorm::D0Projection => norms::d0_projection_norm(&table()?, Arithmetic::Float)?.value,
            StudyNorm::Besov { p: pp, q, s } => norms::besov_quasinorm(&table()?, pp, q, s)?.value,
            StudyNorm::Orlicz { beta, resolution } => {
                norms::orlicz_exp_estimate(p, beta, None, resolution)?.value
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n_points: u64,
    pub value: f64,
    pub normalized: f64,
    pub exponent: f64,
    pub theorem: String,
}

/// Norm of the first `2^k` points for each `k` in `exponents`, normalized by
/// the proven rate.
pub fn scaling_study(g: &GeneratingMatrixSet, norm: StudyNorm, exponents: &[u32]) -> Result<Vec<ScalingRow>> {
    if exponents.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("exponents must be strictly ascending"));
    }
    if exponents.first().is_some_and(|&k| k == 0) {
        return Err(invalid("N must be at least 2"));
    }
    let (s, e, theorem) = norm.rate(g.dim());
    exponents
        .par_iter()
        .map(|&k| {
            let n = 1u64 << k;
            let value = norm.evaluate(&prefix(g, n)?)?;
            let normalized = (n as f64).powf(1.0 - s) * value / (k as f64).powf(e);
            Ok(ScalingRow {
                n_points: n,
                value,
                normalized,
                exponent: e,
                theorem: theorem.clone(),
            })
        })
        .collect()
}

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn study_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from("N,value,normalized,exponent,theorem\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},\"{}\"",
            r.n_points,
            fmt_f64(r.value),
            fmt_f64(r.normalized),
            fmt_f64(r.exponent),
            r.theorem
        );
    }
    s
}

/// `max / min` of the normalized column.
pub fn spread(rows: &[ScalingRow]) -> f64 {
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.normalized), hi.max(r.normalized)));
    hi / lo
}
