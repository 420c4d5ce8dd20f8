//! Exact Haar coefficients of the discrepancy function.
//!
//! Haar functions are the non-normalized tensor system: on level `j >= 0`,
//! `h_{j,m}` is `+1` on the left half of `I_{j,m}` and `-1` on the right half;
//! `h_{-1,0}` is the indicator of `[0,1)`. The coefficient of the discrepancy
//! function splits as
//!
//! ```text
//! <D, h_{j,m}> = (1/N) sum_z prod_i <1_{(z_i,1)}, h_{j_i,m_i}>  -  prod_i <x, h_{j_i,m_i}>
//! ```
//!
//! i.e. a counting part (sparse: nonzero only on boxes whose interior holds a
//! point) minus a volume part that depends on `j` alone.

use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::dyadic::{DyadicRational, Scalar};
use crate::error::{invalid, Error, Result};
use crate::points::DyadicPointSet;

/// Upper bound on `N * (J + 1)^d`, the worst-case number of stored boxes.
pub const DEFAULT_ENTRY_CAP: u64 = 200_000_000;

/// Level vector `j` (entries `>= -1`) and position `m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HaarIndex {
    pub j: Vec<i32>,
    pub m: Vec<u64>,
}

impl HaarIndex {
    pub fn new(j: Vec<i32>, m: Vec<u64>) -> Result<Self> {
        if j.len() != m.len() {
            return Err(Error::DimensionMismatch {
                expected: j.len(),
                actual: m.len(),
            });
        }
        for (&ji, &mi) in j.iter().zip(&m) {
            if ji < -1 || ji > 62 {
                return Err(invalid(format!("level {ji} outside -1..=62")));
            }
            let limit = if ji < 0 { 1 } else { 1u64 << ji };
            if mi >= limit {
                return Err(Error::OutOfRange {
                    what: "m",
                    value: mi,
                    limit,
                });
            }
        }
        Ok(Self { j, m })
    }

    /// `|j| = sum max(j_i, 0)`; the box has volume `2^-|j|`.
    pub fn order(&self) -> u32 {
        level_order(&self.j)
    }
}

pub fn level_order(j: &[i32]) -> u32 {
    j.iter().map(|&x| x.max(0) as u32).sum()
}

/// Sign and exponent of the volume coefficient: value `(-1)^neg * 2^-exp`.
///
/// One-dimensional factors: `int_0^1 x dx = 1/2` on level `-1`; on level
/// `j >= 0`, the left half contributes `+` and the right half `-` of an
/// integral over intervals of length `2^-j-1`, leaving `-2^(-2j-2)`.
pub fn volume_parts(j: &[i32]) -> (bool, u32) {
    let mut neg = false;
    let mut exp = 0u32;
    for &ji in j {
        if ji < 0 {
            exp += 1;
        } else {
            neg = !neg;
            exp += 2 * ji as u32 + 2;
        }
    }
    (neg, exp)
}

pub fn volume_coeff(j: &[i32]) -> DyadicRational {
    let (neg, exp) = volume_parts(j);
    DyadicRational::signed_pow2_neg(neg, exp)
}

/// Numerator (at scale `b`) of `<1_{(z/2^b, 1)}, h_{j,m}>`.
fn counting_numerator_1d(z: u64, b: u32, j: i32, m: u64) -> i64 {
    if j < 0 {
        return (1i64 << b) - z as i64;
    }
    let j = j as u32;
    if j >= b {
        // grid points never fall inside an open interval this fine
        return 0;
    }
    let width = 1u64 << (b - j);
    let left = m * width;
    let right = left + width;
    let mid = left + width / 2;
    if z <= left || z >= right {
        0
    } else if z <= mid {
        left as i64 - z as i64
    } else {
        z as i64 - right as i64
    }
}

/// Exact `<1_{(z/2^b, 1)}, h_{j,m}>`.
pub fn counting_coeff_1d(z: u64, b: u32, j: i32, m: u64) -> Result<DyadicRational> {
    if b > 62 {
        return Err(Error::OutOfRange {
            what: "precision_bits",
            value: b as u64,
            limit: 62,
        });
    }
    if z >> b != 0 {
        return Err(Error::OutOfRange {
            what: "z",
            value: z,
            limit: 1u64 << b,
        });
    }
    HaarIndex::new(vec![j], vec![m])?;
    Ok(DyadicRational::new(counting_numerator_1d(z, b, j, m), b, 1))
}

/// Counting and volume parts of `<D, h_idx>`; the coefficient is
/// `counting - volume`.
pub fn haar_coefficient(p: &DyadicPointSet, idx: &HaarIndex) -> Result<(DyadicRational, DyadicRational)> {
    if idx.j.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: idx.j.len(),
        });
    }
    if p.is_empty() {
        return Err(invalid("point set is empty"));
    }
    let b = p.precision_bits();
    if b > 62 {
        return Err(Error::OutOfRange {
            what: "precision_bits",
            value: b as u64,
            limit: 62,
        });
    }
    let mut counting = DyadicRational::zero();
    for x in p.iter() {
        let mut term = DyadicRational::from_int(1);
        for ((&z, &j), &m) in x.iter().zip(&idx.j).zip(&idx.m) {
            let f = counting_numerator_1d(z, b, j, m);
            if f == 0 {
                term = DyadicRational::zero();
                break;
            }
            term = &term * &DyadicRational::new(f, b, 1);
        }
        counting = &counting + &term;
    }
    let counting = &counting * &DyadicRational::new(1, 0, p.len() as u64);
    Ok((counting, volume_coeff(&idx.j)))
}

/// One box on a level that contains at least one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxEntry {
    /// Packed position: `m_1` in the high bits, `m_d` in the low bits, each
    /// `max(j_i, 0)` bits wide.
    pub m: u64,
    /// Counting part times `N * 2^(b d)`.
    pub counting: i128,
    /// Points inside the half-open box (0 when loaded from a CSV table).
    pub points: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HaarLevel {
    pub j: Vec<i32>,
    pub order: u32,
    pub volume_negative: bool,
    pub volume_exp: u32,
    /// Sorted by `m`.
    pub entries: Vec<BoxEntry>,
}

impl HaarLevel {
    pub fn box_count(&self) -> u64 {
        1u64 << self.order
    }

    pub fn is_positive(&self) -> bool {
        self.j.iter().all(|&x| x >= 0)
    }

    pub fn unpack_m(&self, packed: u64) -> Vec<u64> {
        let mut out = vec![0; self.j.len()];
        let mut rest = packed;
        for (i, &ji) in self.j.iter().enumerate().rev() {
            let w = ji.max(0) as u32;
            out[i] = if w == 0 { 0 } else { rest & ((1u64 << w) - 1) };
            rest = if w >= 64 { 0 } else { rest >> w };
        }
        out
    }

    pub fn pack_m(&self, m: &[u64]) -> u64 {
        pack(&self.j, m)
    }

    pub fn volume_f64(&self) -> f64 {
        let v = (-(self.volume_exp as f64)).exp2();
        if self.volume_negative {
            -v
        } else {
            v
        }
    }

    pub fn volume<S: Scalar>(&self) -> S {
        let v = S::pow2(-(self.volume_exp as i32));
        if self.volume_negative {
            S::zero() - v
        } else {
            v
        }
    }
}

fn pack(j: &[i32], m: &[u64]) -> u64 {
    j.iter().zip(m).fold(0u64, |acc, (&ji, &mi)| {
        let w = ji.max(0) as u32;
        if w == 0 {
            acc
        } else {
            (acc << w) | mi
        }
    })
}

/// Sparse table of Haar coefficients for all levels `j` in `{-1..J-1}^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarTable {
    dim: usize,
    n_points: u64,
    precision_bits: u32,
    box_limit: u32,
    levels: Vec<HaarLevel>,
}

/// All level vectors in `{-1..limit-1}^d`, first coordinate slowest.
pub fn level_vectors(d: usize, limit: u32) -> Vec<Vec<i32>> {
    let side = limit as usize + 1;
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut code| {
            let mut j = vec![0i32; d];
            for i in (0..d).rev() {
                j[i] = (code % side) as i32 - 1;
                code /= side;
            }
            j
        })
        .collect()
}

impl HaarTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> u64 {
        self.n_points
    }

    /// Precision the counting numerators refer to (scale is `b * d`).
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn box_limit(&self) -> u32 {
        self.box_limit
    }

    pub fn levels(&self) -> &[HaarLevel] {
        &self.levels
    }

    pub fn counting_scale(&self) -> u32 {
        self.precision_bits * self.dim as u32
    }

    pub fn stored_boxes(&self) -> usize {
        self.levels.iter().map(|l| l.entries.len()).sum()
    }

    /// Whether the stored region covers every nonzero counting part.
    pub fn covers_counting_support(&self) -> bool {
        self.box_limit >= self.precision_bits
    }

    fn level_index(&self, j: &[i32]) -> Option<usize> {
        let side = self.box_limit as usize + 1;
        j.iter().try_fold(0usize, |acc, &x| {
            (x >= -1 && (x + 1) as usize <= self.box_limit as usize)
                .then(|| acc * side + (x + 1) as usize)
        })
    }

    pub fn level(&self, j: &[i32]) -> Option<&HaarLevel> {
        if j.len() != self.dim {
            return None;
        }
        self.level_index(j).map(|i| &self.levels[i])
    }

    /// Counting and volume parts for any index; levels outside the stored box
    /// must lie beyond the precision (zero counting part) to be answerable.
    pub fn coefficient(&self, idx: &HaarIndex) -> Result<(DyadicRational, DyadicRational)> {
        let volume = volume_coeff(&idx.j);
        match self.level(&idx.j) {
            Some(level) => {
                let key = level.pack_m(&idx.m);
                let c = level
                    .entries
                    .binary_search_by_key(&key, |e| e.m)
                    .map(|i| level.entries[i].counting)
                    .unwrap_or(0);
                Ok((self.counting_value(c), volume))
            }
            None if idx.j.iter().any(|&x| x >= self.precision_bits as i32) => {
                Ok((DyadicRational::zero(), volume))
            }
            None => Err(invalid("index lies outside the stored levels")),
        }
    }

    pub fn counting_value(&self, numerator: i128) -> DyadicRational {
        DyadicRational::new(numerator, self.counting_scale(), self.n_points)
    }

    /// Full coefficient `counting - volume` in the requested arithmetic.
    pub fn coefficient_scalar<S: Scalar>(&self, level: &HaarLevel, counting: i128) -> S {
        S::from_scaled(counting, self.counting_scale(), self.n_points) - level.volume::<S>()
    }

    pub fn coefficient_f64(&self, level: &HaarLevel, counting: i128) -> f64 {
        let c = counting as f64 / self.n_points as f64 / (self.counting_scale() as f64).exp2();
        c - level.volume_f64()
    }

    /// `2^|j| * sum_m <D,h_{j,m}>^2` over one stored level.
    pub fn level_energy<S: Scalar>(&self, level: &HaarLevel) -> S {
        let v = level.volume::<S>();
        let empty = level.box_count() - level.entries.len() as u64;
        let mut sum = S::from_u64(empty) * v.clone() * v;
        for e in &level.entries {
            let c = self.coefficient_scalar::<S>(level, e.counting);
            sum = sum + c.clone() * c;
        }
        S::pow2(level.order as i32) * sum
    }

    /// `sum_m |<D,h_{j,m}>|^p` over one stored level.
    pub fn level_p_sum(&self, level: &HaarLevel, p: f64) -> f64 {
        let v = level.volume_f64().abs();
        let empty = (level.box_count() - level.entries.len() as u64) as f64;
        let mut sum = empty * v.powf(p);
        for e in &level.entries {
            sum += self.coefficient_f64(level, e.counting).abs().powf(p);
        }
        sum
    }

    /// CSV of all stored boxes, preceded by a `#` metadata line.
    pub fn to_csv(&self) -> String {
        let d = self.dim;
        let mut s = format!(
            "# hodisc-haar v1 d={d} n_points={} precision_bits={} box_limit={}\n",
            self.n_points, self.precision_bits, self.box_limit
        );
        let cols: Vec<String> = (1..=d)
            .map(|i| format!("j_{i}"))
            .chain((1..=d).map(|i| format!("m_{i}")))
            .chain(
                [
                    "counting_num",
                    "counting_scale",
                    "volume_num",
                    "volume_scale",
                    "divisor",
                ]
                .map(String::from),
            )
            .collect();
        s.push_str(&cols.join(","));
        s.push('\n');
        for level in &self.levels {
            let vnum = if level.volume_negative { -1 } else { 1 };
            for e in &level.entries {
                for ji in &level.j {
                    let _ = write!(s, "{ji},");
                }
                for mi in level.unpack_m(e.m) {
                    let _ = write!(s, "{mi},");
                }
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    e.counting,
                    self.counting_scale(),
                    vnum,
                    level.volume_exp,
                    self.n_points
                );
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, meta) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty table".into(),
        })?;
        let rest = meta.strip_prefix("# hodisc-haar v1").ok_or(Error::Parse {
            line: 1,
            msg: "missing '# hodisc-haar v1' header".into(),
        })?;
        let mut fields = std::collections::HashMap::new();
        for kv in rest.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or(Error::Parse {
                line: 1,
                msg: format!("malformed field {kv:?}"),
            })?;
            let v: u64 = v.parse().map_err(|e| Error::Parse {
                line: 1,
                msg: format!("bad {k}: {e}"),
            })?;
            fields.insert(k.to_string(), v);
        }
        let get = |k: &str| {
            fields.get(k).copied().ok_or(Error::Parse {
                line: 1,
                msg: format!("missing {k}"),
            })
        };
        let d = get("d")? as usize;
        let n_points = get("n_points")?;
        let b = get("precision_bits")? as u32;
        let box_limit = get("box_limit")? as u32;
        let mut table = Self::empty(d, n_points, b, box_limit)?;
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('j') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 * d + 5 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected {} fields", 2 * d + 5),
                });
            }
            let perr = |e: std::num::ParseIntError| Error::Parse {
                line: ln + 1,
                msg: e.to_string(),
            };
            let j: Vec<i32> = parts[..d].iter().map(|s| s.parse().map_err(perr)).collect::<Result<_>>()?;
            let m: Vec<u64> = parts[d..2 * d].iter().map(|s| s.parse().map_err(perr)).collect::<Result<_>>()?;
            let counting: i128 = parts[2 * d].parse().map_err(perr)?;
            let scale: u32 = parts[2 * d + 1].parse().map_err(perr)?;
            let divisor: u64 = parts[2 * d + 4].parse().map_err(perr)?;
            if scale != table.counting_scale() || divisor != n_points {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "counting scale or divisor disagrees with header".into(),
                });
            }
            let idx = HaarIndex::new(j, m)?;
            let li = table.level_index(&idx.j).ok_or(Error::Parse {
                line: ln + 1,
                msg: "level outside box limit".into(),
            })?;
            let level = &mut table.levels[li];
            let key = level.pack_m(&idx.m);
            level.entries.push(BoxEntry {
                m: key,
                counting,
                points: 0,
            });
        }
        for level in &mut table.levels {
            level.entries.sort_unstable_by_key(|e| e.m);
        }
        Ok(table)
    }

    fn empty(d: usize, n_points: u64, b: u32, box_limit: u32) -> Result<Self> {
        let levels = level_vectors(d, box_limit)
            .into_iter()
            .map(|j| {
                let (neg, exp) = volume_parts(&j);
                HaarLevel {
                    order: level_order(&j),
                    j,
                    volume_negative: neg,
                    volume_exp: exp,
                    entries: Vec::new(),
                }
            })
            .collect();
        Ok(Self {
            dim: d,
            n_points,
            precision_bits: b,
            box_limit,
            levels,
        })
    }
}

/// Builds the table for `p` with levels `{-1..J-1}^d`, `J = box_limit` (default:
/// the effective precision of the points, which is exactly the support of the
/// counting parts).
pub fn build_table(p: &DyadicPointSet, box_limit: Option<u32>) -> Result<HaarTable> {
    build_table_capped(p, box_limit, DEFAULT_ENTRY_CAP)
}

pub fn build_table_capped(p: &DyadicPointSet, box_limit: Option<u32>, cap: u64) -> Result<HaarTable> {
    if p.is_empty() {
        return Err(invalid("point set is empty"));
    }
    let b = p.effective_precision();
    let pts = p.with_precision(b)?;
    let d = p.dim();
    let n = p.len() as u64;
    let box_limit = box_limit.unwrap_or(b);
    if (box_limit as usize) * d > 64 {
        return Err(Error::Limit(format!(
            "box limit {box_limit} in dimension {d} exceeds 64 position bits"
        )));
    }
    if b as u64 * d as u64 + 64 - (n.leading_zeros() as u64) > 126 {
        return Err(Error::Limit(format!(
            "{n} points at {b} bits in dimension {d} overflow exact counting sums"
        )));
    }
    let bound = n.saturating_mul((box_limit as u64 + 1).saturating_pow(d as u32));
    if bound > cap {
        return Err(Error::Limit(format!(
            "table would hold up to {bound} boxes (cap {cap})"
        )));
    }
    let mut table = HaarTable::empty(d, n, b, box_limit)?;
    table.levels.par_iter_mut().for_each(|level| {
        let mut raw: Vec<BoxEntry> = pts
            .iter()
            .map(|x| {
                let mut m = vec![0u64; d];
                let mut prod: i128 = 1;
                for i in 0..d {
                    let j = level.j[i];
                    if j >= 0 {
                        let j = j as u32;
                        m[i] = if j <= b { x[i] >> (b - j) } else { x[i] << (j - b) };
                    }
                    if prod != 0 {
                        let f = counting_numerator_1d(x[i], b, j, m[i]);
                        // scale each factor to b bits; product lands at scale b*d
                        prod *= f as i128;
                    }
                }
                BoxEntry {
                    m: pack(&level.j, &m),
                    counting: prod,
                    points: 1,
                }
            })
            .collect();
        raw.sort_unstable_by_key(|e| e.m);
        let mut merged: Vec<BoxEntry> = Vec::with_capacity(raw.len());
        for e in raw {
            match merged.last_mut() {
                Some(last) if last.m == e.m => {
                    last.counting += e.counting;
                    last.points += 1;
                }
                _ => merged.push(e),
            }
        }
        level.entries = merged;
    });
    Ok(table)
}

/// Which part of the index space a tail sum covers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailWeight {
    /// `2^|j| sum_m <f,h>^2` over all `j` in `N_{-1}^d`.
    L2,
    /// Same weight, restricted to `j` in `N_0^d`.
    L2Positive,
    /// `2^{|j|(s-1/p+1)q} (sum_m |<f,h>|^p)^{q/p}` over all `j`.
    Besov { p: f64, q: f64, s: f64 },
}

/// Per-coordinate series of the volume-only aggregate: the weighted term of
/// level `j` factorizes as `prod_i f(j_i)`. Returns `(f(-1), f(0), ratio)` with
/// `f(j) = f(0) * ratio^j` for `j >= 0`.
fn coordinate_series(weight: TailWeight) -> (f64, f64, f64) {
    match weight {
        TailWeight::L2 => (0.25, 1.0 / 16.0, 0.25),
        TailWeight::L2Positive => (0.0, 1.0 / 16.0, 0.25),
        TailWeight::Besov { q, s, .. } => {
            ((-q).exp2(), (-2.0 * q).exp2(), ((s - 1.0) * q).exp2())
        }
    }
}

/// Sum over all `j` outside `{-1..J-1}^d` of the volume-only weighted terms,
/// assembled from per-coordinate geometric series by inclusion over the set of
/// coordinates that leave the box.
pub fn volume_tail_sums(box_limit: u32, d: usize, weight: TailWeight) -> Result<f64> {
    let (f_neg, f0, r) = coordinate_series(weight);
    if !(r < 1.0) {
        return Err(invalid("tail series diverges (need s < 1)"));
    }
    let jl = box_limit as i32;
    let inside = f_neg + f0 * (1.0 - r.powi(jl)) / (1.0 - r);
    let outside = f0 * r.powi(jl) / (1.0 - r);
    Ok(tail_by_subsets(d, inside, outside))
}

fn tail_by_subsets<S: Clone + Zero + One + std::ops::Mul<Output = S>>(
    d: usize,
    inside: S,
    outside: S,
) -> S {
    // sum over nonempty subsets of coordinates that exceed the box
    let mut total = S::zero();
    for mask in 1u32..(1 << d) {
        let mut term = S::one();
        for i in 0..d {
            term = term * if mask >> i & 1 == 1 { outside.clone() } else { inside.clone() };
        }
        total = total + term;
    }
    total
}

/// Exact tail for the L2 weights.
pub fn volume_tail_sums_exact(box_limit: u32, d: usize, positive_only: bool) -> BigRational {
    let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
    let f_neg = if positive_only { q(0, 1) } else { q(1, 4) };
    let four_j = <BigRational as Scalar>::pow2(-2 * box_limit as i32);
    // sum_{j>=0} 2^{-2j-4} = 1/12
    let inside = f_neg + q(1, 12) * (q(1, 1) - four_j.clone());
    let outside = q(1, 12) * four_j;
    tail_by_subsets(d, inside, outside)
}
