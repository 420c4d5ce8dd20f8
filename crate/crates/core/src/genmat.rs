//! Generating matrices: identity (van der Corput), Tezuka's generalized
//! Niederreiter matrices built from Laurent expansions, and order-2 matrices
//! obtained by interlacing pairs of order-1 matrices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::f2linalg::{BitMatrix, BitVec};

/// Polynomial over F2, bit `i` holding the coefficient of `x^i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct F2Poly(u128);

impl F2Poly {
    pub const ZERO: F2Poly = F2Poly(0);
    pub const ONE: F2Poly = F2Poly(1);

    pub fn from_bits(bits: u128) -> Self {
        F2Poly(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(self) -> Option<u32> {
        (self.0 != 0).then(|| 127 - self.0.leading_zeros())
    }

    pub fn coeff(self, i: u32) -> bool {
        i < 128 && (self.0 >> i) & 1 == 1
    }

    /// Carry-less product; fails if the result would not fit in 128 bits.
    pub fn checked_mul(self, other: F2Poly) -> Option<F2Poly> {
        match (self.degree(), other.degree()) {
            (None, _) | (_, None) => Some(F2Poly::ZERO),
            (Some(a), Some(b)) if a + b > 127 => None,
            _ => {
                let mut acc = 0u128;
                let mut b = other.0;
                let mut shift = 0;
                while b != 0 {
                    if b & 1 == 1 {
                        acc ^= self.0 << shift;
                    }
                    b >>= 1;
                    shift += 1;
                }
                Some(F2Poly(acc))
            }
        }
    }

    pub fn checked_pow(self, e: u32) -> Option<F2Poly> {
        (0..e).try_fold(F2Poly::ONE, |acc, _| acc.checked_mul(self))
    }

    /// Remainder of division by `divisor` (nonzero).
    pub fn rem(self, divisor: F2Poly) -> F2Poly {
        let dd = divisor.degree().expect("division by zero polynomial");
        let mut r = self.0;
        while r != 0 {
            let dr = 127 - r.leading_zeros();
            if dr < dd {
                break;
            }
            r ^= divisor.0 << (dr - dd);
        }
        F2Poly(r)
    }

    /// Irreducibility by trial division with every polynomial of degree
    /// `1..=deg/2`.
    pub fn is_irreducible(self) -> bool {
        let Some(deg) = self.degree() else {
            return false;
        };
        if deg == 0 {
            return false;
        }
        let half = deg / 2;
        (2u128..(1u128 << (half + 1))).all(|f| !self.rem(F2Poly(f)).is_zero())
    }
}

impl fmt::Debug for F2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for F2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(deg) = self.degree() else {
            return write!(f, "0");
        };
        let mut first = true;
        for i in (0..=deg).rev() {
            if !self.coeff(i) {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            match i {
                0 => write!(f, "1")?,
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

/// The first `count` irreducible polynomials over F2, ordered by degree and,
/// within a degree, by the coefficient bitset read as an integer.
pub fn enumerate_irreducibles(count: usize) -> Vec<F2Poly> {
    // Scanning integers in increasing order yields exactly that ordering.
    (2u128..)
        .map(F2Poly)
        .filter(|p| p.is_irreducible())
        .take(count)
        .collect()
}

/// Coefficients `a_1..a_L` of `x^(deg p - z - 1) / p(x)^i` as a series in `x^-1`.
pub fn laurent_coeffs(p: F2Poly, i: u32, z: u32, len: usize) -> Result<BitVec> {
    let e = p
        .degree()
        .filter(|&e| e >= 1)
        .ok_or_else(|| invalid("polynomial must have degree >= 1"))?;
    if z >= e {
        return Err(Error::OutOfRange {
            what: "z",
            value: z as u64,
            limit: e as u64,
        });
    }
    if i == 0 {
        return Err(invalid("power i must be >= 1"));
    }
    let denom = p
        .checked_pow(i)
        .filter(|d| d.degree().is_some_and(|dd| dd < 127))
        .ok_or_else(|| Error::Limit(format!("({p})^{i} exceeds supported degree")))?;
    let dd = denom.degree().unwrap();
    // Long division: the remainder always has degree < deg(denom), so each
    // shift by x produces at most one new quotient digit.
    let mut rem = 1u128 << (e - z - 1);
    let mut out = BitVec::zeros(len);
    for l in 0..len {
        rem <<= 1;
        if (rem >> dd) & 1 == 1 {
            out.set(l, true);
            rem ^= denom.bits();
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Identity,
    Tezuka,
    TezukaInterlaced,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Identity => "identity",
            MatrixKind::Tezuka => "tezuka",
            MatrixKind::TezukaInterlaced => "tezuka-interlaced",
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(MatrixKind::Identity),
            "tezuka" => Ok(MatrixKind::Tezuka),
            "tezuka-interlaced" | "interlaced" => Ok(MatrixKind::TezukaInterlaced),
            other => Err(invalid(format!("unknown matrix kind {other:?}"))),
        }
    }
}

/// `d` generating matrices of shape `q_rows x n_cols` sharing a sparsity bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingMatrixSet {
    matrices: Vec<BitMatrix>,
    q_rows: usize,
    n_cols: usize,
    row_bound_factor: usize,
    kind: MatrixKind,
}

impl GeneratingMatrixSet {
    /// Validates shapes and the declared row-bound sparsity.
    pub fn new(
        matrices: Vec<BitMatrix>,
        row_bound_factor: usize,
        kind: MatrixKind,
    ) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| invalid("a generating set needs at least one matrix"))?;
        let (q_rows, n_cols) = (first.rows(), first.cols());
        for m in &matrices {
            if m.rows() != q_rows || m.cols() != n_cols {
                return Err(invalid(format!(
                    "matrix shapes differ: {}x{} vs {}x{}",
                    m.rows(),
                    m.cols(),
                    q_rows,
                    n_cols
                )));
            }
        }
        let set = Self {
            matrices,
            q_rows,
            n_cols,
            row_bound_factor,
            kind,
        };
        if let Some((j, k, l)) = set.sparsity_violation() {
            return Err(invalid(format!(
                "matrix {} has a nonzero at row {k}, col {l} beyond factor {row_bound_factor}",
                j + 1
            )));
        }
        Ok(set)
    }

    /// `d` copies of the `n x n` identity, the van der Corput construction.
    pub fn identity(d: usize, n_cols: usize, q_rows: Option<usize>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        let q = q_rows.unwrap_or(n_cols);
        if q < n_cols {
            return Err(invalid("identity needs q_rows >= n_cols"));
        }
        let mut m = BitMatrix::zeros(q, n_cols);
        for i in 0..n_cols {
            m.set(i, i, true);
        }
        Self::new(vec![m; d], 1, MatrixKind::Identity)
    }

    pub fn dim(&self) -> usize {
        self.matrices.len()
    }

    pub fn q_rows(&self) -> usize {
        self.q_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row_bound_factor(&self) -> usize {
        self.row_bound_factor
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn matrices(&self) -> &[BitMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, j: usize) -> &BitMatrix {
        &self.matrices[j]
    }

    /// First `(matrix, row, col)` (1-based row/col) with `row > factor * col` and
    /// a nonzero entry.
    pub fn sparsity_violation(&self) -> Option<(usize, usize, usize)> {
        let r = self.row_bound_factor;
        for (j, m) in self.matrices.iter().enumerate() {
            for k in 0..m.rows() {
                for l in 0..m.cols() {
                    if (k + 1) > r * (l + 1) && m.get(k, l) {
                        return Some((j, k + 1, l + 1));
                    }
                }
            }
        }
        None
    }

    /// Upper-left `rows x cols` restriction of every matrix.
    pub fn restrict(&self, rows: usize, cols: usize) -> Result<Self> {
        let matrices = self
            .matrices
            .iter()
            .map(|m| m.submatrix_upper_left(rows, cols))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            matrices,
            q_rows: rows,
            n_cols: cols,
            row_bound_factor: self.row_bound_factor,
            kind: self.kind,
        })
    }

    pub fn header_line(&self) -> String {
        format!(
            "# hodisc-genmat v1 kind={} d={} n={} q={} rbf={}",
            self.kind,
            self.dim(),
            self.n_cols,
            self.q_rows,
            self.row_bound_factor
        )
    }

    /// Header line, then each matrix in the bit-matrix text format separated by
    /// a blank line.
    pub fn to_text(&self) -> String {
        let mut s = self.header_line();
        s.push('\n');
        let body: Vec<String> = self.matrices.iter().map(|m| m.to_text()).collect();
        s.push_str(&body.join("\n"));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let fields = parse_header(header)?;
        let get = |key: &str| -> Result<&str> {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: format!("header missing {key}"),
                })
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|e| Error::Parse {
                line: 1,
                msg: format!("bad {key}: {e}"),
            })
        };
        let kind: MatrixKind = get("kind")?.parse()?;
        let (d, n, q, rbf) = (num("d")?, num("n")?, num("q")?, num("rbf")?);

        let mut matrices = Vec::with_capacity(d);
        let mut chunk = String::new();
        let flush = |chunk: &mut String, matrices: &mut Vec<BitMatrix>| -> Result<()> {
            if !chunk.trim().is_empty() {
                matrices.push(BitMatrix::from_text(chunk)?);
            }
            chunk.clear();
            Ok(())
        };
        for line in lines {
            if line.trim().is_empty() {
                flush(&mut chunk, &mut matrices)?;
            } else {
                chunk.push_str(line);
                chunk.push('\n');
            }
        }
        flush(&mut chunk, &mut matrices)?;
        if matrices.len() != d {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares d={d}, found {} matrices", matrices.len()),
            });
        }
        let set = Self::new(matrices, rbf, kind)?;
        if set.n_cols != n || set.q_rows != q {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "header declares {q}x{n}, matrices are {}x{}",
                    set.q_rows, set.n_cols
                ),
            });
        }
        Ok(set)
    }
}

fn parse_header(line: &str) -> Result<Vec<(&str, &str)>> {
    let rest = line
        .strip_prefix("# hodisc-genmat v1")
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing '# hodisc-genmat v1' header".into(),
        })?;
    rest.split_whitespace()
        .map(|kv| {
            kv.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("malformed header field {kv:?}"),
            })
        })
        .collect()
}

/// Tezuka's matrices for the first `d_prime` irreducible polynomials.
///
/// Row `k` (1-based) of matrix `j` holds the expansion of
/// `x^(e_j - z - 1) / p_j^i` where `k - 1 = (i - 1) e_j + z`.
pub fn tezuka_matrices(d_prime: usize, q_rows: usize, n_cols: usize) -> Result<GeneratingMatrixSet> {
    if d_prime == 0 {
        return Err(invalid("d_prime must be >= 1"));
    }
    let polys = enumerate_irreducibles(d_prime);
    let matrices = polys
        .iter()
        .map(|&p| {
            let e = p.degree().unwrap() as usize;
            let rows = (0..q_rows)
                .map(|k| {
                    let i = (k / e + 1) as u32;
                    let z = (k % e) as u32;
                    laurent_coeffs(p, i, z, n_cols)
                })
                .collect::<Result<Vec<_>>>()?;
            BitMatrix::from_rows(rows, n_cols)
        })
        .collect::<Result<Vec<_>>>()?;
    GeneratingMatrixSet::new(matrices, 1, MatrixKind::Tezuka)
}

/// Sum of `deg(p_j) - 1` over the first `d_prime` irreducibles.
pub fn tezuka_t_value(d_prime: usize) -> usize {
    enumerate_irreducibles(d_prime)
        .iter()
        .map(|p| p.degree().unwrap() as usize - 1)
        .sum()
}

/// Interlaces `2d` matrices into `d` with factor 2: row `2u + v` of `E_j` is row
/// `u + 1` of `C_{2(j-1)+v}`, `v` in `{1, 2}`.
pub fn interlace(source: &GeneratingMatrixSet) -> Result<GeneratingMatrixSet> {
    let sd = source.dim();
    if sd % 2 != 0 {
        return Err(invalid(format!(
            "interlacing needs an even source dimension, got {sd}"
        )));
    }
    let q = source.q_rows();
    let matrices = (0..sd / 2)
        .map(|j| {
            let (a, b) = (source.matrix(2 * j), source.matrix(2 * j + 1));
            let rows = (0..q)
                .flat_map(|u| [a.row(u).clone(), b.row(u).clone()])
                .collect();
            BitMatrix::from_rows(rows, source.n_cols())
        })
        .collect::<Result<Vec<_>>>()?;
    let kind = match source.kind() {
        MatrixKind::Tezuka => MatrixKind::TezukaInterlaced,
        k => k,
    };
    GeneratingMatrixSet::new(matrices, 2 * source.row_bound_factor(), kind)
}

/// Inverse of [`interlace`]: splits each matrix back into its two sources.
pub fn deinterlace(set: &GeneratingMatrixSet) -> Result<Vec<BitMatrix>> {
    if set.q_rows() % 2 != 0 {
        return Err(invalid("interlaced matrices have an even row count"));
    }
    let mut out = Vec::with_capacity(2 * set.dim());
    for m in set.matrices() {
        for v in 0..2 {
            let rows = (0..m.rows() / 2).map(|u| m.row(2 * u + v).clone()).collect();
            out.push(BitMatrix::from_rows(rows, m.cols())?);
        }
    }
    Ok(out)
}

/// Order-2 matrices for dimension `d`: Tezuka matrices for `2d` polynomials with
/// `n_cols` columns, interlaced. `q_rows` defaults to `2 * n_cols`.
pub fn tezuka_interlaced(d: usize, n_cols: usize, q_rows: Option<usize>) -> Result<GeneratingMatrixSet> {
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    let q = q_rows.unwrap_or(2 * n_cols);
    if q % 2 != 0 {
        return Err(invalid("interlaced row count must be even"));
    }
    interlace(&tezuka_matrices(2 * d, q / 2, n_cols)?)
}

/// Builds any supported kind. `dim` is the output dimension.
pub fn build(kind: MatrixKind, dim: usize, n_cols: usize, q_rows: Option<usize>) -> Result<GeneratingMatrixSet> {
    match kind {
        MatrixKind::Identity => GeneratingMatrixSet::identity(dim, n_cols, q_rows),
        MatrixKind::Tezuka => tezuka_matrices(dim, q_rows.unwrap_or(n_cols), n_cols),
        MatrixKind::TezukaInterlaced => tezuka_interlaced(dim, n_cols, q_rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(bits: u128) -> F2Poly {
        F2Poly::from_bits(bits)
    }

    /// Irreducible iff no product of two non-constant polynomials equals it.
    fn irreducible_by_products(p: F2Poly) -> bool {
        let deg = p.degree().unwrap();
        if deg == 0 {
            return false;
        }
        for a in 2u128..(1 << deg) {
            for b in 2u128..(1 << deg) {
                if poly(a).checked_mul(poly(b)) == Some(p) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn irreducibles_match_product_oracle() {
        let oracle: Vec<F2Poly> = (2u128..128)
            .map(poly)
            .filter(|&p| irreducible_by_products(p))
            .collect();
        let got = enumerate_irreducibles(oracle.len());
        assert_eq!(got, oracle);
    }

    #[test]
    fn irreducible_examples() {
        assert_eq!(enumerate_irreducibles(2), vec![poly(0b10), poly(0b11)]);
        assert_eq!(enumerate_irreducibles(3)[2], poly(0b111));
        let five = enumerate_irreducibles(5);
        let degs: Vec<u32> = five.iter().map(|p| p.degree().unwrap()).collect();
        assert_eq!(degs, vec![1, 1, 2, 3, 3]);
        assert_eq!(&five[3..], &[poly(0b1011), poly(0b1101)]);
    }

    fn bits(v: &BitVec) -> Vec<u8> {
        v.iter().map(|b| b as u8).collect()
    }

    #[test]
    fn laurent_examples() {
        assert_eq!(bits(&laurent_coeffs(poly(0b10), 1, 0, 4).unwrap()), [1, 0, 0, 0]);
        assert_eq!(bits(&laurent_coeffs(poly(0b11), 1, 0, 4).unwrap()), [1, 1, 1, 1]);
        assert_eq!(bits(&laurent_coeffs(poly(0b111), 1, 1, 3).unwrap()), [0, 1, 1]);
        assert!(laurent_coeffs(poly(0b111), 1, 2, 3).is_err());
    }

    /// p^i * sum a_l x^-l must equal x^(e-z-1) up to terms below x^(-L + i e).
    fn remultiply_ok(p: F2Poly, i: u32, z: u32, len: usize) -> bool {
        let a = laurent_coeffs(p, i, z, len).unwrap();
        let e = p.degree().unwrap() as i64;
        let pi = p.checked_pow(i).unwrap();
        let dd = pi.degree().unwrap() as i64;
        // product coefficient of x^s for s >= -len + dd
        for s in (-(len as i64) + dd)..=dd {
            let mut c = false;
            for l in 1..=len as i64 {
                let k = s + l; // power of p^i
                if (0..=dd).contains(&k) && pi.coeff(k as u32) && a.get((l - 1) as usize) {
                    c = !c;
                }
            }
            let expected = s == e - z as i64 - 1;
            if c != expected {
                return false;
            }
        }
        true
    }

    #[test]
    fn laurent_remultiplication_oracle() {
        for p in enumerate_irreducibles(8) {
            let e = p.degree().unwrap();
            for i in 1..5 {
                for z in 0..e {
                    assert!(remultiply_ok(p, i, z, 40), "p={p} i={i} z={z}");
                }
            }
        }
    }

    #[test]
    fn tezuka_first_matrix_is_identity() {
        let g = tezuka_matrices(1, 6, 6).unwrap();
        assert_eq!(g.matrix(0), &BitMatrix::identity(6));
    }

    #[test]
    fn tezuka_second_matrix_pascal_pattern() {
        // Row k is 1/(x+1)^k shifted: binomial coefficients mod 2, upper triangular.
        let g = tezuka_matrices(2, 4, 4).unwrap();
        let c2 = g.matrix(1);
        for k in 0..4 {
            for l in 0..4 {
                let expected = l >= k && binom_odd(l, k);
                assert_eq!(c2.get(k, l), expected, "k={k} l={l}");
            }
        }
        assert_eq!(
            c2,
            &BitMatrix::from_bool_rows(&[
                &[true, true, true, true],
                &[false, true, false, true],
                &[false, false, true, true],
                &[false, false, false, true],
            ])
            .unwrap()
        );
    }

    fn binom_odd(n: usize, k: usize) -> bool {
        (n & k) == k
    }

    #[test]
    fn tezuka_sparsity_and_t_value() {
        let g = tezuka_matrices(5, 12, 12).unwrap();
        assert_eq!(g.row_bound_factor(), 1);
        assert!(g.sparsity_violation().is_none());
        assert_eq!(tezuka_t_value(2), 0);
        assert_eq!(tezuka_t_value(3), 1);
        assert_eq!(tezuka_t_value(5), 5);
    }

    #[test]
    fn interlace_identity_example() {
        let id = BitMatrix::identity(2);
        let src = GeneratingMatrixSet::new(vec![id.clone(), id], 1, MatrixKind::Identity).unwrap();
        let e = interlace(&src).unwrap();
        assert_eq!(e.dim(), 1);
        assert_eq!(e.n_cols(), 2);
        assert_eq!(e.q_rows(), 4);
        assert_eq!(e.row_bound_factor(), 2);
        assert_eq!(
            e.matrix(0),
            &BitMatrix::from_bool_rows(&[
                &[true, false],
                &[true, false],
                &[false, true],
                &[false, true],
            ])
            .unwrap()
        );
    }

    #[test]
    fn interlace_rejects_odd_dimension() {
        let src = tezuka_matrices(3, 4, 4).unwrap();
        assert!(interlace(&src).is_err());
    }

    #[test]
    fn deinterlace_recovers_source() {
        let src = tezuka_matrices(4, 7, 7).unwrap();
        let e = interlace(&src).unwrap();
        assert!(e.sparsity_violation().is_none());
        assert_eq!(deinterlace(&e).unwrap(), src.matrices().to_vec());
    }

    #[test]
    fn text_round_trip() {
        let g = tezuka_interlaced(2, 5, None).unwrap();
        let txt = g.to_text();
        assert!(txt.starts_with("# hodisc-genmat v1 kind=tezuka-interlaced d=2 n=5 q=10 rbf=2\n"));
        assert_eq!(GeneratingMatrixSet::from_text(&txt).unwrap(), g);
    }

    #[test]
    fn new_rejects_sparsity_violation() {
        let mut m = BitMatrix::identity(3);
        m.set(2, 0, true);
        assert!(GeneratingMatrixSet::new(vec![m], 1, MatrixKind::Identity).is_err());
    }
}
