//! Linear algebra over the two-element field.
//!
//! Rows are packed LSB-first: column `l` (1-based) lives at bit `l - 1` of the
//! row's word array. Matrix-vector products then reduce to word-wise AND and a
//! popcount parity.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// A fixed-length vector over F2.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Low `len` bits of `value`, bit `i` at position `i`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD, "from_u64 supports at most 64 bits");
        let mut v = Self::zeros(len);
        if len > 0 {
            let mask = if len == WORD { u64::MAX } else { (1u64 << len) - 1 };
            v.words[0] = value & mask;
        }
        v
    }

    pub fn unit(len: usize, pos: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(pos, true);
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Parity of the AND of two vectors, i.e. their F2 dot product.
    #[inline]
    pub fn dot(&self, other: &BitVec) -> bool {
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    /// Index of the lowest set bit.
    pub fn lowest_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * WORD + w.trailing_zeros() as usize)
    }

    /// First `len` entries.
    pub fn truncated(&self, len: usize) -> BitVec {
        assert!(len <= self.len);
        let mut out = BitVec {
            len,
            words: self.words[..words_for(len)].to_vec(),
        };
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec(")?;
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

/// Dense matrix over F2 with bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitVec>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![BitVec::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows that all have length `cols`.
    pub fn from_rows(rows: Vec<BitVec>, cols: usize) -> Result<Self> {
        for r in &rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
        }
        Ok(Self { cols, rows })
    }

    pub fn from_bool_rows(rows: &[&[bool]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_rows(rows.iter().map(|r| BitVec::from_bools(r)).collect(), cols)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based `(row, col)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row].get(col)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.rows[row].set(col, value)
    }

    pub fn row(&self, i: usize) -> &BitVec {
        &self.rows[i]
    }

    pub fn row_vecs(&self) -> &[BitVec] {
        &self.rows
    }

    pub fn column(&self, col: usize) -> BitVec {
        let mut out = BitVec::zeros(self.rows());
        for (k, r) in self.rows.iter().enumerate() {
            out.set(k, r.get(col));
        }
        out
    }

    /// Product `M v` over F2.
    pub fn matvec(&self, v: &BitVec) -> Result<BitVec> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        let mut out = BitVec::zeros(self.rows());
        for (k, r) in self.rows.iter().enumerate() {
            if r.dot(v) {
                out.set(k, true);
            }
        }
        Ok(out)
    }

    /// Product with a digit vector packed into a machine word (`cols <= 64`).
    ///
    /// Returns the result bits packed MSB-first into the low `rows` bits, so that
    /// row 1 becomes the most significant. This is exactly the numerator of the
    /// point coordinate at precision `rows`.
    #[inline]
    pub fn matvec_word_msb(&self, digits: u64) -> u64 {
        debug_assert!(self.cols <= WORD && self.rows() <= WORD);
        let q = self.rows();
        let mut acc = 0u64;
        for (k, r) in self.rows.iter().enumerate() {
            let w = r.words.first().copied().unwrap_or(0);
            if (w & digits).count_ones() & 1 == 1 {
                acc |= 1u64 << (q - 1 - k);
            }
        }
        acc
    }

    pub fn submatrix_upper_left(&self, r: usize, c: usize) -> Result<BitMatrix> {
        if r > self.rows() {
            return Err(Error::OutOfRange {
                what: "rows",
                value: r as u64,
                limit: self.rows() as u64,
            });
        }
        if c > self.cols {
            return Err(Error::OutOfRange {
                what: "cols",
                value: c as u64,
                limit: self.cols as u64,
            });
        }
        Ok(BitMatrix {
            cols: c,
            rows: self.rows[..r].iter().map(|row| row.truncated(c)).collect(),
        })
    }

    pub fn rank(&self) -> usize {
        rank_unchecked(self.rows.clone())
    }

    /// Writes the text form: `rows cols`, then one hex string per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows(), self.cols);
        for r in &self.rows {
            s.push_str(&row_to_hex(r));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let (rows, cols) = parse_dims(header, hline + 1)?;
        let mut out = Vec::with_capacity(rows);
        for _ in 0..rows {
            let (ln, l) = lines.next().ok_or(Error::Parse {
                line: hline + 1,
                msg: format!("expected {rows} rows"),
            })?;
            out.push(row_from_hex(l.trim(), cols, ln + 1)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "trailing content after matrix".into(),
            });
        }
        BitMatrix::from_rows(out, cols)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows(), self.cols)?;
        for r in &self.rows {
            writeln!(f, "  {r:?}")?;
        }
        Ok(())
    }
}

impl FromStr for BitMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_text(s)
    }
}

pub(crate) fn parse_dims(header: &str, line: usize) -> Result<(usize, usize)> {
    let mut it = header.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse {
                line,
                msg: format!("missing {what}"),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line,
                msg: format!("bad {what}: {e}"),
            })
    };
    let rows = next("rows")?;
    let cols = next("cols")?;
    Ok((rows, cols))
}

/// Hex digits are read MSB-first: the top bit of the first digit is column 1.
fn row_to_hex(row: &BitVec) -> String {
    let ndig = row.len().div_ceil(4);
    let mut s = String::with_capacity(ndig);
    for d in 0..ndig {
        let mut nib = 0u32;
        for b in 0..4 {
            let col = 4 * d + b;
            if col < row.len() && row.get(col) {
                nib |= 8 >> b;
            }
        }
        s.push(char::from_digit(nib, 16).unwrap());
    }
    s
}

fn row_from_hex(s: &str, cols: usize, line: usize) -> Result<BitVec> {
    let ndig = cols.div_ceil(4);
    if s.len() != ndig {
        return Err(Error::Parse {
            line,
            msg: format!("expected {ndig} hex digits, found {}", s.len()),
        });
    }
    let mut row = BitVec::zeros(cols);
    for (d, ch) in s.chars().enumerate() {
        let nib = ch.to_digit(16).ok_or_else(|| Error::Parse {
            line,
            msg: format!("invalid hex digit {ch:?}"),
        })?;
        for b in 0..4 {
            if nib & (8 >> b) != 0 {
                let col = 4 * d + b;
                if col >= cols {
                    return Err(Error::Parse {
                        line,
                        msg: "bit set beyond column count".into(),
                    });
                }
                row.set(col, true);
            }
        }
    }
    Ok(row)
}

/// Dimension of the F2 span of `rows`.
pub fn rank(rows: &[BitVec]) -> Result<usize> {
    if let Some(first) = rows.first() {
        for r in rows {
            if r.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    actual: r.len(),
                });
            }
        }
    }
    Ok(rank_unchecked(rows.to_vec()))
}

fn rank_unchecked(rows: Vec<BitVec>) -> usize {
    let mut basis = EchelonBasis::default();
    rows.into_iter().filter(|r| basis.insert(r.clone())).count()
}

/// Incremental row basis keyed by pivot (lowest set bit).
///
/// Used by the independence checks to add rows one coordinate at a time and
/// roll back by truncation.
#[derive(Clone, Debug, Default)]
pub struct EchelonBasis {
    rows: Vec<(usize, BitVec)>,
}

impl EchelonBasis {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reduces `v` against the basis; inserts it and returns `true` if it was
    /// independent.
    pub fn insert(&mut self, mut v: BitVec) -> bool {
        // Pivots are kept unique, and each stored row has zeros at every pivot
        // of the rows stored before it.
        for (p, r) in &self.rows {
            if v.get(*p) {
                v.xor_assign(r);
            }
        }
        match v.lowest_one() {
            Some(p) => {
                self.rows.push((p, v));
                true
            }
            None => false,
        }
    }

    pub fn truncate(&mut self, len: usize) {
        self.rows.truncate(len);
    }
}
