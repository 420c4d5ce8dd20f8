//! Points of digital sequences as exact dyadic numerators.

use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::genmat::GeneratingMatrixSet;

/// `count` points in `[0,1)^d`; coordinate value is `num / 2^precision_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicPointSet {
    dim: usize,
    precision_bits: u32,
    start_index: u64,
    coords: Vec<u64>,
}

impl DyadicPointSet {
    /// Builds a set from row-major numerators (`coords.len() = count * dim`).
    pub fn new(dim: usize, precision_bits: u32, coords: Vec<u64>) -> Result<Self> {
        Self::with_start(dim, precision_bits, 0, coords)
    }

    pub fn with_start(
        dim: usize,
        precision_bits: u32,
        start_index: u64,
        coords: Vec<u64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        if precision_bits > 64 {
            return Err(Error::OutOfRange {
                what: "precision_bits",
                value: precision_bits as u64,
                limit: 64,
            });
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: (coords.len() / dim + 1) * dim,
                actual: coords.len(),
            });
        }
        if precision_bits < 64 {
            if let Some(&bad) = coords.iter().find(|&&c| c >> precision_bits != 0) {
                return Err(Error::OutOfRange {
                    what: "numerator",
                    value: bad,
                    limit: 1u64 << precision_bits,
                });
            }
        }
        Ok(Self {
            dim,
            precision_bits,
            start_index,
            coords,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn start_index(&self) -> u64 {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, k: usize) -> &[u64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn numerators(&self) -> &[u64] {
        &self.coords
    }

    pub fn coordinate_f64(&self, k: usize, i: usize) -> f64 {
        self.point(k)[i] as f64 / (self.precision_bits as f64).exp2()
    }

    /// Smallest precision at which every numerator is still an integer.
    pub fn effective_precision(&self) -> u32 {
        let tz = self
            .coords
            .iter()
            .filter(|&&c| c != 0)
            .map(|c| c.trailing_zeros())
            .min()
            .unwrap_or(self.precision_bits);
        self.precision_bits - tz.min(self.precision_bits)
    }

    /// Same points at a different precision. Reducing fails if it would drop
    /// nonzero low bits.
    pub fn with_precision(&self, bits: u32) -> Result<Self> {
        let coords = if bits >= self.precision_bits {
            let shift = bits - self.precision_bits;
            if bits > 64 || self.coords.iter().any(|&c| shift > 0 && c >> (64 - shift) != 0) {
                return Err(Error::OutOfRange {
                    what: "precision_bits",
                    value: bits as u64,
                    limit: 64,
                });
            }
            self.coords.iter().map(|&c| c << shift).collect()
        } else {
            let shift = self.precision_bits - bits;
            if self.coords.iter().any(|&c| c & ((1u64 << shift) - 1) != 0) {
                return Err(invalid(format!(
                    "points need {} bits, cannot reduce to {bits}",
                    self.effective_precision()
                )));
            }
            self.coords.iter().map(|&c| c >> shift).collect()
        };
        Self::with_start(self.dim, bits, self.start_index, coords)
    }

    /// First `n` points (`n <= len`).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            dim: self.dim,
            precision_bits: self.precision_bits,
            start_index: self.start_index,
            coords: self.coords[..n * self.dim].to_vec(),
        }
    }

    /// CSV with header `k,num_1,...,num_d,precision_bits`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k");
        for i in 1..=self.dim {
            s.push_str(&format!(",num_{i}"));
        }
        s.push_str(",precision_bits\n");
        for (idx, p) in self.iter().enumerate() {
            s.push_str(&(self.start_index + idx as u64).to_string());
            for c in p {
                s.push(',');
                s.push_str(&c.to_string());
            }
            s.push_str(&format!(",{}\n", self.precision_bits));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut bits = None;
        let mut start = None;
        let mut coords = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('k') || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| -> Result<u64> {
                s.parse().map_err(|e| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad integer {s:?}: {e}"),
                })
            };
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "expected k, numerators and precision".into(),
                });
            }
            let d = fields.len() - 2;
            if *dim.get_or_insert(d) != d {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "inconsistent column count".into(),
                });
            }
            let b = parse(fields[fields.len() - 1])? as u32;
            if *bits.get_or_insert(b) != b {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "inconsistent precision".into(),
                });
            }
            let k = parse(fields[0])?;
            start.get_or_insert(k);
            for f in &fields[1..=d] {
                coords.push(parse(f)?);
            }
        }
        let dim = dim.ok_or(Error::Parse {
            line: 1,
            msg: "no points".into(),
        })?;
        Self::with_start(dim, bits.unwrap(), start.unwrap_or(0), coords)
    }

    /// Little-endian `u64` header `(d, b, N)` followed by `N * d` numerators.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in [self.dim as u64, self.precision_bits as u64, self.len() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.coords {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut buf).map_err(|e| Error::Parse {
                line: 0,
                msg: format!("truncated binary point file: {e}"),
            })?;
            Ok(u64::from_le_bytes(buf))
        };
        let d = next(&mut r)? as usize;
        let b = next(&mut r)? as u32;
        let n = next(&mut r)? as usize;
        let total = n.checked_mul(d).ok_or_else(|| invalid("point count overflow"))?;
        let mut coords = Vec::with_capacity(total.min(1 << 24));
        for _ in 0..total {
            coords.push(next(&mut r)?);
        }
        Self::new(d, b, coords)
    }
}

fn check_supported(g: &GeneratingMatrixSet) -> Result<()> {
    if g.q_rows() > 64 || g.n_cols() > 63 {
        return Err(Error::Limit(format!(
            "point generation supports q_rows <= 64 and n_cols <= 63, got {}x{}",
            g.q_rows(),
            g.n_cols()
        )));
    }
    Ok(())
}

fn index_limit(g: &GeneratingMatrixSet) -> u64 {
    1u64 << g.n_cols()
}

/// Point `k` of the digital sequence, numerators at precision `q_rows`.
pub fn point_at(g: &GeneratingMatrixSet, k: u64) -> Result<Vec<u64>> {
    check_supported(g)?;
    if k >= index_limit(g) {
        return Err(Error::OutOfRange {
            what: "index",
            value: k,
            limit: index_limit(g),
        });
    }
    Ok(g.matrices().iter().map(|m| m.matvec_word_msb(k)).collect())
}

/// Points `k = 0..count`, generated incrementally.
pub fn prefix(g: &GeneratingMatrixSet, count: u64) -> Result<DyadicPointSet> {
    range(g, 0, count)
}

/// Points `k = start..start + count`.
///
/// Going from `k` to `k + 1` flips the trailing ones of `k` and the zero above
/// them, so the new point is the old one XOR the sum of the first `tz + 1`
/// columns, `tz = trailing_zeros(k + 1)`.
pub fn range(g: &GeneratingMatrixSet, start: u64, count: u64) -> Result<DyadicPointSet> {
    check_supported(g)?;
    let end = start
        .checked_add(count)
        .filter(|&e| e <= index_limit(g))
        .ok_or(Error::OutOfRange {
            what: "index",
            value: start.saturating_add(count),
            limit: index_limit(g),
        })?;
    let d = g.dim();
    let ncols = g.n_cols();
    // prefix_cols[j][c] = numerator of column 1 XOR ... XOR column c+1 of C_j
    let prefix_cols: Vec<Vec<u64>> = g
        .matrices()
        .iter()
        .map(|m| {
            let mut acc = 0u64;
            (0..ncols)
                .map(|c| {
                    acc ^= m.matvec_word_msb(1u64 << c);
                    acc
                })
                .collect()
        })
        .collect();
    let mut coords = Vec::with_capacity(count as usize * d);
    if count > 0 {
        let mut cur = point_at(g, start)?;
        coords.extend_from_slice(&cur);
        for k in (start + 1)..end {
            let tz = k.trailing_zeros() as usize;
            for (c, pc) in cur.iter_mut().zip(&prefix_cols) {
                *c ^= pc[tz];
            }
            coords.extend_from_slice(&cur);
        }
    }
    DyadicPointSet::with_start(d, g.q_rows() as u32, start, coords)
}

/// Reference path: every point through [`point_at`].
pub fn prefix_direct(g: &GeneratingMatrixSet, count: u64) -> Result<DyadicPointSet> {
    let mut coords = Vec::with_capacity(count as usize * g.dim());
    for k in 0..count {
        coords.extend(point_at(g, k)?);
    }
    DyadicPointSet::new(g.dim(), g.q_rows() as u32, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmat::{tezuka_interlaced, tezuka_matrices, GeneratingMatrixSet};

    #[test]
    fn identity_examples() {
        let g = GeneratingMatrixSet::identity(1, 4, None).unwrap();
        assert_eq!(point_at(&g, 0).unwrap(), vec![0]);
        assert_eq!(point_at(&g, 3).unwrap(), vec![8 + 4]);
        assert_eq!(point_at(&g, 1).unwrap(), vec![8]);
        let p = prefix(&g, 4).unwrap();
        assert_eq!(p.numerators(), &[0, 8, 4, 12]);
        assert!(point_at(&g, 16).is_err());
        assert!(prefix(&g, 17).is_err());
    }

    #[test]
    fn first_point_is_origin() {
        let g = tezuka_interlaced(2, 6, None).unwrap();
        assert_eq!(prefix(&g, 1).unwrap().point(0), &[0, 0]);
    }

    #[test]
    fn tezuka_first_coordinate_is_van_der_corput() {
        let t = tezuka_matrices(2, 4, 4).unwrap();
        let p = prefix(&t, 4).unwrap();
        let first: Vec<u64> = p.iter().map(|x| x[0]).collect();
        assert_eq!(first, vec![0, 8, 4, 12]);
    }

    #[test]
    fn incremental_matches_direct() {
        let g = tezuka_interlaced(3, 9, None).unwrap();
        assert_eq!(prefix(&g, 512).unwrap(), prefix_direct(&g, 512).unwrap());
        let r = range(&g, 37, 100).unwrap();
        for i in 0..100 {
            assert_eq!(r.point(i), point_at(&g, 37 + i as u64).unwrap().as_slice());
        }
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let g = tezuka_interlaced(2, 5, None).unwrap();
        let p = range(&g, 3, 20).unwrap();
        assert_eq!(DyadicPointSet::from_csv(&p.to_csv()).unwrap(), p.clone());
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (3 + 40));
        let back = DyadicPointSet::read_binary(&buf[..]).unwrap();
        assert_eq!(back.numerators(), p.numerators());
    }

    #[test]
    fn effective_precision_and_rescale() {
        let p = DyadicPointSet::new(1, 8, vec![0, 128, 64, 192]).unwrap();
        assert_eq!(p.effective_precision(), 2);
        let q = p.with_precision(2).unwrap();
        assert_eq!(q.numerators(), &[0, 2, 1, 3]);
        assert!(p.with_precision(1).is_err());
        assert_eq!(q.with_precision(8).unwrap(), p);
    }

    #[test]
    fn rejects_out_of_range_numerators() {
        assert!(DyadicPointSet::new(1, 2, vec![4]).is_err());
        assert!(DyadicPointSet::new(2, 2, vec![1]).is_err());
    }
}
