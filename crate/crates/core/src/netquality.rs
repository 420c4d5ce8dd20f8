//! Quality parameters of order-1 and order-2 digital nets and sequences.
//!
//! A set of generating matrices is an order-`alpha` digital `(t, n, d)`-net when
//! every admissible row selection is linearly independent (restricted to the
//! first `n` columns). A selection takes, per coordinate, strictly decreasing row
//! indices `i_1 > i_2 > ... > i_nu`; only the `min(nu, alpha)` largest count
//! towards the weight, and the summed weight must not exceed `alpha * n - t`.
//!
//! Because uncounted rows are free, it suffices to test the maximal selection
//! for each choice of counted indices: once `i_1 > ... > i_alpha` are fixed,
//! every row below `i_alpha` may be added without changing the weight, and a
//! subset of an independent set is independent. Per coordinate this leaves
//!
//! * `alpha = 1`: rows `{1..i}` with weight `i`;
//! * `alpha = 2`: `{i}` with weight `i`, or `{1..i_2} + {i_1}` with weight
//!   `i_1 + i_2`, `i_1 > i_2 >= 1`.
//!
//! This closure is cross-checked against full subset enumeration in the tests.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::f2linalg::{rank, BitVec, EchelonBasis};
use crate::genmat::GeneratingMatrixSet;
use crate::points::DyadicPointSet;

/// A row selection whose rows are linearly dependent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Quality parameter the selection violates.
    pub t: usize,
    /// Selected rows per coordinate, 1-based, descending.
    pub rows: Vec<Vec<usize>>,
    pub rank_deficit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TValueReport {
    pub alpha: usize,
    pub n: usize,
    pub d: usize,
    pub t: usize,
    pub witness: Option<Witness>,
}

/// Outcome of a sequence-prefix check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SequenceCheck {
    pub alpha: usize,
    pub t: usize,
    pub n_max: usize,
    pub passed: bool,
    pub failing_n: Option<usize>,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SequenceTValue {
    pub alpha: usize,
    pub n_max: usize,
    pub t: usize,
    /// Minimal net t-value for each `n = 1..=n_max`.
    pub per_n: Vec<usize>,
}

/// Truncated weight of one coordinate's (descending) row indices.
pub fn truncated_weight(rows: &[usize], alpha: usize) -> usize {
    rows.iter().take(alpha).sum()
}

/// Maximal admissible selections for one coordinate with weight `<= budget`.
fn coordinate_options(alpha: usize, budget: usize, max_row: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out = vec![(0, Vec::new())];
    match alpha {
        1 => {
            for i in 1..=budget.min(max_row) {
                out.push((i, (1..=i).rev().collect()));
            }
        }
        2 => {
            for i1 in 1..=budget.min(max_row) {
                out.push((i1, vec![i1]));
                for i2 in 1..i1 {
                    if i1 + i2 > budget {
                        break;
                    }
                    let mut rows = vec![i1];
                    rows.extend((1..=i2).rev());
                    out.push((i1 + i2, rows));
                }
            }
        }
        _ => unreachable!("alpha validated by caller"),
    }
    out
}

fn validate(g: &GeneratingMatrixSet, n: usize, alpha: usize, t: usize) -> Result<()> {
    if !(1..=2).contains(&alpha) {
        return Err(invalid(format!("alpha must be 1 or 2, got {alpha}")));
    }
    if t > alpha * n {
        return Err(Error::OutOfRange {
            what: "t",
            value: t as u64,
            limit: (alpha * n) as u64,
        });
    }
    if g.n_cols() < n {
        return Err(invalid(format!(
            "net check for n={n} needs {n} columns, matrices have {}",
            g.n_cols()
        )));
    }
    if g.q_rows() < alpha * n {
        return Err(invalid(format!(
            "net check needs {} rows, matrices have {}",
            alpha * n,
            g.q_rows()
        )));
    }
    Ok(())
}

struct Search {
    rows: Vec<Vec<BitVec>>,
    alpha: usize,
    max_row: usize,
    t: usize,
}

impl Search {
    fn dfs(
        &self,
        coord: usize,
        budget: usize,
        basis: &mut EchelonBasis,
        picked: &mut Vec<Vec<usize>>,
    ) -> Option<Vec<Vec<usize>>> {
        if coord == self.rows.len() {
            return None;
        }
        for (w, sel) in coordinate_options(self.alpha, budget, self.max_row) {
            let mark = basis.len();
            let independent = sel
                .iter()
                .all(|&r| basis.insert(self.rows[coord][r - 1].clone()));
            picked.push(sel);
            if !independent {
                let mut full = picked.clone();
                full.resize(self.rows.len(), Vec::new());
                return Some(full);
            }
            let found = self.dfs(coord + 1, budget - w, basis, picked);
            picked.pop();
            basis.truncate(mark);
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn run(&self, budget: usize) -> Option<Witness> {
        // Split on the first coordinate so the search parallelizes; the first
        // failing branch in option order is reported.
        let first = coordinate_options(self.alpha, budget, self.max_row);
        let hit = first.into_par_iter().find_map_first(|(w, sel)| {
            let mut basis = EchelonBasis::default();
            let mut picked = vec![sel.clone()];
            let independent = sel.iter().all(|&r| basis.insert(self.rows[0][r - 1].clone()));
            if !independent {
                let mut full = picked;
                full.resize(self.rows.len(), Vec::new());
                return Some(full);
            }
            self.dfs(1, budget - w, &mut basis, &mut picked)
        })?;
        let flat: Vec<BitVec> = hit
            .iter()
            .enumerate()
            .flat_map(|(j, sel)| sel.iter().map(move |&r| self.rows[j][r - 1].clone()))
            .collect();
        let total = flat.len();
        let rk = rank(&flat).expect("rows share a length");
        Some(Witness {
            t: self.t,
            rows: hit,
            rank_deficit: total - rk,
        })
    }
}

/// First violating selection for parameter `t`, or `None` if the matrices
/// form an order-`alpha` digital `(t, n, d)`-net.
pub fn find_violation(
    g: &GeneratingMatrixSet,
    n: usize,
    alpha: usize,
    t: usize,
) -> Result<Option<Witness>> {
    validate(g, n, alpha, t)?;
    let budget = alpha * n - t;
    let rows = g
        .matrices()
        .iter()
        .map(|m| (0..budget).map(|k| m.row(k).truncated(n)).collect())
        .collect();
    let search = Search {
        rows,
        alpha,
        max_row: budget,
        t,
    };
    Ok(search.run(budget))
}

pub fn is_order_alpha_net(g: &GeneratingMatrixSet, n: usize, alpha: usize, t: usize) -> Result<bool> {
    Ok(find_violation(g, n, alpha, t)?.is_none())
}

/// Smallest passing `t`, searched linearly from `hint` (clamped to
/// `0..=alpha*n`). A net for `t` is a net for every larger `t`.
pub fn minimal_t(
    g: &GeneratingMatrixSet,
    n: usize,
    alpha: usize,
    hint: Option<usize>,
) -> Result<TValueReport> {
    validate(g, n, alpha, 0)?;
    let top = alpha * n;
    let mut t = hint.unwrap_or(top).min(top);
    let mut witness;
    if find_violation(g, n, alpha, t)?.is_none() {
        witness = None;
        while t > 0 {
            match find_violation(g, n, alpha, t - 1)? {
                None => t -= 1,
                Some(w) => {
                    witness = Some(w);
                    break;
                }
            }
        }
    } else {
        loop {
            t += 1;
            if find_violation(g, n, alpha, t)?.is_none() {
                break;
            }
        }
        witness = find_violation(g, n, alpha, t - 1)?;
    }
    Ok(TValueReport {
        alpha,
        n,
        d: g.dim(),
        t,
        witness,
    })
}

/// Checks the upper-left `alpha*n x n` submatrices for every `n` with
/// `t/alpha < n <= n_max`.
pub fn is_order_alpha_sequence_prefix(
    g: &GeneratingMatrixSet,
    n_max: usize,
    alpha: usize,
    t: usize,
) -> Result<SequenceCheck> {
    if g.q_rows() < alpha * n_max || g.n_cols() < n_max {
        return Err(invalid(format!(
            "sequence check to n_max={n_max} needs {}x{n_max} matrices, have {}x{}",
            alpha * n_max,
            g.q_rows(),
            g.n_cols()
        )));
    }
    let n_min = t / alpha + 1;
    for n in n_min..=n_max {
        let sub = g.restrict(alpha * n, n)?;
        if let Some(w) = find_violation(&sub, n, alpha, t)? {
            return Ok(SequenceCheck {
                alpha,
                t,
                n_max,
                passed: false,
                failing_n: Some(n),
                witness: Some(w),
            });
        }
    }
    Ok(SequenceCheck {
        alpha,
        t,
        n_max,
        passed: true,
        failing_n: None,
        witness: None,
    })
}

/// Smallest `t` for which the sequence-prefix check passes up to `n_max`.
pub fn minimal_sequence_t(g: &GeneratingMatrixSet, n_max: usize, alpha: usize) -> Result<SequenceTValue> {
    let mut per_n = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let sub = g.restrict(alpha * n, n)?;
        per_n.push(minimal_t(&sub, n, alpha, None)?.t);
    }
    // t works iff every n > t/alpha has per_n[n] <= t
    let t = (0..=alpha * n_max)
        .find(|&t| (t / alpha + 1..=n_max).all(|n| per_n[n - 1] <= t))
        .unwrap_or(alpha * n_max);
    Ok(SequenceTValue {
        alpha,
        n_max,
        t,
        per_n,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FairIntervalAudit {
    pub n: u32,
    pub order: u32,
    pub capacity: u64,
    pub boxes_checked: u64,
    pub max_occupancy: u64,
    pub violations: u64,
    pub passed: bool,
    pub warning: Option<String>,
}

/// Every dyadic box of order `n - ceil(t/alpha)` must hold at most
/// `2^ceil(t/alpha)` of the `2^n` points.
pub fn fair_interval_audit(p: &DyadicPointSet, alpha: usize, t: usize) -> Result<FairIntervalAudit> {
    if alpha == 0 {
        return Err(invalid("alpha must be >= 1"));
    }
    let count = p.len() as u64;
    if !count.is_power_of_two() {
        return Err(invalid(format!("point count {count} is not a power of two")));
    }
    let n = count.trailing_zeros();
    let k = t.div_ceil(alpha) as u32;
    if n < k {
        return Ok(FairIntervalAudit {
            n,
            order: 0,
            capacity: 1 << k,
            boxes_checked: 0,
            max_occupancy: count,
            violations: 0,
            passed: true,
            warning: Some(format!("n = {n} < ceil(t/alpha) = {k}: condition is vacuous")),
        });
    }
    let order = n - k;
    let capacity = 1u64 << k;
    let b = p.precision_bits();
    let d = p.dim();
    let mut boxes_checked = 0u64;
    let mut max_occupancy = 0u64;
    let mut violations = 0u64;
    let mut counts: Vec<u64> = vec![0; 1usize << order];
    for levels in compositions(order as usize, d) {
        counts.iter_mut().for_each(|c| *c = 0);
        for x in p.iter() {
            let mut key = 0usize;
            for (&num, &j) in x.iter().zip(&levels) {
                let j = j as u32;
                let digit = if j <= b { num >> (b - j) } else { num << (j - b) };
                key = (key << j) | digit as usize;
            }
            counts[key] += 1;
        }
        boxes_checked += 1u64 << order;
        for &c in &counts {
            max_occupancy = max_occupancy.max(c);
            if c > capacity {
                violations += 1;
            }
        }
    }
    Ok(FairIntervalAudit {
        n,
        order,
        capacity,
        boxes_checked,
        max_occupancy,
        violations,
        passed: violations == 0,
        warning: None,
    })
}

/// All `d`-tuples of nonnegative integers summing to `total`.
pub fn compositions(total: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == 1 {
            cur.push(total);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in 0..=total {
            cur.push(a);
            rec(total - a, d - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(total, d, &mut Vec::new(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmat::{tezuka_interlaced, tezuka_matrices, GeneratingMatrixSet};
    use crate::points::prefix;

    /// Full enumeration over all row subsets, no closure argument.
    fn brute_force_is_net(g: &GeneratingMatrixSet, n: usize, alpha: usize, t: usize) -> bool {
        let budget = alpha * n - t;
        let d = g.dim();
        let per_coord: Vec<Vec<Vec<usize>>> = (0..d)
            .map(|_| {
                (0u32..(1 << budget))
                    .map(|mask| {
                        (1..=budget)
                            .rev()
                            .filter(|&r| mask >> (r - 1) & 1 == 1)
                            .collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; d];
        loop {
            let sels: Vec<&Vec<usize>> = (0..d).map(|j| &per_coord[j][idx[j]]).collect();
            let w: usize = sels.iter().map(|s| truncated_weight(s, alpha)).sum();
            if w <= budget {
                let rows: Vec<BitVec> = sels
                    .iter()
                    .enumerate()
                    .flat_map(|(j, s)| s.iter().map(move |&r| g.matrix(j).row(r - 1).truncated(n)))
                    .collect();
                if rank(&rows).unwrap() < rows.len() {
                    return false;
                }
            }
            let mut c = 0;
            loop {
                if c == d {
                    return true;
                }
                idx[c] += 1;
                if idx[c] < per_coord[c].len() {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
        }
    }

    #[test]
    fn closure_reduction_matches_brute_force() {
        let sets = [
            tezuka_interlaced(1, 5, None).unwrap(),
            tezuka_interlaced(2, 4, None).unwrap(),
            tezuka_matrices(3, 5, 5).unwrap(),
            GeneratingMatrixSet::identity(2, 5, Some(10)).unwrap(),
        ];
        for g in &sets {
            for alpha in 1..=2 {
                for n in 1..=5usize.min(g.n_cols()) {
                    if g.q_rows() < alpha * n {
                        continue;
                    }
                    if alpha * n * g.dim() > 16 {
                        continue;
                    }
                    let sub = g.restrict(alpha * n, n).unwrap();
                    for t in 0..=alpha * n {
                        assert_eq!(
                            is_order_alpha_net(&sub, n, alpha, t).unwrap(),
                            brute_force_is_net(&sub, n, alpha, t),
                            "kind={} d={} alpha={alpha} n={n} t={t}",
                            g.kind(),
                            g.dim()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn identity_is_zero_net() {
        let g = GeneratingMatrixSet::identity(1, 10, None).unwrap();
        for n in 1..=10 {
            assert!(is_order_alpha_net(&g.restrict(n, n).unwrap(), n, 1, 0).unwrap());
            assert_eq!(minimal_t(&g.restrict(n, n).unwrap(), n, 1, None).unwrap().t, 0);
        }
        let seq = is_order_alpha_sequence_prefix(&g, 10, 1, 0).unwrap();
        assert!(seq.passed);
    }

    #[test]
    fn identity_in_two_dims_is_not_a_zero_net() {
        // Both coordinates equal: first rows coincide.
        let g = GeneratingMatrixSet::identity(2, 4, None).unwrap();
        let rep = minimal_t(&g, 4, 1, Some(0)).unwrap();
        assert_eq!(rep.t, 3);
        let w = rep.witness.unwrap();
        assert_eq!(w.t, 2);
        assert!(w.rank_deficit >= 1);
        let weight: usize = w.rows.iter().map(|r| truncated_weight(r, 1)).sum();
        assert!(weight <= 4 - 2);
    }

    #[test]
    fn witness_reproduces_deficit() {
        let g = tezuka_matrices(3, 6, 6).unwrap();
        let g = &g;
        let rep = minimal_t(&g, 6, 1, Some(0)).unwrap();
        assert_eq!(rep.t, 1);
        let w = rep.witness.expect("t > 0 has a witness");
        let rows: Vec<BitVec> = w
            .rows
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().map(move |&r| g.matrix(j).row(r - 1).truncated(6)))
            .collect();
        assert_eq!(rows.len() - rank(&rows).unwrap(), w.rank_deficit);
        let weight: usize = w.rows.iter().map(|r| truncated_weight(r, 1)).sum();
        assert!(weight <= 6 - w.t);
    }

    #[test]
    fn monotone_in_t() {
        let g = tezuka_interlaced(2, 5, None).unwrap();
        for alpha in 1..=2 {
            let mut seen = false;
            for t in 0..=alpha * 5 {
                let ok = is_order_alpha_net(&g, 5, alpha, t).unwrap();
                assert!(!seen || ok, "alpha={alpha} t={t}");
                seen |= ok;
            }
        }
    }

    #[test]
    fn interlaced_cross_order_consistency() {
        let g = tezuka_interlaced(1, 8, None).unwrap();
        for n in 1..=8 {
            let sub = g.restrict(2 * n, n).unwrap();
            let t2 = minimal_t(&sub, n, 2, Some(1)).unwrap().t;
            assert!(t2 <= 1);
            assert!(is_order_alpha_net(&sub, n, 1, t2.div_ceil(2)).unwrap());
        }
    }

    #[test]
    fn sequence_failure_reports_n() {
        let g = GeneratingMatrixSet::identity(2, 6, None).unwrap();
        let r = is_order_alpha_sequence_prefix(&g, 6, 1, 2).unwrap();
        assert!(!r.passed);
        assert_eq!(r.failing_n, Some(4));
        assert!(r.witness.is_some());
    }

    #[test]
    fn fair_interval_examples() {
        let g = GeneratingMatrixSet::identity(1, 8, None).unwrap();
        for n in 0..=8u32 {
            let p = prefix(&g, 1 << n).unwrap();
            let a = fair_interval_audit(&p, 1, 0).unwrap();
            assert!(a.passed);
            assert_eq!(a.max_occupancy, 1);
            assert_eq!(a.order, n);
        }
        let g = tezuka_interlaced(1, 6, None).unwrap();
        let a = fair_interval_audit(&prefix(&g, 64).unwrap(), 2, 1).unwrap();
        assert!(a.passed);
        assert!(a.max_occupancy <= 2);
        let one = prefix(&g, 1).unwrap();
        let a = fair_interval_audit(&one, 1, 0).unwrap();
        assert_eq!((a.boxes_checked, a.max_occupancy), (1, 1));
        let vac = fair_interval_audit(&prefix(&g, 2).unwrap(), 2, 4).unwrap();
        assert!(vac.passed && vac.warning.is_some());
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(3, 1), vec![vec![3]]);
        assert_eq!(compositions(4, 2).len(), 5);
        assert_eq!(compositions(4, 3).len(), 15);
    }
}
