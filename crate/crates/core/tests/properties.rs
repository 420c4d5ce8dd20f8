use hodisc_core::f2linalg::{rank, BitMatrix, BitVec};
use hodisc_core::genmat::{tezuka_interlaced, tezuka_matrices};
use hodisc_core::haar::{build_table, counting_coeff_1d, volume_coeff, HaarIndex};
use hodisc_core::norms::{
    bmo_dyadic, d0_projection_norm, l2_parseval, l2_warnock, lp_grid_multi, star_discrepancy_exact,
    triebel_bracket, Arithmetic,
};
use hodisc_core::points::{point_at, prefix, DyadicPointSet};
use hodisc_core::studies::{coefficient_bound, BoundCase, Regime};
use hodisc_core::DyadicRational;
use num_rational::BigRational;
use proptest::prelude::*;

fn bitvec(len: usize) -> impl Strategy<Value = BitVec> {
    prop::collection::vec(any::<bool>(), len).prop_map(|b| BitVec::from_bools(&b))
}

fn rows(max_rows: usize, len: usize) -> impl Strategy<Value = Vec<BitVec>> {
    prop::collection::vec(bitvec(len), 0..=max_rows)
}

/// Random point set with `d` coordinates at `b` bits.
fn point_set(max_d: usize, b: u32, max_n: usize) -> impl Strategy<Value = DyadicPointSet> {
    (1..=max_d, 1..=max_n).prop_flat_map(move |(d, n)| {
        prop::collection::vec(0..(1u64 << b), d * n)
            .prop_map(move |coords| DyadicPointSet::new(d, b, coords).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_bounded_and_invariant_under_row_ops(
        rs in rows(8, 11),
        i in 0usize..8,
        j in 0usize..8,
        perm_seed in any::<u64>(),
    ) {
        let r = rank(&rs).unwrap();
        prop_assert!(r <= rs.len().min(11));
        if rs.len() >= 2 {
            let (i, j) = (i % rs.len(), j % rs.len());
            if i != j {
                let mut mixed = rs.clone();
                let add = mixed[j].clone();
                mixed[i].xor_assign(&add);
                prop_assert_eq!(rank(&mixed).unwrap(), r);
            }
            let mut shuffled = rs.clone();
            shuffled.rotate_left((perm_seed as usize) % rs.len());
            shuffled.swap(0, rs.len() - 1);
            prop_assert_eq!(rank(&shuffled).unwrap(), r);
        }
    }

    #[test]
    fn matvec_is_xor_of_selected_columns(rs in rows(9, 7), v in bitvec(7)) {
        let m = BitMatrix::from_rows(rs, 7).unwrap();
        let got = m.matvec(&v).unwrap();
        let mut want = BitVec::zeros(m.rows());
        for c in 0..7 {
            if v.get(c) {
                want.xor_assign(&m.column(c));
            }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn text_round_trip(rs in rows(6, 13)) {
        let m = BitMatrix::from_rows(rs, 13).unwrap();
        prop_assert_eq!(BitMatrix::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn digits_are_linear(a in 0u64..1024, b in 0u64..1024, d in 1usize..=3) {
        let g = tezuka_interlaced(d, 10, None).unwrap();
        let pa = point_at(&g, a).unwrap();
        let pb = point_at(&g, b).unwrap();
        let pab = point_at(&g, a ^ b).unwrap();
        for i in 0..d {
            prop_assert_eq!(pa[i] ^ pb[i], pab[i]);
        }
    }

    #[test]
    fn incremental_range_matches_direct(start in 0u64..200, count in 0u64..56) {
        let g = tezuka_matrices(3, 8, 8).unwrap();
        let p = hodisc_core::points::range(&g, start, count).unwrap();
        for k in 0..count as usize {
            prop_assert_eq!(p.point(k).to_vec(), point_at(&g, start + k as u64).unwrap());
        }
    }

    #[test]
    fn csv_and_binary_round_trip(p in point_set(3, 12, 20)) {
        prop_assert_eq!(DyadicPointSet::from_csv(&p.to_csv()).unwrap(), p.clone());
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        prop_assert_eq!(DyadicPointSet::read_binary(&buf[..]).unwrap(), p);
    }

    #[test]
    fn dyadic_arithmetic_matches_rationals(
        a in -1000i64..1000, sa in 0u32..20, da in 1u64..50,
        b in -1000i64..1000, sb in 0u32..20, db in 1u64..50,
    ) {
        let x = DyadicRational::new(a, sa, da);
        let y = DyadicRational::new(b, sb, db);
        prop_assert_eq!((&x + &y).to_rational(), x.to_rational() + y.to_rational());
        prop_assert_eq!((&x - &y).to_rational(), x.to_rational() - y.to_rational());
        prop_assert_eq!((&x * &y).to_rational(), x.to_rational() * y.to_rational());
        prop_assert_eq!(x.cmp(&y), x.to_rational().cmp(&y.to_rational()));
    }

    #[test]
    fn counting_coeff_bounded(b in 1u32..16, z_seed in any::<u64>(), j in -1i32..16, m_seed in any::<u64>()) {
        let z = z_seed % (1u64 << b);
        let m = if j < 0 { 0 } else { m_seed % (1u64 << j) };
        let c = counting_coeff_1d(z, b, j, m).unwrap().to_f64();
        if j >= 0 {
            prop_assert!(c.abs() <= (-(j as f64) - 1.0).exp2());
            if j as u32 >= b {
                prop_assert_eq!(c, 0.0);
            }
        } else {
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn volume_sign_structure(js in prop::collection::vec(-1i32..10, 1..5)) {
        let v = volume_coeff(&js).to_f64();
        let nonneg = js.iter().filter(|&&j| j >= 0).count();
        prop_assert_eq!(v < 0.0, nonneg % 2 == 1);
        let order: i32 = js.iter().map(|&j| j.max(0)).sum();
        let minus_ones = js.iter().filter(|&&j| j < 0).count() as i32;
        let nonneg = nonneg as i32;
        // |v| = 2^{-2|j|} 2^{-2 #(j_i >= 0)} 2^{-#(j_i = -1)}
        prop_assert_eq!(v.abs(), (-(2 * order + 2 * nonneg + minus_ones) as f64).exp2());
    }

    #[test]
    fn table_matches_direct_coefficients(p in point_set(2, 4, 6), j0 in -1i32..5, j1 in -1i32..5, ms in any::<(u64, u64)>()) {
        let t = build_table(&p, Some(5)).unwrap();
        let mut j = vec![j0, j1];
        j.truncate(p.dim());
        let m: Vec<u64> = j.iter().zip([ms.0, ms.1]).map(|(&ji, s)| if ji < 0 { 0 } else { s % (1u64 << ji) }).collect();
        let idx = HaarIndex::new(j, m).unwrap();
        let direct = hodisc_core::haar::haar_coefficient(&p.with_precision(t.precision_bits()).unwrap(), &idx).unwrap();
        prop_assert_eq!(t.coefficient(&idx).unwrap(), direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn warnock_equals_parseval_exactly(p in point_set(2, 5, 8)) {
        let t = build_table(&p, None).unwrap();
        let a = l2_warnock(&p, Arithmetic::Exact).unwrap();
        let b = l2_parseval(&t, Arithmetic::Exact).unwrap();
        prop_assert_eq!(a.exact_squared, b.exact_squared);
    }

    #[test]
    fn d0_below_bmo_and_bmo_monotone(p in point_set(2, 5, 10)) {
        let t = build_table(&p, None).unwrap();
        let d0 = d0_projection_norm(&t, Arithmetic::Exact).unwrap();
        let d0_sq: BigRational = d0.exact_squared.as_deref().unwrap().parse().unwrap();
        let mut prev = d0_sq.clone();
        for depth in 0..4 {
            let r = bmo_dyadic(&t, depth, Arithmetic::Exact).unwrap();
            let sq: BigRational = r.exact_squared.as_deref().unwrap().parse().unwrap();
            prop_assert!(sq >= prev);
            prev = sq;
        }
        let l2 = l2_parseval(&t, Arithmetic::Exact).unwrap();
        prop_assert!(d0.value <= l2.value + 1e-15);
    }

    #[test]
    fn bracket_is_ordered(p in point_set(2, 6, 12), pp in 1.0f64..4.0, q in 1.0f64..4.0, frac in 0.05f64..0.95) {
        let t = build_table(&p, None).unwrap();
        let lo_p = pp.min(q);
        let hi_p = pp.max(q);
        let s_min = 1.0 / lo_p - 1.0;
        let s_max = (1.0 / hi_p).min(1.0);
        prop_assume!(s_min < s_max);
        let s = s_min + frac * (s_max - s_min);
        let (lo, hi) = triebel_bracket(&t, pp, q, s).unwrap();
        prop_assert!(lo.value <= hi.value * (1.0 + 1e-12));
    }

    #[test]
    fn lp_monotone_and_dominated_by_star(p in point_set(2, 6, 12)) {
        let ps = [1.0, 2.0, 3.0, 6.0];
        let est = lp_grid_multi(&p, &ps, 16).unwrap();
        let star = star_discrepancy_exact(&p).unwrap().value;
        for w in est.windows(2) {
            prop_assert!(w[1].value >= w[0].value - w[0].error_proxy - w[1].error_proxy - 1e-12);
        }
        for e in &est {
            prop_assert!(e.value <= star + e.error_proxy + 1e-12);
        }
        let exact = l2_warnock(&p, Arithmetic::Exact).unwrap().value;
        prop_assert!((est[1].value - exact).abs() <= est[1].error_proxy + 1e-9);
    }

    #[test]
    fn bound_monotone_in_level(k in 1u64..5000, t in 0u32..10, d in 1usize..4) {
        for regime in [Regime::SmallOccupied, Regime::SmallEmpty] {
            let case = BoundCase::new(regime, t, k, d).unwrap();
            let vals: Vec<f64> = (0..48).filter_map(|j| coefficient_bound(j, &case).ok()).collect();
            prop_assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        }
        // within one binary-expansion segment the large-box bound decreases
        let case = BoundCase::new(Regime::Large, t, k, d).unwrap();
        let ld = (k as f64).log2();
        let mut exps: Vec<f64> = vec![0.0];
        exps.extend(case.decomposition.iter().rev().map(|&e| e as f64));
        exps.push(ld);
        let segment = |j: u32| exps.iter().rposition(|&e| e <= j as f64 + t as f64 / 2.0);
        for j in 0..48u32 {
            if let (Ok(a), Ok(b)) = (coefficient_bound(j, &case), coefficient_bound(j + 1, &case)) {
                if segment(j) == segment(j + 1) {
                    prop_assert!(b <= a);
                }
            }
        }
    }
}

#[test]
fn prefix_of_sequence_is_stable() {
    let g = tezuka_interlaced(2, 8, None).unwrap();
    let long = prefix(&g, 200).unwrap();
    let short = prefix(&g, 37).unwrap();
    assert_eq!(long.truncated(37), short);
}
