//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.
//! Run with `cargo test -p hodisc-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use hodisc_core::genmat::{tezuka_interlaced, tezuka_matrices};
use hodisc_core::haar::{build_table, counting_coeff_1d, volume_coeff, volume_tail_sums, volume_tail_sums_exact, TailWeight};
use hodisc_core::netquality::{fair_interval_audit, is_order_alpha_sequence_prefix, minimal_sequence_t, minimal_t};
use hodisc_core::norms::{l2_parseval, l2_warnock, Arithmetic};
use hodisc_core::points::{prefix, DyadicPointSet};
use hodisc_core::studies::{bound_ratio_audit, lift_inequality_check, scaling_study, spread, Regime, ScalingRow, StudyNorm};
use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn report(id: u32, ok: bool, what: &str) {
    println!("acceptance {id:>2} {}: {what}", if ok { "PASS" } else { "FAIL" });
}

fn rows_str(rows: &[ScalingRow]) -> String {
    rows.iter()
        .map(|r| format!("{}:{:.4}", r.n_points, r.normalized))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn acceptance_01_tezuka_t_values() {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for d_prime in 1..=2 {
        for n in 1..=10 {
            let g = tezuka_matrices(d_prime, n, n).unwrap();
            let t = minimal_t(&g, n, 1, None).unwrap().t;
            ok &= t == 0;
            if t != 0 {
                notes.push(format!("d'={d_prime} n={n} t={t}"));
            }
        }
    }
    let g3 = tezuka_matrices(3, 8, 8).unwrap();
    let per_n: Vec<usize> = (1..=8)
        .map(|n| minimal_t(&g3.restrict(n, n).unwrap(), n, 1, None).unwrap().t)
        .collect();
    // one row per coordinate cannot be dependent, so n = 1 always has t = 0
    ok &= per_n[0] == 0 && per_n[1..].iter().all(|&t| t == 1);
    let seq = minimal_sequence_t(&g3, 8, 1).unwrap();
    ok &= seq.t == 1;
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    report(
        1,
        ok,
        &format!(
            "d'=1,2: t=0 for n<=10 {notes:?}; d'=3 per-n t {per_n:?}, sequence t={}; {elapsed:.2?}",
            seq.t
        ),
    );
    assert!(ok);
}

#[test]
fn acceptance_02_interlaced_sequence() {
    let start = Instant::now();
    let g = tezuka_interlaced(1, 8, None).unwrap();
    let check = is_order_alpha_sequence_prefix(&g, 8, 2, 1).unwrap();
    let strict = is_order_alpha_sequence_prefix(&g, 8, 2, 0).unwrap();
    let elapsed = start.elapsed();
    let ok = check.passed && elapsed < Duration::from_secs(300);
    report(
        2,
        ok,
        &format!(
            "order-2 t=1 prefix to n=8 passed={}; (t=0 also passes: {}); {elapsed:.2?}",
            check.passed, strict.passed
        ),
    );
    assert!(ok);
}

#[test]
fn acceptance_03_fair_intervals() {
    let g = tezuka_interlaced(1, 10, None).unwrap();
    let mut ok = true;
    let mut worst = 0;
    let mut violations = 0;
    for n in 1..=10u32 {
        let p = prefix(&g, 1 << n).unwrap();
        let a = fair_interval_audit(&p, 2, 1).unwrap();
        ok &= a.passed && a.order == n - 1 && a.capacity == 2;
        worst = worst.max(a.max_occupancy);
        violations += a.violations;
    }
    report(3, ok, &format!("n=1..10, order n-1 boxes: max occupancy {worst}, violations {violations}"));
    assert!(ok);
}

#[test]
fn acceptance_04_l2_routes_agree() {
    let mut ok = true;
    let mut exact_cases = 0;
    for d in 1..=2 {
        let g = tezuka_interlaced(d, 4, None).unwrap();
        for n in 1..=16 {
            let p = prefix(&g, n).unwrap();
            let t = build_table(&p, None).unwrap();
            let a = l2_warnock(&p, Arithmetic::Exact).unwrap();
            let b = l2_parseval(&t, Arithmetic::Exact).unwrap();
            ok &= a.exact_squared.is_some() && a.exact_squared == b.exact_squared;
            exact_cases += 1;
        }
    }
    let mut worst = 0.0f64;
    for d in 1..=3 {
        let g = tezuka_interlaced(d, 7, None).unwrap();
        for n in 1..=128 {
            let p = prefix(&g, n).unwrap();
            let t = build_table(&p, None).unwrap();
            let a = l2_warnock(&p, Arithmetic::Float).unwrap().value;
            let b = l2_parseval(&t, Arithmetic::Float).unwrap().value;
            worst = worst.max((a - b).abs());
        }
    }
    ok &= worst <= 1e-9;
    report(
        4,
        ok,
        &format!("{exact_cases} exact rational matches (N<=16, d=1,2); float max |diff| {worst:.3e} (N<=128, d<=3)"),
    );
    assert!(ok);
}

/// Midpoint rule over `cells` equal cells; exact for piecewise-linear
/// integrands whose breaks lie on the cell grid.
fn midpoint(f: impl Fn(f64) -> f64, cells: u64) -> f64 {
    let h = 1.0 / cells as f64;
    (0..cells).map(|k| f((k as f64 + 0.5) * h) * h).sum()
}

fn haar_1d(j: i32, m: u64, x: f64) -> f64 {
    if j < 0 {
        return 1.0;
    }
    let w = (-(j as f64)).exp2();
    let left = m as f64 * w;
    if x < left || x >= left + w {
        0.0
    } else if x < left + w / 2.0 {
        1.0
    } else {
        -1.0
    }
}

/// `sum over j in {-1..cut}^d outside {-1..J-1}^d` of the weighted
/// volume-only level terms, computed term by term.
fn brute_tail(jl: i32, d: usize, weight: TailWeight, cut: i32) -> f64 {
    let mut total = 0.0;
    let side = (cut + 2) as usize;
    for code in 0..side.pow(d as u32) {
        let mut c = code;
        let mut js = vec![0i32; d];
        for j in js.iter_mut() {
            *j = (c % side) as i32 - 1;
            c /= side;
        }
        if js.iter().all(|&j| j < jl) {
            continue;
        }
        let order: i32 = js.iter().map(|&j| j.max(0)).sum();
        let v = volume_coeff(&js).to_f64().abs();
        let boxes = (order as f64).exp2();
        total += match weight {
            TailWeight::L2 => boxes * boxes * v * v,
            TailWeight::L2Positive => {
                if js.iter().any(|&j| j < 0) {
                    0.0
                } else {
                    boxes * boxes * v * v
                }
            }
            TailWeight::Besov { p, q, s } => {
                (order as f64 * (s - 1.0 / p + 1.0) * q).exp2() * (boxes * v.powf(p)).powf(q / p)
            }
        };
    }
    total
}

#[test]
fn acceptance_05_closed_form_oracles() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let cases = 120;
    let mut worst_vol = 0.0f64;
    for _ in 0..cases {
        let d = rng.gen_range(1..=3);
        let js: Vec<i32> = (0..d).map(|_| rng.gen_range(-1..=7)).collect();
        let quad: f64 = js
            .iter()
            .map(|&j| {
                let m = if j < 0 { 0 } else { rng.gen_range(0..1u64 << j) };
                midpoint(|x| x * haar_1d(j, m, x), 1 << 12)
            })
            .product();
        worst_vol = worst_vol.max((quad - volume_coeff(&js).to_f64()).abs());
    }
    let mut worst_cnt = 0.0f64;
    for _ in 0..cases {
        let b = rng.gen_range(1..=10u32);
        let z = rng.gen_range(0..1u64 << b);
        let j = rng.gen_range(-1..=(b as i32 + 1));
        let m = if j < 0 { 0 } else { rng.gen_range(0..1u64 << j) };
        let zf = z as f64 / (b as f64).exp2();
        let quad = midpoint(|x| if x > zf { haar_1d(j, m, x) } else { 0.0 }, 1 << 14);
        let exact = counting_coeff_1d(z, b, j, m).unwrap().to_f64();
        worst_cnt = worst_cnt.max((quad - exact).abs());
    }
    let mut worst_tail = 0.0f64;
    for k in 0..cases {
        let d = 1 + k % 3;
        let jl = rng.gen_range(0..=6);
        let weight = match rng.gen_range(0..3) {
            0 => TailWeight::L2,
            1 => TailWeight::L2Positive,
            _ => {
                let p = rng.gen_range(1.0..4.0);
                let s = rng.gen_range((1.0 / p - 1.0)..(1.0f64 / p).min(1.0));
                TailWeight::Besov { p, q: rng.gen_range(1.0..4.0), s }
            }
        };
        let cut = if d == 3 { 40 } else { 60 };
        let brute = brute_tail(jl, d, weight, cut);
        let closed = volume_tail_sums(jl as u32, d, weight).unwrap();
        worst_tail = worst_tail.max((brute - closed).abs());
    }
    let twelfth = volume_tail_sums_exact(0, 1, false) == BigRational::new(1.into(), 12.into());
    let ok = worst_vol < 1e-12 && worst_cnt < 1e-12 && worst_tail < 1e-12 && twelfth;
    report(
        5,
        ok,
        &format!(
            "{cases} cases each: volume {worst_vol:.2e}, counting {worst_cnt:.2e}, tail {worst_tail:.2e}; 1-d tail 1/12 exact={twelfth}"
        ),
    );
    assert!(ok);
}

#[test]
fn acceptance_06_coefficient_bound_ratios() {
    let mut ok = true;
    let mut lines = Vec::new();
    for (d, t) in [(1usize, 1u32), (2, 8)] {
        let g = tezuka_interlaced(d, 10, None).unwrap();
        let audits: Vec<_> = (4..=10)
            .map(|k| {
                let table = build_table(&prefix(&g, 1 << k).unwrap(), None).unwrap();
                bound_ratio_audit(&table, &g, t).unwrap()
            })
            .collect();
        for regime in [Regime::SmallOccupied, Regime::SmallEmpty, Regime::Large] {
            let vals: Vec<f64> = audits.iter().filter_map(|a| a.max_ratio(regime)).collect();
            if vals.is_empty() {
                continue;
            }
            let finite = vals.iter().all(|v| v.is_finite() && *v > 0.0);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            let fine = finite && hi / lo < 4.0;
            ok &= fine;
            lines.push(format!("d={d} {regime}: spread {:.3} over {} N", hi / lo, vals.len()));
        }
    }
    report(6, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn acceptance_07_scaling() {
    let start = Instant::now();
    let g = tezuka_interlaced(2, 12, None).unwrap();
    let exps: Vec<u32> = (4..=12).collect();
    let upper = |rows: &[ScalingRow]| -> Vec<ScalingRow> { rows.iter().filter(|r| r.n_points >= 1 << 8).cloned().collect() };
    let cases = [
        ("L2", StudyNorm::L2),
        ("BMO", StudyNorm::BmoDyadic { depth: None }),
        ("Besov(2,2,0)", StudyNorm::Besov { p: 2.0, q: 2.0, s: 0.0 }),
        ("Besov(2,2,0.25)", StudyNorm::Besov { p: 2.0, q: 2.0, s: 0.25 }),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, norm) in cases {
        let rows = scaling_study(&g, norm, &exps).unwrap();
        let sp = spread(&upper(&rows));
        ok &= sp <= 3.0;
        lines.push(format!("{name} spread {sp:.3} [{}]", rows_str(&rows)));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    report(7, ok, &format!("{}; {elapsed:.2?}", lines.join("; ")));
    assert!(ok);
}

#[test]
fn acceptance_08_orlicz_shape() {
    let g = tezuka_interlaced(2, 10, None).unwrap();
    let exps: Vec<u32> = (4..=10).collect();
    let rows = scaling_study(&g, StudyNorm::Orlicz { beta: 2.0, resolution: 256 }, &exps).unwrap();
    let sp = spread(&rows);
    let ok = sp <= 4.0 && rows.iter().all(|r| (r.exponent - 1.5).abs() < 1e-15);
    report(8, ok, &format!("spread {sp:.3} [{}]", rows_str(&rows)));
    assert!(ok);
}

#[test]
fn acceptance_09_lifting_inequality() {
    let g = tezuka_interlaced(1, 6, None).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for n in 0..=6u32 {
        let c = lift_inequality_check(&g, 1 << n).unwrap();
        ok &= c.holds;
        lines.push(format!("N={}: {:.4}>={:.4}", c.n_points, c.lhs, c.rhs));
    }
    report(9, ok, &lines.join(" "));
    assert!(ok);
}

#[test]
fn acceptance_10_besov_floor() {
    let g = tezuka_interlaced(2, 12, None).unwrap();
    let exps: Vec<u32> = (4..=12).collect();
    let rows = scaling_study(&g, StudyNorm::Besov { p: 2.0, q: 2.0, s: 0.25 }, &exps).unwrap();
    let mut vals: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let min = vals[0];
    let ok = min > 0.01 * median;
    report(10, ok, &format!("min {min:.4} vs median {median:.4} (ratio {:.3})", min / median));
    assert!(ok);
}

#[test]
fn lifted_point_set_is_a_net() {
    // a lifted sequence prefix of 2^n points is itself equidistributed in
    // elementary boxes of volume 2^-(n-1), like the sequence itself
    let g = tezuka_interlaced(1, 6, None).unwrap();
    let p = prefix(&g, 64).unwrap();
    let lifted = hodisc_core::studies::lift_sequence(&p).unwrap();
    let audit = fair_interval_audit(&lifted.points, 1, 1).unwrap();
    assert!(lifted.exact && audit.passed, "{audit:?}");
    let _: &DyadicPointSet = &lifted.points;
}
