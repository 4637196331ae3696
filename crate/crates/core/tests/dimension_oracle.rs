//! Reports checked against closed forms computed directly from integer
//! log-orders.

use dendrodim::dimension::{
    analyze, finite_type_dimensions, full_dimension_detector, functional_identity_check, lemma32_check,
    monotone_convergence_check, regular_branch_horizon, AnalysisOptions, Real, Sign,
};
use dendrodim::layers::DefiningSequence;
use dendrodim::permgroup::{OrderSequence, TruncatedGroup};
use dendrodim::tree::{Permutation, Portrait, Vertex};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn ex(x: &Real) -> BigRational {
    x.exact().expect("exact value").clone()
}

fn from_logs(m: usize, logs: &[u32]) -> OrderSequence {
    OrderSequence { m, orders: logs.iter().map(|&e| BigUint::from(m).pow(e)).collect() }
}

/// `r_n = log|G_1| + m log|G_(n-1)| - log|G_n|`, with `log|G_0| = 0`.
fn oracle_r(m: i64, logs: &[u32]) -> Vec<i64> {
    let l: Vec<i64> = logs.iter().map(|&x| x as i64).collect();
    (0..l.len()).map(|i| l[0] + m * if i == 0 { 0 } else { l[i - 1] } - l[i]).collect()
}

/// Log-orders of `G_S` from per-layer log sizes.
fn cumulative(sizes: &[u32]) -> Vec<u32> {
    sizes.iter().scan(0, |acc, &s| {
        *acc += s;
        Some(*acc)
    }).collect()
}

/// `log_q|S_n| = q log_q|S_(n-1)| - mu_n`, `S_0 = Z/q`.
fn layer_sizes(q: u32, mu: &[u32]) -> Vec<u32> {
    let mut out = vec![1];
    for &d in mu {
        let last = *out.last().unwrap();
        out.push(q * last - d);
    }
    out
}

fn exact_opts() -> AnalysisOptions {
    AnalysisOptions::default()
}

#[test]
fn full_binary_tree_has_dimension_one() {
    let logs: Vec<u32> = (1..=6).map(|n| (1 << n) - 1).collect();
    let rep = analyze(&from_logs(2, &logs), &BigUint::from(2u32), &exact_opts()).unwrap();
    assert!(rep.r.iter().chain(&rep.s).all(|x| ex(x).is_zero()));
    assert!(rep.estimates.iter().all(|e| ex(e) == BigRational::one()));
    assert_eq!(regular_branch_horizon(&rep).unwrap().start, 1);
    assert!(lemma32_check(&rep));
    let fi = functional_identity_check(&rep).unwrap();
    assert!(ex(&fi.lhs).is_zero() && ex(&fi.rhs).is_zero() && ex(&fi.deviation).is_zero());
    assert!(finite_type_dimensions(&rep).unwrap().iter().all(|d| ex(d) == BigRational::one()));
}

#[test]
fn ternary_full_group_has_zero_r() {
    let logs: Vec<u32> = (1..=5).map(|n| (3u32.pow(n) - 1) / 2).collect();
    let rep = analyze(&from_logs(3, &logs), &BigUint::from(3u32), &exact_opts()).unwrap();
    assert!(rep.r.iter().all(|x| ex(x).is_zero()));
    assert!(lemma32_check(&rep));
}

#[test]
fn regular_branch_half() {
    // mu = (1, 0, 0, 0) at q = 2
    let logs = cumulative(&layer_sizes(2, &[1, 0, 0, 0]));
    assert_eq!(logs, vec![1, 2, 4, 8, 16]);
    let rep = analyze(
        &from_logs(2, &logs),
        &BigUint::from(2u32),
        &AnalysisOptions { precision_bits: None, cap: Some(q(1, 1)) },
    )
    .unwrap();
    let r: Vec<BigRational> = rep.r.iter().map(ex).collect();
    let want_r: Vec<BigRational> = oracle_r(2, &logs).into_iter().map(|x| q(x, 1)).collect();
    assert_eq!(r, want_r);
    assert_eq!(r[..4], [q(0, 1), q(1, 1), q(1, 1), q(1, 1)]);
    assert_eq!(rep.s_exact().unwrap(), vec![q(1, 1), q(0, 1), q(0, 1), q(0, 1)]);
    assert_eq!(ex(&rep.estimate), q(1, 2));
    assert_eq!(regular_branch_horizon(&rep).unwrap().start, 2);
    assert_eq!(rep.sign, Sign::NonNegative);

    // the true value 1/2 lies in the bracket
    let (lo, hi) = rep.bracket.clone().unwrap();
    assert!(ex(&lo) <= q(1, 2) && q(1, 2) <= ex(&hi));

    // n = 3: 7 * 1 - (0 * 4 + 1 * 2 + 1 * 1) = 4
    assert!(lemma32_check(&rep));
    assert_eq!(7 - (2 + 1), logs[2] as i64);

    let fi = functional_identity_check(&rep).unwrap();
    assert_eq!(ex(&fi.boundary), q(1, 32));
    assert!(ex(&fi.deviation).is_zero());

    assert!(finite_type_dimensions(&rep).unwrap().iter().all(|d| ex(d) == q(1, 2)));

    // |d_4 - estimate_4| <= 1/m^2
    let gap = ex(&rep.density[3]) - ex(&rep.estimates[3]);
    assert_eq!(ex(&rep.density[3]), q(8, 15));
    assert!(gap.abs() <= q(1, 4));
    assert_eq!(monotone_convergence_check(&rep), None);
}

#[test]
fn ternary_all_ones() {
    let sizes = layer_sizes(3, &[1, 1, 1, 1]);
    assert_eq!(sizes, vec![1, 2, 5, 14, 41]);
    let logs = cumulative(&sizes);
    assert_eq!(logs[..4], [1, 3, 8, 22]);
    let rep = analyze(
        &from_logs(3, &logs),
        &BigUint::from(3u32),
        &AnalysisOptions { precision_bits: None, cap: Some(q(2, 1)) },
    )
    .unwrap();
    assert_eq!(ex(&rep.estimate), q(41, 81));
    assert_eq!(ex(rep.tail_bound.as_ref().unwrap()), q(1, 81));
    let dist = (q(41, 81) - q(1, 2)).abs();
    assert_eq!(dist, q(1, 162));
    assert!(dist <= q(1, 81));
    let (lo, hi) = rep.bracket.clone().unwrap();
    assert_eq!((ex(&lo), ex(&hi)), (q(40, 81), q(41, 81)));
    assert!(ex(&lo) <= q(1, 2) && q(1, 2) <= ex(&hi));

    let ft: Vec<BigRational> = finite_type_dimensions(&rep).unwrap().iter().map(ex).collect();
    assert_eq!(ft, vec![q(2, 3), q(5, 9), q(14, 27), q(41, 81)]);
    assert!(ft.windows(2).all(|w| w[1] <= w[0]));

    // x S(x) = (1 - x) R(x) + r_(N+1) x^(N+1) at x = 1/3, by direct sums
    let r = oracle_r(3, &logs);
    let x = q(1, 3);
    let pw = |k: usize| (0..k).fold(BigRational::one(), |a, _| a * &x);
    let lhs: BigRational = (1..=4).map(|n| q(r[n] - r[n - 1], 1) * pw(n + 1)).sum();
    let rhs: BigRational = (1..=4).map(|n| q(r[n - 1], 1) * pw(n)).sum::<BigRational>() * (BigRational::one() - &x);
    let boundary = q(r[4], 1) * pw(5);
    let fi = functional_identity_check(&rep).unwrap();
    assert_eq!(ex(&fi.lhs), lhs);
    assert_eq!(ex(&fi.rhs), rhs);
    assert_eq!(ex(&fi.boundary), boundary);
    assert_eq!(lhs, rhs + boundary);
}

#[test]
fn diagonal_boundary_term() {
    // s = 1 everywhere: log|S_n| = 1, log|G_n| = n, r_n = n - 1
    let n_max = 6;
    let logs: Vec<u32> = (1..=n_max + 1).collect();
    let rep = analyze(&from_logs(2, &logs), &BigUint::from(2u32), &exact_opts()).unwrap();
    let r: Vec<BigRational> = rep.r.iter().map(ex).collect();
    assert_eq!(r, (0..=n_max as i64).map(|k| q(k, 1)).collect::<Vec<_>>());
    let fi = functional_identity_check(&rep).unwrap();
    assert_eq!(ex(&fi.boundary), q(n_max as i64, 1 << (n_max + 1)));
    assert!(ex(&fi.deviation).is_zero());
    assert!(regular_branch_horizon(&rep).is_none());
    assert_eq!(ex(&rep.estimate), q(1, 64));

    let det = full_dimension_detector(&from_logs(2, &logs), &BigUint::from(2u32));
    assert!(!det.holds);
    assert_eq!(det.first_failure, Some(1));
}

#[test]
fn detector_on_spine_generators() {
    let spine = |j: usize| {
        let mut e = Portrait::rooted(Permutation::cycle(2), 1);
        for _ in 0..j {
            e = Portrait::embed_at(&Vertex::new(2, vec![0]).unwrap(), &e).unwrap();
        }
        e
    };
    let gens: Vec<Portrait> = (0..4).map(spine).collect();
    let g = TruncatedGroup::generate(&gens, 4).unwrap();
    let orders = g.order_sequence();
    let want: Vec<BigUint> = (1..=4u32).map(|n| BigUint::from(2u32).pow((1 << n) - 1)).collect();
    assert_eq!(orders.orders, want);
    let det = full_dimension_detector(&orders, &BigUint::from(2u32));
    assert!(det.holds);
    assert_eq!(det.ambient_orders, want);
}

#[test]
fn detector_finds_late_failure() {
    let seq = DefiningSequence::lemma52(2, &[0, 0, 1]).unwrap();
    let logs = cumulative(&layer_sizes(2, &[0, 0, 1]));
    let orders = from_logs(2, &logs);
    let from_layers: Vec<u32> = cumulative(&seq.layers.iter().map(|l| l.log_p_size() as u32).collect::<Vec<_>>());
    assert_eq!(from_layers, logs);
    let det = full_dimension_detector(&orders, &BigUint::from(2u32));
    assert!(!det.holds);
    assert_eq!(det.first_failure, Some(3));
}

#[test]
fn irrational_logs_need_precision() {
    // |H| = 6 on the ternary tree
    let orders = OrderSequence { m: 3, orders: vec![BigUint::from(6u32), BigUint::from(216u32)] };
    assert!(analyze(&orders, &BigUint::from(6u32), &exact_opts()).is_err());
    let rep = analyze(&orders, &BigUint::from(6u32), &AnalysisOptions { precision_bits: Some(50), cap: None }).unwrap();
    // the estimate is a ratio of commensurable logs, hence exact
    assert_eq!(ex(&rep.estimate), q(2, 3));
    // log_3 6 = 1.630929753571457...
    let s1 = &rep.s[0];
    let approx = q(1_630_929_753_571_457, 1_000_000_000_000_000);
    assert!(s1.contains(&approx), "{s1}");
    assert!(s1.width() <= q(1, 1 << 40));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_sequences_match_closed_forms(q_idx in 0usize..3, digits in proptest::collection::vec(0u32..7, 1..6)) {
        let qv = [2u32, 3, 5][q_idx];
        let mu: Vec<u32> = digits.iter().map(|d| d % qv).collect();
        let sizes = layer_sizes(qv, &mu);
        prop_assume!(sizes.iter().all(|s| (1..60).contains(s)));
        let logs = cumulative(&sizes);
        let rep = analyze(
            &from_logs(qv as usize, &logs),
            &BigUint::from(qv),
            &AnalysisOptions { precision_bits: None, cap: Some(q(qv as i64 - 1, 1)) },
        ).unwrap();
        let r = oracle_r(qv as i64, &logs);
        for (i, x) in rep.r.iter().enumerate() {
            prop_assert_eq!(ex(x), q(r[i], 1));
        }
        for (i, x) in rep.s.iter().enumerate() {
            prop_assert_eq!(ex(x), q(mu[i] as i64, 1));
        }
        // estimate = 1 - sum mu_i / q^i
        let mut want = BigRational::one();
        let mut p = BigRational::one();
        for &d in &mu {
            p /= q(qv as i64, 1);
            want -= q(d as i64, 1) * &p;
        }
        prop_assert_eq!(ex(&rep.estimate), want.clone());
        prop_assert!(lemma32_check(&rep));
        prop_assert!(ex(&functional_identity_check(&rep).unwrap().deviation).is_zero());
        prop_assert_eq!(monotone_convergence_check(&rep), None);
        // the limit of the constant continuation mu_n = 0 lies in the bracket
        let (lo, hi) = rep.bracket.clone().unwrap();
        prop_assert!(ex(&lo) <= want && want <= ex(&hi));
    }

    #[test]
    fn interval_mode_contains_exact_values(e in 1u32..40, f in 1u32..40) {
        let orders = from_logs(2, &[1, 1 + e.min(2), 1 + e.min(2) + f.min(4)]);
        prop_assume!(orders.is_consistent());
        let exact = analyze(&orders, &BigUint::from(2u32), &exact_opts()).unwrap();
        let approx = analyze(&orders, &BigUint::from(2u32), &AnalysisOptions { precision_bits: Some(30), cap: None }).unwrap();
        for (a, b) in exact.density.iter().zip(&approx.density) {
            prop_assert!(b.contains(&ex(a)));
        }
    }
}
