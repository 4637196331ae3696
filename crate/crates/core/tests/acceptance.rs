//! Acceptance run: one PASS/FAIL line per criterion, with the tolerance or
//! time limit that applies.
//!
//! A criterion listed in `KNOWN_FAILURES` is expected to print FAIL; the
//! run aborts if it starts passing, or if anything else fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use dendrodim::dimension::{
    analyze, full_dimension_detector, functional_identity_check, lemma32_check, regular_branch_horizon,
    AnalysisOptions, DimensionReport,
};
use dendrodim::directed::{
    a_group, b_has_order_dividing_q, density_profile_of, directed_group, generators_commute, DirectedSpec,
    DEFAULT_POINT_CAP,
};
use dendrodim::layers::{
    check_properties, lemma51_exhaustive, verify_sequence, DefiningSequence, ExpansionMode, ExpansionSpec,
};
use dendrodim::permgroup::{OrderSequence, TruncatedGroup};
use dendrodim::tree::{Permutation, Portrait, Vertex};
use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criterion 8 claims non-increasing densities over depths 2, 3, 4; the
/// exact values are 1/3, 27/31, 9/52.
const KNOWN_FAILURES: &[u32] = &[8];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn ex(report: &DimensionReport, f: impl Fn(&DimensionReport) -> &dendrodim::dimension::Real) -> BigRational {
    f(report).exact().expect("exact").clone()
}

/// `|G_S / St(n)|` from the layer sizes.
fn layer_orders(seq: &DefiningSequence) -> OrderSequence {
    let p = BigUint::from(seq.ring().p());
    let mut acc = 0u32;
    let orders = seq
        .layers
        .iter()
        .map(|l| {
            acc += l.log_p_size() as u32;
            p.pow(acc)
        })
        .collect();
    OrderSequence { m: seq.q as usize, orders }
}

fn report(seq: &DefiningSequence, cap: Option<BigRational>) -> DimensionReport {
    analyze(&layer_orders(seq), &BigUint::from(seq.q), &AnalysisOptions { precision_bits: None, cap }).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn ints(xs: &[Ratio<i64>]) -> Vec<i64> {
    xs.iter().map(|r| if r.is_integer() { r.to_integer() } else { i64::MIN }).collect()
}

/// Every order sequence produced by criteria 1 to 5, for criterion 7.
fn criterion_sequences() -> Vec<DefiningSequence> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let mu: Vec<u64> = (0..4).map(|_| rng.gen_range(0..2)).collect();
        out.push(DefiningSequence::lemma52(2, &mu).unwrap());
    }
    for _ in 0..5 {
        let mu: Vec<u64> = (0..3).map(|_| rng.gen_range(0..3)).collect();
        out.push(DefiningSequence::lemma52(3, &mu).unwrap());
    }
    out.push(DefiningSequence::lemma52(2, &[1, 0, 0, 0]).unwrap());
    out.push(DefiningSequence::lemma52(3, &[1, 1, 1, 1]).unwrap());
    out.push(DefiningSequence::diagonal(2, 6).unwrap());
    out.push(DefiningSequence::lambda_shift(2, &[1; 6], &[1, 2, 3, 4, 5, 6], 6).unwrap());
    out
}

fn criterion1() -> Outcome {
    let limit = Duration::from_secs(10);
    let seqs = criterion_sequences();
    let mut worst = Duration::ZERO;
    let mut mismatches = 0;
    let mut cases = 0;
    for seq in &seqs[..15] {
        let orders = layer_orders(seq);
        let (ok, t) = timed(|| {
            (1..=seq.layers.len()).all(|n| {
                let g = TruncatedGroup::generate(&seq.portraits_below(n), n).unwrap();
                g.order() == &orders.orders[n - 1]
            })
        });
        cases += 1;
        worst = worst.max(t);
        if !ok {
            mismatches += 1;
        }
    }
    Outcome {
        id: 1,
        pass: mismatches == 0 && worst < limit,
        detail: format!(
            "oracle equivalence, {cases} random sequences (10 at q=2 N=4, 5 at q=3 N=3): {mismatches} mismatches, \
             exact; slowest {worst:?} (limit {limit:?})"
        ),
    }
}

fn criterion2() -> Outcome {
    let ((digits, seq, rep), t) = timed(|| {
        let digits = ExpansionSpec::from_gamma(2, Ratio::new(1, 2), 4, ExpansionMode::Terminating).unwrap().digits;
        let seq = DefiningSequence::lemma52(2, &digits).unwrap();
        let rep = report(&seq, Some(q(1, 1)));
        (digits, seq, rep)
    });
    let s = ints(&seq.realized_s());
    let est = ex(&rep, |r| &r.estimate);
    let m = regular_branch_horizon(&rep).map(|c| c.start);
    let pass = digits == [1, 0, 0, 0]
        && s[..3] == [1, 0, 0]
        && s == [1, 0, 0, 0]
        && est == q(1, 2)
        && m == Some(2)
        && verify_sequence(&seq).is_ok()
        && t < Duration::from_secs(1);
    Outcome {
        id: 2,
        pass,
        detail: format!("q=2 gamma=1/2: mu={digits:?}, s={s:?}, estimate {est} (exact), M={m:?}; {t:?} (limit 1s)"),
    }
}

fn criterion3() -> Outcome {
    let ((digits, seq, rep), t) = timed(|| {
        let digits = ExpansionSpec::from_gamma(3, Ratio::new(1, 2), 4, ExpansionMode::Terminating).unwrap().digits;
        let seq = DefiningSequence::lemma52(3, &digits).unwrap();
        let rep = report(&seq, Some(q(2, 1)));
        (digits, seq, rep)
    });
    let s = ints(&seq.realized_s());
    let est = ex(&rep, |r| &r.estimate);
    let tail = rep.tail_bound.as_ref().and_then(|x| x.exact().cloned()).unwrap_or_else(|| q(-1, 1));
    let dist = (&est - q(1, 2)).abs();
    let props = check_properties(&seq);
    let pass = digits == [1, 1, 1, 1]
        && s == [1, 1, 1, 1]
        && est == q(41, 81)
        && tail == q(1, 81)
        && dist == q(1, 162)
        && dist <= tail
        && props.super_strongly_fractal.holds
        && props.level_transitive.holds
        && t < Duration::from_secs(5);
    Outcome {
        id: 3,
        pass,
        detail: format!(
            "q=3 gamma=1/2: s={s:?}, estimate {est}, tail {tail}, |est - 1/2| = {dist} <= tail (exact); \
             super strongly fractal {}, level-transitive {}; {t:?} (limit 5s)",
            props.super_strongly_fractal.holds, props.level_transitive.holds
        ),
    }
}

fn criterion4() -> Outcome {
    let ((seq, rep), t) = timed(|| {
        let seq = DefiningSequence::diagonal(2, 6).unwrap();
        let rep = report(&seq, None);
        (seq, rep)
    });
    let s = ints(&seq.realized_s());
    let est = ex(&rep, |r| &r.estimate);
    let props = check_properties(&seq);
    let pass = s == [1; 6] && est == q(1, 64) && props.super_strongly_fractal.holds && t < Duration::from_secs(5);
    Outcome {
        id: 4,
        pass,
        detail: format!(
            "diagonal q=2 N=6: s={s:?}, estimate {est} = 2^-6 (exact), psi_x(S_n) = S_(n-1) for all x, n: {}; {t:?} (limit 5s)",
            props.super_strongly_fractal.holds
        ),
    }
}

fn criterion5() -> Outcome {
    let ((seq, rep), t) = timed(|| {
        let seq = DefiningSequence::lambda_shift(2, &[1; 6], &[1, 2, 3, 4, 5, 6], 6).unwrap();
        let rep = report(&seq, None);
        (seq, rep)
    });
    let s = ints(&seq.realized_s());
    let target: Vec<i64> = seq.target_digits().unwrap().into_iter().map(|d| d as i64).collect();
    let props = check_properties(&seq);
    let blocks = !props.branch_blocks.is_empty() && props.branch_blocks.iter().all(|b| b.2);
    let est = ex(&rep, |r| &r.estimate);
    // shifts with k + lambda_k <= 6 are k = 1, 2, 3
    let unshifted = q(1, 1) - q(1, 2) - q(1, 4) - q(1, 8);
    let pass = s == target
        && s[1] == 2
        && s[3] == 4
        && s[0] == 0
        && s[2] == 0
        && s[4] == 0
        && blocks
        && est == unshifted
        && verify_sequence(&seq).is_ok()
        && t < Duration::from_secs(10);
    Outcome {
        id: 5,
        pass,
        detail: format!(
            "lambda-shift of mu=1 with lambda_k=k, q=2 N=6: s={s:?} = target, block test at levels {:?}: {blocks}, \
             estimate {est} = unshifted {unshifted} (exact); {t:?} (limit 10s)",
            props.branch_blocks.iter().map(|b| b.0).collect::<Vec<_>>()
        ),
    }
}

/// Subgroups of `(Z/q)^q` by closing every set of at most `q` generators.
fn brute_commutator_index(q: usize) -> (usize, bool) {
    let vectors: Vec<Vec<usize>> = (0..q.pow(q as u32))
        .map(|mut i| {
            (0..q)
                .map(|_| {
                    let d = i % q;
                    i /= q;
                    d
                })
                .collect()
        })
        .collect();
    let span = |gens: &[Vec<usize>]| -> BTreeSet<Vec<usize>> {
        let mut set = BTreeSet::from([vec![0; q]]);
        loop {
            let mut grew = false;
            for x in set.clone() {
                for g in gens {
                    let y: Vec<usize> = x.iter().zip(g).map(|(a, b)| (a + b) % q).collect();
                    grew |= set.insert(y);
                }
            }
            if !grew {
                return set;
            }
        }
    };
    let shift = |v: &Vec<usize>| -> Vec<usize> { (0..q).map(|i| v[(i + q - 1) % q]).collect() };
    let diag = vec![1; q];
    let mut subgroups = BTreeSet::new();
    let mut idx = vec![0usize; q];
    loop {
        let gens: Vec<Vec<usize>> = idx.iter().map(|&i| vectors[i].clone()).collect();
        subgroups.insert(span(&gens));
        let mut k = 0;
        while k < q {
            idx[k] += 1;
            if idx[k] < vectors.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == q {
            break;
        }
    }
    let mut count = 0;
    let mut all = true;
    for n in &subgroups {
        if !n.contains(&diag) || !n.iter().all(|v| n.contains(&shift(v))) {
            continue;
        }
        count += 1;
        let comm: Vec<Vec<usize>> =
            n.iter().map(|v| shift(v).iter().zip(v).map(|(a, b)| (a + q - b) % q).collect()).collect();
        let c = span(&comm);
        all &= n.len() == q * c.len();
    }
    (count, all)
}

fn criterion6() -> Outcome {
    let (library, t) = timed(|| [2u64, 3].map(|qq| lemma51_exhaustive(qq).unwrap()));
    // the brute-force cross-check is not part of the timed run
    let brute = [2usize, 3].map(brute_commutator_index);
    let mut pass = t < Duration::from_secs(1);
    let mut parts = Vec::new();
    for ((qq, (count, bad)), (bc, bok)) in [2, 3].iter().zip(&library).zip(brute) {
        pass &= bad.is_none() && bok && *count == bc;
        parts.push(format!("q={qq}: {count} modules (brute force {bc}), index q: {}/{bok}", bad.is_none()));
    }
    Outcome { id: 6, pass, detail: format!("{} (exact); {t:?} (limit 1s)", parts.join("; ")) }
}

fn criterion7() -> Outcome {
    let seqs = criterion_sequences();
    let mut failures = 0;
    for seq in &seqs {
        let rep = report(seq, None);
        let fi = functional_identity_check(&rep).unwrap();
        if !lemma32_check(&rep) || !fi.deviation.exact().is_some_and(Zero::is_zero) {
            failures += 1;
        }
    }
    Outcome {
        id: 7,
        pass: failures == 0,
        detail: format!("order identity and functional identity on {} sequences: {failures} failures (exact)", seqs.len()),
    }
}

fn criterion8() -> Outcome {
    let spec = DirectedSpec { q: 5, n: 1, depth: 4 };
    let ((g, a), t) = timed(|| (directed_group(&spec, DEFAULT_POINT_CAP).unwrap(), a_group(&spec, DEFAULT_POINT_CAP).unwrap()));
    let b_order = (2..=4).all(|d| b_has_order_dividing_q(5, 1, d).unwrap());
    let abelian = generators_commute(&a) && a.order() == &BigUint::from(25u32);
    let transitive = (1..=4).all(|j| g.is_transitive_on_level(j));
    let profile = density_profile_of(&spec, &g, &[2, 3, 4]).unwrap();
    let quotient2 = g.level_quotient_order(2);
    let d: Vec<Ratio<u64>> = profile.rows.iter().map(|r| r.density).collect();
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    let limit = Duration::from_secs(300);
    let pass = b_order
        && abelian
        && transitive
        && quotient2 == BigUint::from(25u32)
        && d[0] == Ratio::new(1, 3)
        && monotone
        && d[2] < Ratio::new(1, 3)
        && t < limit;
    let dens: Vec<String> = d.iter().map(|x| format!("{}/{}", x.numer(), x.denom())).collect();
    Outcome {
        id: 8,
        pass,
        detail: format!(
            "q=5: b_1^5 = 1 at depths 2-4 {b_order}; A_1 abelian of order 25 {abelian}; transitive on levels 1-4 {transitive}; \
             |G_1/St(2)| = {quotient2}; densities at depths 2,3,4 = [{}] (exact), non-increasing {monotone}, \
             density(4) < 1/3 {}; depth-4 chain {t:?} (limit {limit:?})",
            dens.join(", "),
            d[2] < Ratio::new(1, 3)
        ),
    }
}

fn criterion9() -> Outcome {
    let (res, t) = timed(|| {
        let spine = |j: usize| {
            let mut e = Portrait::rooted(Permutation::cycle(2), 1);
            for _ in 0..j {
                e = Portrait::embed_at(&Vertex::new(2, vec![0]).unwrap(), &e).unwrap();
            }
            e
        };
        let gens: Vec<Portrait> = (0..4).map(spine).collect();
        let orders = TruncatedGroup::generate(&gens, 4).unwrap().order_sequence();
        let full = full_dimension_detector(&orders, &BigUint::from(2u32));
        let want: Vec<BigUint> = (1..=4u32).map(|n| BigUint::from(2u32).pow((1 << n) - 1)).collect();
        let diag = full_dimension_detector(&layer_orders(&DefiningSequence::diagonal(2, 4).unwrap()), &BigUint::from(2u32));
        (full.holds && orders.orders == want, diag.holds, diag.first_failure)
    });
    let (spine_ok, diag_holds, diag_at) = res;
    Outcome {
        id: 9,
        pass: spine_ok && !diag_holds && diag_at == Some(1) && t < Duration::from_secs(5),
        detail: format!(
            "spine generators N=4: detector true with orders 2^(2^n-1) {spine_ok}; diagonal q=2: detector {diag_holds}, \
             first failure n={diag_at:?} (exact); {t:?} (limit 5s)"
        ),
    }
}

fn main() {
    let outcomes = vec![
        criterion1(),
        criterion2(),
        criterion3(),
        criterion4(),
        criterion5(),
        criterion6(),
        criterion7(),
        criterion8(),
        criterion9(),
    ];
    for o in &outcomes {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {}", o.id, o.detail);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass; expected failures: {KNOWN_FAILURES:?}", outcomes.len());
    let unexpected: Vec<u32> =
        outcomes.iter().filter(|o| o.pass == KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    if !unexpected.is_empty() {
        eprintln!("criteria with an unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
