//! The directed generators `b_n` and the groups `G_n` at small depth.

use dendrodim::directed::*;
use dendrodim::permgroup::TruncatedGroup;
use dendrodim::tree::{LeafPermutation, Permutation, Portrait, Vertex};
use dendrodim::zmod::{Ring, Submodule};
use num_bigint::BigUint;
use num_rational::Ratio;

const CAP: usize = DEFAULT_POINT_CAP;

fn spec(depth: usize) -> DirectedSpec {
    DirectedSpec { q: 5, n: 1, depth }
}

#[test]
fn d1_on_the_binary_tree() {
    let d1 = make_d(2, 1, 2).unwrap().to_leaf_permutation(2);
    assert_eq!(d1.images(), &[1, 0, 3, 2]);
}

#[test]
fn blocks_commute_and_have_order_q() {
    let ds: Vec<LeafPermutation> = (0..3).map(|i| make_d(5, i, 4).unwrap().to_leaf_permutation(4)).collect();
    for x in &ds {
        assert!(x.pow(5).is_identity() && !x.is_identity());
        for y in &ds {
            assert_eq!(x.then(y), y.then(x));
        }
    }
    for i in 0..4 {
        assert_eq!(make_d(5, i, 4).unwrap().order(), 5);
    }
}

#[test]
fn b1_has_order_five() {
    for depth in 2..=5 {
        assert!(b_has_order_dividing_q(5, 1, depth).unwrap());
        let b = materialize_b(5, 1, depth).unwrap();
        assert!(is_staircase(&b));
        assert_eq!(b.order(), if depth == 2 { 1 } else { 5 });
    }
}

#[test]
fn b1_section_at_the_leftmost_vertex_is_a() {
    let b = materialize_b(5, 1, 4).unwrap();
    let v = Vertex::new(5, vec![0, 0]).unwrap();
    let s = b.section(&v, 1).unwrap();
    assert_eq!(s, Portrait::rooted(Permutation::cycle(5), 1));
    // the last level-2 vertex carries b_2, trivial above level 7
    let last = Vertex::new(5, vec![4, 4]).unwrap();
    assert!(b.section(&last, 2).unwrap().is_identity());
}

#[test]
fn small_orders() {
    assert_eq!(directed_group(&spec(1), CAP).unwrap().order(), &BigUint::from(5u32));
    assert_eq!(directed_group(&spec(2), CAP).unwrap().order(), &BigUint::from(25u32));
    let a = a_group(&spec(3), CAP).unwrap();
    assert_eq!(a.order(), &BigUint::from(25u32));
    assert!(generators_commute(&a));
}

#[test]
fn stabilizer_splitting_at_depth_three() {
    let g = directed_group(&spec(3), CAP).unwrap();
    let b = materialize_b(5, 1, 3).unwrap().to_leaf_permutation(3);
    assert!(g.level_stabilizer(2).contains(&b));
    let closure = g.normal_closure(&[b]).unwrap();
    let a = a_group(&spec(3), CAP).unwrap();
    assert_eq!(closure.order() * a.order(), g.order().clone());
}

#[test]
fn level_transitive_through_depth_four() {
    let g = directed_group(&spec(4), CAP).unwrap();
    for j in 1..=4 {
        assert!(g.is_transitive_on_level(j), "level {j}");
    }
}

/// `St(2)/St(4)` is abelian, generated by the `A_1`-conjugates of `b_1`.
/// Each conjugate is recorded by its label exponents on levels 2 and 3, and
/// the rank of their span over Z/5 gives the order independently of the
/// stabilizer chain.
#[test]
fn depth_four_order_by_linear_algebra() {
    let a = a_group(&spec(4), CAP).unwrap();
    let b = materialize_b(5, 1, 4).unwrap().to_leaf_permutation(4);
    let ring = Ring::new(5).unwrap();
    let mut rows = Vec::new();
    // A_1 acts regularly on level 2, so its 25 elements are the translations
    let elems: Vec<LeafPermutation> = {
        let gens = a.generators().to_vec();
        let mut all = vec![LeafPermutation::identity(5, 4)];
        for _ in 0..2 {
            let mut next = Vec::new();
            for x in &all {
                for g in &gens {
                    for k in 0..5 {
                        let y = x.then(&g.pow(k));
                        if !next.contains(&y) {
                            next.push(y);
                        }
                    }
                }
            }
            all = next;
        }
        all
    };
    assert_eq!(elems.len(), 25);
    for h in &elems {
        let c = h.inverse().then(&b).then(h);
        let mut row = Vec::new();
        for v in 0..25 {
            // exponent of the label at level-2 vertex v
            let leaf = v * 25;
            let img = c.apply(leaf);
            row.push((((img / 5) % 5 + 5 - (leaf / 5) % 5) % 5) as u64);
        }
        for w in 0..125 {
            let leaf = w * 5;
            row.push(((c.apply(leaf) % 5 + 5 - leaf % 5) % 5) as u64);
        }
        rows.push(row);
    }
    let span = Submodule::span(ring, 150, rows);
    assert_eq!(span.log_p_size(), 25);
    let g = directed_group(&spec(4), CAP).unwrap();
    assert_eq!(g.order(), &BigUint::from(5u32).pow(27));
}

#[test]
fn density_profile_values() {
    let p = density_profile(&spec(4), &[1, 2, 3, 4], CAP).unwrap();
    let d: Vec<Ratio<u64>> = p.rows.iter().map(|r| r.density).collect();
    assert_eq!(d, vec![Ratio::from_integer(1), Ratio::new(1, 3), Ratio::new(27, 31), Ratio::new(9, 52)]);
    assert_eq!(p.first_increase(), Some(3));
    assert_eq!(p.layer_bounds.len(), 1);
    assert!(p.layer_bounds[0].holds);
    assert!(p.to_tsv().starts_with("depth\tlog_order\tambient_log\tdensity\n1\t1/1\t1\t1/1\n2\t2/1\t6\t1/3\n"));
}

#[test]
fn full_tree_group_has_density_one() {
    let gens: Vec<Portrait> = (0..3).map(|i| make_d(5, i, 3).unwrap()).collect();
    let mut all = gens.clone();
    for i in 0..5 {
        let v = Vertex::new(5, vec![i]).unwrap();
        all.push(Portrait::embed_at(&v, &make_d(5, 0, 2).unwrap()).unwrap());
        for j in 0..5 {
            let w = Vertex::new(5, vec![i, j]).unwrap();
            all.push(Portrait::embed_at(&w, &make_d(5, 0, 1).unwrap()).unwrap());
        }
    }
    let g = TruncatedGroup::generate(&all, 3).unwrap();
    assert_eq!(g.order(), &BigUint::from(5u32).pow(31));
}

#[test]
fn sections_of_the_stabilizer_generate_the_next_group() {
    let check = section_check(&spec(4), CAP).unwrap();
    assert!(check.holds);
    assert_eq!(check.vertices.len(), 25);
    assert!(check.vertices.iter().all(|c| c.section_order == BigUint::from(25u32)));
    assert!(matches!(section_check(&spec(3), CAP), Err(dendrodim::Error::DepthTooSmall(_))));
}
