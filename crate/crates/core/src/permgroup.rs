//! Permutation groups acting on the leaves of a truncated tree.
//!
//! Groups are stored as a stabilizer chain whose base runs through every
//! vertex of levels `1..=k` in level-then-lexicographic order. Because each
//! vertex is preceded by its parent, every basic orbit lies inside a set of
//! siblings and has at most `m` points, and the pointwise stabilizer of
//! levels `1..=j` is a tail of the chain.

use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::tree::{ipow, LeafPermutation, Portrait};

/// Default memory cap for stored permutations, in bytes.
pub const DEFAULT_MEM_CAP: usize = 2 << 30;

/// Memory cap in bytes, overridable through `DENDRODIM_MEM_CAP`.
pub fn memory_cap() -> usize {
    std::env::var("DENDRODIM_MEM_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MEM_CAP)
}

type Perm = Vec<u32>;

fn mul(a: &[u32], b: &[u32]) -> Perm {
    a.iter().map(|&i| b[i as usize]).collect()
}

fn invert(a: &[u32]) -> Perm {
    let mut out = vec![0u32; a.len()];
    for (i, &j) in a.iter().enumerate() {
        out[j as usize] = i as u32;
    }
    out
}

fn is_identity(a: &[u32]) -> bool {
    a.iter().enumerate().all(|(i, &j)| i as u32 == j)
}

#[derive(Clone, Debug)]
struct Level {
    /// Leftmost leaf below the base vertex.
    leaf: usize,
    /// Number of leaves below a vertex of this level.
    width: usize,
    /// The base vertex, as an index within its level.
    point: u32,
    orbit: Vec<u32>,
    /// `reps[i]` maps the base vertex to `orbit[i]`; `None` is the identity.
    reps: Vec<Option<Arc<Perm>>>,
    inv_reps: Vec<Option<Arc<Perm>>>,
    /// Orbit index and generator that first reached each orbit point.
    edges: Vec<Option<(usize, usize)>>,
    checked: HashSet<(usize, usize)>,
}

impl Level {
    fn image(&self, g: &[u32]) -> u32 {
        (g[self.leaf] as usize / self.width) as u32
    }

    fn reset(&mut self) {
        self.orbit = vec![self.point];
        self.reps = vec![None];
        self.inv_reps = vec![None];
        self.edges = vec![None];
        self.checked.clear();
    }
}

#[derive(Clone, Debug)]
struct StrongGen {
    perm: Arc<Perm>,
    /// First level whose generating set contains this element.
    added: usize,
    /// Index of the first base vertex it moves.
    depth: usize,
}

/// Deterministic incremental Schreier-Sims on the vertex base.
#[derive(Clone, Debug)]
struct Chain {
    m: usize,
    leaves: usize,
    levels: Vec<Level>,
    gens: Vec<StrongGen>,
    stored_bytes: usize,
    cap: usize,
}

impl Chain {
    fn new(m: usize, k: usize) -> Self {
        let leaves = ipow(m, k);
        let mut levels = Vec::new();
        for j in 1..=k {
            let width = ipow(m, k - j);
            for t in 0..ipow(m, j) {
                levels.push(Level {
                    leaf: t * width,
                    width,
                    point: t as u32,
                    orbit: vec![t as u32],
                    reps: vec![None],
                    inv_reps: vec![None],
                    edges: vec![None],
                    checked: HashSet::new(),
                });
            }
        }
        Chain { m, leaves, levels, gens: Vec::new(), stored_bytes: 0, cap: memory_cap() }
    }

    fn charge(&mut self, perms: usize) -> Result<()> {
        self.stored_bytes += perms * self.leaves * std::mem::size_of::<u32>();
        if self.stored_bytes > self.cap {
            return Err(Error::MemoryCap { needed: self.stored_bytes, cap: self.cap });
        }
        Ok(())
    }

    fn first_moved(&self, g: &[u32], from: usize) -> usize {
        (from..self.levels.len())
            .find(|&l| self.levels[l].image(g) != self.levels[l].point)
            .unwrap_or(self.levels.len())
    }

    /// Strips `g` through levels `from..`. Returns the residue and the level
    /// at which stripping stopped.
    fn sift(&self, g: &[u32], from: usize) -> (Perm, usize) {
        let mut h: Perm = g.to_vec();
        for l in from..self.levels.len() {
            let level = &self.levels[l];
            let p = level.image(&h);
            if p == level.point {
                continue;
            }
            match level.orbit.iter().position(|&x| x == p) {
                Some(i) => {
                    let inv = level.inv_reps[i].as_ref().expect("non-base orbit point has a representative");
                    h = mul(&h, inv);
                }
                None => return (h, l),
            }
        }
        (h, self.levels.len())
    }

    fn contains(&self, g: &[u32]) -> bool {
        is_identity(&self.sift(g, 0).0)
    }

    fn in_level(&self, gi: usize, l: usize) -> bool {
        let s = &self.gens[gi];
        s.added <= l && l <= s.depth
    }

    fn extend_orbit(&mut self, l: usize) -> Result<()> {
        let mut i = 0;
        while i < self.levels[l].orbit.len() {
            for gi in 0..self.gens.len() {
                if !self.in_level(gi, l) {
                    continue;
                }
                let level = &self.levels[l];
                let p = level.orbit[i] as usize;
                let img = (self.gens[gi].perm[p * level.width] as usize / level.width) as u32;
                if level.orbit.contains(&img) {
                    continue;
                }
                let rep = match &level.reps[i] {
                    Some(r) => mul(r, &self.gens[gi].perm),
                    None => self.gens[gi].perm.as_ref().clone(),
                };
                let inv = invert(&rep);
                self.charge(2)?;
                let level = &mut self.levels[l];
                level.orbit.push(img);
                level.reps.push(Some(Arc::new(rep)));
                level.inv_reps.push(Some(Arc::new(inv)));
                level.edges.push(Some((i, gi)));
            }
            i += 1;
        }
        Ok(())
    }

    fn push_gen(&mut self, perm: Perm, added: usize, depth: usize) -> Result<()> {
        self.charge(1)?;
        self.gens.push(StrongGen { perm: Arc::new(perm), added, depth });
        for l in added..=depth.min(self.levels.len() - 1) {
            self.extend_orbit(l)?;
        }
        Ok(())
    }

    /// Adds `g` to the group and restores completeness of the chain.
    fn add(&mut self, g: &[u32]) -> Result<bool> {
        let (r, _) = self.sift(g, 0);
        if is_identity(&r) {
            return Ok(false);
        }
        let depth = self.first_moved(&r, 0);
        self.push_gen(r, 0, depth)?;
        self.complete(depth)?;
        Ok(true)
    }

    fn complete(&mut self, start: usize) -> Result<()> {
        let mut i = start.min(self.levels.len() - 1) as isize;
        'outer: while i >= 0 {
            let l = i as usize;
            let mut pi = 0;
            while pi < self.levels[l].orbit.len() {
                for gi in 0..self.gens.len() {
                    if !self.in_level(gi, l) || !self.levels[l].checked.insert((pi, gi)) {
                        continue;
                    }
                    let level = &self.levels[l];
                    let s = &self.gens[gi].perm;
                    let p = level.orbit[pi] as usize;
                    let ps = (s[p * level.width] as usize / level.width) as u32;
                    let qi = level.orbit.iter().position(|&x| x == ps).expect("orbit is closed");
                    if level.edges[qi] == Some((pi, gi)) || (pi == 0 && qi == 0) {
                        continue;
                    }
                    let mut h = match &level.reps[pi] {
                        Some(r) => mul(r, s),
                        None => s.as_ref().clone(),
                    };
                    if let Some(inv) = &level.inv_reps[qi] {
                        h = mul(&h, inv);
                    }
                    let (r, drop) = self.sift(&h, l + 1);
                    if !is_identity(&r) {
                        debug_assert!(drop < self.levels.len());
                        self.push_gen(r, l + 1, drop)?;
                        i = drop as isize;
                        continue 'outer;
                    }
                }
                pi += 1;
            }
            i -= 1;
        }
        Ok(())
    }

    /// Index of the first base vertex on `level`.
    fn level_offset(&self, level: usize) -> usize {
        (1..level).map(|i| ipow(self.m, i)).sum()
    }

    fn orbit_product(&self, from: usize, to: usize) -> BigUint {
        let mut out = BigUint::one();
        for level in &self.levels[from..to] {
            out *= BigUint::from(level.orbit.len());
        }
        out
    }

    /// The chain of the pointwise stabilizer of base levels `< off`.
    fn tail(&self, off: usize) -> Chain {
        let mut out = self.clone();
        let mut remap = vec![None; self.gens.len()];
        out.gens.clear();
        for (gi, s) in self.gens.iter().enumerate() {
            if s.depth >= off {
                remap[gi] = Some(out.gens.len());
                out.gens.push(StrongGen { perm: s.perm.clone(), added: s.added.max(off), depth: s.depth });
            }
        }
        for (l, level) in out.levels.iter_mut().enumerate() {
            if l < off {
                level.reset();
                continue;
            }
            for e in level.edges.iter_mut().flatten() {
                e.1 = remap[e.1].expect("orbit edges use generators of the level");
            }
            level.checked = level
                .checked
                .iter()
                .filter_map(|&(p, g)| remap[g].map(|g| (p, g)))
                .collect();
        }
        out.stored_bytes = out.gens.len() * self.leaves * 4
            + out.levels.iter().map(|l| (l.orbit.len() - 1) * 2 * self.leaves * 4).sum::<usize>();
        out
    }
}

/// A group of tree automorphisms acting faithfully on level `k`.
#[derive(Clone, Debug)]
pub struct TruncatedGroup {
    m: usize,
    depth: usize,
    generators: Vec<LeafPermutation>,
    chain: Arc<Chain>,
    order: BigUint,
}

/// `|G/St_G(n)|` for `n = 1..=N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderSequence {
    pub m: usize,
    pub orders: Vec<BigUint>,
}

impl OrderSequence {
    /// Checks monotonicity and divisibility of `|Aut(T_n)|`.
    pub fn is_consistent(&self) -> bool {
        let mut prev = BigUint::one();
        for (i, o) in self.orders.iter().enumerate() {
            if o < &prev || !(automorphism_group_order(self.m, i + 1) % o).is_zero() {
                return false;
            }
            prev = o.clone();
        }
        true
    }
}

/// `|Aut(T_n)| = (m!)^((m^n - 1)/(m - 1))`.
pub fn automorphism_group_order(m: usize, n: usize) -> BigUint {
    let fact: BigUint = (1..=m).map(BigUint::from).product();
    let vertices: usize = (0..n).map(|i| ipow(m, i)).sum();
    num_traits::pow(fact, vertices)
}

impl TruncatedGroup {
    /// The group generated by the actions of `gens` on level `k`.
    pub fn generate(gens: &[Portrait], k: usize) -> Result<Self> {
        let Some(first) = gens.first() else {
            return Err(Error::InvalidInput("at least one generator is required".into()));
        };
        let m = first.degree();
        if let Some(g) = gens.iter().find(|g| g.degree() != m) {
            return Err(Error::DegreeMismatch { expected: m, found: g.degree() });
        }
        let perms = gens.iter().map(|g| g.to_leaf_permutation(k)).collect();
        Self::from_leaf_permutations(m, k, perms)
    }

    pub fn from_leaf_permutations(m: usize, k: usize, gens: Vec<LeafPermutation>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("tree degree must be at least 2".into()));
        }
        if k == 0 {
            return Err(Error::DepthTooSmall("depth must be at least 1".into()));
        }
        for g in &gens {
            if g.degree() != m {
                return Err(Error::DegreeMismatch { expected: m, found: g.degree() });
            }
            if g.depth() != k {
                return Err(Error::InvalidInput(format!("generator has depth {}, expected {k}", g.depth())));
            }
        }
        let mut chain = Chain::new(m, k);
        for g in &gens {
            chain.add(g.images())?;
        }
        Ok(Self::from_chain(m, k, gens, chain))
    }

    fn from_chain(m: usize, depth: usize, generators: Vec<LeafPermutation>, chain: Chain) -> Self {
        let order = chain.orbit_product(0, chain.levels.len());
        TruncatedGroup { m, depth, generators, chain: Arc::new(chain), order }
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn generators(&self) -> &[LeafPermutation] {
        &self.generators
    }

    /// The strong generating set of the stabilizer chain.
    pub fn strong_generators(&self) -> Vec<LeafPermutation> {
        self.chain
            .gens
            .iter()
            .map(|s| LeafPermutation::from_images_unchecked(self.m, self.depth, s.perm.as_ref().clone()))
            .collect()
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    pub fn is_trivial(&self) -> bool {
        self.order.is_one()
    }

    /// Lengths of the nontrivial basic orbits; their product is the order.
    pub fn basic_orbit_lengths(&self) -> Vec<usize> {
        self.chain.levels.iter().map(|l| l.orbit.len()).filter(|&n| n > 1).collect()
    }

    pub fn contains(&self, g: &LeafPermutation) -> bool {
        g.degree() == self.m && g.depth() == self.depth && self.chain.contains(g.images())
    }

    /// `|G : St_G(j)|`, the order of the action on level `j`.
    pub fn level_quotient_order(&self, j: usize) -> BigUint {
        let j = j.min(self.depth);
        self.chain.orbit_product(0, self.chain.level_offset(j + 1))
    }

    /// `|G/St_G(n)|` for `n = 1..=depth`.
    pub fn order_sequence(&self) -> OrderSequence {
        OrderSequence { m: self.m, orders: (1..=self.depth).map(|n| self.level_quotient_order(n)).collect() }
    }

    /// The pointwise stabilizer of level `j`.
    pub fn level_stabilizer(&self, j: usize) -> TruncatedGroup {
        let off = self.chain.level_offset(j.min(self.depth) + 1);
        let chain = self.chain.tail(off);
        let gens = chain
            .gens
            .iter()
            .map(|s| LeafPermutation::from_images_unchecked(self.m, self.depth, s.perm.as_ref().clone()))
            .collect();
        Self::from_chain(self.m, self.depth, gens, chain)
    }

    /// Orbits on the vertices of level `j`, each sorted, in order of their
    /// smallest element.
    pub fn orbits_on_level(&self, j: usize) -> Vec<Vec<usize>> {
        let n = ipow(self.m, j);
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for g in &self.generators {
            for v in 0..n {
                let w = g.vertex_image(j, v);
                let (a, b) = (find(&mut parent, v), find(&mut parent, w));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    pub fn is_transitive_on_level(&self, j: usize) -> bool {
        j <= self.depth && self.orbits_on_level(j).len() == 1
    }

    /// Smallest subgroup containing `seeds` and closed under conjugation by
    /// `conjugators`.
    fn closure(m: usize, k: usize, conjugators: &[LeafPermutation], seeds: Vec<LeafPermutation>) -> Result<Self> {
        let mut chain = Chain::new(m, k);
        let mut normal_gens: Vec<Perm> = Vec::new();
        for s in &seeds {
            if chain.add(s.images())? {
                normal_gens.push(s.images().to_vec());
            }
        }
        let conj: Vec<(Perm, Perm)> = conjugators
            .iter()
            .map(|g| (invert(g.images()), g.images().to_vec()))
            .collect();
        let mut i = 0;
        while i < normal_gens.len() {
            for (ginv, g) in &conj {
                let c = mul(&mul(ginv, &normal_gens[i]), g);
                if chain.add(&c)? {
                    normal_gens.push(c);
                }
            }
            i += 1;
        }
        let gens = normal_gens
            .into_iter()
            .map(|p| LeafPermutation::from_images_unchecked(m, k, p))
            .collect();
        Ok(Self::from_chain(m, k, gens, chain))
    }

    /// The normal closure of `seeds` in this group.
    pub fn normal_closure(&self, seeds: &[LeafPermutation]) -> Result<TruncatedGroup> {
        if let Some(s) = seeds.iter().find(|s| !self.contains(s)) {
            return Err(Error::Membership(format!("{:?} is not in the group", s.cycles())));
        }
        Self::closure(self.m, self.depth, &self.generators, seeds.to_vec())
    }

    /// `[self, other]`, where `other` must normalize `self`.
    pub fn commutator_subgroup(&self, other: &TruncatedGroup) -> Result<TruncatedGroup> {
        if other.m != self.m || other.depth != self.depth {
            return Err(Error::DegreeMismatch { expected: self.m, found: other.m });
        }
        for h in &other.generators {
            let hinv = h.inverse();
            for g in &self.generators {
                if !self.contains(&hinv.then(g).then(h)) {
                    return Err(Error::NotNormalizing(
                        "the second group does not normalize the first".into(),
                    ));
                }
            }
        }
        let mut seeds = Vec::new();
        for g in &self.generators {
            for h in &other.generators {
                seeds.push(g.inverse().then(&h.inverse()).then(g).then(h));
            }
        }
        let mut conj = self.generators.clone();
        conj.extend(other.generators.iter().cloned());
        Self::closure(self.m, self.depth, &conj, seeds)
    }

    /// `log_m |G|` when the order is a power of `m`.
    pub fn log_order_exact(&self) -> Option<u64> {
        let m = BigUint::from(self.m);
        let mut n = self.order.clone();
        let mut e = 0u64;
        while !n.is_one() {
            if !(&n % &m).is_zero() {
                return None;
            }
            n /= &m;
            e += 1;
        }
        Some(e)
    }

    /// Approximate size of the stored permutations, in bytes.
    pub fn stored_bytes(&self) -> usize {
        self.chain.stored_bytes
    }

    pub fn order_u128(&self) -> Option<u128> {
        self.order.to_u128()
    }
}

/// `|G/St_G(n)|` for `n = 1..=N`, computed from a single chain at depth `N`.
pub fn order_sequence(gens: &[Portrait], n: usize) -> Result<OrderSequence> {
    Ok(TruncatedGroup::generate(gens, n)?.order_sequence())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Permutation, Vertex};

    fn a(m: usize) -> Portrait {
        Portrait::rooted(Permutation::cycle(m), 1)
    }

    /// Element of the binary spine: `e_0 = a`, `psi(e_j) = (e_{j-1}, 1)`.
    fn spine(j: usize) -> Portrait {
        let mut e = a(2);
        for _ in 0..j {
            e = Portrait::embed_at(&Vertex::new(2, vec![0]).unwrap(), &e).unwrap();
        }
        e
    }

    fn diagonal(m: usize, j: usize) -> Portrait {
        Portrait::from_level_labels(m, j, |_| Permutation::cycle(m))
    }

    #[test]
    fn cyclic_rooted_group() {
        let g = TruncatedGroup::generate(&[a(5)], 1).unwrap();
        assert_eq!(g.order(), &BigUint::from(5u32));
        assert!(g.level_stabilizer(1).is_trivial());
        assert!(g.is_transitive_on_level(1));
        let g3 = TruncatedGroup::generate(&[a(3)], 2).unwrap();
        assert!(!g3.is_transitive_on_level(2));
        assert_eq!(g3.order_sequence().orders, vec![BigUint::from(3u32); 2]);
    }

    #[test]
    fn spine_generates_full_automorphism_group() {
        let gens: Vec<_> = (0..3).map(spine).collect();
        let g = TruncatedGroup::generate(&gens, 3).unwrap();
        assert_eq!(g.order(), &BigUint::from(128u32));
        let seq = g.order_sequence();
        assert_eq!(seq.orders, vec![BigUint::from(2u32), BigUint::from(8u32), BigUint::from(128u32)]);
        assert!(seq.is_consistent());
    }

    #[test]
    fn diagonal_group_orders() {
        let gens: Vec<_> = (0..4).map(|j| diagonal(2, j)).collect();
        let seq = order_sequence(&gens, 4).unwrap();
        let want: Vec<BigUint> = [2u32, 4, 8, 16].iter().map(|&x| BigUint::from(x)).collect();
        assert_eq!(seq.orders, want);
    }

    #[test]
    fn lagrange_for_level_stabilizers() {
        let gens: Vec<_> = (0..3).map(spine).collect();
        let g = TruncatedGroup::generate(&gens, 3).unwrap();
        for j in 1..3 {
            let st = g.level_stabilizer(j);
            assert_eq!(st.order() * g.level_quotient_order(j), *g.order());
            for s in st.generators() {
                assert!(g.contains(s));
                assert!(s.restrict(j).is_identity());
            }
        }
    }

    #[test]
    fn normal_closure_of_spine_element() {
        let g = TruncatedGroup::generate(&[a(2), spine(1)], 2).unwrap();
        let n = g.normal_closure(&[spine(1).to_leaf_permutation(2)]).unwrap();
        assert_eq!(n.order(), &BigUint::from(4u32));
        assert!(g.normal_closure(&[LeafPermutation::identity(2, 2)]).unwrap().is_trivial());
        let outsider = TruncatedGroup::generate(&[a(2)], 2).unwrap();
        assert!(matches!(
            outsider.normal_closure(&[spine(1).to_leaf_permutation(2)]),
            Err(Error::Membership(_))
        ));
    }

    #[test]
    fn commutators() {
        let w = TruncatedGroup::generate(&[a(2), spine(1)], 2).unwrap();
        let base = w.level_stabilizer(1);
        let c = base.commutator_subgroup(&w).unwrap();
        assert_eq!(c.order(), &BigUint::from(2u32));
        let trivial = TruncatedGroup::from_leaf_permutations(2, 2, vec![]).unwrap();
        assert!(w.commutator_subgroup(&trivial).unwrap().is_trivial());
        assert!(base.commutator_subgroup(&base).unwrap().is_trivial());
        let top = TruncatedGroup::generate(&[a(2)], 2).unwrap();
        let spine_only = TruncatedGroup::generate(&[spine(1)], 2).unwrap();
        assert!(matches!(spine_only.commutator_subgroup(&top), Err(Error::NotNormalizing(_))));
    }

    #[test]
    fn memory_cap_is_enforced() {
        let gens: Vec<_> = (0..3).map(spine).collect();
        let mut chain = Chain::new(2, 3);
        chain.cap = 64;
        let res = gens.iter().try_for_each(|g| chain.add(g.to_leaf_permutation(3).images()).map(|_| ()));
        assert!(matches!(res, Err(Error::MemoryCap { .. })));
    }

    #[test]
    fn automorphism_group_orders() {
        assert_eq!(automorphism_group_order(2, 3), BigUint::from(128u32));
        assert_eq!(automorphism_group_order(3, 1), BigUint::from(6u32));
    }
}
