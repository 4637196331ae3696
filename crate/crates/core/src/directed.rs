//! Groups `G_n = <A_n, b_n>` generated by finitary blocks `d_i(a)` and the
//! recursively defined generators `b_n`, with their density profiles.
//!
//! `b_n` is never stored whole. Its portrait is expanded only down to the
//! requested truncation depth.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::dimension::LogValue;
use crate::permgroup::TruncatedGroup;
use crate::tree::{ipow, LeafPermutation, Permutation, Portrait, Vertex};
use crate::{Error, Result};

/// Smallest admissible tree degree.
pub const MIN_Q: usize = 5;

/// Default cap on the number of leaves of the truncated tree.
pub const DEFAULT_POINT_CAP: usize = 3125;

/// The levels `l_1 = 2`, `l_(n+1) = q^(l_n - 1)`, saturating at `usize::MAX`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    q: usize,
}

fn saturating_pow(q: usize, e: usize) -> usize {
    let mut acc: usize = 1;
    for _ in 0..e {
        acc = match acc.checked_mul(q) {
            Some(x) => x,
            None => return usize::MAX,
        };
    }
    acc
}

impl Schedule {
    pub fn new(q: usize) -> Result<Self> {
        if q < MIN_Q {
            return Err(Error::InvalidInput(format!("q >= {MIN_Q} is required, got q = {q}")));
        }
        Ok(Schedule { q })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `l_n` for `n >= 1`.
    pub fn level(&self, n: usize) -> usize {
        assert!(n >= 1, "levels are indexed from 1");
        let mut l = 2usize;
        for _ in 1..n {
            if l == usize::MAX {
                return l;
            }
            l = saturating_pow(self.q, l - 1);
        }
        l
    }

    /// `i_k = sum_(j<k) l_(n+j)` for `k = 0..=count`.
    pub fn partial_sums(&self, n: usize, count: usize) -> Vec<usize> {
        let mut out = vec![0usize];
        for j in 0..count {
            let last = *out.last().expect("nonempty");
            out.push(last.saturating_add(self.level(n + j)));
        }
        out
    }
}

/// `d_i(a)`: the `q`-cycle at every vertex of level `i`, as a portrait of
/// the given depth.
pub fn make_d(q: usize, i: usize, depth: usize) -> Result<Portrait> {
    if depth < i + 1 {
        return Err(Error::DepthTooSmall(format!("d_{i}(a) needs depth at least {}", i + 1)));
    }
    Ok(Portrait::from_level_labels(q, i, |_| Permutation::cycle(q)).with_depth(depth))
}

/// `b_n` truncated to depth `depth`.
///
/// Below level `l_n`, vertex `j < q^(l_n - 1)` carries `d_j(a)` and the last
/// vertex carries `b_(n+1)`; all other sections are trivial.
pub fn materialize_b(q: usize, n: usize, depth: usize) -> Result<Portrait> {
    let schedule = Schedule::new(q)?;
    let mut out = Portrait::identity(q, depth.max(1));
    let l = schedule.level(n);
    if depth <= l {
        return Ok(out);
    }
    let below = depth - l;
    let count = schedule.level(n + 1).min(below);
    for j in 0..count {
        let v = Vertex::from_index(q, l, j);
        let block = make_d(q, j, j + 1)?;
        out = out.compose(&Portrait::embed_at(&v, &block)?)?;
    }
    if schedule.level(n + 1) < below {
        let v = Vertex::from_index(q, l, ipow(q, l) - 1);
        let inner = materialize_b(q, n + 1, below)?;
        out = out.compose(&Portrait::embed_at(&v, &inner)?)?;
    }
    Ok(out.with_depth(depth))
}

/// At most one nontrivial label on every root-to-leaf path.
pub fn is_staircase(p: &Portrait) -> bool {
    let labels = p.labels();
    labels.iter().all(|(v, _)| {
        labels
            .iter()
            .all(|(w, _)| w == v || w.level() <= v.level() || w.letters()[..v.level()] != *v.letters())
    })
}

/// The group `G_n` truncated to depth `depth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectedSpec {
    pub q: usize,
    pub n: usize,
    pub depth: usize,
}

impl DirectedSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DirectedSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("directed spec: {e}")))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }

    fn check(&self) -> Result<()> {
        Schedule::new(self.q)?;
        if self.n == 0 {
            return Err(Error::InvalidInput("n >= 1 is required".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidInput("depth >= 1 is required".into()));
        }
        Ok(())
    }

    /// The generators of `A_n` that act nontrivially at this depth.
    pub fn a_generators(&self) -> Result<Vec<Portrait>> {
        self.check()?;
        let l = Schedule::new(self.q)?.level(self.n);
        (0..l.min(self.depth)).map(|i| make_d(self.q, i, self.depth)).collect()
    }

    /// Generators of `A_n` followed by `b_n`.
    pub fn generators(&self) -> Result<Vec<Portrait>> {
        let mut gens = self.a_generators()?;
        gens.push(materialize_b(self.q, self.n, self.depth)?);
        Ok(gens)
    }
}

fn check_points(spec: &DirectedSpec, point_cap: usize) -> Result<()> {
    let points = saturating_pow(spec.q, spec.depth);
    if points > point_cap {
        return Err(Error::ResourceCap(format!(
            "depth {} needs {points} points, above the cap of {point_cap}",
            spec.depth
        )));
    }
    Ok(())
}

/// `G_n` acting on the depth-`k` truncated tree.
pub fn directed_group(spec: &DirectedSpec, point_cap: usize) -> Result<TruncatedGroup> {
    spec.check()?;
    check_points(spec, point_cap)?;
    TruncatedGroup::generate(&spec.generators()?, spec.depth)
}

/// `A_n` acting on the depth-`k` truncated tree.
pub fn a_group(spec: &DirectedSpec, point_cap: usize) -> Result<TruncatedGroup> {
    spec.check()?;
    check_points(spec, point_cap)?;
    let gens = spec.a_generators()?;
    if gens.is_empty() {
        return TruncatedGroup::generate(&[Portrait::identity(spec.q, spec.depth)], spec.depth);
    }
    TruncatedGroup::generate(&gens, spec.depth)
}

/// `log_q` of an order, exact.
fn log_q(order: &BigUint, q: usize) -> Result<Ratio<u64>> {
    let r = LogValue::log(order)
        .exact_ratio(&LogValue::log(&BigUint::from(q)))
        .ok_or_else(|| Error::Infeasible(format!("order {order} is not a rational power of {q}")))?;
    let num = r.numer().to_u64().ok_or_else(|| Error::ResourceCap("logarithm too large".into()))?;
    let den = r.denom().to_u64().ok_or_else(|| Error::ResourceCap("logarithm too large".into()))?;
    Ok(Ratio::new(num, den))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityRow {
    pub depth: usize,
    /// `log_q |G_n / St(depth)|`.
    pub log_order: Ratio<u64>,
    /// `log_q |Gamma_q / St(depth)| = (q^depth - 1)/(q - 1)`.
    pub ambient_log: u64,
    pub density: Ratio<u64>,
}

/// `log_q |St(i_k) / St(i_(k+1))| <= q^(i_k) l_(n+k)` at one `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerBound {
    pub k: usize,
    pub from: usize,
    pub to: usize,
    pub log_index: Ratio<u64>,
    pub bound: u64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityProfile {
    pub spec: DirectedSpec,
    pub rows: Vec<DensityRow>,
    pub layer_bounds: Vec<LayerBound>,
}

impl DensityProfile {
    /// Depth of the first row whose density exceeds the one before it.
    pub fn first_increase(&self) -> Option<usize> {
        self.rows.windows(2).find(|w| w[1].density > w[0].density).map(|w| w[1].depth)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("depth\tlog_order\tambient_log\tdensity\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}/{}\t{}\t{}/{}\n",
                r.depth,
                r.log_order.numer(),
                r.log_order.denom(),
                r.ambient_log,
                r.density.numer(),
                r.density.denom()
            ));
        }
        out
    }
}

/// Exact densities `log_q|G_n/St(k)| / ((q^k - 1)/(q - 1))` for every
/// requested `k <= spec.depth`, from one stabilizer chain at `spec.depth`.
pub fn density_profile(spec: &DirectedSpec, depths: &[usize], point_cap: usize) -> Result<DensityProfile> {
    if let Some(&bad) = depths.iter().find(|&&d| d == 0 || d > spec.depth) {
        return Err(Error::InvalidInput(format!("depth {bad} outside 1..={}", spec.depth)));
    }
    let g = directed_group(spec, point_cap)?;
    density_profile_of(spec, &g, depths)
}

/// As [`density_profile`] for an already computed group.
pub fn density_profile_of(spec: &DirectedSpec, g: &TruncatedGroup, depths: &[usize]) -> Result<DensityProfile> {
    let q = spec.q;
    let quotient_log = |k: usize| -> Result<Ratio<u64>> {
        if k == 0 {
            return Ok(Ratio::from_integer(0));
        }
        log_q(&g.level_quotient_order(k), q)
    };
    let mut rows = Vec::new();
    for &k in depths {
        let log_order = quotient_log(k)?;
        let ambient_log = ((ipow(q, k) - 1) / (q - 1)) as u64;
        rows.push(DensityRow { depth: k, log_order, ambient_log, density: log_order / ambient_log });
    }
    let schedule = Schedule::new(q)?;
    let sums = schedule.partial_sums(spec.n, spec.depth);
    let mut layer_bounds = Vec::new();
    for k in 0..sums.len() - 1 {
        let (from, to) = (sums[k], sums[k + 1]);
        if to > spec.depth {
            break;
        }
        let log_index = quotient_log(to)? - quotient_log(from)?;
        let bound = (ipow(q, from) as u64).saturating_mul(schedule.level(spec.n + k) as u64);
        layer_bounds.push(LayerBound { k, from, to, log_index, bound, holds: log_index <= Ratio::from_integer(bound) });
    }
    Ok(DensityProfile { spec: *spec, rows, layer_bounds })
}

/// Sections of `St_(G_n)(l_n)` at one level-`l_n` vertex compared with
/// `G_(n+1)`, both truncated to depth `k - l_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionComparison {
    pub vertex: Vertex,
    pub section_order: BigUint,
    pub next_order: BigUint,
    /// Equal orders and each group contains the other's generators.
    pub equal: bool,
}

/// A bounded-depth check of `psi_v(St_(G_n)(l_n)) = G_(n+1)` at every
/// level-`l_n` vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionCheck {
    pub vertices: Vec<SectionComparison>,
    pub holds: bool,
}

pub fn section_check(spec: &DirectedSpec, point_cap: usize) -> Result<SectionCheck> {
    let l = Schedule::new(spec.q)?.level(spec.n);
    if spec.depth < l.saturating_add(2) {
        return Err(Error::DepthTooSmall(format!("section check needs depth >= l_n + 2 = {}", l + 2)));
    }
    let g = directed_group(spec, point_cap)?;
    let st = g.level_stabilizer(l);
    let below = spec.depth - l;
    let next_spec = DirectedSpec { q: spec.q, n: spec.n + 1, depth: below };
    let next = directed_group(&next_spec, point_cap)?;
    let mut vertices = Vec::new();
    for idx in 0..ipow(spec.q, l) {
        let v = Vertex::from_index(spec.q, l, idx);
        let sections: Vec<LeafPermutation> = st
            .generators()
            .iter()
            .map(|x| x.section_at(&v).expect("stabilizer elements fix v"))
            .collect();
        let sec = TruncatedGroup::from_leaf_permutations(spec.q, below, sections)?;
        let equal = sec.order() == next.order()
            && next.generators().iter().all(|x| sec.contains(x))
            && sec.generators().iter().all(|x| next.contains(x));
        vertices.push(SectionComparison {
            vertex: v,
            section_order: sec.order().clone(),
            next_order: next.order().clone(),
            equal,
        });
    }
    let holds = vertices.iter().all(|c| c.equal);
    Ok(SectionCheck { vertices, holds })
}

/// Pairwise commutation of the generators.
pub fn generators_commute(g: &TruncatedGroup) -> bool {
    let gens = g.generators();
    gens.iter().enumerate().all(|(i, x)| gens[i + 1..].iter().all(|y| x.then(y) == y.then(x)))
}

/// `b_n^q` truncated to `depth` is trivial.
pub fn b_has_order_dividing_q(q: usize, n: usize, depth: usize) -> Result<bool> {
    let b = materialize_b(q, n, depth)?.to_leaf_permutation(depth);
    Ok(b.pow(q).is_identity())
}
