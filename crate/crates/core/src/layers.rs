//! Defining sequences of layer groups for subgroups of the `q`-adic
//! automorphisms.
//!
//! A layer at level `n` is a submodule `S_n` of `(Z/q)^(q^n)`: the vector `t`
//! stands for the automorphism with label `sigma^(t_v)` at the level-`n`
//! vertex `v` and no other labels. The coordinate blocks
//! `[x q^(n-1), (x+1) q^(n-1))` are the sections at the first-level vertex
//! `x`, so `psi(S_n) <= S_(n-1)^q` is a statement about blocks.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{ipow, Permutation, Portrait};
use crate::zmod::{Ring, Submodule};

/// Requested digits `mu_1, mu_2, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionSpec {
    pub q: u64,
    pub digits: Vec<u64>,
}

/// How `digits_from_gamma` treats terminating expansions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionMode {
    Terminating,
    /// Rewrites `k/q^r` as `(k-1)/q^r + sum_{n>r} (q-1)/q^n`.
    Infinite,
}

impl ExpansionSpec {
    /// Digits of `1 - gamma` in base `q`, to `n` places.
    pub fn from_gamma(q: u64, gamma: Ratio<u64>, n: usize, mode: ExpansionMode) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidInput("q must be at least 2".into()));
        }
        if *gamma.denom() == 0 || gamma > Ratio::from_integer(1) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} is not in [0, 1]")));
        }
        let x = Ratio::from_integer(1u64) - gamma;
        if x == Ratio::from_integer(1) {
            // 1 = 0.(q-1)(q-1)... in base q
            return Ok(ExpansionSpec { q, digits: vec![q - 1; n] });
        }
        let terminating = |x: Ratio<u64>| -> Vec<u64> {
            let (mut num, den) = (*x.numer() as u128, *x.denom() as u128);
            (0..n)
                .map(|_| {
                    num *= q as u128;
                    let d = num / den;
                    num %= den;
                    d as u64
                })
                .collect()
        };
        let digits = match mode {
            ExpansionMode::Terminating => terminating(x),
            ExpansionMode::Infinite => {
                if x == Ratio::from_integer(0) {
                    return Err(Error::Infeasible(
                        "the expansion of 0 has no infinite form (gamma = 1)".into(),
                    ));
                }
                match terminating_length(q, x) {
                    None => terminating(x),
                    Some(r) => {
                        let mut d = terminating(x);
                        // lower the last nonzero digit and fill with q-1
                        let last = r - 1;
                        if last < n {
                            d[last] -= 1;
                            for digit in d.iter_mut().skip(r) {
                                *digit = q - 1;
                            }
                        }
                        d
                    }
                }
            }
        };
        Ok(ExpansionSpec { q, digits })
    }

    /// `sum_{i<=n} q^(n-i) mu_i <= q^n - 1` for every `n`.
    pub fn is_almost_q_expansion(&self) -> bool {
        let q = self.q as u128;
        let mut acc: u128 = 0;
        let mut bound: u128 = 1;
        for &mu in &self.digits {
            acc = acc.saturating_mul(q).saturating_add(mu as u128);
            bound = bound.saturating_mul(q);
            if acc > bound - 1 {
                return false;
            }
        }
        true
    }

    /// Digits bounded by `q - 1`.
    pub fn is_q_expansion(&self) -> bool {
        self.digits.iter().all(|&d| d < self.q)
    }
}

/// Number of base-`q` digits of `x`, if its expansion terminates.
pub fn terminating_length(q: u64, x: Ratio<u64>) -> Option<usize> {
    if *x.numer() == 0 {
        return Some(0);
    }
    let den = *x.denom();
    let mut r = 0;
    let mut qq: u128 = 1;
    // den must divide q^r
    while (qq % den as u128) != 0 {
        qq *= q as u128;
        r += 1;
        if r > 128 || qq > u64::MAX as u128 * q as u128 {
            return None;
        }
    }
    // strip trailing zero digits
    let mut num = *x.numer() as u128 * (qq / den as u128);
    while r > 0 && num % q as u128 == 0 {
        num /= q as u128;
        r -= 1;
    }
    Some(r)
}

/// How a sequence was produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Variant {
    Lemma52 { mu: Vec<u64> },
    Diagonal { horizon: usize },
    LambdaShift { base_mu: Vec<u64>, lambda: Vec<usize> },
    Custom,
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Lemma52 { .. } => "lemma52",
            Variant::Diagonal { .. } => "diagonal",
            Variant::LambdaShift { .. } => "lambda-shift",
            Variant::Custom => "custom",
        }
    }
}

/// Layers `S_0, ..., S_N` with `S_0 = Z/q`, optionally with the auxiliary
/// index-`q` submodules `H_0, ..., H_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefiningSequence {
    pub q: u64,
    pub variant: Variant,
    pub layers: Vec<Submodule>,
    pub aux: Option<Vec<Submodule>>,
}

/// The permutation of level-`n` vertices induced by the layer vector `t` of
/// level `j < n`.
pub fn layer_action(q: usize, j: usize, t: &[u64], n: usize) -> Vec<u32> {
    assert!(j < n);
    let below = ipow(q, n - j - 1);
    let width = below * q;
    (0..ipow(q, n))
        .map(|v| {
            let u = v / width;
            let rest = v % width;
            let c = (rest / below + t[u] as usize) % q;
            (u * width + c * below + rest % below) as u32
        })
        .collect()
}

/// Generators of `A_(n-1)` acting on level `n`: every basis vector of every
/// layer below `n`.
pub fn acting_generators(q: usize, layers: &[Submodule], n: usize) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    for (j, layer) in layers.iter().enumerate().take(n) {
        for r in layer.rows() {
            let g = layer_action(q, j, r, n);
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// One portrait per basis vector: `sigma^(t_v)` at each level-`n` vertex.
pub fn layer_to_portraits(q: usize, layer: &Submodule) -> Vec<Portrait> {
    let n = level_of(q, layer.dim());
    let sigma = Permutation::cycle(q);
    layer
        .rows()
        .iter()
        .map(|r| Portrait::from_level_labels(q, n, |v| sigma.pow(r[v] as usize)))
        .collect()
}

fn level_of(q: usize, dim: usize) -> usize {
    let mut n = 0;
    let mut d = 1;
    while d < dim {
        d *= q;
        n += 1;
    }
    assert_eq!(d, dim, "layer dimension is not a power of q");
    n
}

/// Coefficients of `x^i (x - 1)^k` in `Z/q[x]/(x^q - 1)`.
fn chain_generator(ring: &Ring, q: usize, k: usize, shift: usize) -> Vec<u64> {
    let qq = ring.q();
    let mut poly = vec![0u64; q];
    poly[0] = 1;
    for _ in 0..k {
        // multiply by (x - 1)
        let mut next = vec![0u64; q];
        for (i, &c) in poly.iter().enumerate() {
            next[(i + 1) % q] = (next[(i + 1) % q] + c) % qq;
            next[i] = (next[i] + qq - c) % qq;
        }
        poly = next;
    }
    let mut out = vec![0u64; q];
    for (i, &c) in poly.iter().enumerate() {
        out[(i + shift) % q] = c;
    }
    out
}

fn cyclic_shift(q: usize) -> Vec<u32> {
    (0..q).map(|i| ((i + 1) % q) as u32).collect()
}

/// The candidate chain member `N_k = (x-1)^k R + Phi R` inside
/// `R = Z/q[x]/(x^q - 1)`, where `Phi = 1 + x + ... + x^(q-1)`.
pub fn candidate_chain_member(ring: Ring, k: usize) -> Submodule {
    let q = ring.q() as usize;
    let mut gens: Vec<Vec<u64>> = (0..q).map(|i| chain_generator(&ring, q, k, i)).collect();
    gens.push(vec![1; q]);
    Submodule::span(ring, q, gens)
}

/// Every shift-invariant submodule of `(Z/q)^q` containing the all-ones
/// vector. Exhaustive; intended for `q <= 4`.
pub fn invariant_overmodules_of_diagonal(ring: Ring) -> Vec<Submodule> {
    let q = ring.q() as usize;
    let shift = cyclic_shift(q);
    let phi = Submodule::span(ring, q, vec![vec![1; q]]);
    let mut cyclic: Vec<Submodule> = Vec::new();
    for code in 0..ipow(q, q) {
        let mut f = vec![0u64; q];
        let mut c = code;
        for slot in f.iter_mut() {
            *slot = (c % q) as u64;
            c /= q;
        }
        let mut gens = vec![f.clone()];
        let mut g = f;
        for _ in 1..q {
            let mut h = vec![0u64; q];
            for (i, &x) in g.iter().enumerate() {
                h[shift[i] as usize] = x;
            }
            gens.push(h.clone());
            g = h;
        }
        let m = Submodule::span(ring, q, gens).sum(&phi);
        if !cyclic.contains(&m) {
            cyclic.push(m);
        }
    }
    let mut all = cyclic.clone();
    let mut i = 0;
    while i < all.len() {
        for c in &cyclic {
            let s = all[i].sum(c);
            if !all.contains(&s) {
                all.push(s);
            }
        }
        i += 1;
    }
    all.sort_by(|a, b| a.rows().cmp(b.rows()));
    all
}

/// A chain member of index `q^k`: invariant, containing the all-ones
/// vector, and for `k < q - 1` with commutator `(x - 1) N` still containing it.
fn admissible(ring: Ring, n: &Submodule, k: usize) -> bool {
    let q = ring.q() as usize;
    let e = ring.e() as u64;
    let phi = Submodule::span(ring, q, vec![vec![1; q]]);
    let shift = cyclic_shift(q);
    n.log_p_size() == (q - k) as u64 * e
        && n.contains_module(&phi)
        && n.is_invariant(&shift)
        && (k + 1 >= q || n.commutator(std::slice::from_ref(&shift)).contains_module(&phi))
}

/// The chain member of index `q^k` used by the construction: the candidate
/// when it is admissible, otherwise the first admissible invariant
/// overmodule of the diagonal in Howell order.
pub fn chain_member(ring: Ring, k: usize) -> Result<Submodule> {
    let q = ring.q() as usize;
    let cand = candidate_chain_member(ring, k);
    if admissible(ring, &cand, k) {
        return Ok(cand);
    }
    log::warn!("candidate chain member N_{k} is not admissible for q = {q}; searching exhaustively");
    if q > 4 {
        return Err(Error::ChainStep {
            level: k,
            reason: format!("candidate chain member is not admissible and q = {q} is too large to search"),
        });
    }
    invariant_overmodules_of_diagonal(ring)
        .into_iter()
        .find(|m| admissible(ring, m, k))
        .ok_or_else(|| Error::ChainStep { level: k, reason: "no admissible invariant submodule of the required index".into() })
}

/// Lifts of generators of the chain member `N_mu` inside
/// `Q = (S_(n-1)/H_(n-1))^q`, as vectors of `S_(n-1)^q`.
///
/// When the quotient `T = S_(n-1)/H_(n-1)` is cyclic, `Q` is the group ring
/// `Z/q[C_q]` and `N_mu` comes from [`chain_member`]. When `T` has exponent
/// `p`, `Q = F_p[C_q] (x) T` and `N_mu = (x - 1)^mu Q`.
fn quotient_chain_lift(
    ring: Ring,
    s_prev: &Submodule,
    h_prev: &Submodule,
    mu: u64,
    level: usize,
) -> Result<Vec<Vec<u64>>> {
    let q = ring.q() as usize;
    let d = s_prev.dim();
    let top = ring.q() / ring.p();
    let lift = |coeffs: &[Vec<u64>], basis: &[&Vec<u64>]| -> Vec<u64> {
        // coeffs[i][j]: coefficient of basis element i in block j
        let mut v = vec![0u64; d * q];
        for (ci, t) in coeffs.iter().zip(basis) {
            for (j, &c) in ci.iter().enumerate() {
                for (k, &g) in t.iter().enumerate() {
                    v[j * d + k] = (v[j * d + k] + c * g) % ring.q();
                }
            }
        }
        v
    };
    if let Some(gen) = s_prev.rows().iter().find(|r| {
        let scaled: Vec<u64> = r.iter().map(|&x| x * top % ring.q()).collect();
        !h_prev.contains(&scaled)
    }) {
        let n_mu = chain_member(ring, mu as usize)?;
        return Ok(n_mu.rows().iter().map(|c| lift(std::slice::from_ref(c), &[gen])).collect());
    }
    let killed_by_p = s_prev.rows().iter().all(|r| {
        let scaled: Vec<u64> = r.iter().map(|&x| x * ring.p() % ring.q()).collect();
        h_prev.contains(&scaled)
    });
    if !killed_by_p {
        return Err(Error::ChainStep {
            level,
            reason: "S_(n-1)/H_(n-1) is neither cyclic nor of exponent p".into(),
        });
    }
    let mut basis: Vec<&Vec<u64>> = Vec::new();
    let mut span = h_prev.clone();
    for r in s_prev.rows() {
        if !span.contains(r) {
            span = span.sum(&Submodule::span(ring, d, vec![r.clone()]));
            basis.push(r);
        }
    }
    debug_assert_eq!(basis.len() as u32, ring.e());
    let field = Ring::new(ring.p())?;
    let mut out = Vec::new();
    for i in 0..basis.len() {
        for shift in 0..q {
            let poly = chain_generator(&field, q, mu as usize, shift);
            let mut coeffs = vec![vec![0u64; q]; basis.len()];
            coeffs[i] = poly;
            out.push(lift(&coeffs, &basis));
        }
    }
    Ok(out)
}

/// One step of the construction: from `(S_(n-1), H_(n-1))` and the digit
/// `mu_n`, produce `(S_n, H_n)`.
pub fn lemma52_step(
    ring: Ring,
    s_prev: &Submodule,
    h_prev: &Submodule,
    mu: u64,
    acting: &[Vec<u32>],
    level: usize,
) -> Result<(Submodule, Submodule)> {
    let q = ring.q() as usize;
    if mu >= ring.q() {
        return Err(Error::InvalidInput(format!("digit {mu} exceeds q - 1 = {}", q - 1)));
    }
    if !s_prev.contains_module(h_prev) || s_prev.log_p_size() - h_prev.log_p_size() != ring.e() as u64 {
        return Err(Error::ChainStep { level, reason: "H_(n-1) does not have index q in S_(n-1)".into() });
    }
    let d = s_prev.dim();
    let kernel = h_prev.repeat(q);
    let lifted = quotient_chain_lift(ring, s_prev, h_prev, mu, level)?;
    let s = Submodule::span(ring, d * q, kernel.rows().iter().cloned().chain(lifted));
    if acting.iter().any(|g| !s.is_invariant(g)) {
        return Err(Error::InvarianceViolation { level });
    }
    let h = kernel.sum(&s.commutator(acting));
    if s.log_p_size() - h.log_p_size() != ring.e() as u64 || !s.contains_module(&h) {
        return Err(Error::ChainStep { level, reason: "H_n does not have index q in S_n".into() });
    }
    if acting.iter().any(|g| !h.is_invariant(g)) {
        return Err(Error::InvarianceViolation { level });
    }
    let full = s_prev.repeat(q);
    if full.log_p_size() - s.log_p_size() != mu * ring.e() as u64 {
        return Err(Error::ChainStep { level, reason: format!("psi(S_n) does not have index q^{mu}") });
    }
    Ok((s, h))
}

impl DefiningSequence {
    /// Layers with `|S_(n-1)^q : psi(S_n)| = q^(mu_n)` for digits `0 <= mu_n < q`.
    pub fn lemma52(q: u64, mu: &[u64]) -> Result<Self> {
        let ring = Ring::new(q)?;
        let mut layers = vec![Submodule::full(ring, 1)];
        let mut aux = vec![Submodule::zero(ring, 1)];
        for (i, &m) in mu.iter().enumerate() {
            let n = i + 1;
            let acting = acting_generators(q as usize, &layers, n);
            let (s, h) = lemma52_step(ring, &layers[i], &aux[i], m, &acting, n)?;
            layers.push(s);
            aux.push(h);
        }
        Ok(DefiningSequence { q, variant: Variant::Lemma52 { mu: mu.to_vec() }, layers, aux: Some(aux) })
    }

    /// `S_n = psi^(-1)(D_q(S_(n-1)))`.
    pub fn diagonal(q: u64, horizon: usize) -> Result<Self> {
        let ring = Ring::new(q)?;
        let mut layers = vec![Submodule::full(ring, 1)];
        for n in 1..=horizon {
            let next = layers[n - 1].diagonal(q as usize);
            layers.push(next);
        }
        Ok(DefiningSequence { q, variant: Variant::Diagonal { horizon }, layers, aux: None })
    }

    /// The `lambda`-shift of the sequence realizing `base_mu`: at level
    /// `k + lambda_k` the layer is `S_k` repeated over the level-`lambda_k`
    /// blocks, elsewhere the full pullback of the previous layer.
    pub fn lambda_shift(q: u64, base_mu: &[u64], lambda: &[usize], horizon: usize) -> Result<Self> {
        if lambda.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("lambda must be strictly increasing".into()));
        }
        let used = lambda
            .iter()
            .enumerate()
            .take_while(|(i, &l)| i + 1 + l <= horizon)
            .count();
        if used < lambda.len() {
            log::warn!("lambda schedule trimmed to {used} entries at horizon {horizon}");
        }
        if base_mu.len() < used {
            return Err(Error::InvalidInput(format!(
                "the schedule needs {used} base digits, {} given",
                base_mu.len()
            )));
        }
        let base = DefiningSequence::lemma52(q, &base_mu[..used])?;
        let ring = Ring::new(q)?;
        let mut layers = vec![Submodule::full(ring, 1)];
        for n in 1..=horizon {
            let hit = (0..used).find(|&i| i + 1 + lambda[i] == n);
            let next = match hit {
                Some(i) => base.layers[i + 1].repeat(ipow(q as usize, lambda[i])),
                None => layers[n - 1].repeat(q as usize),
            };
            layers.push(next);
        }
        Ok(DefiningSequence {
            q,
            variant: Variant::LambdaShift { base_mu: base_mu[..used].to_vec(), lambda: lambda[..used].to_vec() },
            layers,
            aux: None,
        })
    }

    pub fn ring(&self) -> Ring {
        self.layers[0].ring()
    }

    /// Number of digits realized, `N` for layers `S_0..S_N`.
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    /// `log_q |S_n|` for every layer.
    pub fn log_sizes(&self) -> Vec<Ratio<u64>> {
        self.layers.iter().map(Submodule::log_size).collect()
    }

    /// `s_n = q log|S_(n-1)| - log|S_n|` for `n = 1..=N`, signed.
    pub fn realized_s(&self) -> Vec<Ratio<i64>> {
        let sizes: Vec<Ratio<i64>> = self
            .log_sizes()
            .iter()
            .map(|r| Ratio::new(*r.numer() as i64, *r.denom() as i64))
            .collect();
        let q = Ratio::from_integer(self.q as i64);
        (1..sizes.len()).map(|n| q * sizes[n - 1] - sizes[n]).collect()
    }

    /// The target digits of the recipe, when there is one.
    pub fn target_digits(&self) -> Option<Vec<u64>> {
        match &self.variant {
            Variant::Lemma52 { mu } => Some(mu.clone()),
            Variant::Diagonal { horizon } => Some(vec![self.q - 1; *horizon]),
            Variant::LambdaShift { base_mu, lambda } => {
                let mut out = vec![0; self.horizon()];
                for (i, &l) in lambda.iter().enumerate() {
                    let n = i + 1 + l;
                    if n <= out.len() {
                        out[n - 1] = self.q.pow(l as u32) * base_mu[i];
                    }
                }
                Some(out)
            }
            Variant::Custom => None,
        }
    }

    /// `log_q |G_S / St(n)| = sum_{k<n} log_q |S_k|` for `n = 1..=N+1`.
    pub fn log_quotient_orders(&self) -> Vec<Ratio<u64>> {
        let mut acc = Ratio::from_integer(0);
        self.log_sizes()
            .into_iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect()
    }

    /// All layer portraits of `S_0..S_(n-1)`: generators of `G_S / St(n)`.
    pub fn portraits_below(&self, n: usize) -> Vec<Portrait> {
        self.layers
            .iter()
            .take(n)
            .flat_map(|l| layer_to_portraits(self.q as usize, l))
            .collect()
    }

    /// Levels `n = k + lambda_k` with block level `lambda_k`.
    pub fn shifted_levels(&self) -> Vec<(usize, usize)> {
        match &self.variant {
            Variant::LambdaShift { lambda, .. } => lambda
                .iter()
                .enumerate()
                .map(|(i, &l)| (i + 1 + l, l))
                .filter(|&(n, _)| n <= self.horizon())
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Coordinates of block `x` of `copies` blocks in dimension `dim`.
fn block(dim: usize, copies: usize, x: usize) -> Vec<usize> {
    let w = dim / copies;
    (x * w..(x + 1) * w).collect()
}

/// Outcome of one property over all levels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub holds: bool,
    pub first_failure: Option<usize>,
}

impl Check {
    fn over(levels: impl IntoIterator<Item = usize>, mut ok: impl FnMut(usize) -> bool) -> Check {
        for n in levels {
            if !ok(n) {
                return Check { holds: false, first_failure: Some(n) };
            }
        }
        Check { holds: true, first_failure: None }
    }
}

/// Structural properties of a defining sequence, level by level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    /// `S_n` is normalized by `A_(n-1)`.
    pub invariance: Check,
    /// `psi(S_n) <= S_(n-1)^q`.
    pub self_similar: Check,
    /// `psi_x(S_n) = S_(n-1)` for every first-level vertex `x`.
    pub super_strongly_fractal: Check,
    /// Some coordinate of `S_n` carries a unit.
    pub level_transitive: Check,
    /// `S_n` is the sum of its parts below the level-`l` vertices, at each
    /// shifted level `n` with block level `l`.
    pub branch_blocks: Vec<(usize, usize, bool)>,
    /// `psi_(n-k)(S_n) >= H_k x ... x H_k >= D_(q^k)(sigma) x ... x D_(q^k)(sigma)`
    /// for the first `k` with `mu_k != q - 1`; `None` without auxiliary data
    /// or without such `k`.
    pub branching_containment: Option<(usize, Check)>,
}

pub fn check_properties(seq: &DefiningSequence) -> PropertyReport {
    let q = seq.q as usize;
    let n_max = seq.horizon();
    let invariance = Check::over(1..=n_max, |n| {
        acting_generators(q, &seq.layers, n).iter().all(|g| seq.layers[n].is_invariant(g))
    });
    let self_similar = Check::over(1..=n_max, |n| seq.layers[n - 1].repeat(q).contains_module(&seq.layers[n]));
    let super_strongly_fractal = Check::over(1..=n_max, |n| {
        let dim = seq.layers[n].dim();
        (0..q).all(|x| seq.layers[n].project(&block(dim, q, x)) == seq.layers[n - 1])
    });
    let ring = seq.ring();
    let level_transitive = Check::over(0..=n_max, |n| {
        let layer = &seq.layers[n];
        (0..layer.dim()).any(|v| layer.project(&[v]).rows().iter().any(|r| ring.is_unit(r[0])))
    });
    let branch_blocks = seq
        .shifted_levels()
        .into_iter()
        .map(|(n, l)| (n, l, rist_equals_layer(&seq.layers[n], q, l)))
        .collect();
    let branching_containment = seq.aux.as_ref().and_then(|aux| {
        let mu = seq.target_digits()?;
        let k = mu.iter().position(|&m| m != seq.q - 1)? + 1;
        let sigma_diag = Submodule::span(ring, ipow(q, k), vec![vec![1; ipow(q, k)]]);
        let check = Check::over(k + 1..=n_max, |n| {
            let copies = ipow(q, n - k);
            seq.layers[n].contains_module(&aux[k].repeat(copies))
                && aux[k].contains_module(&sigma_diag)
        });
        Some((k, check))
    });
    PropertyReport {
        invariance,
        self_similar,
        super_strongly_fractal,
        level_transitive,
        branch_blocks,
        branching_containment,
    }
}

/// `Rist_S(l) = S`: the layer splits over the level-`l` blocks.
pub fn rist_equals_layer(layer: &Submodule, q: usize, l: usize) -> bool {
    let copies = ipow(q, l);
    let dim = layer.dim();
    let mut sum = Submodule::zero(layer.ring(), dim);
    for x in 0..copies {
        sum = sum.sum(&layer.restrict_to_support(&block(dim, copies, x)));
    }
    sum == *layer
}

/// Checks `|N : [N, C_q wr C_q]| = q` for every shift-invariant submodule `N`
/// of `(Z/q)^q` containing the diagonal. Returns the number of modules
/// checked and the first counterexample, if any.
pub fn lemma51_exhaustive(q: u64) -> Result<(usize, Option<Submodule>)> {
    let ring = Ring::new(q)?;
    let shift = cyclic_shift(q as usize);
    let mods = invariant_overmodules_of_diagonal(ring);
    let bad = mods.iter().find(|n| {
        let c = n.commutator(std::slice::from_ref(&shift));
        !n.contains_module(&c) || n.log_p_size() - c.log_p_size() != ring.e() as u64
    });
    Ok((mods.len(), bad.cloned()))
}

/// A named invariant that failed during verification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub level: Option<usize>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.level {
            Some(n) => write!(f, "{} fails at level {n}", self.invariant),
            None => write!(f, "{} fails", self.invariant),
        }
    }
}

/// Runs every invariant that applies to the sequence and returns the first
/// failure.
pub fn verify_sequence(seq: &DefiningSequence) -> std::result::Result<(), Violation> {
    let q = seq.q as usize;
    let ring = seq.ring();
    if seq.layers.is_empty() || seq.layers[0] != Submodule::full(ring, 1) {
        return Err(Violation { invariant: "S_0 = Z/q", level: Some(0) });
    }
    for (n, l) in seq.layers.iter().enumerate() {
        if l.dim() != ipow(q, n) {
            return Err(Violation { invariant: "layer dimension", level: Some(n) });
        }
    }
    let report = check_properties(seq);
    if let Some(n) = report.invariance.first_failure {
        return Err(Violation { invariant: "A-invariance", level: Some(n) });
    }
    if let Some(n) = report.self_similar.first_failure {
        return Err(Violation { invariant: "self-similarity", level: Some(n) });
    }
    if let Some(target) = seq.target_digits() {
        let realized = seq.realized_s();
        if let Some(i) = (0..target.len()).find(|&i| realized.get(i) != Some(&Ratio::from_integer(target[i] as i64))) {
            return Err(Violation { invariant: "realized digits", level: Some(i + 1) });
        }
    }
    match &seq.variant {
        Variant::Lemma52 { .. } => {
            if let Some(n) = report.super_strongly_fractal.first_failure {
                return Err(Violation { invariant: "super strong fractality", level: Some(n) });
            }
            if let Some(n) = report.level_transitive.first_failure {
                return Err(Violation { invariant: "level-transitivity", level: Some(n) });
            }
            if let Some(aux) = &seq.aux {
                for n in 1..seq.layers.len() {
                    let (s, h) = (&seq.layers[n], &aux[n]);
                    let diag = seq.layers[n - 1].diagonal(q).sum(&aux[n - 1].repeat(q));
                    if !s.contains_module(&diag) {
                        return Err(Violation { invariant: "diagonal containment", level: Some(n) });
                    }
                    if !s.contains_module(h) || s.log_p_size() - h.log_p_size() != ring.e() as u64 {
                        return Err(Violation { invariant: "H-index", level: Some(n) });
                    }
                    let acting = acting_generators(q, &seq.layers, n);
                    if !h.contains_module(&s.commutator(&acting)) || acting.iter().any(|g| !h.is_invariant(g)) {
                        return Err(Violation { invariant: "H-commutator", level: Some(n) });
                    }
                }
                if let Some((_, c)) = &report.branching_containment {
                    if let Some(n) = c.first_failure {
                        return Err(Violation { invariant: "branching containment", level: Some(n) });
                    }
                }
            }
        }
        Variant::Diagonal { .. } => {
            if let Some(n) = report.super_strongly_fractal.first_failure {
                return Err(Violation { invariant: "super strong fractality", level: Some(n) });
            }
        }
        Variant::LambdaShift { .. } => {
            if let Some(&(n, _, _)) = report.branch_blocks.iter().find(|b| !b.2) {
                return Err(Violation { invariant: "block decomposition", level: Some(n) });
            }
        }
        Variant::Custom => {}
    }
    Ok(())
}

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SequenceJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    q: u64,
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_mu: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<Vec<usize>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    realized_s: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<Vec<Vec<u64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aux: Option<Vec<Vec<Vec<u64>>>>,
}

fn modules_from_rows(ring: Ring, q: usize, raw: Vec<Vec<Vec<u64>>>) -> Result<Vec<Submodule>> {
    raw.into_iter()
        .enumerate()
        .map(|(n, rows)| {
            let dim = ipow(q, n);
            if let Some(r) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::InvalidInput(format!(
                    "layer {n} has a vector of length {}, expected {dim}",
                    r.len()
                )));
            }
            if rows.iter().flatten().any(|&x| x >= ring.q()) {
                return Err(Error::InvalidInput(format!("layer {n} has entries outside Z/{q}")));
            }
            Ok(Submodule::span(ring, dim, rows))
        })
        .collect()
}

impl DefiningSequence {
    /// Reads a recipe, or a recorded sequence when `layers` is present.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SequenceJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("sequence JSON: {e}")))?;
        let ring = Ring::new(raw.q)?;
        let q = raw.q as usize;
        let variant = match raw.variant.as_str() {
            "lemma52" => Variant::Lemma52 {
                mu: raw.mu.clone().ok_or_else(|| Error::InvalidInput("lemma52 needs \"mu\"".into()))?,
            },
            "diagonal" => Variant::Diagonal {
                horizon: raw
                    .horizon
                    .or_else(|| raw.layers.as_ref().map(|l| l.len().saturating_sub(1)))
                    .ok_or_else(|| Error::InvalidInput("diagonal needs \"N\"".into()))?,
            },
            "lambda-shift" => Variant::LambdaShift {
                base_mu: raw.base_mu.clone().ok_or_else(|| Error::InvalidInput("lambda-shift needs \"base_mu\"".into()))?,
                lambda: raw.lambda.clone().ok_or_else(|| Error::InvalidInput("lambda-shift needs \"lambda\"".into()))?,
            },
            "custom" => Variant::Custom,
            other => return Err(Error::InvalidInput(format!("unknown variant {other:?}"))),
        };
        if let Some(layers) = raw.layers {
            let layers = modules_from_rows(ring, q, layers)?;
            let aux = raw.aux.map(|a| modules_from_rows(ring, q, a)).transpose()?;
            if let Some(a) = &aux {
                if a.len() != layers.len() {
                    return Err(Error::InvalidInput("aux and layers differ in length".into()));
                }
            }
            return Ok(DefiningSequence { q: raw.q, variant, layers, aux });
        }
        match variant {
            Variant::Lemma52 { mu } => DefiningSequence::lemma52(raw.q, &mu),
            Variant::Diagonal { horizon } => DefiningSequence::diagonal(raw.q, horizon),
            Variant::LambdaShift { base_mu, lambda } => {
                let horizon = raw.horizon.unwrap_or_else(|| {
                    lambda.iter().enumerate().take(base_mu.len()).map(|(i, &l)| i + 1 + l).max().unwrap_or(0)
                });
                DefiningSequence::lambda_shift(raw.q, &base_mu, &lambda, horizon)
            }
            Variant::Custom => Err(Error::InvalidInput("custom sequences need \"layers\"".into())),
        }
    }

    pub fn to_json(&self) -> String {
        let rows = |ms: &[Submodule]| ms.iter().map(|m| m.rows().to_vec()).collect::<Vec<_>>();
        let mut out = SequenceJson {
            format_version: Some(FORMAT_VERSION),
            q: self.q,
            variant: self.variant.tag().to_string(),
            mu: None,
            base_mu: None,
            lambda: None,
            horizon: Some(self.horizon()),
            realized_s: Some(self.realized_s().iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect()),
            layers: Some(rows(&self.layers)),
            aux: self.aux.as_deref().map(rows),
        };
        match &self.variant {
            Variant::Lemma52 { mu } => out.mu = Some(mu.clone()),
            Variant::LambdaShift { base_mu, lambda } => {
                out.base_mu = Some(base_mu.clone());
                out.lambda = Some(lambda.clone());
            }
            Variant::Diagonal { .. } | Variant::Custom => {}
        }
        serde_json::to_string_pretty(&out).expect("sequence serializes")
    }
}
