//! Submodules of `(Z/q)^d` for a prime power `q`, kept in Howell form so that
//! equality, membership and index are exact.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// The ring `Z/q` with `q = p^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ring {
    q: u64,
    p: u64,
    e: u32,
}

impl Ring {
    pub fn new(q: u64) -> Result<Ring> {
        if q < 2 {
            return Err(Error::InvalidInput(format!("q = {q} is not a prime power")));
        }
        let p = (2..=q).find(|d| q % d == 0).expect("q has a divisor");
        let mut rest = q;
        let mut e = 0;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        if rest != 1 {
            return Err(Error::InvalidInput(format!("q = {q} is not a prime power")));
        }
        Ok(Ring { q, p, e })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    /// `p`-adic valuation of a residue; `e` for zero.
    pub fn valuation(&self, x: u64) -> u32 {
        let mut x = x % self.q;
        if x == 0 {
            return self.e;
        }
        let mut v = 0;
        while x % self.p == 0 {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn inverse(&self, u: u64) -> Option<u64> {
        let (mut a, mut b) = ((u % self.q) as i128, self.q as i128);
        let (mut x0, mut x1) = (1i128, 0i128);
        while b != 0 {
            let t = a / b;
            (a, b) = (b, a - t * b);
            (x0, x1) = (x1, x0 - t * x1);
        }
        (a == 1).then(|| x0.rem_euclid(self.q as i128) as u64)
    }

    pub fn is_unit(&self, x: u64) -> bool {
        x % self.p != 0
    }

    fn pow_p(&self, k: u32) -> u64 {
        self.p.pow(k)
    }
}

/// A `Z/q`-submodule of `(Z/q)^dim` in Howell form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Submodule {
    ring: Ring,
    dim: usize,
    rows: Vec<Vec<u64>>,
}

fn axpy(ring: &Ring, y: &mut [u64], f: u64, x: &[u64]) {
    // y -= f * x
    let q = ring.q;
    let f = f % q;
    if f == 0 {
        return;
    }
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = (*yi + q - (f * xi) % q) % q;
    }
}

fn scaled(ring: &Ring, x: &[u64], f: u64) -> Vec<u64> {
    x.iter().map(|&xi| (xi * f) % ring.q).collect()
}

fn leading(v: &[u64]) -> Option<usize> {
    v.iter().position(|&x| x != 0)
}

fn howell(ring: &Ring, dim: usize, gens: impl IntoIterator<Item = Vec<u64>>) -> Vec<Vec<u64>> {
    let q = ring.q;
    let mut pool: Vec<Vec<u64>> = gens
        .into_iter()
        .map(|g| {
            assert_eq!(g.len(), dim, "generator has the wrong length");
            g.into_iter().map(|x| x % q).collect::<Vec<_>>()
        })
        .filter(|g: &Vec<u64>| g.iter().any(|&x| x != 0))
        .collect();
    let mut rows: Vec<(usize, u32, Vec<u64>)> = Vec::new();
    for col in 0..dim {
        let best = pool
            .iter()
            .enumerate()
            .filter(|(_, r)| r[col] != 0)
            .min_by_key(|(i, r)| (ring.valuation(r[col]), *i))
            .map(|(i, _)| i);
        let Some(bi) = best else { continue };
        let mut piv = pool.remove(bi);
        let v = ring.valuation(piv[col]);
        let pv = ring.pow_p(v);
        let unit = ring.inverse(piv[col] / pv).expect("unit part is invertible");
        piv = scaled(ring, &piv, unit);
        debug_assert_eq!(piv[col], pv);
        for r in pool.iter_mut() {
            if r[col] != 0 {
                let f = r[col] / pv;
                axpy(ring, r, f, &piv);
            }
        }
        if v > 0 {
            let ann = scaled(ring, &piv, ring.pow_p(ring.e - v));
            pool.push(ann);
        }
        pool.retain(|r| r.iter().any(|&x| x != 0));
        rows.push((col, v, piv));
    }
    debug_assert!(pool.is_empty());
    for i in 0..rows.len() {
        let (c, v) = (rows[i].0, rows[i].1);
        let pv = ring.pow_p(v);
        let (head, tail) = rows.split_at_mut(i);
        let pivot_row = &tail[0].2;
        for row in head.iter_mut() {
            let f = row.2[c] / pv;
            axpy(ring, &mut row.2, f, pivot_row);
        }
    }
    rows.into_iter().map(|(_, _, r)| r).collect()
}

impl Submodule {
    pub fn zero(ring: Ring, dim: usize) -> Self {
        Submodule { ring, dim, rows: Vec::new() }
    }

    pub fn full(ring: Ring, dim: usize) -> Self {
        let gens = (0..dim).map(|i| {
            let mut v = vec![0; dim];
            v[i] = 1;
            v
        });
        Submodule::span(ring, dim, gens)
    }

    pub fn span(ring: Ring, dim: usize, gens: impl IntoIterator<Item = Vec<u64>>) -> Self {
        Submodule { ring, dim, rows: howell(&ring, dim, gens) }
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The Howell basis.
    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// `log_p |M|`.
    pub fn log_p_size(&self) -> u64 {
        self.rows
            .iter()
            .map(|r| {
                let c = leading(r).expect("Howell rows are nonzero");
                (self.ring.e - self.ring.valuation(r[c])) as u64
            })
            .sum()
    }

    /// `log_q |M|`.
    pub fn log_size(&self) -> Ratio<u64> {
        Ratio::new(self.log_p_size(), self.ring.e as u64)
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        assert_eq!(v.len(), self.dim);
        let mut w: Vec<u64> = v.iter().map(|&x| x % self.ring.q).collect();
        for r in &self.rows {
            let c = leading(r).expect("Howell rows are nonzero");
            if w[..c].iter().any(|&x| x != 0) {
                return false;
            }
            let pv = r[c];
            if w[c] % pv != 0 {
                return false;
            }
            let f = w[c] / pv;
            axpy(&self.ring, &mut w, f, r);
        }
        w.iter().all(|&x| x == 0)
    }

    pub fn contains_module(&self, other: &Submodule) -> bool {
        other.rows.iter().all(|r| self.contains(r))
    }

    pub fn sum(&self, other: &Submodule) -> Submodule {
        assert_eq!(self.dim, other.dim);
        Submodule::span(self.ring, self.dim, self.rows.iter().chain(&other.rows).cloned())
    }

    pub fn intersect(&self, other: &Submodule) -> Submodule {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let stacked = self
            .rows
            .iter()
            .map(|u| u.iter().chain(u.iter()).copied().collect::<Vec<_>>())
            .chain(other.rows.iter().map(|v| v.iter().copied().chain(std::iter::repeat(0).take(d)).collect()));
        let h = howell(&self.ring, 2 * d, stacked);
        let gens = h
            .into_iter()
            .filter(|r| r[..d].iter().all(|&x| x == 0))
            .map(|r| r[d..].to_vec());
        Submodule::span(self.ring, d, gens)
    }

    /// `log_p |self : sub|`, or `None` when `sub` is not contained in `self`.
    pub fn log_p_index(&self, sub: &Submodule) -> Option<u64> {
        self.contains_module(sub).then(|| self.log_p_size() - sub.log_p_size())
    }

    /// Image under the coordinate permutation `i -> perm[i]`.
    pub fn permute(&self, perm: &[u32]) -> Submodule {
        Submodule::span(self.ring, self.dim, self.rows.iter().map(|r| permute_vec(r, perm)))
    }

    pub fn is_invariant(&self, perm: &[u32]) -> bool {
        self.rows.iter().all(|r| self.contains(&permute_vec(r, perm)))
    }

    /// `span{ b - b.g }` over the basis `b` and the permutations `g`.
    pub fn commutator(&self, perms: &[Vec<u32>]) -> Submodule {
        let q = self.ring.q;
        let gens = self.rows.iter().flat_map(|r| {
            perms.iter().map(move |g| {
                let moved = permute_vec(r, g);
                r.iter().zip(&moved).map(|(&a, &b)| (a + q - b) % q).collect::<Vec<_>>()
            })
        });
        Submodule::span(self.ring, self.dim, gens)
    }

    /// Restriction to the coordinates `coords`, in that order.
    pub fn project(&self, coords: &[usize]) -> Submodule {
        Submodule::span(
            self.ring,
            coords.len(),
            self.rows.iter().map(|r| coords.iter().map(|&c| r[c]).collect()),
        )
    }

    /// Elements supported on the coordinates `coords`.
    pub fn restrict_to_support(&self, coords: &[usize]) -> Submodule {
        let gens = coords.iter().map(|&c| {
            let mut v = vec![0; self.dim];
            v[c] = 1;
            v
        });
        self.intersect(&Submodule::span(self.ring, self.dim, gens))
    }

    /// `M x M x ... x M` with `copies` blocks.
    pub fn repeat(&self, copies: usize) -> Submodule {
        let d = self.dim;
        let gens = (0..copies).flat_map(|j| {
            self.rows.iter().map(move |r| {
                let mut v = vec![0; d * copies];
                v[j * d..(j + 1) * d].copy_from_slice(r);
                v
            })
        });
        Submodule::span(self.ring, d * copies, gens)
    }

    /// The diagonal `{(v, v, ..., v)}` with `copies` blocks.
    pub fn diagonal(&self, copies: usize) -> Submodule {
        let gens = self.rows.iter().map(|r| r.iter().copied().cycle().take(r.len() * copies).collect());
        Submodule::span(self.ring, self.dim * copies, gens)
    }
}

fn permute_vec(v: &[u64], perm: &[u32]) -> Vec<u64> {
    let mut out = vec![0; v.len()];
    for (i, &x) in v.iter().enumerate() {
        out[perm[i] as usize] = x;
    }
    out
}
