//! Rooted `m`-adic trees and their finitary automorphisms.
//!
//! An automorphism is stored as a *portrait*: a permutation label at every
//! vertex above its depth. Maps act on the right and products are read left
//! to right, so `f.compose(&g)` first applies `f` and then `g`. Sections obey
//! `(fg)|_v = f|_v * g|_{(v)f}`.
//!
//! Portraits are normalized: any subtree whose labels are all trivial is
//! stored as `None`, so structural equality coincides with equality of
//! automorphisms.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `m^k`, panicking on overflow.
pub fn ipow(m: usize, k: usize) -> usize {
    m.checked_pow(k as u32).expect("tree size overflows usize")
}

/// A vertex of the `m`-adic tree, i.e. a word over `{0, .., m-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    m: usize,
    word: Vec<usize>,
}

impl Vertex {
    pub fn root(m: usize) -> Self {
        Vertex { m, word: Vec::new() }
    }

    pub fn new(m: usize, word: Vec<usize>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidVertex(format!("tree degree must be at least 2, got {m}")));
        }
        if let Some(&x) = word.iter().find(|&&x| x >= m) {
            return Err(Error::InvalidVertex(format!("letter {x} out of range for m = {m}")));
        }
        Ok(Vertex { m, word })
    }

    /// The vertex at `level` with lexicographic index `index`.
    pub fn from_index(m: usize, level: usize, mut index: usize) -> Self {
        let mut word = vec![0; level];
        for slot in word.iter_mut().rev() {
            *slot = index % m;
            index /= m;
        }
        Vertex { m, word }
    }

    /// Lexicographic index among the vertices of the same level:
    /// `x_1 .. x_k` maps to `sum x_j m^(k-j)`.
    pub fn index(&self) -> usize {
        self.word.iter().fold(0, |acc, &x| acc * self.m + x)
    }

    pub fn level(&self) -> usize {
        self.word.len()
    }

    pub fn letters(&self) -> &[usize] {
        &self.word
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn child(&self, x: usize) -> Self {
        assert!(x < self.m);
        let mut word = self.word.clone();
        word.push(x);
        Vertex { m: self.m, word }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.word.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// A permutation of `{0, .., m-1}` given by its image array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &i in &images {
            if i >= m || seen[i] {
                return Err(Error::InvalidPermutation(format!("{images:?} is not a bijection")));
            }
            seen[i] = true;
        }
        Ok(Permutation(images))
    }

    pub fn identity(m: usize) -> Self {
        Permutation((0..m).collect())
    }

    /// The `m`-cycle `i -> i + 1 mod m`.
    pub fn cycle(m: usize) -> Self {
        Permutation((0..m).map(|i| (i + 1) % m).collect())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    /// First `self`, then `other`.
    pub fn then(&self, other: &Permutation) -> Permutation {
        Permutation(self.0.iter().map(|&i| other.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Permutation(inv)
    }

    pub fn pow(&self, k: usize) -> Permutation {
        let mut out = Permutation::identity(self.degree());
        for _ in 0..k {
            out = out.then(self);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct Node {
    label: Permutation,
    /// Either empty (every child subtree is trivial) or exactly `m` links.
    children: Vec<Link>,
}

type Link = Option<Arc<Node>>;

fn make_node(label: Permutation, children: Vec<Link>) -> Link {
    let trivial_below = children.iter().all(Option::is_none);
    if trivial_below && label.is_identity() {
        return None;
    }
    let children = if trivial_below { Vec::new() } else { children };
    Some(Arc::new(Node { label, children }))
}

fn child_of(link: &Link, x: usize) -> Link {
    match link {
        Some(node) if !node.children.is_empty() => node.children[x].clone(),
        _ => None,
    }
}

fn label_of(link: &Link, m: usize) -> Permutation {
    match link {
        Some(node) => node.label.clone(),
        None => Permutation::identity(m),
    }
}

fn compose_links(f: &Link, g: &Link, m: usize) -> Link {
    match (f, g) {
        (None, _) => g.clone(),
        (_, None) => f.clone(),
        (Some(fnode), Some(gnode)) => {
            let label = fnode.label.then(&gnode.label);
            let children = (0..m)
                .map(|x| compose_links(&child_of(f, x), &child_of(g, fnode.label.apply(x)), m))
                .collect();
            make_node(label, children)
        }
    }
}

fn inverse_link(g: &Link, m: usize) -> Link {
    let node = g.as_ref()?;
    let inv = node.label.inverse();
    // (g^-1)|_{(x)g} = (g|_x)^-1
    let children = (0..m)
        .map(|y| inverse_link(&child_of(g, inv.apply(y)), m))
        .collect();
    make_node(inv, children)
}

fn truncate_link(link: &Link, levels: usize, m: usize) -> Link {
    if levels == 0 {
        return None;
    }
    let node = link.as_ref()?;
    let children = (0..m)
        .map(|x| truncate_link(&child_of(link, x), levels - 1, m))
        .collect();
    make_node(node.label.clone(), children)
}

fn structural_depth(link: &Link) -> usize {
    match link {
        None => 0,
        Some(node) => 1 + node.children.iter().map(structural_depth).max().unwrap_or(0),
    }
}

/// A finitary automorphism of the `m`-adic tree with labels above `depth`.
#[derive(Clone, Debug)]
pub struct Portrait {
    m: usize,
    depth: usize,
    root: Link,
}

impl PartialEq for Portrait {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.root == other.root
    }
}

impl Eq for Portrait {}

impl std::hash::Hash for Portrait {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.m.hash(state);
        self.root.hash(state);
    }
}

impl Portrait {
    pub fn identity(m: usize, depth: usize) -> Self {
        assert!(m >= 2, "tree degree must be at least 2");
        Portrait { m, depth, root: None }
    }

    /// The rooted automorphism with label `perm`, viewed at the given depth.
    pub fn rooted(perm: Permutation, depth: usize) -> Self {
        let m = perm.degree();
        assert!(depth >= 1 || perm.is_identity());
        Portrait { m, depth: depth.max(1), root: make_node(perm, Vec::new()) }
    }

    /// Automorphism whose only labels sit on level `level`, where the vertex
    /// with lexicographic index `i` carries `label(i)`.
    pub fn from_level_labels(m: usize, level: usize, label: impl Fn(usize) -> Permutation) -> Self {
        fn build(m: usize, remaining: usize, offset: usize, label: &dyn Fn(usize) -> Permutation) -> Link {
            if remaining == 0 {
                return make_node(label(offset), Vec::new());
            }
            let children = (0..m).map(|x| build(m, remaining - 1, offset * m + x, label)).collect();
            make_node(Permutation::identity(m), children)
        }
        Portrait { m, depth: level + 1, root: build(m, level, 0, &label) }
    }

    /// The automorphism acting as `inner` below `v` and trivially elsewhere.
    pub fn embed_at(v: &Vertex, inner: &Portrait) -> Result<Self> {
        if v.degree() != inner.m {
            return Err(Error::DegreeMismatch { expected: inner.m, found: v.degree() });
        }
        let m = inner.m;
        let mut link = inner.root.clone();
        for &x in v.letters().iter().rev() {
            let mut children = vec![None; m];
            children[x] = link;
            link = make_node(Permutation::identity(m), children);
        }
        Ok(Portrait { m, depth: v.level() + inner.depth, root: link })
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_identity(&self) -> bool {
        self.root.is_none()
    }

    /// Same automorphism with a larger nominal depth.
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = self.depth.max(depth);
        self
    }

    fn check_degree(&self, other: &Portrait) -> Result<()> {
        if self.m != other.m {
            return Err(Error::DegreeMismatch { expected: self.m, found: other.m });
        }
        Ok(())
    }

    /// The product `self * other`: first `self`, then `other`.
    pub fn compose(&self, other: &Portrait) -> Result<Portrait> {
        self.check_degree(other)?;
        Ok(Portrait {
            m: self.m,
            depth: self.depth.max(other.depth),
            root: compose_links(&self.root, &other.root, self.m),
        })
    }

    pub fn inverse(&self) -> Portrait {
        Portrait { m: self.m, depth: self.depth, root: inverse_link(&self.root, self.m) }
    }

    pub fn pow(&self, k: usize) -> Portrait {
        let mut out = Portrait::identity(self.m, self.depth);
        for _ in 0..k {
            out = out.compose(self).expect("same degree");
        }
        out
    }

    /// Smallest `k >= 1` with `self^k = 1`.
    pub fn order(&self) -> usize {
        let mut k = 1;
        let mut acc = self.clone();
        while !acc.is_identity() {
            acc = acc.compose(self).expect("same degree");
            k += 1;
        }
        k
    }

    fn check_vertex(&self, v: &Vertex) -> Result<()> {
        if v.degree() != self.m {
            return Err(Error::InvalidVertex(format!(
                "vertex {v} belongs to the {}-adic tree, portrait is {}-adic",
                v.degree(),
                self.m
            )));
        }
        Ok(())
    }

    /// The label `g|_v^1`.
    pub fn label_at(&self, v: &Vertex) -> Result<Permutation> {
        self.check_vertex(v)?;
        let mut link = self.root.clone();
        for &x in v.letters() {
            link = child_of(&link, x);
        }
        Ok(label_of(&link, self.m))
    }

    /// The image `(v)g`.
    pub fn image(&self, v: &Vertex) -> Result<Vertex> {
        self.check_vertex(v)?;
        let mut link = self.root.clone();
        let mut word = Vec::with_capacity(v.level());
        for &x in v.letters() {
            let y = match &link {
                Some(node) => node.label.apply(x),
                None => x,
            };
            word.push(y);
            link = child_of(&link, x);
        }
        Ok(Vertex { m: self.m, word })
    }

    /// The section `g|_v^k`: the unique automorphism of the `k`-th truncated
    /// tree with `(vu)g = (v)g (u)g|_v^k` for all `|u| <= k`.
    pub fn section(&self, v: &Vertex, k: usize) -> Result<Portrait> {
        self.check_vertex(v)?;
        let mut link = self.root.clone();
        for &x in v.letters() {
            link = child_of(&link, x);
        }
        Ok(Portrait { m: self.m, depth: k, root: truncate_link(&link, k, self.m) })
    }

    /// Restriction to the `k`-th truncated tree.
    pub fn truncate(&self, k: usize) -> Portrait {
        Portrait { m: self.m, depth: k, root: truncate_link(&self.root, k, self.m) }
    }

    /// Every nontrivial label, in depth-first lexicographic order.
    pub fn labels(&self) -> Vec<(Vertex, Permutation)> {
        fn walk(link: &Link, m: usize, word: &mut Vec<usize>, out: &mut Vec<(Vertex, Permutation)>) {
            let Some(node) = link else { return };
            if !node.label.is_identity() {
                out.push((Vertex { m, word: word.clone() }, node.label.clone()));
            }
            for (x, child) in node.children.iter().enumerate() {
                word.push(x);
                walk(child, m, word, out);
                word.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, self.m, &mut Vec::new(), &mut out);
        out
    }

    /// The action on the `m^k` vertices of level `k`, in lexicographic order.
    pub fn to_leaf_permutation(&self, k: usize) -> LeafPermutation {
        fn fill(link: &Link, m: usize, remaining: usize, src: usize, dst: usize, out: &mut [u32]) {
            if remaining == 0 {
                out[src] = dst as u32;
                return;
            }
            match link {
                None => {
                    let width = ipow(m, remaining);
                    for t in 0..width {
                        out[src * width + t] = (dst * width + t) as u32;
                    }
                }
                Some(node) => {
                    for x in 0..m {
                        let y = node.label.apply(x);
                        fill(&child_of(link, x), m, remaining - 1, src * m + x, dst * m + y, out);
                    }
                }
            }
        }
        let mut images = vec![0u32; ipow(self.m, k)];
        fill(&self.root, self.m, k, 0, 0, &mut images);
        LeafPermutation { m: self.m, depth: k, images }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_node()).expect("portrait serializes")
    }

    fn to_json_node(&self) -> PortraitJson {
        fn node_json(link: &Link, m: usize) -> Option<PortraitJson> {
            let node = link.as_ref()?;
            let children = (0..m).map(|x| node_json(&child_of(link, x), m)).collect();
            Some(PortraitJson { m, label: node.label.0.clone(), children })
        }
        node_json(&self.root, self.m).unwrap_or_else(|| PortraitJson {
            m: self.m,
            label: (0..self.m).collect(),
            children: vec![None; self.m],
        })
    }

    pub fn from_json(text: &str) -> Result<Portrait> {
        let raw: PortraitJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("portrait JSON: {e}")))?;
        Portrait::from_json_node(&raw)
    }

    fn from_json_node(raw: &PortraitJson) -> Result<Portrait> {
        fn build(raw: &PortraitJson, m: usize) -> Result<Link> {
            if raw.m != m {
                return Err(Error::DegreeMismatch { expected: m, found: raw.m });
            }
            if raw.label.len() != m || raw.children.len() != m {
                return Err(Error::InvalidInput(format!(
                    "portrait node needs {m} label entries and {m} children"
                )));
            }
            let label = Permutation::new(raw.label.clone())?;
            let children = raw
                .children
                .iter()
                .map(|c| match c {
                    None => Ok(None),
                    Some(c) => build(c, m),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(make_node(label, children))
        }
        if raw.m < 2 {
            return Err(Error::InvalidInput("portrait degree must be at least 2".into()));
        }
        let root = build(raw, raw.m)?;
        let depth = structural_depth(&root).max(1);
        Ok(Portrait { m: raw.m, depth, root })
    }
}

impl Serialize for Portrait {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_node().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Portrait {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PortraitJson::deserialize(deserializer)?;
        Portrait::from_json_node(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct PortraitJson {
    m: usize,
    label: Vec<usize>,
    children: Vec<Option<PortraitJson>>,
}

/// The action of a tree automorphism on the `m^k` vertices of level `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LeafPermutation {
    m: usize,
    depth: usize,
    images: Vec<u32>,
}

impl LeafPermutation {
    pub fn identity(m: usize, depth: usize) -> Self {
        LeafPermutation { m, depth, images: (0..ipow(m, depth) as u32).collect() }
    }

    /// Validates that `images` is a bijection preserving the tree structure.
    pub fn from_images(m: usize, depth: usize, images: Vec<u32>) -> Result<Self> {
        let n = ipow(m, depth);
        if images.len() != n {
            return Err(Error::InvalidPermutation(format!(
                "expected {n} images for depth {depth}, got {}",
                images.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in &images {
            let i = i as usize;
            if i >= n || seen[i] {
                return Err(Error::InvalidPermutation("leaf images are not a bijection".into()));
            }
            seen[i] = true;
        }
        let perm = LeafPermutation { m, depth, images };
        if !perm.is_tree_automorphism() {
            return Err(Error::InvalidPermutation("leaf permutation does not preserve the tree".into()));
        }
        Ok(perm)
    }

    pub(crate) fn from_images_unchecked(m: usize, depth: usize, images: Vec<u32>) -> Self {
        LeafPermutation { m, depth, images }
    }

    /// Siblings must be mapped to siblings at every level.
    pub fn is_tree_automorphism(&self) -> bool {
        for j in 1..self.depth {
            let width = ipow(self.m, self.depth - j);
            for block in 0..ipow(self.m, j) {
                let target = self.images[block * width] as usize / width;
                if (1..width).any(|t| self.images[block * width + t] as usize / width != target) {
                    return false;
                }
            }
        }
        true
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, leaf: usize) -> usize {
        self.images[leaf] as usize
    }

    /// Image of the level-`level` vertex with index `index`.
    pub fn vertex_image(&self, level: usize, index: usize) -> usize {
        let width = ipow(self.m, self.depth - level);
        self.images[index * width] as usize / width
    }

    /// First `self`, then `other`.
    pub fn then(&self, other: &LeafPermutation) -> LeafPermutation {
        debug_assert_eq!(self.images.len(), other.images.len());
        LeafPermutation {
            m: self.m,
            depth: self.depth,
            images: self.images.iter().map(|&i| other.images[i as usize]).collect(),
        }
    }

    pub fn inverse(&self) -> LeafPermutation {
        let mut inv = vec![0u32; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j as usize] = i as u32;
        }
        LeafPermutation { m: self.m, depth: self.depth, images: inv }
    }

    pub fn pow(&self, k: usize) -> LeafPermutation {
        let mut out = LeafPermutation::identity(self.m, self.depth);
        for _ in 0..k {
            out = out.then(self);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i as u32 == j)
    }

    /// The action on level `level < depth`.
    pub fn restrict(&self, level: usize) -> LeafPermutation {
        let images = (0..ipow(self.m, level)).map(|i| self.vertex_image(level, i) as u32).collect();
        LeafPermutation { m: self.m, depth: level, images }
    }

    /// Section at a vertex fixed by `self`, as a permutation of the leaves
    /// below it. Returns `None` when the vertex is moved.
    pub fn section_at(&self, v: &Vertex) -> Option<LeafPermutation> {
        let level = v.level();
        assert!(level <= self.depth);
        let idx = v.index();
        if self.vertex_image(level, idx) != idx {
            return None;
        }
        let width = ipow(self.m, self.depth - level);
        let base = idx * width;
        let images = (0..width).map(|t| (self.images[base + t] as usize - base) as u32).collect();
        Some(LeafPermutation { m: self.m, depth: self.depth - level, images })
    }

    /// Cycle notation on leaf indices, fixed points omitted.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.images.len()];
        let mut out = Vec::new();
        for start in 0..self.images.len() {
            if seen[start] || self.images[start] as usize == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut i = self.images[start] as usize;
            while i != start {
                seen[i] = true;
                cycle.push(i);
                i = self.images[i] as usize;
            }
            out.push(cycle);
        }
        out
    }
}
